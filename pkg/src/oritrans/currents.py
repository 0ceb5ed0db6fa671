"""Polyhedral 1-currents with vector coefficients and their 0-dimensional boundaries.

A :class:`PolyCurrent1` is always stored normalized: its atoms come from
:func:`geometry.overlay`, so they meet in zero-length sets and carry the summed
(orientation-corrected) coefficient.  Mass and energy are then plain sums.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .coefficients import Alpha, NormSpec, PhiNorm, coeff_norm, cost_C
from .geometry import Point, Polyline, Segment, overlay, parallel, split_segments, sub, to_point


class BoundaryMismatch(ValueError):
    """A current does not have the boundary an operation requires."""


def _zero(coef) -> bool:
    return all(x == 0 for x in coef)


def _add(u, v):
    return tuple(x + y for x, y in zip(u, v))


def _scale(u, s):
    return tuple(x * s for x in u)


def unit(m: int, k: int) -> tuple:
    return tuple(1 if i == k else 0 for i in range(m))


def _check_ring(ring: str, coef):
    if ring == "int":
        for x in coef:
            if isinstance(x, float) or (isinstance(x, Fraction) and x.denominator != 1):
                raise ValueError(f"non-integer coefficient {coef} in an integer current")


def _as_ring(ring: str, coef) -> tuple:
    if ring == "int":
        return tuple(int(x) for x in coef)
    return tuple(coef)


@dataclass(frozen=True)
class AtomicMeasure0:
    """Finite sum of Dirac masses with vector coefficients."""

    m: int
    atoms: tuple  # ((point, coef), ...) sorted by point, no zero coefficients

    @classmethod
    def build(cls, m: int, pairs: Iterable) -> "AtomicMeasure0":
        acc: dict = {}
        for p, c in pairs:
            c = tuple(c)
            if len(c) != m:
                raise ValueError(f"coefficient length {len(c)} != {m}")
            p = to_point(p)
            acc[p] = _add(acc[p], c) if p in acc else c
        return cls(m, tuple(sorted((p, c) for p, c in acc.items() if not _zero(c))))

    @classmethod
    def empty(cls, m: int) -> "AtomicMeasure0":
        return cls(m, ())

    def as_dict(self) -> dict:
        return dict(self.atoms)

    def __add__(self, other: "AtomicMeasure0") -> "AtomicMeasure0":
        return AtomicMeasure0.build(self.m, list(self.atoms) + list(other.atoms))

    def __neg__(self) -> "AtomicMeasure0":
        return AtomicMeasure0(self.m, tuple((p, _scale(c, -1)) for p, c in self.atoms))

    def __sub__(self, other):
        return self + (-other)

    def __bool__(self):
        return bool(self.atoms)

    def points(self) -> list:
        return [p for p, _ in self.atoms]

    def channel_balance(self) -> list:
        """Per channel, total positive part minus total negative part (zero for boundaries)."""
        out = []
        for k in range(self.m):
            out.append(sum((c[k] for _, c in self.atoms), 0))
        return out


@dataclass(frozen=True)
class PolyCurrent1:
    """Normalized polyhedral 1-current ``sum [segment, tangent, coef]``."""

    m: int
    ring: str  # "int" | "real"
    atoms: tuple  # ((Segment, coef), ...)

    @classmethod
    def build(cls, m: int, pieces: Iterable, ring: str = "int") -> "PolyCurrent1":
        """Normalize an arbitrary list of ``(Segment, coefficient)`` pieces."""
        if ring not in ("int", "real"):
            raise ValueError(f"unknown ring {ring!r}")
        segs, coefs = [], []
        for seg, c in pieces:
            c = tuple(c)
            if len(c) != m:
                raise ValueError(f"coefficient length {len(c)} != {m}")
            _check_ring(ring, c)
            segs.append(seg)
            coefs.append(_as_ring(ring, c))
        ov = overlay(segs)
        atoms = []
        zero = tuple(0 for _ in range(m))
        for seg, cov in ov.atoms:
            c = zero
            for idx, sign in cov:
                c = _add(c, _scale(coefs[idx], sign))
            if not _zero(c):
                atoms.append((seg, c))
        return cls(m, ring, tuple(atoms))

    @classmethod
    def zero(cls, m: int, ring: str = "int") -> "PolyCurrent1":
        return cls(m, ring, ())

    @classmethod
    def from_path(cls, path: Polyline, coef, ring: str = "int") -> "PolyCurrent1":
        coef = tuple(coef)
        return cls.build(len(coef), [(s, coef) for s in path.segments()], ring)

    def pieces(self) -> list:
        return list(self.atoms)

    def __add__(self, other: "PolyCurrent1") -> "PolyCurrent1":
        if other.m != self.m:
            raise ValueError("dimension mismatch")
        ring = "int" if self.ring == other.ring == "int" else "real"
        return PolyCurrent1.build(self.m, list(self.atoms) + list(other.atoms), ring)

    def __neg__(self) -> "PolyCurrent1":
        return PolyCurrent1(self.m, self.ring, tuple((s, _scale(c, -1)) for s, c in self.atoms))

    def __sub__(self, other):
        return self + (-other)

    def __bool__(self):
        return bool(self.atoms)

    def component(self, k: int) -> "PolyCurrent1":
        """Single-channel current made of the k-th coordinate."""
        return PolyCurrent1(1, self.ring, tuple((s, (c[k],)) for s, c in self.atoms if c[k] != 0))

    def map_coefficients(self, m: int, fn, ring: str | None = None) -> "PolyCurrent1":
        return PolyCurrent1.build(m, [(s, fn(c)) for s, c in self.atoms], ring or self.ring)

    def support_length(self) -> float:
        return math.fsum(s.length() for s, _ in self.atoms)

    def vertices(self) -> set:
        return {p for s, _ in self.atoms for p in (s.a, s.b)}


# ---------------------------------------------------------------------------
# boundary, mass, energy


def boundary(T: PolyCurrent1) -> AtomicMeasure0:
    pairs = []
    for seg, c in T.atoms:
        pairs.append((seg.b, c))
        pairs.append((seg.a, _scale(c, -1)))
    return AtomicMeasure0.build(T.m, pairs)


def mass(T: PolyCurrent1, spec: NormSpec) -> float:
    if spec.m is not None and spec.m != T.m:
        raise ValueError(f"norm dimension {spec.m} does not match current dimension {T.m}")
    return math.fsum(coeff_norm(c, spec) * s.length() for s, c in T.atoms)


def energy_alpha_phi(T: PolyCurrent1, phi: PhiNorm, alpha) -> float:
    """Integral of the multi-material cost over the current (coefficients read as n x n)."""
    n = math.isqrt(T.m)
    if n * n != T.m:
        raise ValueError(f"coefficient dimension {T.m} is not a square")
    alpha = Alpha.of(alpha)
    return math.fsum(cost_C(c, phi, alpha) * s.length() for s, c in T.atoms)


# ---------------------------------------------------------------------------
# mailing data


@dataclass(frozen=True)
class MailingInstance:
    points: tuple
    G: tuple  # n x n tuple of tuples of nonnegative ints

    def __post_init__(self):
        n = len(self.points)
        if len(set(self.points)) != n:
            raise ValueError("instance points must be distinct")
        if len(self.G) != n or any(len(row) != n for row in self.G):
            raise ValueError("G must be an n x n matrix")
        for i, row in enumerate(self.G):
            for j, g in enumerate(row):
                if int(g) != g or g < 0:
                    raise ValueError(f"g[{i}][{j}] = {g} is not a nonnegative integer")
                if i == j and g != 0:
                    raise ValueError("G must have a zero diagonal")

    @classmethod
    def of(cls, points, G) -> "MailingInstance":
        pts = tuple(to_point(p) for p in points)
        return cls(pts, tuple(tuple(int(x) for x in row) for row in G))

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def m(self) -> int:
        return self.n * self.n

    @property
    def N(self) -> int:
        return sum(sum(row) for row in self.G)

    def channel(self, i: int, j: int) -> int:
        return i * self.n + j

    def pair_of(self, k: int) -> tuple[int, int]:
        return divmod(k, self.n)

    def demands(self) -> list[tuple[int, int, int]]:
        return [(i, j, g) for i, row in enumerate(self.G) for j, g in enumerate(row) if g]


@dataclass(frozen=True)
class PairOrdering:
    """Order of the n^2 pairs and the block of basis indices owned by each pair."""

    pairs: tuple  # ((i, j), ...) all n^2 pairs
    starts: tuple
    sizes: tuple

    @classmethod
    def row_major(cls, inst: MailingInstance) -> "PairOrdering":
        return cls.from_pairs(inst, [(i, j) for i in range(inst.n) for j in range(inst.n)])

    @classmethod
    def from_pairs(cls, inst: MailingInstance, pairs) -> "PairOrdering":
        """Pairs with zero demand may be omitted; they are appended in row-major order."""
        pairs = tuple((int(p[0]), int(p[1])) for p in pairs)
        every = [(i, j) for i in range(inst.n) for j in range(inst.n)]
        if len(set(pairs)) != len(pairs) or not set(pairs) <= set(every):
            raise ValueError("an ordering lists distinct pairs (i, j) of the instance")
        missing = [p for p in every if p not in set(pairs)]
        if any(inst.G[i][j] for i, j in missing):
            raise ValueError("an ordering must list every pair with positive demand")
        pairs = pairs + tuple(missing)
        starts, sizes, pos = [], [], 0
        for i, j in pairs:
            starts.append(pos)
            sizes.append(inst.G[i][j])
            pos += inst.G[i][j]
        return cls(pairs, tuple(starts), tuple(sizes))

    @property
    def N(self) -> int:
        return sum(self.sizes)

    def block(self, i: int, j: int) -> range:
        k = self.pairs.index((i, j))
        return range(self.starts[k], self.starts[k] + self.sizes[k])

    def theta(self, i: int, j: int) -> tuple:
        blk = self.block(i, j)
        return tuple(1 if t in blk else 0 for t in range(self.N))

    def consistent_with(self, inst: MailingInstance) -> bool:
        return all(inst.G[i][j] == s for (i, j), s in zip(self.pairs, self.sizes))


def build_boundary_mailing(inst: MailingInstance) -> AtomicMeasure0:
    """Boundary with coefficients in Z^{n x n}: channel (i, j) is g_ij (delta_pj - delta_pi)."""
    m = inst.m
    pairs = []
    for i, j, g in inst.demands():
        e = _scale(unit(m, inst.channel(i, j)), g)
        pairs.append((inst.points[j], e))
        pairs.append((inst.points[i], _scale(e, -1)))
    return AtomicMeasure0.build(m, pairs)


def build_boundary_relaxed(inst: MailingInstance, ordering: PairOrdering) -> AtomicMeasure0:
    """Boundary in Z^N: every basis channel is one unit flow between its pair's points."""
    if not ordering.consistent_with(inst):
        raise ValueError("pair ordering does not match the instance matrix")
    pairs = []
    for (i, j) in ordering.pairs:
        if inst.G[i][j] == 0:
            continue
        th = ordering.theta(i, j)
        pairs.append((inst.points[j], th))
        pairs.append((inst.points[i], _scale(th, -1)))
    return AtomicMeasure0.build(ordering.N, pairs)


# ---------------------------------------------------------------------------
# decomposition into paths and cycles


@dataclass(frozen=True)
class Decomposition:
    paths: tuple  # unit-flow Polylines oriented along the flow
    cycles: tuple  # closed vertex tuples (first == last)

    def cycle_length(self) -> float:
        return math.fsum(Polyline(c).length() for c in self.cycles)


def _straighten(vertices: list) -> tuple:
    """Drop interior vertices where the polyline continues in the same direction."""
    out = [vertices[0]]
    for k in range(1, len(vertices) - 1):
        u = sub(vertices[k], out[-1])
        v = sub(vertices[k + 1], vertices[k])
        if parallel(u, v) and sum(x * y for x, y in zip(u, v)) > 0:
            continue
        out.append(vertices[k])
    out.append(vertices[-1])
    return tuple(out)


def decompose_component(T: PolyCurrent1, expected_boundary: AtomicMeasure0 | None = None) -> Decomposition:
    """Split an integer single-channel current into unit paths and cycles.

    Paths follow the flow direction on every atom, start at negative boundary
    atoms and end at positive ones, and are geometrically simple.
    """
    if T.m != 1:
        raise ValueError("decompose_component expects a single-channel current")
    if T.ring != "int":
        raise ValueError("decompose_component expects integer coefficients")
    bd = boundary(T)
    if expected_boundary is not None and bd != expected_boundary:
        raise BoundaryMismatch("current boundary differs from the expected boundary")
    if sum(c[0] for _, c in bd.atoms) != 0:
        raise BoundaryMismatch("boundary is not balanced")

    pieces = split_segments([s for s, _ in T.atoms], crossings=True)
    out_edges = defaultdict(list)  # vertex -> [edge ids]
    heads, tails, cap = [], [], []
    for piece, parent in pieces:
        c = T.atoms[parent][1][0]
        a, b = (piece.a, piece.b) if c > 0 else (piece.b, piece.a)
        out_edges[a].append(len(cap))
        tails.append(a)
        heads.append(b)
        cap.append(abs(c))

    supply = {p: -c[0] for p, c in bd.atoms if c[0] < 0}
    demand = {p: c[0] for p, c in bd.atoms if c[0] > 0}
    cycles: list = []

    def next_edge(v):
        for e in out_edges[v]:
            if cap[e] > 0:
                return e
        raise BoundaryMismatch(f"flow is not conserved at {v}")

    def peel(walk_edges):
        for e in walk_edges:
            cap[e] -= 1
        cycles.append(tuple([tails[walk_edges[0]]] + [heads[e] for e in walk_edges]))

    paths = []
    for src in sorted(supply):
        while supply[src] > 0:
            verts, edges = [src], []
            pos = {src: 0}
            while True:
                v = verts[-1]
                if v != src and demand.get(v, 0) > 0:
                    break
                e = next_edge(v)
                w = heads[e]
                if w in pos:
                    k = pos[w]
                    peel(edges[k:] + [e])
                    for u in verts[k + 1:]:
                        del pos[u]
                    del verts[k + 1:]
                    del edges[k:]
                    continue
                pos[w] = len(verts)
                verts.append(w)
                edges.append(e)
            for e in edges:
                cap[e] -= 1
            supply[src] -= 1
            demand[verts[-1]] -= 1
            paths.append(Polyline(_straighten(verts)))

    for e0 in range(len(cap)):
        while cap[e0] > 0:
            verts, edges = [tails[e0]], []
            pos = {tails[e0]: 0}
            e = e0
            while True:
                w = heads[e]
                edges.append(e)
                if w in pos:
                    k = pos[w]
                    peel(edges[k:])
                    break
                pos[w] = len(verts)
                verts.append(w)
                e = next_edge(w)
    return Decomposition(tuple(paths), tuple(cycles))


def current_from_paths(m: int, labeled: Iterable) -> PolyCurrent1:
    """Sum of ``[path]`` with the given coefficient for each ``(Polyline, coef)``."""
    pieces = [(s, coef) for path, coef in labeled for s in path.segments()]
    return PolyCurrent1.build(m, pieces, "int")


def remove_cycles(T: PolyCurrent1, phi: PhiNorm | None = None, alpha=None) -> PolyCurrent1:
    """Keep only the path part of every channel's decomposition.

    ``phi`` and ``alpha`` are accepted for symmetry with the energy they never
    increase; the construction itself does not depend on them.
    """
    if T.ring != "int":
        raise ValueError("cycle removal is defined for integer currents")
    labeled = []
    for k in range(T.m):
        comp = T.component(k)
        if not comp:
            continue
        dec = decompose_component(comp)
        e = unit(T.m, k)
        labeled.extend((p, e) for p in dec.paths)
    return current_from_paths(T.m, labeled)


def lift_to_relaxed(T: PolyCurrent1, inst: MailingInstance, ordering: PairOrdering | None = None) -> PolyCurrent1:
    """Canonical Z^N current with 0/+-1 coefficients carrying the same cost pointwise."""
    ordering = ordering or PairOrdering.row_major(inst)
    if not ordering.consistent_with(inst):
        raise ValueError("pair ordering does not match the instance matrix")
    if T.m != inst.m:
        raise ValueError("current dimension does not match the instance")
    if boundary(T) != build_boundary_mailing(inst):
        raise BoundaryMismatch("the current does not bound the mailing datum")
    N = ordering.N
    labeled = []
    for k in range(T.m):
        comp = T.component(k)
        if not comp:
            continue
        i, j = inst.pair_of(k)
        dec = decompose_component(comp)
        if dec.cycles:
            raise ValueError(f"channel ({i}, {j}) carries cycles; call remove_cycles first")
        blk = ordering.block(i, j)
        for ell, path in enumerate(dec.paths):
            labeled.append((path, unit(N, blk[ell])))
    return current_from_paths(N, labeled)


def project_from_relaxed(R: PolyCurrent1, inst: MailingInstance, ordering: PairOrdering | None = None) -> PolyCurrent1:
    """Sum each pair's block of coordinates back into its (i, j) entry."""
    ordering = ordering or PairOrdering.row_major(inst)
    if R.m != ordering.N:
        raise ValueError("relaxed current dimension does not match the ordering")
    owner = {}
    for (i, j), start, size in zip(ordering.pairs, ordering.starts, ordering.sizes):
        for t in range(start, start + size):
            owner[t] = inst.channel(i, j)
    m = inst.m

    def fold(c):
        out = [0] * m
        for t, x in enumerate(c):
            out[owner[t]] += x
        return tuple(out)

    return R.map_coefficients(m, fold)
