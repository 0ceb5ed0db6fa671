"""Exact rational primitives: points, oriented segments, polylines and the
collinear overlay used to integrate over networks.

Points are plain tuples of :class:`fractions.Fraction`.  Every predicate here
is evaluated exactly; floats only appear when a Euclidean length is requested.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

Point = tuple  # tuple[Fraction, ...]


def to_fraction(x) -> Fraction:
    """Parse ints, Fractions, floats and strings such as ``"3/2"`` exactly."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not coordinates")
    if isinstance(x, (int, str)):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite coordinate {x!r}")
        return Fraction(x)
    # numpy scalars and friends
    return Fraction(str(x)) if hasattr(x, "dtype") else Fraction(x)


def to_point(coords: Iterable) -> Point:
    p = tuple(to_fraction(c) for c in coords)
    if len(p) not in (2, 3):
        raise ValueError(f"points must have 2 or 3 coordinates, got {len(p)}")
    return p


def sub(a: Point, b: Point) -> Point:
    return tuple(x - y for x, y in zip(a, b))


def add(a: Point, b: Point) -> Point:
    return tuple(x + y for x, y in zip(a, b))


def scale(a: Point, t) -> Point:
    return tuple(x * t for x in a)


def dot(a: Point, b: Point):
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def cross2(a: Point, b: Point):
    return a[0] * b[1] - a[1] * b[0]


def is_zero(v: Point) -> bool:
    return all(x == 0 for x in v)


def parallel(u: Point, v: Point) -> bool:
    """True iff u and v are linearly dependent (exact)."""
    if len(u) == 2:
        return cross2(u, v) == 0
    return all(u[i] * v[j] - u[j] * v[i] == 0 for i, j in ((0, 1), (0, 2), (1, 2)))


def point_to_float(p: Point) -> tuple[float, ...]:
    return tuple(float(x) for x in p)


def format_point(p: Point) -> list:
    """JSON-friendly coordinates: ints stay ints, other rationals become "p/q"."""
    return [int(x) if x.denominator == 1 else f"{x.numerator}/{x.denominator}" for x in p]


@dataclass(frozen=True)
class Segment:
    """Oriented straight segment ``a -> b`` with ``a != b``."""

    a: Point
    b: Point

    def __post_init__(self):
        if len(self.a) != len(self.b):
            raise ValueError("segment endpoints have different dimensions")
        if self.a == self.b:
            raise ValueError(f"degenerate segment at {self.a}")

    @classmethod
    def of(cls, a, b) -> "Segment":
        return cls(to_point(a), to_point(b))

    @property
    def dim(self) -> int:
        return len(self.a)

    @property
    def vector(self) -> Point:
        return sub(self.b, self.a)

    def squared_length(self) -> Fraction:
        v = self.vector
        return dot(v, v)

    def length(self) -> float:
        return math.sqrt(self.squared_length())

    def tangent(self) -> tuple[float, ...]:
        """Float unit tangent (b - a)/|b - a|."""
        ell = self.length()
        return tuple(float(x) / ell for x in self.vector)

    def reversed(self) -> "Segment":
        return Segment(self.b, self.a)

    def point_at(self, t) -> Point:
        return add(self.a, scale(self.vector, t))

    def param_of(self, p: Point) -> Fraction:
        """Affine parameter of a point assumed to lie on the supporting line."""
        v = self.vector
        return dot(sub(p, self.a), v) / dot(v, v)

    def contains(self, p: Point) -> bool:
        """Closed-segment membership, exact."""
        w = sub(p, self.a)
        if not parallel(w, self.vector):
            return False
        t = self.param_of(p)
        return 0 <= t <= 1


def length(s: Segment) -> float:
    return s.length()


@dataclass(frozen=True)
class Polyline:
    vertices: tuple

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise ValueError("a polyline needs at least two vertices")
        for u, v in zip(self.vertices, self.vertices[1:]):
            if u == v:
                raise ValueError(f"repeated consecutive vertex {u}")

    @classmethod
    def of(cls, vertices: Iterable) -> "Polyline":
        return cls(tuple(to_point(v) for v in vertices))

    def segments(self) -> list[Segment]:
        return [Segment(u, v) for u, v in zip(self.vertices, self.vertices[1:])]

    @property
    def start(self) -> Point:
        return self.vertices[0]

    @property
    def end(self) -> Point:
        return self.vertices[-1]

    def length(self) -> float:
        return math.fsum(s.length() for s in self.segments())

    def reversed(self) -> "Polyline":
        return Polyline(tuple(reversed(self.vertices)))


# ---------------------------------------------------------------------------
# intersections


def segment_intersection(s: Segment, t: Segment):
    """Exact intersection of two closed segments.

    Returns ``[]``, ``[p]`` for a single point, or ``[p, q]`` for a collinear
    overlap bounded by the distinct points ``p`` and ``q``.
    """
    u, v = s.vector, t.vector
    w = sub(t.a, s.a)
    if parallel(u, v):
        if not parallel(w, u):
            return []
        uu = dot(u, u)
        t0 = dot(sub(t.a, s.a), u) / uu
        t1 = dot(sub(t.b, s.a), u) / uu
        lo, hi = max(Fraction(0), min(t0, t1)), min(Fraction(1), max(t0, t1))
        if lo > hi:
            return []
        if lo == hi:
            return [s.point_at(lo)]
        return [s.point_at(lo), s.point_at(hi)]
    if s.dim == 2:
        den = cross2(u, v)
        a = cross2(w, v) / den
        b = cross2(w, u) / den
    else:
        # solve a*u - b*v = w in the least-squares sense, then verify exactly
        uu, uv, vv = dot(u, u), dot(u, v), dot(v, v)
        wu, wv = dot(w, u), dot(w, v)
        den = uu * vv - uv * uv
        a = (wu * vv - wv * uv) / den
        b = (wu * uv - wv * uu) / den
        if s.point_at(a) != t.point_at(b):
            return []
    if 0 <= a <= 1 and 0 <= b <= 1:
        return [s.point_at(a)]
    return []


def is_simple(p: Polyline) -> bool:
    """No two non-adjacent pieces meet; adjacent pieces share only their vertex."""
    segs = p.segments()
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            x = segment_intersection(segs[i], segs[j])
            if not x:
                continue
            if j == i + 1 and x == [segs[i].b]:
                continue
            return False
    return True


# ---------------------------------------------------------------------------
# overlay


@dataclass(frozen=True)
class OverlayDecomposition:
    """Atoms with their coverage lists ``(input index, sign)``."""

    atoms: tuple  # tuple[tuple[Segment, tuple[tuple[int, int], ...]], ...]

    def __len__(self):
        return len(self.atoms)

    def segments(self) -> list[Segment]:
        return [seg for seg, _ in self.atoms]

    def covering(self, index: int) -> list[tuple[Segment, int]]:
        """Atoms covering input ``index`` in atom order, with their signs."""
        return [(seg, s) for seg, cov in self.atoms for i, s in cov if i == index]


def line_key(s: Segment):
    """Canonical direction (first nonzero component = 1) and foot point."""
    v = s.vector
    lead = next(x for x in v if x != 0)
    u = tuple(x / lead for x in v)
    foot = sub(s.a, scale(u, dot(s.a, u) / dot(u, u)))
    return u, foot


def overlay(inputs: Sequence[Segment]) -> OverlayDecomposition:
    """Split collinear overlapping inputs into shared atoms.

    Atoms are oriented along the canonical direction of their line, so the
    geometry does not depend on how the inputs are oriented.
    """
    lines = defaultdict(list)
    for idx, s in enumerate(inputs):
        u, foot = line_key(s)
        ta, tb = dot(s.a, u), dot(s.b, u)
        lines[(u, foot)].append((idx, ta, tb))
    atoms = []
    for (u, foot) in sorted(lines):
        members = lines[(u, foot)]
        uu = dot(u, u)
        cuts = sorted({t for _, ta, tb in members for t in (ta, tb)})
        for lo, hi in zip(cuts, cuts[1:]):
            cov = []
            for idx, ta, tb in members:
                if min(ta, tb) <= lo and hi <= max(ta, tb):
                    cov.append((idx, 1 if tb > ta else -1))
            if cov:
                seg = Segment(add(foot, scale(u, lo / uu)), add(foot, scale(u, hi / uu)))
                atoms.append((seg, tuple(sorted(cov))))
    return OverlayDecomposition(tuple(atoms))


def split_segments(segments: Sequence[Segment], points: Iterable[Point] = (), crossings: bool = True):
    """Subdivide segments at the given points and (optionally) at pairwise
    transversal intersections.

    Returns a list of ``(piece, parent index)`` with pieces oriented like their
    parent and listed from ``a`` to ``b``.
    """
    cuts = [set() for _ in segments]
    pts = list(points)
    for i, s in enumerate(segments):
        for p in pts:
            if p != s.a and p != s.b and s.contains(p):
                cuts[i].add(s.param_of(p))
    if crossings:
        for i in range(len(segments)):
            for j in range(i + 1, len(segments)):
                for p in segment_intersection(segments[i], segments[j]):
                    for k in (i, j):
                        s = segments[k]
                        if p != s.a and p != s.b:
                            cuts[k].add(s.param_of(p))
    out = []
    for i, s in enumerate(segments):
        ts = [Fraction(0)] + sorted(cuts[i]) + [Fraction(1)]
        for lo, hi in zip(ts, ts[1:]):
            out.append((Segment(s.point_at(lo), s.point_at(hi)), i))
    return out


def bounding_box(points: Iterable[Point]):
    pts = [point_to_float(p) for p in points]
    lo = tuple(min(c) for c in zip(*pts))
    hi = tuple(max(c) for c in zip(*pts))
    return lo, hi
