"""Exhaustive oracles on a rectangular lattice.

Both oracles reduce an object to per-edge counts ``(P, M)``: the number of
units crossing the edge along / against its canonical orientation.  The
energy of a lattice object is ``spacing * fsum(cost[P_e, M_e])`` for the
family (where P, M are the path counts) and for the current (where P, M are
the summed positive / negative channel values).  Per-edge cost is monotone in
``(P, M)`` and so is the sum, which is what makes the two optima comparable
bit for bit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..coefficients import Alpha, PhiNorm
from ..currents import MailingInstance, PolyCurrent1, _straighten, unit
from ..geometry import Polyline, Segment, to_point
from ..mailing import LabeledPath, PathFamily
from .report import BudgetExceeded, SolveReport

MAX_NODES_PER_SIDE = 5
MAX_UNITS = 4
DEFAULT_MAX_STATES = 5_000_000
DEFAULT_MAX_PRODUCT = 200_000_000


@dataclass(frozen=True)
class Lattice:
    """``nx`` by ``ny`` nodes at ``origin + spacing * (ix, iy)``."""

    nx: int
    ny: int
    spacing: Fraction = Fraction(1)
    origin: tuple = (Fraction(0), Fraction(0))

    @classmethod
    def of(cls, nx, ny, spacing=1, origin=(0, 0)) -> "Lattice":
        return cls(int(nx), int(ny), Fraction(spacing), to_point(origin))

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    def node_point(self, v: int) -> tuple:
        ix, iy = v % self.nx, v // self.nx
        return (self.origin[0] + self.spacing * ix, self.origin[1] + self.spacing * iy)

    def node_of(self, p) -> int:
        p = to_point(p)
        fx = (p[0] - self.origin[0]) / self.spacing
        fy = (p[1] - self.origin[1]) / self.spacing
        if fx.denominator != 1 or fy.denominator != 1 or not (0 <= fx < self.nx and 0 <= fy < self.ny):
            raise ValueError(f"point {p} is not a lattice node")
        return int(fx) + self.nx * int(fy)

    def edges(self) -> list[tuple[int, int]]:
        """Edges ``(u, v)`` with ``u < v``; u -> v is the canonical (+x or +y) direction."""
        out = []
        for iy in range(self.ny):
            for ix in range(self.nx):
                v = ix + self.nx * iy
                if ix + 1 < self.nx:
                    out.append((v, v + 1))
                if iy + 1 < self.ny:
                    out.append((v, v + self.nx))
        return out


def _guard(lat: Lattice, inst: MailingInstance):
    if lat.nx > MAX_NODES_PER_SIDE or lat.ny > MAX_NODES_PER_SIDE:
        raise BudgetExceeded(f"lattice {lat.nx}x{lat.ny} exceeds {MAX_NODES_PER_SIDE}x{MAX_NODES_PER_SIDE}")
    if inst.N > MAX_UNITS:
        raise BudgetExceeded(f"total demand {inst.N} exceeds {MAX_UNITS}")


class _Graph:
    def __init__(self, lat: Lattice):
        self.lat = lat
        self.edges = lat.edges()
        self.index = {e: k for k, e in enumerate(self.edges)}
        self.adj = {v: [] for v in range(lat.n_nodes)}
        for k, (u, v) in enumerate(self.edges):
            self.adj[u].append((v, k, 1))
            self.adj[v].append((u, k, -1))
        for v in self.adj:
            self.adj[v].sort()

    @property
    def E(self) -> int:
        return len(self.edges)


def lattice_paths(lat: Lattice, a: int, b: int) -> tuple[list[list[int]], np.ndarray]:
    """All simple node paths a -> b and their signed edge-incidence rows."""
    g = _Graph(lat)
    paths, rows = [], []
    verts, signs = [a], np.zeros(g.E, dtype=np.int8)
    on_path = {a}

    def dfs(v):
        if v == b:
            paths.append(list(verts))
            rows.append(signs.copy())
            return
        for w, k, s in g.adj[v]:
            if w in on_path:
                continue
            on_path.add(w)
            verts.append(w)
            signs[k] = s
            dfs(w)
            signs[k] = 0
            verts.pop()
            on_path.discard(w)

    dfs(a)
    return paths, np.array(rows, dtype=np.int8).reshape(len(rows), g.E)


def lattice_channel_flows(lat: Lattice, a: int, b: int, g: int) -> np.ndarray:
    """Every integer flow with |f_e| <= g and divergence g*(delta_b - delta_a).

    Nodes are processed in index order; each node fixes the edges to higher
    nodes so that its own conservation law holds.
    """
    graph = _Graph(lat)
    V = lat.n_nodes
    div = [0] * V
    div[b] += g
    div[a] -= g
    forward = {v: [(w, k) for w, k, s in graph.adj[v] if s == 1] for v in range(V)}
    backward = {v: [(w, k) for w, k, s in graph.adj[v] if s == -1] for v in range(V)}
    f = [0] * graph.E
    out = []

    def rec(v):
        if v == V:
            out.append(list(f))
            return
        # inflow on processed edges (head = v) minus outflow on free edges must equal div[v]
        inflow = sum(f[k] for _, k in backward[v])
        free = [k for _, k in forward[v]]
        need = inflow - div[v]  # required total outflow over free edges
        if not free:
            if need == 0:
                rec(v + 1)
            return
        for vals in itertools.product(range(-g, g + 1), repeat=len(free) - 1):
            last = need - sum(vals)
            if -g <= last <= g:
                for k, x in zip(free, vals + (last,)):
                    f[k] = x
                rec(v + 1)
        for k in free:
            f[k] = 0

    rec(0)
    return np.array(out, dtype=np.int8).reshape(len(out), graph.E)


def cost_table(phi: PhiNorm, alpha, size: int) -> np.ndarray:
    alpha = Alpha.of(alpha)
    t = np.zeros((size + 1, size + 1))
    for P in range(size + 1):
        for M in range(size + 1):
            t[P, M] = phi(alpha.pow(M), alpha.pow(P))
    return t


def lattice_energy(P, M, table: np.ndarray, spacing) -> float:
    return math.fsum(table[int(p), int(q)] for p, q in zip(P, M)) * float(spacing)


def _combine(options: list[np.ndarray], max_states: int):
    """Fold channel options ``(K_c, 2E)`` into unique summed states with one representative each."""
    width = options[0].shape[1] if options else 0
    states = np.zeros((1, width), dtype=np.int16)
    reps = np.zeros((1, 0), dtype=np.int64)
    for opts in options:
        S, K = states.shape[0], opts.shape[0]
        if S * K > max_states:
            raise BudgetExceeded(f"enumeration of {S * K} states exceeds the budget {max_states}")
        merged = (states[:, None, :] + opts[None, :, :].astype(np.int16)).reshape(S * K, -1)
        idx_s = np.repeat(np.arange(S), K)
        idx_k = np.tile(np.arange(K), S)
        states, first = np.unique(merged, axis=0, return_index=True)
        reps = np.column_stack([reps[idx_s[first]], idx_k[first]])
    return states, reps


def _scan_min(states, reps, last: np.ndarray, table: np.ndarray, spacing, max_product: int,
              chunk: int = 1 << 20):
    """Minimise over ``states x last`` without materialising the product.

    Returns the representative choice vector and the fsum energy.  Candidates
    within a relative 1e-9 of the running float minimum are re-scored exactly.
    """
    S, K = states.shape[0], last.shape[0]
    if S * K > max_product:
        raise BudgetExceeded(f"enumeration of {S * K} objects exceeds the budget {max_product}")
    E = states.shape[1] // 2
    last16 = last.astype(np.int16)
    rows = max(1, chunk // max(K, 1))
    cands: list = []
    lo = math.inf
    for s0 in range(0, S, rows):
        block = states[s0:s0 + rows, None, :] + last16[None, :, :]
        approx = table[block[..., :E], block[..., E:]].sum(axis=2)
        m = approx.min()
        if m > lo + 1e-9 * max(1.0, abs(lo)):
            continue
        lo = min(lo, m)
        for a, b in np.argwhere(approx <= lo + 1e-9 * max(1.0, abs(lo))):
            cands.append((s0 + int(a), int(b), block[a, b].copy()))
    best, best_val = None, math.inf
    for a, b, st in cands:
        val = lattice_energy(st[:E], st[E:], table, spacing)
        if val < best_val:
            best, best_val = np.append(reps[a], b), val
    return best, best_val


def _optimise(options: list[np.ndarray], table, spacing, max_states, max_product):
    states, reps = _combine(options[:-1], max_states)
    if not options[:-1]:
        states = np.zeros((1, options[-1].shape[1]), dtype=np.int16)
    return _scan_min(states, reps, options[-1], table, spacing, max_product)


def _path_polyline(lat: Lattice, nodes: list[int]) -> Polyline:
    return Polyline(_straighten([lat.node_point(v) for v in nodes]))


def _family_options(lat, inst):
    """Per commodity: the list of path multisets and their (P, M) rows."""
    per = []
    for i, j, g in inst.demands():
        a, b = lat.node_of(inst.points[i]), lat.node_of(inst.points[j])
        paths, rows = lattice_paths(lat, a, b)
        combos = list(itertools.combinations_with_replacement(range(len(paths)), g))
        sel = rows[np.array(combos, dtype=np.int64)]  # (K, g, E)
        P = (sel > 0).sum(axis=1)
        M = (sel < 0).sum(axis=1)
        per.append(((i, j), paths, combos, np.hstack([P, M]).astype(np.int8)))
    return per


def brute_force_lattice_mailing(inst: MailingInstance, lat: Lattice, phi: PhiNorm, alpha,
                                max_states: int = DEFAULT_MAX_STATES,
                                max_product: int = DEFAULT_MAX_PRODUCT) -> SolveReport:
    """Global optimum over families of simple lattice paths."""
    _guard(lat, inst)
    alpha = Alpha.of(alpha)
    config = {"grid": [lat.nx, lat.ny], "spacing": str(lat.spacing), "phi": phi.label(),
              "alpha": str(alpha.value), "max_states": max_states}
    if inst.N == 0:
        return SolveReport(PathFamily(inst, ()), 0.0, {"families": 1, "states": 1}, config)
    per = _family_options(lat, inst)
    opts = [o for *_, o in per]
    considered = math.prod(o.shape[0] for o in opts)
    choice_vec, value = _optimise(opts, cost_table(phi, alpha, inst.N), lat.spacing, max_states, max_product)
    paths = []
    for (pair, plist, combos, _), choice in zip(per, choice_vec):
        for pidx in combos[choice]:
            paths.append(LabeledPath(pair, _path_polyline(lat, plist[pidx])))
    counts = {"families": considered,
              "paths_per_commodity": {f"{i},{j}": len(pl) for (i, j), pl, _, _ in per}}
    return SolveReport(PathFamily(inst, tuple(paths)), value, counts, config)


def _flow_options(lat, inst):
    per = []
    for i, j, g in inst.demands():
        a, b = lat.node_of(inst.points[i]), lat.node_of(inst.points[j])
        flows = lattice_channel_flows(lat, a, b, g)
        P = np.maximum(flows, 0)
        M = np.maximum(-flows, 0)
        per.append(((i, j), flows, np.hstack([P, M]).astype(np.int8)))
    return per


def lattice_current(lat: Lattice, inst: MailingInstance, channel_flows: dict) -> PolyCurrent1:
    """Assemble a Z^{n x n} current from per-commodity edge flows."""
    edges = lat.edges()
    m = inst.m
    pieces = []
    for (i, j), f in channel_flows.items():
        e = unit(m, inst.channel(i, j))
        for (u, v), x in zip(edges, f):
            if x:
                pieces.append((Segment(lat.node_point(u), lat.node_point(v)), tuple(int(x) * c for c in e)))
    return PolyCurrent1.build(m, pieces, "int")


def brute_force_lattice_current(inst: MailingInstance, lat: Lattice, phi: PhiNorm, alpha,
                                max_states: int = DEFAULT_MAX_STATES,
                                max_product: int = DEFAULT_MAX_PRODUCT) -> SolveReport:
    """Global optimum over integer lattice currents with |theta_ij| <= g_ij per edge."""
    _guard(lat, inst)
    alpha = Alpha.of(alpha)
    config = {"grid": [lat.nx, lat.ny], "spacing": str(lat.spacing), "phi": phi.label(),
              "alpha": str(alpha.value), "max_states": max_states}
    if inst.N == 0:
        return SolveReport(PolyCurrent1.zero(inst.m), 0.0, {"currents": 1, "states": 1}, config)
    per = _flow_options(lat, inst)
    opts = [o for *_, o in per]
    considered = math.prod(o.shape[0] for o in opts)
    size = sum(int(o.max(initial=0)) for o in opts)
    choice_vec, value = _optimise(opts, cost_table(phi, alpha, size), lat.spacing, max_states, max_product)
    chosen = {pair: flows[k] for (pair, flows, _), k in zip(per, choice_vec)}
    counts = {"currents": considered,
              "flows_per_commodity": {f"{i},{j}": int(fl.shape[0]) for (i, j), fl, _ in per}}
    return SolveReport(lattice_current(lat, inst, chosen), value, counts, config)
