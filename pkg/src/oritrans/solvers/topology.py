"""Tree-topology search: Steiner topologies, convex position optimisation,
the mailing search over tree topologies and the partitioned Steiner search."""
from __future__ import annotations

import heapq
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..coefficients import Alpha, PhiNorm, cost_C
from ..currents import MailingInstance, PolyCurrent1, energy_alpha_phi
from ..geometry import Segment, to_fraction, to_point
from ..steiner import Forest, PartitionedInstance, tree_to_current
from .report import BudgetExceeded, SolveReport, worker_count

MAX_MAILING_TERMINALS = 5
MAX_MAILING_STEINER = 3
MAX_STEINER_TERMINALS = 6
MERGE_RADIUS = 1e-7


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Topology:
    """Tree on terminals ``0..n-1`` and Steiner nodes ``n..n+s-1``.

    ``multiplicity`` optionally carries a coefficient vector per edge, read in
    the direction ``u -> v`` of the edge ``(u, v)``.
    """

    n_terminals: int
    n_steiner: int
    edges: tuple
    multiplicity: tuple | None = None

    @property
    def n_nodes(self) -> int:
        return self.n_terminals + self.n_steiner

    def degree(self) -> list[int]:
        deg = [0] * self.n_nodes
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def weights(self, phi: PhiNorm | None = None, alpha=None) -> np.ndarray:
        if self.multiplicity is None or phi is None:
            return np.ones(len(self.edges))
        return np.array([cost_C(t, phi, alpha) for t in self.multiplicity])

    def with_multiplicity(self, mult) -> "Topology":
        return Topology(self.n_terminals, self.n_steiner, self.edges, tuple(tuple(t) for t in mult))


def _prufer_tree(seq: tuple, size: int) -> tuple:
    degree = [1] * size
    for x in seq:
        degree[x] += 1
    leaves = [i for i in range(size) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, x), max(leaf, x)))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((min(u, v), max(u, v)))
    return tuple(sorted(edges))


def _canonical(edges: tuple, n: int, s: int) -> tuple:
    best = None
    for perm in itertools.permutations(range(n, n + s)):
        relabel = {n + k: perm[k] for k in range(s)}
        key = tuple(sorted(tuple(sorted((relabel.get(u, u), relabel.get(v, v)))) for u, v in edges))
        if best is None or key < best:
            best = key
    return best


def _slot_sequences(length: int, n: int, s: int):
    """Sequences of the given length where each Steiner label appears exactly twice."""
    steiner_slots = 2 * s
    free = length - steiner_slots
    for pos in itertools.combinations(range(length), steiner_slots):
        rest = [k for k in range(length) if k not in pos]
        # distinct arrangements of the multiset {S1,S1,...,Ss,Ss} over pos
        for arrangement in _multiset_perms([n + k for k in range(s) for _ in range(2)]):
            for terms in itertools.product(range(n), repeat=free):
                seq = [0] * length
                for p, lab in zip(pos, arrangement):
                    seq[p] = lab
                for p, lab in zip(rest, terms):
                    seq[p] = lab
                yield tuple(seq)


def _multiset_perms(items: list):
    items = sorted(items)
    if not items:
        yield ()
        return
    seen = set()
    for k, x in enumerate(items):
        if x in seen:
            continue
        seen.add(x)
        for tail in _multiset_perms(items[:k] + items[k + 1:]):
            yield (x,) + tail


@lru_cache(maxsize=None)
def enumerate_topologies(n: int, max_steiner: int, max_terminal_degree: int | None = None,
                         min_steiner: int = 0) -> tuple:
    """All tree topologies with degree-3 Steiner nodes, deduplicated up to
    Steiner relabelling and listed in lexicographic order of their edge lists."""
    if n < 1:
        return ()
    if n == 1:
        return (Topology(1, 0, ()),)
    out = set()
    for s in range(min_steiner, min(max_steiner, n - 2) + 1):
        size = n + s
        for seq in _slot_sequences(size - 2, n, s):
            edges = _prufer_tree(seq, size)
            topo = Topology(n, s, edges)
            deg = topo.degree()
            if max_terminal_degree is not None and max(deg[:n]) > max_terminal_degree:
                continue
            out.add((s, _canonical(edges, n, s)))
    return tuple(Topology(n, s, e) for s, e in sorted(out))


def _objective(x: np.ndarray, edges: np.ndarray, w: np.ndarray) -> float:
    d = np.linalg.norm(x[edges[:, 0]] - x[edges[:, 1]], axis=1)
    return math.fsum((w * d).tolist())


def _smoothed_newton(x0: np.ndarray, fixed: np.ndarray, edges: np.ndarray, w: np.ndarray, tol: float,
                     max_iter: int) -> tuple[np.ndarray, float, bool]:
    """Minimise the weighted length over the free nodes by continuation.

    For a decreasing sequence of eps, damped Newton steps minimise the smooth,
    strictly convex surrogate sum w_e sqrt(|x_u - x_v|^2 + eps^2); each stage
    starts from the previous minimiser.  ``max_iter`` caps the Newton steps.
    """
    x = x0.copy()
    free = np.flatnonzero(~fixed)
    if len(free) == 0 or len(edges) == 0:
        return x, _objective(x, edges, w), True
    E, d = len(edges), x.shape[1]
    B = np.zeros((E, len(x)))
    B[np.arange(E), edges[:, 0]] = 1.0
    B[np.arange(E), edges[:, 1]] = -1.0
    Bf = B[:, free]
    scale = max(1.0, float(np.abs(x0[fixed]).max(initial=1.0)))
    ridge = 1e-13 * max(1.0, float(w.sum())) * np.eye(len(free) * d)
    eye = np.eye(d)

    def smoothed(y, eps):
        diff = B @ y
        return math.fsum((w * np.sqrt(np.einsum("ij,ij->i", diff, diff) + eps * eps)).tolist())

    eps = 1e-2 * scale
    steps = 0
    while True:
        cur = smoothed(x, eps)
        for _ in range(100):
            steps += 1
            if steps > max_iter:
                return x, _objective(x, edges, w), False
            diff = B @ x
            r = np.sqrt(np.einsum("ij,ij->i", diff, diff) + eps * eps)
            g = Bf.T @ ((w / r)[:, None] * diff)
            M = (w / r)[:, None, None] * (eye[None] - np.einsum("ea,eb->eab", diff, diff) / (r * r)[:, None, None])
            H = np.einsum("ei,ej,eab->iajb", Bf, Bf, M).reshape(len(free) * d, len(free) * d) + ridge
            step = np.linalg.solve(H, g.ravel())
            decrement = float(g.ravel() @ step)
            if decrement <= 1e-3 * tol * max(1.0, cur):
                break
            step = step.reshape(len(free), d)
            t = 1.0
            while t > 1e-12:
                y = x.copy()
                y[free] = x[free] - t * step
                val = smoothed(y, eps)
                if val <= cur - 0.25 * t * decrement:
                    break
                t *= 0.5
            else:
                break  # no descent left at float precision
            x, cur = y, val
        if eps <= 1e-12 * scale:
            return x, _objective(x, edges, w), True
        eps *= 0.1


def _newton_polish(x: np.ndarray, fixed: np.ndarray, edges: np.ndarray, w: np.ndarray,
                   steps: int = 30) -> np.ndarray:
    """Damped Newton steps on the weighted length, used once no edge is degenerate."""
    free = np.flatnonzero(~fixed)
    if len(free) == 0 or len(edges) == 0:
        return x
    d = x.shape[1]
    pos = {int(v): k for k, v in enumerate(free)}
    cur = _objective(x, edges, w)
    for _ in range(steps):
        g = np.zeros((len(free), d))
        H = np.zeros((len(free) * d, len(free) * d))
        for (u, v), we in zip(edges, w):
            diff = x[u] - x[v]
            r = float(np.linalg.norm(diff))
            if we == 0:
                continue
            if r < 1e-12:
                return x
            unit = diff / r
            block = we / r * (np.eye(d) - np.outer(unit, unit))
            for a, sgn in ((u, 1.0), (v, -1.0)):
                if a in pos:
                    g[pos[a]] += sgn * we * unit
            for a in (u, v):
                for b in (u, v):
                    if a in pos and b in pos:
                        ia, ib = pos[a], pos[b]
                        H[ia * d:(ia + 1) * d, ib * d:(ib + 1) * d] += block if a == b else -block
        if np.abs(g).max() <= 1e-15 * max(1.0, cur):
            break
        try:
            step = np.linalg.solve(H + 1e-15 * np.eye(len(H)), g.ravel()).reshape(g.shape)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-6:
            y = x.copy()
            y[free] = x[free] - t * step
            val = _objective(y, edges, w)
            if val <= cur:
                break
            t *= 0.5
        else:
            break
        if np.abs(y - x).max() == 0.0:
            break
        x, cur = y, val
    return x


def _merge(x: np.ndarray, fixed: np.ndarray, edges: np.ndarray, w: np.ndarray, radius: float):
    """Snap free nodes onto a neighbour closer than ``radius``; return the contracted graph."""
    n = len(x)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in edges:
        if np.linalg.norm(x[u] - x[v]) < radius:
            ru, rv = find(u), find(v)
            if ru == rv or (fixed[ru] and fixed[rv]):
                continue
            if fixed[rv]:
                ru, rv = rv, ru
            parent[rv] = ru
    root = [find(a) for a in range(n)]
    keep = [(root[u], root[v], wi) for (u, v), wi in zip(edges, w) if root[u] != root[v]]
    y = x.copy()
    for a in range(n):
        y[a] = x[root[a]]
    return y, root, keep


def optimize_positions(topology: Topology, terminals, phi: PhiNorm | None = None, alpha=None,
                       tol: float = 1e-9, max_iter: int = 20000, restarts: int = 2, seed: int = 0):
    """Optimal Steiner positions for a fixed topology and fixed per-edge costs.

    Returns ``(positions, value)`` where ``positions`` lists every node (terminals
    first) as floats.  Coincident nodes are merged and re-optimised.
    """
    term = np.array([[float(to_fraction(c)) for c in p] for p in terminals], dtype=float)
    n, s = topology.n_terminals, topology.n_steiner
    if len(term) != n:
        raise ValueError("terminal count does not match the topology")
    w = topology.weights(phi, alpha)
    edges = np.array(topology.edges, dtype=np.int64).reshape(-1, 2)
    fixed = np.zeros(n + s, dtype=bool)
    fixed[:n] = True
    if s == 0:
        return term.copy(), _objective(term, edges, w)
    rng = np.random.default_rng(seed)
    scale = max(1.0, float(np.ptp(term, axis=0).max()))
    best_x, best_val = None, math.inf
    for r in range(restarts):
        x0 = np.vstack([term, np.zeros((s, term.shape[1]))])
        x0[n:] = _harmonic(term, edges, n, s)
        if r:
            x0[n:] += rng.normal(scale=0.1 * scale, size=(s, term.shape[1]))
        x, val, ok = _smoothed_newton(x0, fixed, edges, w, tol, max_iter)
        if not ok:
            raise ConvergenceError(f"position optimisation did not converge in {max_iter} iterations")
        # contract collapsed nodes and polish the smaller problem
        y, root, keep = _merge(x, fixed, edges, w, MERGE_RADIUS * scale)
        if len(keep) < len(edges):
            e2 = np.array([(u, v) for u, v, _ in keep], dtype=np.int64).reshape(-1, 2)
            w2 = np.array([wi for _, _, wi in keep])
            fixed2 = fixed.copy()
            y2, v2, _ = _smoothed_newton(y, fixed2, e2, w2, tol, max_iter)
            for a in range(n + s):
                y2[a] = y2[root[a]]
            if v2 <= val:
                x, val = y2, _objective(y2, edges, w)
        if not np.any(np.linalg.norm(x[edges[:, 0]] - x[edges[:, 1]], axis=1) < MERGE_RADIUS * scale):
            x = _newton_polish(x, fixed, edges, w)
            val = _objective(x, edges, w)
        if val < best_val - tol * 1e-3:
            best_x, best_val = x, val
    return best_x, best_val


def _harmonic(term: np.ndarray, edges: np.ndarray, n: int, s: int) -> np.ndarray:
    L = np.eye(s) * 1e-9
    b = np.zeros((s, term.shape[1]))
    for u, v in edges:
        for a, o in ((u, v), (v, u)):
            if a >= n:
                L[a - n, a - n] += 1
                if o >= n:
                    L[a - n, o - n] -= 1
                else:
                    b[a - n] += term[o]
    return np.linalg.solve(L, b)


def _pmap(fn, items):
    workers = worker_count()
    if workers <= 1 or len(items) < 8:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _exact_points(x: np.ndarray, terminals) -> list:
    pts = [to_point(p) for p in terminals]
    pts += [to_point([float(c) for c in row]) for row in x[len(terminals):]]
    return pts


def _tree_segments(pts: list, edges) -> list[tuple[Segment, int]]:
    out = []
    for k, (u, v) in enumerate(edges):
        if pts[u] != pts[v]:
            out.append((Segment(pts[u], pts[v]), k))
    return out


def _steiner_job(args):
    topo, terminals, tol, seed = args
    x, val = optimize_positions(topo, terminals, tol=tol, seed=seed)
    return val, x


def steiner_minimal_tree(terminals, tol: float = 1e-9, max_topologies: int = 200_000, seed: int = 0):
    """Euclidean Steiner minimal tree by full enumeration of topologies.

    Returns ``(segments, value, counts)``; the tie-break is the lexicographic
    topology order.
    """
    terminals = [to_point(p) for p in terminals]
    n = len(terminals)
    if n > MAX_STEINER_TERMINALS:
        raise BudgetExceeded(f"{n} terminals exceed the limit of {MAX_STEINER_TERMINALS} per tree")
    if n <= 1:
        return [], 0.0, {"topologies": 1}
    # full topologies only: every other tree is a collapse of one of them
    topos = enumerate_topologies(n, n - 2, 1, n - 2)
    if len(topos) > max_topologies:
        raise BudgetExceeded(f"{len(topos)} topologies exceed the budget {max_topologies}")
    results = _pmap(_steiner_job, [(t, terminals, tol, seed) for t in topos])
    best_k, best_val = None, math.inf
    for k, (val, _) in enumerate(results):
        if best_k is None or val < best_val - 1e-12 * max(1.0, best_val):
            best_k, best_val = k, val
    x = results[best_k][1]
    pts = _exact_points(x, terminals)
    segs = [s for s, _ in _tree_segments(pts, topos[best_k].edges)]
    value = math.fsum(s.length() for s in segs)
    return segs, value, {"topologies": len(topos), "best_topology": best_k}


def _set_partitions(items: list):
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[head]] + part
        for k in range(len(part)):
            yield part[:k] + [[head] + part[k]] + part[k + 1:]


def solve_partitioned_steiner(inst: PartitionedInstance, tol: float = 1e-9,
                              max_topologies: int = 200_000, seed: int = 0) -> SolveReport:
    """Minimum over coarsenings of the groups of the summed Steiner tree lengths."""
    if inst.n > MAX_STEINER_TERMINALS:
        raise BudgetExceeded(f"{inst.n} terminals exceed the limit of {MAX_STEINER_TERMINALS}")
    cache: dict = {}
    topo_count = 0

    def block_tree(members: frozenset):
        nonlocal topo_count
        if members not in cache:
            pts = [inst.points[i] for i in sorted(members)]
            segs, val, cnt = steiner_minimal_tree(pts, tol, max_topologies, seed)
            topo_count += cnt["topologies"]
            cache[members] = (segs, val)
        return cache[members]

    candidates = []
    for part in _set_partitions(list(range(inst.k))):
        blocks = [frozenset(x for g in blk for x in inst.partition[g]) for blk in part]
        val = math.fsum(block_tree(b)[1] for b in blocks)
        key = sorted(tuple(sorted(g)) for g in part)
        candidates.append((val, key, blocks))
    best_val = min(c[0] for c in candidates)
    near = [c for c in candidates if c[0] <= best_val + 1e-9 * max(1.0, best_val)]
    val, key, blocks = min(near, key=lambda c: (c[0], c[1]))
    segs = [s for b in blocks for s in block_tree(b)[0]]
    forest = Forest.from_segments(segs)
    current = tree_to_current(forest, inst)
    counts = {"coarsenings": len(candidates), "blocks_solved": len(cache), "topologies": topo_count}
    config = {"tol": tol, "max_topologies": max_topologies}
    return SolveReport(forest, forest.length(), counts, config,
                       {"current": current, "coarsening": [list(g) for g in key]})


def tree_flows(topo: Topology, inst: MailingInstance) -> list[tuple]:
    """Per-edge coefficient vectors of the unique tree routing of every demand."""
    adj = {a: [] for a in range(topo.n_nodes)}
    for k, (u, v) in enumerate(topo.edges):
        adj[u].append((v, k, 1))
        adj[v].append((u, k, -1))
    mult = [[0] * inst.m for _ in topo.edges]
    for i, j, g in inst.demands():
        prev = {i: None}
        todo = [i]
        while todo:
            a = todo.pop()
            for b, k, sgn in adj[a]:
                if b not in prev:
                    prev[b] = (a, k, sgn)
                    todo.append(b)
        c = inst.channel(i, j)
        node = j
        while prev[node] is not None:
            a, k, sgn = prev[node]
            mult[k][c] += sgn * g
            node = a
    return [tuple(t) for t in mult]


def _mailing_job(args):
    topo, terminals, phi, alpha, tol, seed = args
    x, val = optimize_positions(topo, terminals, phi, alpha, tol=tol, seed=seed)
    return val, x


def solve_mailing_topology(inst: MailingInstance, phi: PhiNorm, alpha, max_steiner: int = 2,
                           tol: float = 1e-9, max_topologies: int = 100_000, seed: int = 0) -> SolveReport:
    """Best tree-shaped current over all tree topologies with up to ``max_steiner`` branch points.

    On a tree every demand has exactly one route, so the multiplicities are
    fixed by the topology; zero-flow edges cost nothing, which covers forests.
    """
    alpha = Alpha.of(alpha)
    if inst.n > MAX_MAILING_TERMINALS:
        raise BudgetExceeded(f"{inst.n} terminals exceed the limit of {MAX_MAILING_TERMINALS}")
    if max_steiner > MAX_MAILING_STEINER:
        raise BudgetExceeded(f"max_steiner {max_steiner} exceeds {MAX_MAILING_STEINER}")
    config = {"phi": phi.label(), "alpha": str(alpha.value), "max_steiner": max_steiner, "tol": tol}
    if inst.N == 0 or inst.n < 2:
        return SolveReport(PolyCurrent1.zero(inst.m), 0.0, {"topologies": 0}, config)
    if max_steiner >= inst.n - 2:
        # every tree is a contraction of a full topology, and contracted edges cost nothing
        topos = enumerate_topologies(inst.n, inst.n - 2, 1, inst.n - 2)
    else:
        topos = enumerate_topologies(inst.n, max_steiner, None)
    if len(topos) > max_topologies:
        raise BudgetExceeded(f"{len(topos)} topologies exceed the budget {max_topologies}")
    weighted = [t.with_multiplicity(tree_flows(t, inst)) for t in topos]
    results = _pmap(_mailing_job, [(t, inst.points, phi, alpha, tol, seed) for t in weighted])
    best_k, best_val = None, math.inf
    for k, (val, _) in enumerate(results):
        if best_k is None or val < best_val - 1e-12 * max(1.0, best_val):
            best_k, best_val = k, val
    topo = weighted[best_k]
    pts = _exact_points(results[best_k][1], inst.points)
    pieces = [(seg, topo.multiplicity[k]) for seg, k in _tree_segments(pts, topo.edges)
              if any(topo.multiplicity[k])]
    T = PolyCurrent1.build(inst.m, pieces, "int")
    value = energy_alpha_phi(T, phi, alpha)
    counts = {"topologies": len(topos), "best_topology": best_k}
    return SolveReport(T, value, counts, config, {"topology": topo})
