"""Partitioned Steiner tree problem: boundary with coefficients in Z^{n-k} and
the map from a forest to a current whose coefficients all have sup-norm one."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .currents import AtomicMeasure0, PolyCurrent1, unit
from .geometry import Segment, overlay, to_point


@dataclass(frozen=True)
class PartitionedInstance:
    points: tuple
    partition: tuple  # tuple of tuples of 0-based point indices

    def __post_init__(self):
        n = len(self.points)
        if len(set(self.points)) != n:
            raise ValueError("terminals must be distinct")
        seen = [x for grp in self.partition for x in grp]
        if sorted(seen) != list(range(n)):
            raise ValueError("the groups must be disjoint and cover every point")
        if any(len(grp) < 2 for grp in self.partition):
            raise ValueError("singleton groups are not allowed")

    @classmethod
    def of(cls, points, partition) -> "PartitionedInstance":
        return cls(tuple(to_point(p) for p in points), tuple(tuple(int(x) for x in g) for g in partition))

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def k(self) -> int:
        return len(self.partition)

    @property
    def m(self) -> int:
        return self.n - self.k

    def order(self) -> list[int]:
        """Point indices listed group after group (the internal reordering)."""
        return [x for grp in self.partition for x in grp]

    def hub(self, group: int) -> int:
        return self.partition[group][-1]

    def group_of(self, point: int) -> int:
        for gi, grp in enumerate(self.partition):
            if point in grp:
                return gi
        raise KeyError(point)


def build_g_vectors(inst: PartitionedInstance) -> list[tuple]:
    """Coefficient g of every terminal, listed in the original point order.

    Within group i (1-based, members in reordered positions a_i..b_i+1) the
    first n_i - 1 members get consecutive basis vectors e_{l-i+1} and the last
    member (the hub) gets minus their sum.
    """
    m = inst.m
    out: list = [None] * inst.n
    ell = 0  # 1-based reordered position after increment
    for gi, grp in enumerate(inst.partition, start=1):
        block = []
        for member in grp[:-1]:
            ell += 1
            idx = ell - gi + 1  # 1-based basis index
            out[member] = unit(m, idx - 1)
            block.append(idx - 1)
        ell += 1
        out[grp[-1]] = tuple(-1 if t in block else 0 for t in range(m))
    return out


def build_boundary_steiner(inst: PartitionedInstance) -> AtomicMeasure0:
    return AtomicMeasure0.build(inst.m, zip(inst.points, build_g_vectors(inst)))


@dataclass(frozen=True)
class Forest:
    vertices: tuple  # points
    edges: tuple  # ((u, v), ...) vertex index pairs

    @classmethod
    def from_segments(cls, segments) -> "Forest":
        verts: dict = {}
        edges = []
        for s in segments:
            ids = []
            for p in (s.a, s.b):
                if p not in verts:
                    verts[p] = len(verts)
                ids.append(verts[p])
            edges.append(tuple(ids))
        return cls(tuple(verts), tuple(edges))

    def segments(self) -> list[Segment]:
        return [Segment(self.vertices[u], self.vertices[v]) for u, v in self.edges]

    def length(self) -> float:
        return math.fsum(s.length() for s in self.segments())

    def adjacency(self) -> dict:
        adj = {i: [] for i in range(len(self.vertices))}
        for k, (u, v) in enumerate(self.edges):
            adj[u].append((v, k))
            adj[v].append((u, k))
        return adj

    def is_acyclic(self) -> bool:
        parent = list(range(len(self.vertices)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in self.edges:
            ru, rv = find(u), find(v)
            if ru == rv:
                return False
            parent[ru] = rv
        return True

    def components(self) -> list[int]:
        """Component label of every vertex."""
        adj = self.adjacency()
        label = [-1] * len(self.vertices)
        c = 0
        for s in range(len(self.vertices)):
            if label[s] >= 0:
                continue
            label[s] = c
            todo = [s]
            while todo:
                x = todo.pop()
                for y, _ in adj[x]:
                    if label[y] < 0:
                        label[y] = c
                        todo.append(y)
            c += 1
        return label


def _tree_path(adj, src: int, dst: int):
    """Edge-oriented vertex path src -> dst by breadth-first search, or None."""
    prev = {src: None}
    todo = deque([src])
    while todo:
        x = todo.popleft()
        if x == dst:
            break
        for y, _ in sorted(adj[x]):
            if y not in prev:
                prev[y] = x
                todo.append(y)
    if dst not in prev:
        return None
    out = [dst]
    while prev[out[-1]] is not None:
        out.append(prev[out[-1]])
    return out[::-1]


def _terminal_ids(K: Forest, inst: PartitionedInstance) -> list[int]:
    where = {p: i for i, p in enumerate(K.vertices)}
    try:
        return [where[p] for p in inst.points]
    except KeyError as exc:
        raise ValueError(f"terminal {exc.args[0]} is not a vertex of the forest") from None


def validate_forest(K: Forest, inst: PartitionedInstance) -> list[int]:
    if not K.is_acyclic():
        raise ValueError("the forest contains a cycle")
    segs = K.segments()
    for _, cov in overlay(segs).atoms:
        if len(cov) > 1:
            raise ValueError("forest edges overlap along a segment")
    term = _terminal_ids(K, inst)
    comp = K.components()
    for gi, grp in enumerate(inst.partition):
        if len({comp[term[x]] for x in grp}) != 1:
            raise ValueError(f"group {gi} is not connected in the forest")
    return term


def group_paths(K: Forest, inst: PartitionedInstance) -> list[tuple[int, list[int]]]:
    """For every non-hub terminal, the forest path from its group's hub to it."""
    term = validate_forest(K, inst)
    adj = K.adjacency()
    out = []
    for gi, grp in enumerate(inst.partition):
        hub = term[inst.hub(gi)]
        for member in grp[:-1]:
            out.append((member, _tree_path(adj, hub, term[member])))
    return out


def tree_to_current(K: Forest, inst: PartitionedInstance) -> PolyCurrent1:
    """Current sum_j [path hub -> p_j, g_j] over all groups."""
    g = build_g_vectors(inst)
    pieces = []
    for member, path in group_paths(K, inst):
        for u, v in zip(path, path[1:]):
            pieces.append((Segment(K.vertices[u], K.vertices[v]), g[member]))
    return PolyCurrent1.build(inst.m, pieces, "int")


def used_forest(K: Forest, inst: PartitionedInstance) -> Forest:
    """The sub-forest made of the edges lying on some hub-to-terminal path."""
    used = set()
    for _, path in group_paths(K, inst):
        used.update(frozenset(e) for e in zip(path, path[1:]))
    return Forest(K.vertices, tuple(e for e in K.edges if frozenset(e) in used))
