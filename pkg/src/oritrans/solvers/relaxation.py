"""Real-coefficient mass minimisation on a fixed support graph.

Minimise sum_e l_e ||theta_e|| subject to per-channel flow conservation
``A theta = b``.  When the dual unit ball has a cheap projection the problem is
solved by a primal-dual splitting; otherwise by averaged projected subgradient
steps.  Either way the returned coefficients are projected onto the affine
constraint set, and a dual lower bound is derived from a rescaled multiplier.
"""
from __future__ import annotations

import math

import numpy as np

from ..coefficients import NormSpec, coeff_norm, dual_norm
from ..currents import AtomicMeasure0, PolyCurrent1, mass
from ..geometry import Segment, overlay, split_segments
from .report import SolveReport


class InfeasibleBoundary(ValueError):
    """No real flow on the support has the requested boundary."""


def support_graph(support, boundary: AtomicMeasure0):
    """Split the support at boundary points and crossings and merge overlaps.

    Returns ``(vertices, pieces, incidence)`` with ``incidence`` of shape (V, E):
    +1 at the end point and -1 at the start point of each piece.
    """
    support = list(support)
    if not support:
        raise InfeasibleBoundary("empty support")
    pieces = [p for p, _ in split_segments(support, boundary.points(), crossings=True)]
    pieces = overlay(pieces).segments()
    index: dict = {}
    for s in pieces:
        for p in (s.a, s.b):
            index.setdefault(p, len(index))
    for p in boundary.points():
        if p not in index:
            raise InfeasibleBoundary(f"boundary point {p} is not on the support")
    A = np.zeros((len(index), len(pieces)))
    for k, s in enumerate(pieces):
        A[index[s.b], k] += 1.0
        A[index[s.a], k] -= 1.0
    return list(index), pieces, A


def _rhs(vertices, boundary: AtomicMeasure0) -> np.ndarray:
    where = {p: i for i, p in enumerate(vertices)}
    b = np.zeros((len(vertices), boundary.m))
    for p, c in boundary.atoms:
        b[where[p]] = [float(x) for x in c]
    return b


# -- dual unit balls ---------------------------------------------------------


def _ball_kind(spec: NormSpec) -> str | None:
    """Which dual unit ball has a closed-form projection, if any."""
    if spec.kind == "linf":
        return "l1"
    if spec.kind == "l1":
        return "box"
    a, phi = spec.alpha.value, spec.phi.kind
    if a == 1 and phi == "l1":
        return "box"
    if a == 0 and phi == "linf":
        return "l1"
    if a == 0 and phi == "l1":
        return "split_l1"
    return None


def _capped_simplex(Z: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Project each nonnegative row of Z onto {x >= 0, sum x <= r}."""
    out = Z.copy()
    over = Z.sum(axis=1) > r
    if not np.any(over):
        return out
    Zo, ro = Z[over], r[over]
    U = -np.sort(-Zo, axis=1)
    css = np.cumsum(U, axis=1) - ro[:, None]
    k = np.arange(1, Z.shape[1] + 1)
    rho = np.sum(U - css / k > 0, axis=1)
    lam = css[np.arange(len(rho)), rho - 1] / rho
    out[over] = np.maximum(Zo - lam[:, None], 0.0)
    return out


def _project_ball(V: np.ndarray, r: np.ndarray, kind: str) -> np.ndarray:
    if kind == "box":
        return np.clip(V, -r[:, None], r[:, None])
    if kind == "l1":
        return np.sign(V) * _capped_simplex(np.abs(V), r)
    # max(||v+||_1, ||v-||_1) <= r: the two sign classes decouple
    return _capped_simplex(np.maximum(V, 0.0), r) - _capped_simplex(np.maximum(-V, 0.0), r)


def _dual_rows(V: np.ndarray, spec: NormSpec) -> np.ndarray:
    kind = _ball_kind(spec)
    if kind == "box":
        return np.abs(V).max(axis=1, initial=0.0)
    if kind == "l1":
        return np.abs(V).sum(axis=1)
    if kind == "split_l1":
        return np.maximum(np.maximum(V, 0).sum(axis=1), np.maximum(-V, 0).sum(axis=1))
    return np.array([dual_norm(row.tolist(), spec) for row in V])


def _norm_rows(T: np.ndarray, spec: NormSpec) -> np.ndarray:
    return np.array([coeff_norm(row.tolist(), spec) for row in T])


def _objective(T: np.ndarray, lengths: np.ndarray, spec: NormSpec) -> float:
    return math.fsum((lengths * _norm_rows(T, spec)).tolist())


class _Constraint:
    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A, self.b = A, b
        self.pinv = np.linalg.pinv(A)
        resid = A @ (self.pinv @ b) - b
        if np.abs(resid).max(initial=0.0) > 1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
            raise InfeasibleBoundary("the boundary is not balanced on every connected piece of the support")

    def project(self, T: np.ndarray) -> np.ndarray:
        return T - self.pinv @ (self.A @ T - self.b)

    def residual(self, T: np.ndarray) -> float:
        return float(np.abs(self.A @ T - self.b).max(initial=0.0))


def _lower_bound(Y: np.ndarray, con: _Constraint, lengths: np.ndarray, spec: NormSpec) -> float:
    """-<y, b> after scaling y so that ||(A^T y)_e||_* <= l_e on every edge."""
    G = con.A.T @ Y
    ratio = float(np.max(_dual_rows(G, spec) / lengths, initial=0.0))
    if ratio == 0.0:
        return 0.0
    return -float(np.sum(Y * con.b)) / ratio


def _pdhg(con: _Constraint, lengths, spec, kind, tol, max_iter, check_every=50):
    A, b = con.A, con.b
    L = float(np.linalg.norm(A, 2))
    tau = sigma = 0.95 / L
    T = con.project(np.zeros((A.shape[1], b.shape[1])))
    Tbar = T.copy()
    Y = np.zeros_like(b)
    best = (math.inf, T, -math.inf)
    it = 0
    for it in range(1, max_iter + 1):
        Y = Y + sigma * (A @ Tbar - b)
        V = T - tau * (A.T @ Y)
        r = tau * lengths
        Tn = V - _project_ball(V, r, kind)
        Tbar = 2 * Tn - T
        T = Tn
        if it % check_every == 0:
            Tf = con.project(T)
            up = _objective(Tf, lengths, spec)
            lo = _lower_bound(Y, con, lengths, spec)
            if up < best[0]:
                best = (up, Tf, max(lo, best[2]))
            else:
                best = (best[0], best[1], max(lo, best[2]))
            if best[0] - best[2] <= tol * max(1.0, abs(best[0])):
                break
    return best[1], best[0], best[2], it


def _subgradient(T: np.ndarray, spec: NormSpec, h: float = 1e-7) -> np.ndarray:
    """Central-difference gradient of the norm per row (zero at the origin)."""
    G = np.zeros_like(T)
    for e, row in enumerate(T):
        if not np.any(row):
            continue
        for k in range(len(row)):
            up, dn = row.copy(), row.copy()
            up[k] += h
            dn[k] -= h
            G[e, k] = (coeff_norm(up.tolist(), spec) - coeff_norm(dn.tolist(), spec)) / (2 * h)
    return G


def _projected_subgradient(con: _Constraint, lengths, spec, tol, max_iter, check_every=50):
    T = con.project(np.zeros((con.A.shape[1], con.b.shape[1])))
    scale = max(1e-12, float(np.abs(T).max(initial=0.0)))
    avg = T.copy()
    best = (_objective(T, lengths, spec), T.copy(), -math.inf)
    weight = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        G = lengths[:, None] * _subgradient(T, spec)
        D = con.project(T - G) - con.project(T)  # tangent part of -G
        step = scale / math.sqrt(it) / max(1e-12, float(np.abs(D).max(initial=0.0)))
        T = T + step * D
        w = 1.0 / math.sqrt(it)
        weight += w
        avg = avg + (w / weight) * (T - avg)
        if it % check_every == 0:
            for cand in (T, avg):
                cand = con.project(cand)
                val = _objective(cand, lengths, spec)
                if val < best[0]:
                    best = (val, cand, best[2])
            # multiplier: least-squares fit of A^T y to minus the subgradient at the best point
            Gb = lengths[:, None] * _subgradient(best[1], spec)
            Y = -np.linalg.lstsq(con.A.T, Gb, rcond=None)[0]
            best = (best[0], best[1], max(best[2], _lower_bound(Y, con, lengths, spec)))
            if best[0] - best[2] <= tol * max(1.0, abs(best[0])):
                break
    return best[1], best[0], best[2], it


def solve_real_relaxation(support, boundary: AtomicMeasure0, spec: NormSpec, tol: float = 1e-6,
                          max_iter: int = 200_000, integer_value: float | None = None) -> SolveReport:
    """Minimal mass among real-coefficient currents on ``support`` with the given boundary."""
    vertices, pieces, A = support_graph(support, boundary)
    b = _rhs(vertices, boundary)
    con = _Constraint(A, b)
    lengths = np.array([s.length() for s in pieces])
    kind = _ball_kind(spec)
    if kind is not None:
        T, up, lo, iters = _pdhg(con, lengths, spec, kind, tol, max_iter)
        method = "primal-dual"
    else:
        T, up, lo, iters = _projected_subgradient(con, lengths, spec, tol, min(max_iter, 20_000))
        method = "projected-subgradient"
    cut = 1e-12 * max(1.0, float(np.abs(T).max(initial=0.0)))
    T = np.where(np.abs(T) <= cut, 0.0, T)
    current = PolyCurrent1.build(boundary.m, [(s, tuple(float(x) for x in row)) for s, row in zip(pieces, T)
                                              if np.any(row)], "real")
    value = mass(current, spec)
    extra = {"lower_bound": lo, "duality_gap": value - lo, "residual": con.residual(T),
             "iterations": iters, "method": method, "edges": len(pieces)}
    if integer_value is not None:
        extra["integer_value"] = integer_value
        extra["integrality_gap"] = integer_value - value
    config = {"tol": tol, "max_iter": max_iter, "norm": spec.to_json()}
    return SolveReport(current, value, {"iterations": iters, "edges": len(pieces)}, config, extra)


def square_support(points) -> list[Segment]:
    """Closed polygon through the points in the given order."""
    pts = list(points)
    return [Segment.of(pts[k], pts[(k + 1) % len(pts)]) for k in range(len(pts))]
