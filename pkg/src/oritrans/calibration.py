"""Piecewise-constant calibrations: closedness, comass and equality checks.

A certificate is a set of convex cells, each carrying a constant d x m matrix
W; the form acts on a unit tangent tau and a coefficient theta as
``tau^T W theta``.  A verdict of CALIBRATED means calibrated within the
piecewise-constant class; smooth mollification is not attempted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .coefficients import NormSpec, coeff_norm, comass
from .currents import PolyCurrent1
from .geometry import Segment, cross2, dot, segment_intersection, sub, to_point

CLOSED_TOL = 1e-12
EQUALITY_TOL = 1e-9

CALIBRATED = "CALIBRATED"
VIOLATED = "VIOLATED"
INCONCLUSIVE = "INCONCLUSIVE"


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    polygon: tuple | None  # counter-clockwise convex vertices; None = the whole space
    W: np.ndarray = field(compare=False)

    def edges(self) -> list[Segment]:
        if self.polygon is None:
            return []
        P = self.polygon
        return [Segment(P[k], P[(k + 1) % len(P)]) for k in range(len(P))]


@dataclass(frozen=True)
class CalibrationCertificate:
    cells: tuple
    m: int
    norm: NormSpec

    @classmethod
    def build(cls, cells, norm: NormSpec) -> "CalibrationCertificate":
        out = []
        shape = None
        for poly, W in cells:
            W = np.atleast_2d(np.asarray(W, dtype=float))
            if shape is None:
                shape = W.shape
            if W.shape != shape:
                raise CertificateError("all cells need covector matrices of the same shape")
            if not np.all(np.isfinite(W)):
                raise CertificateError("covector entries must be finite")
            out.append(Cell(_convex_polygon(poly) if poly is not None else None, W))
        if not out:
            raise CertificateError("a certificate needs at least one cell")
        d, m = shape
        if d not in (2, 3):
            raise CertificateError(f"W must have 2 or 3 rows, got {d}")
        if d == 3 and (len(out) > 1 or out[0].polygon is not None):
            raise CertificateError("three-dimensional certificates support a single global cell only")
        if any(c.polygon is None for c in out) and len(out) > 1:
            raise CertificateError("a global cell cannot be combined with other cells")
        if norm.m is not None and norm.m != m:
            raise CertificateError(f"norm dimension {norm.m} does not match W with {m} columns")
        return cls(tuple(out), m, norm)

    @property
    def d(self) -> int:
        return self.cells[0].W.shape[0]


def _convex_polygon(poly) -> tuple:
    P = [to_point(p) for p in poly]
    if len(P) < 3 or any(len(p) != 2 for p in P):
        raise CertificateError("cells are planar polygons with at least three vertices")
    area = sum(cross2(P[k], P[(k + 1) % len(P)]) for k in range(len(P)))
    if area == 0:
        raise CertificateError("degenerate cell")
    if area < 0:
        P = P[::-1]
    for k in range(len(P)):
        a, b, c = P[k], P[(k + 1) % len(P)], P[(k + 2) % len(P)]
        if cross2(sub(b, a), sub(c, b)) < 0:
            raise CertificateError("cells must be convex")
    return tuple(P)


def _contains(poly: tuple, p) -> bool:
    for k in range(len(poly)):
        a, b = poly[k], poly[(k + 1) % len(poly)]
        if cross2(sub(b, a), sub(p, a)) < 0:
            return False
    return True


def _interior_overlap(P: tuple, Q: tuple) -> bool:
    """Whether two convex polygons share interior points (separating-axis test, exact)."""
    for poly in (P, Q):
        for k in range(len(poly)):
            a, b = poly[k], poly[(k + 1) % len(poly)]
            n = (b[1] - a[1], a[0] - b[0])  # outward normal for counter-clockwise order
            hi = dot(n, a)
            if all(dot(n, q) >= hi for q in (Q if poly is P else P)):
                return False
    return True


def interfaces(cert: CalibrationCertificate) -> list[tuple[int, int, Segment]]:
    """Shared boundary pieces of positive length between pairs of cells."""
    out = []
    cells = cert.cells
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            if cells[i].polygon is None or cells[j].polygon is None:
                continue
            if _interior_overlap(cells[i].polygon, cells[j].polygon):
                raise CertificateError(f"cells {i} and {j} overlap")
            for e in cells[i].edges():
                for f in cells[j].edges():
                    hit = segment_intersection(e, f)
                    if len(hit) == 2:
                        out.append((i, j, Segment(hit[0], hit[1])))
    return out


def check_closed(cert: CalibrationCertificate):
    """Tangential continuity of W across every interface.

    Returns ``(closed, witness)`` where the witness names the first failing
    interface and channel, or is None.
    """
    for i, j, seg in interfaces(cert):
        u = np.array(seg.tangent())
        diff = u @ cert.cells[i].W - u @ cert.cells[j].W
        bad = np.flatnonzero(np.abs(diff) > CLOSED_TOL)
        if len(bad):
            return False, {"cells": [i, j], "interface": seg, "channel": int(bad[0]),
                           "jump": float(diff[bad[0]])}
    return True, None


def check_comass(cert: CalibrationCertificate, tol: float = 1e-9) -> tuple[float, bool]:
    bound = max(comass(c.W, cert.norm, tol) for c in cert.cells)
    return bound, bound <= 1 + tol


def _clip(seg: Segment, poly: tuple | None):
    """Parameter interval of ``seg`` inside a closed convex polygon, or None."""
    lo, hi = Fraction(0), Fraction(1)
    if poly is None:
        return lo, hi
    d = seg.vector
    for k in range(len(poly)):
        a, b = poly[k], poly[(k + 1) % len(poly)]
        e = sub(b, a)
        # inside: cross(e, seg.a + t d - a) >= 0
        c0 = cross2(e, sub(seg.a, a))
        c1 = cross2(e, d)
        if c1 == 0:
            if c0 < 0:
                return None
            continue
        t = -c0 / c1
        if c1 > 0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
        if lo >= hi:
            return None
    return lo, hi


def check_equality(cert: CalibrationCertificate, T: PolyCurrent1, tol: float = EQUALITY_TOL):
    """Largest |tau^T W theta - ||theta||| over the atoms of T, split at cell boundaries."""
    if T.m != cert.m:
        raise CertificateError(f"current has {T.m} channels, certificate {cert.m}")
    worst = 0.0
    for seg, coef in T.atoms:
        if len(seg.a) != cert.d:
            raise CertificateError("current and certificate live in different dimensions")
        theta = np.array([float(x) for x in coef])
        tau = np.array(seg.tangent())
        norm = coeff_norm(coef, cert.norm)
        pieces = []
        for cell in cert.cells:
            iv = _clip(seg, cell.polygon)
            if iv is not None:
                pieces.append(iv)
                worst = max(worst, abs(float(tau @ cell.W @ theta) - norm))
        if not _covers(pieces):
            raise CertificateError(f"atom {seg} is not covered by the cells")
    return worst, worst <= tol


def _covers(intervals) -> bool:
    reach = Fraction(0)
    for lo, hi in sorted(intervals):
        if lo > reach:
            return False
        reach = max(reach, hi)
    return reach >= 1


@dataclass
class CalibrationReport:
    closed: bool
    closed_witness: dict | None
    comass_bound: float
    comass_exact: bool
    comass_ok: bool
    equality_max_violation: float | None
    equality_ok: bool
    verdict: str
    reason: str = ""

    def to_json(self) -> dict:
        w = None
        if self.closed_witness:
            w = dict(self.closed_witness)
            seg = w.pop("interface")
            w["interface"] = [[str(c) for c in seg.a], [str(c) for c in seg.b]]
        return {"closed": self.closed, "closed_witness": w, "comass_bound": self.comass_bound,
                "comass_exact": self.comass_exact, "comass_ok": self.comass_ok,
                "equality_max_violation": self.equality_max_violation, "equality_ok": self.equality_ok,
                "verdict": self.verdict, "reason": self.reason}


def verify_calibration(cert: CalibrationCertificate, T: PolyCurrent1, tol: float = EQUALITY_TOL,
                       comass_tol: float = 1e-9) -> CalibrationReport:
    """Run the three checks and aggregate them into a verdict.

    Numerically computed comass values within a small band above ``1 + tol``
    give INCONCLUSIVE rather than VIOLATED.
    """
    reasons = []
    try:
        closed, witness = check_closed(cert)
    except CertificateError as exc:
        return CalibrationReport(False, None, math.nan, False, False, None, False, VIOLATED, str(exc))
    exact = cert.norm.is_polyhedral
    bound, comass_ok = check_comass(cert, comass_tol)
    try:
        viol, eq_ok = check_equality(cert, T, tol)
    except CertificateError as exc:
        viol, eq_ok = None, False
        reasons.append(str(exc))
    if not closed:
        reasons.append("not closed")
    if not comass_ok:
        reasons.append(f"comass {bound:.12g} > 1")
    if viol is not None and not eq_ok:
        reasons.append(f"equality violated by {viol:.3g}")
    if closed and comass_ok and eq_ok:
        verdict = CALIBRATED
    elif closed and eq_ok and not exact and bound <= 1 + max(1e-6, 100 * comass_tol):
        verdict = INCONCLUSIVE
        reasons.append("comass within the numerical tolerance band")
    else:
        verdict = VIOLATED
    return CalibrationReport(closed, witness, bound, exact, comass_ok, viol, eq_ok, verdict, "; ".join(reasons))


def bounding_cell(points, margin=1) -> tuple:
    """Axis-aligned square around the points, as a counter-clockwise polygon."""
    pts = [to_point(p) for p in points]
    margin = Fraction(margin)
    lo = [min(p[k] for p in pts) - margin for k in range(2)]
    hi = [max(p[k] for p in pts) + margin for k in range(2)]
    return ((lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1]))


def fermat_certificate(T: PolyCurrent1, norm: NormSpec | None = None) -> CalibrationCertificate:
    """Constant certificate W = [u_1 | u_2] for a 3-terminal tree.

    ``T`` is the tree current with coefficients e_1 on the branch to the first
    terminal, e_2 on the branch to the second and e_1 + e_2 on the trunk; u_k is
    the unit direction of branch k.  Under the norm max(t+) + max(t-) all three
    coefficients have norm one and the comass of W is |u_1 + u_2| = 1 at 120
    degrees.
    """
    norm = norm or NormSpec.phi_alpha("l1", 0, 2)
    cols = []
    for e in ((1, 0), (0, 1)):
        for seg, coef in T.atoms:
            if tuple(coef) in (e, tuple(-x for x in e)):
                # the unit flow direction of branch k
                u = np.array(seg.tangent()) * (1 if tuple(coef) == e else -1)
                cols.append(u)
                break
        else:
            raise CertificateError(f"no branch with coefficient {e}")
    W = np.column_stack(cols)
    pts = [p for seg, _ in T.atoms for p in (seg.a, seg.b)]
    return CalibrationCertificate.build([(bounding_cell(pts), W)], norm)
