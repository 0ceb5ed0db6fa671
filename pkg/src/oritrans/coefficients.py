"""Norms and costs on coefficient spaces.

Conventions: ``0**alpha == 0`` for every alpha (including alpha = 0), so that
every norm vanishes at the zero coefficient.  The exponent ``p = 1/alpha`` of
the grouped norm is ``inf`` when alpha = 0 and ``q`` is its conjugate.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PhiNorm:
    """Symmetric monotone norm on R^2 (evaluated on the nonnegative quadrant)."""

    kind: str  # "l1" | "linf" | "lr"
    r: float | None = None

    def __post_init__(self):
        if self.kind not in ("l1", "linf", "lr"):
            raise ValueError(f"unknown phi kind {self.kind!r}")
        if self.kind == "lr" and not (self.r is not None and self.r > 1 and math.isfinite(self.r)):
            raise ValueError("phi=lr needs a finite exponent r > 1")

    @classmethod
    def parse(cls, text) -> "PhiNorm":
        if isinstance(text, PhiNorm):
            return text
        t = str(text).lower().replace("ℓ", "l").replace("^", "")
        if t in ("l1", "linf"):
            return cls(t)
        if t in ("l2",):
            return cls("lr", 2.0)
        if t.startswith("lr"):
            return cls("lr", float(Fraction(t[2:].strip("(): "))))
        if t.startswith("l"):
            return cls("lr", float(Fraction(t[1:])))
        raise ValueError(f"cannot parse phi {text!r}")

    def label(self) -> str:
        return self.kind if self.kind != "lr" else f"l{self.r:g}"

    def __call__(self, x: float, y: float) -> float:
        if x < 0 or y < 0:
            raise ValueError("phi is evaluated on the nonnegative quadrant only")
        if self.kind == "l1":
            return x + y
        if self.kind == "linf":
            return max(x, y)
        if x == 0:
            return float(y)
        if y == 0:
            return float(x)
        r = self.r
        return (x**r + y**r) ** (1.0 / r)

    def dual(self, a: float, b: float) -> float:
        """Dual norm of phi restricted to the nonnegative quadrant."""
        if self.kind == "l1":
            return max(a, b)
        if self.kind == "linf":
            return a + b
        rc = self.r / (self.r - 1.0)
        if a == 0:
            return float(b)
        if b == 0:
            return float(a)
        return (a**rc + b**rc) ** (1.0 / rc)


def phi_eval(phi: PhiNorm, x: float, y: float) -> float:
    return phi(x, y)


@dataclass(frozen=True)
class Alpha:
    value: Fraction

    def __post_init__(self):
        if not 0 <= self.value <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.value}")

    @classmethod
    def of(cls, x) -> "Alpha":
        if isinstance(x, Alpha):
            return x
        if isinstance(x, float):
            x = Fraction(x).limit_denominator(10**6)
        return cls(Fraction(x))

    @property
    def f(self) -> float:
        return float(self.value)

    @property
    def p(self) -> float:
        return math.inf if self.value == 0 else float(1 / self.value)

    @property
    def q(self) -> float:
        if self.value == 1:
            return math.inf
        return float(1 / (1 - self.value))

    def pow(self, x: float) -> float:
        """``x**alpha`` with the convention 0**alpha = 0."""
        if x == 0:
            return 0.0
        if self.value == 0:
            return 1.0
        return float(x) ** self.f


def _lp(values, alpha: Alpha) -> float:
    """l^p norm (p = 1/alpha) of a list of nonnegative numbers."""
    vals = [float(v) for v in values if v != 0]
    if not vals:
        return 0.0
    if alpha.value == 0:
        return max(vals)
    if alpha.value == 1:
        return math.fsum(vals)
    p = alpha.p
    return math.fsum(v**p for v in vals) ** alpha.f


def _lq(values, q: float) -> float:
    vals = [abs(float(v)) for v in values if v != 0]
    if not vals:
        return 0.0
    if q == math.inf:
        return max(vals)
    if q == 1:
        return math.fsum(vals)
    return math.fsum(v**q for v in vals) ** (1.0 / q)


def cost_C(theta, phi: PhiNorm, alpha) -> float:
    """Multi-material cost phi((sum of positive entries)^alpha, |sum of negative entries|^alpha)."""
    alpha = Alpha.of(alpha)
    flat = np.asarray(theta).ravel().tolist()
    pos = sum(x for x in flat if x > 0)
    neg = -sum(x for x in flat if x < 0)
    return phi(alpha.pow(pos), alpha.pow(neg))


def norm_phi_alpha(t: Sequence, phi: PhiNorm, alpha) -> float:
    alpha = Alpha.of(alpha)
    pos = [x for x in t if x > 0]
    neg = [-x for x in t if x < 0]
    return phi(_lp(pos, alpha), _lp(neg, alpha))


@dataclass(frozen=True)
class NormSpec:
    """Choice of coefficient norm on R^m."""

    kind: str  # "linf" | "l1" | "phi_alpha"
    phi: PhiNorm | None = None
    alpha: Alpha | None = None
    m: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("linf", "l1", "phi_alpha"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "phi_alpha" and (self.phi is None or self.alpha is None):
            raise ValueError("phi_alpha norms need phi and alpha")

    @classmethod
    def linf(cls, m=None) -> "NormSpec":
        return cls("linf", m=m)

    @classmethod
    def l1(cls, m=None) -> "NormSpec":
        return cls("l1", m=m)

    @classmethod
    def phi_alpha(cls, phi, alpha, m=None) -> "NormSpec":
        return cls("phi_alpha", PhiNorm.parse(phi), Alpha.of(alpha), m=m)

    @classmethod
    def from_json(cls, obj: dict) -> "NormSpec":
        kind = obj["kind"]
        if kind == "phi_alpha":
            phi = obj["phi"]
            if phi == "lr":
                phi = PhiNorm("lr", float(Fraction(str(obj["r"]))))
            return cls.phi_alpha(phi, Fraction(str(obj["alpha"])), m=obj.get("m"))
        return cls(kind, m=obj.get("m"))

    def to_json(self) -> dict:
        if self.kind != "phi_alpha":
            return {"kind": self.kind}
        out = {"kind": "phi_alpha", "phi": self.phi.kind, "alpha": str(self.alpha.value)}
        if self.phi.kind == "lr":
            out["r"] = self.phi.r
        return out

    @property
    def is_polyhedral(self) -> bool:
        if self.kind != "phi_alpha":
            return True
        return self.phi.kind != "lr" and self.alpha.value in (0, 1)

    def norm(self, v) -> float:
        return coeff_norm(v, self)

    def dual(self, v) -> float:
        return dual_norm(v, self)


def _check_dim(v, spec: NormSpec):
    if spec.m is not None and len(v) != spec.m:
        raise ValueError(f"coefficient of length {len(v)} does not match dimension {spec.m}")


def coeff_norm(v: Sequence, spec: NormSpec) -> float:
    _check_dim(v, spec)
    if spec.kind == "linf":
        return max((abs(float(x)) for x in v), default=0.0)
    if spec.kind == "l1":
        return math.fsum(abs(float(x)) for x in v)
    return norm_phi_alpha(v, spec.phi, spec.alpha)


def dual_norm(v: Sequence, spec: NormSpec) -> float:
    _check_dim(v, spec)
    if spec.kind == "linf":
        return math.fsum(abs(float(x)) for x in v)
    if spec.kind == "l1":
        return max((abs(float(x)) for x in v), default=0.0)
    q = spec.alpha.q
    a = _lq([x for x in v if x > 0], q)
    b = _lq([x for x in v if x < 0], q)
    return spec.phi.dual(a, b)


# ---------------------------------------------------------------------------
# comass


def ball_vertices(spec: NormSpec, m: int) -> np.ndarray | None:
    """Extreme points of the unit ball of a polyhedral coefficient norm.

    ``None`` for non-polyhedral norms.  The comass of a covector W is then
    ``max |W t|`` over these vertices.
    """
    if not spec.is_polyhedral:
        return None
    kind = spec.kind
    if kind == "phi_alpha":
        phi, a = spec.phi.kind, spec.alpha.value
        if a == 0:
            kind = "linf" if phi == "linf" else "pm_indicator"
        else:
            kind = "l1" if phi == "l1" else "pair_difference"
    if kind == "linf":
        if m > 20:
            raise ValueError("sign enumeration is limited to m <= 20")
        return np.array(list(itertools.product((1.0, -1.0), repeat=m)))
    eye = np.eye(m)
    if kind == "l1":
        return np.vstack([eye, -eye])
    if kind == "pm_indicator":
        # ||t+||_inf + ||t-||_inf <= 1: vertices are +-(indicator of a nonempty subset)
        if m > 20:
            raise ValueError("subset enumeration is limited to m <= 20")
        rows = [s for s in itertools.product((0.0, 1.0), repeat=m) if any(s)]
        rows = np.array(rows)
        return np.vstack([rows, -rows])
    # max(sum t+, sum |t-|) <= 1: vertices are +-e_i and e_i - e_j
    rows = [eye[i] for i in range(m)] + [-eye[i] for i in range(m)]
    rows += [eye[i] - eye[j] for i in range(m) for j in range(m) if i != j]
    return np.array(rows)


def _sphere_directions(d: int, count: int) -> np.ndarray:
    if d == 2:
        ang = np.linspace(0.0, np.pi, count, endpoint=False)
        return np.column_stack([np.cos(ang), np.sin(ang)])
    # Fibonacci lattice on the upper half sphere (norms are even in tau)
    i = np.arange(count) + 0.5
    z = i / count
    phi = np.pi * (1 + 5**0.5) * i
    rho = np.sqrt(1 - z * z)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def comass(W, spec: NormSpec, tol: float = 1e-9) -> float:
    """Comass of the R^m-valued 1-covector ``(tau, theta) -> tau^T W theta``.

    Exact for polyhedral norms (vertex enumeration of the unit ball);
    otherwise a numerical supremum over unit tangents accurate to about ``tol``
    relative to the value.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    d, m = W.shape
    if not np.all(np.isfinite(W)):
        raise ValueError("covector entries must be finite")
    if not np.any(W):
        return 0.0
    verts = ball_vertices(spec, m)
    if verts is not None:
        return float(np.max(np.linalg.norm(verts @ W.T, axis=1)))
    return _numeric_comass(W, spec, tol)


def _numeric_comass(W: np.ndarray, spec: NormSpec, tol: float) -> float:
    from scipy.optimize import minimize, minimize_scalar

    d, _ = W.shape

    def value(tau):
        tau = np.asarray(tau, dtype=float)
        tau = tau / np.linalg.norm(tau)
        return dual_norm((tau @ W).tolist(), spec)

    if d == 2:
        dirs = _sphere_directions(2, 3600)
        vals = np.array([value(t) for t in dirs])
        k = int(np.argmax(vals))
        step = np.pi / 3600
        ang0 = np.arctan2(dirs[k, 1], dirs[k, 0])
        res = minimize_scalar(
            lambda a: -value((np.cos(a), np.sin(a))),
            bounds=(ang0 - step, ang0 + step),
            method="bounded",
            options={"xatol": min(1e-10, tol)},
        )
        return float(max(vals[k], -res.fun))
    dirs = _sphere_directions(3, 20000)
    vals = np.array([value(t) for t in dirs])
    best = float(vals.max())
    for k in np.argsort(vals)[-5:]:
        res = minimize(lambda x: -value(x), dirs[k], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": tol * 1e-2})
        best = max(best, -float(res.fun))
    return best
