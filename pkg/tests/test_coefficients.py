import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oritrans.coefficients import (
    Alpha,
    NormSpec,
    PhiNorm,
    ball_vertices,
    coeff_norm,
    comass,
    cost_C,
    dual_norm,
    norm_phi_alpha,
    phi_eval,
)

PHIS = [PhiNorm("l1"), PhiNorm("linf"), PhiNorm("lr", 2.0), PhiNorm("lr", 3.0)]
ALPHAS = [0, "1/3", "1/2", 1]


@pytest.mark.parametrize("phi,x,y,want", [
    (PhiNorm("l1"), 1, 1, 2.0),
    (PhiNorm("linf"), 2, 3, 3.0),
    (PhiNorm("lr", 2.0), 3, 4, 5.0),
])
def test_phi_eval(phi, x, y, want):
    assert phi_eval(phi, x, y) == want


def test_phi_rejects_negative_input():
    with pytest.raises(ValueError):
        PhiNorm("l1")(-1, 0)


@pytest.mark.parametrize("text,kind,r", [("l1", "l1", None), ("Linf", "linf", None), ("l2", "lr", 2.0), ("lr(3)", "lr", 3.0)])
def test_phi_parse(text, kind, r):
    phi = PhiNorm.parse(text)
    assert phi.kind == kind and phi.r == r


def test_alpha_range():
    with pytest.raises(ValueError):
        Alpha.of(2)
    assert Alpha.of(0).pow(0) == 0.0
    assert Alpha.of(0).pow(5) == 1.0


def test_cost_of_two_opposite_materials():
    theta = np.array([[0, 2], [-1, 0]])  # 2 E_12 - E_21
    assert cost_C(theta, PhiNorm("l1"), "1/2") == pytest.approx(math.sqrt(2) + 1, abs=1e-15)


def test_norm_examples():
    assert norm_phi_alpha((2, -1), PhiNorm("linf"), 1) == 2.0
    assert coeff_norm((0.5, -0.5), NormSpec.linf()) == 0.5
    assert dual_norm((1, -2, 3), NormSpec.linf()) == 6.0


@pytest.mark.parametrize("phi", PHIS, ids=lambda p: p.label())
@pytest.mark.parametrize("alpha", ALPHAS)
def test_unit_vectors_have_cost_identity(phi, alpha):
    for t in itertools.product((-1, 0, 1), repeat=4):
        a = Alpha.of(alpha)
        want = phi(a.pow(sum(x > 0 for x in t)), a.pow(sum(x < 0 for x in t)))
        assert norm_phi_alpha(t, phi, a) == want


@pytest.mark.parametrize("phi", PHIS, ids=lambda p: p.label())
@pytest.mark.parametrize("alpha", ALPHAS)
@given(v=st.lists(st.floats(-4, 4, allow_nan=False), min_size=1, max_size=4),
       w=st.lists(st.floats(-4, 4, allow_nan=False), min_size=1, max_size=4))
def test_dual_pairing_bound(phi, alpha, v, w):
    k = min(len(v), len(w))
    v, w = v[:k], w[:k]
    spec = NormSpec.phi_alpha(phi, alpha)
    pair = abs(sum(a * b for a, b in zip(v, w)))
    assert pair <= coeff_norm(v, spec) * dual_norm(w, spec) * (1 + 1e-9) + 1e-12


@pytest.mark.parametrize("phi", PHIS, ids=lambda p: p.label())
@pytest.mark.parametrize("alpha", ALPHAS)
@given(v=st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=4),
       w=st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=4))
def test_triangle_inequality(phi, alpha, v, w):
    k = min(len(v), len(w))
    spec = NormSpec.phi_alpha(phi, alpha)
    s = [a + b for a, b in zip(v[:k], w[:k])]
    assert coeff_norm(s, spec) <= coeff_norm(v[:k], spec) + coeff_norm(w[:k], spec) + 1e-9


def test_comass_of_repeated_column():
    u = np.array([1.0, 0.0])
    assert comass(np.column_stack([u, u]), NormSpec.linf()) == pytest.approx(2.0)
    assert comass(np.zeros((2, 3)), NormSpec.l1()) == 0.0


@pytest.mark.parametrize("spec", [
    NormSpec.linf(), NormSpec.l1(), NormSpec.phi_alpha("l1", 0), NormSpec.phi_alpha("l1", 1),
    NormSpec.phi_alpha("linf", 0), NormSpec.phi_alpha("linf", 1),
], ids=lambda s: str(s.to_json()))
def test_ball_vertices_have_unit_norm(spec):
    V = ball_vertices(spec, 3)
    assert all(coeff_norm(v.tolist(), spec) == pytest.approx(1.0) for v in V)


@pytest.mark.parametrize("spec", [NormSpec.phi_alpha("l2", "1/2"), NormSpec.phi_alpha("l1", "1/2")],
                         ids=["l2-half", "l1-half"])
def test_numeric_comass_matches_dense_search(spec):
    rng = np.random.default_rng(3)
    W = rng.normal(size=(2, 3))
    ang = np.linspace(0, np.pi, 20001)
    brute = max(dual_norm((np.array([math.cos(a), math.sin(a)]) @ W).tolist(), spec) for a in ang)
    assert comass(W, spec) == pytest.approx(brute, rel=1e-6)
    assert comass(W, spec) >= brute - 1e-12


def test_normspec_json_roundtrip():
    for spec in (NormSpec.linf(), NormSpec.phi_alpha("l2", "1/3"), NormSpec.phi_alpha("linf", 0)):
        assert NormSpec.from_json(spec.to_json()) == spec


def test_dimension_guard():
    with pytest.raises(ValueError):
        coeff_norm((1, 2), NormSpec.linf(m=3))
