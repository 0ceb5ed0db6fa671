import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oritrans.coefficients import PhiNorm
from oritrans.currents import MailingInstance, PolyCurrent1, boundary, build_boundary_mailing, energy_alpha_phi
from oritrans.geometry import Polyline, Segment
from oritrans.mailing import (
    LabeledPath,
    PathFamily,
    check_compatible,
    current_to_family,
    energy_family,
    family_to_current,
    theta_pm,
)

PHIS = [PhiNorm("l1"), PhiNorm("linf"), PhiNorm("lr", 2.0)]
ALPHAS = [0, "1/3", "1/2", 1]
TWO = MailingInstance.of([(0, 0), (1, 0)], [[0, 1], [0, 0]])


def fam(inst, *paths):
    return PathFamily(inst, tuple(LabeledPath(c, Polyline.of(v)) for c, v in paths))


def test_compatibility():
    assert check_compatible(fam(TWO, ((0, 1), [(0, 0), (1, 0)])))
    assert not check_compatible(fam(TWO, ((0, 1), [(0, 0), (1, 1)])))
    inst = MailingInstance.of([(0, 0), (1, 0)], [[0, 2], [0, 0]])
    assert not check_compatible(fam(inst, ((0, 1), [(0, 0), (1, 0)])))


def test_theta_counts():
    inst = MailingInstance.of([(0, 0), (2, 0)], [[0, 2], [0, 0]])
    F = fam(inst, ((0, 1), [(0, 0), (2, 0)]), ((0, 1), [(0, 0), (2, 0)]))
    assert [(a.plus, a.minus) for a in theta_pm(F).atoms] == [(2, 0)]

    inst = MailingInstance.of([(0, 0), (2, 0)], [[0, 1], [1, 0]])
    F = fam(inst, ((0, 1), [(0, 0), (2, 0)]), ((1, 0), [(2, 0), (0, 0)]))
    assert [(a.plus, a.minus) for a in theta_pm(F).atoms] == [(1, 1)]

    inst = MailingInstance.of([(0, 0), (2, 0), (3, 0), (1, 0)], np.diag([1, 0, 0], 1).tolist())
    F = PathFamily(inst, (LabeledPath((0, 1), Polyline.of([(0, 0), (2, 0)])),
                          LabeledPath((1, 2), Polyline.of([(2, 0), (3, 0)])),
                          LabeledPath((2, 3), Polyline.of([(3, 0), (1, 0)]))))
    got = [(a.plus, a.minus) for a in theta_pm(F).atoms]
    assert got == [(1, 0), (1, 1), (1, 1)]


@pytest.mark.parametrize("phi", PHIS, ids=lambda p: p.label())
@pytest.mark.parametrize("alpha", ALPHAS)
def test_unit_path_energy(phi, alpha):
    assert energy_family(fam(TWO, ((0, 1), [(0, 0), (1, 0)])), phi, alpha) == 1.0


@pytest.mark.parametrize("phi,want", [(PhiNorm("l1"), 2.0), (PhiNorm("linf"), 1.0)])
def test_two_way_road(phi, want):
    inst = MailingInstance.of([(0, 0), (1, 0)], [[0, 1], [1, 0]])
    F = fam(inst, ((0, 1), [(0, 0), (1, 0)]), ((1, 0), [(1, 0), (0, 0)]))
    assert energy_family(F, phi, 1) == want
    T = family_to_current(F)
    assert energy_alpha_phi(T, phi, 1) == want


def test_family_to_current_single_path():
    T = family_to_current(fam(TWO, ((0, 1), [(0, 0), (1, 0)])))
    assert T == PolyCurrent1.build(4, [(Segment.of((0, 0), (1, 0)), (0, 1, 0, 0))])


def test_same_commodity_cancellation():
    """Two paths of one commodity sharing a stretch in opposite directions."""
    pts = [(0, 0), (4, 0), (0, 2), (4, 2)]
    G = [[0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]
    G[0][3] = 2
    inst = MailingInstance.of(pts, G)
    up = [(0, 0), (1, 0), (1, 1), (3, 1), (3, 2), (4, 2)]
    down = [(0, 0), (3, 0), (3, 1), (1, 1), (1, 2), (4, 2)]
    F = fam(inst, ((0, 3), up), ((0, 3), down))
    assert check_compatible(F)
    phi = PhiNorm("l1")
    T = family_to_current(F)
    assert boundary(T) == build_boundary_mailing(inst)
    assert energy_alpha_phi(T, phi, "1/2") < energy_family(F, phi, "1/2")


def test_current_to_family_single_segment():
    T = PolyCurrent1.build(4, [(Segment.of((0, 0), (1, 0)), (0, 1, 0, 0))])
    out = current_to_family(T, TWO)
    assert len(out.family.paths) == 1 and not out.dropped_cycles


def test_current_to_family_drops_cycles():
    T = PolyCurrent1.build(4, [(Segment.of((0, 0), (1, 0)), (0, 1, 0, 0))])
    T = T + PolyCurrent1.from_path(Polyline.of([(0, 2), (1, 2), (1, 3), (0, 2)]), (0, 1, 0, 0))
    out = current_to_family(T, TWO)
    assert (0, 1) in out.dropped_cycles
    phi = PhiNorm("l1")
    assert energy_family(out.family, phi, "1/2") < energy_alpha_phi(T, phi, "1/2")


@st.composite
def grid_current(draw):
    """Random lattice current for a two-commodity instance: paths plus loops."""
    pts = [(0, 0), (3, 0), (3, 2)]
    G = [[0, 1, 0], [0, 0, 1], [0, 0, 0]]
    inst = MailingInstance.of(pts, G)

    def monotone(a, b):
        x, y = a
        verts = [a]
        while (x, y) != b:
            if x != b[0] and (y == b[1] or draw(st.booleans())):
                x += 1 if b[0] > x else -1
            else:
                y += 1 if b[1] > y else -1
            verts.append((x, y))
        return Polyline(tuple(Polyline.of(verts).vertices))

    T = PolyCurrent1.zero(9)
    for (i, j), src, dst in (((0, 1), pts[0], pts[1]), ((1, 2), pts[1], pts[2])):
        e = tuple(1 if k == inst.channel(i, j) else 0 for k in range(9))
        T = T + PolyCurrent1.from_path(monotone(src, dst), e)
        if draw(st.booleans()):
            x, y = draw(st.integers(0, 2)), draw(st.integers(0, 1))
            loop = Polyline.of([(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1), (x, y)])
            T = T + PolyCurrent1.from_path(loop if draw(st.booleans()) else loop.reversed(), e)
    return inst, T


@given(grid_current(), st.sampled_from(PHIS), st.sampled_from(ALPHAS))
def test_roundtrip_never_increases_energy(data, phi, alpha):
    inst, T = data
    F = current_to_family(T, inst).family
    assert check_compatible(F)
    e_T = energy_alpha_phi(T, phi, alpha)
    assert energy_family(F, phi, alpha) <= e_T + 1e-12
    assert energy_alpha_phi(family_to_current(F), phi, alpha) <= e_T + 1e-12


@given(grid_current(), st.sampled_from(PHIS), st.sampled_from(ALPHAS), st.data())
def test_family_energy_ignores_atom_orientation(data, phi, alpha, draw):
    inst, T = data
    F = current_to_family(T, inst).family
    n = len(theta_pm(F).atoms)
    flips = draw.draw(st.sets(st.integers(0, max(n - 1, 0))))
    assert energy_family(F, phi, alpha, flips) == energy_family(F, phi, alpha)
