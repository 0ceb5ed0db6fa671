import math
import random

import numpy as np
import pytest

from oritrans.coefficients import NormSpec, PhiNorm
from oritrans.currents import MailingInstance, boundary, build_boundary_mailing, energy_alpha_phi, mass
from oritrans.solvers import (
    BudgetExceeded,
    Lattice,
    brute_force_lattice_mailing,
    enumerate_topologies,
    optimize_positions,
    solve_mailing_topology,
    solve_partitioned_steiner,
    steiner_minimal_tree,
)
from oritrans.steiner import Forest, PartitionedInstance, build_boundary_steiner
from oritrans.geometry import Segment

from conftest import SQRT3, SQUARE


@pytest.mark.parametrize("n,count", [(3, 1), (4, 3), (5, 15), (6, 105)])
def test_full_topology_counts(n, count):
    assert len(enumerate_topologies(n, n - 2, 1, n - 2)) == count


def test_fermat_point_of_equilateral_triangle():
    pts = [(0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3) / 2)]
    topo = enumerate_topologies(3, 1, 1, 1)[0]
    pos, value = optimize_positions(topo, pts)
    assert value == pytest.approx(SQRT3, abs=1e-9)
    assert np.allclose(pos[3], [0.5, math.sqrt(3) / 6], atol=1e-7)


def test_obtuse_triangle_collapses_onto_a_terminal():
    pts = [(0, 0), (4, 0), (2, "1/2")]
    segs, value, _ = steiner_minimal_tree(pts)
    want = 2 * math.hypot(2, 0.5)
    assert value == pytest.approx(want, abs=1e-9)


def test_two_terminals():
    segs, value, _ = steiner_minimal_tree([(0, 0), (3, 4)])
    assert value == pytest.approx(5.0)


def test_square_smt_value(square_value):
    segs, value, _ = steiner_minimal_tree(SQUARE)
    assert value == pytest.approx(square_value, abs=1e-9)


def test_partitioned_square(square_instance, square_value):
    rep = solve_partitioned_steiner(square_instance)
    assert rep.value == pytest.approx(square_value, abs=1e-9)
    assert rep.extra["coarsening"] == [[0, 1]]
    T = rep.extra["current"]
    assert boundary(T) == build_boundary_steiner(square_instance)
    assert mass(T, NormSpec.linf()) == pytest.approx(square_value, abs=1e-9)
    hand = Forest.from_segments([Segment.of(SQUARE[0], SQUARE[2]), Segment.of(SQUARE[1], SQUARE[3])])
    assert hand.length() == pytest.approx(4 * math.sqrt(2))
    assert rep.value < hand.length()


def test_stretched_rectangle_keeps_groups_apart():
    pts = [(10, 1), (0, 1), (0, 0), (10, 0)]
    inst = PartitionedInstance.of(pts, [[0, 2], [1, 3]])
    rep = solve_partitioned_steiner(inst)
    # crossing diagonals already form one component, and the merged tree is shorter
    merged = steiner_minimal_tree(pts)[1]
    assert rep.value == pytest.approx(min(merged, 2 * math.hypot(10, 1)), abs=1e-9)

    inst = PartitionedInstance.of(pts, [[0, 3], [1, 2]])
    rep = solve_partitioned_steiner(inst)
    assert rep.value == pytest.approx(2.0, abs=1e-12)
    assert rep.extra["coarsening"] == [[0], [1]]


def test_far_apart_groups():
    pts = [(0, 0), (1, 0), (100, 0), (100, 2)]
    inst = PartitionedInstance.of(pts, [[0, 1], [2, 3]])
    rep = solve_partitioned_steiner(inst)
    assert rep.value == pytest.approx(3.0)


def test_steiner_budget():
    pts = [(k, k * k % 7) for k in range(7)]
    inst = PartitionedInstance.of(pts, [list(range(7))])
    with pytest.raises(BudgetExceeded):
        solve_partitioned_steiner(inst)


def test_mailing_two_points():
    inst = MailingInstance.of([(0, 0), (3, 4)], [[0, 2], [1, 0]])
    rep = solve_mailing_topology(inst, PhiNorm("l1"), "1/2")
    assert rep.value == pytest.approx(5 * (math.sqrt(2) + 1))


def test_mailing_collinear_midpoint():
    inst = MailingInstance.of([(0, 0), (1, 0), (2, 0)], [[0, 0, 1], [0, 0, 0], [0, 0, 0]])
    rep = solve_mailing_topology(inst, PhiNorm("l1"), "1/2")
    assert rep.value == pytest.approx(2.0, abs=1e-9)


def test_mailing_y_shape_beats_direct_routes(triangle_mailing):
    phi = PhiNorm("l1")
    rep = solve_mailing_topology(triangle_mailing, phi, "1/2")
    direct = 2 * math.hypot(2, 3)
    assert rep.value < direct - 0.1
    assert boundary(rep.best) == build_boundary_mailing(triangle_mailing)
    assert energy_alpha_phi(rep.best, phi, "1/2") == pytest.approx(rep.value, abs=1e-9)
    # the lattice optimum on the snapped grid bounds the continuum from above
    lat = Lattice.of(5, 4)
    grid = brute_force_lattice_mailing(triangle_mailing, lat, phi, "1/2")
    assert rep.value <= grid.value + 1e-9


def test_positions_reproducible_under_seed():
    pts = [(0, 0), (4, 1), (1, 3), (5, 4)]
    topo = enumerate_topologies(4, 2, 1, 2)[1]
    a = optimize_positions(topo, pts, seed=3)
    b = optimize_positions(topo, pts, seed=3)
    assert a[1] == b[1]


@pytest.mark.parametrize("seed", range(4))
def test_smt_never_longer_than_the_mst(seed):
    from scipy.sparse.csgraph import minimum_spanning_tree
    rng = random.Random(seed)
    pts = sorted({(rng.randint(0, 9), rng.randint(0, 9)) for _ in range(5)})
    X = np.array(pts, dtype=float)
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    mst = minimum_spanning_tree(D).sum()
    value = steiner_minimal_tree(pts)[1]
    assert value <= mst + 1e-9
    assert value >= SQRT3 / 2 * mst - 1e-9  # Steiner ratio lower bound
