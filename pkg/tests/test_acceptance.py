"""Acceptance gate: one test per criterion; a PASS/FAIL line per criterion is
printed in the terminal summary (see conftest.py).

Run alone with ``pytest tests/test_acceptance.py``.
"""
import itertools
import json
import math
import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from oritrans.calibration import CALIBRATED, VIOLATED, CalibrationCertificate, check_closed, check_equality, \
    fermat_certificate, verify_calibration
from oritrans.coefficients import Alpha, NormSpec, PhiNorm, dual_norm, norm_phi_alpha
from oritrans.currents import (
    MailingInstance,
    PairOrdering,
    PolyCurrent1,
    boundary,
    build_boundary_mailing,
    build_boundary_relaxed,
    decompose_component,
    energy_alpha_phi,
    lift_to_relaxed,
    mass,
    remove_cycles,
)
from oritrans.geometry import Polyline
from oritrans.io import certificate_from_json
from oritrans.mailing import LabeledPath, PathFamily, current_to_family, energy_family, family_to_current, theta_pm
from oritrans.solvers import (
    Lattice,
    brute_force_lattice_current,
    brute_force_lattice_mailing,
    solve_partitioned_steiner,
    solve_real_relaxation,
    steiner_minimal_tree,
)
from oritrans.solvers.lattice import _family_options, _flow_options, cost_table, lattice_current
from oritrans.solvers.relaxation import square_support
from oritrans.steiner import Forest, PartitionedInstance, build_boundary_steiner, tree_to_current

SQUARE = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
SQUARE_VALUE = 2 + 2 * math.sqrt(3)
CERTS = Path(__file__).parent / "data" / "square_certificates"
PHIS = [PhiNorm("l1"), PhiNorm("linf"), PhiNorm("lr", 2.0), PhiNorm("lr", 3.0)]
ALPHAS = [Alpha.of(0), Alpha.of("1/3"), Alpha.of("1/2"), Alpha.of(1)]


def square_instance():
    return PartitionedInstance.of(SQUARE, [[0, 2], [1, 3]])


def test_criterion_1_square_primal_value():
    """1. partitioned Steiner value on the square is 2 + 2 sqrt(3) within 1e-4, under 10 s"""
    t0 = time.perf_counter()
    rep = solve_partitioned_steiner(square_instance())
    elapsed = time.perf_counter() - t0
    assert abs(rep.value - SQUARE_VALUE) <= 1e-4
    assert elapsed < 10.0


def test_criterion_2_square_relaxation_and_certificates():
    """2. square relaxation is 4 within 1e-4 under 10 s, gap ~1.4641 > 0, every bundled certificate VIOLATED"""
    inst = square_instance()
    t0 = time.perf_counter()
    rep = solve_real_relaxation(square_support(SQUARE), build_boundary_steiner(inst), NormSpec.linf(),
                                integer_value=SQUARE_VALUE)
    elapsed = time.perf_counter() - t0
    assert abs(rep.value - 4.0) <= 1e-4
    assert elapsed < 10.0
    gap = rep.extra["integrality_gap"]
    assert gap > 0 and abs(gap - (SQUARE_VALUE - 4)) <= 1e-4

    T1 = solve_partitioned_steiner(inst).extra["current"]
    assert mass(T1, NormSpec.linf()) == pytest.approx(SQUARE_VALUE, abs=1e-9)
    paths = sorted(CERTS.glob("*.json"))
    assert len(paths) >= 5
    for path in paths:
        cert = certificate_from_json(json.loads(path.read_text()))
        assert verify_calibration(cert, T1).verdict == VIOLATED, path.name


def test_criterion_3_unit_vector_identity():
    """3. norm of a {-1,0,1} vector equals phi(#+^alpha, #-^alpha) exactly (1000 vectors, all phi and alpha)"""
    rng = np.random.default_rng(3)
    for _ in range(1000):
        t = rng.integers(-1, 2, size=int(rng.integers(1, 9))).tolist()
        plus, minus = sum(x > 0 for x in t), sum(x < 0 for x in t)
        for phi in PHIS:
            for a in ALPHAS:
                assert norm_phi_alpha(t, phi, a) == phi(a.pow(plus), a.pow(minus)), (t, phi, a)


# -- criterion 4 -------------------------------------------------------------------


def random_lattice_instance(rng: random.Random):
    nx, ny = rng.choice([(2, 2), (2, 3), (3, 2), (3, 3)])
    lat = Lattice.of(nx, ny, spacing=rng.choice([1, 2, Fraction(1, 2)]))
    n = rng.choice([2, 3])
    nodes = rng.sample(range(lat.n_nodes), n)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    G = [[0] * n for _ in range(n)]
    for _ in range(rng.randint(1, 3)):
        i, j = rng.choice(pairs)
        G[i][j] += 1
    inst = MailingInstance.of([lat.node_point(v) for v in nodes], G)
    return lat, inst, rng.choice(PHIS), rng.choice(ALPHAS)


def edge_row(lat: Lattice, path: Polyline) -> np.ndarray:
    """Signed use of every lattice edge by a lattice polyline (+1 along the edge's orientation)."""
    index = {e: k for k, e in enumerate(lat.edges())}
    row = np.zeros(len(index), dtype=np.int64)
    for seg in path.segments():
        a, b = lat.node_of(seg.a), lat.node_of(seg.b)
        steps = max(abs(b % lat.nx - a % lat.nx), abs(b // lat.nx - a // lat.nx))
        step = (b - a) // steps
        for k in range(steps):
            u, v = a + k * step, a + (k + 1) * step
            if (u, v) in index:
                row[index[(u, v)]] += 1
            else:
                row[index[(v, u)]] -= 1
    return row


def energies(P, M, table, spacing):
    """fsum energies of a batch of per-edge (plus, minus) count arrays."""
    return np.array([math.fsum((table[p, m] * float(spacing)).tolist()) for p, m in zip(P, M)])


def product_rows(options):
    idx = np.array(list(itertools.product(*[range(len(o)) for o in options])), dtype=np.int64)
    return idx


def test_criterion_4_family_and_current_optima_agree():
    """4. lattice family optimum == current optimum exactly on 22 instances; both maps never raise the energy"""
    rng = random.Random(4)
    checked_objects = 0
    for trial in range(22):
        lat, inst, phi, alpha = random_lattice_instance(rng)
        fam = brute_force_lattice_mailing(inst, lat, phi, alpha)
        cur = brute_force_lattice_current(inst, lat, phi, alpha)
        assert fam.value == cur.value, (trial, fam.value, cur.value)
        assert energy_family(fam.best, phi, alpha) == pytest.approx(fam.value, rel=1e-12, abs=1e-12)
        assert energy_alpha_phi(cur.best, phi, alpha) == pytest.approx(cur.value, rel=1e-12, abs=1e-12)

        table = cost_table(phi, alpha, 2 * inst.N + 1)
        E = len(lat.edges())

        # every family: the current it induces costs no more
        per = _family_options(lat, inst)
        opts = [o for *_, o in per]
        idx = product_rows(opts)
        PM = np.stack([opts[c][idx[:, c]].astype(np.int64) for c in range(len(opts))], axis=1)  # (F, C, 2E)
        P, M = PM[..., :E], PM[..., E:]
        net = P - M
        e_family = energies(P.sum(axis=1), M.sum(axis=1), table, lat.spacing)
        e_induced = energies(np.maximum(net, 0).sum(axis=1), np.maximum(-net, 0).sum(axis=1), table, lat.spacing)
        assert np.all(e_induced <= e_family)
        assert e_family.min() == fam.value
        for k in rng.sample(range(len(idx)), min(5, len(idx))):
            paths = []
            for ((i, j), plist, combos, _), choice in zip(per, idx[k]):
                paths += [LabeledPath((i, j), Polyline.of([lat.node_point(v) for v in plist[p]])) for p in combos[choice]]
            F = PathFamily(inst, tuple(paths))
            assert energy_family(F, phi, alpha) == pytest.approx(e_family[k], rel=1e-12, abs=1e-12)
            assert energy_alpha_phi(family_to_current(F), phi, alpha) == pytest.approx(e_induced[k], rel=1e-12, abs=1e-12)

        # every current: the family of its acyclic decomposition costs no more
        flows = _flow_options(lat, inst)
        dec_rows = []
        for (pair, fl, _) in flows:
            rows = []
            for f in fl:
                T1 = lattice_current(lat, MailingInstance.of(inst.points, [[1 if (a, b) == (0, 1) else 0 for b in range(inst.n)]
                                                                            for a in range(inst.n)]), {(0, 1): f})
                comp = T1.component(1)
                single = PolyCurrent1.build(1, [(s, (c[0],)) for s, c in comp.atoms], "int")
                dec = decompose_component(single)
                r = np.zeros((2, E), dtype=np.int64)
                for path in dec.paths:
                    row = edge_row(lat, path)
                    r[0] += np.maximum(row, 0)
                    r[1] += np.maximum(-row, 0)
                rows.append(r)
            dec_rows.append(np.array(rows))
        idx = product_rows([fl for _, fl, _ in flows])
        Fl = np.stack([flows[c][1][idx[:, c]].astype(np.int64) for c in range(len(flows))], axis=1)  # (T, C, E)
        D = np.stack([dec_rows[c][idx[:, c]] for c in range(len(flows))], axis=1)  # (T, C, 2, E)
        e_current = energies(np.maximum(Fl, 0).sum(axis=1), np.maximum(-Fl, 0).sum(axis=1), table, lat.spacing)
        e_decomposed = energies(D[:, :, 0].sum(axis=1), D[:, :, 1].sum(axis=1), table, lat.spacing)
        assert np.all(e_decomposed <= e_current)
        assert e_current.min() == cur.value
        for k in rng.sample(range(len(idx)), min(5, len(idx))):
            T = lattice_current(lat, inst, {pair: flows[c][1][idx[k, c]] for c, (pair, _, _) in enumerate(flows)})
            assert boundary(T) == build_boundary_mailing(inst)
            assert energy_alpha_phi(T, phi, alpha) == pytest.approx(e_current[k], rel=1e-12, abs=1e-12)
            F = current_to_family(T, inst).family
            assert energy_family(F, phi, alpha) == pytest.approx(e_decomposed[k], rel=1e-12, abs=1e-12)
        checked_objects += len(e_family) + len(e_current)
    assert checked_objects > 1_000


# -- criterion 5 -------------------------------------------------------------------


def cycle_reduced_currents(rng: random.Random, count: int):
    """Random lattice currents (cycles allowed) with their cycles removed."""
    out = []
    while len(out) < count:
        lat, inst, _, _ = random_lattice_instance(rng)
        flows = _flow_options(lat, inst)
        for _ in range(4):
            choice = {pair: fl[rng.randrange(len(fl))] for pair, fl, _ in flows}
            out.append((inst, remove_cycles(lattice_current(lat, inst, choice))))
    return out


def test_criterion_5_lift_mass_equals_energy():
    """5. mass of the lift under the (phi, alpha) norm equals the energy to 1e-9 and boundaries map exactly"""
    rng = random.Random(5)
    for inst, T in cycle_reduced_currents(rng, 80):
        pairs = [(i, j) for i in range(inst.n) for j in range(inst.n)]
        rng.shuffle(pairs)
        for ordering in (PairOrdering.row_major(inst), PairOrdering.from_pairs(inst, pairs)):
            R = lift_to_relaxed(T, inst, ordering)
            assert boundary(T) == build_boundary_mailing(inst)
            assert boundary(R) == build_boundary_relaxed(inst, ordering)
            for phi in PHIS:
                for a in ALPHAS:
                    e = energy_alpha_phi(T, phi, a)
                    m = mass(R, NormSpec.phi_alpha(phi, a.value))
                    assert abs(m - e) <= 1e-9 * max(1.0, e)


# -- criterion 6 -------------------------------------------------------------------


def random_partitioned(rng: random.Random):
    n = rng.randint(2, 6)
    pts = set()
    while len(pts) < n:
        pts.add((rng.randint(-8, 8), rng.randint(-8, 8)))
    pts = sorted(pts)
    order = list(range(n))
    rng.shuffle(order)
    sizes = []
    left = n
    while left:
        s = left if left < 4 else rng.choice([k for k in range(2, left + 1) if left - k != 1])
        sizes.append(s)
        left -= s
    groups, k = [], 0
    for s in sizes:
        groups.append(order[k:k + s])
        k += s
    return PartitionedInstance.of(pts, groups)


def test_criterion_6_unit_coefficients_on_trees():
    """6. tree_to_current has sup-norm 1 on every atom and mass = length to 1e-12 (50 instances, n <= 6)"""
    rng = random.Random(6)
    for _ in range(50):
        inst = random_partitioned(rng)
        K = solve_partitioned_steiner(inst).best
        T = tree_to_current(K, inst)
        assert boundary(T) == build_boundary_steiner(inst)
        assert all(max(abs(x) for x in c) == 1 for _, c in T.atoms)
        assert math.isclose(mass(T, NormSpec.linf()), K.length(), rel_tol=1e-12, abs_tol=1e-12)


# -- criterion 7 -------------------------------------------------------------------


def test_criterion_7_fermat_calibration():
    """7. Fermat certificate passes closedness, exact comass <= 1 and equality <= 1e-9; 0.05 perturbations flip it"""
    pts = [(0, 0), (4, 0), (1, 3)]
    inst = PartitionedInstance.of(pts, [[0, 1, 2]])
    T = tree_to_current(Forest.from_segments(steiner_minimal_tree(pts)[0]), inst)
    cert = fermat_certificate(T)
    rep = verify_calibration(cert, T)
    assert check_closed(cert) == (True, None)
    assert rep.comass_exact and rep.comass_bound <= 1 + 1e-12
    assert rep.equality_max_violation <= 1e-9
    assert rep.verdict == CALIBRATED
    flipped = 0
    for i, j in itertools.product(range(2), range(2)):
        for delta in (0.05, -0.05):
            W = cert.cells[0].W.copy()
            W[i, j] += delta
            bad = CalibrationCertificate.build([(c.polygon, W) for c in cert.cells], cert.norm)
            if not check_equality(bad, T)[1]:
                assert verify_calibration(bad, T).verdict == VIOLATED
                flipped += 1
    assert flipped >= 4


# -- criterion 8 -------------------------------------------------------------------


def test_criterion_8_dual_norm_against_lattice_search():
    """8. closed-form dual norm matches a 101 x 101 trial-vector search within 1e-3 relative (100 vectors, all phi)"""
    axis = np.linspace(-5, 5, 101)
    trial = np.array([(x, y) for x in axis for y in axis if x or y])
    rng = np.random.default_rng(8)
    vs = rng.normal(scale=2.0, size=(100, 2))
    for phi in PHIS:
        for a in ALPHAS:
            spec = NormSpec.phi_alpha(phi, a.value)
            norms = np.array([norm_phi_alpha(t, phi, a) for t in trial.tolist()])
            for v in vs:
                brute = float(np.max(trial @ v / norms))
                exact = dual_norm(v.tolist(), spec)
                assert exact >= brute * (1 - 1e-12)
                assert abs(exact - brute) <= 1e-3 * exact, (phi, a, v, exact, brute)


# -- criterion 9 -------------------------------------------------------------------


def random_family(rng: random.Random):
    """Paths on a small grid with diagonals, so atoms are shared in both directions."""
    pts = [(0, 0), (3, 0), (3, 3), (0, 3)]
    n = 4
    G = [[0] * n for _ in range(n)]
    paths = []
    for _ in range(rng.randint(1, 5)):
        i, j = rng.sample(range(n), 2)
        G[i][j] += 1
        mids = [(rng.randint(0, 3), rng.randint(0, 3)) for _ in range(rng.randint(0, 2))]
        verts = [pts[i]] + [m for m in mids if m not in (pts[i], pts[j])] + [pts[j]]
        verts = [v for k, v in enumerate(verts) if k == 0 or v != verts[k - 1]]
        paths.append(LabeledPath((i, j), Polyline.of(verts)))
    return PathFamily(MailingInstance.of(pts, G), tuple(paths))


def test_criterion_9_orientation_invariance():
    """9. energy_family is bit-identical under random re-orientation of overlay atoms (500 trials)"""
    rng = random.Random(9)
    for _ in range(500):
        F = random_family(rng)
        phi, a = rng.choice(PHIS), rng.choice(ALPHAS)
        n_atoms = len(theta_pm(F).atoms)
        flips = {k for k in range(n_atoms) if rng.random() < 0.5}
        assert energy_family(F, phi, a, flips) == energy_family(F, phi, a)
