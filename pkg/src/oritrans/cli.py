"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 budget exceeded.  ``verify`` uses
0 CALIBRATED, 1 VIOLATED, 4 INCONCLUSIVE.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import io as oio
from .calibration import CALIBRATED, INCONCLUSIVE, verify_calibration
from .coefficients import Alpha, NormSpec, PhiNorm
from .currents import (
    BoundaryMismatch,
    MailingInstance,
    PairOrdering,
    boundary,
    build_boundary_mailing,
    energy_alpha_phi,
    lift_to_relaxed,
    mass,
    project_from_relaxed,
)
from .mailing import current_to_family, energy_family, family_to_current
from .solvers.lattice import Lattice, brute_force_lattice_current, brute_force_lattice_mailing
from .solvers.relaxation import InfeasibleBoundary, solve_real_relaxation
from .solvers.report import BudgetExceeded
from .solvers.topology import ConvergenceError, solve_mailing_topology, solve_partitioned_steiner
from .steiner import build_boundary_steiner, tree_to_current, used_forest
from .svg import atom_table, render

EXIT_OK, EXIT_VIOLATED, EXIT_INVALID, EXIT_BUDGET, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4

log = logging.getLogger("oritrans")


def _emit(obj, args):
    text = oio.dump(obj, getattr(args, "output", None))
    if getattr(args, "output", None) is None:
        print(text)


def _side_files(args, T, points=(), segments=(), title="", phi=None, alpha=None):
    if getattr(args, "svg", None) and T is not None:
        Path(args.svg).write_text(render(T, points, segments, title))
    if getattr(args, "csv", None) and T is not None:
        Path(args.csv).write_text(atom_table(T, phi, alpha))


def _cost(args, inst_file=None) -> tuple[PhiNorm, Alpha]:
    if getattr(args, "phi", None) is not None or getattr(args, "alpha", None) is not None:
        return PhiNorm.parse(args.phi or "l1"), Alpha.of(Fraction(args.alpha or "1/2"))
    if inst_file is not None and inst_file.norm is not None:
        return oio.phi_alpha_from_json(inst_file.norm)
    return PhiNorm.parse("l1"), Alpha.of(Fraction(1, 2))


# -- solve -------------------------------------------------------------------------


def cmd_solve(args) -> int:
    spec = oio.instance_from_json(oio.load(args.instance))
    cfg = dict(spec.solver)
    tol = args.tol if args.tol is not None else float(cfg.get("tol", 1e-9))
    if spec.kind == "steiner":
        inst = spec.instance
        max_topo = args.budget_topologies or int(cfg.get("max_topologies", 200_000))
        rep = solve_partitioned_steiner(inst, tol=tol, max_topologies=max_topo, seed=args.seed)
        K, T = rep.best, rep.extra["current"]
        out = {"kind": "steiner", "value": rep.value, "forest": oio.forest_to_json(K),
               "current": oio.current_to_json(T), "mass_linf": mass(T, NormSpec.linf(inst.m)),
               "coarsening": rep.extra["coarsening"], "counts": rep.counts, "config": rep.config}
        _side_files(args, T, inst.points, title=f"value {rep.value:.10g}")
        _emit(out, args)
        return EXIT_OK
    inst: MailingInstance = spec.instance
    phi, alpha = _cost(args, spec)
    method = args.method or cfg.get("method", "topology")
    if method == "lattice":
        grid = cfg.get("grid", {})
        nx = args.grid[0] if args.grid else int(grid.get("nx", 3))
        ny = args.grid[1] if args.grid else int(grid.get("ny", 3))
        spacing = Fraction(args.spacing) if args.spacing else Fraction(str(grid.get("spacing", 1)))
        origin = grid.get("origin", [0, 0])
        lat = Lattice.of(nx, ny, spacing, [Fraction(str(c)) for c in origin])
        max_states = args.budget_states or int(cfg.get("max_states", 5_000_000))
        rep_f = brute_force_lattice_mailing(inst, lat, phi, alpha, max_states=max_states)
        rep_c = brute_force_lattice_current(inst, lat, phi, alpha, max_states=max_states)
        T = family_to_current(rep_f.best)
        out = {"kind": "mailing", "method": "lattice", "value": rep_f.value,
               "current_oracle_value": rep_c.value, "family": oio.family_to_json(rep_f.best),
               "current": oio.current_to_json(T), "counts": {"family": rep_f.counts, "current": rep_c.counts},
               "config": rep_f.config}
    else:
        max_steiner = args.max_steiner if args.max_steiner is not None else int(cfg.get("max_steiner", 2))
        max_topo = args.budget_topologies or int(cfg.get("max_topologies", 100_000))
        rep = solve_mailing_topology(inst, phi, alpha, max_steiner, tol=tol, max_topologies=max_topo,
                                     seed=args.seed)
        T = rep.best
        out = {"kind": "mailing", "method": "topology", "value": rep.value,
               "current": oio.current_to_json(T), "counts": rep.counts, "config": rep.config}
    out["cost"] = {"phi": phi.label(), "alpha": str(alpha.value)}
    _side_files(args, T, inst.points, title=f"value {out['value']:.10g}", phi=phi, alpha=alpha)
    _emit(out, args)
    return EXIT_OK


# -- verify ------------------------------------------------------------------------


def cmd_verify(args) -> int:
    cert = oio.certificate_from_json(oio.load(args.certificate))
    T = oio.current_from_json(oio.load(args.current))
    rep = verify_calibration(cert, T, tol=args.tol if args.tol is not None else 1e-9)
    _emit(rep.to_json(), args)
    if rep.verdict == CALIBRATED:
        return EXIT_OK
    if rep.verdict == INCONCLUSIVE:
        return EXIT_INCONCLUSIVE
    return EXIT_VIOLATED


# -- convert -----------------------------------------------------------------------


def _load_instance(args, kind):
    if not args.instance:
        raise oio.InvalidInput(f"--instance is required for this conversion ({kind})")
    spec = oio.instance_from_json(oio.load(args.instance))
    if spec.kind != kind:
        raise oio.InvalidInput(f"expected a {kind} instance, got {spec.kind}")
    return spec


def cmd_convert(args) -> int:
    data = oio.load(args.input)
    to = args.to
    if to == "current":
        inst_spec = _load_instance(args, "mailing") if args.instance else None
        F = oio.family_from_json(data, inst_spec.instance if inst_spec else None)
        phi, alpha = _cost(args, inst_spec)
        T = family_to_current(F)
        out = {"current": oio.current_to_json(T), "energy_before": energy_family(F, phi, alpha),
               "energy_after": energy_alpha_phi(T, phi, alpha),
               "boundary_matches": boundary(T) == build_boundary_mailing(F.instance)}
    elif to == "family":
        spec = _load_instance(args, "mailing")
        phi, alpha = _cost(args, spec)
        T = oio.current_from_json(data)
        res = current_to_family(T, spec.instance)
        out = {"family": oio.family_to_json(res.family), "energy_before": energy_alpha_phi(T, phi, alpha),
               "energy_after": energy_family(res.family, phi, alpha),
               "dropped_cycles": {f"{i},{j}": [[oio.format_point(p) for p in cyc] for cyc in cycles]
                                  for (i, j), cycles in res.dropped_cycles.items()},
               "dropped_cycle_length": res.dropped_cycle_length}
    elif to in ("lift", "project"):
        spec = _load_instance(args, "mailing")
        inst = spec.instance
        phi, alpha = _cost(args, spec)
        ordering = oio.ordering_from_json(oio.load(args.ordering), inst) if args.ordering else PairOrdering.row_major(inst)
        T = oio.current_from_json(data)
        norm = NormSpec.phi_alpha(phi, alpha)
        if to == "lift":
            R = lift_to_relaxed(T, inst, ordering)
            out = {"current": oio.current_to_json(R), "energy_before": energy_alpha_phi(T, phi, alpha),
                   "mass_after": mass(R, norm), "ordering": [list(p) for p in ordering.pairs]}
        else:
            P = project_from_relaxed(T, inst, ordering)
            out = {"current": oio.current_to_json(P), "mass_before": mass(T, norm),
                   "energy_after": energy_alpha_phi(P, phi, alpha)}
    elif to == "tree-current":
        spec = _load_instance(args, "steiner")
        K = oio.forest_from_json(data)
        T = tree_to_current(K, spec.instance)
        out = {"current": oio.current_to_json(T), "length_before": used_forest(K, spec.instance).length(),
               "mass_after": mass(T, NormSpec.linf(spec.instance.m))}
    else:  # pragma: no cover - argparse restricts the choices
        raise oio.InvalidInput(f"unknown conversion {to!r}")
    _emit(out, args)
    return EXIT_OK


# -- relax -------------------------------------------------------------------------


def cmd_relax(args) -> int:
    spec = oio.instance_from_json(oio.load(args.instance))
    support = oio.support_from_json(oio.load(args.support))
    if args.norm:
        norm = oio.norm_from_json(json.loads(args.norm))
    elif spec.norm is not None and spec.kind == "steiner":
        norm = oio.norm_from_json(spec.norm)
    else:
        norm = NormSpec.linf()
    integer_value = None
    if spec.kind == "steiner":
        B = build_boundary_steiner(spec.instance)
        if not args.no_integer:
            integer_value = solve_partitioned_steiner(spec.instance, seed=args.seed).value
    else:
        B = build_boundary_mailing(spec.instance)
    tol = args.tol if args.tol is not None else 1e-6
    rep = solve_real_relaxation(support, B, norm, tol=tol, integer_value=integer_value)
    out = {"value": rep.value, "current": oio.current_to_json(rep.best), "norm": norm.to_json(),
           "lower_bound": rep.extra["lower_bound"], "residual": rep.extra["residual"],
           "method": rep.extra["method"], "iterations": rep.extra["iterations"]}
    if integer_value is not None:
        out["integer_value"] = integer_value
        out["gap"] = integer_value - rep.value
    _side_files(args, rep.best, spec.instance.points, support, title=f"relaxation {rep.value:.10g}")
    _emit(out, args)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oritrans", description="Oriented branched transport and partitioned Steiner tools.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-o", "--output", help="write the result JSON here instead of stdout")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("solve", help="solve a mailing or partitioned Steiner instance")
    s.add_argument("instance")
    s.add_argument("--method", choices=("topology", "lattice"))
    s.add_argument("--max-steiner", type=int)
    s.add_argument("--grid", type=int, nargs=2, metavar=("NX", "NY"))
    s.add_argument("--spacing")
    s.add_argument("--phi")
    s.add_argument("--alpha")
    s.add_argument("--budget-topologies", type=int)
    s.add_argument("--budget-states", type=int)
    s.add_argument("--svg")
    s.add_argument("--csv")
    common(s)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a calibration certificate against a current")
    v.add_argument("certificate")
    v.add_argument("current")
    common(v)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("convert", help="convert between families, currents and lifted currents")
    c.add_argument("input")
    c.add_argument("--to", required=True, choices=("current", "family", "lift", "project", "tree-current"))
    c.add_argument("--instance")
    c.add_argument("--ordering", help="JSON list of [i, j] pairs fixing the lifted block order")
    c.add_argument("--phi")
    c.add_argument("--alpha")
    common(c)
    c.set_defaults(func=cmd_convert)

    r = sub.add_parser("relax", help="real-coefficient relaxation on a fixed support")
    r.add_argument("instance")
    r.add_argument("support")
    r.add_argument("--norm", help='JSON norm, e.g. \'{"kind":"linf"}\'')
    r.add_argument("--no-integer", action="store_true", help="skip the integer optimum used for the gap")
    r.add_argument("--svg")
    r.add_argument("--csv")
    common(r)
    r.set_defaults(func=cmd_relax)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (oio.InvalidInput, BoundaryMismatch, InfeasibleBoundary) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        if args.command == "verify":
            _emit({"verdict": "INVALID", "reason": str(exc)}, args)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
