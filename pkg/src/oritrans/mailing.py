"""Labeled path families and the two maps between families and currents."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .coefficients import Alpha, PhiNorm
from .currents import (
    BoundaryMismatch,
    MailingInstance,
    PolyCurrent1,
    boundary,
    build_boundary_mailing,
    current_from_paths,
    decompose_component,
    unit,
)
from .geometry import Polyline, Segment, is_simple, overlay


@dataclass(frozen=True)
class LabeledPath:
    commodity: tuple  # (i, j), 0-based, i != j
    path: Polyline

    def __post_init__(self):
        i, j = self.commodity
        if i == j:
            raise ValueError("a commodity joins two different points")


@dataclass(frozen=True)
class PathFamily:
    instance: MailingInstance
    paths: tuple  # of LabeledPath

    def counts(self) -> Counter:
        return Counter(tuple(lp.commodity) for lp in self.paths)

    def segments(self) -> tuple[list[Segment], list[int]]:
        """All path pieces together with the index of the path they belong to."""
        segs, owner = [], []
        for k, lp in enumerate(self.paths):
            for s in lp.path.segments():
                segs.append(s)
                owner.append(k)
        return segs, owner


def check_compatible(F: PathFamily) -> bool:
    inst = F.instance
    want = Counter({(i, j): g for i, j, g in inst.demands()})
    if F.counts() != want:
        return False
    for lp in F.paths:
        i, j = lp.commodity
        if not (0 <= i < inst.n and 0 <= j < inst.n):
            return False
        if lp.path.start != inst.points[i] or lp.path.end != inst.points[j]:
            return False
        if not is_simple(lp.path):
            return False
    return True


@dataclass(frozen=True)
class ThetaAtom:
    segment: Segment  # its orientation is sigma on this atom
    minus: int
    plus: int
    by_commodity: dict = field(default_factory=dict, compare=False)  # (i, j) -> (minus, plus)

    def flipped(self) -> "ThetaAtom":
        return ThetaAtom(
            self.segment.reversed(),
            self.plus,
            self.minus,
            {k: (p, m) for k, (m, p) in self.by_commodity.items()},
        )


@dataclass(frozen=True)
class ThetaField:
    atoms: tuple  # of ThetaAtom


def theta_pm(F: PathFamily) -> ThetaField:
    """Per overlay atom, how many paths run along / against the atom's orientation."""
    segs, owner = F.segments()
    ov = overlay(segs)
    atoms = []
    for seg, cov in ov.atoms:
        plus = minus = 0
        per: dict = {}
        for idx, sign in cov:
            key = tuple(F.paths[owner[idx]].commodity)
            m0, p0 = per.get(key, (0, 0))
            if sign > 0:
                plus += 1
                per[key] = (m0, p0 + 1)
            else:
                minus += 1
                per[key] = (m0 + 1, p0)
        atoms.append(ThetaAtom(seg, minus, plus, per))
    return ThetaField(tuple(atoms))


def energy_family(F: PathFamily, phi: PhiNorm, alpha, flips=None) -> float:
    """Integral of phi(theta-^alpha, theta+^alpha) over the union of the paths.

    ``flips`` optionally lists atom indices whose orientation sigma is reversed
    before evaluation; the value must not change.
    """
    alpha = Alpha.of(alpha)
    field_ = theta_pm(F)
    flips = set(flips or ())
    terms = []
    for k, at in enumerate(field_.atoms):
        if k in flips:
            at = at.flipped()
        terms.append(phi(alpha.pow(at.minus), alpha.pow(at.plus)) * at.segment.length())
    return math.fsum(terms)


def family_to_current(F: PathFamily) -> PolyCurrent1:
    """Sum over paths of the path current with multiplicity E_ij."""
    inst = F.instance
    m = inst.m
    return current_from_paths(m, [(lp.path, unit(m, inst.channel(*lp.commodity))) for lp in F.paths])


@dataclass(frozen=True)
class FamilyFromCurrent:
    family: PathFamily
    dropped_cycles: dict  # (i, j) -> list of closed vertex tuples
    dropped_cycle_length: float


def current_to_family(T: PolyCurrent1, inst: MailingInstance, ordering=None) -> FamilyFromCurrent:
    """Decompose every channel into g_ij simple paths p_i -> p_j, dropping cycles.

    ``ordering`` is accepted for interface symmetry with the relaxed lift; the
    family does not depend on it.
    """
    if T.ring != "int":
        raise ValueError("only integer currents decompose into path families")
    if T.m != inst.m:
        raise ValueError("current dimension does not match the instance")
    if boundary(T) != build_boundary_mailing(inst):
        raise BoundaryMismatch("the current does not bound the mailing datum")
    paths, dropped = [], {}
    total = []
    for k in range(T.m):
        comp = T.component(k)
        if not comp:
            continue
        i, j = inst.pair_of(k)
        dec = decompose_component(comp)
        paths.extend(LabeledPath((i, j), p) for p in dec.paths)
        if dec.cycles:
            dropped[(i, j)] = list(dec.cycles)
            total.append(dec.cycle_length())
    return FamilyFromCurrent(PathFamily(inst, tuple(paths)), dropped, math.fsum(total))
