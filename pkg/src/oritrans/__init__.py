"""Oriented branched transport: currents with vector coefficients, path
families, partitioned Steiner trees, desk-scale solvers and calibrations."""

from .calibration import CalibrationCertificate, verify_calibration
from .coefficients import Alpha, NormSpec, PhiNorm, comass, cost_C, dual_norm, norm_phi_alpha
from .currents import (
    AtomicMeasure0,
    MailingInstance,
    PairOrdering,
    PolyCurrent1,
    boundary,
    energy_alpha_phi,
    lift_to_relaxed,
    mass,
    project_from_relaxed,
    remove_cycles,
)
from .geometry import Polyline, Segment, overlay
from .mailing import PathFamily, current_to_family, energy_family, family_to_current
from .steiner import Forest, PartitionedInstance, build_g_vectors, tree_to_current

__version__ = "0.1.0"
