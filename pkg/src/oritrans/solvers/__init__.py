from .lattice import Lattice, brute_force_lattice_current, brute_force_lattice_mailing
from .relaxation import InfeasibleBoundary, solve_real_relaxation
from .report import BudgetExceeded, SolveReport
from .topology import (
    ConvergenceError,
    Topology,
    enumerate_topologies,
    optimize_positions,
    solve_mailing_topology,
    solve_partitioned_steiner,
    steiner_minimal_tree,
)
