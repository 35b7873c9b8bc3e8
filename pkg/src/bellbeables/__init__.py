"""Beable lab for lattice fermion field theory and a 1+1D continuum pilot-wave model."""

from .bell import equivariance_report, jump_rates, sample_ensemble, sample_trajectory
from .config import RunConfig
from .continuum import ContinuumState, ModeBasis, integrate_trajectory
from .dynamics import PilotState, PilotTrajectory, build_hamiltonian, evolve, marginal_distribution
from .fock import LatticeSpec, enumerate_sector
from .runner import RunReport, run

__all__ = [
    "ContinuumState", "LatticeSpec", "ModeBasis", "PilotState", "PilotTrajectory", "RunConfig",
    "RunReport", "build_hamiltonian", "enumerate_sector", "equivariance_report", "evolve",
    "integrate_trajectory", "jump_rates", "marginal_distribution", "run", "sample_ensemble",
    "sample_trajectory",
]
