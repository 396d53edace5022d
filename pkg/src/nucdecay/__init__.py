"""Collective decay dynamics of dipole-coupled two-level nuclei after
impulsive excitation: coupling parameters from lattice sums and
polylogarithms, first-order-truncated equations of motion, an exact
small-chain master-equation oracle, and interferometric observables."""

from .couplings import (ChainGeometry, CouplingKernel, CouplingSummary,
                        DecayParameters, PairCoupling, central_site,
                        coupling_parameter_finite, coupling_parameter_infinite,
                        kappa_drive, pair_coupling_conjugate)
from .dynamics import (EnsembleState, ExcitationSpec, ReducedState, Trajectory,
                       analytic_phase, analytic_population, init_state,
                       integrate, low_excitation_rates, rhs_finite, rhs_reduced,
                       simulate_finite, simulate_reduced)
from .errors import (CapacityError, ConfigError, IntegrationError,
                     NucdecayError, NumericsError, PolylogDivergenceError)
from .polylog import polylog_unit_circle

__version__ = "0.1.0"

__all__ = [
    "ChainGeometry", "CouplingKernel", "CouplingSummary", "DecayParameters",
    "PairCoupling", "central_site", "coupling_parameter_finite",
    "coupling_parameter_infinite", "kappa_drive", "pair_coupling_conjugate",
    "EnsembleState", "ExcitationSpec", "ReducedState", "Trajectory",
    "analytic_phase", "analytic_population", "init_state", "integrate",
    "low_excitation_rates", "rhs_finite", "rhs_reduced", "simulate_finite",
    "simulate_reduced", "polylog_unit_circle",
    "CapacityError", "ConfigError", "IntegrationError", "NucdecayError",
    "NumericsError", "PolylogDivergenceError",
    "__version__",
]
