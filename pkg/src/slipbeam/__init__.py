"""Finite-difference / Newmark simulator for a layered beam with interfacial
slip and two fading-memory damping terms, with an exact discrete-energy audit
and decay-rate analysis."""

from .assembly import (MaterialParams, Mesh, SpatialOperators, assemble_blocks,
                       assemble_difference_ops, build_mesh, check_coercivity)
from .decay import (DecayFit, EnvelopeDescriptor, fit_algebraic,
                    fit_exponential, predicted_envelope)
from .energy import (DecrementLedger, EnergyBreakdown, decrement_check, energy,
                     energy_sample)
from .errors import (AdmissibilityError, ConfigurationError, DivergenceError,
                     IdentityViolationError, SimulationError)
from .history import HistoryBuffer, eta_z_views, init_history, memory_forcing
from .kernels import (AdmissibilityReport, KernelSpec, KernelWeights,
                      check_h1_h2, eval_kernel, sample_weights, total_mass)
from .newmark import (InitialData, IntegratorConfig, SimState,
                      effective_matrix, init_state, residual, run, step)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "AdmissibilityReport", "ConfigurationError",
    "DecayFit", "DecrementLedger", "DivergenceError", "EnergyBreakdown",
    "EnvelopeDescriptor", "HistoryBuffer", "IdentityViolationError",
    "InitialData", "IntegratorConfig", "KernelSpec", "KernelWeights",
    "MaterialParams", "Mesh", "SimState", "SimulationError",
    "SpatialOperators", "assemble_blocks", "assemble_difference_ops",
    "build_mesh", "check_coercivity", "check_h1_h2", "decrement_check",
    "effective_matrix", "energy", "energy_sample", "eta_z_views",
    "eval_kernel", "fit_algebraic", "fit_exponential", "init_history",
    "init_state", "memory_forcing", "predicted_envelope", "residual", "run",
    "sample_weights", "step", "total_mass",
]
