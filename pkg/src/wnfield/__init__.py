"""wnfield: momentum-lattice simulator for a scalar field driven by
spacetime white noise.

The state is a Gaussian wave functional whose width kernel V(p, t)
follows a closed-form Riccati flow and whose linear kernel mu(p, t) is
driven by the sampled noise.  Observables, a classical stochastic-field
oracle, and a single-mode Lindblad oracle provide independent
cross-checks, wired together by the `verify` battery.
"""

from ._accel import BACKEND
from .classical_oracle import (ClassicalState, ClassicalTrajectory,
                               classical_energy, ehrenfest_compare,
                               rest_state, run_classical)
from .ensemble import (EnsembleStats, RunningMoments, SlopeFit, fit_linear,
                       run_ensemble)
from .errors import (ConfigError, ConventionViolation, DegenerateKernelError,
                     EnsembleAborted, KernelSingularError, NumericalFailure,
                     TruncationError, WnfieldError)
from .kernel_engine import (DynamicsParams, KernelInit, KernelState,
                            TrajectoryResult, evolve, initial_state,
                            kernel_values, mu_step_em, mu_step_exact,
                            phase_fn, propagator, riccati_exact, riccati_rhs,
                            run_batch, run_trajectory, vacuum_init)
from .lattice import (LatticeSpec, ModeTable, build_mode_table,
                      check_conjugation_symmetry, dispersion,
                      from_position_field, to_position_field)
from .lindblad_oracle import (ConsistencyReport, LindbladSeries,
                              build_generator, integrate, integrate_at,
                              lindblad_rhs, run_single_mode,
                              unraveling_consistency, vacuum_rho)
from .noise import (NoiseSlice, StreamSpec, component_variance,
                    read_noise_bin, sample_block, sample_slice,
                    to_position_noise, write_noise_bin)
from .observables import (DensityParams, density_params,
                          ensemble_mu_correlators, energy_free, energy_noise,
                          energy_series, field_expectation, field_variance,
                          full_expectation, total_energy)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "__version__",
    # lattice
    "LatticeSpec", "ModeTable", "build_mode_table", "dispersion",
    "check_conjugation_symmetry", "to_position_field", "from_position_field",
    # noise
    "StreamSpec", "NoiseSlice", "component_variance", "sample_block",
    "sample_slice", "to_position_noise", "write_noise_bin", "read_noise_bin",
    # kernels
    "KernelInit", "KernelState", "DynamicsParams", "TrajectoryResult",
    "riccati_rhs", "riccati_exact", "phase_fn", "propagator", "kernel_values",
    "initial_state", "vacuum_init", "mu_step_exact", "mu_step_em", "evolve",
    "run_trajectory", "run_batch",
    # observables
    "DensityParams", "density_params", "field_expectation", "field_variance",
    "full_expectation", "energy_free", "energy_noise", "total_energy",
    "energy_series", "ensemble_mu_correlators",
    # classical oracle
    "ClassicalState", "ClassicalTrajectory", "rest_state", "run_classical",
    "classical_energy", "ehrenfest_compare",
    # lindblad oracle
    "build_generator", "vacuum_rho", "lindblad_rhs", "LindbladSeries",
    "integrate", "integrate_at", "run_single_mode", "ConsistencyReport",
    "unraveling_consistency",
    # ensemble
    "RunningMoments", "EnsembleStats", "run_ensemble", "SlopeFit",
    "fit_linear",
    # errors
    "WnfieldError", "ConfigError", "NumericalFailure", "KernelSingularError",
    "DegenerateKernelError", "ConventionViolation", "TruncationError",
    "EnsembleAborted",
]
