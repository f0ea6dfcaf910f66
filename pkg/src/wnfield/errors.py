"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, the numerical
failures (NumericalFailure and subclasses, TruncationError,
ConventionViolation) -> 3, verification failure -> 4.
"""

from __future__ import annotations


class WnfieldError(Exception):
    """Base class for all package errors."""


class ConfigError(WnfieldError):
    """Invalid run configuration. Carries every violation, not just the first."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericalFailure(WnfieldError):
    """NaN/Inf or other numerical breakdown during evolution."""

    def __init__(self, message, t=None, step=None):
        self.t = t
        self.step = step
        detail = message
        if t is not None:
            detail += f" (t={t:.6g}"
            if step is not None:
                detail += f", step={step}"
            detail += ")"
        super().__init__(detail)


class KernelSingularError(NumericalFailure):
    """Phase function hit a zero: the kernel flow passed through a caustic."""


class DegenerateKernelError(WnfieldError):
    """Re V <= 0: the Gaussian state is not normalizable."""


class ConventionViolation(WnfieldError):
    """An identity that must hold exactly (up to fp noise) was violated."""


class TruncationError(WnfieldError):
    """Fock-space truncation too small: population reached the cutoff."""

    def __init__(self, message, top_population=None):
        self.top_population = top_population
        super().__init__(message)


class EnsembleAborted(WnfieldError):
    """A trajectory failed; the whole ensemble is abandoned."""

    def __init__(self, trajectory_id, cause):
        self.trajectory_id = trajectory_id
        self.cause = cause
        super().__init__(f"trajectory {trajectory_id} failed: {cause}")
