"""Exception types shared across the toolkit.

Each error carries a short machine-readable ``code`` so the CLI can report
failures in a scriptable way.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


class TruncationError(ToolkitError, ValueError):
    """Requested amplitude does not fit in the truncated Fock space."""

    code = "truncation.inadequate"


class DimensionMismatchError(ToolkitError, ValueError):
    """Operands live on different Fock spaces."""

    code = "dimension.mismatch"


class StiffnessError(ToolkitError, RuntimeError):
    """Adaptive step size underflowed; the problem is too stiff."""

    code = "integrator.stiffness"

    def __init__(self, t: float, step: float):
        self.t = t
        self.step = step
        super().__init__(
            f"step size underflow at t={t:.6g} (h={step:.3e}); "
            "the model is too stiff for the explicit integrator"
        )


class ConfigError(ToolkitError, ValueError):
    """Experiment configuration violates the documented schema."""

    code = "config.schema"

    def __init__(self, message: str, code: str = "config.schema"):
        self.code = code
        super().__init__(message)
