"""Exception types shared across the package.

Two failure families are distinguished so callers (and the CLI) can map
them to different exit codes: bad inputs versus numerical breakdown.
"""

from __future__ import annotations


class InputError(ValueError):
    """Raised when arguments violate a documented precondition."""


class NumericalError(RuntimeError):
    """Raised when a linear-algebra step breaks down (singular or
    non-finite systems).

    Carries the regularization strength and the smallest eigenvalue
    estimate of the offending system when known, so the failure is
    diagnosable from the message alone.
    """

    def __init__(self, message: str, *, lam: float | None = None,
                 smallest_eigenvalue: float | None = None):
        details = []
        if lam is not None:
            details.append(f"lambda={lam!r}")
        if smallest_eigenvalue is not None:
            details.append(f"smallest eigenvalue estimate={smallest_eigenvalue!r}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.lam = lam
        self.smallest_eigenvalue = smallest_eigenvalue
