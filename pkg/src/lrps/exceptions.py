"""Exception hierarchy shared by all modules."""

import numpy as np


class LRPSError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(LRPSError, ValueError):
    """Invalid user-supplied configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class SingularDesignError(LRPSError, np.linalg.LinAlgError):
    """Cholesky factorisation failed (n < p, or collinear covariates)."""


class EigenTieError(LRPSError, ArithmeticError):
    """The eigenvalues either side of the rank cut coincide, so the projector is not unique."""


class PipelineError(LRPSError, ValueError):
    """A preprocessing step failed; ``step`` names it."""

    def __init__(self, step, message):
        self.step = step
        super().__init__(f"{step}: {message}")


class ReplicationError(LRPSError, RuntimeError):
    """Estimation failed inside one Monte Carlo replication."""

    def __init__(self, rep, cause):
        self.rep = rep
        self.cause = cause
        super().__init__(f"replication {rep} failed: {cause}")
