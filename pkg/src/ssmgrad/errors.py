"""Exception types raised by the filters, model builders and optimizer."""

import numpy as np


class SSMError(Exception):
    """Base class for all package errors."""


class BadDimension(SSMError, ValueError):
    pass


class NonpositiveInnovationVariance(SSMError, FloatingPointError):
    """The prediction-error variance collapsed to (numerically) zero."""

    def __init__(self, step, r):
        self.step = step
        self.r = r
        super().__init__(f"innovation variance r={r!r} at step {step} is not positive")


class MissingSecondDerivatives(SSMError):
    pass


class NonStationary(SSMError, ValueError):
    pass


class SingularCovarianceSystem(SSMError, np.linalg.LinAlgError):
    pass


class DegenerateVariance(SSMError, FloatingPointError):
    pass


class ProbeFailure(SSMError):
    """A finite-difference probe could not be evaluated."""

    def __init__(self, theta, cause):
        self.theta = theta
        self.cause = cause
        super().__init__(f"evaluation failed at probe point {list(theta)}: {cause}")


class EvaluationFailure(SSMError):
    def __init__(self, theta, cause):
        self.theta = theta
        self.cause = cause
        super().__init__(f"log-likelihood evaluation failed at theta={list(theta)}: {cause}")


class LineSearchFailure(SSMError):
    pass
