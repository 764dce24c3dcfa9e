"""Canonical-link exponential families.

Each family is described by its cumulant function ``b`` together with the
mean ``b'`` and variance ``b''``. The log-density of a response is
``y * theta - b(theta) + c(y, phi)``; ``c`` is constant in the coefficients
and is never evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import InvalidInputError

FAMILIES = ("gaussian", "logistic", "poisson")

# Poisson linear predictors are clamped here; exp(30) ~ 1e13 stays finite.
POISSON_ETA_MAX = 30.0


@dataclass(frozen=True)
class Family:
    """Exponential family with canonical link.

    Parameters
    ----------
    kind : {"gaussian", "logistic", "poisson"}
    dispersion : float, default=1.0
        Kept for completeness; every computation assumes it equals one.
    """

    kind: str
    dispersion: float = 1.0

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise InvalidInputError(
                f"unknown family {self.kind!r}; expected one of {FAMILIES}"
            )
        if not self.dispersion > 0:
            raise InvalidInputError("dispersion must be positive")

    def _clamp(self, theta):
        if self.kind == "poisson":
            return np.minimum(theta, POISSON_ETA_MAX)
        return theta

    def cumulant(self, theta):
        """Evaluate ``b(theta)`` elementwise."""
        theta = self._clamp(np.asarray(theta, dtype=float))
        if self.kind == "gaussian":
            return 0.5 * theta**2
        if self.kind == "logistic":
            return np.maximum(theta, 0.0) + np.log1p(np.exp(-np.abs(theta)))
        return np.exp(theta)

    def mean(self, theta):
        """Evaluate ``b'(theta)``, the mean function."""
        theta = self._clamp(np.asarray(theta, dtype=float))
        if self.kind == "gaussian":
            return theta
        if self.kind == "logistic":
            return expit(theta)
        return np.exp(theta)

    def variance(self, theta):
        """Evaluate ``b''(theta)``, the variance function."""
        theta = self._clamp(np.asarray(theta, dtype=float))
        if self.kind == "gaussian":
            return np.ones_like(theta)
        if self.kind == "logistic":
            mu = expit(theta)
            return mu * (1.0 - mu)
        return np.exp(theta)

    def loss(self, y, theta):
        """Negative log-likelihood ``sum(b(theta) - y * theta)`` without ``c``."""
        theta = np.asarray(theta, dtype=float)
        return float(np.sum(self.cumulant(theta) - y * theta))

    def saturated_loss(self, y) -> float:
        """Infimum of the loss over unrestricted linear predictors."""
        y = np.asarray(y, dtype=float)
        if self.kind == "gaussian":
            return float(-0.5 * np.sum(y**2))
        if self.kind == "logistic":
            return 0.0
        pos = y[y > 0]
        return float(np.sum(pos - pos * np.log(pos)))

    def check_response(self, y):
        """Raise if ``y`` is outside the support of the family."""
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("response contains non-finite values")
        if self.kind == "logistic" and not np.all((y == 0) | (y == 1)):
            raise InvalidInputError("logistic response must be coded 0/1")
        if self.kind == "poisson" and not np.all(y >= 0):
            # non-integer rates are allowed (quasi-likelihood fits)
            raise InvalidInputError("poisson response must be nonnegative")


def as_family(family) -> Family:
    if isinstance(family, Family):
        return family
    return Family(str(family))


def cumulant(family, theta: float) -> float:
    """Scalar cumulant ``b(theta)`` with a finiteness check.

    >>> cumulant("gaussian", 2.0)
    2.0
    """
    theta = float(theta)
    if not np.isfinite(theta):
        raise InvalidInputError(f"theta must be finite, got {theta}")
    return float(as_family(family).cumulant(theta))
