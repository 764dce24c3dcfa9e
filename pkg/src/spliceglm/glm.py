"""Design normalization and GLM loss derivatives shared by every solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import DegenerateColumnError, InvalidInputError
from .family import Family, as_family

NORM_RTOL = 1e-8
HESSIAN_FLOOR = 1e-8  # times n


def normalize(raw_X, names: Optional[Sequence[str]] = None):
    """Rescale columns so that ``X_j' X_j = n``.

    Parameters
    ----------
    raw_X : array-like of shape (n, p)
    names : sequence of str, optional
        Column names used in the error message for a degenerate column.

    Returns
    -------
    X : ndarray of shape (n, p)
        Normalized design.
    col_scale : ndarray of shape (p,)
        ``sqrt(n) / ||raw_X_j||``; ``X = raw_X * col_scale`` and a coefficient
        ``b`` on the normalized scale equals ``b * col_scale`` on the raw one.
    """
    X = np.array(raw_X, dtype=float, copy=True)
    if X.ndim != 2:
        raise InvalidInputError(f"design must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("design contains non-finite values")
    n = X.shape[0]
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        j = int(zero[0])
        raise DegenerateColumnError(j, None if names is None else names[j])
    scale = np.sqrt(n) / norms
    # exact unit scale where the column is already normalized
    scale[np.abs(scale - 1.0) <= 4 * np.finfo(float).eps] = 1.0
    X *= scale
    return X, scale


@dataclass(frozen=True)
class Coefficients:
    """A coefficient vector with an optional unpenalized intercept."""

    beta: np.ndarray
    intercept: Optional[float] = None

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float, copy=True).ravel()
        beta.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        if self.intercept is not None:
            object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta)

    @classmethod
    def zeros(cls, p: int, intercept: Optional[float] = None):
        return cls(np.zeros(p), intercept)


@dataclass(frozen=True)
class Dataset:
    """Normalized design, response and family.

    Build one from raw predictors with :meth:`from_raw`; the constructor
    expects a design that is already normalized and validates that.
    """

    X: np.ndarray
    y: np.ndarray
    family: Family
    col_scale: Optional[np.ndarray] = None
    fit_intercept: bool = False
    X_sq: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # column-major storage keeps column gathers contiguous
        X = np.array(self.X, dtype=float, order="F")
        y = np.array(self.y, dtype=float).ravel()
        fam = as_family(self.family)
        if X.ndim != 2:
            raise InvalidInputError(f"design must be 2-D, got shape {X.shape}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise InvalidInputError("design must have at least one row and column")
        if y.shape[0] != n:
            raise InvalidInputError(
                f"response has length {y.shape[0]} but design has {n} rows"
            )
        fam.check_response(y)
        sq_norms = np.einsum("ij,ij->j", X, X)
        bad = np.flatnonzero(np.abs(sq_norms - n) > NORM_RTOL * n)
        if bad.size:
            raise InvalidInputError(
                f"column {int(bad[0])} is not sqrt(n)-normalized; use Dataset.from_raw"
            )
        scale = np.ones(p) if self.col_scale is None else np.array(self.col_scale, float)
        if scale.shape != (p,) or not np.all(scale > 0):
            raise InvalidInputError("col_scale must be a positive vector of length p")
        for arr in (X, y, scale):
            arr.flags.writeable = False
        X_sq = np.asfortranarray(X * X)
        X_sq.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "col_scale", scale)
        object.__setattr__(self, "X_sq", X_sq)

    @classmethod
    def from_raw(cls, raw_X, y, family, fit_intercept: bool = False, names=None):
        X, scale = normalize(raw_X, names)
        return cls(X, y, family, col_scale=scale, fit_intercept=fit_intercept)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, columns) -> "Dataset":
        """Dataset restricted to ``columns`` (rows unchanged)."""
        columns = np.asarray(columns, dtype=np.intp)
        # columns of a validated dataset are already normalized: skip the checks
        out = object.__new__(Dataset)
        for name, value in (
            ("X", self.X[:, columns]),
            ("y", self.y),
            ("family", self.family),
            ("col_scale", self.col_scale[columns]),
            ("fit_intercept", self.fit_intercept),
            ("X_sq", self.X_sq[:, columns]),
        ):
            if isinstance(value, np.ndarray):
                value.flags.writeable = False
            object.__setattr__(out, name, value)
        return out

    def to_raw_scale(self, coef: Coefficients) -> Coefficients:
        return Coefficients(coef.beta * self.col_scale, coef.intercept)


def _check(data: Dataset, coef: Coefficients):
    if coef.beta.shape != (data.p,):
        raise InvalidInputError(
            f"coefficient vector has length {coef.beta.size}, expected {data.p}"
        )


def linear_predictor(data: Dataset, coef: Coefficients) -> np.ndarray:
    _check(data, coef)
    support = coef.support
    eta = data.X[:, support] @ coef.beta[support]
    if coef.intercept is not None:
        eta = eta + coef.intercept
    return eta


def neg_log_likelihood(data: Dataset, coef: Coefficients) -> float:
    """Negative log-likelihood ``l_n`` without the ``c(y, phi)`` term.

    Dropping ``c`` keeps comparisons between coefficient vectors on one
    dataset exact, but values are not comparable across datasets.
    """
    return data.family.loss(data.y, linear_predictor(data, coef))


def gradient(data: Dataset, coef: Coefficients) -> np.ndarray:
    """Gradient of ``l_n`` with respect to ``beta``: ``X' (b'(eta) - y)``."""
    eta = linear_predictor(data, coef)
    return data.X.T @ (data.family.mean(eta) - data.y)


def hessian_diagonal(data: Dataset, coef: Coefficients) -> np.ndarray:
    """Diagonal of the Hessian of ``l_n``, floored at ``1e-8 * n``."""
    eta = linear_predictor(data, coef)
    return _hessian_diagonal_from_eta(data, eta)


def hessian_floor(data: Dataset, h) -> np.ndarray:
    """Clip Hessian-diagonal entries from below at ``HESSIAN_FLOOR * n``."""
    return np.maximum(h, HESSIAN_FLOOR * data.n)


def _hessian_diagonal_from_eta(data: Dataset, eta) -> np.ndarray:
    return hessian_floor(data, data.X_sq.T @ data.family.variance(eta))
