"""Adaptive choice of the support size by a generalized information criterion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Union

import numpy as np

from .exceptions import InvalidInputError, NumericalFailure
from .glm import Coefficients, Dataset, hessian_floor, linear_predictor, neg_log_likelihood
from .newton import NewtonConfig, restricted_mle
from .splicing import (
    ActiveModel,
    SpliceConfig,
    SpliceResult,
    _forward,
    bess_glm,
    default_tau,
    splice_from,
)

MIN_N_FOR_GIC = 3


def gic_penalty(support_size: int, p: int, n: int) -> float:
    if n < MIN_N_FOR_GIC or p < 2:
        raise InvalidInputError(
            f"GIC needs n >= {MIN_N_FOR_GIC} and p >= 2 (got n={n}, p={p})"
        )
    return support_size * math.log(p) * math.log(math.log(n))


def gic(data: Dataset, coef: Coefficients) -> float:
    """``l_n(beta) + |supp(beta)| * log(p) * log(log(n))``.

    The intercept is never counted in the support size.
    """
    penalty = gic_penalty(coef.support.size, data.p, data.n)
    return neg_log_likelihood(data, coef) + penalty


def default_s_max(n: int, p: int) -> int:
    """Nearest integer to ``(n / log p) ** 0.25``, within ``[1, min(n, p)]``."""
    if n < 16 or p < 2:
        raise InvalidInputError(f"default s_max needs n >= 16 and p >= 2 (got n={n}, p={p})")
    s = math.floor((n / math.log(p)) ** 0.25 + 0.5)
    return int(min(max(s, 1), n, p))


def auto_s_max(n: int, p: int) -> int:
    """Default upper end of the support-size sweep.

    Takes the larger of :func:`default_s_max` and
    ``min(p, ceil(n / (log p * log log n)))``; the latter is where the GIC
    penalty alone reaches ``n``.
    """
    base = default_s_max(n, p)
    wide = min(p, math.ceil(n / (math.log(p) * math.log(math.log(n)))))
    return int(min(max(base, wide), n, p))


@dataclass(frozen=True)
class SelectorConfig:
    """Settings for :func:`abess`.

    Parameters
    ----------
    s_max : int or "auto"
        Largest support size tried; "auto" uses :func:`auto_s_max`.
    k_max : int
        Largest splicing size.
    tau : float or None
        Fixed splicing threshold; None uses :func:`default_tau` per size.
    screening_size : int, "auto" or None
        Number of inactive variables kept by importance-priority splicing.
        "auto" means ``max(100, 5 * s_max)``; None disables screening.
    max_outer_iters : int
        Safety cap on splicing iterations per support size.
    """

    s_max: Union[int, str] = "auto"
    k_max: int = 5
    tau: Optional[float] = None
    screening_size: Union[int, str, None] = "auto"
    max_outer_iters: int = 100
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if self.s_max != "auto" and not (isinstance(self.s_max, (int, np.integer)) and self.s_max >= 1):
            raise InvalidInputError(f"s_max must be a positive integer or 'auto', got {self.s_max!r}")
        if self.k_max < 1:
            raise InvalidInputError("k_max must be at least 1")
        if self.screening_size not in (None, "auto") and not (
            isinstance(self.screening_size, (int, np.integer)) and self.screening_size >= 1
        ):
            raise InvalidInputError(
                f"screening_size must be a positive integer, 'auto' or None, got {self.screening_size!r}"
            )
        if self.tau is not None and not self.tau >= 0:
            raise InvalidInputError("tau must be nonnegative")
        if self.max_outer_iters < 1:
            raise InvalidInputError("max_outer_iters must be at least 1")

    def resolve_s_max(self, n: int, p: int) -> int:
        if self.s_max == "auto":
            return auto_s_max(n, p)
        s_max = int(self.s_max)
        if not 1 <= s_max <= min(n, p):
            raise InvalidInputError(f"s_max={s_max} outside 1..{min(n, p)}")
        return s_max

    def resolve_screening(self, s_max: int, p: int) -> Optional[int]:
        if self.screening_size is None:
            return None
        if self.screening_size == "auto":
            d = max(100, 5 * s_max)
        else:
            d = int(self.screening_size)
        return min(d, p)

    def splice_config(self) -> SpliceConfig:
        return SpliceConfig(
            k_max=self.k_max,
            tau=self.tau,
            max_outer_iters=self.max_outer_iters,
            newton=self.newton,
        )


@dataclass
class SizeFit:
    size: int
    coef: Optional[Coefficients]
    active: np.ndarray
    gic: float
    loss: float
    splicing_iters: int
    converged: bool
    failed: bool = False


@dataclass
class FitResult:
    """Solution path over support sizes and the GIC-selected model."""

    per_size: List[SizeFit]
    selected_size: int
    selected: Coefficients
    n_sacrifice_evals: int = 0

    @property
    def selected_fit(self) -> SizeFit:
        return self.per_size[self.selected_size - 1]

    @property
    def gic_path(self) -> np.ndarray:
        return np.array([f.gic for f in self.per_size])


def important_subset(data: Dataset, model: ActiveModel, d: int) -> np.ndarray:
    """Active set plus the ``d`` inactive variables with largest forward sacrifice."""
    if not 1 <= d <= data.p:
        raise InvalidInputError(f"screening size {d} outside 1..{data.p}")
    inactive = model.inactive
    if d >= inactive.size:
        return np.arange(data.p)
    zeta = _forward(model)
    order = np.lexsort((inactive, -zeta))
    return np.union1d(model.active, inactive[order[:d]])


def screened_bess_glm(data: Dataset, s: int, A0, cfg: SpliceConfig, d: int,
                      init: Optional[Coefficients] = None,
                      subset=None) -> SpliceResult:
    """:func:`bess_glm` with importance-priority splicing.

    Splicing runs on the active set plus the ``d`` inactive variables with
    the largest forward sacrifices. At its fixed point the sacrifices of the
    remaining variables are computed; the search ends once the full ranking
    reproduces the working subset, otherwise it restarts on the new subset.
    Sacrifices already known inside the subset are reused.

    Parameters
    ----------
    subset : array of int, optional
        Working subset carried over from a neighbouring problem, e.g. the
        previous support size of a sweep. When given, the initial ranking
        is computed on ``subset | A0`` only and the full ranking is deferred
        to the confirmation step. The subset that passed confirmation is
        returned in ``SpliceResult.subset``.
    """
    p = data.p
    A0 = np.unique(np.asarray(A0, dtype=np.intp))
    if A0.size != s:
        raise InvalidInputError(f"initial active set has {A0.size} elements, expected {s}")
    tau = default_tau(s, p, data.n) if cfg.tau is None else float(cfg.tau)
    fit = restricted_mle(data, A0, init, replace(cfg.newton, budget_loss=None))
    if subset is not None:
        subset = np.union1d(np.asarray(subset, dtype=np.intp), A0)
    if subset is None or subset.size >= p:
        model = ActiveModel.from_coef(data, A0, fit.coef, fit.loss)
        n_evals = p
        confirmed = True
        subset = important_subset(data, model, d)
    else:
        model = None
        n_evals = subset.size
        confirmed = False
    loss_path = [fit.loss]
    n_iter = 0
    for _ in range(cfg.max_outer_iters):
        if subset.size == p:
            res = splice_from(data, model, cfg, tau)
            res.n_sacrifice_evals += n_evals
            res.n_iter += n_iter
            res.loss_path = loss_path + res.loss_path[1:]
            res.subset = subset
            return res
        sub = data.subset(subset)
        if confirmed:
            local = ActiveModel(
                np.searchsorted(subset, model.active),
                Coefficients(model.coef.beta[subset], model.coef.intercept),
                model.loss, model.grad[subset], model.hess_diag[subset],
            )
        else:
            local = ActiveModel.from_coef(
                sub, np.searchsorted(subset, A0),
                Coefficients(fit.coef.beta[subset], fit.coef.intercept), fit.loss,
            )
        res = splice_from(sub, local, cfg, tau)
        n_evals += res.n_sacrifice_evals
        n_iter += res.n_iter
        loss_path.extend(res.loss_path[1:])
        if confirmed and res.n_iter == 0:
            # nothing moved, so the full ranking is the one that built the subset
            return SpliceResult(model, res.converged, n_iter, loss_path, n_evals, tau, subset)
        model = _lift(data, subset, res.model)
        n_evals += p - subset.size
        confirmed = True
        updated = important_subset(data, model, d)
        if np.array_equal(updated, subset):
            return SpliceResult(model, res.converged, n_iter, loss_path, n_evals, tau, subset)
        subset = updated
    return SpliceResult(model, False, n_iter, loss_path, n_evals, tau, subset)


def _lift(data: Dataset, subset: np.ndarray, local: ActiveModel) -> ActiveModel:
    """Embed a model fitted on ``data.subset(subset)`` into all ``p`` columns.

    Gradient and Hessian entries inside the subset are copied; only the
    complement is evaluated.
    """
    beta = np.zeros(data.p)
    beta[subset] = local.coef.beta
    coef = Coefficients(beta, local.coef.intercept)
    rest = np.setdiff1d(np.arange(data.p), subset)
    eta = linear_predictor(data, coef)
    grad = np.empty(data.p)
    hess = np.empty(data.p)
    grad[subset] = local.grad
    hess[subset] = local.hess_diag
    grad[rest] = data.X[:, rest].T @ (data.family.mean(eta) - data.y)
    hess[rest] = hessian_floor(data, data.X_sq[:, rest].T @ data.family.variance(eta))
    return ActiveModel(subset[local.active], coef, local.loss, grad, hess)


def _entering(grad: np.ndarray, active: np.ndarray) -> int:
    score = np.abs(grad).astype(float)
    score[active] = -np.inf
    return int(np.argmax(score))


def abess(data: Dataset, cfg: Optional[SelectorConfig] = None) -> FitResult:
    """Sweep support sizes ``1..s_max`` and pick the GIC minimizer.

    Size ``s + 1`` is warm-started from the size-``s`` solution plus the
    inactive variable with the largest absolute gradient. A size whose
    initial restricted fit fails is recorded with infinite GIC.
    """
    cfg = cfg or SelectorConfig()
    n, p = data.n, data.p
    s_max = cfg.resolve_s_max(n, p)
    d = cfg.resolve_screening(s_max, p)
    splice_cfg = cfg.splice_config()

    null = restricted_mle(data, [], None, cfg.newton)
    base = ActiveModel.from_coef(data, [], null.coef, null.loss)
    A0 = np.array([_entering(base.grad, base.active)])
    warm = null.coef
    last_grad = base.grad
    per_size: List[SizeFit] = []
    n_evals = 0
    subset = None
    for s in range(1, s_max + 1):
        try:
            if d is not None and d < p - s:
                res = screened_bess_glm(data, s, A0, splice_cfg, d, init=warm, subset=subset)
                subset = res.subset
            else:
                res = bess_glm(data, s, A0, splice_cfg, init=warm)
        except NumericalFailure:
            per_size.append(SizeFit(s, None, A0, math.inf, math.inf, 0, False, True))
        else:
            n_evals += res.n_sacrifice_evals
            per_size.append(SizeFit(
                s, res.coef, res.active, gic(data, res.coef), res.loss,
                res.n_iter, res.converged,
            ))
            A0, warm, last_grad = res.active, res.coef, res.grad
        if s < s_max:
            A0 = np.union1d(A0, [_entering(last_grad, A0)])
    gics = np.array([f.gic for f in per_size])
    if not np.any(np.isfinite(gics)):
        raise NumericalFailure("every support size failed", [])
    best = int(np.argmin(gics))  # first minimum: ties go to the smaller size
    return FitResult(per_size, best + 1, per_size[best].coef, n_evals)
