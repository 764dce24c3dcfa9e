"""Best-subset search for a fixed support size by splicing.

Starting from an active set of size ``s``, each outer iteration ranks the
active variables by their backward sacrifice (approximate loss increase on
removal) and the inactive ones by their forward sacrifice (approximate loss
decrease on entry), swaps the ``k`` weakest active variables for the ``k``
strongest inactive ones, and keeps the swap if the refitted loss drops by
more than ``tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Mapping, Optional

import numpy as np

from .exceptions import InvalidInputError, NumericalFailure
from .glm import (
    Coefficients,
    Dataset,
    _hessian_diagonal_from_eta,
    linear_predictor,
)
from .newton import NewtonConfig, restricted_mle

MIN_N_FOR_TAU = 16


@dataclass(frozen=True)
class ActiveModel:
    """Restricted fit on an active set together with its full gradient.

    Build with :meth:`from_coef` so that ``grad`` and ``hess_diag`` are
    consistent with ``coef``.
    """

    active: np.ndarray
    coef: Coefficients
    loss: float
    grad: np.ndarray
    hess_diag: np.ndarray

    @classmethod
    def from_coef(cls, data: Dataset, active, coef: Coefficients, loss=None):
        active = np.unique(np.asarray(active, dtype=np.intp))
        eta = linear_predictor(data, coef)
        if loss is None:
            loss = data.family.loss(data.y, eta)
        grad = data.X.T @ (data.family.mean(eta) - data.y)
        return cls(active, coef, float(loss), grad, _hessian_diagonal_from_eta(data, eta))

    @property
    def inactive(self) -> np.ndarray:
        mask = np.ones(self.grad.size, dtype=bool)
        mask[self.active] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class SpliceConfig:
    """Settings for :func:`bess_glm`.

    ``tau=None`` selects :func:`default_tau` for the support size at hand.
    ``k_max`` is silently reduced to ``min(s, p - s)`` when larger.
    """

    k_max: int = 5
    tau: Optional[float] = None
    max_outer_iters: int = 100
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if self.k_max < 1:
            raise InvalidInputError("k_max must be at least 1")
        if self.tau is not None and not self.tau >= 0:
            raise InvalidInputError("tau must be nonnegative")
        if self.max_outer_iters < 1:
            raise InvalidInputError("max_outer_iters must be at least 1")


@dataclass
class SpliceResult:
    """Output of :func:`bess_glm`.

    Attributes
    ----------
    model : ActiveModel
        Final active set, coefficients, loss and gradient.
    converged : bool
        False when the outer safety cap stopped the search.
    n_iter : int
        Number of accepted splices.
    loss_path : list of float
        Loss after the initial fit and after every accepted splice.
    n_sacrifice_evals : int
        Number of per-variable gradient and Hessian-diagonal evaluations
        behind the sacrifices.
    subset : array of int or None
        Confirmed working subset when importance-priority splicing was used.
    """

    model: ActiveModel
    converged: bool
    n_iter: int
    loss_path: List[float]
    n_sacrifice_evals: int
    tau: float
    subset: Optional[np.ndarray] = None

    @property
    def coef(self) -> Coefficients:
        return self.model.coef

    @property
    def active(self) -> np.ndarray:
        return self.model.active

    @property
    def grad(self) -> np.ndarray:
        return self.model.grad

    @property
    def loss(self) -> float:
        return self.model.loss


def default_tau(s: int, p: int, n: int) -> float:
    """Splicing threshold ``0.01 * s * log(p) * log(log(n))``."""
    if n < MIN_N_FOR_TAU:
        raise InvalidInputError(
            f"default tau needs n >= {MIN_N_FOR_TAU} (got {n}); pass tau explicitly"
        )
    if p < 2:
        raise InvalidInputError(f"default tau needs p >= 2 (got {p})")
    return 0.01 * s * math.log(p) * math.log(math.log(n))


def _backward(model: ActiveModel) -> np.ndarray:
    a = model.active
    return model.hess_diag[a] * model.coef.beta[a] ** 2


def _forward(model: ActiveModel) -> np.ndarray:
    i = model.inactive
    return model.grad[i] ** 2 / model.hess_diag[i]


def backward_sacrifices(data: Dataset, model: ActiveModel) -> dict:
    """``xi_j = H_jj * beta_j**2`` for every active ``j``."""
    return dict(zip(model.active.tolist(), _backward(model).tolist()))


def forward_sacrifices(data: Dataset, model: ActiveModel) -> dict:
    """``zeta_j = d_j**2 / H_jj`` for every inactive ``j``."""
    return dict(zip(model.inactive.tolist(), _forward(model).tolist()))


def _lowest(idx: np.ndarray, vals: np.ndarray, k: int) -> np.ndarray:
    order = np.lexsort((idx, vals))
    return np.sort(idx[order[:k]])


def _as_arrays(sac):
    if isinstance(sac, Mapping):
        keys = np.fromiter(sac.keys(), dtype=np.intp, count=len(sac))
        vals = np.fromiter(sac.values(), dtype=float, count=len(sac))
        return keys, vals
    keys, vals = sac
    return np.asarray(keys, dtype=np.intp), np.asarray(vals, dtype=float)


def splice_sets(xi, zeta, k: int):
    """Select the variables to swap at splicing size ``k``.

    Parameters
    ----------
    xi : mapping of int to float
        Backward sacrifices of the active variables.
    zeta : mapping of int to float
        Forward sacrifices of the inactive variables.
    k : int

    Returns
    -------
    leave, enter : ndarray of int
        The ``k`` active indices with the smallest ``xi`` and the ``k``
        inactive indices with the largest ``zeta``; ties go to the smaller
        index.
    """
    a_idx, a_val = _as_arrays(xi)
    i_idx, i_val = _as_arrays(zeta)
    if not 1 <= k <= min(a_idx.size, i_idx.size):
        raise InvalidInputError(
            f"splicing size {k} outside 1..{min(a_idx.size, i_idx.size)}"
        )
    return _lowest(a_idx, a_val, k), _lowest(i_idx, -i_val, k)


def marginal_fits(data: Dataset, max_iters: int = 80, tol: float = 1e-6):
    """One-variable GLM fits of every column, without intercept.

    All ``p`` problems are solved together by a vectorized one-dimensional
    Newton iteration with per-column step halving.

    Returns
    -------
    beta : ndarray of shape (p,)
        Marginal estimates.
    converged : ndarray of bool
        False where the iteration did not settle, e.g. for a column that
        separates a logistic response perfectly.
    """
    n, p = data.n, data.p
    fam, X, y = data.family, data.X, data.y

    def col_losses(cols, b):
        theta = X[:, cols] * b
        return np.sum(fam.cumulant(theta) - y[:, None] * theta, axis=0)

    b = np.zeros(p)
    loss = col_losses(np.arange(p), b)
    done = np.zeros(p, dtype=bool)
    for _ in range(max_iters):
        theta = X * b
        g = np.sum(X * (fam.mean(theta) - y[:, None]), axis=0)
        h = np.maximum(np.sum(data.X_sq * fam.variance(theta), axis=0), 1e-8 * n)
        step = np.where(done, 0.0, g / h)
        t = np.ones(p)
        new = b - step
        new_loss = col_losses(np.arange(p), new)
        for _ in range(10):
            worse = np.flatnonzero(new_loss > loss + 1e-10)
            if worse.size == 0:
                break
            t[worse] *= 0.5
            new[worse] = b[worse] - t[worse] * step[worse]
            new_loss[worse] = col_losses(worse, new[worse])
        done |= np.abs(new - b) <= tol
        b, loss = new, new_loss
        if done.all():
            break
    return b, done & np.isfinite(b)


def sis_init(data: Dataset, s: int) -> np.ndarray:
    """Initial active set from marginal (one-variable) GLM fits.

    The ``s`` columns with the largest ``|beta_j|`` from
    :func:`marginal_fits` are returned. Columns whose marginal fit does not
    converge (e.g. perfectly separating columns in logistic regression) are
    ranked ahead of the rest, ordered by ``|gradient at zero|``.
    """
    n, p = data.n, data.p
    if not 1 <= s <= p:
        raise InvalidInputError(f"support size {s} outside 1..{p}")
    if s == p:
        return np.arange(p)
    grad0 = np.abs(data.X.T @ (data.family.mean(np.zeros(n)) - data.y))
    b, ok = marginal_fits(data)
    failed = ~ok
    score = np.where(failed, np.inf, np.abs(b))
    # rank: failed first (by gradient), then by |beta|, ties to smaller index
    order = np.lexsort((np.arange(p), -np.where(failed, grad0, 0.0), -score))
    return np.sort(order[:s])


def bess_glm(
    data: Dataset,
    s: int,
    A0=None,
    cfg: Optional[SpliceConfig] = None,
    init: Optional[Coefficients] = None,
) -> SpliceResult:
    """Splicing search for the best subset of size ``s``.

    Parameters
    ----------
    data : Dataset
    s : int
        Support size, ``1 <= s <= min(n, p)``.
    A0 : sequence of int, optional
        Initial active set of size ``s``; defaults to :func:`sis_init`.
    cfg : SpliceConfig, optional
    init : Coefficients, optional
        Warm start for the initial restricted fit.

    Returns
    -------
    SpliceResult

    Raises
    ------
    NumericalFailure
        If the restricted fit on the initial active set fails. Failed
        candidate fits are treated as rejected splices.
    """
    cfg = cfg or SpliceConfig()
    n, p = data.n, data.p
    if not 1 <= s <= min(n, p):
        raise InvalidInputError(f"support size {s} outside 1..{min(n, p)}")
    if A0 is None:
        A0 = sis_init(data, s)
    active = np.unique(np.asarray(A0, dtype=np.intp))
    if active.size != s:
        raise InvalidInputError(f"initial active set has {active.size} elements, expected {s}")
    tau = default_tau(s, p, n) if cfg.tau is None else float(cfg.tau)

    fit = restricted_mle(data, active, init, replace(cfg.newton, budget_loss=None))
    model = ActiveModel.from_coef(data, active, fit.coef, fit.loss)
    res = splice_from(data, model, cfg, tau)
    res.n_sacrifice_evals += p
    return res


def splice_from(data: Dataset, model: ActiveModel, cfg: SpliceConfig, tau: float) -> SpliceResult:
    """Run the splicing iterations from an already fitted active model.

    Sacrifices of ``model`` are taken as given; ``n_sacrifice_evals`` counts
    only the per-variable gradient and Hessian entries computed here.
    """
    p = data.p
    s = model.active.size
    k_max = min(cfg.k_max, s, p - s)
    loss_path = [model.loss]
    n_evals = 0
    n_iter = 0
    converged = False
    floor = data.family.saturated_loss(data.y)
    for _ in range(cfg.max_outer_iters):
        L = model.loss
        if k_max < 1 or L - tau <= floor:
            # no candidate can go below the saturated loss
            converged = True
            break
        xi = _backward(model)
        inactive = model.inactive
        zeta = _forward(model)
        newton = replace(cfg.newton, budget_loss=L, tau=tau)
        accepted = None
        for k in range(1, k_max + 1):
            leave, enter = splice_sets((model.active, xi), (inactive, zeta), k)
            cand = np.union1d(np.setdiff1d(model.active, leave), enter)
            try:
                fit = restricted_mle(data, cand, model.coef, newton)
            except NumericalFailure:
                continue
            if L - fit.loss > tau:
                accepted = ActiveModel.from_coef(data, cand, fit.coef, fit.loss)
                n_evals += p
                break
        if accepted is None:
            converged = True
            break
        model = accepted
        n_iter += 1
        loss_path.append(model.loss)
    return SpliceResult(model, converged, n_iter, loss_path, n_evals, tau)
