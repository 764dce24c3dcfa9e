"""Maximum likelihood on a fixed active set by damped Newton iterations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import InvalidInputError, NumericalFailure
from .glm import Coefficients, Dataset

RIDGE = 1e-6  # times n
PIVOT_FLOOR = 1e-10  # times n
MAX_HALVINGS = 10
DESCENT_SLACK = 1e-10
LOSS_STALL = 1e-9  # times n


@dataclass(frozen=True)
class NewtonConfig:
    """Settings for :func:`restricted_mle`.

    ``budget_loss`` is the incumbent loss ``L`` a candidate fit must beat by
    ``tau``; when it is set and ``early_stop`` is true, iterations stop as
    soon as extrapolating the current progress cannot reach ``L - tau``.
    """

    epsilon: float = 1e-6
    max_iters: int = 80
    early_stop: bool = True
    budget_loss: Optional[float] = None
    tau: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidInputError("epsilon must be positive")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be at least 1")


class RestrictedFit(NamedTuple):
    coef: Coefficients
    loss: float
    converged: bool
    n_iter: int


def should_continue_newton(l1, l2, max_iters, m, L, tau) -> bool:
    """Decide whether a candidate fit is still worth iterating.

    ``l1`` and ``l2`` are the losses before and after update ``m``. The
    per-step improvement ``l1 - l2`` is extrapolated over the remaining
    ``max_iters - m`` updates and compared with the target ``L - tau``.
    """
    target = L - tau
    if l2 <= target:
        return True
    return l2 - (max_iters - m) * (l1 - l2) <= target


def _newton_direction(H, g, n, active):
    for ridge in (0.0, RIDGE * n):
        Hr = H + ridge * np.eye(H.shape[0]) if ridge else H
        try:
            chol = np.linalg.cholesky(Hr)
        except np.linalg.LinAlgError:
            continue
        if np.min(np.diag(chol)) ** 2 < PIVOT_FLOOR * n:
            continue
        z = np.linalg.solve(chol, g)
        return np.linalg.solve(chol.T, z)
    raise NumericalFailure("restricted Hessian is singular after ridge damping", active)


def restricted_mle(
    data: Dataset,
    active,
    init: Optional[Coefficients] = None,
    cfg: Optional[NewtonConfig] = None,
) -> RestrictedFit:
    """Minimize ``l_n`` over coefficients supported on ``active``.

    Parameters
    ----------
    data : Dataset
    active : sequence of int
        Columns allowed to be nonzero. May be empty, which yields the null
        (intercept-only or all-zero) model.
    init : Coefficients, optional
        Starting point; entries outside ``active`` are ignored.
    cfg : NewtonConfig, optional

    Returns
    -------
    RestrictedFit
        ``coef`` is exactly zero outside ``active``. ``converged`` is true
        when the last update moved the coefficients by at most ``epsilon``.
    """
    cfg = cfg or NewtonConfig()
    n, p = data.n, data.p
    active = np.unique(np.asarray(active, dtype=np.intp))
    if active.size and (active[0] < 0 or active[-1] >= p):
        raise InvalidInputError(f"active set must lie in 0..{p - 1}")
    family, y = data.family, data.y

    Z = data.X[:, active]
    if data.fit_intercept:
        Z = np.column_stack([np.ones(n), Z])
    theta = np.zeros(Z.shape[1])
    if init is not None:
        if init.beta.shape != (p,):
            raise InvalidInputError("init has the wrong length")
        offset = 1 if data.fit_intercept else 0
        theta[offset:] = init.beta[active]
        if data.fit_intercept and init.intercept is not None:
            theta[0] = init.intercept

    def pack(t):
        beta = np.zeros(p)
        if data.fit_intercept:
            beta[active] = t[1:]
            return Coefficients(beta, t[0])
        beta[active] = t
        return Coefficients(beta)

    eta = Z @ theta
    loss = family.loss(y, eta)
    if Z.shape[1] == 0:
        return RestrictedFit(pack(theta), loss, True, 0)

    early = cfg.early_stop and cfg.budget_loss is not None
    converged = False
    m = 0
    while m < cfg.max_iters:
        m += 1
        g = Z.T @ (family.mean(eta) - y)
        H = (Z.T * family.variance(eta)) @ Z
        step = _newton_direction(H, g, n, active)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            theta_new = theta - t * step
            eta_new = Z @ theta_new
            loss_new = family.loss(y, eta_new)
            if loss_new <= loss + DESCENT_SLACK:
                break
            t *= 0.5
        else:
            # no descent along the Newton direction: numerically stationary
            converged = bool(np.max(np.abs(g)) <= 1e-4 * n)
            break
        l1 = loss
        moved = np.linalg.norm(theta_new - theta)
        theta, eta, loss = theta_new, eta_new, loss_new
        if moved <= cfg.epsilon:
            converged = True
            break
        if l1 - loss <= LOSS_STALL * n:
            # flat loss without a finite minimizer, e.g. separable logistic data
            g = Z.T @ (family.mean(eta) - y)
            converged = bool(np.max(np.abs(g)) <= 1e-4 * n)
            break
        if early and not should_continue_newton(
            l1, loss, cfg.max_iters, m, cfg.budget_loss, cfg.tau
        ):
            break
    return RestrictedFit(pack(theta), loss, converged, m)
