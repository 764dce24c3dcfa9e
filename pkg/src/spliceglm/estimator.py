"""scikit-learn compatible estimators.

The estimators normalize columns internally and report coefficients on the
scale of the input ``X``. They also act as feature selectors: ``transform``
keeps the selected columns, so they can sit inside a ``Pipeline``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.multiclass import type_of_target
from sklearn.utils.validation import check_is_fitted, validate_data

from .glm import Dataset
from .newton import NewtonConfig
from .selection import SelectorConfig, abess, gic
from .splicing import SpliceConfig, bess_glm, sis_init


class _BaseSplicing(SelectorMixin, BaseEstimator):
    _family = None

    def __init__(
        self,
        support_size=None,
        s_max="auto",
        k_max=5,
        tau=None,
        screening_size="auto",
        fit_intercept=True,
        max_newton_iter=80,
        newton_tol=1e-6,
        early_stop=True,
        max_outer_iters=100,
    ):
        self.support_size = support_size
        self.s_max = s_max
        self.k_max = k_max
        self.tau = tau
        self.screening_size = screening_size
        self.fit_intercept = fit_intercept
        self.max_newton_iter = max_newton_iter
        self.newton_tol = newton_tol
        self.early_stop = early_stop
        self.max_outer_iters = max_outer_iters

    def _encode_target(self, y):
        return np.asarray(y, dtype=float)

    def fit(self, X, y):
        """Select a subset of features and fit the GLM on it.

        With ``support_size`` set, a single splicing search of that size is
        run from a marginal-screening start; otherwise support sizes
        ``1..s_max`` are swept and the GIC minimizer is kept.
        """
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=False)
        if X.shape[0] < 3:
            raise ValueError(f"n_samples={X.shape[0]} is too small; at least 3 samples are needed")
        if X.shape[1] < 2 and self.support_size is None:
            raise ValueError(
                "n_features=1 leaves nothing to select; pass support_size=1 and tau to fit it"
            )
        target = self._encode_target(y)
        data = Dataset.from_raw(X, target, self._family, fit_intercept=self.fit_intercept)
        newton = NewtonConfig(
            epsilon=self.newton_tol, max_iters=self.max_newton_iter,
            early_stop=self.early_stop,
        )
        if self.support_size is not None:
            cfg = SpliceConfig(k_max=self.k_max, tau=self.tau,
                               max_outer_iters=self.max_outer_iters, newton=newton)
            res = bess_glm(data, int(self.support_size), sis_init(data, int(self.support_size)), cfg)
            coef = res.coef
            self.gic_path_ = np.array([gic(data, coef)])
            self.selected_size_ = int(self.support_size)
            self.converged_ = res.converged
            self.result_ = res
        else:
            cfg = SelectorConfig(
                s_max=self.s_max, k_max=self.k_max, tau=self.tau,
                screening_size=self.screening_size,
                max_outer_iters=self.max_outer_iters, newton=newton,
            )
            result = abess(data, cfg)
            coef = result.selected
            self.gic_path_ = result.gic_path
            self.selected_size_ = result.selected_size
            self.converged_ = result.selected_fit.converged
            self.result_ = result
        raw = data.to_raw_scale(coef)
        self.coef_ = np.asarray(raw.beta).copy()
        self.intercept_ = 0.0 if raw.intercept is None else raw.intercept
        self.support_ = np.flatnonzero(self.coef_)
        return self

    def decision_function(self, X):
        """Linear predictor ``X @ coef_ + intercept_``."""
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return X @ self.coef_ + self.intercept_

    def _get_support_mask(self):
        check_is_fitted(self)
        mask = np.zeros(self.coef_.size, dtype=bool)
        mask[self.support_] = True
        return mask


class SplicingRegressor(RegressorMixin, _BaseSplicing):
    """Best-subset least squares (Gaussian family)."""

    _family = "gaussian"

    def predict(self, X):
        return self.decision_function(X)


class SplicingPoissonRegressor(RegressorMixin, _BaseSplicing):
    """Best-subset Poisson regression with log link."""

    _family = "poisson"

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.target_tags.positive_only = True
        return tags

    def predict(self, X):
        return np.exp(self.decision_function(X))


class SplicingClassifier(ClassifierMixin, _BaseSplicing):
    """Best-subset logistic regression for binary targets.

    Any two class labels are accepted; ``classes_[1]`` is the positive class.
    """

    _family = "logistic"

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.classifier_tags.multi_class = False
        return tags

    def _encode_target(self, y):
        y_type = type_of_target(y, input_name="y", raise_unknown=True)
        if y_type != "binary":
            raise ValueError(
                f"Only binary classification is supported. The type of the target is {y_type}."
            )
        classes, encoded = np.unique(y, return_inverse=True)
        if classes.size < 2:
            raise ValueError("Classifier can't train when only one class is present.")
        self.classes_ = classes
        return encoded.astype(float)

    def predict_proba(self, X):
        eta = self.decision_function(X)
        pos = 1.0 / (1.0 + np.exp(-eta))
        return np.column_stack([1.0 - pos, pos])

    def predict(self, X):
        eta = self.decision_function(X)
        return self.classes_[(eta > 0).astype(int)]
