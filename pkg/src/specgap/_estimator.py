"""scikit-learn compatible wrapper of the power-law decay fit."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .spectral import _fit_power_law, _positive_t


class BetaEstimator(RegressorMixin, BaseEstimator):
    """Power-law decay fit of gap-shifted theta values.

    ``fit(X, y)`` takes times ``X`` of shape ``(n, 1)`` and theta values
    ``y``. After fitting, ``beta_`` is the negated slope of the upper
    envelope of ``log(exp(lambda0 t) theta)`` against ``log t``,
    ``beta_bar_`` the negated slope of the lower envelope, ``slope_`` and
    ``intercept_`` the least-squares line and ``residual_`` its largest
    deviation.
    """

    def __init__(self, lambda0: float = 0.0, min_ratio: float = 10.0):
        self.lambda0 = lambda0
        self.min_ratio = min_ratio

    def fit(self, X, y):
        fit = _fit_power_law(X, y, self.lambda0, self.min_ratio)
        self.slope_ = fit["slope"]
        self.intercept_ = fit["intercept"]
        self.beta_ = fit["beta"]
        self.beta_bar_ = fit["beta_bar"]
        self.residual_ = fit["residual"]
        self.window_ = fit["window"]
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        t = _positive_t(np.asarray(X, float).reshape(-1))
        return np.exp(self.intercept_ + self.slope_ * np.log(t) - self.lambda0 * t)

    def score(self, X, y, sample_weight=None):
        # R^2 on log values, where the fit is performed.
        check_is_fitted(self, "slope_")
        from sklearn.metrics import r2_score
        ly = np.log(np.asarray(y, float).reshape(-1))
        return r2_score(ly, np.log(self.predict(X)), sample_weight=sample_weight)
