"""Task-level estimators built on the composition problems."""

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .base import SMVR
from .problems import build_hierarchical_term, build_portfolio, groups_from_labels, portfolio_objective


def _default_optimizer():
    return SMVR(eta=0.1, beta=0.5, max_iter=2000, random_state=0)


class MeanDeviationPortfolio(BaseEstimator):
    """Unconstrained mean-deviation portfolio fitted by a stochastic composition optimizer.

    Minimises ``-mean(R x) + risk_aversion * std(R x)`` over the rows of the
    return matrix passed to :meth:`fit`.

    Parameters
    ----------
    risk_aversion : float
    optimizer : estimator, optional
        Any optimizer from :mod:`smvr.base`; cloned before fitting.
    eps : float
        Smoothing inside the square root.
    """

    def __init__(self, risk_aversion=0.2, optimizer=None, eps=1e-8):
        self.risk_aversion = risk_aversion
        self.optimizer = optimizer
        self.eps = eps

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        problem = build_portfolio(X, lam=self.risk_aversion, eps=self.eps)
        opt = clone(self.optimizer) if self.optimizer is not None else _default_optimizer()
        self.optimizer_ = opt.fit(problem)
        self.weights_ = opt.coef_
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Per-period portfolio returns ``X @ weights_``."""
        check_is_fitted(self, "weights_")
        X = check_array(X)
        return X @ self.weights_

    def score(self, X, y=None):
        """Negative mean-deviation objective on ``X`` (larger is better)."""
        check_is_fitted(self, "weights_")
        X = check_array(X)
        return -portfolio_objective(X, self.weights_, self.risk_aversion, self.eps)


class HierarchicalTERMClassifier(ClassifierMixin, BaseEstimator):
    """Binary linear-logistic classifier trained on the hierarchical tilted risk.

    Samples are grouped by class; ``tau`` tilts within each group (negative
    values suppress outliers) and ``t`` tilts across groups (positive values
    emphasise the worse-off class).
    """

    def __init__(self, tau=-2.0, t=10.0, optimizer=None, fit_intercept=True):
        self.tau = tau
        self.t = t
        self.optimizer = optimizer
        self.fit_intercept = fit_intercept

    def _design(self, X):
        return np.hstack((X, np.ones((X.shape[0], 1)))) if self.fit_intercept else X

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        check_classification_targets(y)
        groups, self.classes_ = groups_from_labels(self._design(X), y)
        problem = build_hierarchical_term(groups, tau=self.tau, t=self.t)
        opt = clone(self.optimizer) if self.optimizer is not None else _default_optimizer()
        self.optimizer_ = opt.fit(problem)
        w = opt.coef_
        self.coef_ = w[:X.shape[1]]
        self.intercept_ = float(w[-1]) if self.fit_intercept else 0.0
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack((1.0 - p, p))

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]
