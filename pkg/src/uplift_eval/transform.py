"""Horvitz-Thompson transformation and train-only outcome adjustments.

An adjustment subtracts a fitted function of the features from the outcome
on held-out rows. Because the function is fixed on the test set, metric
expectations are untouched while the noise in the transformed outcome shrinks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import RctDataset
from .errors import CrossFittingError, DataValidationError
from .learners import MeanRegressor, Regressor, RegressorConfig, make_regressor

METHODS = ("none", "uc", "cond", "dr")


def ht_weight(w, p):
    """Horvitz-Thompson weight w/p - (1-w)/(1-p)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    w = np.asarray(w, dtype=np.float64)
    return w / p - (1.0 - w) / (1.0 - p)


def ht_transform(w, y, p):
    """Transformed outcome (w/p - (1-w)/(1-p)) * y; unbiased for the CATE in an RCT."""
    out = ht_weight(w, p) * np.asarray(y, dtype=np.float64)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class AdjustmentFn:
    """A fitted nuisance estimate, tagged with the training rows it saw."""

    method: str
    p: float = 0.5
    constant: float = 0.0
    model: Regressor | None = None
    model1: Regressor | None = None
    model0: Regressor | None = None
    fit_fingerprint: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint64), repr=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown adjustment method {self.method!r}; choose from {METHODS}")

    @classmethod
    def none(cls) -> "AdjustmentFn":
        return cls("none")

    def evaluate(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if self.method == "none":
            return np.zeros(X.shape[0])
        if self.method == "uc":
            return np.full(X.shape[0], self.constant)
        if self.method == "cond":
            return self.model.predict(X)
        return (1.0 - self.p) * self.model1.predict(X) + self.p * self.model0.predict(X)


def fit_adjustment(method: str, ds_train: RctDataset, base: RegressorConfig = None) -> AdjustmentFn:
    """Fit one of the adjustment methods on training data.

    ``uc``: constant (1-p)*mean(Y|W=1) + p*mean(Y|W=0) from training arm means.
    ``dr``: x -> (1-p)*mu1(x) + p*mu0(x), with per-arm regressions.
    ``cond``: x -> mu(x), one regression on all training rows.
    """
    if method == "none":
        return AdjustmentFn.none()
    if method not in METHODS:
        raise ValueError(f"unknown adjustment method {method!r}; choose from {METHODS}")
    if ds_train.n < 1:
        raise DataValidationError("empty training set")
    fingerprint = np.sort(ds_train.keys)
    p = ds_train.p
    if method == "cond":
        model = make_regressor(base).fit(ds_train.X, ds_train.Y)
        return AdjustmentFn("cond", p=p, model=model, fit_fingerprint=fingerprint)
    treated = ds_train.W == 1
    if treated.all() or not treated.any():
        raise DataValidationError(f"{method} adjustment needs treated and control training rows")
    if method == "uc":
        mu1 = MeanRegressor().fit(ds_train.X[treated], ds_train.Y[treated]).mean_
        mu0 = MeanRegressor().fit(ds_train.X[~treated], ds_train.Y[~treated]).mean_
        return AdjustmentFn("uc", p=p, constant=(1.0 - p) * mu1 + p * mu0, fit_fingerprint=fingerprint)
    m1 = make_regressor(base).fit(ds_train.X[treated], ds_train.Y[treated])
    m0 = make_regressor(base).fit(ds_train.X[~treated], ds_train.Y[~treated])
    return AdjustmentFn("dr", p=p, model1=m1, model0=m0, fit_fingerprint=fingerprint)


def check_disjoint(f: AdjustmentFn, ds_test: RctDataset) -> None:
    if f.fit_fingerprint.size == 0:
        return
    shared = np.intersect1d(f.fit_fingerprint, ds_test.keys, assume_unique=True)
    if shared.size:
        raise CrossFittingError(
            f"cross-fitting violation: the {f.method} adjustment was fitted on {shared.size} of the rows being adjusted"
        )


def adjust_outcomes(ds_test: RctDataset, f: AdjustmentFn, allow_overlap: bool = False) -> np.ndarray:
    """Return Y - f(X) for the test rows.

    Refuses (``CrossFittingError``) when ``f`` was fitted on any of these rows,
    since in-sample adjustment biases every metric. ``allow_overlap=True``
    exists only to demonstrate that bias.
    """
    if not allow_overlap:
        check_disjoint(f, ds_test)
    return ds_test.Y - f.evaluate(ds_test.X)


def nuisance_truth(world, x) -> np.ndarray:
    """True nuisance mu_x + (1-p)*tau_x of a simulation world at feature rows ``x``."""
    from .sim import true_effects

    mu, tau = true_effects(world, x)
    return mu + (1.0 - world.p) * tau
