"""Small regression models used as nuisance fits and as the T-learner under evaluation."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from . import kernels
from .data import RctDataset
from .errors import DataValidationError


def _as_matrix(X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return X.reshape(1, -1), True
    return X, False


def _check_fit_inputs(X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise DataValidationError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if y.shape[0] < 1:
        raise DataValidationError("cannot fit on an empty training set")
    return X, y


class Regressor:
    """Fit on a feature matrix, then predict a real value per row.

    ``predict`` accepts a matrix (returns a vector) or a single row (returns a float).
    """

    def fit(self, X, y) -> "Regressor":
        raise NotImplementedError

    def _predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X):
        X, single = _as_matrix(X)
        out = self._predict(X)
        return float(out[0]) if single else out


class MeanRegressor(Regressor):
    def fit(self, X, y):
        _, y = _check_fit_inputs(X, y)
        self.mean_ = float(np.mean(y))
        return self

    def _predict(self, X):
        return np.full(X.shape[0], self.mean_)


class LinearRegressor(Regressor):
    """Least squares with an unpenalized intercept and ridge penalty ``lam`` on the slopes."""

    def __init__(self, lam: float = 1e-6):
        if lam < 0:
            raise ValueError("ridge penalty must be non-negative")
        self.lam = float(lam)

    def fit(self, X, y):
        X, y = _check_fit_inputs(X, y)
        x_mean = X.mean(axis=0)
        y_mean = float(y.mean())
        Xc = X - x_mean
        yc = y - y_mean
        if self.lam > 0:
            gram = Xc.T @ Xc + self.lam * np.eye(X.shape[1])
            self.coef_ = np.linalg.solve(gram, Xc.T @ yc)
        else:
            self.coef_ = np.linalg.lstsq(Xc, yc, rcond=None)[0]
        self.intercept_ = y_mean - float(x_mean @ self.coef_)
        return self

    def _predict(self, X):
        return X @ self.coef_ + self.intercept_


class KnnRegressor(Regressor):
    """Average target of the ``k`` nearest training rows (Euclidean; ties to the lower row index)."""

    def __init__(self, k: int = 10):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = int(k)

    def fit(self, X, y):
        X, y = _check_fit_inputs(X, y)
        if self.k > X.shape[0]:
            raise DataValidationError(f"k={self.k} exceeds the {X.shape[0]} training rows")
        self.X_ = np.ascontiguousarray(X)
        self.y_ = y.copy()
        return self

    def _predict(self, X):
        return kernels.knn_predict(self.X_, self.y_, np.ascontiguousarray(X), self.k)


class BaggedTrees(Regressor):
    """Mean of ``n_trees`` depth-limited regression trees grown on bootstrap samples.

    Every split considers all features and uses midpoint thresholds. Tree ``t``
    draws its bootstrap sample from a Philox stream keyed by ``(seed, t)``, so
    predictions are reproducible and independent of fitting order.
    """

    def __init__(self, n_trees: int = 100, max_depth: int = 6, min_leaf: int = 10, seed: int = 0):
        if n_trees < 1 or max_depth < 0 or min_leaf < 1:
            raise ValueError("need n_trees >= 1, max_depth >= 0, min_leaf >= 1")
        self.n_trees = int(n_trees)
        self.max_depth = int(max_depth)
        self.min_leaf = int(min_leaf)
        self.seed = int(seed)

    def bootstrap_counts(self, n: int, tree: int) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=(tree,))))
        return np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)

    def fit(self, X, y):
        X, y = _check_fit_inputs(X, y)
        X = np.ascontiguousarray(X)
        n, d = X.shape
        order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
        cap = 2 ** (self.max_depth + 1) - 1
        shape = (self.n_trees, cap)
        self.feature_ = np.full(shape, -1, dtype=np.int64)
        self.threshold_ = np.zeros(shape)
        self.left_ = np.full(shape, -1, dtype=np.int64)
        self.right_ = np.full(shape, -1, dtype=np.int64)
        self.value_ = np.zeros(shape)
        for t in range(self.n_trees):
            kernels.build_tree(X, y, self.bootstrap_counts(n, t), order, self.max_depth, float(self.min_leaf),
                               self.feature_[t], self.threshold_[t], self.left_[t], self.right_[t], self.value_[t])
        return self

    def _predict(self, X):
        return kernels.predict_forest(np.ascontiguousarray(X), self.feature_, self.threshold_,
                                      self.left_, self.right_, self.value_)


RegressorConfig = Union[str, Mapping[str, object], Regressor, None]

DEFAULT_REGRESSOR = "kind=bagged_trees,trees=100,depth=6,min_leaf=10,seed=0"

_KINDS = {
    "mean": (MeanRegressor, {}),
    "linear": (LinearRegressor, {"lam": ("lam", float)}),
    "knn": (KnnRegressor, {"k": ("k", int)}),
    "bagged_trees": (BaggedTrees, {"trees": ("n_trees", int), "depth": ("max_depth", int),
                                   "min_leaf": ("min_leaf", int), "seed": ("seed", int)}),
}


def parse_config(config: str) -> dict[str, str]:
    """Parse ``"kind=knn,k=5"`` into a flat dict."""
    out = {}
    for part in filter(None, (p.strip() for p in config.split(","))):
        if "=" not in part:
            if not out:
                out["kind"] = part
                continue
            raise ValueError(f"malformed regressor option {part!r}; expected key=value")
        key, value = (s.strip() for s in part.split("=", 1))
        out[key] = value
    return out


def make_regressor(config: RegressorConfig = None) -> Regressor:
    """Build an unfitted regressor from a flat key-value config such as ``kind=knn,k=5``."""
    if isinstance(config, Regressor):
        return copy.deepcopy(config)
    if config is None:
        config = DEFAULT_REGRESSOR
    opts = parse_config(config) if isinstance(config, str) else {k: str(v) for k, v in config.items()}
    kind = opts.pop("kind", "bagged_trees")
    if kind not in _KINDS:
        raise ValueError(f"unknown regressor kind {kind!r}; choose from {sorted(_KINDS)}")
    cls, params = _KINDS[kind]
    kwargs = {}
    for key, value in opts.items():
        if key not in params:
            raise ValueError(f"unknown option {key!r} for kind={kind}; allowed: {sorted(params)}")
        name, cast = params[key]
        kwargs[name] = cast(value)
    return cls(**kwargs)


def with_seed(config: RegressorConfig, seed: int) -> RegressorConfig:
    """Return ``config`` with its ``seed`` replaced, when the kind takes one."""
    if config is None:
        config = DEFAULT_REGRESSOR
    if isinstance(config, Regressor):
        return config
    opts = parse_config(config) if isinstance(config, str) else {k: str(v) for k, v in config.items()}
    if opts.get("kind", "bagged_trees") == "bagged_trees":
        opts["seed"] = str(seed)
    return opts


def fit(reg: RegressorConfig, X, y) -> Regressor:
    return make_regressor(reg).fit(X, y)


@dataclass(frozen=True)
class TLearner:
    """CATE estimate as the difference of two per-arm outcome regressions."""

    model1: Regressor
    model0: Regressor

    def cate(self, X):
        return self.model1.predict(X) - self.model0.predict(X)

    predict = cate

    def outcome(self, X, W):
        """Predicted outcome under the observed arm: mu1(x) if treated else mu0(x)."""
        W = np.asarray(W)
        return np.where(W == 1, self.model1.predict(X), self.model0.predict(X))


def fit_t_learner(ds_train: RctDataset, base: RegressorConfig = None) -> TLearner:
    treated = ds_train.W == 1
    if treated.all() or not treated.any():
        raise DataValidationError("T-learner needs at least one treated and one control training row")
    m1 = make_regressor(base).fit(ds_train.X[treated], ds_train.Y[treated])
    m0 = make_regressor(base).fit(ds_train.X[~treated], ds_train.Y[~treated])
    return TLearner(m1, m0)
