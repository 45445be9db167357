"""Synthetic RCT worlds "aw" and "nw" with observable ground truth.

Outcomes follow Y = mu_bar(x) + (W - 0.5) * tau_bar(x) + eps with
mu_bar = a(x) / sd(a) and tau_bar = 0.1 * b(x) / sd(b). In control-mean
terms, tau_x = tau_bar and mu_x = mu_bar - 0.5 * tau_bar.

Randomness: every draw comes from a Philox generator seeded through
``np.random.SeedSequence(seed, spawn_key=key)``. Run ``r`` of a batch uses key
``(r, purpose)``, so runs are independent of each other and of scheduling.
Within ``generate`` the order of draws is features, then treatment
(uniforms compared with p), then noise (standard normals scaled by sigma).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple

import numpy as np
from scipy.special import expit

from .data import RctDataset

SETTINGS = ("aw", "nw")

# purpose ids for per-run streams
DATA, MODEL, NUISANCE, NOISE, BOOTSTRAP = range(5)


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


def derive_seed(seed: int, *key: int) -> int:
    """A 32-bit integer seed derived from ``(seed, key)``, for components that take plain ints."""
    return int(np.random.SeedSequence(int(seed), spawn_key=tuple(key)).generate_state(1)[0])


@dataclass(frozen=True)
class SimWorld:
    """A data-generating process. ``norm_a``/``norm_b`` are None until fixed.

    With the norms unset, each generated batch is normalized by its own
    empirical standard deviations of a(x) and b(x).
    """

    setting: str = "aw"
    sigma: float = 1.0
    d: int = 6
    p: float = 0.5
    tau_scale: float = 0.1
    norm_a: float | None = None
    norm_b: float | None = None

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.d < (2 if self.setting == "aw" else 5):
            raise ValueError(f"setting {self.setting} needs more features than d={self.d}")
        if self.p != 0.5:
            raise ValueError("simulation worlds use treatment probability 0.5")

    @property
    def calibrated(self) -> bool:
        return self.norm_a is not None and self.norm_b is not None


def raw_components(setting: str, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized baseline a(x) and effect b(x)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if setting == "aw":
        g = (1.0 + expit(20.0 * (X[:, 0] - 1.0 / 3.0))) * (1.0 + expit(20.0 * (X[:, 1] - 1.0 / 3.0)))
        return 0.5 * g, g
    if setting == "nw":
        softplus = np.logaddexp(0.0, X[:, 1])
        a = (np.maximum.reduce([np.zeros(len(X)), X[:, 0] + X[:, 1], X[:, 2]])
             + np.maximum(0.0, X[:, 3] + X[:, 4]) + 0.5 * (X[:, 0] + softplus))
        return a, X[:, 0] + softplus
    raise ValueError(f"unknown setting {setting!r}")


def draw_features(world: SimWorld, n: int, rng: np.random.Generator) -> np.ndarray:
    if world.setting == "aw":
        return rng.random((n, world.d))
    return rng.standard_normal((n, world.d))


def true_effects(world: SimWorld, X) -> tuple[np.ndarray, np.ndarray]:
    """(mu_x, tau_x): control-arm mean and CATE at ``X`` under fixed normalization."""
    if not world.calibrated:
        raise ValueError("world has no fixed normalization; use calibrate() or the truth returned by generate()")
    a, b = raw_components(world.setting, X)
    tau = world.tau_scale * b / world.norm_b
    return a / world.norm_a - 0.5 * tau, tau


class SimTruth(NamedTuple):
    mu: np.ndarray       # control-arm conditional mean mu_x
    tau: np.ndarray      # CATE tau_x
    norm_a: float
    norm_b: float

    @property
    def nuisance(self) -> np.ndarray:
        """mu_x + (1 - p) * tau_x at p = 0.5, i.e. mu_bar."""
        return self.mu + 0.5 * self.tau

    def subset(self, idx) -> "SimTruth":
        return SimTruth(self.mu[idx], self.tau[idx], self.norm_a, self.norm_b)


def generate(world: SimWorld, n: int, seed) -> tuple[RctDataset, SimTruth]:
    if n < 2:
        raise ValueError("need n >= 2 to normalize by a sample standard deviation")
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    X = draw_features(world, n, rng)
    W = (rng.random(n) < world.p).astype(np.int64)
    eps = world.sigma * rng.standard_normal(n)
    a, b = raw_components(world.setting, X)
    norm_a = world.norm_a if world.norm_a is not None else float(np.std(a, ddof=1))
    norm_b = world.norm_b if world.norm_b is not None else float(np.std(b, ddof=1))
    mu_bar = a / norm_a
    tau = world.tau_scale * b / norm_b
    Y = mu_bar + (W - 0.5) * tau + eps
    ds = RctDataset(X, W, Y, world.p)
    return ds, SimTruth(mu_bar - 0.5 * tau, tau, norm_a, norm_b)


def calibrate(world: SimWorld, n: int = 1_000_000, seed: int = 20240101) -> SimWorld:
    """Fix the normalization constants from one large reference draw."""
    rng = stream(seed)
    X = draw_features(world, n, rng)
    a, b = raw_components(world.setting, X)
    return replace(world, norm_a=float(np.std(a, ddof=1)), norm_b=float(np.std(b, ddof=1)))


class SimRun(NamedTuple):
    train: RctDataset
    test: RctDataset
    truth: SimTruth      # test rows only


def simulate_run(world: SimWorld, n_train: int, n_test: int, base_seed: int, r: int) -> SimRun:
    """Run ``r``: one batch of n_train + n_test rows, first n_train for training."""
    ds, truth = generate(world, n_train + n_test, stream(base_seed, r, DATA))
    train_idx = np.arange(n_train)
    test_idx = np.arange(n_train, n_train + n_test)
    return SimRun(ds.subset(train_idx), ds.subset(test_idx), truth.subset(test_idx))


def batch_runs(world: SimWorld, n_train: int, n_test: int, runs: int, base_seed: int) -> Iterator[SimRun]:
    if runs < 1:
        raise ValueError("runs must be at least 1")
    for r in range(runs):
        yield simulate_run(world, n_train, n_test, base_seed, r)
