"""Empirical uplift evaluation metrics.

Accuracy: transformed-outcome MSE and differences of it between two models.
Ranking: the Qini / uplift curve family built on the difference of arm means
in the top-ranked share of the test set. Decisions: gain and decision value.
Every metric takes an outcome vector, so the same call works on original or
adjusted outcomes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .data import ScoredTestSet
from .errors import DataValidationError, DegenerateSegmentError
from .learners import Regressor, TLearner
from .transform import ht_weight

VARIANTS = ("Q1", "Q2", "Q3", "UC1", "UC2", "UC3")
DECILES = tuple(k / 10 for k in range(1, 11))
PERCENTS = tuple(k / 100 for k in range(1, 101))

BIASED_ON_RCT = "biased on RCT data"


def z_value(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def _outcome(test: ScoredTestSet, y) -> np.ndarray:
    if y is None:
        return test.dataset.Y
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (test.n,):
        raise DataValidationError(f"outcome vector has shape {y.shape}, expected ({test.n},)")
    return y


# --- transformed-outcome MSE ----------------------------------------------

def transformed_outcome(test: ScoredTestSet, y=None) -> np.ndarray:
    ds = test.dataset
    return ht_weight(ds.W, ds.p) * _outcome(test, y)


def mse_w(test: ScoredTestSet, score: str, y=None) -> float:
    """(1/N) * sum((W^p Y - tau_hat)^2). Meaningful only for CATE-estimating scores."""
    r = transformed_outcome(test, y) - test[score]
    return float(np.mean(r * r))


@dataclass
class MseReport:
    mse_w: dict[str, float]
    score1: str
    score2: str
    delta: float
    ci: tuple[float, float]
    adjustment: str
    n: int
    level: float = 0.95
    warnings: list[str] = field(default_factory=list)

    def csv_rows(self):
        header = ["adjustment", "n", "score1", "score2", "mse_w_1", "mse_w_2", "delta", "ci_low", "ci_high", "warnings"]
        row = [self.adjustment, self.n, self.score1, self.score2, self.mse_w[self.score1], self.mse_w[self.score2],
               self.delta, self.ci[0], self.ci[1], "; ".join(self.warnings)]
        return header, [row]


def delta_mse_w(test: ScoredTestSet, score1: str, score2: str, y=None, level: float = 0.95,
                adjustment: str = "none") -> MseReport:
    """MSE_W(score1) - MSE_W(score2) with a normal-approximation interval.

    The interval is delta +/- z * sd(per-row differences) / sqrt(N).
    """
    t = transformed_outcome(test, y)
    r1 = t - test[score1]
    r2 = t - test[score2]
    m1 = float(np.mean(r1 * r1))
    m2 = float(np.mean(r2 * r2))
    delta = m1 - m2
    n = test.n
    diffs = r1 * r1 - r2 * r2
    sd = float(np.std(diffs, ddof=1)) if n > 1 else math.nan
    half = z_value(level) * sd / math.sqrt(n)
    notes = [f"score {s!r} is not a CATE estimate; MSE_W is not a valid accuracy measure for it"
             for s in dict.fromkeys((score1, score2)) if s not in test.cate]
    mse = {score1: m1, score2: m2}
    return MseReport(mse, score1, score2, delta, (delta - half, delta + half), adjustment, n, level, notes)


# --- ranking ----------------------------------------------------------------

def rank_order(score: np.ndarray) -> np.ndarray:
    """Row indices by score descending; ties keep the original row order."""
    return np.argsort(-np.asarray(score, dtype=np.float64), kind="stable")


def segment_size(s: float, n: int) -> int:
    """floor(s * n), at least 1; a 1e-9 guard absorbs float error such as 0.29 * 100."""
    if not 0.0 < s <= 1.0:
        raise ValueError(f"share must lie in (0, 1], got {s}")
    return max(1, min(n, int(math.floor(s * n + 1e-9))))


class SegmentEstimate(NamedTuple):
    ate_hat: float
    n_w: int
    n_wbar: int
    sigma: float       # standard error sqrt(var1/n_w + var0/n_wbar); NaN if an arm has < 2 rows
    var_w: float
    var_wbar: float


def _segment_table(test: ScoredTestSet, score: str, y, shares: Sequence[float]):
    y = _outcome(test, y)
    order = rank_order(test[score])
    cuts = np.array([segment_size(s, test.n) for s in shares], dtype=np.int64)
    stats = kernels.segment_stats(np.ascontiguousarray(y[order]), np.ascontiguousarray(test.dataset.W[order]), cuts)
    return y, order, cuts, stats


def _estimate(row) -> SegmentEstimate:
    n1, mean1, var1, n0, mean0, var0 = row
    sigma = math.sqrt(var1 / n1 + var0 / n0) if n1 > 1 and n0 > 1 else math.nan
    return SegmentEstimate(float(mean1 - mean0), int(n1), int(n0), sigma, float(var1), float(var0))


def ate_hat_s(test: ScoredTestSet, score: str, y=None, s: float = 1.0) -> SegmentEstimate:
    """Difference of arm means among the top floor(s*N) rows ranked by ``score``."""
    _, _, _, stats = _segment_table(test, score, y, [s])
    if stats[0, 0] == 0 or stats[0, 3] == 0:
        raise DegenerateSegmentError(s)
    return _estimate(stats[0])


def segment_estimates(test: ScoredTestSet, score: str, y=None, shares=DECILES) -> np.ndarray:
    """Array (len(shares), 6) of n1, mean1, var1, n0, mean0, var0 per top-s segment.

    One sort for all shares; empty arms give NaN means, arms below two rows NaN variances.
    """
    return _segment_table(test, score, y, resolve_shares(shares))[3]


def qini_ci(ate_hat: float, var_w: float, n_w: int, var_wbar: float, n_wbar: int,
            factor: float = 1.0, level: float = 0.95) -> tuple[float, float]:
    """Interval (ate_hat +/- z*sqrt(var_w/n_w + var_wbar/n_wbar)) * factor.

    Uses the two-sample standard error with each arm's own count.
    """
    if n_w < 2 or n_wbar < 2:
        raise DegenerateSegmentError(math.nan, "confidence interval needs at least two rows per arm")
    half = z_value(level) * math.sqrt(var_w / n_w + var_wbar / n_wbar)
    lo, hi = (ate_hat - half) * factor, (ate_hat + half) * factor
    return (lo, hi) if lo <= hi else (hi, lo)


@dataclass(frozen=True)
class QiniPoint:
    s: float
    value: float
    ate_hat: float
    n_w: int
    n_wbar: int
    ci_low: float
    ci_high: float
    degenerate: bool = False


@dataclass
class QiniCurve:
    variant: str
    points: list[QiniPoint]
    score_name: str
    adjustment: str = "none"
    level: float = 0.95
    warnings: list[str] = field(default_factory=list)

    COLUMNS = ("s", "value", "ate_hat", "n_w", "n_wbar", "ci_low", "ci_high")

    @property
    def shares(self) -> np.ndarray:
        return np.array([pt.s for pt in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([pt.value for pt in self.points])

    @property
    def ate_hats(self) -> np.ndarray:
        return np.array([pt.ate_hat for pt in self.points])

    def csv_rows(self):
        return list(self.COLUMNS), [[getattr(pt, c) for c in self.COLUMNS] for pt in self.points]


def resolve_shares(shares) -> tuple[float, ...]:
    if isinstance(shares, str):
        key = shares.strip().lower()
        if key == "deciles":
            return DECILES
        if key in ("percent", "percents", "percentiles"):
            return PERCENTS
        shares = [float(x) for x in key.split(",") if x.strip()]
    shares = tuple(float(s) for s in shares)
    if not shares:
        raise ValueError("shares must not be empty")
    if any(not 0.0 < s <= 1.0 for s in shares):
        raise ValueError("shares must lie in (0, 1]")
    if any(b <= a for a, b in zip(shares, shares[1:])):
        raise ValueError("shares must be strictly increasing")
    return shares


def qini_curve(test: ScoredTestSet, score: str, y=None, shares="deciles", variant: str = "Q1",
               level: float = 0.95, adjustment: str = "none") -> QiniCurve:
    """Qini / uplift curve of one score at the given shares.

    Values per variant, for the top-s segment with arm sums S1, S0 and arm
    counts n1, n0 (global test-set counts NW, NWbar):

    Q1  S1 - (n1/n0) S0            = ate_hat * n1
    Q2  S1 - (NW/NWbar) S0
    Q3  S1/NW - S0/NWbar           (identical to UC2)
    UC1 ate_hat * (n1 + n0)
    UC2 S1/NW - S0/NWbar
    UC3 S1 - S0                    (only sensible at p = 0.5)

    The interval of each point is value +/- z * se(ate_hat) * factor, with
    factor n1 (Q1, Q2), n1+n0 (UC1), (n1+n0)/N (Q3, UC2) or (n1+n0)/2 (UC3).
    Segments missing an arm give a degenerate point: ate_hat and the
    interval are NaN, the value is kept wherever the variant's formula still
    defines it, and a warning is attached. Arms with a single row give a
    value without an interval.
    """
    variant = variant.upper()
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    shares = resolve_shares(shares)
    y, order, cuts, stats = _segment_table(test, score, y, shares)
    ds = test.dataset
    n_total = ds.n
    nw_tot = int(ds.W.sum())
    nwbar_tot = n_total - nw_tot
    notes = []
    if variant == "UC3" and ds.p != 0.5:
        notes.append(f"UC3 assumes p = 0.5 but p = {ds.p}; its values do not track the uplift")
    if variant in ("Q2", "Q3", "UC2") and (nw_tot == 0 or nwbar_tot == 0):
        raise DegenerateSegmentError(1.0, "test set lacks a treated or control row")
    z = z_value(level)
    points = []
    for s, m, row in zip(shares, cuts, stats):
        n1, mean1, var1, n0, mean0, var0 = row
        n1, n0 = int(n1), int(n0)
        if n1 == 0 or n0 == 0:
            notes.append(f"share {s}: segment of {m} rows has no {'treated' if n1 == 0 else 'control'} rows")
            s1 = mean1 * n1 if n1 else 0.0
            s0 = mean0 * n0 if n0 else 0.0
            value = {"Q2": s1 - nw_tot / nwbar_tot * s0 if nwbar_tot else math.nan,
                     "Q3": s1 / nw_tot - s0 / nwbar_tot if nw_tot and nwbar_tot else math.nan,
                     "UC3": s1 - s0}.get("Q3" if variant == "UC2" else variant, math.nan)
            if variant == "Q1" and n1 == 0:
                value = 0.0
            points.append(QiniPoint(s, float(value), math.nan, n1, n0, math.nan, math.nan, True))
            continue
        est = _estimate(row)
        s1 = mean1 * n1
        s0 = mean0 * n0
        if variant == "Q1":
            value, factor = est.ate_hat * n1, n1
        elif variant == "Q2":
            value, factor = s1 - nw_tot / nwbar_tot * s0, n1
        elif variant in ("Q3", "UC2"):
            value, factor = s1 / nw_tot - s0 / nwbar_tot, m / n_total
        elif variant == "UC1":
            value, factor = est.ate_hat * (n1 + n0), n1 + n0
        else:
            value, factor = s1 - s0, (n1 + n0) / 2.0
        if math.isnan(est.sigma):
            notes.append(f"share {s}: an arm has fewer than two rows; no interval")
            lo = hi = math.nan
        else:
            half = z * est.sigma * factor
            lo, hi = value - half, value + half
        points.append(QiniPoint(s, float(value), est.ate_hat, n1, n0, float(lo), float(hi)))
    for note in notes:
        warnings.warn(note, stacklevel=2)
    return QiniCurve(variant, points, score, adjustment, level, notes)


def auuc(curve: QiniCurve) -> float:
    """Sum of curve values over the percent grid k/100, k = 1..100."""
    if len(curve.points) != 100 or not np.allclose(curve.shares, PERCENTS, rtol=0, atol=1e-12):
        raise ValueError("AUUC needs a curve computed on the percent grid k/100, k=1..100")
    return float(np.sum(curve.values))


def uplift_per_decile(test: ScoredTestSet, score: str, y=None) -> np.ndarray:
    """ate_hat over the cumulative deciles [0, 0.1], [0, 0.2], ..., [0, 1]."""
    _, _, _, stats = _segment_table(test, score, y, DECILES)
    out = np.empty(10)
    for i, row in enumerate(stats):
        if row[0] == 0 or row[3] == 0:
            raise DegenerateSegmentError(DECILES[i])
        out[i] = row[1] - row[4]
    return out


def _area(shares: np.ndarray, values: np.ndarray) -> float:
    s = np.r_[0.0, shares]
    v = np.r_[0.0, values]
    return float(np.sum((s[1:] - s[:-1]) * (v[1:] + v[:-1]) / 2.0))


def qini_values(curve: QiniCurve, optimum: QiniCurve) -> tuple[float, float]:
    """Two ratios of curve area to the area of a reference optimum curve.

    ratio1 measures both curves above the random-targeting line (the straight
    line from the origin to the curve's value at s = 1); ratio2 uses raw areas.
    Areas are trapezoids over the share grid, starting from (0, 0).
    """
    if len(curve.points) != len(optimum.points) or not np.allclose(curve.shares, optimum.shares, rtol=0, atol=1e-12):
        raise ValueError("curve and optimum must share the same grid")
    shares = curve.shares
    if abs(shares[-1] - 1.0) > 1e-12:
        raise ValueError("Qini values need the grid to end at s = 1")
    v, o = curve.values, optimum.values
    if np.isnan(v).any() or np.isnan(o).any():
        raise ValueError("curve has degenerate points")
    line_v = shares * v[-1]
    line_o = shares * o[-1]
    den1 = _area(shares, o - line_o)
    den2 = _area(shares, o)
    if den1 == 0.0 or den2 == 0.0:
        raise ValueError("optimum curve has zero area")
    return _area(shares, v - line_v) / den1, _area(shares, v) / den2


# --- decision metrics ---------------------------------------------------------

@dataclass(frozen=True)
class DecisionPolicy:
    """Treat iff score > threshold; ``constant`` (0 or 1) overrides the score."""

    score: str | None = None
    threshold: float = 0.0
    constant: int | None = None

    @classmethod
    def always(cls, d: int) -> "DecisionPolicy":
        if d not in (0, 1):
            raise ValueError("constant decision must be 0 or 1")
        return cls(constant=d)

    def decide(self, test: ScoredTestSet) -> np.ndarray:
        if self.constant is not None:
            return np.full(test.n, self.constant, dtype=np.int64)
        if self.score is None:
            raise ValueError("policy needs a score name or a constant decision")
        return (test[self.score] > self.threshold).astype(np.int64)


def gain_hat(test: ScoredTestSet, policy: DecisionPolicy, y=None) -> float:
    """Difference of arm means among the rows the policy recommends for treatment."""
    y = _outcome(test, y)
    d = policy.decide(test) == 1
    w = test.dataset.W == 1
    if not (d & w).any() or not (d & ~w).any():
        raise DegenerateSegmentError(math.nan, "recommended set lacks treated or control rows")
    return float(np.mean(y[d & w]) - np.mean(y[d & ~w]))


def decision_value(test: ScoredTestSet, policy: DecisionPolicy, y=None) -> float:
    """Estimated mean outcome if treatment followed the policy (p-tilde = observed treated share)."""
    y = _outcome(test, y)
    w = test.dataset.W.astype(np.float64)
    n = test.n
    p_tilde = w.sum() / n
    if p_tilde in (0.0, 1.0):
        raise DegenerateSegmentError(math.nan, "decision value needs both arms present")
    d = policy.decide(test).astype(np.float64)
    return float((np.sum(w * d * y) / p_tilde + np.sum((1 - w) * (1 - d) * y) / (1 - p_tilde)) / n)


# --- alternative accuracy metrics (biased on RCT data) --------------------------

def _prediction(model, X):
    if model is None:
        raise ValueError("missing nuisance fit")
    if isinstance(model, Regressor):
        return model.predict(X)
    return np.asarray(model, dtype=np.float64)


def mse_pi(test: ScoredTestSet, score: str, mu1: Regressor, mu0: Regressor) -> float:
    """Plug-in loss mean((mu1(x) - mu0(x) - tau_hat)^2). Biased: zero for tau_hat = mu1 - mu0."""
    X = test.dataset.X
    r = _prediction(mu1, X) - _prediction(mu0, X) - test[score]
    return float(np.mean(r * r))


def mse_tau(test: ScoredTestSet, score: str, mu: Regressor, p: float | None = None, y=None) -> float:
    """tau-risk mean((Y - mu(x) - (W - p) tau_hat)^2) with the design probability p."""
    ds = test.dataset
    p = ds.p if p is None else p
    r = _outcome(test, y) - _prediction(mu, ds.X) - (ds.W - p) * test[score]
    return float(np.mean(r * r))


def mse_mu(test: ScoredTestSet, model: TLearner, y=None) -> float:
    """mu-loss mean((Y - W mu1(x) - (1 - W) mu0(x))^2) for a two-headed model."""
    if not isinstance(model, TLearner):
        raise ValueError("mu-loss needs a model with per-arm outcome predictions")
    ds = test.dataset
    r = _outcome(test, y) - model.outcome(ds.X, ds.W)
    return float(np.mean(r * r))


def biased_metrics(test: ScoredTestSet, score: str, t_learner: TLearner, mu: Regressor) -> dict[str, tuple[float, str]]:
    """The three alternative accuracy metrics, each tagged as biased on RCT data."""
    return {
        "mse_pi": (mse_pi(test, score, t_learner.model1, t_learner.model0), BIASED_ON_RCT),
        "mse_tau": (mse_tau(test, score, mu), BIASED_ON_RCT),
        "mse_mu": (mse_mu(test, t_learner), BIASED_ON_RCT),
    }


def curves_for(test: ScoredTestSet, score: str, outcomes: dict[str, np.ndarray], shares="deciles",
               variant: str = "Q1", level: float = 0.95) -> dict[str, QiniCurve]:
    """One curve per named outcome vector (e.g. original and adjusted)."""
    return {name: qini_curve(test, score, y, shares, variant, level, adjustment=name) for name, y in outcomes.items()}
