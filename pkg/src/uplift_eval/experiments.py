"""Monte-Carlo studies of metric variance, misleading evaluations and interval coverage.

Every study is a pure function of (world, config): runs draw their data and
model seeds from ``(config.seed, run index)`` so reports are bit-identical
regardless of worker count. ``UPLIFT_EVAL_THREADS`` caps the process pool.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import sim
from .data import RctDataset, ScoredTestSet, fmt, split
from .learners import DEFAULT_REGRESSOR, fit_t_learner, make_regressor, with_seed
from .metrics import DECILES, delta_mse_w, mse_tau, segment_estimates, z_value
from .sim import BOOTSTRAP, DATA, MODEL, NOISE, NUISANCE, SimWorld
from .transform import METHODS, adjust_outcomes, fit_adjustment

COMPARATORS = ("oracle", "trivial", "worse")

# stream keys for the fixed-model harness (kept clear of per-run indices)
HARNESS = 2**40
REFERENCE = 5


@dataclass(frozen=True)
class StudyConfig:
    runs: int = 1000
    n_train: int = 2000
    n_test: int = 1000
    seed: int = 0
    regressor: str = DEFAULT_REGRESSOR
    adjustments: tuple[str, ...] = METHODS
    shares: tuple[float, ...] = DECILES
    comparators: tuple[str, ...] = COMPARATORS
    worse_noise: float = 0.1       # sd of the noise added to the worse model, relative to sd of its predictions
    level: float = 0.95
    bootstrap: int = 1000
    reference_n: int = 200_000     # population sample for fixed-model truth
    threads: int | None = None

    def __post_init__(self):
        if self.runs < 1 or self.n_train < 2 or self.n_test < 2:
            raise ValueError("need runs >= 1 and at least two training and test rows")
        if "none" not in self.adjustments:
            raise ValueError("adjustments must include the 'none' baseline")
        for m in self.adjustments:
            if m not in METHODS:
                raise ValueError(f"unknown adjustment {m!r}")
        for c in self.comparators:
            if c not in COMPARATORS:
                raise ValueError(f"unknown comparator {c!r}")


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("UPLIFT_EVAL_THREADS", "").strip()
        threads = int(env) if env else 1
    return max(1, int(threads))


def parallel_map(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    """``[fn(x) for x in items]``, fanned out over processes; output order follows ``items``."""
    n = worker_count(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * n))))


# --- reports -------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    section: str
    metric: str
    adjustment: str = ""
    comparator: str = ""
    share: float = math.nan
    value: float = math.nan
    se: float = math.nan
    ci_low: float = math.nan
    ci_high: float = math.nan
    count: int = 0


@dataclass
class ExperimentReport:
    study: str
    setting: str
    sigma: float
    runs: int
    seed: int
    rows: list[ReportRow] = field(default_factory=list)
    meta: dict[str, str] = field(default_factory=dict)
    runtime: float = 0.0

    COLUMNS = ("study", "setting", "sigma", "runs", "seed", "section", "metric", "adjustment", "comparator",
               "share", "value", "se", "ci_low", "ci_high", "count")

    def add(self, *args, **kwargs) -> ReportRow:
        row = ReportRow(*args, **kwargs)
        self.rows.append(row)
        return row

    def get(self, section: str, metric: str, adjustment: str = "", comparator: str = "", share: float | None = None) -> ReportRow:
        for row in self.rows:
            if (row.section, row.metric, row.adjustment, row.comparator) == (section, metric, adjustment, comparator):
                if share is None or (not math.isnan(row.share) and abs(row.share - share) < 1e-12):
                    return row
        raise KeyError((section, metric, adjustment, comparator, share))

    def select(self, section: str, **match) -> list[ReportRow]:
        return [r for r in self.rows if r.section == section and all(getattr(r, k) == v for k, v in match.items())]

    def csv_rows(self):
        """Fixed column order; runtime is left out so reruns produce identical bytes."""
        head = [self.study, self.setting, self.sigma, self.runs, self.seed]
        body = [head + [r.section, r.metric, r.adjustment, r.comparator, r.share, r.value, r.se, r.ci_low, r.ci_high, r.count]
                for r in self.rows]
        return list(self.COLUMNS), body

    def text_table(self) -> str:
        """One block per section; adjustments as columns, cells ``value (se)``."""
        lines = [f"{self.study}: setting={self.setting} sigma={fmt(self.sigma)} runs={self.runs} seed={self.seed}"]
        lines += [f"  {k}: {v}" for k, v in self.meta.items()]
        sections = list(dict.fromkeys(r.section for r in self.rows))
        for sec in sections:
            rows = self.select(sec)
            adjs = list(dict.fromkeys(r.adjustment for r in rows))
            keys = list(dict.fromkeys((r.metric, r.comparator, r.share) for r in rows))
            lines.append("")
            lines.append(f"[{sec}]")
            label_w = max(len(_label(*k)) for k in keys)
            lines.append(" " * label_w + "".join(f"{a or '-':>22}" for a in adjs))
            for key in keys:
                cells = []
                for a in adjs:
                    hit = [r for r in rows if (r.metric, r.comparator, r.share) == key and r.adjustment == a]
                    cells.append(f"{_cell(hit[0]) if hit else '':>22}")
                lines.append(f"{_label(*key):<{label_w}}" + "".join(cells))
        return "\n".join(lines) + "\n"


def _label(metric, comparator, share):
    out = metric
    if comparator:
        out += f" vs {comparator}"
    if not math.isnan(share):
        out += f" @ {share:g}"
    return out


def _cell(r: ReportRow) -> str:
    if math.isnan(r.value):
        return "nan"
    if math.isnan(r.se):
        return f"{r.value:.4g}"
    return f"{r.value:.4g} ({r.se:.2g})"


# --- per-run simulation --------------------------------------------------------

class RunResult(NamedTuple):
    delta: np.ndarray        # (A,) DeltaMSE_W(model, zero) per adjustment
    delta_se: np.ndarray     # (A,) sd of per-row differences / sqrt(N)
    qini: np.ndarray         # (A, S) Q1 value ate_hat * n_w per share
    ate: np.ndarray          # (A, S)
    ate_se: np.ndarray       # (A, S)
    cmp_delta: np.ndarray    # (A, C) DeltaMSE_W(model, comparator)
    true_cmp: np.ndarray     # (C,) test-set truth of the same differences
    true_delta: float        # truth of DeltaMSE_W(model, zero)
    seg_tau: np.ndarray      # (S,) mean tau over each top-s segment
    r2: float                # share of tau variance explained by the model on the test rows


def _evaluate(test: ScoredTestSet, outcomes: dict[str, np.ndarray], shares, comparators, level) -> tuple:
    A, S = len(outcomes), len(shares)
    delta = np.empty(A)
    delta_se = np.empty(A)
    qini = np.empty((A, S))
    ate = np.empty((A, S))
    ate_se = np.empty((A, S))
    cmp_delta = np.empty((A, len(comparators)))
    for i, y in enumerate(outcomes.values()):
        rep = delta_mse_w(test, "model", "zero", y, level)
        delta[i] = rep.delta
        delta_se[i] = (rep.ci[1] - rep.ci[0]) / (2 * z_value(level))
        st = segment_estimates(test, "model", y, shares)
        ate[i] = st[:, 1] - st[:, 4]
        qini[i] = ate[i] * st[:, 0]
        ate_se[i] = np.sqrt(st[:, 2] / st[:, 0] + st[:, 5] / st[:, 3])
        for j, c in enumerate(comparators):
            cmp_delta[i, j] = delta_mse_w(test, "model", c, y, level).delta
    return delta, delta_se, qini, ate, ate_se, cmp_delta


def _truth(test: ScoredTestSet, tau: np.ndarray, shares, comparators):
    err = np.mean((tau - test["model"]) ** 2)
    true_cmp = np.array([err - np.mean((tau - test[c]) ** 2) for c in comparators])
    true_delta = float(err - np.mean(tau ** 2))
    order = np.argsort(-test["model"], kind="stable")
    cuts = [max(1, int(math.floor(s * test.n + 1e-9))) for s in shares]
    seg_tau = np.array([np.mean(tau[order[:m]]) for m in cuts])
    return true_cmp, true_delta, seg_tau


def _scores(tau_hat: np.ndarray, tau: np.ndarray, noise_rng, worse_noise: float) -> dict[str, np.ndarray]:
    sd = float(np.std(tau_hat, ddof=1))
    return {
        "model": tau_hat,
        "zero": np.zeros_like(tau_hat),
        "oracle": tau,
        "trivial": np.zeros_like(tau_hat),
        "worse": tau_hat + noise_rng.normal(0.0, worse_noise * sd, tau_hat.size),
    }


def one_run(world: SimWorld, cfg: StudyConfig, r: int) -> RunResult:
    """Run ``r``: draw data, fit model and adjustments on train, score every adjustment on test."""
    run = sim.simulate_run(world, cfg.n_train, cfg.n_test, cfg.seed, r)
    model = fit_t_learner(run.train, with_seed(cfg.regressor, sim.derive_seed(cfg.seed, r, MODEL)))
    nuis = with_seed(cfg.regressor, sim.derive_seed(cfg.seed, r, NUISANCE))
    outcomes = {m: adjust_outcomes(run.test, fit_adjustment(m, run.train, nuis)) for m in cfg.adjustments}
    tau = run.truth.tau
    tau_hat = model.cate(run.test.X)
    test = ScoredTestSet(run.test, _scores(tau_hat, tau, sim.stream(cfg.seed, r, NOISE), cfg.worse_noise),
                         cate=["model", "zero", "oracle", "trivial", "worse"])
    res = _evaluate(test, outcomes, cfg.shares, cfg.comparators, cfg.level)
    true_cmp, true_delta, seg_tau = _truth(test, tau, cfg.shares, cfg.comparators)
    r2 = 1.0 - float(np.mean((tau - tau_hat) ** 2) / np.var(tau))
    return RunResult(*res, true_cmp, true_delta, seg_tau, r2)


class Runs(NamedTuple):
    """Stacked per-run results for one (world, config) cell."""

    world: SimWorld
    cfg: StudyConfig
    delta: np.ndarray
    delta_se: np.ndarray
    qini: np.ndarray
    ate: np.ndarray
    ate_se: np.ndarray
    cmp_delta: np.ndarray
    true_cmp: np.ndarray
    true_delta: np.ndarray
    seg_tau: np.ndarray
    r2: np.ndarray
    runtime: float


def _stack(world, cfg, results: list[RunResult], runtime: float) -> Runs:
    cols = [np.array([getattr(res, f) for res in results]) for f in RunResult._fields]
    return Runs(world, cfg, *cols, runtime)


def collect_runs(world: SimWorld, cfg: StudyConfig) -> Runs:
    t0 = time.perf_counter()
    results = parallel_map(partial(one_run, world, cfg), list(range(cfg.runs)), cfg.threads)
    return _stack(world, cfg, results, time.perf_counter() - t0)


def _bootstrap_idx(cfg: StudyConfig, runs: int, key: int) -> np.ndarray:
    return sim.stream(cfg.seed, HARNESS, BOOTSTRAP, key).integers(0, runs, (cfg.bootstrap, runs))


def reduction_pct(base: np.ndarray, adj: np.ndarray, idx: np.ndarray | None = None):
    """100 * (1 - Var[adj] / Var[base]) with bootstrap SE and 95% percentile interval over runs."""
    point = 100.0 * (1.0 - np.var(adj, ddof=1) / np.var(base, ddof=1))
    if idx is None:
        return point, math.nan, math.nan, math.nan
    with np.errstate(divide="ignore", invalid="ignore"):
        boot = 100.0 * (1.0 - np.var(adj[idx], axis=1, ddof=1) / np.var(base[idx], axis=1, ddof=1))
    boot = boot[np.isfinite(boot)]
    if boot.size < 2:
        return float(point), math.nan, math.nan, math.nan
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return float(point), float(np.std(boot, ddof=1)), float(lo), float(hi)


def _new_report(study: str, runs: Runs) -> ExperimentReport:
    return ExperimentReport(study, runs.world.setting, runs.world.sigma, runs.cfg.runs, runs.cfg.seed,
                            meta={"n_train": str(runs.cfg.n_train), "n_test": str(runs.cfg.n_test),
                                  "regressor": runs.cfg.regressor,
                                  "mean model R^2 on tau": f"{float(np.mean(runs.r2)):.4f}"},
                            runtime=runs.runtime)


def variance_reduction_study(world: SimWorld, cfg: StudyConfig = StudyConfig(), runs: Runs | None = None) -> ExperimentReport:
    """Across-run variances of DeltaMSE_W(model, 0) and of Q1 values, and their reduction per adjustment."""
    runs = collect_runs(world, cfg) if runs is None else runs
    cfg = runs.cfg
    rep = _new_report("variance_reduction", runs)
    adjs = cfg.adjustments
    base = adjs.index("none")
    R = cfg.runs
    idx = _bootstrap_idx(cfg, R, 0) if R > 1 and cfg.bootstrap > 0 else None
    for a, m in enumerate(adjs):
        d = runs.delta[:, a]
        rep.add("variance", "delta_mse_w", m, value=float(np.var(d, ddof=1)) if R > 1 else math.nan, count=R)
    for a, m in enumerate(adjs):
        if m == "none":
            continue
        rep.add("reduction_pct", "delta_mse_w", m, "", math.nan,
                *reduction_pct(runs.delta[:, base], runs.delta[:, a], idx), count=R)
    ok = np.all(np.isfinite(runs.qini), axis=(1,))
    for k, s in enumerate(cfg.shares):
        good = ok[:, k]
        n_ok = int(good.sum())
        if n_ok < R:
            rep.add("degenerate", "qini", "", "", s, value=float(R - n_ok), count=R)
        for a, m in enumerate(adjs):
            q = runs.qini[good, a, k]
            rep.add("variance", "qini", m, "", s, value=float(np.var(q, ddof=1)) if n_ok > 1 else math.nan, count=n_ok)
        sub_idx = None
        if idx is not None and n_ok == R:
            sub_idx = idx
        elif n_ok > 1 and cfg.bootstrap > 0:
            sub_idx = _bootstrap_idx(cfg, n_ok, 1 + k)
        for a, m in enumerate(adjs):
            if m == "none" or n_ok < 2:
                continue
            rep.add("reduction_pct", "qini", m, "", s,
                    *reduction_pct(runs.qini[good, base, k], runs.qini[good, a, k], sub_idx), count=n_ok)
    return rep


def misleading_share_study(world: SimWorld, cfg: StudyConfig = StudyConfig(), runs: Runs | None = None) -> ExperimentReport:
    """Share of runs where DeltaMSE_W(model, comparator) has the opposite sign to its test-set truth.

    Exact zeros on either side are ties and never count as misleading.
    """
    runs = collect_runs(world, cfg) if runs is None else runs
    cfg = runs.cfg
    rep = _new_report("misleading_share", runs)
    rep.meta["truth"] = "test-set empirical mean of (tau - tau_hat)^2"
    R = cfg.runs
    for j, c in enumerate(cfg.comparators):
        truth = runs.true_cmp[:, j]
        for a, m in enumerate(cfg.adjustments):
            mis = np.sign(runs.cmp_delta[:, a, j]) * np.sign(truth) < 0
            share = float(np.mean(mis))
            rep.add("misleading_pct", "delta_mse_w", m, c, value=100.0 * share,
                    se=100.0 * math.sqrt(share * (1.0 - share) / R), count=int(mis.sum()))
        for a, m in enumerate(cfg.adjustments):
            rep.add("variance", "delta_mse_w", m, c,
                    value=float(np.var(runs.cmp_delta[:, a, j], ddof=1)) if R > 1 else math.nan, count=R)
    return rep


def sim_study(world: SimWorld, cfg: StudyConfig = StudyConfig()) -> list[ExperimentReport]:
    """Both studies from one set of runs."""
    runs = collect_runs(world, cfg)
    return [variance_reduction_study(world, cfg, runs), misleading_share_study(world, cfg, runs)]


# --- fixed-model harness: unbiasedness and coverage -------------------------------

class FixedModel(NamedTuple):
    world: SimWorld
    model: object
    adjustments: dict
    pop_delta: float          # population DeltaMSE_W(model, zero) truth


class FixedRun(NamedTuple):
    delta: np.ndarray      # (A,)
    delta_se: np.ndarray   # (A,)
    ate: np.ndarray        # (A, S)
    ate_se: np.ndarray     # (A, S)
    true_delta: float      # test-set empirical truth
    seg_tau: np.ndarray    # (S,)


def fit_fixed_model(world: SimWorld, cfg: StudyConfig) -> FixedModel:
    """Calibrate the world, then fit model and adjustments once on a dedicated training draw."""
    if not world.calibrated:
        world = sim.calibrate(world)
    train, _ = sim.generate(world, cfg.n_train, sim.stream(cfg.seed, HARNESS, DATA))
    model = fit_t_learner(train, with_seed(cfg.regressor, sim.derive_seed(cfg.seed, HARNESS, MODEL)))
    nuis = with_seed(cfg.regressor, sim.derive_seed(cfg.seed, HARNESS, NUISANCE))
    adjustments = {m: fit_adjustment(m, train, nuis) for m in cfg.adjustments}
    rng = sim.stream(cfg.seed, HARNESS, REFERENCE)
    X = sim.draw_features(world, cfg.reference_n, rng)
    _, tau = sim.true_effects(world, X)
    pop = float(np.mean((tau - model.cate(X)) ** 2) - np.mean(tau ** 2))
    return FixedModel(world, model, adjustments, pop)


def fixed_run(fm: FixedModel, cfg: StudyConfig, r: int) -> FixedRun:
    test, truth = sim.generate(fm.world, cfg.n_test, sim.stream(cfg.seed, r, DATA))
    tau_hat = fm.model.cate(test.X)
    ts = ScoredTestSet(test, {"model": tau_hat, "zero": np.zeros_like(tau_hat)})
    outcomes = {m: adjust_outcomes(test, f) for m, f in fm.adjustments.items()}
    delta, delta_se, _, ate, ate_se, _ = _evaluate(ts, outcomes, cfg.shares, (), cfg.level)
    _, true_delta, seg_tau = _truth(ts, truth.tau, cfg.shares, ())
    return FixedRun(delta, delta_se, ate, ate_se, true_delta, seg_tau)


class FixedRuns(NamedTuple):
    fm: FixedModel
    cfg: StudyConfig
    delta: np.ndarray
    delta_se: np.ndarray
    ate: np.ndarray
    ate_se: np.ndarray
    true_delta: np.ndarray
    seg_tau: np.ndarray
    runtime: float


def collect_fixed_runs(world: SimWorld, cfg: StudyConfig) -> FixedRuns:
    t0 = time.perf_counter()
    fm = fit_fixed_model(world, cfg)
    results = parallel_map(partial(fixed_run, fm, cfg), list(range(cfg.runs)), cfg.threads)
    cols = [np.array([getattr(res, f) for res in results]) for f in FixedRun._fields]
    return FixedRuns(fm, cfg, *cols, time.perf_counter() - t0)


def _fixed_report(study: str, fr: FixedRuns) -> ExperimentReport:
    w = fr.fm.world
    return ExperimentReport(study, w.setting, w.sigma, fr.cfg.runs, fr.cfg.seed,
                            meta={"n_train": str(fr.cfg.n_train), "n_test": str(fr.cfg.n_test),
                                  "regressor": fr.cfg.regressor, "design": "model and adjustments fitted once; test sets redrawn",
                                  "population delta_mse_w truth": f"{fr.fm.pop_delta:.6g}"},
                            runtime=fr.runtime)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = x[np.isfinite(x)]
    if x.size < 2:
        return math.nan, math.nan
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def unbiasedness_study(world: SimWorld, cfg: StudyConfig = StudyConfig(runs=2000), runs: FixedRuns | None = None) -> ExperimentReport:
    """Mean metric error against the truth, per adjustment.

    ``error`` rows pair each run's metric with that test set's own truth
    (mean of (tau - tau_hat)^2 - tau^2, or the segment mean of tau);
    ``error_pop`` rows compare DeltaMSE_W with the population truth.
    Unbiased metrics have |value| < 3 se.
    """
    fr = collect_fixed_runs(world, cfg) if runs is None else runs
    rep = _fixed_report("unbiasedness", fr)
    for a, m in enumerate(fr.cfg.adjustments):
        v, se = _mean_se(fr.delta[:, a] - fr.true_delta)
        rep.add("error", "delta_mse_w", m, value=v, se=se, count=fr.cfg.runs)
        v, se = _mean_se(fr.delta[:, a] - fr.fm.pop_delta)
        rep.add("error_pop", "delta_mse_w", m, value=v, se=se, count=fr.cfg.runs)
        for k, s in enumerate(fr.cfg.shares):
            err = fr.ate[:, a, k] - fr.seg_tau[:, k]
            v, se = _mean_se(err)
            rep.add("error", "ate_hat", m, "", s, v, se, count=int(np.isfinite(err).sum()))
    return rep


def ci_coverage_study(world: SimWorld, cfg: StudyConfig = StudyConfig(runs=2000), runs: FixedRuns | None = None) -> ExperimentReport:
    """Coverage (%) of the DeltaMSE_W interval (population truth) and decile ate_hat intervals (segment mean tau),
    plus the mean interval width per adjustment."""
    fr = collect_fixed_runs(world, cfg) if runs is None else runs
    rep = _fixed_report("ci_coverage", fr)
    z = z_value(fr.cfg.level)
    R = fr.cfg.runs

    def cover(est, se, truth):
        ok = np.isfinite(se)
        hit = np.abs(est[ok] - truth[ok]) <= z * se[ok]
        share = float(np.mean(hit)) if hit.size else math.nan
        return 100.0 * share, 100.0 * math.sqrt(share * (1 - share) / max(hit.size, 1)), int(hit.size)

    for a, m in enumerate(fr.cfg.adjustments):
        pct, se, n = cover(fr.delta[:, a], fr.delta_se[:, a], np.full(R, fr.fm.pop_delta))
        rep.add("coverage_pct", "delta_mse_w", m, value=pct, se=se, count=n)
        rep.add("mean_width", "delta_mse_w", m, value=float(np.mean(2 * z * fr.delta_se[:, a])), count=R)
        for k, s in enumerate(fr.cfg.shares):
            pct, se, n = cover(fr.ate[:, a, k], fr.ate_se[:, a, k], fr.seg_tau[:, k])
            rep.add("coverage_pct", "ate_hat", m, "", s, pct, se, count=n)
            w = 2 * z * fr.ate_se[:, a, k]
            rep.add("mean_width", "ate_hat", m, "", s, value=float(np.nanmean(w)), count=int(np.isfinite(w).sum()))
    return rep


# --- tau-risk demonstration -----------------------------------------------------------

def _tau_risk_run(world: SimWorld, cfg: StudyConfig, r: int) -> tuple[float, float, float, float]:
    run = sim.simulate_run(world, cfg.n_train, cfg.n_test, cfg.seed, r)
    mu_hat = make_regressor(with_seed(cfg.regressor, sim.derive_seed(cfg.seed, r, NUISANCE))).fit(run.train.X, run.train.Y)
    p = run.test.p
    tau = run.truth.tau
    path = (mu_hat.predict(run.test.X) - run.truth.mu) / p
    ts = ScoredTestSet(run.test, {"oracle": tau, "pathological": path, "mirror": 2 * tau - path})
    return (mse_tau(ts, "oracle", mu_hat), mse_tau(ts, "pathological", mu_hat), mse_tau(ts, "mirror", mu_hat),
            float(np.mean((tau - path) ** 2)))


def tau_risk_study(world: SimWorld, cfg: StudyConfig = StudyConfig(runs=500)) -> ExperimentReport:
    """How often the tau-risk ranks the estimator (mu_hat(x) - mu_x) / p ahead of the true effect.

    ``mirror`` has the same squared error as the pathological estimator but
    the opposite sign, which isolates the role of the mu_hat residual.
    """
    t0 = time.perf_counter()
    res = np.array(parallel_map(partial(_tau_risk_run, world, cfg), list(range(cfg.runs)), cfg.threads))
    rep = ExperimentReport("tau_risk", world.setting, world.sigma, cfg.runs, cfg.seed,
                           meta={"n_train": str(cfg.n_train), "n_test": str(cfg.n_test), "regressor": cfg.regressor},
                           runtime=time.perf_counter() - t0)
    R = cfg.runs
    for name, col in (("oracle", 0), ("pathological", 1), ("mirror", 2)):
        v, se = _mean_se(res[:, col])
        rep.add("mean", "mse_tau", comparator=name, value=v, se=se, count=R)
    wins = res[:, 1] < res[:, 0]
    share = float(np.mean(wins))
    rep.add("preferred_pct", "mse_tau", comparator="pathological_over_oracle", value=100.0 * share,
            se=100.0 * math.sqrt(share * (1 - share) / R), count=int(wins.sum()))
    wins = res[:, 1] < res[:, 2]
    share = float(np.mean(wins))
    rep.add("preferred_pct", "mse_tau", comparator="pathological_over_mirror", value=100.0 * share,
            se=100.0 * math.sqrt(share * (1 - share) / R), count=int(wins.sum()))
    v, se = _mean_se(res[:, 3])
    rep.add("mean", "true_mse", comparator="pathological", value=v, se=se, count=R)
    return rep


# --- real data ---------------------------------------------------------------------------

def _real_split(ds: RctDataset, cfg: StudyConfig, test_fraction: float, r: int):
    train, test = split(ds, test_fraction, sim.derive_seed(cfg.seed, r, DATA)).apply(ds)
    model = fit_t_learner(train, with_seed(cfg.regressor, sim.derive_seed(cfg.seed, r, MODEL)))
    nuis = with_seed(cfg.regressor, sim.derive_seed(cfg.seed, r, NUISANCE))
    outcomes = {m: adjust_outcomes(test, fit_adjustment(m, train, nuis)) for m in cfg.adjustments}
    tau_hat = model.cate(test.X)
    ts = ScoredTestSet(test, {"model": tau_hat, "zero": np.zeros_like(tau_hat)})
    delta, delta_se, _, ate, ate_se, _ = _evaluate(ts, outcomes, cfg.shares, (), cfg.level)
    return delta, delta_se, ate, ate_se


def real_data_study(ds: RctDataset, cfg: StudyConfig = StudyConfig(runs=1), test_fraction: float = 0.2,
                    name: str = "csv") -> ExperimentReport:
    """Variance reduction on one dataset, estimated from interval-based variances.

    Each of ``cfg.runs`` random splits gives squared standard errors per
    adjustment; reductions compare their averages with the unadjusted ones.
    """
    t0 = time.perf_counter()
    res = parallel_map(partial(_real_split, ds, cfg, test_fraction), list(range(cfg.runs)), cfg.threads)
    delta = np.array([r[0] for r in res])
    var_d = np.array([r[1] for r in res]) ** 2
    ate = np.array([r[2] for r in res])
    var_q = np.array([r[3] for r in res]) ** 2
    rep = ExperimentReport("real_data_variance", name, math.nan, cfg.runs, cfg.seed,
                           meta={"n": str(ds.n), "p": fmt(ds.p), "test_fraction": fmt(test_fraction),
                                 "regressor": cfg.regressor, "variance": "squared standard error of each metric"},
                           runtime=time.perf_counter() - t0)
    base = cfg.adjustments.index("none")
    for a, m in enumerate(cfg.adjustments):
        rep.add("estimate", "delta_mse_w", m, value=float(np.mean(delta[:, a])), se=float(np.sqrt(np.mean(var_d[:, a]))),
                count=cfg.runs)
        if m != "none":
            rep.add("reduction_pct", "delta_mse_w", m,
                    value=float(100.0 * (1.0 - np.mean(var_d[:, a]) / np.mean(var_d[:, base]))), count=cfg.runs)
        for k, s in enumerate(cfg.shares):
            rep.add("estimate", "ate_hat", m, "", s, float(np.nanmean(ate[:, a, k])),
                    float(np.sqrt(np.nanmean(var_q[:, a, k]))), count=cfg.runs)
            if m != "none":
                rep.add("reduction_pct", "qini", m, "", s,
                        float(100.0 * (1.0 - np.nanmean(var_q[:, a, k]) / np.nanmean(var_q[:, base, k]))), count=cfg.runs)
    return rep


STUDIES = ("variance", "misleading", "sim", "coverage", "unbiasedness", "tau_risk", "real")


def with_runs(cfg: StudyConfig, runs: int) -> StudyConfig:
    return replace(cfg, runs=runs)
