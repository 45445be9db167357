"""Command-line entry point: simulate, adjust, evaluate, qini, study.

Every option may also come from ``--config FILE`` (flat ``key=value`` lines,
``#`` comments). Command-line flags win over the file; unknown keys are
rejected. Exit status is 0 on success, 1 on a hard error and 2 on bad usage.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import experiments, metrics, sim
from .data import ColumnSpec, RctDataset, ScoredTestSet, fmt, load_csv, numeric_column, read_table, write_csv, write_rows
from .errors import UpliftEvalError
from .learners import DEFAULT_REGRESSOR
from .plot import write_svg
from .transform import METHODS, adjust_outcomes, fit_adjustment

TRUTH_COLS = ("mu_true", "tau_true")


class UsageError(Exception):
    pass


def _shared(p: argparse.ArgumentParser, *names: str) -> None:
    opts = {
        "input": dict(help="input CSV"),
        "train": dict(help="training CSV (nuisance fits)"),
        "test": dict(help="test CSV"),
        "y_col": dict(help="outcome column (default y)"),
        "w_col": dict(help="treatment column (default w)"),
        "score_cols": dict(help="comma-separated score columns"),
        "p": dict(type=float, help="design treatment probability"),
        "method": dict(choices=METHODS, help="outcome adjustment (default none)"),
        "regressor": dict(help=f"nuisance/model regressor config (default {DEFAULT_REGRESSOR})"),
        "shares": dict(help="deciles, percent, or a comma-separated list of shares"),
        "variant": dict(type=str.upper, choices=metrics.VARIANTS, help="Qini variant (default Q1)"),
        "seed": dict(type=int, help="base seed (default 0)"),
        "ci_level": dict(type=float, help="confidence level (default 0.95)"),
        "runs": dict(type=int, help="Monte-Carlo runs"),
        "out": dict(help="output path"),
        "svg": dict(help="optional SVG chart path"),
        "setting": dict(choices=sim.SETTINGS, help="simulation world (default aw)"),
        "sigma": dict(type=float, help="noise sd (default 1)"),
        "n_train": dict(type=int, help="training rows per run (default 2000)"),
        "n_test": dict(type=int, help="test rows per run (default 1000)"),
        "allow_overlap": dict(action="store_const", const=True, help="permit nuisance fits on test rows (demonstrates bias)"),
        "study": dict(choices=experiments.STUDIES, help="which study to run (default sim)"),
        "test_fraction": dict(type=float, help="test share for real-data splits (default 0.2)"),
        "features": dict(help="comma-separated feature columns (default: all other columns)"),
    }
    for name in names:
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, **opts[name])


DEFAULTS = {
    "y_col": "y", "w_col": "w", "method": "none", "regressor": DEFAULT_REGRESSOR, "shares": "deciles",
    "variant": "Q1", "seed": 0, "ci_level": 0.95, "setting": "aw", "sigma": 1.0, "n_train": 2000,
    "n_test": 1000, "allow_overlap": False, "study": "sim", "test_fraction": 0.2, "runs": None,
}

COMMANDS = {
    "simulate": ("setting", "sigma", "n_train", "n_test", "seed", "runs", "out"),
    "adjust": ("train", "test", "y_col", "w_col", "features", "p", "method", "regressor", "seed", "out", "allow_overlap"),
    "evaluate": ("input", "train", "y_col", "w_col", "features", "score_cols", "p", "method", "regressor", "seed",
                 "ci_level", "out", "allow_overlap"),
    "qini": ("input", "train", "y_col", "w_col", "features", "score_cols", "p", "method", "regressor", "seed",
             "shares", "variant", "ci_level", "out", "svg", "allow_overlap"),
    "study": ("study", "setting", "sigma", "n_train", "n_test", "runs", "seed", "regressor", "shares", "ci_level",
              "out", "input", "y_col", "w_col", "features", "p", "test_fraction"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uplift-eval", description="Variance-reduced evaluation of uplift models on RCT data.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "write simulated train/test CSVs with truth columns mu_true, tau_true",
        "adjust": "append an adjusted outcome column y_adj_<method> to a test CSV",
        "evaluate": "transformed-outcome MSE of two scores and their difference with an interval",
        "qini": "Qini / uplift curve of one score, as CSV and optional SVG",
        "study": "Monte-Carlo or real-data study; prints a table and writes a CSV",
    }
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="flat key=value file; flags override it")
        _shared(p, *opts)
    return parser


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}: line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def resolve(parser: argparse.ArgumentParser, args: argparse.Namespace) -> argparse.Namespace:
    """Merge flags over config file over defaults, converting config strings like the flags do."""
    allowed = COMMANDS[args.command]
    conf = read_config(args.config) if args.config else {}
    unknown = sorted(set(conf) - set(allowed))
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    for key in allowed:
        if getattr(args, key) is not None:
            continue
        if key in conf:
            raw = conf[key]
            act = actions[key]
            if key == "allow_overlap":
                value = raw.lower() in ("1", "true", "yes", "on")
            else:
                value = act.type(raw) if act.type else raw
                if act.choices is not None and value not in act.choices:
                    raise UsageError(f"config {key}={raw!r}: choose from {', '.join(map(str, act.choices))}")
            setattr(args, key, value)
        else:
            setattr(args, key, DEFAULTS.get(key))
    return args


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _split_list(s: str | None) -> list[str]:
    return [c.strip() for c in s.split(",") if c.strip()] if s else []


def _schema(args, header: list[str], extra_exclude=()) -> ColumnSpec:
    features = tuple(_split_list(args.features)) or None
    exclude = set(TRUTH_COLS) | set(extra_exclude) | {h for h in header if h.startswith("y_adj_")}
    if args.y_col != DEFAULTS["y_col"]:
        exclude.add(DEFAULTS["y_col"])
    return ColumnSpec(args.y_col, args.w_col, features, tuple(sorted(exclude)), args.p)


def _load(path, args, extra_exclude=()) -> tuple[RctDataset, list[str], list[list[str]]]:
    header, rows = read_table(path)
    ds = load_csv(path, _schema(args, header, extra_exclude), args.p)
    return ds, header, rows


def _adjusted(args, test: RctDataset, exclude=()) -> np.ndarray | None:
    if args.method == "none":
        return None
    _need(args, "train")
    train, _, _ = _load(args.train, args, exclude)
    if train.feature_names != test.feature_names:
        raise UsageError(f"train features {train.feature_names} differ from test features {test.feature_names}")
    f = fit_adjustment(args.method, train, args.regressor)
    return adjust_outcomes(test, f, allow_overlap=args.allow_overlap)


def cmd_simulate(args) -> int:
    _need(args, "out")
    world = sim.SimWorld(args.setting, args.sigma)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = args.runs or 1
    for r in range(runs):
        run = sim.simulate_run(world, args.n_train, args.n_test, args.seed, r)
        # truth for train rows: regenerate the batch truth, which simulate_run keeps only for test rows
        _, truth = sim.generate(world, args.n_train + args.n_test, sim.stream(args.seed, r, sim.DATA))
        suffix = "" if runs == 1 else f"_{r}"
        n = args.n_train
        write_csv(run.train, out / f"train{suffix}.csv", {"mu_true": truth.mu[:n], "tau_true": truth.tau[:n]})
        write_csv(run.test, out / f"test{suffix}.csv", {"mu_true": truth.mu[n:], "tau_true": truth.tau[n:]})
    print(f"wrote {runs} train/test pair(s) to {out}", file=sys.stderr)
    return 0


def cmd_adjust(args) -> int:
    _need(args, "train", "test", "p", "out")
    if args.method == "none":
        raise UsageError("--method must be one of uc, cond, dr")
    test, header, rows = _load(args.test, args)
    train, _, _ = _load(args.train, args)
    if train.feature_names != test.feature_names:
        raise UsageError(f"train features {train.feature_names} differ from test features {test.feature_names}")
    f = fit_adjustment(args.method, train, args.regressor)
    if args.method == "uc":
        print(f"uc constant: {fmt(f.constant)}", file=sys.stderr)
    y_adj = adjust_outcomes(test, f, allow_overlap=args.allow_overlap)
    col = f"y_adj_{args.method}"
    if col in header:
        j = header.index(col)
        body = [[*row[:j], *row[j + 1:], fmt(v)] for row, v in zip(rows, y_adj.tolist())]
        header = [*header[:j], *header[j + 1:], col]
    else:
        body = [[*row, fmt(v)] for row, v in zip(rows, y_adj.tolist())]
        header = [*header, col]
    write_rows(args.out, header, body)
    return 0


def _scored(args, n_scores: int | None) -> tuple[ScoredTestSet, list[str], np.ndarray | None]:
    _need(args, "input", "p", "score_cols")
    cols = _split_list(args.score_cols)
    if n_scores is not None and len(cols) != n_scores:
        raise UsageError(f"--score-cols needs exactly {n_scores} column(s), got {len(cols)}")
    header, rows = read_table(args.input)
    ds = load_csv(args.input, _schema(args, header, cols), args.p)
    scores = {c: numeric_column(header, rows, c, args.input) for c in cols}
    test = ScoredTestSet(ds, scores)
    return test, cols, _adjusted(args, ds, cols)


def cmd_evaluate(args) -> int:
    _need(args, "out")
    test, cols, y = _scored(args, 2)
    label = args.method if args.method != "none" else (args.y_col if args.y_col != "y" else "none")
    rep = metrics.delta_mse_w(test, cols[0], cols[1], y, args.ci_level, adjustment=label)
    for note in rep.warnings:
        print(f"warning: {note}", file=sys.stderr)
    write_csv(rep, args.out)
    print(f"delta_mse_w = {fmt(rep.delta)}  ci = [{fmt(rep.ci[0])}, {fmt(rep.ci[1])}]", file=sys.stderr)
    return 0


def cmd_qini(args) -> int:
    _need(args, "out")
    test, cols, y = _scored(args, 1)
    label = args.method if args.method != "none" else (args.y_col if args.y_col != "y" else "none")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        curve = metrics.qini_curve(test, cols[0], y, args.shares, args.variant, args.ci_level, adjustment=label)
        curves = [curve]
        if y is not None and args.svg:
            curves.insert(0, metrics.qini_curve(test, cols[0], None, args.shares, args.variant, args.ci_level))
    for note in curve.warnings:
        print(f"warning: {note}", file=sys.stderr)
    write_csv(curve, args.out)
    if args.svg:
        write_svg(curves, args.svg, title=f"{args.variant} curve of {cols[0]}")
    return 0


def cmd_study(args) -> int:
    shares = metrics.resolve_shares(args.shares)
    study = args.study
    if study == "real":
        _need(args, "input", "p")
        header, _ = read_table(args.input)
        ds = load_csv(args.input, _schema(args, header), args.p)
        cfg = experiments.StudyConfig(runs=args.runs or 1, seed=args.seed, regressor=args.regressor,
                                      shares=shares, level=args.ci_level)
        reports = [experiments.real_data_study(ds, cfg, args.test_fraction, Path(args.input).name)]
    else:
        world = sim.SimWorld(args.setting, args.sigma)
        default_runs = {"coverage": 2000, "unbiasedness": 2000, "tau_risk": 500}.get(study, 1000)
        cfg = experiments.StudyConfig(runs=args.runs or default_runs, n_train=args.n_train, n_test=args.n_test,
                                      seed=args.seed, regressor=args.regressor, shares=shares, level=args.ci_level)
        if study in ("variance", "misleading", "sim"):
            runs = experiments.collect_runs(world, cfg)
            reports = []
            if study in ("variance", "sim"):
                reports.append(experiments.variance_reduction_study(world, cfg, runs))
            if study in ("misleading", "sim"):
                reports.append(experiments.misleading_share_study(world, cfg, runs))
        elif study in ("coverage", "unbiasedness"):
            fr = experiments.collect_fixed_runs(world, cfg)
            fn = experiments.ci_coverage_study if study == "coverage" else experiments.unbiasedness_study
            reports = [fn(world, cfg, fr)]
        else:
            reports = [experiments.tau_risk_study(world, cfg)]
    for rep in reports:
        sys.stdout.write(rep.text_table())
        print(f"runtime: {rep.runtime:.1f}s", file=sys.stderr)
    if args.out:
        header = list(experiments.ExperimentReport.COLUMNS)
        write_rows(args.out, header, [row for rep in reports for row in rep.csv_rows()[1]])
    return 0


HANDLERS = {"simulate": cmd_simulate, "adjust": cmd_adjust, "evaluate": cmd_evaluate, "qini": cmd_qini, "study": cmd_study}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = resolve(parser, args)
        return HANDLERS[args.command](args)
    except UsageError as e:
        print(f"uplift-eval {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (UpliftEvalError, ValueError, OSError) as e:
        print(f"uplift-eval {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
