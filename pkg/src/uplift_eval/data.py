"""RCT datasets, train/test splits and CSV ingestion/emission."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataValidationError, SchemaError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(h: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    with np.errstate(over="ignore"):
        h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return h ^ (h >> np.uint64(31))


def row_keys(X: np.ndarray, W: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """64-bit content keys for each row, made unique within the table.

    Identical rows get distinct keys by folding in their occurrence number, so
    a duplicated record inside one file never collides with itself. The same
    record appearing in two different files does collide, which is what the
    cross-fitting check relies on.
    """
    cols = np.column_stack([np.asarray(X, dtype=np.float64), np.asarray(W, dtype=np.float64),
                            np.asarray(Y, dtype=np.float64)])
    bits = np.ascontiguousarray(cols).view(np.uint64)
    h = np.full(cols.shape[0], _GOLDEN, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j in range(bits.shape[1]):
            h = _mix64(h ^ bits[:, j] + np.uint64(j) * _GOLDEN)
        order = np.argsort(h, kind="stable")
        hs = h[order]
        starts = np.r_[0, np.flatnonzero(hs[1:] != hs[:-1]) + 1]
        run_id = np.repeat(np.arange(starts.size), np.diff(np.r_[starts, hs.size]))
        occurrence = np.empty(h.size, dtype=np.uint64)
        occurrence[order] = (np.arange(h.size) - starts[run_id]).astype(np.uint64)
        return _mix64(h ^ (occurrence * _GOLDEN))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class RctDataset:
    """Outcomes of a randomized trial with a fixed, known treatment probability ``p``.

    ``p`` is the design probability of the trial. It is never estimated from ``W``.
    """

    X: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    p: float
    feature_names: tuple[str, ...] = ()
    keys: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataValidationError(f"X must be a non-empty N x d matrix, got shape {X.shape}")
        n = X.shape[0]
        W_raw = np.asarray(self.W)
        Y = np.asarray(self.Y, dtype=np.float64).ravel()
        if W_raw.shape != (n,) or Y.shape != (n,):
            raise DataValidationError(f"W and Y must have length {n}, got {W_raw.shape} and {Y.shape}")
        bad = np.flatnonzero((W_raw != 0) & (W_raw != 1))
        if bad.size:
            raise DataValidationError(f"treatment must be 0 or 1; row {bad[0]} has {W_raw[bad[0]]!r}")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Y)):
            raise DataValidationError("X and Y must be finite")
        p = float(self.p)
        if not 0.0 < p < 1.0:
            raise DataValidationError(f"treatment probability p must lie in (0, 1), got {p}")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1] or len(set(names)) != len(names):
            raise DataValidationError("feature_names must be unique and match the column count")
        W = W_raw.astype(np.int64)
        keys = row_keys(X, W, Y) if self.keys is None else np.asarray(self.keys, dtype=np.uint64)
        if keys.shape != (n,):
            raise DataValidationError("keys must have one entry per row")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "W", _frozen(W))
        object.__setattr__(self, "Y", _frozen(Y))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "keys", _frozen(keys))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, indices) -> "RctDataset":
        """Rows at ``indices``; row keys travel with the rows."""
        idx = np.asarray(indices, dtype=np.int64)
        return RctDataset(self.X[idx], self.W[idx], self.Y[idx], self.p, self.feature_names, self.keys[idx])

    def with_outcome(self, y: np.ndarray) -> "RctDataset":
        return RctDataset(self.X, self.W, y, self.p, self.feature_names, self.keys)

    def arm(self, treated: bool) -> "RctDataset":
        return self.subset(np.flatnonzero(self.W == int(treated)))

    def __eq__(self, other):
        if not isinstance(other, RctDataset):
            return NotImplemented
        return (
            self.p == other.p
            and self.feature_names == other.feature_names
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.W, other.W)
            and np.array_equal(self.Y, other.Y)
        )

    __hash__ = None


@dataclass(frozen=True)
class Split:
    train_indices: np.ndarray
    test_indices: np.ndarray

    def apply(self, ds: RctDataset) -> tuple[RctDataset, RctDataset]:
        return ds.subset(self.train_indices), ds.subset(self.test_indices)

    def __eq__(self, other):
        if not isinstance(other, Split):
            return NotImplemented
        return (np.array_equal(self.train_indices, other.train_indices)
                and np.array_equal(self.test_indices, other.test_indices))

    __hash__ = None


def split(ds: RctDataset, test_fraction: float, seed: int) -> Split:
    """Uniform random train/test partition (not stratified by arm), deterministic in ``seed``."""
    n = ds.n
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if n * test_fraction < 1 or n * (1 - test_fraction) < 1:
        raise ValueError(f"cannot split {n} rows with test_fraction={test_fraction}")
    n_test = min(max(int(round(n * test_fraction)), 1), n - 1)
    perm = np.random.Generator(np.random.Philox(seed)).permutation(n)
    return Split(np.sort(perm[n_test:]), np.sort(perm[:n_test]))


class ScoredTestSet:
    """A test dataset together with one or more named score vectors.

    ``cate`` lists the scores that are CATE estimates. Scores outside it may
    still rank rows but get flagged when fed to the transformed-outcome MSE.
    """

    def __init__(self, dataset: RctDataset, scores: Mapping[str, np.ndarray], cate: Iterable[str] | None = None):
        self.dataset = dataset
        self.scores = {}
        for name, s in scores.items():
            s = np.asarray(s, dtype=np.float64).ravel()
            if s.shape != (dataset.n,):
                raise DataValidationError(f"score {name!r} has length {s.size}, expected {dataset.n}")
            if not np.all(np.isfinite(s)):
                raise DataValidationError(f"score {name!r} contains non-finite values")
            s.flags.writeable = False
            self.scores[str(name)] = s
        self.cate = frozenset(self.scores) if cate is None else frozenset(cate)
        unknown = self.cate - set(self.scores)
        if unknown:
            raise DataValidationError(f"cate names unknown scores: {sorted(unknown)}")

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.scores[name]
        except KeyError:
            raise KeyError(f"no score named {name!r}; have {sorted(self.scores)}") from None

    @property
    def n(self) -> int:
        return self.dataset.n


# --- CSV -------------------------------------------------------------------

@dataclass(frozen=True)
class ColumnSpec:
    """Names of the outcome, treatment and feature columns in a CSV header.

    With ``features=None`` every column that is not the outcome, the treatment
    or listed in ``exclude`` is a feature.
    """

    y: str = "y"
    w: str = "w"
    features: tuple[str, ...] | None = None
    exclude: tuple[str, ...] = ()
    p: float | None = None


def read_table(path) -> tuple[list[str], list[list[str]]]:
    """Header and raw string cells of a comma-separated UTF-8 file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        if len(set(header)) != len(header):
            raise SchemaError(f"{path}: duplicate column names in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataValidationError(f"{path}: line {lineno} has {len(row)} cells, header has {len(header)}")
            rows.append(row)
    return header, rows


def numeric_column(header: Sequence[str], rows: Sequence[Sequence[str]], name: str, path="") -> np.ndarray:
    if name not in header:
        raise SchemaError(f"{path}: missing column {name!r}; available: {', '.join(header)}")
    j = header.index(name)
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        try:
            out[i] = float(row[j])
        except ValueError:
            raise DataValidationError(f"{path}: line {i + 2}, column {name!r}: cannot parse {row[j]!r}") from None
        if not math.isfinite(out[i]):
            raise DataValidationError(f"{path}: line {i + 2}, column {name!r}: non-finite value {row[j]!r}")
    return out


def load_csv(path, schema: ColumnSpec = ColumnSpec(), p: float | None = None) -> RctDataset:
    """Read an RCT dataset; every feature cell must be numeric."""
    p = schema.p if p is None else p
    if p is None:
        raise SchemaError("treatment probability p must be supplied (it is a design constant, not estimated)")
    header, rows = read_table(path)
    if not rows:
        raise DataValidationError(f"{path}: no data rows")
    y = numeric_column(header, rows, schema.y, path)
    w = numeric_column(header, rows, schema.w, path)
    bad = np.flatnonzero((w != 0) & (w != 1))
    if bad.size:
        raise DataValidationError(f"{path}: line {bad[0] + 2}: treatment value {rows[bad[0]][header.index(schema.w)]!r} not in {{0, 1}}")
    if schema.features is None:
        skip = {schema.y, schema.w, *schema.exclude}
        features = [h for h in header if h not in skip]
    else:
        features = list(schema.features)
    if not features:
        raise SchemaError(f"{path}: no feature columns")
    X = np.column_stack([numeric_column(header, rows, f, path) for f in features])
    if not 0.0 < p < 1.0:
        raise DataValidationError(f"treatment probability p must lie in (0, 1), got {p}")
    return RctDataset(X, w.astype(np.int64), y, p, tuple(features))


def fmt(v) -> str:
    """Render a cell: integers as-is, floats as the shortest string that parses back to the same bits."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_csv(obj, path, extra: Mapping[str, np.ndarray] | None = None, y_col: str = "y", w_col: str = "w") -> None:
    """Write a dataset (plus optional extra columns), or any object exposing ``csv_rows()``.

    Datasets are written as ``y, w, <features>, <extra>``. Curves and reports
    supply their own fixed column order through ``csv_rows()``.
    """
    path = Path(path)
    if isinstance(obj, RctDataset):
        extra = dict(extra or {})
        for name, col in extra.items():
            if np.shape(col) != (obj.n,):
                raise DataValidationError(f"extra column {name!r} must have {obj.n} entries")
        header = [y_col, w_col, *obj.feature_names, *extra]
        cols = [obj.Y, obj.W, *obj.X.T, *(np.asarray(c) for c in extra.values())]
        rows = zip(*(c.tolist() for c in cols))
        write_rows(path, header, rows)
        return
    if not hasattr(obj, "csv_rows"):
        raise TypeError(f"cannot write {type(obj).__name__} as CSV")
    header, rows = obj.csv_rows()
    write_rows(path, header, rows)
