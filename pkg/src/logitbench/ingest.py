"""CSV ingestion, predictor processing, and fold construction.

A loaded table goes through two stages: `load_dataset` parses the CSV and
infers column kinds, `process_predictors` dummy-codes factors, standardizes
continuous columns, and drops degenerate columns, producing an immutable
`Dataset` ready for the fitting code.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDesign, IngestError, OutcomeNotBinary

MISSING_TOKENS = {"", "na", "n/a", "nan", "null", "none"}
NEAR_ZERO_VARIANCE = 1e-20


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # "numeric" | "categorical" | "outcome"


@dataclass
class RawTable:
    """Parsed CSV: string cells plus per-column kind declarations."""

    columns: list[Column]
    rows: list[list[str]]
    outcome: str

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def predictor_columns(self) -> list[Column]:
        return [c for c in self.columns if c.kind != "outcome"]

    def outcome_values(self) -> np.ndarray:
        idx = [c.name for c in self.columns].index(self.outcome)
        raw = [r[idx] for r in self.rows]
        levels = sorted(set(raw))
        if set(levels) <= {"0", "1"} and len(levels) <= 2:
            return np.array([float(v) for v in raw])
        if len(levels) != 2:
            raise OutcomeNotBinary(
                f"outcome column {self.outcome!r} has {len(levels)} distinct values"
            )
        return np.array([float(levels.index(v)) for v in raw])


@dataclass(frozen=True)
class Dataset:
    """Immutable numeric design matrix with a binary outcome."""

    X: np.ndarray
    y: np.ndarray
    names: tuple[str, ...]
    continuous: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        self.X.setflags(write=False)
        self.y.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def rows(self, idx: np.ndarray) -> "Dataset":
        return Dataset(
            self.X[idx].copy(), self.y[idx].copy(), self.names, self.continuous
        )


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _parses_numeric(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_dataset(path: str, outcome: str) -> RawTable:
    """Parse a header-row CSV and infer numeric/categorical column kinds."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise IngestError(f"{path}: empty file") from None
            rows = [r for r in reader if r]
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    if len(set(header)) != len(header):
        raise IngestError(f"{path}: duplicate column names")
    if outcome not in header:
        raise IngestError(f"outcome column {outcome!r} not found in {path}")
    for r in rows:
        if len(r) != len(header):
            raise IngestError(f"{path}: ragged row with {len(r)} cells")

    # Rows with any missing cell are dropped before anything else.
    rows = [r for r in rows if not any(_is_missing(c) for c in r)]
    if not rows:
        raise IngestError(f"{path}: no complete rows")

    columns = []
    for j, name in enumerate(header):
        if name == outcome:
            columns.append(Column(name, "outcome"))
            continue
        numeric = all(_parses_numeric(r[j]) for r in rows)
        columns.append(Column(name, "numeric" if numeric else "categorical"))

    table = RawTable(columns=columns, rows=rows, outcome=outcome)
    table.outcome_values()  # validate binary-codability eagerly
    return table


def _dummy_code(name: str, values: list[str]) -> tuple[list[str], list[np.ndarray]]:
    """Dummy-code a factor; most frequent level (ties lexicographic) is reference."""
    levels = sorted(set(values))
    if len(levels) < 2:
        return [], []
    counts = {lv: values.count(lv) for lv in levels}
    reference = min(levels, key=lambda lv: (-counts[lv], lv))
    names, cols = [], []
    for lv in levels:
        if lv == reference:
            continue
        names.append(f"{name}={lv}")
        cols.append(np.array([1.0 if v == lv else 0.0 for v in values]))
    return names, cols


def process_predictors(raw: RawTable) -> Dataset:
    """Apply dummy coding, near-zero-variance removal, and standardization."""
    y = raw.outcome_values()
    names: list[str] = []
    cols: list[np.ndarray] = []
    cont: list[bool] = []

    col_index = {c.name: i for i, c in enumerate(raw.columns)}
    for col in raw.predictor_columns:
        values = [r[col_index[col.name]] for r in raw.rows]
        if col.kind == "categorical":
            d_names, d_cols = _dummy_code(col.name, values)
            names.extend(d_names)
            cols.extend(d_cols)
            cont.extend([False] * len(d_names))
        else:
            x = np.array([float(v) for v in values])
            uniq = np.unique(x)
            if uniq.size >= 1 and np.var(x) < NEAR_ZERO_VARIANCE:
                continue
            if set(uniq.tolist()) <= {0.0, 1.0}:
                # already a dummy column; keep on the {0,1} scale
                names.append(col.name)
                cols.append(x)
                cont.append(False)
            else:
                names.append(col.name)
                cols.append((x - x.mean()) / x.std())
                cont.append(True)

    # a dummy column can still be constant after row drops
    keep = [j for j, c in enumerate(cols) if np.var(c) >= NEAR_ZERO_VARIANCE]
    names = [names[j] for j in keep]
    cols = [cols[j] for j in keep]
    cont = [cont[j] for j in keep]

    if not cols:
        raise DegenerateDesign("no predictor columns survived processing")
    if len(y) < 4:
        raise IngestError(f"need at least 4 rows, got {len(y)}")

    X = np.column_stack(cols)
    return Dataset(X=X, y=y, names=tuple(names), continuous=tuple(cont))


def make_folds(y: np.ndarray, k: int, seed: int, strict: bool = False) -> np.ndarray:
    """Outcome-stratified fold labels in 1..k, deterministic given seed.

    Within each class the fold sizes differ by at most one; extra members go
    to the folds with the smallest running totals so overall sizes stay
    balanced too.
    """
    y = np.asarray(y)
    n = len(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < 2 * k:
        raise ValueError(f"need n >= 2k, got n={n}, k={k}")

    rng = np.random.default_rng(seed)
    labels = np.zeros(n, dtype=int)
    totals = np.zeros(k, dtype=int)

    classes = sorted(np.unique(y).tolist())
    # larger strata first so their extras are spread before the small ones
    strata = sorted(classes, key=lambda c: -int(np.sum(y == c)))
    for cls in strata:
        idx = np.flatnonzero(y == cls)
        if strict and len(idx) < k:
            raise ValueError(
                f"class {cls} has {len(idx)} members, fewer than k={k} folds"
            )
        rng.shuffle(idx)
        base, rem = divmod(len(idx), k)
        sizes = np.full(k, base, dtype=int)
        if rem:
            # assign extras to the folds with the smallest totals, random ties
            order = np.lexsort((rng.random(k), totals))
            sizes[order[:rem]] += 1
        pos = 0
        for fold in range(k):
            labels[idx[pos : pos + sizes[fold]]] = fold + 1
            pos += sizes[fold]
        totals += sizes
    return labels
