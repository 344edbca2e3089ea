"""Observation tables, validation, CSV ingestion and seeded split plans."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import seeding


class SchemaError(ValueError):
    """Input data violates the observation-table contract."""


def _frozen(v):
    if v is None:
        return None
    arr = np.array(v, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ObservationTable:
    """Covariates, binary treatment and at least one of outcome/surrogate.

    Arrays are copied and made read-only on construction. Construction does
    not validate; call :func:`validate` (CSV ingestion always does).
    """

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray | None = None
    surrogate: np.ndarray | None = None

    def __post_init__(self):
        x = np.array(self.covariates, dtype=np.float64, copy=True)
        if x.ndim == 1:
            x = x[:, None]
        x.setflags(write=False)
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "treatment", _frozen(self.treatment))
        object.__setattr__(self, "outcome", _frozen(self.outcome))
        object.__setattr__(self, "surrogate", _frozen(self.surrogate))

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    def take(self, idx) -> "ObservationTable":
        idx = np.asarray(idx, dtype=np.intp)
        return ObservationTable(
            self.covariates[idx],
            self.treatment[idx],
            None if self.outcome is None else self.outcome[idx],
            None if self.surrogate is None else self.surrogate[idx],
        )

    def column(self, target: str) -> np.ndarray:
        col = {"outcome": self.outcome, "surrogate": self.surrogate}[target]
        if col is None:
            raise SchemaError(f"table has no {target} column")
        return col

    def with_columns(self, **kw) -> "ObservationTable":
        parts = dict(
            covariates=self.covariates,
            treatment=self.treatment,
            outcome=self.outcome,
            surrogate=self.surrogate,
        )
        parts.update(kw)
        return ObservationTable(**parts)


def validate(table: ObservationTable) -> ObservationTable:
    """Return ``table`` unchanged if every invariant holds, else raise SchemaError.

    Row numbers in messages are 1-based.
    """
    x = table.covariates
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise SchemaError(f"covariates must be a non-empty n x d matrix, got shape {x.shape}")
    n = x.shape[0]
    cols = {"treatment": table.treatment, "outcome": table.outcome, "surrogate": table.surrogate}
    for name, col in cols.items():
        if col is None:
            continue
        if col.ndim != 1 or col.shape[0] != n:
            raise SchemaError(f"dimension mismatch: {name} has shape {col.shape}, covariates have {n} rows")
    if table.outcome is None and table.surrogate is None:
        raise SchemaError("table needs an outcome or a surrogate column")

    bad = ~np.isfinite(x)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise SchemaError(f"non-finite value in covariate x{c + 1} at row {r + 1}")
    for name, col in cols.items():
        if col is None:
            continue
        bad = ~np.isfinite(col)
        if bad.any():
            raise SchemaError(f"non-finite value in {name} at row {int(np.argmax(bad)) + 1}")
    nonbinary = (table.treatment != 0) & (table.treatment != 1)
    if nonbinary.any():
        raise SchemaError(f"non-binary treatment at row {int(np.argmax(nonbinary)) + 1}")
    return table


_XCOL = re.compile(r"^x(\d+)$")


def read_csv(path: str | Path) -> ObservationTable:
    """Read a table with header ``x1..xd, a[, y][, s]``.

    Extra columns are rejected so typos do not silently drop data.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [row for row in reader if row]

    xcols = sorted(
        ((int(m.group(1)), i) for i, h in enumerate(header) if (m := _XCOL.match(h))),
    )
    if not xcols:
        raise SchemaError(f"{path}: no covariate columns x1..xd")
    if [k for k, _ in xcols] != list(range(1, len(xcols) + 1)):
        raise SchemaError(f"{path}: covariate columns must be x1..x{len(xcols)} without gaps")
    known = {h for h in header if _XCOL.match(h)} | {"a", "y", "s"}
    unknown = [h for h in header if h not in known]
    if unknown:
        raise SchemaError(f"{path}: unknown columns {unknown}")
    if "a" not in header:
        raise SchemaError(f"{path}: missing treatment column 'a'")
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names")
    if not rows:
        raise SchemaError(f"{path}: no data rows")

    values = np.empty((len(rows), len(header)))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaError(f"{path}: row {r + 1} has {len(row)} fields, header has {len(header)}")
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise SchemaError(f"{path}: column {header[c]!r} at row {r + 1}: not a number: {cell!r}") from None

    pos = {h: i for i, h in enumerate(header)}
    table = ObservationTable(
        covariates=values[:, [i for _, i in xcols]],
        treatment=values[:, pos["a"]],
        outcome=values[:, pos["y"]] if "y" in pos else None,
        surrogate=values[:, pos["s"]] if "s" in pos else None,
    )
    try:
        return validate(table)
    except SchemaError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def write_csv(table: ObservationTable, path: str | Path) -> None:
    header = [f"x{j + 1}" for j in range(table.d)] + ["a"]
    cols = [table.covariates[:, j] for j in range(table.d)] + [table.treatment]
    if table.outcome is not None:
        header.append("y")
        cols.append(table.outcome)
    if table.surrogate is not None:
        header.append("s")
        cols.append(table.surrogate)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# split plans
# ---------------------------------------------------------------------------


def _ro(a):
    a = np.asarray(a, dtype=np.intp)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SplitPlan:
    seed: int
    main_indices: np.ndarray
    aux_indices: np.ndarray
    folds: tuple[np.ndarray, ...] | None = field(default=None)


def split_half(table_or_n, fraction: float = 0.5, seed: int = 0) -> SplitPlan:
    """Random main/auxiliary partition with ``floor(fraction * n)`` main rows."""
    n = table_or_n if isinstance(table_or_n, (int, np.integer)) else table_or_n.n
    if n < 2:
        raise ValueError(f"need at least 2 rows to split, got {n}")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n_main = min(max(int(np.floor(fraction * n)), 1), n - 1)
    perm = seeding.generator(seed, seeding.SPLIT).permutation(n)
    return SplitPlan(
        seed=seed,
        main_indices=_ro(np.sort(perm[:n_main])),
        aux_indices=_ro(np.sort(perm[n_main:])),
    )


def kfold(n: int, k: int, seed: int = 0) -> tuple[np.ndarray, ...]:
    """K disjoint folds covering ``range(n)``; the first ``n % k`` folds get one extra row."""
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= K <= n, got K={k}, n={n}")
    perm = seeding.generator(seed, seeding.SPLIT, k).permutation(n)
    return tuple(_ro(np.sort(f)) for f in np.array_split(perm, k))
