"""Dataset ingestion and sufficient statistics for CI testing.

A :class:`Dataset` is a column-oriented sample matrix with a per-variable
kind tag (continuous, or discrete with a known arity).  CI tests never touch
the raw data directly; they consume one of the two sufficient-statistic
containers built here (:class:`GaussianSuffStat` for correlation-based tests,
:class:`DiscreteSuffStat` for contingency-table tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

# Columns with at most this many distinct integer values are auto-detected
# as discrete.  Arbitrary but fixed, so ingestion is reproducible.
AUTO_DISCRETE_MAX_LEVELS = 32

KIND_HINTS = ("auto", "continuous", "discrete")


class DatasetError(ValueError):
    """Malformed input data; the message carries the offending location."""


class DegenerateDataError(DatasetError):
    """Structurally valid data that cannot support the requested statistic."""


@dataclass(frozen=True)
class Continuous:
    def __str__(self) -> str:
        return "continuous"


@dataclass(frozen=True)
class Discrete:
    arity: int

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise DatasetError(f"discrete arity must be positive, got {self.arity}")

    def __str__(self) -> str:
        return f"discrete({self.arity})"


Kind = Union[Continuous, Discrete]


class Dataset:
    """Immutable n-samples-by-p-variables matrix with per-column kinds.

    Discrete columns hold dense integer codes in ``[0, arity)`` stored as
    floats inside the shared value matrix.
    """

    def __init__(self, values: np.ndarray, names: Sequence[str], kinds: Sequence[Kind]):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise DatasetError("values must be a 2-d matrix")
        n, p = values.shape
        if n < 1:
            raise DatasetError("dataset needs at least one sample row")
        if p < 2:
            raise DatasetError(f"dataset needs at least two variables, got {p}")
        names = tuple(names)
        kinds = tuple(kinds)
        if len(names) != p or len(kinds) != p:
            raise DatasetError("names/kinds length must match the column count")
        if len(set(names)) != p:
            raise DatasetError("variable names must be unique")
        if not np.isfinite(values).all():
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DatasetError(
                f"non-finite value at row {bad[0] + 1}, column '{names[bad[1]]}'"
            )
        for v, kind in enumerate(kinds):
            if isinstance(kind, Discrete):
                col = values[:, v]
                codes = col.astype(np.int64)
                if (codes != col).any() or codes.min() < 0 or codes.max() >= kind.arity:
                    raise DatasetError(
                        f"column '{names[v]}' has codes outside [0, {kind.arity})"
                    )
        values = values.copy()
        values.setflags(write=False)
        self._values = values
        self._names = names
        self._kinds = kinds

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def kinds(self) -> tuple[Kind, ...]:
        return self._kinds

    @property
    def n(self) -> int:
        return self._values.shape[0]

    @property
    def p(self) -> int:
        return self._values.shape[1]

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, p={self.p})"


class GaussianSuffStat:
    """Correlation matrix plus sample count, the input to Gaussian CI tests."""

    def __init__(self, corr: np.ndarray, n: int):
        corr = np.asarray(corr, dtype=float)
        if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
            raise ValueError("corr must be a square matrix")
        if not np.array_equal(corr, corr.T):
            raise ValueError("corr must be exactly symmetric")
        if not np.array_equal(np.diag(corr), np.ones(corr.shape[0])):
            raise ValueError("corr diagonal must be exactly 1")
        if np.abs(corr).max() > 1.0:
            raise ValueError("corr entries must lie in [-1, 1]")
        if n < 1:
            raise ValueError("sample count must be positive")
        corr = corr.copy()
        corr.setflags(write=False)
        self.corr = corr
        self.n = int(n)

    @property
    def p(self) -> int:
        return self.corr.shape[0]

    def __repr__(self) -> str:
        return f"GaussianSuffStat(p={self.p}, n={self.n})"


class DiscreteSuffStat:
    """Integer-coded sample matrix plus per-variable arities."""

    def __init__(self, codes: np.ndarray, arities: Sequence[int]):
        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim != 2:
            raise ValueError("codes must be a 2-d matrix")
        arities = tuple(int(a) for a in arities)
        if len(arities) != codes.shape[1]:
            raise ValueError("arities length must match the column count")
        for v, a in enumerate(arities):
            if a < 1:
                raise ValueError(f"arity of column {v} must be positive")
            col = codes[:, v]
            if col.size and (col.min() < 0 or col.max() >= a):
                raise ValueError(f"codes of column {v} outside [0, {a})")
        codes = codes.copy()
        codes.setflags(write=False)
        self.codes = codes
        self.arities = arities

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def p(self) -> int:
        return self.codes.shape[1]

    def __repr__(self) -> str:
        return f"DiscreteSuffStat(p={self.p}, n={self.n})"


def _parse_cell(token: str, row: int, name: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DatasetError(
            f"unparseable numeric cell '{token}' at row {row}, column '{name}'"
        ) from None
    if not math.isfinite(value):
        raise DatasetError(
            f"non-finite cell '{token}' at row {row}, column '{name}' "
            "(missing values are not supported)"
        )
    return value


def _is_integer_token(token: str) -> bool:
    try:
        int(token)
    except ValueError:
        return False
    return True


def load_csv(path: str | Path, kind_hint: str = "auto") -> Dataset:
    """Load a comma-separated file with one header row into a Dataset.

    Under ``auto``, a column is tagged discrete iff every value is an
    integer literal with at most ``AUTO_DISCRETE_MAX_LEVELS`` distinct
    values; discrete values are re-coded to a dense 0-based range in order
    of first appearance.  ``continuous`` and ``discrete`` force the kind
    for every column.
    """
    if kind_hint not in KIND_HINTS:
        raise DatasetError(f"kind_hint must be one of {KIND_HINTS}, got '{kind_hint}'")
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if line != ""]
    if not lines:
        raise DatasetError(f"{path}: empty file")
    names = [h.strip() for h in lines[0].split(",")]
    p = len(names)
    if p < 2:
        raise DatasetError(f"{path}: need at least two columns, got {p}")
    rows = []
    raw: list[list[str]] = []
    for r, line in enumerate(lines[1:], start=1):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != p:
            raise DatasetError(
                f"{path}: row {r} has {len(cells)} fields, expected {p}"
            )
        raw.append(cells)
        rows.append([_parse_cell(c, r, names[k]) for k, c in enumerate(cells)])
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    values = np.array(rows, dtype=float)

    kinds: list[Kind] = []
    for v in range(p):
        tokens = [row[v] for row in raw]
        if kind_hint == "continuous":
            kinds.append(Continuous())
            continue
        all_int = all(_is_integer_token(t) for t in tokens)
        if kind_hint == "discrete":
            if not all_int:
                bad = next(r for r, t in enumerate(tokens, start=1) if not _is_integer_token(t))
                raise DatasetError(
                    f"{path}: column '{names[v]}' forced discrete but row {bad} "
                    "is not an integer"
                )
            discrete = True
        else:
            discrete = all_int and len({int(t) for t in tokens}) <= AUTO_DISCRETE_MAX_LEVELS
        if discrete:
            seen: dict[int, int] = {}
            for r, t in enumerate(tokens):
                code = seen.setdefault(int(t), len(seen))
                values[r, v] = code
            kinds.append(Discrete(arity=len(seen)))
        else:
            kinds.append(Continuous())
    return Dataset(values, names, kinds)


def write_csv(dataset: Dataset, path: str | Path) -> None:
    """Write a Dataset back to CSV; floats use shortest round-trip formatting."""
    out = [",".join(dataset.names)]
    for r in range(dataset.n):
        cells = []
        for v in range(dataset.p):
            x = dataset.values[r, v]
            if isinstance(dataset.kinds[v], Discrete):
                cells.append(str(int(x)))
            else:
                cells.append(repr(float(x)))
        out.append(",".join(cells))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def gaussian_suffstat(dataset: Dataset) -> GaussianSuffStat:
    """Pearson correlation matrix of an all-continuous dataset.

    Two-pass (mean, then centered cross products) for numerical stability.
    Each correlation is computed once per unordered pair and mirrored, so the
    result is symmetric to the last bit; the diagonal is set to exactly 1.
    """
    for v, kind in enumerate(dataset.kinds):
        if not isinstance(kind, Continuous):
            raise DatasetError(f"column '{dataset.names[v]}' is discrete; "
                               "gaussian_suffstat needs all-continuous data")
    if dataset.n < 2:
        raise DatasetError("need at least two samples for a correlation matrix")
    x = dataset.values
    centered = x - x.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    scale = np.maximum(1.0, np.abs(x).max(axis=0)) * math.sqrt(dataset.n)
    for v in range(dataset.p):
        if norms[v] <= 1e-13 * scale[v]:
            raise DegenerateDataError(f"column '{dataset.names[v]}' has zero variance")
    cross = centered.T @ centered
    corr = cross / np.outer(norms, norms)
    corr = np.triu(corr, k=1)
    corr = corr + corr.T
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return GaussianSuffStat(corr, dataset.n)


def discrete_suffstat(dataset: Dataset) -> DiscreteSuffStat:
    """Integer code matrix and arities of an all-discrete dataset."""
    arities = []
    for v, kind in enumerate(dataset.kinds):
        if not isinstance(kind, Discrete):
            raise DatasetError(f"column '{dataset.names[v]}' is continuous; "
                               "discrete_suffstat needs all-discrete data")
        arities.append(kind.arity)
    return DiscreteSuffStat(dataset.values.astype(np.int64), arities)


def sample_covariance(dataset: Dataset) -> np.ndarray:
    """Unbiased sample covariance matrix (denominator n - 1)."""
    if dataset.n < 2:
        raise DatasetError("need at least two samples for a covariance matrix")
    x = dataset.values
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (dataset.n - 1)
    return (cov + cov.T) / 2.0
