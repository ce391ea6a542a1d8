"""Tabular data loading and deterministic train/test splitting.

Cells are 64-bit reals for numeric columns and strings for categorical ones;
missing cells are the explicit sentinel ``None``. A column is numeric iff
every non-missing cell parses as a real number.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .corpus import TaskSpec
from .errors import PipelinePilotError

MISSING = None  # explicit missing-cell sentinel
_MISSING_TOKENS = ("", "NA")

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class TabularDataset:
    """An n-by-p value grid plus a length-n target vector."""

    column_names: tuple[str, ...]
    column_kinds: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]
    target: tuple[Any, ...]

    def __post_init__(self):
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "column_kinds", tuple(self.column_kinds))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        object.__setattr__(self, "target", tuple(self.target))
        p = len(self.column_names)
        if len(self.column_kinds) != p:
            raise ValueError("column_kinds length must equal column count")
        for k in self.column_kinds:
            if k not in (NUMERIC, CATEGORICAL):
                raise ValueError(f"unknown column kind {k!r}")
        for r in self.rows:
            if len(r) != p:
                raise ValueError(f"row of length {len(r)} in a {p}-column dataset")
        if len(self.target) != len(self.rows):
            raise ValueError("target length must equal row count")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_columns(self) -> int:
        return len(self.column_names)

    def subset(self, indices: Sequence[int]) -> "TabularDataset":
        return TabularDataset(
            self.column_names,
            self.column_kinds,
            tuple(self.rows[i] for i in indices),
            tuple(self.target[i] for i in indices),
        )


@dataclass(frozen=True)
class SplitDataset:
    """Disjoint train/test partition of a source dataset."""

    train: TabularDataset
    test: TabularDataset
    seed: int


def _parse_number(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(path: str | Path, target_column: str, task_type: str | None = None) -> TabularDataset:
    """Load an RFC-4180-style CSV with a header row.

    Column kinds are inferred per column: numeric iff every non-missing cell
    parses as a real. Empty cells and the token "NA" become the missing
    sentinel. The target column keeps its raw string values unless
    ``task_type`` is "regression", in which case they parse as reals.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PipelinePilotError(f"{path}: missing header row") from None
        if target_column not in header:
            raise PipelinePilotError(f"{path}: target column {target_column!r} not in header {header}")
        target_idx = header.index(target_column)
        raw_rows: list[list[str]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise PipelinePilotError(
                    f"{path}: line {lineno} has {len(row)} cells, expected {len(header)}"
                )
            raw_rows.append(row)

    feature_names = tuple(name for i, name in enumerate(header) if i != target_idx)
    feature_idx = [i for i in range(len(header)) if i != target_idx]

    # Kind inference: a column is numeric iff all non-missing cells parse.
    kinds = []
    for j in feature_idx:
        numeric = True
        for row in raw_rows:
            cell = row[j]
            if cell in _MISSING_TOKENS:
                continue
            if _parse_number(cell) is None:
                numeric = False
                break
        kinds.append(NUMERIC if numeric else CATEGORICAL)

    rows = []
    for row in raw_rows:
        out_row: list[Any] = []
        for k, j in enumerate(feature_idx):
            cell = row[j]
            if cell in _MISSING_TOKENS:
                out_row.append(MISSING)
            elif kinds[k] == NUMERIC:
                out_row.append(float(cell))
            else:
                out_row.append(cell)
        rows.append(tuple(out_row))

    target: list[Any] = []
    for lineno, row in enumerate(raw_rows, start=2):
        cell = row[target_idx]
        if cell in _MISSING_TOKENS:
            raise PipelinePilotError(f"{path}: line {lineno} has a missing target value")
        if task_type == "regression":
            value = _parse_number(cell)
            if value is None:
                raise PipelinePilotError(
                    f"{path}: line {lineno} target {cell!r} does not parse as a number"
                )
            target.append(value)
        else:
            target.append(cell)

    return TabularDataset(feature_names, tuple(kinds), tuple(rows), tuple(target))


def _apportion_test_counts(class_sizes: list[int], total_test: int, frac: float) -> list[int]:
    """Largest-remainder apportionment of the test budget across classes."""
    quotas = [frac * n for n in class_sizes]
    counts = [min(int(q), n - 1) for q, n in zip(quotas, class_sizes)]
    remainders = sorted(
        range(len(class_sizes)),
        key=lambda i: (-(quotas[i] - int(quotas[i])), -class_sizes[i], i),
    )
    short = total_test - sum(counts)
    for i in remainders:
        if short <= 0:
            break
        if counts[i] < class_sizes[i] - 1:
            counts[i] += 1
            short -= 1
    return counts


def split_with_seed(dataset: TabularDataset, task: TaskSpec, seed: int) -> SplitDataset:
    """Seeded shuffle-then-partition split; stratified for classification.

    Stratification applies when every class has at least two rows, keeping at
    least one train row per class; otherwise the split is a plain shuffle.
    """
    n = dataset.n_rows
    if n < 2:
        raise PipelinePilotError(f"cannot split a dataset with {n} row(s)")
    rng = np.random.default_rng(seed)
    n_test = int(round(task.test_fraction * n))
    n_test = max(1, min(n - 1, n_test))

    stratify = False
    if task.task_type == "classification":
        labels = sorted(set(dataset.target))
        by_label = {lab: [i for i, t in enumerate(dataset.target) if t == lab] for lab in labels}
        stratify = all(len(v) >= 2 for v in by_label.values())

    if stratify:
        class_sizes = [len(by_label[lab]) for lab in labels]
        test_counts = _apportion_test_counts(class_sizes, n_test, task.test_fraction)
        test_idx: list[int] = []
        for lab, count in zip(labels, test_counts):
            members = np.array(by_label[lab])
            perm = rng.permutation(len(members))
            test_idx.extend(members[perm[:count]].tolist())
        test_set = set(test_idx)
        train_idx = [i for i in range(n) if i not in test_set]
        test_idx = sorted(test_idx)
    else:
        perm = rng.permutation(n)
        test_idx = sorted(perm[:n_test].tolist())
        train_idx = sorted(perm[n_test:].tolist())

    return SplitDataset(dataset.subset(train_idx), dataset.subset(test_idx), seed)


def split(dataset: TabularDataset, task: TaskSpec) -> SplitDataset:
    """Deterministic split using the task's own split seed."""
    return split_with_seed(dataset, task, task.split_seed)


def fold_seed(base_seed: int, fold_index: int) -> int:
    """Per-fold seed derivation; fixed so parallel folds match sequential ones."""
    return base_seed * 1_000_003 + fold_index
