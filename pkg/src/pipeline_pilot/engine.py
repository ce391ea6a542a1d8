"""Execution engine: fit a pipeline stage by stage, predict, and score.

Stages run left to right, each transforming the data handed to the next; the
estimator consumes the final feature matrix and postprocessors act on its
predictions. Everything is 64-bit and deterministic for a fixed seed: no
primitive draws randomness today, but every fit receives a seeded generator so
stochastic primitives stay reproducible.

Estimators support classification tasks; scoring also implements rmse so
recorded regression corpora can be rescored externally.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .corpus import EvaluationRecord, TaskSpec
from .errors import PipelinePilotError, SchemaMismatchError, StageExecutionError
from .pipeline import Pipeline, StageKind
from .tabular import CATEGORICAL, NUMERIC, TabularDataset, fold_seed, split_with_seed

# ---------------------------------------------------------------------------
# Columnar frame used between stages


@dataclass
class Frame:
    """Columnar view: float64 arrays (NaN = missing) or object arrays (None)."""

    names: list[str]
    kinds: list[str]
    cols: list[np.ndarray]
    n: int

    @staticmethod
    def from_dataset(ds: TabularDataset) -> "Frame":
        cols: list[np.ndarray] = []
        n = ds.n_rows
        for j, kind in enumerate(ds.column_kinds):
            cells = [row[j] for row in ds.rows]
            if kind == NUMERIC:
                arr = np.array(
                    [np.nan if c is None else float(c) for c in cells], dtype=np.float64
                )
            else:
                arr = np.array(cells, dtype=object)
            cols.append(arr)
        return Frame(list(ds.column_names), list(ds.column_kinds), cols, n)

    def has_missing(self) -> bool:
        for kind, col in zip(self.kinds, self.cols):
            if kind == NUMERIC:
                if col.size and np.isnan(col).any():
                    return True
            else:
                if any(v is None for v in col):
                    return True
        return False

    def numeric_matrix(self) -> np.ndarray:
        idx = [j for j, k in enumerate(self.kinds) if k == NUMERIC]
        if not idx:
            return np.zeros((self.n, 0), dtype=np.float64)
        return np.column_stack([self.cols[j] for j in idx])

    def categorical_columns(self) -> list[np.ndarray]:
        return [c for k, c in zip(self.kinds, self.cols) if k == CATEGORICAL]


# ---------------------------------------------------------------------------
# Transform primitives


@dataclass
class MeanImputerState:
    fills: list[Any]


def _fit_mean_imputer(frame: Frame, y, task, rng) -> MeanImputerState:
    fills: list[Any] = []
    for kind, col in zip(frame.kinds, frame.cols):
        if kind == NUMERIC:
            present = col[~np.isnan(col)] if col.size else col
            fills.append(float(present.mean()) if present.size else 0.0)
        else:
            present = [v for v in col if v is not None]
            if present:
                values, counts = np.unique(np.array(present, dtype=object), return_counts=True)
                fills.append(str(values[int(np.argmax(counts))]))
            else:
                fills.append("")
    return MeanImputerState(fills)


def _apply_mean_imputer(frame: Frame, state: MeanImputerState) -> Frame:
    cols = []
    for kind, col, fill in zip(frame.kinds, frame.cols, state.fills):
        if kind == NUMERIC:
            out = col.copy()
            out[np.isnan(out)] = fill
        else:
            out = np.array([fill if v is None else v for v in col], dtype=object)
        cols.append(out)
    return Frame(list(frame.names), list(frame.kinds), cols, frame.n)


@dataclass
class ScalerState:
    means: list[float | None]  # None for categorical columns
    scales: list[float | None]


def _fit_standard_scaler(frame: Frame, y, task, rng) -> ScalerState:
    means: list[float | None] = []
    scales: list[float | None] = []
    for kind, col in zip(frame.kinds, frame.cols):
        if kind != NUMERIC:
            means.append(None)
            scales.append(None)
            continue
        present = col[~np.isnan(col)]
        mu = float(present.mean()) if present.size else 0.0
        sigma = float(present.std()) if present.size else 0.0
        means.append(mu)
        scales.append(sigma)
    return ScalerState(means, scales)


def _apply_standard_scaler(frame: Frame, state: ScalerState) -> Frame:
    cols = []
    for kind, col, mu, sigma in zip(frame.kinds, frame.cols, state.means, state.scales):
        if kind != NUMERIC:
            cols.append(col)
            continue
        if sigma == 0.0:
            out = np.zeros_like(col)
            out[np.isnan(col)] = np.nan
        else:
            out = (col - mu) / sigma
        cols.append(out)
    return Frame(list(frame.names), list(frame.kinds), cols, frame.n)


def _fit_min_max_scaler(frame: Frame, y, task, rng) -> ScalerState:
    mins: list[float | None] = []
    ranges: list[float | None] = []
    for kind, col in zip(frame.kinds, frame.cols):
        if kind != NUMERIC:
            mins.append(None)
            ranges.append(None)
            continue
        present = col[~np.isnan(col)]
        lo = float(present.min()) if present.size else 0.0
        hi = float(present.max()) if present.size else 0.0
        mins.append(lo)
        ranges.append(hi - lo)
    return ScalerState(mins, ranges)


def _apply_min_max_scaler(frame: Frame, state: ScalerState) -> Frame:
    cols = []
    for kind, col, lo, span in zip(frame.kinds, frame.cols, state.means, state.scales):
        if kind != NUMERIC:
            cols.append(col)
            continue
        if span == 0.0:
            out = np.zeros_like(col)
            out[np.isnan(col)] = np.nan
        else:
            out = (col - lo) / span
        cols.append(out)
    return Frame(list(frame.names), list(frame.kinds), cols, frame.n)


@dataclass
class OneHotState:
    categories: list[list[str] | None]  # None for numeric (passthrough) columns


def _fit_one_hot(frame: Frame, y, task, rng) -> OneHotState:
    categories: list[list[str] | None] = []
    for kind, col in zip(frame.kinds, frame.cols):
        if kind != CATEGORICAL:
            categories.append(None)
            continue
        present = sorted({v for v in col if v is not None})
        categories.append(present)
    return OneHotState(categories)


def _apply_one_hot(frame: Frame, state: OneHotState) -> Frame:
    names: list[str] = []
    kinds: list[str] = []
    cols: list[np.ndarray] = []
    for name, kind, col, cats in zip(frame.names, frame.kinds, frame.cols, state.categories):
        if cats is None:
            names.append(name)
            kinds.append(kind)
            cols.append(col)
            continue
        for cat in cats:
            indicator = np.fromiter(
                (1.0 if v == cat else 0.0 for v in col), dtype=np.float64, count=frame.n
            )
            names.append(f"{name}={cat}")
            kinds.append(NUMERIC)
            cols.append(indicator)
    return Frame(names, kinds, cols, frame.n)


@dataclass
class ColumnSelectState:
    keep: list[int]


def _fit_variance_threshold(frame: Frame, y, task, rng, threshold: float) -> ColumnSelectState:
    keep = []
    for j, (kind, col) in enumerate(zip(frame.kinds, frame.cols)):
        if kind != NUMERIC:
            keep.append(j)
            continue
        present = col[~np.isnan(col)]
        var = float(present.var()) if present.size else 0.0
        if var > threshold:
            keep.append(j)
    return ColumnSelectState(keep)


def _numeric_target_encoding(y: Sequence[Any], task: TaskSpec) -> np.ndarray:
    if task.task_type == "regression":
        return np.asarray(y, dtype=np.float64)
    classes = sorted(set(y))
    index = {c: i for i, c in enumerate(classes)}
    return np.array([index[v] for v in y], dtype=np.float64)


def _column_numeric_encoding(kind: str, col: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Numeric view of a column plus a validity mask (missing excluded)."""
    if kind == NUMERIC:
        mask = ~np.isnan(col)
        return col.astype(np.float64), mask
    cats = sorted({v for v in col if v is not None})
    index = {c: i for i, c in enumerate(cats)}
    values = np.array([float(index.get(v, -1)) if v is not None else np.nan for v in col])
    return values, ~np.isnan(values)


def _abs_pearson(x: np.ndarray, t: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    xs = x - x.mean()
    ts = t - t.mean()
    denom = np.sqrt((xs * xs).sum() * (ts * ts).sum())
    if denom == 0.0:
        return 0.0
    return float(abs((xs * ts).sum() / denom))


def _fit_select_k_best(frame: Frame, y, task, rng, k: int) -> ColumnSelectState:
    p = len(frame.cols)
    if k > p:
        raise ValueError(f"k={k} exceeds the {p} available column(s)")
    target = _numeric_target_encoding(y, task)
    scores = []
    for kind, col in zip(frame.kinds, frame.cols):
        values, mask = _column_numeric_encoding(kind, col)
        scores.append(_abs_pearson(values[mask], target[mask]))
    ranked = sorted(range(p), key=lambda j: (-scores[j], j))
    keep = sorted(ranked[:k])
    return ColumnSelectState(keep)


def _apply_column_select(frame: Frame, state: ColumnSelectState) -> Frame:
    return Frame(
        [frame.names[j] for j in state.keep],
        [frame.kinds[j] for j in state.keep],
        [frame.cols[j] for j in state.keep],
        frame.n,
    )


# ---------------------------------------------------------------------------
# Estimators


def _require_classification(task: TaskSpec, primitive: str) -> None:
    if task.task_type != "classification":
        raise ValueError(f"{primitive} supports classification tasks only")


def _require_complete(frame: Frame) -> None:
    if frame.has_missing():
        raise ValueError("missing values reach the estimator; add an imputer stage")


def _require_columns(frame: Frame) -> None:
    if not frame.cols:
        raise ValueError("no feature columns reach the estimator")


def _sorted_classes(y: Sequence[Any]) -> list[Any]:
    return sorted(set(y))


def _encode_labels(y: Sequence[Any], classes: list[Any]) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    return np.array([index[v] for v in y], dtype=np.int64)


def _majority(counts: np.ndarray) -> int:
    # argmax returns the first maximum; classes are sorted, so ties resolve
    # to the smallest label.
    return int(np.argmax(counts))


# -- logistic regression ----------------------------------------------------


def logistic_loss(w: np.ndarray, b: float, X: np.ndarray, y01: np.ndarray, l2: float) -> float:
    """Mean L2-regularized log loss of a single binary classifier."""
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return float((softplus - y01 * z).mean() + 0.5 * l2 * (w @ w))


def logistic_gradient(
    w: np.ndarray, b: float, X: np.ndarray, y01: np.ndarray, l2: float
) -> tuple[np.ndarray, float]:
    """Analytic gradient of :func:`logistic_loss` in (w, b)."""
    z = X @ w + b
    p = 1.0 / (1.0 + np.exp(-z))
    resid = p - y01
    grad_w = X.T @ resid / X.shape[0] + l2 * w
    grad_b = float(resid.mean())
    return grad_w, grad_b


@dataclass
class LogisticRegressionModel:
    classes: list[Any]
    weights: np.ndarray  # (p, n_classes)
    biases: np.ndarray  # (n_classes,)
    feature_means: np.ndarray
    feature_scales: np.ndarray


def _fit_logistic_regression(
    frame: Frame, y, task, rng, learning_rate: float, epochs: int, l2: float
) -> LogisticRegressionModel:
    _require_classification(task, "logistic_regression")
    _require_complete(frame)
    _require_columns(frame)
    if any(k != NUMERIC for k in frame.kinds):
        raise ValueError("logistic_regression requires numeric features; one-hot encode categorical columns first")
    X = frame.numeric_matrix()
    classes = _sorted_classes(y)
    labels = _encode_labels(y, classes)

    # Internal standardization keeps plain gradient descent well conditioned.
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    scales = np.where(scales == 0.0, 1.0, scales)
    Xs = (X - means) / scales

    n, p = Xs.shape
    c = len(classes)
    Y = np.zeros((n, c))
    Y[np.arange(n), labels] = 1.0
    W = np.zeros((p, c))
    b = np.zeros(c)
    for _ in range(epochs):
        Z = Xs @ W + b
        P = 1.0 / (1.0 + np.exp(-Z))
        resid = P - Y
        grad_w = Xs.T @ resid / n + l2 * W
        grad_b = resid.mean(axis=0)
        W -= learning_rate * grad_w
        b -= learning_rate * grad_b
    return LogisticRegressionModel(classes, W, b, means, scales)


def _predict_logistic_regression(frame: Frame, model: LogisticRegressionModel) -> np.ndarray:
    X = frame.numeric_matrix()
    if frame.n == 0:
        return np.array([], dtype=object)
    Xs = (X - model.feature_means) / model.feature_scales
    Z = Xs @ model.weights + model.biases
    picks = np.argmax(Z, axis=1)
    return np.array([model.classes[i] for i in picks], dtype=object)


# -- decision tree ------------------------------------------------------------


@dataclass
class TreeNode:
    prediction: int | None = None  # leaf class index
    feature: int | None = None
    threshold: float | None = None  # numeric split: x <= threshold goes left
    category: Any = None  # categorical split: x == category goes left
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None


@dataclass
class DecisionTreeModel:
    classes: list[Any]
    root: TreeNode
    kinds: list[str]


def _gini_from_counts(counts: np.ndarray, total: np.ndarray | float) -> np.ndarray:
    """Gini impurity for stacked count vectors; zero-size groups give 0."""
    total = np.asarray(total, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = counts / total[..., None]
        g = 1.0 - (frac * frac).sum(axis=-1)
    return np.where(total > 0, g, 0.0)


def _best_numeric_split(x: np.ndarray, labels: np.ndarray, n_classes: int, msl: int):
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = labels[order]
    n = x.shape[0]
    one_hot = np.zeros((n, n_classes))
    one_hot[np.arange(n), ys] = 1.0
    left_counts = np.cumsum(one_hot, axis=0)  # counts for splits after row i
    total = left_counts[-1]

    cut = np.nonzero(xs[:-1] != xs[1:])[0]  # split between i and i+1
    if cut.size == 0:
        return None
    nl = (cut + 1).astype(np.float64)
    nr = n - nl
    valid = (nl >= msl) & (nr >= msl)
    if not valid.any():
        return None
    cut = cut[valid]
    nl, nr = nl[valid], nr[valid]
    lc = left_counts[cut]
    rc = total - lc
    score = (nl * _gini_from_counts(lc, nl) + nr * _gini_from_counts(rc, nr)) / n
    best = int(np.argmin(score))  # first minimum = lowest threshold
    threshold = float((xs[cut[best]] + xs[cut[best] + 1]) / 2.0)
    return float(score[best]), ("numeric", threshold)


def _best_categorical_split(col: np.ndarray, labels: np.ndarray, n_classes: int, msl: int):
    cats = sorted(set(col))
    if len(cats) < 2:
        return None
    cat_index = {c: i for i, c in enumerate(cats)}
    codes = np.array([cat_index[v] for v in col], dtype=np.int64)
    counts = np.zeros((len(cats), n_classes))
    np.add.at(counts, (codes, labels), 1.0)
    nl = counts.sum(axis=1)
    total = counts.sum(axis=0)
    n = labels.shape[0]
    nr = n - nl
    valid = (nl >= msl) & (nr >= msl)
    if not valid.any():
        return None
    lc = counts[valid]
    rc = total - lc
    nlv, nrv = nl[valid], nr[valid]
    score = (nlv * _gini_from_counts(lc, nlv) + nrv * _gini_from_counts(rc, nrv)) / n
    best = int(np.argmin(score))  # first minimum = earliest category in sort order
    chosen = [c for c, ok in zip(cats, valid) if ok][best]
    return float(score[best]), ("categorical", chosen)


def _fit_decision_tree(
    frame: Frame, y, task, rng, max_depth: int, min_samples_leaf: int
) -> DecisionTreeModel:
    _require_classification(task, "decision_tree")
    _require_complete(frame)
    _require_columns(frame)
    classes = _sorted_classes(y)
    labels = _encode_labels(y, classes)
    n_classes = len(classes)
    depth_limit = max_depth if max_depth > 0 else None

    root = TreeNode()
    stack = [(root, np.arange(frame.n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        node_labels = labels[idx]
        counts = np.bincount(node_labels, minlength=n_classes).astype(np.float64)
        if (
            (counts > 0).sum() <= 1
            or (depth_limit is not None and depth >= depth_limit)
            or idx.size < 2 * min_samples_leaf
        ):
            node.prediction = _majority(counts)
            continue

        best_score = np.inf
        best_split = None
        best_feature = -1
        for j, (kind, col) in enumerate(zip(frame.kinds, frame.cols)):
            sub = col[idx]
            if kind == NUMERIC:
                found = _best_numeric_split(sub, node_labels, n_classes, min_samples_leaf)
            else:
                found = _best_categorical_split(sub, node_labels, n_classes, min_samples_leaf)
            if found is not None and found[0] < best_score:
                best_score = found[0]
                best_feature = j
                best_split = found[1]
        if best_split is None:
            node.prediction = _majority(counts)
            continue

        kind, value = best_split
        sub = frame.cols[best_feature][idx]
        if kind == "numeric":
            mask = sub <= value
            node.threshold = float(value)
        else:
            mask = np.fromiter((v == value for v in sub), dtype=bool, count=idx.size)
            node.category = value
        node.feature = best_feature
        node.left = TreeNode()
        node.right = TreeNode()
        stack.append((node.left, idx[mask], depth + 1))
        stack.append((node.right, idx[~mask], depth + 1))
    return DecisionTreeModel(classes, root, list(frame.kinds))


def _predict_decision_tree(frame: Frame, model: DecisionTreeModel) -> np.ndarray:
    out = []
    for i in range(frame.n):
        node = model.root
        while node.prediction is None:
            value = frame.cols[node.feature][i]
            if node.threshold is not None:
                go_left = value <= node.threshold
            else:
                go_left = value == node.category
            node = node.left if go_left else node.right
        out.append(model.classes[node.prediction])
    return np.array(out, dtype=object)


# -- k nearest neighbors ------------------------------------------------------


@dataclass
class KnnModel:
    classes: list[Any]
    labels: np.ndarray
    numeric: np.ndarray
    categorical: list[np.ndarray]
    k: int


def _fit_knn(frame: Frame, y, task, rng, k: int) -> KnnModel:
    _require_classification(task, "knn_classifier")
    _require_complete(frame)
    _require_columns(frame)
    classes = _sorted_classes(y)
    labels = _encode_labels(y, classes)
    return KnnModel(classes, labels, frame.numeric_matrix(), frame.categorical_columns(), k)


def _knn_distances(model: KnnModel, frame: Frame) -> np.ndarray:
    """(n_query, n_train) distances: numeric Euclidean plus categorical Hamming."""
    Xq = frame.numeric_matrix()
    diff = Xq[:, None, :] - model.numeric[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    for qcol, tcol in zip(frame.categorical_columns(), model.categorical):
        mismatch = qcol[:, None] != tcol[None, :]
        dist = dist + mismatch.astype(np.float64)
    return dist


def _predict_knn(frame: Frame, model: KnnModel) -> np.ndarray:
    if frame.n == 0:
        return np.array([], dtype=object)
    dist = _knn_distances(model, frame)
    n_train = model.labels.shape[0]
    k = min(model.k, n_train)
    # Order neighbors by (distance, train row index) for determinism.
    row_idx = np.broadcast_to(np.arange(n_train), dist.shape)
    order = np.lexsort((row_idx, dist), axis=1)[:, :k]
    votes = model.labels[order]
    out = []
    for i in range(frame.n):
        counts = np.bincount(votes[i], minlength=len(model.classes))
        out.append(model.classes[_majority(counts)])
    return np.array(out, dtype=object)


# -- gaussian naive bayes -----------------------------------------------------

_VARIANCE_FLOOR = 1e-9
_LAPLACE_ALPHA = 1.0


@dataclass
class GnbModel:
    classes: list[Any]
    log_priors: np.ndarray
    means: np.ndarray  # (n_classes, n_numeric)
    variances: np.ndarray
    cat_tables: list[dict[Any, np.ndarray]]  # per categorical column: value -> class counts
    cat_sizes: list[int]
    class_counts: np.ndarray


def _fit_gnb(frame: Frame, y, task, rng) -> GnbModel:
    _require_classification(task, "gaussian_naive_bayes")
    _require_complete(frame)
    _require_columns(frame)
    classes = _sorted_classes(y)
    labels = _encode_labels(y, classes)
    c = len(classes)
    X = frame.numeric_matrix()
    class_counts = np.bincount(labels, minlength=c).astype(np.float64)
    log_priors = np.log(class_counts / labels.shape[0])

    means = np.zeros((c, X.shape[1]))
    variances = np.full((c, X.shape[1]), _VARIANCE_FLOOR)
    for ci in range(c):
        rows = X[labels == ci]
        if rows.shape[0]:
            means[ci] = rows.mean(axis=0)
            variances[ci] = np.maximum(rows.var(axis=0), _VARIANCE_FLOOR)

    cat_tables: list[dict[Any, np.ndarray]] = []
    cat_sizes: list[int] = []
    for col in frame.categorical_columns():
        table: dict[Any, np.ndarray] = {}
        for value in sorted(set(col)):
            mask = np.fromiter((v == value for v in col), dtype=bool, count=frame.n)
            table[value] = np.bincount(labels[mask], minlength=c).astype(np.float64)
        cat_tables.append(table)
        cat_sizes.append(len(table))
    return GnbModel(classes, log_priors, means, variances, cat_tables, cat_sizes, class_counts)


def _predict_gnb(frame: Frame, model: GnbModel) -> np.ndarray:
    if frame.n == 0:
        return np.array([], dtype=object)
    X = frame.numeric_matrix()
    scores = np.tile(model.log_priors, (frame.n, 1))
    if X.shape[1]:
        var = model.variances
        log_norm = -0.5 * np.log(2.0 * np.pi * var)
        for ci in range(len(model.classes)):
            diff = X - model.means[ci]
            scores[:, ci] += (log_norm[ci] - 0.5 * diff * diff / var[ci]).sum(axis=1)
    for col, table, size in zip(frame.categorical_columns(), model.cat_tables, model.cat_sizes):
        denom = model.class_counts + _LAPLACE_ALPHA * size
        for i, value in enumerate(col):
            counts = table.get(value)
            if counts is None:
                counts = np.zeros(len(model.classes))
            scores[i] += np.log((counts + _LAPLACE_ALPHA) / denom)
    picks = np.argmax(scores, axis=1)
    return np.array([model.classes[i] for i in picks], dtype=object)


# ---------------------------------------------------------------------------
# Stage dispatch


_TRANSFORM_FIT = {
    "mean_imputer": lambda fr, y, task, rng, params: _fit_mean_imputer(fr, y, task, rng),
    "standard_scaler": lambda fr, y, task, rng, params: _fit_standard_scaler(fr, y, task, rng),
    "min_max_scaler": lambda fr, y, task, rng, params: _fit_min_max_scaler(fr, y, task, rng),
    "one_hot_encoder": lambda fr, y, task, rng, params: _fit_one_hot(fr, y, task, rng),
    "variance_threshold": lambda fr, y, task, rng, params: _fit_variance_threshold(
        fr, y, task, rng, params["threshold"]
    ),
    "select_k_best": lambda fr, y, task, rng, params: _fit_select_k_best(
        fr, y, task, rng, params["k"]
    ),
}

_TRANSFORM_APPLY = {
    "mean_imputer": _apply_mean_imputer,
    "standard_scaler": _apply_standard_scaler,
    "min_max_scaler": _apply_min_max_scaler,
    "one_hot_encoder": _apply_one_hot,
    "variance_threshold": _apply_column_select,
    "select_k_best": _apply_column_select,
}

_ESTIMATOR_FIT = {
    "logistic_regression": lambda fr, y, task, rng, params: _fit_logistic_regression(
        fr, y, task, rng, params["learning_rate"], params["epochs"], params["l2"]
    ),
    "decision_tree": lambda fr, y, task, rng, params: _fit_decision_tree(
        fr, y, task, rng, params["max_depth"], params["min_samples_leaf"]
    ),
    "knn_classifier": lambda fr, y, task, rng, params: _fit_knn(fr, y, task, rng, params["k"]),
    "gaussian_naive_bayes": lambda fr, y, task, rng, params: _fit_gnb(fr, y, task, rng),
}

_ESTIMATOR_PREDICT = {
    "logistic_regression": _predict_logistic_regression,
    "decision_tree": _predict_decision_tree,
    "knn_classifier": _predict_knn,
    "gaussian_naive_bayes": _predict_gnb,
}


# ---------------------------------------------------------------------------
# Public engine surface


@dataclass(frozen=True)
class FittedPipeline:
    pipeline: Pipeline
    fitted_state: tuple[Any, ...]
    train_column_names: tuple[str, ...]
    train_column_kinds: tuple[str, ...]


def fit(p: Pipeline, train: TabularDataset, task: TaskSpec, seed: int = 0) -> FittedPipeline:
    """Fit all stages left to right on the training data."""
    if train.n_rows == 0:
        raise PipelinePilotError("cannot fit on an empty dataset")
    rng = np.random.default_rng(seed)
    frame = Frame.from_dataset(train)
    y = train.target
    states: list[Any] = []
    for i, stage in enumerate(p.stages):
        try:
            if stage.kind == StageKind.estimator:
                model = _ESTIMATOR_FIT[stage.primitive](frame, y, task, rng, stage.params)
                states.append(model)
            elif stage.kind == StageKind.postprocessor:
                states.append(None)
            else:
                state = _TRANSFORM_FIT[stage.primitive](frame, y, task, rng, stage.params)
                states.append(state)
                frame = _TRANSFORM_APPLY[stage.primitive](frame, state)
        except (ValueError, ZeroDivisionError) as exc:
            raise StageExecutionError(str(exc), i, stage.primitive) from None
    return FittedPipeline(p, tuple(states), train.column_names, train.column_kinds)


def predict(f: FittedPipeline, data: TabularDataset) -> list[Any]:
    """Apply the fitted stages to new rows; one prediction per row."""
    if data.column_names != f.train_column_names or data.column_kinds != f.train_column_kinds:
        raise SchemaMismatchError(
            f"data schema {list(zip(data.column_names, data.column_kinds))} does not match "
            f"training schema {list(zip(f.train_column_names, f.train_column_kinds))}"
        )
    frame = Frame.from_dataset(data)
    predictions: np.ndarray | None = None
    for i, (stage, state) in enumerate(zip(f.pipeline.stages, f.fitted_state)):
        try:
            if stage.kind == StageKind.estimator:
                predictions = _ESTIMATOR_PREDICT[stage.primitive](frame, state)
            elif stage.kind == StageKind.postprocessor:
                pass  # identity_postprocessor: predictions unchanged
            else:
                frame = _TRANSFORM_APPLY[stage.primitive](frame, state)
        except (ValueError, ZeroDivisionError) as exc:
            raise StageExecutionError(str(exc), i, stage.primitive) from None
    assert predictions is not None
    return list(predictions)


@dataclass(frozen=True)
class Holdout:
    pass


@dataclass(frozen=True)
class KFold:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"fold count must be positive, got {self.k}")


Protocol = Holdout | KFold


def parse_protocol(text: str) -> Protocol:
    if text == "holdout":
        return Holdout()
    if text.startswith("kfold:"):
        return KFold(int(text.split(":", 1)[1]))
    if text == "kfold":
        return KFold()
    raise ValueError(f"unknown protocol {text!r}; expected holdout or kfold:<k>")


def score_predictions(metric: str, predictions: Sequence[Any], truth: Sequence[Any]) -> float:
    if len(predictions) != len(truth):
        raise ValueError("predictions and truth differ in length")
    if metric == "accuracy":
        correct = sum(1 for p, t in zip(predictions, truth) if p == t)
        return correct / len(truth) if truth else 0.0
    if metric == "rmse":
        p = np.asarray(predictions, dtype=np.float64)
        t = np.asarray(truth, dtype=np.float64)
        return float(np.sqrt(((p - t) ** 2).mean()))
    raise ValueError(f"unknown metric {metric!r}")


def evaluate(
    p: Pipeline,
    d: TabularDataset,
    task: TaskSpec,
    protocol: Protocol | str = KFold(5),
    seed: int | None = None,
    dataset_id: str = "",
) -> EvaluationRecord:
    """Score a pipeline on a dataset under the given validation protocol.

    The score averages fold scores (repeated seeded splits for kfold). Stage
    failures abort the run and come back as a failure record naming the fold,
    stage, and cause rather than an imputed score.
    """
    if isinstance(protocol, str):
        protocol = parse_protocol(protocol)
    if d.n_rows == 0:
        raise PipelinePilotError("cannot evaluate on an empty dataset")
    base_seed = task.split_seed if seed is None else seed
    if isinstance(protocol, Holdout):
        seeds = [base_seed]
    else:
        seeds = [fold_seed(base_seed, i) for i in range(protocol.k)]

    started = time.perf_counter()
    fold_scores: list[float] = []
    for fold_index, s in enumerate(seeds):
        try:
            parts = split_with_seed(d, task, s)
            fitted = fit(p, parts.train, task, seed=s)
            preds = predict(fitted, parts.test)
            fold_scores.append(score_predictions(task.metric, preds, parts.test.target))
        except PipelinePilotError as exc:
            wall_ms = int((time.perf_counter() - started) * 1000)
            return EvaluationRecord(
                dataset_id=dataset_id,
                pipeline_origin="literal",
                score=None,
                metric=task.metric,
                wall_time_ms=wall_ms,
                error=f"fold {fold_index}: {exc}",
                pipeline=p,
            )
    wall_ms = int((time.perf_counter() - started) * 1000)
    return EvaluationRecord(
        dataset_id=dataset_id,
        pipeline_origin="literal",
        score=float(np.mean(fold_scores)),
        metric=task.metric,
        wall_time_ms=wall_ms,
        pipeline=p,
    )
