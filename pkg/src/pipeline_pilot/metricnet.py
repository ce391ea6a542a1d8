"""Learned similarity metric between dataset representations.

A fully connected network (three ReLU hidden layers plus a softplus scalar
output, i.e. four weight layers) maps a concatenated pair of dataset
representations to a nonnegative predicted distance. By default it is trained
to regress the Euclidean distance between the two datasets' human-pipeline
embeddings; the alternative ``performance`` target regresses the measured
score of the first dataset's human pipeline on the second dataset. Training
minimizes mean squared error with Adam, shuffling pairs each epoch.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Corpus, CorpusRecord
from .embed import Embedder, ExternalVectorStore, distance, pipeline_vector
from .engine import KFold, Protocol, evaluate
from .errors import DimensionMismatchError, PipelinePilotError
from .tabular import load_csv
from .transfer import TransferRecommendation, build_representation, canonical_sources

log = logging.getLogger(__name__)

TARGET_MODES = ("pipeline_distance", "performance")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    epochs: int = 1200
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    hidden_dims: tuple[int, ...] = (256, 128, 64)
    target_mode: str = "pipeline_distance"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.adam_beta1 < 1 or not 0 <= self.adam_beta2 < 1:
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise ValueError("adam_eps must be positive")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden dims must be positive")
        if self.target_mode not in TARGET_MODES:
            raise ValueError(f"target_mode must be one of {TARGET_MODES}")


@dataclass(frozen=True)
class TrainingPair:
    """One supervised example: a pair of representations and its target."""

    input: np.ndarray
    target: float

    def __post_init__(self):
        object.__setattr__(self, "input", np.ascontiguousarray(self.input, dtype=np.float64))
        if self.target < 0:
            raise ValueError("training targets must be nonnegative")


@dataclass
class TrainHistory:
    initial_loss: float
    final_loss: float
    epochs: int


@dataclass
class MetricNetwork:
    """Weights of the pair-distance network."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]  # weights[i]: (layer_dims[i], layer_dims[i+1])
    biases: list[np.ndarray]
    target_mode: str = "pipeline_distance"
    seed: int = 0
    config: TrainConfig | None = None
    history: TrainHistory | None = None

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def parameters(self) -> list[np.ndarray]:
        return list(self.weights) + list(self.biases)


def init_network(input_dim: int, config: TrainConfig = TrainConfig()) -> MetricNetwork:
    """Seeded initialization: uniform weights scaled by 1/sqrt(fan_in), zero biases."""
    if input_dim < 1:
        raise ValueError("input_dim must be at least 1")
    dims = (input_dim, *config.hidden_dims, 1)
    rng = np.random.default_rng(config.seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-scale, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MetricNetwork(dims, weights, biases, config.target_mode, config.seed, config)


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def forward_batch(net: MetricNetwork, inputs: np.ndarray) -> np.ndarray:
    """(n, input_dim) -> (n,) nonnegative predicted distances."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != net.input_dim:
        raise DimensionMismatchError(
            f"expected inputs of shape (n, {net.input_dim}), got {inputs.shape}"
        )
    a = inputs
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W + b
        a = _softplus(z) if i == last else np.maximum(z, 0.0)
    return a[:, 0]


def forward(net: MetricNetwork, x: Sequence[float] | np.ndarray) -> float:
    """Single-input forward pass; always returns a nonnegative scalar."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise DimensionMismatchError(f"expected input of length {net.input_dim}, got shape {x.shape}")
    return float(forward_batch(net, x[None, :])[0])


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def _pairs_to_arrays(batch: Sequence[TrainingPair]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([p.input for p in batch])
    t = np.array([p.target for p in batch], dtype=np.float64)
    return X, t


def gradients_arrays(net: MetricNetwork, X: np.ndarray, targets: np.ndarray) -> Gradients:
    """Backpropagated gradient of mean squared error over the batch."""
    n = X.shape[0]
    if n == 0:
        raise ValueError("gradient batch must be nonempty")
    last = len(net.weights) - 1
    activations = [np.asarray(X, dtype=np.float64)]
    pre: list[np.ndarray] = []
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = activations[-1] @ W + b
        pre.append(z)
        activations.append(_softplus(z) if i == last else np.maximum(z, 0.0))

    out = activations[-1][:, 0]
    # d/d out of mean squared error
    delta = (2.0 / n) * (out - targets)
    grad: np.ndarray = delta[:, None] * _sigmoid(pre[last])
    gw: list[np.ndarray] = [None] * len(net.weights)  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * len(net.biases)  # type: ignore[list-item]
    for i in range(last, -1, -1):
        gw[i] = activations[i].T @ grad
        gb[i] = grad.sum(axis=0)
        if i > 0:
            grad = (grad @ net.weights[i].T) * (pre[i - 1] > 0.0)
    return Gradients(gw, gb)


def gradients(net: MetricNetwork, batch: Sequence[TrainingPair]) -> Gradients:
    X, t = _pairs_to_arrays(batch)
    return gradients_arrays(net, X, t)


def mean_squared_error(net: MetricNetwork, X: np.ndarray, targets: np.ndarray) -> float:
    diff = forward_batch(net, X) - targets
    return float((diff * diff).mean())


@dataclass
class AdamState:
    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]

    @staticmethod
    def zeros_like(net: MetricNetwork) -> "AdamState":
        return AdamState(
            [np.zeros_like(w) for w in net.weights],
            [np.zeros_like(w) for w in net.weights],
            [np.zeros_like(b) for b in net.biases],
            [np.zeros_like(b) for b in net.biases],
        )


def adam_update(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step_count: int,
    config: TrainConfig,
) -> None:
    """In-place Adam update with bias correction for one parameter array."""
    if step_count < 1:
        raise ValueError("step_count starts at 1")
    b1, b2 = config.adam_beta1, config.adam_beta2
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1**step_count)
    v_hat = v / (1.0 - b2**step_count)
    param -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)


def adam_step(
    net: MetricNetwork,
    grads: Gradients,
    state: AdamState,
    step_count: int,
    config: TrainConfig,
) -> MetricNetwork:
    """Apply one Adam step to every parameter of the network."""
    for W, g, m, v in zip(net.weights, grads.weights, state.m_weights, state.v_weights):
        adam_update(W, g, m, v, step_count, config)
    for b, g, m, v in zip(net.biases, grads.biases, state.m_biases, state.v_biases):
        adam_update(b, g, m, v, step_count, config)
    return net


def make_training_pairs(
    corpus: Corpus,
    e: Embedder | ExternalVectorStore,
    sources=(),
    exclude: str | None = None,
    target_mode: str = "pipeline_distance",
    protocol: Protocol | str = KFold(5),
    seed: int | None = None,
) -> list[TrainingPair]:
    """All ordered donor pairs (i, j), i != j, with their supervision targets.

    Both orderings of every unordered pair appear, so distance targets (which
    are symmetric) are seen symmetrically.
    """
    if target_mode not in TARGET_MODES:
        raise ValueError(f"target_mode must be one of {TARGET_MODES}")
    order = canonical_sources(sources)
    donors = [r for r in corpus.donors(order, exclude=exclude)]
    donors = sorted(donors, key=lambda r: r.id)
    if len(donors) < 2:
        raise PipelinePilotError(
            f"need at least 2 donors to build training pairs, found {len(donors)}"
        )
    reps = {r.id: build_representation(r, e, order).concat for r in donors}
    pipe_vecs = {r.id: pipeline_vector(r, "H", e) for r in donors}

    scores: dict[tuple[str, str], float] = {}
    if target_mode == "performance":
        datasets = {
            r.id: load_csv(corpus.resolve_data_path(r), r.task.target_column, r.task.task_type)
            for r in donors
        }
        for di in donors:
            for dj in donors:
                if di.id == dj.id:
                    continue
                record = evaluate(
                    di.human_pipeline().pipeline,
                    datasets[dj.id],
                    dj.task,
                    protocol=protocol,
                    seed=seed,
                    dataset_id=dj.id,
                )
                if record.failed:
                    raise PipelinePilotError(
                        f"performance target for ({di.id}, {dj.id}) failed: {record.error}"
                    )
                scores[(di.id, dj.id)] = record.score  # type: ignore[assignment]

    pairs = []
    for di in donors:
        for dj in donors:
            if di.id == dj.id:
                continue
            x = np.concatenate([reps[di.id], reps[dj.id]])
            if target_mode == "pipeline_distance":
                t = distance(pipe_vecs[di.id], pipe_vecs[dj.id])
            else:
                t = scores[(di.id, dj.id)]
            pairs.append(TrainingPair(x, t))
    return pairs


def train_on_pairs(pairs: Sequence[TrainingPair], config: TrainConfig = TrainConfig()) -> MetricNetwork:
    """Minibatch Adam training on prebuilt pairs; deterministic per seed."""
    if not pairs:
        raise PipelinePilotError("no training pairs")
    X, targets = _pairs_to_arrays(list(pairs))
    net = init_network(X.shape[1], config)
    state = AdamState.zeros_like(net)
    rng = np.random.default_rng(config.seed)
    initial_loss = mean_squared_error(net, X, targets)
    step = 0
    n = X.shape[0]
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = perm[lo : lo + config.batch_size]
            grads = gradients_arrays(net, X[idx], targets[idx])
            step += 1
            adam_step(net, grads, state, step, config)
    final_loss = mean_squared_error(net, X, targets)
    net.history = TrainHistory(initial_loss, final_loss, config.epochs)
    log.info(
        "trained %d epochs on %d pairs: loss %.6g -> %.6g",
        config.epochs, n, initial_loss, final_loss,
    )
    return net


def train(
    corpus: Corpus,
    e: Embedder | ExternalVectorStore,
    sources=(),
    exclude: str | None = None,
    config: TrainConfig = TrainConfig(),
) -> MetricNetwork:
    """Build pairs from the corpus (excluding the test dataset) and train."""
    pairs = make_training_pairs(
        corpus, e, sources, exclude=exclude, target_mode=config.target_mode
    )
    return train_on_pairs(pairs, config)


def recommend_learned(
    query: CorpusRecord,
    corpus: Corpus,
    net: MetricNetwork,
    e: Embedder | ExternalVectorStore,
    sources=(),
) -> TransferRecommendation:
    """Donor whose pairing with the query the network scores best.

    Distance-trained networks take (query, donor) pairs and pick the argmin;
    performance-trained networks take (donor, query) pairs and pick the
    argmax. Ties break to the smallest donor id.
    """
    started = time.perf_counter()
    order = canonical_sources(sources)
    donors = sorted(corpus.donors(order, exclude=query.id), key=lambda r: r.id)
    if not donors:
        raise PipelinePilotError("corpus has no eligible donors with a human pipeline")
    query_rep = build_representation(query, e, order).concat
    donor_reps = [build_representation(r, e, order).concat for r in donors]
    if net.target_mode == "performance":
        inputs = np.stack([np.concatenate([d, query_rep]) for d in donor_reps])
        outputs = forward_batch(net, inputs)
        best = int(np.argmax(outputs))
    else:
        inputs = np.stack([np.concatenate([query_rep, d]) for d in donor_reps])
        outputs = forward_batch(net, inputs)
        best = int(np.argmin(outputs))
    donor = donors[best]
    elapsed_ms = int((time.perf_counter() - started) * 1000)
    return TransferRecommendation(
        query_id=query.id,
        donor_id=donor.id,
        pipeline=donor.human_pipeline().pipeline,
        distance=float(outputs[best]),
        elapsed_ms=elapsed_ms,
    )


def save_network(net: MetricNetwork, path: str | Path) -> None:
    """Checkpoint as JSON; reals use shortest round-trip form, so reload is bit-exact."""
    config = net.config
    obj = {
        "layer_dims": list(net.layer_dims),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "target_mode": net.target_mode,
        "seed": net.seed,
        "config": None
        if config is None
        else {
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "adam_beta1": config.adam_beta1,
            "adam_beta2": config.adam_beta2,
            "adam_eps": config.adam_eps,
            "seed": config.seed,
            "hidden_dims": list(config.hidden_dims),
            "target_mode": config.target_mode,
        },
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_network(path: str | Path) -> MetricNetwork:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    dims = tuple(int(d) for d in obj["layer_dims"])
    weights = [np.asarray(w, dtype=np.float64) for w in obj["weights"]]
    biases = [np.asarray(b, dtype=np.float64) for b in obj["biases"]]
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        if weights[i].shape != (fan_in, fan_out) or biases[i].shape != (fan_out,):
            raise PipelinePilotError(f"checkpoint layer {i} shape does not match layer_dims")
    raw = obj.get("config")
    config = None
    if raw is not None:
        config = TrainConfig(
            batch_size=raw["batch_size"],
            epochs=raw["epochs"],
            learning_rate=raw["learning_rate"],
            adam_beta1=raw["adam_beta1"],
            adam_beta2=raw["adam_beta2"],
            adam_eps=raw["adam_eps"],
            seed=raw["seed"],
            hidden_dims=tuple(raw["hidden_dims"]),
            target_mode=raw["target_mode"],
        )
    return MetricNetwork(
        dims,
        weights,
        biases,
        obj.get("target_mode", "pipeline_distance"),
        int(obj.get("seed", 0)),
        config,
    )
