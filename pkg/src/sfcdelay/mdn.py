"""Mixture density network built directly on numpy.

A fully-connected net with ReLU hidden layers ends in a three-headed output
layer of width 3K: K softmax units for the mixing weights, K exponential
units for the component variances (plus a small floor), and K linear units
for the component means. Training minimizes the negative log-likelihood of
the observed delays with exact analytic gradients and adaptive moment
estimation; everything is deterministic under a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .mixstats import GaussianMixture

__all__ = [
    "MdnArchitecture",
    "MdnModel",
    "TrainConfig",
    "TrainResult",
    "MdnFormatError",
    "TrainingDivergedError",
    "init_model",
    "forward",
    "forward_batch",
    "nll_loss",
    "backward",
    "train",
    "save_model",
    "load_model",
    "as_predictor",
    "write_loss_trace",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


class MdnFormatError(ValueError):
    """Model file is malformed or disagrees with its declared shapes."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; reports where."""

    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class MdnArchitecture:
    input_dim: int
    hidden: tuple[int, ...] = (64, 32, 32)
    kernels: int = 3

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if any(w < 1 for w in self.hidden):
            raise ValueError("hidden widths must be >= 1")
        if self.kernels < 1:
            raise ValueError("kernels must be >= 1")

    @property
    def output_dim(self) -> int:
        return 3 * self.kernels

    def layer_dims(self) -> list[tuple[int, int]]:
        """(out, in) shape of every weight matrix, input to output."""
        widths = [self.input_dim, *self.hidden, self.output_dim]
        return [(widths[i + 1], widths[i]) for i in range(len(widths) - 1)]


@dataclass
class MdnModel:
    arch: MdnArchitecture
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    variance_floor: float = 1e-6

    def __post_init__(self):
        dims = self.arch.layer_dims()
        if len(self.weights) != len(dims) or len(self.biases) != len(dims):
            raise ValueError("layer count does not match architecture")
        for i, (out_d, in_d) in enumerate(dims):
            if self.weights[i].shape != (out_d, in_d):
                raise ValueError(
                    f"layer {i} weight shape {self.weights[i].shape}, expected {(out_d, in_d)}"
                )
            if self.biases[i].shape != (out_d,):
                raise ValueError(f"layer {i} bias shape {self.biases[i].shape}, expected ({out_d},)")
        if self.feature_mean.shape != (self.arch.input_dim,):
            raise ValueError("feature_mean length must equal input_dim")
        if self.feature_std.shape != (self.arch.input_dim,):
            raise ValueError("feature_std length must equal input_dim")
        if np.any(self.feature_std <= 0.0):
            raise ValueError("feature_std entries must be > 0")
        if not self.variance_floor > 0.0:
            raise ValueError("variance_floor must be > 0")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 512
    learning_rate: float = 1e-3
    seed: int = 0
    variance_floor: float = 1e-6
    holdout_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be > 0")
        if not self.variance_floor > 0.0:
            raise ValueError("variance_floor must be > 0")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in [0, 1)")


@dataclass
class TrainResult:
    model: MdnModel
    epoch_losses: list[float] = field(default_factory=list)  # mean NLL per sample
    holdout_nll: float = float("nan")


def init_model(
    arch: MdnArchitecture,
    rng: np.random.Generator,
    feature_mean: np.ndarray | None = None,
    feature_std: np.ndarray | None = None,
    variance_floor: float = 1e-6,
) -> MdnModel:
    """Fan-in-scaled uniform weights, zero biases, identity feature norm."""
    weights = []
    biases = []
    for out_d, in_d in arch.layer_dims():
        limit = 1.0 / np.sqrt(in_d)
        weights.append(rng.uniform(-limit, limit, size=(out_d, in_d)))
        biases.append(np.zeros(out_d))
    if feature_mean is None:
        feature_mean = np.zeros(arch.input_dim)
    if feature_std is None:
        feature_std = np.ones(arch.input_dim)
    return MdnModel(
        arch=arch,
        weights=weights,
        biases=biases,
        feature_mean=np.asarray(feature_mean, dtype=float),
        feature_std=np.asarray(feature_std, dtype=float),
        variance_floor=variance_floor,
    )


# ---------------------------------------------------------------------------
# Forward / loss / gradients

def _forward_pass(model: MdnModel, x: np.ndarray):
    """Returns (pre-activations per layer, activations per layer, heads)."""
    z = (x - model.feature_mean) / model.feature_std
    pre = []
    acts = [z]
    h = z
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = h @ w.T + b
        pre.append(a)
        h = a if i == last else np.maximum(a, 0.0)
        acts.append(h)
    k = model.arch.kernels
    out = acts[-1]
    logits = out[:, :k]
    log_var = out[:, k : 2 * k]
    means = out[:, 2 * k :]
    shifted = logits - logits.max(axis=1, keepdims=True)
    expl = np.exp(shifted)
    pi = expl / expl.sum(axis=1, keepdims=True)
    var = np.exp(log_var) + model.variance_floor
    return pre, acts, pi, var, means


def forward_batch(model: MdnModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mixture parameters (pi, means, variances), each (n, K), for raw features x."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.arch.input_dim:
        raise ValueError(f"features must be (n, {model.arch.input_dim}), got {x.shape}")
    _, _, pi, var, means = _forward_pass(model, x)
    return pi, means, var


def forward(model: MdnModel, b: Sequence[float]) -> GaussianMixture:
    """Predicted delay mixture for one queue-length observation."""
    b = np.asarray(b, dtype=float)
    if b.shape != (model.arch.input_dim,):
        raise ValueError(f"feature vector must have length {model.arch.input_dim}, got {b.shape}")
    pi, means, var = forward_batch(model, b[None, :])
    return GaussianMixture(zip(pi[0].tolist(), means[0].tolist(), var[0].tolist()))


def _log_components(pi, means, var, y):
    # log of pi_k * N(y | m_k, v_k), stabilized via log-sum-exp downstream
    return (
        np.log(pi)
        - 0.5 * (_LOG_2PI + np.log(var))
        - (y[:, None] - means) ** 2 / (2.0 * var)
    )


def _per_sample_nll(pi, means, var, y) -> np.ndarray:
    comp = _log_components(pi, means, var, y)
    top = comp.max(axis=1, keepdims=True)
    return -(top[:, 0] + np.log(np.exp(comp - top).sum(axis=1)))


def nll_loss(model: MdnModel, features: np.ndarray, targets: np.ndarray) -> float:
    """Total negative log-likelihood of the batch (a sum over samples)."""
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if len(features) == 0:
        raise ValueError("batch must be nonempty")
    pi, means, var = forward_batch(model, features)
    return float(_per_sample_nll(pi, means, var, targets).sum())


def backward(
    model: MdnModel, features: np.ndarray, targets: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact gradient of :func:`nll_loss` w.r.t. every (weight, bias) pair."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if len(x) == 0:
        raise ValueError("batch must be nonempty")
    pre, acts, pi, var, means = _forward_pass(model, x)
    comp = _log_components(pi, var=var, means=means, y=y)
    top = comp.max(axis=1, keepdims=True)
    w = np.exp(comp - top)
    gamma = w / w.sum(axis=1, keepdims=True)  # responsibilities

    diff = means - y[:, None]
    d_logits = pi - gamma
    d_means = gamma * diff / var
    d_var = gamma * (var - diff**2) / (2.0 * var**2)
    d_logvar = d_var * (var - model.variance_floor)  # chain through exp
    d_out = np.concatenate([d_logits, d_logvar, d_means], axis=1)

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.weights)  # type: ignore
    delta = d_out
    for i in range(len(model.weights) - 1, -1, -1):
        grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
        if i > 0:
            delta = (delta @ model.weights[i]) * (pre[i - 1] > 0.0)
    return grads


# ---------------------------------------------------------------------------
# Training

def train(
    features: np.ndarray,
    targets: np.ndarray,
    arch: MdnArchitecture | None = None,
    config: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Fit an MDN to (features, targets) by minibatch NLL descent.

    Feature standardization constants come from the training split; a
    fraction of the data is held out purely so the result can report an
    out-of-sample NLL. Identical inputs, config, and seed reproduce the
    model exactly.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or len(x) != len(y) or len(x) == 0:
        raise ValueError("features must be (n, d) aligned with n targets")
    if arch is None:
        arch = MdnArchitecture(input_dim=x.shape[1])
    if arch.input_dim != x.shape[1]:
        raise ValueError(f"architecture expects {arch.input_dim} features, data has {x.shape[1]}")

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(x))
    n_hold = int(round(config.holdout_fraction * len(x)))
    if n_hold >= len(x):
        n_hold = len(x) - 1
    hold_idx = perm[:n_hold]
    train_idx = perm[n_hold:]
    x_train, y_train = x[train_idx], y[train_idx]

    f_mean = x_train.mean(axis=0)
    f_std = x_train.std(axis=0)
    f_std[f_std <= 1e-12] = 1.0
    model = init_model(arch, rng, f_mean, f_std, config.variance_floor)

    # adaptive moment estimation, standard decay constants
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m_state = [
        (np.zeros_like(w), np.zeros_like(b)) for w, b in zip(model.weights, model.biases)
    ]
    v_state = [
        (np.zeros_like(w), np.zeros_like(b)) for w, b in zip(model.weights, model.biases)
    ]
    step = 0

    n_train = len(x_train)
    epoch_losses: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n_train)
        loss_sum = 0.0
        for bi, start in enumerate(range(0, n_train, config.batch_size)):
            idx = order[start : start + config.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            batch_nll = nll_loss(model, xb, yb)
            if not np.isfinite(batch_nll):
                raise TrainingDivergedError(epoch, bi)
            loss_sum += batch_nll
            grads = backward(model, xb, yb)
            scale = 1.0 / len(xb)
            step += 1
            bc1 = 1.0 - beta1**step
            bc2 = 1.0 - beta2**step
            for li, (gw, gb) in enumerate(grads):
                gw = gw * scale
                gb = gb * scale
                mw, mb = m_state[li]
                vw, vb = v_state[li]
                mw *= beta1
                mw += (1 - beta1) * gw
                mb *= beta1
                mb += (1 - beta1) * gb
                vw *= beta2
                vw += (1 - beta2) * gw * gw
                vb *= beta2
                vb += (1 - beta2) * gb * gb
                model.weights[li] -= config.learning_rate * (mw / bc1) / (np.sqrt(vw / bc2) + eps)
                model.biases[li] -= config.learning_rate * (mb / bc1) / (np.sqrt(vb / bc2) + eps)
        epoch_losses.append(loss_sum / n_train)

    holdout_nll = float("nan")
    if n_hold:
        holdout_nll = nll_loss(model, x[hold_idx], y[hold_idx]) / n_hold
    return TrainResult(model=model, epoch_losses=epoch_losses, holdout_nll=holdout_nll)


def as_predictor(source) -> Callable[[Sequence[float]], GaussianMixture]:
    """Normalize an MdnModel or any b->GaussianMixture callable to a callable."""
    if isinstance(source, MdnModel):
        return lambda b: forward(source, b)
    if callable(source):
        return source
    raise TypeError(f"predictor must be an MdnModel or callable, got {type(source)!r}")


# ---------------------------------------------------------------------------
# Persistence: plain text with explicit shape metadata.

def save_model(model: MdnModel, path) -> None:
    a = model.arch
    lines = [
        "# mdn model",
        "format 1",
        f"input_dim {a.input_dim}",
        "hidden " + " ".join(str(w) for w in a.hidden),
        f"kernels {a.kernels}",
        f"variance_floor {model.variance_floor!r}",
        "feature_mean " + " ".join(repr(v) for v in model.feature_mean),
        "feature_std " + " ".join(repr(v) for v in model.feature_std),
    ]
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        lines.append(f"layer {i} weight {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(repr(v) for v in row))
        lines.append(f"layer {i} bias {len(b)}")
        lines.append(" ".join(repr(v) for v in b))
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, text: str):
        self.lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        self.pos = 0

    def next(self, expect: str) -> list[str]:
        if self.pos >= len(self.lines):
            raise MdnFormatError(f"truncated model file: missing section {expect!r}")
        fields = self.lines[self.pos].split()
        self.pos += 1
        return fields

    def floats(self, expect: str, count: int) -> np.ndarray:
        fields = self.next(expect)
        try:
            values = np.array([float(f) for f in fields])
        except ValueError:
            raise MdnFormatError(f"non-numeric data in section {expect!r}") from None
        if len(values) != count:
            raise MdnFormatError(f"section {expect!r}: expected {count} values, got {len(values)}")
        return values


def load_model(path) -> MdnModel:
    with open(path) as fh:
        rd = _Reader(fh.read())

    def keyword(name: str) -> list[str]:
        fields = rd.next(name)
        if not fields or fields[0] != name:
            raise MdnFormatError(f"expected section {name!r}, found {' '.join(fields)!r}")
        return fields[1:]

    if keyword("format") != ["1"]:
        raise MdnFormatError("unsupported model format version")
    try:
        input_dim = int(keyword("input_dim")[0])
        hidden = tuple(int(w) for w in keyword("hidden"))
        kernels = int(keyword("kernels")[0])
        variance_floor = float(keyword("variance_floor")[0])
    except (ValueError, IndexError):
        raise MdnFormatError("malformed architecture header") from None
    arch = MdnArchitecture(input_dim=input_dim, hidden=hidden, kernels=kernels)
    f_mean = rd.floats("feature_mean", input_dim)
    f_std = rd.floats("feature_std", input_dim)

    weights = []
    biases = []
    for i, (out_d, in_d) in enumerate(arch.layer_dims()):
        head = rd.next(f"layer {i} weight")
        if head[:3] != ["layer", str(i), "weight"]:
            raise MdnFormatError(f"expected 'layer {i} weight', found {' '.join(head)!r}")
        try:
            rows, cols = int(head[3]), int(head[4])
        except (ValueError, IndexError):
            raise MdnFormatError(f"layer {i}: malformed weight shape") from None
        if (rows, cols) != (out_d, in_d):
            raise MdnFormatError(
                f"layer {i}: weight shape {(rows, cols)} contradicts architecture {(out_d, in_d)}"
            )
        w = np.empty((rows, cols))
        for r in range(rows):
            w[r] = rd.floats(f"layer {i} weight row {r}", cols)
        head = rd.next(f"layer {i} bias")
        if head[:3] != ["layer", str(i), "bias"]:
            raise MdnFormatError(f"expected 'layer {i} bias', found {' '.join(head)!r}")
        if int(head[3]) != out_d:
            raise MdnFormatError(f"layer {i}: bias length contradicts architecture")
        b = rd.floats(f"layer {i} bias", out_d)
        weights.append(w)
        biases.append(b)
    if rd.next("end") != ["end"]:
        raise MdnFormatError("missing end marker")
    try:
        return MdnModel(
            arch=arch,
            weights=weights,
            biases=biases,
            feature_mean=f_mean,
            feature_std=f_std,
            variance_floor=variance_floor,
        )
    except ValueError as exc:
        raise MdnFormatError(str(exc)) from None


def write_loss_trace(path, losses: Sequence[float]) -> None:
    """Two-column text: epoch index and mean NLL per sample."""
    with open(path, "w") as fh:
        fh.write("# epoch loss\n")
        for i, loss in enumerate(losses):
            fh.write(f"{i} {loss!r}\n")
