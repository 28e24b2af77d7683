"""Dense MLP surrogate with hand-written backprop and Adam.

Parameters are float64 while training; fitted and freshly initialized
models are rounded to float32-representable values so that the float32
checkpoint blob reproduces them exactly.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rfnet import N_REAL_CHANNELS

CHECKPOINT_MAGIC = "MOTIFMODEL 1"
CHECKPOINT_SUFFIX = ".motifmodel"


class SurrogateError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, message: str = "diverged"):
        self.epoch = epoch
        super().__init__(f"{message} at epoch {epoch}")


class LeakageError(RuntimeError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.activation not in ("relu", "tanh"):
            raise SurrogateError(f"activation must be relu or tanh, got {self.activation!r}")
        if min((self.input_dim, self.output_dim, *self.hidden)) < 1:
            raise SurrogateError(f"all layer sizes must be >= 1: {self}")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum((a + 1) * b for a, b in zip(sizes[:-1], sizes[1:]))

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "output_dim": self.output_dim,
            "activation": self.activation,
        }


def width_for_budget(n_params: int, input_dim: int, output_dim: int, depth: int) -> int:
    """Largest uniform hidden width whose MLP stays within ``n_params``."""
    # params(w) = (in+1)w + (depth-1)(w+1)w + (w+1)out, increasing in w
    a = depth - 1
    b = input_dim + 1 + (depth - 1) + output_dim
    c = output_dim - n_params
    w = (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a) if a else -c / b
    w = max(1, int(w))
    while MlpSpec(input_dim, (w + 1,) * depth, output_dim).n_params <= n_params:
        w += 1
    while w > 1 and MlpSpec(input_dim, (w,) * depth, output_dim).n_params > n_params:
        w -= 1
    return w


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a, dtype=np.float64)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


def channel_stats(y: np.ndarray, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean/std per real channel, pooled over the frequency points of the band."""
    blocks = np.asarray(y, dtype=float).reshape(len(y), N_REAL_CHANNELS, n_points)
    mean = blocks.mean(axis=(0, 2))
    std = blocks.std(axis=(0, 2))
    std = np.where(std > 1e-12, std, 1.0)
    return np.repeat(mean, n_points), np.repeat(std, n_points)


@dataclass
class Normalizer:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray
    source: str = ""  # digest of the arrays the statistics came from

    @classmethod
    def fit(cls, x, y, n_points: int) -> "Normalizer":
        x = np.asarray(x, dtype=float)
        x_std = x.std(axis=0)
        x_std = np.where(x_std > 1e-12, x_std, 1.0)
        y_mean, y_std = channel_stats(y, n_points)
        return cls(x.mean(axis=0), x_std, y_mean, y_std, _digest(x, y))

    @classmethod
    def identity(cls, input_dim: int, output_dim: int) -> "Normalizer":
        return cls(np.zeros(input_dim), np.ones(input_dim), np.zeros(output_dim), np.ones(output_dim), "identity")

    def with_outputs(self, y, n_points: int, x) -> "Normalizer":
        y_mean, y_std = channel_stats(y, n_points)
        return Normalizer(self.x_mean.copy(), self.x_std.copy(), y_mean, y_std, _digest(x, y))

    def to_dict(self) -> dict:
        return {
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean.tolist(),
            "y_std": self.y_std.tolist(),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(*(np.array(d[k], dtype=float) for k in ("x_mean", "x_std", "y_mean", "y_std")), d["source"])


@dataclass
class MlpModel:
    spec: MlpSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    normalizer: Normalizer
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def copy(self) -> "MlpModel":
        return MlpModel(
            self.spec,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            Normalizer(**{k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in vars(self.normalizer).items()}),
            self.seed,
            dict(self.meta),
        )

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def quantize(self) -> "MlpModel":
        """Round parameters to float32-representable values in place."""
        for p in self.params():
            p[...] = p.astype(np.float32)
        return self

    def hidden_forward(self, x) -> np.ndarray:
        """Network output in normalized units (before denormalization)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if x.shape[-1] != self.spec.input_dim:
            raise SurrogateError(f"expected input length {self.spec.input_dim}, got {x.shape[-1]}")
        h = (np.atleast_2d(x) - self.normalizer.x_mean) / self.normalizer.x_std
        act = _ACTIVATIONS[self.spec.activation][0]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = act(h @ w + b)
        z = h @ self.weights[-1] + self.biases[-1]
        return z[0] if single else z

    def forward(self, x) -> np.ndarray:
        return self.hidden_forward(x) * self.normalizer.y_std + self.normalizer.y_mean

    __call__ = forward


def _relu(a):
    return np.maximum(a, 0.0)


def _relu_grad(a, h):
    return (a > 0).astype(a.dtype)


def _tanh_grad(a, h):
    return 1.0 - h * h


_ACTIVATIONS = {"relu": (_relu, _relu_grad), "tanh": (np.tanh, _tanh_grad)}


def init_model(spec: MlpSpec, seed: int, normalizer: Normalizer | None = None) -> MlpModel:
    """He (relu) or Glorot (tanh) normal initialization, zero biases."""
    rng = np.random.default_rng(seed)
    sizes = spec.layer_sizes
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = i == len(sizes) - 2
        if spec.activation == "relu" and not last:
            scale = math.sqrt(2.0 / fan_in)
        else:
            scale = math.sqrt(2.0 / (fan_in + fan_out))
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    normalizer = normalizer or Normalizer.identity(spec.input_dim, spec.output_dim)
    return MlpModel(spec, weights, biases, normalizer, seed).quantize()


# --- loss and gradients ------------------------------------------------------


def _errors(pred, label, n_points: int) -> np.ndarray:
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    label = np.atleast_2d(np.asarray(label, dtype=float))
    width = N_REAL_CHANNELS * n_points
    if pred.shape != label.shape or pred.shape[-1] != width:
        raise SurrogateError(f"loss expects matching (..., {width}) arrays, got {pred.shape} and {label.shape}")
    return (pred - label).reshape(len(pred), N_REAL_CHANNELS, n_points)


def loss_freq(pred, label, n_points: int) -> float:
    """Mean over the 12 real channels of the per-channel RMSE over frequency.

    For a batch the per-sample values are averaged.
    """
    err = _errors(pred, label, n_points)
    rmse = np.sqrt(np.mean(err**2, axis=2))
    return float(rmse.mean(axis=1).mean())


def loss_freq_grad(pred, label, n_points: int) -> tuple[float, np.ndarray]:
    """Batch loss and its gradient w.r.t. the predictions.

    Channels whose error is exactly zero get a zero subgradient.
    """
    err = _errors(pred, label, n_points)
    rmse = np.sqrt(np.mean(err**2, axis=2, keepdims=True))
    scale = np.divide(1.0, rmse, out=np.zeros_like(rmse), where=rmse > 0)
    batch = err.shape[0]
    grad = err * scale / (n_points * N_REAL_CHANNELS * batch)
    return float(rmse.mean()), grad.reshape(batch, -1)


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def flat(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]


def gradients(model: MlpModel, x, y) -> tuple[float, Gradients]:
    """Loss and exact reverse-mode gradients for one batch."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if len(x) == 0:
        raise SurrogateError("empty batch")
    n_points = model.spec.output_dim // N_REAL_CHANNELS
    act, dact = _ACTIVATIONS[model.spec.activation]
    norm = model.normalizer
    h = (x - norm.x_mean) / norm.x_std
    pre, post = [], [h]
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        a = h @ w + b
        h = act(a)
        pre.append(a)
        post.append(h)
    z = h @ model.weights[-1] + model.biases[-1]
    pred = z * norm.y_std + norm.y_mean
    loss, dpred = loss_freq_grad(pred, y, n_points)
    delta = dpred * norm.y_std
    gw = [None] * len(model.weights)
    gb = [None] * len(model.biases)
    for layer in range(len(model.weights) - 1, -1, -1):
        gw[layer] = post[layer].T @ delta
        gb[layer] = delta.sum(axis=0)
        if layer:
            back = delta @ model.weights[layer].T
            delta = back * dact(pre[layer - 1], post[layer])
    return loss, Gradients(gw, gb)


# --- training -----------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 200
    seed: int = 0
    patience: int = 20

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise SurrogateError("learning rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise SurrogateError("Adam betas must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or self.patience < 1:
            raise SurrogateError("batch size >= 1, epochs >= 0 and patience >= 1 required")


class Adam:
    def __init__(self, params: list[np.ndarray], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step_count = 0

    def step(self, grads: list[np.ndarray]) -> None:
        c = self.cfg
        self.step_count += 1
        bc1 = 1 - c.beta1**self.step_count
        bc2 = 1 - c.beta2**self.step_count
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


@dataclass
class FitResult:
    model: MlpModel
    train_loss: list[float]
    val_loss: list[float]
    best_epoch: int

    @property
    def best_val(self) -> float:
        return min(self.val_loss) if self.val_loss else math.nan

    def best_so_far(self) -> list[float]:
        return list(np.minimum.accumulate(self.val_loss)) if self.val_loss else []


def check_normalizer(model: MlpModel, x_train, y_train) -> None:
    if model.normalizer.source != _digest(x_train, y_train):
        raise LeakageError("normalizer statistics were not computed from this training split")


def fit(model: MlpModel, train, val, cfg: TrainConfig, check_provenance: bool = True) -> FitResult:
    """Adam on shuffled mini-batches with early stopping on validation loss.

    Returns a new model holding the best-validation weights; ``model`` is not
    modified.
    """
    x_tr, y_tr = (np.asarray(a, dtype=float) for a in train)
    x_va, y_va = (np.asarray(a, dtype=float) for a in val)
    if check_provenance:
        check_normalizer(model, x_tr, y_tr)
    n_points = model.spec.output_dim // N_REAL_CHANNELS
    work = model.copy()
    if cfg.epochs == 0:
        return FitResult(work, [], [], 0)
    best = work.copy()
    best_val = loss_freq(work.forward(x_va), y_va, n_points)
    best_epoch = 0
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(work.params(), cfg)
    train_hist, val_hist = [], []
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(x_tr))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, g = gradients(work, x_tr[idx], y_tr[idx])
            if not math.isfinite(loss):
                raise DivergenceError(epoch)
            opt.step(g.flat())
            total += loss * len(idx)
        train_hist.append(total / len(x_tr))
        val = loss_freq(work.forward(x_va), y_va, n_points)
        if not math.isfinite(val):
            raise DivergenceError(epoch)
        val_hist.append(val)
        if val < best_val:
            best_val, best_epoch, stale = val, epoch, 0
            best = work.copy()
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return FitResult(best.quantize(), train_hist, val_hist, best_epoch)


def init_from(dst: MlpModel, src: MlpModel, y_train=None, x_train=None) -> MlpModel:
    """Warm start: copy src parameters into a model serving dst's band.

    Output statistics are recomputed from dst's own band labels when given,
    otherwise dst keeps its current normalizer.
    """
    if dst.spec != src.spec:
        raise SurrogateError(f"cannot transfer between different architectures: {src.spec} -> {dst.spec}")
    out = dst.copy()
    out.weights = [w.copy() for w in src.weights]
    out.biases = [b.copy() for b in src.biases]
    if y_train is not None:
        n_points = dst.spec.output_dim // N_REAL_CHANNELS
        out.normalizer = src.normalizer.with_outputs(y_train, n_points, x_train)
    return out


# --- checkpoints ---------------------------------------------------------------


def save_checkpoint(model: MlpModel, path, extra: dict | None = None) -> Path:
    path = Path(path)
    meta = {
        "spec": model.spec.to_dict(),
        "normalizer": model.normalizer.to_dict(),
        "seed": model.seed,
        "meta": {**model.meta, **(extra or {})},
        "layer_order": "for each layer: weight[in][out] row-major then bias[out], float32 little-endian",
    }
    blob = b"".join(
        np.ascontiguousarray(a, dtype="<f4").tobytes() for w, b in zip(model.weights, model.biases) for a in (w, b)
    )
    meta["blob_bytes"] = len(blob)
    header = (CHECKPOINT_MAGIC + "\n" + json.dumps(meta, sort_keys=True) + "\n").encode("utf-8")
    path.write_bytes(header + blob)
    return path


def load_checkpoint(path) -> MlpModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    first = raw.find(b"\n")
    second = raw.find(b"\n", first + 1)
    if first < 0 or second < 0 or raw[:first].decode("utf-8", "replace") != CHECKPOINT_MAGIC:
        raise SurrogateError(f"{path}: not a {CHECKPOINT_SUFFIX} checkpoint")
    meta = json.loads(raw[first + 1 : second].decode("utf-8"))
    blob = raw[second + 1 :]
    if len(blob) != meta["blob_bytes"]:
        raise SurrogateError(f"{path}: weight blob is {len(blob)} bytes, header says {meta['blob_bytes']}")
    s = meta["spec"]
    spec = MlpSpec(s["input_dim"], tuple(s["hidden"]), s["output_dim"], s["activation"])
    flat = np.frombuffer(blob, dtype="<f4").astype(float)
    weights, biases, off = [], [], 0
    sizes = spec.layer_sizes
    for a, b in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[off : off + a * b].reshape(a, b).copy())
        off += a * b
        biases.append(flat[off : off + b].copy())
        off += b
    return MlpModel(spec, weights, biases, Normalizer.from_dict(meta["normalizer"]), meta["seed"], meta["meta"])

