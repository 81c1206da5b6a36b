"""Sequence-to-sequence LSTM predictor written directly in numpy.

A single LSTM cell (gate order input, forget, output, candidate) first reads
the observed window and then keeps running as an autoregressive decoder: the
last observed frame seeds the decoder and every emitted frame is fed back as
the next input.  The output head predicts the frame-to-frame increment, so
``y_t = y_{t-1} + W_y h_t + b_y``.  All of this happens on z-scored channels;
the statistics come from the training data and are stored with the model.

Dropout acts on the cell input at every step and on the hidden state going
into the output head.  It follows the classic convention: stochastic passes
multiply by a Bernoulli(1 - p) mask, deterministic passes scale by ``1 - p``.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DivergedLoss, EmptyDataset, DataError
from .kinematics import normalize_pose

CHECKPOINT_MAGIC = "bvaukf-seqmodel"
CHECKPOINT_VERSION = 1
PARAM_NAMES = ("W", "U", "b", "Wy", "by")


@dataclass
class TrainConfig:
    learning_rate: float = 5e-3
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    bone_length_penalty_weight: float = 0.1
    gradient_clip_norm: float = 1.0
    hidden_dim: int = 32
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")


@dataclass
class MotionWindow:
    """Observed and future frames of one training sample, both ``(n, d)``."""

    observed: np.ndarray
    future: np.ndarray

    def __post_init__(self):
        self.observed = np.asarray(self.observed, dtype=float)
        self.future = np.asarray(self.future, dtype=float)
        if self.observed.ndim != 2 or self.future.ndim != 2:
            raise DimensionMismatch("window arrays must be 2-D")
        if self.observed.shape[1] != self.future.shape[1]:
            raise DimensionMismatch("observed and future widths differ")
        if not (np.all(np.isfinite(self.observed)) and np.all(np.isfinite(self.future))):
            raise DataError("window contains non-finite values")


@dataclass
class SeqModel:
    input_dim: int
    hidden_dim: int
    output_dim: int
    horizon: int
    dropout_rate: float = 0.1
    kind: str = "pose"
    params: dict = field(default_factory=dict)
    mean: np.ndarray = None
    std: np.ndarray = None
    history: dict = field(default_factory=lambda: {"train": [], "val": []})

    def __post_init__(self):
        if self.input_dim != self.output_dim:
            raise DimensionMismatch("autoregressive decoding needs input_dim == output_dim")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.kind not in ("pose", "force"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.mean is None:
            self.mean = np.zeros(self.input_dim)
        if self.std is None:
            self.std = np.ones(self.input_dim)
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)

    @classmethod
    def initialize(cls, input_dim, hidden_dim, horizon, dropout_rate=0.1, kind="pose", seed=0):
        rng = np.random.default_rng(seed)
        H, D = hidden_dim, input_dim
        scale = 1.0 / np.sqrt(H)
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0  # forget gate
        params = {
            "W": rng.uniform(-scale, scale, (4 * H, D)),
            "U": rng.uniform(-scale, scale, (4 * H, H)),
            "b": b,
            "Wy": rng.normal(0.0, 0.01, (D, H)),
            "by": np.zeros(D),
        }
        return cls(D, H, D, horizon, dropout_rate, kind, params)

    def copy(self):
        return SeqModel(
            self.input_dim, self.hidden_dim, self.output_dim, self.horizon,
            self.dropout_rate, self.kind,
            {k: v.copy() for k, v in self.params.items()},
            self.mean.copy(), self.std.copy(),
            {k: list(v) for k, v in self.history.items()},
        )


def dropout(x, p, rng=None):
    """Classic dropout: Bernoulli mask with ``rng``, ``(1 - p)`` scaling without."""
    if rng is None:
        return x * (1.0 - p)
    return x * (rng.random(x.shape) >= p)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------------------
# forward / backward


def _masks(model, B, N, rngs):
    """Input masks ``(N+M, B, D)`` and head masks ``(M, B, H)``.

    ``rngs`` is ``None`` for the deterministic pass, a single Generator shared
    by the batch, or one Generator per batch row.
    """
    M, D, H, p = model.horizon, model.input_dim, model.hidden_dim, model.dropout_rate
    if rngs is None:
        return np.full((N + M, B, D), 1.0 - p), np.full((M, B, H), 1.0 - p)
    if isinstance(rngs, np.random.Generator):
        return (rngs.random((N + M, B, D)) >= p).astype(float), (rngs.random((M, B, H)) >= p).astype(float)
    m_in = np.empty((N + M, B, D))
    m_out = np.empty((M, B, H))
    for j, r in enumerate(rngs):
        m_in[:, j] = r.random((N + M, D)) >= p
        m_out[:, j] = r.random((M, H)) >= p
    return m_in, m_out


def _forward(params, z_obs, horizon, m_in, m_out):
    """Run encoder and decoder on normalized inputs ``z_obs`` of shape ``(B, N, D)``."""
    W, U, b, Wy, by = (params[k] for k in PARAM_NAMES)
    B, N, _ = z_obs.shape
    H = U.shape[1]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    steps = []
    ys = []
    prev = z_obs[:, -1]
    for t in range(N + horizon):
        x = z_obs[:, t] if t < N else prev
        xin = x * m_in[t]
        a = xin @ W.T + h @ U.T + b
        i = _sigmoid(a[:, :H])
        f = _sigmoid(a[:, H:2 * H])
        o = _sigmoid(a[:, 2 * H:3 * H])
        g = np.tanh(a[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        steps.append((xin, h, c, i, f, o, g, tc))
        h, c = h_new, c_new
        if t >= N:
            s = t - N
            hd = h * m_out[s]
            y = prev + hd @ Wy.T + by
            ys.append((hd, y))
            prev = y
    Y = np.stack([y for _, y in ys], axis=1)
    return Y, (steps, ys, m_in, m_out, N)


def _backward(params, cache, dY):
    W, U, _, Wy, _ = (params[k] for k in PARAM_NAMES)
    steps, ys, m_in, m_out, N = cache
    H = U.shape[1]
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    B = dY.shape[0]
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    dprev = np.zeros(dY[:, 0].shape)
    for t in range(len(steps) - 1, -1, -1):
        xin, h_prev, c_prev, i, f, o, g, tc = steps[t]
        dh = dh_next
        if t >= N:
            s = t - N
            hd, _ = ys[s]
            dy = dY[:, s] + dprev
            grads["Wy"] += dy.T @ hd
            grads["by"] += dy.sum(axis=0)
            dh = dh + (dy @ Wy) * m_out[s]
        dc = dc_next + dh * o * (1.0 - tc**2)
        da = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dh * tc * o * (1.0 - o),
            dc * i * (1.0 - g**2),
        ], axis=1)
        grads["W"] += da.T @ xin
        grads["U"] += da.T @ h_prev
        grads["b"] += da.sum(axis=0)
        dh_next = da @ U
        dc_next = dc * f
        if t >= N:
            # gradient w.r.t. the decoder input y_{s-1}: residual path + cell input
            dprev = dy + (da @ W) * m_in[t]
    return grads


def _normalize(model, arr):
    return (arr - model.mean) / model.std


def _denormalize(model, arr):
    return arr * model.std + model.mean


def _check_dims(model, arr):
    if arr.ndim not in (2, 3) or arr.shape[-1] != model.input_dim:
        raise DimensionMismatch(
            f"expected (..., {model.input_dim}) observations, got shape {arr.shape}")


def predict_batch(model, observed, rngs=None, renormalize=True):
    """Predict ``(B, M, d)`` futures for a batch of observations ``(B, N, d)``."""
    observed = np.asarray(observed, dtype=float)
    _check_dims(model, observed)
    B, N, _ = observed.shape
    m_in, m_out = _masks(model, B, N, rngs)
    Z, _ = _forward(model.params, _normalize(model, observed), model.horizon, m_in, m_out)
    out = _denormalize(model, Z)
    if renormalize and model.kind == "pose":
        out = normalize_pose(out)
    return out


def predict(model, observed, dropout_mask_seed=None):
    """Predict ``M`` future frames from ``N`` observed frames.

    Parameters
    ----------
    model : SeqModel
    observed : array_like, shape (N, d)
    dropout_mask_seed : int, optional
        When given, dropout masks are sampled from this seed (stochastic
        pass).  When omitted, the deterministic scaled pass is used.

    Returns
    -------
    ndarray, shape (M, d)
        Pose models return unit-norm bone vectors.
    """
    observed = np.asarray(observed, dtype=float)
    if observed.ndim != 2:
        raise DimensionMismatch("observed must be a 2-D (N, d) array")
    rngs = None if dropout_mask_seed is None else [np.random.default_rng(dropout_mask_seed)]
    return predict_batch(model, observed[None], rngs)[0]


# ---------------------------------------------------------------------------
# loss and training


def _stack_windows(windows):
    obs = np.stack([w.observed for w in windows])
    fut = np.stack([w.future for w in windows])
    return obs, fut


def _loss_and_grad(model, obs, fut, rngs, bone_penalty, need_grad=True):
    B, N, D = obs.shape
    if D != model.input_dim or fut.shape[1:] != (model.horizon, D):
        raise DimensionMismatch(
            f"windows must be (N, {model.input_dim}) -> ({model.horizon}, {model.input_dim})")
    m_in, m_out = _masks(model, B, N, rngs)
    Z, cache = _forward(model.params, _normalize(model, obs), model.horizon, m_in, m_out)
    resid = Z - _normalize(model, fut)
    loss = np.mean(resid**2)
    dZ = 2.0 * resid / resid.size
    if model.kind == "pose" and bone_penalty > 0:
        raw = _denormalize(model, Z)
        d_raw = np.zeros_like(raw)
        for sl in (slice(0, 3), slice(3, 6)):
            n = np.linalg.norm(raw[..., sl], axis=-1, keepdims=True)
            loss += bone_penalty * np.mean((n - 1.0) ** 2)
            d_raw[..., sl] = bone_penalty * 2.0 * (n - 1.0) * raw[..., sl] / n / (B * model.horizon)
        dZ = dZ + d_raw * model.std
    if not need_grad:
        return loss, None
    return loss, _backward(model.params, cache, dZ)


def loss(model, window, seed=None, bone_penalty=0.1):
    """Training objective for one window.

    Mean squared error on z-scored channels, plus for pose models
    ``bone_penalty * mean((|s_a| - 1)^2 + (|s_b| - 1)^2)`` over the raw
    predicted bone vectors.  ``seed`` selects the dropout masks; ``None``
    gives the deterministic pass.
    """
    rngs = None if seed is None else np.random.default_rng(seed)
    obs, fut = _stack_windows([window])
    value, _ = _loss_and_grad(model, obs, fut, rngs, bone_penalty, need_grad=False)
    return float(value)


def loss_and_gradient(model, window, seed=None, bone_penalty=0.1):
    """Return ``(loss, grads)`` where ``grads`` mirrors ``model.params``."""
    rngs = None if seed is None else np.random.default_rng(seed)
    obs, fut = _stack_windows([window])
    value, grads = _loss_and_grad(model, obs, fut, rngs, bone_penalty)
    return float(value), grads


def fit_normalization(windows, min_std=1e-3):
    data = np.concatenate([np.concatenate([w.observed, w.future]) for w in windows])
    return data.mean(axis=0), np.maximum(data.std(axis=0), min_std)


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k in PARAM_NAMES:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def _clip(grads, max_norm):
    norm = np.sqrt(sum(np.sum(g * g) for g in grads.values()))
    if max_norm and norm > max_norm:
        for g in grads.values():
            g *= max_norm / norm
    return norm


def evaluate_loss(model, windows, bone_penalty=0.1, batch_size=256):
    """Deterministic-pass loss averaged over ``windows``."""
    total = 0.0
    for start in range(0, len(windows), batch_size):
        chunk = windows[start:start + batch_size]
        obs, fut = _stack_windows(chunk)
        value, _ = _loss_and_grad(model, obs, fut, None, bone_penalty, need_grad=False)
        total += value * len(chunk)
    return total / len(windows)


def train(dataset, cfg, kind="pose", validation=None, log=None):
    """Fit a :class:`SeqModel` with Adam and backpropagation through time.

    Parameters
    ----------
    dataset : list of MotionWindow
    cfg : TrainConfig
    kind : {"pose", "force"}
    validation : list of MotionWindow, optional
        Scored with the deterministic pass after every epoch.  The training
        set is used when omitted.
    log : callable, optional
        Called as ``log(epoch, train_loss, val_loss)``.

    Raises
    ------
    EmptyDataset
    DivergedLoss
        If the loss becomes NaN or infinite.
    """
    if not dataset:
        raise EmptyDataset("no training windows")
    obs, fut = _stack_windows(dataset)
    D = obs.shape[2]
    horizon = fut.shape[1]
    model = SeqModel.initialize(D, cfg.hidden_dim, horizon, cfg.dropout_rate, kind, cfg.seed)
    model.mean, model.std = fit_normalization(dataset)
    validation = validation or dataset
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.params, cfg.learning_rate)
    lam = cfg.bone_length_penalty_weight if kind == "pose" else 0.0
    n = len(dataset)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            value, grads = _loss_and_grad(model, obs[idx], fut[idx], rng, lam)
            if not np.isfinite(value):
                raise DivergedLoss(f"loss became {value} in epoch {epoch}")
            _clip(grads, cfg.gradient_clip_norm)
            opt.step(model.params, grads)
            epoch_loss += value * len(idx)
        val_loss = evaluate_loss(model, validation, lam)
        if not np.isfinite(val_loss):
            raise DivergedLoss(f"validation loss became {val_loss} in epoch {epoch}")
        model.history["train"].append(epoch_loss / n)
        model.history["val"].append(val_loss)
        if log is not None:
            log(epoch, epoch_loss / n, val_loss)
    return model


# ---------------------------------------------------------------------------
# serialization


def to_dict(model):
    return {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "output_dim": model.output_dim,
        "horizon": model.horizon,
        "dropout_rate": model.dropout_rate,
        "mean": model.mean.tolist(),
        "std": model.std.tolist(),
        "params": {k: model.params[k].tolist() for k in PARAM_NAMES},
        "history": model.history,
    }


def from_dict(d):
    if d.get("magic") != CHECKPOINT_MAGIC:
        raise DataError("not a sequence-model checkpoint")
    if d.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {d.get('version')}")
    model = SeqModel(
        d["input_dim"], d["hidden_dim"], d["output_dim"], d["horizon"],
        d["dropout_rate"], d["kind"],
        {k: np.asarray(d["params"][k], dtype=float) for k in PARAM_NAMES},
        np.asarray(d["mean"]), np.asarray(d["std"]),
        {k: list(v) for k, v in d.get("history", {"train": [], "val": []}).items()},
    )
    H, D = model.hidden_dim, model.input_dim
    expected = {"W": (4 * H, D), "U": (4 * H, H), "b": (4 * H,), "Wy": (D, H), "by": (D,)}
    for k, shape in expected.items():
        if model.params[k].shape != shape:
            raise DataError(f"checkpoint parameter {k} has shape {model.params[k].shape}, expected {shape}")
    return model


def save(model, path):
    with open(path, "w") as fh:
        json.dump(to_dict(model), fh)


def load(path):
    with open(path) as fh:
        return from_dict(json.load(fh))
