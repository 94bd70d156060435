"""From-scratch LSTM regressor on factor sequences.

Single LSTM layer with a linear scalar readout.  The recurrence per step:

    i = sigmoid(W_i x + U_i h + b_i)      f = sigmoid(W_f x + U_f h + b_f)
    o = sigmoid(W_o x + U_o h + b_o)      g = tanh(W_g x + U_g h + b_g)
    c' = f*c + i*g                        h' = o * tanh(c')

and prediction = w_out . h_final + b_out.  Training minimizes the mean
squared error between predicted and actual returns, plus an L2 penalty on
the weight matrices, via exact backpropagation through time and
adaptive-moment updates.  Everything is plain numpy and deterministic for a
fixed seed; :func:`grad_check` verifies the analytic gradients against
central finite differences.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import (
    DimensionMismatch,
    DivergedLoss,
    EmptyInput,
    InvalidConfig,
    LengthMismatch,
    NonFiniteInput,
    StaleTape,
    TooShort,
)
from .marketdata import FactorPanel

#: Field order fixed for initialization, updates, and serialization.
PARAM_FIELDS = ("W_i", "W_f", "W_o", "W_g", "U_i", "U_f", "U_o", "U_g",
                "b_i", "b_f", "b_o", "b_g", "w_out", "b_out")
#: Fields the L2 penalty applies to (biases are not penalized).
WEIGHT_FIELDS = ("W_i", "W_f", "W_o", "W_g", "U_i", "U_f", "U_o", "U_g", "w_out")


@dataclass
class TrainConfig:
    window: int = 20
    hidden_size: int = 32
    epochs: int = 50
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    seed: int = 0
    grad_clip: float = 5.0
    l2: float = 1e-5

    def __post_init__(self):
        if self.window < 1 or self.epochs < 1 or self.batch_size < 1:
            raise InvalidConfig("window, epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be > 0")


@dataclass
class LstmParams:
    """Gate weights, recurrent weights, biases, and the linear readout."""

    hidden_size: int
    input_size: int
    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_g: np.ndarray
    U_i: np.ndarray
    U_f: np.ndarray
    U_o: np.ndarray
    U_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray  # shape (1,)
    version: int = 0   # bumped on every update; stamps tapes

    def param_items(self) -> List[Tuple[str, np.ndarray]]:
        return [(name, getattr(self, name)) for name in PARAM_FIELDS]

    def check_finite(self) -> None:
        for name, arr in self.param_items():
            if not np.all(np.isfinite(arr)):
                raise NonFiniteInput(f"parameter {name} contains NaN/Inf")


@dataclass
class LstmState:
    """Hidden and cell vectors; h stays in (-1, 1) by construction."""

    h: np.ndarray
    c: np.ndarray


@dataclass
class Tape:
    """Cached activations from one forward pass, enough for exact BPTT."""

    params_version: int
    x: np.ndarray        # (B, T, n)
    i: np.ndarray        # (T, B, H)
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    tc: np.ndarray       # tanh(c_t)
    h_prev: np.ndarray   # h_{t-1}
    c_prev: np.ndarray   # c_{t-1}
    h_final: np.ndarray  # (B, H)
    pred: np.ndarray     # (B,)


def init_params(hidden_size: int, input_size: int,
                rng: np.random.Generator) -> LstmParams:
    """Seeded uniform(-k, k) with k = 1/sqrt(H); forget bias set to 1.0."""
    if hidden_size < 1 or input_size < 1:
        raise InvalidConfig("hidden_size and input_size must be >= 1")
    h, n = hidden_size, input_size
    k = 1.0 / np.sqrt(h)
    shapes = {"W_i": (h, n), "W_f": (h, n), "W_o": (h, n), "W_g": (h, n),
              "U_i": (h, h), "U_f": (h, h), "U_o": (h, h), "U_g": (h, h),
              "b_i": (h,), "b_f": (h,), "b_o": (h,), "b_g": (h,),
              "w_out": (h,), "b_out": (1,)}
    arrays = {name: rng.uniform(-k, k, shapes[name]) for name in PARAM_FIELDS}
    arrays["b_f"] = np.ones(h)
    return LstmParams(hidden_size=h, input_size=n, **arrays)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward_batch(params: LstmParams, x: np.ndarray) -> Tuple[np.ndarray, Tape]:
    b, t, n = x.shape
    hs = params.hidden_size
    h = np.zeros((b, hs))
    c = np.zeros((b, hs))
    cache = {k: np.empty((t, b, hs)) for k in ("i", "f", "o", "g", "tc",
                                               "h_prev", "c_prev")}
    for step in range(t):
        xt = x[:, step, :]
        cache["h_prev"][step] = h
        cache["c_prev"][step] = c
        i = _sigmoid(xt @ params.W_i.T + h @ params.U_i.T + params.b_i)
        f = _sigmoid(xt @ params.W_f.T + h @ params.U_f.T + params.b_f)
        o = _sigmoid(xt @ params.W_o.T + h @ params.U_o.T + params.b_o)
        g = np.tanh(xt @ params.W_g.T + h @ params.U_g.T + params.b_g)
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        cache["i"][step], cache["f"][step], cache["o"][step] = i, f, o
        cache["g"][step], cache["tc"][step] = g, tc
    pred = h @ params.w_out + params.b_out[0]
    return pred, Tape(params.version, x, cache["i"], cache["f"], cache["o"],
                      cache["g"], cache["tc"], cache["h_prev"], cache["c_prev"],
                      h, pred)


def forward(params: LstmParams, sequence: np.ndarray) -> Tuple[float, Tape]:
    """Run one window through the network from zero state.

    Returns the scalar prediction and a tape for :func:`backward`.

    Raises:
        DimensionMismatch: sequence column count != input_size.
        NonFiniteInput: sequence contains NaN/Inf.
    """
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 2 or seq.shape[1] != params.input_size:
        raise DimensionMismatch(
            f"expected (window, {params.input_size}) inputs, got {seq.shape}")
    if not np.all(np.isfinite(seq)):
        raise NonFiniteInput("sequence contains NaN/Inf")
    pred, tape = _forward_batch(params, seq[None, :, :])
    return float(pred[0]), tape


def mse_loss(predictions: np.ndarray, actuals: np.ndarray) -> float:
    """Mean squared error between predicted and actual returns.

    Raises:
        EmptyInput: zero-length inputs.
        LengthMismatch: unequal lengths.
    """
    p = np.asarray(predictions, dtype=float).ravel()
    a = np.asarray(actuals, dtype=float).ravel()
    if p.size != a.size:
        raise LengthMismatch(f"{p.size} predictions vs {a.size} actuals")
    if p.size == 0:
        raise EmptyInput("mse_loss of empty series")
    d = p - a
    return float(np.dot(d, d) / d.size)


def _zero_grads(params: LstmParams) -> Dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.param_items()}


def _backward_batch(params: LstmParams, tape: Tape, targets: np.ndarray,
                    l2: float) -> Dict[str, np.ndarray]:
    if tape.params_version != params.version:
        raise StaleTape("tape was recorded for a different parameter version")
    b, t, _ = tape.x.shape
    grads = _zero_grads(params)

    dpred = 2.0 * (tape.pred - targets) / b
    grads["w_out"] += tape.h_final.T @ dpred
    grads["b_out"] += dpred.sum()
    dh = np.outer(dpred, params.w_out)
    dc = np.zeros_like(dh)

    for step in range(t - 1, -1, -1):
        i, f, o = tape.i[step], tape.f[step], tape.o[step]
        g, tc = tape.g[step], tape.tc[step]
        xt = tape.x[:, step, :]
        hp, cp = tape.h_prev[step], tape.c_prev[step]

        da_o = dh * tc * o * (1.0 - o)
        dc = dc + dh * o * (1.0 - tc * tc)
        da_f = dc * cp * f * (1.0 - f)
        da_i = dc * g * i * (1.0 - i)
        da_g = dc * i * (1.0 - g * g)

        grads["W_i"] += da_i.T @ xt
        grads["W_f"] += da_f.T @ xt
        grads["W_o"] += da_o.T @ xt
        grads["W_g"] += da_g.T @ xt
        grads["U_i"] += da_i.T @ hp
        grads["U_f"] += da_f.T @ hp
        grads["U_o"] += da_o.T @ hp
        grads["U_g"] += da_g.T @ hp
        grads["b_i"] += da_i.sum(axis=0)
        grads["b_f"] += da_f.sum(axis=0)
        grads["b_o"] += da_o.sum(axis=0)
        grads["b_g"] += da_g.sum(axis=0)

        dh = da_i @ params.U_i + da_f @ params.U_f + da_o @ params.U_o \
            + da_g @ params.U_g
        dc = dc * f

    if l2 != 0.0:
        for name in WEIGHT_FIELDS:
            grads[name] += 2.0 * l2 * getattr(params, name)
    return grads


def backward(params: LstmParams, tape: Tape, target: float,
             l2: float = 0.0) -> Dict[str, np.ndarray]:
    """Exact gradients of the per-sample loss w.r.t. every parameter.

    The loss is (prediction - target)**2 plus l2 * sum of squared weight
    matrix entries (biases are not penalized).

    Raises:
        StaleTape: the tape was recorded under a different parameter version.
    """
    return _backward_batch(params, tape, np.array([target]), l2)


def _sample_loss(params: LstmParams, inputs: np.ndarray, target: float,
                 l2: float) -> float:
    pred, _ = forward(params, inputs)
    loss = (pred - target) ** 2
    if l2 != 0.0:
        loss += l2 * sum(float(np.sum(getattr(params, n) ** 2))
                         for n in WEIGHT_FIELDS)
    return loss


def grad_check(params: LstmParams, sample: "Sample", eps: float,
               l2: float = 0.0) -> float:
    """Max relative error between BPTT and central finite differences.

    Relative error per parameter entry is |a - b| / max(|a|, |b|, 1e-8).
    Always returns a value; small is good (< 1e-5 at eps = 1e-5).
    """
    if eps <= 0:
        raise InvalidConfig("eps must be > 0")
    pred, tape = forward(params, sample.inputs)
    analytic = backward(params, tape, sample.target, l2)
    worst = 0.0
    for name, arr in params.param_items():
        flat = arr.reshape(-1)
        ana = analytic[name].reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            lp = _sample_loss(params, sample.inputs, sample.target, l2)
            flat[k] = orig - eps
            lm = _sample_loss(params, sample.inputs, sample.target, l2)
            flat[k] = orig
            num = (lp - lm) / (2.0 * eps)
            rel = abs(num - ana[k]) / max(abs(num), abs(ana[k]), 1e-8)
            worst = max(worst, rel)
    return worst


@dataclass
class Sample:
    """One training window: factors up to day t, target return at day t+1."""

    inputs: np.ndarray   # (window, n)
    target: float
    asset_id: str = ""
    end_index: int = -1     # index of the last input day
    target_index: int = -1  # index of the target day (= end_index + 1)


def make_windows(panel: FactorPanel, returns: np.ndarray, window: int) -> List[Sample]:
    """Stride-1 sliding windows; each target is the day after the window.

    ``returns`` is (days, assets) aligned with the panel calendar.  Samples
    are ordered by end day, then asset, so a positional split is a time
    split.

    Raises:
        TooShort: series length must exceed the window.
    """
    m = panel.n_days
    r = np.asarray(returns, dtype=float)
    if r.shape[0] != m:
        raise LengthMismatch("returns are not aligned with the factor panel")
    if window < 1:
        raise InvalidConfig("window must be >= 1")
    if m <= window:
        raise TooShort(f"need more than window={window} days, have {m}")
    samples = []
    for end in range(window - 1, m - 1):
        for a, aid in enumerate(panel.asset_ids):
            samples.append(Sample(panel.values[end - window + 1:end + 1, a, :].copy(),
                                  float(r[end + 1, a]), aid, end, end + 1))
    return samples


def adam_step(param: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray,
              step: int, cfg: TrainConfig) -> None:
    """One in-place adaptive-moment update; m and v are updated too."""
    m *= cfg.beta1
    m += (1.0 - cfg.beta1) * grad
    v *= cfg.beta2
    v += (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1 ** step)
    v_hat = v / (1.0 - cfg.beta2 ** step)
    param -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


def train(samples: List[Sample], cfg: TrainConfig) -> Tuple[LstmParams, List[float]]:
    """Mini-batch training; returns final params and mean loss per epoch.

    Deterministic for a fixed seed: initialization and the per-epoch shuffle
    both come from one generator, and accumulation order inside a batch is
    fixed.  The recorded loss is the plain prediction MSE (the L2 penalty
    enters the gradients only).

    Raises:
        EmptyInput: no samples.
        DivergedLoss: a non-finite loss appeared; carries the epoch index.
    """
    if not samples:
        raise EmptyInput("train() needs at least one sample")
    n = samples[0].inputs.shape[1]
    x = np.stack([s.inputs for s in samples]).astype(float)
    y = np.array([s.target for s in samples], dtype=float)
    if x.ndim != 3 or x.shape[2] != n:
        raise DimensionMismatch("samples disagree on input width")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("training samples contain NaN/Inf")

    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg.hidden_size, n, rng)
    m_state = _zero_grads(params)
    v_state = _zero_grads(params)
    step = 0
    total = len(samples)
    curve: List[float] = []

    for epoch in range(cfg.epochs):
        perm = rng.permutation(total)
        sq_sum = 0.0
        for b0 in range(0, total, cfg.batch_size):
            idx = perm[b0:b0 + cfg.batch_size]
            preds, tape = _forward_batch(params, x[idx])
            err = preds - y[idx]
            batch_sq = float(np.dot(err, err))
            if not np.isfinite(batch_sq):
                raise DivergedLoss(epoch)
            sq_sum += batch_sq

            grads = _backward_batch(params, tape, y[idx], cfg.l2)
            if np.isfinite(cfg.grad_clip):
                norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
                if norm > cfg.grad_clip:
                    scale = cfg.grad_clip / norm
                    for g in grads.values():
                        g *= scale
            step += 1
            for name, arr in params.param_items():
                adam_step(arr, grads[name], m_state[name], v_state[name], step, cfg)
            params.version += 1
        curve.append(sq_sum / total)

    params.check_finite()
    return params, curve


# -- serialization ---------------------------------------------------------------

MAGIC = b"FBTL"
FORMAT_VERSION = 1


def save_params(params: LstmParams, path: str) -> None:
    """Versioned binary: magic, format u32, dims, then matrices as LE f64."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", FORMAT_VERSION, params.hidden_size,
                             params.input_size))
        for _, arr in params.param_items():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_params(path: str) -> LstmParams:
    """Read and validate a file written by :func:`save_params`.

    Raises:
        InvalidConfig: bad magic, unsupported version, or truncated payload.
        NonFiniteInput: stored parameters contain NaN/Inf.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise InvalidConfig("not a factorbt LSTM parameter file")
    version, h, n = struct.unpack_from("<III", blob, 4)
    if version != FORMAT_VERSION:
        raise InvalidConfig(f"unsupported parameter format version {version}")
    if h < 1 or n < 1:
        raise InvalidConfig("stored dimensions must be >= 1")
    shapes = [(h, n)] * 4 + [(h, h)] * 4 + [(h,)] * 4 + [(h,), (1,)]
    need = 16 + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(blob) != need:
        raise InvalidConfig(f"parameter file has {len(blob)} bytes, expected {need}")
    offset = 16
    arrays = {}
    for name, shape in zip(PARAM_FIELDS, shapes):
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(blob, "<f8", count, offset).reshape(shape).copy()
        offset += 8 * count
    params = LstmParams(hidden_size=h, input_size=n, **arrays)
    params.check_finite()
    return params
