"""Minimal neural engine sized for the straggler predictor.

Architecture: a 3-matrix fully-connected encoder (d_in -> 128 -> 128 -> 32,
softplus after every layer), a 2-layer LSTM with hidden size 32 fed by the
encoder output, and a 32 -> 2 head that emits the Pareto pair as
(1 + relu(raw0), relu(raw1)).

Everything runs in float64 on numpy. Gradients are exact backpropagation
through time over the observation window; `backward` is validated against
central finite differences in the test suite. No autodiff, no batching:
training is one sequence at a time, which keeps runs bit-reproducible.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .pareto import ParetoParams

ENC_WIDTHS = (128, 128, 32)
HIDDEN = 32
LSTM_LAYERS = 2
GATES = 4  # i, f, g, o

CHECKPOINT_MAGIC = b"STRTCKPT"
CHECKPOINT_VERSION = 1

# Canonical tensor order for checkpoints and Adam buffers.
PARAM_ORDER = (
    "enc_w0", "enc_b0", "enc_w1", "enc_b1", "enc_w2", "enc_b2",
    "lstm0_wx", "lstm0_wh", "lstm0_b",
    "lstm1_wx", "lstm1_wh", "lstm1_b",
    "head_w", "head_b",
)


def softplus(x):
    """ln(1 + e^x), overflow-safe for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmState:
    """Hidden and cell vectors, one row per stacked layer."""

    h: np.ndarray  # (LSTM_LAYERS, HIDDEN)
    c: np.ndarray  # (LSTM_LAYERS, HIDDEN)

    @classmethod
    def zeros(cls) -> "LstmState":
        return cls(
            h=np.zeros((LSTM_LAYERS, HIDDEN), dtype=np.float64),
            c=np.zeros((LSTM_LAYERS, HIDDEN), dtype=np.float64),
        )

    def copy(self) -> "LstmState":
        return LstmState(h=self.h.copy(), c=self.c.copy())


class NetworkWeights:
    """All trainable tensors plus Adam moment buffers and the step counter."""

    def __init__(self, params: dict[str, np.ndarray], adam_m=None, adam_v=None, step_count=0):
        missing = [k for k in PARAM_ORDER if k not in params]
        if missing:
            raise ValueError(f"missing parameter tensors: {missing}")
        self.params = params
        self.adam_m = adam_m or {k: np.zeros_like(v) for k, v in params.items()}
        self.adam_v = adam_v or {k: np.zeros_like(v) for k, v in params.items()}
        self.step_count = int(step_count)

    @property
    def d_in(self) -> int:
        return self.params["enc_w0"].shape[0]

    @classmethod
    def create(cls, d_in: int, seed: int = 0) -> "NetworkWeights":
        """Glorot-uniform init; biases zero except LSTM forget gates at 1.0."""
        if d_in < 1:
            raise ValueError(f"d_in must be >= 1, got {d_in}")
        rng = np.random.Generator(np.random.PCG64(seed))

        def glorot(rows: int, cols: int) -> np.ndarray:
            limit = np.sqrt(6.0 / (rows + cols))
            return rng.uniform(-limit, limit, size=(rows, cols))

        w1, w2, w3 = ENC_WIDTHS
        params: dict[str, np.ndarray] = {
            "enc_w0": glorot(d_in, w1),
            "enc_b0": np.zeros(w1),
            "enc_w1": glorot(w1, w2),
            "enc_b1": np.zeros(w2),
            "enc_w2": glorot(w2, w3),
            "enc_b2": np.zeros(w3),
        }
        for layer in range(LSTM_LAYERS):
            params[f"lstm{layer}_wx"] = glorot(HIDDEN, GATES * HIDDEN)
            params[f"lstm{layer}_wh"] = glorot(HIDDEN, GATES * HIDDEN)
            b = np.zeros(GATES * HIDDEN)
            b[HIDDEN : 2 * HIDDEN] = 1.0  # forget gate
            params[f"lstm{layer}_b"] = b
        params["head_w"] = glorot(HIDDEN, 2)
        params["head_b"] = np.zeros(2)
        return cls(params)

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.adam_m.items()},
            {k: v.copy() for k, v in self.adam_v.items()},
            self.step_count,
        )


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite activation in {name}")


def encoder_forward(weights: NetworkWeights, x: np.ndarray, cache: Optional[list] = None) -> np.ndarray:
    """Dense encoder: three weight matrices, softplus after each."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (weights.d_in,):
        raise ValueError(f"encoder input length {x.shape} != ({weights.d_in},)")
    p = weights.params
    a = x
    for layer in range(3):
        z = a @ p[f"enc_w{layer}"] + p[f"enc_b{layer}"]
        _check_finite(f"encoder[{layer}]", z)
        out = softplus(z)
        if cache is not None:
            cache.append((a, z))
        a = out
    return a


def lstm_step(weights: NetworkWeights, state: LstmState, x: np.ndarray, cache: Optional[list] = None):
    """One step through both stacked cells; returns (new_state, top hidden)."""
    p = weights.params
    x = np.asarray(x, dtype=np.float64)
    new = LstmState.zeros()
    inp = x
    for layer in range(LSTM_LAYERS):
        h_prev = state.h[layer]
        c_prev = state.c[layer]
        z = inp @ p[f"lstm{layer}_wx"] + h_prev @ p[f"lstm{layer}_wh"] + p[f"lstm{layer}_b"]
        _check_finite(f"lstm[{layer}]", z)
        i = sigmoid(z[:HIDDEN])
        f = sigmoid(z[HIDDEN : 2 * HIDDEN])
        g = np.tanh(z[2 * HIDDEN : 3 * HIDDEN])
        o = sigmoid(z[3 * HIDDEN :])
        c_new = f * c_prev + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        new.h[layer] = h_new
        new.c[layer] = c_new
        if cache is not None:
            cache.append((inp, h_prev, c_prev, i, f, g, o, c_new, tanh_c))
        inp = h_new
    return new, new.h[LSTM_LAYERS - 1]


def head_forward(weights: NetworkWeights, h: np.ndarray):
    """Map the top hidden state to raw (alpha, beta); alpha gets the +1 shift."""
    raw = np.asarray(h, dtype=np.float64) @ weights.params["head_w"] + weights.params["head_b"]
    _check_finite("head", raw)
    params = ParetoParams(alpha=1.0 + max(raw[0], 0.0), beta=max(raw[1], 0.0))
    return params, raw


def forward_window(weights: NetworkWeights, inputs: Sequence[np.ndarray]):
    """Run the full window; returns (ParetoParams, raw head output, final state)."""
    if len(inputs) < 1:
        raise ValueError("window must contain at least one observation")
    state = LstmState.zeros()
    for x in inputs:
        lam = encoder_forward(weights, x)
        state, _ = lstm_step(weights, state, lam)
    params, raw = head_forward(weights, state.h[LSTM_LAYERS - 1])
    return params, raw, state


def loss(weights: NetworkWeights, inputs: Sequence[np.ndarray], target: ParetoParams) -> float:
    """MSE between predicted and target (alpha, beta): mean of the two squares."""
    pred, _, _ = forward_window(weights, inputs)
    da = pred.alpha - target.alpha
    db = pred.beta - target.beta
    return 0.5 * (da * da + db * db)


def backward(weights: NetworkWeights, inputs: Sequence[np.ndarray], target: ParetoParams):
    """Exact gradients of the window MSE w.r.t. every tensor, via BPTT.

    Returns (loss, grads) with grads keyed like ``weights.params``. The ReLU
    subgradient at exactly 0 is taken as 0.
    """
    if len(inputs) < 1:
        raise ValueError("window must contain at least one observation")
    p = weights.params
    steps = len(inputs)

    # Forward with caches.
    enc_caches: list[list] = []
    lstm_caches: list[list] = []
    state = LstmState.zeros()
    for x in inputs:
        ec: list = []
        lam = encoder_forward(weights, x, cache=ec)
        enc_caches.append(ec)
        lc: list = []
        state, _ = lstm_step(weights, state, lam, cache=lc)
        lstm_caches.append(lc)
    pred, raw = head_forward(weights, state.h[LSTM_LAYERS - 1])

    da = pred.alpha - target.alpha
    db = pred.beta - target.beta
    loss_value = 0.5 * (da * da + db * db)

    grads = {k: np.zeros_like(v) for k, v in p.items()}

    # Head: alpha = 1 + relu(raw0), beta = relu(raw1).
    draw = np.array([da if raw[0] > 0 else 0.0, db if raw[1] > 0 else 0.0])
    h_top = state.h[LSTM_LAYERS - 1]
    grads["head_w"] += np.outer(h_top, draw)
    grads["head_b"] += draw

    dh = [np.zeros(HIDDEN) for _ in range(LSTM_LAYERS)]
    dc = [np.zeros(HIDDEN) for _ in range(LSTM_LAYERS)]
    dh[LSTM_LAYERS - 1] = p["head_w"] @ draw

    for t in range(steps - 1, -1, -1):
        dx_from_above = None
        for layer in range(LSTM_LAYERS - 1, -1, -1):
            inp, h_prev, c_prev, i, f, g, o, c_new, tanh_c = lstm_caches[t][layer]
            dh_l = dh[layer] if dx_from_above is None else dh[layer] + dx_from_above
            do = dh_l * tanh_c
            dc_tot = dc[layer] + dh_l * o * (1.0 - tanh_c * tanh_c)
            di = dc_tot * g
            df = dc_tot * c_prev
            dg = dc_tot * i
            dz = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ])
            grads[f"lstm{layer}_wx"] += np.outer(inp, dz)
            grads[f"lstm{layer}_wh"] += np.outer(h_prev, dz)
            grads[f"lstm{layer}_b"] += dz
            dx_from_above = p[f"lstm{layer}_wx"] @ dz
            dh[layer] = p[f"lstm{layer}_wh"] @ dz
            dc[layer] = dc_tot * f
        # dx_from_above now holds the gradient w.r.t. the encoder output at t.
        d_out = dx_from_above
        for layer in range(2, -1, -1):
            a_in, z = enc_caches[t][layer]
            d_pre = d_out * sigmoid(z)  # softplus' = sigmoid
            grads[f"enc_w{layer}"] += np.outer(a_in, d_pre)
            grads[f"enc_b{layer}"] += d_pre
            d_out = p[f"enc_w{layer}"] @ d_pre

    return loss_value, grads


def adam_step(weights: NetworkWeights, grads: dict[str, np.ndarray], lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Standard Adam with bias correction; mutates weights in place."""
    if lr <= 0:
        raise ValueError(f"lr must be > 0, got {lr}")
    weights.step_count += 1
    t = weights.step_count
    for key in PARAM_ORDER:
        g = grads[key]
        m = weights.adam_m[key]
        v = weights.adam_v[key]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        weights.params[key] -= lr * m_hat / (np.sqrt(v_hat) + eps)


def _write_tensor(fh, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    fh.write(struct.pack("<I", arr.ndim))
    for dim in arr.shape:
        fh.write(struct.pack("<I", dim))
    fh.write(arr.tobytes())


def _read_tensor(fh) -> np.ndarray:
    (rank,) = struct.unpack("<I", fh.read(4))
    shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(rank))
    count = 1
    for dim in shape:
        count *= dim
    data = np.frombuffer(fh.read(8 * count), dtype="<f8").astype(np.float64)
    return data.reshape(shape)


def save_checkpoint(weights: NetworkWeights, path) -> None:
    """Binary checkpoint: magic, version, then params, Adam m, Adam v, step."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(bytes([CHECKPOINT_VERSION]))
        for key in PARAM_ORDER:
            _write_tensor(fh, weights.params[key])
        for key in PARAM_ORDER:
            _write_tensor(fh, weights.adam_m[key])
        for key in PARAM_ORDER:
            _write_tensor(fh, weights.adam_v[key])
        _write_tensor(fh, np.array(float(weights.step_count)))


def load_checkpoint(path) -> NetworkWeights:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        version = fh.read(1)[0]
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        params = {key: _read_tensor(fh) for key in PARAM_ORDER}
        adam_m = {key: _read_tensor(fh) for key in PARAM_ORDER}
        adam_v = {key: _read_tensor(fh) for key in PARAM_ORDER}
        step = int(_read_tensor(fh))
    return NetworkWeights(params, adam_m, adam_v, step)
