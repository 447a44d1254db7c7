"""Shared recurrent-network numerics.

Both the word predictor and the character completion model are built from the
same pieces: a masked LSTM layer with hand-written backpropagation through
time, a softmax cross-entropy head, an Adam optimizer, and a finite-difference
gradient checker that validates the analytic gradients.

All tensors are little-endian float64.  The gate layout inside the fused
weight matrices is [input, forget, candidate, output], each block of width H.
"""

from __future__ import annotations

import numpy as np

DTYPE = np.float64


class TrainingDivergedError(RuntimeError):
    """Raised when a training loss stops being finite."""


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Clipping keeps exp() finite for badly scaled inputs during early training.
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of integer `labels` under row-wise `probs`."""
    picked = probs[np.arange(probs.shape[0]), labels]
    return float(-np.log(np.maximum(picked, 1e-300)).mean())


def init_lstm_params(d_in: int, hidden: int, rng: np.random.Generator,
                     scale: float = 0.08) -> dict[str, np.ndarray]:
    """Fused LSTM parameters: Wx (d_in, 4H), Wh (H, 4H), b (4H,).

    The forget-gate bias starts at +1 so memory cells initially carry state.
    """
    wx = rng.uniform(-scale, scale, size=(d_in, 4 * hidden)).astype(DTYPE)
    wh = rng.uniform(-scale, scale, size=(hidden, 4 * hidden)).astype(DTYPE)
    b = np.zeros(4 * hidden, dtype=DTYPE)
    b[hidden:2 * hidden] = 1.0
    return {"wx": wx, "wh": wh, "b": b}


def lstm_forward(x: np.ndarray, mask: np.ndarray | None,
                 params: dict[str, np.ndarray],
                 h0: np.ndarray | None = None,
                 c0: np.ndarray | None = None):
    """Run the LSTM over x of shape (B, T, D).

    mask is (B, T) with 0 at padded steps; a masked step carries h and c
    through unchanged, so left-padded rows behave as if the padding were
    absent.  Returns (h_all (B, T, H), cache) where cache feeds
    lstm_backward.
    """
    wx, wh, b = params["wx"], params["wh"], params["b"]
    bsz, steps, _ = x.shape
    hidden = wh.shape[0]
    h = np.zeros((bsz, hidden), dtype=DTYPE) if h0 is None else h0
    c = np.zeros((bsz, hidden), dtype=DTYPE) if c0 is None else c0
    if mask is None:
        mask = np.ones((bsz, steps), dtype=DTYPE)
    h_all = np.empty((bsz, steps, hidden), dtype=DTYPE)
    gates = np.empty((bsz, steps, 4 * hidden), dtype=DTYPE)
    c_prev_all = np.empty((bsz, steps, hidden), dtype=DTYPE)
    h_prev_all = np.empty((bsz, steps, hidden), dtype=DTYPE)
    tanh_c_all = np.empty((bsz, steps, hidden), dtype=DTYPE)
    for t in range(steps):
        h_prev_all[:, t] = h
        c_prev_all[:, t] = c
        z = x[:, t] @ wx + h @ wh + b
        i = sigmoid(z[:, :hidden])
        f = sigmoid(z[:, hidden:2 * hidden])
        g = np.tanh(z[:, 2 * hidden:3 * hidden])
        o = sigmoid(z[:, 3 * hidden:])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        m = mask[:, t:t + 1]
        h = m * h_new + (1.0 - m) * h
        c = m * c_new + (1.0 - m) * c
        h_all[:, t] = h
        gates[:, t, :hidden] = i
        gates[:, t, hidden:2 * hidden] = f
        gates[:, t, 2 * hidden:3 * hidden] = g
        gates[:, t, 3 * hidden:] = o
        tanh_c_all[:, t] = tanh_c
    cache = (x, mask, gates, c_prev_all, h_prev_all, tanh_c_all)
    return h_all, cache


def lstm_backward(dh_all: np.ndarray, cache, params: dict[str, np.ndarray]):
    """Backpropagate dL/dh_all through the cached forward pass.

    Returns (dx, grads) with grads keyed like the parameter dict.
    """
    x, mask, gates, c_prev_all, h_prev_all, tanh_c_all = cache
    wx, wh = params["wx"], params["wh"]
    bsz, steps, hidden = dh_all.shape
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros_like(params["b"])
    dx = np.zeros_like(x)
    dh_next = np.zeros((bsz, hidden), dtype=DTYPE)
    dc_next = np.zeros((bsz, hidden), dtype=DTYPE)
    for t in range(steps - 1, -1, -1):
        m = mask[:, t:t + 1]
        i = gates[:, t, :hidden]
        f = gates[:, t, hidden:2 * hidden]
        g = gates[:, t, 2 * hidden:3 * hidden]
        o = gates[:, t, 3 * hidden:]
        tanh_c = tanh_c_all[:, t]
        c_prev = c_prev_all[:, t]

        dh_total = dh_all[:, t] + dh_next
        # The masked update h_t = m*h_new + (1-m)*h_{t-1} splits the gradient.
        dh_new = dh_total * m
        dh_carry = dh_total * (1.0 - m)
        dc_new = dc_next * m
        dc_carry = dc_next * (1.0 - m)

        do = dh_new * tanh_c
        dc_total = dc_new + dh_new * o * (1.0 - tanh_c ** 2)
        di = dc_total * g
        df = dc_total * c_prev
        dg = dc_total * i
        dc_prev = dc_total * f + dc_carry

        dz = np.concatenate(
            [di * i * (1.0 - i),
             df * f * (1.0 - f),
             dg * (1.0 - g ** 2),
             do * o * (1.0 - o)], axis=1)
        dwx += x[:, t].T @ dz
        dwh += h_prev_all[:, t].T @ dz
        db += dz.sum(axis=0)
        dx[:, t] = dz @ wx.T
        dh_next = dz @ wh.T + dh_carry
        dc_next = dc_prev
    return dx, {"wx": dwx, "wh": dwh, "b": db}


def lstm_step(h: np.ndarray, c: np.ndarray, x_row: np.ndarray,
              params: dict[str, np.ndarray]):
    """Advance a batch of recurrent states by one input row (B, D)."""
    wx, wh, b = params["wx"], params["wh"], params["b"]
    hidden = wh.shape[0]
    z = x_row @ wx + h @ wh + b
    i = sigmoid(z[:, :hidden])
    f = sigmoid(z[:, hidden:2 * hidden])
    g = np.tanh(z[:, 2 * hidden:3 * hidden])
    o = sigmoid(z[:, 3 * hidden:])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


class Adam:
    """Mini-batch Adam over a named parameter dict, updated in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float = 0.01,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> None:
    """Scale the whole gradient set so its global L2 norm is <= max_norm."""
    if max_norm <= 0:
        return
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


def gradient_check(loss_fn, params: dict[str, np.ndarray],
                   analytic: dict[str, np.ndarray],
                   step: float = 1e-4) -> float:
    """Max relative error between analytic grads and central differences.

    Perturbs every entry of every tensor; the denominator floor keeps
    near-zero gradients from inflating the ratio with round-off noise.
    """
    worst = 0.0
    for name, p in params.items():
        g = analytic[name]
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.shape[0]):
            orig = flat[idx]
            flat[idx] = orig + step
            lp = loss_fn()
            flat[idx] = orig - step
            lm = loss_fn()
            flat[idx] = orig
            numeric = (lp - lm) / (2.0 * step)
            denom = max(abs(gflat[idx]) + abs(numeric), 1e-6)
            worst = max(worst, abs(gflat[idx] - numeric) / denom)
    return worst
