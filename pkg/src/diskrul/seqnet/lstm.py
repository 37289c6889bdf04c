"""LSTM cell and single-layer sequence passes.

Gate pre-activations are stacked in the order forget, input, candidate,
output, so one layer owns three arrays::

    W  (4H, H)   recurrent weights  [W_f; W_i; W_C; W_o]
    U  (4H, In)  input weights      [U_f; U_i; U_C; U_o]
    b  (4H,)     biases             [b_f; b_i; b_C; b_o]

With row-vector batches the step is ``z = h_prev @ W.T + x @ U.T + b``.
Sequences are handled time-major, ``(T, B, ...)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import DomainError, NumericError

GATES = ("f", "i", "C", "o")


@dataclass
class LSTMCellParams:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        H4 = self.W.shape[0]
        if H4 % 4 or self.W.shape != (H4, H4 // 4):
            raise DomainError(f"recurrent weights must be (4H, H), got {self.W.shape}")
        if self.U.ndim != 2 or self.U.shape[0] != H4:
            raise DomainError(f"input weights must be (4H, In), got {self.U.shape}")
        if self.b.shape != (H4,):
            raise DomainError(f"bias must be (4H,), got {self.b.shape}")

    @property
    def hidden(self) -> int:
        return self.W.shape[1]

    @property
    def input_size(self) -> int:
        return self.U.shape[1]

    def gate(self, name):
        """Return views ``(W_g, U_g, b_g)`` of one gate."""
        k = GATES.index(name)
        H = self.hidden
        sl = slice(k * H, (k + 1) * H)
        return self.W[sl], self.U[sl], self.b[sl]

    @classmethod
    def from_gates(cls, W: dict, U: dict, b: dict):
        return cls(
            np.concatenate([np.atleast_2d(W[g]) for g in GATES]),
            np.concatenate([np.atleast_2d(U[g]) for g in GATES]),
            np.concatenate([np.atleast_1d(b[g]) for g in GATES]),
        )

    @classmethod
    def zeros(cls, input_size, hidden, dtype=np.float64):
        return cls(
            np.zeros((4 * hidden, hidden), dtype),
            np.zeros((4 * hidden, input_size), dtype),
            np.zeros(4 * hidden, dtype),
        )

    @classmethod
    def init(cls, input_size, hidden, rng, dtype=np.float64):
        """Uniform(-k, k) weights with k = 1/sqrt(fan_in) per matrix, zero biases."""
        kw = 1.0 / np.sqrt(hidden)
        ku = 1.0 / np.sqrt(input_size)
        W = rng.uniform(-kw, kw, size=(4 * hidden, hidden)).astype(dtype)
        U = rng.uniform(-ku, ku, size=(4 * hidden, input_size)).astype(dtype)
        return cls(W, U, np.zeros(4 * hidden, dtype))


@dataclass
class LSTMCellState:
    h: np.ndarray
    C: np.ndarray
    f: np.ndarray
    i: np.ndarray
    C_tilde: np.ndarray
    o: np.ndarray


def lstm_cell_step(params: LSTMCellParams, x_t, prev=None) -> LSTMCellState:
    """One LSTM step for a single vector or a batch of row vectors.

    ``prev`` is ``(h_prev, C_prev)``; zeros when omitted.
    """
    x = np.asarray(x_t, dtype=params.W.dtype)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    H = params.hidden
    if x2.shape[1] != params.input_size:
        raise DomainError(f"input has {x2.shape[1]} features, cell expects {params.input_size}")
    if prev is None:
        h_prev = np.zeros((x2.shape[0], H), params.W.dtype)
        c_prev = np.zeros_like(h_prev)
    else:
        h_prev = np.atleast_2d(np.asarray(prev[0], dtype=params.W.dtype))
        c_prev = np.atleast_2d(np.asarray(prev[1], dtype=params.W.dtype))
        if h_prev.shape != (x2.shape[0], H) or c_prev.shape != h_prev.shape:
            raise DomainError("previous state shape does not match the cell")
    if not (np.isfinite(x2).all() and np.isfinite(h_prev).all() and np.isfinite(c_prev).all()):
        raise NumericError("non-finite input to LSTM cell")
    z = np.ascontiguousarray(h_prev @ params.W.T + x2 @ params.U.T + params.b)
    gates, c, _, h = kernels.lstm_gates_forward(z, np.ascontiguousarray(c_prev))
    parts = [gates[:, k * H : (k + 1) * H] for k in range(4)]
    if single:
        h, c = h[0], c[0]
        parts = [p[0] for p in parts]
    return LSTMCellState(h=h, C=c, f=parts[0], i=parts[1], C_tilde=parts[2], o=parts[3])


@dataclass
class LayerCache:
    x: np.ndarray  # (T, B, In), or (B, In) when the input repeats every step
    repeated: bool
    h_prev: np.ndarray  # (T, B, H)
    c_prev: np.ndarray  # (T, B, H)
    gates: np.ndarray  # (T, B, 4H)
    tanh_c: np.ndarray  # (T, B, H)


def layer_forward(p: LSTMCellParams, x, T=None):
    """Run one layer over a sequence from a zero initial state.

    ``x`` is ``(T, B, In)``, or ``(B, In)`` together with ``T`` to feed the
    same input at every step. Returns ``(hs, cache)`` with ``hs`` (T, B, H).
    """
    repeated = x.ndim == 2
    if repeated:
        B = x.shape[0]
        xu = x @ p.U.T + p.b
    else:
        T, B = x.shape[:2]
        xu = x @ p.U.T + p.b  # (T, B, 4H)
    H = p.hidden
    dtype = p.W.dtype
    hs = np.empty((T, B, H), dtype)
    c_prev = np.empty((T, B, H), dtype)
    gates = np.empty((T, B, 4 * H), dtype)
    tanh_c = np.empty((T, B, H), dtype)
    h = np.zeros((B, H), dtype)
    c = np.zeros((B, H), dtype)
    WT = np.ascontiguousarray(p.W.T)
    for t in range(T):
        z = h @ WT
        z += xu if repeated else xu[t]
        c_prev[t] = c
        g, c, tc, h = kernels.lstm_gates_forward(z, c)
        gates[t] = g
        tanh_c[t] = tc
        hs[t] = h
    h_prev = np.empty_like(hs)
    h_prev[0] = 0.0
    h_prev[1:] = hs[:-1]
    return hs, LayerCache(x, repeated, h_prev, c_prev, gates, tanh_c)


def layer_backward(p: LSTMCellParams, cache: LayerCache, dhs, need_dx=True):
    """BPTT through one layer.

    ``dhs`` (T, B, H) is the loss gradient w.r.t. each emitted hidden state.
    Returns ``(dW, dU, db, dx)``; ``dx`` matches the shape of the layer input
    (summed over steps for a repeated input) or is ``None``.
    """
    T, B, H = dhs.shape
    dtype = p.W.dtype
    dz_all = np.empty((T, B, 4 * H), dtype)
    dh_next = np.zeros((B, H), dtype)
    dc = np.zeros((B, H), dtype)
    W = np.ascontiguousarray(p.W)
    for t in range(T - 1, -1, -1):
        dh = dhs[t] + dh_next
        dz, dc = kernels.lstm_gates_backward(dh, dc, cache.gates[t], cache.c_prev[t], cache.tanh_c[t])
        dz_all[t] = dz
        dh_next = dz @ W
    dz_flat = dz_all.reshape(T * B, 4 * H)
    dW = dz_flat.T @ cache.h_prev.reshape(T * B, H)
    db = dz_flat.sum(axis=0)
    dx = None
    if cache.repeated:
        dz_sum = dz_all.sum(axis=0)
        dU = dz_sum.T @ cache.x
        if need_dx:
            dx = dz_sum @ p.U
    else:
        dU = dz_flat.T @ cache.x.reshape(T * B, -1)
        if need_dx:
            dx = dz_all @ p.U
    return dW, dU, db, dx
