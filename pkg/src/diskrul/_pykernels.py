"""Pure numpy implementations of the hot kernels.

These mirror ``_clstm.pyx`` and ``_csplit.pyx`` one to one and are used when the compiled
extension is unavailable or ``DISKRUL_PURE_PYTHON=1`` is set.
"""
import numpy as np
from scipy.special import expit


def lstm_gates_forward(z, c_prev):
    """Activate stacked pre-activations ``z`` (B, 4H) in gate order f, i, g, o.

    Returns ``(gates, c, tanh_c, h)`` where ``gates`` holds the activated
    values in the same layout as ``z``.
    """
    H = c_prev.shape[1]
    gates = np.empty_like(z)
    gates[:, : 2 * H] = expit(z[:, : 2 * H])
    gates[:, 2 * H : 3 * H] = np.tanh(z[:, 2 * H : 3 * H])
    gates[:, 3 * H :] = expit(z[:, 3 * H :])
    f = gates[:, :H]
    i = gates[:, H : 2 * H]
    g = gates[:, 2 * H : 3 * H]
    o = gates[:, 3 * H :]
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return gates, c, tanh_c, h


def lstm_gates_backward(dh, dc_next, gates, c_prev, tanh_c):
    """Backpropagate one LSTM step through its pointwise operations.

    ``dc_next`` is the gradient reaching ``c_t`` from step t+1. Returns
    ``(dz, dc_prev)`` with ``dz`` the gradient w.r.t. the stacked
    pre-activations.
    """
    H = c_prev.shape[1]
    f = gates[:, :H]
    i = gates[:, H : 2 * H]
    g = gates[:, 2 * H : 3 * H]
    o = gates[:, 3 * H :]
    dc = dc_next + dh * o * (1.0 - tanh_c * tanh_c)
    dz = np.empty_like(gates)
    dz[:, :H] = dc * c_prev * f * (1.0 - f)
    dz[:, H : 2 * H] = dc * g * i * (1.0 - i)
    dz[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
    dz[:, 3 * H :] = dh * tanh_c * o * (1.0 - o)
    return dz, dc * f


def best_split(x_sorted, r_sorted, min_leaf):
    """Exhaustive squared-error split scan over one pre-sorted feature.

    Left child takes the first ``pos`` rows. Only boundaries between distinct
    values with ``min_leaf`` rows on both sides qualify. Returns
    ``(gain, pos)``; ``pos == -1`` when no split has positive gain. The first
    maximal boundary wins ties.
    """
    n = x_sorted.shape[0]
    if n < 2 * min_leaf:
        return 0.0, -1
    csum = np.cumsum(r_sorted)
    total = csum[-1]
    pos = np.arange(min_leaf, n - min_leaf + 1)
    distinct = x_sorted[pos - 1] < x_sorted[pos]
    pos = pos[distinct]
    if pos.size == 0:
        return 0.0, -1
    s_left = csum[pos - 1]
    s_right = total - s_left
    gain = s_left * s_left / pos + s_right * s_right / (n - pos) - total * total / n
    k = int(np.argmax(gain))
    if not gain[k] > 0.0:
        return 0.0, -1
    return float(gain[k]), int(pos[k])
