import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diskrul import _pykernels, kernels
from conftest import _clstm, _csplit

needs_ext = pytest.mark.skipif(_clstm is None, reason="compiled extension not built")


def brute_split(x, r, min_leaf):
    """Every boundary between distinct sorted values, scored from scratch."""
    n = len(x)
    best, pos = 0.0, -1
    for k in range(min_leaf, n - min_leaf + 1):
        if not x[k - 1] < x[k]:
            continue
        left, right = r[:k], r[k:]
        gain = left.sum() ** 2 / k + right.sum() ** 2 / (n - k) - r.sum() ** 2 / n
        if gain > best * (1 + 1e-9) + 1e-12:
            best, pos = gain, k
    return best, pos


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@given(
    st.lists(st.integers(0, 6), min_size=2, max_size=40),
    st.integers(0, 2**31 - 1),
    st.integers(1, 4),
)
@settings(max_examples=200, deadline=None)
def test_best_split_matches_exhaustive_search(xs, seed, min_leaf):
    x = np.sort(np.array(xs, dtype=np.float64))
    r = np.random.default_rng(seed).standard_normal(len(x))
    gain, pos = _pykernels.best_split(x, r, min_leaf)
    bgain, bpos = brute_split(x, r, min_leaf)
    if bpos < 0:
        assert pos == -1
    else:
        assert gain == pytest.approx(bgain, rel=1e-9, abs=1e-12)
        # the chosen boundary must score as well as the oracle's
        assert brute_gain_at(x, r, pos) == pytest.approx(bgain, rel=1e-9, abs=1e-12)
    if _csplit is not None:
        assert _csplit.best_split(x, r, min_leaf) == (gain, pos)


def brute_gain_at(x, r, k):
    n = len(x)
    return r[:k].sum() ** 2 / k + r[k:].sum() ** 2 / (n - k) - r.sum() ** 2 / n


def test_best_split_no_valid_boundary():
    x = np.ones(10)
    assert _pykernels.best_split(x, np.arange(10.0), 1) == (0.0, -1)
    assert _pykernels.best_split(np.arange(3.0), np.arange(3.0), 2) == (0.0, -1)


def _forward_oracle(z, c_prev):
    H = c_prev.shape[1]
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))  # noqa: E731
    f, i, g, o = sig(z[:, :H]), sig(z[:, H:2 * H]), np.tanh(z[:, 2 * H:3 * H]), sig(z[:, 3 * H:])
    c = f * c_prev + i * g
    return np.hstack([f, i, g, o]), c, np.tanh(c), o * np.tanh(c)


@pytest.mark.parametrize("dtype,tol", [(np.float64, 1e-13), (np.float32, 1e-6)])
def test_forward_kernels_match_direct_formulas(backend, dtype, tol, rng):
    z = (rng.standard_normal((7, 4 * 5)) * 4).astype(dtype)
    c = rng.standard_normal((7, 5)).astype(dtype)
    got = kernels.lstm_gates_forward(z, c)
    want = _forward_oracle(z.astype(np.float64), c.astype(np.float64))
    for g, w in zip(got, want):
        assert g.dtype == dtype
        np.testing.assert_allclose(g, w, rtol=0, atol=tol)


@pytest.mark.parametrize("dtype", [np.float64, np.float32])
def test_forward_kernels_saturate_cleanly(backend, dtype):
    z = np.array([[-1e4, -100, 100, 1e4] * 4], dtype=dtype)
    gates, c, tc, h = kernels.lstm_gates_forward(z, np.zeros((1, 4), dtype))
    assert all(np.isfinite(a).all() for a in (gates, c, tc, h))
    assert np.all((gates[0, :8] >= 0) & (gates[0, :8] <= 1))
    assert np.all(np.abs(gates[0, 8:12]) <= 1)


def test_backward_kernel_matches_finite_differences(backend, rng):
    B, H = 3, 4
    z = rng.standard_normal((B, 4 * H))
    c_prev = rng.standard_normal((B, H))
    dh = rng.standard_normal((B, H))
    dc_next = rng.standard_normal((B, H))

    def scalar(z_, c_):
        _, c, _, h = kernels.lstm_gates_forward(z_, c_)
        return np.sum(dh * h) + np.sum(dc_next * c)

    gates, _, tc, _ = kernels.lstm_gates_forward(z, c_prev)
    dz, dcp = kernels.lstm_gates_backward(dh, dc_next, gates, c_prev, tc)
    eps = 1e-6
    for arr, grad in ((z, dz), (c_prev, dcp)):
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            fp = scalar(z, c_prev)
            arr[idx] = old - eps
            fm = scalar(z, c_prev)
            arr[idx] = old
            num[idx] = (fp - fm) / (2 * eps)
        np.testing.assert_allclose(grad, num, rtol=1e-6, atol=1e-8)


@needs_ext
@pytest.mark.parametrize("dtype,tol", [(np.float64, 1e-13), (np.float32, 5e-7)])
def test_compiled_and_numpy_backends_agree(dtype, tol, rng):
    for B, H in ((1, 1), (5, 3), (64, 50), (0, 4)):
        z = (rng.standard_normal((B, 4 * H)) * 5).astype(dtype)
        c = rng.standard_normal((B, H)).astype(dtype)
        a = _clstm.lstm_gates_forward(z, c)
        b = _pykernels.lstm_gates_forward(z, c)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=0, atol=tol)
        dh = rng.standard_normal((B, H)).astype(dtype)
        a = _clstm.lstm_gates_backward(dh, c, b[0], c, b[2])
        b = _pykernels.lstm_gates_backward(dh, c, b[0], c, b[2])
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=0, atol=tol * 10)


@needs_ext
def test_compiled_kernel_rejects_bad_shapes():
    with pytest.raises(ValueError):
        _clstm.lstm_gates_forward(np.zeros((2, 7)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        _clstm.lstm_gates_backward(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 7)),
                                   np.zeros((2, 2)), np.zeros((2, 2)))
