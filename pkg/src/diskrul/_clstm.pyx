# cython: language_level=3
"""Compiled LSTM pointwise kernels (see ``diskrul._pykernels``).

The per-row loops live in ``_lstm_core.h`` so the exp/tanh calls vectorize.
"""
import numpy as np
from cython cimport floating


cdef extern from "_lstm_core.h" nogil:
    void lstm_fwd_row_d(const double *z, const double *c_prev, double *gates, double *c,
                        double *tc, double *h, Py_ssize_t H)
    void lstm_fwd_row_f(const float *z, const float *c_prev, float *gates, float *c,
                        float *tc, float *h, Py_ssize_t H)
    void lstm_bwd_row_d(const double *dh, const double *dc_next, const double *gates,
                        const double *c_prev, const double *tc, double *dz,
                        double *dc_prev, Py_ssize_t H)
    void lstm_bwd_row_f(const float *dh, const float *dc_next, const float *gates,
                        const float *c_prev, const float *tc, float *dz,
                        float *dc_prev, Py_ssize_t H)


def lstm_gates_forward(floating[:, ::1] z, floating[:, ::1] c_prev):
    cdef Py_ssize_t B = z.shape[0]
    cdef Py_ssize_t H = c_prev.shape[1]
    cdef Py_ssize_t b
    if z.shape[1] != 4 * H or c_prev.shape[0] != B:
        raise ValueError("gate pre-activations must be (B, 4H) with c_prev (B, H)")
    dtype = np.float64 if floating is double else np.float32
    gates_a = np.empty((B, 4 * H), dtype=dtype)
    c_a = np.empty((B, H), dtype=dtype)
    tc_a = np.empty((B, H), dtype=dtype)
    h_a = np.empty((B, H), dtype=dtype)
    cdef floating[:, ::1] gates = gates_a
    cdef floating[:, ::1] c = c_a
    cdef floating[:, ::1] tc = tc_a
    cdef floating[:, ::1] h = h_a
    if B == 0 or H == 0:
        return gates_a, c_a, tc_a, h_a
    with nogil:
        for b in range(B):
            if floating is double:
                lstm_fwd_row_d(&z[b, 0], &c_prev[b, 0], &gates[b, 0], &c[b, 0],
                               &tc[b, 0], &h[b, 0], H)
            else:
                lstm_fwd_row_f(&z[b, 0], &c_prev[b, 0], &gates[b, 0], &c[b, 0],
                               &tc[b, 0], &h[b, 0], H)
    return gates_a, c_a, tc_a, h_a


def lstm_gates_backward(floating[:, ::1] dh, floating[:, ::1] dc_next,
                        floating[:, ::1] gates, floating[:, ::1] c_prev,
                        floating[:, ::1] tanh_c):
    cdef Py_ssize_t B = dh.shape[0]
    cdef Py_ssize_t H = dh.shape[1]
    cdef Py_ssize_t b
    if gates.shape[1] != 4 * H:
        raise ValueError("gates must be (B, 4H)")
    dtype = np.float64 if floating is double else np.float32
    dz_a = np.empty((B, 4 * H), dtype=dtype)
    dcp_a = np.empty((B, H), dtype=dtype)
    cdef floating[:, ::1] dz = dz_a
    cdef floating[:, ::1] dcp = dcp_a
    if B == 0 or H == 0:
        return dz_a, dcp_a
    with nogil:
        for b in range(B):
            if floating is double:
                lstm_bwd_row_d(&dh[b, 0], &dc_next[b, 0], &gates[b, 0], &c_prev[b, 0],
                               &tanh_c[b, 0], &dz[b, 0], &dcp[b, 0], H)
            else:
                lstm_bwd_row_f(&dh[b, 0], &dc_next[b, 0], &gates[b, 0], &c_prev[b, 0],
                               &tanh_c[b, 0], &dz[b, 0], &dcp[b, 0], H)
    return dz_a, dcp_a
