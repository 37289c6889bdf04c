# cython: language_level=3
"""Compiled exhaustive split scan (see ``diskrul._pykernels.best_split``).

Built without fast-math so the prefix sums follow the same sequential
order as the numpy fallback.
"""


def best_split(double[::1] x_sorted, double[::1] r_sorted, Py_ssize_t min_leaf):
    cdef Py_ssize_t n = x_sorted.shape[0]
    cdef Py_ssize_t k, best_pos = -1
    cdef double total = 0.0, s_left = 0.0, s_right, gain, best = 0.0
    if n < 2 * min_leaf or min_leaf < 1:
        return 0.0, -1
    with nogil:
        for k in range(n):
            total += r_sorted[k]
        for k in range(1, n - min_leaf + 1):
            s_left += r_sorted[k - 1]
            if k < min_leaf or not (x_sorted[k - 1] < x_sorted[k]):
                continue
            s_right = total - s_left
            gain = s_left * s_left / k + s_right * s_right / (n - k) - total * total / n
            if gain > best:
                best = gain
                best_pos = k
    if best_pos < 0:
        return 0.0, -1
    return best, best_pos
