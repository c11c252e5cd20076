# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled evaluation core: weighted kernel sums over event/query pairs.

This is the hot inner loop of every prediction; the NumPy twin in
``_evalcore_np`` implements the identical contract and is selected at import
when this extension is unavailable.
"""

from libc.math cimport exp

import numpy as np

KERNEL_GAUSSIAN = 0
KERNEL_EPANECHNIKOV = 1


def weighted_kernel_sum(const double[::1] px, const double[::1] py,
                        const double[::1] w,
                        const double[::1] qx, const double[::1] qy,
                        int kernel_kind, double a, double b, double c,
                        double norm):
    """out[j] = norm * sum_i w[i] * g(z_ij) with z = a dx^2 + 2 b dx dy + c dy^2.

    g is exp(-z/2) for the Gaussian kind and (1 - z) on z < 1 for the
    Epanechnikov kind.  (a, b, c) are the entries of the inverse bandwidth
    matrix; ``norm`` carries the kernel's normalizing constant.
    """
    cdef Py_ssize_t n = px.shape[0]
    cdef Py_ssize_t m = qx.shape[0]
    if w.shape[0] != n or qy.shape[0] != m or py.shape[0] != n:
        raise ValueError("mismatched array lengths")
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy, z, acc, x0, y0
    with nogil:
        if kernel_kind == 0:  # gaussian
            for j in range(m):
                acc = 0.0
                x0 = qx[j]
                y0 = qy[j]
                for i in range(n):
                    dx = x0 - px[i]
                    dy = y0 - py[i]
                    z = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
                    acc += w[i] * exp(-0.5 * z)
                out[j] = acc * norm
        else:
            for j in range(m):
                acc = 0.0
                x0 = qx[j]
                y0 = qy[j]
                for i in range(n):
                    dx = x0 - px[i]
                    dy = y0 - py[i]
                    z = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
                    if z < 1.0:
                        acc += w[i] * (1.0 - z)
                out[j] = acc * norm
    return out_arr
