"""NumPy fallback for the evaluation core.

Same contract as the compiled ``_evalcore`` extension; queries are processed
in chunks to bound the size of the pairwise temporaries.
"""

import numpy as np

KERNEL_GAUSSIAN = 0
KERNEL_EPANECHNIKOV = 1

_CHUNK = 512


def weighted_kernel_sum(px, py, w, qx, qy, kernel_kind, a, b, c, norm):
    """out[j] = norm * sum_i w[i] * g(z_ij) with z = a dx^2 + 2 b dx dy + c dy^2."""
    px = np.ascontiguousarray(px, dtype=np.float64)
    py = np.ascontiguousarray(py, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    qx = np.ascontiguousarray(qx, dtype=np.float64)
    qy = np.ascontiguousarray(qy, dtype=np.float64)
    if not (px.shape == py.shape == w.shape) or qx.shape != qy.shape:
        raise ValueError("mismatched array lengths")
    m = qx.size
    out = np.empty(m, dtype=np.float64)
    for lo in range(0, m, _CHUNK):
        hi = min(lo + _CHUNK, m)
        dx = qx[lo:hi, None] - px[None, :]
        dy = qy[lo:hi, None] - py[None, :]
        z = a * dx * dx + 2.0 * b * (dx * dy) + c * dy * dy
        if kernel_kind == KERNEL_GAUSSIAN:
            g = np.exp(-0.5 * z)
        else:
            g = np.maximum(1.0 - z, 0.0)
        out[lo:hi] = g @ w
    out *= norm
    return out
