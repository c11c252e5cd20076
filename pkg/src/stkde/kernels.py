"""Backend selection for the kernel-sum core.

Prefers the compiled extension when it imported cleanly; otherwise the NumPy
implementation takes over transparently.  STKDE_NO_EXT=1 forces the fallback,
which the benchmark and the backend-equivalence tests rely on.
"""

import os

from . import _evalcore_np

KERNEL_GAUSSIAN = _evalcore_np.KERNEL_GAUSSIAN
KERNEL_EPANECHNIKOV = _evalcore_np.KERNEL_EPANECHNIKOV

if os.environ.get("STKDE_NO_EXT"):
    _active = _evalcore_np
    BACKEND = "numpy"
else:
    try:
        from . import _evalcore as _active  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        _active = _evalcore_np
        BACKEND = "numpy"


def weighted_kernel_sum(px, py, w, qx, qy, kernel_kind, a, b, c, norm):
    """Dispatch to the active backend; see _evalcore_np for the contract."""
    return _active.weighted_kernel_sum(px, py, w, qx, qy, kernel_kind, a, b, c, norm)


def available_backends():
    """Mapping of importable backend name -> module, for benchmarks/tests."""
    backends = {"numpy": _evalcore_np}
    try:
        from . import _evalcore
        backends["compiled"] = _evalcore
    except ImportError:
        pass
    return backends
