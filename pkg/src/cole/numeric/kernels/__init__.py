"""Backend selection for the hot numeric kernels.

COLE_KERNELS=numba (default) uses the njit-compiled kernels; COLE_KERNELS=numpy
forces the pure-numpy fallback. If numba is not importable the fallback is used
with a warning. `benchmarks/bench_kernels.py` compares the two.
"""

import os
import warnings

from . import reference

BACKEND = os.environ.get("COLE_KERNELS", "numba").strip().lower()

if BACKEND not in ("numba", "numpy"):
    raise ValueError(f"COLE_KERNELS must be 'numba' or 'numpy', got {BACKEND!r}")

if BACKEND == "numba":
    try:
        from . import jit as _impl
    except ImportError:
        warnings.warn("numba unavailable; falling back to numpy kernels")
        BACKEND = "numpy"
        _impl = reference
else:
    _impl = reference

softmax_rows = _impl.softmax_rows
softmax_rows_bwd = _impl.softmax_rows_bwd
layernorm_rows = _impl.layernorm_rows
layernorm_rows_bwd = _impl.layernorm_rows_bwd
gelu_fwd = _impl.gelu_fwd
gelu_bwd = _impl.gelu_bwd
adamw_update = _impl.adamw_update
scatter_add_rows = _impl.scatter_add_rows
segment_sum_rows = _impl.segment_sum_rows
ce_rows = _impl.ce_rows
ce_rows_bwd = _impl.ce_rows_bwd
kl_rows = _impl.kl_rows
kl_rows_bwd_p = _impl.kl_rows_bwd_p
kl_rows_bwd_q = _impl.kl_rows_bwd_q

KERNEL_NAMES = [
    "softmax_rows", "softmax_rows_bwd", "layernorm_rows", "layernorm_rows_bwd",
    "gelu_fwd", "gelu_bwd", "adamw_update", "scatter_add_rows",
    "segment_sum_rows", "ce_rows", "ce_rows_bwd", "kl_rows",
    "kl_rows_bwd_p", "kl_rows_bwd_q",
]
