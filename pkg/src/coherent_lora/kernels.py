"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback is used when it is
missing or when the environment variable ``COHERENT_LORA_PURE`` is set.
"""

import os

from coherent_lora import _kernels_py

if os.environ.get("COHERENT_LORA_PURE"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from coherent_lora import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

pairwise_q_sums = _impl.pairwise_q_sums
max_projection_sums = _impl.max_projection_sums
exact_error_probs = _impl.exact_error_probs

__all__ = ["BACKEND", "pairwise_q_sums", "max_projection_sums", "exact_error_probs"]
