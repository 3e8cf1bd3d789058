"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback takes over. Set ``HINDSIGHT_KERNELS=python`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("HINDSIGHT_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"

outer_product_sum = _impl.outer_product_sum
power_iteration = _impl.power_iteration
batched_power_iteration = _impl.batched_power_iteration

__all__ = ["BACKEND", "outer_product_sum", "power_iteration", "batched_power_iteration"]
