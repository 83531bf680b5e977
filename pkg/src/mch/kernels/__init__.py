"""Hot numeric kernels over packed binary codes.

Codes are stored as little-endian packed ``uint64`` word rows (bit k of a
code lives in word ``k // 64`` at position ``k % 64``).  Two interchangeable
implementations exist:

* :mod:`mch.kernels.numba_backend` -- ``@njit`` loops (default)
* :mod:`mch.kernels.numpy_backend` -- pure-numpy byte-table fallback

Selection is controlled by the ``MCH_BACKEND`` environment variable
(``numba`` or ``numpy``).  Unset, numba is used when importable.
"""

import os

__all__ = [
    "ACTIVE_BACKEND",
    "popcount_rows",
    "hamming_to_query",
    "hamming_matrix",
    "min_distance_per_item",
]

_requested = os.environ.get("MCH_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"MCH_BACKEND={_requested!r} is not recognized (use 'numba' or 'numpy')"
    )

if _requested == "numpy":
    from mch.kernels.numpy_backend import (
        hamming_matrix,
        hamming_to_query,
        min_distance_per_item,
        popcount_rows,
    )

    ACTIVE_BACKEND = "numpy"
else:
    try:
        from mch.kernels.numba_backend import (
            hamming_matrix,
            hamming_to_query,
            min_distance_per_item,
            popcount_rows,
        )

        ACTIVE_BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from mch.kernels.numpy_backend import (
            hamming_matrix,
            hamming_to_query,
            min_distance_per_item,
            popcount_rows,
        )

        ACTIVE_BACKEND = "numpy"
