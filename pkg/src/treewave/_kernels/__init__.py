"""Oscillatory cell-sum backend selection.

The hot loop of the propagator integrates piecewise-linear data against the
Gaussian chirp e^{i s z^2} over many (term, point) pairs.  A Cython extension
is built when possible; the NumPy implementation is the fallback and the
reference.  Set TREEWAVE_FORCE_NUMPY=1 to skip the compiled kernel.
"""

import os

from .cellsum_np import cell_sum as cell_sum_np

cell_sum = cell_sum_np
BACKEND = "numpy"

if not os.environ.get("TREEWAVE_FORCE_NUMPY"):
    try:
        from ._cellsum import cell_sum as _cell_sum_cy

        cell_sum = _cell_sum_cy
        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["cell_sum", "cell_sum_np", "BACKEND"]
