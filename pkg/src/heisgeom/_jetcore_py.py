"""Pure-NumPy implementation of the jet arithmetic kernel.

Fallback for :mod:`heisgeom._jetcore_cy`; both expose the same `mul`
signature and produce bitwise-identical results (np.bincount accumulates
weights in input order, matching the sequential C loop).
"""

import numpy as np

IMPL_NAME = "python"


def mul(a, b, ia, ib, iout, size):
    """Truncated convolution through a precomputed COO monomial-pair table.

    ``out[iout[k]] += a[ia[k]] * b[ib[k]]`` for every admissible pair k,
    where the tables enumerate exactly the monomial pairs whose product
    stays within the truncation order.
    """
    return np.bincount(iout, weights=a[ia] * b[ib], minlength=size)
