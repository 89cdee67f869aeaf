"""Pure-NumPy fallback kernels, interface-identical to the Cython extension.

Used when the compiled module is unavailable (or forced via
BINPOP_KERNEL=python). Kept vectorized so large scans stay usable.
"""

import numpy as np
from scipy.special import gammaln


def gamma_term_range(k, s, a, b, n_start, length):
    """lgamma(k*n - s + b) - lgamma(k*n + a + b) over a contiguous n range.

    Entries with k*n - s + b <= 0 are -inf (below the sample maximum).
    """
    kn = k * (n_start + np.arange(length, dtype=np.int64))
    left = (kn - s).astype(np.float64) + b
    bad = left <= 0.0
    out = gammaln(np.where(bad, 1.0, left)) - gammaln(kn.astype(np.float64) + (a + b))
    out[bad] = -np.inf
    return out


def log_comb_range(x, n_start, length):
    """log C(n, x) over a contiguous n range; -inf where n < x."""
    n = n_start + np.arange(length, dtype=np.int64)
    nf = n.astype(np.float64)
    bad = n < x
    out = gammaln(nf + 1.0) - gammaln(float(x) + 1.0) \
        - gammaln(np.where(bad, 0.0, nf - x) + 1.0)
    out[bad] = -np.inf
    return out


def logbb_range(xs, cnts, k, s, a, b, n_start, length):
    """Full log beta-binomial likelihood over a contiguous n range.

    Accumulation order (gamma terms, then counts in ascending x) matches the
    compiled kernel and the composed ScanCache path bit for bit.
    """
    acc = gamma_term_range(k, s, a, b, n_start, length) + gammaln(float(s) + a)
    for x, c in zip(xs, cnts):
        acc = acc + float(c) * log_comb_range(int(x), n_start, length)
    return acc
