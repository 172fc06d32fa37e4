"""Monte Carlo standard error machinery: batch means and friends.

Everything here estimates one of the two matrices that drive the rest of
the toolkit: the asymptotic covariance Sigma of the Monte Carlo average
(batch means or its flat-top bias correction) and the target covariance
Lambda of the functional itself (plain sample covariance with divisor n).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDataError,
    InsufficientDataError,
    ParameterError,
)

__all__ = [
    "CovarianceEstimate",
    "CorrelogramSeries",
    "batch_means_sigma",
    "flat_top_sigma",
    "sample_cov_lambda",
    "default_batch_size",
    "sqrt_batch_size",
    "correlogram",
]


@dataclass(frozen=True)
class CovarianceEstimate:
    """A p-by-p covariance estimate plus the metadata needed to reuse it.

    Attributes
    ----------
    matrix : ndarray
        Symmetrized p-by-p estimate (read-only).
    kind : str
        One of ``"batch-means"``, ``"flat-top"``, ``"sample-cov"``.
    batch_size : int
        Batch length b that produced the estimate; 0 for sample-cov.
    n_used : int
        Rows actually consumed (trailing rows beyond the last complete
        batch are dropped from the end).
    is_psd : bool
        Whether the symmetrized matrix is positive semidefinite. Batch
        means and sample covariance are PSD by construction; the flat-top
        combination can fail, and consumers that need an inverse are
        expected to check this flag and fall back to plain batch means.
    """

    matrix: np.ndarray
    kind: str
    batch_size: int
    n_used: int
    is_psd: bool

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class CorrelogramSeries:
    """Auto- or cross-correlation values at lags 0..L for one column pair."""

    lags: np.ndarray
    values: np.ndarray
    pair: tuple
    n_used: int


def _finalize(matrix, kind, batch_size, n_used):
    sym = 0.5 * (matrix + matrix.T)
    eigs = np.linalg.eigvalsh(sym)
    tol = 1e-12 * max(1.0, float(np.abs(eigs).max())) if sym.size else 0.0
    is_psd = bool(eigs.min() >= -tol) if sym.size else True
    sym.setflags(write=False)
    return CovarianceEstimate(
        matrix=sym,
        kind=kind,
        batch_size=int(batch_size),
        n_used=int(n_used),
        is_psd=is_psd,
    )


def batch_means_sigma(chain, b):
    """Non-overlapping batch means estimate of the asymptotic covariance.

    The chain is cut into a = floor(n / b) consecutive batches of length
    b (rows beyond a*b are dropped from the end); with batch means Y_k and
    grand mean over the first a*b rows,

        Sigma_hat = b / (a - 1) * sum_k (Y_k - mean)(Y_k - mean)^T.

    Parameters
    ----------
    chain : ChainMatrix
    b : int
        Batch length, 1 <= b, with floor(n / b) >= 2.

    Returns
    -------
    CovarianceEstimate
    """
    if isinstance(b, bool) or not isinstance(b, (int, np.integer)):
        raise ParameterError("batch length must be an integer")
    if b < 1:
        raise ParameterError(f"batch length must be >= 1, got {b}")
    n = chain.rows
    a = n // b
    if a < 2:
        raise InsufficientDataError(
            f"need at least two complete batches: n={n}, b={b}"
        )
    used = a * b
    data = chain.values[:used]
    batch_means = data.reshape(a, b, chain.cols).mean(axis=1)
    centered = batch_means - data.mean(axis=0)
    mat = (b / (a - 1.0)) * (centered.T @ centered)
    return _finalize(mat, "batch-means", b, used)


def flat_top_sigma(chain, b):
    """Flat-top (lugsail style) combination 2*Sigma_hat(b) - Sigma_hat(b/2).

    Cancels the leading-order bias of plain batch means at the price of a
    matrix that is not guaranteed positive semidefinite; check ``is_psd``
    before inverting and fall back to :func:`batch_means_sigma` when it
    fails.
    """
    if isinstance(b, bool) or not isinstance(b, (int, np.integer)):
        raise ParameterError("batch length must be an integer")
    if b < 2 or b % 2 != 0:
        raise ParameterError(f"flat-top batch length must be even and >= 2, got {b}")
    coarse = batch_means_sigma(chain, b)
    fine = batch_means_sigma(chain, b // 2)
    mat = 2.0 * coarse.matrix - fine.matrix
    return _finalize(mat, "flat-top", b, coarse.n_used)


def sample_cov_lambda(chain):
    """Target covariance of the functional: divisor n, not n - 1."""
    n = chain.rows
    if n < 2:
        raise InsufficientDataError(f"need at least two rows, got {n}")
    centered = chain.values - chain.values.mean(axis=0)
    mat = (centered.T @ centered) / n
    return _finalize(mat, "sample-cov", 0, n)


def default_batch_size(n):
    """Cube-root batch length floored to the nearest even integer (min 2)."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ParameterError("n must be an integer")
    if n < 8:
        raise InsufficientDataError(f"need n >= 8 to pick a batch length, got {n}")
    # integer cube root; round-then-correct avoids float cbrt edge cases
    b = int(round(n ** (1.0 / 3.0)))
    while (b + 1) ** 3 <= n:
        b += 1
    while b**3 > n:
        b -= 1
    if b % 2 != 0:
        b -= 1
    return max(b, 2)


def sqrt_batch_size(n):
    """Square-root batch length floored to the nearest even integer (min 2).

    Larger batches than the cube-root default. The cube-root rate is
    mean-squared optimal only up to an unknown constant, and for chains
    whose correlation length is tens of steps the cube-root choice leaves
    enough downward bias in the batch-means matrix to inflate the
    effective sample size near a stopping boundary. Square-root batches
    trade variance for much smaller bias, which is the safer direction
    when the estimate gates a termination decision.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ParameterError("n must be an integer")
    if n < 8:
        raise InsufficientDataError(f"need n >= 8 to pick a batch length, got {n}")
    b = math.isqrt(int(n))
    if b % 2 != 0:
        b -= 1
    return max(b, 2)


def correlogram(chain, max_lag, pair=(0, 0)):
    """Correlation of one column pair at lags 0..max_lag.

    Uses the common 1/n normalization with global means and standard
    deviations, so the lag-0 autocorrelation is exactly 1 and the lag-0
    cross-correlation is the ordinary sample correlation.
    """
    if isinstance(max_lag, bool) or not isinstance(max_lag, (int, np.integer)):
        raise ParameterError("max_lag must be an integer")
    n = chain.rows
    if not 0 <= max_lag < n:
        raise ParameterError(f"max_lag must satisfy 0 <= L < n={n}, got {max_lag}")
    i, j = pair
    x = chain.column(i)
    y = chain.column(j)
    xc = x - x.mean()
    yc = y - y.mean()
    var_x = float(xc @ xc) / n
    var_y = float(yc @ yc) / n
    if var_x == 0.0 or var_y == 0.0:
        raise DegenerateDataError(
            f"column pair {pair} includes a constant column"
        )
    values = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        c_k = float(xc[: n - k] @ yc[k:]) / n
        if i == j:
            values[k] = c_k / var_x
        else:
            values[k] = c_k / np.sqrt(var_x * var_y)
    return CorrelogramSeries(
        lags=np.arange(max_lag + 1),
        values=values,
        pair=(int(i), int(j)),
        n_used=n,
    )
