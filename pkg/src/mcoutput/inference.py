"""Effective sample size, stopping rules, and Hotelling confidence regions.

The workflow: estimate the target covariance Lambda and the asymptotic
covariance Sigma, turn the pair into a multivariate effective sample size

    ESS = n * (det Lambda / det Sigma)^(1/p),

and stop the simulation once ESS clears the cutoff M(alpha, epsilon, p)
that makes a (1 - alpha) confidence region's volume small relative to the
target spread (relative precision epsilon). The equivalent scale-free
diagnostic rhat = sqrt(1 + 1/ESS) crosses sqrt(1 + 1/M) at exactly the
same moment, so either rule may drive termination.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import fdtri, gammaincinv

from .chain import ChainMatrix
from .errors import (
    DegreesOfFreedomError,
    DimensionError,
    NumericsError,
    ParameterError,
    SingularEstimateError,
)
from .mcse import (
    CovarianceEstimate,
    batch_means_sigma,
    default_batch_size,
    flat_top_sigma,
    sample_cov_lambda,
)

__all__ = [
    "EssCutoff",
    "StoppingConfig",
    "StoppingVerdict",
    "ConfidenceRegion",
    "chi2_quantile",
    "f_quantile",
    "min_ess_cutoff",
    "ess",
    "rhat_from_ess",
    "hotelling_region",
    "default_hotelling_df",
    "evaluate_verdict",
    "stopping_controller",
]

BOUNDARY_POINTS = 128


def chi2_quantile(prob, dof):
    """Chi-square quantile via the inverse regularized incomplete gamma."""
    if not 0.0 < prob < 1.0:
        raise ParameterError(f"prob must be inside (0, 1), got {prob}")
    if not dof >= 1:
        raise ParameterError(f"dof must be >= 1, got {dof}")
    x = 2.0 * float(gammaincinv(dof / 2.0, prob))
    if not math.isfinite(x):
        raise NumericsError(f"chi-square quantile failed for prob={prob}, dof={dof}")
    return x


def f_quantile(prob, d1, d2):
    """F quantile via the inverse regularized incomplete beta."""
    if not 0.0 < prob < 1.0:
        raise ParameterError(f"prob must be inside (0, 1), got {prob}")
    if not (d1 >= 1 and d2 >= 1):
        raise ParameterError(f"degrees of freedom must be >= 1, got ({d1}, {d2})")
    x = float(fdtri(d1, d2, prob))
    if not math.isfinite(x):
        raise NumericsError(f"F quantile failed for prob={prob}, dof=({d1}, {d2})")
    return x


class EssCutoff(NamedTuple):
    """Minimum effective sample size: exact value and nearest integer."""

    value: float
    rounded: int


def min_ess_cutoff(alpha=0.05, epsilon=0.05, p=1):
    """Minimum ESS for relative precision epsilon at confidence 1 - alpha.

        M = (2^(2/p) * pi / (p * Gamma(p/2))^(2/p)) * chi2_{1-alpha, p} / epsilon^2

    For p = 1 this reduces to 4 * chi2_{1-alpha, 1} / epsilon^2. Computed
    in log space so large p stays finite.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be inside (0, 1), got {alpha}")
    if not 0.0 < epsilon < 1.0:
        raise ParameterError(f"epsilon must be inside (0, 1), got {epsilon}")
    if isinstance(p, bool) or not isinstance(p, (int, np.integer)) or p < 1:
        raise ParameterError(f"p must be an integer >= 1, got {p}")
    chi2 = chi2_quantile(1.0 - alpha, p)
    log_m = (
        (2.0 / p) * math.log(2.0)
        + math.log(math.pi)
        - (2.0 / p) * (math.log(p) + math.lgamma(p / 2.0))
        + math.log(chi2)
        - 2.0 * math.log(epsilon)
    )
    value = math.exp(log_m)
    return EssCutoff(value=value, rounded=int(round(value)))


def ess(n, lambda_est, sigma_est):
    """Multivariate effective sample size n * (det Lambda / det Sigma)^(1/p).

    Determinants go through Cholesky factorizations in log space, which
    makes the estimate exactly invariant under rescaling the functional
    and raises :class:`SingularEstimateError` instead of returning junk
    when either matrix is not positive definite.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    p = lambda_est.dim
    if sigma_est.dim != p:
        raise DimensionError(
            f"matrix sizes differ: lambda is {p}, sigma is {sigma_est.dim}"
        )
    log_det_lambda = _chol_logdet(lambda_est.matrix, "target covariance")
    log_det_sigma = _chol_logdet(sigma_est.matrix, "asymptotic covariance")
    return float(n) * math.exp((log_det_lambda - log_det_sigma) / p)


def rhat_from_ess(ess_value):
    """Scale-free convergence diagnostic sqrt(1 + 1 / ESS)."""
    if not (math.isfinite(ess_value) and ess_value > 0.0):
        raise ParameterError(f"ess must be positive and finite, got {ess_value}")
    return math.sqrt(1.0 + 1.0 / ess_value)


def _chol_logdet(matrix, what):
    try:
        chol = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise SingularEstimateError(
            f"{what} is not positive definite; with the flat-top estimator, "
            "retry with plain batch means"
        ) from None
    return 2.0 * float(np.log(np.diag(chol)).sum())


@dataclass(frozen=True)
class ConfidenceRegion:
    """Hotelling-style ellipsoidal confidence region for the mean.

    The region is {x : (x - center)^T shape^(-1) (x - center) < hotelling_q2}
    with shape = Sigma_hat / n. ``boundary`` is a 128-point polyline of the
    ellipse for p = 2 and None otherwise.
    """

    center: np.ndarray
    shape: np.ndarray
    hotelling_q2: float
    df: float
    volume: float
    boundary: np.ndarray | None

    @property
    def dim(self):
        return self.center.size

    def mahalanobis2(self, x):
        """Quadratic form (x - center)^T shape^(-1) (x - center)."""
        r = np.asarray(x, dtype=float) - self.center
        return float(r @ np.linalg.solve(self.shape, r))

    def contains(self, x):
        return self.mahalanobis2(x) < self.hotelling_q2

    def interval(self):
        """(lo, hi) endpoints for a univariate region."""
        if self.dim != 1:
            raise DimensionError("interval() is only defined for p = 1")
        half = math.sqrt(self.hotelling_q2 * float(self.shape[0, 0]))
        c = float(self.center[0])
        return (c - half, c + half)


def hotelling_region(mean, sigma_est, n, alpha, q):
    """Confidence region for the mean from an asymptotic covariance estimate.

    Parameters
    ----------
    mean : array_like, shape (p,)
    sigma_est : CovarianceEstimate
        Asymptotic covariance; must be positive definite.
    n : int
        Chain length the estimate was scaled by.
    alpha : float
        Miss probability; the region has confidence 1 - alpha.
    q : float
        Degrees of freedom attributed to sigma_est. With a batches of
        batch means the convention here is q = a - p.

    Notes
    -----
    The squared radius is T^2 = q * p / (q - p + 1) * F_{1-alpha; p, q-p+1}
    and the volume is the ellipsoid volume
    2 pi^(p/2) / (p Gamma(p/2)) * (T^2 / n)^(p/2) * det(Sigma)^(1/2).
    """
    center = np.atleast_1d(np.asarray(mean, dtype=float)).copy()
    if center.ndim != 1:
        raise DimensionError("mean must be a vector")
    p = center.size
    if sigma_est.dim != p:
        raise DimensionError(
            f"mean has {p} components but sigma is {sigma_est.dim}x{sigma_est.dim}"
        )
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be inside (0, 1), got {alpha}")
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not q > p:
        raise DegreesOfFreedomError(
            f"need q > p for the Hotelling correction, got q={q}, p={p}"
        )
    sigma = sigma_est.matrix
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise SingularEstimateError(
            "sigma estimate is not positive definite"
        ) from None
    t2 = q * p / (q - p + 1.0) * f_quantile(1.0 - alpha, p, q - p + 1.0)
    log_det = 2.0 * float(np.log(np.diag(chol)).sum())
    log_volume = (
        math.log(2.0)
        + (p / 2.0) * math.log(math.pi)
        - math.log(p)
        - math.lgamma(p / 2.0)
        + (p / 2.0) * math.log(t2 / n)
        + 0.5 * log_det
    )
    boundary = None
    if p == 2:
        theta = np.linspace(0.0, 2.0 * math.pi, BOUNDARY_POINTS, endpoint=False)
        circle = np.column_stack([np.cos(theta), np.sin(theta)])
        boundary = center + math.sqrt(t2 / n) * (circle @ chol.T)
        boundary.setflags(write=False)
    shape = sigma / n
    shape.setflags(write=False)
    center.setflags(write=False)
    return ConfidenceRegion(
        center=center,
        shape=shape,
        hotelling_q2=float(t2),
        df=float(q),
        volume=float(math.exp(log_volume)),
        boundary=boundary,
    )


def default_hotelling_df(sigma_est, p):
    """q = (number of batches) - p for batch-style estimates."""
    if sigma_est.batch_size < 1:
        raise ParameterError(
            "degrees of freedom are only defined for batch-style estimates"
        )
    return sigma_est.n_used // sigma_est.batch_size - p


@dataclass
class StoppingConfig:
    """Tuning knobs for the sequential stopping rule.

    ``n_star`` defaults to the rounded cutoff M(alpha, epsilon, p): the
    first check never happens before the minimum ESS could possibly be
    reached. After a failed check the next one waits for the chain to
    grow by ``check_growth``, so estimation cost stays proportional to
    the final chain length. ``use_flat_top`` switches Sigma to the
    flat-top estimator with automatic fallback to plain batch means when
    the combination is not usable.
    """

    p: int
    alpha: float = 0.05
    epsilon: float = 0.05
    n_star: int | None = None
    check_growth: float = 1.5
    max_n: int = 1_000_000
    use_flat_top: bool = False
    cutoff: EssCutoff = field(init=False, repr=False)

    def __post_init__(self):
        self.cutoff = min_ess_cutoff(self.alpha, self.epsilon, self.p)
        if self.n_star is None:
            self.n_star = self.cutoff.rounded
        if self.n_star < 8:
            raise ParameterError(f"n_star must be >= 8, got {self.n_star}")
        if not self.check_growth > 1.0:
            raise ParameterError(
                f"check_growth must be > 1, got {self.check_growth}"
            )
        if self.max_n < 1:
            raise ParameterError(f"max_n must be >= 1, got {self.max_n}")


@dataclass(frozen=True)
class StoppingVerdict:
    """Outcome of one convergence check.

    ``terminate`` is true exactly when ess >= cutoff and n >= n_star held
    at the check; ``fallback_used`` records that a requested flat-top
    estimate was replaced by plain batch means.
    """

    n: int
    ess: float
    cutoff: float
    rhat: float
    terminate: bool
    fallback_used: bool


def _sigma_with_fallback(chain, b, use_flat_top):
    if use_flat_top:
        candidate = flat_top_sigma(chain, b)
        if candidate.is_psd and _is_invertible(candidate.matrix):
            return candidate, False
        return batch_means_sigma(chain, b), True
    return batch_means_sigma(chain, b), False


def _is_invertible(matrix):
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        return False
    return True


def evaluate_verdict(chain, config, batch_size=None):
    """Run one convergence check on a chain.

    Returns (verdict, lambda_estimate, sigma_estimate). ``batch_size``
    defaults to :func:`default_batch_size` at the current length, so
    repeated checks re-select b as the chain grows.
    """
    n = chain.rows
    if chain.cols != config.p:
        raise DimensionError(
            f"chain has {chain.cols} columns, config expects p={config.p}"
        )
    b = default_batch_size(n) if batch_size is None else batch_size
    lam = sample_cov_lambda(chain)
    sig, fallback = _sigma_with_fallback(chain, b, config.use_flat_top)
    value = ess(n, lam, sig)
    verdict = StoppingVerdict(
        n=n,
        ess=value,
        cutoff=config.cutoff.value,
        rhat=rhat_from_ess(value),
        terminate=bool(value >= config.cutoff.value and n >= config.n_star),
        fallback_used=fallback,
    )
    return verdict, lam, sig


def stopping_controller(
    sampler: Callable[[int, object], np.ndarray],
    config: StoppingConfig,
    rng,
    labels=None,
    batch_size_fn=None,
    next_check_fn=None,
):
    """Grow a chain until its effective sample size clears the cutoff.

    ``sampler(k, rng)`` must return the next k rows (shape (k, p)) of the
    functional's evaluations, continuing from wherever it left off. The
    controller runs n_star steps, checks, then re-checks every time the
    chain has grown by ``config.check_growth``, stopping early at
    ``config.max_n``. It never raises just because the budget ran out:
    the last verdict simply has ``terminate=False``.

    ``batch_size_fn`` maps the current chain length to the batch length
    used at that check; by default every check re-selects
    :func:`default_batch_size` at the current n. ``next_check_fn`` maps
    the current length to the next length worth checking at, replacing
    the default geometric schedule; the controller still caps it at
    ``config.max_n`` and insists it actually grows the chain.

    Returns (chain, verdicts), one verdict per check in order.
    """
    blocks = []
    n = 0
    verdicts = []
    target = min(config.n_star, config.max_n)
    while True:
        k = target - n
        block = np.asarray(sampler(k, rng), dtype=float)
        if block.ndim == 1:
            block = block[:, None]
        if block.shape != (k, config.p):
            raise DimensionError(
                f"sampler returned shape {block.shape}, expected ({k}, {config.p})"
            )
        blocks.append(block)
        n = target
        chain = ChainMatrix(np.vstack(blocks), labels)
        b = None if batch_size_fn is None else batch_size_fn(n)
        verdict, _, _ = evaluate_verdict(chain, config, batch_size=b)
        verdicts.append(verdict)
        if verdict.terminate or n >= config.max_n:
            return chain, verdicts
        if next_check_fn is None:
            proposed = math.ceil(n * config.check_growth)
        else:
            proposed = int(next_check_fn(n))
        target = min(config.max_n, max(proposed, n + 1))
