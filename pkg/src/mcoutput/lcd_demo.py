"""Bayesian Weibull reliability study of LCD projector lamp failures.

Thirty-one failure times (hours) are modeled as Weibull with density
f(t | lambda, beta) = lambda * beta * t^(beta-1) * exp(-lambda * t^beta),
with priors lambda ~ Gamma(2.5, rate 2350) and beta ~ Gamma(1, 1). The
posterior is sampled with a Metropolis-within-Gibbs scan: lambda has a
conjugate Gamma(33.5, 2350 + sum t_i^beta) full conditional drawn exactly,
then beta moves by a Gaussian random walk accepted by Metropolis-Hastings.
Each scan updates lambda first, so the beta step always sees the fresh
lambda.

The functional pushed through the output-analysis machinery is
    h = (MTTF, R(1500)) = (lambda^(-1/beta) Gamma(1 + 1/beta),
                           exp(-lambda * 1500^beta)),
the mean time to failure and the probability a lamp survives 1500 hours.
"""

import csv
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .chain import RngStream
from .errors import (
    DataError,
    DegenerateDataError,
    NumericsError,
    ParameterError,
    ParseError,
)
from .inference import (
    StoppingConfig,
    default_hotelling_df,
    evaluate_verdict,
    hotelling_region,
    stopping_controller,
)
from .mcse import correlogram, sqrt_batch_size
from .quantiles import quantile_ci

__all__ = [
    "LCD_FAILURE_HOURS",
    "LAMBDA_PRIOR_SHAPE",
    "LAMBDA_PRIOR_RATE",
    "POSTERIOR_LAMBDA_SHAPE",
    "RELIABILITY_HOURS",
    "LcdData",
    "PosteriorState",
    "DemoConfig",
    "DemoReport",
    "log_unnormalized_posterior",
    "gibbs_lambda",
    "mh_beta",
    "functional_h",
    "weibull_mle_beta",
    "posterior_sampler",
    "sample_posterior",
    "run_demo",
]

# Lamp failure times in hours, row-major from the study's data table.
LCD_FAILURE_HOURS = (
    387.0, 182.0, 244.0, 600.0, 627.0, 332.0, 418.0,
    300.0, 798.0, 584.0, 660.0, 39.0, 274.0, 174.0,
    50.0, 34.0, 1895.0, 158.0, 974.0, 345.0, 1755.0,
    1752.0, 473.0, 81.0, 954.0, 1407.0, 230.0, 464.0,
    380.0, 131.0, 1205.0,
)

LAMBDA_PRIOR_SHAPE = 2.5
LAMBDA_PRIOR_RATE = 2350.0
BETA_PRIOR_RATE = 1.0
POSTERIOR_LAMBDA_SHAPE = LAMBDA_PRIOR_SHAPE + len(LCD_FAILURE_HOURS)  # 33.5
RELIABILITY_HOURS = 1500.0

_LOG_REL_HOURS = math.log(RELIABILITY_HOURS)


class LcdData:
    """The 31 lamp failure times plus cached transforms for the samplers.

    Any externally supplied values (for example the shipped CSV fixture)
    are cross-checked against the embedded table, so an LcdData instance
    always carries exactly this study's data.
    """

    __slots__ = ("times", "log_times", "sum_log_times", "total_hours")

    def __init__(self, failure_hours=None):
        ref = np.asarray(LCD_FAILURE_HOURS, dtype=float)
        if failure_hours is None:
            t = ref
        else:
            t = np.asarray(failure_hours, dtype=float)
            if t.ndim != 1:
                raise DataError("failure times must be a flat sequence")
            if t.size != ref.size:
                raise DataError(
                    f"expected {ref.size} failure times, got {t.size}"
                )
            if not np.array_equal(np.sort(t), np.sort(ref)):
                raise DataError(
                    "failure times do not match the embedded data table"
                )
        t = t.copy()
        t.setflags(write=False)
        self.times = t
        log_t = np.log(t)
        log_t.setflags(write=False)
        self.log_times = log_t
        self.sum_log_times = float(log_t.sum())
        self.total_hours = float(t.sum())

    @property
    def n(self):
        return self.times.size

    @classmethod
    def load(cls):
        """The embedded data table."""
        return cls()

    @classmethod
    def from_csv(cls, path=None):
        """Load from a one-column CSV with header; defaults to the shipped fixture."""
        if path is None:
            ref = resources.files("mcoutput").joinpath("data/lcd_failure_hours.csv")
            with resources.as_file(ref) as p:
                return cls.from_csv(p)
        values = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ParseError("file is empty", line=1)
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 1:
                    raise ParseError(f"expected one column, got {len(row)}", line=lineno)
                try:
                    values.append(float(row[0]))
                except ValueError:
                    raise ParseError(f"not a number: {row[0]!r}", line=lineno) from None
        return cls(values)


@dataclass(frozen=True)
class PosteriorState:
    """Current (lambda, beta) of the Metropolis-within-Gibbs scan."""

    lam: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0.0):
            raise ParameterError(f"lambda must be positive and finite, got {self.lam}")
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise ParameterError(f"beta must be positive and finite, got {self.beta}")


def _sum_t_pow(beta, data):
    """sum_i t_i^beta, computed as exp(beta * log t_i)."""
    with np.errstate(over="ignore"):
        return float(np.exp(beta * data.log_times).sum())


def log_unnormalized_posterior(lam, beta, data):
    """Log of the unnormalized posterior density at (lambda, beta).

    log f = 32.5 ln(lambda) + 31 ln(beta) + (beta - 1) sum ln(t_i)
            - lambda sum t_i^beta - beta - 2350 lambda

    Returns -inf off the support (either coordinate <= 0), which is a
    Metropolis rejection rather than an error.
    """
    if not (math.isfinite(lam) and math.isfinite(beta)):
        return -math.inf
    if lam <= 0.0 or beta <= 0.0:
        return -math.inf
    s = _sum_t_pow(beta, data)
    return (
        (POSTERIOR_LAMBDA_SHAPE - 1.0) * math.log(lam)
        + data.n * math.log(beta)
        + (beta - 1.0) * data.sum_log_times
        - lam * s
        - BETA_PRIOR_RATE * beta
        - LAMBDA_PRIOR_RATE * lam
    )


def _standard_gamma(shape, rng):
    """Marsaglia-Tsang squeeze/rejection draw of Gamma(shape, 1), shape > 1.

    d = shape - 1/3, c = 1/sqrt(9 d); cube a squeezed normal and accept by
    the fast quartic squeeze, falling through to the exact log test. The
    method is fixed here (not delegated) so demo output is reproducible
    from the (seed, stream_id) pair alone.
    """
    if shape <= 1.0:
        raise ParameterError(f"gamma sampler requires shape > 1, got {shape}")
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.normal()
        t = 1.0 + c * x
        if t <= 0.0:
            continue
        v = t * t * t
        u = rng.uniform()
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v


def gibbs_lambda(beta, data, rng):
    """Exact draw from the lambda full conditional Gamma(33.5, 2350 + sum t_i^beta)."""
    if not (math.isfinite(beta) and beta > 0.0):
        raise ParameterError(f"beta must be positive and finite, got {beta}")
    rate = LAMBDA_PRIOR_RATE + _sum_t_pow(beta, data)
    return _standard_gamma(POSTERIOR_LAMBDA_SHAPE, rng) / rate


def _mh_step(lam, beta, s_cur, data, proposal_sd, rng):
    """One random-walk Metropolis update of beta given lambda.

    Returns (beta, sum t_i^beta, accepted). ``s_cur`` must equal
    sum t_i^beta for the incoming beta; it is carried so the scan only
    pays for one power-sum per proposal.
    """
    prop = beta + proposal_sd * rng.normal()
    if prop <= 0.0:
        # off the support: reject outright, no accept draw needed
        return beta, s_cur, False
    s_prop = _sum_t_pow(prop, data)
    delta = (
        data.n * math.log(prop / beta)
        + (prop - beta) * (data.sum_log_times - BETA_PRIOR_RATE)
        - lam * (s_prop - s_cur)
    )
    if math.log(rng.uniform()) < delta:
        return prop, s_prop, True
    return beta, s_cur, False


def mh_beta(state, data, proposal_sd, rng):
    """Metropolis-Hastings update of beta with a N(beta, proposal_sd^2) walk.

    Returns (new beta, accepted). Nonpositive proposals are rejected
    outright since the posterior has no mass there; a zero move has
    log-ratio exactly 0 and is always accepted.
    """
    if not proposal_sd >= 0.0:
        raise ParameterError(f"proposal_sd must be >= 0, got {proposal_sd}")
    s_cur = _sum_t_pow(state.beta, data)
    beta_new, _, accepted = _mh_step(
        state.lam, state.beta, s_cur, data, proposal_sd, rng
    )
    return beta_new, accepted


def _h_values(lam, beta):
    inv_beta = 1.0 / beta
    mttf = math.exp(-math.log(lam) * inv_beta + math.lgamma(1.0 + inv_beta))
    try:
        t_pow = math.exp(beta * _LOG_REL_HOURS)
    except OverflowError:
        return mttf, 0.0
    return mttf, math.exp(-lam * t_pow)


def functional_h(state):
    """(MTTF, R(1500)) at the given posterior state.

    MTTF = lambda^(-1/beta) * Gamma(1 + 1/beta) via log-gamma, and
    R(1500) = exp(-lambda * 1500^beta), clamped to 0 when t^beta
    overflows (log-reliability -inf).
    """
    return _h_values(state.lam, state.beta)


def weibull_mle_beta(data, tol=1e-10):
    """Maximum likelihood beta for a Weibull sample (profile likelihood root).

    Solves sum(t^b ln t)/sum(t^b) - 1/b - mean(ln t) = 0, which is
    strictly increasing in b, with a bracketed safeguarded root finder.
    Accepts an LcdData instance or any positive sample.
    """
    if isinstance(data, LcdData):
        times = data.times
        log_t = data.log_times
    else:
        times = np.asarray(data, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise DataError("need a flat sample of at least two failure times")
        if not (np.isfinite(times).all() and (times > 0.0).all()):
            raise DataError("failure times must be positive and finite")
        log_t = np.log(times)
    mean_log = float(log_t.mean())

    def score(b):
        with np.errstate(over="ignore"):
            w = np.exp(b * log_t)
        total = w.sum()
        if not np.isfinite(total):
            # overflow region: sign is that of the largest observation's term
            return float(log_t.max()) - 1.0 / b - mean_log
        return float((w * log_t).sum()) / float(total) - 1.0 / b - mean_log

    lo = 1e-8
    hi = 1.0
    cap = 1e6
    while score(hi) <= 0.0:
        hi *= 2.0
        if hi > cap:
            raise NumericsError(
                "no finite Weibull MLE: the profile score never changes sign "
                "(degenerate sample, e.g. all failure times equal)"
            )
    from scipy.optimize import brentq

    return float(brentq(score, lo, hi, xtol=tol))


class _WeibullGibbsSampler:
    """Stateful scan usable as a stopping-controller sampler."""

    def __init__(self, data, proposal_sd, beta_start):
        if not proposal_sd > 0.0:
            raise ParameterError(f"proposal_sd must be positive, got {proposal_sd}")
        if not (math.isfinite(beta_start) and beta_start > 0.0):
            raise ParameterError(f"beta_start must be positive, got {beta_start}")
        self._data = data
        self._proposal_sd = proposal_sd
        self._beta = beta_start
        self._s_cur = _sum_t_pow(beta_start, data)
        self._param_blocks = []
        self.steps = 0
        self.accepted = 0

    def __call__(self, k, rng):
        data = self._data
        sd = self._proposal_sd
        beta = self._beta
        s_cur = self._s_cur
        h = np.empty((k, 2))
        pr = np.empty((k, 2))
        for i in range(k):
            lam = _standard_gamma(POSTERIOR_LAMBDA_SHAPE, rng) / (
                LAMBDA_PRIOR_RATE + s_cur
            )
            beta, s_cur, accepted = _mh_step(lam, beta, s_cur, data, sd, rng)
            if accepted:
                self.accepted += 1
            h[i, 0], h[i, 1] = _h_values(lam, beta)
            pr[i, 0] = lam
            pr[i, 1] = beta
        self._beta = beta
        self._s_cur = s_cur
        self.steps += k
        self._param_blocks.append(pr)
        return h

    @property
    def accept_rate(self):
        return self.accepted / self.steps if self.steps else math.nan

    @property
    def params(self):
        if not self._param_blocks:
            return np.empty((0, 2))
        return np.vstack(self._param_blocks)


def posterior_sampler(data, proposal_sd=0.1, beta_start=None):
    """A stateful sampler(k, rng) over h = (MTTF, R(1500)) rows."""
    if beta_start is None:
        beta_start = weibull_mle_beta(data)
    return _WeibullGibbsSampler(data, proposal_sd, beta_start)


def sample_posterior(data, n, rng, proposal_sd=0.1, beta_start=None):
    """Fixed-length run: returns (h, params, accept_rate) arrays of n rows."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    sampler = posterior_sampler(data, proposal_sd, beta_start)
    h = sampler(int(n), rng)
    return h, sampler.params, sampler.accept_rate


@dataclass
class DemoConfig:
    """Configuration for :func:`run_demo`."""

    seed: int = 0
    stream_id: int = 0
    proposal_sd: float = 0.1
    beta_start: float | None = None
    alpha: float = 0.05
    epsilon: float = 0.05
    long_run_n: int = 100_000
    max_n: int = 200_000
    check_growth: float = 1.5
    acf_lags: int = 50
    credible_levels: tuple = (0.025, 0.975)

    def __post_init__(self):
        if not self.proposal_sd > 0.0:
            raise ParameterError("proposal_sd must be positive")
        if self.beta_start is not None and not self.beta_start > 0.0:
            raise ParameterError("beta_start must be positive")
        if self.long_run_n < 1:
            raise ParameterError("long_run_n must be >= 1")
        lo, hi = self.credible_levels
        if not (0.0 < lo < hi < 1.0):
            raise ParameterError(
                f"credible levels must satisfy 0 < lo < hi < 1, got {self.credible_levels}"
            )
        if self.acf_lags < 1:
            raise ParameterError("acf_lags must be >= 1")


@dataclass
class DemoReport:
    """Everything :func:`run_demo` produces, ready for serialization."""

    config: DemoConfig
    beta_start: float
    data: LcdData
    chain: object
    params: np.ndarray
    verdicts: list
    accept_rate: float
    mean: np.ndarray
    mcse: np.ndarray
    lambda_est: object
    sigma_est: object
    credible_intervals: dict
    quantile_estimates: dict
    correlograms: dict
    region: object

    @property
    def final(self):
        return self.verdicts[-1]

    @property
    def terminated(self):
        return self.final.terminate


def run_demo(config=None):
    """Run the lamp-reliability workflow end to end.

    Starts beta at its MLE, runs the Metropolis-within-Gibbs scan under
    the sequential stopping rule for p = 2 (first check at the rounded
    ESS cutoff, 7529 with default alpha and epsilon), then summarizes the
    terminated chain: posterior means with Monte Carlo standard errors,
    equal-tailed credible intervals with Monte Carlo CIs on each
    endpoint, auto/cross-correlograms, and the Hotelling confidence
    region for the posterior-mean pair.

    The run is two-staged. The first check happens at the cutoff length
    itself (the pilot, meant for catching gross mixing problems early);
    this chain's ESS there is around a sixth of the cutoff, so the run
    continues. Rather than creeping upward in small increments, the
    production run then goes straight to ``long_run_n`` draws, an order
    of magnitude past the pilot, and re-checks there; only if that still
    falls short does the schedule continue geometrically. Checking a
    noisy ESS estimate often, just below its own crossing point, would
    otherwise terminate runs early at whatever check first catches an
    upward noise excursion.

    All batch-means computations here use the square-root batch rule
    rather than the cube-root default. This chain's functions decorrelate
    over tens of scans, so cube-root batches understate the asymptotic
    covariance badly enough to let the ESS check fire tens of thousands
    of draws early; square-root batches keep the estimate close to its
    long-run value at every check.
    """
    if config is None:
        config = DemoConfig()
    data = LcdData.load()
    beta_start = (
        config.beta_start if config.beta_start is not None else weibull_mle_beta(data)
    )
    rng = RngStream(config.seed, config.stream_id)
    sampler = _WeibullGibbsSampler(data, config.proposal_sd, beta_start)
    stop_cfg = StoppingConfig(
        p=2,
        alpha=config.alpha,
        epsilon=config.epsilon,
        check_growth=config.check_growth,
        max_n=config.max_n,
    )
    def next_check(n):
        if n < config.long_run_n:
            return config.long_run_n
        return math.ceil(n * config.check_growth)

    chain, verdicts = stopping_controller(
        sampler,
        stop_cfg,
        rng,
        labels=("MTTF", "R1500"),
        batch_size_fn=sqrt_batch_size,
        next_check_fn=next_check,
    )
    n = chain.rows
    b = sqrt_batch_size(n)
    _, lambda_est, sigma_est = evaluate_verdict(chain, stop_cfg, batch_size=b)
    mean = chain.values.mean(axis=0)
    mcse = np.sqrt(np.diag(sigma_est.matrix) / n)
    region = hotelling_region(
        mean, sigma_est, n, config.alpha, default_hotelling_df(sigma_est, 2)
    )

    credible_intervals = {}
    quantile_estimates = {}
    correlograms = {}
    for i in range(chain.cols):
        label = chain.label(i)
        col = chain.column(i)
        estimates = tuple(
            quantile_ci(col, level, config.alpha, b)
            for level in config.credible_levels
        )
        quantile_estimates[label] = estimates
        credible_intervals[label] = (estimates[0].point, estimates[-1].point)
        correlograms[label] = correlogram(chain, config.acf_lags, (i, i))
    correlograms[f"{chain.label(0)}:{chain.label(1)}"] = correlogram(
        chain, config.acf_lags, (0, 1)
    )

    return DemoReport(
        config=config,
        beta_start=beta_start,
        data=data,
        chain=chain,
        params=sampler.params,
        verdicts=verdicts,
        accept_rate=sampler.accept_rate,
        mean=mean,
        mcse=mcse,
        lambda_est=lambda_est,
        sigma_est=sigma_est,
        credible_intervals=credible_intervals,
        quantile_estimates=quantile_estimates,
        correlograms=correlograms,
        region=region,
    )
