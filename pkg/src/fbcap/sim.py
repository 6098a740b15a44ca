"""Monte Carlo simulation of the linear feedback coding scheme.

The transmitter sends one of M grid points theta in [-sqrt(P), sqrt(P)] as
X_1, then refines by filtering the noise innovations through a first-order
recursive filter:

    X_k = beta X_{k-1} + sigma U_{k-1},    k = 2, 3, ...

with beta = -sgn(alpha) x0 and sigma = sgn(alpha) sqrt(P (1 - beta^2)),
where x0 is the capacity root of the MA(1) channel.  The receiver forms the
generalized least-squares estimate of theta from Y_1..Y_n and decodes to the
nearest grid point.  Decoding error decays doubly exponentially in n for any
rate below capacity.

Trials are pure functions of (params, seed, trial index): each trial draws
its randomness from its own counter-based Philox stream, so results do not
depend on execution order or batching.
"""

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import erfc

from .capacity import ma1_feedback_capacity
from .errors import DomainError, NumericalError
from .oracle import generic_optimize
from .noise import entropy_rate_from_spectrum

_SIGN = lambda z: 1.0 if z >= 0 else -1.0


@dataclass(frozen=True)
class SchemeParams:
    """Design point of the coding scheme.

    Use :meth:`design` to derive the filter (beta, sigma) and grid size from
    (alpha, snr, n, rate); the constructor itself trusts its inputs.
    """

    alpha: float
    snr: float
    n: int
    rate_nats: float
    beta: float
    sigma: float
    grid_size: int

    def __post_init__(self):
        if abs(self.alpha) > 1:
            raise DomainError("scheme requires |alpha| <= 1")
        if self.snr <= 0:
            raise DomainError("snr must be positive")
        if self.n < 1:
            raise DomainError("block length must be >= 1")
        if self.grid_size < 2:
            raise DomainError("need at least two messages")

    @classmethod
    def design(cls, alpha, snr, n, rate_nats=None, rate_fraction=None):
        """Build params from the capacity root; rate defaults to 0.9*C_FB.

        ``rate_fraction`` expresses the rate as a multiple of capacity.  At
        alpha = 0 the noise carries no memory to feed back, so the filter
        degenerates (beta = sigma = 0) and only X_1 carries the message.
        """
        cap = ma1_feedback_capacity(alpha, snr)
        if rate_nats is None:
            rate_nats = (0.9 if rate_fraction is None else rate_fraction) * cap.rate_nats
        if rate_nats <= 0:
            raise DomainError("rate must be positive")
        if alpha == 0:
            beta = sigma = 0.0
        else:
            s = _SIGN(alpha)
            beta = -s * cap.x0
            sigma = s * math.sqrt(snr * (1 - beta * beta))
        grid = max(2, int(round(math.exp(n * rate_nats))))
        return cls(
            alpha=float(alpha),
            snr=float(snr),
            n=int(n),
            rate_nats=float(rate_nats),
            beta=beta,
            sigma=sigma,
            grid_size=grid,
        )

    @property
    def delta(self) -> float:
        return 2.0 * math.sqrt(self.snr) / (self.grid_size - 1)

    @property
    def capacity_nats(self) -> float:
        return ma1_feedback_capacity(self.alpha, self.snr).rate_nats

    def grid_point(self, index) -> float:
        return -math.sqrt(self.snr) + np.asarray(index) * self.delta

    def theta_variance(self) -> float:
        """Exact variance of theta drawn uniformly from the grid."""
        m = self.grid_size
        return self.snr * (m + 1) / (3.0 * (m - 1))


def _signal_vector(params: SchemeParams) -> np.ndarray:
    return params.beta ** np.arange(params.n)


@lru_cache(maxsize=64)
def _noise_filter(params: SchemeParams) -> np.ndarray:
    """Lower-triangular A with Y - theta*d = A U_{1..n} given theta, U_0."""
    n, alpha, beta, sigma = params.n, params.alpha, params.beta, params.sigma
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    lag = k - m
    a = np.where(lag >= 1, sigma * beta ** np.maximum(lag - 1, 0), 0.0)
    a += np.where(lag == 1, alpha, 0.0)
    a += np.eye(n)
    return a


@lru_cache(maxsize=64)
def _gls_data(params: SchemeParams, reveal_u0: bool = True):
    """Whitened signal, per-horizon information, and estimator variances.

    Returns (y, info_k, var_ml_k) with y = A^{-1} d; the information about
    theta from Y_1..Y_k is the prefix sum of y^2, Sherman-Morrison-corrected
    when U_0 stays unknown to the receiver.
    """
    a = _noise_filter(params)
    d = _signal_vector(params)
    y = solve_triangular(a, d, lower=True)
    if reveal_u0:
        info = np.cumsum(y * y)
    else:
        w = solve_triangular(a, np.eye(params.n)[0], lower=True)
        a2 = params.alpha**2
        yw, ww = np.cumsum(y * w), np.cumsum(w * w)
        info = np.cumsum(y * y) - a2 * yw**2 / (1.0 + a2 * ww)
    with np.errstate(divide="ignore"):
        var_ml = 1.0 / info
    return y, info, var_ml


def conditional_variance_curve(params: SchemeParams, reveal_u0: bool = True):
    """Analytic var(X_1 | Y_1..Y_k) for k = 1..n and the ML variant.

    The Bayesian curve assumes X_1 ~ N(0, P); the ML curve is the variance
    of the unbiased estimate of a deterministic theta.  Both decay at the
    same exponential rate 2*C_FB.
    """
    _, info, var_ml = _gls_data(params, reveal_u0)
    var_bayes = 1.0 / (1.0 / params.snr + info)
    return var_bayes, var_ml


def decay_slope(params: SchemeParams, reveal_u0: bool = True) -> float:
    """LS slope of ln var(X_1|Y^k) over the last half of the block (nats)."""
    var_bayes, _ = conditional_variance_curve(params, reveal_u0)
    k = np.arange(1, params.n + 1)
    sel = k > params.n // 2
    if sel.sum() < 2:
        sel[:] = True
    return float(np.polyfit(k[sel], np.log(var_bayes[sel]), 1)[0])


def encode(params: SchemeParams, message_index: int, noise_path):
    """Transmit one message over one noise path U_0..U_n.

    Returns (X_1..X_n, Y_1..Y_n) with Y_k = X_k + alpha U_{k-1} + U_k.
    """
    u = np.asarray(noise_path, dtype=float)
    if u.shape != (params.n + 1,):
        raise DomainError(f"noise path must have length n+1 = {params.n + 1}")
    if not 0 <= message_index < params.grid_size:
        raise DomainError("message index out of range")
    x = np.empty(params.n)
    x[0] = params.grid_point(message_index)
    for k in range(1, params.n):
        x[k] = params.beta * x[k - 1] + params.sigma * u[k]
    y = x + params.alpha * u[: params.n] + u[1:]
    return x, y


def decode_ml(params: SchemeParams, observations, u0: float | None = None):
    """ML estimate of theta and the nearest grid index (ties to lower).

    Passing ``u0`` gives the decoder the revealed time-zero innovation.
    """
    y_obs = np.asarray(observations, dtype=float)
    if y_obs.shape != (params.n,):
        raise DomainError("observations must have length n")
    theta_hat = _decode_batch(params, y_obs[None, :], u0 if u0 is None else np.atleast_1d(u0))[0]
    return float(theta_hat), _nearest_index(params, theta_hat)


def _decode_batch(params, y_obs, u0=None):
    a = _noise_filter(params)
    yv, info, _ = _gls_data(params, reveal_u0=u0 is not None)
    work = np.array(y_obs, dtype=float)
    if u0 is not None:
        work[:, 0] -= params.alpha * np.asarray(u0)
    z = solve_triangular(a, work.T, lower=True)
    if u0 is not None:
        return (yv @ z) / info[-1]
    w = solve_triangular(a, np.eye(params.n)[0], lower=True)
    a2 = params.alpha**2
    corr = 1.0 + a2 * float(w @ w)
    num = yv @ z - a2 * float(yv @ w) * (w @ z) / corr
    return num / info[-1]


def _nearest_index(params, theta_hat):
    t = (np.asarray(theta_hat) + math.sqrt(params.snr)) / params.delta
    idx = np.ceil(t - 0.5).astype(np.int64)  # half-way ties go to the lower index
    return np.clip(idx, 0, params.grid_size - 1)


def _trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream: a pure function of (seed, trial index)."""
    return np.random.Generator(
        np.random.Philox(key=np.array([seed, trial], dtype=np.uint64))
    )


def _draw_trials(params, trials, seed, noise):
    """Per-trial messages and noise paths, schedule-independent."""
    u = np.empty((trials, params.n + 1))
    msg = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        g = _trial_generator(seed, t)
        msg[t] = g.integers(0, params.grid_size)
        if noise == "gaussian":
            u[t] = g.standard_normal(params.n + 1)
        elif noise == "uniform":
            u[t] = g.uniform(-math.sqrt(3.0), math.sqrt(3.0), params.n + 1)
        else:
            raise DomainError(f"unknown noise distribution {noise!r}")
    return msg, u


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """Wilson 95% score interval for a binomial proportion."""
    if trials <= 0:
        raise DomainError("trials must be positive")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class SimReport:
    """Summary of one Monte Carlo run at a single block length."""

    params: SchemeParams
    trials: int
    seed: int
    errors: int
    error_rate: float
    ci_low: float
    ci_high: float
    mse_analytic: np.ndarray      # var(X_1|Y^k), Bayesian prior N(0, P)
    mse_ml_analytic: np.ndarray   # var of the unbiased estimate
    mse_empirical: np.ndarray     # empirical mean (theta_hat_k - theta)^2
    decay_slope_nats: float
    erfc_estimate: float
    noise: str = "gaussian"
    reveal_u0: bool = True
    spectrum_omega: np.ndarray | None = None
    spectrum_empirical: np.ndarray | None = None
    spectrum_theoretical: np.ndarray | None = None

    def to_json_dict(self) -> dict:
        out = {
            "schema_version": 1,
            "alpha": self.params.alpha,
            "snr": self.params.snr,
            "n": self.params.n,
            "rate_nats": self.params.rate_nats,
            "grid_size": self.params.grid_size,
            "trials": self.trials,
            "seed": self.seed,
            "noise": self.noise,
            "reveal_u0": self.reveal_u0,
            "errors": self.errors,
            "error_rate": self.error_rate,
            "ci95": [self.ci_low, self.ci_high],
            "erfc_estimate": self.erfc_estimate,
            "decay_slope_nats": self.decay_slope_nats,
            "mse_analytic": self.mse_analytic.tolist(),
            "mse_ml_analytic": self.mse_ml_analytic.tolist(),
            "mse_empirical": self.mse_empirical.tolist(),
        }
        if self.spectrum_omega is not None:
            out["spectrum"] = {
                "omega": self.spectrum_omega.tolist(),
                "empirical": self.spectrum_empirical.tolist(),
                "theoretical": self.spectrum_theoretical.tolist(),
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def erfc_error_estimate(params: SchemeParams) -> float:
    """The asymptotic nearest-neighbor error estimate (trend guide only)."""
    arg = math.sqrt(3.0 / (2.0 * params.theta_variance()))
    growth = params.n * (params.capacity_nats - params.rate_nats)
    return float(erfc(arg * math.exp(min(growth, 700.0))))


def run_montecarlo(
    params: SchemeParams,
    trials: int,
    seed: int = 0,
    noise: str = "gaussian",
    reveal_u0: bool = True,
    spectrum: bool = False,
) -> SimReport:
    """Simulate ``trials`` independent messages and summarize the link.

    Reports the decoding error rate with a Wilson 95% interval, the analytic
    and empirical estimation-error curves, the fitted decay slope, and
    (optionally) the averaged periodogram of Y_2..Y_n.
    """
    if trials < 10**3:
        raise DomainError("need at least 1000 trials for a meaningful estimate")
    msg, u = _draw_trials(params, trials, seed, noise)
    theta = params.grid_point(msg)

    n = params.n
    x = np.empty((trials, n))
    x[:, 0] = theta
    for k in range(1, n):
        x[:, k] = params.beta * x[:, k - 1] + params.sigma * u[:, k]
    y = x + params.alpha * u[:, :n] + u[:, 1:]

    a = _noise_filter(params)
    yv, info, var_ml = _gls_data(params, reveal_u0=reveal_u0)
    work = y.copy()
    if reveal_u0:
        work[:, 0] -= params.alpha * u[:, 0]
    z = solve_triangular(a, work.T, lower=True)  # n x trials
    if reveal_u0:
        theta_hat_k = np.cumsum(yv[:, None] * z, axis=0) / info[:, None]
    else:
        w = solve_triangular(a, np.eye(n)[0], lower=True)
        a2 = params.alpha**2
        yw, ww = np.cumsum(yv * w), np.cumsum(w * w)
        numer = np.cumsum(yv[:, None] * z, axis=0)
        wz = np.cumsum(w[:, None] * z, axis=0)
        numer -= (a2 * yw / (1.0 + a2 * ww))[:, None] * wz
        theta_hat_k = numer / info[:, None]

    mhat = _nearest_index(params, theta_hat_k[-1])
    errors = int(np.sum(mhat != msg))
    lo, hi = wilson_interval(errors, trials)
    mse_emp = np.mean((theta_hat_k - theta[None, :]) ** 2, axis=1)
    var_bayes = 1.0 / (1.0 / params.snr + info)

    report = SimReport(
        params=params,
        trials=trials,
        seed=seed,
        errors=errors,
        error_rate=errors / trials,
        ci_low=lo,
        ci_high=hi,
        mse_analytic=var_bayes,
        mse_ml_analytic=var_ml,
        mse_empirical=mse_emp,
        decay_slope_nats=decay_slope(params, reveal_u0),
        erfc_estimate=erfc_error_estimate(params),
        noise=noise,
        reveal_u0=reveal_u0,
    )
    if spectrum:
        block = y[:, 1:]  # Y_2..Y_n: the stationary section
        nblock = block.shape[1]
        if nblock < 8:
            raise DomainError("spectrum estimation needs n >= 9")
        spec = np.mean(np.abs(np.fft.rfft(block, axis=1)) ** 2, axis=0) / nblock
        omega = 2.0 * np.pi * np.fft.rfftfreq(nblock)
        report.spectrum_omega = omega
        report.spectrum_empirical = spec
        report.spectrum_theoretical = output_spectrum_theoretical(params, omega)
    return report


def output_spectrum_theoretical(params: SchemeParams, omega):
    """Spectral density of the scheme's stationary output process.

    Computed as beta^{-2} |1 + alpha beta^2 e^{-jw}|^2 and cross-checked
    against the factored filter form; the two agree identically because the
    filter's flipped zero sits at 1/beta.
    """
    w = np.asarray(omega, dtype=float)
    alpha, beta, sigma = params.alpha, params.beta, params.sigma
    if beta == 0.0:
        out = np.ones_like(w)
        return float(out) if np.isscalar(omega) else out
    e = np.exp(-1j * w)
    direct = np.abs(1 + alpha * beta**2 * e) ** 2 / beta**2
    factored = (
        np.abs((1 + alpha * beta**2 * e) * (1 - e / beta) / (1 - beta * e)) ** 2
    )
    mismatch = float(np.max(np.abs(direct - factored) / np.maximum(direct, 1e-30)))
    if mismatch > 1e-9:
        raise NumericalError(f"spectrum factorization mismatch {mismatch:.2e}")
    return float(direct) if np.isscalar(omega) else direct


def output_entropy_rate(params: SchemeParams):
    """Quadrature entropy rate of the output spectrum (nats per symbol)."""
    val, _ = entropy_rate_from_spectrum(lambda w: output_spectrum_theoretical(params, w))
    return val


def nonfeedback_baseline(alpha: float, snr: float, n: int, starts: int = 16, seed: int = 0) -> float:
    """Best nonfeedback rate at block length n: optimize K_X with B = 0."""
    _, est = generic_optimize(
        alpha, n, snr, use_modified=False, starts=starts, seed=seed, freeze_feedback=True
    )
    return est.rate_nats
