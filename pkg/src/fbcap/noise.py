"""Gaussian noise processes: covariances, spectra, and entropy rates.

The channel noise families supported here are white noise, the first-order
moving-average process Z_i = alpha*U_{i-1} + U_i, the first-order
autoregressive process Z_i = alpha*Z_{i-1} + U_i (stationary initial
condition), the ARMA(1,1) process Z_i = beta*Z_{i-1} + alpha*U_{i-1} + U_i,
and the interleaved MA process Z_i = U_i + alpha*U_{i-2}.  Innovations U_i
are i.i.d. zero-mean Gaussians.

Everything is a pure function of its inputs; rates and entropies are in nats.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, NumericalError

LOG_TWO_PI_E = float(np.log(2.0 * np.pi * np.e))


class Kind(str, Enum):
    WHITE = "white"
    MA1 = "ma1"
    AR1 = "ar1"
    ARMA11 = "arma11"
    INTERLEAVED_MA2 = "ima2"


@dataclass(frozen=True)
class NoiseModel:
    """A tagged noise family with its parameters.

    ``alpha`` is the moving-average parameter (regression parameter for AR1),
    ``beta`` the autoregressive parameter of ARMA11.  ``innovation_variance``
    is the variance of the driving white noise.

    MA1/InterleavedMA2 accept any finite ``alpha``; capacity-facing callers
    are expected to pass through :func:`normalize_ma1` first so that
    |alpha| <= 1.  AR1 and ARMA11 require strict stability.
    """

    kind: Kind
    alpha: float = 0.0
    beta: float = 0.0
    innovation_variance: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise DomainError("noise parameters must be finite")
        if not (np.isfinite(self.innovation_variance) and self.innovation_variance > 0):
            raise DomainError("innovation_variance must be positive")
        if self.kind == Kind.AR1 and abs(self.alpha) >= 1:
            raise DomainError(f"AR1 requires |alpha| < 1, got {self.alpha}")
        if self.kind == Kind.ARMA11 and (abs(self.alpha) >= 1 or abs(self.beta) >= 1):
            raise DomainError("ARMA11 requires |alpha| < 1 and |beta| < 1")

    @classmethod
    def white(cls, variance=1.0):
        return cls(Kind.WHITE, innovation_variance=variance)

    @classmethod
    def ma1(cls, alpha, variance=1.0):
        return cls(Kind.MA1, alpha=alpha, innovation_variance=variance)

    @classmethod
    def ar1(cls, alpha, variance=1.0):
        return cls(Kind.AR1, alpha=alpha, innovation_variance=variance)

    @classmethod
    def arma11(cls, alpha, beta, variance=1.0):
        return cls(Kind.ARMA11, alpha=alpha, beta=beta, innovation_variance=variance)

    @classmethod
    def interleaved_ma2(cls, alpha, variance=1.0):
        return cls(Kind.INTERLEAVED_MA2, alpha=alpha, innovation_variance=variance)


@dataclass
class CovMatrix:
    """A validated n-by-n noise covariance block."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n, self.n):
            raise DomainError(f"covariance must be {self.n}x{self.n}")
        if not np.allclose(self.values, self.values.T, atol=1e-12):
            raise DomainError("covariance must be symmetric")
        # PSD gate: attempt a Cholesky factorization, falling back to an
        # eigenvalue check so exactly-singular matrices still pass.
        try:
            np.linalg.cholesky(self.values)
        except np.linalg.LinAlgError:
            lo = float(np.linalg.eigvalsh(self.values)[0])
            scale = max(1.0, float(np.max(np.abs(self.values))))
            if lo < -1e-10 * scale:
                raise DomainError(f"covariance not PSD (min eigenvalue {lo:.3e})")

    def logdet(self) -> float:
        """log det via triangular factorization (sum of log diagonals)."""
        try:
            chol = np.linalg.cholesky(self.values)
        except np.linalg.LinAlgError:
            raise DomainError("covariance is singular or indefinite")
        return 2.0 * float(np.sum(np.log(np.diag(chol))))


def normalize_ma1(alpha: float, power: float):
    """Reduce an MA(1) channel with |alpha| > 1 to its |alpha| <= 1 twin.

    Returns ``(alpha, power)`` unchanged when |alpha| <= 1; otherwise the
    equivalent channel ``(1/alpha, power/alpha**2)`` with unit-variance
    innovations and rescaled SNR.
    """
    if not (np.isfinite(alpha) and np.isfinite(power)):
        raise DomainError("normalize_ma1 requires finite inputs")
    if power <= 0:
        raise DomainError("power must be positive")
    if abs(alpha) <= 1:
        return alpha, power
    return 1.0 / alpha, power / (alpha * alpha)


def _autocovariance(model: NoiseModel, max_lag: int) -> np.ndarray:
    v = model.innovation_variance
    a, b = model.alpha, model.beta
    acov = np.zeros(max_lag + 1)
    if model.kind == Kind.WHITE:
        acov[0] = v
    elif model.kind == Kind.MA1:
        acov[0] = (1 + a * a) * v
        if max_lag >= 1:
            acov[1] = a * v
    elif model.kind == Kind.AR1:
        acov[:] = v * a ** np.arange(max_lag + 1) / (1 - a * a)
    elif model.kind == Kind.ARMA11:
        # stationary ARMA(1,1) autocovariance, AR coefficient b, MA coefficient a
        acov[0] = v * (1 + 2 * a * b + a * a) / (1 - b * b)
        if max_lag >= 1:
            acov[1] = v * (a + b) * (1 + a * b) / (1 - b * b)
            for h in range(2, max_lag + 1):
                acov[h] = b * acov[h - 1]
    elif model.kind == Kind.INTERLEAVED_MA2:
        acov[0] = (1 + a * a) * v
        if max_lag >= 2:
            acov[2] = a * v
    else:  # pragma: no cover
        raise DomainError(f"unknown noise kind {model.kind}")
    return acov


def covariance(model: NoiseModel, n: int) -> CovMatrix:
    """Exact covariance of (Z_1, ..., Z_n) under the stationary law."""
    if n < 1:
        raise DomainError("block length must be >= 1")
    acov = _autocovariance(model, n - 1)
    idx = np.arange(n)
    values = acov[np.abs(idx[:, None] - idx[None, :])]
    return CovMatrix(n=n, values=values)


def ma1_lower_factor(alpha: float, n: int) -> np.ndarray:
    """Unit-lower-triangular Toeplitz factor H with K' = H H^T."""
    if abs(alpha) > 1:
        raise DomainError("lower factor requires |alpha| <= 1")
    return np.eye(n) + np.diag(np.full(n - 1, alpha), -1)


def covariance_modified(alpha: float, n: int) -> CovMatrix:
    """MA(1) covariance with the time-zero innovation revealed.

    Differs from ``covariance(ma1(alpha), n)`` only in the (1,1) entry,
    which drops by alpha**2.
    """
    if n < 1:
        raise DomainError("block length must be >= 1")
    h = ma1_lower_factor(alpha, n)
    return CovMatrix(n=n, values=h @ h.T)


def spectral_density(model: NoiseModel, omega):
    """Power spectral density S(omega) on [-pi, pi]. Vectorized in omega."""
    w = np.asarray(omega, dtype=float)
    v = model.innovation_variance
    a, b = model.alpha, model.beta
    if model.kind == Kind.WHITE:
        s = np.full_like(w, v)
    elif model.kind == Kind.MA1:
        s = v * (1 + a * a + 2 * a * np.cos(w))
    elif model.kind == Kind.AR1:
        s = v / (1 + a * a - 2 * a * np.cos(w))
    elif model.kind == Kind.ARMA11:
        s = v * (1 + a * a + 2 * a * np.cos(w)) / (1 + b * b - 2 * b * np.cos(w))
    elif model.kind == Kind.INTERLEAVED_MA2:
        s = v * (1 + a * a + 2 * a * np.cos(2 * w))
    else:  # pragma: no cover
        raise DomainError(f"unknown noise kind {model.kind}")
    s = np.maximum(s, 0.0)  # clip -0.0 roundoff at spectral zeros
    return float(s) if np.isscalar(omega) else s


def _spectral_zeros(model: NoiseModel):
    """Interior frequencies where the spectrum vanishes (log singularities)."""
    a = model.alpha
    pts = []
    if model.kind == Kind.MA1 and abs(abs(a) - 1) < 1e-13:
        pts = [0.0] if a < 0 else []  # alpha = +1 vanishes at the endpoints
    elif model.kind == Kind.INTERLEAVED_MA2 and abs(abs(a) - 1) < 1e-13:
        pts = [-np.pi / 2, np.pi / 2] if a > 0 else [0.0]
    return pts


@dataclass(frozen=True)
class EntropyRate:
    """Entropy rate in nats per symbol, by closed form and by quadrature."""

    closed_form: float
    quadrature: float
    quadrature_abs_err: float

    @property
    def residual(self) -> float:
        return self.quadrature - self.closed_form


def entropy_rate_from_spectrum(density, singular_points=(), tol=1e-10):
    """(1/4pi) * integral of log(2*pi*e*S(w)) over [-pi, pi] by quadrature.

    ``density`` maps omega to S(omega); ``singular_points`` flags interior
    zeros of S so the adaptive rule can split there.
    """
    def integrand(w):
        return np.log(2.0 * np.pi * np.e * density(w))

    pts = [p for p in singular_points if -np.pi < p < np.pi] or None
    value, err = quad(integrand, -np.pi, np.pi, epsabs=tol, limit=400, points=pts)
    if err > 1e-6:
        raise NumericalError(f"entropy-rate quadrature residual {err:.2e} too large")
    return value / (4.0 * np.pi), err / (4.0 * np.pi)


def entropy_rate(model: NoiseModel) -> EntropyRate:
    """Entropy rate of the noise process, cross-checked two ways.

    The closed form follows from the log-integral of the spectrum: every
    stable model here has rate 0.5*log(2*pi*e*variance); an unnormalized
    MA(1) or interleaved model with |alpha| > 1 picks up log|alpha|.
    """
    v = model.innovation_variance
    a = model.alpha
    closed = 0.5 * (LOG_TWO_PI_E + np.log(v))
    if model.kind in (Kind.MA1, Kind.INTERLEAVED_MA2) and abs(a) > 1:
        closed += np.log(abs(a))
    numeric, err = entropy_rate_from_spectrum(
        lambda w: spectral_density(model, w), _spectral_zeros(model)
    )
    return EntropyRate(closed_form=float(closed), quadrature=numeric, quadrature_abs_err=err)
