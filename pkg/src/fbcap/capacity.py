"""Closed-form feedback capacities and achievable rates.

Each solver finds the unique root in (0, 1) of a low-order polynomial in x
and reports the rate -log(x0) in nats:

  MA(1) capacity:            P x^2 = (1 - x^2) (1 - |a| x)^2
  AR(1) achievable rate:     P x^2 = (1 - x^2) / (1 + |a| x)^2
  ARMA(1,1) conjecture:      P x^2 = (1 - x^2) (1 - s*a*x)^2 / (1 + s*b*x)^2
  interleaved-MA greedy:     P x^2 = (1 - x^2) (1 - |a| x^2)^2

with s = +1 when a + b >= 0 and -1 otherwise.  Roots come from bisection on
(0, 1) — each polynomial is -1 at x=0 and positive at x=1 — followed by two
Newton polishing steps.
"""

import math
from dataclasses import dataclass

from .errors import DomainError

_MAX_BISECT = 128


@dataclass(frozen=True)
class CapacityResult:
    """Rate in nats plus the solver evidence behind it."""

    rate_nats: float
    x0: float
    polynomial_residual: float
    iterations: int
    bracket: tuple

    @property
    def rate_bits(self) -> float:
        return self.rate_nats / math.log(2.0)


def _check_snr(snr: float) -> bool:
    """Validate snr; returns True when the P=0 shortcut applies."""
    if not math.isfinite(snr) or snr < 0:
        raise DomainError(f"snr must be nonnegative and finite, got {snr}")
    return snr == 0


_ZERO_POWER = CapacityResult(0.0, 1.0, 0.0, 0, (1.0, 1.0))


def _solve(poly, dpoly) -> CapacityResult:
    lo, hi = 0.0, 1.0
    if not (poly(lo) < 0 < poly(hi)):
        raise AssertionError("capacity polynomial must change sign on (0, 1)")
    iterations = 0
    for iterations in range(1, _MAX_BISECT + 1):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):  # interval has collapsed to one ulp
            break
        if poly(mid) < 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(2):  # Newton polish for the last digits
        slope = dpoly(x)
        if slope == 0:
            break
        step = poly(x) / slope
        if 0.0 < x - step <= 1.0:
            x -= step
    return CapacityResult(
        rate_nats=-math.log(x),
        x0=x,
        polynomial_residual=poly(x),
        iterations=iterations,
        bracket=(lo, hi),
    )


def ma1_feedback_capacity(alpha: float, snr: float) -> CapacityResult:
    """Feedback capacity of the MA(1) Gaussian channel, |alpha| <= 1.

    Callers with |alpha| > 1 should reduce via ``noise.normalize_ma1`` first.
    """
    if not math.isfinite(alpha) or abs(alpha) > 1:
        raise DomainError(f"ma1 capacity requires |alpha| <= 1, got {alpha}")
    if _check_snr(snr):
        return _ZERO_POWER
    a, p = abs(alpha), snr

    def poly(x):
        return p * x * x - (1 - x * x) * (1 - a * x) ** 2

    def dpoly(x):
        return 2 * p * x + 2 * x * (1 - a * x) ** 2 + 2 * a * (1 - x * x) * (1 - a * x)

    return _solve(poly, dpoly)


def ar1_achievable_rate(alpha: float, snr: float) -> CapacityResult:
    """Best known (conjectured optimal) feedback rate for AR(1) noise."""
    if not math.isfinite(alpha) or abs(alpha) >= 1:
        raise DomainError(f"ar1 rate requires |alpha| < 1, got {alpha}")
    if _check_snr(snr):
        return _ZERO_POWER
    a, p = abs(alpha), snr

    def poly(x):
        return p * x * x * (1 + a * x) ** 2 - (1 - x * x)

    def dpoly(x):
        return 2 * p * x * (1 + a * x) ** 2 + 2 * a * p * x * x * (1 + a * x) + 2 * x

    return _solve(poly, dpoly)


def arma11_conjectured_rate(alpha: float, beta: float, snr: float) -> CapacityResult:
    """Conjectured feedback capacity of ARMA(1,1) noise (|alpha|,|beta| < 1).

    Reduces to the MA(1) capacity at beta=0 and the AR(1) rate at alpha=0.
    """
    if not (math.isfinite(alpha) and math.isfinite(beta)):
        raise DomainError("arma11 parameters must be finite")
    if abs(alpha) >= 1 or abs(beta) >= 1:
        raise DomainError("arma11 rate requires |alpha| < 1 and |beta| < 1")
    if _check_snr(snr):
        return _ZERO_POWER
    sign = 1.0 if alpha + beta >= 0 else -1.0
    a, b, p = sign * alpha, sign * beta, snr

    def poly(x):
        return p * x * x * (1 + b * x) ** 2 - (1 - x * x) * (1 - a * x) ** 2

    def dpoly(x):
        return (
            2 * p * x * (1 + b * x) ** 2
            + 2 * b * p * x * x * (1 + b * x)
            + 2 * x * (1 - a * x) ** 2
            + 2 * a * (1 - x * x) * (1 - a * x)
        )

    return _solve(poly, dpoly)


def interleaved_ma2_greedy_rate(alpha: float, snr: float) -> CapacityResult:
    """Rate reached by greedy blockwise optimization on Z_i = U_i + a U_{i-2}.

    This is what sequential optimization achieves, not the channel capacity;
    the capacity equals ``ma1_feedback_capacity(alpha, snr)`` and is strictly
    larger whenever alpha != 0.
    """
    if not math.isfinite(alpha) or abs(alpha) > 1:
        raise DomainError(f"interleaved rate requires |alpha| <= 1, got {alpha}")
    if _check_snr(snr):
        return _ZERO_POWER
    a, p = abs(alpha), snr

    def poly(x):
        return p * x * x - (1 - x * x) * (1 - a * x * x) ** 2

    def dpoly(x):
        return (
            2 * p * x
            + 2 * x * (1 - a * x * x) ** 2
            + 4 * a * x * (1 - x * x) * (1 - a * x * x)
        )

    return _solve(poly, dpoly)


def white_capacity(snr: float) -> float:
    """0.5 * ln(1 + P): feedback does not help white noise."""
    if not math.isfinite(snr) or snr < 0:
        raise DomainError(f"snr must be nonnegative and finite, got {snr}")
    return 0.5 * math.log1p(snr)
