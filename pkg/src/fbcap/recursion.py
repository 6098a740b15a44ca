"""Blockwise log-det recursions, their fixed points, and power allocation.

For MA(1) noise the best n-block objective under per-symbol powers
(P_1, ..., P_n) obeys

    J_0 = 0,  J_1 = log(1 + P_1),
    J_{k+1} = J_k + log(1 + (sqrt(P_{k+1}) + |a| sqrt(1 - e^{-(J_k - J_{k-1})}))^2),

and for AR(1) noise (with P_0 = 0)

    J_{k+1} = J_k + log(1 + (sqrt(P_{k+1}) + |a| sqrt(P_k) e^{-(J_k - J_{k-1})/2})^2).

Writing xi_i = (J_i - J_{i-1})/2, both recursions are one-step maps
xi_i = psi(xi_{i-1}, P_i) (resp. phi with the previous power as an extra
argument), and under the uniform allocation the per-symbol rate J_n/(2n)
converges to the unique fixed point xi* = psi(xi*, P).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, NumericalError
from .noise import Kind

FIXED_POINT_TOL = 1e-14
FIXED_POINT_MAX_ITER = 10**6


@dataclass
class PowerAllocation:
    """Per-symbol powers P_1..P_n under the average budget P."""

    powers: np.ndarray
    budget: float

    def __post_init__(self):
        self.powers = np.atleast_1d(np.asarray(self.powers, dtype=float))
        if self.powers.ndim != 1 or self.powers.size == 0:
            raise DomainError("powers must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(self.powers)):
            raise DomainError("powers must be finite")
        if np.any(self.powers < 0):
            raise DomainError("powers must be nonnegative")
        if not (math.isfinite(self.budget) and self.budget > 0):
            raise DomainError("budget must be positive")
        if self.powers.sum() > self.n * self.budget + 1e-9:
            raise DomainError("allocation exceeds the average power budget")

    @property
    def n(self) -> int:
        return self.powers.size

    @classmethod
    def uniform(cls, n: int, budget: float) -> "PowerAllocation":
        return cls(powers=np.full(n, float(budget)), budget=budget)


@dataclass
class RecursionTrace:
    """J_0..J_n together with the half-increments xi_i = (J_i - J_{i-1})/2."""

    J: np.ndarray
    xi: np.ndarray
    per_symbol_rate: float
    search: "AllocationSearch | None" = None


def psi_ma1(xi: float, power: float, alpha: float) -> float:
    """One-step rate increment map for MA(1) noise."""
    carry = abs(alpha) * math.sqrt(max(0.0, 1.0 - math.exp(-2.0 * xi)))
    return 0.5 * math.log1p((math.sqrt(power) + carry) ** 2)


def phi_ar1(xi: float, power: float, prev_power: float, alpha: float) -> float:
    """One-step rate increment map for AR(1) noise (three-argument form)."""
    carry = abs(alpha) * math.sqrt(prev_power) * math.exp(-xi)
    return 0.5 * math.log1p((math.sqrt(power) + carry) ** 2)


def _trace_from_map(step, powers) -> RecursionTrace:
    n = len(powers)
    xi = np.zeros(n)
    prev = 0.0
    for i in range(n):
        prev = step(prev, i)
        xi[i] = prev
    J = np.concatenate([[0.0], 2.0 * np.cumsum(xi)])
    return RecursionTrace(J=J, xi=xi, per_symbol_rate=float(J[-1] / (2 * n)))


def ma1_recursion(alpha: float, alloc: PowerAllocation) -> RecursionTrace:
    """Evaluate the MA(1) recursion along a fixed allocation."""
    if abs(alpha) > 1:
        raise DomainError("ma1 recursion requires |alpha| <= 1")
    p = alloc.powers
    return _trace_from_map(lambda xi, i: psi_ma1(xi, p[i], alpha), p)


def ar1_recursion(alpha: float, alloc: PowerAllocation) -> RecursionTrace:
    """Evaluate the AR(1) recursion along a fixed allocation (P_0 = 0)."""
    if abs(alpha) >= 1:
        raise DomainError("ar1 recursion requires |alpha| < 1")
    p = alloc.powers
    return _trace_from_map(
        lambda xi, i: phi_ar1(xi, p[i], p[i - 1] if i > 0 else 0.0, alpha), p
    )


def _iterate_fixed_point(step, tol, max_iter):
    xi = 0.0
    for _ in range(max_iter):
        nxt = step(xi)
        if abs(nxt - xi) < tol:
            return nxt
        xi = nxt
    raise NumericalError(f"fixed-point iteration did not converge in {max_iter} steps")


def ma1_fixed_point(alpha, snr, tol=FIXED_POINT_TOL, max_iter=FIXED_POINT_MAX_ITER):
    """Asymptotic per-symbol rate xi* for MA(1) under uniform power.

    The iteration xi <- psi(xi, P) from xi=0 is monotone nondecreasing and
    converges to the unique fixed point, which equals the channel's feedback
    capacity in nats.
    """
    if abs(alpha) > 1:
        raise DomainError("ma1 fixed point requires |alpha| <= 1")
    if snr < 0 or not math.isfinite(snr):
        raise DomainError("snr must be nonnegative")
    return _iterate_fixed_point(lambda xi: psi_ma1(xi, snr, alpha), tol, max_iter)


def ar1_fixed_point(alpha, snr, tol=FIXED_POINT_TOL, max_iter=FIXED_POINT_MAX_ITER):
    """Asymptotic per-symbol rate xi* for AR(1) under uniform power."""
    if abs(alpha) >= 1:
        raise DomainError("ar1 fixed point requires |alpha| < 1")
    if snr < 0 or not math.isfinite(snr):
        raise DomainError("snr must be nonnegative")
    return _iterate_fixed_point(lambda xi: phi_ar1(xi, snr, snr, alpha), tol, max_iter)


@dataclass
class AllocationSearch:
    """Diagnostics for :func:`optimize_allocation`."""

    start_values: list = field(default_factory=list)
    sweeps: int = 0
    converged: bool = True


def _objective_for(kind: Kind, alpha: float):
    if kind == Kind.MA1:
        step = lambda xi, p, prev: psi_ma1(xi, p, alpha)
    elif kind == Kind.AR1:
        step = lambda xi, p, prev: phi_ar1(xi, p, prev, alpha)
    else:
        raise DomainError("allocation search supports MA1 and AR1 only")

    def total(powers):
        xi, prev_p, acc = 0.0, 0.0, 0.0
        for p in powers:
            xi = step(xi, p, prev_p)
            acc += xi
            prev_p = p
        return 2.0 * acc  # J_n

    return total


def optimize_allocation(
    model_kind: Kind,
    alpha: float,
    n: int,
    budget: float,
    seed: int = 0,
    random_starts: int = 8,
    max_sweeps: int = 200,
    tol: float = 1e-12,
):
    """Maximize J_n over the simplex {P_i >= 0, sum P_i = n*budget}.

    Projected coordinate ascent with exact pairwise power transfers (every
    transfer stays on the simplex), multistarted from the uniform allocation
    plus ``random_starts`` Dirichlet draws; returns the best trace found.
    """
    if n < 1 or n > 512:
        raise DomainError("allocation search supports 1 <= n <= 512")
    if budget <= 0:
        raise DomainError("budget must be positive")
    kind = Kind(model_kind)
    total = _objective_for(kind, alpha)
    rng = np.random.default_rng(seed)
    starts = [np.full(n, float(budget))]
    starts += [rng.dirichlet(np.ones(n)) * n * budget for _ in range(random_starts)]

    diag = AllocationSearch()
    best_p, best_val = None, -np.inf
    for p0 in starts:
        p = p0.copy()
        val = total(p)
        converged = False
        sweeps_used = 0
        for sweep in range(max_sweeps):
            gained = 0.0
            for i in range(n):
                for j in range(i + 1, n):
                    pool = p[i] + p[j]
                    if pool <= 0:
                        continue

                    def neg(t, i=i, j=j, pool=pool):
                        q = p.copy()
                        q[i], q[j] = t, pool - t
                        return -total(q)

                    res = minimize_scalar(
                        neg, bounds=(0.0, pool), method="bounded",
                        options={"xatol": 1e-12},
                    )
                    if -res.fun > val + 1e-15:
                        gained += -res.fun - val
                        val = -res.fun
                        p[i], p[j] = res.x, pool - res.x
            sweeps_used = sweep + 1
            if gained < tol:
                converged = True
                break
        diag.start_values.append(val)
        diag.sweeps = max(diag.sweeps, sweeps_used)
        diag.converged = diag.converged and converged
        if val > best_val:
            best_val, best_p = val, p

    alloc = PowerAllocation(powers=best_p, budget=budget)
    trace = ma1_recursion(alpha, alloc) if kind == Kind.MA1 else ar1_recursion(alpha, alloc)
    trace.search = diag
    return alloc, trace
