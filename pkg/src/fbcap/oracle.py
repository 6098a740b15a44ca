"""Two independent routes to the n-block feedback objective.

The n-block problem maximizes (1/2n) log det((B+I) K (B+I)^T + K_V) / det(K)
over strictly-lower-triangular feedback gains B and PSD message covariances
K_V with trace(B K B^T + K_V) <= n*P.

Route one (``greedy_construct``) is the sequential projection construction:
inputs are represented as row vectors f_1..f_n in 2n dimensions (message
coordinates first, then noise-innovation coordinates), the output rows are
s_k = f_k + h_k with h_k the noise rows, and each f_k is chosen to maximize
det(S_k S_k^T) given f_1..f_{k-1}.  For MA(1) noise with the time-zero
innovation revealed this greedy choice is exactly optimal for every fixed
per-symbol power split, the achieved log-det obeys the recursion in
:mod:`fbcap.recursion`, and the message covariance it induces has rank one.

Route two (``generic_optimize``) knows none of that structure: it climbs the
objective directly in (B, L) with K_V = L L^T, enforcing the trace budget by
scaling projection, from many deterministic random starts.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, NumericalError
from .noise import CovMatrix, covariance, covariance_modified, ma1_lower_factor, NoiseModel
from .recursion import PowerAllocation

_DEGENERATE_TOL = 1e-10


@dataclass
class StrategyMatrices:
    """An n-block feedback strategy in both matrix and row-vector form."""

    n: int
    alpha: float
    budget: float
    B: np.ndarray
    Kv: np.ndarray
    F_rows: np.ndarray  # n x 2n, message coordinates then noise coordinates
    objective_nats: float
    power_used: float
    modified: bool = True

    def noise_rows(self) -> np.ndarray:
        """Rows h_k = [0 | H] with K = H H^T for the strategy's covariance."""
        h = self._lower_factor()
        return np.hstack([np.zeros((self.n, self.n)), h])

    def _lower_factor(self) -> np.ndarray:
        if self.modified:
            return ma1_lower_factor(self.alpha, self.n)
        return np.linalg.cholesky(covariance(NoiseModel.ma1(self.alpha), self.n).values)

    def output_rows(self) -> np.ndarray:
        return self.F_rows + self.noise_rows()


@dataclass
class BlockCapacityEstimate:
    n: int
    rate_nats: float
    method: str  # "greedy" or "generic"
    diagnostics: dict = field(default_factory=dict)


def _as_matrix(K) -> np.ndarray:
    return K.values if isinstance(K, CovMatrix) else np.asarray(K, dtype=float)


def _logdet_psd(m: np.ndarray, what: str) -> float:
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise DomainError(f"{what} is singular or indefinite")
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def objective(strategy: StrategyMatrices, K) -> float:
    """(1/2n) [log det((B+I) K (B+I)^T + Kv) - log det K] in nats."""
    kz = _as_matrix(K)
    n = strategy.n
    if kz.shape != (n, n):
        raise DomainError("covariance shape does not match the strategy")
    return objective_from_matrices(strategy.B, strategy.Kv, kz)


def objective_from_matrices(B: np.ndarray, Kv: np.ndarray, Kz: np.ndarray) -> float:
    n = Kz.shape[0]
    bi = B + np.eye(n)
    ky = bi @ Kz @ bi.T + Kv
    return (_logdet_psd(ky, "output covariance") - _logdet_psd(Kz, "noise covariance")) / (2 * n)


def _project_out(rows: np.ndarray, w: np.ndarray) -> np.ndarray:
    """w minus its projection onto the span of an orthonormal row basis."""
    if len(rows) == 0:
        return w.copy()
    out = w - rows.T @ (rows @ w)
    return out - rows.T @ (rows @ out)  # reorthogonalize once


def lemma1_max(w, s_rows, power, n=None, v_index=None):
    """Maximum of (v + w) Pi (v + w)^T over ||v||^2 <= P in the subspace.

    ``Pi`` projects onto the orthogonal complement of the rows ``s_rows``.
    Returns ``(value, v_star)`` with value = (sqrt(P) + ||w Pi||)^2.  When
    ``w Pi = 0`` the maximizer is any feasible direction orthogonal to the
    rows; we pick one inside the constraint subspace.

    ``v_index`` (with ``n``) restricts v to the causal subspace of symbol k:
    message coordinates 1..k and noise coordinates 1..k-1.
    """
    w = np.asarray(w, dtype=float)
    s_rows = np.atleast_2d(np.asarray(s_rows, dtype=float))
    if power < 0:
        raise DomainError("power must be nonnegative")
    dim = w.size

    mask = np.ones(dim, dtype=bool)
    if v_index is not None:
        if n is None:
            raise DomainError("v_index requires the block length n")
        k = int(v_index)
        if not 1 <= k <= n:
            raise DomainError("v_index out of range")
        mask[:] = False
        mask[:k] = True
        mask[n : n + k - 1] = True
        if np.any(np.abs(w[~mask]) > 1e-12):
            raise DomainError("w lies outside the constraint subspace")

    basis = np.zeros((0, dim))
    for s in s_rows:
        r = _project_out(basis, s)
        nr = np.linalg.norm(r)
        if nr > 1e-12:
            basis = np.vstack([basis, r / nr])

    # hypothesis: the subspace must not be contained in span(s_rows)
    free = sum(
        np.linalg.norm(_project_out(basis, np.eye(dim)[i])) > 1e-10
        for i in np.flatnonzero(mask)
    )
    if free == 0:
        raise DomainError("constraint subspace is contained in the row span")

    wp = _project_out(basis, w)
    norm_wp = np.linalg.norm(wp)
    value = (np.sqrt(power) + norm_wp) ** 2
    if norm_wp > _DEGENERATE_TOL:
        v_star = np.sqrt(power) * wp / norm_wp
    else:
        v_star = np.zeros(dim)
        for i in np.flatnonzero(mask):
            cand = _project_out(basis, np.eye(dim)[i])
            nc = np.linalg.norm(cand)
            if nc > 1e-10:
                v_star = np.sqrt(power) * cand / nc
                break
    if np.any(np.abs(v_star[~mask]) > 1e-9):
        raise DomainError("maximizer escapes the constraint subspace")
    return float(value), v_star


def greedy_construct(alpha: float, alloc: PowerAllocation) -> StrategyMatrices:
    """Sequentially optimal strategy for the revealed-innovation MA(1) block.

    Builds f_k* = sqrt(P_k) g_k Pi_{k-1} / ||g_k Pi_{k-1}|| where g_k is the
    predictable noise row alpha*e_{k-1} and Pi_{k-1} projects away from the
    previous outputs; falls back to a fresh message direction when the
    projected row vanishes (k = 1, alpha = 0, or a zero-power prefix).
    """
    if abs(alpha) > 1:
        raise DomainError("greedy construction requires |alpha| <= 1")
    n = alloc.n
    powers = alloc.powers
    dim = 2 * n

    h_rows = np.zeros((n, dim))
    for k in range(n):
        h_rows[k, n + k] = 1.0
        if k >= 1:
            h_rows[k, n + k - 1] = alpha

    f_rows = np.zeros((n, dim))
    s_rows = np.zeros((n, dim))
    basis = np.zeros((0, dim))
    log_det = 0.0
    for k in range(n):
        w = np.zeros(dim)
        if k >= 1:
            w[n + k - 1] = alpha
        wp = _project_out(basis, w)
        norm_wp = np.linalg.norm(wp)
        if norm_wp > _DEGENERATE_TOL:
            f = np.sqrt(powers[k]) * wp / norm_wp
        else:
            f = np.zeros(dim)
            f[k] = np.sqrt(powers[k])  # fresh information direction
        f_rows[k] = f
        s = f + h_rows[k]
        s_rows[k] = s
        sp = _project_out(basis, s)
        gain = float(s @ sp)
        if gain <= _DEGENERATE_TOL:
            raise NumericalError(f"degenerate output row at step {k + 1}")
        log_det += np.log(gain)
        basis = np.vstack([basis, sp / np.linalg.norm(sp)])

    fv, fz = f_rows[:, :n], f_rows[:, n:]
    kv = fv @ fv.T
    hz = ma1_lower_factor(alpha, n)
    B = np.linalg.solve(hz.T, fz.T).T
    B[np.triu_indices(n)] = 0.0  # exact zeros above the diagonal
    return StrategyMatrices(
        n=n,
        alpha=alpha,
        budget=alloc.budget,
        B=B,
        Kv=kv,
        F_rows=f_rows,
        objective_nats=log_det / (2 * n),
        power_used=float(np.sum(powers)),
        modified=True,
    )


def check_orthogonality(strategy: StrategyMatrices) -> float:
    """max_k ||f_k S_{k-1}^T||_inf: zero for an optimal strategy."""
    s_rows = strategy.output_rows()
    worst = 0.0
    for k in range(1, strategy.n):
        worst = max(worst, float(np.max(np.abs(s_rows[:k] @ strategy.F_rows[k]))))
    return worst


def _problem_covariance(alpha: float, n: int, use_modified: bool) -> np.ndarray:
    if use_modified:
        return covariance_modified(alpha, n).values
    return covariance(NoiseModel.ma1(alpha), n).values


def generic_optimize(
    alpha: float,
    n: int,
    budget: float,
    use_modified: bool = True,
    starts: int = 16,
    seed: int = 0,
    max_iter: int = 4000,
    freeze_feedback: bool = False,
):
    """Structure-free maximization of the n-block objective.

    Parametrizes K_V = L L^T (lower-triangular L) and B by its strict lower
    entries, enforces trace(B K B^T + L L^T) <= n*P by scaling projection
    (composed into every evaluation), and runs gradient ascent with line
    search from ``starts`` deterministic random starts.  ``freeze_feedback``
    pins B = 0, which turns the problem into the nonfeedback one.

    Returns the best strategy and a :class:`BlockCapacityEstimate`.
    """
    if n < 1 or n > 12:
        raise DomainError("generic optimizer is intended for small n (<= 12)")
    if budget <= 0:
        raise DomainError("budget must be positive")
    K = _problem_covariance(alpha, n, use_modified)
    logdet_k = _logdet_psd(K, "noise covariance")
    n_power = n * budget
    eye = np.eye(n)
    strict_mask = np.tril(np.ones((n, n), dtype=bool), -1)
    lower_mask = np.tril(np.ones((n, n), dtype=bool))
    nb = 0 if freeze_feedback else int(strict_mask.sum())
    nl = int(lower_mask.sum())

    def unpack(x):
        B = np.zeros((n, n))
        if nb:
            B[strict_mask] = x[:nb]
        L = np.zeros((n, n))
        L[lower_mask] = x[nb:]
        return B, L

    def neg_value_grad(x):
        B, L = unpack(x)
        raw_power = float(np.trace(B @ K @ B.T) + np.sum(L * L))
        if raw_power <= 0:
            return 0.0, np.zeros_like(x)
        s = np.sqrt(n_power / raw_power)
        Bs, Ls = s * B, s * L
        m = (Bs + eye) @ K @ (Bs + eye).T + Ls @ Ls.T
        try:
            chol = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            return np.inf, np.zeros_like(x)
        val = (2.0 * np.sum(np.log(np.diag(chol))) - logdet_k) / (2 * n)
        minv = np.linalg.inv(m)
        gB = (minv @ (Bs + eye) @ K) / n * strict_mask
        gL = (minv @ Ls) / n * lower_mask
        # chain rule through the power-scaling projection s(B, L)
        inner = float(np.sum(gB * B) + np.sum(gL * L))
        coef = s**3 / n_power * inner
        fB = s * gB - coef * (B @ K) * strict_mask
        fL = s * gL - coef * L * lower_mask
        grad = np.concatenate([fB[strict_mask], fL[lower_mask]]) if nb else fL[lower_mask]
        return -val, -grad

    rng = np.random.default_rng(seed)
    best = None
    per_start = []
    failures = 0
    for _ in range(starts):
        x0 = rng.standard_normal(nb + nl) * 0.5
        res = minimize(
            neg_value_grad,
            x0,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": max_iter, "ftol": 1e-16, "gtol": 1e-12},
        )
        if not np.isfinite(res.fun):
            failures += 1
            continue
        per_start.append(-res.fun)
        if best is None or -res.fun > -best.fun:
            best = res
    if best is None:
        raise NumericalError("all optimizer starts failed")

    B, L = unpack(best.x)
    raw_power = float(np.trace(B @ K @ B.T) + np.sum(L * L))
    s = np.sqrt(n_power / raw_power)
    B, L = s * B, s * L
    kv = L @ L.T
    rate = float(-best.fun)
    hz = ma1_lower_factor(alpha, n) if use_modified else np.linalg.cholesky(K)
    f_rows = np.hstack([L, B @ hz])
    strategy = StrategyMatrices(
        n=n,
        alpha=alpha,
        budget=budget,
        B=B,
        Kv=kv,
        F_rows=f_rows,
        objective_nats=rate,
        power_used=float(np.trace(B @ K @ B.T) + np.trace(kv)),
        modified=use_modified,
    )
    estimate = BlockCapacityEstimate(
        n=n,
        rate_nats=rate,
        method="generic",
        diagnostics={
            "starts": starts,
            "failed_starts": failures,
            "start_values": per_start,
            "iterations": int(best.nit),
            "grad_norm": float(np.max(np.abs(best.jac))),
        },
    )
    return strategy, estimate


def equivalence_gap(alpha, n_list, budget, starts=16, seed=0):
    """Generic-optimizer rates on K and on the revealed-innovation K'.

    Returns ``[(n, rate_K, rate_Kprime), ...]``; revealing the time-zero
    innovation can only help, and the advantage fades as n grows.
    """
    out = []
    for n in n_list:
        _, est = generic_optimize(alpha, n, budget, use_modified=False, starts=starts, seed=seed)
        _, estp = generic_optimize(alpha, n, budget, use_modified=True, starts=starts, seed=seed)
        out.append((int(n), est.rate_nats, estp.rate_nats))
    return out


def strategy_to_json(strategy: StrategyMatrices) -> str:
    """Serialize a strategy as row-major JSON for inspection or fixtures."""
    payload = {
        "schema_version": 1,
        "n": strategy.n,
        "alpha": strategy.alpha,
        "budget": strategy.budget,
        "modified": strategy.modified,
        "objective_nats": strategy.objective_nats,
        "power_used": strategy.power_used,
        "B": strategy.B.tolist(),
        "Kv": strategy.Kv.tolist(),
        "F_rows": strategy.F_rows.tolist(),
    }
    return json.dumps(payload, indent=2)


def strategy_from_json(text: str) -> StrategyMatrices:
    raw = json.loads(text)
    return StrategyMatrices(
        n=int(raw["n"]),
        alpha=float(raw["alpha"]),
        budget=float(raw["budget"]),
        B=np.asarray(raw["B"], dtype=float),
        Kv=np.asarray(raw["Kv"], dtype=float),
        F_rows=np.asarray(raw["F_rows"], dtype=float),
        objective_nats=float(raw["objective_nats"]),
        power_used=float(raw["power_used"]),
        modified=bool(raw["modified"]),
    )
