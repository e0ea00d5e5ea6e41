"""Accelerated gradient method for nonconvex composite problems.

Minimizes Psi(x) + chi(x) where Psi = f + h is L-smooth (f the loss, h the
concave part of a SCAD/MCP penalty) and chi = lambda*||.||_1.  One iteration:

    x_md = (1 - alpha_k) * x_ag + alpha_k * x
    x    = P(x,    grad Psi(x_md), delta_k)
    x_ag = P(x_md, grad Psi(x_md), omega_k)

with P the scaled soft-threshold prox.  The damping schedule must satisfy
alpha_k*delta_k <= omega_k < 1/L and alpha_k/(delta_k*Gamma_k) nonincreasing;
two ready-made schedules are provided (the optimal one and the classical
2/(k+1) one) plus a checker, the theoretical complexity bound, and a plain
proximal-gradient baseline.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .penalty import PenaltySpec, dc_decomposition, lipschitz_h, prox_scaled_l1

__all__ = [
    "SmoothObjective",
    "AGSchedule",
    "SolveReport",
    "schedule_optimal",
    "schedule_original",
    "verify_schedule",
    "grad_mapping",
    "ag_solve",
    "pg_solve",
    "damping_lower_bound",
    "admissible_ab",
    "optimal_ab",
    "complexity_bound",
    "power_iteration_lmax",
    "make_linear_objective",
    "make_logistic_objective",
]


@dataclass(frozen=True)
class SmoothObjective:
    """Smooth part of the composite objective: value, gradient, Lipschitz L."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    dimension: int


@dataclass(frozen=True)
class AGSchedule:
    """The (alpha, delta, omega) sequences plus the Gamma bookkeeping.

    1-indexed in the math; alphas[i] is alpha_{i+1} here.
    """

    alphas: np.ndarray
    deltas: np.ndarray
    omegas: np.ndarray
    gammas: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        d = np.asarray(self.deltas, dtype=float)
        w = np.asarray(self.omegas, dtype=float)
        if not (len(a) == len(d) == len(w)) or len(a) == 0:
            raise ValueError("alpha/delta/omega must share a positive length")
        g = self.gammas
        if g is None:
            # Gamma_1 = 1, Gamma_k = (1 - alpha_k) Gamma_{k-1}
            g = np.empty_like(a)
            g[0] = 1.0
            for k in range(1, len(a)):
                g[k] = (1.0 - a[k]) * g[k - 1]
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "deltas", d)
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "gammas", np.asarray(g, dtype=float))

    def __len__(self) -> int:
        return len(self.alphas)


@dataclass
class SolveReport:
    estimate: np.ndarray
    iterations: int
    objective_trace: np.ndarray
    grad_map_trace: np.ndarray
    converged: bool
    wall_time: float


def optimal_alphas(N: int) -> np.ndarray:
    """alpha_1 = 1, alpha_{k+1} = 2/(1 + sqrt(1 + 4/alpha_k^2))."""
    a = np.empty(N)
    prev = a[0] = 1.0
    for k in range(1, N):
        # plain-float math keeps the million-step recurrence cheap
        prev = 2.0 / (1.0 + math.sqrt(1.0 + 4.0 / (prev * prev)))
        a[k] = prev
    return a


def schedule_optimal(L: float, N: int) -> AGSchedule:
    """The optimal damping schedule: omega = 2/(3L), delta_k = omega/alpha_k."""
    if L <= 0 or N < 1:
        raise ValueError("need L > 0 and N >= 1")
    a = optimal_alphas(N)
    w = np.full(N, 2.0 / (3.0 * L))
    d = w / a  # delta_1 = omega since alpha_1 = 1
    return AGSchedule(a, d, w)


def schedule_original(L: float, N: int) -> AGSchedule:
    """Classical settings: alpha_k = 2/(k+1), omega = 1/(2L), delta_k = k*omega/2."""
    if L <= 0 or N < 1:
        raise ValueError("need L > 0 and N >= 1")
    k = np.arange(1, N + 1, dtype=float)
    a = 2.0 / (k + 1.0)
    w = np.full(N, 1.0 / (2.0 * L))
    d = k * w / 2.0
    s = AGSchedule(a, d, w)
    ok, why = verify_schedule(s, L)
    if not ok:
        raise ValueError(f"original schedule failed verification: {why}")
    return s


def verify_schedule(s: AGSchedule, L: float, rtol: float = 1e-9) -> tuple[bool, str | None]:
    """Check both convergence conditions; returns (ok, first violation or None)."""
    a, d, w, g = s.alphas, s.deltas, s.omegas, s.gammas
    if abs(a[0] - 1.0) > rtol:
        return False, "alpha_1 != 1"
    for k in range(len(s)):
        # condition 1: alpha_k * delta_k <= omega_k < 1/L
        if a[k] * d[k] > w[k] * (1 + rtol):
            return False, f"convcond1 (alpha*delta <= omega) violated at k={k + 1}"
        if not w[k] < 1.0 / L:
            return False, f"convcond1 (omega < 1/L) violated at k={k + 1}"
    r = a / (d * g)
    for k in range(1, len(s)):
        # condition 2: alpha_k/(delta_k*Gamma_k) nonincreasing
        if r[k] > r[k - 1] * (1 + rtol):
            return False, f"convcond2 (monotonicity) violated at k={k + 1}"
    return True, None


def grad_mapping(x, y, c: float, penalty: PenaltySpec, skip=()) -> np.ndarray:
    """Composite gradient analogue G(x,y,c) = (x - P(x,y,c))/c."""
    return (np.asarray(x, float) - prox_scaled_l1(x, y, c, penalty.lam, skip)) / c


def _psi_parts(obj: SmoothObjective, penalty: PenaltySpec, skip):
    dcd = dc_decomposition(penalty)
    mask = np.ones(obj.dimension, dtype=bool)
    skip = np.asarray(list(skip), dtype=int)
    if skip.size:
        mask[skip] = False

    def psi_grad(x):
        g = obj.grad(x)
        hg = dcd.h_grad(x)
        if skip.size:
            hg = np.where(mask, hg, 0.0)
        return g + hg

    def total_value(x):
        hv = dcd.h_value(np.where(mask, x, 0.0))
        return obj.value(x) + hv + penalty.lam * np.sum(np.abs(x[mask]))

    return psi_grad, total_value


def ag_solve(
    obj: SmoothObjective,
    penalty: PenaltySpec,
    s: AGSchedule,
    x0,
    tol: float = 1e-4,
    max_iter: int = 2000,
    skip=(),
) -> SolveReport:
    """Run the accelerated scheme; returns the best iterate seen (the method
    is not monotone).  Stops when the sup-norm step falls below tol.
    """
    t0 = time.perf_counter()
    lam = penalty.lam
    psi_grad, total_value = _psi_parts(obj, penalty, skip)
    x = np.asarray(x0, dtype=float).copy()
    x_ag = x.copy()
    obj_trace, gm_trace = [], []
    best_val, best_x = np.inf, x.copy()
    converged = False
    it = 0
    for k in range(min(max_iter, len(s))):
        a, d, w = s.alphas[k], s.deltas[k], s.omegas[k]
        # alpha weights the plain sequence; the aggregated sequence carries
        # the rest (this is what makes the momentum identity hold)
        x_md = (1.0 - a) * x_ag + a * x
        g = psi_grad(x_md)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient at iteration {k + 1}")
        x_new = prox_scaled_l1(x, g, d, lam, skip)
        x_ag = prox_scaled_l1(x_md, g, w, lam, skip)
        gm = np.linalg.norm((x_md - x_ag) / w)
        val = total_value(x_ag)
        if not np.isfinite(val):
            raise FloatingPointError(f"non-finite objective at iteration {k + 1}")
        obj_trace.append(val)
        gm_trace.append(gm)
        if val < best_val:
            best_val, best_x = val, x_ag.copy()
        step = np.max(np.abs(x_new - x))
        x = x_new
        it = k + 1
        if step < tol:
            converged = True
            break
    return SolveReport(
        estimate=best_x,
        iterations=it,
        objective_trace=np.asarray(obj_trace),
        grad_map_trace=np.asarray(gm_trace),
        converged=converged,
        wall_time=time.perf_counter() - t0,
    )


def pg_solve(
    obj: SmoothObjective,
    penalty: PenaltySpec,
    step: float,
    x0,
    tol: float = 1e-4,
    max_iter: int = 2000,
    skip=(),
) -> SolveReport:
    """Plain proximal gradient with fixed step; monotone descent baseline."""
    t0 = time.perf_counter()
    if step > 1.0 / obj.lipschitz + 1e-15:
        raise ValueError("step must be <= 1/L")
    lam = penalty.lam
    psi_grad, total_value = _psi_parts(obj, penalty, skip)
    x = np.asarray(x0, dtype=float).copy()
    obj_trace, gm_trace = [], []
    prev = total_value(x)
    converged = False
    it = 0
    for k in range(max_iter):
        g = psi_grad(x)
        x_new = prox_scaled_l1(x, g, step, lam, skip)
        val = total_value(x_new)
        if val > prev + 1e-10:
            raise FloatingPointError(
                f"objective increased at iteration {k + 1}; Lipschitz constant too small?"
            )
        obj_trace.append(val)
        gm_trace.append(np.linalg.norm((x - x_new) / step))
        diff = np.max(np.abs(x_new - x))
        x, prev = x_new, val
        it = k + 1
        if diff < tol:
            converged = True
            break
    return SolveReport(
        estimate=x,
        iterations=it,
        objective_trace=np.asarray(obj_trace),
        grad_map_trace=np.asarray(gm_trace),
        converged=converged,
        wall_time=time.perf_counter() - t0,
    )


def damping_lower_bound(k, a: float, b: float):
    """Lower envelope 2/((1 + a*k^(-b))k + 1); meaningful for admissible (a,b)."""
    k = np.asarray(k, dtype=float)
    out = 2.0 / ((1.0 + a * k ** (-b)) * k + 1.0)
    return out if out.ndim else float(out)


def admissible_ab(a: float, b: float) -> bool:
    """(a,b) with a>0, 0<b<1 is admissible iff a(1-b)2^(2-b) - ab(1-b)2^(-b) - 1 >= 0."""
    if not (a > 0 and 0 < b < 1):
        return False
    return a * (1 - b) * 2 ** (2 - b) - a * b * (1 - b) * 2 ** (-b) - 1 >= 0


def optimal_ab(k: int) -> tuple[float, float]:
    """Tightest admissible (a_k, b_k) at index k >= 8."""
    if k < 8:
        raise ValueError("optimal_ab requires k >= 8")
    t = np.log(2.0 / k)  # negative for k > 2
    b = (2.0 + 5.0 * t + np.sqrt(9.0 * t**2 + 4.0)) / (2.0 * t)
    a = 2.0**b / ((1.0 - b) * (4.0 - b))
    return a, b


def complexity_bound(s: AGSchedule, L_psi: float, L_h: float, x0, x_star, M: float) -> float:
    """Theoretical upper bound on min_k ||G(x_md_k)||^2 after running schedule s."""
    w, g, d = s.omegas, s.gammas, s.deltas
    if np.any(w >= 1.0 / L_psi):
        raise ValueError("bound invalid: some omega_k >= 1/L_psi")
    denom = np.sum(w * (1.0 - L_psi * w) / g)
    x0 = np.asarray(x0, float)
    xs = np.asarray(x_star, float)
    num = np.dot(x0 - xs, x0 - xs) / d[0] + (2.0 * L_h / g[-1]) * (np.dot(xs, xs) + M**2)
    return num / denom


def power_iteration_lmax(X: np.ndarray, tol: float = 1e-8, max_iter: int = 1000) -> float:
    """Largest eigenvalue of X'X via power iteration on v -> X'(Xv)."""
    rng = np.random.default_rng(0)
    v = rng.normal(size=X.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = X.T @ (X @ v)
        nl = np.linalg.norm(w)
        if nl == 0:
            return 0.0
        v_new = w / nl
        if abs(nl - lam) <= tol * max(nl, 1.0):
            return nl
        lam, v = nl, v_new
    return lam


def make_linear_objective(X: np.ndarray, y: np.ndarray,
                          penalty: PenaltySpec | None = None) -> SmoothObjective:
    """Least squares 1/(2n)||Xb - y||^2; L folds in the penalty's concave part."""
    X = np.asarray(X, float)
    y = np.asarray(y, float).ravel()
    n = X.shape[0]
    lip_h = 0.0 if penalty is None else lipschitz_h(penalty)
    L = power_iteration_lmax(X) / n + lip_h
    return SmoothObjective(
        value=lambda b: float(0.5 / n * np.sum((X @ b - y) ** 2)),
        grad=lambda b: X.T @ (X @ b - y) / n,
        lipschitz=L,
        dimension=X.shape[1],
    )


def make_logistic_objective(X: np.ndarray, y: np.ndarray,
                            penalty: PenaltySpec | None = None) -> SmoothObjective:
    """Mean negative Bernoulli log-likelihood with logit link."""
    X = np.asarray(X, float)
    y = np.asarray(y, float).ravel()
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("logistic objective requires a 0/1 response")
    n = X.shape[0]
    lip_h = 0.0 if penalty is None else lipschitz_h(penalty)
    L = power_iteration_lmax(X) / (4.0 * n) + lip_h

    def value(b):
        z = X @ b
        # log(1 + e^z) via logaddexp keeps large z finite
        return float(np.mean(np.logaddexp(0.0, z) - y * z))

    def grad(b):
        return X.T @ (expit(X @ b) - y) / n

    return SmoothObjective(value=value, grad=grad, lipschitz=L, dimension=X.shape[1])
