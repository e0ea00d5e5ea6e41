"""Proximal Hager-Zhang conjugate gradient via the Moreau-envelope gradient.

The composite objective f = g + h (g smooth, possibly nonconvex; h convex,
nonsmooth with a cheap prox) is attacked through the linearized envelope
gradient

    s(x) = (x - prox_{rho h}(x - rho*grad g(x))) / rho

which vanishes exactly at Clarke-stationary points for rho < 1/L_g.  The
nonlinear CG machinery (Hager-Zhang beta with truncation, Wolfe / exact /
backtracking line searches) then runs on s as if it were a gradient.  A plain
linear CG for SPD systems lives here too since the q-Gaussian model needs it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .agsolver import SmoothObjective, SolveReport
from .penalty import PenaltySpec, dc_decomposition, prox_scaled_l1

__all__ = [
    "CompositeProblem",
    "PCGConfig",
    "StationarityCertificate",
    "make_composite",
    "linearized_moreau_grad",
    "moreau_lipschitz_constants",
    "tilde_g",
    "tilde_g_inverse",
    "hz_direction",
    "surrogate_objective",
    "line_search",
    "pcg_solve",
    "linear_cg",
]


@dataclass(frozen=True)
class CompositeProblem:
    """f = g + h with g smooth (value/grad/L) and h convex with a prox.

    h_prox(v, rho) must return argmin_u h(u) + ||u - v||^2 / (2 rho).
    """

    g_value: Callable[[np.ndarray], float]
    g_grad: Callable[[np.ndarray], np.ndarray]
    lipschitz_g: float
    h_value: Callable[[np.ndarray], float]
    h_prox: Callable[[np.ndarray, float], np.ndarray]
    dimension: int


@dataclass(frozen=True)
class PCGConfig:
    rho: float | None = None       # default 0.5/L_g, must stay below 1/L_g
    eta: float = 0.01
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    line_search: str = "brent"     # {"wolfe", "brent", "backtrack"}
    tol: float = 1e-6
    max_iter: int = 1000

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.line_search not in ("wolfe", "brent", "backtrack"):
            raise ValueError(f"unknown line search {self.line_search!r}")


@dataclass(frozen=True)
class StationarityCertificate:
    x_hat: np.ndarray
    moreau_grad_norm: float
    rho_used: float


def make_composite(obj: SmoothObjective, penalty: PenaltySpec, skip=()) -> CompositeProblem:
    """Composite problem with g = loss + concave penalty part, h = lambda*l1."""
    dcd = dc_decomposition(penalty)
    mask = np.ones(obj.dimension, dtype=bool)
    skip_idx = np.asarray(list(skip), dtype=int)
    if skip_idx.size:
        mask[skip_idx] = False
    lam = penalty.lam

    def g_value(x):
        return obj.value(x) + dcd.h_value(np.where(mask, x, 0.0))

    def g_grad(x):
        hg = dcd.h_grad(x)
        if skip_idx.size:
            hg = np.where(mask, hg, 0.0)
        return obj.grad(x) + hg

    return CompositeProblem(
        g_value=g_value,
        g_grad=g_grad,
        lipschitz_g=obj.lipschitz,
        h_value=lambda x: float(lam * np.sum(np.abs(x[mask]))),
        h_prox=lambda v, rho: prox_scaled_l1(v, np.zeros_like(v), rho, lam, skip_idx),
        dimension=obj.dimension,
    )


def linearized_moreau_grad(p: CompositeProblem, x, rho: float) -> np.ndarray:
    """s(x) = (x - prox_{rho h}(x - rho*grad g(x)))/rho."""
    x = np.asarray(x, float)
    return (x - p.h_prox(x - rho * p.g_grad(x), rho)) / rho


def moreau_lipschitz_constants(rho: float, L_g: float) -> tuple[float | None, float]:
    """(L of the exact envelope gradient, L of the linearized one).

    The exact constant only exists for rho*L_g < 1; the linearized one is the
    crude but always-valid L_g + 1/rho.
    """
    L_lin = L_g + 1.0 / rho
    if rho * L_g >= 1:
        return None, L_lin
    L_exact = (2 * L_g * rho + 1 + np.sqrt(8 * L_g * rho + 1)) / (2 * rho * (1 - L_g * rho))
    return L_exact, L_lin


def tilde_g(x, rho: float, g_grad) -> np.ndarray:
    """The forward map x - rho*grad g(x); a bijection when rho*L < 1."""
    x = np.asarray(x, float)
    return x - rho * g_grad(x)


def tilde_g_inverse(z, rho: float, g_grad, tol: float = 1e-12) -> np.ndarray:
    """Invert tilde_g by iterating the contraction y -> z + rho*grad g(y)."""
    z = np.asarray(z, float)
    y = z.copy()
    for _ in range(10_000):
        y_new = z + rho * g_grad(y)
        if np.linalg.norm(y_new - y) <= tol:
            return y_new
        y = y_new
    raise RuntimeError("tilde_g_inverse did not contract; is rho*L < 1?")


def hz_direction(s_next, s_prev, d_prev, eta: float = 0.01) -> np.ndarray:
    """Hager-Zhang update d = -s_next + max(beta, eta_k) * d_prev."""
    s_next = np.asarray(s_next, float)
    y = s_next - np.asarray(s_prev, float)
    d = np.asarray(d_prev, float)
    eta_k = -1.0 / (np.linalg.norm(d) * min(eta, np.linalg.norm(s_prev)))
    dy = np.dot(d, y)
    if dy == 0.0:
        beta_bar = eta_k
    else:
        beta = np.dot(y - 2.0 * (np.dot(y, y) / dy) * d, s_next) / dy
        beta_bar = max(beta, eta_k)
    return -s_next + beta_bar * d


def surrogate_objective(p: CompositeProblem, x, rho: float) -> float:
    """Quadratic-model objective used by the Wolfe search.

    g(x) + <grad g(x), u - x> + ||u - x||^2/(2 rho) + h(u) with u the prox of
    the forward step; a smooth stand-in for f that shares its stationary
    points.
    """
    x = np.asarray(x, float)
    g = p.g_grad(x)
    u = p.h_prox(x - rho * g, rho)
    diff = u - x
    return float(p.g_value(x) + np.dot(g, diff) + np.dot(diff, diff) / (2 * rho) + p.h_value(u))


def _phi_grad(p, x, d, rho):
    # directional derivative surrogate: <s(x + alpha d), d>
    def phi(alpha):
        return float(np.dot(linearized_moreau_grad(p, x + alpha * d, rho), d))

    return phi


def line_search(p: CompositeProblem, x, d, mode: str, config: PCGConfig, rho: float) -> float:
    """Pick a step along the descent direction d.  Three flavors:

    - "brent": root of <s(x + alpha d), d> = 0, bracket found by doubling;
    - "wolfe": Armijo + curvature on the surrogate objective;
    - "backtrack": halve alpha until -<s(x + c1 alpha d), d> >= c1 c2 alpha ||d||^2.
    """
    x = np.asarray(x, float)
    d = np.asarray(d, float)
    phi = _phi_grad(p, x, d, rho)
    d0 = phi(0.0)
    if d0 >= 0:
        raise ValueError("line search needs a descent direction")

    if mode == "brent":
        a_hi = rho
        for _ in range(60):
            if phi(a_hi) > 0:
                return float(brentq(phi, 0.0, a_hi, xtol=1e-14, maxiter=200))
            a_hi *= 2.0
        raise RuntimeError(f"brent bracket not found; last derivative {phi(a_hi / 2):.3e}")

    if mode == "backtrack":
        c1, c2 = config.wolfe_c1, config.wolfe_c2
        dd = float(np.dot(d, d))
        # start at the step the map's own curvature suggests (-d0/||d||^2 is
        # the exact step for an identity-curvature s), capped at rho
        alpha = min(rho, -d0 / dd)
        for _ in range(60):
            if -phi(c1 * alpha) >= c1 * c2 * alpha * dd:
                return alpha
            alpha *= 0.5
        raise RuntimeError("backtracking exhausted 60 halvings")

    # Wolfe conditions on the surrogate (bracket + bisection zoom)
    c1, c2 = config.wolfe_c1, config.wolfe_c2
    f = lambda a: surrogate_objective(p, x + a * d, rho)
    f0 = f(0.0)
    lo, hi = 0.0, None
    alpha = rho
    flo, dlo = f0, d0
    for _ in range(100):
        fa = f(alpha)
        if fa > f0 + c1 * alpha * d0 or (hi is None and fa >= flo and lo > 0):
            hi = alpha
        else:
            da = phi(alpha)
            if abs(da) <= -c2 * d0:
                return alpha
            if da >= 0:
                hi = alpha
            else:
                lo, flo, dlo = alpha, fa, da
                if hi is None:
                    alpha *= 2.0
                    continue
        alpha = 0.5 * (lo + hi)
        if hi - lo < 1e-16:
            return max(alpha, 1e-16)
    raise RuntimeError("Wolfe line search failed to converge")


def pcg_solve(
    p: CompositeProblem,
    config: PCGConfig | None = None,
    x0=None,
) -> tuple[SolveReport, StationarityCertificate]:
    """Run proximal Hager-Zhang CG until ||s||_inf <= tol or max_iter."""
    t0 = time.perf_counter()
    config = config or PCGConfig()
    rho = config.rho if config.rho is not None else 0.5 / p.lipschitz_g
    if rho * p.lipschitz_g >= 1:
        raise ValueError("rho must satisfy rho * L_g < 1")
    x = np.zeros(p.dimension) if x0 is None else np.asarray(x0, float).copy()
    s = linearized_moreau_grad(p, x, rho)
    d = -s
    obj_trace, gm_trace = [], []
    converged = False
    it = 0
    for k in range(config.max_iter):
        sn = np.max(np.abs(s))
        obj_trace.append(p.g_value(x) + p.h_value(x))
        gm_trace.append(float(np.linalg.norm(s)))
        if sn <= config.tol:
            converged = True
            break
        # hard restart periodically and whenever d stops being a descent dir
        if k % p.dimension == 0 or np.dot(d, s) >= 0:
            d = -s
        alpha = line_search(p, x, d, config.line_search, config, rho)
        x_new = x + alpha * d
        if not np.all(np.isfinite(x_new)):
            raise FloatingPointError(f"non-finite iterate at iteration {k + 1}")
        s_new = linearized_moreau_grad(p, x_new, rho)
        d = hz_direction(s_new, s, d, config.eta)
        x, s = x_new, s_new
        it = k + 1
    cert = StationarityCertificate(
        x_hat=x.copy(),
        moreau_grad_norm=float(np.max(np.abs(linearized_moreau_grad(p, x, rho)))),
        rho_used=rho,
    )
    report = SolveReport(
        estimate=x,
        iterations=it,
        objective_trace=np.asarray(obj_trace),
        grad_map_trace=np.asarray(gm_trace),
        converged=converged,
        wall_time=time.perf_counter() - t0,
    )
    return report, cert


def linear_cg(A_apply, b, tol: float = 1e-10, max_iter: int | None = None,
              collect_residuals: bool = False):
    """Textbook conjugate gradient for SPD systems, x0 = 0.

    A_apply may be a matrix or a callable v -> Av.  Stops at
    ||Ax - b|| <= tol*||b||; raises if max_iter runs out.
    """
    b = np.asarray(b, float)
    if not callable(A_apply):
        A = np.asarray(A_apply, float)
        A_apply = lambda v: A @ v
    n = b.size
    if max_iter is None:
        max_iter = 10 * n
    x = np.zeros(n)
    r = b.copy()
    p_dir = r.copy()
    rs = np.dot(r, r)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return (x, []) if collect_residuals else x
    residuals = [r.copy()]
    for _ in range(max_iter):
        if np.sqrt(rs) <= tol * bnorm:
            return (x, residuals) if collect_residuals else x
        Ap = A_apply(p_dir)
        alpha = rs / np.dot(p_dir, Ap)
        x = x + alpha * p_dir
        r = r - alpha * Ap
        rs_new = np.dot(r, r)
        if collect_residuals:
            residuals.append(r.copy())
        p_dir = r + (rs_new / rs) * p_dir
        rs = rs_new
    if np.sqrt(rs) <= tol * bnorm:
        return (x, residuals) if collect_residuals else x
    raise RuntimeError(f"linear_cg: max_iter exceeded, residual {np.sqrt(rs):.3e}")
