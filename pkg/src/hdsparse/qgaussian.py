"""q-Gaussian (heavy-tailed, Tsallis-type) distribution and regression model.

For q in (1, 1+2/n) the n-dimensional q-Gaussian with characterization matrix
Sigma = sigma^2 * Psi coincides with a multivariate t with m = 2/(q-1) - n
degrees of freedom and scale Sigma, which is the form everything here reduces
to.  The regression model treats the training outcome vector as one draw from
an n_train-dimensional q-Gaussian centered at X*theta; fitting is blockwise:
theta once via a penalized quadratic subproblem (it does not depend on q or
sigma^2), then sigma^2 (closed form) and q (Brent in u = 1/(q-1), sigma^2
profiled) alternated until the objective stabilizes.

Every Psi^{-1} v product goes through linear CG; Psi is never inverted.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .agsolver import SmoothObjective, ag_solve, schedule_optimal
from .pcg import PCGConfig, linear_cg, make_composite, pcg_solve
from .penalty import PenaltySpec, h_value, lipschitz_h

__all__ = [
    "QShape",
    "QGaussianParams",
    "QGaussianModel",
    "QGaussianFitConfig",
    "q_exp",
    "q_log",
    "dof_from_q",
    "q_from_dof",
    "logpdf",
    "q_covariance",
    "covariance",
    "neg_penalized_loglik",
    "sigma2_update",
    "q_update",
    "theta_update",
    "fit",
    "recover_q_subset",
    "predict",
]


def q_exp(x, q: float):
    """(1 + (1-q)x)^(1/(1-q)) on its support, 0 outside; q != 1."""
    if q == 1:
        raise ValueError("q_exp is the classical exponential at q = 1; pass q != 1")
    x = np.asarray(x, float)
    base = 1.0 + (1.0 - q) * x
    with np.errstate(over="ignore"):
        # the masked branch can overflow harmlessly before where() discards it
        out = np.where(base > 0, np.maximum(base, 1e-300) ** (1.0 / (1.0 - q)), 0.0)
    return out if out.ndim else float(out)


def q_log(x, q: float):
    """(x^(1-q) - 1)/(1-q) for x > 0; inverse of q_exp on its bijective range."""
    if q == 1:
        raise ValueError("q_log is the classical logarithm at q = 1; pass q != 1")
    x = np.asarray(x, float)
    if np.any(x <= 0):
        raise ValueError("q_log requires x > 0")
    out = (x ** (1.0 - q) - 1.0) / (1.0 - q)
    return out if out.ndim else float(out)


def dof_from_q(q: float, n: int) -> float:
    """m = 2/(q-1) - n; positive exactly on the feasible strip 1 < q < 1+2/n."""
    if not 1 < q < 1 + 2 / n:
        raise ValueError(f"q = {q} infeasible for dimension {n}")
    return 2.0 / (q - 1.0) - n


def q_from_dof(m: float, n: int) -> float:
    if m <= 0:
        raise ValueError("degrees of freedom must be positive")
    return 1.0 + 2.0 / (m + n)


@dataclass(frozen=True)
class QShape:
    q: float
    n: int

    def __post_init__(self):
        dof_from_q(self.q, self.n)  # validates

    @property
    def m(self) -> float:
        return dof_from_q(self.q, self.n)

    @property
    def u(self) -> float:
        # u = 1/(q-1) = (m+n)/2, the exponent of the density
        return 1.0 / (self.q - 1.0)


@dataclass(frozen=True)
class QGaussianParams:
    mu: np.ndarray
    sigma2: float
    psi: np.ndarray | None  # None means identity
    shape: QShape

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "mu", np.asarray(self.mu, float).ravel())
        if self.psi is not None:
            p = np.asarray(self.psi, float)
            if not np.allclose(p, p.T):
                raise ValueError("psi must be symmetric")
            object.__setattr__(self, "psi", p)


def _psi_solve(psi: np.ndarray | None, v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Psi^{-1} v via conjugate gradient (identity shortcut for psi=None)."""
    if psi is None:
        return v
    return linear_cg(psi, v, tol=tol)


def _psi_logdet(psi: np.ndarray | None, n: int) -> float:
    if psi is None:
        return 0.0
    sign, ld = np.linalg.slogdet(psi)
    if sign <= 0:
        raise ValueError("psi must be positive definite")
    return ld


def logpdf(x, params: QGaussianParams, form: str = "sigma") -> float:
    """Log density; the 'sigma' and 'lambda' parameterizations agree
    (Lambda = m*Sigma) and both equal the multivariate t log density."""
    sh = params.shape
    n, m, u = sh.n, sh.m, sh.u
    r = np.asarray(x, float).ravel() - params.mu
    quad = float(r @ _psi_solve(params.psi, r)) / params.sigma2
    logdet_sigma = n * np.log(params.sigma2) + _psi_logdet(params.psi, n)
    if form == "sigma":
        return float(
            -0.5 * (n * np.log(np.pi) + logdet_sigma)
            + gammaln(u) - gammaln(u - n / 2)
            - (n / 2) * np.log(m)
            - u * np.log1p(quad / m)
        )
    if form == "lambda":
        # Lambda = m * Sigma
        logdet_lam = n * np.log(m) + logdet_sigma
        return float(
            -0.5 * (n * np.log(np.pi) + logdet_lam)
            + gammaln(u) - gammaln(u - n / 2)
            - u * np.log1p(quad / m)
        )
    raise ValueError(f"unknown parameterization {form!r}")


def q_covariance(params: QGaussianParams) -> np.ndarray:
    """Closed-form q-covariance integral int x x' p(x)^q dx (about mu)."""
    sh = params.shape
    n, m, u, q = sh.n, sh.m, sh.u, sh.q
    sigma = params.sigma2 * (params.psi if params.psi is not None else np.eye(n))
    logdet_lam = n * np.log(np.pi) + n * np.log(m) + n * np.log(params.sigma2) \
        + _psi_logdet(params.psi, n)
    # |pi Lambda|^{(1-q)/2} * [G(u+1-n/2)/G(u-n/2)^q] / [G(u+1)/G(u)^q]
    logc = (
        0.5 * (1 - q) * logdet_lam
        + gammaln(u + 1 - n / 2) - q * gammaln(u - n / 2)
        - gammaln(u + 1) + q * gammaln(u)
    )
    return np.exp(logc) * sigma


def covariance(params: QGaussianParams) -> np.ndarray | None:
    """Ordinary covariance m/(m-2) * Sigma; None when m <= 2 (undefined)."""
    sh = params.shape
    if sh.m <= 2:
        return None
    sigma = params.sigma2 * (params.psi if params.psi is not None else np.eye(sh.n))
    return sh.m / (sh.m - 2) * sigma


# ---------------------------------------------------------------------------
# penalized regression model


@dataclass(frozen=True)
class QGaussianFitConfig:
    solver: str = "pcg"            # {"pcg", "ag"}
    solver_tol: float = 1e-6
    solver_max_iter: int = 5000
    outer_tol: float = 1e-8
    max_outer: int = 50
    q0: float | None = None        # default 1 + 1/n_train
    u_cap: float = 1e8             # Brent bracket ceiling in u = 1/(q-1)
    psi_cg_tol: float = 1e-12


@dataclass
class QGaussianModel:
    theta: np.ndarray              # length p+1, intercept first
    sigma2: float
    q_train: float
    n_train: int
    psi_train: np.ndarray | None
    penalty: PenaltySpec
    fit_trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_config(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "sigma2": self.sigma2,
            "q_train": self.q_train,
            "n_train": self.n_train,
            "penalty": self.penalty.to_config(),
        }


def _design(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, float)
    return np.column_stack([np.ones(X.shape[0]), X])


def _quad_Q(model: QGaussianModel, X: np.ndarray, y: np.ndarray) -> float:
    """Q = <r, Psi^{-1} r> + 2 n sum_j w(theta_j), the pooled quadratic that
    drives both the sigma^2 and q subproblems."""
    Xd = _design(X)
    r = np.asarray(y, float).ravel() - Xd @ model.theta
    quad = float(r @ _psi_solve(model.psi_train, r))
    pen = float(np.sum(np.asarray(
        _pen_values(model.penalty, model.theta[1:]))))
    return quad + 2.0 * model.n_train * pen


def _pen_values(penalty: PenaltySpec, coefs: np.ndarray) -> np.ndarray:
    from .penalty import penalty_value

    return np.atleast_1d(penalty_value(penalty, coefs))


def neg_penalized_loglik(model: QGaussianModel, X, y) -> float:
    """The blockwise objective: up to constants, the negative penalized
    q-Gaussian log-likelihood of the training vector."""
    n = model.n_train
    u = 1.0 / (model.q_train - 1.0)
    m = 2.0 * u - n
    if m <= 0:
        raise ValueError("infeasible q for this sample size")
    Q = _quad_Q(model, X, y)
    return float(
        (n / 2) * np.log(model.sigma2)
        - gammaln(u) + gammaln(u - n / 2) + (n / 2) * np.log(m)
        + u * np.log1p(Q / (m * model.sigma2))
    )


def sigma2_update(model: QGaussianModel, X, y) -> float:
    """Closed-form minimizer of the sigma^2 block (reduces to Q/n)."""
    n = model.n_train
    u = 1.0 / (model.q_train - 1.0)
    m = 2.0 * u - n
    Q = _quad_Q(model, X, y)
    if Q <= 0:
        raise ValueError("quadratic-plus-penalty term must be positive")
    return float((u / (n / 2) - 1.0) / m * Q)


def q_update(model: QGaussianModel, X, y, u_cap: float = 1e8) -> float:
    """Brent minimization of the objective over u = 1/(q-1) in
    (n/2 + eps, u_cap), with sigma^2 profiled out at its closed form.

    If the objective keeps decreasing all the way to the cap (near-Gaussian
    regime) the boundary value is returned with a warning.
    """
    n = model.n_train
    Q = _quad_Q(model, X, y)
    eps_u = 1e-6 * n
    u_lo = n / 2 + eps_u

    def obj(u):
        m = 2.0 * u - n
        s2 = (u / (n / 2) - 1.0) / m * Q  # profiled sigma^2 (= Q/n)
        return (
            (n / 2) * np.log(s2)
            - gammaln(u) + gammaln(u - n / 2) + (n / 2) * np.log(m)
            + u * np.log1p(Q / (m * s2))
        )

    # expand the upper end until the objective turns upward or we hit the cap
    a, b = u_lo, max(2.0 * n, 2.0 * u_lo)
    fa, fb = obj(a), obj(b)
    while True:
        c = min(2.0 * b, u_cap)
        fc = obj(c)
        if fb < fa and fb <= fc:
            break  # interior minimum bracketed by (a, b, c)
        if c >= u_cap:
            if fc <= fb:
                warnings.warn(
                    "q objective decreases up to the bracket cap; "
                    "returning the near-Gaussian boundary", stacklevel=2)
                return q_from_dof(2.0 * u_cap - n, n)
            break
        a, fa, b, fb = b, fb, c, fc
    res = minimize_scalar(obj, bracket=None, bounds=(a, c), method="bounded",
                          options={"xatol": 1e-8 * n})
    return 1.0 + 1.0 / float(res.x)


def _theta_objective(X, y, psi, penalty: PenaltySpec, psi_cg_tol: float) -> SmoothObjective:
    Xd = _design(X)
    y = np.asarray(y, float).ravel()
    n = Xd.shape[0]

    def apply_A(v):
        return Xd.T @ _psi_solve(psi, Xd @ v, tol=psi_cg_tol) / n

    # power iteration for the largest eigenvalue of (1/n) X' Psi^{-1} X
    rng = np.random.default_rng(0)
    v = rng.normal(size=Xd.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(1000):
        w = apply_A(v)
        nl = np.linalg.norm(w)
        if nl == 0:
            break
        if abs(nl - lam) <= 1e-8 * max(nl, 1.0):
            lam = nl
            break
        lam, v = nl, w / nl
    L = max(lam, lipschitz_h(penalty))

    def value(t):
        r = y - Xd @ t
        return float(r @ _psi_solve(psi, r, tol=psi_cg_tol)) / (2 * n)

    def grad(t):
        r = y - Xd @ t
        return -Xd.T @ _psi_solve(psi, r, tol=psi_cg_tol) / n

    return SmoothObjective(value=value, grad=grad, lipschitz=L, dimension=Xd.shape[1])


def theta_update(model: QGaussianModel, X, y,
                 config: QGaussianFitConfig | None = None) -> np.ndarray:
    """Solve the central-trend subproblem; independent of current q, sigma^2."""
    config = config or QGaussianFitConfig()
    obj = _theta_objective(X, y, model.psi_train, model.penalty, config.psi_cg_tol)
    skip = () if model.penalty.penalize_intercept else (0,)
    if config.solver == "pcg":
        comp = make_composite(obj, model.penalty, skip=skip)
        report, cert = pcg_solve(
            comp,
            PCGConfig(tol=config.solver_tol, max_iter=config.solver_max_iter),
            x0=model.theta,
        )
        if not report.converged:
            raise RuntimeError(
                f"theta subproblem did not converge; stationarity "
                f"{cert.moreau_grad_norm:.3e}")
        return report.estimate
    if config.solver == "ag":
        sched = schedule_optimal(obj.lipschitz, config.solver_max_iter)
        report = ag_solve(obj, model.penalty, sched, model.theta,
                          tol=config.solver_tol, max_iter=config.solver_max_iter,
                          skip=skip)
        return report.estimate
    raise ValueError(f"unknown solver {config.solver!r}")


def fit(X, y, psi=None, penalty: PenaltySpec | None = None,
        config: QGaussianFitConfig | None = None) -> QGaussianModel:
    """Blockwise fit: theta once, then alternate sigma^2 / q until the
    objective moves less than outer_tol.  The trace is monotone by descent."""
    config = config or QGaussianFitConfig()
    penalty = penalty or PenaltySpec("l1", 0.0)
    X = np.asarray(X, float)
    y = np.asarray(y, float).ravel()
    n = X.shape[0]
    if y.size != n:
        raise ValueError("X and y length mismatch")
    q0 = config.q0 if config.q0 is not None else 1.0 + 1.0 / n
    model = QGaussianModel(
        theta=np.zeros(X.shape[1] + 1),
        sigma2=1.0,
        q_train=q0,
        n_train=n,
        psi_train=None if psi is None else np.asarray(psi, float),
        penalty=penalty,
    )
    model.theta = theta_update(model, X, y, config)
    model.sigma2 = sigma2_update(model, X, y)
    trace = [neg_penalized_loglik(model, X, y)]
    for _ in range(config.max_outer):
        model.sigma2 = sigma2_update(model, X, y)
        model.q_train = q_update(model, X, y, u_cap=config.u_cap)
        model.sigma2 = sigma2_update(model, X, y)
        trace.append(neg_penalized_loglik(model, X, y))
        if abs(trace[-1] - trace[-2]) < config.outer_tol:
            break
    model.fit_trace = np.asarray(trace)
    return model


def recover_q_subset(q_train: float, n_train: int, n_subset: int) -> float:
    """Shape transfer to a subset of coordinates: the marginal of an
    n-dimensional q-Gaussian on n_subset coordinates has
    u' = u - (n - n_subset), with u = 1/(q-1)."""
    u = 1.0 / (q_train - 1.0) - n_train + n_subset
    if u <= n_subset / 2:
        raise ValueError("recovered q infeasible for the subset size")
    return 1.0 + 1.0 / u


def predict(model: QGaussianModel, X_new, psi_new_block=None, n_new: int | None = None):
    """(mean, q_new, covariance-or-None) on a new block of n_new rows."""
    X_new = np.asarray(X_new, float)
    if X_new.shape[1] + 1 != model.theta.size:
        raise ValueError("X_new has the wrong number of columns")
    n_new = n_new if n_new is not None else X_new.shape[0]
    mean = _design(X_new) @ model.theta
    q_new = recover_q_subset(model.q_train, model.n_train, n_new)
    m_new = dof_from_q(q_new, n_new)
    psi = None if psi_new_block is None else np.asarray(psi_new_block, float)
    if m_new > 2:
        cov = m_new / (m_new - 2) * model.sigma2 * (
            psi if psi is not None else np.eye(n_new))
        return mean, q_new, cov
    return mean, q_new, None
