"""SCAD / MCP / l1 penalties and their difference-of-convex split.

Each nonconvex penalty decomposes as  p(b) = lambda*|b| + h(b)  with h smooth
and concave; h has an L-Lipschitz gradient (1/(a-1) for SCAD, 1/gamma for MCP)
which is what the composite solvers consume.  The smoothed variants (mollified
l1, the C^2 MCP concave part) are extras, not wired into any default solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

__all__ = [
    "PenaltySpec",
    "DCDecomposition",
    "penalty_value",
    "h_value",
    "h_grad",
    "lipschitz_h",
    "dc_decomposition",
    "prox_scaled_l1",
    "smoothed_l1_value",
    "smoothed_l1_grad",
    "smoothed_mcp_concave",
]


@dataclass(frozen=True)
class PenaltySpec:
    """kind in {'l1','scad','mcp'}; lambda >= 0, a > 2 (SCAD), gamma > 1 (MCP)."""

    kind: str
    lam: float
    a: float | None = None
    gamma: float | None = None
    penalize_intercept: bool = False

    def __post_init__(self):
        if self.kind not in ("l1", "scad", "mcp"):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.kind == "scad":
            if self.a is None or self.a <= 2:
                raise ValueError("SCAD requires a > 2")
        if self.kind == "mcp":
            if self.gamma is None or self.gamma <= 1:
                raise ValueError("MCP requires gamma > 1")

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return replace(self, lam=lam)

    def to_config(self) -> dict:
        d = {"kind": self.kind, "lambda": self.lam}
        if self.kind == "scad":
            d["a"] = self.a
        if self.kind == "mcp":
            d["gamma"] = self.gamma
        if self.penalize_intercept:
            d["penalize_intercept"] = True
        return d

    @staticmethod
    def from_config(cfg: dict | str) -> "PenaltySpec":
        if isinstance(cfg, str):
            cfg = json.loads(cfg)
        return PenaltySpec(
            kind=cfg["kind"],
            lam=cfg["lambda"],
            a=cfg.get("a"),
            gamma=cfg.get("gamma"),
            penalize_intercept=cfg.get("penalize_intercept", False),
        )


@dataclass(frozen=True)
class DCDecomposition:
    chi: Callable[[np.ndarray], float]
    h_value: Callable[[np.ndarray], float]
    h_grad: Callable[[np.ndarray], np.ndarray]
    lipschitz_h: float


def _h_scad(b, lam, a):
    # concave part of SCAD: zero near 0, quadratic in the middle, affine tail
    b = np.abs(b)
    mid = (2 * lam * b - b**2 - lam**2) / (2 * (a - 1))
    tail = (a + 1) * lam**2 / 2 - lam * b
    return np.where(b < lam, 0.0, np.where(b < a * lam, mid, tail))


def _h_scad_grad(b, lam, a):
    s = np.sign(b)
    b = np.abs(b)
    mid = (lam - b) / (a - 1)
    return s * np.where(b < lam, 0.0, np.where(b < a * lam, mid, -lam))


def _h_mcp(b, lam, gamma):
    b = np.abs(b)
    return np.where(b < gamma * lam, -(b**2) / (2 * gamma), gamma * lam**2 / 2 - lam * b)


def _h_mcp_grad(b, lam, gamma):
    s = np.sign(b)
    b = np.abs(b)
    return s * np.where(b < gamma * lam, -b / gamma, -lam)


def penalty_value(spec: PenaltySpec, beta):
    """Elementwise penalty p(beta); even in beta."""
    b = np.abs(np.asarray(beta, dtype=float))
    lam = spec.lam
    if spec.kind == "l1":
        out = lam * b
    elif spec.kind == "scad":
        out = lam * b + _h_scad(b, lam, spec.a)
    else:
        out = lam * b + _h_mcp(b, lam, spec.gamma)
    return out if out.ndim else float(out)


def h_value(spec: PenaltySpec, beta):
    """Elementwise concave part h(beta)."""
    b = np.asarray(beta, dtype=float)
    if spec.kind == "l1":
        out = np.zeros_like(b)
    elif spec.kind == "scad":
        out = _h_scad(b, spec.lam, spec.a)
    else:
        out = _h_mcp(b, spec.lam, spec.gamma)
    return out if out.ndim else float(out)


def h_grad(spec: PenaltySpec, beta) -> np.ndarray:
    """Elementwise gradient of the concave part (zeros for l1)."""
    b = np.asarray(beta, dtype=float)
    if spec.kind == "l1":
        return np.zeros_like(b)
    if spec.kind == "scad":
        return _h_scad_grad(b, spec.lam, spec.a)
    return _h_mcp_grad(b, spec.lam, spec.gamma)


def lipschitz_h(spec: PenaltySpec) -> float:
    """Lipschitz constant of h_grad: 1/(a-1) SCAD, 1/gamma MCP, 0 for l1."""
    if spec.kind == "scad":
        return 1.0 / (spec.a - 1.0)
    if spec.kind == "mcp":
        return 1.0 / spec.gamma
    return 0.0


def dc_decomposition(spec: PenaltySpec) -> DCDecomposition:
    lam = spec.lam
    return DCDecomposition(
        chi=lambda b: float(lam * np.sum(np.abs(b))),
        h_value=lambda b: float(np.sum(h_value(spec, b))),
        h_grad=lambda b: h_grad(spec, b),
        lipschitz_h=lipschitz_h(spec),
    )


def prox_scaled_l1(x, y, c: float, lam: float, skip=()) -> np.ndarray:
    """argmin_u <y,u> + ||u-x||^2/(2c) + lam*sum_{j not in skip} |u_j|.

    Soft thresholding of the gradient step x - c*y; skipped components (the
    intercept, typically) just take the plain step.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    z = np.asarray(x, dtype=float) - c * np.asarray(y, dtype=float)
    out = np.sign(z) * np.maximum(np.abs(z) - c * lam, 0.0)
    skip = np.asarray(list(skip), dtype=int)
    if skip.size:
        out[skip] = z[skip]
    return out


def smoothed_l1_value(theta, delta_moll: float):
    """Mollified |theta|: -(d*t + 2 log 2 - 2 log(e^{d t}+1))/d, d=delta_moll.

    delta_moll = 0 falls back to the absolute value.  Evaluated through
    logaddexp so huge d*t never overflows.
    """
    if delta_moll < 0:
        raise ValueError("delta_moll must be >= 0")
    t = np.asarray(theta, dtype=float)
    if delta_moll == 0:
        out = np.abs(t)
    else:
        d = delta_moll
        out = -(d * t + 2 * np.log(2.0) - 2 * np.logaddexp(0.0, d * t)) / d
    return out if out.ndim else float(out)


def smoothed_l1_grad(theta, delta_moll: float):
    """Derivative of the mollified l1: tanh(d*t/2), i.e. a scaled, translated sigmoid."""
    t = np.asarray(theta, dtype=float)
    if delta_moll == 0:
        out = np.sign(t)
    else:
        out = np.tanh(delta_moll * t / 2.0)
    return out if out.ndim else float(out)


def smoothed_mcp_concave(theta, lam: float, gamma: float, delta_mcp: float):
    """C^2-smoothed MCP concave part; delta_mcp = 0 recovers plain MCP h."""
    if not 0 <= delta_mcp < gamma * lam:
        raise ValueError("require 0 <= delta_mcp < gamma*lambda")
    t = np.asarray(theta, dtype=float)
    if delta_mcp == 0:
        out = _h_mcp(t, lam, gamma)
        return out if out.ndim else float(out)
    d, gl = delta_mcp, gamma * lam
    at = np.abs(t)
    inner = -(t**2) / (2 * gamma)
    # transition band (gl - d <= |t| < gl + d): cubic blend keeping C^2 joins
    poly = (
        gl**3 - 3 * d * gl**2 + 3 * d**2 * gl - d**3 + 3 * (gl + d) * t**2
        - (3 * gl**2 - 6 * d * gl + 3 * d**2 + t**2) * at
    )
    band = -poly / (12 * d * gamma)
    outer = -lam * at + (3 * gl**2 + d**2) / (6 * gamma)
    out = np.where(at < gl - d, inner, np.where(at < gl + d, band, outer))
    return out if out.ndim else float(out)
