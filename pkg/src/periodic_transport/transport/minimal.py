"""Boundary-value minimal action MA_eps(m0, m1) on a uniform time grid.

The continuity equation is eliminated: fluxes ``J_0..J_{K-1}`` are the only
unknowns and ``m_k = m0 - dt * sum_{i<k} dive J_i``.  The endpoint condition
``m_K = m1`` is the affine constraint ``dt * dive(sum_k J_k) = m0 - m1``,
handled by exact Euclidean projection (a graph-Laplacian pseudo-inverse).
Interior masses stay nonnegative because the energy is ``+inf`` at negative
masses and the line search never accepts such points; the number of interior
masses sitting at zero is reported.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..costs import CostFunction
from ..divergence import InfeasibleError
from ..graph import RescaledGraph
from ..optimize import minimize_projected
from .path import DiscretePath, action, ce_residual


@dataclass
class MinimalActionResult:
    path: DiscretePath
    value: float
    converged: bool
    iterations: int
    ce_residual: float
    endpoint_residual: float
    active_masses: int
    runtime: float
    message: str = ""


class _FluxProblem:
    def __init__(self, rg: RescaledGraph, F: CostFunction, m0, m1, K: int, interval, rule: str):
        self.rg, self.F, self.K, self.rule = rg, F, int(K), rule
        self.interval = interval
        self.dt = (interval[1] - interval[0]) / self.K
        self.m0 = np.asarray(m0, dtype=float).reshape(rg.mass_shape())
        self.m1 = np.asarray(m1, dtype=float).reshape(rg.mass_shape())
        self.b = (self.m0 - self.m1).ravel()
        D = rg.divergence_matrix.toarray()
        self.D = D
        self.Dpinv = np.linalg.pinv(D)  # D^+ = D^T (D D^T)^+
        self.shape = (self.K,) + rg.flux_shape()

    def masses(self, J):
        rg = self.rg
        div = (J.reshape(self.K, -1) @ self.D.T)  # (K, n_vertices)
        m = np.empty((self.K + 1, rg.n_vertices))
        m[0] = self.m0.ravel()
        m[1:] = m[0][None] - self.dt * np.cumsum(div, axis=0)
        return m

    def project(self, x):
        J = x.reshape(self.K, -1)
        r = self.dt * (self.D @ J.sum(axis=0)) - self.b
        J = J - (self.Dpinv @ r)[None, :] / (self.K * self.dt)
        return J.ravel()

    def initial(self):
        J = np.tile((self.Dpinv @ self.b) / (self.K * self.dt), (self.K, 1))
        return J.ravel()

    def path(self, x) -> DiscretePath:
        J = x.reshape(self.shape)
        m = self.masses(J).reshape((self.K + 1,) + self.rg.mass_shape())
        m[-1] = self.m1  # exact endpoint (differs from the integrated one by round-off only)
        return DiscretePath(self.rg, m, J, self.interval)

    def fun(self, x):
        J = x.reshape(self.K, -1)
        m = self.masses(J)
        if np.any(m < 0):
            return np.inf
        rg, F, dt = self.rg, self.F, self.dt
        total = 0.0
        for k in range(self.K):
            Jk = J[k].reshape(rg.flux_shape())
            if self.rule == "trapezoid":
                total += 0.5 * (F.energy_torus(rg, m[k], Jk) + F.energy_torus(rg, m[k + 1], Jk))
            else:
                total += F.energy_torus(rg, 0.5 * (m[k] + m[k + 1]), Jk)
            if not np.isfinite(total):
                return np.inf
        return float(dt * total)

    def grad(self, x):
        J = x.reshape(self.K, -1)
        m = self.masses(J)
        rg, F, dt, K = self.rg, self.F, self.dt, self.K
        gJ = np.zeros_like(J)
        gm = np.zeros_like(m)
        for k in range(K):
            Jk = J[k].reshape(rg.flux_shape())
            if self.rule == "trapezoid":
                a_m, a_J = F.grad_torus(rg, m[k], Jk)
                b_m, b_J = F.grad_torus(rg, m[k + 1], Jk)
                gm[k] += 0.5 * dt * a_m.ravel()
                gm[k + 1] += 0.5 * dt * b_m.ravel()
                gJ[k] += 0.5 * dt * (a_J + b_J).ravel()
            else:
                c_m, c_J = F.grad_torus(rg, 0.5 * (m[k] + m[k + 1]), Jk)
                gm[k] += 0.5 * dt * c_m.ravel()
                gm[k + 1] += 0.5 * dt * c_m.ravel()
                gJ[k] += dt * c_J.ravel()
        # m_i = m_0 - dt * D sum_{k<i} J_k  =>  dA/dJ_k += -dt D^T sum_{i>k} dA/dm_i
        tail = np.cumsum(gm[::-1], axis=0)[::-1]  # tail[i] = sum_{i' >= i} gm[i']
        gJ -= dt * (tail[1:] @ self.D)
        return gJ.ravel()


def minimal_action(rg: RescaledGraph, F: CostFunction, m0, m1, K: int, tol: float = 1e-10,
                   interval=(0.0, 1.0), rule: str = "trapezoid", max_iter: int = 20000,
                   J_init=None) -> MinimalActionResult:
    """Minimise the discrete action over CE-feasible paths from m0 to m1."""
    t0 = time.perf_counter()
    if K < 1:
        raise ValueError("K must be at least 1")
    m0 = np.asarray(m0, dtype=float)
    m1 = np.asarray(m1, dtype=float)
    if np.any(m0 < 0) or np.any(m1 < 0):
        raise InfeasibleError("boundary masses must be nonnegative")
    M0, M1 = m0.sum(), m1.sum()
    if abs(M0 - M1) > 1e-12 * max(1.0, M0):
        raise InfeasibleError(f"boundary masses differ: {M0:.15g} vs {M1:.15g}")
    prob = _FluxProblem(rg, F, m0, m1, K, interval, rule)
    x0 = prob.initial() if J_init is None else prob.project(np.asarray(J_init, float).ravel())
    if np.allclose(m0, m1, atol=0, rtol=0):
        x0 = np.zeros_like(x0)
    res = minimize_projected(prob.fun, prob.grad, prob.project, x0, tol=tol, max_iter=max_iter)
    path = prob.path(res.x)
    ce = ce_residual(path)
    endpoint = float(np.abs(prob.masses(res.x.reshape(K, -1))[-1] - m1.ravel()).max())
    interior = path.masses[1:-1]
    active = int(np.sum(interior <= 1e-14 * max(1.0, M0)))
    value = action(path, F, rule)
    return MinimalActionResult(path, value, bool(res.converged), res.iterations, ce.residual, endpoint, active,
                               time.perf_counter() - t0, res.message)
