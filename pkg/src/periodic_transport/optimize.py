"""First-order solvers for small convex programs with extended values.

``minimize_projected`` is a monotone accelerated projected-gradient method
(FISTA with backtracking and adaptive restart).  Points where the objective
is ``+inf`` are rejected by the line search, so the iterates never leave the
domain.  When the joint step stalls (typically at a kink of a nonsmooth
objective) the method switches to block-wise steps, and finally to a
diminishing-step subgradient phase that keeps the best point seen.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)


def project_simplex(v, total: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = total} (sort-based)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    if n == 0:
        return v.copy()
    if total <= 0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(v - theta, 0.0)


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    kkt: float
    restarts: int = 0
    history: list = field(default_factory=list)
    message: str = ""


def _gradient_mapping(x, g, project, scale=1.0):
    return (x - project(x - scale * g)) / scale


def minimize_projected(fun: Callable, grad: Callable, project: Callable, x0, *, tol: float = 1e-10,
                       max_iter: int = 100_000, window: int = 50, blocks: Sequence[np.ndarray] | None = None,
                       kkt_tol: float | None = None, L0: float = 1.0, subgradient_iters: int = 2000,
                       keep_history: bool = False) -> OptimResult:
    """Minimise ``fun`` over the set onto which ``project`` maps.

    Parameters
    ----------
    fun, grad : objective (may return inf) and its gradient.
    project : Euclidean projection onto the feasible set.  When ``blocks``
        is given, ``project`` must act independently on each block.
    tol : stop when the objective decreased by less than ``tol * max(1, |f|)``
        over the last ``window`` iterations.
    kkt_tol : optional early stop on the gradient-mapping norm.
    """
    x = project(np.asarray(x0, dtype=float))
    f = fun(x)
    if not np.isfinite(f):
        return OptimResult(x, f, 0, False, np.inf, message="initial point outside the domain")
    hist = [f]
    y, fy = x.copy(), f
    t = 1.0
    L = float(L0)
    restarts = 0
    converged = False
    mode = "joint"
    block_L = None
    it = 0
    message = ""
    for it in range(1, max_iter + 1):
        if mode == "joint":
            gy = grad(y)
            ok = False
            for _ in range(80):
                xn = project(y - gy / L)
                fn = fun(xn)
                dx = xn - y
                if np.isfinite(fn) and fn <= fy + gy @ dx + 0.5 * L * (dx @ dx) + 1e-14 * max(1.0, abs(fy)):
                    ok = True
                    break
                L *= 2.0
            if not ok or L > 1e16:
                if blocks is not None and len(blocks) > 1:
                    mode = "blocks"
                    block_L = [max(L0, 1.0)] * len(blocks)
                    y, fy, t = x.copy(), f, 1.0
                    log.debug("switching to block steps at iteration %d", it)
                    continue
                message = "line search failed"
                break
            if fn <= f:
                tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                # adaptive restart when the momentum points uphill
                if (xn - x) @ (y - xn) > 0:
                    tn, restarts = 1.0, restarts + 1
                    y = xn.copy()
                else:
                    y = xn + ((t - 1.0) / tn) * (xn - x)
                x, f, t = xn, fn, tn
                fy = fun(y)
                if not np.isfinite(fy):
                    y, fy, t = x.copy(), f, 1.0
            else:
                restarts += 1
                y, fy, t = x.copy(), f, 1.0
            L = max(L / 1.5, 1e-12)
        else:
            moved = False
            for b, idx in enumerate(blocks):
                g = grad(x)
                gb = np.zeros_like(x)
                gb[idx] = g[idx]
                for _ in range(80):
                    xn = project(x - gb / block_L[b])
                    fn = fun(xn)
                    dx = xn - x
                    if np.isfinite(fn) and fn <= f + gb @ dx + 0.5 * block_L[b] * (dx @ dx):
                        break
                    block_L[b] *= 2.0
                else:
                    continue
                if fn < f:
                    x, f, moved = xn, fn, True
                block_L[b] = max(block_L[b] / 1.5, 1e-12)
            if not moved:
                message = "block steps stalled"
                break
        hist.append(f)
        if kkt_tol is not None and it % 10 == 0:
            if np.abs(_gradient_mapping(x, grad(x), project)).max() <= kkt_tol:
                converged = True
                break
        if it > window:
            ref = hist[-window - 1]
            if ref - f <= tol * max(1.0, abs(f)):
                converged = True
                break
    if not converged and message:
        # subgradient phase with diminishing steps a/k, keeping the best point
        x, f, sub_conv = _subgradient_phase(fun, grad, project, x, f, subgradient_iters, tol)
        hist.append(f)
        converged = sub_conv
        message += "; subgradient phase" + (" converged" if sub_conv else " did not converge")
    g = grad(x)
    kkt = float(np.abs(_gradient_mapping(x, g, project)).max()) if np.all(np.isfinite(g)) else np.inf
    return OptimResult(x, float(f), it, converged, kkt, restarts, hist if keep_history else [], message)


def _subgradient_phase(fun, grad, project, x, f, iters, tol):
    best_x, best_f = x.copy(), f
    g = grad(x)
    gn = np.linalg.norm(g)
    if not np.isfinite(gn) or gn == 0:
        return best_x, best_f, True
    a = 0.1 * max(1.0, np.linalg.norm(x)) / gn
    last_improve = 0
    y = x.copy()
    for k in range(1, iters + 1):
        g = grad(y)
        gn = np.linalg.norm(g)
        if not np.isfinite(gn) or gn == 0:
            break
        cand = project(y - (a / k) * g)
        fc = fun(cand)
        if not np.isfinite(fc):
            a *= 0.5
            continue
        y = cand
        if fc < best_f - tol * max(1.0, abs(best_f)):
            best_x, best_f, last_improve = y.copy(), fc, k
        elif fc < best_f:
            best_x, best_f = y.copy(), fc
        if k - last_improve > 200:
            return best_x, best_f, True
    return best_x, best_f, False


def _fd_hessian(grad, x, steps):
    n = x.size
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = steps[i]
        H[:, i] = (grad(x + e) - grad(x - e)) / (2.0 * steps[i])
    return 0.5 * (H + H.T)


def minimize_barrier(fun: Callable, grad: Callable, x0, pos: np.ndarray, A: np.ndarray, b: np.ndarray, *,
                     tol: float = 1e-10, mu0: float | None = None, shrink: float = 0.2,
                     max_newton: int = 60, max_outer: int = 40, hess: Callable | None = None) -> OptimResult:
    """Log-barrier Newton method for  min f(x)  s.t.  x[pos] >= 0,  A x = b.

    ``x0`` must satisfy the equality constraints with ``x0[pos] > 0`` and
    ``fun(x0) < inf``.  Hessians are central differences of ``grad`` unless
    ``hess`` is given; Newton steps solve the equality-constrained KKT system
    and are damped by a fraction-to-boundary rule and Armijo backtracking.
    For convex ``f`` the suboptimality of the barrier minimiser is at most
    ``mu * len(pos)``, which drives the outer stopping rule.
    """
    x = np.asarray(x0, dtype=float).copy()
    pos = np.asarray(pos, dtype=int)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    npos = max(len(pos), 1)
    f = fun(x)
    if not np.isfinite(f) or np.any(x[pos] <= 0):
        return OptimResult(x, f, 0, False, np.inf, message="barrier start not strictly feasible")
    mu = mu0 if mu0 is not None else max(1e-3, 1e-2 * abs(f)) / npos
    mu_final = max(1e-2 * tol * max(1.0, abs(f)) / npos, 1e-300)
    n, neq = x.size, A.shape[0]
    total = 0
    converged = False

    def phi(z, mu):
        if np.any(z[pos] <= 0):
            return np.inf
        v = fun(z)
        return v - mu * np.sum(np.log(z[pos])) if np.isfinite(v) else np.inf

    for outer in range(max_outer):
        for _ in range(max_newton):
            total += 1
            g = grad(x)
            g[pos] -= mu / x[pos]
            steps = 1e-5 * (1.0 + np.abs(x))
            steps[pos] = np.minimum(steps[pos], 1e-3 * x[pos])
            H = hess(x) if hess is not None else _fd_hessian(grad, x, steps)
            H[pos, pos] += mu / x[pos] ** 2
            if not np.all(np.isfinite(H)):
                break
            reg = 0.0
            K = np.zeros((n + neq, n + neq))
            K[n:, :n], K[:n, n:] = A, A.T
            rhs = np.concatenate([-g, np.zeros(neq)])
            scale = max(1e-300, np.abs(np.diag(H)).max())
            for _ in range(12):
                K[:n, :n] = H + reg * np.eye(n)
                try:
                    dx = np.linalg.solve(K, rhs)[:n]
                    if np.all(np.isfinite(dx)) and g @ dx < 0:
                        break
                except np.linalg.LinAlgError:
                    pass
                reg = max(2.0 * reg * 10, 1e-10 * scale)
                dx = None
            if dx is None:
                break
            dec = -(g @ dx)
            if dec <= 1e-14 * max(1.0, abs(f)):
                break
            neg = dx[pos] < 0
            t = min(1.0, 0.99 * float(np.min(-x[pos][neg] / dx[pos][neg]))) if np.any(neg) else 1.0
            p0 = phi(x, mu)
            while t > 1e-16:
                xn = x + t * dx
                pn = phi(xn, mu)
                if pn <= p0 - 1e-4 * t * dec:
                    break
                t *= 0.5
            else:
                break
            x = xn
            if t * dec < 1e-15 * max(1.0, abs(p0)):
                break
        f = fun(x)
        if mu <= mu_final:
            converged = True
            break
        mu = max(mu * shrink, mu_final)
    return OptimResult(x, float(f), total, converged, np.nan, message="" if converged else "barrier outer loop cap")
