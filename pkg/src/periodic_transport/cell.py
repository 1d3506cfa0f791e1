"""The homogenised cell problem

    f_hom(rho, j) = inf { F(m, J) : m >= 0 periodic, sum m = rho,
                                     J periodic, dive J = 0, Eff(J) = j }.

Fluxes are parametrised as ``J = J_part(j) + B c`` where the columns of ``B``
form an orthonormal basis of the kernel of ``J -> (dive J, Eff J)`` (from an
SVD), so the flux constraints hold exactly for every coefficient vector.
Masses live on the scaled simplex and are handled by Euclidean projection.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .costs import CostDomainError, CostFunction, EdgeCost, recession_quotients
from .graph import PeriodicGraph, effective_flux, periodic_divergence, representative_flux
from .optimize import minimize_barrier, minimize_projected, project_simplex

log = logging.getLogger(__name__)

FEAS_TOL = 1e-10


@dataclass
class RepParametrization:
    graph: PeriodicGraph
    j: np.ndarray
    J_part: np.ndarray
    basis: np.ndarray  # (S, k), orthonormal columns
    rank: int
    singular_values: np.ndarray

    @property
    def nullity(self) -> int:
        return self.basis.shape[1]

    def flux(self, c) -> np.ndarray:
        return self.J_part + self.basis @ np.asarray(c, dtype=float)

    def coefficients(self, J) -> np.ndarray:
        return self.basis.T @ (np.asarray(J, dtype=float) - self.J_part)


def constraint_matrix(graph: PeriodicGraph) -> np.ndarray:
    """Matrix of J -> (dive J on the fiber, Eff J)."""
    return np.vstack([graph.div_matrix, graph.dz.T.astype(float)])


def build_parametrization(graph: PeriodicGraph, j) -> RepParametrization:
    j = np.asarray(j, dtype=float).reshape(graph.d)
    A = constraint_matrix(graph)
    _, sv, Vt = np.linalg.svd(A, full_matrices=True)
    tol = max(A.shape) * np.finfo(float).eps * (sv.max() if sv.size else 1.0)
    rank = int(np.sum(sv > tol))
    basis = Vt[rank:].T.copy()
    return RepParametrization(graph, j, representative_flux(graph, j), basis, rank, sv)


@dataclass
class CellSolution:
    value: float
    m_opt: np.ndarray
    J_opt: np.ndarray
    kkt_residual: float
    iterations: int
    status: str = "converged"
    rho: float = 0.0
    j: np.ndarray | None = None
    restarts: int = 0
    runtime: float = 0.0
    diagnostic: str = ""
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status in ("converged", "exact", "infeasible")

    def feasibility(self, graph: PeriodicGraph) -> dict:
        return {
            "div": float(np.abs(periodic_divergence(graph, self.J_opt)).max()),
            "eff": float(np.abs(effective_flux(graph, self.J_opt) - self.j).max()),
            "mass": float(abs(self.m_opt.sum() - self.rho)),
            "min_m": float(self.m_opt.min()),
        }


def _reference_point(F: CostFunction, par: RepParametrization, rho: float):
    m_ref, J_ref = F.reference_m, F.reference_J
    rho_ref = m_ref.sum()
    j_ref = effective_flux(par.graph, J_ref)
    m = m_ref * (rho / rho_ref) if rho_ref > 0 else np.full(m_ref.size, rho / m_ref.size)
    J = J_ref + representative_flux(par.graph, par.j - j_ref)
    return m, par.coefficients(J)


def solve_cell(graph: PeriodicGraph, F: CostFunction, rho: float, j, tol: float = 1e-10,
               max_iter: int = 100_000, m_init=None, c_init=None, keep_history: bool = False) -> CellSolution:
    """Solve the cell problem at (rho, j)."""
    t0 = time.perf_counter()
    if rho < 0:
        raise CostDomainError("rho must be nonnegative")
    rho = float(rho)
    par = build_parametrization(graph, j)
    nv, k = graph.n_fibers, par.nullity
    B = par.basis

    def unpack(x):
        return x[:nv], par.J_part + B @ x[nv:]

    def fun(x):
        m, J = unpack(x)
        return F.energy_periodic(m, J)

    def grad(x):
        m, J = unpack(x)
        gm, gJ = F.grad_periodic(m, J)
        return np.concatenate([gm, B.T @ gJ])

    def project(x):
        return np.concatenate([project_simplex(x[:nv], rho), x[nv:]])

    m0 = np.full(nv, rho / nv) if m_init is None else project_simplex(m_init, rho)
    c0 = np.zeros(k) if c_init is None else np.asarray(c_init, dtype=float)
    x0 = np.concatenate([m0, c0])
    done = lambda res, status, diag="": _finish(graph, F, par, rho, res, status, t0, diag)

    if nv == 1 and k == 0 or (rho == 0 and k == 0):
        val = fun(x0)
        status = "exact" if np.isfinite(val) else "infeasible"
        return done((x0, val, 0, 0.0, 0, []), status, "" if np.isfinite(val) else "Rep(rho, j) misses Dom(F)")

    f0 = fun(x0)
    diag = ""
    if not np.isfinite(f0):
        x0, diag = _feasibility_phase(fun, F, par, rho, x0)
        if x0 is None:
            return done((np.concatenate([m0, c0]), np.inf, 0, np.inf, 0, []), "infeasible", diag)
    blocks = [np.arange(nv), np.arange(nv, nv + k)] if k > 0 and rho > 0 else None
    if rho == 0:
        # masses are pinned at zero; optimise the kernel coefficients only
        res = minimize_projected(lambda c: fun(np.concatenate([m0, c])),
                                 lambda c: grad(np.concatenate([m0, c]))[nv:],
                                 lambda c: c, x0[nv:], tol=tol, max_iter=max_iter, keep_history=keep_history)
        x = np.concatenate([m0, res.x])
    else:
        newton_iters = 0
        barrier_ok = False
        if np.all(x0[:nv] > 0):
            if isinstance(F, EdgeCost):
                xb, newton_iters, ok = _EdgeEpigraph(F, par).solve(x0, rho, tol)
                fb = fun(xb)
            else:
                A = np.concatenate([np.ones(nv), np.zeros(k)])[None, :]
                bres = minimize_barrier(fun, grad, x0, np.arange(nv), A, np.array([rho]), tol=tol)
                xb, fb, newton_iters, ok = bres.x, bres.fun, bres.iterations, bres.converged
            if np.isfinite(fb) and fb <= fun(x0):
                x0, barrier_ok = xb, ok
        # first-order polish (monotone, so it never undoes the barrier stage)
        res = minimize_projected(fun, grad, project, x0, tol=tol, max_iter=max_iter, blocks=blocks,
                                 keep_history=keep_history)
        res.iterations += newton_iters
        res.converged = res.converged or barrier_ok
        x = res.x
    status = "converged" if res.converged else "max_iter"
    if res.message:
        log.debug("cell solve (%s, %s): %s", rho, j, res.message)
    return done((x, res.fun, res.iterations, res.kkt, res.restarts, res.history), status,
                "; ".join(filter(None, [diag, res.message])))


class _EdgeEpigraph:
    """Epigraph form of an edge cost on Rep(rho, j).

    Variables ``y = (m, c, t)`` with one epigraph variable ``t_o`` per oriented
    stencil edge ``o``; the problem is  min 1/2 sum t  subject to
    ``t_o >= phi_{k,o}(m, c)`` for every smooth piece ``k``, ``m > 0`` and
    ``sum m = rho``.  Each piece depends on three numbers (tail mass, head
    mass, flux), so its curvature is a 3x3 finite-difference block.
    """

    def __init__(self, F: EdgeCost, par: RepParametrization):
        g = par.graph
        self.F, self.par, self.g = F, par, g
        nv, k, S = g.n_fibers, par.nullity, g.n_edges
        self.nv, self.k, self.S = nv, k, S
        self.n = nv + k + 2 * S
        n_x = nv + k
        E = np.eye(nv)
        Bz = np.hstack([np.zeros((S, nv)), par.basis])
        # derivative of (a, b, J) of each orientation with respect to x = (m, c)
        self.Pa = [np.hstack([E[g.tails], np.zeros((S, k))]), np.hstack([E[g.heads], np.zeros((S, k))])]
        self.Pb = [self.Pa[1], self.Pa[0]]
        self.PJ = [Bz, -Bz]
        self.n_x = n_x

    def edge_args(self, x):
        g = self.g
        m, c = x[:self.nv], x[self.nv:self.n_x]
        J = self.par.flux(c)
        return [(m[g.tails], m[g.heads], J, True), (m[g.heads], m[g.tails], -J, False)]

    def pieces(self, x):
        """List over orientations of list over pieces of (value, grads)."""
        return [self.F.oriented_pieces(a, b, J, fw) for a, b, J, fw in self.edge_args(x)]

    def start(self, x):
        vals = [np.max([v for v, _ in pcs], axis=0) for pcs in self.pieces(x)]
        t = np.concatenate(vals)
        return np.concatenate([x, t + np.maximum(1.0, np.abs(t))])

    def barrier(self, y, mu):
        x, t = y[:self.n_x], y[self.n_x:]
        m = x[:self.nv]
        if np.any(m <= 0):
            return np.inf
        val = 0.5 * t.sum() - mu * np.sum(np.log(m))
        for o, pcs in enumerate(self.pieces(x)):
            to = t[o * self.S:(o + 1) * self.S]
            for v, _ in pcs:
                h = to - v
                if not np.all(np.isfinite(h)) or np.any(h <= 0):
                    return np.inf
                val -= mu * np.sum(np.log(h))
        return float(val)

    def newton_system(self, y, mu):
        nx, S = self.n_x, self.S
        x, t = y[:nx], y[nx:]
        m = x[:self.nv]
        grad = np.zeros(self.n)
        H = np.zeros((self.n, self.n))
        grad[nx:] = 0.5
        grad[:self.nv] -= mu / m
        H[np.arange(self.nv), np.arange(self.nv)] += mu / m ** 2
        args = self.edge_args(x)
        for o, (a, b, J, fw) in enumerate(args):
            to = t[o * S:(o + 1) * S]
            P = (self.Pa[o], self.Pb[o], self.PJ[o])
            pcs = self.F.oriented_pieces(a, b, J, fw)
            # 3x3 curvature blocks of every piece by central differences of its gradient
            hs = [1e-6 * (1.0 + np.abs(a)), 1e-6 * (1.0 + np.abs(b)), 1e-6 * (1.0 + np.abs(J))]
            hs[0] = np.minimum(hs[0], 1e-3 * a)
            hs[1] = np.minimum(hs[1], 1e-3 * b)
            curv = [np.zeros((S, 3, 3)) for _ in pcs]
            for r in range(3):
                up = [a, b, J]
                dn = [a, b, J]
                up[r] = up[r] + hs[r]
                dn[r] = dn[r] - hs[r]
                gu = self.F.oriented_pieces(*up, fw)
                gd = self.F.oriented_pieces(*dn, fw)
                for kk in range(len(pcs)):
                    for cidx in range(3):
                        curv[kk][:, cidx, r] = (gu[kk][1][cidx] - gd[kk][1][cidx]) / (2 * hs[r])
            for kk, (v, gr) in enumerate(pcs):
                h = to - v
                w = mu / h
                gx = gr[0][:, None] * P[0] + gr[1][:, None] * P[1] + gr[2][:, None] * P[2]  # (S, nx)
                # gradient of -mu log(t - phi)
                grad[:nx] += w @ gx
                ti = nx + o * S + np.arange(S)
                np.add.at(grad, ti, -w)
                # Gauss-Newton part mu grad(h) grad(h)^T / h^2 with grad h = (-gx, e_t)
                w2 = mu / h ** 2
                H[:nx, :nx] += (gx * w2[:, None]).T @ gx
                H[ti, ti] += w2
                cross = -(gx * w2[:, None])  # (S, nx)
                H[ti, :nx] += cross
                H[:nx, ti] += cross.T
                # curvature part mu Hess(phi) / h (phi convex)
                Cs = 0.5 * (curv[kk] + np.transpose(curv[kk], (0, 2, 1)))
                Pst = np.stack(P, axis=1)  # (S, 3, nx)
                H[:nx, :nx] += np.einsum("s,sai,sab,sbj->ij", w, Pst, Cs, Pst)
        return grad, H

    def solve(self, x0, rho, tol, max_outer=60, max_newton=60):
        y = self.start(x0)
        f0 = 0.5 * y[self.n_x:].sum()
        n_terms = self.nv + 2 * self.S * len(self.pieces(x0)[0])
        mu = max(1e-3, 1e-2 * abs(f0)) / n_terms
        A = np.zeros((1, self.n))
        A[0, :self.nv] = 1.0
        total = 0
        converged = False
        for _ in range(max_outer):
            for _ in range(max_newton):
                total += 1
                g, H = self.newton_system(y, mu)
                if not np.all(np.isfinite(H)) or not np.all(np.isfinite(g)):
                    break
                K = np.zeros((self.n + 1, self.n + 1))
                K[:self.n, :self.n] = H
                K[self.n, :self.n] = A
                K[:self.n, self.n] = A[0]
                rhs = np.concatenate([-g, [0.0]])
                reg = 0.0
                dy = None
                scale = max(1e-300, np.abs(np.diag(H)).max())
                for _ in range(12):
                    try:
                        K2 = K.copy()
                        K2[:self.n, :self.n] += reg * np.eye(self.n)
                        cand = np.linalg.solve(K2, rhs)[:self.n]
                        if np.all(np.isfinite(cand)) and g @ cand < 0:
                            dy = cand
                            break
                    except np.linalg.LinAlgError:
                        pass
                    reg = max(10 * reg, 1e-12 * scale)
                if dy is None:
                    break
                dec = -(g @ dy)
                fval = 0.5 * y[self.n_x:].sum()
                if dec <= 1e-15 * max(1.0, abs(fval)):
                    break
                m, dm = y[:self.nv], dy[:self.nv]
                neg = dm < 0
                step = min(1.0, 0.99 * float(np.min(-m[neg] / dm[neg]))) if np.any(neg) else 1.0
                p0 = self.barrier(y, mu)
                while step > 1e-16:
                    yn = y + step * dy
                    pn = self.barrier(yn, mu)
                    if pn <= p0 - 1e-4 * step * dec:
                        break
                    step *= 0.5
                else:
                    break
                y = yn
                if step * dec < 1e-15 * max(1.0, abs(p0)):
                    break
            fval = 0.5 * y[self.n_x:].sum()
            mu_final = 1e-2 * tol * max(1.0, abs(fval)) / n_terms
            if mu <= mu_final:
                converged = True
                break
            mu = max(mu * 0.2, mu_final)
        return y[:self.n_x], total, converged


def _feasibility_phase(fun, F, par, rho, x0):
    """Move along the segment towards the reference representative into Dom(F)."""
    m_ref, c_ref = _reference_point(F, par, rho)
    x_ref = np.concatenate([m_ref, c_ref])
    # smallest step (from the start point) with a finite value
    thetas = [2.0 ** (-k) for k in range(40, -1, -1)]
    for th in thetas:
        x = (1 - th) * x0 + th * x_ref
        if np.isfinite(fun(x)):
            return x, f"feasibility phase moved {th:.3g} towards the reference point"
    return None, "feasibility phase failed: no finite point between start and reference (Rep(rho,j) misses Dom(F))"


def _finish(graph, F, par, rho, res, status, t0, diag):
    x, val, iters, kkt, restarts, hist = res
    nv = graph.n_fibers
    m = x[:nv].copy()
    J = par.flux(x[nv:])
    value = F.energy_periodic(m, J) if np.isfinite(val) or status != "infeasible" else np.inf
    sol = CellSolution(float(value), m, J, float(kkt), int(iters), status, rho, par.j.copy(), int(restarts),
                       time.perf_counter() - t0, diag, list(hist))
    return sol


# --------------------------------------------------------------- tables
def f_hom_table(graph, F, rho_list, j_grid, tol=1e-10, threads: int = 1, max_iter=100_000) -> list[CellSolution]:
    """Solve at every (rho, j) pair; rows ordered rho-major."""
    rho_list = list(rho_list)
    j_grid = [np.atleast_1d(np.asarray(j, dtype=float)) for j in j_grid]
    if not rho_list or not j_grid:
        raise ValueError("rho list and j grid must be nonempty")
    tasks = [(r, j) for r in rho_list for j in j_grid]
    run = lambda rj: solve_cell(graph, F, rj[0], rj[1], tol=tol, max_iter=max_iter)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(run, tasks))
    return [run(t) for t in tasks]


FEASIBILITY_COLUMNS = ("div_residual", "eff_residual", "mass_residual")


def table_to_csv(solutions, d: int, header_lines=(), graph: PeriodicGraph | None = None) -> str:
    """CSV table of cell solutions; with ``graph`` the feasibility residuals of the minimisers are added."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    extra = list(FEASIBILITY_COLUMNS) if graph is not None else []
    w.writerow(["rho"] + [f"j{i + 1}" for i in range(d)] + ["value", "kkt_residual"] + extra + ["iterations", "status"])
    for s in solutions:
        feas = []
        if graph is not None:
            f = s.feasibility(graph)
            feas = [_fmt(f["div"]), _fmt(f["eff"]), _fmt(f["mass"])]
        w.writerow([_fmt(s.rho)] + [_fmt(x) for x in s.j] + [_fmt(s.value), _fmt(s.kkt_residual)] + feas
                   + [s.iterations, s.status])
    return buf.getvalue()


def solution_record(s: CellSolution, graph: PeriodicGraph | None = None) -> dict:
    rec = {"rho": float(s.rho), "j": [float(x) for x in s.j], "value": float(s.value),
           "kkt_residual": float(s.kkt_residual), "iterations": int(s.iterations), "status": s.status,
           "m_opt": [float(x) for x in s.m_opt], "J_opt": [float(x) for x in s.J_opt]}
    if graph is not None:
        f = s.feasibility(graph)
        rec.update({"div_residual": f["div"], "eff_residual": f["eff"], "mass_residual": f["mass"]})
    return rec


def _fmt(x) -> str:
    x = float(x)
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(round(x, 12)) if abs(x) > 1e-300 else "0.0"


# ------------------------------------------------------------ recession
def reference_macro_point(graph, F):
    """(rho°, j°) = (sum m°, Eff(J°))."""
    return float(F.reference_m.sum()), effective_flux(graph, F.reference_J)


def recession_f_hom(graph, F, rho_dir, j_dir, ladder=(1e2, 1e3, 1e4), tol=1e-10):
    rho0, j0 = reference_macro_point(graph, F)
    j_dir = np.asarray(j_dir, dtype=float).reshape(graph.d)

    def f(t):
        return solve_cell(graph, F, rho0 + t * rho_dir, j0 + t * j_dir, tol=tol).value

    try:
        return recession_quotients(f, ladder)
    except CostDomainError as exc:
        raise CostDomainError(f"base point infeasible: {exc}") from None


# ----------------------------------------------------------- verifications
def verify_convexity(graph, F, pairs, tol=1e-10) -> float:
    """Max of f((a+b)/2) - (f(a)+f(b))/2 over pairs of (rho, j) points."""
    worst = -np.inf
    for (ra, ja), (rb, jb) in pairs:
        fa = solve_cell(graph, F, ra, ja, tol=tol).value
        fb = solve_cell(graph, F, rb, jb, tol=tol).value
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        fm = solve_cell(graph, F, 0.5 * (ra + rb), 0.5 * (np.asarray(ja, float) + np.asarray(jb, float)), tol=tol).value
        worst = max(worst, fm - 0.5 * (fa + fb))
    return float(worst)


def verify_growth_hom(graph, F, samples, c=None, C=None, tol=1e-10):
    """Fit/check f_hom(rho, j) >= c|j| - C(rho + 1) on sampled points."""
    vals, A, B = [], [], []
    for rho, j in samples:
        vals.append(solve_cell(graph, F, rho, j, tol=tol).value)
        A.append(float(np.linalg.norm(np.atleast_1d(j))))
        B.append(rho + 1.0)
    vals, A, B = map(np.array, (vals, A, B))
    fin = np.isfinite(vals)
    if c is None:
        pos = fin & (A > 0)
        c = 0.5 * float(np.min((vals[pos] + B[pos]) / A[pos])) if np.any(pos) else 1.0
    if C is None:
        C = max(0.0, float(np.max((c * A[fin] - vals[fin]) / B[fin])))
    viol = float(np.max(c * A[fin] - C * B[fin] - vals[fin]))
    return c, C, viol


class TiledEdgeCost(EdgeCost):
    """Edge cost on the tiled graph induced by an edge cost on the base graph.

    With eps = 1/N, F~(m, J) = sum_z eps^d F(tau^z m / eps^d, tau^z J / eps^(d-1))
    where the N^d sub-cells of the big cell play the role of the torus.
    """

    def __init__(self, base: EdgeCost, N: int, tiled=None):
        tiled = tiled or base.graph.tiled(N)
        g, src, sign = tiled
        self.base, self.N, self.src, self.sign = base, int(N), src, sign
        d = base.graph.d
        self.scale = float(N) ** (-d)
        self.flux_scale = float(N) ** (-(d - 1))
        ncell, S = N ** d, base.graph.n_edges
        self._shape = (ncell, S)
        ref_m = self.scale * np.tile(base.reference_m, ncell)
        ref_J = self.flux_scale * sign * np.tile(base.reference_J, ncell)
        super().__init__(g, ref_m, ref_J)

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(x, np.broadcast(x, np.empty(self.graph.n_edges)).shape).reshape(
            x.shape[:-1] + self._shape) if x.shape and x.shape[-1] == self.graph.n_edges else x

    def oriented(self, a, b, J, forward=True):
        shape = np.broadcast(a, b, J, np.empty(self.graph.n_edges)).shape
        a, b, J = (np.broadcast_to(np.asarray(v, float), shape).reshape(shape[:-1] + self._shape) for v in (a, b, J))
        sgn = self.sign.reshape(self._shape) > 0
        e, f = self.scale, self.flux_scale
        fw = self.base.oriented(a / e, b / e, J / f, forward)
        bw = self.base.oriented(a / e, b / e, J / f, not forward)
        return (e * np.where(sgn, fw, bw)).reshape(shape)

    def oriented_grad(self, a, b, J, forward=True):
        shape = np.broadcast(a, b, J, np.empty(self.graph.n_edges)).shape
        a, b, J = (np.broadcast_to(np.asarray(v, float), shape).reshape(shape[:-1] + self._shape) for v in (a, b, J))
        sgn = self.sign.reshape(self._shape) > 0
        e, f = self.scale, self.flux_scale
        fw = self.base.oriented_grad(a / e, b / e, J / f, forward)
        bw = self.base.oriented_grad(a / e, b / e, J / f, not forward)
        fac = (1.0, 1.0, e / f)
        return tuple((k * np.where(sgn, x, y)).reshape(shape) for k, x, y in zip(fac, fw, bw))


    def oriented_pieces(self, a, b, J, forward=True):
        shape = np.broadcast(a, b, J, np.empty(self.graph.n_edges)).shape
        a, b, J = (np.broadcast_to(np.asarray(v, float), shape).reshape(shape[:-1] + self._shape) for v in (a, b, J))
        sgn = self.sign.reshape(self._shape) > 0
        e, f = self.scale, self.flux_scale
        fw = self.base.oriented_pieces(a / e, b / e, J / f, forward)
        bw = self.base.oriented_pieces(a / e, b / e, J / f, not forward)
        if len(fw) != len(bw):
            raise CostDomainError("orientations must have the same number of pieces")
        fac = (1.0, 1.0, e / f)
        out = []
        for (vf, gf), (vb, gb) in zip(fw, bw):
            val = (e * np.where(sgn, vf, vb)).reshape(shape)
            grads = tuple((k * np.where(sgn, x, y)).reshape(shape) for k, x, y in zip(fac, gf, gb))
            out.append((val, grads))
        return out


def tiled_problem(graph: PeriodicGraph, F: CostFunction, N: int):
    """(tiled graph, tiled cost) for the rescaling-invariance check."""
    if not isinstance(F, EdgeCost):
        raise CostDomainError("tiling is implemented for edge-based costs")
    tiled = graph.tiled(N)
    return tiled[0], TiledEdgeCost(F, N, tiled)


def verify_rescale_invariance(graph, F, N: int = 2, points=(), tol=1e-10):
    """Max |f_hom - f~_hom| over test points; also returns per-point values."""
    g2, F2 = tiled_problem(graph, F, N)
    rows = []
    for rho, j in points:
        a = solve_cell(graph, F, rho, j, tol=tol)
        b = solve_cell(g2, F2, rho, j, tol=tol)
        rows.append((rho, np.atleast_1d(j), a.value, b.value))
    worst = max((abs(r[2] - r[3]) for r in rows), default=0.0)
    return worst, rows
