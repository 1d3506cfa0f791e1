"""Local convex energies F(m, J) on periodic graphs and their rescalings.

Costs are evaluated on windows (see :mod:`periodic_transport.graph` for the
layout), on periodic data (one fundamental cell), and on torus data through
the rescaled energy

    F_eps(m, J) = sum_z eps^d F(tau^z m / eps^d, tau^z J / eps^(d-1)).

``+inf`` is a regular value.  Public ``evaluate`` rejects negative masses;
the internal ``energy_*`` methods return ``+inf`` there instead, which is
what the optimisers need (an indicator of the domain).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graph import GraphError, PeriodicGraph, RescaledGraph, periodic_window, restrict_window
from .means import Mean, MinimumMean, get_mean


class CostDomainError(ValueError):
    """Input outside the domain where a cost may be evaluated."""


def _fd_step(x):
    return 1e-6 * (1.0 + np.abs(x))


class CostFunction:
    """Base class.  Subclasses implement :meth:`evaluate` on windows.

    Attributes
    ----------
    graph, R1, kind, reference_m, reference_J
    """

    kind = "general"

    def __init__(self, graph: PeriodicGraph, R1: int, reference_m=None, reference_J=None):
        self.graph = graph
        self.R1 = int(R1)
        nv, S = graph.n_fibers, graph.n_edges
        self.reference_m = np.ones(nv) if reference_m is None else np.asarray(reference_m, dtype=float).reshape(nv)
        self.reference_J = np.zeros(S) if reference_J is None else np.asarray(reference_J, dtype=float).reshape(S)

    # -------------------------------------------------------------- windows
    @property
    def radius(self) -> int:
        """R = max(R0, R1): window radius used by growth conditions."""
        return max(self.graph.R0, self.R1)

    def _check_window(self, m_win, J_win):
        g = self.graph
        m_win = np.asarray(m_win, dtype=float)
        J_win = np.asarray(J_win, dtype=float)
        if m_win.ndim != g.d + 1 or m_win.shape[-1] != g.n_fibers or J_win.shape[:-1] != m_win.shape[:-1] \
                or J_win.shape[-1] != g.n_edges:
            raise CostDomainError("window arrays have inconsistent shapes")
        side = m_win.shape[0]
        if any(n != side for n in m_win.shape[:-1]) or side % 2 == 0:
            raise CostDomainError("windows must be cubes of odd side")
        r = side // 2
        if r < self.R1:
            raise CostDomainError(f"window radius {r} smaller than locality radius {self.R1}")
        return m_win, J_win, r

    def evaluate(self, m_win, J_win) -> float:
        """F on windows of radius >= R1 (negative masses are rejected)."""
        m_win, J_win, r = self._check_window(m_win, J_win)
        if np.any(m_win < 0):
            raise CostDomainError("negative mass")
        return float(self._evaluate_window(m_win, J_win, r))

    def _evaluate_window(self, m_win, J_win, r) -> float:
        raise NotImplementedError

    def window_radius(self) -> int:
        return max(self.R1, self.graph.R0)

    # ------------------------------------------------------------- periodic
    def energy_periodic(self, m, J) -> float:
        """F of periodic data (fiber masses ``m``, stencil fluxes ``J``)."""
        m = np.asarray(m, dtype=float)
        if np.any(m < 0):
            return np.inf
        r = self.R1
        g = self.graph
        return float(self._evaluate_window(periodic_window(m, g.d, r), periodic_window(J, g.d, r), r))

    def evaluate_periodic(self, m, J) -> float:
        if np.any(np.asarray(m) < 0):
            raise CostDomainError("negative mass")
        return self.energy_periodic(m, J)

    def grad_periodic(self, m, J):
        """(Sub)gradient of the periodic energy; central differences by default."""
        m = np.asarray(m, dtype=float)
        J = np.asarray(J, dtype=float)
        return _fd_grad(self.energy_periodic, m, J)

    def energy_periodic_batch(self, m, J) -> np.ndarray:
        """Vectorised periodic energy over leading batch axes."""
        m = np.asarray(m, dtype=float)
        J = np.asarray(J, dtype=float)
        flat_m = m.reshape(-1, m.shape[-1])
        flat_J = J.reshape(-1, J.shape[-1])
        out = np.array([self.energy_periodic(a, b) for a, b in zip(flat_m, flat_J)])
        return out.reshape(m.shape[:-1])

    # ---------------------------------------------------------------- torus
    def energy_torus(self, rg: RescaledGraph, m, J) -> float:
        """Rescaled energy on torus data (generic window loop)."""
        m = np.asarray(m, dtype=float)
        J = np.asarray(J, dtype=float)
        if np.any(m < 0):
            return np.inf
        eps, d = rg.eps, rg.d
        r = self.R1
        total = 0.0
        for z in rg.cells:
            mw = restrict_window(rg, m, z, r) / eps ** d
            Jw = restrict_window(rg, J, z, r) / eps ** (d - 1)
            total += eps ** d * self._evaluate_window(mw, Jw, r)
        return float(total)

    def grad_torus(self, rg: RescaledGraph, m, J):
        return _fd_grad(lambda a, b: self.energy_torus(rg, a, b), np.asarray(m, float), np.asarray(J, float))

    def reference_value(self) -> float:
        return self.energy_periodic(self.reference_m, self.reference_J)

    # ------------------------------------------------------------ utilities
    def flux_mass_window_sums(self, m_win, J_win):
        """(sum over E^Q of |J|, sum of m over |x_z| <= R) for a window."""
        g = self.graph
        m_win = np.asarray(m_win, dtype=float)
        J_win = np.asarray(J_win, dtype=float)
        r = m_win.shape[0] // 2
        c0 = (r,) * g.d
        total = 0.0
        for s in range(g.n_edges):
            back = tuple(r - int(x) for x in g.dz[s])
            total += abs(J_win[c0 + (s,)]) + abs(J_win[back + (s,)])
        R = self.radius
        sl = tuple(slice(r - R, r + R + 1) for _ in range(g.d))
        return float(total), float(m_win[sl].sum())


def _fd_grad(fun, m, J):
    gm = np.zeros_like(m)
    gJ = np.zeros_like(J)
    for arr, out in ((m, gm), (J, gJ)):
        for idx in np.ndindex(arr.shape):
            h = _fd_step(arr[idx])
            old = arr[idx]
            arr[idx] = old + h
            fp = fun(m, J)
            arr[idx] = old - h
            fm = fun(m, J)
            arr[idx] = old
            if arr is m and old - h < 0:
                arr[idx] = old + h
                fp = fun(m, J)
                arr[idx] = old
                fm = fun(m, J)
                out[idx] = (fp - fm) / h
            else:
                out[idx] = (fp - fm) / (2 * h)
    return gm, gJ


class EdgeCost(CostFunction):
    """Edge-based cost F = 1/2 sum over E^Q of phi(m(x), m(y), J(x, y)).

    Subclasses implement ``oriented(a, b, J, forward)`` (energy of an oriented
    edge with tail mass ``a``, head mass ``b``; ``forward`` tells whether the
    orientation agrees with the stencil) and optionally its gradient.  Arrays
    broadcast with the stencil index on the last axis.
    """

    kind = "edge_based"

    def __init__(self, graph, reference_m=None, reference_J=None):
        super().__init__(graph, graph.R0, reference_m, reference_J)

    def oriented(self, a, b, J, forward: bool):
        raise NotImplementedError

    def oriented_grad(self, a, b, J, forward: bool):
        """Partials (d/da, d/db, d/dJ) of :meth:`oriented`; finite differences by default."""
        out = []
        for k in range(3):
            args = [np.asarray(a, float), np.asarray(b, float), np.asarray(J, float)]
            h = _fd_step(args[k])
            lo = args[k] - h
            if k < 2:
                lo = np.maximum(lo, 0.0)
            hi = args[k] + h
            ap, am = list(args), list(args)
            ap[k], am[k] = hi, lo
            out.append((self.oriented(*ap, forward) - self.oriented(*am, forward)) / (hi - lo))
        return tuple(out)

    def oriented_pieces(self, a, b, J, forward: bool):
        """Smooth convex pieces whose pointwise maximum is :meth:`oriented`.

        Returns a list of ``(value, (d/da, d/db, d/dJ))``; costs with kinks
        (minimum mean, p = 1) override this with their smooth branches.
        """
        return [(self.oriented(a, b, J, forward), self.oriented_grad(a, b, J, forward))]

    def pair(self, a, b, J):
        """Sum of the two orientations of each stencil edge (m(tail)=a, m(head)=b)."""
        return self.oriented(a, b, J, True) + self.oriented(b, a, -np.asarray(J, float), False)

    def pair_grad(self, a, b, J):
        fa, fb, fJ = self.oriented_grad(a, b, J, True)
        ra, rb, rJ = self.oriented_grad(b, a, -np.asarray(J, float), False)
        return fa + rb, fb + ra, fJ - rJ

    def _evaluate_window(self, m_win, J_win, r):
        g = self.graph
        c0 = np.full(g.d, r)
        head = tuple((c0 + g.dz).T)
        back = tuple((c0 - g.dz).T)
        cen = tuple(np.broadcast_to(c0[:, None], (g.d, g.n_edges)))
        S = np.arange(g.n_edges)
        fwd = self.oriented(m_win[cen + (g.tails,)], m_win[head + (g.heads,)], J_win[cen + (S,)], True)
        bwd = self.oriented(m_win[cen + (g.heads,)], m_win[back + (g.tails,)], -J_win[back + (S,)], False)
        return 0.5 * float(np.sum(fwd) + np.sum(bwd))

    # fast paths ------------------------------------------------------------
    def energy_periodic(self, m, J) -> float:
        m = np.asarray(m, dtype=float)
        if np.any(m < 0):
            return np.inf
        g = self.graph
        return float(0.5 * np.sum(self.pair(m[g.tails], m[g.heads], np.asarray(J, float))))

    def energy_periodic_batch(self, m, J):
        m = np.asarray(m, dtype=float)
        g = self.graph
        vals = 0.5 * np.sum(self.pair(m[..., g.tails], m[..., g.heads], np.asarray(J, float)), axis=-1)
        return np.where(np.any(m < 0, axis=-1), np.inf, vals)

    def grad_periodic(self, m, J):
        m = np.asarray(m, dtype=float)
        g = self.graph
        da, db, dJ = self.pair_grad(m[g.tails], m[g.heads], np.asarray(J, float))
        gm = 0.5 * (np.bincount(g.tails, weights=da, minlength=g.n_fibers)
                    + np.bincount(g.heads, weights=db, minlength=g.n_fibers))
        return gm, 0.5 * dJ

    def energy_torus(self, rg: RescaledGraph, m, J) -> float:
        m = np.asarray(m, dtype=float)
        if np.any(m < 0):
            return np.inf
        eps, d = rg.eps, rg.d
        mf = m.ravel() / eps ** d
        a, b = mf[rg.tail_vertex], mf[rg.head_vertex]
        return float(0.5 * eps ** d * np.sum(self.pair(a, b, np.asarray(J, float) / eps ** (d - 1))))

    def grad_torus(self, rg: RescaledGraph, m, J):
        m = np.asarray(m, dtype=float)
        eps, d = rg.eps, rg.d
        mf = m.ravel() / eps ** d
        a, b = mf[rg.tail_vertex], mf[rg.head_vertex]
        da, db, dJ = self.pair_grad(a, b, np.asarray(J, float) / eps ** (d - 1))
        n = rg.n_vertices
        gm = 0.5 * (np.bincount(rg.tail_vertex.ravel(), weights=da.ravel(), minlength=n)
                    + np.bincount(rg.head_vertex.ravel(), weights=db.ravel(), minlength=n))
        return gm.reshape(m.shape), 0.5 * eps * dJ


def _weights(graph, weights):
    S = graph.n_edges
    if weights is None:
        return np.ones(S), np.ones(S)
    w = np.asarray(weights, dtype=float)
    if w.ndim == 0:
        return np.full(S, float(w)), np.full(S, float(w))
    if w.shape == (S,):
        return w.copy(), w.copy()
    if w.shape == (S, 2):
        return w[:, 0].copy(), w[:, 1].copy()
    raise CostDomainError(f"weights must be scalar, (S,) or (S, 2); got shape {w.shape}")


class WpMeanCost(EdgeCost):
    """F(m, J) = 1/2 sum_{E^Q} |J|^p / Lambda(q_xy m(x), q_yx m(y))^(p-1).

    ``weights`` give (q_xy, q_yx) for the stencil orientation of each edge.
    Division by zero follows 0/0 = 0 and c/0 = +inf for c > 0.
    """

    def __init__(self, graph: PeriodicGraph, p: float = 2.0, mean: Mean | str = "arithmetic",
                 weights=None, reference_m=None, reference_J=None):
        super().__init__(graph, reference_m, reference_J)
        if p < 1:
            raise CostDomainError("p must be at least 1")
        self.p = float(p)
        self.mean = get_mean(mean) if isinstance(mean, str) else mean
        self.q_fwd, self.q_bwd = _weights(graph, weights)
        if np.any(self.q_fwd <= 0) or np.any(self.q_bwd <= 0):
            raise CostDomainError("weights must be positive")

    def __repr__(self) -> str:
        return f"WpMeanCost(p={self.p}, mean={self.mean.name})"

    def _q(self, forward):
        return (self.q_fwd, self.q_bwd) if forward else (self.q_bwd, self.q_fwd)

    def oriented(self, a, b, J, forward=True):
        J = np.abs(np.asarray(J, dtype=float))
        p = self.p
        if p == 1.0:
            return J
        qa, qb = self._q(forward)
        lam = self.mean(qa * np.asarray(a, float), qb * np.asarray(b, float))
        with np.errstate(divide="ignore", invalid="ignore"):
            val = J ** p / lam ** (p - 1)
        return np.where(J == 0, 0.0, np.where(lam > 0, val, np.inf))

    def oriented_grad(self, a, b, J, forward=True):
        J = np.asarray(J, dtype=float)
        p = self.p
        if p == 1.0:
            z = np.zeros(np.broadcast(a, b, J).shape)
            return z, z.copy(), np.sign(J) + z
        qa, qb = self._q(forward)
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        lam = self.mean(qa * a, qb * b)
        la, lb = self.mean.grad(qa * a, qb * b)
        aj = np.abs(J)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dlam = -(p - 1) * aj ** p / lam ** p
            dJ = p * np.sign(J) * aj ** (p - 1) / lam ** (p - 1)
            da = dlam * la * qa
            db = dlam * lb * qb
        zero = aj == 0
        da = np.where(zero, 0.0, da)
        db = np.where(zero, 0.0, db)
        dJ = np.where(zero, 0.0, dJ)
        return da, db, dJ

    def oriented_pieces(self, a, b, J, forward=True):
        J = np.asarray(J, dtype=float)
        shape = np.broadcast(a, b, J).shape
        z = np.zeros(shape)
        if self.p == 1.0:
            return [(J + z, (z, z, np.ones(shape))), (-J + z, (z, z, -np.ones(shape)))]
        if not isinstance(self.mean, MinimumMean):
            return super().oriented_pieces(a, b, J, forward)
        qa, qb = self._q(forward)
        p, aj = self.p, np.abs(J)
        out = []
        for k, (q, u) in enumerate(((qa, np.asarray(a, float)), (qb, np.asarray(b, float)))):
            lam = q * u
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                val = np.where(aj == 0, 0.0, np.where(lam > 0, aj ** p / lam ** (p - 1), np.inf))
                dl = np.where(aj == 0, 0.0, -(p - 1) * aj ** p / lam ** p * q)
                dJ = np.where(aj == 0, 0.0, p * np.sign(J) * aj ** (p - 1) / lam ** (p - 1))
            grads = (dl + z, z.copy(), dJ + z) if k == 0 else (z.copy(), dl + z, dJ + z)
            out.append((val + z, grads))
        return out

    # -- certificates -------------------------------------------------------
    def young_certificate(self) -> tuple[float, float]:
        """Constants (c, C) with F >= c sum_{E^Q}|J| - C (1 + sum_{|x|<=R} m).

        From |J| <= (1/p)|J|^p/L^(p-1) + ((p-1)/p) L and L <= (a+b)/2.
        """
        p = self.p
        qmax = max(self.q_fwd.max(), self.q_bwd.max())
        return p / 2.0, (p - 1.0) / 2.0 * qmax * self.graph.max_degree

    def superlinear_theta(self):
        """(theta, C) for the superlinear growth bound (p > 1)."""
        if self.p <= 1:
            raise CostDomainError("superlinear growth requires p > 1")
        A = max(self.q_fwd.max(), self.q_bwd.max()) * self.graph.max_degree
        k = 0.5 / A ** (self.p - 1)
        p = self.p
        return (lambda t: k * np.abs(t) ** p), 0.0


class PowerEdgeCost(EdgeCost):
    """Mass-independent F = 1/2 sum_{E^Q} alpha_s |J|^p."""

    def __init__(self, graph, p=2.0, alpha=None, reference_m=None, reference_J=None):
        super().__init__(graph, reference_m, reference_J)
        self.p = float(p)
        self.alpha = np.ones(graph.n_edges) if alpha is None else np.broadcast_to(
            np.asarray(alpha, float), (graph.n_edges,)).copy()

    def oriented(self, a, b, J, forward=True):
        shape = np.broadcast(a, b, J).shape
        return np.broadcast_to(self.alpha * np.abs(np.asarray(J, float)) ** self.p, shape)

    def oriented_grad(self, a, b, J, forward=True):
        J = np.asarray(J, float)
        shape = np.broadcast(a, b, J).shape
        z = np.zeros(shape)
        if self.p == 1:
            dJ = self.alpha * np.sign(J)
        else:
            dJ = self.alpha * self.p * np.sign(J) * np.abs(J) ** (self.p - 1)
        return z, z.copy(), np.broadcast_to(dJ, shape)


class ZeroCost(EdgeCost):
    """F = 0 (admissible only in a degenerate sense: no growth)."""

    def oriented(self, a, b, J, forward=True):
        return np.zeros(np.broadcast(a, b, J).shape)

    def oriented_grad(self, a, b, J, forward=True):
        z = np.zeros(np.broadcast(a, b, J).shape)
        return z, z.copy(), z.copy()


class TableCost(CostFunction):
    """General local cost given by a table of perspective terms.

    F(m, J) = sum_k w_k |<A_k, J_window>|^p_k / <B_k, m_window>^(p_k-1)

    where ``A_k`` lists ``(offset, s, coeff)`` and ``B_k`` lists
    ``(offset, v, coeff)`` with nonnegative coefficients; each term is convex
    and the sum is local with radius given by the largest offset.
    """

    def __init__(self, graph, terms, reference_m=None, reference_J=None):
        self.terms = []
        radius = 0
        for t in terms:
            flux = [(tuple(int(x) for x in e[0]), int(e[1]), float(e[2])) for e in t["flux"]]
            mass = [(tuple(int(x) for x in e[0]), int(e[1]), float(e[2])) for e in t.get("mass", [])]
            if any(c < 0 for _, _, c in mass):
                raise CostDomainError("mass coefficients must be nonnegative")
            p = float(t.get("p", 2.0))
            if p > 1 and not mass:
                raise CostDomainError("terms with p > 1 need a mass part")
            for off, _, _ in flux + mass:
                radius = max(radius, max((abs(x) for x in off), default=0))
            self.terms.append((float(t.get("weight", 1.0)), p, flux, mass))
        super().__init__(graph, radius, reference_m, reference_J)
        S, nv = graph.n_edges, graph.n_fibers
        self._A = np.zeros((len(self.terms), S))
        self._B = np.zeros((len(self.terms), nv))
        for k, (_, _, flux, mass) in enumerate(self.terms):
            for _, s, c in flux:
                self._A[k, s] += c
            for _, v, c in mass:
                self._B[k, v] += c

    @staticmethod
    def _term(w, p, num, den):
        num = np.abs(num)
        if p == 1:
            return w * num
        with np.errstate(divide="ignore", invalid="ignore"):
            val = w * num ** p / den ** (p - 1)
        return np.where(num == 0, 0.0, np.where(den > 0, val, np.inf))

    def _evaluate_window(self, m_win, J_win, r):
        total = 0.0
        for w, p, flux, mass in self.terms:
            num = sum(c * J_win[tuple(r + np.array(o)) + (s,)] for o, s, c in flux)
            den = sum(c * m_win[tuple(r + np.array(o)) + (v,)] for o, v, c in mass)
            total += float(self._term(w, p, num, den))
        return total

    def energy_periodic(self, m, J):
        m = np.asarray(m, float)
        if np.any(m < 0):
            return np.inf
        num = self._A @ np.asarray(J, float)
        den = self._B @ m
        return float(sum(self._term(w, p, n, dd) for (w, p, _, _), n, dd in zip(self.terms, num, den)))

    def grad_periodic(self, m, J):
        m = np.asarray(m, float)
        J = np.asarray(J, float)
        num = self._A @ J
        den = self._B @ m
        gm = np.zeros_like(m)
        gJ = np.zeros_like(J)
        for k, (w, p, _, _) in enumerate(self.terms):
            n, dd = num[k], den[k]
            if n == 0:
                continue
            if p == 1:
                gJ += w * np.sign(n) * self._A[k]
                continue
            gJ += w * p * np.sign(n) * abs(n) ** (p - 1) / dd ** (p - 1) * self._A[k]
            gm += -w * (p - 1) * abs(n) ** p / dd ** p * self._B[k]
        return gm, gJ

    def energy_torus(self, rg, m, J):
        m = np.asarray(m, float)
        J = np.asarray(J, float)
        if np.any(m < 0):
            return np.inf
        eps, d = rg.eps, rg.d
        total = 0.0
        for w, p, flux, mass in self.terms:
            num = np.zeros(rg.n_cells)
            den = np.zeros(rg.n_cells)
            for o, s, c in flux:
                num += c * J[rg.shift_indices(o), s]
            for o, v, c in mass:
                den += c * m[rg.shift_indices(o), v]
            total += np.sum(self._term(w, p, num / eps ** (d - 1), den / eps ** d))
        return float(eps ** d * total)


# ------------------------------------------------------------ rescaled energy
def rescaled_energy(F: CostFunction, rg: RescaledGraph, m, J) -> float:
    """F_eps(m, J) on the rescaled graph."""
    if rg.base is not F.graph and (rg.base.n_edges != F.graph.n_edges or rg.base.n_fibers != F.graph.n_fibers):
        raise CostDomainError("cost and rescaled graph refer to different graphs")
    m = np.asarray(m, dtype=float)
    J = np.asarray(J, dtype=float)
    if m.shape != rg.mass_shape() or J.shape != rg.flux_shape():
        raise CostDomainError("field shapes do not match the rescaled graph")
    if 2 * F.R1 + 1 > rg.N and not isinstance(F, EdgeCost):
        raise CostDomainError("torus too small for the locality radius")
    return F.energy_torus(rg, m, J)


def reference_torus_fields(F: CostFunction, rg: RescaledGraph):
    """The eps-scaled reference pair (eps^d m°, eps^(d-1) J°) on the torus."""
    m, J = rg.lift(F.reference_m, F.reference_J)
    return rg.eps ** rg.d * m, rg.eps ** (rg.d - 1) * J


# --------------------------------------------------------------- recession
@dataclass
class RecessionEstimate:
    value: float
    ladder: tuple
    quotients: tuple
    gap: float
    diverging: bool = False
    first_infinite_t: float | None = None
    nondecreasing: bool = True


def recession_quotients(fun: Callable[[float], float], ladder=(1e2, 1e3, 1e4)) -> RecessionEstimate:
    """Centred recession quotients (f(t) - f(0)) / t along a geometric ladder."""
    f0 = fun(0.0)
    if not np.isfinite(f0):
        raise CostDomainError("base point outside the domain")
    qs = []
    for t in ladder:
        ft = fun(t)
        if not np.isfinite(ft):
            return RecessionEstimate(np.inf, tuple(ladder), tuple(qs), np.inf, True, float(t))
        qs.append((ft - f0) / t)
    q = np.array(qs)
    gap = abs(q[-1] - q[-2]) if len(q) > 1 else np.nan
    nondecreasing = bool(np.all(np.diff(q) >= -1e-9 * (1 + np.abs(q[1:]))))
    guard = 1e12 * (1.0 + abs(f0))
    growth = len(q) > 1 and q[-2] > 1e-12 and q[-1] / q[-2] >= 5.0
    diverging = bool(q[-1] > guard or growth)
    value = np.inf if diverging else float(q[-1])
    return RecessionEstimate(value, tuple(ladder), tuple(qs), float(gap), diverging, None, nondecreasing)


def recession_direction(F: CostFunction, base_m, base_J, dir_m, dir_J, ladder=(1e2, 1e3, 1e4)) -> RecessionEstimate:
    """Estimate F^inf(dir) from periodic base point and direction."""
    base_m, base_J = np.asarray(base_m, float), np.asarray(base_J, float)
    dir_m, dir_J = np.asarray(dir_m, float), np.asarray(dir_J, float)
    return recession_quotients(lambda t: F.energy_periodic(base_m + t * dir_m, base_J + t * dir_J), ladder)


# ------------------------------------------------------------------ growth
@dataclass
class GrowthCertificate:
    c: float
    C: float
    n_samples: int
    max_violation: float
    stress_violation: float = 0.0
    tol: float = 1e-9

    @property
    def ok(self) -> bool:
        return self.c > 0 and np.isfinite(self.C) and max(self.max_violation, self.stress_violation) <= self.tol


def window_sampler(F: CostFunction, mass_max=10.0, flux_max=10.0, zero_prob=0.1):
    """Random windows of radius R with masses in [0, mass_max] and fluxes in [-flux_max, flux_max]."""
    g = F.graph
    r = F.window_radius()
    shape = (2 * r + 1,) * g.d

    def sample(rng):
        m = rng.uniform(0, mass_max, size=shape + (g.n_fibers,))
        m[rng.random(m.shape) < zero_prob] = 0.0
        J = rng.uniform(-flux_max, flux_max, size=shape + (g.n_edges,))
        return m, J

    return sample


def check_growth(F: CostFunction, sampler=None, n_samples=1000, c=None, C=None, seed=0,
                 stress=(10.0, 100.0), tol=1e-9) -> GrowthCertificate:
    """Empirical check (or fit) of F >= c sum|J| - C(1 + sum m).

    Without ``c`` the slope is fitted as half the smallest ratio
    (F + 1 + sum m) / sum|J|; without ``C`` the intercept is the largest
    per-sample ratio (c sum|J| - F) / (1 + sum m).  The certificate is then
    re-checked on the same samples with fluxes scaled by ``stress``.
    """
    rng = np.random.default_rng(seed)
    sampler = sampler or window_sampler(F)
    A, B, V, samples = [], [], [], []
    for _ in range(n_samples):
        m, J = sampler(rng)
        a, b = F.flux_mass_window_sums(m, J)
        A.append(a)
        B.append(1.0 + b)
        V.append(F.evaluate(m, J))
        samples.append((m, J))
    A, B, V = map(np.array, (A, B, V))
    fin = np.isfinite(V)
    if c is None:
        pos = fin & (A > 0)
        c = 0.5 * float(np.min((V[pos] + B[pos]) / A[pos])) if np.any(pos) else 1.0
    if C is None:
        C = max(0.0, float(np.max((c * A[fin] - V[fin]) / B[fin]))) if np.any(fin) else 0.0
    viol = c * A - C * B - V
    max_v = float(np.max(np.where(fin, viol, -np.inf))) if n_samples else -np.inf
    stress_v = -np.inf
    for k in stress:
        for (m, J), b in zip(samples[: max(1, n_samples // 10)], B):
            a, _ = F.flux_mass_window_sums(m, k * J)
            val = F.evaluate(m, k * J)
            if np.isfinite(val):
                stress_v = max(stress_v, c * a - C * b - val)
    return GrowthCertificate(float(c), float(C), int(n_samples), max_v, float(stress_v), tol)


@dataclass
class SuperlinearReport:
    C: float
    n_samples: int
    max_violation: float
    worst_sample: int


def check_superlinear(F: CostFunction, theta: Callable, C: float, sampler=None, n_samples=1000, seed=0) -> SuperlinearReport:
    """Max over samples of (m0+1) theta(J0/(m0+1)) - C(m0+1) - F(m, J)."""
    rng = np.random.default_rng(seed)
    sampler = sampler or window_sampler(F)
    worst, where = -np.inf, -1
    for k in range(n_samples):
        m, J = sampler(rng)
        J0, m0 = F.flux_mass_window_sums(m, J)
        val = F.evaluate(m, J)
        if not np.isfinite(val):
            continue
        v = (m0 + 1) * theta(J0 / (m0 + 1)) - C * (m0 + 1) - val
        if v > worst:
            worst, where = float(v), k
    return SuperlinearReport(float(C), int(n_samples), worst, where)


def midpoint_convexity_violation(fun, pairs) -> float:
    worst = -np.inf
    for a, b in pairs:
        fa, fb = fun(a), fun(b)
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        fm = fun(tuple(0.5 * (np.asarray(x) + np.asarray(y)) for x, y in zip(a, b)))
        worst = max(worst, fm - 0.5 * (fa + fb))
    return float(worst)


# --------------------------------------------------------------------- I/O
def cost_from_dict(graph: PeriodicGraph, data: dict) -> CostFunction:
    """Build a cost from its configuration mapping (see README)."""
    kind = data.get("kind", "wp_mean")
    ref = data.get("reference", {})
    rm, rJ = ref.get("m"), ref.get("J")
    if kind in ("wp_mean", "wp"):
        mean = data.get("mean", "arithmetic")
        if mean == "minimum" and "tie_weight" in data:
            mean = MinimumMean(float(data["tie_weight"]))
        return WpMeanCost(graph, p=float(data.get("p", 2.0)), mean=mean, weights=data.get("weights"),
                          reference_m=rm, reference_J=rJ)
    if kind == "power_edge":
        return PowerEdgeCost(graph, p=float(data.get("p", 2.0)), alpha=data.get("alpha"),
                             reference_m=rm, reference_J=rJ)
    if kind == "table":
        return TableCost(graph, data["terms"], reference_m=rm, reference_J=rJ)
    if kind == "zero":
        return ZeroCost(graph, rm, rJ)
    raise CostDomainError(f"unknown cost kind {kind!r}")


def cost_to_dict(F: CostFunction) -> dict:
    ref = {"m": F.reference_m.tolist(), "J": F.reference_J.tolist()}
    if isinstance(F, WpMeanCost):
        out = {"kind": "wp_mean", "p": F.p, "mean": F.mean.name,
               "weights": np.stack([F.q_fwd, F.q_bwd], axis=1).tolist()}
    elif isinstance(F, PowerEdgeCost):
        out = {"kind": "power_edge", "p": F.p, "alpha": F.alpha.tolist()}
    elif isinstance(F, TableCost):
        out = {"kind": "table", "terms": [
            {"weight": w, "p": p, "flux": [[list(o), s, c] for o, s, c in fl], "mass": [[list(o), v, c] for o, v, c in ms]}
            for w, p, fl, ms in F.terms]}
    elif isinstance(F, ZeroCost):
        out = {"kind": "zero"}
    else:
        raise CostDomainError(f"cannot serialise {type(F).__name__}")
    out["reference"] = ref
    return out


def load_cost(graph: PeriodicGraph, path) -> CostFunction:
    with open(path) as fh:
        return cost_from_dict(graph, json.load(fh))
