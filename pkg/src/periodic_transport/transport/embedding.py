"""Embeddings of discrete masses and fluxes into measures on the unit torus.

* ``embed_density``: the mass of vertex ``x`` is spread uniformly over the
  cube ``Q_eps^{x_z}`` of side eps; stored as per-cube masses.
* ``embed_flux``: each geometric edge ``(x, y)`` contributes the vector
  ``eps^(1-d) J(x, y) (y_z - x_z)`` times the measure swept by the cube
  moving from ``Q^{x_z}`` to ``Q^{y_z}``, i.e. ``int_0^1 L|Q^{(1-s)x_z + s y_z} ds``.

The embedded flux has a piecewise-polynomial (not cube-wise constant)
density, so it is kept at edge level; cube integrals on any refinement of
the eps-grid are computed exactly by Gauss-Legendre quadrature on the pieces
between breakpoints of the overlap functions.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import lcm

import numpy as np

from ..graph import RescaledGraph


@dataclass
class TorusMeasure:
    """Cube-wise constant measure on the torus, stored as cube masses of shape (N,)*d."""

    N: int
    masses: np.ndarray

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        if self.masses.shape != (self.N,) * self.masses.ndim or self.masses.ndim < 1:
            raise ValueError(f"masses must have shape (N,)*d with N={self.N}")

    @property
    def d(self) -> int:
        return self.masses.ndim

    @property
    def eps(self) -> float:
        return 1.0 / self.N

    @property
    def density(self) -> np.ndarray:
        return self.masses / self.eps ** self.d

    def total(self) -> float:
        return float(self.masses.sum())

    def same_grid(self, other: "TorusMeasure") -> bool:
        return self.N == other.N and self.d == other.d

    def __sub__(self, other):
        return TorusMeasure(self.N, self.masses - other.masses)

    def __add__(self, other):
        return TorusMeasure(self.N, self.masses + other.masses)

    def __mul__(self, c):
        return TorusMeasure(self.N, float(c) * self.masses)

    __rmul__ = __mul__

    def integrate(self, psi_cube_integrals: np.ndarray) -> float:
        """int psi d mu given the cube integrals of psi (shape (N,)*d)."""
        return float(np.sum(self.density * psi_cube_integrals))


def embed_density(rg: RescaledGraph, m) -> TorusMeasure:
    m = np.asarray(m, dtype=float).reshape(rg.mass_shape())
    return TorusMeasure(rg.N, m.sum(axis=1).reshape(rg.shape))


@dataclass
class FluxMeasure:
    """Vector measure sum_e w_e int_0^1 L|Q(c_e + s dz_e) ds on the torus."""

    N: int
    d: int
    base: np.ndarray  # (E, d) integer cube coordinates of the edge tails
    dz: np.ndarray  # (E, d) integer displacements
    weight: np.ndarray  # (E, d) vectors eps^(1-d) J dz

    @property
    def eps(self) -> float:
        return 1.0 / self.N

    def tv_upper(self) -> float:
        """sum_e |w_e| eps^d >= |nu|(T^d) (triangle inequality)."""
        return float(np.linalg.norm(self.weight, axis=1).sum() * self.eps ** self.d)

    def total(self) -> np.ndarray:
        """nu(T^d) as a vector."""
        return self.weight.sum(axis=0) * self.eps ** self.d

    def cube_integrals(self, refine: int = 1) -> np.ndarray:
        """Exact nu(q) for every sub-cube q of side eps/refine: shape (N*refine,)*d + (d,)."""
        N, d, r = self.N, self.d, int(refine)
        M = N * r
        out = np.zeros((M,) * d + (d,))
        nodes, wts = np.polynomial.legendre.leggauss(max(2, d + 1))
        for e in range(len(self.base)):
            if not np.any(self.weight[e]):
                continue
            L = lcm(*[abs(int(t)) for t in self.dz[e] if t != 0]) if np.any(self.dz[e]) else 1
            n_pieces = r * L
            edges = np.linspace(0.0, 1.0, n_pieces + 1)
            a, b = edges[:-1], edges[1:]
            s = (0.5 * (b - a)[:, None] * (nodes[None, :] + 1) + a[:, None]).ravel()
            w = np.repeat(0.5 * (b - a), len(nodes)) * np.tile(wts, n_pieces)
            # per-axis overlap of [p, p+1) (lattice units) with sub-intervals [k/r, (k+1)/r)
            per_axis = [_overlap_1d(self.base[e, i] + s * self.dz[e, i], r, N) for i in range(d)]
            scal = _outer_weighted(per_axis, w)  # int_0^1 |Q(s) n q| ds in lattice units
            out += scal[..., None] * self.weight[e]
        return out * self.eps ** d

    def tv_lower(self, refine: int = 4) -> float:
        """sum over sub-cubes |nu(q)| <= |nu|(T^d); increases to it under refinement."""
        return float(np.linalg.norm(self.cube_integrals(refine), axis=-1).sum())

    def integrate_gradient(self, cube_grad_integrals) -> float:
        """int grad(psi) . d nu with ``cube_grad_integrals(p)`` returning, for cube
        positions ``p`` (shape (n, d), lattice units, real-valued), the integrals
        of grad psi over the cubes ``eps (p + [0,1)^d)`` (shape (n, d))."""
        nodes, wts = np.polynomial.legendre.leggauss(24)
        s = 0.5 * (nodes + 1)
        w = 0.5 * wts
        total = 0.0
        for e in range(len(self.base)):
            p = self.base[e][None, :] + s[:, None] * self.dz[e][None, :]
            G = cube_grad_integrals(p)  # (n, d)
            total += float(np.sum(w[:, None] * G * self.weight[e][None, :]))
        return total


def _overlap_1d(p: np.ndarray, r: int, N: int) -> np.ndarray:
    """Lengths (lattice units) of [p, p+1) n [k/r, (k+1)/r) on the circle of length N; shape (len(p), N r)."""
    p = np.mod(np.asarray(p, dtype=float), N)
    k = np.arange(N * r)
    lo, hi = k / r, (k + 1) / r
    out = np.zeros((p.size, N * r))
    for shift in (-N, 0, N):
        a = p[:, None] + shift
        out += np.clip(np.minimum(a + 1, hi[None, :]) - np.maximum(a, lo[None, :]), 0.0, None)
    return out


def _outer_weighted(per_axis, w) -> np.ndarray:
    """sum_q w_q prod_i per_axis[i][q, k_i] as a d-dimensional array."""
    d = len(per_axis)
    letters = "abcdefgh"[:d]
    expr = ",".join(f"q{c}" for c in letters) + ",q->" + letters
    return np.einsum(expr, *per_axis, w)


def embed_flux(rg: RescaledGraph, J) -> FluxMeasure:
    J = np.asarray(J, dtype=float).reshape(rg.flux_shape())
    g = rg.base
    d = rg.d
    base = np.repeat(rg.cells, g.n_edges, axis=0)
    dz = np.tile(g.dz, (rg.n_cells, 1))
    weight = (rg.eps ** (1 - d)) * J.reshape(-1)[:, None] * dz
    return FluxMeasure(rg.N, d, base, dz, weight)


def flux_tv_bound(rg: RescaledGraph, J) -> float:
    """(eps R0 sqrt(d) / 2) sum over oriented edges |J| (each stencil edge counted twice)."""
    J = np.asarray(J, dtype=float)
    return float(rg.eps * rg.base.R0 * np.sqrt(rg.d) / 2 * 2 * np.abs(J).sum())


# ------------------------------------------------------------ weak CE test
@dataclass
class TrigTestFunction:
    """phi(t, u) = a(t) prod_i cos(2 pi k_i u_i + theta_i), a(t) = cos(omega t + beta)."""

    k: np.ndarray
    theta: np.ndarray
    omega: float
    beta: float

    @classmethod
    def random(cls, rng, d, kmax=3):
        return cls(rng.integers(-kmax, kmax + 1, size=d), rng.uniform(0, 2 * np.pi, size=d),
                   float(rng.uniform(0, 2 * np.pi)), float(rng.uniform(0, 2 * np.pi)))

    def a(self, t):
        return np.cos(self.omega * t + self.beta)

    def da(self, t):
        return -self.omega * np.sin(self.omega * t + self.beta)

    def _prim(self, i, x):
        k = self.k[i]
        if k == 0:
            return x * np.cos(self.theta[i])
        return np.sin(2 * np.pi * k * x + self.theta[i]) / (2 * np.pi * k)

    def _val(self, i, x):
        return np.cos(2 * np.pi * self.k[i] * x + self.theta[i])

    def cube_integrals(self, lo: np.ndarray, h: float) -> np.ndarray:
        """int of psi over cubes lo + [0, h)^d (physical units); lo shape (n, d)."""
        out = np.ones(len(lo))
        for i in range(lo.shape[1]):
            out *= self._prim(i, lo[:, i] + h) - self._prim(i, lo[:, i])
        return out

    def cube_grad_integrals(self, lo: np.ndarray, h: float) -> np.ndarray:
        n, d = lo.shape
        one = np.stack([self._prim(i, lo[:, i] + h) - self._prim(i, lo[:, i]) for i in range(d)], axis=1)
        der = np.stack([self._val(i, lo[:, i] + h) - self._val(i, lo[:, i]) for i in range(d)], axis=1)
        out = np.empty((n, d))
        for i in range(d):
            prod = der[:, i].copy()
            for k in range(d):
                if k != i:
                    prod *= one[:, k]
            out[:, i] = prod
        return out


def weak_ce_residual(path, phi: TrigTestFunction, n_gauss: int = 12) -> float:
    """|int phi_T d mu_T - int phi_0 d mu_0 - int int (d_t phi d mu_t + grad phi . d nu_t) dt|
    for the embedded path, with masses linear and fluxes constant between nodes."""
    rg = path.rg
    eps, d = rg.eps, rg.d
    lo = rg.cells * eps
    psi = phi.cube_integrals(lo, eps)  # per cell
    mu_psi = np.array([np.sum(path.masses[k].sum(axis=1) * psi) / eps ** d for k in range(path.K + 1)])
    nodes, wts = np.polynomial.legendre.leggauss(n_gauss)
    t = path.times
    lhs = phi.a(t[-1]) * mu_psi[-1] - phi.a(t[0]) * mu_psi[0]
    rhs = 0.0
    for k in range(path.K):
        a, b = t[k], t[k + 1]
        tq = 0.5 * (b - a) * (nodes + 1) + a
        wq = 0.5 * (b - a) * wts
        theta = (tq - a) / (b - a)
        mu_t = (1 - theta) * mu_psi[k] + theta * mu_psi[k + 1]
        rhs += np.sum(wq * phi.da(tq) * mu_t)
        nu = embed_flux(rg, path.fluxes[k])
        g = nu.integrate_gradient(lambda p: phi.cube_grad_integrals(p * eps, eps))
        rhs += np.sum(wq * phi.a(tq)) * g
    return float(abs(lhs - rhs))
