"""Continuum reference quantities for epsilon sweeps.

* ``continuum_action_reference``: midpoint quadrature of a homogenised
  density ``f(rho, j)`` over a space-time grid.
* ``BumpDensity``: smooth probability densities on the circle with a
  positive floor (von Mises bump), with exact-to-quadrature cube masses.
* ``circle_geodesic``: the displacement interpolation between two densities
  on the circle, its squared W2 distance (via quantile functions and the
  optimal rotation of the cumulative distribution) and its Eulerian fields.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import i0e


# ------------------------------------------------------------ f_hom helpers
def power_closed_form(p: float = 2.0) -> Callable:
    """f(rho, j) = |j|_p^p / rho^(p-1), extended by 0 at (0, 0) and +inf at (0, j != 0)."""

    def f(rho, j):
        rho = np.asarray(rho, dtype=float)
        j = np.asarray(j, dtype=float)
        num = np.sum(np.abs(j) ** p, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(rho > 0, num / np.where(rho > 0, rho, 1.0) ** (p - 1), np.where(num > 0, np.inf, 0.0))
        return np.where(rho < 0, np.inf, val)

    f.vectorized = True
    return f


def cell_evaluator(graph, F, tol: float = 1e-10) -> Callable:
    """f_hom evaluated pointwise by the cell solver (scalar rho, vector j)."""
    from ..cell import solve_cell

    def f(rho, j):
        return solve_cell(graph, F, float(rho), np.asarray(j, dtype=float), tol=tol).value

    f.vectorized = False
    return f


@dataclass
class ContinuumReference:
    value: float
    location: tuple | None = None  # (time index, cell multi-index) of the first infinite node


def continuum_action_reference(rho, j, f_hom: Callable, interval=(0.0, 1.0)) -> ContinuumReference:
    """sum_k dt sum_x h^d f(rho[k, x], j[k, x]) with values at space-time cell midpoints.

    rho: shape (T,) + (n,)*d;  j: shape (T,) + (n,)*d + (d,).
    """
    rho = np.asarray(rho, dtype=float)
    j = np.asarray(j, dtype=float)
    T = rho.shape[0]
    d = rho.ndim - 1
    if j.shape != rho.shape + (d,):
        raise ValueError(f"flux has shape {j.shape}, expected {rho.shape + (d,)}")
    n = rho.shape[1]
    dt = (interval[1] - interval[0]) / T
    if getattr(f_hom, "vectorized", False):
        vals = np.asarray(f_hom(rho, j), dtype=float)
    else:
        vals = np.empty(rho.shape)
        for idx in np.ndindex(rho.shape):
            vals[idx] = f_hom(rho[idx], j[idx])
    bad = ~np.isfinite(vals) | (vals == np.inf)
    if np.any(bad):
        loc = tuple(int(i) for i in np.argwhere(bad)[0])
        return ContinuumReference(np.inf, (loc[0], loc[1:]))
    return ContinuumReference(float(dt * np.sum(vals) / n ** d))


# --------------------------------------------------------------- densities
@dataclass(frozen=True)
class BumpDensity:
    """rho(x) = floor + (1 - floor) exp(kappa (cos 2 pi (x - center) - 1)) / I0e(kappa) on [0, 1)."""

    center: float = 0.5
    kappa: float = 4.0
    floor: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.floor <= 1.0:
            raise ValueError("floor must lie in (0, 1]")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        bump = np.exp(self.kappa * (np.cos(2 * np.pi * (x - self.center)) - 1.0)) / i0e(self.kappa)
        return self.floor + (1.0 - self.floor) * bump

    def integrate(self, a, b, n_gauss: int = 20):
        """int_a^b rho for arrays of endpoints (Gauss-Legendre)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        x, w = np.polynomial.legendre.leggauss(n_gauss)
        h = 0.5 * (b - a)
        pts = (h[..., None] * (x + 1)) + a[..., None]
        return np.sum(self(pts) * w, axis=-1) * h

    def cube_masses(self, N: int) -> np.ndarray:
        edges = np.arange(N + 1) / N
        out = np.zeros(N)
        sub = 8  # sub-panels per cube
        for k in range(sub):
            a = edges[:-1] + k / (N * sub)
            out += self.integrate(a, a + 1.0 / (N * sub))
        return out

    def to_dict(self) -> dict:
        return {"center": self.center, "kappa": self.kappa, "floor": self.floor}


def discretise_density(rg, density: BumpDensity, reference_m=None) -> np.ndarray:
    """Cube masses split over the fibers in proportion to ``reference_m``; shape rg.mass_shape()."""
    if rg.d != 1:
        raise ValueError("bump densities are defined on the circle (d = 1)")
    w = np.ones(rg.n_fibers) if reference_m is None else np.asarray(reference_m, dtype=float)
    w = w / w.sum()
    return density.cube_masses(rg.N)[:, None] * w[None, :]


# ----------------------------------------------------------- circle W2
class _Quantile:
    """Lifted quantile function G(v) = F^{-1}(v mod 1) + floor(v) of a positive density."""

    def __init__(self, density: BumpDensity, n_panels: int = 1 << 14):
        self.density = density
        edges = np.linspace(0.0, 1.0, n_panels + 1)
        cdf = np.concatenate([[0.0], np.cumsum(density.integrate(edges[:-1], edges[1:], n_gauss=6))])
        self.total = cdf[-1]
        self.x = edges
        self.cdf = cdf / cdf[-1]

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        fl = np.floor(v)
        return np.interp(v - fl, self.cdf, self.x) + fl


@dataclass
class CircleGeodesic:
    w2sq: float
    theta: float
    u: np.ndarray  # quantile levels (midpoints)
    X0: np.ndarray
    X1: np.ndarray  # lifted, aligned with X0
    rho0: BumpDensity
    rho1: BumpDensity

    def fields(self, n_space: int, n_time: int):
        """(rho, j) at space-time midpoints: shapes (n_time, n_space) and (n_time, n_space, 1)."""
        xs = (np.arange(n_space) + 0.5) / n_space
        ts = (np.arange(n_time) + 0.5) / n_time
        v = self.X1 - self.X0
        inv0 = 1.0 / self.rho0(self.X0)
        inv1 = 1.0 / self.rho1(self.X1)
        u_ext = np.concatenate([self.u - 1, self.u, self.u + 1])
        rho = np.empty((n_time, n_space))
        j = np.empty((n_time, n_space, 1))
        for k, t in enumerate(ts):
            Xt = (1 - t) * self.X0 + t * self.X1
            X_ext = np.concatenate([Xt - 1, Xt, Xt + 1])
            base = np.floor(Xt[0])
            x_query = xs + base
            x_query = np.where(x_query < Xt[0], x_query + 1, x_query)
            uq = np.interp(x_query, X_ext, u_ext)
            uq = uq - np.floor(uq)
            dX = np.interp(uq, self.u, (1 - t) * inv0 + t * inv1, period=1.0)
            vq = np.interp(uq, self.u, v, period=1.0)
            rho[k] = 1.0 / dX
            j[k, :, 0] = rho[k] * vq
        return rho, j


def circle_geodesic(rho0: BumpDensity, rho1: BumpDensity, n_levels: int = 1 << 14) -> CircleGeodesic:
    """Optimal transport between two positive densities on the circle for the squared distance.

    W2^2 = min_theta int_0^1 |G_1(u + theta) - G_0(u)|^2 du with lifted quantile functions G_i;
    the cost is convex in theta, minimised by a scan followed by bounded Brent.
    """
    q0, q1 = _Quantile(rho0), _Quantile(rho1)
    u = (np.arange(n_levels) + 0.5) / n_levels
    X0 = q0(u)

    def cost(theta):
        return float(np.mean((q1(u + theta) - X0) ** 2))

    grid = np.linspace(-1.0, 1.0, 401)
    vals = np.array([cost(t) for t in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    theta = float(res.x)
    return CircleGeodesic(cost(theta), theta, u, X0, q1(u + theta), rho0, rho1)
