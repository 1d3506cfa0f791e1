"""Regularisation operators on discrete paths.

* ``tilt_energy`` (R_delta): convex combination with the eps-scaled reference pair.
* ``smooth_space`` (S_lambda): convolution with the discretised torus heat kernel.
* ``smooth_time`` (T_tau): moving time averages on a shrunk interval.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, erfc

from ..costs import CostFunction, reference_torus_fields
from ..graph import RescaledGraph
from .path import DiscretePath


class RegularisationDomainError(ValueError):
    pass


# ------------------------------------------------------------------ R_delta
def tilt_energy(rg: RescaledGraph, m, J, delta: float, F: CostFunction | None = None, reference=None):
    """R_delta (m, J) = (1 - delta)(m, J) + delta (eps^d m°, eps^(d-1) J°).

    The reference pair is taken from ``F`` unless ``reference = (m°, J°)`` on one cell is given.
    """
    if not 0.0 < delta < 1.0:
        raise RegularisationDomainError("delta must lie in (0, 1)")
    if reference is None:
        if F is None:
            raise ValueError("pass a cost or an explicit reference pair")
        m_ref, J_ref = reference_torus_fields(F, rg)
    else:
        m0, J0 = rg.lift(reference[0], reference[1])
        m_ref, J_ref = rg.eps ** rg.d * m0, rg.eps ** (rg.d - 1) * J0
    m = np.asarray(m, dtype=float)
    J = np.asarray(J, dtype=float)
    return (1 - delta) * m + delta * m_ref, (1 - delta) * J + delta * J_ref


def tilt_path(path: DiscretePath, delta: float, F: CostFunction) -> DiscretePath:
    pairs = [tilt_energy(path.rg, path.masses[k], path.fluxes[min(k, path.K - 1)], delta, F) for k in range(path.K + 1)]
    masses = np.stack([p[0] for p in pairs])
    fluxes = np.stack([p[1] for p in pairs[: path.K]])
    return DiscretePath(path.rg, masses, fluxes, path.interval)


# ----------------------------------------------------------------- S_lambda
def heat_kernel_1d(N: int, lam: float) -> np.ndarray:
    """Cube integrals H(z), z = 0..N-1, of the periodised 1D heat kernel at time lam.

    The Gaussian has variance 2 lam; images |n| <= 6 sqrt(lam) + 1 are summed
    and the result is renormalised to total mass 1.
    """
    if not lam > 0:
        raise RegularisationDomainError("lambda must be positive")
    eps = 1.0 / N
    n_img = int(math.ceil(6.0 * math.sqrt(lam) + 1.0))
    z = np.arange(N)
    z = np.where(z > N // 2, z - N, z).astype(float)  # centred representatives
    s = 2.0 * math.sqrt(lam)

    def interval_mass(a, b):
        # Gaussian mass of [a, b]; tails use erfc differences to avoid cancellation
        a, b = a / s, b / s
        right = 0.5 * (erfc(a) - erfc(b))
        left = 0.5 * (erfc(-b) - erfc(-a))
        mid = 0.5 * (erf(b) - erf(a))
        return np.where(a > 0, right, np.where(b < 0, left, mid))

    H = np.zeros(N)
    for n in range(-n_img, n_img + 1):
        H += interval_mass((z - 0.5) * eps + n, (z + 0.5) * eps + n)
    H = np.maximum(H, 0.0)
    return H / H.sum()


def heat_kernel(rg: RescaledGraph, lam: float) -> np.ndarray:
    """d-dimensional kernel H(z) = prod_i H_1(z_i) on the cells (flat, cell order)."""
    H1 = heat_kernel_1d(rg.N, lam)
    H = np.ones(rg.n_cells)
    for i in range(rg.d):
        H = H * H1[rg.cells[:, i]]
    return H


def _convolve(rg: RescaledGraph, field_values, H1) -> np.ndarray:
    """sum_z H(z) (sigma^z f), separable along the axes."""
    f = np.asarray(field_values, dtype=float)
    k = f.shape[-1]
    grid = f.reshape(rg.shape + (k,))
    for ax in range(rg.d):
        acc = np.zeros_like(grid)
        for z in np.nonzero(H1)[0]:
            acc += H1[z] * np.roll(grid, -int(z), axis=ax)
        grid = acc
    return grid.reshape(f.shape)


def smooth_space(rg: RescaledGraph, m, J, lam: float):
    """(S_lambda m, S_lambda J)."""
    H1 = heat_kernel_1d(rg.N, lam)
    return _convolve(rg, m, H1), _convolve(rg, J, H1)


def smooth_space_path(path: DiscretePath, lam: float) -> DiscretePath:
    H1 = heat_kernel_1d(path.rg.N, lam)
    masses = np.stack([_convolve(path.rg, m, H1) for m in path.masses])
    fluxes = np.stack([_convolve(path.rg, J, H1) for J in path.fluxes])
    return DiscretePath(path.rg, masses, fluxes, path.interval)


def heat_kernel_floor(rg: RescaledGraph, lam: float) -> float:
    """c_lambda = min_z H(z) / eps^d.

    For every fiber v, min_z (S_lambda m)(z, v) >= c_lambda eps^d sum_z m(z, v).
    """
    return float(heat_kernel(rg, lam).min() / rg.eps ** rg.d)


# ------------------------------------------------------------------- T_tau
def time_window_weights(r: int) -> np.ndarray:
    """Weights (1/2r)[1/2, 1, ..., 1, 1/2] of length 2r + 1."""
    w = np.ones(2 * r + 1)
    w[0] = w[-1] = 0.5
    return w / (2 * r)


def smooth_time(path: DiscretePath, tau: float) -> DiscretePath:
    """T_tau: averages over [t - tau, t + tau] of a piecewise-linear mass / piecewise-constant flux path.

    Masses at the new nodes t_k (k = r..K-r) are the exact window averages of
    the linear interpolant; fluxes are the exact interval averages of the
    averaged flux.  The result lives on [t_0 + tau, t_K - tau] and satisfies
    the discrete continuity equation whenever the input does.
    """
    length = path.interval[1] - path.interval[0]
    if not 0.0 < tau < length / 2:
        raise RegularisationDomainError("tau must lie in (0, |I|/2)")
    ratio = tau / path.dt
    r = int(round(ratio))
    if r < 1 or abs(ratio - r) > 1e-9 * max(1.0, ratio):
        raise RegularisationDomainError(f"tau = {tau} is not a positive multiple of dt = {path.dt}")
    K = path.K
    if 2 * r >= K:
        raise RegularisationDomainError("tau must be smaller than |I|/2")
    w = time_window_weights(r)
    masses = np.stack([np.tensordot(w, path.masses[k - r: k + r + 1], axes=1) for k in range(r, K - r + 1)])
    fluxes = np.stack([np.tensordot(w, path.fluxes[k - r: k + r + 1], axes=1) for k in range(r, K - r)])
    interval = (path.interval[0] + r * path.dt, path.interval[1] - r * path.dt)
    return DiscretePath(path.rg, masses, fluxes, interval)


def time_lipschitz(path: DiscretePath) -> float:
    """max_k ||(m_{k+1} - m_k) / dt||_inf."""
    return float(np.abs(np.diff(path.masses, axis=0)).max() / path.dt)
