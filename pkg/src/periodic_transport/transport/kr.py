"""Bounded-Lipschitz (Kantorovich-Rubinstein) distance between cube measures.

    ||mu1 - mu2||_KR = sup { int psi d(mu1 - mu2) : |psi| <= 1, Lip(psi) <= 1 }.

The supremum is taken over functions that are constant on the cubes of the
eps-grid and 1-Lipschitz for the grid-path metric (steps of length eps
between axis neighbours, i.e. the l1 distance of cube centres).  For
equal-mass measures with the sup-bound inactive this is the grid
Wasserstein-1 distance.  The resulting linear program is solved with HiGHS.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .embedding import TorusMeasure


def _neighbour_pairs(N: int, d: int):
    idx = np.arange(N ** d).reshape((N,) * d)
    a, b = [], []
    for i in range(d):
        if N == 1:
            continue
        a.append(idx.ravel())
        b.append(np.roll(idx, -1, axis=i).ravel())
    if not a:
        return np.zeros(0, int), np.zeros(0, int)
    a, b = np.concatenate(a), np.concatenate(b)
    keep = a != b
    pairs = np.unique(np.sort(np.stack([a[keep], b[keep]], axis=1), axis=1), axis=0)
    return pairs[:, 0], pairs[:, 1]


def kr_distance(mu1: TorusMeasure, mu2: TorusMeasure, *, return_potential: bool = False):
    """Grid KR distance; optionally also the optimal test function (shape (N,)*d)."""
    if not mu1.same_grid(mu2):
        raise ValueError("measures live on different grids")
    N, d = mu1.N, mu1.d
    c = (mu1.masses - mu2.masses).ravel()
    n = c.size
    a, b = _neighbour_pairs(N, d)
    if len(a):
        rows = np.arange(len(a))
        D = sp.csr_matrix((np.r_[np.ones(len(a)), -np.ones(len(a))], (np.r_[rows, rows], np.r_[a, b])),
                          shape=(len(a), n))
        A_ub = sp.vstack([D, -D]).tocsr()
        b_ub = np.full(2 * len(a), mu1.eps)
    else:
        A_ub, b_ub = None, None
    res = linprog(-c, A_ub=A_ub, b_ub=b_ub, bounds=[(-1.0, 1.0)] * n, method="highs")
    if res.status != 0:
        raise RuntimeError(f"KR linear program failed: {res.message}")
    value = float(-res.fun)
    if return_potential:
        return value, res.x.reshape((N,) * d)
    return value


def kr_distance_paths(path_a, path_b) -> float:
    """max over nodes of the KR distance between embedded masses of two paths on the same grid."""
    from .embedding import embed_density
    if path_a.K != path_b.K:
        raise ValueError("paths have different numbers of time steps")
    return max(kr_distance(embed_density(path_a.rg, ma), embed_density(path_b.rg, mb))
               for ma, mb in zip(path_a.masses, path_b.masses))
