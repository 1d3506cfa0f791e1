"""Epsilon sweeps: discrete minimal actions against a continuum benchmark.

The benchmark is the action ``continuum_action_reference`` of the
displacement interpolation between the two boundary densities on the circle,
evaluated with a supplied ``f_hom``.  For ``f_hom(rho, j) = |j|^2 / rho``
this is the continuum minimal action (squared W2 distance).
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..costs import CostFunction
from ..graph import PeriodicGraph
from .continuum import BumpDensity, circle_geodesic, continuum_action_reference, discretise_density
from .minimal import minimal_action


@dataclass
class SweepRow:
    eps: Fraction
    K: int
    value: float
    reference: float
    relative_gap: float
    converged: bool
    iterations: int
    ce_residual: float
    runtime: float


@dataclass
class SweepResult:
    rows: list
    reference: float
    reference_grid: tuple

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r.relative_gap for r in self.rows])

    def trend(self) -> str:
        """'n/a' for a single eps, otherwise whether the relative gap strictly decreases."""
        if len(self.rows) < 2:
            return "n/a"
        return "strictly decreasing" if np.all(np.diff(self.gaps) < 0) else "not decreasing"

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)


def parse_eps(value) -> Fraction:
    """eps as a Fraction 1/N; accepts '1/8', 0.125, or Fraction."""
    f = Fraction(str(value)) if not isinstance(value, Fraction) else value
    f = f.limit_denominator(1 << 20)
    if f <= 0 or f.numerator != 1:
        raise ValueError(f"eps = {value} is not the reciprocal of a positive integer")
    return f


def epsilon_sweep(graph: PeriodicGraph, F: CostFunction, rho0: BumpDensity, rho1: BumpDensity, eps_list, K: int,
                  f_hom, tol: float = 1e-12, rule: str = "trapezoid", reference_grid=(256, 128),
                  threads: int = 1, max_iter: int = 20000) -> SweepResult:
    if graph.d != 1:
        raise ValueError("epsilon sweeps use boundary densities on the circle (d = 1)")
    eps_list = [parse_eps(e) for e in eps_list]
    if not eps_list:
        raise ValueError("eps list is empty")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    geo = circle_geodesic(rho0, rho1)
    rho, j = geo.fields(*reference_grid)
    ref = continuum_action_reference(rho, j, f_hom).value

    def run(eps):
        t0 = time.perf_counter()
        rg = graph.rescaled(eps.denominator)
        m0 = discretise_density(rg, rho0, F.reference_m)
        m1 = discretise_density(rg, rho1, F.reference_m)
        res = minimal_action(rg, F, m0, m1, K, tol=tol, rule=rule, max_iter=max_iter)
        gap = abs(res.value - ref) / abs(ref) if ref != 0 else abs(res.value)
        return SweepRow(eps, K, res.value, ref, gap, res.converged, res.iterations, res.ce_residual,
                        time.perf_counter() - t0)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(run, eps_list))
    else:
        rows = [run(e) for e in eps_list]
    return SweepResult(rows, ref, tuple(reference_grid))
