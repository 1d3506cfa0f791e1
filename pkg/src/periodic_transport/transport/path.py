"""Time-discretised paths (m_k, J_k) on a rescaled graph and their action.

Masses live at the nodes ``t_0 < ... < t_K`` of a uniform grid and fluxes on
the intervals ``[t_k, t_{k+1})``; the discrete continuity equation reads

    (m_{k+1} - m_k) / dt + dive J_k = 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..costs import CostFunction
from ..graph import RescaledGraph, graph_from_dict, graph_to_dict

RULES = ("trapezoid", "midpoint")


@dataclass
class DiscretePath:
    rg: RescaledGraph
    masses: np.ndarray  # (K + 1, n_cells, |V|)
    fluxes: np.ndarray  # (K, n_cells, S)
    interval: tuple = (0.0, 1.0)

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        self.fluxes = np.asarray(self.fluxes, dtype=float)
        K = self.fluxes.shape[0]
        if K < 1:
            raise ValueError("a path needs at least one time step")
        if self.masses.shape != (K + 1,) + self.rg.mass_shape():
            raise ValueError(f"masses have shape {self.masses.shape}, expected {(K + 1,) + self.rg.mass_shape()}")
        if self.fluxes.shape != (K,) + self.rg.flux_shape():
            raise ValueError(f"fluxes have shape {self.fluxes.shape}, expected {(K,) + self.rg.flux_shape()}")
        a, b = map(float, self.interval)
        if not b > a:
            raise ValueError("interval must have positive length")
        self.interval = (a, b)

    @property
    def K(self) -> int:
        return self.fluxes.shape[0]

    @property
    def dt(self) -> float:
        return (self.interval[1] - self.interval[0]) / self.K

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.interval[0], self.interval[1], self.K + 1)

    def total_mass(self) -> np.ndarray:
        return self.masses.reshape(self.K + 1, -1).sum(axis=1)

    @classmethod
    def static(cls, rg, m, K=1, interval=(0.0, 1.0)):
        m = np.asarray(m, dtype=float).reshape(rg.mass_shape())
        return cls(rg, np.repeat(m[None], K + 1, axis=0), np.zeros((K,) + rg.flux_shape()), interval)

    @classmethod
    def from_fluxes(cls, rg, m0, fluxes, interval=(0.0, 1.0)):
        """Integrate the continuity equation forward from ``m0``."""
        fluxes = np.asarray(fluxes, dtype=float)
        K = fluxes.shape[0]
        dt = (interval[1] - interval[0]) / K
        div = np.stack([rg.divergence(J) for J in fluxes])
        m = np.empty((K + 1,) + rg.mass_shape())
        m[0] = m0
        m[1:] = np.asarray(m0, float)[None] - dt * np.cumsum(div, axis=0)
        return cls(rg, m, fluxes, interval)

    # ------------------------------------------------------------ I/O
    def to_dict(self) -> dict:
        return {"eps": self.rg.eps, "N": self.rg.N, "K": self.K, "interval": list(self.interval),
                "graph": graph_to_dict(self.rg.base), "masses": self.masses.tolist(), "fluxes": self.fluxes.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DiscretePath":
        g, _ = graph_from_dict(data["graph"])
        rg = RescaledGraph(g, int(data["N"]))
        return cls(rg, np.array(data["masses"]), np.array(data["fluxes"]), tuple(data["interval"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DiscretePath":
        return cls.from_dict(json.loads(text))


@dataclass
class CEReport:
    residual: float  # max_k max_x |r_k(x)|
    per_step: np.ndarray
    mass_drift: float  # max_k |m_k(X) - m_0(X)|


def ce_residual(path: DiscretePath) -> CEReport:
    rg = path.rg
    r = np.stack([(path.masses[k + 1] - path.masses[k]) / path.dt + rg.divergence(path.fluxes[k])
                  for k in range(path.K)])
    per_step = np.abs(r).reshape(path.K, -1).max(axis=1)
    tm = path.total_mass()
    return CEReport(float(per_step.max()), per_step, float(np.abs(tm - tm[0]).max()))


def step_energies(path: DiscretePath, F: CostFunction, rule: str = "trapezoid") -> np.ndarray:
    """Per-interval time-averaged energy (the action is dt times their sum)."""
    rg = path.rg
    out = np.empty(path.K)
    for k in range(path.K):
        m0, m1, J = path.masses[k], path.masses[k + 1], path.fluxes[k]
        if rule == "trapezoid":
            out[k] = 0.5 * (F.energy_torus(rg, m0, J) + F.energy_torus(rg, m1, J))
        elif rule == "midpoint":
            out[k] = F.energy_torus(rg, 0.5 * (m0 + m1), J)
        else:
            raise ValueError(f"unknown time rule {rule!r}; choose from {RULES}")
    return out


def action(path: DiscretePath, F: CostFunction, rule: str = "trapezoid") -> float:
    """A = sum_k dt * E_k with E_k the time-averaged rescaled energy of step k.

    ``rule="trapezoid"``: E_k = (F_eps(m_k, J_k) + F_eps(m_{k+1}, J_k)) / 2;
    ``rule="midpoint"``:  E_k = F_eps((m_k + m_{k+1}) / 2, J_k).
    """
    return float(path.dt * np.sum(step_energies(path, F, rule)))


def action_lower_bound(F: CostFunction, path: DiscretePath, C: float) -> float:
    """-C (1 + (2R+1)^d mass) |I|, the a-priori lower bound for costs with growth constant C."""
    R = F.radius
    mass = float(path.total_mass().max())
    return -C * (1 + (2 * R + 1) ** path.rg.d * mass) * (path.interval[1] - path.interval[0])
