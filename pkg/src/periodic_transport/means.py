"""Concave, 1-homogeneous means Lambda(a, b) with Lambda(1, 1) = 1.

Every mean is extended continuously to the boundary of the quadrant.  The
``grad`` methods return (super)gradients; at points where a partial
derivative blows up (e.g. the geometric mean with one argument zero) the
value ``inf`` is returned.
"""
from __future__ import annotations

import numpy as np


class Mean:
    name = "mean"

    def __call__(self, a, b):
        raise NotImplementedError

    def grad(self, a, b):
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class ArithmeticMean(Mean):
    name = "arithmetic"

    def __call__(self, a, b):
        return 0.5 * (np.asarray(a, dtype=float) + b)

    def grad(self, a, b):
        h = np.full(np.broadcast(a, b).shape, 0.5)
        return h, h.copy()


class GeometricMean(Mean):
    name = "geometric"

    def __call__(self, a, b):
        return np.sqrt(np.asarray(a, dtype=float) * b)

    def grad(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            ga = np.where(a > 0, 0.5 * np.sqrt(b / np.where(a > 0, a, 1.0)), np.where(b > 0, np.inf, 0.5))
            gb = np.where(b > 0, 0.5 * np.sqrt(a / np.where(b > 0, b, 1.0)), np.where(a > 0, np.inf, 0.5))
        return ga, gb


class HarmonicMean(Mean):
    name = "harmonic"

    def __call__(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        s = a + b
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s > 0, 2.0 * a * b / np.where(s > 0, s, 1.0), 0.0)

    def grad(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        s = a + b
        with np.errstate(divide="ignore", invalid="ignore"):
            s2 = np.where(s > 0, s * s, 1.0)
            ga = np.where(s > 0, 2.0 * b * b / s2, 0.5)
            gb = np.where(s > 0, 2.0 * a * a / s2, 0.5)
        return ga, gb


class LogarithmicMean(Mean):
    """(a - b) / (log a - log b), equal to a on the diagonal and 0 on the axes."""

    name = "logarithmic"

    @staticmethod
    def _phi(t):
        # (t - 1) / log t and its derivative, with a series near t = 1
        u = t - 1.0
        small = np.abs(u) < 1e-4
        with np.errstate(divide="ignore", invalid="ignore"):
            lt = np.log(np.where(small, 2.0, t))
            phi = np.where(small, 1 + u / 2 - u * u / 12 + u ** 3 / 24, u / lt)
            dphi = np.where(small, 0.5 - u / 6 + u * u / 8, (lt - u / np.where(small, 1.0, t)) / (lt * lt))
        return phi, dphi

    def __call__(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        pos = (a > 0) & (b > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(pos, a / np.where(pos, b, 1.0), 1.0)
        phi, _ = self._phi(t)
        return np.where(pos, b * phi, 0.0)

    def grad(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        pos = (a > 0) & (b > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(pos, a / np.where(pos, b, 1.0), 1.0)
        phi, dphi = self._phi(t)
        ga = np.where(pos, dphi, np.where(b > 0, np.inf, 0.5))
        gb = np.where(pos, phi - t * dphi, np.where(a > 0, np.inf, 0.5))
        return ga, gb


class MinimumMean(Mean):
    """min(a, b); at ties the supergradient ``(tie_weight, 1 - tie_weight)`` is selected."""

    name = "minimum"

    def __init__(self, tie_weight: float = 0.5):
        if not 0.0 <= tie_weight <= 1.0:
            raise ValueError("tie weight must lie in [0, 1]")
        self.tie_weight = float(tie_weight)

    def __call__(self, a, b):
        return np.minimum(np.asarray(a, dtype=float), b)

    def grad(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        ga = np.where(a < b, 1.0, np.where(a > b, 0.0, self.tie_weight))
        return ga, 1.0 - ga

    def supergradient(self, a, b, weight: float):
        """Any element ``(w, 1-w)`` of the superdifferential at a tie."""
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        ga = np.where(a < b, 1.0, np.where(a > b, 0.0, weight))
        return ga, 1.0 - ga


MEANS = {
    "arithmetic": ArithmeticMean,
    "geometric": GeometricMean,
    "harmonic": HarmonicMean,
    "logarithmic": LogarithmicMean,
    "minimum": MinimumMean,
}


def get_mean(name: str) -> Mean:
    try:
        return MEANS[name]()
    except KeyError:
        raise ValueError(f"unknown mean {name!r}; choose from {sorted(MEANS)}") from None
