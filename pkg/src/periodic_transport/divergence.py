"""Constructive solvers of the divergence equation dive J = g.

Both solvers couple the positive and negative parts of ``g`` with the
north-west-corner rule over the fixed vertex ordering and route each coupled
pair of vertices along a precomputed path.  This gives

* ``dive J = g`` up to round-off,
* ``||J||_inf <= 1/2 ||g||_1`` (each unit path crosses an edge at most once,
  and the coupling transports ``1/2 ||g||_1`` in total),
* zero effective flux (periodic variant) or support close to the support of
  ``g`` (local variant).
"""
from __future__ import annotations

import numpy as np

from .graph import GraphError, PeriodicGraph, RescaledGraph, periodic_unit_flux


class InfeasibleError(ValueError):
    """Data violate a hard constraint (e.g. unequal masses)."""


def northwest_coupling(g: np.ndarray) -> list[tuple[int, int, float]]:
    """Greedy coupling of g_+ and g_- in index order.

    Returns triples ``(i, k, amount)`` with ``i`` a source (g > 0) and ``k`` a
    sink (g < 0); the row sums reproduce g_+ and the column sums g_-.
    """
    g = np.asarray(g, dtype=float).ravel()
    src = [(i, g[i]) for i in np.flatnonzero(g > 0)]
    snk = [(k, -g[k]) for k in np.flatnonzero(g < 0)]
    out = []
    a = b = 0
    ra = src[0][1] if src else 0.0
    rb = snk[0][1] if snk else 0.0
    while a < len(src) and b < len(snk):
        amt = min(ra, rb)
        out.append((int(src[a][0]), int(snk[b][0]), float(amt)))
        ra -= amt
        rb -= amt
        if ra <= 0.0:
            a += 1
            ra = src[a][1] if a < len(src) else 0.0
        if rb <= 0.0:
            b += 1
            rb = snk[b][1] if b < len(snk) else 0.0
    return out


def _balanced(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    norm = np.abs(g).sum()
    total = g.sum()
    roundoff = 4 * g.size * np.finfo(float).eps * (np.abs(g).max() if g.size else 0.0)
    if abs(total) > max(1e-12 * norm, roundoff):
        raise InfeasibleError(f"divergence data must have zero total mass (sum = {total:.3e})")
    if total == 0 or g.size == 0:
        return g.copy()
    # absorb the round-off residual in the largest entry
    out = g.copy()
    idx = np.argmax(np.abs(out))
    out.flat[idx] -= total
    return out


def solve_divergence_periodic(graph: PeriodicGraph, g) -> np.ndarray:
    """Periodic flux with dive J = g on the fiber and Eff(J) = 0."""
    g = _balanced(np.asarray(g, dtype=float).reshape(graph.n_fibers))
    J = np.zeros(graph.n_edges)
    if not np.any(g):
        return J
    paths = graph.fiber_paths
    for v, w, amt in northwest_coupling(g):
        J += amt * periodic_unit_flux(graph, paths[(v, w)])
    return J


class LocalRouter:
    """Routes unit fluxes between torus vertices along lattice staircases.

    Walks are assembled from the lattice paths ``(0, v0) -> (e_i, v0)`` and
    fiber connectors ``(0, v) <-> (0, v0)``, projected to the torus and
    loop-erased, so every edge carries at most one unit.
    """

    def __init__(self, rg: RescaledGraph):
        self.rg = rg
        g = rg.base
        g.require_connected()
        self.graph = g
        self.steps_plus = [p.steps for p in g.lattice_paths]
        self.steps_minus = [p.reversed(g).steps for p in g.lattice_paths]
        self.to_ref = {v: g.fiber_paths[(v, 0)].steps for v in range(1, g.n_fibers)}
        self.from_ref = {w: g.fiber_paths[(0, w)].steps for w in range(1, g.n_fibers)}
        self.dilation = self._dilation()

    def _dilation(self) -> float:
        g = self.graph
        ex = 0.0
        for i, p in enumerate(g.lattice_paths):
            e = np.zeros(g.d, dtype=int)
            e[i] = 1
            for cell, _ in p.vertices(g):
                c = np.array(cell)
                ex = max(ex, min(np.abs(c).max(), np.abs(c - e).max()))
        for p in g.fiber_paths.values():
            for cell, _ in p.vertices(g):
                ex = max(ex, float(np.abs(np.array(cell)).max()))
        return 1.0 + ex

    def _staircase(self, delta: np.ndarray) -> list[tuple[int, int]]:
        """Unit lattice moves following the segment from 0 to ``delta``."""
        events = []
        for i, n in enumerate(delta):
            k = abs(int(n))
            sgn = 1 if n > 0 else -1
            for t in range(k):
                events.append(((t + 0.5) / k, i, sgn))
        events.sort()
        return [(i, sgn) for _, i, sgn in events]

    def walk(self, x: tuple, y: tuple) -> list[tuple[int, int]]:
        """Steps of a (non-simple) walk on X from torus vertex x to torus vertex y."""
        rg = self.rg
        (cx, v), (cy, w) = x, y
        N = rg.N
        delta = (np.asarray(cy) - np.asarray(cx) + N // 2) % N - N // 2
        steps = []
        if v != 0:
            steps += list(self.to_ref[v])
        for i, sgn in self._staircase(delta):
            steps += list(self.steps_plus[i] if sgn > 0 else self.steps_minus[i])
        if w != 0:
            steps += list(self.from_ref[w])
        return steps

    def route(self, x: tuple, y: tuple) -> list[tuple[int, int, int]]:
        """Loop-erased torus path from x to y: list of ``(cell_index, s, sign)``."""
        rg, g = self.rg, self.graph
        steps = self.walk(x, y)
        cell = np.array(x[0], dtype=int) % rg.N
        fiber = int(x[1])
        verts = [(tuple(cell), fiber)]
        edges = []
        pos = {verts[0]: 0}
        for s, sign in steps:
            if sign > 0:
                tail_cell = cell
                cell = (cell + g.dz[s]) % rg.N
                fiber = int(g.heads[s])
            else:
                cell = (cell - g.dz[s]) % rg.N
                tail_cell = cell
                fiber = int(g.tails[s])
            key = (tuple(cell), fiber)
            if key in pos:
                k = pos[key]
                for old in verts[k + 1:]:
                    del pos[old]
                verts = verts[:k + 1]
                edges = edges[:k]
            else:
                edges.append((int(rg.cell_index(tail_cell)[0]), s, sign))
                pos[key] = len(verts)
                verts.append(key)
        if verts[-1] != (tuple(np.mod(y[0], rg.N)), int(y[1])):
            raise GraphError("routing failed to reach the target")
        return edges


def solve_divergence_local(rg: RescaledGraph, g, router: LocalRouter | None = None) -> np.ndarray:
    """Torus flux with dive J = g, ||J||_inf <= 1/2||g||_1 and local support.

    ``g`` has the torus mass layout ``(n_cells, |V|)``.  The support of the
    result lies within ``router.dilation`` cells (sup-norm) of the convex hull
    of the support of ``g`` whenever that hull does not wrap around the torus.
    """
    g = _balanced(np.asarray(g, dtype=float).reshape(rg.mass_shape()))
    J = rg.zeros_flux()
    if not np.any(g):
        return J
    router = router or LocalRouter(rg)
    nv = rg.n_fibers
    for a, b, amt in northwest_coupling(g.ravel()):
        x = (tuple(rg.cells[a // nv]), a % nv)
        y = (tuple(rg.cells[b // nv]), b % nv)
        for c, s, sign in router.route(x, y):
            J[c, s] += sign * amt
    return J
