"""Z^d-periodic graphs, their rescaled torus versions, and edge fields.

A periodic graph is described by a finite fiber ``V`` and a stencil of edges
``(v, dz, w)`` meaning an edge from ``(0, v)`` to ``(dz, w)``; all translates by
integer vectors are edges as well.  Each unordered edge orbit is stored once,
in a canonical orientation, and identified by its stencil index ``s``.

Field layouts used throughout the package:

* periodic mass ``m``: array of shape ``(|V|,)``;
* periodic flux ``J``: array of shape ``(S,)``, ``J[s]`` is the flux along the
  stencil edge ``(0, v_s) -> (dz_s, w_s)`` (and all its translates);
* torus fields on the rescaled graph with ``n = N**d`` cells (C-order):
  masses ``(n, |V|)``, fluxes ``(n, S)`` where ``J[c, s]`` lives on the edge
  leaving cell ``c``;
* windows of radius ``r``: shaped arrays ``(2r+1,)*d + (|V|,)`` and
  ``(2r+1,)*d + (S,)`` centred at index ``r``.
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised for malformed or inadmissible graph descriptions."""


Vertex = tuple  # (cell tuple, fiber index)


def _canonical(v: int, dz: tuple, w: int) -> bool:
    if v != w:
        return v < w
    return dz > tuple(0 for _ in dz)


@dataclass(frozen=True)
class Path:
    """A path in the infinite graph.

    ``start`` is the initial vertex ``(cell, fiber)``; ``steps`` is a sequence
    of ``(s, sign)`` where ``sign=+1`` traverses stencil edge ``s`` forwards.
    Keeping stencil indices makes paths unambiguous on multigraphs.
    """

    start: tuple
    steps: tuple

    def vertices(self, graph: "PeriodicGraph") -> list:
        cell = np.array(self.start[0], dtype=int)
        fiber = int(self.start[1])
        out = [(tuple(int(c) for c in cell), fiber)]
        for s, sign in self.steps:
            if sign > 0:
                if fiber != graph.tails[s]:
                    raise GraphError(f"step {s} does not leave fiber {fiber}")
                cell = cell + graph.dz[s]
                fiber = int(graph.heads[s])
            else:
                if fiber != graph.heads[s]:
                    raise GraphError(f"reverse step {s} does not leave fiber {fiber}")
                cell = cell - graph.dz[s]
                fiber = int(graph.tails[s])
            out.append((tuple(int(c) for c in cell), fiber))
        return out

    def end(self, graph: "PeriodicGraph") -> tuple:
        return self.vertices(graph)[-1]

    def is_simple(self, graph: "PeriodicGraph") -> bool:
        verts = self.vertices(graph)
        return len(set(verts)) == len(verts)

    def reversed(self, graph: "PeriodicGraph") -> "Path":
        return Path(self.end(graph), tuple((s, -sign) for s, sign in reversed(self.steps)))


@dataclass
class ValidationReport:
    ok: bool
    R0: int
    max_degree: int
    connected: bool
    multi_edges: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [
            f"status: {'PASS' if self.ok else 'FAIL'}",
            f"R0: {self.R0}",
            f"max_degree: {self.max_degree}",
            f"connected: {self.connected}",
        ]
        out += [f"warning: {w}" for w in self.warnings]
        out += [f"error: {e}" for e in self.errors]
        return out


class PeriodicGraph:
    """Fundamental-cell description of a Z^d-periodic graph.

    Parameters
    ----------
    d : lattice dimension.
    labels : fiber labels (any hashable, kept for I/O).
    edges : iterable of ``(v, dz, w)`` with ``v, w`` labels.
    """

    def __init__(self, d: int, labels: Sequence, edges: Iterable):
        if d < 1:
            raise GraphError("dimension must be positive")
        self.d = int(d)
        self.labels = tuple(labels)
        if len(set(self.labels)) != len(self.labels):
            raise GraphError("duplicate fiber labels")
        if not self.labels:
            raise GraphError("empty fiber")
        index = {lab: i for i, lab in enumerate(self.labels)}
        tails, heads, dzs = [], [], []
        for e in edges:
            v, dz, w = e
            if v not in index or w not in index:
                raise GraphError(f"unknown fiber label in edge {e!r}")
            dz = tuple(int(x) for x in dz)
            if len(dz) != self.d:
                raise GraphError(f"offset {dz} has wrong dimension")
            vi, wi = index[v], index[w]
            if vi == wi and not any(dz):
                raise GraphError(f"self-loop at fiber {v!r}")
            if not _canonical(vi, dz, wi):
                vi, wi, dz = wi, vi, tuple(-x for x in dz)
            tails.append(vi)
            heads.append(wi)
            dzs.append(dz)
        if not tails:
            raise GraphError("graph has no edges")
        self.tails = np.array(tails, dtype=int)
        self.heads = np.array(heads, dtype=int)
        self.dz = np.array(dzs, dtype=int).reshape(len(tails), self.d)
        for a in (self.tails, self.heads, self.dz):
            a.setflags(write=False)
        self.n_fibers = len(self.labels)
        self.n_edges = len(tails)

    # ------------------------------------------------------------------ basics
    def __repr__(self) -> str:
        return f"PeriodicGraph(d={self.d}, |V|={self.n_fibers}, S={self.n_edges})"

    def fiber_index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise GraphError(f"unknown fiber {label!r}") from None

    @cached_property
    def R0(self) -> int:
        return int(np.abs(self.dz).max())

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.bincount(self.tails, minlength=self.n_fibers)
        deg = deg + np.bincount(self.heads, minlength=self.n_fibers)
        return deg

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    @property
    def n_oriented(self) -> int:
        """Number of oriented edges leaving the fundamental cell, |E^Q|."""
        return 2 * self.n_edges

    @cached_property
    def div_matrix(self) -> np.ndarray:
        """Matrix of J -> dive J on the fundamental cell (|V| x S)."""
        A = np.zeros((self.n_fibers, self.n_edges))
        np.add.at(A, (self.tails, np.arange(self.n_edges)), 1.0)
        np.add.at(A, (self.heads, np.arange(self.n_edges)), -1.0)
        return A

    def neighbors(self, vertex: tuple):
        """Yield ``(neighbor, s, sign)`` for all oriented edges leaving ``vertex``."""
        cell, v = vertex
        cell = np.asarray(cell, dtype=int)
        for s in range(self.n_edges):
            if self.tails[s] == v:
                yield (tuple(int(c) for c in cell + self.dz[s]), int(self.heads[s])), s, 1
            if self.heads[s] == v:
                yield (tuple(int(c) for c in cell - self.dz[s]), int(self.tails[s])), s, -1

    @cached_property
    def multi_edges(self) -> list:
        seen = {}
        dup = []
        for s in range(self.n_edges):
            key = (int(self.tails[s]), tuple(self.dz[s]), int(self.heads[s]))
            if key in seen:
                dup.append((seen[key], s))
            else:
                seen[key] = s
        return dup

    # ------------------------------------------------------------ connectivity
    def _lattice_connectivity(self) -> tuple[bool, str]:
        """Exact connectivity test of the infinite graph.

        The quotient graph must be connected and the cycle displacements of
        a spanning tree must generate Z^d.
        """
        pot = {0: np.zeros(self.d, dtype=int)}
        queue = deque([0])
        while queue:
            v = queue.popleft()
            for s in range(self.n_edges):
                for a, b, sgn in ((self.tails[s], self.heads[s], 1), (self.heads[s], self.tails[s], -1)):
                    if a == v and int(b) not in pot:
                        pot[int(b)] = pot[v] + sgn * self.dz[s]
                        queue.append(int(b))
        if len(pot) < self.n_fibers:
            missing = [self.labels[i] for i in range(self.n_fibers) if i not in pot]
            return False, f"fibers {missing} unreachable from {self.labels[0]!r}"
        cycles = [pot[int(self.tails[s])] + self.dz[s] - pot[int(self.heads[s])] for s in range(self.n_edges)]
        M = np.array(cycles, dtype=int)
        if not _generates_lattice(M, self.d):
            return False, "cycle displacements do not generate the integer lattice"
        return True, ""

    def validate(self, oriented_input: list | None = None) -> ValidationReport:
        connected, why = self._lattice_connectivity()
        errors, warnings = [], []
        if not connected:
            errors.append(f"connectivity: {why}")
        if self.multi_edges:
            warnings.append(f"parallel edges (kept, keyed by stencil index): {self.multi_edges}")
        if oriented_input:
            errors.extend(oriented_input)
        return ValidationReport(
            ok=not errors, R0=self.R0, max_degree=self.max_degree, connected=connected,
            multi_edges=list(self.multi_edges), errors=errors, warnings=warnings,
        )

    def require_connected(self) -> None:
        ok, why = self._lattice_connectivity()
        if not ok:
            raise GraphError(f"graph is not connected: {why}")

    # ------------------------------------------------------------------ paths
    def shortest_path(self, source: tuple, target: tuple, max_radius: int | None = None) -> Path:
        """Breadth-first shortest path in a growing window around the source."""
        source = (tuple(int(c) for c in source[0]), int(source[1]))
        target = (tuple(int(c) for c in target[0]), int(target[1]))
        if source == target:
            return Path(source, ())
        span = max(abs(a - b) for a, b in zip(source[0], target[0])) if self.d else 0
        radius = 3 * self.R0 + span
        limit = max_radius if max_radius is not None else 64 * self.R0 + 4 * span + self.n_fibers * self.R0
        while True:
            path = self._bfs(source, target, radius)
            if path is not None:
                return path
            if radius >= limit:
                raise GraphError(f"no path from {source} to {target} within radius {limit}")
            radius = min(2 * radius, limit)

    def _bfs(self, source, target, radius):
        lo = np.array(source[0]) - radius
        hi = np.array(source[0]) + radius
        prev = {source: None}
        queue = deque([source])
        while queue:
            x = queue.popleft()
            for y, s, sign in self.neighbors(x):
                if y in prev:
                    continue
                c = np.array(y[0])
                if np.any(c < lo) or np.any(c > hi):
                    continue
                prev[y] = (x, s, sign)
                if y == target:
                    steps = []
                    node = y
                    while prev[node] is not None:
                        px, ps, psign = prev[node]
                        steps.append((ps, psign))
                        node = px
                    return Path(source, tuple(reversed(steps)))
                queue.append(y)
        return None

    def _path_without_orbit_reuse(self, source, target) -> Path:
        """Simple path whose periodic unit flux has entries in {-1, 0, 1}."""
        path = self.shortest_path(source, target)
        if np.abs(periodic_unit_flux(self, path)).max(initial=0.0) <= 1.0:
            return path
        # Depth-first search forbidding reuse of a stencil orbit.
        best = None
        radius = 3 * self.R0 + 1
        max_len = 4 * self.n_edges + 1

        def dfs(x, used, visited, steps):
            nonlocal best
            if best is not None:
                return
            if x == target:
                best = Path(source, tuple(steps))
                return
            if len(steps) >= max_len:
                return
            for y, s, sign in self.neighbors(x):
                if s in used or y in visited:
                    continue
                if max(abs(a - b) for a, b in zip(y[0], source[0])) > radius:
                    continue
                used.add(s)
                visited.add(y)
                steps.append((s, sign))
                dfs(y, used, visited, steps)
                steps.pop()
                visited.discard(y)
                used.discard(s)

        dfs(source, set(), {source}, [])
        if best is None:
            raise GraphError(f"no orbit-simple path from {source} to {target}")
        return best

    @cached_property
    def lattice_paths(self) -> tuple:
        """Simple paths from (0, v0) to (e_i, v0), one per coordinate."""
        self.require_connected()
        zero = (0,) * self.d
        out = []
        for i in range(self.d):
            e = [0] * self.d
            e[i] = 1
            out.append(self.shortest_path((zero, 0), (tuple(e), 0)))
        return tuple(out)

    @cached_property
    def fiber_paths(self) -> dict:
        """Simple paths (0, v) -> (0, w) whose periodic fluxes are bounded by 1."""
        self.require_connected()
        zero = (0,) * self.d
        out = {}
        for v in range(self.n_fibers):
            for w in range(self.n_fibers):
                if v != w:
                    out[(v, w)] = self._path_without_orbit_reuse((zero, v), (zero, w))
        return out

    @cached_property
    def lattice_unit_fluxes(self) -> np.ndarray:
        """Rows: periodic unit fluxes of :attr:`lattice_paths` (d x S)."""
        return np.array([periodic_unit_flux(self, p) for p in self.lattice_paths])

    # -------------------------------------------------------------- rescaling
    def rescaled(self, N: int) -> "RescaledGraph":
        return RescaledGraph(self, N)

    def tiled(self, N: int) -> tuple["PeriodicGraph", np.ndarray, np.ndarray]:
        """Zoomed-out graph whose unit cell contains N^d copies of the original.

        New fiber ``i`` is original fiber ``i % |V|`` in sub-cell ``i // |V|``
        (C-order).  Returns ``(graph, edge_source, edge_sign)``: new stencil
        entry ``t`` is original entry ``edge_source[t]`` leaving sub-cell
        ``t // S``, traversed with orientation ``edge_sign[t]``.
        """
        N = int(N)
        nv = self.n_fibers
        cells = list(itertools.product(range(N), repeat=self.d))
        cidx = {c: k for k, c in enumerate(cells)}
        labels = [(c, self.labels[v]) for c in cells for v in range(nv)]
        edges, src, sign = [], [], []
        for c in cells:
            for s in range(self.n_edges):
                head = np.array(c) + self.dz[s]
                dzt = tuple(int(x) for x in np.floor_divide(head, N))
                hc = tuple(int(x) for x in np.mod(head, N))
                ti = cidx[c] * nv + int(self.tails[s])
                hi = cidx[hc] * nv + int(self.heads[s])
                if _canonical(ti, dzt, hi):
                    edges.append((labels[ti], dzt, labels[hi]))
                    sign.append(1)
                else:
                    edges.append((labels[hi], tuple(-x for x in dzt), labels[ti]))
                    sign.append(-1)
                src.append(s)
        return PeriodicGraph(self.d, labels, edges), np.array(src), np.array(sign, dtype=float)


def _generates_lattice(M: np.ndarray, d: int) -> bool:
    """Does the integer row span of ``M`` equal Z^d?  (Hermite elimination.)"""
    rows = [list(map(int, r)) for r in M if any(r)]
    basis = []
    for col in range(d):
        # gcd-reduce column ``col`` among remaining rows
        while True:
            nz = [r for r in rows if r[col] != 0]
            if len(nz) <= 1:
                break
            nz.sort(key=lambda r: abs(r[col]))
            piv = nz[0]
            new_rows = [piv]
            for r in rows:
                if r is piv:
                    continue
                if r[col] != 0:
                    q = r[col] // piv[col]
                    r = [a - q * b for a, b in zip(r, piv)]
                if any(r):
                    new_rows.append(r)
            rows = new_rows
        nz = [r for r in rows if r[col] != 0]
        if not nz:
            return False
        piv = nz[0]
        if abs(piv[col]) != 1:
            return False
        basis.append(piv)
        rows = [r for r in rows if r is not piv]
    return len(basis) == d


# ---------------------------------------------------------------- field ops
def periodic_divergence(graph: PeriodicGraph, J: np.ndarray) -> np.ndarray:
    """Divergence of a periodic flux on the fundamental cell, shape (|V|,)."""
    return graph.div_matrix @ np.asarray(J, dtype=float)


def effective_flux(graph: PeriodicGraph, J: np.ndarray) -> np.ndarray:
    """Half-sum of J(x,y)(y_z - x_z) over oriented edges leaving the cell."""
    return graph.dz.T.astype(float) @ np.asarray(J, dtype=float)


def geometric_effective_flux(graph: PeriodicGraph, J: np.ndarray, embedding) -> np.ndarray:
    """Like :func:`effective_flux` but with embedded vertex positions.

    ``embedding`` maps each fiber to a point of [0,1)^d (array ``(|V|, d)``).
    The two notions agree for divergence-free fields.
    """
    emb = np.asarray(embedding, dtype=float).reshape(graph.n_fibers, graph.d)
    disp = graph.dz + emb[graph.heads] - emb[graph.tails]
    return disp.T @ np.asarray(J, dtype=float)


def periodic_unit_flux(graph: PeriodicGraph, path: Path) -> np.ndarray:
    """Periodisation of the unit flux along a simple path, shape (S,)."""
    J = np.zeros(graph.n_edges)
    for s, sign in path.steps:
        J[s] += sign
    return J


def representative_flux(graph: PeriodicGraph, j) -> np.ndarray:
    """Periodic divergence-free flux with effective flux ``j``."""
    j = np.asarray(j, dtype=float).reshape(graph.d)
    return j @ graph.lattice_unit_fluxes


class EdgeFlux:
    """Finitely supported antisymmetric flux on the infinite graph.

    Stored as ``{(cell, s): value}`` for the edge ``(cell, v_s) -> (cell+dz_s, w_s)``.
    """

    def __init__(self, graph: PeriodicGraph, values: dict | None = None):
        self.graph = graph
        self.values = {}
        for k, val in (values or {}).items():
            self.add(k[0], k[1], val)

    def add(self, cell, s: int, value: float) -> None:
        key = (tuple(int(c) for c in cell), int(s))
        self.values[key] = self.values.get(key, 0.0) + float(value)

    def value(self, x: tuple, y: tuple, s: int | None = None) -> float:
        """J(x, y); for parallel edges the stencil index must be given."""
        g = self.graph
        total, found = 0.0, []
        for nb, t, sign in g.neighbors(x):
            if nb == tuple((tuple(y[0]), y[1])) and (s is None or t == s):
                found.append((t, sign))
        if not found:
            raise GraphError(f"{x} and {y} are not adjacent")
        if len(found) > 1 and s is None:
            raise GraphError("parallel edges: stencil index required")
        t, sign = found[0]
        cell = x[0] if sign > 0 else y[0]
        total = self.values.get((tuple(cell), t), 0.0)
        return sign * total

    def divergence(self, x: tuple) -> float:
        out = 0.0
        cell = tuple(x[0])
        for nb, s, sign in self.graph.neighbors((cell, x[1])):
            key = (cell, s) if sign > 0 else (nb[0], s)
            out += sign * self.values.get(key, 0.0)
        return out

    def support_vertices(self) -> set:
        g = self.graph
        out = set()
        for (cell, s), val in self.values.items():
            if val != 0.0:
                out.add((cell, int(g.tails[s])))
                out.add((tuple(int(a) for a in np.array(cell) + g.dz[s]), int(g.heads[s])))
        return out

    def __neg__(self) -> "EdgeFlux":
        return EdgeFlux(self.graph, {k: -v for k, v in self.values.items()})

    def allclose(self, other: "EdgeFlux", atol=0.0) -> bool:
        keys = set(self.values) | set(other.values)
        return all(abs(self.values.get(k, 0.0) - other.values.get(k, 0.0)) <= atol for k in keys)


def unit_flux_path(graph: PeriodicGraph, path: Path) -> EdgeFlux:
    """Unit flux along a simple path: +1 on traversed edges in path direction."""
    if not path.is_simple(graph):
        raise GraphError("unit flux requires a simple path")
    J = EdgeFlux(graph)
    for x, (s, sign) in zip(path.vertices(graph), path.steps):
        cell = np.array(x[0])
        if sign > 0:
            J.add(cell, s, 1.0)
        else:
            J.add(cell - graph.dz[s], s, -1.0)
    return J


def divergence(J, x=None, graph: PeriodicGraph | None = None):
    """Divergence dispatcher for the three field representations.

    * :class:`EdgeFlux` and a vertex ``x`` -> scalar;
    * periodic flux array with ``graph`` -> array on the fiber;
    * :class:`TorusField`-style tuple ``(rescaled_graph, J)`` -> torus array.
    """
    if isinstance(J, EdgeFlux):
        if x is None:
            raise GraphError("a vertex is required")
        return J.divergence(x)
    if isinstance(graph, RescaledGraph):
        d = graph.divergence(J)
        return d if x is None else d[x]
    if isinstance(graph, PeriodicGraph):
        d = periodic_divergence(graph, J)
        return d if x is None else d[x]
    raise GraphError("cannot infer the graph of the field")


# ------------------------------------------------------------ rescaled graph
class RescaledGraph:
    """The periodic graph scaled by eps = 1/N and wrapped onto the torus."""

    def __init__(self, base: PeriodicGraph, N: int):
        N = int(N)
        if N < 1:
            raise GraphError("1/eps must be a positive integer")
        if 2 * base.R0 > N:
            raise GraphError(f"eps*R0 = {base.R0}/{N} exceeds 1/2: edges would wrap onto themselves")
        self.base = base
        self.N = N
        self.d = base.d
        self.eps = 1.0 / N
        self.eps_exact = Fraction(1, N)
        self.shape = (N,) * base.d
        self.n_cells = N ** base.d
        cells = np.array(list(itertools.product(range(N), repeat=base.d)), dtype=int).reshape(self.n_cells, base.d)
        self.cells = cells
        heads = np.empty((self.n_cells, base.n_edges), dtype=int)
        for s in range(base.n_edges):
            heads[:, s] = self.cell_index(cells + base.dz[s])
        self.head_cell = heads
        nv = base.n_fibers
        self.tail_vertex = (np.arange(self.n_cells)[:, None] * nv + base.tails[None, :])
        self.head_vertex = heads * nv + base.heads[None, :]
        for a in (self.cells, self.head_cell, self.tail_vertex, self.head_vertex):
            a.setflags(write=False)

    def __repr__(self) -> str:
        return f"RescaledGraph({self.base!r}, N={self.N})"

    @property
    def n_fibers(self) -> int:
        return self.base.n_fibers

    @property
    def n_edges(self) -> int:
        return self.base.n_edges

    @property
    def n_vertices(self) -> int:
        return self.n_cells * self.base.n_fibers

    def mass_shape(self) -> tuple:
        return (self.n_cells, self.base.n_fibers)

    def flux_shape(self) -> tuple:
        return (self.n_cells, self.base.n_edges)

    def cell_index(self, cells) -> np.ndarray:
        cells = np.mod(np.asarray(cells, dtype=int), self.N)
        if cells.ndim == 1:
            cells = cells[None, :]
        return np.ravel_multi_index(tuple(cells.T), self.shape)

    def zeros_mass(self) -> np.ndarray:
        return np.zeros(self.mass_shape())

    def zeros_flux(self) -> np.ndarray:
        return np.zeros(self.flux_shape())

    def divergence(self, J: np.ndarray) -> np.ndarray:
        J = np.asarray(J, dtype=float)
        if J.shape != self.flux_shape():
            raise GraphError(f"flux has shape {J.shape}, expected {self.flux_shape()}")
        n = self.n_vertices
        out = np.bincount(self.tail_vertex.ravel(), weights=J.ravel(), minlength=n)
        out -= np.bincount(self.head_vertex.ravel(), weights=J.ravel(), minlength=n)
        return out.reshape(self.mass_shape())

    def divergence_adjoint(self, g: np.ndarray) -> np.ndarray:
        """Transpose of :meth:`divergence`: (D^T g)[c, s] = g(tail) - g(head)."""
        g = np.asarray(g, dtype=float).ravel()
        return g[self.tail_vertex] - g[self.head_vertex]

    @cached_property
    def divergence_matrix(self):
        import scipy.sparse as sp
        rows = np.concatenate([self.tail_vertex.ravel(), self.head_vertex.ravel()])
        cols = np.concatenate([np.arange(self.n_cells * self.n_edges)] * 2)
        vals = np.concatenate([np.ones(self.n_cells * self.n_edges), -np.ones(self.n_cells * self.n_edges)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_vertices, self.n_cells * self.n_edges))

    def shift_indices(self, z) -> np.ndarray:
        """Index map of sigma^z: (sigma^z psi)[c] = psi[c + z]."""
        z = np.asarray(z, dtype=int).reshape(self.d)
        return self.cell_index(self.cells + z)

    def lift(self, m_periodic=None, J_periodic=None):
        """Constant-per-fiber torus fields from periodic data (no scaling)."""
        out = []
        if m_periodic is not None:
            out.append(np.tile(np.asarray(m_periodic, dtype=float), (self.n_cells, 1)))
        if J_periodic is not None:
            out.append(np.tile(np.asarray(J_periodic, dtype=float), (self.n_cells, 1)))
        return out[0] if len(out) == 1 else tuple(out)


def shift_field(rg: RescaledGraph, field_values: np.ndarray, z) -> np.ndarray:
    """sigma^z psi(x) = psi(S^z x): reindex cells by ``c -> c + z``."""
    return np.asarray(field_values)[rg.shift_indices(z)]


def restrict_window(rg: RescaledGraph, field_values: np.ndarray, z, R: int) -> np.ndarray:
    """Window of radius R of the periodic pullback of a torus field around cell z.

    Returns an array of shape ``(2R+1,)*d + (k,)`` whose entry at offset ``c``
    (index ``c + R``) is the value at torus cell ``z + c``.
    """
    if 2 * R + 1 > rg.N:
        raise GraphError(f"window radius {R} too large for 1/eps = {rg.N}")
    z = np.asarray(z, dtype=int).reshape(rg.d)
    offs = np.array(list(itertools.product(range(-R, R + 1), repeat=rg.d))).reshape(-1, rg.d)
    idx = rg.cell_index(offs + z)
    vals = np.asarray(field_values)[idx]
    return vals.reshape((2 * R + 1,) * rg.d + vals.shape[1:])


def periodic_window(values: np.ndarray, d: int, R: int) -> np.ndarray:
    """Window of radius R of a periodic field given on one cell."""
    values = np.asarray(values, dtype=float)
    return np.broadcast_to(values, (2 * R + 1,) * d + values.shape).copy()


# ----------------------------------------------------------------------- I/O
def graph_from_dict(data: dict) -> tuple[PeriodicGraph, list]:
    """Build a graph from the stencil-file mapping.

    Edges are unordered by default; with ``"oriented": true`` every edge must
    be listed in both orientations, and unmatched entries are reported.
    Returns the graph and a list of error strings from orientation checks.
    """
    try:
        d = int(data["d"])
        labels = list(data["V"])
        raw = [(e["v"], tuple(e["dz"]), e["v2"]) for e in data["edges"]]
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed stencil description: {exc}") from None
    errors = []
    if data.get("oriented", False):
        pool = {}
        for e in raw:
            pool[e] = pool.get(e, 0) + 1
        kept = []
        for e in raw:
            if pool.get(e, 0) == 0:
                continue
            rev = (e[2], tuple(-x for x in e[1]), e[0])
            if pool.get(rev, 0) > 0 and rev != e:
                pool[e] -= 1
                pool[rev] -= 1
                kept.append(e)
            else:
                errors.append(f"asymmetric stencil: edge {e[0]!r} -> {e[1]} {e[2]!r} has no reverse")
                pool[e] -= 1
        raw = kept
    return PeriodicGraph(d, labels, raw), errors


def graph_to_dict(graph: PeriodicGraph) -> dict:
    return {
        "d": graph.d,
        "V": list(graph.labels),
        "edges": [
            {"v": graph.labels[graph.tails[s]], "dz": [int(x) for x in graph.dz[s]], "v2": graph.labels[graph.heads[s]]}
            for s in range(graph.n_edges)
        ],
    }


def load_graph(path) -> tuple[PeriodicGraph, ValidationReport]:
    with open(path) as fh:
        data = json.load(fh)
    g, errors = graph_from_dict(data)
    return g, g.validate(errors)
