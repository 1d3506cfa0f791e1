"""Periodic finite-volume partitions and the graphs they induce.

A partition of the unit torus into convex cells ``K_x`` with sites ``x``
induces a periodic graph whose edges are the pairs of cells sharing a facet
(including across the periodic boundary).  Each edge carries the site
distance ``d_xy``, the facet measure ``s_xy`` and the unit normal
``n_xy = (y - x) / d_xy``; each vertex carries the cell volume ``|K_x|``.

Facets are recovered from vertex lists by convex-hull facet enumeration
(``scipy.spatial.ConvexHull``) in dimensions 2 and 3; in dimension 3 the
overlap area of two coplanar facets is computed with ``shapely``.  Meshes in
higher dimension can be given through a precomputed adjacency table.
"""
from __future__ import annotations

import itertools
import json
import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path as FsPath
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .costs import CostDomainError, EdgeCost
from .graph import GraphError, PeriodicGraph, _canonical, effective_flux, periodic_divergence

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-9
DEGENERATE_FACET = 1e-12


class MeshError(ValueError):
    """Invalid finite-volume partition."""


@dataclass(frozen=True)
class Adjacency:
    """One geometric edge ``(x, 0) -- (y, dz)`` in canonical orientation."""

    x: int
    y: int
    dz: tuple
    d: float
    s: float
    n: np.ndarray


# ------------------------------------------------------------------ facets
def _facets(verts: np.ndarray):
    """List of (unit outward normal, offset, facet vertices) with n.p + offset = 0."""
    from scipy.spatial import ConvexHull

    d = verts.shape[1]
    if d == 1:
        lo, hi = verts.min(), verts.max()
        return [(np.array([-1.0]), lo, np.array([[lo]])), (np.array([1.0]), -hi, np.array([[hi]]))]
    hull = ConvexHull(verts)
    groups: dict = {}
    for eq in hull.equations:
        key = tuple(np.round(eq, 9))
        groups.setdefault(key, eq)
    out = []
    for eq in groups.values():
        n, off = eq[:-1], eq[-1]
        on = np.abs(verts @ n + off) < 1e-9
        out.append((n, off, verts[on]))
    return out


def _plane_basis(n: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the hyperplane orthogonal to n."""
    _, _, vt = np.linalg.svd(n[None, :])
    return vt[1:]


def _overlap_measure(n, fa: np.ndarray, fb: np.ndarray) -> float:
    """(d-1)-measure of the intersection of two coplanar convex facets."""
    d = n.size
    if d == 1:
        return 1.0
    T = _plane_basis(n)
    pa, pb = fa @ T.T, fb @ T.T
    if d == 2:
        lo = max(pa.min(), pb.min())
        hi = min(pa.max(), pb.max())
        return max(0.0, float(hi - lo))
    if d == 3:
        from shapely.geometry import MultiPoint

        A = MultiPoint([tuple(p) for p in pa]).convex_hull
        B = MultiPoint([tuple(p) for p in pb]).convex_hull
        return float(A.intersection(B).area)
    raise MeshError("facet enumeration is implemented for d <= 3; supply an adjacency table")


def _volume(verts: np.ndarray) -> float:
    if verts.shape[1] == 1:
        return float(verts.max() - verts.min())
    from scipy.spatial import ConvexHull

    return float(ConvexHull(verts).volume)


# --------------------------------------------------------------- partition
@dataclass
class FVPartition:
    """A Z^d-periodic finite-volume partition of the unit cube.

    ``cells[i]`` is the vertex list of the convex polytope ``K_i`` (vertices
    may lie outside the unit cube; cells tile it periodically) and
    ``sites[i]`` its site.  ``adjacency`` may be given explicitly, in which
    case ``volumes`` must be given too and no geometry is recomputed.
    """

    d: int
    sites: np.ndarray
    cells: list | None = None
    labels: Sequence | None = None
    adjacency: list | None = None
    volumes: np.ndarray | None = None
    _warnings: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.sites = np.asarray(self.sites, dtype=float).reshape(-1, self.d)
        n = len(self.sites)
        self.labels = tuple(self.labels) if self.labels is not None else tuple(str(i) for i in range(n))
        if len(self.labels) != n:
            raise MeshError("one label per site required")
        if self.cells is not None:
            self.cells = [np.asarray(c, dtype=float).reshape(-1, self.d) for c in self.cells]
            if len(self.cells) != n:
                raise MeshError("one cell per site required")
        if self.volumes is None:
            if self.cells is None:
                raise MeshError("cell volumes are required without cell geometry")
            self.volumes = np.array([_volume(c) for c in self.cells])
        self.volumes = np.asarray(self.volumes, dtype=float)
        if self.adjacency is None:
            if self.cells is None:
                raise MeshError("either cells or an adjacency table is required")
            self.adjacency = self._detect_adjacency()
        self.validate()

    @property
    def n_cells(self) -> int:
        return len(self.sites)

    def _detect_adjacency(self) -> list[Adjacency]:
        d = self.d
        facets = [_facets(c) for c in self.cells]
        adj = []
        shifts = list(itertools.product((-1, 0, 1), repeat=d))
        for x, y in itertools.product(range(self.n_cells), repeat=2):
            for z in shifts:
                if not _canonical(x, z, y):
                    continue
                zv = np.array(z, dtype=float)
                area = 0.0
                normal = None
                for n, off, fa in facets[x]:
                    for m, offy, fb in facets[y]:
                        if np.abs(n + m).max() > 1e-9:
                            continue
                        # shifted facet lies on m.p + (offy - m.z) = 0, i.e. the same plane when m = -n
                        if abs(off + (offy - m @ zv)) > 1e-9:
                            continue
                        a = _overlap_measure(n, fa, fb + zv)
                        if a > area:
                            area, normal = a, n
                if area <= 0.0:
                    continue
                if area < DEGENERATE_FACET:
                    msg = f"degenerate facet between {self.labels[x]} and {self.labels[y]}{z} excluded"
                    warnings.warn(msg)
                    self._warnings.append(msg)
                    continue
                vec = self.sites[y] + zv - self.sites[x]
                dist = float(np.linalg.norm(vec))
                if dist == 0:
                    raise MeshError(f"coincident sites across facet {self.labels[x]}-{self.labels[y]}")
                nxy = vec / dist
                if abs(1.0 - abs(float(nxy @ normal))) > ORTHO_TOL:
                    raise MeshError(f"sites {self.labels[x]}, {self.labels[y]}{z} are not orthogonal to their facet")
                adj.append(Adjacency(x, y, tuple(int(t) for t in z), dist, area, nxy))
        return adj

    def validate(self):
        if abs(self.volumes.sum() - 1.0) > 1e-12:
            raise MeshError(f"cell volumes sum to {self.volumes.sum():.15g}, not 1")
        if np.any(self.volumes <= 0):
            raise MeshError("cells must have positive volume")
        for a in self.adjacency:
            if a.d <= 0 or a.s <= 0:
                raise MeshError("adjacency data must be positive")
            if abs(np.linalg.norm(a.n) - 1.0) > 1e-12:
                raise MeshError("normals must be unit vectors")
        return True

    # ------------------------------------------------------------ derived data
    @cached_property
    def graph(self) -> PeriodicGraph:
        g = PeriodicGraph(self.d, self.labels, [(self.labels[a.x], a.dz, self.labels[a.y]) for a in self.adjacency])
        return g

    @cached_property
    def annotations(self) -> "FVAnnotations":
        A = self.adjacency
        return FVAnnotations(np.array([a.d for a in A]), np.array([a.s for a in A]),
                             np.array([a.n for a in A]).reshape(len(A), self.d), self.volumes.copy(),
                             self.sites.copy())


@dataclass
class FVAnnotations:
    """Per-stencil-edge geometry: distances, facet measures, normals; per-vertex volumes."""

    d: np.ndarray
    s: np.ndarray
    n: np.ndarray
    volume: np.ndarray
    sites: np.ndarray


def build_graph(partition: FVPartition) -> tuple[PeriodicGraph, FVAnnotations]:
    """Periodic graph of facet adjacencies with its geometric annotations."""
    g = partition.graph
    g.require_connected()
    return g, partition.annotations


# ------------------------------------------------------------------ meshes
def square_mesh(d: int) -> FVPartition:
    """One unit-cube cell per lattice site (site at the cube centre)."""
    if d < 1:
        raise MeshError("dimension must be positive")
    verts = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    return FVPartition(d, np.full((1, d), 0.5), [verts], labels=["o"])


TRIANGLE_SITES = {"N": (0.5, 0.75), "S": (0.5, 0.25), "E": (0.75, 0.5), "W": (0.25, 0.5)}


def triangle_mesh() -> FVPartition:
    """Each unit square split by its diagonals into north/south/east/west triangles.

    Sites sit on the symmetry axes at distance 1/4 from the centre:
    N = (1/2, 3/4), S = (1/2, 1/4), E = (3/4, 1/2), W = (1/4, 1/2).  Then

    * N and the S of the square above are at distance 1/2 across a facet of
      length 1, so d*s = 1/2 (same for E and the W of the square to the right);
    * N and E are at distance sqrt(2)/4 across the half diagonal of length
      sqrt(2)/2, so d*s = 1/4 (same for all four diagonal facets);
    * every triangle has area 1/4.
    """
    c = (0.5, 0.5)
    cells = {
        "N": [(0, 1), (1, 1), c],
        "S": [(0, 0), (1, 0), c],
        "E": [(1, 0), (1, 1), c],
        "W": [(0, 0), (0, 1), c],
    }
    labels = ["N", "S", "E", "W"]
    return FVPartition(2, [TRIANGLE_SITES[k] for k in labels], [cells[k] for k in labels], labels=labels)


# ------------------------------------------------------------------ checks
def fv_identity(partition: FVPartition) -> tuple[np.ndarray, float]:
    """M = 1/2 sum over E^Q of d s n (x) n, and ||M - Id||_inf (max entry)."""
    A = partition.annotations
    # both orientations of every stencil edge contribute the same n (x) n
    M = np.einsum("s,si,sj->ij", A.d * A.s, A.n, A.n)
    return M, float(np.abs(M - np.eye(partition.d)).max())


@dataclass
class CandidateRep:
    m: np.ndarray
    J: np.ndarray
    divergence_residual: float
    effective_flux_residual: float
    mass_residual: float


def candidate_rep(partition: FVPartition, rho: float, j) -> CandidateRep:
    """m*(x) = |K_x| rho and J*(x, y) = s_xy (j . n_xy), with feasibility residuals."""
    j = np.asarray(j, dtype=float).reshape(partition.d)
    A = partition.annotations
    g = partition.graph
    m = A.volume * rho
    J = A.s * (A.n @ j)
    return CandidateRep(m, J, float(np.abs(periodic_divergence(g, J)).max()),
                        float(np.abs(effective_flux(g, J) - j).max()), float(abs(m.sum() - rho)))


# ---------------------------------------------------------------- mobility
@dataclass
class MobilitySpec:
    """Mobility m(rho) with a per-edge admissible version.

    ``mobility``: ``"linear"`` (m(r) = r) or ``"power"`` (m(r) = r**alpha,
    0 < alpha <= 1).  ``version``: ``"weighted_linear"`` with
    m_xy(a, b) = m(lam_xy a + (1 - lam_xy) b) or ``"minimum"`` with
    m_xy(a, b) = m(min(a, b)).  ``lam`` is a scalar or one value per stencil
    edge (for the stencil orientation; the reverse orientation uses 1 - lam,
    which makes m_yx(b, a) = m_xy(a, b)).
    """

    mobility: str = "linear"
    version: str = "weighted_linear"
    lam: float | Sequence = 0.5
    alpha: float = 1.0
    tie_weight: float = 0.5

    def __post_init__(self):
        if self.mobility not in ("linear", "power"):
            raise CostDomainError(f"unknown mobility {self.mobility!r}")
        if self.version not in ("weighted_linear", "minimum"):
            raise CostDomainError(f"unknown admissible version {self.version!r}")
        if self.mobility == "power" and not 0 < self.alpha <= 1:
            raise CostDomainError("power mobility needs 0 < alpha <= 1 for concavity")
        lam = np.asarray(self.lam, dtype=float)
        if np.any(lam < 0) or np.any(lam > 1):
            raise CostDomainError("lambda must lie in [0, 1]")

    def m(self, r):
        r = np.asarray(r, dtype=float)
        return r if self.mobility == "linear" else np.maximum(r, 0.0) ** self.alpha

    def dm(self, r):
        r = np.asarray(r, dtype=float)
        if self.mobility == "linear":
            return np.ones_like(r)
        with np.errstate(divide="ignore"):
            return np.where(r > 0, self.alpha * np.maximum(r, 1e-300) ** (self.alpha - 1), np.inf)

    def lam_array(self, S: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.lam, dtype=float), (S,)).copy()

    def superdifferential_contains(self, p, rho: float, lam: float, atol=1e-12) -> bool:
        """Whether p lies in the superdifferential of m_xy at (rho, rho)."""
        p = np.asarray(p, dtype=float)
        dm = float(self.dm(rho))
        if self.version == "weighted_linear":
            return bool(np.allclose(p, [lam * dm, (1 - lam) * dm], atol=atol))
        return bool(abs(p.sum() - dm) <= atol and p.min() >= -atol)


class MobilityCost(EdgeCost):
    """F(m, J) = 1/2 sum_{E^Q} (d_xy / s_xy) J(x,y)^2 / m_xy(m(x)/|K_x|, m(y)/|K_y|).

    Division by zero: 0/0 = 0 and c/0 = +inf.  Reference point m = |K_x|, J = 0.
    """

    def __init__(self, partition: FVPartition, spec: MobilitySpec):
        g = partition.graph
        A = partition.annotations
        super().__init__(g, reference_m=A.volume.copy(), reference_J=np.zeros(g.n_edges))
        self.partition, self.spec = partition, spec
        self.omega = A.d / A.s
        self.Kt = A.volume[g.tails]
        self.Kh = A.volume[g.heads]
        self.lam = spec.lam_array(g.n_edges)

    def __repr__(self) -> str:
        return f"MobilityCost({self.spec.mobility}, {self.spec.version})"

    def _arg(self, a, b, forward):
        # tail / head densities in the stencil orientation
        if forward:
            ut, uh, ct, ch = np.asarray(a, float) / self.Kt, np.asarray(b, float) / self.Kh, 1 / self.Kt, 1 / self.Kh
        else:
            ut, uh, ct, ch = np.asarray(b, float) / self.Kt, np.asarray(a, float) / self.Kh, 1 / self.Kt, 1 / self.Kh
        if self.spec.version == "weighted_linear":
            u = self.lam * ut + (1 - self.lam) * uh
            dt, dh = self.lam * ct, (1 - self.lam) * ch
        else:
            u = np.minimum(ut, uh)
            w = np.where(ut < uh, 1.0, np.where(ut > uh, 0.0, self.spec.tie_weight))
            dt, dh = w * ct, (1 - w) * ch
        # derivatives with respect to (a, b)
        return (u, dt, dh) if forward else (u, dh, dt)

    def oriented(self, a, b, J, forward=True):
        J = np.asarray(J, dtype=float)
        u, _, _ = self._arg(a, b, forward)
        mob = self.spec.m(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.omega * J * J / mob
        return np.where(J == 0, 0.0, np.where(mob > 0, val, np.inf))

    def oriented_grad(self, a, b, J, forward=True):
        J = np.asarray(J, dtype=float)
        u, da_du, db_du = self._arg(a, b, forward)
        mob = self.spec.m(u)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dJ = 2 * self.omega * J / mob
            du = -self.omega * J * J * self.spec.dm(u) / mob ** 2
        zero = J == 0
        return (np.where(zero, 0.0, du * da_du), np.where(zero, 0.0, du * db_du), np.where(zero, 0.0, dJ))


    def oriented_pieces(self, a, b, J, forward=True):
        if self.spec.version != "minimum":
            return super().oriented_pieces(a, b, J, forward)
        J = np.asarray(J, dtype=float)
        ut = (np.asarray(a, float) if forward else np.asarray(b, float)) / self.Kt
        uh = (np.asarray(b, float) if forward else np.asarray(a, float)) / self.Kh
        zero = J == 0
        out = []
        for u, K, tail_side in ((ut, self.Kt, True), (uh, self.Kh, False)):
            mob = self.spec.m(u)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                val = np.where(zero, 0.0, np.where(mob > 0, self.omega * J * J / mob, np.inf))
                du = np.where(zero, 0.0, -self.omega * J * J * self.spec.dm(u) / mob ** 2 / K)
                dJ = np.where(zero, 0.0, 2 * self.omega * J / mob)
            z = np.zeros_like(val)
            # derivative goes to the argument holding this side's mass
            on_a = tail_side == forward
            out.append((val, (du if on_a else z, z if on_a else du, dJ)))
        return out


def mobility_cost(partition: FVPartition, spec: MobilitySpec) -> MobilityCost:
    return MobilityCost(partition, spec)


def continuum_cost(spec: MobilitySpec, rho, j) -> float:
    """f(rho, j) = |j|^2 / m(rho) with the division-by-zero convention."""
    j2 = float(np.sum(np.asarray(j, float) ** 2))
    mob = float(spec.m(rho))
    if j2 == 0:
        return 0.0
    return j2 / mob if mob > 0 else np.inf


# --------------------------------------------------------------- isometry
def _oriented_lambdas(partition, values):
    """(lam_fwd, lam_bwd) per stencil edge from scalar, (S,) or (S, 2) input."""
    S = len(partition.adjacency)
    v = np.asarray(values, dtype=float)
    if v.ndim == 0:
        return np.full(S, float(v)), np.full(S, float(v))
    if v.shape == (S,):
        return v.copy(), 1.0 - v
    if v.shape == (S, 2):
        return v[:, 0].copy(), v[:, 1].copy()
    raise CostDomainError(f"isometry values must be scalar, (S,) or (S, 2); got {v.shape}")


@dataclass
class IsometryReport:
    matrices: np.ndarray  # (|V|, d, d): sum_y lam d s n n - |K_x| Id
    deviation: float
    symmetric_compatible: bool
    feasible: bool | None = None
    solution: list | None = None
    certificate: dict | None = None

    @property
    def verdict(self) -> str:
        if self.feasible is None:
            return "NOT SOLVED"
        if not self.feasible:
            return "INFEASIBLE"
        if self.solution is not None and all(v == sp.Rational(1, 2) for v in self.solution):
            return "FEASIBLE(lambda=1/2)"
        return "FEASIBLE"


def isometry_matrices(partition: FVPartition, lam_fwd, lam_bwd) -> np.ndarray:
    A = partition.annotations
    g = partition.graph
    nv, d = partition.n_cells, partition.d
    T = np.einsum("s,si,sj->sij", A.d * A.s, A.n, A.n)
    M = np.zeros((nv, d, d))
    np.add.at(M, g.tails, lam_fwd[:, None, None] * T)
    np.add.at(M, g.heads, lam_bwd[:, None, None] * T)
    return M - A.volume[:, None, None] * np.eye(d)


def isometry_check(partition: FVPartition, partial1_values=None, solve: bool = False) -> IsometryReport:
    """Per-vertex deviation of sum_{y~x} lam_xy d_xy s_xy n_xy n_xy^T from |K_x| Id.

    ``partial1_values`` are the ratios d_1 m_xy(rho, rho) / m'(rho): a scalar
    (same for every oriented edge), one value per stencil edge (reverse
    orientation 1 - value) or explicit ``(S, 2)`` pairs.  With ``solve=True``
    the linear system for lam (with lam_xy + lam_yx = 1) is solved in exact
    rational arithmetic; inconsistency is certified by a vector ``y`` with
    ``y^T A = 0`` and ``y^T b != 0``.
    """
    if partial1_values is None:
        partial1_values = 0.5
    lf, lb = _oriented_lambdas(partition, partial1_values)
    M = isometry_matrices(partition, lf, lb)
    rep = IsometryReport(M, float(np.abs(M).max()), bool(np.allclose(lf + lb, 1.0, atol=1e-12)))
    if solve:
        rep.feasible, rep.solution, rep.certificate = solve_isometry_exact(partition)
    return rep


def _exact(x: float, tol=1e-12):
    r = sp.nsimplify(float(x), rational=True, tolerance=tol)
    if abs(float(r) - float(x)) > 1e-12 * max(1.0, abs(float(x))):
        raise MeshError(f"value {x!r} is not (close to) a simple rational")
    return r


def isometry_system(partition: FVPartition):
    """Exact (A, b, lam symbols) for sum_{y~x} lam_xy d s n n^T = |K_x| Id in lam_s.

    d s n n^T = (s/d) v v^T with v = y - x; squared lengths are rational for
    rational geometry, so the entries are exact (square roots kept symbolic).
    """
    g = partition.graph
    dim = partition.d
    S = g.n_edges
    lam = sp.symbols(f"lam0:{S}")
    rows, rhs = [], []
    pairs = [(i, k) for i in range(dim) for k in range(i, dim)]
    T = []
    for a in partition.adjacency:
        v = sp.Matrix([_exact(t) for t in (np.asarray(a.n) * a.d)])
        d2 = (v.T * v)[0]
        s_exact = sp.nsimplify(a.s, [sp.sqrt(2), sp.sqrt(3)], tolerance=1e-12)
        if abs(float(s_exact) - a.s) > 1e-12:
            raise MeshError("facet measure is not exactly representable")
        T.append(sp.simplify(s_exact / sp.sqrt(d2)) * (v * v.T))
    vols = [_exact(v) for v in partition.volumes]
    for x in range(partition.n_cells):
        for (i, k) in pairs:
            expr = 0
            for s_idx in range(S):
                if g.tails[s_idx] == x:
                    expr += lam[s_idx] * T[s_idx][i, k]
                if g.heads[s_idx] == x:
                    expr += (1 - lam[s_idx]) * T[s_idx][i, k]
            target = vols[x] if i == k else 0
            rows.append(sp.expand(expr - target))
    A, b = sp.linear_eq_to_matrix(rows, lam)
    return sp.Matrix(A), sp.Matrix(b), lam


def solve_isometry_exact(partition: FVPartition):
    """(feasible, particular solution or None, certificate or None)."""
    A, b, lam = isometry_system(partition)
    aug = A.row_join(b)
    rank_A, rank_aug = A.rank(), aug.rank()
    if rank_A == rank_aug:
        half = sp.Matrix([sp.Rational(1, 2)] * len(lam))
        if (A * half - b).is_zero_matrix:
            return True, list(half), None
        sol = sp.linsolve((A, b), *lam)
        (particular,) = list(sol)
        free = set().union(*[sp.sympify(e).free_symbols for e in particular])
        particular = [sp.sympify(e).subs({f: sp.Rational(1, 2) for f in free}) for e in particular]
        return True, particular, None
    # Fredholm alternative: y in the left null space of A with y.b != 0
    for y in A.T.nullspace():
        yb = sp.simplify((y.T * b)[0])
        if yb != 0:
            y = y / yb
            return False, None, {"y": [sp.nsimplify(t) for t in y], "yA": [0] * A.shape[1], "yb": 1,
                                 "rank_A": rank_A, "rank_augmented": rank_aug}
    raise MeshError("rank mismatch without a certificate (numerical breakdown)")


# ---------------------------------------------------------------- isotropy
Selector = Callable[[dict, float, np.ndarray], tuple]


def half_selector(edge: dict, rho: float, j) -> tuple:
    """p = m'(rho) (1/2, 1/2) on every oriented edge (m linear: (1/2, 1/2))."""
    return (0.5, 0.5)


def triangle_selector(partition: FVPartition) -> Selector:
    """Selection for the triangle mesh under the minimum version.

    Facets between N/S and E/W cells (diagonals): p^{xy} = (j1^2, j2^2)/|j|^2
    when x is N or S and p^{xy} = (j2^2, j1^2)/|j|^2 when x is E or W; facets
    between a square's N and the S above it (or E and the W to its right)
    use (1/2, 1/2).
    """
    labels = partition.labels

    def select(edge, rho, j):
        j = np.asarray(j, dtype=float)
        x, y = labels[edge["tail"]], labels[edge["head"]]
        n2 = float(j @ j)
        if {x, y} in ({"N", "S"}, {"E", "W"}) or n2 == 0:
            return (0.5, 0.5)
        a, b = j[0] ** 2 / n2, j[1] ** 2 / n2
        return (a, b) if x in ("N", "S") else (b, a)

    return select


@dataclass
class IsotropyReport:
    a: np.ndarray
    spread: float


def isotropy_check(partition: FVPartition, selector: Selector, rho: float, j,
                   spec: MobilitySpec | None = None) -> IsotropyReport:
    """a_{x,j} = (1/|K_x|) sum_{y~x} (p1^{xy} + p2^{yx}) d s (n . j)^2 and its spread over x.

    When ``spec`` is given every selected p must lie in the superdifferential
    of m_xy at (rho, rho); an invalid selection raises ``CostDomainError``.
    """
    j = np.asarray(j, dtype=float).reshape(partition.d)
    A = partition.annotations
    g = partition.graph
    lam = spec.lam_array(g.n_edges) if spec is not None else None
    a = np.zeros(partition.n_cells)
    for s in range(g.n_edges):
        t, h = int(g.tails[s]), int(g.heads[s])
        fwd = {"s": s, "tail": t, "head": h, "forward": True}
        bwd = {"s": s, "tail": h, "head": t, "forward": False}
        p_xy = np.asarray(selector(fwd, rho, j), dtype=float)
        p_yx = np.asarray(selector(bwd, rho, j), dtype=float)
        if spec is not None:
            if not spec.superdifferential_contains(p_xy, rho, lam[s]) or \
                    not spec.superdifferential_contains(p_yx, rho, 1 - lam[s]):
                raise CostDomainError(f"selected supergradient on edge {s} is not in the superdifferential")
        w = A.d[s] * A.s[s] * float(A.n[s] @ j) ** 2
        a[t] += (p_xy[0] + p_yx[1]) * w
        a[h] += (p_yx[0] + p_xy[1]) * w
    a /= A.volume
    return IsotropyReport(a, float(a.max() - a.min()))


# --------------------------------------------------------------------- I/O
def partition_to_dict(partition: FVPartition) -> dict:
    out = {"d": partition.d, "cells": []}
    for i, lab in enumerate(partition.labels):
        rec = {"label": lab, "site": partition.sites[i].tolist(), "volume": float(partition.volumes[i])}
        if partition.cells is not None:
            rec["vertices"] = partition.cells[i].tolist()
        out["cells"].append(rec)
    if partition.cells is None:
        out["adjacency"] = [{"x": partition.labels[a.x], "y": partition.labels[a.y], "dz": list(a.dz),
                             "d": a.d, "s": a.s} for a in partition.adjacency]
    return out


def partition_from_dict(data: dict) -> FVPartition:
    try:
        d = int(data["d"])
        cells = data["cells"]
        labels = [c.get("label", str(i)) for i, c in enumerate(cells)]
        sites = [c["site"] for c in cells]
    except (KeyError, TypeError) as exc:
        raise MeshError(f"malformed mesh description: {exc}") from None
    if "adjacency" in data:
        index = {lab: i for i, lab in enumerate(labels)}
        sites_a = np.asarray(sites, dtype=float)
        adj = []
        for rec in data["adjacency"]:
            x, y, z = index[rec["x"]], index[rec["y"]], tuple(int(t) for t in rec["dz"])
            if not _canonical(x, z, y):
                x, y, z = y, x, tuple(-t for t in z)
            vec = sites_a[y] + np.array(z) - sites_a[x]
            dist = float(rec.get("d", np.linalg.norm(vec)))
            adj.append(Adjacency(x, y, z, dist, float(rec["s"]), vec / np.linalg.norm(vec)))
        return FVPartition(d, sites, None, labels, adj, np.array([c["volume"] for c in cells], dtype=float))
    return FVPartition(d, sites, [c["vertices"] for c in cells], labels)


def load_partition(path) -> FVPartition:
    with open(FsPath(path)) as fh:
        return partition_from_dict(json.load(fh))


MESHES = {"square1": lambda: square_mesh(1), "square2": lambda: square_mesh(2),
          "square3": lambda: square_mesh(3), "triangle": triangle_mesh}
