import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from periodic_transport.catalog import CATALOG, lattice, ladder
from periodic_transport.divergence import (
    InfeasibleError,
    LocalRouter,
    solve_divergence_local,
    solve_divergence_periodic,
)
from periodic_transport.graph import (
    EdgeFlux,
    GraphError,
    Path,
    PeriodicGraph,
    RescaledGraph,
    divergence,
    effective_flux,
    geometric_effective_flux,
    graph_from_dict,
    periodic_divergence,
    periodic_unit_flux,
    representative_flux,
    restrict_window,
    shift_field,
    unit_flux_path,
)

GRAPHS = sorted(CATALOG)


def cycle4():
    """Four fibers joined in a cycle inside each cell, plus lattice edges."""
    return PeriodicGraph(1, list("abcd"), [("a", (0,), "b"), ("b", (0,), "c"), ("c", (0,), "d"),
                                           ("d", (0,), "a"), ("a", (1,), "a")])


# ------------------------------------------------------------------ divergence
def test_divergence_zero_field():
    g = ladder()
    J = EdgeFlux(g)
    assert divergence(J, ((0,), 0)) == 0.0
    assert np.all(divergence(np.zeros(g.n_edges), graph=g) == 0)


def test_divergence_sums_to_zero_on_cycle(rng):
    rg = RescaledGraph(cycle4(), 4)
    J = rng.normal(size=rg.flux_shape())
    assert abs(rg.divergence(J).sum()) < 1e-12
    # direct summation over the explicit antisymmetric field
    g = cycle4()
    F = EdgeFlux(g)
    for s in range(g.n_edges):
        F.add((0,), s, rng.normal())
    total = sum(F.divergence(v) for v in F.support_vertices())
    assert abs(total) < 1e-12


def test_divergence_unknown_representation():
    with pytest.raises(GraphError):
        divergence(np.zeros(3))


# --------------------------------------------------------------- unit fluxes
def test_single_edge_unit_flux():
    g = lattice(1)
    J = unit_flux_path(g, Path(((0,), 0), ((0, 1),)))
    assert J.values == {((0,), 0): 1.0}
    assert J.value(((0,), 0), ((1,), 0)) == 1.0
    assert J.value(((1,), 0), ((0,), 0)) == -1.0


@pytest.mark.parametrize("n_steps", [1, 2, 3, 5])
def test_path_divergence_endpoints(n_steps):
    g = lattice(2)
    steps = tuple((i % 2, 1) for i in range(n_steps))
    P = Path(((0, 0), 0), steps)
    J = unit_flux_path(g, P)
    verts = P.vertices(g)
    for k, x in enumerate(verts):
        expected = 1.0 if k == 0 else (-1.0 if k == len(verts) - 1 else 0.0)
        assert J.divergence(x) == expected


def test_two_edge_path_divergence():
    g = ladder()
    P = Path(((0,), 0), ((0, 1), (2, 1)))  # a -> a+1 -> b+1
    J = unit_flux_path(g, P)
    assert [J.divergence(x) for x in P.vertices(g)] == [1.0, 0.0, -1.0]


def test_reversed_path_negates():
    g = ladder()
    P = Path(((0,), 0), ((0, 1), (2, 1), (1, 1)))
    J = unit_flux_path(g, P)
    Jr = unit_flux_path(g, P.reversed(g))
    assert Jr.allclose(-J)


def test_non_simple_path_rejected():
    g = lattice(1)
    with pytest.raises(GraphError):
        unit_flux_path(g, Path(((0,), 0), ((0, 1), (0, -1))))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_periodic_unit_flux_of_lattice_step(d):
    g = lattice(d)
    J = periodic_unit_flux(g, Path(((0,) * d, 0), ((0, 1),)))
    assert np.allclose(periodic_divergence(g, J), 0)
    e1 = np.zeros(d)
    e1[0] = 1
    assert np.allclose(effective_flux(g, J), e1)


def test_periodic_unit_flux_between_fibers():
    g = ladder()
    P = Path(((0,), 0), ((0, 1), (2, 1)))  # from (0,a) to (1,b)
    J = periodic_unit_flux(g, P)
    assert np.allclose(periodic_divergence(g, J), [1.0, -1.0])


def test_periodic_unit_flux_loop_and_displacement():
    g = ladder()
    loop = Path(((0,), 0), ((0, 1), (2, 1), (1, -1), (2, -1)))
    J = periodic_unit_flux(g, loop)
    assert np.allclose(periodic_divergence(g, J), 0)
    assert np.allclose(effective_flux(g, J), 0)
    P = Path(((0,), 1), ((1, 1), (1, 1), (1, 1)))
    assert np.allclose(effective_flux(g, periodic_unit_flux(g, P)), [3.0])


# ------------------------------------------------------------ effective flux
def test_effective_flux_zero():
    g = lattice(2)
    assert np.all(effective_flux(g, np.zeros(2)) == 0)


def test_effective_flux_nearest_neighbour_z2():
    g = lattice(2)
    j = np.array([0.7, -1.3])
    # J(v, v + e_i) = j_i is the canonical stencil value
    assert np.allclose(effective_flux(g, j), j)


@pytest.mark.parametrize("name", GRAPHS)
def test_geometric_equals_combinatorial_when_divergence_free(name, rng):
    g = CATALOG[name]()
    j = rng.normal(size=g.d)
    J = representative_flux(g, j)
    emb = rng.uniform(0, 1, size=(g.n_fibers, g.d))
    assert np.allclose(geometric_effective_flux(g, J, emb), effective_flux(g, J), atol=1e-12)


def test_geometric_effective_flux_depends_on_embedding_off_divergence_free():
    g = ladder()
    J = np.zeros(g.n_edges)
    J[2] = 1.0  # rung a -> b: dive = 1_a - 1_b
    e1 = geometric_effective_flux(g, J, [[0.0], [0.0]])
    e2 = geometric_effective_flux(g, J, [[0.5], [0.0]])
    assert not np.allclose(e1, e2)
    assert np.allclose(e1 - e2, [0.5])


# ------------------------------------------------------- representative flux
def test_representative_flux_zero(rng):
    for name in GRAPHS:
        g = CATALOG[name]()
        assert np.allclose(representative_flux(g, np.zeros(g.d)), 0)


def test_representative_flux_z1():
    g = lattice(1)
    assert np.allclose(representative_flux(g, [1.0]), [1.0])


@pytest.mark.parametrize("name", GRAPHS)
def test_representative_flux_e2_or_e1(name):
    g = CATALOG[name]()
    j = np.zeros(g.d)
    j[-1] = 1.0
    J = representative_flux(g, j)
    assert np.allclose(periodic_divergence(g, J), 0, atol=1e-12)
    assert np.allclose(effective_flux(g, J), j, atol=1e-12)
    # divergence on a two-cell torus window
    rg = RescaledGraph(g, max(2, 2 * g.R0))
    assert np.abs(rg.divergence(rg.lift(J_periodic=J))).max() < 1e-12


def test_disconnected_graph_construction_error():
    g = PeriodicGraph(1, ["a", "b"], [("a", (1,), "a"), ("b", (1,), "b")])
    with pytest.raises(GraphError):
        representative_flux(g, [1.0])
    sub = PeriodicGraph(1, ["o"], [("o", (2,), "o")])
    assert not sub.validate().connected


# ------------------------------------------------------------ divergence solvers
@pytest.mark.parametrize("name", GRAPHS)
def test_solve_divergence_periodic_zero(name):
    g = CATALOG[name]()
    assert np.allclose(solve_divergence_periodic(g, np.zeros(g.n_fibers)), 0)


def test_solve_divergence_periodic_two_fibers():
    g = ladder()
    J = solve_divergence_periodic(g, [1.0, -1.0])
    assert np.allclose(periodic_divergence(g, J), [1.0, -1.0])
    assert np.abs(J).max() <= 1.0 + 1e-12
    assert np.allclose(effective_flux(g, J), 0)


def test_solve_divergence_periodic_random_four_fibers(rng):
    g = cycle4()
    for _ in range(20):
        gv = rng.normal(size=4)
        gv -= gv.mean()
        J = solve_divergence_periodic(g, gv)
        assert np.abs(periodic_divergence(g, J) - gv).max() <= 1e-10 * np.abs(gv).sum()
        assert np.abs(J).max() <= 0.5 * np.abs(gv).sum() + 1e-12
        assert np.allclose(effective_flux(g, J), 0, atol=1e-12)


def test_solve_divergence_rejects_nonzero_mass():
    with pytest.raises(InfeasibleError):
        solve_divergence_periodic(ladder(), [1.0, 0.0])
    rg = RescaledGraph(lattice(1), 4)
    with pytest.raises(InfeasibleError):
        solve_divergence_local(rg, np.ones(rg.mass_shape()))


def test_solve_divergence_local_zero():
    rg = RescaledGraph(lattice(2), 4)
    assert np.allclose(solve_divergence_local(rg, rg.zeros_mass()), 0)


def test_solve_divergence_local_adjacent_pair():
    rg = RescaledGraph(lattice(1), 6)
    g = rg.zeros_mass()
    g[2, 0], g[3, 0] = 1.0, -1.0
    J = solve_divergence_local(rg, g)
    assert np.allclose(rg.divergence(J), g)
    assert np.abs(J).max() == 1.0
    assert np.count_nonzero(J) == 1


def test_solve_divergence_local_support_in_dilated_block(rng):
    rg = RescaledGraph(lattice(2), 8)
    router = LocalRouter(rg)
    block = [(2, 2), (2, 3), (3, 2), (3, 3)]
    for _ in range(10):
        g = rg.zeros_mass()
        vals = rng.normal(size=4)
        vals -= vals.mean()
        for c, v in zip(block, vals):
            g[rg.cell_index(np.array(c))[0], 0] = v
        J = solve_divergence_local(rg, g, router)
        assert np.allclose(rg.divergence(J), g, atol=1e-12)
        touched = set()
        for c, s in zip(*np.nonzero(J)):
            touched.add(tuple(rg.cells[c]))
            touched.add(tuple(rg.cells[rg.head_cell[c, s]]))
        r = router.dilation
        for cell in touched:
            dist = max(min(abs(cell[i] - b[i]) for b in block) for i in range(2))
            assert dist <= r


# ---------------------------------------------------------- shifts and windows
def test_shift_identity_and_group(rng):
    rg = RescaledGraph(ladder(), 5)
    m = rng.normal(size=rg.mass_shape())
    assert np.array_equal(shift_field(rg, m, [0]), m)
    assert np.array_equal(shift_field(rg, shift_field(rg, m, [3]), [-3]), m)


@given(st.integers(-6, 6), st.integers(-6, 6))
def test_shift_composition(a, b):
    rg = RescaledGraph(lattice(2), 4)
    m = np.arange(rg.n_cells, dtype=float)[:, None]
    lhs = shift_field(rg, shift_field(rg, m, [a, b]), [b, a])
    rhs = shift_field(rg, m, [a + b, a + b])
    assert np.array_equal(lhs, rhs)


def test_shift_of_fiber_constant_field():
    rg = RescaledGraph(ladder(), 4)
    m = rg.lift(m_periodic=[2.0, 3.0])
    assert np.array_equal(shift_field(rg, m, [1]), m)


def test_restrict_window_too_large():
    rg = RescaledGraph(lattice(1), 4)
    with pytest.raises(GraphError):
        restrict_window(rg, rg.zeros_mass(), [0], 2)
    w = restrict_window(rg, np.arange(4.0)[:, None], [0], 1)
    assert np.array_equal(w[:, 0], [3.0, 0.0, 1.0])


# ------------------------------------------------------------------------ I/O
def test_graph_from_dict_oriented_asymmetric():
    data = {"d": 1, "V": ["a"], "oriented": True,
            "edges": [{"v": "a", "dz": [1], "v2": "a"}, {"v": "a", "dz": [-1], "v2": "a"},
                      {"v": "a", "dz": [2], "v2": "a"}]}
    g, errors = graph_from_dict(data)
    assert errors and "asymmetric stencil" in errors[0]
    assert not g.validate(errors).ok


def test_graph_round_trip(tmp_path):
    from periodic_transport.graph import graph_to_dict, load_graph
    g = CATALOG["honeycomb"]()
    p = tmp_path / "g.json"
    p.write_text(json.dumps(graph_to_dict(g)))
    g2, rep = load_graph(p)
    assert rep.ok
    assert np.array_equal(g2.dz, g.dz) and np.array_equal(g2.tails, g.tails)
