import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import grid_search_cell, quadratic_cell_oracle
from periodic_transport.catalog import CATALOG, ladder, lattice
from periodic_transport.cell import (
    build_parametrization,
    f_hom_table,
    recession_f_hom,
    solve_cell,
    table_to_csv,
    verify_convexity,
    verify_growth_hom,
    verify_rescale_invariance,
)
from periodic_transport.costs import CostDomainError, WpMeanCost
from periodic_transport.graph import effective_flux, periodic_divergence


# ---------------------------------------------------------- parametrisation
def test_parametrization_z1():
    par = build_parametrization(lattice(1), [1.5])
    assert par.nullity == 0 and np.allclose(par.J_part, [1.5])


def test_parametrization_z2_singleton():
    par = build_parametrization(lattice(2), [0.3, -0.2])
    # one fiber: the divergence row vanishes identically, Eff fixes both coordinates
    assert par.rank == 2 and par.nullity == 0
    assert np.allclose(par.J_part, [0.3, -0.2])


@pytest.mark.parametrize("name,k", [("ladder", 1), ("triple_ladder", 2), ("zigzag", 1),
                                    ("diagonal2", 2), ("honeycomb", 0), ("long_range", 1)])
def test_parametrization_nullity(name, k):
    g = CATALOG[name]()
    par = build_parametrization(g, np.ones(g.d))
    assert par.nullity == k
    for c in np.eye(k) if k else []:
        J = par.flux(c)
        assert np.allclose(periodic_divergence(g, J), 0) and np.allclose(effective_flux(g, J), 1)


# ----------------------------------------------------------------- solve_cell
@pytest.mark.parametrize("name", sorted(CATALOG))
def test_zero_flux_gives_zero(name):
    g = CATALOG[name]()
    s = solve_cell(g, WpMeanCost(g, p=2), 1.3, np.zeros(g.d))
    assert s.value == 0.0 and np.all(s.J_opt == 0)


def test_closed_form_z1():
    s = solve_cell(lattice(1), WpMeanCost(lattice(1)), 2.0, [3.0])
    assert np.isclose(s.value, 4.5, rtol=1e-12)


@pytest.mark.parametrize("j,expected", [([1, 0], 1.0), ([0, 1], 1.0), ([1, 1], 2.0)])
def test_closed_form_z2(j, expected):
    g = lattice(2)
    assert np.isclose(solve_cell(g, WpMeanCost(g), 1.0, j).value, expected, rtol=1e-12)


def test_negative_rho_rejected():
    with pytest.raises(CostDomainError):
        solve_cell(lattice(1), WpMeanCost(lattice(1)), -1.0, [0.0])


def test_empty_domain_reports_infinity():
    g = lattice(1)
    s = solve_cell(g, WpMeanCost(g), 0.0, [1.0])
    assert s.value == np.inf and s.diagnostic


def test_ladder_against_grid_search():
    g = ladder()
    F = WpMeanCost(g, p=2)
    s = solve_cell(g, F, 1.0, [1.0])
    ref, m, c = grid_search_cell(g, F, 1.0, [1.0], final_step=1e-8)
    assert abs(s.value - ref) <= 1e-6
    f = s.feasibility(g)
    assert max(f["div"], f["eff"], f["mass"]) <= 1e-10 and f["min_m"] >= 0


@pytest.mark.parametrize("name", ["ladder", "triple_ladder", "zigzag", "diagonal2", "long_range"])
@pytest.mark.parametrize("mean", ["arithmetic", "harmonic", "minimum"])
def test_against_quadratic_oracle(name, mean, rng):
    g = CATALOG[name]()
    F = WpMeanCost(g, p=2, mean=mean, weights=rng.uniform(0.5, 2, (g.n_edges, 2)))
    rho, j = rng.uniform(0.3, 3), rng.uniform(-1, 1, g.d)
    ref, _ = quadratic_cell_oracle(g, F, rho, j)
    s = solve_cell(g, F, rho, j)
    assert s.value <= ref + 1e-6 * (1 + ref)
    assert abs(s.value - ref) <= 1e-5 * (1 + ref)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_non_quadratic_against_grid_search(p, rng):
    g = ladder()
    F = WpMeanCost(g, p=p, mean="geometric")
    s = solve_cell(g, F, 1.2, [0.7])
    ref, _, _ = grid_search_cell(g, F, 1.2, [0.7])
    assert abs(s.value - ref) <= 1e-5


# ------------------------------------------------------------------- tables
def test_table_singleton_matches_solve():
    g = ladder()
    F = WpMeanCost(g)
    (row,) = f_hom_table(g, F, [1.5], [[0.4]])
    assert row.value == solve_cell(g, F, 1.5, [0.4]).value


def test_table_symmetric_under_j_reflection():
    g = lattice(2)
    F = WpMeanCost(g, mean="geometric")
    js = [np.array([a, b]) for a in np.linspace(-1, 1, 5) for b in np.linspace(-1, 1, 5)]
    rows = f_hom_table(g, F, [1.0], js)
    vals = {tuple(np.round(r.j, 12)): r.value for r in rows}
    for j, v in vals.items():
        assert np.isclose(v, vals[tuple(np.round(-np.array(j), 12)) if any(j) else j], rtol=1e-10)


def test_table_rows_ordered_and_csv():
    g = lattice(1)
    rows = f_hom_table(g, WpMeanCost(g), [1, 2], [[0], [1], [3]])
    assert [float(r.value) for r in rows] == pytest.approx([0, 1, 9, 0, 0.5, 4.5], rel=1e-12)
    text = table_to_csv(rows, 1, graph=g)
    assert text.splitlines()[0].startswith("rho,j1,value")


# ---------------------------------------------------------------- recession
def test_recession_f_hom_w1_constant():
    g = lattice(1)
    r = recession_f_hom(g, WpMeanCost(g, p=1), 0.0, [1.0])
    assert np.isclose(r.value, 1.0)


def test_recession_f_hom_zero_flux_direction():
    g = lattice(1)
    assert recession_f_hom(g, WpMeanCost(g), 1.0, [0.0]).value == 0.0


def test_recession_f_hom_pure_flux_diverges():
    g = lattice(1)
    r = recession_f_hom(g, WpMeanCost(g), 0.0, [1.0])
    assert r.value == np.inf


# -------------------------------------------------------------- convexity
def test_convexity_collinear_identical():
    g = lattice(1)
    assert verify_convexity(g, WpMeanCost(g), [((1.0, [1.0]), (1.0, [1.0]))]) <= 1e-12


def test_convexity_closed_form_points():
    g = lattice(1)
    v = verify_convexity(g, WpMeanCost(g), [((1.0, [0.0]), (1.0, [2.0]))])
    assert np.isclose(v, 1.0 - 2.0)


def test_convexity_ladder_random_pairs(rng):
    g = ladder()
    F = WpMeanCost(g, weights=[[1.0, 2.0], [0.5, 1.0], [1.0, 3.0]])
    tol = 1e-10
    pairs = [((rng.uniform(0.1, 3), rng.uniform(-2, 2, 1)), (rng.uniform(0.1, 3), rng.uniform(-2, 2, 1)))
             for _ in range(200)]
    assert verify_convexity(g, F, pairs, tol=tol) <= 5 * tol


# ------------------------------------------------------------------ growth
def test_growth_hom_z1_unit_constants(rng):
    g = lattice(1)
    samples = [(rng.uniform(1e-3, 4), rng.uniform(-4, 4, 1)) for _ in range(100)]
    c, C, viol = verify_growth_hom(g, WpMeanCost(g), samples, c=1.0, C=1.0)
    assert viol <= 1e-12


def test_growth_hom_zero_flux_samples():
    g = ladder()
    _, _, viol = verify_growth_hom(g, WpMeanCost(g), [(1.0, [0.0]), (2.0, [0.0])], c=1.0, C=0.0)
    assert viol <= 0


def test_growth_hom_fitted_ladder(rng):
    g = ladder()
    samples = [(rng.uniform(0.1, 4), rng.uniform(-4, 4, 1)) for _ in range(60)]
    c, C, viol = verify_growth_hom(g, WpMeanCost(g), samples)
    assert c > 0 and viol <= 1e-8


# ------------------------------------------------------------- rescaling
def test_rescale_invariance_z1_unit_point():
    g = lattice(1)
    worst, rows = verify_rescale_invariance(g, WpMeanCost(g), 2, [(1.0, [1.0]), (1.0, [0.0])])
    assert worst <= 1e-6
    assert np.isclose(rows[0][2], 1.0) and np.isclose(rows[0][3], 1.0)
    assert rows[1][2] == rows[1][3] == 0.0


def test_rescale_invariance_ladder(rng):
    g = ladder()
    pts = [(rng.uniform(0.5, 2), rng.uniform(-1, 1, 1)) for _ in range(3)]
    worst, _ = verify_rescale_invariance(g, WpMeanCost(g, mean="geometric"), 2, pts)
    assert worst <= 1e-5


# ------------------------------------------------------ properties (hypothesis)
@given(st.floats(0.1, 5), st.floats(-3, 3), st.sampled_from([1.0, 2.0, 4.0]))
def test_closed_form_property_z1(rho, j, p):
    g = lattice(1)
    s = solve_cell(g, WpMeanCost(g, p=p), rho, [j])
    assert np.isclose(s.value, abs(j) ** p / rho ** (p - 1), rtol=1e-9, atol=1e-14)


@given(st.floats(0.2, 4), st.floats(-2, 2), st.floats(0.2, 5))
def test_one_homogeneity_ladder(rho, j, lam):
    g = ladder()
    F = WpMeanCost(g, mean="geometric")
    a = solve_cell(g, F, rho, [j]).value
    b = solve_cell(g, F, lam * rho, [lam * j]).value
    assert np.isclose(b, lam * a, rtol=1e-7, atol=1e-12)
