import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import w1_circle, w1_torus_network
from test_transport import random_ce_path
from periodic_transport.catalog import CATALOG, ladder, lattice
from periodic_transport.graph import RescaledGraph
from periodic_transport.transport import TorusMeasure, embed_density, embed_flux, kr_distance, weak_ce_residual
from periodic_transport.transport.embedding import TrigTestFunction, flux_tv_bound


# --------------------------------------------------------------- embedding
def test_point_mass_embeds_uniformly():
    rg = RescaledGraph(lattice(2), 4)
    m = rg.zeros_mass()
    m[5, 0] = 1.0
    mu = embed_density(rg, m)
    assert mu.total() == 1.0
    dens = mu.density.ravel()
    assert dens[5] == pytest.approx(16.0) and np.count_nonzero(dens) == 1


def test_embed_density_sums_fibers(rng):
    rg = RescaledGraph(ladder(), 5)
    m = rng.uniform(size=rg.mass_shape())
    assert np.allclose(embed_density(rg, m).masses, m.sum(axis=1))


@pytest.mark.parametrize("name", ["lattice1", "ladder", "lattice2", "long_range", "honeycomb", "diagonal2"])
def test_flux_tv_bound(name, rng):
    g = CATALOG[name]()
    rg = RescaledGraph(g, 4)
    J = rng.normal(size=rg.flux_shape())
    nu = embed_flux(rg, J)
    bound = flux_tv_bound(rg, J)
    lower = [nu.tv_lower(r) for r in (1, 2, 4)]
    assert np.all(np.diff(lower) >= -1e-12)
    assert lower[-1] <= nu.tv_upper() + 1e-12
    assert nu.tv_upper() <= bound + 1e-12
    assert np.allclose(nu.cube_integrals(2).reshape(-1, rg.d).sum(axis=0), nu.total(), atol=1e-12)


def test_flux_embedding_total_is_effective_flux():
    rg = RescaledGraph(lattice(1), 4)
    J = np.full(rg.flux_shape(), 0.25)
    # per edge weight eps^(1-d) J dz = 0.25, four edges, times eps^d
    assert np.allclose(embed_flux(rg, J).total(), [0.25])


@pytest.mark.parametrize("name", ["lattice1", "ladder", "lattice2", "honeycomb", "long_range"])
def test_weak_ce_residual_of_embedded_paths(name, rng):
    g = CATALOG[name]()
    rg = RescaledGraph(g, 4)
    p = random_ce_path(rg, 5, rng, scale=0.3)
    for _ in range(20):
        phi = TrigTestFunction.random(rng, rg.d)
        assert weak_ce_residual(p, phi) <= 1e-8


def test_weak_ce_residual_detects_violation(rng):
    rg = RescaledGraph(lattice(1), 4)
    p = random_ce_path(rg, 3, rng, scale=0.3)
    p.fluxes[1, 0, 0] += 1.0
    phi = TrigTestFunction(np.array([1]), np.array([0.3]), 1.0, 0.2)
    assert weak_ce_residual(p, phi) > 1e-3


# ---------------------------------------------------------------------- KR
def test_kr_identical_is_zero(rng):
    mu = TorusMeasure(6, rng.uniform(size=6))
    assert kr_distance(mu, mu) == pytest.approx(0.0, abs=1e-12)


def test_kr_point_masses_distance_03():
    a, b = np.zeros(10), np.zeros(10)
    a[2], b[5] = 1.0, 1.0
    assert kr_distance(TorusMeasure(10, a), TorusMeasure(10, b)) == pytest.approx(0.3, abs=1e-12)


def test_kr_cap_active():
    mu2 = TorusMeasure(5, np.full(5, 0.2))
    assert kr_distance(2 * mu2, mu2) == pytest.approx(1.0, abs=1e-12)


def test_kr_grid_mismatch():
    with pytest.raises(ValueError):
        kr_distance(TorusMeasure(4, np.ones(4)), TorusMeasure(5, np.ones(5)))


@pytest.mark.parametrize("N", [5, 8, 12])
def test_kr_equals_w1_circle(N, rng):
    for _ in range(5):
        a, b = rng.uniform(size=N), rng.uniform(size=N)
        a /= a.sum()
        b /= b.sum()
        ref = w1_circle(a, b, 1.0 / N)
        assert kr_distance(TorusMeasure(N, a), TorusMeasure(N, b)) == pytest.approx(ref, abs=1e-9)


def test_kr_equals_w1_torus_network(rng):
    N, scale = 4, 1000
    for _ in range(3):
        a = rng.multinomial(scale, np.ones(N * N) / (N * N)).reshape(N, N)
        b = rng.multinomial(scale, np.ones(N * N) / (N * N)).reshape(N, N)
        ref = w1_torus_network(a, b, N, 2, 1.0 / N, scale)
        val = kr_distance(TorusMeasure(N, a / scale), TorusMeasure(N, b / scale))
        assert val == pytest.approx(ref, abs=1e-9)


@given(st.integers(0, 2 ** 31 - 1))
def test_kr_norm_axioms(seed):
    rng = np.random.default_rng(seed)
    N = 6
    mus = [TorusMeasure(N, rng.uniform(size=(N, N)) / 10) for _ in range(3)]
    d01 = kr_distance(mus[0], mus[1])
    assert d01 == pytest.approx(kr_distance(mus[1], mus[0]), abs=1e-10)
    assert d01 <= kr_distance(mus[0], mus[2]) + kr_distance(mus[2], mus[1]) + 1e-8
    assert kr_distance(2.5 * mus[0], 2.5 * mus[1]) == pytest.approx(2.5 * d01, rel=1e-8, abs=1e-12)
