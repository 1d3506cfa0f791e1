import numpy as np
import pytest
from hypothesis import given, strategies as st

from test_transport import random_ce_path
from periodic_transport.catalog import CATALOG, ladder, lattice
from periodic_transport.costs import WpMeanCost, rescaled_energy
from periodic_transport.graph import RescaledGraph, shift_field
from periodic_transport.transport import action, ce_residual, smooth_space, smooth_time, tilt_energy
from periodic_transport.transport.path import step_energies
from periodic_transport.transport.regularize import (
    RegularisationDomainError,
    heat_kernel,
    heat_kernel_1d,
    heat_kernel_floor,
    smooth_space_path,
    time_lipschitz,
)


def random_pair(rg, rng):
    m = rng.uniform(0, 1, rg.mass_shape()) * rg.eps ** rg.d
    m[rng.random(m.shape) < 0.2] = 0.0
    J = rng.normal(size=rg.flux_shape()) * rg.eps ** (rg.d - 1)
    # fluxes only where both endpoint masses are positive keep the energy finite
    mt = m.ravel()[rg.tail_vertex]
    mh = m.ravel()[rg.head_vertex]
    J[(mt == 0) | (mh == 0)] = 0.0
    return m, J


# ---------------------------------------------------------------- R_delta
def test_tilt_domain():
    rg = RescaledGraph(lattice(1), 4)
    F = WpMeanCost(rg.base)
    for delta in (0.0, 1.0, -0.1):
        with pytest.raises(RegularisationDomainError):
            tilt_energy(rg, rg.zeros_mass(), rg.zeros_flux(), delta, F)


def test_tilt_small_delta_is_identity(rng):
    rg = RescaledGraph(ladder(), 4)
    m, J = random_pair(rg, rng)
    m2, J2 = tilt_energy(rg, m, J, 1e-12, WpMeanCost(rg.base))
    assert np.abs(m2 - m).max() <= 1e-10 and np.abs(J2 - J).max() <= 1e-10


def test_tilt_energy_bound_and_linf(rng):
    rg = RescaledGraph(ladder(), 4)
    F = WpMeanCost(rg.base, mean="geometric", reference_m=[1.0, 2.0])
    ref = F.energy_periodic(F.reference_m, F.reference_J)
    for _ in range(100):
        m, J = random_pair(rg, rng)
        delta = rng.uniform(0.01, 0.99)
        m2, J2 = tilt_energy(rg, m, J, delta, F)
        e, e2 = rescaled_energy(F, rg, m, J), rescaled_energy(F, rg, m2, J2)
        assert e2 <= (1 - delta) * e + delta * ref + 1e-9
        assert np.abs(m2).max() <= (1 - delta) * np.abs(m).max() + delta * rg.eps * F.reference_m.max() + 1e-15


# --------------------------------------------------------------- S_lambda
def test_heat_kernel_domain():
    with pytest.raises(RegularisationDomainError):
        heat_kernel_1d(8, 0.0)


@pytest.mark.parametrize("N,lam", [(4, 0.01), (16, 0.001), (9, 0.5), (32, 3.0)])
def test_heat_kernel_normalised_positive_symmetric(N, lam):
    H = heat_kernel_1d(N, lam)
    assert H.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(H > 0)
    assert np.allclose(H[1:], H[1:][::-1], atol=1e-15)


def test_smoothing_constant_unchanged():
    rg = RescaledGraph(ladder(), 6)
    m = rg.lift(m_periodic=[0.3, 0.7])
    J = rg.lift(J_periodic=[0.1, -0.2, 0.5])
    m2, J2 = smooth_space(rg, m, J, 0.01)
    assert np.allclose(m2, m, atol=1e-15) and np.allclose(J2, J, atol=1e-15)


@pytest.mark.parametrize("name", ["lattice1", "ladder", "lattice2"])
def test_smoothing_commutes_with_shifts(name, rng):
    rg = RescaledGraph(CATALOG[name](), 5)
    m, J = random_pair(rg, rng)
    z = [2] + [1] * (rg.d - 1)
    a = smooth_space(rg, shift_field(rg, m, z), shift_field(rg, J, z), 0.02)
    b = smooth_space(rg, m, J, 0.02)
    assert np.array_equal(a[0], shift_field(rg, b[0], z))
    assert np.array_equal(a[1], shift_field(rg, b[1], z))


def test_smoothing_preserves_ce(rng):
    rg = RescaledGraph(ladder(), 5)
    p = random_ce_path(rg, 4, rng)
    assert ce_residual(smooth_space_path(p, 0.01)).residual <= 1e-12


@pytest.mark.parametrize("d,lam", [(1, 0.001), (2, 0.002)])
def test_smoothing_positivity_floor(d, lam):
    rg = RescaledGraph(lattice(d), 8)
    m = rg.zeros_mass()
    m[3, 0] = 2.0
    m2, _ = smooth_space(rg, m, rg.zeros_flux(), lam)
    c = heat_kernel_floor(rg, lam)
    assert c > 0 and np.all(m2 > 0)
    assert m2.min() >= c * rg.eps ** d * m.sum() * (1 - 1e-12)


def test_smoothing_energy_non_increase(rng):
    rg = RescaledGraph(ladder(), 6)
    F = WpMeanCost(rg.base)
    for _ in range(100):
        m, J = random_pair(rg, rng)
        lam = 10 ** rng.uniform(-4, -1)
        assert rescaled_energy(F, rg, *smooth_space(rg, m, J, lam)) <= rescaled_energy(F, rg, m, J) + 1e-10


def test_heat_kernel_flat_order():
    rg = RescaledGraph(lattice(2), 4)
    H = heat_kernel(rg, 0.01)
    assert H.sum() == pytest.approx(1.0) and H[0] == H.max()


# ----------------------------------------------------------------- T_tau
def test_smooth_time_domain(rng):
    rg = RescaledGraph(lattice(1), 4)
    p = random_ce_path(rg, 8, rng)
    for tau in (0.0, 0.06, 0.5, 0.6):
        with pytest.raises(RegularisationDomainError):
            smooth_time(p, tau)


def test_smooth_time_constant_path():
    rg = RescaledGraph(ladder(), 4)
    from periodic_transport.transport import DiscretePath
    p = DiscretePath.static(rg, np.full(rg.mass_shape(), 0.125), K=8)
    q = smooth_time(p, 0.25)
    assert np.array_equal(q.masses[0], p.masses[0]) and q.interval == (0.25, 0.75)


@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([1, 2, 3]))
def test_smooth_time_properties(seed, r):
    rng = np.random.default_rng(seed)
    rg = RescaledGraph(ladder(), 4)
    p = random_ce_path(rg, 12, rng, scale=0.2)
    tau = r * p.dt
    q = smooth_time(p, tau)
    assert ce_residual(q).residual <= 1e-12
    assert time_lipschitz(q) <= np.abs(p.masses).max() / tau + 1e-12
    F = WpMeanCost(rg.base)
    # Jensen: smoothed steps are averages of original steps
    assert action(q, F) <= action(p, F) + 1e-12


def test_time_averaging_jensen_per_step(rng):
    rg = RescaledGraph(lattice(1), 5)
    F = WpMeanCost(rg.base, mean="harmonic")
    for _ in range(100):
        p = random_ce_path(rg, 6, rng, scale=0.2)
        q = smooth_time(p, p.dt)
        e, eq = step_energies(p, F), step_energies(q, F)
        w = np.array([0.5, 1.0, 0.5]) / 2.0
        # step k of q averages steps k, k+1, k+2 of the trapezoid energies of p
        bound = np.array([w @ e[k:k + 3] for k in range(len(eq))])
        assert np.all(eq <= bound + 1e-12)
