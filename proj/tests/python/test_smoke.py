"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import duet


def test_eos_basics():
    eos = duet.PolytropicEos(kpress=1.0, gamma=2.0)
    assert eos.pressure(2.0) == pytest.approx(4.0)
    assert eos.a_of(2.0) == pytest.approx(4.0)
    assert eos.a_prime(3.0) == pytest.approx(6.0)
    assert eos.a_prime_inv(6.0) == pytest.approx(3.0)
    A, B = eos.scaling_coeffs(0.25)
    assert A == pytest.approx(4.0)
    assert B == pytest.approx(1.0)
    with pytest.raises(ValueError):
        duet.PolytropicEos(kpress=1.0, gamma=1.2)


def test_lane_emden_gold_case():
    eos = duet.PolytropicEos(kpress=1.0, gamma=2.0)
    unit = duet.solve_unit(eos)
    assert unit.mass == pytest.approx(1.0, abs=1e-10)
    assert unit.radius == pytest.approx(math.sqrt(math.pi / 2.0), rel=1e-4)
    assert unit.lam < 0.0
    small = duet.rescale(unit, 0.25)
    assert small.mass == pytest.approx(0.25, rel=1e-12)
    assert small.radius == pytest.approx(unit.radius, rel=1e-12)  # B = 1 at gamma 2
    assert duet.lambda_of_mass(unit, 0.25) == pytest.approx(small.lam, rel=1e-4)


def test_grid_density_and_potential():
    eos = duet.PolytropicEos(kpress=1.0, gamma=2.0)
    unit = duet.solve_unit(eos)
    rho = duet.to_grid(unit, 32, unit.radius / 12.0, (0.0, 0.0, 0.0))
    assert rho.mass() == pytest.approx(1.0, rel=1e-12)
    values = rho.values
    assert values.shape == (32, 32, 32)
    assert values.min() >= 0.0

    e = duet.energies(rho, 0.0, eos)
    assert e.TJ == 0.0
    assert e.EJ == pytest.approx(e.U - 0.5 * e.Gself, rel=1e-12)
    assert e.EJ == pytest.approx(unit.e0, rel=0.05)

    V = duet.potential(rho)
    bound = duet.potential_sup_bound(rho)
    assert V.max() <= bound


def test_round_trip_snapshot(tmp_path):
    values = np.zeros((4, 5, 6))
    values[2, 2, 3] = 1.5
    rho = duet.GridDensity(values, h=0.5, origin=(0.0, -1.0, 2.0))
    path = str(tmp_path / "snap.gpd")
    duet.write_gpd1(rho, path)
    back = duet.read_gpd1(path)
    np.testing.assert_array_equal(back.values, values)
    assert back.h == 0.5


def test_kepler_and_domains():
    assert duet.kepler_argmin(0.25, 1.0) == pytest.approx(16.0)
    d = duet.make_domains(1.0, 0.5)
    assert d.eta == pytest.approx(16.0)
    assert d.ball_radius == pytest.approx(4.0)
    g_eps, g0 = duet.g_functions(1.0, 0.0, 1.0, 0.5)
    assert g0 == 0.0


def test_minimize_coarse_two_body():
    cfg = duet.SolverConfig()
    cfg.J = 0.5
    cfg.m = 0.2
    cfg.gamma = 2.0
    cfg.cells_per_radius = 8
    cfg.coupling = "quadrupole"
    cfg.max_iter = 300
    res = duet.minimize(cfg)
    assert res.converged
    assert all(lam < 0.0 for lam in res.multipliers)
    assert res.breakdown.EJ < res.seed_energy
    ratio = duet.separation_ratio(res)
    assert 0.9 < ratio < 1.1
    planet = res.densities["planet"]
    assert planet.mass() == pytest.approx(0.2, rel=1e-10)
    stats = duet.support_stats(planet)
    assert stats.component_count == 1


def test_exponent_fit():
    samples = [(m, m**1.5) for m in (0.05, 0.1, 0.2, 0.5)]
    slope, intercept, residual = duet.exponent_fit(samples)
    assert slope == pytest.approx(1.5, abs=1e-12)
    assert residual < 1e-12
