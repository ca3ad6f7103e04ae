import math

import numpy as np
import pytest

from cohomq.curvature import constant_coefficients, einstein_gjms_coefficients
from cohomq.errors import ConfigError
from cohomq.geometry import make_flat, make_sphere
from cohomq.nehari import (
    energy_factor,
    least_energy,
    nehari_defect,
    nehari_project,
    projected_energy,
    shooting_oracle,
    solution_strong_residual,
)
from cohomq.reduced import assemble, make_grid, norm_beta_a

P_FLAT = 4.0


def flat_operator(L, n):
    return assemble(make_grid(make_flat(L), 0.0, L, n), constant_coefficients(1.0))


@pytest.fixture(scope="module")
def oracles():
    return {L: shooting_oracle(1.0, P_FLAT, L) for L in (2.0, 5.0, 10.0)}


def test_projection_lands_on_nehari_set(sphere33, yamabe33, rng):
    opr = assemble(make_grid(sphere33, 0.3, 2.0, 100), yamabe33)
    w = rng.random(opr.grid.nodes.size)
    w[[0, -1]] = 0.0
    p = 10 / 3
    v = nehari_project(opr, w, p)
    wf = opr.restrict(v)
    lp = float(opr.mass_free @ np.abs(wf) ** p)
    assert opr.energy_form(wf) == pytest.approx(lp, rel=1e-12)
    # the projected energy is scale invariant and matches the energy of the projection
    assert projected_energy(opr, 7.0 * w, p) == pytest.approx(projected_energy(opr, w, p), rel=1e-12)
    assert projected_energy(opr, w, p) == pytest.approx(energy_factor(p) * opr.energy_form(wf), rel=1e-12)
    np.testing.assert_allclose(nehari_project(opr, v, p), v, rtol=1e-12)


def test_projection_closed_form():
    # for w = c * phi the scaling is t with t^(p-2) = ||phi||^2 / int phi^p
    opr = flat_operator(math.pi, 200)
    phi = np.sin(opr.grid.nodes)
    pf = opr.restrict(phi)
    t = (opr.energy_form(pf) / float(opr.mass_free @ pf**4)) ** 0.5
    np.testing.assert_allclose(nehari_project(opr, 3.0 * phi, 4.0), t * phi, rtol=1e-12, atol=1e-15)


def test_projection_rejects_zero():
    opr = flat_operator(1.0, 32)
    with pytest.raises(ConfigError):
        nehari_project(opr, np.zeros(33), 4.0)


def test_oracle_known_limits(oracles):
    # on a long interval the ground state approaches sqrt(2) sech(t - L/2), energy 4/3
    big = oracles[10.0]
    assert big.energy == pytest.approx(4.0 / 3.0, rel=1e-3)
    assert np.max(big.w) == pytest.approx(math.sqrt(2.0), rel=1e-3)
    assert big.length == pytest.approx(10.0, abs=1e-10)
    for o in oracles.values():
        np.testing.assert_allclose(o.w, o.w[::-1], atol=1e-6)
    assert oracles[2.0].energy > oracles[5.0].energy > oracles[10.0].energy


def test_oracle_rejects_bad_input():
    for args in ((0.0, 4.0, 1.0), (1.0, 2.0, 1.0), (1.0, 4.0, -1.0)):
        with pytest.raises(ConfigError):
            shooting_oracle(*args)


@pytest.mark.parametrize("L", [2.0, 5.0, 10.0])
def test_fem_matches_shooting_oracle(oracles, L):
    sol = least_energy(flat_operator(L, 2000), P_FLAT)
    assert sol.converged
    assert abs(sol.energy - oracles[L].energy) / oracles[L].energy < 1e-5
    # profiles agree too
    w_o = np.interp(sol.nodes, oracles[L].t, oracles[L].w)
    assert np.max(np.abs(np.abs(sol.w) - w_o)) < 1e-3 * np.max(w_o)


def test_energy_refinement_second_order(oracles):
    errs = [abs(least_energy(flat_operator(5.0, n), P_FLAT).energy - oracles[5.0].energy) for n in (100, 200, 400)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 3.5) & (ratios < 4.5))


def test_different_starts_agree(rng):
    opr = flat_operator(3.0, 300)
    a = least_energy(opr, P_FLAT)
    init = rng.random(opr.grid.nodes.size) + 0.1
    init[[0, -1]] = 0.0
    b = least_energy(opr, P_FLAT, init=init)
    assert b.converged
    assert b.energy == pytest.approx(a.energy, rel=1e-6)
    c = least_energy(opr, P_FLAT, init=1e3 * init)
    assert c.energy == pytest.approx(b.energy, rel=1e-8)


def test_domain_monotonicity(sphere33, yamabe33):
    def c(a, b):
        return least_energy(assemble(make_grid(sphere33, a, b, 200), yamabe33)).energy

    nested = [(0.0, math.pi), (0.1, 2.9), (0.3, 2.5), (0.6, 2.0), (0.9, 1.5)]
    energies = [c(a, b) for a, b in nested]
    assert all(x < y for x, y in zip(energies, energies[1:]))
    assert c(0.2, 0.8) > c(0.1, 0.9)


@pytest.mark.parametrize("interval", [(0.0, 1.0), (0.5, 2.0), (2.0, math.pi), (0.0, math.pi)])
def test_solution_properties(sphere33, yamabe33, interval):
    opr = assemble(make_grid(sphere33, *interval, 200), yamabe33)
    sol = least_energy(opr)
    assert sol.converged and sol.energy > 1e-8
    assert nehari_defect(opr, sol) < 1e-8
    # at the critical exponent 1/2 - 1/p = m/N, so J = (m/N) ||w||^2
    assert sol.energy == pytest.approx(1 / 5 * norm_beta_a(opr, sol.w) ** 2, rel=1e-12)
    assert solution_strong_residual(opr, sol) < 0.05
    assert sol.w.shape == sol.nodes.shape
    d = sol.to_dict()
    assert d["interval"] == list(interval) and d["converged"]


def test_exponent_range(sphere33, yamabe33):
    opr = assemble(make_grid(sphere33, 0.0, 1.0, 64), yamabe33)
    for p in (2.0, 1.5, 3.5):
        with pytest.raises(ConfigError):
            least_energy(opr, p)
    assert least_energy(opr, 3.0).converged


def test_iteration_cap_reported(sphere33, yamabe33):
    opr = assemble(make_grid(sphere33, 0.0, 1.0, 64), yamabe33)
    sol = least_energy(opr, max_iter=1)
    assert not sol.converged
    assert "not converged" in sol.flags
    with pytest.raises(ConfigError):
        least_energy(opr, max_iter=0)
    with pytest.raises(ConfigError):
        least_energy(opr, init=np.ones(5))


def test_fourth_order_solve():
    s = make_sphere(4, 5)
    co = einstein_gjms_coefficients(2, (2.0, 3.0))
    opr = assemble(make_grid(s, 0.0, 1.5, 200), co)
    sol = least_energy(opr)
    assert sol.converged and sol.energy > 0
    assert nehari_defect(opr, sol) < 1e-8
    # 1/2 - 1/p = 2/N at the critical exponent
    assert sol.energy == pytest.approx(2 / s.dim_N * sol.norm_sq, rel=1e-12)
    assert any("m=2" in f for f in sol.flags)
