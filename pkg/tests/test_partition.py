import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohomq.curvature import constant_coefficients, einstein_gjms_coefficients
from cohomq.errors import ConfigError, NumericalError
from cohomq.partition import (
    EnergyTable,
    Partition,
    attach_solutions,
    brute_force,
    default_eta_schedule,
    dp_partition,
    energy_table,
    extract_partition_data,
    golden_section,
    make_partition,
    refine,
    segregation_flow,
    stitch_nodal,
)


def synthetic_table(E):
    E = np.asarray(E, dtype=float)
    G = E.shape[0]
    return EnergyTable(points=np.linspace(0.0, 1.0, G), E=E, valid=np.isfinite(E), p=3.0, n=0, key={})


@pytest.fixture(scope="module")
def refined2(sphere33, yamabe33, table33):
    return refine(sphere33, yamabe33, None, dp_partition(table33, 2))


@pytest.fixture(scope="module")
def segregated(sphere33, yamabe33):
    return {ell: segregation_flow(sphere33, yamabe33, None, ell) for ell in (2, 3)}


def test_table_properties(table33):
    G = table33.G
    E = table33.E
    assert G == 24 and table33.p == pytest.approx(10 / 3)
    upper = np.triu(np.ones((G, G), bool), 1)
    assert np.all(table33.valid[upper]) and not np.any(table33.valid[~upper])
    assert np.all(E[upper] > 0)
    # the profile is symmetric under t -> pi - t
    i, j = np.nonzero(upper)
    np.testing.assert_allclose(E[i, j], E[G - 1 - j, G - 1 - i], rtol=1e-6)
    # nested intervals have larger least energy
    for i in range(G - 1):
        row = E[i, i + 1:]
        assert np.all(np.diff(row) < 0)
    for j in range(1, G):
        col = E[:j, j]
        assert np.all(np.diff(col) > 0)


def test_table_cache_and_jobs(tmp_path, sphere33, yamabe33):
    a = energy_table(sphere33, yamabe33, None, 10, n=64, cache_dir=tmp_path)
    assert not a.from_cache
    assert len(list(tmp_path.glob("*.json"))) == 1
    b = energy_table(sphere33, yamabe33, None, 10, n=64, cache_dir=tmp_path)
    assert b.from_cache
    np.testing.assert_array_equal(np.nan_to_num(a.E), np.nan_to_num(b.E))
    c = energy_table(sphere33, yamabe33, None, 10, n=64, jobs=2)
    np.testing.assert_array_equal(np.nan_to_num(a.E), np.nan_to_num(c.E))
    # a different key misses the cache
    d = energy_table(sphere33, yamabe33, None, 10, n=80, cache_dir=tmp_path)
    assert not d.from_cache


def test_table_rejects_small_G(sphere33, yamabe33):
    with pytest.raises(ConfigError):
        energy_table(sphere33, yamabe33, None, 7)


@pytest.mark.parametrize("ell", [1, 2, 3, 4])
def test_dp_equals_brute_force(table33, ell):
    part = dp_partition(table33, ell)
    idx, total = brute_force(table33, ell)
    assert tuple(part.breakpoint_indices) == idx
    assert part.total_energy == total
    assert part.method == "dp" and len(part.breakpoints) == ell - 1
    assert part.diagnostics["table_cell"] == pytest.approx(math.pi / 23)


@settings(max_examples=60, deadline=None)
@given(st.integers(5, 9), st.integers(1, 4), st.integers(0, 2**32 - 1), st.booleans())
def test_dp_equals_brute_force_random(G, ell, seed, coarse):
    ell = min(ell, G - 1)
    rng = np.random.default_rng(seed)
    E = np.full((G, G), np.nan)
    vals = rng.integers(1, 4, size=(G, G)).astype(float) if coarse else rng.random((G, G))
    iu = np.triu_indices(G, 1)
    E[iu] = vals[iu]
    table = synthetic_table(E)
    part = dp_partition(table, ell)
    idx, total = brute_force(table, ell)
    assert part.total_energy == total
    assert tuple(part.breakpoint_indices) == idx
    # every reported tie is optimal and every optimal tuple is reported
    optimal = set()
    for t in itertools.combinations(range(1, G - 1), ell - 1):
        cuts = (0, *t, G - 1)
        s = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            s += E[a, b]
        if s <= total + 1e-12 * max(1.0, total):
            optimal.add(t)
    if len(optimal) > 1:
        assert {tuple(t) for t in part.ties} == optimal
    else:
        assert part.ties == []


def test_constructed_tie():
    G = 5
    E = np.full((G, G), np.nan)
    for i, j in zip(*np.triu_indices(G, 1)):
        E[i, j] = 1.0 + (j - i - 2) ** 2
    part = dp_partition(synthetic_table(E), 2)
    # a convex cost in the piece length makes the even split the unique optimum
    assert part.breakpoint_indices == [2] and part.ties == []
    E[0, 1] = E[1, 4] = 1.0
    E[0, 3] = E[3, 4] = 1.0
    part = dp_partition(synthetic_table(E), 2)
    assert part.ties == [[1], [2], [3]]
    assert part.breakpoint_indices == [1]


def test_dp_infeasible(table33):
    with pytest.raises(ConfigError):
        dp_partition(table33, 24)
    with pytest.raises(ConfigError):
        dp_partition(table33, 0)
    E = np.full((6, 6), np.nan)
    with pytest.raises(NumericalError):
        dp_partition(synthetic_table(E), 2)


def test_golden_section():
    x, fx = golden_section(lambda x: (x - 0.3) ** 2, 0.0, 1.0, 1e-9)
    assert x == pytest.approx(0.3, abs=1e-8)
    x, fx = golden_section(lambda x: (x - 0.3) ** 2, 0.5, 1.0, 1e-9, x0=0.4, f0=0.01)
    assert x == 0.4


def test_refine_two_pieces(refined2, table33):
    dp = dp_partition(table33, 2)
    assert refined2.method == "refine"
    assert refined2.total_energy <= dp.total_energy
    # the symmetric split is optimal on the symmetric sphere
    assert refined2.breakpoints[0] == pytest.approx(math.pi / 2, abs=1e-5)
    assert refined2.interval_energies[0] == pytest.approx(refined2.interval_energies[1], rel=1e-6)
    hist = refined2.diagnostics["history"]
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_refine_single_piece(sphere33, yamabe33, table33):
    one = dp_partition(table33, 1)
    assert refine(sphere33, yamabe33, None, one).total_energy == one.total_energy


def test_total_energy_grows_with_ell(table33):
    totals = [dp_partition(table33, ell).total_energy for ell in (1, 2, 3, 4)]
    assert all(a < b for a, b in zip(totals, totals[1:]))


def test_segregation(segregated, refined2):
    traj, part = segregated[2]
    overlaps = [s.overlap for s in traj]
    assert overlaps[-1] < 1e-6
    assert overlaps[-1] < overlaps[0]
    assert [s.eta for s in traj] == default_eta_schedule()
    assert part.method == "segregation" and part.diagnostics["consecutive"]
    assert part.breakpoints[0] == pytest.approx(math.pi / 2, abs=0.02)
    assert part.total_energy >= refined2.total_energy - 1e-4
    assert len(part.solutions) == 2
    for key in ("0.005", "0.02"):
        assert len(part.diagnostics["threshold_sensitivity"][key]) == 2


def test_segregation_three(segregated, sphere33, yamabe33, table33):
    traj, part = segregated[3]
    assert traj[-1].overlap < 1e-5
    ref = refine(sphere33, yamabe33, None, dp_partition(table33, 3))
    assert part.total_energy >= ref.total_energy - 1e-4
    np.testing.assert_allclose(part.breakpoints, ref.breakpoints, atol=0.05)


def test_segregation_rejects_bad_input(sphere33, yamabe33):
    with pytest.raises(ConfigError):
        segregation_flow(sphere33, yamabe33, None, 1)
    with pytest.raises(ConfigError):
        segregation_flow(sphere33, yamabe33, None, 2, eta_schedule=[1.0])
    with pytest.raises(ConfigError):
        segregation_flow(sphere33, yamabe33, None, 2, eta_schedule=[-20.0, -10.0])


def test_extract_partition_data():
    x = np.linspace(0.0, 1.0, 101)
    a = np.clip(1 - 2 * x, 0, None)
    b = np.clip(2 * x - 1, 0, None)
    data = extract_partition_data(x, [b, a])
    assert data["order"] == [1, 0] and data["consecutive"]
    assert data["breakpoints"][0] == pytest.approx(0.5, abs=1e-12)


def test_stitch_nodal(refined2, sphere33, yamabe33):
    part = attach_solutions(refined2, sphere33, yamabe33, None)
    nodal = stitch_nodal(part, sphere33, yamabe33)
    assert nodal.sign_changes == 1
    assert nodal.breakpoint_offsets[0] < 1e-12
    assert nodal.weak_residual < 1e-5
    assert np.all(np.diff(nodal.nodes) > 0)
    assert nodal.u[np.argmin(np.abs(nodal.nodes - 0.5))] < 0
    assert set(nodal.diagnostics()) == {"sign_changes", "zero_locations", "breakpoint_offsets", "weak_residual"}


def test_stitch_nodal_errors(refined2, sphere33, yamabe33):
    bare = make_partition(2, math.pi, refined2.breakpoints, refined2.interval_energies, "refine")
    with pytest.raises(ConfigError):
        stitch_nodal(bare, sphere33, yamabe33)
    with pytest.raises(ConfigError):
        stitch_nodal(refined2, sphere33, einstein_gjms_coefficients(2, (1.0, 2.0)))


def test_partition_invariants():
    ok = make_partition(2, 1.0, [0.5], [1.0, 2.0], "dp")
    assert ok.total_energy == 3.0 and ok.intervals == [(0.0, 0.5), (0.5, 1.0)]
    assert ok.to_dict()["total"] == 3.0
    bad = [
        dict(ell=2, d=1.0, breakpoints=[1.5], interval_energies=[1.0, 1.0], total_energy=2.0, method="dp"),
        dict(ell=2, d=1.0, breakpoints=[], interval_energies=[1.0, 1.0], total_energy=2.0, method="dp"),
        dict(ell=2, d=1.0, breakpoints=[0.5], interval_energies=[1.0, 1.0], total_energy=3.0, method="dp"),
        dict(ell=2, d=1.0, breakpoints=[0.5], interval_energies=[1.0, 1.0], total_energy=2.0, method="x"),
        dict(ell=0, d=1.0, breakpoints=[], interval_energies=[], total_energy=0.0, method="dp"),
    ]
    for kw in bad:
        with pytest.raises(ConfigError):
            Partition(**kw)


def test_flat_profile_partition_is_uniform():
    from cohomq.geometry import make_flat

    prof = make_flat(6.0)
    co = constant_coefficients(1.0)
    table = energy_table(prof, co, 4.0, 13, n=100)
    part = dp_partition(table, 3)
    assert part.breakpoint_indices == [4, 8]
