import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from klplf import uncertainty as unc
from klplf.errors import (ColumnMissing, ConfigError, DegenerateGroup, LengthMismatch,
                          TargetResolutionFailed)
from klplf.uncertainty import RandomSource, Target


def load(id, bus, base, sigma=0.07, q="p_demand"):
    return RandomSource(id, unc.NORMAL_LOAD, Target(bus, q), base=base, sigma_fraction=sigma)


def plant(id, bus, base, n=4, rate=0.09):
    return RandomSource(id, unc.BINOMIAL_GENERATION, Target(bus, "p_gen"), base=base,
                        n_units=n, outage_rate=rate)


def series(id, bus, col):
    return RandomSource(id, unc.EMPIRICAL_SERIES, Target(bus, "p_demand"), column=col)


def test_normal_variance():
    g = unc.build_group_from_distributions([load("a", 5, 1.0)], 20_000, seed=4)
    assert abs(g.covariance[0, 0] / 0.0049 - 1) < 0.05
    assert abs(g.mean[0] - 1.0) < 4 * 0.07 / np.sqrt(20_000)


def test_binomial_moments():
    s = plant("g", 2, 1.0)
    assert s.unit_cap == pytest.approx(1 / 3.64)
    want = s.unit_cap**2 * 4 * 0.91 * 0.09
    g = unc.build_group_from_distributions([s], 50_000, seed=2)
    assert abs(g.covariance[0, 0] / want - 1) < 0.05
    assert abs(g.mean[0] - 1.0) < 0.01
    x = unc.sample_sources([s], 1000, 0)
    np.testing.assert_allclose(np.unique(x) / s.unit_cap, np.unique(np.round(x / s.unit_cap)), atol=1e-12)


def test_degenerate_group():
    with pytest.raises(DegenerateGroup):
        unc.build_group_from_distributions([load("a", 5, 1.0, sigma=0.0)], 100)
    g = unc.build_group_from_distributions([load("a", 5, 1.0, sigma=0.0)], 100, allow_degenerate=True)
    assert g.covariance[0, 0] == 0


def test_series_rank_one():
    data = {"x": [1.0, 2.0, 3.0, 4.0], "y": [2.0, 4.0, 6.0, 8.0]}
    g = unc.build_group_from_series(data, [series("a", 5, "x"), series("b", 7, "y")])
    np.testing.assert_allclose(g.mean, [2.5, 5.0])
    var = np.var([1, 2, 3, 4], ddof=1)
    np.testing.assert_allclose(g.covariance, [[var, 2 * var], [2 * var, 4 * var]])
    assert np.linalg.matrix_rank(g.covariance) == 1


def test_series_iid_offdiagonal():
    rng = np.random.default_rng(5)
    n = 5000
    data = {f"c{k}": rng.normal(1.0, 0.1, n) for k in range(3)}
    g = unc.build_group_from_series(data, [series(f"s{k}", k + 1, f"c{k}") for k in range(3)])
    se = 0.01 / np.sqrt(n)
    off = g.covariance[~np.eye(3, dtype=bool)]
    assert np.all(np.abs(off) < 3 * se * 1.5)


def test_series_errors():
    with pytest.raises(ColumnMissing):
        unc.build_group_from_series({"x": [1.0, 2.0]}, [series("a", 5, "nope")])
    with pytest.raises(LengthMismatch):
        unc.build_group_from_series({"x": [1.0, 2.0], "y": [1.0, 2.0, 3.0]},
                                    [series("a", 5, "x"), series("b", 7, "y")])


def test_series_csv(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("a,b\n100,50\n120,70\n")
    d = unc.read_series_csv(p, 100.0)
    np.testing.assert_allclose(d["a"], [1.0, 1.2])
    p.write_text("a,b\n100,50\n120,\n")
    with pytest.raises(LengthMismatch):
        unc.read_series_csv(p, 100.0)


def test_apply_identity(case9):
    srcs = [load("l5", 5, 0.9), load("l7", 7, 1.0)]
    g = unc.SourceGroup("loads", srcs, [0.9, 1.0], np.eye(2) * 1e-3)
    out = unc.apply_realization(case9, [g], [[0.9, 1.0]])
    assert out == case9


def test_apply_sets_targets_and_power_factor(case9):
    b5 = case9.buses[case9.bus_position(5)]
    g = unc.SourceGroup("loads", [load("l5", 5, b5.p_demand)], [b5.p_demand], [[1e-3]])
    out = unc.apply_realization(case9, [g], [[2 * b5.p_demand]])
    nb = out.buses[out.bus_position(5)]
    assert nb.p_demand == 2 * b5.p_demand
    assert nb.q_demand == pytest.approx(2 * b5.q_demand)
    # a reactive source at the same bus switches the power-factor rule off
    gq = unc.SourceGroup("q", [load("l5", 5, b5.p_demand), load("q5", 5, b5.q_demand, q="q_demand")],
                         [b5.p_demand, b5.q_demand], np.eye(2) * 1e-3)
    nb = unc.apply_realization(case9, [gq], [[2 * b5.p_demand, 0.1]]).buses[out.bus_position(5)]
    assert nb.q_demand == 0.1


def test_clamps_are_logged(case9):
    g = unc.SourceGroup("mix", [load("l5", 5, 0.9), plant("g2", 2, 1.63)], [0.9, 1.63], np.eye(2))
    log = []
    out = unc.apply_realization(case9, [g], [[-0.2, 5.0]], log)
    assert out.buses[out.bus_position(5)].p_demand == 0.0
    cap = 4 * plant("g2", 2, 1.63).unit_cap
    assert out.generators[1].p_set == pytest.approx(cap)
    assert [(e.source, e.value, e.clamped) for e in log] == [("l5", -0.2, 0.0), ("g2", 5.0, cap)]


def test_reactive_source_not_clamped(case9):
    g = unc.SourceGroup("q", [load("q5", 5, 0.3, q="q_demand")], [0.3], [[1e-3]])
    log = []
    out = unc.apply_realization(case9, [g], [[-0.05]], log)
    assert out.buses[out.bus_position(5)].q_demand == -0.05 and not log


def test_target_resolution(case9):
    g = unc.SourceGroup("bad", [load("x", 42, 1.0)], [1.0], [[1.0]])
    with pytest.raises(TargetResolutionFailed):
        unc.apply_realization(case9, [g], [[1.0]])
    g = unc.SourceGroup("bad", [plant("x", 5, 1.0)], [1.0], [[1.0]])
    with pytest.raises(TargetResolutionFailed):
        unc.apply_realization(case9, [g], [[1.0]])


def test_length_mismatch(case9):
    g = unc.SourceGroup("loads", [load("l5", 5, 0.9)], [0.9], [[1e-3]])
    with pytest.raises(LengthMismatch):
        unc.apply_realization(case9, [g], [[0.9, 1.0]])


def test_seeded_reproducibility():
    srcs = [load("a", 1, 1.0), plant("b", 2, 2.0)]
    x1 = unc.sample_sources(srcs, 500, 11, [[1, 0.4], [0.4, 1]])
    x2 = unc.sample_sources(srcs, 500, 11, [[1, 0.4], [0.4, 1]])
    np.testing.assert_array_equal(x1, x2)
    assert not np.array_equal(x1, unc.sample_sources(srcs, 500, 12, [[1, 0.4], [0.4, 1]]))


def test_copula_correlation():
    srcs = [load("a", 1, 1.0), load("b", 2, 3.0)]
    x = unc.sample_sources(srcs, 40_000, 1, [[1, 0.6], [0.6, 1]])
    assert abs(np.corrcoef(x.T)[0, 1] - 0.6) < 0.02


@given(st.integers(1, 5), st.integers(0, 1000), st.floats(0.0, 0.9))
def test_group_statistics_properties(m, seed, rho):
    srcs = [load(f"s{k}", k + 1, 1.0 + k) for k in range(m)]
    corr = np.full((m, m), rho) + (1 - rho) * np.eye(m)
    g = unc.build_group_from_distributions(srcs, 400, seed, correlation=corr)
    assert np.linalg.eigvalsh(g.covariance)[0] >= -1e-12
    np.testing.assert_array_equal(g.covariance, g.covariance.T)
    x = unc.sample_sources(srcs, 400, seed, corr)
    np.testing.assert_allclose(g.mean, x.mean(axis=0))


def test_group_arrays_read_only():
    g = unc.SourceGroup("g", [load("a", 1, 1.0)], [1.0], [[0.1]])
    with pytest.raises(ValueError):
        g.mean[0] = 2.0


def test_ieee118_preset(case118):
    specs = unc.preset_ieee118(case118, 2000, 0)
    gen, loads = [s.build() for s in specs]
    assert gen.m == 18 and loads.m == 99 + 90
    assert sum(s.target.quantity == "q_demand" for s in loads.sources) == 90
    assert 69 not in {s.target.bus for s in gen.sources}
    from klplf import kl
    assert kl.truncate(kl.decompose(gen.covariance, gen.mean), 0.9).d == 8
    assert kl.truncate(kl.decompose(loads.covariance, loads.mean), 0.9).d == 4


def test_config_groups(case9, tmp_path):
    (tmp_path / "s.csv").write_text("c5,c7\n90,100\n80,110\n100,95\n")
    doc = {
        "seed": 7,
        "groups": [
            {"name": "gen", "n_samples": 50, "sources": [
                {"id": "g2", "kind": "binomial_generation", "bus": 2, "quantity": "p_gen",
                 "n_units": 3, "outage_rate": 0.1}]},
            {"name": "ts", "series_file": "s.csv", "sources": [
                {"id": "a", "kind": "empirical_series", "bus": 5, "quantity": "p_demand", "column": "c5"},
                {"id": "b", "kind": "empirical_series", "bus": 7, "quantity": "p_demand", "column": "c7"}]},
        ],
    }
    specs = unc.parse_uncertainty_config(json.dumps(doc), case9, tmp_path)
    assert specs[0].seed == 7 and specs[1].seed == 8
    assert specs[0].sources[0].base == case9.generators[1].p_set
    g = specs[1].build()
    np.testing.assert_allclose(g.mean, [0.9, 1.0166666666666666])


@pytest.mark.parametrize("doc", [
    {},
    {"preset": "ieee118-morales", "groups": []},
    {"groups": [{"name": "x", "sources": [{"id": "a", "kind": "weird", "bus": 1, "quantity": "p_demand"}]}]},
    {"preset": "ieee118-morales", "extra": 1},
])
def test_config_rejected(case9, doc):
    with pytest.raises(ConfigError):
        unc.parse_uncertainty_config(json.dumps(doc), case9)
