import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from klplf import quadrature, sparse_grid as sg
from klplf.errors import DimensionTooLarge, ValuesMissing


def test_index_set_x_examples():
    assert sg.index_set_x(1, (1, 1)) == [(1, 1), (1, 2), (2, 1)]
    assert sg.index_set_x(2, (1, 2)) == [(1, 1), (1, 2), (2, 1), (3, 1)]
    assert sg.index_set_x(0, (1, 3, 2)) == [(1, 1, 1)]


@given(st.integers(0, 5), st.lists(st.sampled_from([1, 1.5, 2, 3, 4]), min_size=1, max_size=3),
       st.one_of(st.none(), st.integers(1, 5)))
def test_index_set_matches_brute_force(w, gamma, l_max):
    assert sorted(sg.index_set_x(w, gamma, l_max)) == sorted(oracles.brute_index_set(w, gamma, l_max))


@given(st.integers(0, 5), st.lists(st.sampled_from([1, 2, 3]), min_size=1, max_size=3))
def test_selection_region_contains_nonzero_coefficients(w, gamma):
    xs = oracles.brute_index_set(w, gamma)
    y = set(sg.build_index_set(w, gamma))
    for i in xs:
        if oracles.naive_coefficient(i, xs) != 0:
            assert i in y


def test_coefficient_examples():
    assert sg.coefficient((1, 1), 1, (1, 1)) == -1
    assert sg.coefficient((2, 1), 1, (1, 1)) == 1


@given(st.integers(0, 4), st.lists(st.sampled_from([1, 1.5, 2, 4]), min_size=1, max_size=3),
       st.one_of(st.none(), st.integers(1, 4)))
def test_coefficient_matches_naive_enumeration(w, gamma, l_max):
    xs = oracles.brute_index_set(w, gamma, l_max)
    for i in xs:
        assert sg.coefficient(i, w, gamma, l_max) == oracles.naive_coefficient(i, xs)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("w", range(5))
def test_isotropic_coefficients_closed_form(d, w):
    for i in sg.index_set_x(w, (1,) * d):
        assert sg.coefficient(i, w, (1,) * d) == oracles.closed_form_coefficient(i, w, d)


def test_tensor_count():
    assert sg.assemble("tensor", "cc", 4, 2).n_nodes == 289


@pytest.mark.parametrize("conv,iso,aniso", [("one_based", 65, 29), ("zero_based", 145, 57), ("capped", 161, 65)])
def test_fig_counts_by_convention(conv, iso, aniso):
    w, cap = sg.LEVEL_CONVENTIONS[conv](5)
    a = sg.assemble("isotropic", "cc", w, 2, None, cap).n_nodes
    b = sg.assemble("anisotropic", "cc", w, 2, (1, 2), cap).n_nodes
    assert (a, b) == (iso, aniso)
    assert a == oracles.brute_union_count("cc", w, (1, 1), cap)
    assert b == oracles.brute_union_count("cc", w, (1, 2), cap)


@pytest.mark.parametrize("rule", ["cc", "f2"])
@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("w", range(0, 6))
def test_union_oracle_isotropic(rule, d, w):
    if d == 3 and w == 5 and rule == "f2":
        pytest.skip("oracle too slow at this size")
    assert sg.assemble("isotropic", rule, w, d).n_nodes == oracles.brute_union_count(rule, w, (1,) * d)


@given(st.sampled_from(["cc", "f2"]), st.integers(0, 4),
       st.lists(st.sampled_from([1, 1.5, 2, 3]), min_size=2, max_size=3))
def test_union_oracle_anisotropic(rule, w, gamma):
    g = sg.assemble("anisotropic", rule, w, len(gamma), gamma)
    assert g.n_nodes == oracles.brute_union_count(rule, w, gamma)


@pytest.mark.parametrize("kind,gamma", [("isotropic", None), ("anisotropic", (1, 2, 4))])
@pytest.mark.parametrize("rule", ["cc", "f2"])
def test_grid_invariants(kind, gamma, rule):
    g = sg.assemble(kind, rule, 3, 3, gamma, None)
    assert abs(g.weights.sum() - 8.0) < 1e-10
    assert len({tuple(n) for n in g.nodes.tolist()}) == g.n_nodes
    assert sum(t.coef for t in g.terms) == 1
    assert all(g.lookup(n) == k for k, n in enumerate(g.nodes))


def test_weight_sum_high_dimension():
    g = sg.assemble("isotropic", "f2", 3, 12)
    assert g.n_nodes == 3249
    assert abs(g.weights.sum() / 2**12 - 1.0) < 1e-12


@pytest.mark.parametrize("d,w,n", [(12, 2, 337), (12, 3, 3249), (6, 3, 545), (6, 4, 2561)])
def test_f2_isotropic_counts(d, w, n):
    assert sg.assemble("isotropic", "f2", w, d).n_nodes == n


def test_isotropic_reduction():
    a = sg.assemble("anisotropic", "f2", 3, 3, (2.0, 2.0, 2.0))
    b = sg.assemble("isotropic", "f2", 3, 3)
    np.testing.assert_array_equal(a.nodes, b.nodes)
    np.testing.assert_array_equal(a.weights, b.weights)


@given(st.lists(st.sampled_from([1, 1.5, 2, 3, 5]), min_size=3, max_size=3), st.integers(0, 2))
def test_monotone_anisotropy(gamma, n):
    base = sg.assemble("anisotropic", "f2", 3, 3, gamma).n_nodes
    bigger = list(gamma)
    bigger[n] *= 2
    # the budget is w * min(gamma); keep the minimum fixed so only gamma_n changes
    if min(bigger) != min(gamma):
        return
    assert sg.assemble("anisotropic", "f2", 3, 3, bigger).n_nodes <= base


def test_anisotropic_118_counts():
    gam = [2.0**k for k in range(8)] + [2.0**k for k in range(4)]
    assert sg.assemble("anisotropic", "f2", 4, 12, gam, 5).n_nodes == 213
    gam3 = [2.0**k for k in range(3)] + [1.0, 2.0, 1.0]
    assert sg.assemble("anisotropic", "f2", 4, 6, gam3, 5).n_nodes == 489


def test_zeta_counts_decrease():
    counts = []
    for z in (1.0, 1.5, 2.0, 4.0):
        gam = (1.0, z, 1.0, z)
        counts.append(sg.assemble("anisotropic", "f2", 4, 4, gam, 5).n_nodes)
    assert counts == [769, 257, 209, 133]


def test_dimension_guard():
    with pytest.raises(DimensionTooLarge):
        sg.assemble("isotropic", "f2", 0, 65)
    with pytest.raises(ValueError):
        sg.assemble("isotropic", "f2", 1, 0)


def test_estimate_node_count():
    assert sg.estimate_node_count(1, 10) == 20
    assert sg.estimate_node_count(2, 10) == 200
    assert math.isclose(sg.estimate_node_count(5, 12), 2**5 * 12**5 / 120)


@pytest.mark.parametrize("rule", ["cc", "f2"])
def test_interpolant_reproduces_nodes(rule):
    g = sg.assemble("anisotropic", rule, 3, 3, (1, 2, 1))
    vals = np.sin(g.nodes.sum(axis=1))[:, None] + g.nodes[:, :1] ** 2
    ip = sg.Interpolant(g, vals)
    np.testing.assert_allclose(sg.interpolate(ip, g.nodes), vals, atol=1e-10)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_linear_reproduction(z):
    g = sg.assemble("isotropic", "f2", 1, 3)
    ip = sg.Interpolant(g, g.nodes[:, 0])
    assert abs(sg.interpolate(ip, z)[0] - z[0]) < 1e-12


def test_interpolation_error_decreases():
    rng = np.random.default_rng(0)
    z = rng.uniform(-1, 1, (1000, 2))
    exact = np.exp(z.sum(axis=1))
    errs = []
    for w in (2, 3, 4):
        g = sg.assemble("isotropic", "cc", w, 2)
        ip = sg.Interpolant(g, np.exp(g.nodes.sum(axis=1)))
        errs.append(np.max(np.abs(sg.interpolate(ip, z)[:, 0] - exact)))
    assert errs[0] > errs[1] > errs[2]


def test_integrate_grid_moments():
    g = sg.assemble("isotropic", "cc", 2, 2)
    assert np.allclose(sg.integrate_grid(sg.Interpolant(g, np.full(g.n_nodes, 3.0))), 12.0)
    assert abs(sg.integrate_grid(sg.Interpolant(g, g.nodes[:, 0] ** 2))[0] - 4 / 3) < 1e-12
    assert abs(sg.integrate_grid(sg.Interpolant(g, g.nodes[:, 0] * g.nodes[:, 1]))[0]) < 1e-12


@pytest.mark.parametrize("rule", ["cc", "f2"])
def test_quadrature_matches_integral_of_interpolant(rule):
    g = sg.assemble("anisotropic", rule, 3, 2, (1, 2))
    f = lambda z: np.exp(0.5 * z[:, 0]) * np.cos(z[:, 1])
    ip = sg.Interpolant(g, f(g.nodes))
    fine = quadrature.rule(rule, 6)
    pts = np.array(list(itertools.product(fine.nodes, fine.nodes)))
    wts = np.outer(fine.weights, fine.weights).ravel()
    assert abs(wts @ sg.interpolate(ip, pts)[:, 0] - sg.integrate_grid(ip)[0]) < 1e-10


def test_values_missing():
    g = sg.assemble("isotropic", "f2", 1, 2)
    vals = np.zeros(g.n_nodes)
    vals[0] = np.nan
    with pytest.raises(ValuesMissing):
        sg.interpolate(sg.Interpolant(g, vals), [0.0, 0.0])
    with pytest.raises(ValuesMissing):
        sg.integrate_grid(sg.Interpolant(g, vals))


def test_irrational_gamma_uses_tolerance():
    g = sg.assemble("anisotropic", "f2", 3, 2, (1.0, math.sqrt(2)))
    assert g.n_nodes == oracles.brute_union_count("f2", 3, (1.0, math.sqrt(2)))


def test_dumps():
    g = sg.assemble("anisotropic", "cc", 2, 2, (1, 2))
    lines = g.nodes_csv().strip().splitlines()
    assert lines[0] == "z1,z2,weight" and len(lines) == g.n_nodes + 1
    doc = g.terms_document()
    assert doc["n_nodes"] == g.n_nodes and sum(t["coefficient"] for t in doc["terms"]) == 1
