import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from klplf import kl, quadrature
from klplf.errors import IndefiniteBeyondTolerance, NotSymmetric, XiOutOfRange

# exponential kernel exp(-|i-j|/10) on 25 points, eigenvalues from cyclic Jacobi
JACOBI_EXP_KERNEL = [
    12.887099693417456, 5.2298641940414194, 2.2978955591398877, 1.212931618589462,
    0.7366096226057716, 0.4932438706524441, 0.354136611161932, 0.26778789998165237,
    0.21076154098837216, 0.17126008111440774, 0.14285343399951128, 0.1218067165203921,
    0.1058353001209145, 0.09348070651523312, 0.08377811487914924, 0.07606993277395857,
    0.0698966255854193, 0.06493036748014108, 0.060933411624616476, 0.057731251136565465,
    0.055194920566401844, 0.053229118151059, 0.05176414497982605, 0.05075042558856692,
    0.050154838385538004,
]


def test_two_by_two_correlated():
    b = kl.decompose([[1.0, 0.5], [0.5, 1.0]], [0, 0])
    np.testing.assert_allclose(b.eigenvalues, [1.5, 0.5], atol=1e-14)
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(b.eigenvectors[:, 0], [s, s], atol=1e-14)
    np.testing.assert_allclose(np.abs(b.eigenvectors[:, 1]), [s, s], atol=1e-14)
    assert b.eigenvectors[0, 1] > 0  # ties resolved towards the lowest index


def test_identity_keeps_all_modes():
    b = kl.decompose(np.eye(3), np.zeros(3))
    np.testing.assert_allclose(b.eigenvalues, 1.0)
    assert kl.truncation_order(b.eigenvalues, 0.9) == 3


def test_exp_kernel_against_jacobi():
    b = kl.decompose(oracles.exp_kernel(), np.zeros(25))
    np.testing.assert_allclose(b.eigenvalues, JACOBI_EXP_KERNEL, rtol=1e-8)
    assert kl.truncation_order(b.eigenvalues, 0.9) == 6
    assert oracles.cumulative_order(JACOBI_EXP_KERNEL, 0.9) == 6


@pytest.mark.parametrize("eigs,d", [([8, 1, 1], 2), ([10, 0, 0], 1), ([0, 0, 0], 1), ([1, 1, 1, 1], 4)])
def test_truncation_examples(eigs, d):
    assert kl.truncation_order(eigs, 0.9) == d


def test_truncation_boundary_is_inclusive():
    assert kl.truncation_order([9, 1], 0.9) == 1


@pytest.mark.parametrize("bad", [0.0, -0.1, 1.5])
def test_truncation_fraction_range(bad):
    with pytest.raises(ValueError):
        kl.truncation_order([1.0], bad)


def test_evaluate_examples():
    b = kl.decompose([[1.0, 0.5], [0.5, 1.0]], [1.0, 2.0])
    t = kl.truncate(b, 0.7)
    assert t.d == 1
    np.testing.assert_allclose(kl.evaluate(t, [0.0]), [1.0, 2.0])
    amp = math.sqrt(1.5) * math.sqrt(3) / math.sqrt(2)
    np.testing.assert_allclose(kl.evaluate(t, [1.0]), [1.0 + amp, 2.0 + amp])
    np.testing.assert_allclose(kl.evaluate(t, [[-1.0], [1.0]]).mean(axis=0), [1.0, 2.0])


def test_evaluate_rejects_out_of_range():
    b = kl.decompose(np.eye(2), np.zeros(2))
    with pytest.raises(XiOutOfRange):
        kl.evaluate(b, [1.01, 0.0])
    with pytest.raises(ValueError):
        kl.evaluate(b, [0.0])


def test_sampled_covariance_matches_truncated():
    c = np.array(oracles.exp_kernel(6, 3.0))
    b = kl.truncate(kl.decompose(c, np.ones(6)), 0.95)
    xi = np.random.default_rng(1).uniform(-1, 1, (1_000_000, b.d))
    y = kl.evaluate(b, xi)
    np.testing.assert_allclose(y.mean(axis=0), 1.0, atol=5e-3)
    np.testing.assert_allclose(np.cov(y.T), b.covariance(), atol=1e-2)


def _psd(n, seed):
    a = np.random.default_rng(seed).normal(size=(n, n))
    return a @ a.T


@given(st.integers(2, 8), st.integers(0, 10_000), st.sampled_from([0.5, 0.8, 0.9, 0.99]))
def test_reconstruction_error_bound(n, seed, frac):
    c = _psd(n, seed)
    b = kl.truncate(kl.decompose(c, np.zeros(n)), frac)
    err = np.linalg.norm(c - b.covariance(), "fro")
    tail = b.eigenvalues[b.d:]
    assert err <= math.sqrt(np.sum(tail**2)) + 1e-9 * np.trace(c)
    assert kl.variance_captured(b) >= frac - 1e-12


@given(st.integers(2, 6), st.integers(0, 10_000))
def test_eigenvector_conventions(n, seed):
    b = kl.decompose(_psd(n, seed), np.zeros(n))
    assert np.all(np.diff(b.eigenvalues) <= 1e-12 * b.eigenvalues[0])
    np.testing.assert_allclose(b.eigenvectors.T @ b.eigenvectors, np.eye(n), atol=1e-10)
    for k in range(n):
        col = b.eigenvectors[:, k]
        assert col[np.argmax(np.abs(col))] > 0


def test_coordinates_uncorrelated_under_quadrature():
    # second moments of KL output over an exact tensor rule reproduce the truncated covariance
    c = _psd(4, 3)
    b = kl.truncate(kl.decompose(c, np.zeros(4)), 0.9)
    r = quadrature.rule("cc", 3)
    grids = np.meshgrid(*[r.nodes] * b.d, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = np.ones(len(pts))
    for k, g in enumerate(np.meshgrid(*[r.weights] * b.d, indexing="ij")):
        w = w * g.ravel()
    w /= w.sum()
    y = kl.evaluate(b, pts)
    np.testing.assert_allclose((y * w[:, None]).T @ y, b.covariance(), atol=1e-10)


def test_json_round_trip():
    b = kl.truncate(kl.decompose(_psd(5, 7), np.arange(5.0), "loads"), 0.8)
    assert kl.KLBasis.from_json(b.to_json()) == b


def test_asymmetric_rejected():
    with pytest.raises(NotSymmetric):
        kl.decompose([[1.0, 0.2], [0.1, 1.0]], [0, 0])


def test_indefinite_rejected():
    with pytest.raises(IndefiniteBeyondTolerance):
        kl.decompose([[1.0, 2.0], [2.0, 1.0]], [0, 0])


def test_tiny_negative_clipped():
    c = np.array([[1.0, 1.0], [1.0, 1.0]])
    c[1, 1] -= 1e-13
    b = kl.decompose(c, [0, 0])
    assert b.eigenvalues[-1] == 0.0


@given(hnp.arrays(float, (3, 3), elements=st.floats(-5, 5)))
def test_symmetrized_input_accepted(a):
    b = kl.decompose(a @ a.T, np.zeros(3))
    assert np.all(b.eigenvalues >= 0)


def test_basis_is_immutable():
    b = kl.decompose(np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        b.eigenvalues[0] = 5.0
