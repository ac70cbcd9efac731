import numpy as np
import numpy.polynomial.legendre as npleg
import pytest
from hypothesis import given, settings, strategies as st

from phasekit.quadrature import (
    backward_transform,
    basis_table,
    build_basis,
    forward_transform,
    gauss_rule,
    legendre_eval,
)


def _basis_series(M):
    """Legendre-series coefficients of phi_0..phi_{M-1} (rows)."""
    C = np.zeros((M, M + 2))
    C[0, 0] = 1.0
    C[1, 1] = 1.0
    for k in range(2, M):
        C[k, k] = 1.0
        C[k, k + 2] = -1.0
    return C


def _gram(C):
    """Exact L2 Gram matrix of Legendre series via orthogonality."""
    n = C.shape[1]
    norms = 2.0 / (2 * np.arange(n) + 1)
    return (C * norms) @ C.T


@pytest.mark.parametrize(
    "k, x, expected", [(0, 0.7, 1.0), (1, -0.25, -0.25), (2, 0.5, -0.125)]
)
def test_legendre_eval_examples(k, x, expected):
    assert legendre_eval(k, x) == pytest.approx(expected, abs=1e-15)


def test_legendre_endpoints():
    for k in range(40):
        assert abs(legendre_eval(k, 1.0)) == pytest.approx(1.0, abs=1e-13)
        assert abs(legendre_eval(k, -1.0)) == pytest.approx(1.0, abs=1e-13)


def test_legendre_matches_numpy():
    x = np.linspace(-1, 1, 17)
    for k in (3, 10, 25):
        ref = npleg.legval(x, np.eye(k + 1)[k])
        got = [legendre_eval(k, xi) for xi in x]
        assert np.allclose(got, ref, atol=1e-13)


def test_gauss_small_rules():
    r1 = gauss_rule(1)
    assert r1.nodes.tolist() == [0.0]
    assert r1.weights.tolist() == pytest.approx([2.0])
    r2 = gauss_rule(2)
    assert r2.nodes == pytest.approx([-0.5773502691896258, 0.5773502691896258], abs=1e-15)
    assert r2.weights == pytest.approx([1.0, 1.0], abs=1e-15)
    assert gauss_rule(4).integrate(gauss_rule(4).nodes ** 6) == pytest.approx(2 / 7, rel=1e-14)


@pytest.mark.parametrize("Q", [1, 2, 3, 7, 16, 33, 64, 126])
def test_gauss_rule_invariants(Q):
    r = gauss_rule(Q)
    assert np.all(np.diff(r.nodes) > 0)
    assert np.all(np.abs(r.nodes) < 1)
    assert np.allclose(r.nodes, -r.nodes[::-1], atol=1e-14, rtol=0)
    assert np.all(r.weights > 0)
    assert np.allclose(r.weights, r.weights[::-1], atol=1e-14, rtol=0)
    assert abs(r.weights.sum() - 2.0) <= 1e-13
    # independent oracle: Golub-Welsch rule from numpy
    x, w = npleg.leggauss(Q)
    assert np.allclose(r.nodes, x, atol=1e-14, rtol=0)
    assert np.allclose(r.weights, w, atol=5e-14, rtol=0)


def test_gauss_nodes_are_roots():
    Q = 40
    r = gauss_rule(Q)
    vals = npleg.legval(r.nodes, np.eye(Q + 1)[Q])
    dvals = npleg.legval(r.nodes, npleg.legder(np.eye(Q + 1)[Q]))
    assert np.max(np.abs(vals / dvals)) <= 1e-14


@pytest.mark.parametrize("Q", list(range(1, 65)))
def test_quadrature_exactness(Q):
    r = gauss_rule(Q)
    for p in range(0, 2 * Q):
        exact = 0.0 if p % 2 else 2.0 / (p + 1)
        approx = r.integrate(r.nodes ** p)
        assert abs(approx - exact) <= 1e-12 * max(abs(exact), 1.0), (Q, p)


def test_gauss_rejects_zero():
    with pytest.raises(ValueError):
        gauss_rule(0)


def test_basis_definition_matches_series():
    M = 9
    x = np.linspace(-1, 1, 13)
    B, dB = basis_table(M, x)
    C = _basis_series(M)
    assert np.allclose(B, np.array([npleg.legval(x, c) for c in C]), atol=1e-13)
    assert np.allclose(dB, np.array([npleg.legval(x, npleg.legder(c)) for c in C]), atol=1e-12)


def test_basis_matrix_examples():
    assert build_basis(2).stiffness[1, 1] == pytest.approx(2.0, abs=1e-13)
    assert build_basis(4).stiffness[2, 2] == pytest.approx(14.0, abs=1e-12)
    assert build_basis(3).mass[1, 1] == pytest.approx(2.0 / 3.0, abs=1e-14)


def test_stiffness_diagonal_closed_form():
    b = build_basis(20)
    k = np.arange(2, 20)
    assert np.allclose(np.diag(b.stiffness)[2:], 4 * k + 6, rtol=1e-13)


@pytest.mark.parametrize("M", [2, 3, 5, 8, 17, 32, 63])
def test_matrices_against_exact_series_oracle(M):
    b = build_basis(M)
    C = _basis_series(M)
    mass = _gram(C)
    D = np.array([np.concatenate([npleg.legder(c), [0.0]]) for c in C])
    stiff = _gram(D)
    assert np.allclose(b.mass, mass, atol=1e-12, rtol=0)
    assert np.allclose(b.stiffness, stiff, atol=1e-12 * max(1.0, np.abs(stiff).max()), rtol=0)


@pytest.mark.parametrize("M", [2, 4, 11, 40])
def test_matrices_against_direct_summation(M):
    # naive O(Q M^2) loop over a different (numpy) Gauss rule of the same size
    b = build_basis(M)
    x, w = npleg.leggauss(2 * M)
    C = _basis_series(M)
    vals = [npleg.legval(x, c) for c in C]
    dvals = [npleg.legval(x, npleg.legder(c)) for c in C]
    mass = np.empty((M, M))
    stiff = np.empty((M, M))
    for j in range(M):
        for k in range(M):
            mass[j, k] = sum(w[i] * vals[j][i] * vals[k][i] for i in range(2 * M))
            stiff[j, k] = sum(w[i] * dvals[j][i] * dvals[k][i] for i in range(2 * M))
    assert np.allclose(b.mass, mass, atol=1e-12, rtol=0)
    assert np.allclose(b.stiffness, stiff, atol=1e-12 * max(1.0, np.abs(stiff).max()), rtol=0)


@pytest.mark.parametrize("M", [2, 6, 31])
def test_mass_spd_stiffness_null_space(M):
    b = build_basis(M)
    assert np.allclose(b.mass, b.mass.T, atol=0)
    assert np.all(np.linalg.eigvalsh(b.mass) > 0)
    ev = np.linalg.eigvalsh(b.stiffness)
    assert ev.min() >= -1e-10
    assert np.count_nonzero(np.abs(ev) < 1e-10) == 1
    e0 = np.zeros(M)
    e0[0] = 1.0
    assert np.max(np.abs(b.stiffness @ e0)) <= 1e-12


def test_transform_examples():
    b = build_basis(7)
    c = forward_transform(np.ones(b.Q), b)
    assert np.allclose(c, np.eye(7)[0], atol=1e-14)
    c = forward_transform(b.quad.nodes, b)
    assert np.allclose(c, np.eye(7)[1], atol=1e-14)
    assert np.allclose(backward_transform(np.eye(7)[0], b), 1.0, atol=0)
    assert np.allclose(backward_transform(np.eye(7)[1], b), b.quad.nodes, atol=0)


@pytest.mark.parametrize("M", [3, 9, 24])
def test_round_trip_on_galerkin_space(M):
    # V_M is spanned by L_0, L_1, L_k - L_{k+2}; it does not contain every
    # polynomial of degree M-1 (L_2 alone is missing), so sample V_M itself
    b = build_basis(M)
    rng = np.random.default_rng(M)
    series = rng.standard_normal(M) @ _basis_series(M)
    samples = npleg.legval(b.quad.nodes, series)
    back = backward_transform(forward_transform(samples, b), b)
    assert np.max(np.abs(back - samples)) <= 1e-12 * max(1.0, np.abs(samples).max())


def test_projection_is_l2_orthogonal():
    b = build_basis(6)
    x = b.quad.nodes
    g = np.exp(x) * np.cos(3 * x)
    resid = g - backward_transform(forward_transform(g, b), b)
    # residual is orthogonal to every test function in the discrete inner product
    assert np.max(np.abs(b.weighted_basis @ resid)) <= 1e-13


@settings(max_examples=60, deadline=None)
@given(M=st.integers(2, 32), seed=st.integers(0, 2**32 - 1))
def test_round_trip_property(M, seed):
    b = build_basis(M)
    c = np.random.default_rng(seed).uniform(-1, 1, M)
    assert np.max(np.abs(forward_transform(backward_transform(c, b), b) - c)) <= 1e-12
