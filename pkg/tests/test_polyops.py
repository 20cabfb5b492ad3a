import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from dichotomy.errors import SizeCapError
from dichotomy.evolution import build_evolution
from dichotomy.polyops import (
    CoeffVector,
    block_dimension,
    enumerate_basis,
    evolution_factorization,
    group_blocks,
    group_map,
    homological_operator,
    kronecker,
    kronecker_det,
    lift_derivation,
    lift_matrix,
)
from dichotomy.systems import constant_system


def _well_conditioned(rng, n, lo=0.5, hi=2.0):
    """Random matrix with singular values in [lo, hi]."""
    q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
    q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q1 @ np.diag(rng.uniform(lo, hi, size=n)) @ q2


# -- basis enumeration -------------------------------------------------------

def test_basis_n2_k2():
    basis = enumerate_basis(2, 2)
    assert basis.indices == ((2, 0), (1, 1), (0, 2))
    assert basis.D == 3


def test_basis_n1_k5():
    basis = enumerate_basis(1, 5)
    assert basis.indices == ((5,),)
    assert basis.D == 1


def test_basis_n3_k3_dimension():
    assert enumerate_basis(3, 3).D == 10  # C(5, 3)


@given(st.integers(1, 5), st.integers(0, 6))
def test_basis_dimension_formula(n, k):
    basis = enumerate_basis(n, k)
    assert basis.D == math.comb(n + k - 1, k)
    assert all(sum(idx) == k for idx in basis.indices)
    # deterministic total order: strictly descending lexicographic
    assert list(basis.indices) == sorted(basis.indices, reverse=True)


def test_basis_size_cap():
    with pytest.raises(SizeCapError):
        enumerate_basis(8, 12)


# -- grouping map -------------------------------------------------------------

def test_group_map_examples():
    assert group_map((1, 0, 2), (2, 1)) == (1, 2)
    assert group_map((3, 1), (2,)) == (4,)
    assert group_map((0, 1, 1, 0), (1, 2, 1)) == (0, 2, 0)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=6))
def test_group_map_preserves_weight(index):
    index = tuple(index)
    sizes = (len(index),)
    assert group_map(index, sizes) == (sum(index),)


def test_block_dimension_matches_group_block_sizes():
    basis = enumerate_basis(4, 3)
    sizes = (2, 2)
    blocks = group_blocks(basis, sizes)
    for tau, rows in blocks.items():
        assert len(rows) == block_dimension(tau, sizes)


# -- Kronecker products --------------------------------------------------------

def test_kron_identity_block_layout():
    b = np.array([[1.0, 2.0], [3.0, 4.0]])
    expected = np.block([[b, np.zeros((2, 2))], [np.zeros((2, 2)), b]])
    np.testing.assert_array_equal(kronecker(np.eye(2), b), expected)


def test_kron_norm_multiplicative():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = rng.standard_normal((3, 3))
        b = rng.standard_normal((2, 4))
        assert np.linalg.norm(kronecker(a, b), 2) == pytest.approx(
            np.linalg.norm(a, 2) * np.linalg.norm(b, 2), rel=1e-12
        )


def test_kron_mixed_product():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a, b = rng.standard_normal((2, 3)), rng.standard_normal((3, 2))
        c, d = rng.standard_normal((3, 2)), rng.standard_normal((2, 3))
        lhs = kronecker(a, b) @ kronecker(c, d)
        rhs = kronecker(a @ c, b @ d)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_kron_det_convention_against_brute_force():
    # asymmetric sizes are what distinguish the exponent conventions
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = _well_conditioned(rng, 2)
        b = _well_conditioned(rng, 3)
        brute = np.linalg.det(kronecker(a, b))
        assert kronecker_det(a, b) == pytest.approx(brute, rel=1e-9)
        brute22 = np.linalg.det(kronecker(a, a))
        assert kronecker_det(a, a) == pytest.approx(brute22, rel=1e-9)


# -- lifted substitution matrix -------------------------------------------------

def test_lift_scalar_power():
    np.testing.assert_allclose(lift_matrix(np.array([[3.0]]), 4), [[81.0]])


def test_lift_identity():
    for n, k in [(2, 2), (3, 2), (2, 3)]:
        np.testing.assert_allclose(lift_matrix(np.eye(n), k), np.eye(enumerate_basis(n, k).D))


def test_lift_contravariant_product():
    rng = np.random.default_rng(4)
    for k in (2, 3):
        for _ in range(10):
            a = rng.standard_normal((2, 2))
            b = rng.standard_normal((2, 2))
            lhs = lift_matrix(a @ b, k)
            rhs = lift_matrix(b, k) @ lift_matrix(a, k)
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_lift_inverse():
    rng = np.random.default_rng(5)
    for _ in range(10):
        a = _well_conditioned(rng, 3)
        lhs = lift_matrix(np.linalg.inv(a), 2)
        rhs = np.linalg.inv(lift_matrix(a, 2))
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_lift_expansion_against_evaluation():
    # columns of the lift reproduce (Ax)^tau pointwise
    rng = np.random.default_rng(6)
    a = rng.standard_normal((3, 3))
    basis = enumerate_basis(3, 3)
    n_mat = lift_matrix(a, 3)
    x = rng.standard_normal(3)
    ax = a @ x
    monomials = np.array([np.prod(x ** np.array(idx)) for idx in basis.indices])
    for col, tau in enumerate(basis.indices):
        direct = np.prod(ax ** np.array(tau))
        assert n_mat[:, col] @ monomials == pytest.approx(direct, rel=1e-10, abs=1e-12)


def test_lift_block_diagonal_structure():
    rng = np.random.default_rng(7)
    a = np.zeros((3, 3))
    a[:2, :2] = rng.standard_normal((2, 2))
    a[2, 2] = rng.standard_normal()
    basis = enumerate_basis(3, 2)
    n_mat = lift_matrix(a, 2)
    blocks = group_blocks(basis, (2, 1))
    for tau_a, rows_a in blocks.items():
        for tau_b, rows_b in blocks.items():
            if tau_a != tau_b:
                assert np.all(n_mat[np.ix_(rows_a, rows_b)] == 0.0)


# -- derivation and homological operator ----------------------------------------

def test_derivation_diagonal_case():
    t_mat = lift_derivation(np.diag([2.0, -3.0]), 2)
    # direct differentiation of x1^2, x1 x2, x2^2
    np.testing.assert_allclose(t_mat, np.diag([4.0, -1.0, -6.0]))


def test_derivation_zero():
    np.testing.assert_array_equal(lift_derivation(np.zeros((2, 2)), 3), np.zeros((4, 4)))


def test_derivation_action_matches_finite_difference_free_form():
    # (dh/dx) A x computed symbolically by expanding the derivation action
    rng = np.random.default_rng(8)
    a = rng.standard_normal((2, 2))
    basis = enumerate_basis(2, 2)
    t_mat = lift_derivation(a, 2)
    h = rng.standard_normal(basis.D)
    x = rng.standard_normal(2)
    ax = a @ x

    def h_eval(y):
        return sum(c * np.prod(y ** np.array(idx)) for c, idx in zip(h, basis.indices))

    eps = 1e-6
    grad = np.array([
        (h_eval(x + eps * np.eye(2)[i]) - h_eval(x - eps * np.eye(2)[i])) / (2 * eps)
        for i in range(2)
    ])
    direct = grad @ ax
    th = t_mat @ h
    lifted = sum(c * np.prod(x ** np.array(idx)) for c, idx in zip(th, basis.indices))
    assert lifted == pytest.approx(direct, rel=1e-6, abs=1e-8)


def test_exponential_consistency_with_lift():
    # evolution of the negated derivation equals the lifted inverse flow
    from scipy.linalg import expm

    rng = np.random.default_rng(9)
    a = 0.4 * rng.standard_normal((2, 2))
    for k in (2, 3):
        dt = 0.3
        lhs = expm(-lift_derivation(a, k) * dt)
        rhs = lift_matrix(expm(-a * dt), k)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_homological_scalar_case():
    lam = 1.7
    for k in (2, 3, 4):
        np.testing.assert_allclose(
            homological_operator(np.array([[lam]]), k), [[(1 - k) * lam]]
        )


def test_homological_eigenvalues_diag_case():
    # frozen from the closed form lambda_j - <tau, lambda> over the basis order
    l2 = homological_operator(np.diag([-1.0, 2.0]), 2)
    got = np.sort(np.linalg.eigvals(l2).real)
    np.testing.assert_allclose(got, sorted([1.0, 4.0, -2.0, 1.0, -5.0, -2.0]), atol=1e-12)


def test_homological_action_against_expansion_oracle():
    """L_k h must equal coefficients of A h(x) - (dh/dx) A x by brute expansion."""
    rng = np.random.default_rng(10)
    n, k = 2, 3
    basis = enumerate_basis(n, k)
    a = rng.standard_normal((n, n))
    h = rng.standard_normal(basis.D * n)
    lk = homological_operator(a, k)
    got = lk @ h

    # brute-force oracle: evaluate both polynomial expressions on sample points
    def eval_vec(coeffs, x):
        out = np.zeros(n)
        for pos, idx in enumerate(basis.indices):
            mono = np.prod(x ** np.array(idx))
            for comp in range(n):
                out[comp] += coeffs[pos * n + comp] * mono
        return out

    eps = 1e-6
    for _ in range(5):
        x = rng.uniform(0.5, 1.5, size=n)
        jac = np.zeros((n, n))
        for i in range(n):
            e = np.eye(n)[i] * eps
            jac[:, i] = (eval_vec(h, x + e) - eval_vec(h, x - e)) / (2 * eps)
        direct = a @ eval_vec(h, x) - jac @ (a @ x)
        np.testing.assert_allclose(eval_vec(got, x), direct, rtol=1e-5, atol=1e-6)


# -- coefficient vectors ---------------------------------------------------------

def test_coeff_vector_layout():
    basis = enumerate_basis(2, 2)
    vec = CoeffVector(basis, 2, np.arange(6.0))
    assert vec.coefficient((2, 0), 0) == 0.0
    assert vec.coefficient((1, 1), 1) == 3.0
    with pytest.raises(ValueError):
        CoeffVector(basis, 2, np.arange(5.0))


# -- factorized homological evolution blocks -------------------------------------

def test_factorization_zero_system_identity():
    evs = [
        build_evolution(constant_system(np.zeros((1, 1))), (0.0, 2.0)),
        build_evolution(constant_system(np.zeros((2, 2))), (0.0, 2.0)),
    ]
    blk = evolution_factorization(evs, (1, 2), 2, (1, 1), 1, 1.5, 0.5)
    np.testing.assert_allclose(blk, np.eye(2 * 2), atol=1e-10)


def test_factorization_scalar_closed_form():
    lams = (-1.0, 2.0)
    evs = [build_evolution(constant_system([[lam]]), (0.0, 2.0), tol=1e-11) for lam in lams]
    t, s = 1.7, 0.4
    for tau in ((2, 0), (1, 1), (0, 2)):
        for j in (0, 1):
            blk = evolution_factorization(evs, (1, 1), 2, tau, j, t, s)
            rate = lams[j] - (tau[0] * lams[0] + tau[1] * lams[1])
            assert blk.shape == (1, 1)
            assert blk[0, 0] == pytest.approx(math.exp(rate * (t - s)), rel=1e-8)


@settings(deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 3))
def test_factorization_matches_direct_block_integration(seed, k):
    """Factorized block equals direct integration of the lifted block ODE."""
    rng = np.random.default_rng(seed)
    sizes = (1, 2) if seed % 2 else (2, 1)
    n = sum(sizes)
    mats = []
    pos = 0
    full = np.zeros((n, n))
    for size in sizes:
        m = 0.6 * rng.standard_normal((size, size))
        mats.append(m)
        full[pos:pos + size, pos:pos + size] = m
        pos += size
    evs = [build_evolution(constant_system(m), (0.0, 1.5), tol=1e-11) for m in mats]
    basis = enumerate_basis(n, k)
    blocks = group_blocks(basis, sizes)
    lk = homological_operator(full, k)
    tau = sorted(blocks)[seed % len(blocks)]
    j = seed % len(sizes)
    rows = blocks[tau]
    # coefficient slots of the (tau, j) block inside the Dn system
    comp_off = sum(sizes[:j])
    slots = [p * n + comp_off + c for p in rows for c in range(sizes[j])]
    sub = lk[np.ix_(slots, slots)]
    t, s = 1.2, 0.3
    direct = solve_ivp(
        lambda _, y: (sub @ y.reshape(len(slots), -1)).ravel(),
        (s, t),
        np.eye(len(slots)).ravel(),
        rtol=1e-10,
        atol=1e-12,
    ).y[:, -1].reshape(len(slots), len(slots))
    fact = evolution_factorization(evs, sizes, k, tau, j, t, s)
    np.testing.assert_allclose(fact, direct, atol=1e-6)
