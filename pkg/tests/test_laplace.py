import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from bmv import laplace, matcore
from bmv.errors import DomainError
from bmv.exterior import compound, e_j_of_matrix, elem_sym_brute, wedge_sum_lift


def herm_psd(seed, n=3, scale=0.1):
    return matcore.sample_hermitian(n, seed), matcore.sample_psd(n, seed + 1000, cond=10.0) * scale


class TestCMMargins:
    def test_exponential_is_cm(self):
        g = laplace.cm_grid(lambda x: math.exp(-x), 0.0, 0.1, 20)
        orders = laplace.cm_margins(g, 8)
        assert [o.order for o in orders] == list(range(9))
        assert all(o.margin > 0 for o in orders)

    def test_mixture_is_cm(self):
        g = laplace.cm_grid(lambda x: math.exp(-x) + math.exp(-2 * x), 0.0, 0.05, 30)
        assert laplace.worst_cm(laplace.cm_margins(g, 8)).margin > 0

    def test_sine_is_not_cm(self):
        g = laplace.cm_grid(lambda x: math.sin(x) + 2, 0.0, 0.2, 40)
        assert laplace.worst_cm(laplace.cm_margins(g, 6)).margin < 0

    def test_differences_match_binomial_formula(self, rng):
        vals = rng.normal(size=10)
        g = laplace.CMGrid(0.0, 1.0, 10, vals)
        for o in laplace.cm_margins(g, 4):
            ref = (-1) ** o.order * sum(
                (-1) ** (o.order - i) * math.comb(o.order, i) * vals[o.index + i] for i in range(o.order + 1)
            )
            assert o.margin == pytest.approx(ref, abs=1e-12)
            assert o.scale == pytest.approx(sum(math.comb(o.order, i) * abs(vals[o.index + i])
                                                for i in range(o.order + 1)))

    def test_order_needs_enough_nodes(self):
        with pytest.raises(DomainError):
            laplace.cm_margins(laplace.CMGrid(0.0, 0.1, 4, np.ones(4)), 4)

    def test_non_finite_values(self):
        with pytest.raises(DomainError):
            laplace.cm_margins(laplace.CMGrid(0.0, 0.1, 3, np.array([1.0, np.nan, 1.0])), 1)

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            laplace.cm_grid(math.exp, 0.0, 0.0, 5)

    @given(st.lists(st.tuples(st.floats(0.01, 1.0), st.floats(0.0, 3.0)), min_size=1, max_size=4))
    def test_positive_mixtures_property(self, terms):
        def f(x):
            return sum(c * math.exp(-r * x) for c, r in terms)

        orders = laplace.cm_margins(laplace.cm_grid(f, 0.0, 0.1, 12), 6)
        assert all(o.margin >= -1e-12 * o.scale for o in orders)


class TestExpElementary:
    def test_matches_brute_force(self):
        for seed in range(10):
            A, B = herm_psd(seed, n=4)
            for j in range(1, 5):
                ref = elem_sym_brute(np.linalg.eigvalsh(expm(A - 0.3 * B)), j)
                assert laplace.ej_exp(A, B, 0.3, j) == pytest.approx(ref, rel=1e-12)

    def test_tiny_factors(self):
        # exp(-720) is subnormal on its own, the pair products are not
        A = np.diag([-700.0, -720.0, 50.0])
        got = laplace.ej_exp(A, np.zeros((3, 3)), 0.0, 2)
        assert got == pytest.approx(math.exp(-650.0) * (1 + math.exp(-20.0)), rel=1e-12)

    def test_wedge_trace(self):
        A, B = herm_psd(3, n=4)
        for j in (1, 2, 3):
            alpha, gamma = wedge_sum_lift(A, j), wedge_sum_lift(B, j)
            assert laplace.wedge_trace_exp(alpha, gamma, 0.5) == pytest.approx(laplace.ej_exp(A, B, 0.5, j),
                                                                               rel=1e-10)


class TestT4b:
    def test_trace_case(self):
        A, B = herm_psd(1)
        rep = laplace.theorem4b_check(A, B, 1)
        assert rep.passed and rep.check == "t4b"

    def test_determinant_case_is_pure_exponential(self):
        A, B = herm_psd(2)
        # e_n(exp(A - lam B)) = exp(Tr A - lam Tr B)
        for lam in (0.0, 0.7):
            assert laplace.ej_exp(A, B, lam, 3) == pytest.approx(
                math.exp(np.trace(A).real - lam * np.trace(B).real), rel=1e-12)
        assert laplace.theorem4b_check(A, B, 3).passed

    def test_random_middle_order(self):
        for seed in range(5):
            A, B = herm_psd(seed + 10, n=4)
            rep = laplace.theorem4b_check(A, B, 2)
            assert rep.passed
            assert rep.details["wedge_gap"] <= 1e-9

    def test_order_range(self):
        with pytest.raises(DomainError):
            laplace.theorem4b_check(*herm_psd(0), 4)


class TestE2Difference:
    def test_identity_against_e2(self):
        A, B = herm_psd(4)
        rep = laplace.e2_difference_check(A, B)
        assert rep.passed and rep.details["identity_gap"] <= 1e-10

    def test_two_by_two_is_determinant(self):
        A, B = herm_psd(5, n=2)
        M = expm(A - 0.2 * B)
        assert e_j_of_matrix(M, 2) == pytest.approx(np.linalg.det(M).real, rel=1e-12)
        assert laplace.e2_difference_check(A, B).passed

    def test_commuting_pair(self):
        A, B = np.diag([0.3, -0.2, 0.5]), np.diag([0.1, 0.4, 0.2])
        assert laplace.e2_difference_check(A, B).passed

    def test_needs_two(self):
        with pytest.raises(DomainError):
            laplace.e2_difference_check(np.eye(1), np.eye(1))


class TestDetIdentity:
    def test_zero_pair(self):
        rep = laplace.det_identity_check(np.zeros((2, 2)), np.zeros((2, 2)), 0.5)
        assert rep.passed and rep.details["gap"] == 0

    def test_diagonal(self):
        rep = laplace.det_identity_check(np.diag([1.0, 2.0]), np.diag([0.5, 0.1]), 1.5)
        assert rep.passed and rep.details["gap"] <= 1e-14

    def test_indefinite_pair_negative_lambda(self):
        A, B = matcore.sample_hermitian(4, 1), matcore.sample_hermitian(4, 2)
        rep = laplace.det_identity_check(A, B, -0.3)
        assert rep.passed
        ref = np.linalg.det(expm(A - (-0.3) * B)).real
        assert ref == pytest.approx(math.exp(np.trace(A).real + 0.3 * np.trace(B).real), rel=1e-12)


class TestSimplexIntegral:
    def test_scalar_single_letter(self):
        a, b = 0.7, 0.4
        res = laplace.simplex_integral_ej(np.array([[a]]), np.array([[b]]), 1, 1, samples=500)
        assert res.value_blockexp == pytest.approx(b * math.exp(a), rel=1e-12)
        assert res.value_mc == pytest.approx(b * math.exp(a), rel=1e-12)

    def test_zero_exponent(self):
        B = matcore.sample_psd(3, 4, cond=10.0)
        for k in (1, 2, 3):
            for j in (1, 2, 3):
                res = laplace.simplex_integral_ej(np.zeros((3, 3)), B, k, j, samples=200)
                ref = e_j_of_matrix(np.linalg.matrix_power(B, k), j) / math.factorial(k)
                assert res.value_blockexp == pytest.approx(ref, rel=1e-10)

    def test_block_and_monte_carlo_agree(self):
        A, B = herm_psd(6, scale=1.0)
        res = laplace.simplex_integral_ej(A, B, 2, 2, samples=20000, seed=3)
        assert res.consistent
        assert abs(res.value_blockexp - res.value_mc) <= 4 * res.mc_stderr

    def test_ordered_integral_k_one(self):
        A, B = herm_psd(7, scale=1.0)
        # int_0^1 e^(sA) B e^((1-s)A) ds by Gauss-Legendre
        x, w = np.polynomial.legendre.leggauss(30)
        s = 0.5 * (x + 1)
        ref = sum(0.5 * wi * expm(si * A) @ B @ expm((1 - si) * A) for si, wi in zip(s, w))
        np.testing.assert_allclose(laplace.ordered_exp_integral(A, B, 1), ref, atol=1e-12)

    def test_batched_ej(self, rng):
        W = rng.normal(size=(5, 4, 4))
        for j in range(1, 5):
            np.testing.assert_allclose(laplace._ej_batched(W, j), [e_j_of_matrix(M, j) for M in W], rtol=1e-10)

    def test_check_report(self):
        rep = laplace.theorem4a_check(*herm_psd(8, scale=1.0), 2, 1, samples=5000)
        assert rep.passed and rep.margin > 0

    def test_cap(self):
        A, B = herm_psd(0, n=6)
        with pytest.raises(DomainError):
            laplace.simplex_integral_ej(A, B, 20, 3, samples=10)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_derivative_identity(self, k):
        A, B = herm_psd(9, scale=1.0)
        for j in (1, 2):
            fd, closed = laplace.wedge_exp_derivative(A, B, j, k)
            assert fd == pytest.approx(closed, rel=1e-6)

    def test_compound_of_product(self):
        A, B = herm_psd(10, scale=1.0)
        lhs = compound(expm(A) @ B, 2)
        rhs = expm(wedge_sum_lift(A, 2)) @ compound(B, 2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)
