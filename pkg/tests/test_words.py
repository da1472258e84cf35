import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmv import matcore, words
from bmv.errors import DomainError
from bmv.exterior import e_j_of_matrix
from bmv.words import Word


def rotation_closure_classes(p, k):
    """Cyclic classes by brute-force rotation closure of bit strings."""
    seen, classes = set(), []
    for w in words.enumerate_words(p, k):
        if w.letters in seen:
            continue
        orbit = {w.letters[i:] + w.letters[:i] for i in range(p)}
        seen |= orbit
        classes.append(orbit)
    return classes


class TestEnumeration:
    def test_single_b(self):
        assert [str(w) for w in words.enumerate_words(3, 1)] == ["BAA", "ABA", "AAB"]

    def test_all_a(self):
        assert [str(w) for w in words.enumerate_words(4, 0)] == ["AAAA"]

    def test_count_and_distinct(self):
        ws = words.enumerate_words(6, 3)
        assert len(ws) == 20 == len(set(ws))
        assert all(w.k == 3 and w.length == 6 for w in ws)

    def test_k_out_of_range(self):
        with pytest.raises(DomainError):
            words.enumerate_words(3, 4)

    def test_parse_round_trip(self):
        assert str(Word.parse("ABBA")) == "ABBA"


class TestCyclicClasses:
    def test_two_letters(self):
        (c,) = words.cyclic_classes(2, 1)
        assert c.multiplicity == 2

    def test_four_two(self):
        mult = sorted(c.multiplicity for c in words.cyclic_classes(4, 2))
        assert mult == [2, 4]

    @pytest.mark.parametrize("p", range(1, 11))
    def test_multiplicities_sum(self, p):
        for k in range(p + 1):
            classes = words.cyclic_classes(p, k)
            assert sum(c.multiplicity for c in classes) == math.comb(p, k)
            assert all(p % c.multiplicity == 0 for c in classes)

    @given(st.integers(1, 9), st.data())
    def test_matches_rotation_closure(self, p, data):
        k = data.draw(st.integers(0, p))
        ref = rotation_closure_classes(p, k)
        got = words.cyclic_classes(p, k)
        assert sorted(c.multiplicity for c in got) == sorted(len(o) for o in ref)
        assert all(c.representative.letters == min(o) for c in got for o in ref if c.representative.letters in o)

    def test_class_members_share_spectrum(self, pd_pair):
        A, B = pd_pair
        for c in words.cyclic_classes(5, 2):
            ref = [e_j_of_matrix(words.word_eval(c.representative, A, B), j) for j in (1, 2, 3)]
            for w in c.representative.rotations():
                got = [e_j_of_matrix(words.word_eval(w, A, B), j) for j in (1, 2, 3)]
                np.testing.assert_allclose(got, ref, rtol=1e-10)


class TestWordEval:
    def test_diagonal(self):
        W = words.word_eval(Word.parse("AB"), np.diag([1.0, 2.0]), np.diag([3.0, 4.0]))
        np.testing.assert_array_equal(W, np.diag([3.0, 8.0]))

    def test_power(self, pd_pair):
        A, B = pd_pair
        np.testing.assert_array_equal(words.word_eval(Word.parse("AAA"), A, B), A @ A @ A)

    def test_definition(self, pd_pair):
        A, B = pd_pair
        np.testing.assert_array_equal(words.word_eval(Word.parse("ABBA"), A, B), A @ B @ B @ A)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            words.word_eval(Word.parse("AB"), np.eye(2), np.eye(3))


class TestCoefficientTable:
    def test_identity_pair(self):
        I = matcore.RationalSymmetricMatrix.from_array(np.eye(3, dtype=int).astype(object), psd=True)
        t = words.coefficient_table(I, I, 5)
        assert t.coefficients == [3 * math.comb(5, k) for k in range(6)]
        assert t.arithmetic_mode == "exact"

    def test_quadratic(self, pd_pair):
        A, B = pd_pair
        t = words.coefficient_table(A, B, 2)
        assert t[1] == pytest.approx(2 * np.trace(A @ B).real, rel=1e-12)

    def test_random_rational_nonnegative(self):
        for seed in range(20):
            A = matcore.sample_psd(3, seed, rational=True, definite=False)
            B = matcore.sample_psd(3, seed + 100, rational=True, definite=False)
            t = words.coefficient_table(A, B, 6)
            assert all(isinstance(c, Fraction) and c >= 0 for c in t.coefficients)
            assert t.interpolated == t.coefficients

    def test_float_agrees_with_exact(self, rational_pair):
        A, B = rational_pair
        exact = words.coefficient_table(A, B, 5)
        flt = words.coefficient_table(A.to_float(), B.to_float(), 5)
        np.testing.assert_allclose(flt.coefficients, [float(c) for c in exact.coefficients], rtol=1e-12)

    def test_matches_polynomial_values(self, pd_pair):
        A, B = pd_pair
        t = words.coefficient_table(A, B, 4)
        for lam in (0.3, 1.7):
            direct = np.trace(np.linalg.matrix_power(A + lam * B, 4)).real
            assert sum(c * lam**k for k, c in enumerate(t.coefficients)) == pytest.approx(direct, rel=1e-12)

    def test_caps(self, pd_pair, rational_pair):
        with pytest.raises(DomainError):
            words.coefficient_table(*rational_pair, 9)
        with pytest.raises(DomainError):
            words.coefficient_table(*pd_pair, 13)
        with pytest.raises(DomainError):
            words.coefficient_table(*pd_pair, 0)

    def test_exact_requires_rationals(self, pd_pair):
        with pytest.raises(DomainError):
            words.coefficient_table(*pd_pair, 3, exact=True)


class TestWordSumMargin:
    def test_top_order_is_det_product(self, rational_pair):
        A, B = rational_pair
        dA, dB = matcore.exact_det(A.array), matcore.exact_det(B.array)
        for p, k in [(3, 1), (4, 2), (5, 3)]:
            v, _ = words.theorem3_margin(A, B, p, k, 3)
            assert v == math.comb(p, k) * dA ** (p - k) * dB**k

    def test_first_order_is_coefficient(self, rational_pair):
        A, B = rational_pair
        t = words.coefficient_table(A, B, 5)
        for k in range(1, 6):
            assert words.theorem3_margin(A, B, 5, k, 1)[0] == t[k]

    def test_first_order_float(self, pd_pair):
        A, B = pd_pair
        t = words.coefficient_table(A, B, 5)
        for k in range(1, 6):
            assert words.theorem3_margin(A, B, 5, k, 1)[0] == pytest.approx(t[k], rel=1e-10)

    def test_class_reduced_equals_full(self):
        for seed in range(10):
            A, B = matcore.sample_psd(3, seed, cond=10.0), matcore.sample_psd(3, seed + 1, cond=10.0)
            for p in range(2, 7):
                for k in range(1, p + 1):
                    for j in (1, 2, 3):
                        v, sc = words.theorem3_margin(A, B, p, k, j)
                        vf, _ = words.theorem3_margin(A, B, p, k, j, full=True)
                        assert abs(v - vf) <= 1e-10 * sc

    def test_nonnegative_on_random_pairs(self):
        for seed in range(500):
            A, B = matcore.sample_psd(3, seed, cond=20.0), matcore.sample_psd(3, seed + 7919, cond=20.0)
            v, sc = words.theorem3_margin(A, B, 5, 2, 2)
            assert v >= -1e-10 * sc

    def test_range_checks(self, pd_pair):
        with pytest.raises(DomainError):
            words.theorem3_margin(*pd_pair, 3, 0, 1)
        with pytest.raises(DomainError):
            words.theorem3_margin(*pd_pair, 3, 1, 4)

    def test_single_word_trace_can_be_negative(self):
        hit = words.negative_word_trace(3, 2, 1, seed=1)
        assert hit is not None
        w, A, B, tr = hit
        assert tr < 0
        assert np.trace(words.word_eval(w, A, B)).real == pytest.approx(tr)


class TestAnticommutatorSearch:
    def test_equal_pair_nonnegative(self):
        for seed in range(10):
            A = matcore.sample_psd(3, seed)
            assert words.anticommutator_det(A, A) >= 0

    def test_commuting_diagonal_nonnegative(self, rng):
        for _ in range(10):
            a, b = rng.uniform(0, 2, 2), rng.uniform(0, 2, 2)
            assert words.anticommutator_det(np.diag(a), np.diag(b)) >= 0

    def test_finds_negative_at_three(self, tmp_path):
        res = words.det_anticommutator_search(3, 1000, seed=0)
        assert res.negative and res.exact_det < 0
        words.write_certificate(res, tmp_path)
        ok, d = words.validate_certificate(tmp_path)
        assert ok and d == res.exact_det

    def test_two_by_two_example(self):
        A = np.diag([1.0, 0.01])
        B = np.ones((2, 2))
        assert words.anticommutator_det(A, B) < 0
