import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from privacy.numerics import (
    ZERO,
    SignedLogReal,
    forward_difference,
    forward_difference_report,
    forward_difference_table,
    log_binomial,
    log_mix_exp,
    log_sum_exp,
    slr_add,
)

log_magnitudes = st.floats(min_value=-690.0, max_value=690.0)
signs = st.sampled_from([-1, 1])


def slr(sign, logmag):
    return SignedLogReal(sign, logmag)


class TestSignedLogReal:
    def test_zero_invariant(self):
        assert ZERO.decode() == 0.0
        with pytest.raises(ValueError):
            SignedLogReal(0, 1.0)
        with pytest.raises(ValueError):
            SignedLogReal(1, -math.inf)
        with pytest.raises(ValueError):
            SignedLogReal(2, 0.0)

    @given(st.floats(min_value=1e-300, max_value=1e300), signs)
    def test_round_trip(self, magnitude, sign):
        x = sign * magnitude
        assert SignedLogReal.encode(x).decode() == pytest.approx(x, rel=1e-12)

    def test_encode_nan_rejected(self):
        with pytest.raises(ValueError):
            SignedLogReal.encode(math.nan)

    def test_huge_decode_is_infinite(self):
        assert slr(1, 1000.0).decode() == math.inf
        assert slr(-1, 1000.0).decode() == -math.inf


class TestAdd:
    def test_exact_cancellation(self):
        assert slr_add(SignedLogReal.encode(3.0), SignedLogReal.encode(-3.0)) == ZERO

    def test_doubling(self):
        total = slr_add(slr(1, 100.0), slr(1, 100.0))
        assert total.sign == 1
        assert total.logmag == pytest.approx(100.0 + math.log(2.0), rel=1e-15)

    def test_mixed_signs(self):
        total = SignedLogReal.encode(2.5) + SignedLogReal.encode(-1.5)
        assert total.decode() == pytest.approx(1.0, rel=1e-12)

    def test_zero_is_identity(self):
        x = SignedLogReal.encode(-7.0)
        assert slr_add(ZERO, x) == x
        assert slr_add(x, ZERO) == x

    def test_infinities(self):
        assert slr_add(slr(1, math.inf), slr(-1, 5.0)) == slr(1, math.inf)
        with pytest.raises(ValueError):
            slr_add(slr(1, math.inf), slr(-1, math.inf))

    @pytest.mark.parametrize("logmag", [1e-3, -5.0, 0.0, 689.0])
    def test_nearly_equal_opposite_signs(self, logmag):
        neighbour = math.nextafter(logmag, math.inf)
        total = slr_add(slr(1, logmag), slr(-1, neighbour))
        assert total == slr_add(slr(-1, neighbour), slr(1, logmag))
        assert total.sign in (-1, 0)
        assert total.logmag < logmag - 20.0

    @given(signs, log_magnitudes, signs, log_magnitudes)
    def test_commutative(self, s1, m1, s2, m2):
        a, b = slr(s1, m1), slr(s2, m2)
        assert slr_add(a, b) == slr_add(b, a)

    @settings(max_examples=200)
    @given(log_magnitudes, log_magnitudes, log_magnitudes)
    def test_associative_on_positive_operands(self, m1, m2, m3):
        a, b, c = slr(1, m1), slr(1, m2), slr(1, m3)
        left = slr_add(slr_add(a, b), c)
        right = slr_add(a, slr_add(b, c))
        assert left.logmag == pytest.approx(right.logmag, rel=1e-10, abs=1e-10)


class TestLogSumExp:
    def test_examples(self):
        assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2.0))
        assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(1000.0 + math.log(2.0))
        assert log_sum_exp([0.0, -math.inf, math.log(3.0)]) == pytest.approx(math.log(4.0))

    def test_degenerate_inputs(self):
        assert log_sum_exp([-math.inf, -math.inf]) == -math.inf
        assert log_sum_exp([1.0, math.inf]) == math.inf
        with pytest.raises(ValueError):
            log_sum_exp([])
        with pytest.raises(ValueError):
            log_sum_exp([0.0, math.nan])

    @given(
        st.lists(st.floats(min_value=-500.0, max_value=500.0), min_size=1, max_size=30),
        st.floats(min_value=-500.0, max_value=500.0),
    )
    def test_shift_invariance(self, xs, c):
        shifted = log_sum_exp([x + c for x in xs])
        expected = log_sum_exp(xs) + c
        assert shifted == pytest.approx(expected, rel=1e-13, abs=1e-12)


class TestLogMixExp:
    def test_small_exponent_matches_log1p(self):
        assert log_mix_exp(0.001, 0.5) == pytest.approx(math.log1p(0.001 * math.expm1(0.5)), rel=1e-15)

    def test_branches_agree_at_switch(self):
        below = math.log1p(0.01 * math.expm1(50.0))
        assert log_mix_exp(0.01, math.nextafter(50.0, math.inf)) == pytest.approx(below, rel=1e-13)

    @pytest.mark.parametrize("gamma", [1.0, 0.001, 1e-300])
    def test_past_float_range(self, gamma):
        got = log_mix_exp(gamma, 800.0)
        assert math.isfinite(got)
        assert got == pytest.approx(800.0 + math.log(gamma), rel=1e-12)

    def test_infinite_exponent(self):
        assert log_mix_exp(0.5, math.inf) == math.inf


class TestLogBinomial:
    def test_examples(self):
        assert log_binomial(2, 2) == 0.0
        assert log_binomial(4, 2) == pytest.approx(math.log(6.0), rel=1e-15)

    def test_large_matches_log_gamma(self):
        n, k = 600000, 300000
        expected = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
        assert log_binomial(n, k) == pytest.approx(expected, rel=1e-12)

    def test_exact_and_gamma_paths_agree_at_cutoff(self):
        exact = log_binomial(1000, 400)
        via_gamma = math.lgamma(1001) - math.lgamma(401) - math.lgamma(601)
        assert exact == pytest.approx(via_gamma, rel=1e-12)

    def test_contract(self):
        with pytest.raises(ValueError):
            log_binomial(3, 4)
        with pytest.raises(ValueError):
            log_binomial(-1, 0)


def encode_fn(fn):
    return lambda i: SignedLogReal.encode(fn(i))


class TestForwardDifference:
    def test_quadratic(self):
        assert forward_difference(encode_fn(lambda x: x * x), 2).decode() == pytest.approx(2.0, rel=1e-12)

    @pytest.mark.parametrize("order", [1, 2, 5, 9])
    def test_constant(self, order):
        report = forward_difference_report(encode_fn(lambda x: 4.2), order)
        assert report.value == ZERO
        assert report.cancellation_limited

    def test_gaussian_functional(self):
        f = lambda i: SignedLogReal(1, i * (i - 1) / 2.0)
        assert forward_difference(f, 2).decode() == pytest.approx(math.e - 1.0, rel=1e-9)

    def test_order_must_be_positive(self):
        with pytest.raises(ValueError):
            forward_difference(encode_fn(lambda x: x), 0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(min_value=0.5, max_value=2.0), st.integers(min_value=1, max_value=20))
    def test_matches_exact_alternating_sum(self, c, order):
        f = lambda i: SignedLogReal(1, c * i * (i - 1) / 2.0)
        report = forward_difference_report(f, order)

        exact = sum(
            (-1) ** (order - i) * math.comb(order, i) * Fraction(f(i).decode())
            for i in range(order + 1)
        )
        largest = max(math.comb(order, i) * f(i).decode() for i in range(order + 1))
        assume(abs(float(exact)) > 1e-6 * largest)
        assert report.value.decode() == pytest.approx(float(exact), rel=1e-9)

    def test_table_matches_single_orders(self):
        f = lambda i: SignedLogReal(1, i * (i - 1) / 50.0)
        table = forward_difference_table(f, 12)
        assert len(table) == 12
        for order, row in enumerate(table, start=1):
            single = forward_difference_report(f, order)
            assert row == single
