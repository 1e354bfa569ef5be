import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from martdev import bounds as B
from martdev.errors import DomainError
from martdev.laws import Normal
from martdev.models import Functional, moment_oracle

mp.mp.dps = 50


def mp_theorem21(x, alpha, u, cn):
    """50-digit re-implementation of the two-regime bound."""
    x, a, u, cn = (mp.mpf(v) for v in (x, alpha, u, cn))
    if x < u ** (1 / (2 - a)):
        second = cn * (x / u) ** (2 / (1 - a)) * mp.exp(-((u / x) ** (a / (1 - a)))) if x > 0 else 0
        return mp.exp(-(x**2) / (2 * u)) + second
    return mp.exp(-(x**a) * (1 - u / (2 * x ** (2 - a)))) + cn / x**2 * mp.exp(-(x**a))


class TestBoundResult:
    def test_value_is_sum_of_terms(self):
        r = B.BoundResult("t", B.Branch.SINGLE, (math.log(0.7), math.log(0.6), float("-inf")))
        assert r.terms == pytest.approx((0.7, 0.6, 0.0))
        assert r.value == pytest.approx(1.3)
        assert r.clamped == 1.0
        assert r.log_value == pytest.approx(math.log(1.3))

    def test_log_value_below_underflow(self):
        r = B.BoundResult("t", B.Branch.SINGLE, (-2000.0, -2001.0))
        assert r.value == 0.0
        assert r.log_value == pytest.approx(-2000.0 + math.log1p(math.exp(-1.0)))


class TestLSBound:
    def test_substitution(self):
        # exp(-2 (1 - 1/16)) + exp(-2)
        r = B.ls_bound(4, 4, 1, 1, 0.5, 1)
        expected = math.exp(-2 * (1 - 1 / 16)) + math.exp(-2)
        assert r.value == pytest.approx(expected, rel=1e-14)
        assert r.value == pytest.approx(0.28869025, abs=1e-8)
        assert len(r.terms) == 2

    def test_high_precision(self):
        K = moment_oracle(Normal(), Functional("subexp_weighted", alpha=0.5))
        e = moment_oracle(Normal(), Functional("exp_pos", alpha=0.5))
        r = B.ls_bound(10, 10, 100, K, 0.5, e)
        x, y, a = mp.mpf(10), mp.mpf(10), mp.mpf("0.5")
        s = y ** (1 - a)
        ref = mp.exp(-(x / s) * (1 - 100 * mp.mpf(K) / (2 * x * s))) + 100 * mp.exp(-(y**a)) * mp.mpf(e)
        assert r.value == pytest.approx(float(ref), rel=1e-13)

    def test_decays_past_turning_point(self):
        xs = np.linspace(50, 400, 30)
        vals = [B.ls_bound(x, x, 5, 2.0, 0.5, 1.5).value for x in xs]
        assert np.all(np.diff(vals) < 0)

    @pytest.mark.parametrize("args", [(0, 1, 1, 1, 0.5, 1), (1, -1, 1, 1, 0.5, 1), (1, 1, 1, 1, 1.0, 1), (1, 1, 1, 1, 0.5, 0.5)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            B.ls_bound(*args)


class TestTheorem21:
    def test_x_zero(self):
        r = B.theorem21_bound(0.0, B.SubexpParams(0.5, 1.0, 1.0))
        assert r.value == 1.0
        assert r.branch == B.Branch.SUB_GAUSSIAN

    def test_junction_value(self):
        r = B.theorem21_bound(1.0, B.SubexpParams(0.5, 1.0, 1.0))
        assert r.value == pytest.approx(math.exp(-0.5) + math.exp(-1.0), abs=1e-12)
        assert r.value == pytest.approx(0.97441010088, abs=1e-10)

    def test_continuity_near_junction(self):
        p = B.SubexpParams(0.5, 1.0, 1.0)
        lo = B.theorem21_bound(1 - 1e-9, p)
        hi = B.theorem21_bound(1 + 1e-9, p)
        assert lo.branch != hi.branch
        assert abs(lo.value - hi.value) < 1e-6

    @pytest.mark.parametrize(
        "x,alpha,u,cn",
        [(0.3, 0.5, 1, 1), (2.0, 0.3, 4, 10), (50.0, 0.7, 20, 3), (7.0, 0.5, 100, 100), (1e3, 0.2, 1, 1e6)],
    )
    def test_high_precision(self, x, alpha, u, cn):
        r = B.theorem21_bound(x, B.SubexpParams(alpha, cn, u))
        assert r.value == pytest.approx(float(mp_theorem21(x, alpha, u, cn)), rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            B.theorem21_bound(-1.0, B.SubexpParams(0.5, 1.0, 1.0))
        with pytest.raises(DomainError):
            B.SubexpParams(0.5, 1.0, 0.5)
        with pytest.raises(DomainError):
            B.SubexpParams(1.2, 1.0, 2.0)

    @given(
        alpha=st.floats(0.05, 0.95),
        u=st.floats(1.0, 1e4),
        cn=st.floats(0.0, 1e4),
    )
    @settings(max_examples=200, deadline=None)
    def test_branches_agree_at_junction(self, alpha, u, cn):
        p = B.SubexpParams(alpha, cn, u)
        t = p.threshold
        # evaluate the sub-Gaussian formula exactly at the junction
        log_first = -t * t / (2 * u)
        g = math.exp(log_first) + cn * (t / u) ** (2 / (1 - alpha)) * math.exp(-((u / t) ** (alpha / (1 - alpha))))
        assert B.theorem21_bound(t, p).value == pytest.approx(g, rel=1e-12, abs=1e-300)

    @given(x=st.floats(0.0, 50.0), u1=st.floats(1.0, 50.0), du=st.floats(0.0, 50.0))
    @settings(max_examples=200, deadline=None)
    def test_gaussian_term_nondecreasing_in_u(self, x, u1, du):
        assert -x * x / (2 * u1) <= -x * x / (2 * (u1 + du))

    def test_pure(self):
        p = B.SubexpParams(0.4, 3.0, 5.0)
        assert B.theorem21_bound(2.5, p) == B.theorem21_bound(2.5, p)


class TestRoughBounds:
    def test_unified_value(self):
        _, uni = B.rough_bounds(2.0, B.SubexpParams(0.5, 0.0, 1.0))
        assert uni.value == pytest.approx(2 * math.exp(-4 / (2 * (1 + 2**1.5))), rel=1e-14)
        assert uni.value == pytest.approx(1.18618163, abs=1e-8)
        assert uni.clamped == 1.0

    @pytest.mark.parametrize("u", [1.0, 3.0, 100.0])
    def test_x_zero(self, u):
        bw, uni = B.rough_bounds(0.0, B.SubexpParams(0.5, 0.0, u))
        assert bw.value == uni.value == 2.0
        assert bw.clamped == 1.0

    def test_grid_ordering(self):
        for u in (1.0, 4.0, 16.0):
            for x in np.linspace(0.1, 10, 100):
                bw, uni = B.rough_bounds(x, B.SubexpParams(0.5, 0.0, u))
                assert bw.value <= uni.value * (1 + 1e-15)

    @given(x=st.floats(0.0, 1e4), u=st.floats(1.0, 1e4), alpha=st.floats(0.01, 0.99))
    @settings(max_examples=300, deadline=None)
    def test_ordering_property(self, x, u, alpha):
        bw, uni = B.rough_bounds(x, B.SubexpParams(alpha, 0.0, u))
        assert bw.value <= uni.value * (1 + 1e-12)
        assert uni.value <= 2.0

    def test_rough_dominates_theorem21(self):
        # with c_n <= u and u >= 1 the rough envelope covers the exact form
        for x in np.linspace(0.01, 30, 300):
            p = B.SubexpParams(0.5, 3.0, 3.0)
            assert B.theorem21_bound(x, p).value <= B.rough_bounds(x, p)[0].value * (1 + 1e-12)


class TestTheorem22:
    def test_substitution(self):
        r = B.theorem22_bound(5, 3, 1, 1, 3, 0.0)
        a, b = 0.4, 0.6
        e1 = math.exp(-(a * a * 25) / (2 * math.e**3))
        e2 = math.exp(-(b * 5 / 3) * math.log(1 + b * 5 * 9))
        assert r.value == pytest.approx(e1 + e2, rel=1e-14)
        assert r.value == pytest.approx(0.94093712, abs=1e-8)

    def test_large_w_second_term_to_one(self):
        r = B.theorem22_bound(5, 3, 1, 1e300, 3, 0.0)
        assert r.terms[1] == pytest.approx(1.0, abs=1e-12)

    def test_reduces_to_fuk_terms(self):
        x, p = 10.0, 2.0
        split = B.FukSplit.from_p(p)
        y = split.fuk_beta * x
        tail = B.union_markov_tail(1.0, y, p)
        r = B.theorem22_bound(x, y, 1.0, 1.0, p, tail)
        fuk = B.fuk_nagaev_bound(x, B.MomentParams(p, 1.0, 1.0))
        assert r.terms[0] == pytest.approx(fuk.terms[0], rel=1e-12)
        assert r.terms[2] == pytest.approx(fuk.terms[1], rel=1e-12)
        # the middle term is below the Markov term it is replaced by
        assert r.terms[1] <= fuk.terms[1]

    def test_fuk_split(self):
        s = B.FukSplit.from_p(3.0)
        assert s.fuk_alpha + s.fuk_beta == 1.0
        assert 0 < s.fuk_alpha <= 0.5
        with pytest.raises(DomainError):
            B.FukSplit.from_p(1.5)


class TestFukNagaev:
    def test_substitution(self):
        r = B.fuk_nagaev_bound(10, B.MomentParams(2, 1.0, 1.0))
        assert B.MomentParams(2, 1.0, 1.0).v_squared == pytest.approx(4 * math.e**2)
        assert r.value == pytest.approx(math.exp(-100 / (2 * 4 * math.e**2)) + 0.04, abs=1e-12)
        assert r.value == pytest.approx(0.22420776, abs=1e-8)

    def test_polynomial_tail(self):
        p = B.MomentParams(3, 1.0, 1.0)
        r = B.fuk_nagaev_bound(1e3, p)
        assert r.value == pytest.approx(p.c_p / 1e9, rel=1e-12)

    def test_rate_bounded(self):
        n = np.logspace(2, 6, 9)
        ratio = [
            B.fuk_nagaev_bound(m**0.75, B.MomentParams(2, m, m)).value * m ** (0.75 * 2 - 1) for m in n
        ]
        assert max(ratio) / min(ratio) < 25

    def test_original_substitution(self):
        p = B.MomentParams(2, 1.0, 1.0, per_step_quad_sum=50.0, per_step_pmom_sum=50.0)
        r = B.fuk_original_bound(10, p)
        assert r.value == pytest.approx(math.exp(-100 / (2 * 4 * math.e**2 * 50)) + 4 * 50 / 100, rel=1e-14)

    def test_original_equal_inputs_coincide(self):
        p = B.MomentParams(3, 2.0, 5.0, per_step_quad_sum=2.0, per_step_pmom_sum=5.0)
        for x in (0.5, 3.0, 40.0):
            assert B.fuk_original_bound(x, p).value == B.fuk_nagaev_bound(x, p).value

    def test_self_normalized_example(self):
        n = 100
        p = B.MomentParams(2, 1.0, math.e, per_step_quad_sum=n, per_step_pmom_sum=n)
        for x in np.linspace(0.5, 30, 60):
            assert B.fuk_original_bound(x, p).value >= B.fuk_nagaev_bound(x, p).value

    def test_per_step_below_aggregate_rejected(self):
        with pytest.raises(DomainError):
            B.MomentParams(2, 5.0, 1.0, per_step_quad_sum=4.0)

    def test_needs_per_step(self):
        with pytest.raises(DomainError):
            B.fuk_original_bound(1.0, B.MomentParams(2, 1.0, 1.0))

    @given(
        x=st.floats(0.1, 1e3),
        q=st.floats(0.0, 100),
        pm=st.floats(0.0, 100),
        dq=st.floats(0.0, 100),
        dp=st.floats(0.0, 100),
        p=st.floats(2.0, 6.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_original_dominates(self, x, q, pm, dq, dp, p):
        params = B.MomentParams(p, q, pm, per_step_quad_sum=q + dq, per_step_pmom_sum=pm + dp)
        assert B.fuk_original_bound(x, params).value >= B.fuk_nagaev_bound(x, params).value


class TestTheorem23:
    def test_substitution(self):
        r = B.theorem23_bound(1, 1, 2, 1, 0)
        assert r.value == pytest.approx(math.exp(-3 / 8), abs=1e-12)
        assert r.value == pytest.approx(0.68728928, abs=1e-8)

    def test_corollary_reduces(self):
        r = B.corollary23_bound(1, 1, 1, 2, 1, 0, 0)
        assert r.value == pytest.approx(math.exp(-3 / 8), abs=1e-12)

    def test_corollary_third_term(self):
        r = B.corollary23_bound(5.0, 2.0, 10, 2, 1, 0.0, 7.0)
        assert r.terms[2] == pytest.approx(7.0 / 2.0**3, rel=1e-14)

    def test_balanced_choice(self):
        x, n, p, d = 40.0, 100, 3.0, 1.0
        v = B.corollary23_balanced_v(x, n, p, d)
        r = B.corollary23_bound(x, v, n, p, d, 0.0, 0.0)
        assert r.value == pytest.approx(math.exp(-0.5 * x ** (d / (p + d))), rel=1e-12)

    def test_sub_weibull_decay(self):
        p, d = 2.0, 1.0
        xs = np.array([1e6, 1e8, 1e10])
        logs = np.array([B.theorem23_bound(x, 1.0, p, d, 0.0).log_value for x in xs])
        np.testing.assert_allclose(-logs / xs ** (d / (p + d)), 1.5, rtol=1e-2)

    def test_truncation_level(self):
        assert B.truncation_level(8.0, 2, 1) == pytest.approx(4.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            B.theorem23_bound(1, 0, 2, 1, 0)
        with pytest.raises(DomainError):
            B.theorem23_bound(1, 1, 2, 0, 0)
        with pytest.raises(DomainError):
            B.corollary23_bound(1, 1, 0, 2, 1, 0, 0)

    @given(
        x1=st.floats(0.01, 1e3), dx=st.floats(1e-3, 1e3), v=st.floats(0.1, 10), t=st.floats(0.0, 10), p=st.floats(2, 5)
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_x(self, x1, dx, v, t, p):
        x2 = x1 + dx
        for f in (
            lambda x: B.theorem23_bound(x, v, p, 1.0, t).value,
            lambda x: B.corollary23_bound(x, v, 10, p, 1.0, t, 1.0).value,
            lambda x: B.fuk_nagaev_bound(x, B.MomentParams(p, v, t + 0.1)).value,
        ):
            assert f(x2) <= f(x1)


class TestLdpRate:
    def test_identity(self):
        for n in (10, 1000):
            for x in (0.5, 2.0):
                b = math.exp(-(n**0.5) * x**0.5)
                assert B.ldp_rate(0.5, x, n, b) == pytest.approx(-(x**0.5), rel=1e-14)

    def test_bound_result_log_domain(self):
        n, x, a = 10**6, 1.0, 0.5
        p = B.SubexpParams(a, 2.0 * n, 2.0 * n)
        r = B.theorem21_bound(n * x, p)
        assert r.value == 0.0
        rate = B.ldp_rate(a, x, n, r)
        assert -1.0 < rate < -0.9

    def test_domain(self):
        with pytest.raises(DomainError):
            B.ldp_rate(0.5, 1.0, 10, 0.0)

    def test_single_jump(self):
        from martdev.laws import TailDistributionSpec

        law = TailDistributionSpec(alpha=0.5)
        n, x, eps = 10**8, 1.0, 0.01
        rate = B.single_jump_rate(law, 0.5, x, eps, n)
        t = n * (x + eps)
        expected = (-3 * math.log(t) - t**0.5 - math.log(2)) / n**0.5
        assert rate == pytest.approx(expected, rel=1e-12)


class TestUnionMarkov:
    def test_capped(self):
        assert B.union_markov_tail(10.0, 1.0, 2) == 1.0
        assert B.union_markov_tail(1.0, 10.0, 2) == pytest.approx(0.01)
