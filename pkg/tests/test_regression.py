import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import stats

from martdev import bounds as B
from martdev import experiments as X
from martdev import regression as R
from martdev.errors import DegenerateDesignError, DomainError, HypothesisError
from martdev.laws import Exponential, Normal, SymmetricPareto, ThreePoint
from martdev.models import MartingaleModel
from martdev.verify import domination_check, empirical_tails, simulate_statistic

REPS = 10**5


def config(n=50, phi=Exponential(), noise=Normal()):
    return R.RegressionConfig(theta=1.5, n=n, phi_law=phi, eps_model=noise)


class TestLeastSquares:
    def test_arithmetic(self):
        assert R.least_squares([1, 1], [1, 3]) == 2.0

    def test_single_point(self):
        assert R.least_squares([4.0], [3.0]) == 0.75

    @given(
        phi=hnp.arrays(float, 7, elements=st.floats(-10, 10)).filter(lambda a: np.sum(a * a) > 1e-6),
        theta=st.floats(-100, 100),
    )
    @settings(max_examples=100, deadline=None)
    def test_noiseless_recovery(self, phi, theta):
        s = R.make_sample(phi, np.zeros(7), theta)
        assert s.theta_hat == pytest.approx(theta, rel=1e-12, abs=1e-12)
        assert R.normalized_error(s) == pytest.approx(0.0, abs=1e-9)

    def test_degenerate(self):
        with pytest.raises(DegenerateDesignError):
            R.least_squares([0.0, 0.0], [1.0, 2.0])

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            R.least_squares([1.0], [1.0, 2.0])

    def test_degenerate_batch(self):
        cfg = R.RegressionConfig(0.0, 1, ThreePoint((0.0, 1.0), (0.5, 0.5)), Normal())
        with pytest.raises(DegenerateDesignError):
            R.simulate_regression(cfg, 1, np.arange(100))


class TestNormalizedError:
    def test_arithmetic(self):
        s = R.make_sample([1.0], [2.0], 0.0)
        assert s.theta_hat == 2.0
        assert R.normalized_error(s) == 2.0

    def test_zero_noise(self):
        assert R.normalized_error(R.make_sample([1.0, -2.0], [0.0, 0.0], 3.0)) == 0.0

    @given(
        phi=hnp.arrays(float, 12, elements=st.floats(-5, 5)).filter(lambda a: np.sum(a * a) > 1e-3),
        eps=hnp.arrays(float, 12, elements=st.floats(-5, 5)),
        theta=st.floats(-10, 10),
    )
    @settings(max_examples=200, deadline=None)
    def test_martingale_identity(self, phi, eps, theta):
        s = R.make_sample(phi, eps, theta)
        mart = math.fsum(phi * eps) / math.sqrt(math.fsum(phi * phi))
        assert R.normalized_error(s) == pytest.approx(mart, abs=1e-9)

    def test_inconsistent_sample_detected(self):
        s = R.make_sample([1.0, 2.0], [0.5, -0.1], 1.0)
        bad = R.RegressionSample(s.phi, s.eps + 1.0, s.X, s.theta, s.theta_hat, s.normalized_error)
        with pytest.raises(AssertionError):
            R.normalized_error(bad)

    def test_batch_matches_single(self):
        cfg = config(n=30)
        _, _, err = R.simulate_regression(cfg, 9, np.arange(5))
        s = R.sample_regression(cfg, 9, 3)
        assert R.normalized_error(s) == pytest.approx(err[3], abs=1e-12)
        np.testing.assert_allclose(s.X - cfg.theta * s.phi, s.eps, atol=1e-14)

    def test_martingale_noise(self):
        noise = MartingaleModel("mixture-variance", 1, Normal(), scales=(0.5, 2.0), scale_probs=(0.5, 0.5))
        cfg = config(n=40, noise=noise)
        s = R.sample_regression(cfg, 2, 0)
        assert s.eps.shape == (40,)

    def test_noise_must_be_extendable(self):
        with pytest.raises(HypothesisError):
            config(noise=MartingaleModel("self-normalized", 10, Normal()))

    def test_symmetry(self):
        a = simulate_statistic(config(), "normalized_error", 20000, 4)
        b = simulate_statistic(config(), "normalized_error", 20000, 4, stream0=20000)
        assert stats.ks_2samp(a, -b).pvalue > 1e-3


class TestMomentBounds:
    def test_normal_noise(self):
        mb = R.MomentBounds.from_law(Normal(), alpha=0.5, p=3.0, delta=1.0, p_low=1.5)
        assert mb.E == mb.A_var == 1.0
        assert mb.A_cond == pytest.approx(2 * math.sqrt(2 / math.pi), rel=1e-10)
        assert mb.B == pytest.approx(3.0, rel=1e-10)
        assert mb.D == pytest.approx(3.5617, abs=1e-4)
        # E exp(|eps|) = 2 e^{1/2} Phi(1)
        assert mb.F == pytest.approx(2 * math.exp(0.5) * stats.norm.cdf(1.0), rel=1e-10)

    def test_heavy_noise_has_missing_constants(self):
        mb = R.MomentBounds.from_law(SymmetricPareto(1.8), alpha=0.5, p=3.0, delta=1.0, p_low=1.5)
        assert mb.D is None and mb.F is None and mb.A_cond is None
        assert mb.A_vonbahr is not None and mb.A_vonbahr > 0

    def test_heavy_noise_rejects_light_bounds(self):
        with pytest.raises(HypothesisError):
            X.auto_params("reg-subexp", config(noise=SymmetricPareto(1.8)), alpha=0.5, p_low=1.5)


class TestBoundFormulas:
    def test_subexp_delegates(self):
        for x in (0.5, 2.0, 7.0):
            bw, uni = R.reg_bound_subexp(x, 3.0, 3.0, 0.5)
            rb, ru = B.rough_bounds(x, B.SubexpParams(0.5, 0.0, 3.0))
            assert (bw.value, uni.value) == (rb.value, ru.value)

    def test_subexp_at_zero(self):
        bw, uni = R.reg_bound_subexp(0.0, 2.0, 2.0, 0.5)
        assert bw.clamped == uni.clamped == 1.0

    def test_subexp_hypothesis(self):
        with pytest.raises(HypothesisError):
            R.reg_bound_subexp(1.0, 3.0, 2.0, 0.5)
        with pytest.raises(HypothesisError):
            R.reg_bound_subexp(1.0, 0.5, 0.9, 0.5)

    def test_weibull_substitution(self):
        r = R.reg_bound_weibull(1.0, 1, 1.0, 1.0, 0.5)
        assert r.value == pytest.approx(math.exp(-3 / 8) + math.exp(-1), abs=1e-12)
        assert r.value == pytest.approx(1.05517, abs=1e-5)
        assert r.clamped == 1.0

    def test_weibull_linear_in_n(self):
        a = R.reg_bound_weibull(30.0, 10**6, 1.0, 2.0, 0.5).value
        b = R.reg_bound_weibull(30.0, 2 * 10**6, 1.0, 2.0, 0.5).value
        assert b / a == pytest.approx(2.0, rel=1e-6)

    def test_weibull_rate(self):
        alpha, F = 0.5, 2.77
        ns = [1e8, 1e12, 1e16, 1e20]
        gaps = [abs(R.reg_bound_weibull(math.sqrt(n), n, 1.0, F, alpha).log_value / n ** (alpha / 2) + 1.0) for n in ns]
        assert np.all(np.diff(gaps) < 0)
        assert gaps[-1] < 1e-3

    def test_condmoment_matches_fuk(self):
        r = R.reg_bound_condmoment(10.0, 2.0, 1.0)
        f = B.fuk_nagaev_bound(10.0, B.MomentParams(2.0, 1.0, 1.0))
        assert r.value == pytest.approx(f.value, rel=1e-14)
        assert r.value == pytest.approx(0.22421, abs=1e-5)

    def test_fuk_inflated_larger(self):
        for x in np.linspace(0.5, 100, 200):
            assert R.reg_bound_fuk_inflated(x, 3.0, 1.6, 100).value > R.reg_bound_condmoment(x, 3.0, 1.6).value

    def test_condmoment_rate(self):
        p, A = 3.0, 1.6
        cp = (1 + 2 / p) ** p * A
        scaled = [R.reg_bound_condmoment(math.sqrt(n), p, A).value * n ** (p / 2) for n in np.logspace(1, 8, 15)]
        v2 = 0.25 * (p + 2) ** 2 * math.exp(p) * A ** (2 / p)
        # sup_t t^{p/2} exp(-t/(2V^2)) = (p V^2)^{p/2} e^{-p/2}
        assert max(scaled) <= (p * v2) ** (p / 2) * math.exp(-p / 2) + cp
        assert scaled[-1] == pytest.approx(cp, rel=1e-9)

    def test_moment_substitution(self):
        assert R.reg_bound_moment(1.0, 2.0, 1.0, 1.0, 0.0).value == pytest.approx(0.68729, abs=1e-5)

    def test_moment_polynomial_tail(self):
        assert R.reg_bound_moment(1e12, 3.0, 1.0, 1.0, 3.0).value == pytest.approx(3.0 / 1e36, rel=1e-9)

    def test_vonbahr_substitution(self):
        assert R.reg_bound_vonbahr(2.0, 1.5, 1.0).value == pytest.approx(2 / 2**1.5, rel=1e-14)
        assert R.reg_bound_vonbahr(2.0, 1.5, 1.0).value == pytest.approx(0.70711, abs=1e-5)

    def test_vonbahr_slope(self):
        xs = np.logspace(1, 6, 20)
        logs = [R.reg_bound_vonbahr(x, 1.3, 2.0).log_value for x in xs]
        slope = np.polyfit(np.log(xs), logs, 1)[0]
        assert slope == pytest.approx(-1.3, abs=1e-12)

    @pytest.mark.parametrize("p", [0.5, 2.5])
    def test_vonbahr_range(self, p):
        with pytest.raises(DomainError):
            R.reg_bound_vonbahr(1.0, p, 1.0)

    def test_nonpositive_x(self):
        for f in (
            lambda: R.reg_bound_weibull(0.0, 1, 1.0, 1.0, 0.5),
            lambda: R.reg_bound_condmoment(-1.0, 2.0, 1.0),
            lambda: R.reg_bound_moment(0.0, 2.0, 1.0, 1.0, 1.0),
        ):
            with pytest.raises(DomainError):
                f()


class TestDomination:
    @pytest.mark.parametrize("n", [50, 200])
    @pytest.mark.parametrize("name", ["reg-subexp", "reg-subexp-unified", "reg-weibull", "reg-condmoment", "reg-moment"])
    def test_normal_noise(self, name, n):
        cfg = config(n=n)
        params = X.auto_params(name, cfg, alpha=0.5, p=3.0, delta=1.0)
        ests = empirical_tails(cfg, None, [1.0, 2.0, 3.0], REPS, "normalized_error", seed=12)
        assert domination_check(X.bound_curve(name, params), ests).passed

    def test_subexp_two_sided(self):
        cfg = config(n=50)
        params = X.auto_params("reg-subexp", cfg, alpha=0.5)
        ests = empirical_tails(cfg, None, [1.0, 2.0, 3.0], REPS, "abs_normalized_error", seed=13)
        assert domination_check(X.bound_curve("reg-subexp", params), ests).passed

    def test_vonbahr_pareto(self):
        cfg = config(n=200, noise=SymmetricPareto(1.8))
        params = X.auto_params("reg-vonbahr", cfg, p_low=1.5)
        ests = empirical_tails(cfg, None, [2.0, 4.0, 8.0], REPS, "abs_normalized_error", seed=14)
        report = domination_check(X.bound_curve("reg-vonbahr", params), ests)
        assert report.passed

    @pytest.mark.parametrize("phi", [Normal(), Exponential(), SymmetricPareto(1.5)], ids=["normal", "exp", "pareto"])
    def test_distribution_free(self, phi):
        ref = X.regression_params(config(), alpha=0.5, p=3.0, delta=1.0, p_low=1.5)["per_bound"]
        got = X.regression_params(config(phi=phi), alpha=0.5, p=3.0, delta=1.0, p_low=1.5)["per_bound"]
        assert got == ref
        cfg = config(phi=phi)
        ests = empirical_tails(cfg, None, [1.0, 2.0, 3.0], 20000, "normalized_error", seed=15)
        for name in ("reg-subexp", "reg-weibull", "reg-condmoment", "reg-moment"):
            assert domination_check(X.bound_curve(name, got[name]), ests).passed


class TestBerryEsseen:
    def test_equal_weights(self):
        for n in (1, 10, 100):
            phi = np.ones((1, n))
            assert R.weight_moment(phi, 3.0) == pytest.approx(R.equal_weight_moment(n, 3.0), rel=1e-12)
            assert R.equal_weight_moment(n, 3.0) == pytest.approx(n**-0.5)

    @given(phi=hnp.arrays(float, (3, 9), elements=st.floats(-1e3, 1e3)), p=st.floats(2.0, 6.0))
    @settings(max_examples=100, deadline=None)
    def test_weight_moment_at_most_one(self, phi, p):
        if np.any(np.sum(phi * phi, axis=1) == 0):
            return
        assert 0 < R.weight_moment(phi, p) <= 1 + 1e-12

    def test_at_zero(self):
        assert R.berry_esseen_envelope(0.0, 3.0, 0.125, 2.0) == pytest.approx(2.0 * 0.125**0.25)

    def test_vector_and_decay(self):
        xs = np.array([0.0, 1.0, 2.0, 10.0])
        env = R.berry_esseen_envelope(xs, 3.0, 0.1, 1.0)
        assert env.shape == (4,)
        assert np.all(np.diff(env) < 0)
        assert env[3] * (1 + 1000.0) == pytest.approx(0.1**0.25)

    @pytest.mark.parametrize("args", [(0.0, 2.0, 0.5, 1.0), (0.0, 3.0, 1.5, 1.0), (0.0, 3.0, 0.0, 1.0)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            R.berry_esseen_envelope(*args)

    def test_fitted_constant_stable_across_n(self):
        from martdev.verify import nonuniform_gap_band, simulate_statistic_with_design

        p, xs = 3.0, np.arange(-4.0, 4.0001, 0.25)
        fits = []
        for n in (50, 200, 800):
            phi, _, err = simulate_statistic_with_design(config(n=n, phi=Exponential()), 20000, 70 + n)
            wm = R.weight_moment(phi, p)
            fits.append(float(np.max(nonuniform_gap_band(err, p, xs, 4.0) / wm ** (1 / (1 + p)))))
        assert max(fits) / min(fits) <= 2.0
