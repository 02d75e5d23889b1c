import numpy as np
import pytest

import regflow as rf
from regflow.flow import Trajectory, TrajectorySample


def synthetic_traj(t, values, mode="continuous"):
    """Trajectory whose dist_fix/residual both equal ``values``; states are 1-D."""
    samples = [
        TrajectorySample(float(ti), np.array([vi]), float(vi), float(vi), float(vi))
        for ti, vi in zip(t, values)
    ]
    limit = np.array([0.0]) if values[-1] < 1e-9 else None
    return Trajectory(samples, mode, rf.Constant(1.0), limit)


class TestFitDecay:
    def test_exact_exponential_recovery(self):
        t = np.linspace(0.0, 5.0, 50)
        traj = synthetic_traj(t, 2.0 * np.exp(-3.0 * t))
        fit = rf.fit_decay(traj, "residual", "exponential", window=(0.0, 5.0))
        assert fit.M == pytest.approx(2.0, rel=1e-10)
        assert fit.rate == pytest.approx(3.0, rel=1e-10)
        assert fit.rss < 1e-20

    def test_exact_powerlaw_recovery(self):
        t = np.linspace(1.0, 100.0, 60)
        traj = synthetic_traj(t, 5.0 * t ** (-1.5))
        fit = rf.fit_decay(traj, "residual", "powerlaw", window=(1.0, 100.0))
        assert fit.M == pytest.approx(5.0, rel=1e-10)
        assert fit.rate == pytest.approx(1.5, rel=1e-10)

    def test_recovery_under_multiplicative_noise(self):
        rng = np.random.default_rng(19)
        t = np.linspace(0.0, 5.0, 200)
        noise = 1.0 + 1e-3 * (2.0 * rng.random(t.size) - 1.0)
        traj = synthetic_traj(t, 2.0 * np.exp(-3.0 * t) * noise)
        fit = rf.fit_decay(traj, "residual", "exponential", window=(0.0, 5.0))
        assert fit.M == pytest.approx(2.0, rel=0.02)
        assert fit.rate == pytest.approx(3.0, rel=0.02)

    def test_default_window_drops_transient(self):
        t = np.linspace(0.0, 10.0, 101)
        y = 2.0 * np.exp(-3.0 * t)
        y[:5] = 10.0  # corrupt the early transient
        traj = synthetic_traj(t, y)
        fit = rf.fit_decay(traj, "residual", "exponential")
        assert fit.fit_window[0] >= t[20]  # last 80% only
        assert fit.rate == pytest.approx(3.0, rel=1e-6)

    def test_powerlaw_requires_positive_window(self):
        t = np.linspace(0.0, 10.0, 50)
        traj = synthetic_traj(t, np.exp(-t) + 1.0)
        with pytest.raises(rf.UsageError):
            rf.fit_decay(traj, "residual", "powerlaw", window=(0.0, 10.0))

    def test_powerlaw_default_window_starts_at_one(self):
        t = np.linspace(0.0, 50.0, 501)
        traj = synthetic_traj(t[1:], 5.0 * t[1:] ** (-1.5))
        fit = rf.fit_decay(traj, "residual", "powerlaw")
        assert fit.fit_window[0] >= 1.0
        assert fit.rate == pytest.approx(1.5, rel=1e-8)

    def test_identically_zero_returns_none(self):
        t = np.linspace(0.0, 5.0, 20)
        traj = synthetic_traj(t, np.zeros_like(t))
        assert rf.fit_decay(traj, "residual", "exponential") is None

    def test_too_few_positive_samples_raises(self):
        t = np.linspace(0.0, 5.0, 8)
        traj = synthetic_traj(t, np.exp(-t))
        with pytest.raises(rf.FitError):
            rf.fit_decay(traj, "residual", "exponential", window=(0.0, 5.0))

    def test_growing_series_raises(self):
        t = np.linspace(0.0, 5.0, 30)
        traj = synthetic_traj(t, np.exp(+t))
        with pytest.raises(rf.FitError):
            rf.fit_decay(traj, "residual", "exponential", window=(0.0, 5.0))

    def test_dist_to_limit_metric(self):
        t = np.linspace(0.0, 5.0, 50)
        vals = 2.0 * np.exp(-5.0 * t)
        samples = [TrajectorySample(float(ti), np.array([vi]), vi, vi, vi)
                   for ti, vi in zip(t, vals)]
        traj = Trajectory(samples, "continuous", rf.Constant(1.0),
                          limit_estimate=np.array([0.0]))
        fit = rf.fit_decay(traj, "dist_to_limit", "exponential", window=(0.0, 5.0))
        assert fit.rate == pytest.approx(5.0, rel=1e-9)


class TestSelectModel:
    def test_exact_exponential_chosen(self):
        t = np.linspace(0.5, 20.0, 80)
        traj = synthetic_traj(t, 3.0 * np.exp(-0.7 * t))
        exp_fit, pow_fit, chosen = rf.select_model(traj, "residual", window=(0.5, 20.0))
        assert chosen == "exponential"
        assert exp_fit.rss_per_point < pow_fit.rss_per_point

    def test_exact_powerlaw_chosen(self):
        t = np.linspace(1.0, 200.0, 80)
        traj = synthetic_traj(t, 3.0 * t ** (-0.8))
        exp_fit, pow_fit, chosen = rf.select_model(traj, "residual", window=(1.0, 200.0))
        assert chosen == "powerlaw"


class TestLinearRateBound:
    def test_start_at_fixed_point_zero_margins(self, zero_map):
        t = np.linspace(0.0, 3.0, 31)
        samples = [TrajectorySample(float(ti), np.array([0.0]), 0.0, 0.0, 0.0)
                   for ti in t]
        traj = Trajectory(samples, "continuous", rf.Constant(1.0),
                          limit_estimate=np.array([0.0]))
        bc = rf.check_linear_rate_bound(traj, kappa=1.0)
        assert bc.passed
        for margin in bc.margins.values():
            assert margin == pytest.approx(0.0, abs=1e-15)

    def test_zero_map_flow_key_inequalities(self, zero_map):
        # closed form x(t) = e^{-t}: d^2 = e^{-2t} <= e^{-(lam*/k^2) t} with k=1
        times = tuple(np.linspace(0.0, 25.0, 251))
        cfg = rf.IntegratorConfig("rk45", 25.0, rel_tol=1e-11, abs_tol=1e-13,
                                  sample_times=times)
        traj = rf.integrate_flow(zero_map, [1.0], rf.Constant(1.0), cfg,
                                 oracle=rf.SinglePoint([0.0]))
        assert traj.limit_estimate is not None
        bc = rf.check_linear_rate_bound(traj, kappa=1.0, d0=1.0)
        assert bc.passed
        # margin of the squared-decay inequality at t=1: e^{-1} - e^{-2}
        t = traj.times()
        d = traj.metric("dist_fix")
        margins = np.exp(-t) - d ** 2
        assert margins[10] == pytest.approx(np.exp(-1.0) - np.exp(-2.0), abs=1e-8)

    def test_requires_positive_lambda_inf(self, zero_map):
        traj = rf.km_iterate(zero_map, [1.0], [0.0, 0.0], 2, rf.SinglePoint([0.0]))
        sched = rf.PiecewiseConstant([0.0], [0.0])
        with pytest.raises(rf.UsageError):
            rf.check_linear_rate_bound(traj, 1.0, sched, x_bar=[0.0])

    def test_missing_limit_and_x_bar_raises(self, zero_map):
        traj = rf.km_iterate(zero_map, [1.0], 0.5, 3, rf.SinglePoint([0.0]))
        assert traj.limit_estimate is None
        with pytest.raises(rf.UsageError):
            rf.check_linear_rate_bound(traj, 1.0)

    def test_fit_rate_dominates_theorem_rate(self, two_lines):
        times = tuple(np.linspace(0.0, 20.0, 401))
        cfg = rf.IntegratorConfig("rk45", 20.0, rel_tol=1e-10, abs_tol=1e-12,
                                  sample_times=times)
        traj = rf.integrate_flow(two_lines["op"], [4.0, 3.0], rf.Constant(1.0),
                                 cfg, oracle=two_lines["oracle"])
        est = rf.estimate_operator_regularity(two_lines["op"], two_lines["oracle"],
                                              rf.Region(np.zeros(2), 10.0),
                                              2000, "linear", 0)
        fit = rf.fit_decay(traj, "dist_fix", "exponential")
        assert fit.rate >= 1.0 / (2.0 * est.kappa ** 2) - 1e-6


class TestHoelderRateBound:
    def test_constant_construction(self):
        # u' <= -alpha u^{1/gamma} comparison constant, gamma = 1/2, alpha = 1:
        # lemma constant is 1, and the distance bound is its square root
        m0 = rf.hoelder_bound_constant(kappa=1.0, gamma=0.5, lam_star=1.0)
        assert m0 == pytest.approx(1.0)
        m = rf.powerlaw_comparison_constant(1.0, 0.5)
        assert m == pytest.approx(1.0)

    def test_exponent_identity_recomputed(self):
        gamma = 0.37
        rho = gamma / (2.0 * (1.0 - gamma))
        t = np.linspace(1.0, 50.0, 200)
        m0 = rf.hoelder_bound_constant(2.0, gamma, 0.8)
        vals = 0.9 * m0 * t ** (-rho)
        traj = synthetic_traj(t, vals)
        traj.limit_estimate = np.array([0.0])
        bc = rf.check_hoelder_rate_bound(traj, 2.0, gamma, rf.Constant(0.8))
        assert bc.passed
        # the bound exponent is exactly gamma/(2(1-gamma)): scaling the series
        # by t^{+0.01} must eventually break it
        bad = synthetic_traj(t, m0 * t ** (-rho + 0.05))
        bad.limit_estimate = np.array([0.0])
        bc_bad = rf.check_hoelder_rate_bound(bad, 2.0, gamma, rf.Constant(0.8))
        assert not bc_bad.passed

    def test_start_at_fixed_point_trivial(self):
        t = np.linspace(0.0, 5.0, 51)
        samples = [TrajectorySample(float(ti), np.zeros(1), 0.0, 0.0, 0.0)
                   for ti in t]
        traj = Trajectory(samples, "continuous", rf.Constant(1.0),
                          limit_estimate=np.zeros(1))
        bc = rf.check_hoelder_rate_bound(traj, 1.0, 0.5)
        assert bc.passed and bc.worst_margin >= 0.0

    def test_gamma_range_checked(self):
        t = np.linspace(1.0, 5.0, 20)
        traj = synthetic_traj(t, 1.0 / t)
        traj.limit_estimate = np.array([0.0])
        for bad in (0.0, 1.0, 1.5, -0.2):
            with pytest.raises(rf.UsageError):
                rf.check_hoelder_rate_bound(traj, 1.0, bad)


class TestComparisonLemmas:
    def test_gronwall_saturated(self):
        rep = rf.verify_comparison_lemmas(2.0, 0.5, 3.0)
        assert rep.passed
        t, u = rf.integrate_scalar_decay(2.0, 1.0, 3.0, 20.0)
        np.testing.assert_allclose(u, 3.0 * np.exp(-2.0 * t), atol=1e-9)

    def test_closed_form_power_case(self):
        t, u = rf.integrate_scalar_decay(1.0, 2.0, 1.0, 20.0)
        np.testing.assert_allclose(u, 1.0 / (1.0 + t), atol=1e-9)
        pos = t > 0
        assert np.all(u[pos] <= 1.0 / t[pos])

    def test_zero_initial_condition(self):
        rep = rf.verify_comparison_lemmas(1.0, 0.5, 0.0)
        assert rep.passed
        t, u = rf.integrate_scalar_decay(1.0, 2.0, 0.0, 5.0)
        assert np.all(u == 0.0)

    def test_parameter_validation(self):
        with pytest.raises(rf.UsageError):
            rf.verify_comparison_lemmas(-1.0, 0.5, 1.0)
        with pytest.raises(rf.UsageError):
            rf.verify_comparison_lemmas(1.0, 1.0, 1.0)
        with pytest.raises(rf.UsageError):
            rf.verify_comparison_lemmas(1.0, 0.5, -1.0)
