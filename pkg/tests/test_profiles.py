"""Closed-form scalar profiles against independent ODE/quadrature oracles."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import bisect

from pmasym.profiles import (
    ProblemParams,
    RegimeError,
    eta,
    h_decay,
    log_eta_growth_rate,
    sigma,
    tau_star,
    time_of_tau,
    zeta,
)


def rk4_ode(rhs, y0, t_end, step):
    """Fixed-step RK4 oracle for y' = rhs(y)."""
    n = int(round(t_end / step))
    y = y0
    for _ in range(n):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * step * k1)
        k3 = rhs(y + 0.5 * step * k2)
        k4 = rhs(y + step * k3)
        y += step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def params_for(m, alpha, lam=1.0):
    return ProblemParams(m=m, alpha=alpha, lam=lam, dim=1)


class TestZeta:
    def test_alpha_zero_is_linear(self):
        assert zeta(params_for(1.0, 0.0), 1.0, 2.0) == pytest.approx(3.0, abs=1e-14)

    def test_initial_condition(self):
        assert zeta(params_for(1.0, 0.5), 2.0, 0.0) == pytest.approx(2.0, abs=1e-14)

    def test_sqrt_source_vs_rk4(self):
        oracle = rk4_ode(lambda y: math.sqrt(y), 1.0, 1.0, 1e-4)
        value = zeta(params_for(1.0, 0.5), 1.0, 1.0)
        assert value == pytest.approx(2.25, abs=1e-12)
        assert value == pytest.approx(oracle, rel=1e-10)

    def test_negative_alpha_vs_rk4(self):
        oracle = rk4_ode(lambda y: 1.0 / y, 1.0, 4.0, 1e-4)
        value = zeta(params_for(1.0, -1.0), 1.0, 4.0)
        assert value == pytest.approx(3.0, abs=1e-12)
        assert value == pytest.approx(oracle, rel=1e-10)

    def test_rejects_nonpositive_mu(self):
        with pytest.raises(ValueError):
            zeta(params_for(1.0, 0.5), 0.0, 1.0)

    def test_ode_residual_richardson(self):
        # central differences at steps h and h/2, Richardson extrapolated
        for m, a, lam in [(2.0, 0.5, 1.0), (0.5, 0.75, 2.0), (0.7, 0.7, 0.5)]:
            p = params_for(m, a, lam)
            for t in np.geomspace(0.01, 100.0, 100):
                h = 1e-3 * (1.0 + t)

                def central(step):
                    return (zeta(p, lam, t + step) - zeta(p, lam, max(t - step, 0.0))) / (2 * step)

                if t < h:
                    continue
                deriv = (4.0 * central(h / 2) - central(h)) / 3.0
                rhs = zeta(p, lam, t) ** a
                assert abs(deriv - rhs) / rhs < 1e-10

    def test_comparison_monotonicity(self):
        p = params_for(1.5, 0.3)
        for t in (0.0, 0.5, 3.0, 50.0):
            assert zeta(p, 0.5, t) < zeta(p, 0.9, t) < zeta(p, 2.0, t)


class TestSigma:
    def test_m_one_is_identity(self):
        for a in (-1.0, 0.0, 0.5):
            assert sigma(params_for(1.0, a, 2.0), 5.0) == pytest.approx(5.0, abs=1e-12)

    def test_against_quadrature(self):
        p = params_for(2.0, 0.0)
        oracle, _ = quad(lambda s: 2.0 * zeta(p, 1.0, s), 0.0, 3.0, epsrel=1e-12)
        assert sigma(p, 3.0) == pytest.approx(15.0, abs=1e-10)
        assert sigma(p, 3.0) == pytest.approx(oracle, rel=1e-10)

    def test_equal_exponent_branch(self):
        p = params_for(0.5, 0.5)
        oracle, _ = quad(lambda s: 0.5 * zeta(p, 1.0, s) ** -0.5, 0.0, 2.0, epsrel=1e-12)
        assert sigma(p, 2.0) == pytest.approx(math.log(2.0), rel=1e-12)
        assert sigma(p, 2.0) == pytest.approx(oracle, rel=1e-10)

    def test_random_draws_vs_quadrature(self):
        rng = np.random.default_rng(7)
        for regime in ("algebraic", "exponential", "finite-horizon"):
            for _ in range(50):
                lam = rng.uniform(0.3, 3.0)
                a = rng.uniform(0.05, 0.95)
                if regime == "algebraic":
                    m = a + rng.uniform(0.1, 2.0)
                elif regime == "exponential":
                    m = a
                else:
                    m = a * rng.uniform(0.2, 0.9)
                p = params_for(m, a, lam)
                assert p.regime == regime
                t = rng.uniform(0.1, 10.0)
                oracle, _ = quad(lambda s: m * zeta(p, lam, s) ** (m - 1.0),
                                 0.0, t, epsrel=1e-12, limit=200)
                assert sigma(p, t) == pytest.approx(oracle, rel=1e-8)

    def test_strictly_increasing(self):
        p = params_for(0.4, 0.8)
        ts = np.geomspace(0.01, 1e6, 40)
        vals = sigma(p, ts)
        assert np.all(np.diff(vals) > 0)

    def test_branch_continuity_near_equal_exponents(self):
        # values just outside the logarithmic-branch window agree with it
        a = 0.5
        exact = sigma(params_for(a, a), 2.0)
        near = sigma(params_for(a + 9e-7, a), 2.0)
        outside = sigma(params_for(a + 2e-6, a), 2.0)
        assert near == pytest.approx(exact, rel=1e-5)
        assert outside == pytest.approx(exact, rel=1e-5)


class TestTimeOfTau:
    def test_identity_for_m_one(self):
        assert time_of_tau(params_for(1.0, 0.3), 7.0) == pytest.approx(7.0, rel=1e-14)

    def test_against_bisection(self):
        p = params_for(2.0, 0.0)
        oracle = bisect(lambda t: sigma(p, t) - 15.0, 0.0, 100.0, xtol=1e-13)
        value = time_of_tau(p, 15.0)
        assert value == pytest.approx(3.0, rel=1e-12)
        assert value == pytest.approx(oracle, rel=1e-10)

    def test_roundtrips(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            lam = rng.uniform(0.3, 3.0)
            a = rng.uniform(0.05, 0.95)
            m = rng.uniform(0.1, 3.0)
            p = params_for(m, a, lam)
            for t in (0.1, 1.0, 10.0, 100.0):
                if p.regime == "finite-horizon" and sigma(p, t) > 0.9 * tau_star(p):
                    # the inverse is ill-conditioned approaching the horizon
                    continue
                assert time_of_tau(p, sigma(p, t)) == pytest.approx(t, rel=1e-12)
            if p.regime == "finite-horizon":
                tau = tau_star(p) * rng.uniform(0.01, 0.9)
            else:
                tau = rng.uniform(0.01, 50.0)
            assert sigma(p, time_of_tau(p, tau)) == pytest.approx(tau, rel=1e-12)

    def test_rejects_tau_beyond_horizon(self):
        p = params_for(0.5, 0.75)
        with pytest.raises(RegimeError):
            time_of_tau(p, tau_star(p))


class TestEta:
    def test_initial_value(self):
        for p in (params_for(2.0, 0.5, 1.7), params_for(0.5, 0.75, 0.4)):
            assert eta(p, 0.0) == pytest.approx(p.lam, rel=1e-14)

    def test_linear_composition(self):
        assert eta(params_for(1.0, 0.0), 4.0) == pytest.approx(5.0, rel=1e-14)

    def test_growth_exponent(self):
        p = params_for(2.0, 0.0)
        lo, hi = 1e5, 1e6
        slope = (math.log(eta(p, hi)) - math.log(eta(p, lo))) / math.log(hi / lo)
        assert slope == pytest.approx(0.5, rel=0.01)

    def test_log_growth_rate_equal_exponents(self):
        p = params_for(0.5, 0.5)
        assert log_eta_growth_rate(p) == pytest.approx(1.0 / p.m, rel=1e-6)


class TestHDecay:
    def test_value_at_zero(self):
        assert h_decay(params_for(2.0, 0.0), 0.0) == pytest.approx(1.0, abs=1e-14)

    def test_algebraic_exponent(self):
        assert h_decay(params_for(2.0, 0.0), 3.0) == pytest.approx(0.125, rel=1e-12)

    def test_equal_exponent_branch_decreasing(self):
        p = params_for(0.5, 0.5)
        vals = h_decay(p, np.linspace(0.0, 20.0, 15))
        assert np.all(vals > 0)
        assert np.all(np.diff(vals) < 0)

    def test_rejects_finite_horizon(self):
        with pytest.raises(RegimeError):
            h_decay(params_for(0.5, 0.75), 1.0)


class TestTauStar:
    def test_closed_form_vs_quadrature(self):
        p = params_for(0.5, 0.75)
        pieces = [(0.0, 1.0), (1.0, 1e2), (1e2, 1e4), (1e4, 1e6), (1e6, 1e8)]
        oracle = sum(
            quad(lambda s: 0.5 * zeta(p, 1.0, s) ** -0.5, lo, hi, epsrel=1e-11)[0]
            for lo, hi in pieces)
        assert tau_star(p) == pytest.approx(2.0, rel=1e-12)
        assert tau_star(p) == pytest.approx(oracle, rel=1e-4)

    def test_lambda_scaling(self):
        value = tau_star(params_for(0.5, 0.75, 2.0))
        assert value == pytest.approx(2.0 * 2.0 ** -0.25, rel=1e-12)

    def test_rejects_nonfinite_horizon(self):
        with pytest.raises(RegimeError):
            tau_star(params_for(1.0, 0.0))

    def test_sigma_saturates(self):
        p = params_for(0.5, 0.75)
        assert sigma(p, 1e8) < tau_star(p)
        assert sigma(p, 1e8) == pytest.approx(tau_star(p), rel=1e-4)


class TestValidation:
    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            ProblemParams(m=0.0, alpha=0.5, lam=1.0, dim=1)
        with pytest.raises(ValueError):
            ProblemParams(m=1.0, alpha=1.0, lam=1.0, dim=1)
        with pytest.raises(ValueError):
            ProblemParams(m=1.0, alpha=0.5, lam=-1.0, dim=1)
        with pytest.raises(ValueError):
            ProblemParams(m=1.0, alpha=0.5, lam=1.0, dim=0)

    def test_regime_flags(self):
        assert params_for(2.0, 0.5).regime == "algebraic"
        assert params_for(0.5, 0.5).regime == "exponential"
        assert params_for(0.5, 0.75).regime == "finite-horizon"
