"""Nonlinearities, time stepping, comparison bounds, and cross-consistency."""

import math

import numpy as np
import pytest

from pmasym.grid import GridSpec
from pmasym.harness import renormalize, w_of
from pmasym.kernels import gauss_field, heat_semigroup
from pmasym.profiles import ProblemParams, tau_star, time_of_tau, zeta
from pmasym.solver import (
    InitialPerturbation,
    PositivityError,
    SolverConfig,
    coeff_A,
    flux_H,
    solve_original,
    solve_rescaled,
    source_F,
    u_from_w,
)


def params_for(m, alpha, lam=1.0, dim=1):
    return ProblemParams(m=m, alpha=alpha, lam=lam, dim=dim)


class TestNonlinearities:
    def test_coeff_a_base_point(self):
        p = params_for(2.0, 0.5)
        assert coeff_A(p, 0.0, 0.0) == 1.0
        assert coeff_A(p, 3.0, 0.0) == 1.0

    def test_coeff_a_linear_diffusion(self):
        p = params_for(1.0, 0.5)
        assert coeff_A(p, 1.0, 0.7) == 1.0

    def test_coeff_a_value(self):
        p = params_for(2.0, 0.0)
        assert coeff_A(p, 0.0, 0.5) == pytest.approx(1.5, rel=1e-14)

    def test_coeff_a_positivity_guard(self):
        p = params_for(2.0, 0.5)
        with pytest.raises(PositivityError):
            coeff_A(p, 0.0, -2.0)

    def test_source_f_taylor_base(self):
        p = params_for(2.0, 0.5)
        assert source_F(p, 1.0, 0.0) == 0.0

    def test_source_f_alpha_zero_cancels(self):
        p = params_for(2.0, 0.0)
        for w in (-0.5, 0.3, 2.0):
            assert source_F(p, 1.0, w) == pytest.approx(0.0, abs=1e-15)

    def test_source_f_value(self):
        p = params_for(1.0, 0.5)
        expected = math.sqrt(2.0) - 1.0 - 0.5
        assert source_F(p, 0.0, 1.0) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(-0.085786, abs=1e-6)

    def test_source_f_quadratic_near_zero(self):
        # F/w^2 approaches a finite limit as w -> 0
        p = params_for(2.0, 0.5)
        ratios = [source_F(p, 1.0, w) / w ** 2 for w in (1e-2, 1e-3, 1e-4)]
        assert ratios[0] == pytest.approx(ratios[2], rel=1e-2)

    def test_flux_h_zero_cases(self):
        assert np.all(flux_H(params_for(1.0, 0.5), 1.0, 0.7, np.array([2.0])) == 0.0)
        assert np.all(flux_H(params_for(2.0, 0.5), 1.0, 0.0, np.array([2.0])) == 0.0)

    def test_flux_h_value(self):
        p = params_for(2.0, 0.0)
        out = flux_H(p, 0.0, 0.5, np.array([2.0]))
        assert out == pytest.approx([1.0], rel=1e-14)


class TestInitialPerturbation:
    def test_gaussian_sampling(self):
        spec = GridSpec(1, 10.0, 256)
        phi = InitialPerturbation.gaussian(0.5, 2.0, 0.3)
        f = phi.sample(spec)
        x = spec.axis()
        assert np.allclose(f.values, 0.3 * np.exp(-((x - 0.5) / 2.0) ** 2))

    def test_bump_support_and_peak(self):
        spec = GridSpec(1, 10.0, 1024)
        phi = InitialPerturbation.smooth_bump(0.0, 2.0, 0.4)
        f = phi.sample(spec)
        x = spec.axis()
        assert np.all(f.values[np.abs(x) >= 2.0] == 0.0)
        assert f.values.max() == pytest.approx(0.4, abs=1e-4)

    def test_tabulated_grid_mismatch(self):
        f = gauss_field(GridSpec(1, 10.0, 256), 1.0)
        phi = InitialPerturbation.tabulated(f)
        with pytest.raises(ValueError):
            phi.sample(GridSpec(1, 10.0, 128))


class TestSolverConfig:
    def test_snapshot_validation(self):
        spec = GridSpec(1, 10.0, 64)
        with pytest.raises(ValueError):
            SolverConfig(grid=spec, snapshot_times=(1.0, 1.0))
        with pytest.raises(ValueError):
            SolverConfig(grid=spec, snapshot_times=(2.0, 1.0))
        with pytest.raises(ValueError):
            SolverConfig(grid=spec, snapshot_times=(0.0, 1.0))
        with pytest.raises(ValueError):
            SolverConfig(grid=spec, snapshot_times=(1.0,), stepper="leapfrog")


class TestSolveOriginal:
    def test_zero_perturbation_is_exact(self):
        p = params_for(2.0, 0.5)
        spec = GridSpec(1, 20.0, 128)
        cfg = SolverConfig(grid=spec, snapshot_times=(0.5, 2.0), stepper="adaptive")
        traj = solve_original(p, InitialPerturbation.gaussian(0.0, 1.0, 0.0), cfg)
        for t, f in zip(traj.times, traj.fields):
            zl = zeta(p, p.lam, t)
            assert np.abs(f.values / zl - 1.0).max() < 1e-10

    def test_linear_case_tracks_heat_flow(self):
        p = params_for(1.0, 0.0)
        spec = GridSpec(1, 20.0, 512)
        phi = InitialPerturbation.gaussian(0.0, 1.0, 0.5)
        cfg = SolverConfig(grid=spec, snapshot_times=(0.5, 1.0, 2.0),
                           stepper="fixed", dt_initial=1e-3)
        traj = solve_original(p, phi, cfg)
        x = spec.axis()
        for t, f in zip(traj.times[1:], traj.fields[1:]):
            width2 = 1.0 + 4.0 * t
            exact = (1.0 + t) + 0.5 / math.sqrt(width2 / 1.0) * np.exp(-x ** 2 / width2)
            assert np.abs(f.values - exact).max() < 1e-3

    def test_second_order_refinement(self):
        p = params_for(1.0, 0.0)
        phi = InitialPerturbation.gaussian(0.0, 1.0, 0.5)
        errs = []
        for n, dt in ((128, 4e-3), (256, 2e-3), (512, 1e-3)):
            spec = GridSpec(1, 20.0, n)
            cfg = SolverConfig(grid=spec, snapshot_times=(1.0,),
                               stepper="fixed", dt_initial=dt)
            traj = solve_original(p, phi, cfg)
            x = spec.axis()
            exact = 2.0 + 0.5 / math.sqrt(5.0) * np.exp(-x ** 2 / 5.0)
            errs.append(np.abs(traj.fields[-1].values - exact).max())
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.3)

    def test_comparison_bounds_recorded(self):
        p = params_for(2.0, 0.5)
        spec = GridSpec(1, 30.0, 256)
        phi = InitialPerturbation.gaussian(0.0, 1.0, -0.4)
        cfg = SolverConfig(grid=spec, snapshot_times=(0.5, 2.0, 5.0))
        traj = solve_original(p, phi, cfg)
        sampled = phi.sample(spec)
        assert traj.c == pytest.approx(1.0 + sampled.values.min(), abs=1e-14)
        assert traj.cprime == pytest.approx(1.0)
        assert traj.min_margin >= -cfg.bound_slack
        for d in traj.diagnostics:
            assert d["lower_margin"] >= -cfg.bound_slack
            assert d["upper_margin"] >= -cfg.bound_slack

    def test_rejects_nonpositive_initial_data(self):
        p = params_for(2.0, 0.5)
        spec = GridSpec(1, 10.0, 64)
        cfg = SolverConfig(grid=spec, snapshot_times=(1.0,))
        with pytest.raises(PositivityError):
            solve_original(p, InitialPerturbation.gaussian(0.0, 2.0, -1.5), cfg)

    def test_2d_linear_case(self):
        p = params_for(1.0, 0.0, dim=2)
        spec = GridSpec(2, 12.0, 96)
        phi = InitialPerturbation.gaussian((0.0, 0.0), 1.0, 0.5)
        cfg = SolverConfig(grid=spec, snapshot_times=(0.5,),
                           stepper="fixed", dt_initial=2e-3)
        traj = solve_original(p, phi, cfg)
        u_ren = renormalize(p, traj.fields[-1], 0.5)
        exact = heat_semigroup(phi.sample(spec), 0.5)
        assert np.abs(u_ren.values - exact.values).max() < 5e-3


class TestSolveRescaled:
    def test_zero_perturbation(self):
        p = params_for(2.0, 0.5)
        spec = GridSpec(1, 20.0, 128)
        cfg = SolverConfig(grid=spec, snapshot_times=(1.0, 4.0))
        traj = solve_rescaled(p, InitialPerturbation.gaussian(0.0, 1.0, 0.0), cfg)
        for f in traj.fields:
            assert np.abs(f.values).max() < 1e-12

    def test_linear_case_is_heat_flow(self):
        p = params_for(1.0, 0.0)
        spec = GridSpec(1, 20.0, 512)
        phi = InitialPerturbation.gaussian(0.0, 1.0, 0.5)
        cfg = SolverConfig(grid=spec, snapshot_times=(1.0,),
                           stepper="fixed", dt_initial=1e-3)
        traj = solve_rescaled(p, phi, cfg)
        exact = heat_semigroup(phi.sample(spec), 1.0)
        assert np.abs(traj.fields[-1].values - exact.values).max() < 1e-3

    def test_cross_check_against_original(self):
        # the same problem marched in both variables agrees after the
        # change of variables, well below the spatial error budget
        p = params_for(2.0, 0.5)
        spec = GridSpec(1, 60.0, 1024)
        phi = InitialPerturbation.gaussian(0.0, 1.0, 0.5)
        taus = (1.0, 5.0, 20.0)
        ts = tuple(time_of_tau(p, tau) for tau in taus)
        cfg_u = SolverConfig(grid=spec, snapshot_times=ts, dt_rel_cap=0.005)
        cfg_w = SolverConfig(grid=spec, snapshot_times=taus, dt_rel_cap=0.005)
        traj_u = solve_original(p, phi, cfg_u)
        traj_w = solve_rescaled(p, phi, cfg_w)
        for tau in taus:
            gap = np.abs(w_of(p, traj_u, tau).values
                         - w_of(p, traj_w, tau).values).max()
            assert gap < 2e-5

    def test_sign_preserved(self):
        p = params_for(1.5, 0.3)
        spec = GridSpec(1, 30.0, 256)
        phi = InitialPerturbation.gaussian(0.0, 1.5, 0.4)
        cfg = SolverConfig(grid=spec, snapshot_times=(0.5, 2.0, 10.0))
        traj = solve_rescaled(p, phi, cfg)
        for f in traj.fields:
            assert f.values.min() >= -1e-12

    def test_compensated_norms_bounded(self):
        # tau^{(N/2)(1/r - 1/q)} |w|_q stays bounded along the run
        p = params_for(2.0, 0.5)
        spec = GridSpec(1, 60.0, 512)
        phi = InitialPerturbation.gaussian(0.0, 1.0, 0.3)
        taus = tuple(np.geomspace(0.5, 50.0, 10))
        cfg = SolverConfig(grid=spec, snapshot_times=taus)
        traj = solve_rescaled(p, phi, cfg)
        r = 2.0
        comp = [tau ** (0.5 * (1.0 / r)) * np.abs(f.values).max()
                for tau, f in zip(traj.times[1:], traj.fields[1:])]
        assert max(comp) <= 3.0 * comp[0]

    def test_compensated_gradient_bounded(self):
        p = params_for(2.0, 0.5)
        spec = GridSpec(1, 60.0, 512)
        phi = InitialPerturbation.gaussian(0.0, 1.0, 0.3)
        taus = tuple(np.geomspace(0.5, 50.0, 10))
        cfg = SolverConfig(grid=spec, snapshot_times=taus)
        traj = solve_rescaled(p, phi, cfg)
        r = 2.0
        comp = [
            tau ** (0.5 / r + 0.5)
            * np.abs(np.gradient(f.values, spec.spacing)).max()
            for tau, f in zip(traj.times[1:], traj.fields[1:])]
        assert max(comp) <= 3.0 * comp[0]

    def test_rejects_snapshots_beyond_horizon(self):
        p = params_for(0.5, 0.75)
        spec = GridSpec(1, 20.0, 128)
        with pytest.raises(ValueError):
            cfg = SolverConfig(grid=spec, snapshot_times=(1.0, tau_star(p) + 1.0))
            solve_rescaled(p, InitialPerturbation.gaussian(0.0, 1.0, 0.1), cfg)

    def test_u_from_w_roundtrip(self):
        p = params_for(2.0, 0.5)
        spec = GridSpec(1, 30.0, 256)
        phi = InitialPerturbation.gaussian(0.0, 1.0, 0.3)
        cfg = SolverConfig(grid=spec, snapshot_times=(2.0,))
        traj = solve_rescaled(p, phi, cfg)
        u = u_from_w(p, traj.fields[-1], 2.0)
        back = renormalize(p, u, time_of_tau(p, 2.0))
        assert np.abs(back.values - traj.fields[-1].values).max() < 1e-13
