"""Numbered acceptance checks and the self-test property suite.

Each check returns a CheckResult with a one-line verdict.  Expensive
trajectories are cached on the suite object so later checks (bound
margins, background-ODE convergence) reuse the runs that produced them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .grid import GridField, GridSpec
from .harness import (
    estimate_M,
    finite_horizon_check,
    fit_rate,
    is_decreasing,
    renormalize,
    thm11_error,
    thm12_error,
)
from .kernels import gauss_deriv_field, heat_semigroup, lq_norm
from .moments import expand, expansion_field, moment_coefficients
from .profiles import ProblemParams, sigma, tau_star, time_of_tau, zeta
from .solver import (
    InitialPerturbation,
    SolverConfig,
    solve_original,
    solve_rescaled,
    _ratio,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0

    def line(self) -> str:
        return "%-38s %s  (%.1fs)  %s" % (
            self.name, "PASS" if self.passed else "FAIL", self.elapsed, self.detail)


def _timed(name, fn):
    t0 = time.time()
    passed, detail = fn()
    return CheckResult(name, bool(passed), detail, time.time() - t0)


class AcceptanceSuite:
    """The nine numbered checks, with shared trajectory caches."""

    BUMP = InitialPerturbation.smooth_bump(0.0, 2.0, 0.3)
    ASYM = InitialPerturbation.gaussian(0.7, 1.0, 0.3)

    def __init__(self):
        self._cache = {}

    # -- shared runs -------------------------------------------------------

    def _cached(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    def _rescaled_run(self, key, m, alpha, phi):
        def build():
            params = ProblemParams(m=m, alpha=alpha, lam=1.0, dim=1)
            spec = GridSpec(1, 200.0, 2048)
            taus = tuple(np.geomspace(0.5, 400.0, 24))
            cfg = SolverConfig(grid=spec, snapshot_times=taus, stepper="adaptive")
            return params, solve_rescaled(params, phi, cfg)
        return self._cached(key, build)

    def run_slow(self):
        return self._rescaled_run("slow", 2.0, 0.5, self.BUMP)

    def run_fast(self):
        return self._rescaled_run("fast", 0.8, 0.2, self.BUMP)

    def run_asym(self):
        return self._rescaled_run("asym", 2.0, 0.5, self.ASYM)

    def run_horizon(self):
        def build():
            params = ProblemParams(m=0.5, alpha=0.75, lam=1.0, dim=1)
            spec = GridSpec(1, 40.0, 1024)
            snaps = np.geomspace(0.1, 1e6, 36)
            snaps[int(np.argmin(np.abs(snaps - 1e5)))] = 1e5
            snaps[-1] = 1e6
            phi = InitialPerturbation.gaussian(0.0, 1.0, 0.5)
            cfg = SolverConfig(grid=spec, snapshot_times=tuple(snaps),
                               stepper="adaptive")
            return params, solve_original(params, phi, cfg)
        return self._cached("horizon", build)

    def all_runs(self):
        return [self.run_slow(), self.run_fast(), self.run_asym(),
                self.run_horizon()]

    # -- criteria ----------------------------------------------------------

    def criterion_1(self):
        """Linear oracle: U tracks the heat semigroup, second order in (h, dt)."""
        def body():
            params = ProblemParams(m=1.0, alpha=0.0, lam=1.0, dim=1)
            phi = InitialPerturbation.gaussian(0.0, 1.0, 0.5)
            snaps = (1.0, 5.0, 10.0, 25.0, 50.0)
            errs = []
            for n, dt in ((2048, 1e-3), (4096, 5e-4)):
                spec = GridSpec(1, 40.0, n)
                cfg = SolverConfig(grid=spec, snapshot_times=snaps,
                                   stepper="fixed", dt_initial=dt)
                traj = solve_original(params, phi, cfg)
                x = spec.axis()
                worst = 0.0
                for t, f in zip(traj.times[1:], traj.fields[1:]):
                    width2 = 1.0 + 4.0 * t
                    exact = 0.5 * math.sqrt(1.0 / width2) * np.exp(-x ** 2 / width2)
                    u_ren = renormalize(params, f, t)
                    worst = max(worst, float(np.abs(u_ren.values - exact).max()))
                errs.append(worst)
            ok = errs[0] <= 1e-3 and errs[1] <= 2.5e-4
            return ok, "coarse %.2e (<=1e-3), refined %.2e (<=2.5e-4)" % tuple(errs)
        return _timed("1 linear semigroup oracle", body)

    def criterion_2(self):
        """Background profile identities over random parameter draws."""
        def body():
            rng = np.random.default_rng(20240817)
            worst = {"ode": 0.0, "sigma": 0.0, "round_t": 0.0, "round_tau": 0.0}
            for regime in ("algebraic", "exponential", "finite"):
                for _ in range(50):
                    lam = rng.uniform(0.3, 3.0)
                    alpha = rng.uniform(0.05, 0.95)
                    if regime == "algebraic":
                        m = alpha + rng.uniform(0.1, 2.0)
                    elif regime == "exponential":
                        m = alpha
                    else:
                        m = alpha * rng.uniform(0.2, 0.9)
                    params = ProblemParams(m=m, alpha=alpha, lam=lam, dim=1)
                    t = rng.uniform(0.1, 10.0)
                    # background ODE residual via fourth-order central difference
                    h = 1e-3 * (1.0 + t)
                    stencil = [zeta(params, lam, t + k * h)
                               for k in (-2.0, -1.0, 1.0, 2.0)]
                    deriv = (stencil[0] - 8 * stencil[1]
                             + 8 * stencil[2] - stencil[3]) / (12.0 * h)
                    rhs = zeta(params, lam, t) ** alpha
                    worst["ode"] = max(worst["ode"], abs(deriv - rhs) / rhs)
                    # closed-form time dilation vs direct quadrature
                    val, _ = quad(lambda s: m * zeta(params, lam, s) ** (m - 1.0),
                                  0.0, t, epsabs=0.0, epsrel=1e-12, limit=200)
                    s_t = sigma(params, t)
                    worst["sigma"] = max(worst["sigma"], abs(s_t - val) / abs(val))
                    # roundtrips both ways
                    worst["round_t"] = max(
                        worst["round_t"], abs(time_of_tau(params, s_t) - t) / t)
                    tau = s_t * rng.uniform(0.1, 0.999)
                    worst["round_tau"] = max(
                        worst["round_tau"],
                        abs(sigma(params, time_of_tau(params, tau)) - tau) / tau)
            ok = (worst["ode"] < 1e-10 and worst["sigma"] < 1e-8
                  and worst["round_t"] < 1e-12 and worst["round_tau"] < 1e-12)
            return ok, ("ode %.1e, sigma %.1e, roundtrips %.1e/%.1e"
                        % (worst["ode"], worst["sigma"],
                           worst["round_t"], worst["round_tau"]))
        return _timed("2 profile identities", body)

    def criterion_3(self):
        """Vanishing residual moments for random Gaussian mixtures."""
        def body():
            rng = np.random.default_rng(3)
            spec = GridSpec(1, 40.0, 2048)
            x = spec.axis()
            worst_ratio = 0.0
            for _ in range(20):
                vals = np.zeros(spec.shape)
                for _ in range(int(rng.integers(1, 4))):
                    c = rng.uniform(-3.0, 3.0)
                    w = rng.uniform(0.6, 2.0)
                    a = rng.uniform(-1.0, 1.0)
                    vals += a * np.exp(-((x - c) / w) ** 2)
                f = GridField(spec, vals)
                for K in (0.0, 1.0, 2.0, 3.0):
                    for t in (0.0, 1.0, 10.0):
                        report = expand(f, K, t)
                        if report.tolerance == 0.0:
                            continue
                        top = max(abs(r) for r in report.residual_moments.values())
                        worst_ratio = max(worst_ratio, top / report.tolerance)
            return worst_ratio < 1.0, "worst residual %.3f of tolerance" % worst_ratio
        return _timed("3 vanishing moments", body)

    def criterion_4(self):
        """Heat-flow expansion error: compensated decay and raw slope."""
        def body():
            spec = GridSpec(1, 400.0, 4096)
            phi = InitialPerturbation.gaussian(0.7, 1.0, 1.0).sample(spec)
            times = np.geomspace(1e2, 1e3, 12)
            flows = [heat_semigroup(phi, t) for t in times]
            ok = True
            pieces = []
            for K in (0, 1, 2):
                coeffs = moment_coefficients(phi, 0.0, K)
                for q in (1.0, math.inf):
                    inv_q = 0.0 if q == math.inf else 1.0 / q
                    comp_exp = K / 2.0 + 0.5 * (1.0 - inv_q)
                    raws, comps = [], []
                    for t, ft in zip(times, flows):
                        r = lq_norm(ft - expansion_field(spec, coeffs, t), q)
                        raws.append(r)
                        comps.append(t ** comp_exp * r)
                    slope, _ = fit_rate(times, raws)
                    target = -comp_exp
                    good = is_decreasing(comps) and abs(slope - target) <= 0.15
                    ok = ok and good
                    pieces.append("K%d q%s %.2f/%.2f" % (K, q, slope, target))
            return ok, "slope/target: " + ", ".join(pieces)
        return _timed("4 heat-flow expansion rate", body)

    def criterion_5(self):
        """First-order convergence rate in both diffusion regimes."""
        def body():
            ok = True
            pieces = []
            for label, run in (("slow", self.run_slow()), ("fast", self.run_fast())):
                params, traj = run
                phi_field = traj.phi_field
                taus = np.asarray(traj.times[1:])
                errs = [thm11_error(params, f, phi_field, time_of_tau(params, tau),
                                    math.inf, 2.0)
                        for tau, f in zip(traj.times[1:], traj.fields[1:])]
                slope, _ = fit_rate(taus, errs)
                tail = [e for s, e in zip(taus, errs) if s >= taus.max() / 10.0]
                good = slope <= -0.05 and is_decreasing(tail)
                ok = ok and good
                pieces.append("%s slope %.3f (<=-0.05), tail dec %s"
                              % (label, slope, is_decreasing(tail)))
            return ok, "; ".join(pieces)
        return _timed("5 first-order rate", body)

    def criterion_6(self):
        """Expansion constants stabilize and compensated errors decay."""
        def body():
            ok = True
            pieces = []
            cases = [("slow", self.run_slow(), 0.0),
                     ("fast", self.run_fast(), 0.0),
                     ("asym", self.run_asym(), 1.0)]
            for label, (params, traj), K in cases:
                report = estimate_M(params, traj, K)
                good = report.stabilized
                for q in (1.0, math.inf):
                    taus = np.asarray(traj.times[1:])
                    comps = [thm12_error(params, f, report,
                                         time_of_tau(params, tau), q, K)[1]
                             for tau, f in zip(traj.times[1:], traj.fields[1:])]
                    tail = [c for s, c in zip(taus, comps) if s >= taus.max() / 10.0]
                    good = good and is_decreasing(tail)
                ok = ok and good
                pieces.append("%s K=%g stable %s, dec %s"
                              % (label, K, report.stabilized, good))
            return ok, "; ".join(pieces)
        return _timed("6 expansion constants", body)

    def criterion_7(self):
        """Finite horizon: time dilation saturates and the profile freezes."""
        def body():
            params, traj = self.run_horizon()
            result = finite_horizon_check(params, traj)
            gap_star = abs(result.tau_star_measured - result.tau_star_exact)
            i5 = traj.times.index(1e5)
            i6 = traj.times.index(1e6)
            u5 = renormalize(params, traj.fields[i5], 1e5)
            u6 = renormalize(params, traj.fields[i6], 1e6)
            freeze = float(np.abs(u6.values - u5.values).max())
            ok = gap_star < 1e-2 and freeze < 1e-3
            return ok, ("|sigma(t_final) - tau*| = %.2e (<1e-2), "
                        "profile gap %.2e (<1e-3)" % (gap_star, freeze))
        return _timed("7 finite horizon", body)

    def criterion_8(self):
        """Comparison bounds and positivity held on every cached run."""
        def body():
            worst = math.inf
            positive = True
            for params, traj in self.all_runs():
                worst = min(worst, traj.min_margin)
                for f in traj.fields:
                    if traj.variable_tag == "u-original" and f.values.min() <= 0.0:
                        positive = False
                for d in traj.diagnostics:
                    worst = min(worst, d["lower_margin"], d["upper_margin"])
            slack = 1e-7
            ok = worst >= -slack and positive
            return ok, "worst margin %.2e (>= -%g), positivity %s" % (
                worst, slack, positive)
        return _timed("8 comparison bounds", body)

    def criterion_9(self):
        """Convergence of u to the spatially uniform background."""
        def body():
            ok = True
            pieces = []
            for label, run in (("slow", self.run_slow()),
                               ("fast", self.run_fast()),
                               ("asym", self.run_asym())):
                params, traj = run
                devs = [float(np.abs(_ratio(params, tau, f.values) - 1.0).max())
                        for tau, f in zip(traj.times[1:], traj.fields[1:])]
                good = is_decreasing(devs) and devs[-1] < 5e-2
                ok = ok and good
                pieces.append("%s final %.2e dec %s" % (label, devs[-1],
                                                        is_decreasing(devs)))
            return ok, "; ".join(pieces)
        return _timed("9 background ODE limit", body)

    def run_all(self):
        return [getattr(self, "criterion_%d" % k)() for k in range(1, 10)]


# ---------------------------------------------------------------------------
# Fast property checks for the self-test entry point

def property_checks():
    """Cheap invariants exercised by the self-test before the numbered checks."""
    checks = []

    def gauss_deriv_fd():
        spec = GridSpec(1, 10.0, 512)
        t = 0.7
        d1 = gauss_deriv_field(spec, (1,), t).values
        h = 1e-5
        x = spec.axis()
        from .kernels import gauss
        fd = (gauss(x + h, t, 1) - gauss(x - h, t, 1)) / (2.0 * h)
        err = float(np.abs(d1 - fd).max())
        return err < 1e-6, "max gap %.1e" % err
    checks.append(_timed("gauss_deriv finite difference", gauss_deriv_fd))

    def semigroup_gaussian():
        spec = GridSpec(1, 30.0, 1024)
        x = spec.axis()
        f = GridField(spec, np.exp(-x ** 2))
        out = heat_semigroup(f, 2.0)
        exact = math.sqrt(1.0 / 9.0) * np.exp(-x ** 2 / 9.0)
        err = float(np.abs(out.values - exact).max())
        return err < 1e-10, "max gap %.1e" % err
    checks.append(_timed("semigroup maps Gaussian to Gaussian", semigroup_gaussian))

    def dilation_roundtrip():
        params = ProblemParams(m=1.5, alpha=0.4, lam=0.8, dim=1)
        t = 3.7
        back = time_of_tau(params, sigma(params, t))
        return abs(back - t) / t < 1e-12, "relative gap %.1e" % (abs(back - t) / t)
    checks.append(_timed("time dilation roundtrip", dilation_roundtrip))

    def horizon_value():
        params = ProblemParams(m=0.5, alpha=0.75, lam=1.0, dim=1)
        return abs(tau_star(params) - 2.0) < 1e-14, "tau* = %.15g" % tau_star(params)
    checks.append(_timed("finite horizon closed form", horizon_value))

    def expansion_residuals():
        spec = GridSpec(1, 40.0, 1024)
        x = spec.axis()
        f = GridField(spec, 0.7 * np.exp(-((x - 0.5) ** 2)))
        report = expand(f, 2.0, 1.0)
        return report.valid, "valid %s" % report.valid
    checks.append(_timed("expansion residual moments vanish", expansion_residuals))

    def config_roundtrip():
        from .config import parse_config, serialize_config
        text = "\n".join([
            "[params]", "m = 2.0", "alpha = 0.5", "lambda = 1.0", "dim = 1",
            "[phi]", "kind = gaussian", "center = 0.0", "width = 1.0",
            "amplitude = 0.5",
            "[grid]", "half_width = 40.0", "points_per_axis = 256",
            "[solver]", "snapshot_times = 1.0,2.0",
            "[analysis:a]", "kind = thm11", "q = inf", "r = 2.0",
        ])
        once = serialize_config(parse_config(text))
        twice = serialize_config(parse_config(once))
        return once == twice, "fixed point %s" % (once == twice)
    checks.append(_timed("config parse/serialize roundtrip", config_roundtrip))

    return checks


def run_selftest(stream=None):
    """Property suite plus the nine acceptance checks; returns overall success."""
    import sys
    stream = stream or sys.stdout
    results = property_checks()
    suite = AcceptanceSuite()
    results += suite.run_all()
    for r in results:
        stream.write(r.line() + "\n")
    n_bad = sum(1 for r in results if not r.passed)
    stream.write("%d/%d checks passed\n" % (len(results) - n_bad, len(results)))
    return n_bad == 0
