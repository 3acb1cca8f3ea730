"""Renormalization, theorem error functionals, rate fitting, and verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import GridField, mi_factorial, mi_order, multi_indices
from .kernels import gauss_deriv_field, heat_semigroup, lq_norm, weighted_norm
from .moments import ExpansionReport, moment_coefficients
from .profiles import ProblemParams, RegimeError, sigma, tau_star, time_of_tau, zeta
from .solver import PositivityError, Trajectory, u_from_w

SLOPE_TOLERANCE = 0.2  # default one-sided slack on fitted exponents
STABLE_REL_TOL = 0.02  # relative agreement certifying a stabilized coefficient
STABLE_ABS_TOL = 1e-6  # absolute floor for near-zero coefficients


def renormalize(params: ProblemParams, u_field: GridField, t: float) -> GridField:
    """Deviation variable U = lambda^alpha (u - zeta_lambda(t)) / zeta_lambda(t)^alpha."""
    if np.any(u_field.values <= 0.0):
        raise PositivityError("u must be positive to renormalize")
    zl = zeta(params, params.lam, t)
    scale = params.lam ** params.alpha / zl ** params.alpha
    return GridField(u_field.spec, scale * (u_field.values - zl))


def unrenormalize(params: ProblemParams, u_ren: GridField, t: float) -> GridField:
    """Algebraic inverse of renormalize."""
    zl = zeta(params, params.lam, t)
    scale = zl ** params.alpha / params.lam ** params.alpha
    return GridField(u_ren.spec, zl + scale * u_ren.values)


def w_of(params: ProblemParams, u_traj: Trajectory, tau: float) -> GridField:
    """Rescaled field w(., tau) read off a trajectory.

    For a rescaled trajectory this is the snapshot itself (interpolated in
    log tau between snapshots); for an original-variable trajectory the
    snapshots are renormalized and interpolated cubically in log t.
    """
    times = np.asarray(u_traj.times)
    if u_traj.variable_tag == "w-rescaled":
        t_target = tau
        fields = u_traj.fields
    else:
        t_target = time_of_tau(params, tau)
        fields = None
    if t_target < times[0] - 1e-12 or t_target > times[-1] * (1 + 1e-12):
        raise ValueError("tau = %g maps outside the trajectory time range" % tau)
    hit = np.flatnonzero(np.isclose(times, t_target, rtol=1e-12, atol=1e-300))
    if hit.size:
        idx = int(hit[0])
        f = u_traj.fields[idx]
        if u_traj.variable_tag == "w-rescaled":
            return f.copy()
        return renormalize(params, f, times[idx]) if times[idx] > 0 else f.copy()
    if fields is None:
        fields = [
            renormalize(params, f, tk) if tk > 0 else f
            for tk, f in zip(times, u_traj.fields)
        ]
    positive = times > 0
    stack = np.stack([f.values for f, keep in zip(fields, positive) if keep])
    spline = CubicSpline(np.log(times[positive]), stack, axis=0)
    return GridField(u_traj.fields[0].spec, spline(math.log(t_target)))


def ode_convergence_error(params: ProblemParams, u_field: GridField, t: float) -> float:
    """sup |u(., t) / zeta_lambda(t) - 1|."""
    zl = zeta(params, params.lam, t)
    return float(np.abs(u_field.values / zl - 1.0).max())


def thm11_error(params: ProblemParams, u_ren: GridField, phi: GridField,
                t: float, q, r: float) -> float:
    """Compensated first-order error sigma^{(N/2)(1/r - 1/q)} |U - e^{sigma Lap} phi|_q."""
    if not 1.0 < r:
        raise ValueError("r must exceed 1")
    inv_q = 0.0 if q == math.inf else 1.0 / float(q)
    s = sigma(params, t)
    diff = u_ren - heat_semigroup(phi, s)
    return float(s ** (params.dim / 2.0 * (1.0 / r - inv_q)) * lq_norm(diff, q))


def expansion_profile(params: ProblemParams, spec, m_constants: dict,
                      s: float) -> GridField:
    """sum_nu M_nu d^nu G(., s) on the grid."""
    out = np.zeros(spec.shape)
    for nu, const in m_constants.items():
        out += const * gauss_deriv_field(spec, nu, s).values
    return GridField(spec, out)


def thm12_error(params: ProblemParams, u_ren: GridField, report: ExpansionReport,
                t: float, q, K: float):
    """Higher-order expansion error; returns (raw, compensated) at time t."""
    if report.M_constants is None:
        raise ValueError("report does not carry M constants")
    inv_q = 0.0 if q == math.inf else 1.0 / float(q)
    s = sigma(params, t)
    kept = {nu: c for nu, c in report.M_constants.items() if mi_order(nu) <= math.floor(K)}
    raw = lq_norm(u_ren - expansion_profile(params, u_ren.spec, kept, s), q)
    comp = s ** (params.dim / 2.0 * (1.0 - inv_q) + K / 2.0) * raw
    return float(raw), float(comp)


def estimate_M(params: ProblemParams, traj: Trajectory, K: float,
               n_samples: int = 6) -> ExpansionReport:
    """Expansion constants M_nu from late-time stabilization of m_nu(w(tau), tau).

    Samples the last `n_samples` snapshots; a coefficient counts as
    stabilized when the last three samples agree within 2% relative (or an
    absolute floor for near-zero values).  M_nu = (-1)^{|nu|} m_nu / nu!.
    """
    k_int = math.floor(K)
    times = np.asarray(traj.times)
    usable = [i for i, tk in enumerate(times) if tk > 0]
    if len(usable) < 3:
        raise ValueError("trajectory has too few positive-time snapshots")
    picks = usable[-n_samples:]
    samples = {nu: [] for nu in multi_indices(traj.fields[0].spec.dim, k_int)}
    sample_taus = []
    for i in picks:
        if traj.variable_tag == "w-rescaled":
            tau_i, w_i = times[i], traj.fields[i]
        else:
            tau_i = sigma(params, times[i])
            w_i = renormalize(params, traj.fields[i], times[i])
        sample_taus.append(tau_i)
        coeffs = moment_coefficients(w_i, tau_i, k_int)
        for nu in samples:
            samples[nu].append(coeffs[nu])

    coefficients, m_constants = {}, {}
    stabilized = True
    for nu, vals in samples.items():
        last = vals[-3:]
        spread = max(last) - min(last)
        scale = max(abs(v) for v in last)
        if spread > max(STABLE_REL_TOL * scale, STABLE_ABS_TOL):
            stabilized = False
        m_nu = vals[-1]
        coefficients[nu] = m_nu
        m_constants[nu] = (-1.0) ** mi_order(nu) * m_nu / mi_factorial(nu)

    tol = 1e-7 * weighted_norm(traj.fields[-1], K)
    report = ExpansionReport(
        K=K,
        at_time=float(sample_taus[-1]),
        coefficients=coefficients,
        residual_moments={},
        tolerance=tol,
        M_constants=m_constants,
        stabilized=stabilized,
        samples={nu: list(v) for nu, v in samples.items()},
    )
    return report


def fit_rate(times, values, decades: float = 1.0):
    """Least-squares slope of log(value) vs log(time) over the final decades.

    Returns (slope, standard error).  Requires at least 8 points in the
    window and strictly positive values.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(times <= 0):
        raise ValueError("times must be positive")
    if np.any(values <= 0):
        raise ValueError("values must be positive to fit a log-log slope")
    window = times >= times.max() / 10.0 ** decades
    if window.sum() < 8:
        raise ValueError("fewer than 8 points in the fitting window")
    x = np.log(times[window])
    y = np.log(values[window])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(len(x) - 2, 1)
    sxx = ((x - x.mean()) ** 2).sum()
    stderr = math.sqrt((resid ** 2).sum() / dof / sxx)
    return float(slope), float(stderr)


def is_decreasing(values, jitter: float = 1e-3) -> bool:
    """Monotone decrease up to a relative jitter allowance."""
    v = np.asarray(values, dtype=float)
    if v[-1] >= v[0]:
        return False
    return bool(np.all(v[1:] <= v[:-1] * (1.0 + jitter)))


@dataclass
class RateReport:
    """Fitted decay rate of an error functional with a pass/fail verdict."""

    experiment_id: str
    times: list
    compensated_errors: list
    predicted_exponent: float
    fitted_slope: float
    slope_stderr: float
    verdict: str
    raw_errors: list = field(default_factory=list)
    slope_tolerance: float = SLOPE_TOLERANCE
    decades: float = 1.0

    @classmethod
    def from_series(cls, experiment_id, times, compensated, predicted_exponent,
                    raw_errors=None, slope_tolerance=SLOPE_TOLERANCE, decades=1.0,
                    inconclusive=False):
        slope, stderr = fit_rate(times, compensated, decades=decades)
        times = [float(x) for x in times]
        compensated = [float(x) for x in compensated]
        window = [i for i, tk in enumerate(times) if tk >= max(times) / 10.0 ** decades]
        tail = [compensated[i] for i in window]
        ok = slope <= predicted_exponent + slope_tolerance and is_decreasing(tail)
        verdict = "inconclusive" if inconclusive else ("pass" if ok else "fail")
        return cls(
            experiment_id=experiment_id,
            times=times,
            compensated_errors=compensated,
            predicted_exponent=float(predicted_exponent),
            fitted_slope=slope,
            slope_stderr=stderr,
            verdict=verdict,
            raw_errors=[float(x) for x in (raw_errors if raw_errors is not None else compensated)],
            slope_tolerance=slope_tolerance,
            decades=decades,
        )


@dataclass
class FiniteHorizonResult:
    tau_star_measured: float
    tau_star_exact: float
    limit_profile: GridField
    cauchy_gaps: list


def finite_horizon_check(params: ProblemParams, u_traj: Trajectory) -> FiniteHorizonResult:
    """Measured finite horizon and limit profile for m < alpha.

    Returns sigma(t_final), the late-time renormalized field, and the
    sup-norm gaps between successive renormalized snapshots (which must
    shrink if U converges).
    """
    if params.regime != "finite-horizon":
        raise RegimeError("finite_horizon_check requires m < alpha")
    if u_traj.variable_tag != "u-original":
        raise ValueError("finite_horizon_check expects an original-variable trajectory")
    times = [tk for tk in u_traj.times if tk > 0]
    fields = [f for tk, f in zip(u_traj.times, u_traj.fields) if tk > 0]
    renorm = [renormalize(params, f, tk) for tk, f in zip(times, fields)]
    gaps = [
        float(np.abs(b.values - a.values).max())
        for a, b in zip(renorm[:-1], renorm[1:])
    ]
    return FiniteHorizonResult(
        tau_star_measured=float(sigma(params, times[-1])),
        tau_star_exact=tau_star(params),
        limit_profile=renorm[-1],
        cauchy_gaps=gaps,
    )
