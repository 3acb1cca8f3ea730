"""Finite-difference solvers for the source problem and its rescaled form.

Time stepping is Strang splitting: the source is advanced by its exact ODE
flow (original variables) or a vectorized RK4 substep (rescaled variables),
and the diffusion term by a theta-scheme with the nonlinear coefficient
lagged at the current state, so each step is one symmetric banded solve in
1-D (conjugate gradients with diagonal preconditioning in 2-D).  The far
field is the exact homogeneous profile, imposed as a Dirichlet value at the
truncation boundary (w = 0 in rescaled variables).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse.linalg import LinearOperator, cg

from .grid import GridField, GridSpec
from .kernels import lq_norm
from .profiles import ProblemParams, eta, time_of_tau, zeta


class SolverError(RuntimeError):
    """The discrete solution violated a bound or a solve failed."""


class PositivityError(SolverError):
    """The discrete solution left the admissible positive region."""


# ---------------------------------------------------------------------------
# Initial data

@dataclass
class InitialPerturbation:
    """Bounded integrable perturbation phi added to the constant level lambda."""

    kind: str
    center: tuple = (0.0,)
    width: float = 1.0
    radius: float = 1.0
    amplitude: float = 0.0
    table: GridField | None = None

    @classmethod
    def gaussian(cls, center, width, amplitude):
        """phi(x) = amplitude * exp(-|x - center|^2 / width^2)."""
        return cls("gaussian", center=_as_center(center), width=float(width),
                   amplitude=float(amplitude))

    @classmethod
    def smooth_bump(cls, center, radius, amplitude):
        """Compactly supported C^inf bump, value `amplitude` at the center."""
        return cls("smooth_bump", center=_as_center(center), radius=float(radius),
                   amplitude=float(amplitude))

    @classmethod
    def tabulated(cls, table: GridField):
        return cls("tabulated", table=table)

    def sample(self, spec: GridSpec) -> GridField:
        if self.kind == "tabulated":
            if self.table.spec != spec:
                raise ValueError("tabulated field lives on a different grid")
            return self.table.copy()
        coords = spec.meshgrid()
        center = self.center
        if len(center) == 1 and spec.dim == 2:
            center = center * 2
        r2 = sum((c - c0) ** 2 for c, c0 in zip(coords, center))
        if self.kind == "gaussian":
            vals = self.amplitude * np.exp(-r2 / self.width ** 2)
        elif self.kind == "smooth_bump":
            s = r2 / self.radius ** 2
            vals = np.zeros(spec.shape)
            inside = s < 1.0
            vals[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
        else:
            raise ValueError("unknown perturbation kind %r" % self.kind)
        return GridField(spec, vals)


def _as_center(center):
    if np.ndim(center) == 0:
        return (float(center),)
    return tuple(float(c) for c in center)


# ---------------------------------------------------------------------------
# Rescaled-problem nonlinearities

def _ratio(params: ProblemParams, tau, w):
    """1 + lambda^{-alpha} eta(tau)^{alpha-1} w  (= u / zeta_lambda)."""
    lam, a = params.lam, params.alpha
    return 1.0 + lam ** -a * eta(params, tau) ** (a - 1.0) * np.asarray(w, dtype=float)


def coeff_A(params: ProblemParams, tau, w):
    """Diffusion coefficient A(tau, w); tends to 1 for bounded w."""
    base = _ratio(params, tau, w)
    if np.any(base <= 0.0):
        raise PositivityError("A(tau, w): solution left the admissible region")
    out = base ** (params.m - 1.0)
    return float(out) if np.ndim(out) == 0 else out


def source_F(params: ProblemParams, tau, w):
    """Quadratic-near-zero source of the rescaled problem."""
    m, a, lam = params.m, params.alpha, params.lam
    et = eta(params, tau)
    x = lam ** -a * et ** (a - 1.0) * np.asarray(w, dtype=float)
    if np.any(1.0 + x <= 0.0):
        raise PositivityError("F(tau, w): solution left the admissible region")
    out = lam ** a / m * et ** (-(m - 1.0)) * ((1.0 + x) ** a - 1.0 - a * x)
    return float(out) if np.ndim(out) == 0 else out


def flux_H(params: ProblemParams, tau, w, grad_w):
    """Flux correction H = (A - 1) grad w; identically zero for m = 1."""
    grad_w = np.asarray(grad_w, dtype=float)
    if params.m == 1.0:
        return np.zeros_like(grad_w)
    return (coeff_A(params, tau, w) - 1.0) * grad_w


# ---------------------------------------------------------------------------
# Configuration and trajectories

@dataclass
class SolverConfig:
    grid: GridSpec
    snapshot_times: tuple
    stepper: str = "adaptive"  # "fixed" keeps dt = dt_initial
    dt_initial: float = 1e-3
    theta: float = 0.5  # 0.5 Crank-Nicolson, 1.0 backward Euler
    dt_growth: float = 1.05
    dt_rel_cap: float = 0.01
    cfl_safety: float = 1.0
    bound_slack: float = 1e-7
    cg_tol: float = 1e-12

    def __post_init__(self):
        self.snapshot_times = tuple(float(s) for s in self.snapshot_times)
        if any(s <= 0 for s in self.snapshot_times):
            raise ValueError("snapshot times must be positive")
        if list(self.snapshot_times) != sorted(set(self.snapshot_times)):
            raise ValueError("snapshot times must be strictly increasing")
        if self.stepper not in ("fixed", "adaptive"):
            raise ValueError("stepper must be 'fixed' or 'adaptive'")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must be in (0, 1]")


@dataclass
class Trajectory:
    times: list
    fields: list
    variable_tag: str  # "u-original" | "w-rescaled"
    diagnostics: list
    params: ProblemParams
    config: SolverConfig
    phi_field: GridField
    c: float
    cprime: float
    min_margin: float = math.inf  # most negative relative bound margin seen
    steps: int = 0


# ---------------------------------------------------------------------------
# Diffusion substep

def _diffusion_step_1d(vals, dcoef, dbc, bc, dt, h, theta):
    n = vals.size
    faces = np.empty(n + 1)
    faces[1:-1] = 0.5 * (dcoef[:-1] + dcoef[1:])
    faces[0] = 0.5 * (dbc + dcoef[0])
    faces[-1] = 0.5 * (dcoef[-1] + dbc)
    r = dt / h ** 2
    fl, fr = faces[:-1], faces[1:]

    left = np.concatenate(([bc], vals[:-1]))
    right = np.concatenate((vals[1:], [bc]))
    lap = fr * (right - vals) - fl * (vals - left)
    rhs = vals + (1.0 - theta) * r * lap
    rhs[0] += theta * r * fl[0] * bc
    rhs[-1] += theta * r * fr[-1] * bc

    ab = np.zeros((3, n))
    ab[0, 1:] = -theta * r * fr[:-1]
    ab[1, :] = 1.0 + theta * r * (fl + fr)
    ab[2, :-1] = -theta * r * fl[1:]
    return solve_banded((1, 1), ab, rhs)


def _diffusion_step_2d(vals, dcoef, dbc, bc, dt, h, theta, cg_tol):
    n = vals.shape[0]
    r = dt / h ** 2
    fx = np.empty((n + 1, n))
    fx[1:-1] = 0.5 * (dcoef[:-1, :] + dcoef[1:, :])
    fx[0] = 0.5 * (dbc + dcoef[0])
    fx[-1] = 0.5 * (dcoef[-1] + dbc)
    fy = np.empty((n, n + 1))
    fy[:, 1:-1] = 0.5 * (dcoef[:, :-1] + dcoef[:, 1:])
    fy[:, 0] = 0.5 * (dbc + dcoef[:, 0])
    fy[:, -1] = 0.5 * (dcoef[:, -1] + dbc)

    def lap(u, ghost):
        up = np.vstack((np.full((1, n), ghost), u[:-1]))
        down = np.vstack((u[1:], np.full((1, n), ghost)))
        left = np.hstack((np.full((n, 1), ghost), u[:, :-1]))
        right = np.hstack((u[:, 1:], np.full((n, 1), ghost)))
        return (fx[1:] * (down - u) - fx[:-1] * (u - up)
                + fy[:, 1:] * (right - u) - fy[:, :-1] * (u - left))

    rhs = vals + (1.0 - theta) * r * lap(vals, bc)
    rhs[0] += theta * r * fx[0] * bc
    rhs[-1] += theta * r * fx[-1] * bc
    rhs[:, 0] += theta * r * fy[:, 0] * bc
    rhs[:, -1] += theta * r * fy[:, -1] * bc

    diag = 1.0 + theta * r * (fx[1:] + fx[:-1] + fy[:, 1:] + fy[:, :-1])

    def matvec(u_flat):
        u = u_flat.reshape(n, n)
        return (u - theta * r * lap(u, 0.0)).ravel()

    op = LinearOperator((n * n, n * n), matvec=matvec)
    precond = LinearOperator((n * n, n * n), matvec=lambda v: v / diag.ravel())
    sol, info = cg(op, rhs.ravel(), x0=vals.ravel(), M=precond,
                   rtol=cg_tol, atol=0.0)
    if info != 0:
        raise SolverError("conjugate-gradient diffusion solve did not converge")
    return sol.reshape(n, n)


def _diffusion_step(vals, dcoef, dbc, bc, dt, spec, theta, cg_tol):
    if spec.dim == 1:
        return _diffusion_step_1d(vals, dcoef, dbc, bc, dt, spec.spacing, theta)
    return _diffusion_step_2d(vals, dcoef, dbc, bc, dt, spec.spacing, theta, cg_tol)


# ---------------------------------------------------------------------------
# Shared march

def _next_dt(config, dt_prev, t, target):
    if config.stepper == "fixed":
        dt = config.dt_initial
    else:
        cap = config.cfl_safety * config.dt_rel_cap * (t + 1.0)
        dt = min(dt_prev * config.dt_growth, max(cap, config.dt_initial))
    remaining = target - t
    if remaining <= dt * (1.0 + 1e-9):
        return remaining, dt
    return dt, dt


def _march(state, t0, config, step_fn, record_fn):
    """Generic snapshot-driven time loop; step_fn mutates nothing, returns state."""
    t = t0
    dt_free = config.dt_initial
    record_fn(t, state)
    steps = 0
    for target in config.snapshot_times:
        while t < target * (1.0 - 1e-14):
            dt, dt_free = _next_dt(config, dt_free, t, target)
            state = step_fn(state, t, dt)
            t += dt
            steps += 1
        t = target  # absorb roundoff so snapshots land exactly
        record_fn(t, state)
    return steps


def _field_diagnostics(spec, deviation, umin, umax, lower_margin, upper_margin):
    f = GridField(spec, deviation)
    return {
        "min": umin,
        "max": umax,
        "l1": lq_norm(f, 1),
        "l2": lq_norm(f, 2),
        "linf": lq_norm(f, math.inf),
        "lower_margin": lower_margin,
        "upper_margin": upper_margin,
    }


# ---------------------------------------------------------------------------
# Original variables

def solve_original(params: ProblemParams, phi: InitialPerturbation,
                   config: SolverConfig) -> Trajectory:
    """March u_t = Laplace(u^m) + u^alpha with far field zeta_lambda(t)."""
    spec = config.grid
    if spec.dim != params.dim:
        raise ValueError("grid dim does not match params.dim")
    phi_field = phi.sample(spec)
    u = params.lam + phi_field.values
    if u.min() <= 0.0 or params.lam + min(0.0, phi_field.values.min()) <= 0.0:
        raise PositivityError("initial data must satisfy inf(lambda + phi) > 0")
    c = params.lam + min(0.0, float(phi_field.values.min()))
    cprime = params.lam + max(0.0, float(phi_field.values.max()))

    traj = Trajectory([], [], "u-original", [], params, config, phi_field, c, cprime)
    one_m_a = 1.0 - params.alpha

    def ode_flow(vals, dt):
        # exact flow of u' = u^alpha
        return (vals ** one_m_a + one_m_a * dt) ** (1.0 / one_m_a)

    def step(vals, t, dt):
        vals = ode_flow(vals, 0.5 * dt)
        bc = zeta(params, params.lam, t + 0.5 * dt)
        dcoef = params.m * vals ** (params.m - 1.0)
        dbc = params.m * bc ** (params.m - 1.0)
        vals = _diffusion_step(vals, dcoef, dbc, bc, dt, spec,
                               config.theta, config.cg_tol)
        vals = ode_flow(vals, 0.5 * dt)
        _check_bounds_u(params, traj, vals, t + dt, c, cprime, config.bound_slack)
        return vals

    def record(t, vals):
        zl = zeta(params, params.lam, t)
        lower = zeta(params, c, t)
        upper = zeta(params, cprime, t)
        traj.times.append(t)
        traj.fields.append(GridField(spec, vals.copy()))
        traj.diagnostics.append(_field_diagnostics(
            spec, vals - zl, float(vals.min()), float(vals.max()),
            float((vals - lower).min() / upper), float((upper - vals).min() / upper)))

    traj.steps = _march(u, 0.0, config, step, record)
    return traj


def _check_bounds_u(params, traj, vals, t, c, cprime, slack):
    if not np.all(np.isfinite(vals)):
        raise SolverError("solution became non-finite at t = %g" % t)
    lower = zeta(params, c, t)
    upper = zeta(params, cprime, t)
    lo_margin = float((vals - lower).min()) / upper
    hi_margin = float((upper - vals).min()) / upper
    traj.min_margin = min(traj.min_margin, lo_margin, hi_margin)
    if lo_margin < -slack or hi_margin < -slack:
        raise SolverError(
            "comparison bounds violated at t = %g (margins %.3e / %.3e)"
            % (t, lo_margin, hi_margin))
    if float(vals.min()) <= 0.5 * lower:
        raise PositivityError("positivity floor violated at t = %g" % t)


# ---------------------------------------------------------------------------
# Rescaled variables

def solve_rescaled(params: ProblemParams, phi: InitialPerturbation,
                   config: SolverConfig) -> Trajectory:
    """March w_tau = div(A grad w) + F(tau, w) with w = 0 at the boundary."""
    spec = config.grid
    if spec.dim != params.dim:
        raise ValueError("grid dim does not match params.dim")
    from .profiles import tau_star  # local import to avoid cycle noise
    if params.regime == "finite-horizon":
        horizon = tau_star(params)
        if config.snapshot_times[-1] >= horizon:
            raise ValueError(
                "snapshot times must stay below tau_star = %g for m < alpha" % horizon)

    phi_field = phi.sample(spec)
    if params.lam + min(0.0, phi_field.values.min()) <= 0.0:
        raise PositivityError("initial data must satisfy inf(lambda + phi) > 0")
    c = params.lam + min(0.0, float(phi_field.values.min()))
    cprime = params.lam + max(0.0, float(phi_field.values.max()))

    traj = Trajectory([], [], "w-rescaled", [], params, config, phi_field, c, cprime)

    def source_flow(vals, tau, dt):
        # one RK4 step on dw/dtau = F(tau, w), vectorized over nodes
        k1 = source_F(params, tau, vals)
        k2 = source_F(params, tau + 0.5 * dt, vals + 0.5 * dt * k1)
        k3 = source_F(params, tau + 0.5 * dt, vals + 0.5 * dt * k2)
        k4 = source_F(params, tau + dt, vals + dt * k3)
        return vals + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def step(vals, tau, dt):
        vals = source_flow(vals, tau, 0.5 * dt)
        dcoef = coeff_A(params, tau + 0.5 * dt, vals)
        vals = _diffusion_step(vals, np.asarray(dcoef), 1.0, 0.0, dt, spec,
                               config.theta, config.cg_tol)
        vals = source_flow(vals, tau + 0.5 * dt, 0.5 * dt)
        _check_bounds_w(params, traj, vals, tau + dt, c, cprime, config.bound_slack)
        return vals

    def record(tau, vals):
        ratio = _ratio(params, tau, vals)
        lo, hi = _ratio_bounds(params, tau, c, cprime)
        traj.times.append(tau)
        traj.fields.append(GridField(spec, vals.copy()))
        traj.diagnostics.append(_field_diagnostics(
            spec, vals, float(vals.min()), float(vals.max()),
            float((ratio - lo).min()), float((hi - ratio).min())))

    traj.steps = _march(phi_field.values.copy(), 0.0, config, step, record)
    return traj


def _ratio_bounds(params, tau, c, cprime):
    t = time_of_tau(params, tau)
    zl = zeta(params, params.lam, t)
    return zeta(params, c, t) / zl, zeta(params, cprime, t) / zl


def _check_bounds_w(params, traj, vals, tau, c, cprime, slack):
    if not np.all(np.isfinite(vals)):
        raise SolverError("solution became non-finite at tau = %g" % tau)
    ratio = _ratio(params, tau, vals)
    if np.any(ratio <= 0.0):
        raise PositivityError("u/zeta ratio lost positivity at tau = %g" % tau)
    lo, hi = _ratio_bounds(params, tau, c, cprime)
    lo_margin = float((ratio - lo).min())
    hi_margin = float((hi - ratio).min())
    traj.min_margin = min(traj.min_margin, lo_margin, hi_margin)
    if lo_margin < -slack or hi_margin < -slack:
        raise SolverError(
            "comparison bounds violated at tau = %g (margins %.3e / %.3e)"
            % (tau, lo_margin, hi_margin))


def u_from_w(params: ProblemParams, w_field: GridField, tau: float) -> GridField:
    """Original-variable field u at t(tau) from the rescaled field w."""
    t = time_of_tau(params, tau)
    zl = zeta(params, params.lam, t)
    ratio = _ratio(params, tau, w_field.values)
    return GridField(w_field.spec, zl * ratio)
