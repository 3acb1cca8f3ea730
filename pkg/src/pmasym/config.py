"""Experiment configuration: flat INI-style text with nested sections.

Example::

    [params]
    m = 2.0
    alpha = 0.5
    lambda = 1.0
    dim = 1

    [phi]
    kind = gaussian
    center = 0.0
    width = 1.0
    amplitude = 0.5

    [grid]
    half_width = 200.0
    points_per_axis = 2048

    [solver]
    variable = rescaled
    stepper = adaptive
    dt_initial = 1e-3
    theta = 0.5
    snapshot_times = geometric:0.1:400:40

    [analysis:first_order]
    kind = thm11
    q = inf
    r = 2

    [output]
    dir = out
    seed = 0

Analyses are any number of ``[analysis:<label>]`` sections with ``kind`` one
of thm11, thm12, ode_limit, finite_horizon, expand_only.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec
from .profiles import ProblemParams
from .solver import InitialPerturbation, SolverConfig

ANALYSIS_KINDS = ("thm11", "thm12", "ode_limit", "finite_horizon", "expand_only")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    params: ProblemParams
    phi: InitialPerturbation
    solver: SolverConfig
    variable: str  # "original" | "rescaled"
    analyses: list
    output_dir: str = "out"
    seed: int = 0
    raw_sections: dict = field(default_factory=dict, repr=False)


def _parse_q(text):
    return math.inf if text.strip() in ("inf", "infinity") else float(text)


def _q_str(q):
    return "inf" if q == math.inf else repr(float(q))


def parse_snapshot_times(text):
    text = text.strip()
    if text.startswith("geometric:"):
        _, lo, hi, count = text.split(":")
        return tuple(np.geomspace(float(lo), float(hi), int(count)))
    return tuple(float(part) for part in text.split(","))


def snapshot_times_str(spec_text_or_times):
    if isinstance(spec_text_or_times, str):
        return spec_text_or_times
    return ",".join(repr(float(t)) for t in spec_text_or_times)


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("unparseable config: %s" % exc) from exc

    def need(section, key, conv=float):
        if section not in cp or key not in cp[section]:
            raise ConfigError("missing field [%s] %s" % (section, key))
        try:
            return conv(cp[section][key])
        except ValueError as exc:
            raise ConfigError("bad value for [%s] %s: %s" % (section, key, exc)) from exc

    def get(section, key, default, conv=float):
        if section in cp and key in cp[section]:
            return conv(cp[section][key])
        return default

    try:
        params = ProblemParams(
            m=need("params", "m"),
            alpha=need("params", "alpha"),
            lam=need("params", "lambda"),
            dim=need("params", "dim", int),
        )
    except ValueError as exc:
        raise ConfigError("invalid [params]: %s" % exc) from exc

    kind = need("phi", "kind", str).strip()
    if kind == "gaussian":
        phi = InitialPerturbation.gaussian(
            center=need("phi", "center"),
            width=need("phi", "width"),
            amplitude=need("phi", "amplitude"))
    elif kind == "smooth_bump":
        phi = InitialPerturbation.smooth_bump(
            center=need("phi", "center"),
            radius=need("phi", "radius"),
            amplitude=need("phi", "amplitude"))
    else:
        raise ConfigError("unknown [phi] kind %r" % kind)
    if phi.amplitude <= -params.lam:
        raise ConfigError("[phi] amplitude must exceed -lambda")

    try:
        grid = GridSpec(
            dim=params.dim,
            half_width=need("grid", "half_width"),
            points_per_axis=need("grid", "points_per_axis", int))
        solver = SolverConfig(
            grid=grid,
            snapshot_times=parse_snapshot_times(need("solver", "snapshot_times", str)),
            stepper=get("solver", "stepper", "adaptive", str).strip(),
            dt_initial=get("solver", "dt_initial", 1e-3),
            theta=get("solver", "theta", 0.5),
            dt_growth=get("solver", "dt_growth", 1.05),
            dt_rel_cap=get("solver", "dt_rel_cap", 0.01),
            cfl_safety=get("solver", "cfl_safety", 1.0),
            bound_slack=get("solver", "bound_slack", 1e-7),
        )
    except ValueError as exc:
        raise ConfigError("invalid [grid]/[solver]: %s" % exc) from exc

    variable = get("solver", "variable", "rescaled", str).strip()
    if variable not in ("original", "rescaled"):
        raise ConfigError("[solver] variable must be 'original' or 'rescaled'")

    analyses = []
    for section in cp.sections():
        if not section.startswith("analysis"):
            continue
        label = section.partition(":")[2] or section
        a_kind = need(section, "kind", str).strip()
        if a_kind not in ANALYSIS_KINDS:
            raise ConfigError("[%s] unknown analysis kind %r" % (section, a_kind))
        entry = {"kind": a_kind, "label": label}
        if a_kind == "thm11":
            entry["q"] = need(section, "q", _parse_q)
            entry["r"] = need(section, "r")
            if entry["r"] <= 1:
                raise ConfigError("[%s] r must exceed 1" % section)
        elif a_kind == "thm12":
            entry["q"] = need(section, "q", _parse_q)
            entry["K"] = need(section, "K")
        elif a_kind == "expand_only":
            entry["K"] = need(section, "K")
        analyses.append(entry)

    for entry in analyses:
        if entry["kind"] in ("thm11", "thm12", "ode_limit") and params.regime == "finite-horizon":
            raise ConfigError(
                "analysis %r requires m >= alpha (params are finite-horizon)" % entry["kind"])
        if entry["kind"] == "finite_horizon" and params.regime != "finite-horizon":
            raise ConfigError("analysis 'finite_horizon' requires m < alpha")

    return ExperimentConfig(
        params=params,
        phi=phi,
        solver=solver,
        variable=variable,
        analyses=analyses,
        output_dir=get("output", "dir", "out", str).strip(),
        seed=get("output", "seed", 0, int),
    )


def serialize_config(cfg: ExperimentConfig) -> str:
    cp = configparser.ConfigParser()
    p = cfg.params
    cp["params"] = {
        "m": repr(p.m), "alpha": repr(p.alpha),
        "lambda": repr(p.lam), "dim": repr(p.dim),
    }
    phi = cfg.phi
    sect = {"kind": phi.kind, "center": repr(phi.center[0]),
            "amplitude": repr(phi.amplitude)}
    if phi.kind == "gaussian":
        sect["width"] = repr(phi.width)
    else:
        sect["radius"] = repr(phi.radius)
    cp["phi"] = sect
    cp["grid"] = {
        "half_width": repr(cfg.solver.grid.half_width),
        "points_per_axis": repr(cfg.solver.grid.points_per_axis),
    }
    cp["solver"] = {
        "variable": cfg.variable,
        "stepper": cfg.solver.stepper,
        "dt_initial": repr(cfg.solver.dt_initial),
        "theta": repr(cfg.solver.theta),
        "dt_growth": repr(cfg.solver.dt_growth),
        "dt_rel_cap": repr(cfg.solver.dt_rel_cap),
        "cfl_safety": repr(cfg.solver.cfl_safety),
        "bound_slack": repr(cfg.solver.bound_slack),
        "snapshot_times": snapshot_times_str(cfg.solver.snapshot_times),
    }
    for entry in cfg.analyses:
        sect = {"kind": entry["kind"]}
        if "q" in entry:
            sect["q"] = _q_str(entry["q"])
        if "r" in entry:
            sect["r"] = repr(entry["r"])
        if "K" in entry:
            sect["K"] = repr(entry["K"])
        cp["analysis:%s" % entry["label"]] = sect
    cp["output"] = {"dir": cfg.output_dir, "seed": repr(cfg.seed)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def config_manifest(cfg: ExperimentConfig) -> dict:
    """JSON-friendly summary for the run manifest."""
    return {
        "params": {"m": cfg.params.m, "alpha": cfg.params.alpha,
                   "lambda": cfg.params.lam, "dim": cfg.params.dim,
                   "regime": cfg.params.regime},
        "phi": {"kind": cfg.phi.kind, "center": list(cfg.phi.center),
                "width": cfg.phi.width, "radius": cfg.phi.radius,
                "amplitude": cfg.phi.amplitude},
        "grid": {"half_width": cfg.solver.grid.half_width,
                 "points_per_axis": cfg.solver.grid.points_per_axis},
        "solver": {"variable": cfg.variable, "stepper": cfg.solver.stepper,
                   "dt_initial": cfg.solver.dt_initial, "theta": cfg.solver.theta,
                   "dt_growth": cfg.solver.dt_growth,
                   "dt_rel_cap": cfg.solver.dt_rel_cap,
                   "cfl_safety": cfg.solver.cfl_safety,
                   "bound_slack": cfg.solver.bound_slack,
                   "snapshots": list(cfg.solver.snapshot_times)},
        "analyses": [dict(a, q=_q_str(a["q"])) if "q" in a else dict(a)
                     for a in cfg.analyses],
        "output_dir": cfg.output_dir,
        "seed": cfg.seed,
    }
