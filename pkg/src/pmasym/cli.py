"""Command-line entry point.

Subcommands:

* ``run <config>``: solve the configured problem, run its analyses, and
  write manifest, snapshot CSVs, rate reports, plot data, and figures.
* ``selftest``: property suite plus the numbered acceptance checks.
* ``expand <field-csv> --K <order> --t <time>``: moment expansion of a
  tabulated field, printed as a flat key-value report.
* ``profile <params> --table``: scalar background profiles on a log grid.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 self-test failure.  The environment variable PMASYM_OUTDIR overrides
the configured output directory.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .config import ConfigError, config_manifest, parse_config
from .harness import (
    RateReport,
    estimate_M,
    finite_horizon_check,
    renormalize,
    thm11_error,
    thm12_error,
)
from .moments import expand
from .profiles import (
    ProblemParams,
    RegimeError,
    eta,
    h_decay,
    sigma,
    tau_star,
    time_of_tau,
    zeta,
)
from .reporting import (
    render_snapshot_figure,
    write_manifest,
    write_rate_report,
    write_snapshot_csv,
    read_snapshot_csv,
)
from .solver import PositivityError, SolverError, solve_original, solve_rescaled

OUTDIR_ENV = "PMASYM_OUTDIR"
DEGENERATE_FLOOR = 1e-13


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pmasym", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured experiment")
    p_run.add_argument("config", help="path to the experiment config file")

    sub.add_parser("selftest", help="run the property and acceptance suites")

    p_exp = sub.add_parser("expand", help="moment expansion of a tabulated field")
    p_exp.add_argument("field_csv", help="snapshot CSV (coordinates..., value)")
    p_exp.add_argument("--K", type=float, required=True, help="expansion order")
    p_exp.add_argument("--t", type=float, required=True, help="kernel time")

    p_prof = sub.add_parser("profile", help="scalar background profile tables")
    p_prof.add_argument("params", help="e.g. m=2,alpha=0.5,lambda=1,dim=1")
    p_prof.add_argument("--table", action="store_true", help="print the value table")
    p_prof.add_argument("--times", default="geometric:0.1:100:13",
                        help="abscissa: comma list or geometric:lo:hi:count")

    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "selftest":
        return _cmd_selftest()
    if args.command == "expand":
        return _cmd_expand(args)
    return _cmd_profile(args)


# ---------------------------------------------------------------------------
# run

def _cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            text = fh.read()
        cfg = parse_config(text)
    except (OSError, ConfigError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1

    outdir = os.environ.get(OUTDIR_ENV) or cfg.output_dir
    os.makedirs(outdir, exist_ok=True)

    try:
        if cfg.variable == "original":
            traj = solve_original(cfg.params, cfg.phi, cfg.solver)
        else:
            traj = solve_rescaled(cfg.params, cfg.phi, cfg.solver)
        analyses = [_run_analysis(cfg, traj, entry, outdir)
                    for entry in cfg.analyses]
    except (SolverError, PositivityError, RegimeError, FloatingPointError,
            ValueError) as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 2

    for i, f in enumerate(traj.fields):
        write_snapshot_csv(os.path.join(outdir, "snapshot_%03d.csv" % i), f)
    render_snapshot_figure(os.path.join(outdir, "snapshots.png"), traj)

    manifest = config_manifest(cfg)
    manifest["run"] = {
        "variable_tag": traj.variable_tag,
        "steps": traj.steps,
        "min_margin": traj.min_margin,
        "snapshots": ["snapshot_%03d.csv" % i for i in range(len(traj.fields))],
    }
    manifest["analyses_results"] = analyses
    write_manifest(os.path.join(outdir, "manifest.json"), manifest)
    return 0


def _renormalized_series(params, traj):
    """(sigma values, renormalized fields, original times) at positive times."""
    sigmas, fields, times = [], [], []
    for tk, f in zip(traj.times, traj.fields):
        if tk <= 0:
            continue
        if traj.variable_tag == "w-rescaled":
            sigmas.append(tk)
            fields.append(f)
            times.append(time_of_tau(params, tk))
        else:
            sigmas.append(sigma(params, tk))
            fields.append(renormalize(params, f, tk))
            times.append(tk)
    return np.asarray(sigmas), fields, times


def _rate_or_degenerate(label, sigmas, raws, comps, predicted, inconclusive=False):
    if max(comps) < DEGENERATE_FLOOR:
        return RateReport(
            experiment_id=label, times=[float(s) for s in sigmas],
            compensated_errors=[float(c) for c in comps],
            predicted_exponent=float(predicted), fitted_slope=0.0,
            slope_stderr=0.0, verdict="pass",
            raw_errors=[float(r) for r in raws]), True
    report = RateReport.from_series(
        label, sigmas, comps, predicted, raw_errors=raws,
        inconclusive=inconclusive)
    return report, False


def _run_analysis(cfg, traj, entry, outdir) -> dict:
    params = cfg.params
    label = entry["label"]
    kind = entry["kind"]
    sigmas, fields, times = _renormalized_series(params, traj)

    if kind == "finite_horizon":
        if traj.variable_tag != "u-original":
            raise ValueError("finite_horizon analysis needs variable = original")
        result = finite_horizon_check(params, traj)
        path = os.path.join(outdir, label + "_horizon.txt")
        with open(path, "w") as fh:
            fh.write("tau_star measured: %.17g\n" % result.tau_star_measured)
            fh.write("tau_star exact: %.17g\n" % result.tau_star_exact)
            fh.write("cauchy gaps: %s\n"
                     % ",".join("%.17g" % g for g in result.cauchy_gaps))
        write_snapshot_csv(os.path.join(outdir, label + "_limit_profile.csv"),
                           result.limit_profile)
        return {"label": label, "kind": kind,
                "tau_star_measured": result.tau_star_measured,
                "tau_star_exact": result.tau_star_exact,
                "final_gap": result.cauchy_gaps[-1]}

    if kind == "expand_only":
        report = estimate_M(params, traj, entry["K"])
        with open(os.path.join(outdir, label + "_expansion.txt"), "w") as fh:
            fh.write(report.to_text())
        return {"label": label, "kind": kind, "stabilized": report.stabilized,
                "constants": {"-".join(str(i) for i in nu): c
                              for nu, c in report.M_constants.items()}}

    if kind == "thm11":
        q, r = entry["q"], entry["r"]
        raws, comps = [], []
        for s, f, t in zip(sigmas, fields, times):
            comp = thm11_error(params, f, traj.phi_field, t, q, r)
            inv_q = 0.0 if q == math.inf else 1.0 / q
            raws.append(comp / s ** (params.dim / 2.0 * (1.0 / r - inv_q)))
            comps.append(comp)
        predicted = -min(params.dim / (2.0 * r),
                         params.dim / 2.0 * (1.0 - 1.0 / r))
        report, degenerate = _rate_or_degenerate(label, sigmas, raws, comps, predicted)
    elif kind == "thm12":
        q, K = entry["q"], entry["K"]
        m_report = estimate_M(params, traj, K)
        raws, comps = [], []
        for s, f, t in zip(sigmas, fields, times):
            raw, comp = thm12_error(params, f, m_report, t, q, K)
            raws.append(raw)
            comps.append(comp)
        edge = (params.dim + 2.0 * (1.0 - params.alpha) / (params.m - params.alpha)
                if params.m > params.alpha else math.inf)
        inconclusive = (not m_report.stabilized) or K > edge - 0.5
        report, degenerate = _rate_or_degenerate(
            label, sigmas, raws, comps, 0.0, inconclusive=inconclusive)
    elif kind == "ode_limit":
        # sup |u/zeta - 1| equals lambda^{-alpha} eta^{alpha-1} sup |U|
        devs = [
            float(np.abs(
                params.lam ** -params.alpha
                * eta(params, s) ** (params.alpha - 1.0) * f.values).max())
            for s, f in zip(sigmas, fields)]
        report, degenerate = _rate_or_degenerate(label, sigmas, devs, devs, 0.0)
    else:
        raise ValueError("unknown analysis kind %r" % kind)

    if degenerate:
        from .reporting import write_rate_csv, rate_report_text
        write_rate_csv(os.path.join(outdir, label + "_rate.csv"),
                       report.times, sigmas, report.raw_errors,
                       report.compensated_errors)
        with open(os.path.join(outdir, label + "_rate.txt"), "w") as fh:
            fh.write(rate_report_text(report))
    else:
        write_rate_report(outdir, label, report, sigmas)
    return {"label": label, "kind": kind, "verdict": report.verdict,
            "fitted_slope": report.fitted_slope,
            "predicted_exponent": report.predicted_exponent}


# ---------------------------------------------------------------------------
# selftest / expand / profile

def _cmd_selftest() -> int:
    from .acceptance import run_selftest
    return 0 if run_selftest() else 3


def _cmd_expand(args) -> int:
    try:
        f = read_snapshot_csv(args.field_csv)
    except (OSError, ValueError) as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return 1
    try:
        report = expand(f, args.K, args.t)
    except (ValueError, FloatingPointError) as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 2
    sys.stdout.write(report.to_text())
    return 0


def _parse_params(text) -> ProblemParams:
    fields = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        if not value:
            raise ConfigError("expected key=value, got %r" % part)
        fields[key.strip()] = value.strip()
    try:
        return ProblemParams(
            m=float(fields["m"]),
            alpha=float(fields["alpha"]),
            lam=float(fields.get("lambda", fields.get("lam", "1.0"))),
            dim=int(fields.get("dim", "1")))
    except (KeyError, ValueError) as exc:
        raise ConfigError("bad params %r: %s" % (text, exc)) from exc


def _cmd_profile(args) -> int:
    from .config import parse_snapshot_times
    try:
        params = _parse_params(args.params)
        times = parse_snapshot_times(args.times)
    except (ConfigError, ValueError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    out = sys.stdout
    out.write("# regime: %s\n" % params.regime)
    if params.regime == "finite-horizon":
        out.write("# tau_star: %.17g\n" % tau_star(params))
    out.write("s,zeta,sigma,eta,h\n")
    horizon = tau_star(params) if params.regime == "finite-horizon" else math.inf
    for s in times:
        z = zeta(params, params.lam, s)
        sg = sigma(params, s)
        et = eta(params, s) if s < horizon else math.nan
        try:
            hv = h_decay(params, s)
        except RegimeError:
            hv = math.nan
        out.write("%.17g,%.17g,%.17g,%.17g,%.17g\n" % (s, z, sg, et, hv))
    return 0


if __name__ == "__main__":
    sys.exit(main())
