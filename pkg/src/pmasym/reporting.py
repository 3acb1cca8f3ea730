"""Deterministic emission of CSV tables, plot data, manifests, and figures."""

from __future__ import annotations

import json
import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid import GridField

FLOAT_FMT = "%.17g"


def _fmt(x) -> str:
    return FLOAT_FMT % float(x)


def write_snapshot_csv(path, f: GridField):
    """One row per node: coordinates..., value (row-major by axis)."""
    coords = f.spec.meshgrid()
    cols = [c.ravel() for c in coords] + [f.values.ravel()]
    header = ",".join(["x", "y"][: f.spec.dim] + ["value"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_snapshot_csv(path):
    """Inverse of write_snapshot_csv; reconstructs the grid from coordinates."""
    from .grid import GridSpec

    data = np.loadtxt(path, delimiter=",", skiprows=1)
    n_cols = data.shape[1]
    dim = n_cols - 1
    x = np.unique(data[:, 0])
    n = x.size
    h = x[1] - x[0]
    half_width = -(x[0] - 0.5 * h)
    spec = GridSpec(dim, half_width, n)
    values = data[:, -1].reshape(spec.shape)
    return GridField(spec, values)


def write_rate_csv(path, times, sigmas, raw_errors, compensated_errors):
    with open(path, "w") as fh:
        fh.write("t,sigma,raw_error,compensated_error\n")
        for row in zip(times, sigmas, raw_errors, compensated_errors):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_plot_data(path, sigmas, errors):
    """Two columns: log sigma, log error."""
    with open(path, "w") as fh:
        fh.write("log_sigma,log_error\n")
        for s, e in zip(sigmas, errors):
            fh.write("%s,%s\n" % (_fmt(math.log(s)), _fmt(math.log(e))))


def write_manifest(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def rate_report_text(report) -> str:
    lines = [
        "experiment: %s" % report.experiment_id,
        "verdict: %s" % report.verdict,
        "fitted slope: %s +/- %s" % (_fmt(report.fitted_slope), _fmt(report.slope_stderr)),
        "predicted exponent: %s (tolerance +%s)"
        % (_fmt(report.predicted_exponent), _fmt(report.slope_tolerance)),
        "samples: %d over [%s, %s]"
        % (len(report.times), _fmt(report.times[0]), _fmt(report.times[-1])),
    ]
    return "\n".join(lines) + "\n"


def write_rate_report(outdir, name, report, sigmas=None):
    """CSV row + text block + plot data + log-log figure for one RateReport."""
    sigmas = list(sigmas) if sigmas is not None else list(report.times)
    write_rate_csv(
        os.path.join(outdir, name + "_rate.csv"),
        report.times, sigmas, report.raw_errors, report.compensated_errors)
    with open(os.path.join(outdir, name + "_rate.txt"), "w") as fh:
        fh.write(rate_report_text(report))
    write_plot_data(os.path.join(outdir, name + "_plotdata.csv"),
                    sigmas, report.compensated_errors)
    render_rate_figure(os.path.join(outdir, name + "_rate.png"), report, sigmas)


def render_rate_figure(path, report, sigmas):
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    s = np.asarray(sigmas)
    e = np.asarray(report.compensated_errors)
    ax.loglog(s, e, "ko-", ms=3.5, lw=0.8, label="compensated error")
    window = s >= s.max() / 10.0 ** report.decades
    anchor = e[window][0]
    ax.loglog(
        s[window],
        anchor * (s[window] / s[window][0]) ** report.fitted_slope,
        "r--", lw=1.0,
        label="fit slope %.3f" % report.fitted_slope)
    ax.set_xlabel(r"$\sigma$")
    ax.set_ylabel("error")
    ax.set_title("%s [%s]" % (report.experiment_id, report.verdict), fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def render_snapshot_figure(path, traj, max_lines: int = 8):
    """Profiles of selected snapshots (1-D) or the final field (2-D)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    spec = traj.fields[0].spec
    if spec.dim == 1:
        x = spec.axis()
        n_snap = len(traj.fields)
        picks = np.unique(np.linspace(0, n_snap - 1, max_lines).astype(int))
        for i in picks:
            ax.plot(x, traj.fields[i].values, lw=0.9,
                    label="t=%.3g" % traj.times[i])
        ax.legend(fontsize=7)
        ax.set_xlabel("x")
    else:
        im = ax.imshow(
            traj.fields[-1].values.T, origin="lower",
            extent=[-spec.half_width, spec.half_width] * 2)
        fig.colorbar(im, ax=ax)
    ax.set_title("%s snapshots" % traj.variable_tag, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
