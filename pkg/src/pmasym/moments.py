"""Inductive moment coefficients, kernel expansions, and Duhamel remainders.

The coefficients m_nu(f, t) are corrected so that the expansion
sum_{|nu| <= K} m_nu g_nu(., t) reproduces every monomial moment of f up to
order K (the vanishing-moment identity).  E_{K,q} is the weighted control
functional and R_K the remainder of the Duhamel integral after removing the
kernel expansion of the accumulated source.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    GridField,
    check_boundary_mass,
    mi_leq,
    mi_order,
    mi_parse,
    mi_str,
    multi_indices,
)
from .kernels import g_field, heat_semigroup, lq_norm, weighted_norm

# Residual moments below this multiple of |||f|||_K mark an expansion valid.
RESIDUAL_TOL_FACTOR = 1e-7


def _monomial(spec, nu):
    coords = spec.meshgrid()
    out = np.ones(spec.shape)
    for axis, n in enumerate(nu):
        if n:
            out = out * coords[axis] ** n
    return out


def raw_moment(f: GridField, nu) -> float:
    """Midpoint-rule moment int x^nu f(x) dx."""
    check_boundary_mass(f, what="raw_moment input")
    return float(f.spec.cell_volume * (_monomial(f.spec, nu) * f.values).sum())


def kernel_moment(spec, nu, omega, t: float) -> float:
    """int x^nu g_omega(x, t) dx by quadrature on the given grid."""
    return float(spec.cell_volume * (_monomial(spec, nu) * g_field(spec, omega, t).values).sum())


def moment_coefficients(f: GridField, t: float, max_order: int) -> dict:
    """All corrected coefficients m_nu(f, t) with |nu| <= max_order.

    Memoized recursion over the componentwise <= lattice, enumerated in
    graded lexicographic order so results are reproducible.
    """
    spec = f.spec
    coeffs: dict = {}
    for nu in multi_indices(spec.dim, max_order):
        value = raw_moment(f, nu)
        for omega in coeffs:
            if omega != nu and mi_leq(omega, nu):
                value -= coeffs[omega] * kernel_moment(spec, nu, omega, t)
        coeffs[nu] = value
    return coeffs


def moment_coefficient(f: GridField, nu, t: float) -> float:
    """Single corrected coefficient m_nu(f, t)."""
    return moment_coefficients(f, t, mi_order(nu))[nu]


@dataclass
class ExpansionReport:
    """Kernel-expansion coefficients with residual-moment diagnostics."""

    K: float
    at_time: float
    coefficients: dict
    residual_moments: dict
    tolerance: float
    M_constants: dict | None = None
    stabilized: bool = True
    samples: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return all(abs(r) < self.tolerance for r in self.residual_moments.values())

    def to_text(self) -> str:
        """Flat key-value record; multi-indices as dash-joined integers."""
        lines = [
            "K=%r" % self.K,
            "at_time=%r" % self.at_time,
            "tolerance=%r" % self.tolerance,
            "stabilized=%d" % int(self.stabilized),
        ]
        for nu, v in self.coefficients.items():
            lines.append("coeff:%s=%r" % (mi_str(nu), v))
        for nu, v in self.residual_moments.items():
            lines.append("residual:%s=%r" % (mi_str(nu), v))
        if self.M_constants is not None:
            for nu, v in self.M_constants.items():
                lines.append("M:%s=%r" % (mi_str(nu), v))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExpansionReport":
        scalars, coeffs, residuals, mconst = {}, {}, {}, {}
        for line in text.strip().splitlines():
            key, _, val = line.partition("=")
            if key.startswith("coeff:"):
                coeffs[mi_parse(key[6:])] = float(val)
            elif key.startswith("residual:"):
                residuals[mi_parse(key[9:])] = float(val)
            elif key.startswith("M:"):
                mconst[mi_parse(key[2:])] = float(val)
            else:
                scalars[key] = val
        return cls(
            K=float(scalars["K"]),
            at_time=float(scalars["at_time"]),
            coefficients=coeffs,
            residual_moments=residuals,
            tolerance=float(scalars["tolerance"]),
            M_constants=mconst or None,
            stabilized=bool(int(scalars.get("stabilized", "1"))),
        )


def expansion_field(spec, coefficients: dict, t: float) -> GridField:
    """sum_nu m_nu g_nu(., t) on the grid."""
    out = np.zeros(spec.shape)
    for nu, c in coefficients.items():
        out += c * g_field(spec, nu, t).values
    return GridField(spec, out)


def expand(f: GridField, K: float, t: float,
           tol_factor: float = RESIDUAL_TOL_FACTOR) -> ExpansionReport:
    """Expansion of order K with residual moments for all |omega| <= K.

    For non-integer K the index set is |nu| <= floor(K); the tolerance and
    rate bookkeeping elsewhere keep the real K.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    k_int = math.floor(K)
    coeffs = moment_coefficients(f, t, k_int)
    residual_field = f - expansion_field(f.spec, coeffs, t)
    residuals = {
        omega: raw_moment(residual_field, omega)
        for omega in multi_indices(f.spec.dim, k_int)
    }
    tolerance = tol_factor * weighted_norm(f, K)
    return ExpansionReport(K, t, coeffs, residuals, tolerance)


def e_functional(f: GridField, K: float, q, t: float) -> float:
    """Control functional (1+t)^{K/2}[t^{(N/2)(1-1/q)} |f|_q + |f|_1] + |||f|||_K."""
    if t <= 0:
        raise ValueError("t must be positive")
    n_dim = f.spec.dim
    inv_q = 0.0 if q == math.inf or q == "inf" else 1.0 / float(q)
    return float(
        (1.0 + t) ** (K / 2.0)
        * (t ** (n_dim / 2.0 * (1.0 - inv_q)) * lq_norm(f, q) + lq_norm(f, 1))
        + weighted_norm(f, K)
    )


def duhamel_remainder(times, fields, K: float, t: float,
                      refine_tol: float = 1e-3) -> GridField:
    """R_K of a sampled source trajectory at time t.

    Computes int_0^t e^{(t-s) Laplace} f(s) ds by composite trapezoid over
    the given samples, subtracts sum_nu [int_0^t m_nu(f(s), s) ds] g_nu(., t),
    and warns if halving the s-resolution changes the integral materially.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) != len(fields) or len(times) < 3:
        raise ValueError("need at least 3 matching (time, field) samples")
    if not (math.isclose(times[0], 0.0, abs_tol=1e-12) and
            math.isclose(times[-1], t, rel_tol=1e-12)):
        raise ValueError("samples must span [0, t]")
    spec = fields[0].spec
    k_int = math.floor(K)

    def propagated(idx):
        dt_left = t - times[idx]
        return fields[idx].values if dt_left <= 0 else heat_semigroup(fields[idx], dt_left).values

    prop = [propagated(i) for i in range(len(fields))]
    integral = np.trapezoid(np.stack(prop), times, axis=0)

    coarse_ix = list(range(0, len(fields) - 1, 2)) + [len(fields) - 1]
    coarse = np.trapezoid(np.stack([prop[i] for i in coarse_ix]), times[coarse_ix], axis=0)
    scale = np.abs(integral).max()
    if scale > 0 and np.abs(integral - coarse).max() > refine_tol * scale:
        warnings.warn(
            "Duhamel time quadrature not converged at the sampled resolution",
            UserWarning,
            stacklevel=2,
        )

    coeff_series = {nu: [] for nu in multi_indices(spec.dim, k_int)}
    for s, f in zip(times, fields):
        coeffs = moment_coefficients(f, s, k_int)
        for nu in coeff_series:
            coeff_series[nu].append(coeffs[nu])
    accumulated = {
        nu: float(np.trapezoid(np.asarray(v), times)) for nu, v in coeff_series.items()
    }
    return GridField(spec, integral) - expansion_field(spec, accumulated, t)
