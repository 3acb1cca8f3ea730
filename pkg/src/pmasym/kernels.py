"""Gauss kernel, its multi-index derivatives, the heat semigroup, and norms.

Derivatives use the tensor-product Hermite representation
    d^n/dx^n G1(x, t) = (-1)^n (4t)^{-n/2} H_n(x / sqrt(4t)) G1(x, t)
with the physicists' Hermite polynomials H_n evaluated by the three-term
recurrence.  The semigroup is a direct midpoint-quadrature convolution on
the truncated grid (separable passes in 2-D).
"""

from __future__ import annotations

import math

import numpy as np

from .grid import GridField, GridSpec, check_boundary_mass, mi_factorial, mi_order


def gauss(x, t: float, dim: int):
    """Gauss kernel G(x, t) = (4 pi t)^{-dim/2} exp(-|x|^2 / 4t)."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    if dim == 1:
        r2 = x ** 2
    else:
        if x.shape[-1] != dim:
            raise ValueError("last axis of x must have length dim")
        r2 = (x ** 2).sum(axis=-1)
    out = (4.0 * math.pi * t) ** (-dim / 2.0) * np.exp(-r2 / (4.0 * t))
    return float(out) if np.ndim(out) == 0 else out


def _hermite(n: int, y: np.ndarray) -> np.ndarray:
    """Physicists' Hermite H_n(y) by the three-term recurrence."""
    h_prev = np.ones_like(y)
    if n == 0:
        return h_prev
    h = 2.0 * y
    for k in range(1, n):
        h, h_prev = 2.0 * y * h - 2.0 * k * h_prev, h
    return h


def gauss_deriv_1d(n: int, x, t: float):
    """n-th spatial derivative of the one-dimensional Gauss kernel."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    y = x / math.sqrt(4.0 * t)
    g = (4.0 * math.pi * t) ** -0.5 * np.exp(-y ** 2)
    return (-1.0) ** n * (4.0 * t) ** (-n / 2.0) * _hermite(n, y) * g


def gauss_deriv(nu, x, t: float):
    """Mixed derivative d^nu G(x, t), tensor product over axes."""
    x = np.asarray(x, dtype=float)
    dim = len(nu)
    if dim == 1:
        out = gauss_deriv_1d(nu[0], x, t)
    else:
        if x.shape[-1] != dim:
            raise ValueError("last axis of x must have length len(nu)")
        out = np.ones(x.shape[:-1])
        for axis, n in enumerate(nu):
            out = out * gauss_deriv_1d(n, x[..., axis], t)
    return float(out) if np.ndim(out) == 0 else out


def g_kernel(nu, x, t: float):
    """Shifted normalized kernel g_nu(x, t) = ((-1)^|nu| / nu!) d^nu G(x, t + 1)."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")
    sign = (-1.0) ** mi_order(nu)
    return sign / mi_factorial(nu) * gauss_deriv(nu, x, t + 1.0)


# ---------------------------------------------------------------------------
# Grid-field constructors

def _points(spec: GridSpec):
    if spec.dim == 1:
        return spec.axis()
    return np.stack(spec.meshgrid(), axis=-1)


def gauss_field(spec: GridSpec, t: float, center=None) -> GridField:
    """G(x - center, t) sampled on the grid."""
    pts = _points(spec)
    if center is not None:
        pts = pts - np.asarray(center, dtype=float)
    return GridField(spec, gauss(pts, t, spec.dim))


def gauss_deriv_field(spec: GridSpec, nu, t: float, center=None) -> GridField:
    pts = _points(spec)
    if center is not None:
        pts = pts - np.asarray(center, dtype=float)
    return GridField(spec, gauss_deriv(nu, pts, t))


def g_field(spec: GridSpec, nu, t: float) -> GridField:
    """g_nu(., t) sampled on the grid."""
    return GridField(spec, g_kernel(nu, _points(spec), t))


# ---------------------------------------------------------------------------
# Heat semigroup and norms

def heat_semigroup(f: GridField, t: float, boundary_tol: float = 1e-8) -> GridField:
    """e^{t Laplace} f by direct midpoint-quadrature convolution with G(., t)."""
    if t <= 0:
        raise ValueError("t must be positive")
    check_boundary_mass(f, boundary_tol, what="heat_semigroup input")
    spec = f.spec
    n, h = spec.points_per_axis, spec.spacing
    diffs = np.arange(1 - n, n) * h
    k1 = (4.0 * math.pi * t) ** -0.5 * np.exp(-diffs ** 2 / (4.0 * t))
    if spec.dim == 1:
        full = np.convolve(f.values, k1)
        out = h * full[n - 1:2 * n - 1]
    else:
        # separable passes: dense Toeplitz matrices along each axis
        kmat = k1[(np.arange(n)[:, None] - np.arange(n)[None, :]) + (n - 1)]
        out = (h * h) * (kmat @ f.values @ kmat.T)
    return GridField(spec, out)


def lq_norm(f: GridField, q) -> float:
    """Midpoint-rule L^q norm; q = inf is the grid max of |f|."""
    absv = np.abs(f.values)
    if q == math.inf or q == "inf":
        return float(absv.max())
    q = float(q)
    if q < 1:
        raise ValueError("q must be in [1, inf]")
    return float((f.spec.cell_volume * (absv ** q).sum()) ** (1.0 / q))


def weighted_norm(f: GridField, K: float) -> float:
    """Weighted norm |||f|||_K = int |f| (1 + |x|^K) dx by midpoint rule."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    r = np.sqrt(f.spec.radius_squared())
    weight = 1.0 + r ** K if K > 0 else 2.0
    return float(f.spec.cell_volume * (np.abs(f.values) * weight).sum())
