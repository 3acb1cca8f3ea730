"""Uniform cell-centered grids, sampled scalar fields, and multi-index utilities.

Fields live on the centered cube [-half_width, half_width]^dim, sampled at
cell centers so that plain sums are midpoint-rule quadratures.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np


class BoundaryMassWarning(UserWarning):
    """A field is not negligible at the truncation boundary."""


@dataclass(frozen=True)
class GridSpec:
    """Cell-centered uniform grid on [-half_width, half_width]^dim (dim 1 or 2)."""

    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2, got %r" % (self.dim,))
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.points_per_axis <= 0 or self.points_per_axis % 2 != 0:
            raise ValueError("points_per_axis must be a positive even integer")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    def axis(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        n, h = self.points_per_axis, self.spacing
        return -self.half_width + (np.arange(n) + 0.5) * h

    def meshgrid(self):
        """Coordinate arrays, one per axis, each shaped like field values."""
        ax = self.axis()
        if self.dim == 1:
            return (ax,)
        return np.meshgrid(ax, ax, indexing="ij")

    def radius_squared(self) -> np.ndarray:
        coords = self.meshgrid()
        return sum(c ** 2 for c in coords)

    def boundary_mask(self) -> np.ndarray:
        """Mask selecting the outermost layer of cells."""
        mask = np.zeros(self.shape, dtype=bool)
        if self.dim == 1:
            mask[0] = mask[-1] = True
        else:
            mask[0, :] = mask[-1, :] = True
            mask[:, 0] = mask[:, -1] = True
        return mask


@dataclass
class GridField:
    """Scalar field sampled at the cell centers of a GridSpec."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.spec.shape:
            raise ValueError(
                "values shape %s does not match grid shape %s"
                % (self.values.shape, self.spec.shape)
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def copy(self) -> "GridField":
        return GridField(self.spec, self.values.copy())

    def __add__(self, other):
        return GridField(self.spec, self.values + _vals(other))

    def __sub__(self, other):
        return GridField(self.spec, self.values - _vals(other))

    def __mul__(self, c):
        return GridField(self.spec, self.values * c)

    __rmul__ = __mul__

    def integral(self) -> float:
        """Midpoint-rule integral over the truncated domain."""
        return float(self.values.sum() * self.spec.cell_volume)

    def boundary_max(self) -> float:
        return float(np.abs(self.values[self.spec.boundary_mask()]).max())


def _vals(other):
    return other.values if isinstance(other, GridField) else other


def zeros(spec: GridSpec) -> GridField:
    return GridField(spec, np.zeros(spec.shape))


def check_boundary_mass(f: GridField, rel_tol: float = 1e-8, what: str = "field"):
    """Warn if |f| at the truncation boundary is not negligible."""
    scale = float(np.abs(f.values).max())
    if scale > 0 and f.boundary_max() > rel_tol * scale:
        warnings.warn(
            "%s is not negligible at the truncation boundary "
            "(boundary max %.3e, field max %.3e)" % (what, f.boundary_max(), scale),
            BoundaryMassWarning,
            stacklevel=3,
        )


# ---------------------------------------------------------------------------
# Multi-indices are plain tuples of nonnegative ints, one entry per axis.

def mi_order(nu) -> int:
    return int(sum(nu))


def mi_factorial(nu) -> int:
    out = 1
    for k in nu:
        out *= math.factorial(k)
    return out


def mi_leq(omega, nu) -> bool:
    """Componentwise partial order omega <= nu."""
    return len(omega) == len(nu) and all(o <= n for o, n in zip(omega, nu))


def multi_indices(dim: int, max_order: int):
    """All multi-indices with |nu| <= max_order, in graded lexicographic order."""
    out = []
    for total in range(max_order + 1):
        out.extend(_compositions(total, dim))
    return out


def _compositions(total, dim):
    if dim == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, dim - 1):
            out.append((first,) + rest)
    return out


def mi_str(nu) -> str:
    """Dash-joined text form, e.g. (2, 0) -> "2-0"."""
    return "-".join(str(int(k)) for k in nu)


def mi_parse(s: str) -> tuple:
    return tuple(int(part) for part in s.split("-"))
