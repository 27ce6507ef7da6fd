"""Uniform 1D grids, fields on them, and the discrete calculus they share.

Cell-centered layout: cell i has center x_i = x_left + (i + 1/2) h, so the
cells tile [x_left, x_left + n h] exactly.  Fluxes live on faces, which is
what makes the conservative divergence telescope to machine precision.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np


class Topology(enum.Enum):
    PERIODIC = "periodic"
    TRUNCATED_LINE = "truncated_line"


class FieldKind(enum.Enum):
    DENSITY = "density"
    PRESSURE = "pressure"
    INTEGRATED = "integrated"


# slack for the monotonicity check of integrated fields (roundoff scale)
_MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform 1D mesh, reconstructible bit-exactly from (n, h, x_left)."""

    n: int
    h: float
    x_left: float
    topology: Topology = Topology.TRUNCATED_LINE

    def __post_init__(self):
        if self.n < 8:
            raise ValueError(f"grid needs n >= 8 cells, got {self.n}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"grid spacing must be positive and finite, got {self.h}")
        if self.topology is Topology.PERIODIC and self.n & (self.n - 1):
            raise ValueError("periodic grids require n to be a power of two (spectral backend)")

    @classmethod
    def centered(cls, n: int, half_width: float, topology: Topology = Topology.TRUNCATED_LINE) -> "Grid":
        """Grid covering [-half_width, half_width] with n cells."""
        return cls(n=n, h=2.0 * half_width / n, x_left=-half_width, topology=topology)

    @cached_property
    def x(self) -> np.ndarray:
        xs = self.x_left + (np.arange(self.n) + 0.5) * self.h
        xs.flags.writeable = False
        return xs

    @property
    def length(self) -> float:
        return self.n * self.h

    @property
    def x_right(self) -> float:
        return self.x_left + self.n * self.h

    def same_mesh(self, other: "Grid") -> bool:
        return (self.n, self.h, self.x_left) == (other.n, other.h, other.x_left)


@dataclass(frozen=True, eq=False)
class Field:
    """Real values sampled on a grid, one per cell, immutable once built."""

    grid: Grid
    values: np.ndarray
    kind: FieldKind = FieldKind.DENSITY

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if self.kind is FieldKind.DENSITY and np.any(vals < 0):
            raise ValueError("density fields must be nonnegative")
        if self.kind is FieldKind.INTEGRATED:
            span = max(float(np.max(np.abs(vals))), 1.0)
            if np.any(np.diff(vals) < -_MONOTONE_TOL * span):
                raise ValueError("integrated fields must be nondecreasing left to right")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray, kind: FieldKind | None = None) -> "Field":
        return Field(self.grid, values, self.kind if kind is None else kind)


@dataclass(frozen=True)
class ModelParams:
    """Model exponents (m, s) plus the regularization of the approximate problem."""

    m: float
    s: float
    delta: float = 0.0
    mu: float = 0.0
    eps: float = 0.0
    R: float = 1.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"nonlinearity exponent m must be >= 1, got {self.m}")
        if not 0 < self.s < 1:
            raise ValueError(f"fractional order s must lie in (0,1), got {self.s}")
        for name in ("delta", "mu", "eps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.R <= 0:
            raise ValueError("domain half-width R must be positive")

    @property
    def alpha(self) -> float:
        return 1.0 - self.s


def gradient(f: Field) -> Field:
    """Centered difference mapped back to cells; one-sided at truncated ends.

    Exact for affine data in the interior.
    """
    v = f.values
    h = f.grid.h
    g = np.empty_like(v)
    g[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    if f.grid.topology is Topology.PERIODIC:
        g[0] = (v[1] - v[-1]) / (2.0 * h)
        g[-1] = (v[0] - v[-2]) / (2.0 * h)
    else:
        g[0] = (v[1] - v[0]) / h
        g[-1] = (v[-1] - v[-2]) / h
    return Field(f.grid, g, FieldKind.PRESSURE)


def mass(f: Field) -> float:
    """Midpoint quadrature h * sum(u); exact on piecewise-constant data."""
    if f.kind is not FieldKind.DENSITY:
        raise ValueError("mass is defined for density fields")
    return float(f.grid.h * np.sum(f.values))


def cumulative(u: Field) -> Field:
    """Integrated variable v(x_i) = h * sum_{j<=i} u(x_j); rejects periodic grids."""
    if u.kind is not FieldKind.DENSITY:
        raise ValueError("cumulative expects a density field")
    if u.grid.topology is Topology.PERIODIC:
        raise ValueError("cumulative of a periodic density is not periodic; use a truncated grid")
    v = np.cumsum(u.values) * u.grid.h
    return Field(u.grid, v, FieldKind.INTEGRATED)


def field_csv_text(f: Field) -> str:
    """Snapshot CSV `x,value`; 17 significant digits round-trip float64 exactly."""
    lines = ["x,value"]
    for xi, vi in zip(f.grid.x, f.values):
        lines.append(f"{xi:.17g},{vi:.17g}")
    return "\n".join(lines) + "\n"


def write_field_csv(f: Field, path) -> None:
    with open(path, "w") as fh:
        fh.write(field_csv_text(f))


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    xs, vs = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "x,value":
            raise ValueError(f"unexpected field CSV header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            a, b = line.split(",")
            xs.append(float(a))
            vs.append(float(b))
    return np.asarray(xs), np.asarray(vs)


def field_from_csv(grid: Grid, path, kind: FieldKind = FieldKind.DENSITY) -> Field:
    xs, vs = read_field_csv(path)
    if xs.shape != (grid.n,) or not np.array_equal(xs, grid.x):
        raise ValueError("field CSV coordinates do not match the target grid")
    return Field(grid, vs, kind)
