"""Discrete fractional operators in two backends.

Spectral backend (periodic grids): Fourier multipliers
    riesz potential      |xi|^{-2s}        (zero mode -> 0)
    smoothed potential   (eps + xi^2)^{-s}
    half potential       (eps + xi^2)^{-s/2}, eps=0: |xi|^{-s}
    fractional Laplacian |xi|^{2 alpha}

Quadrature backend (truncated line): singular-kernel sums with the standard
1D normalizations
    K u(x)  = c_{1,s} int u(y) |x-y|^{-(1-2s)} dy,
              c_{1,s} = Gamma((1-2s)/2) / (4^s sqrt(pi) Gamma(s)),  s < 1/2
    (-Dl)^a f(x) = C(a) PV int (f(x)-f(y)) |x-y|^{-(1+2a)} dy,
              C(a) = 4^a Gamma(1/2+a) / (sqrt(pi) |Gamma(-a)|)

The hypersingular quadrature integrates the kernel exactly over each source
cell, handles the singular cell by a second-order Taylor correction, and adds
the far field beyond the grid from a caller-supplied tail model: the operator
sees the whole line, and silently truncating tails would fabricate spurious
propagation in the barrier checks.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.signal import fftconvolve

from fracpme.field import Field, FieldKind, Grid, Topology


def riesz_constant(s: float) -> float:
    """c_{1,s} for the 1D Riesz kernel, valid for s < 1/2."""
    return math.gamma((1.0 - 2.0 * s) / 2.0) / (4.0**s * math.sqrt(math.pi) * math.gamma(s))


def frac_laplacian_constant(alpha: float) -> float:
    """C(alpha) normalizing the 1D principal-value kernel to the symbol |xi|^{2 alpha}."""
    return 4.0**alpha * math.gamma(0.5 + alpha) / (math.sqrt(math.pi) * abs(math.gamma(-alpha)))


class Tail:
    """Far-field model for quadrature operators: values of f beyond the grid."""

    def __init__(self, kind: str, left: float = 0.0, right: float = 0.0, fn: Callable | None = None):
        if kind not in ("zero", "constant", "callable"):
            raise ValueError(f"unknown tail kind {kind!r}")
        if kind == "callable" and fn is None:
            raise ValueError("callable tail requires a function")
        self.kind = kind
        self.left = float(left)
        self.right = float(right)
        self.fn = fn

    @classmethod
    def zero(cls) -> "Tail":
        return cls("zero")

    @classmethod
    def constant(cls, left: float, right: float) -> "Tail":
        return cls("constant", left=left, right=right)

    @classmethod
    def from_callable(cls, fn: Callable) -> "Tail":
        return cls("callable", fn=fn)

    def ghost(self, x: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.left if x < 0 else self.right
        return float(self.fn(x))


# ---------------------------------------------------------------------------
# spectral backend

def angular_frequencies(n: int, h: float) -> np.ndarray:
    return 2.0 * math.pi * np.fft.rfftfreq(n, d=h)


def _apply_multiplier(values: np.ndarray, h: float, mult: np.ndarray) -> np.ndarray:
    return np.fft.irfft(np.fft.rfft(values) * mult, n=values.shape[0])


def _potential_multiplier(n: int, h: float, s: float, eps: float) -> np.ndarray:
    xi = angular_frequencies(n, h)
    if eps > 0:
        return (eps + xi**2) ** (-s)
    mult = np.zeros_like(xi)
    mult[1:] = np.abs(xi[1:]) ** (-2.0 * s)
    return mult


def _require_periodic(f: Field, what: str) -> None:
    if f.grid.topology is not Topology.PERIODIC:
        raise ValueError(f"{what} spectral backend requires a periodic grid")


def _check_order(s: float) -> None:
    if not 0 < s < 1:
        raise ValueError(f"fractional order must lie in (0,1), got {s}")


# ---------------------------------------------------------------------------
# quadrature kernels (cached per mesh)
#
# Both singular quadratures use product integration against the piecewise
# linear interpolant: on each lattice interval [kh, (k+1)h] the kernel moments
#   Ia = int r^p dr,   Ib = int r^{p+1} dr
# are integrated exactly, giving hat weights A_k (left node) and B_k (right
# node).  This is second order uniformly in the kernel exponent, which the
# plain midpoint rule is not near the singularity.


def _interval_moments(k: np.ndarray, h: float, p: float) -> tuple[np.ndarray, np.ndarray]:
    a = k * h
    b = (k + 1.0) * h
    # p+1 = 0 cannot occur for the exponents used here; p+2 = 0 at alpha = 1/2
    ia = (b ** (p + 1.0) - a ** (p + 1.0)) / (p + 1.0)
    if abs(p + 2.0) < 1e-9:
        with np.errstate(divide="ignore"):
            ib = np.log(b / np.where(a > 0, a, 1.0))
    else:
        ib = (b ** (p + 2.0) - a ** (p + 2.0)) / (p + 2.0)
    A = (b * ia - ib) / h
    B = (ib - a * ia) / h
    return A, B


@lru_cache(maxsize=32)
def _riesz_weights(n: int, h: float, s: float) -> np.ndarray:
    # symmetric convolution kernel beta[d] for p_i = c * sum_j beta_{|i-j|} u_j
    p = 2.0 * s - 1.0
    k = np.arange(n, dtype=np.float64)
    A, B = _interval_moments(k, h, p)
    beta = np.empty(n)
    beta[0] = 2.0 * A[0]
    beta[1:] = A[1:] + B[:-1]
    beta.flags.writeable = False
    return beta


_PARABOLA_RANGE = 16   # lattice intervals over which the local parabola is split off


@lru_cache(maxsize=32)
def _flap_weights(n_lat: int, h: float, alpha: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    # Product-integration weights on the symmetrized differences
    # phi_d = 2 f_i - f_{i+d} - f_{i-d}: piecewise-linear hats on each interval
    # [dh, (d+1)h], plus one extra weight on phi_1 that swaps the piecewise
    # linear interpolant for the exact parabola phi_1 (r/h)^2 on [0, Kc h].
    # Near the kernel singularity phi is quadratic and plain PL is only first
    # order; subtracting the parabola leaves an O(r^4) remainder there.
    p = -(1.0 + 2.0 * alpha)
    k = np.arange(1, n_lat, dtype=np.float64)
    A, B = _interval_moments(k, h, p)
    gamma = np.zeros(n_lat)
    gamma[1] = A[0]
    gamma[2:] = A[1:] + B[:-1]
    cum = np.concatenate(([0.0], np.cumsum(gamma[1:])))
    a_full = np.zeros(n_lat)
    a_full[1:] = A
    kc = min(_PARABOLA_RANGE, n_lat - 1)
    extra1 = (kc * h) ** (2.0 - 2.0 * alpha) / ((2.0 - 2.0 * alpha) * h**2)
    kk = np.arange(1, kc, dtype=np.float64)
    extra1 -= float(np.sum(A[:kc - 1] * kk**2 + B[:kc - 1] * (kk + 1.0) ** 2))
    gamma.flags.writeable = False
    cum.flags.writeable = False
    a_full.flags.writeable = False
    return gamma, cum, a_full, extra1


def _symmetric_convolve(values: np.ndarray, w: np.ndarray) -> np.ndarray:
    kernel = np.concatenate((w[:0:-1], w))
    return fftconvolve(values, kernel, mode="same")


# ---------------------------------------------------------------------------
# public operators

def riesz_potential(u: Field, s: float, backend: str = "spectral") -> Field:
    """Pressure p = (-Delta)^{-s} u.

    Spectral: periodic grids, zero-mean convention (the potential of the mean
    diverges; only grad p enters the dynamics).  Quadrature: truncated line,
    requires s < 1/2 so the 1D Riesz kernel decays.
    """
    _check_order(s)
    if backend == "spectral":
        _require_periodic(u, "riesz_potential")
        mult = _potential_multiplier(u.grid.n, u.grid.h, s, 0.0)
        return Field(u.grid, _apply_multiplier(u.values, u.grid.h, mult), FieldKind.PRESSURE)
    if backend == "quadrature":
        if u.grid.topology is not Topology.TRUNCATED_LINE:
            raise ValueError("quadrature backend requires a truncated-line grid")
        if s >= 0.5:
            raise ValueError("quadrature Riesz kernel needs s < 1/2 on the 1D line")
        # density assumed zero beyond the grid (Dirichlet truncation)
        w = _riesz_weights(u.grid.n, u.grid.h, s)
        p = riesz_constant(s) * _symmetric_convolve(u.values, w)
        return Field(u.grid, p, FieldKind.PRESSURE)
    raise ValueError(f"unknown backend {backend!r}")


def smoothed_potential(u: Field, s: float, eps: float) -> Field:
    """K_eps u via the multiplier (eps + |xi|^2)^{-s}; converges to K u as eps -> 0."""
    _check_order(s)
    if eps < 0:
        raise ValueError("smoothing parameter eps must be nonnegative")
    _require_periodic(u, "smoothed_potential")
    mult = _potential_multiplier(u.grid.n, u.grid.h, s, eps)
    return Field(u.grid, _apply_multiplier(u.values, u.grid.h, mult), FieldKind.PRESSURE)


def half_potential(u: Field, s: float, eps: float = 0.0) -> Field:
    """H_eps with H_eps^2 = K_eps, i.e. the multiplier (eps + |xi|^2)^{-s/2}."""
    _check_order(s)
    if eps < 0:
        raise ValueError("smoothing parameter eps must be nonnegative")
    _require_periodic(u, "half_potential")
    xi = angular_frequencies(u.grid.n, u.grid.h)
    if eps > 0:
        mult = (eps + xi**2) ** (-s / 2.0)
    else:
        mult = np.zeros_like(xi)
        mult[1:] = np.abs(xi[1:]) ** (-s)
    return Field(u.grid, _apply_multiplier(u.values, u.grid.h, mult), FieldKind.PRESSURE)


@lru_cache(maxsize=16)
def _image_kernel(n: int, h: float, s: float, pad_factor: int) -> np.ndarray:
    """Non-constant part of the periodized Riesz kernel's image sum.

    D(r) = sum_{k>=1} [K(kL-r) + K(kL+r) - 2 K(kL)] with K the 1D Riesz
    kernel (log kernel at s = 1/2); subtracting u * D from the padded
    spectral potential removes the periodization bias up to a constant,
    which the zero-mode convention discards anyway.
    """
    L = pad_factor * n * h
    r = np.arange(n, dtype=np.float64) * h
    K = 512
    k = np.arange(1, K + 1, dtype=np.float64)[:, None] * L
    if abs(s - 0.5) < 1e-12:
        acc = -np.sum(np.log1p(-(r / k) ** 2), axis=0) / math.pi
        # midpoint integral remainder of sum_{k>K} -log(1 - (r/kL)^2)/pi
        b = (K + 0.5) * L
        a = r
        acc += (b * np.log1p(-(a / b) ** 2)
                + a * (np.log(b + a) - np.log(b - a))) / (math.pi * L)
    else:
        c = riesz_constant(s)
        p = 2.0 * s - 1.0
        acc = c * np.sum((k - r) ** p + (k + r) ** p - 2.0 * k**p, axis=0)
        b = (K + 0.5) * L
        acc -= c * ((b - r) ** (p + 1.0) + (b + r) ** (p + 1.0) - 2.0 * b ** (p + 1.0)) \
            / (L * (p + 1.0))
    acc.flags.writeable = False
    return acc


def potential_padded(u: Field, s: float, eps: float = 0.0, pad_factor: int = 4,
                     image_correction: bool = True) -> Field:
    """K_eps u on a truncated-line grid via a padded periodic embedding.

    The workhorse for s >= 1/2 (where the 1D quadrature kernel is invalid)
    and for eps > 0 (the smoothed multiplier has no convolution kernel).
    For eps = 0 the slowly decaying kernel makes periodic images visible even
    at 4x padding, so their smooth field is subtracted in closed form; for
    eps > 0 the kernel decays fast enough that no correction is needed.
    """
    _check_order(s)
    if u.grid.topology is not Topology.TRUNCATED_LINE:
        raise ValueError("potential_padded expects a truncated-line field")
    n = u.grid.n
    npad = pad_factor * n
    buf = np.zeros(npad)
    i0 = (npad - n) // 2
    buf[i0:i0 + n] = u.values
    mult = _potential_multiplier(npad, u.grid.h, s, eps)
    out = _apply_multiplier(buf, u.grid.h, mult)[i0:i0 + n]
    if eps == 0.0 and image_correction:
        dvar = _image_kernel(n, u.grid.h, s, pad_factor)
        out = out - u.grid.h * _symmetric_convolve(u.values, dvar)
    return Field(u.grid, out, FieldKind.PRESSURE)


def frac_laplacian_values(values: np.ndarray, h: float, x_left: float, alpha: float,
                          tail: Tail) -> np.ndarray:
    """Quadrature (-Delta)^alpha on cell values of a truncated-line grid.

    Symmetrized form C(a) * int_0^inf (2 f(x) - f(x+r) - f(x-r)) r^{-1-2a} dr.
    The grid is padded with ghost cells filled from the tail model, the padded
    lattice is integrated by piecewise-linear product integration with the
    local parabola split off near the singularity (the PV-odd part cancels),
    and r beyond the padded lattice comes from the tail model in closed form
    for constant tails or by adaptive quadrature for callables.
    """
    n = values.shape[0]
    x = x_left + (np.arange(n) + 0.5) * h
    E = _PARABOLA_RANGE
    xg_l = x_left + (np.arange(-E, 0) + 0.5) * h
    xg_r = x_left + (np.arange(n, n + E) + 0.5) * h
    if tail.kind == "zero":
        gl = np.zeros(E)
        gr = np.zeros(E)
    elif tail.kind == "constant":
        gl = np.full(E, tail.left)
        gr = np.full(E, tail.right)
    else:
        gl = np.array([float(tail.fn(xi)) for xi in xg_l])
        gr = np.array([float(tail.fn(xi)) for xi in xg_r])
    ext = np.concatenate((gl, values, gr))
    npad = ext.shape[0]

    idx = np.arange(n)
    k_r = (n - 1 - idx) + E   # padded lattice extent to the right of node i
    k_l = idx + E
    gamma, cum, a_full, extra1 = _flap_weights(npad, h, alpha)

    lattice = values * (cum[k_r] + cum[k_l]) - _symmetric_convolve(ext, gamma)[E:E + n]
    # the convolution overcounts the left-node weight of each side's last interval
    lattice -= a_full[k_r] * (values - ext[-1]) + a_full[k_l] * (values - ext[0])
    phi1 = 2.0 * values - ext[E + 1:E + n + 1] - ext[E - 1:E + n - 1]
    lattice += extra1 * phi1

    t_r = k_r * h
    t_l = k_l * h
    if tail.kind in ("zero", "constant"):
        cl = tail.left if tail.kind == "constant" else 0.0
        cr = tail.right if tail.kind == "constant" else 0.0
        tail_term = (values - cr) * t_r ** (-2.0 * alpha) / (2.0 * alpha) \
            + (values - cl) * t_l ** (-2.0 * alpha) / (2.0 * alpha)
    else:
        # split off the f(x_i) part (closed form); quad only sees the decaying tail
        fn = tail.fn
        expo = -(1.0 + 2.0 * alpha)
        tail_term = values * (t_r ** (-2.0 * alpha) + t_l ** (-2.0 * alpha)) / (2.0 * alpha)
        for i in range(n):
            ir, _ = quad(lambda r, xi=x[i]: fn(xi + r) * r**expo, t_r[i], np.inf, limit=200)
            il, _ = quad(lambda r, xi=x[i]: fn(xi - r) * r**expo, t_l[i], np.inf, limit=200)
            tail_term[i] -= ir + il
    return frac_laplacian_constant(alpha) * (lattice + tail_term)


def frac_laplacian(f: Field, alpha: float, backend: str = "spectral",
                   tail: Tail | None = None) -> Field:
    """(-Delta)^alpha f; spectral on periodic grids, quadrature on the line."""
    _check_order(alpha)
    if backend == "spectral":
        _require_periodic(f, "frac_laplacian")
        xi = angular_frequencies(f.grid.n, f.grid.h)
        mult = np.abs(xi) ** (2.0 * alpha)
        return Field(f.grid, _apply_multiplier(f.values, f.grid.h, mult), FieldKind.PRESSURE)
    if backend == "quadrature":
        if f.grid.topology is not Topology.TRUNCATED_LINE:
            raise ValueError("quadrature backend requires a truncated-line grid")
        if tail is None:
            raise ValueError("quadrature frac_laplacian requires a declared tail model")
        out = frac_laplacian_values(f.values, f.grid.h, f.grid.x_left, alpha, tail)
        return Field(f.grid, out, FieldKind.PRESSURE)
    raise ValueError(f"unknown backend {backend!r}")


def frac_laplacian_stiffness(grid: Grid, alpha: float) -> float:
    """Upper bound on the spectral radius of the quadrature (-Delta)^alpha.

    Used by explicit steppers to propose stable time steps.
    """
    n, h = grid.n, grid.h
    npad = n + 2 * _PARABOLA_RANGE
    _, cum, _, extra1 = _flap_weights(npad, h, alpha)
    diag_max = 2.0 * cum[npad - 1] + 2.0 * abs(extra1)
    tail_max = 2.0 * (_PARABOLA_RANGE * h) ** (-2.0 * alpha) / (2.0 * alpha)
    return frac_laplacian_constant(alpha) * (diag_max + tail_max)


def grad_half_power(values: np.ndarray, h: float, s: float, eps: float = 0.0,
                    pad_factor: int = 4) -> float:
    """int |grad H_eps u|^2 dx by Parseval on a padded periodic embedding."""
    n = values.shape[0]
    npad = pad_factor * n
    buf = np.zeros(npad)
    i0 = (npad - n) // 2
    buf[i0:i0 + n] = values
    xi = angular_frequencies(npad, h)
    if eps > 0:
        sym = xi**2 * (eps + xi**2) ** (-s)
    else:
        sym = np.zeros_like(xi)
        sym[1:] = np.abs(xi[1:]) ** (2.0 - 2.0 * s)
    uhat2 = np.abs(np.fft.rfft(buf)) ** 2
    weights = np.full_like(xi, 2.0)
    weights[0] = 1.0
    if npad % 2 == 0:
        weights[-1] = 1.0
    return float(h / npad * np.sum(weights * sym * uhat2))


class OperatorKind(enum.Enum):
    RIESZ_POTENTIAL = "riesz_potential"
    SMOOTHED_POTENTIAL = "smoothed_potential"
    HALF_POTENTIAL = "half_potential"
    FRAC_LAPLACIAN = "frac_laplacian"


@dataclass(frozen=True)
class OperatorSpec:
    """Declarative record of an operator application; validates the preconditions."""

    kind: OperatorKind
    order: float
    eps: float = 0.0
    backend: str = "spectral"

    def __post_init__(self):
        _check_order(self.order)
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.kind is OperatorKind.RIESZ_POTENTIAL and self.backend == "quadrature" and self.order >= 0.5:
            raise ValueError("quadrature Riesz potential requires s < 1/2 in 1D")

    def apply(self, f: Field, tail: Tail | None = None) -> Field:
        if self.kind is OperatorKind.RIESZ_POTENTIAL:
            return riesz_potential(f, self.order, self.backend)
        if self.kind is OperatorKind.SMOOTHED_POTENTIAL:
            return smoothed_potential(f, self.order, self.eps)
        if self.kind is OperatorKind.HALF_POTENTIAL:
            return half_potential(f, self.order, self.eps)
        return frac_laplacian(f, self.order, self.backend, tail)
