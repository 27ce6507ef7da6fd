"""Barrier families for the propagation experiments, checked numerically.

Upper barrier (finite propagation, m >= 2): the traveling parabola
U(x,t) = a (C t - (|x| - b))_+^2, whose support edge moves at speed C.
A trajectory staying below some U certifies a linear support envelope.

Lower barrier (infinite propagation, m in (1,2), s in (0,1/2)): for the
integrated variable,
    Phi_eps(x,t) = (t + tau)^{b gamma} ((|x| + xi)^{-gamma} + G(x)) - eps,
gamma = (2 alpha + m)/(2 - m), with G a smooth bump supported in (-x0, inf)
whose fractional Laplacian is negative with an |x|^{-(1+2s)} floor far to the
left.  If Phi is a strict subsolution on a window, starts below v, stays
below v on the lateral boundary, and is positive at a probe point, the
comparison structure yields the lower bound v(x1,t1) >= Phi(x1,t1) > 0.

Everything here is finite-lattice evidence with analytically modeled tails,
not proof; the reports say which lattice was tested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from fracpme.field import Field, FieldKind, Grid, ModelParams, mass
from fracpme.fracops import Tail, frac_laplacian_constant, frac_laplacian_values


# ---------------------------------------------------------------------------
# upper parabola barrier

@dataclass(frozen=True)
class UpperBarrier:
    a: float
    b: float
    C: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0 or self.C < 0:
            raise ValueError("upper barrier requires a > 0, b > 0, C >= 0")

    def __call__(self, x, t: float):
        z = self.C * t - (np.abs(x) - self.b)
        return self.a * np.maximum(z, 0.0) ** 2


@dataclass
class UpperReport:
    barrier: UpperBarrier
    min_margin: float
    first_violation: tuple[float, float, float] | None   # (t, x, margin)

    @property
    def holds(self) -> bool:
        return self.first_violation is None


def check_upper(traj, barrier: UpperBarrier) -> UpperReport:
    """Min over snapshots and cells of U - u; nonnegative means U dominates."""
    x = traj.snapshots[0][1].grid.x
    u0 = traj.snapshots[0][1].values
    if np.any(u0 > barrier(x, 0.0) + 1e-14):
        raise ValueError("initial datum is not below the barrier at t = 0")
    min_margin = math.inf
    first = None
    for t, u in traj.snapshots:
        margin = barrier(x, t) - u.values
        i = int(np.argmin(margin))
        if margin[i] < min_margin:
            min_margin = float(margin[i])
        if first is None and margin[i] < 0:
            first = (float(t), float(x[i]), float(margin[i]))
    return UpperReport(barrier, min_margin, first)


@dataclass
class SpeedReport:
    found: bool
    c_star: float
    c_max: float
    margin_curve: list[tuple[float, float]]   # per snapshot (t, min margin) at c_star
    barrier: UpperBarrier | None


def find_speed(params: ModelParams, u0: Field, a: float, b: float, T: float, *,
               c_max: float = 1e3, rel_tol: float = 1e-2, snapshot_times=None,
               backend: str = "auto") -> SpeedReport:
    """Smallest front speed C whose parabola dominates the run over [0, T].

    The trajectory does not depend on C, so the solver runs once and the
    bisection replays the barrier comparison against the stored snapshots.
    """
    from fracpme.solver import run

    if np.any(u0.values > a * np.maximum(b - np.abs(u0.grid.x), 0.0) ** 2 + 1e-14):
        raise ValueError("u0 must lie below a (|x| - b)^2 with support in [-b, b]")
    if snapshot_times is None:
        snapshot_times = np.linspace(0.0, T, 21)
    traj = run(params, u0, T, snapshot_times, backend=backend)

    def passes(C):
        return check_upper(traj, UpperBarrier(a, b, C)).holds

    def margins(C):
        bar = UpperBarrier(a, b, C)
        x = traj.snapshots[0][1].grid.x
        return [(float(t), float(np.min(bar(x, t) - u.values))) for t, u in traj.snapshots]

    if passes(0.0):
        return SpeedReport(True, 0.0, c_max, margins(0.0), UpperBarrier(a, b, 0.0))
    if not passes(c_max):
        return SpeedReport(False, math.nan, c_max, margins(c_max), None)
    lo, hi = 0.0, c_max
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    bar = UpperBarrier(a, b, hi)
    return SpeedReport(True, hi, c_max, margins(hi), bar)


# ---------------------------------------------------------------------------
# G function and lower barrier

@dataclass(frozen=True)
class GSpec:
    """Smooth bump amplitude * exp(-1/(1 - ((x-center)/radius)^2)) on its support."""

    x0: float
    center: float
    radius: float
    amplitude: float

    def __post_init__(self):
        if self.x0 <= 0 or self.radius <= 0 or self.amplitude <= 0:
            raise ValueError("GSpec requires positive x0, radius, amplitude")
        if self.center - self.radius <= -self.x0:
            raise ValueError("bump support must lie inside (-x0, inf)")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        z = (x - self.center) / self.radius
        inside = np.abs(z) < 1.0
        out = np.zeros_like(x)
        zz = z[inside]
        out[inside] = self.amplitude * np.exp(-1.0 / (1.0 - zz * zz))
        return out if out.ndim else float(out)

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.radius, self.center + self.radius)

    @property
    def max_value(self) -> float:
        return self.amplitude * math.exp(-1.0)

    def integral(self, n: int = 20001) -> float:
        xs = np.linspace(*self.support, n)
        return float(np.trapezoid(self(xs), xs))


@dataclass
class GReport:
    C1_observed: float
    C2_observed: float
    passed: bool
    far_ratio: float          # -(-Dl)^s G(x) |x|^{1+2s} at the far window edge
    far_ratio_predicted: float  # C(s) * int G
    window: tuple[float, float]


def check_G(g: GSpec, s: float, window: tuple[float, float], *, h: float = 0.02) -> GReport:
    """Verify the (G1)-(G3)-style properties of a bump on a window left of -x0.

    C2_observed = min over the window of -(-Dl)^s G(x) |x|^{1+2s}; the far
    field of the singular integral tends to C(s) int G, reported as a ratio
    for the independent quadrature cross-check.
    """
    if not 0 < s < 0.5:
        raise ValueError("check_G requires s in (0, 1/2)")
    x_lo, x_hi = window
    if x_hi > -g.x0:
        raise ValueError("window must lie left of -x0")
    sup_l, sup_r = g.support
    grid = _lattice_covering(x_lo - 2.0, sup_r + 2.0, h)
    vals = g(grid.x)
    lap = frac_laplacian_values(vals, grid.h, grid.x_left, s, Tail.zero())
    sel = (grid.x >= x_lo) & (grid.x <= x_hi)
    ratio = -lap[sel] * np.abs(grid.x[sel]) ** (1.0 + 2.0 * s)
    c2 = float(np.min(ratio))
    i_far = int(np.argmin(grid.x[sel]))
    far_ratio = float(ratio[i_far])
    predicted = frac_laplacian_constant(s) * g.integral()
    return GReport(g.max_value, c2, c2 > 0, far_ratio, predicted, (float(x_lo), float(x_hi)))


def _lattice_covering(x_lo: float, x_hi: float, h: float) -> Grid:
    n = max(int(math.ceil((x_hi - x_lo) / h)), 8)
    return Grid(n=n, h=h, x_left=x_lo)


@dataclass(frozen=True)
class LowerBarrier:
    """Phi_eps(x,t) = (t+tau)^{b gamma} ((|x|+xi)^{-gamma} + G(x)) - eps."""

    tau: float
    xi: float
    eps_level: float
    b_exp: float
    gamma: float
    G: GSpec

    def __post_init__(self):
        if min(self.tau, self.xi, self.b_exp) <= 0 or self.eps_level < 0:
            raise ValueError("lower barrier requires tau, xi, b_exp > 0 and eps >= 0")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive (requires m < 2)")

    @classmethod
    def for_params(cls, params: ModelParams, tau: float, xi: float, eps_level: float,
                   b_exp: float, G: GSpec) -> "LowerBarrier":
        return cls(tau, xi, eps_level, b_exp, gamma_exponent(params), G)

    def profile(self, x):
        return (np.abs(x) + self.xi) ** (-self.gamma) + self.G(x)

    def __call__(self, x, t):
        return (t + self.tau) ** (self.b_exp * self.gamma) * self.profile(x) - self.eps_level

    def dt_factor(self, t):
        bg = self.b_exp * self.gamma
        return bg * (t + self.tau) ** (bg - 1.0)

    def dx_profile(self, x):
        x = np.asarray(x, dtype=np.float64)
        core = -self.gamma * np.sign(x) * (np.abs(x) + self.xi) ** (-self.gamma - 1.0)
        z = (x - self.G.center) / self.G.radius
        inside = np.abs(z) < 1.0
        gprime = np.zeros_like(x)
        zz = z[inside]
        gprime[inside] = self.G(x[inside]) * (-2.0 * zz / (1.0 - zz * zz) ** 2) / self.G.radius
        return core + gprime


def gamma_exponent(params: ModelParams) -> float:
    """gamma = (2 alpha + m)/(2 - m); positive only in the m < 2 regime."""
    if params.m >= 2.0:
        raise ValueError(f"gamma undefined for m >= 2 (got m={params.m})")
    return (2.0 * params.alpha + params.m) / (2.0 - params.m)


@dataclass
class SubsolutionReport:
    residual_max: float
    argmax: tuple[float, float]
    x_window: tuple[float, float]
    t_window: tuple[float, float]
    nx: int
    nt: int

    @property
    def holds(self) -> bool:
        return self.residual_max < 0


def check_subsolution(phi: LowerBarrier, params: ModelParams,
                      x_window: tuple[float, float], t_window: tuple[float, float], *,
                      nx: int = 201, nt: int = 11, h: float = 0.02) -> SubsolutionReport:
    """Max over the lattice of Phi_t + |Phi_x|^{m-1} (-Dl)^alpha Phi.

    Negative max is the viscosity-subsolution inequality on the tested set.
    The fractional Laplacian of the (t-independent) profile is evaluated once
    by quadrature with the algebraic tail attached beyond the grid.
    """
    if not 1.0 < params.m < 2.0:
        raise ValueError("the lower barrier regime is m in (1, 2)")
    if not 0.0 < params.s < 0.5:
        raise ValueError("the lower barrier regime is s in (0, 1/2)")
    x_lo, x_hi = x_window
    sup_r = phi.G.support[1]
    grid = _lattice_covering(x_lo - 5.0, max(x_hi, sup_r) + 5.0, h)
    prof = phi.profile(grid.x)
    # beyond the grid G vanishes; the algebraic core continues in closed form
    tail = Tail.from_callable(lambda y: (abs(y) + phi.xi) ** (-phi.gamma))
    lap_prof = frac_laplacian_values(prof, grid.h, grid.x_left, params.alpha, tail)
    dprof = phi.dx_profile(grid.x)

    sel = (grid.x >= x_lo) & (grid.x <= x_hi)
    sel_idx = np.flatnonzero(sel)[:: max(1, int(np.count_nonzero(sel) / nx))]
    ts = np.linspace(t_window[0], t_window[1], nt)
    bg = phi.b_exp * phi.gamma
    worst = -math.inf
    arg = (math.nan, math.nan)
    for t in ts:
        amp = (t + phi.tau) ** bg
        resid = phi.dt_factor(t) * prof[sel_idx] \
            + np.abs(amp * dprof[sel_idx]) ** (params.m - 1.0) * amp * lap_prof[sel_idx]
        i = int(np.argmax(resid))
        if resid[i] > worst:
            worst = float(resid[i])
            arg = (float(grid.x[sel_idx][i]), float(t))
    return SubsolutionReport(worst, arg, (float(x_lo), float(x_hi)),
                             (float(t_window[0]), float(t_window[1])),
                             len(sel_idx), nt)


@dataclass
class ProbeReport:
    found: bool
    barrier: LowerBarrier | None
    lower_bound: float
    x1: float
    t1: float
    subsolution: SubsolutionReport | None
    initial_slack: float      # min over x of v0 - Phi(.,0) for the witness
    lateral_slack: float      # min over the lateral lattice of v - Phi
    tried: int
    best_failure: str = ""


def positivity_probe(x1: float, t1: float, params: ModelParams, v_traj, *,
                     x0: float = 3.0, omega_reach: float = 40.0,
                     taus=(1.0, 2.0, 4.0), xis=(2.0, 4.0), b_exps=(0.25, 0.5),
                     amplitudes=(0.5, 1.0, 2.0), margin: float = 1e-4,
                     quad_h: float = 0.05) -> ProbeReport:
    """Search the lower-barrier family for a witness of v(x1, t1) > 0.

    For each (tau, xi, b_exp, amplitude) candidate the subtraction level eps
    is set to the smallest value keeping Phi below v at t = 0 everywhere and
    on the lateral region (right of -x0) at the trajectory's snapshot times,
    plus a fixed margin; the candidate passes if the subsolution residual on
    [-omega_reach, -x0] x [0, t1] is negative and Phi(x1, t1) > 0.  Candidates
    are tried in deterministic order and the best passing witness (largest
    lower bound) is returned.
    """
    if not 1.0 < params.m < 2.0:
        raise ValueError("infinite-propagation probe requires m in (1, 2)")
    if not 0.0 < params.s < 0.5:
        raise ValueError("infinite-propagation probe requires s in (0, 1/2)")
    gamma = gamma_exponent(params)
    grid = v_traj.snapshots[0][1].grid
    x = grid.x
    times = [t for t, _ in v_traj.snapshots if t <= t1 + 1e-12]
    vs = {t: f.values for t, f in v_traj.snapshots}
    lateral = x > -x0

    best = None
    tried = 0
    best_failure = ""
    if x1 <= -x0 + 0.5:
        raise ValueError("probe point must lie right of -x0 (the bump carries the positivity)")
    for tau in taus:
        for xi in xis:
            for b_exp in b_exps:
                for amp in amplitudes:
                    tried += 1
                    # bump centered on the probe point, kept inside (-x0, inf)
                    G = GSpec(x0=x0, center=x1, radius=0.8 * (x1 + x0), amplitude=amp)
                    bar0 = LowerBarrier(tau, xi, 0.0, b_exp, gamma, G)
                    # smallest eps keeping Phi below v initially and laterally
                    deficit = float(np.max(bar0(x, 0.0) - vs[0.0]))
                    for t in times:
                        if t == 0.0:
                            continue
                        deficit = max(deficit, float(np.max(bar0(x[lateral], t) - vs[t][lateral])))
                    eps = deficit + margin
                    bar = LowerBarrier(tau, xi, eps, b_exp, gamma, G)
                    bound = float(bar(x1, t1))
                    if bound <= 0:
                        best_failure = (f"tau={tau} xi={xi} b={b_exp} amp={amp}: "
                                        f"probe value {bound:.3e} <= 0 after eps={eps:.3e}")
                        continue
                    sub = check_subsolution(bar, params, (-omega_reach, -x0), (0.0, t1),
                                            h=quad_h)
                    if not sub.holds:
                        best_failure = (f"tau={tau} xi={xi} b={b_exp} amp={amp}: "
                                        f"subsolution residual {sub.residual_max:.3e} >= 0")
                        continue
                    init_slack = -float(np.max(bar(x, 0.0) - vs[0.0]))
                    lat_slack = min(
                        -float(np.max(bar(x[lateral], t) - vs[t][lateral]))
                        for t in times if t > 0.0) if len(times) > 1 else math.inf
                    cand = ProbeReport(True, bar, bound, x1, t1, sub,
                                       init_slack, lat_slack, tried)
                    if best is None or cand.lower_bound > best.lower_bound:
                        best = cand
    if best is not None:
        best.tried = tried
        return best
    return ProbeReport(False, None, 0.0, x1, t1, None, math.nan, math.nan, tried, best_failure)
