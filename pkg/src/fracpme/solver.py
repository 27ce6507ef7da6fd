"""Explicit conservative stepper for the regularized nonlocal PME.

    u_t = delta Lap u + div((u + mu)^{m-1} grad K_eps(u))

on the truncated line with zero exterior density.  Faces carry the fluxes;
the cell update telescopes, so interior mass is conserved to roundoff.  The
face mobility is donor-cell upwinded on the transport direction -grad p: the
donor choice is the monotone one (it keeps empty cells empty instead of
draining them negative) and is what lets fronts advance by actual mass
transfer.  Step size control is reject/halve against the two discrete
maximum-principle properties (nonnegativity, L-inf non-increase), which is
the stability enforcement: the nonlocal pressure admits no sharp a-priori
CFL constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from fracpme.diagnostics import EnergyReport, fmu
from fracpme.field import Field, FieldKind, Grid, ModelParams, Topology, mass
from fracpme.fracops import grad_half_power, potential_padded, riesz_potential

SIGMA_DEFAULT = 0.4
KAPPA = 1e-30
LINF_TOL = 1e-12
DT_UNDERFLOW = 1e-14
WARM_FACTOR = 2.0


class StepFailure(RuntimeError):
    """dt underflow: the step controller cannot stabilize the update."""

    def __init__(self, t: float, msg: str):
        super().__init__(f"t={t}: {msg}")
        self.t = t


def pressure_backend(params: ModelParams, requested: str = "auto") -> str:
    """Quadrature is the faithful Dirichlet-truncation solve but only exists
    for eps = 0, s < 1/2; otherwise a padded spectral multiplier is used."""
    if requested != "auto":
        return requested
    if params.eps == 0.0 and params.s < 0.5:
        return "quadrature"
    return "spectral_padded"


class PressureSolver:
    """Cached K_eps evaluations on one grid."""

    def __init__(self, grid: Grid, params: ModelParams, backend: str = "auto", pad_factor: int = 4):
        self.grid = grid
        self.params = params
        self.backend = pressure_backend(params, backend)
        self.pad_factor = pad_factor
        if self.backend == "quadrature" and (params.eps > 0 or params.s >= 0.5):
            raise ValueError("quadrature pressure solve requires eps = 0 and s < 1/2")

    def __call__(self, u_values: np.ndarray) -> np.ndarray:
        f = Field(self.grid, u_values, FieldKind.PRESSURE)  # skip density checks here
        if self.backend == "quadrature":
            return riesz_potential(f, self.params.s, "quadrature").values
        return potential_padded(f, self.params.s, self.params.eps, self.pad_factor).values


@dataclass
class SolverState:
    t: float
    u: Field
    params: ModelParams
    dt_last: float = 0.0
    step_count: int = 0
    rejected_steps: int = 0
    dt_ctrl: float = 0.0             # warm-start memory (last accepted unclipped dt)
    dt_cap: float = float("inf")     # stability boundary learned from rejections


@dataclass
class Trajectory:
    params: ModelParams
    snapshots: list[tuple[float, Field]]
    diagnostics: list[EnergyReport]
    step_count: int = 0
    rejected_steps: int = 0
    backend: str = ""

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.snapshots]

    def field_at(self, t: float) -> Field:
        for ti, u in self.snapshots:
            if ti == t:
                return u
        raise KeyError(f"no snapshot at t={t}")


def _fluxes(u: np.ndarray, p: np.ndarray, params: ModelParams, h: float) -> tuple[np.ndarray, float]:
    """Face fluxes F_{i+1/2} (n+1 values incl. walls) and max interior |V|."""
    m, mu, delta = params.m, params.mu, params.delta
    V = (p[1:] - p[:-1]) / h
    # donor cell: transport velocity is -V, so V > 0 moves mass leftward,
    # out of the right cell
    mob = np.where(V > 0.0, (u[1:] + mu) ** (m - 1.0), (u[:-1] + mu) ** (m - 1.0))
    F = np.empty(u.shape[0] + 1)
    F[1:-1] = mob * V
    if delta > 0:
        F[1:-1] += delta * (u[1:] - u[:-1]) / h
        F[0] = delta * u[0] / h            # exterior density is zero
        F[-1] = -delta * u[-1] / h
    else:
        F[0] = 0.0
        F[-1] = 0.0
    vmax = float(np.max(np.abs(V))) if V.size else 0.0
    return F, vmax


def _propose_dt(u: np.ndarray, vmax: float, params: ModelParams, h: float,
                sigma: float, dt_ctrl: float) -> float:
    m, mu, delta = params.m, params.mu, params.delta
    mob_max = (float(np.max(u)) + mu) ** (m - 1.0)
    dt = sigma * min(h * h / (2.0 * delta + KAPPA), h / (vmax * mob_max + KAPPA))
    if dt_ctrl > 0:
        dt = min(dt, WARM_FACTOR * dt_ctrl)
    return dt


def step(state: SolverState, *, dt_max: float | None = None, forced_dt: float | None = None,
         sigma: float = SIGMA_DEFAULT, pressure: PressureSolver | None = None) -> SolverState:
    """One accepted explicit step; retries with dt/2 on rejection.

    Rejection triggers: any negative cell, or a relative L-inf increase beyond
    1e-12.  Raises StepFailure when dt falls below 1e-14 of the step's
    initial proposal.
    """
    grid = state.u.grid
    if grid.topology is not Topology.TRUNCATED_LINE:
        raise ValueError("the solver runs on truncated-line grids")
    u = state.u.values
    params = state.params
    h = grid.h
    if pressure is None:
        pressure = PressureSolver(grid, params)

    p = pressure(u)
    F, vmax = _fluxes(u, p, params, h)
    div = (F[1:] - F[:-1]) / h

    if forced_dt is not None:
        dt = forced_dt
        u_new = u + dt * div
        rejected = 0
        dt_ctrl = state.dt_ctrl
        dt_cap = state.dt_cap
    else:
        dt0 = _propose_dt(u, vmax, params, h, sigma, state.dt_ctrl)
        dt0 = min(dt0, state.dt_cap)
        clipped = dt_max is not None and dt_max < dt0
        dt = min(dt0, dt_max) if clipped else dt0
        max_old = float(np.max(u))
        rejected = 0
        while True:
            u_new = u + dt * div
            if not np.any(u_new < 0.0) and float(np.max(u_new)) <= max_old * (1.0 + LINF_TOL):
                break
            rejected += 1
            dt *= 0.5
            if dt < DT_UNDERFLOW * dt0:
                raise StepFailure(state.t, "dt underflow: step controller cannot stabilize the update")
        # the rejection boundary is the de-facto stability limit; stay under it
        # and re-probe slowly (the limit drifts as the solution decays)
        dt_cap = dt if rejected else state.dt_cap * 1.02
        # snapshot clipping must not shrink the controller memory
        dt_ctrl = max(state.dt_ctrl, dt) if clipped and rejected == 0 else dt

    return SolverState(state.t + dt, Field(grid, u_new, FieldKind.DENSITY), params,
                       dt_last=dt, step_count=state.step_count + 1,
                       rejected_steps=state.rejected_steps + rejected,
                       dt_ctrl=dt_ctrl, dt_cap=dt_cap)


def _diag_powers(u: np.ndarray, params: ModelParams, grid: Grid, pad_factor: int) -> tuple[float, float]:
    """Instantaneous dissipation powers for the energy accumulators."""
    h = grid.h
    visc = 0.0
    if params.delta > 0:
        g = np.empty_like(u)
        g[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
        g[0] = (u[1] - u[0]) / h
        g[-1] = (u[-1] - u[-2]) / h
        dens = (u + params.mu) ** (params.m - 1.0)
        ratio = np.divide(g * g, dens, out=np.zeros_like(u), where=dens > 0)
        visc = params.delta * h * float(np.sum(ratio))
    gradH = grad_half_power(u, h, params.s, params.eps, pad_factor)
    return visc, gradH


def _snapshot_report(t: float, u: Field, params: ModelParams,
                     visc_acc: float, gradh_acc: float, fmu0: float) -> EnergyReport:
    h = u.grid.h
    v = u.values
    fmu_int = float(h * np.sum(fmu(v, params.mu, params.m))) if params.mu > 0 else 0.0
    u3m = float(h * np.sum(v ** (3.0 - params.m))) if 1.0 < params.m < 3.0 else 0.0
    resid = 0.0
    if params.mu > 0 and fmu0 > 0:
        resid = abs(fmu_int + visc_acc + gradh_acc - fmu0) / fmu0
    return EnergyReport(t, float(h * np.sum(v)), float(np.max(v)), fmu_int,
                        visc_acc, gradh_acc, resid, u3m)


def run(params: ModelParams, u0: Field, T: float, snapshot_times=None, *,
        backend: str = "auto", pad_factor: int = 4, sigma: float = SIGMA_DEFAULT,
        collect_dissipation: bool = True) -> Trajectory:
    """Evolve u0 to time T, landing exactly on each requested snapshot time.

    The dissipation accumulators are integrated per accepted step (trapezoid
    in time), so the energy diagnostics do not depend on snapshot density.
    """
    if T <= 0:
        raise ValueError("final time T must be positive")
    grid = u0.grid
    if np.any(u0.values < 0):
        raise ValueError("initial datum must be nonnegative")
    if u0.values[0] != 0.0 or u0.values[-1] != 0.0:
        raise ValueError("initial datum must vanish in the boundary cells (Dirichlet truncation)")
    extra = [] if snapshot_times is None else [float(t) for t in snapshot_times]
    times = sorted(set([0.0, T] + extra))
    if times[0] < 0 or times[-1] > T:
        raise ValueError("snapshot times must lie in [0, T]")

    pressure = PressureSolver(grid, params, backend, pad_factor)
    state = SolverState(0.0, u0, params)
    visc_acc = 0.0
    gradh_acc = 0.0
    fmu0 = float(grid.h * np.sum(fmu(u0.values, params.mu, params.m))) if params.mu > 0 else 0.0
    powers = _diag_powers(u0.values, params, grid, pad_factor) if collect_dissipation else (0.0, 0.0)

    snapshots: list[tuple[float, Field]] = []
    reports: list[EnergyReport] = []

    def record(t):
        snapshots.append((t, state.u))
        reports.append(_snapshot_report(t, state.u, params, visc_acc, gradh_acc, fmu0))

    record(0.0)
    next_idx = 1
    while next_idx < len(times):
        target = times[next_idx]
        state_new = step(state, dt_max=target - state.t, sigma=sigma, pressure=pressure)
        if collect_dissipation:
            new_powers = _diag_powers(state_new.u.values, params, grid, pad_factor)
            dt = state_new.t - state.t
            visc_acc += 0.5 * dt * (powers[0] + new_powers[0])
            gradh_acc += 0.5 * dt * (powers[1] + new_powers[1])
            powers = new_powers
        state = state_new
        # a clipped step lands on the target up to one rounding of t + (target - t)
        if target - state.t <= 4.0 * np.finfo(float).eps * max(abs(target), 1.0):
            state.t = target
            record(target)
            next_idx += 1

    return Trajectory(params, snapshots, reports,
                      step_count=state.step_count, rejected_steps=state.rejected_steps,
                      backend=pressure.backend)


@dataclass
class SweepRung:
    delta: float
    mu: float
    eps: float
    R: float
    ok: bool
    trajectory: Trajectory | None = None
    error: str = ""


@dataclass
class SweepReport:
    rungs: list[SweepRung]
    distances: list[float]       # L1 distance of consecutive final-time solutions
    cauchy_decreasing: bool


def _embed(u0: Field, R_new: float) -> Field:
    """Zero-extend a centered datum onto a wider centered grid with the same h."""
    g = u0.grid
    if abs(-g.x_left - R_new) < 1e-12:
        return u0
    extra = (R_new - (-g.x_left)) / g.h
    k = int(round(extra))
    if abs(extra - k) > 1e-9 or k < 0:
        raise ValueError("ladder R values must grow by whole cells at fixed h")
    vals = np.concatenate([np.zeros(k), u0.values, np.zeros(k)])
    return Field(Grid(g.n + 2 * k, g.h, g.x_left - k * g.h, g.topology), vals, u0.kind)


def vanishing_sweep(params: ModelParams, u0: Field, T: float, ladder, *,
                    snapshot_times=None, backend: str = "auto") -> SweepReport:
    """Run the vanishing-regularization ladder and report consecutive L1 gaps.

    The ladder must be ordered with delta, mu, eps nonincreasing and R
    nondecreasing; decreasing consecutive distances is the Cauchy-style
    evidence that the regularized solutions converge.
    """
    ladder = [tuple(map(float, rung)) for rung in ladder]
    for a, b in zip(ladder, ladder[1:]):
        if any(b[i] > a[i] for i in range(3)) or b[3] < a[3]:
            raise ValueError("ladder must have (delta, mu, eps) nonincreasing and R nondecreasing")

    rungs: list[SweepRung] = []
    for delta, mu, eps, R in ladder:
        p = ModelParams(params.m, params.s, delta=delta, mu=mu, eps=eps, R=R)
        try:
            traj = run(p, _embed(u0, R), T, snapshot_times, backend=backend)
            rungs.append(SweepRung(delta, mu, eps, R, True, traj))
        except (StepFailure, ValueError) as exc:
            rungs.append(SweepRung(delta, mu, eps, R, False, None, str(exc)))

    distances = []
    for a, b in zip(rungs, rungs[1:]):
        if not (a.ok and b.ok):
            distances.append(float("nan"))
            continue
        ua = a.trajectory.snapshots[-1][1]
        ub = b.trajectory.snapshots[-1][1]
        na, nb = ua.grid.n, ub.grid.n
        k = (nb - na) // 2
        vb = ub.values[k:k + na] if k > 0 else ub.values
        distances.append(float(ua.grid.h * np.sum(np.abs(ua.values - vb))))
    finite = [d for d in distances if not math.isnan(d)]
    decreasing = all(b < a for a, b in zip(finite, finite[1:])) if len(finite) > 1 else True
    return SweepReport(rungs, distances, decreasing)
