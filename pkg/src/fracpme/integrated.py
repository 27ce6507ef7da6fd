"""Monotone explicit solver for the integrated problem v_t = -|v_x|^{m-1} (-Dl)^a v.

v is the cumulative mass v(x,t) = int_{-inf}^x u; it runs from 0 on the far
left to the total mass M on the far right, which is exactly the constant-tail
model fed to the fractional Laplacian.  Omitting those tails would fabricate
spurious propagation, so they are closed-form terms, never truncated.

The scheme is an independent discretization of the same evolution as the
direct solver (the identity (-Dl)^{1-s} v = -d/dx (-Dl)^{-s} u connects the
two), which is what makes the cross-check meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fracpme.field import Field, FieldKind, Grid, ModelParams, Topology, cumulative, mass
from fracpme.fracops import Tail, frac_laplacian_stiffness, frac_laplacian_values

SIGMA_I = 0.4
KAPPA = 1e-30
MONOTONE_TOL = 1e-14
BOUND_TOL = 1e-14
DT_UNDERFLOW = 1e-14


class IStepFailure(RuntimeError):
    def __init__(self, t: float, msg: str):
        super().__init__(f"t={t}: {msg}")
        self.t = t


@dataclass
class IntegratedState:
    t: float
    v: Field
    M: float
    params: ModelParams
    dt_last: float = 0.0
    step_count: int = 0
    rejected_steps: int = 0


@dataclass
class IntegratedTrajectory:
    params: ModelParams
    M: float
    snapshots: list[tuple[float, Field]]
    step_count: int = 0
    rejected_steps: int = 0

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.snapshots]


def _slope(v: np.ndarray, h: float, M: float) -> np.ndarray:
    # central difference with replicated edge ghosts, clamped at 0: v is
    # nondecreasing, so negative slopes are pure sign noise and would feed the
    # non-Lipschitz power (m-1) < 1.  Replication (not the tail constants)
    # keeps constants exactly stationary: the far-field transition to the tail
    # values happens outside the grid, not inside the edge cell.
    ext = np.concatenate(([v[0]], v, [v[-1]]))
    return np.maximum((ext[2:] - ext[:-2]) / (2.0 * h), 0.0)


def istep(state: IntegratedState, *, dt: float | None = None,
          dt_max: float | None = None, sigma: float = SIGMA_I) -> IntegratedState:
    """One accepted explicit step of the integrated problem.

    Step size is proposed against the quadrature operator's spectral-radius
    bound and the current max slope, then reject/halved until the update
    preserves monotonicity and the bounds [0, M].
    """
    grid = state.v.grid
    if grid.topology is not Topology.TRUNCATED_LINE:
        raise ValueError("the integrated solver runs on truncated-line grids")
    v = state.v.values
    h = grid.h
    M = state.M
    params = state.params
    alpha = params.alpha

    vx = _slope(v, h, M)
    span = max(abs(v.max() - v.min()), 1e-300)
    if np.any(np.diff(v) < -1e-12 * span):
        raise ValueError("istep requires a monotone state")
    lap = frac_laplacian_values(v, h, grid.x_left, alpha, Tail.constant(0.0, M))
    rate = vx ** (params.m - 1.0) * lap

    forced = dt is not None
    if forced:
        dt0 = dt
    else:
        dmax = float(np.max(vx)) ** (params.m - 1.0)
        dt0 = sigma / (dmax * frac_laplacian_stiffness(grid, alpha) + KAPPA)
        if dt_max is not None:
            dt0 = min(dt0, dt_max)
    dt_try = dt0
    rejected = 0
    while True:
        v_new = v - dt_try * rate
        ok = (not np.any(np.diff(v_new) < -MONOTONE_TOL * M)
              and v_new.min() >= -BOUND_TOL * M
              and v_new.max() <= M * (1.0 + BOUND_TOL))
        if ok or forced:
            break
        rejected += 1
        dt_try *= 0.5
        if dt_try < DT_UNDERFLOW * dt0:
            raise IStepFailure(state.t, "dt underflow in the integrated stepper")
    return IntegratedState(state.t + dt_try, Field(grid, v_new, FieldKind.INTEGRATED),
                           M, params, dt_last=dt_try,
                           step_count=state.step_count + 1,
                           rejected_steps=state.rejected_steps + rejected)


def run_integrated(params: ModelParams, v0: Field | None = None, u0: Field | None = None,
                   T: float = 1.0, snapshot_times=None) -> IntegratedTrajectory:
    """Evolve the integrated problem; v0 defaults to the cumulative of u0."""
    if v0 is None:
        if u0 is None:
            raise ValueError("provide v0 or u0")
        v0 = cumulative(u0)
    if v0.kind is not FieldKind.INTEGRATED:
        raise ValueError("v0 must be an integrated field")
    M = float(v0.values[-1])
    extra = [] if snapshot_times is None else [float(t) for t in snapshot_times]
    times = sorted(set([0.0, T] + extra))
    if times[0] < 0 or times[-1] > T:
        raise ValueError("snapshot times must lie in [0, T]")

    state = IntegratedState(0.0, v0, M, params)
    snapshots = [(0.0, v0)]
    next_idx = 1
    while next_idx < len(times):
        target = times[next_idx]
        state = istep(state, dt_max=target - state.t)
        if target - state.t <= 4.0 * np.finfo(float).eps * max(abs(target), 1.0):
            state.t = target
            snapshots.append((target, state.v))
            next_idx += 1
    return IntegratedTrajectory(params, M, snapshots,
                                step_count=state.step_count,
                                rejected_steps=state.rejected_steps)


@dataclass
class CrossCheckReport:
    times: list[float]
    distances: list[float]     # L1 gap between cumulative(u) and v, normalized by M
    max_distance: float
    M: float


def cross_check(u_traj, v_traj: IntegratedTrajectory, times=None) -> CrossCheckReport:
    """Normalized L1 distance between cumulative direct solutions and v."""
    pu = u_traj.params
    pv = v_traj.params
    if (pu.m, pu.s) != (pv.m, pv.s):
        raise ValueError("cross-check requires matching (m, s)")
    gu = u_traj.snapshots[0][1].grid
    gv = v_traj.snapshots[0][1].grid
    if not gu.same_mesh(gv):
        raise ValueError("cross-check requires matching grids")
    ut = {t: f for t, f in u_traj.snapshots}
    vt = {t: f for t, f in v_traj.snapshots}
    if times is None:
        times = sorted(set(ut) & set(vt))
    if not times:
        raise ValueError("no common snapshot times to compare")
    M = v_traj.M
    dists = []
    for t in times:
        if t not in ut or t not in vt:
            raise ValueError(f"no snapshot at t={t} in both trajectories")
        cu = cumulative(ut[t])
        dists.append(float(gu.h * np.sum(np.abs(cu.values - vt[t].values))) / M)
    return CrossCheckReport([float(t) for t in times], dists, max(dists), M)
