"""Quantitative diagnostics: conserved quantities, energy identities, tails.

Everything here is a pure measurement over immutable trajectories; nothing
feeds back into the dynamics.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field

import numpy as np

from fracpme.field import Field, FieldKind, mass

# the general-branch formula is numerically catastrophic within ~1e-8 of the
# removable singularities at m = 2, 3; this window keeps relative error below 1e-6
_BRANCH_WINDOW = 1e-4


def _fmu_general(u, mu: float, m: float):
    a = ((u + mu) ** (3.0 - m) - mu ** (3.0 - m)) / ((2.0 - m) * (3.0 - m))
    return a - mu ** (2.0 - m) * u / (2.0 - m)


def _fmu_m2(u, mu: float):
    return (u + mu) * np.log1p(u / mu) - u


def _fmu_m3(u, mu: float):
    return -np.log1p(u / mu) + u / mu


def fmu(u, mu: float, m: float):
    """Convex energy density F_mu(u); three explicit branches (m != 2,3; m=2; m=3).

    F_mu(0) = 0, F_mu'' = (u+mu)^{1-m} > 0.  Accepts scalars or arrays.
    """
    if mu <= 0:
        raise ValueError("fmu requires mu > 0 (the branch formulas degenerate at mu = 0)")
    if m <= 1:
        raise ValueError("fmu requires m > 1")
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0):
        raise ValueError("fmu expects nonnegative densities")
    if abs(m - 2.0) < _BRANCH_WINDOW:
        out = _fmu_m2(u, mu)
    elif abs(m - 3.0) < _BRANCH_WINDOW:
        out = _fmu_m3(u, mu)
    else:
        out = _fmu_general(u, mu, m)
    return out if out.ndim else float(out)


@dataclass
class EnergyReport:
    """Per-snapshot scalar diagnostics; the *_accum fields are time integrals."""

    t: float
    mass: float
    linf: float
    fmu_integral: float
    visc_dissip_accum: float
    gradH_dissip_accum: float
    identity_residual: float
    u3m_integral: float

    def as_row(self) -> list[float]:
        return [self.t, self.mass, self.linf, self.fmu_integral,
                self.visc_dissip_accum, self.gradH_dissip_accum,
                self.identity_residual, self.u3m_integral]


DIAGNOSTICS_HEADER = "t,mass,linf,fmu,visc_accum,gradH_accum,residual,u3m"


def energy_identity(traj) -> list[EnergyReport]:
    """Residuals of the regularized energy identity along a trajectory.

    int F_mu(u(t)) + delta iint |grad u|^2 / (u+mu)^{m-1} + iint |grad H_eps u|^2
    stays equal to int F_mu(u_0); the solver accumulates both dissipation
    integrals stepwise, so this just assembles the balance per snapshot.
    """
    params = traj.params
    if params.mu <= 0:
        raise ValueError("energy identity diagnostics require a regularized run having mu > 0")
    if not traj.diagnostics:
        raise ValueError("trajectory carries no diagnostics records")
    h = traj.snapshots[0][1].grid.h
    fmu0 = float(h * np.sum(fmu(traj.snapshots[0][1].values, params.mu, params.m)))
    out = []
    for (t, u), rep in zip(traj.snapshots, traj.diagnostics):
        fmu_t = float(h * np.sum(fmu(u.values, params.mu, params.m)))
        lhs = fmu_t + rep.visc_dissip_accum + rep.gradH_dissip_accum
        resid = abs(lhs - fmu0) / fmu0 if fmu0 > 0 else 0.0
        out.append(EnergyReport(t, rep.mass, rep.linf, fmu_t,
                                rep.visc_dissip_accum, rep.gradH_dissip_accum,
                                resid, rep.u3m_integral))
    return out


@dataclass
class Dissipation3mReport:
    m: float
    C: float
    times: list[float]
    u3m: list[float]
    dissipation: list[float]     # C * accumulated |grad H u|^2 integral
    residuals: list[float]
    monotone: bool


def dissipation_3m(traj, m: float) -> Dissipation3mReport:
    """Decay of int u^{3-m} against C iint |grad H u|^2, C = (2-m)(3-m), m in (1,2)."""
    if not 1.0 < m < 2.0:
        raise ValueError("the (3-m)-energy identity holds with positive constant only for m in (1,2)")
    C = (2.0 - m) * (3.0 - m)
    h = traj.snapshots[0][1].grid.h
    times, u3m, diss, resid = [], [], [], []
    u3m0 = float(h * np.sum(traj.snapshots[0][1].values ** (3.0 - m)))
    for (t, u), rep in zip(traj.snapshots, traj.diagnostics):
        times.append(t)
        u3m.append(float(h * np.sum(u.values ** (3.0 - m))))
        diss.append(C * rep.gradH_dissip_accum)
        resid.append(abs(diss[-1] + u3m[-1] - u3m0) / u3m0 if u3m0 > 0 else 0.0)
    tol = 1e-10 * max(u3m0, 1e-300)
    monotone = all(b <= a + tol for a, b in zip(u3m, u3m[1:]))
    return Dissipation3mReport(m, C, times, u3m, diss, resid, monotone)


@dataclass
class TailFit:
    exp_rate: float
    exp_quality: float
    alg_exponent: float
    alg_quality: float
    flagged: str                  # "exponential" | "algebraic"
    cells_used: int
    window: tuple[float, float]


def tail_metrics(u: Field, window: tuple[float, float]) -> TailFit:
    """Least-squares tail fits log u ~ -a|x| (exponential) and log u ~ p log|x|.

    The window (r_lo, r_hi) is in |x|; cells with u <= 1e-300 are unusable and
    the outermost 10 cells are always excluded.  The better-quality (lower
    RMS residual) fit is flagged.
    """
    r_lo, r_hi = window
    x = u.grid.x
    v = u.values
    edge = 10
    usable = np.zeros(u.grid.n, dtype=bool)
    usable[edge:-edge] = True
    usable &= (np.abs(x) >= r_lo) & (np.abs(x) <= r_hi) & (v > 1e-30)
    if np.count_nonzero(usable) < 8:
        raise ValueError(f"tail window contains {np.count_nonzero(usable)} usable cells; need at least 8")
    ax = np.abs(x[usable])
    logu = np.log(v[usable])

    def _fit(abscissa):
        A = np.column_stack([abscissa, np.ones_like(abscissa)])
        coef, *_ = np.linalg.lstsq(A, logu, rcond=None)
        rms = float(np.sqrt(np.mean((A @ coef - logu) ** 2)))
        return float(coef[0]), rms

    slope_exp, q_exp = _fit(ax)
    slope_alg, q_alg = _fit(np.log(ax))
    flagged = "exponential" if q_exp <= q_alg else "algebraic"
    return TailFit(-slope_exp, q_exp, slope_alg, q_alg, flagged,
                   int(np.count_nonzero(usable)), (float(r_lo), float(r_hi)))


class Propagation(enum.Enum):
    FINITE = "finite_evidence"
    INFINITE = "infinite_evidence"
    INCONCLUSIVE = "inconclusive"


@dataclass
class PropagationReport:
    classification: Propagation
    theta: float
    r0: float
    c_lin: float
    support_radius_series: list[tuple[float, float]]
    mass_beyond: list[tuple[float, float, float]]   # (t, radius, mass outside)
    tail_fit: TailFit | None
    notes: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "classification": self.classification.value,
            "theta": self.theta,
            "r0": self.r0,
            "c_lin": self.c_lin,
            "support_radius_series": [list(p) for p in self.support_radius_series],
            "mass_beyond": [list(p) for p in self.mass_beyond],
            "tail_fit": None if self.tail_fit is None else vars(self.tail_fit).copy(),
            "notes": list(self.notes),
        }
        if d["tail_fit"] is not None:
            d["tail_fit"]["window"] = list(d["tail_fit"]["window"])
        return d


def support_radius(u: Field, theta: float) -> float:
    above = np.abs(u.grid.x)[u.values > theta]
    return float(above.max()) if above.size else 0.0


def mass_beyond(u: Field, radius: float) -> float:
    outside = np.abs(u.grid.x) > radius
    return float(u.grid.h * np.sum(u.values[outside]))


def check_propagation(traj, theta: float | None = None, *, theta_rel: float = 1e-10,
                      mult_finite: float = 10.0, mult_infinite: float = 1e3) -> PropagationReport:
    """Classify a run as finite/infinite-propagation evidence.

    infinite_evidence: mass beyond 2 r0 exceeds mult_infinite * theta * |domain|
    at some snapshot AND the tail fit there flags an algebraic profile.
    finite_evidence: the support radius stays below the tightest linear
    envelope r0 + C_lin t AND mass beyond 2 (r0 + C_lin T) stays under
    mult_finite * theta * |domain| throughout.  The infinite test runs first:
    for m < 2 the threshold front also fits some linear envelope, so the
    finite test alone cannot discriminate.  The multipliers are artifact
    conventions separating quadrature noise from genuine transport.
    """
    u0 = traj.snapshots[0][1]
    grid = u0.grid
    max0 = float(np.max(u0.values))
    if max0 <= 0:
        raise ValueError("propagation classification needs nonzero initial data")
    th = float(theta) if theta is not None else theta_rel * max0
    r0 = support_radius(u0, th)
    if r0 <= 0:
        raise ValueError("initial datum has empty support at the chosen threshold")
    edge = max(abs(grid.x_left), abs(grid.x_right)) - 5.0 * grid.h
    L = grid.length

    radii = []
    mb2r0 = []
    notes = []
    for t, u in traj.snapshots:
        r = support_radius(u, th)
        if r >= edge:
            raise ValueError(f"support touches the domain boundary at t={t}; run invalid for classification")
        radii.append((t, r))
        mb2r0.append((t, 2.0 * r0, mass_beyond(u, 2.0 * r0)))

    slopes = [(r - r0) / t for t, r in radii if t > 0]
    c_lin = max(max(slopes), 0.0) if slopes else 0.0

    r_cap = max(abs(grid.x_left), abs(grid.x_right)) - 10.0 * grid.h

    def _tail_fit(u):
        # fit between the bulk shoulder (u below 1% of the max) and the
        # advancing numerical front edge (u down at the threshold scale),
        # neither of which follows the genuine tail profile
        ax = np.abs(u.grid.x)
        v = u.values
        umax = float(np.max(v))
        sel = (ax > 2.0 * r0) & (v > 0)
        if not np.any(sel):
            return None
        lo_cells = sel & (v < 1e-2 * umax)
        r_lo = float(np.min(ax[lo_cells])) if np.any(lo_cells) else 2.0 * r0
        hi_cells = sel & (v > 1e3 * th)
        r_hi = float(np.max(ax[hi_cells])) if np.any(hi_cells) else 0.0
        try:
            return tail_metrics(u, (max(r_lo, 2.0 * r0), min(r_hi, r_cap)))
        except ValueError:
            return None

    # infinite branch: any snapshot with both genuine mass transport beyond
    # 2 r0 and an algebraic tail profile
    bar_inf = mult_infinite * th * L
    hit_mass = False
    for (t, u), (_, _, mb) in zip(traj.snapshots, mb2r0):
        if t > 0 and mb > bar_inf:
            hit_mass = True
            fit = _tail_fit(u)
            if fit is not None and fit.flagged == "algebraic":
                return PropagationReport(Propagation.INFINITE, th, r0, c_lin,
                                         radii, mb2r0, fit, notes)
    if hit_mass:
        notes.append("mass beyond 2*r0 exceeded the infinite-evidence bar but no snapshot showed an algebraic tail")

    # finite branch
    T = radii[-1][0]
    r_far = 2.0 * (r0 + c_lin * T)
    fit = _tail_fit(traj.snapshots[-1][1])
    if r_far >= edge:
        notes.append("linear envelope reaches the boundary; finite test not applicable")
        return PropagationReport(Propagation.INCONCLUSIVE, th, r0, c_lin, radii, mb2r0, fit, notes)
    bar_fin = mult_finite * th * L
    envelope_ok = all(r <= r0 + c_lin * t + 1e-12 for t, r in radii)
    mass_ok = all(mass_beyond(u, r_far) < bar_fin for _, u in traj.snapshots)
    if envelope_ok and mass_ok:
        return PropagationReport(Propagation.FINITE, th, r0, c_lin, radii, mb2r0, fit, notes)
    notes.append("neither evidence rule fired")
    return PropagationReport(Propagation.INCONCLUSIVE, th, r0, c_lin, radii, mb2r0, fit, notes)
