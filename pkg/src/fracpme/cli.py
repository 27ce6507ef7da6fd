"""fracpme command line: runs, sweeps, barrier checks, oracles, phase diagram.

Every command reads a TOML config, writes CSV/JSON (and SVG where noted)
artifacts atomically under --out, and embeds the fully resolved config in its
report.  No randomness anywhere: identical configs give byte-identical CSV
and JSON.

Exit codes: 0 success, 2 config/usage error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from fracpme import barriers, config as cfgmod, diagnostics, integrated, oracles, reports, solver
from fracpme.config import ConfigError
from fracpme.field import Field, FieldKind, Grid, ModelParams, cumulative, field_csv_text, mass
from fracpme.integrated import IStepFailure
from fracpme.solver import StepFailure


def _write_trajectory(traj, out: Path, resolved_cfg: dict, prefix: str = "snapshot") -> dict:
    files = []
    for i, (t, f) in enumerate(traj.snapshots):
        name = f"{prefix}_{i:04d}.csv"
        reports.atomic_write_text(out / name, field_csv_text(f))
        files.append(name)
    reports.write_csv(out / "diagnostics.csv", diagnostics.DIAGNOSTICS_HEADER,
                      [r.as_row() for r in traj.diagnostics])
    manifest = {
        "times": traj.times,
        "files": files,
        "diagnostics": "diagnostics.csv",
        "step_count": traj.step_count,
        "rejected_steps": traj.rejected_steps,
        "pressure_backend": getattr(traj, "backend", ""),
        "config": resolved_cfg,
    }
    reports.write_json(out / "manifest.json", manifest)
    return manifest


def cmd_run(cfg: dict, out: Path, jobs: int) -> int:
    grid = cfgmod.build_grid(cfg)
    params = cfgmod.build_params(cfg, grid)
    u0 = cfgmod.build_initial(cfg, grid)
    T = cfgmod.final_time(cfg)
    snaps = cfgmod.snapshot_times(cfg, T)
    sol = cfg.get("solver", {})
    traj = solver.run(params, u0, T, snaps, backend=sol.get("pressure_backend", "auto"),
                      pad_factor=int(sol.get("pad_factor", 4)),
                      sigma=float(sol.get("sigma", solver.SIGMA_DEFAULT)))
    _write_trajectory(traj, out, cfgmod.resolved(cfg, grid, params))
    return 0


def cmd_integrated(cfg: dict, out: Path, jobs: int) -> int:
    grid = cfgmod.build_grid(cfg)
    params = cfgmod.build_params(cfg, grid)
    u0 = cfgmod.build_initial(cfg, grid)
    T = cfgmod.final_time(cfg)
    snaps = cfgmod.snapshot_times(cfg, T)
    vtraj = integrated.run_integrated(params, u0=u0, T=T, snapshot_times=snaps)
    files = []
    for i, (t, f) in enumerate(vtraj.snapshots):
        name = f"integrated_{i:04d}.csv"
        reports.atomic_write_text(out / name, field_csv_text(f))
        files.append(name)
    reports.write_json(out / "manifest.json", {
        "times": vtraj.times, "files": files, "M": vtraj.M,
        "step_count": vtraj.step_count, "rejected_steps": vtraj.rejected_steps,
        "config": cfgmod.resolved(cfg, grid, params),
    })
    return 0


def cmd_cross_check(cfg: dict, out: Path, jobs: int) -> int:
    grid = cfgmod.build_grid(cfg)
    params = cfgmod.build_params(cfg, grid)
    u0 = cfgmod.build_initial(cfg, grid)
    T = cfgmod.final_time(cfg)
    snaps = cfgmod.snapshot_times(cfg, T)
    traj = solver.run(params, u0, T, snaps)
    vtraj = integrated.run_integrated(params, u0=u0, T=T, snapshot_times=snaps)
    rep = integrated.cross_check(traj, vtraj)
    reports.write_json(out / "cross_check.json", {
        "times": rep.times, "distances": rep.distances,
        "max_distance": rep.max_distance, "M": rep.M,
        "config": cfgmod.resolved(cfg, grid, params),
    })
    return 0


def cmd_sweep(cfg: dict, out: Path, jobs: int) -> int:
    grid = cfgmod.build_grid(cfg)
    params = cfgmod.build_params(cfg, grid)
    u0 = cfgmod.build_initial(cfg, grid)
    T = cfgmod.final_time(cfg)
    sw = cfg.get("sweep")
    if not sw or "ladder" not in sw:
        raise ConfigError("sweep needs [sweep] with a ladder of [delta, mu, eps, R] rows")
    rep = solver.vanishing_sweep(params, u0, T, sw["ladder"],
                                 snapshot_times=cfgmod.snapshot_times(cfg, T))
    reports.write_csv(out / "cauchy_distances.csv", "rung,delta,mu,eps,R,ok,l1_distance_to_next",
                      [[i, r.delta, r.mu, r.eps, r.R, int(r.ok),
                        rep.distances[i] if i < len(rep.distances) else float("nan")]
                       for i, r in enumerate(rep.rungs)])
    reports.write_json(out / "sweep.json", {
        "rungs": [{"delta": r.delta, "mu": r.mu, "eps": r.eps, "R": r.R,
                   "ok": r.ok, "error": r.error} for r in rep.rungs],
        "distances": rep.distances,
        "cauchy_decreasing": rep.cauchy_decreasing,
        "config": cfgmod.resolved(cfg, grid, params),
    })
    return 0


def cmd_barrier_upper(cfg: dict, out: Path, jobs: int) -> int:
    grid = cfgmod.build_grid(cfg)
    params = cfgmod.build_params(cfg, grid)
    u0 = cfgmod.build_initial(cfg, grid)
    bu = cfg.get("barrier_upper", {})
    a = float(bu.get("a", 1.0))
    b = float(bu.get("b", 1.0))
    T = cfgmod.final_time(cfg)
    rep = barriers.find_speed(params, u0, a, b, T, c_max=float(bu.get("c_max", 1e3)))
    reports.write_json(out / "barrier_upper.json", {
        "barrier_params": {"a": a, "b": b, "C_star": rep.c_star, "C_max": rep.c_max},
        "found": rep.found,
        "margin_curve": [list(p) for p in rep.margin_curve],
        "config": cfgmod.resolved(cfg, grid, params),
    })
    return 0


def cmd_barrier_lower(cfg: dict, out: Path, jobs: int) -> int:
    grid = cfgmod.build_grid(cfg)
    params = cfgmod.build_params(cfg, grid)
    barriers.gamma_exponent(params)   # rejects m >= 2 up front
    u0 = cfgmod.build_initial(cfg, grid)
    bl = cfg.get("barrier_lower", {})
    t1 = float(bl.get("t1", 0.5))
    x1 = float(bl.get("x1", 10.0))
    snaps = sorted(set(np.linspace(0.0, t1, int(bl.get("snapshots", 6)))))
    vtraj = integrated.run_integrated(params, u0=u0, T=t1, snapshot_times=snaps)
    rep = barriers.positivity_probe(x1, t1, params, vtraj)
    body = {
        "found": rep.found,
        "x1": rep.x1, "t1": rep.t1,
        "lower_bound": rep.lower_bound,
        "candidates_tried": rep.tried,
        "config": cfgmod.resolved(cfg, grid, params),
    }
    if rep.found:
        bar = rep.barrier
        body["barrier_params"] = {"tau": bar.tau, "xi": bar.xi, "eps": bar.eps_level,
                                  "b_exp": bar.b_exp, "gamma": bar.gamma,
                                  "G": asdict(bar.G)}
        body["lattice"] = {"x_window": list(rep.subsolution.x_window),
                           "t_window": list(rep.subsolution.t_window),
                           "nx": rep.subsolution.nx, "nt": rep.subsolution.nt}
        body["residual_max"] = rep.subsolution.residual_max
        body["margin_min"] = min(rep.initial_slack, rep.lateral_slack)
        body["witness_point"] = [rep.x1, rep.t1, rep.lower_bound]
    else:
        body["best_failure"] = rep.best_failure
    reports.write_json(out / "barrier_lower.json", body)
    return 0


def cmd_oracle(cfg: dict, out: Path, jobs: int) -> int:
    orc = cfg.get("oracle", {})
    which = orc.get("which", "poisson")
    grid = cfgmod.build_grid(cfg)
    if which == "poisson":
        params = cfgmod.build_params(cfg, grid)
        t0 = float(orc.get("t0", 1.0))
        t1 = float(orc.get("t1", 2.0))
        u0 = oracles.poisson_kernel(t0, grid)
        vals = u0.values.copy()
        vals[0] = vals[-1] = 0.0
        traj = solver.run(params, Field(grid, vals, FieldKind.DENSITY), t1 - t0,
                          cfgmod.snapshot_times(cfg, t1 - t0))
        ref = oracles.poisson_kernel(t1, grid)
        err = float(grid.h * np.sum(np.abs(traj.snapshots[-1][1].values - ref.values))
                    / (grid.h * np.sum(ref.values)))
        body = {"oracle": "poisson", "params": {"t0": t0, "t1": t1, "m": params.m, "s": params.s},
                "error_l1_rel": err, "config": cfgmod.resolved(cfg, grid, params)}
    elif which == "barenblatt":
        s = float(orc.get("s", 0.75))
        rep = oracles.self_similar_check(float(orc.get("mass", 1.0)), s, grid,
                                         float(orc.get("t0", 1.0)), float(orc.get("t1", 2.0)))
        params = ModelParams(m=rep.m, s=s, R=-grid.x_left)
        body = {"oracle": "barenblatt",
                "params": {"m": rep.m, "s": rep.s, "t0": rep.t0, "t1": rep.t1},
                "error_l1_rel": rep.error_l1_rel,
                "calibrated_R": rep.calibrated_R,
                "beta_used": rep.beta_used,
                "config": cfgmod.resolved(cfg, grid, params)}
    else:
        raise ConfigError(f"unknown oracle {which!r}")
    reports.write_json(out / "oracle.json", body)
    return 0


def _phase_point(args: tuple) -> dict:
    m, s, cfg = args
    grid = cfgmod.build_grid(cfg)
    params = ModelParams(m=m, s=s, R=0.5 * grid.n * grid.h)
    u0 = cfgmod.build_initial(cfg, grid)
    T = cfgmod.final_time(cfg)
    try:
        traj = solver.run(params, u0, T, cfgmod.snapshot_times(cfg, T))
        rep = diagnostics.check_propagation(traj)
        fit = rep.tail_fit
        return {"m": m, "s": s, "classification": rep.classification.value,
                "support_speed_fit": rep.c_lin,
                "tail_exponent": None if fit is None else fit.alg_exponent,
                "tail_flagged": None if fit is None else fit.flagged}
    except (StepFailure, ValueError) as exc:
        return {"m": m, "s": s, "classification": "inconclusive",
                "support_speed_fit": float("nan"), "tail_exponent": None,
                "tail_flagged": None, "error": str(exc)}


def cmd_phase_diagram(cfg: dict, out: Path, jobs: int) -> int:
    pd = cfg.get("phase_diagram", {})
    m_list = [float(m) for m in pd.get("m_list", [])]
    s_list = [float(s) for s in pd.get("s_list", [0.25])]
    if not m_list:
        raise ConfigError("phase-diagram needs a nonempty [phase_diagram].m_list")
    tasks = [(m, s, cfg) for s in s_list for m in m_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_phase_point, tasks))
    else:
        points = [_phase_point(t) for t in tasks]
    grid = cfgmod.build_grid(cfg)
    reports.write_csv(out / "phase_diagram.csv",
                      "m,s,classification,support_speed_fit,tail_exponent",
                      [[p["m"], p["s"], p["classification"], p["support_speed_fit"],
                        float("nan") if p["tail_exponent"] is None else p["tail_exponent"]]
                       for p in points])
    reports.write_json(out / "phase_diagram.json", {
        "points": points,
        "config": cfgmod.resolved(cfg, grid, cfgmod.build_params(cfg, grid)
                                  if "model" in cfg else ModelParams(m_list[0], s_list[0])),
    })
    reports.atomic_write_text(out / "phase_diagram.svg", reports.phase_diagram_svg(points))
    return 0


_COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "barrier-upper": cmd_barrier_upper,
    "barrier-lower": cmd_barrier_lower,
    "oracle": cmd_oracle,
    "phase-diagram": cmd_phase_diagram,
    "integrated": cmd_integrated,
    "cross-check": cmd_cross_check,
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracpme",
                                 description="1D porous medium equation with fractional pressure: "
                                             "runs, sweeps, barriers, oracles, phase diagram")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel simulations bound")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       dest="overrides", help="config override section.key=value")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = cfgmod.load_config(args.config)
        cfgmod.apply_overrides(cfg, args.overrides)
        rc = _COMMANDS[args.command](cfg, out, args.jobs)
        return rc
    except ConfigError as exc:
        _emit_error(out, "config", str(exc))
        return 2
    except (StepFailure, IStepFailure, ValueError) as exc:
        _emit_error(out, "numerical", str(exc))
        return 3
    except OSError as exc:
        _emit_error(out, "io", str(exc))
        return 4


def _emit_error(out: Path, kind: str, message: str) -> None:
    print(f"fracpme error ({kind}): {message}", file=sys.stderr)
    try:
        reports.write_json(out / "error.json", {"error": kind, "message": message})
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
