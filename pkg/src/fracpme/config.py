"""TOML run configuration: parsing, overrides, and initial-datum builders."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:               # Python < 3.11
    import tomli as tomllib

from fracpme.field import Field, FieldKind, Grid, ModelParams, Topology, field_from_csv


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc


def _coerce(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if "," in text:
        return [_coerce(t) for t in text.split(",")]
    return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply `section.key=value` pairs onto a parsed config."""
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, value = item.split("=", 1)
        parts = dotted.split(".")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {dotted!r} crosses a non-table value")
        node[parts[-1]] = _coerce(value)
    return cfg


def build_grid(cfg: dict) -> Grid:
    g = cfg.get("grid")
    if not g:
        raise ConfigError("missing [grid] section")
    try:
        n = int(g["n"])
        if "h" in g:
            h = float(g["h"])
            x_left = float(g.get("x_left", -0.5 * n * h))
        elif "half_width" in g:
            h = 2.0 * float(g["half_width"]) / n
            x_left = -float(g["half_width"])
        else:
            raise ConfigError("[grid] needs h (+ optional x_left) or half_width")
        topo = Topology(g.get("topology", "truncated_line"))
        return Grid(n=n, h=h, x_left=x_left, topology=topo)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad [grid] section: {exc}") from exc


def build_params(cfg: dict, grid: Grid | None = None) -> ModelParams:
    mo = cfg.get("model")
    if not mo or "m" not in mo or "s" not in mo:
        raise ConfigError("missing [model] section with m and s")
    reg = cfg.get("regularization", {})
    half_width = 0.5 * grid.n * grid.h if grid is not None else None
    R = float(reg.get("R", half_width if half_width is not None else 1.0))
    if half_width is not None and abs(R - half_width) > 1e-9 * max(R, 1.0):
        raise ConfigError(f"[regularization].R = {R} does not match the grid half-width {half_width}")
    try:
        return ModelParams(m=float(mo["m"]), s=float(mo["s"]),
                           delta=float(reg.get("delta", 0.0)),
                           mu=float(reg.get("mu", 0.0)),
                           eps=float(reg.get("eps", 0.0)), R=R)
    except ValueError as exc:
        raise ConfigError(f"bad model parameters: {exc}") from exc


def _zero_boundary(vals: np.ndarray) -> np.ndarray:
    vals = vals.copy()
    vals[0] = 0.0
    vals[-1] = 0.0
    return vals


def build_initial(cfg: dict, grid: Grid) -> Field:
    """Built-in initial data: box, gaussian, parabola, poisson, barenblatt, csv."""
    ini = cfg.get("initial")
    if not ini or "kind" not in ini:
        raise ConfigError("missing [initial] section with kind")
    kind = ini["kind"]
    x = grid.x
    if kind == "box":
        hw = float(ini.get("half_width", 1.0))
        height = float(ini["height"]) if "height" in ini else float(ini.get("mass", 1.0)) / (2.0 * hw)
        center = float(ini.get("center", 0.0))
        vals = np.where(np.abs(x - center) <= hw, height, 0.0)
    elif kind == "gaussian":
        sigma = float(ini.get("sigma", 1.0))
        amp = float(ini.get("mass", 1.0)) / (sigma * math.sqrt(2.0 * math.pi))
        center = float(ini.get("center", 0.0))
        vals = amp * np.exp(-0.5 * ((x - center) / sigma) ** 2)
    elif kind == "parabola":
        a = float(ini.get("amplitude", 0.5))
        b = float(ini.get("b", 1.0))
        vals = a * np.maximum(b - np.abs(x), 0.0) ** 2
    elif kind == "poisson":
        t = float(ini.get("t", 1.0))
        vals = t / (math.pi * (t * t + x * x))
    elif kind == "barenblatt":
        from fracpme.oracles import BarenblattSpec

        spec = BarenblattSpec(M=float(ini.get("mass", 1.0)), s=float(ini["s"]),
                              R_prof=float(ini.get("R_prof", 1.0)))
        vals = spec.solution(x, float(ini.get("t", 1.0)))
    elif kind == "csv":
        return field_from_csv(grid, Path(ini["path"]), FieldKind.DENSITY)
    else:
        raise ConfigError(f"unknown initial datum kind {kind!r}")
    return Field(grid, _zero_boundary(vals), FieldKind.DENSITY)


def snapshot_times(cfg: dict, T: float) -> list[float]:
    tm = cfg.get("time", {})
    if "snapshot_times" in tm:
        return [float(t) for t in tm["snapshot_times"]]
    count = int(tm.get("snapshots", 11))
    return list(np.linspace(0.0, T, max(count, 2)))


def final_time(cfg: dict) -> float:
    tm = cfg.get("time")
    if not tm or "T" not in tm:
        raise ConfigError("missing [time] section with T")
    return float(tm["T"])


def resolved(cfg: dict, grid: Grid, params: ModelParams) -> dict:
    """Fully resolved copy embedded in every report for reproducibility."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in cfg.items()}
    out.setdefault("grid", {})
    out["grid"].update({"n": grid.n, "h": grid.h, "x_left": grid.x_left,
                        "topology": grid.topology.value})
    out.setdefault("model", {})
    out["model"].update({"m": params.m, "s": params.s, "alpha": params.alpha})
    out.setdefault("regularization", {})
    out["regularization"].update({"delta": params.delta, "mu": params.mu,
                                  "eps": params.eps, "R": params.R})
    return out
