"""Run configuration: YAML schema, strict validation, and AUTO resolution.

A config is a plain mapping with blocks geometry / drive / solver / outputs
plus top-level gamma_mhz and initial, and optional disorder / scan blocks.
Unknown keys are rejected and every validation error names the field.

Values that default from physics may be given as the string "auto":
  drive.delta0_mhz     -> V_nn for chains, 1.125 * V_nn for square lattices
  drive.amplitude_mhz  -> beta^2 * t0 / (8 pi)   (needs drive.beta_mhz)
  solver.dt_us         -> t0/20000 (sweep) or step_duration/5000 (Rabi)
  outputs.stride       -> ~100 samples per drive step (always divides a step)
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .drive import (
    RabiSchedule,
    RapSchedule,
    Schedule,
    amplitude_from_beta,
    assign_groups,
    group_code,
    group_name,
)
from .errors import ConfigError
from .lattice import Cutoff, DisorderSpec, Geometry, build_chain, build_square


def _require(d: dict, key: str, path: str):
    if key not in d or d[key] is None:
        raise ConfigError(f"{path}.{key} is required")
    return d[key]


def _check_keys(d: dict, allowed: set[str], path: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{path} must be a mapping")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown key {path}.{k}")


def _number(v, path: str, *, positive=False, nonneg=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path} must be a number")
    v = float(v)
    if positive and v <= 0:
        raise ConfigError(f"{path} must be > 0")
    if nonneg and v < 0:
        raise ConfigError(f"{path} must be >= 0")
    return v


def _integer(v, path: str, *, minimum=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path} must be an integer")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path} must be >= {minimum}")
    return v


def _auto_or_number(v, path: str, **kw):
    if isinstance(v, str):
        if v.lower() != "auto":
            raise ConfigError(f"{path} must be a number or 'auto'")
        return "auto"
    return _number(v, path, **kw)


@dataclass
class RunConfig:
    """Validated but unresolved run configuration (AUTO markers preserved)."""

    raw: dict

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        cfg = RunConfig(raw=copy.deepcopy(d))
        cfg.validate()
        return cfg

    @staticmethod
    def from_yaml(text: str) -> "RunConfig":
        try:
            d = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"config is not valid YAML: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a YAML mapping")
        return RunConfig.from_dict(d)

    @staticmethod
    def from_file(path: str | Path) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        return RunConfig.from_yaml(p.read_text(encoding="utf-8"))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=False)

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        d = self.raw
        _check_keys(
            d,
            {"geometry", "drive", "gamma_mhz", "initial", "disorder", "solver",
             "outputs", "scan"},
            "config",
        )
        geo = _require(d, "geometry", "config")
        _check_keys(
            geo,
            {"kind", "n", "width", "height", "spacing_um", "v_nn_mhz", "c6_mhz_um6",
             "cutoff", "cutoff_radius_um"},
            "geometry",
        )
        kind = _require(geo, "kind", "geometry")
        if kind not in ("chain", "square"):
            raise ConfigError("geometry.kind must be 'chain' or 'square'")
        _number(_require(geo, "spacing_um", "geometry"), "geometry.spacing_um", positive=True)
        has_v = geo.get("v_nn_mhz") is not None
        has_c6 = geo.get("c6_mhz_um6") is not None
        if has_v == has_c6:
            raise ConfigError("geometry: give exactly one of v_nn_mhz or c6_mhz_um6")
        if has_v:
            _number(geo["v_nn_mhz"], "geometry.v_nn_mhz", positive=True)
        else:
            _number(geo["c6_mhz_um6"], "geometry.c6_mhz_um6", positive=True)
        if kind == "chain":
            _integer(_require(geo, "n", "geometry"), "geometry.n", minimum=1)
            if geo.get("width") is not None or geo.get("height") is not None:
                raise ConfigError("geometry.width/height only apply to kind: square")
            cut = geo.get("cutoff", "nn_only")
            if cut not in ("nn_only", "nn_plus_nnn", "radius"):
                raise ConfigError(
                    "geometry.cutoff must be one of nn_only, nn_plus_nnn, radius"
                )
            if cut == "radius":
                _number(
                    _require(geo, "cutoff_radius_um", "geometry"),
                    "geometry.cutoff_radius_um",
                    positive=True,
                )
            elif geo.get("cutoff_radius_um") is not None:
                raise ConfigError("geometry.cutoff_radius_um only applies to cutoff: radius")
        else:
            _integer(_require(geo, "width", "geometry"), "geometry.width", minimum=1)
            _integer(_require(geo, "height", "geometry"), "geometry.height", minimum=1)
            if geo.get("n") is not None:
                raise ConfigError("geometry.n only applies to kind: chain")
            if geo.get("cutoff", "nn_plus_nnn") != "nn_plus_nnn":
                raise ConfigError(
                    "geometry.cutoff: square lattices always use nn_plus_nnn"
                )
            if geo.get("cutoff_radius_um") is not None:
                raise ConfigError("geometry.cutoff_radius_um only applies to chains")

        drv = _require(d, "drive", "config")
        _check_keys(
            drv,
            {"kind", "omega0_mhz", "t0_us", "delta0_mhz", "amplitude_mhz", "beta_mhz",
             "n_steps", "first_driven_group", "d_delta0_mhz", "d_omega0_mhz"},
            "drive",
        )
        dkind = _require(drv, "kind", "drive")
        if dkind not in ("rap", "rabi"):
            raise ConfigError("drive.kind must be 'rap' or 'rabi'")
        _number(_require(drv, "omega0_mhz", "drive"), "drive.omega0_mhz", positive=True)
        _integer(_require(drv, "n_steps", "drive"), "drive.n_steps", minimum=1)
        _auto_or_number(drv.get("delta0_mhz", "auto"), "drive.delta0_mhz")
        if dkind == "rap":
            _number(_require(drv, "t0_us", "drive"), "drive.t0_us", positive=True)
            amp = _auto_or_number(drv.get("amplitude_mhz", "auto"), "drive.amplitude_mhz", nonneg=True)
            if amp == "auto" and drv.get("beta_mhz") is None:
                raise ConfigError("drive.beta_mhz is required when amplitude_mhz is auto")
            if drv.get("beta_mhz") is not None:
                _number(drv["beta_mhz"], "drive.beta_mhz", positive=True)
        else:
            for k in ("t0_us", "amplitude_mhz", "beta_mhz"):
                if drv.get(k) is not None:
                    raise ConfigError(f"drive.{k} only applies to kind: rap")
        if drv.get("first_driven_group", "A") not in ("A", "B"):
            raise ConfigError("drive.first_driven_group must be 'A' or 'B'")
        _number(drv.get("d_delta0_mhz", 0.0), "drive.d_delta0_mhz")
        _number(drv.get("d_omega0_mhz", 0.0), "drive.d_omega0_mhz")

        _number(d.get("gamma_mhz", 0.0), "gamma_mhz", nonneg=True)

        init = _require(d, "initial", "config")
        if not isinstance(init, str) or (
            init not in ("vacuum", "center") and any(ch not in "01" for ch in init)
        ):
            raise ConfigError(
                "initial must be a 0/1 bitstring, 'vacuum', or 'center'"
            )

        dis = d.get("disorder")
        if dis is not None:
            _check_keys(dis, {"sigma_um", "axes", "realizations", "seed"}, "disorder")
            _number(_require(dis, "sigma_um", "disorder"), "disorder.sigma_um", nonneg=True)
            _integer(_require(dis, "realizations", "disorder"), "disorder.realizations", minimum=1)
            if dis.get("axes") is not None and dis["axes"] not in (1, 2):
                raise ConfigError("disorder.axes must be 1 or 2")
            if dis.get("seed") is not None:
                _integer(dis["seed"], "disorder.seed")

        sol = _require(d, "solver", "config")
        _check_keys(
            sol,
            {"method", "dt_us", "trajectories", "seed", "record_jumps"},
            "solver",
        )
        method = _require(sol, "method", "solver")
        if method not in ("full_me", "mf_qmc", "mf_me"):
            raise ConfigError("solver.method must be full_me, mf_qmc, or mf_me")
        _auto_or_number(sol.get("dt_us", "auto"), "solver.dt_us", positive=True)
        if sol.get("trajectories") is not None:
            _integer(sol["trajectories"], "solver.trajectories", minimum=1)
        if sol.get("seed") is not None:
            _integer(sol["seed"], "solver.seed")
        if sol.get("record_jumps") is not None and not isinstance(sol["record_jumps"], bool):
            raise ConfigError("solver.record_jumps must be a boolean")
        if dis is not None and method != "full_me":
            raise ConfigError(
                "disorder requires solver.method full_me (mean-field solvers do not "
                "average over placements)"
            )

        out = d.get("outputs", {})
        _check_keys(out, {"directory", "stride"}, "outputs")
        if out.get("directory") is not None and not isinstance(out["directory"], str):
            raise ConfigError("outputs.directory must be a string")
        if out.get("stride") is not None:
            s = out["stride"]
            if isinstance(s, str):
                if s.lower() != "auto":
                    raise ConfigError("outputs.stride must be an integer or 'auto'")
            else:
                _integer(s, "outputs.stride", minimum=1)

        scan = d.get("scan")
        if scan is not None:
            _check_keys(scan, {"d_delta_frac", "d_omega_frac"}, "scan")
            for key in ("d_delta_frac", "d_omega_frac"):
                grid = scan.get(key)
                if grid is None:
                    continue
                if (
                    not isinstance(grid, list)
                    or len(grid) != 3
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in grid)
                    or int(grid[2]) != grid[2]
                    or int(grid[2]) < 1
                ):
                    raise ConfigError(f"scan.{key} must be [min, max, num_points]")


@dataclass
class Resolved:
    """A RunConfig with all AUTO values bound and objects constructed."""

    geometry: Geometry
    schedule: Schedule
    gamma: float
    initial_bits: str
    disorder: DisorderSpec | None
    method: str
    dt: float
    stride: int
    trajectories: int
    seed: int
    record_jumps: bool
    out_dir: str
    scan_dd: np.ndarray
    scan_do: np.ndarray
    v_nn: float
    resolved: dict = field(default_factory=dict)


def resolved_config_dict(cfg: RunConfig, r: Resolved) -> dict:
    """A complete, loadable config echoing `cfg` with every AUTO field bound.

    Running this dict again must reproduce the run byte-for-byte, so all
    derived choices (detuning centre, sweep amplitude, dt, stride, seeds,
    initial bits) are written out as literals.
    """
    d = cfg.to_dict()
    drv = d["drive"]
    drv["delta0_mhz"] = float(r.schedule.delta0)
    if drv["kind"] == "rap":
        drv["amplitude_mhz"] = float(r.schedule.amplitude)
    sol = d["solver"]
    sol["dt_us"] = float(r.dt)
    sol["seed"] = int(r.seed)
    if r.method != "full_me":
        sol["trajectories"] = int(r.trajectories)
    d["initial"] = r.initial_bits
    if d.get("disorder") is not None:
        d["disorder"]["seed"] = int(r.disorder.base_seed)
        d["disorder"]["axes"] = int(r.disorder.axes)
    out = d.setdefault("outputs", {})
    out["directory"] = r.out_dir
    out["stride"] = int(r.stride)
    return d


def _auto_stride(schedule: Schedule, dt: float, target_per_step: int = 100) -> int:
    sps = int(round(schedule.step_duration / dt))
    want = max(1, sps // target_per_step)
    s = want
    while sps % s != 0:
        s -= 1
    return s


def _center_site(g: Geometry) -> int:
    if g.dimension == 1:
        return g.n_sites // 2
    h, w = g.shape
    return (h // 2) * w + (w // 2)


def resolve(
    cfg: RunConfig,
    *,
    seed_override: int | None = None,
    dt_override: float | None = None,
    out_override: str | None = None,
) -> Resolved:
    d = cfg.raw
    geo = d["geometry"]
    spacing = float(geo["spacing_um"])
    if geo.get("v_nn_mhz") is not None:
        v_nn = float(geo["v_nn_mhz"])
        c6 = None
    else:
        c6 = float(geo["c6_mhz_um6"])
        v_nn = c6 / spacing**6
    if geo["kind"] == "chain":
        g = build_chain(
            int(geo["n"]),
            spacing,
            c6=c6,
            v_nn=None if c6 is not None else v_nn,
            cutoff=Cutoff(geo.get("cutoff", "nn_only")),
            cutoff_radius=geo.get("cutoff_radius_um"),
        )
    else:
        g = build_square(
            int(geo["width"]), int(geo["height"]), spacing,
            c6=c6, v_nn=None if c6 is not None else v_nn,
        )

    drv = d["drive"]
    delta0 = drv.get("delta0_mhz", "auto")
    if delta0 == "auto":
        # chains facilitate at the NN shift; the checkerboard needs the centre of
        # the one-NN band once diagonals (V_nn/8 each) drag it upward
        delta0 = v_nn if g.dimension == 1 else 1.125 * v_nn
    delta0 = float(delta0)
    groups = assign_groups(g)
    first = group_code(drv.get("first_driven_group", "A"))
    d_delta = float(drv.get("d_delta0_mhz", 0.0))
    d_omega = float(drv.get("d_omega0_mhz", 0.0))
    if drv["kind"] == "rap":
        t0 = float(drv["t0_us"])
        amp = drv.get("amplitude_mhz", "auto")
        beta = drv.get("beta_mhz")
        if amp == "auto":
            amp = amplitude_from_beta(float(beta), t0)
        schedule: Schedule = RapSchedule(
            omega0=float(drv["omega0_mhz"]),
            t0=t0,
            delta0=delta0,
            amplitude=float(amp),
            n_steps=int(drv["n_steps"]),
            site_group=groups,
            beta=None if beta is None else float(beta),
            delta_error=d_delta,
            omega_error=d_omega,
            first_driven_group=first,
        )
    else:
        schedule = RabiSchedule(
            omega0=float(drv["omega0_mhz"]),
            delta0=delta0,
            n_steps=int(drv["n_steps"]),
            site_group=groups,
            delta_error=d_delta,
            omega_error=d_omega,
            first_driven_group=first,
        )

    gamma = float(d.get("gamma_mhz", 0.0))

    init = d["initial"]
    if init == "vacuum":
        bits = "0" * g.n_sites
    elif init == "center":
        c = _center_site(g)
        bits = "0" * c + "1" + "0" * (g.n_sites - c - 1)
    else:
        bits = init
    if len(bits) != g.n_sites:
        raise ConfigError(
            f"initial has {len(bits)} sites but the geometry has {g.n_sites}"
        )

    sol = d["solver"]
    method = sol["method"]
    dt = sol.get("dt_us", "auto")
    if dt_override is not None:
        dt = float(dt_override)
    elif dt == "auto":
        if drv["kind"] == "rap":
            dt = float(drv["t0_us"]) / 20000.0
        else:
            dt = schedule.step_duration / 5000.0
    dt = float(dt)

    seed = sol.get("seed")
    if seed_override is not None:
        seed = int(seed_override)
    elif seed is None:
        seed = 0

    out = d.get("outputs", {})
    stride = out.get("stride", "auto")
    if isinstance(stride, str):
        stride = _auto_stride(schedule, dt)
    stride = int(stride)
    out_dir = out_override or out.get("directory") or "out/run"

    dis_cfg = d.get("disorder")
    disorder = None
    if dis_cfg is not None:
        disorder = DisorderSpec(
            sigma_r=float(dis_cfg["sigma_um"]),
            axes=int(dis_cfg.get("axes", g.dimension)),
            n_realizations=int(dis_cfg["realizations"]),
            base_seed=int(dis_cfg["seed"]) if dis_cfg.get("seed") is not None else seed,
        )

    scan = d.get("scan") or {}
    dd = scan.get("d_delta_frac", [-0.05, 0.05, 21])
    do = scan.get("d_omega_frac", [-0.05, 0.05, 21])
    scan_dd = np.linspace(float(dd[0]), float(dd[1]), int(dd[2]))
    scan_do = np.linspace(float(do[0]), float(do[1]), int(do[2]))

    resolved = {
        "v_nn_mhz": v_nn,
        "c6_mhz_um6": g.c6,
        "delta0_mhz": delta0,
        "amplitude_mhz": getattr(schedule, "amplitude", None),
        "step_duration_us": schedule.step_duration,
        "t_final_us": schedule.t_final,
        "dt_us": dt,
        "stride": stride,
        "initial_bits": bits,
        "seed": seed,
        "first_driven_group": group_name(first),
        "site_groups": "".join(group_name(int(x)) for x in groups) if g.n_sites <= 64 else None,
        "method": method,
    }

    return Resolved(
        geometry=g,
        schedule=schedule,
        gamma=gamma,
        initial_bits=bits,
        disorder=disorder,
        method=method,
        dt=dt,
        stride=stride,
        trajectories=int(sol.get("trajectories", 100)),
        seed=int(seed),
        record_jumps=bool(sol.get("record_jumps", False)),
        out_dir=out_dir,
        scan_dd=scan_dd,
        scan_do=scan_do,
        v_nn=v_nn,
        resolved=resolved,
    )
