"""Run orchestration: resolve a config, dispatch the solver, write artifacts.

Every run directory gets:
    populations.csv             t_us, n_0..n_{N-1}
    populations_stderr.csv      (ensembles / disorder averages only)
    gain.csv                    step,t_us,gain,variant (run + formula variants)
    geometry.csv, pairs.csv     placement and couplings actually used
    drive.csv                   pulse values on the sample grid
    pattern.csv                 (square lattices) per-site excitation history
    jumps.csv                   (when recorded) trajectory,t_us,site
    scan.csv                    (scan runs) d_delta_frac,d_omega_frac,final_pop
    manifest.json               config, resolved values, observables, hashes

CSV bytes depend only on the config and seeds, never on wall time or thread
count; the manifest carries the volatile bits (timing, versions, hashes).
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .config import Resolved, RunConfig, resolve, resolved_config_dict
from .drive import RapSchedule, drive_csv_lines
from .errors import ConfigError
from .fullme import EvolveSpec, ManyBodyState, disorder_average, evolve
from .lattice import geometry_csv_lines, pairs_csv_lines
from .mfqmc import TrajectorySpec, run_ensemble, run_mfme
from .results import (
    RunResult,
    populations_csv_lines,
    sha256_file,
    stderr_csv_lines,
    write_lines,
    write_manifest,
)


def _sanity_warnings(r: Resolved) -> list[str]:
    warns = []
    if r.gamma > 0.1 * r.schedule.omega0:
        warns.append(
            f"gamma_mhz = {r.gamma:g} exceeds 10% of omega0_mhz = "
            f"{r.schedule.omega0:g}; the decay rate looks inconsistent with the "
            "drive this parameter set is described with"
        )
    if isinstance(r.schedule, RapSchedule):
        margin = r.schedule.delta0 - r.schedule.amplitude
        if margin < 0.2 * r.schedule.omega0:
            warns.append(
                f"sweep margin delta0 - amplitude = {margin:g} MHz is within "
                "0.2 omega0 of zero; transfers may start non-adiabatically"
            )
    return warns


def _solve(r: Resolved, threads: int) -> RunResult:
    if r.method == "full_me":
        spec = EvolveSpec(
            t_final=r.schedule.t_final, dt=r.dt, output_stride=r.stride, gamma=r.gamma
        )
        if r.disorder is not None:
            return disorder_average(
                r.geometry, r.schedule, spec, r.initial_bits, r.disorder, threads=threads
            )
        return evolve(
            r.geometry, r.schedule, spec, ManyBodyState.from_bitstring(r.initial_bits)
        )
    if r.method == "mf_qmc":
        tspec = TrajectorySpec(
            n_trajectories=r.trajectories,
            base_seed=r.seed,
            dt=r.dt,
            jump_record=r.record_jumps,
        )
        return run_ensemble(
            r.geometry, r.schedule, tspec, r.initial_bits, r.gamma, r.stride,
            threads=threads,
        )
    if r.method == "mf_me":
        return run_mfme(r.geometry, r.schedule, r.initial_bits, r.gamma, r.dt, r.stride)
    raise ConfigError(f"solver.method {r.method!r} not recognised")


def _gain_variants(r: Resolved, result: RunResult) -> list[analysis.GainSeries]:
    series = [analysis.gain(result)]
    seeded = r.initial_bits.count("1") == 1
    if isinstance(r.schedule, RapSchedule) and seeded and r.geometry.dimension == 1:
        series.append(
            analysis.formula_series(
                r.schedule.n_steps, r.gamma, r.schedule.t0, analysis.VARIANT_EQ12
            )
        )
        series.append(
            analysis.formula_series(
                r.schedule.n_steps, r.gamma, r.schedule.t0, analysis.VARIANT_EQS2
            )
        )
    return series


def execute(
    cfg: RunConfig,
    *,
    out_override: str | None = None,
    seed_override: int | None = None,
    dt_override: float | None = None,
    threads: int = 1,
    quiet: bool = False,
    scan: bool = False,
) -> dict:
    """Run one config (or its scan block) and write the artifact directory."""
    t_start = time.perf_counter()
    r = resolve(
        cfg, seed_override=seed_override, dt_override=dt_override, out_override=out_override
    )
    out_dir = Path(r.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    warnings = _sanity_warnings(r)
    artifacts: list[str] = []

    def emit(name: str, lines: list[str]) -> None:
        write_lines(out_dir / name, lines)
        artifacts.append(name)

    observables: dict = {}
    residuals: dict = {}
    meta: dict = {}

    if scan:
        sr = analysis.scan_parameters(
            r.geometry,
            r.schedule,
            r.dt,
            int(round(r.schedule.step_duration / r.dt)),  # sample step boundaries only
            r.initial_bits,
            r.scan_dd,
            r.scan_do,
        )
        emit("scan.csv", analysis.scan_csv_lines(sr))
        observables = {
            "grid_min": float(sr.final_pop.min()),
            "grid_max": float(sr.final_pop.max()),
            "grid_spread": float(sr.final_pop.max() - sr.final_pop.min()),
            "center_value": float(
                sr.final_pop[sr.final_pop.shape[0] // 2, sr.final_pop.shape[1] // 2]
            ),
        }
    else:
        result = _solve(r, threads)
        result.meta["initial_bits"] = r.initial_bits
        emit("populations.csv", populations_csv_lines(result))
        if result.stderr is not None:
            emit("populations_stderr.csv", stderr_csv_lines(result))
        gains = _gain_variants(r, result)
        emit("gain.csv", analysis.gain_csv_lines(gains))
        if r.geometry.dimension == 2:
            emit(
                "pattern.csv",
                analysis.pattern_csv_lines(r.geometry, analysis.label_pattern(result)),
            )
        jumps = result.meta.get("jumps")
        if jumps is not None:
            lines = ["trajectory,t_us,site"]
            lines.extend(f"{k},{t:.17g},{s}" for (k, t, s) in jumps)
            emit("jumps.csv", lines)
            result.meta["jumps"] = None  # keep the manifest lean
        run_gain = gains[0]
        observables = {
            "final_gain": float(run_gain.gain[-1]),
            "gain_per_step": [float(x) for x in run_gain.gain],
            "final_populations": [float(x) for x in result.populations[-1]],
        }
        residuals = dict(result.residuals)
        meta = {
            k: v
            for k, v in result.meta.items()
            if k not in ("jumps",) and not isinstance(v, np.ndarray)
        }

    emit("geometry.csv", geometry_csv_lines(r.geometry))
    emit("pairs.csv", pairs_csv_lines(r.geometry))
    n_grid = min(2001, 20 * r.schedule.n_steps + 1)
    t_grid = np.linspace(0.0, r.schedule.t_final, n_grid)
    emit("drive.csv", drive_csv_lines(r.schedule, t_grid))

    manifest = {
        "tool": {"name": "rydrap", "version": __version__},
        "config": cfg.to_dict(),
        "resolved_config": resolved_config_dict(cfg, r),
        "resolved": {**r.resolved, "gamma_mhz": r.gamma, "threads": threads,
                      "trajectories": r.trajectories if r.method == "mf_qmc" else None,
                      "scan": scan},
        "observables": observables,
        "residuals": residuals,
        "run_meta": meta,
        "warnings": warnings,
        "wall_time_s": round(time.perf_counter() - t_start, 3),
        "artifacts": {name: sha256_file(out_dir / name) for name in artifacts},
    }
    write_manifest(out_dir / "manifest.json", manifest)

    if not quiet:
        for w in warnings:
            print(f"warning: {w}")
        if scan:
            print(
                f"scan grid {len(r.scan_dd)}x{len(r.scan_do)}: min {observables['grid_min']:.6g}, "
                f"max {observables['grid_max']:.6g} -> {out_dir}"
            )
        else:
            print(
                f"{r.method} run, {r.geometry.n_sites} sites, {r.schedule.n_steps} steps: "
                f"final gain {observables['final_gain']:.6g} -> {out_dir}"
            )
    return manifest


def compare(dirs: list[str], out_dir: str = "out/compare", quiet: bool = False) -> dict:
    """Merge the site populations of several runs and tabulate pairwise gaps."""
    if len(dirs) < 2:
        raise ConfigError("compare needs at least two run directories")
    runs = []
    labels = []
    for d in dirs:
        p = Path(d) / "populations.csv"
        if not p.is_file():
            raise ConfigError(f"{d} has no populations.csv")
        rows = p.read_text(encoding="utf-8").strip().split("\n")
        data = np.array([[float(x) for x in line.split(",")] for line in rows[1:]])
        runs.append(data)
        base = Path(d).name or Path(d).resolve().name
        label = base
        k = 2
        while label in labels:
            label = f"{base}_{k}"
            k += 1
        labels.append(label)

    t0 = runs[0][:, 0]
    n_sites = runs[0].shape[1] - 1
    for d, data in zip(dirs, runs):
        if data.shape[1] - 1 != n_sites:
            raise ConfigError(
                f"grid mismatch: {d} has {data.shape[1] - 1} sites, expected {n_sites}"
            )
        if data.shape[0] != t0.shape[0] or np.max(np.abs(data[:, 0] - t0)) > 1e-9:
            raise ConfigError(f"grid mismatch: {d} sample times differ from {dirs[0]}")

    out = Path(out_dir)
    header = ["t_us"]
    for lab in labels:
        header.extend(f"{lab}_n_{j}" for j in range(n_sites))
    lines = [",".join(header)]
    for i in range(t0.shape[0]):
        row = [f"{t0[i]:.17g}"]
        for data in runs:
            row.extend(f"{x:.17g}" for x in data[i, 1:])
        lines.append(",".join(row))
    write_lines(out / "comparison.csv", lines)

    slines = ["variant_a,variant_b,max_abs_diff"]
    summary = {}
    for a in range(len(runs)):
        for b in range(a + 1, len(runs)):
            diff = float(np.max(np.abs(runs[a][:, 1:] - runs[b][:, 1:])))
            slines.append(f"{labels[a]},{labels[b]},{diff:.17g}")
            summary[f"{labels[a]} vs {labels[b]}"] = diff
    write_lines(out / "comparison_summary.csv", slines)

    if not quiet:
        for pair, diff in summary.items():
            print(f"{pair}: max |dn| = {diff:.3g}")
    return summary
