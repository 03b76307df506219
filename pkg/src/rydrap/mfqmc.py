"""Mean-field quantum-jump unravelling and its deterministic master-equation twin.

Each site is a two-level system driven by the shared pulse schedule and
detuned by the instantaneous populations of its neighbours:

    de_j(t) = delta(t) - sum_k V_jk <n_k>(t)

Neighbour populations are frozen over every substep (Jacobi update), so site
updates commute and the result is independent of site ordering. Decay is
unravelled as first-order quantum jumps: p_j = gamma <n_j> dt with <n_j>
taken at the substep start, Bernoulli-sampled from a counter-based stream
keyed (base_seed, trajectory, site, step) — reruns are bit-identical at any
parallelism degree.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .drive import Schedule, drive_scalar
from .errors import ConfigError, NumericalInstabilityError
from .lattice import Geometry, neighbor_table
from .results import RunResult, pairwise_sum
from .units import TWO_PI, angular

_JUMP_CAP = 65536          # per trajectory; expected counts are O(1)
_BLOCK = 32                # trajectories per reduction block (fixed => stable bytes)


@dataclass
class SiteEnsemble:
    """Product state of independent two-level sites: amplitudes[j] = (c0, c1)."""

    geometry: Geometry
    amplitudes: np.ndarray   # (n, 2) complex128
    t: float = 0.0

    @staticmethod
    def from_bitstring(g: Geometry, bits: str) -> "SiteEnsemble":
        if len(bits) != g.n_sites or any(ch not in "01" for ch in bits):
            raise ConfigError(
                f"initial state must be a 0/1 string of length {g.n_sites}, got {bits!r}"
            )
        c = np.zeros((g.n_sites, 2), dtype=np.complex128)
        for j, ch in enumerate(bits):
            c[j, 1 if ch == "1" else 0] = 1.0
        return SiteEnsemble(g, c, 0.0)

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes[:, 1]) ** 2


@dataclass
class TrajectorySpec:
    """Sampling plan for the jump unravelling."""

    n_trajectories: int
    base_seed: int
    dt: float
    jump_record: bool = False

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ConfigError("solver.trajectories must be >= 1")
        if self.dt <= 0:
            raise ConfigError("solver.dt_us must be > 0")


@dataclass
class CounterStream:
    """Position in the per-trajectory random stream; step advances each substep."""

    seed: int
    trajectory: int
    step: int = 0

    def uniform(self, site: int) -> float:
        return kernels.uniform_stream_value(self.seed, self.trajectory, site, self.step)


def effective_detuning(
    g: Geometry, schedule: Schedule, t: float, populations: np.ndarray
) -> np.ndarray:
    """Per-site interaction-shifted detuning (cyclic MHz) given neighbour populations."""
    if populations.shape[0] != g.n_sites:
        raise ConfigError("populations length does not match geometry")
    kind, p0, om_eff, de_eff, amp, fg = schedule.scalar_params()
    _, delta, _ = drive_scalar(kind, p0, om_eff, de_eff, amp, fg, t, t)
    indptr, nbr, v = neighbor_table(g)
    out = np.empty(g.n_sites, dtype=np.float64)
    for j in range(g.n_sites):
        shift = 0.0
        for kk in range(indptr[j], indptr[j + 1]):
            shift += v[kk] * populations[nbr[kk]]
        out[j] = delta - shift
    return out


def _angular_neighbors(g: Geometry):
    indptr, nbr, v = neighbor_table(g)
    return indptr, nbr, TWO_PI * v


def _stage_values(schedule: Schedule, t: float, dt: float):
    """Angular (om0..2, de0..2, driven) exactly as the stage-table builder computes them."""
    kind, p0, om_eff, de_eff, amp, fg = schedule.scalar_params()
    tb = t + 0.5 * dt
    om0, de0, g0 = drive_scalar(kind, p0, om_eff, de_eff, amp, fg, tb, t)
    om1, de1, _ = drive_scalar(kind, p0, om_eff, de_eff, amp, fg, tb, tb)
    om2, de2, _ = drive_scalar(kind, p0, om_eff, de_eff, amp, fg, tb, t + dt)
    return (
        TWO_PI * om0, TWO_PI * om1, TWO_PI * om2,
        TWO_PI * de0, TWO_PI * de1, TWO_PI * de2,
        g0,
    )


def step_trajectory(
    ens: SiteEnsemble,
    schedule: Schedule,
    gamma: float,
    dt: float,
    stream: CounterStream,
) -> tuple[SiteEnsemble, list[tuple[float, int]]]:
    """Advance one substep: frozen-neighbour RK4, then jumps, then renormalise.

    Bit-compatible with the compiled trajectory kernel: composing this step
    n times reproduces the kernel's state exactly. gamma is cyclic MHz.
    """
    g = ens.geometry
    c = ens.amplitudes.copy()
    pops = np.empty(g.n_sites, dtype=np.float64)
    for j in range(g.n_sites):
        pops[j] = c[j, 1].real * c[j, 1].real + c[j, 1].imag * c[j, 1].imag
    indptr, nbr, v_ang = _angular_neighbors(g)
    om0, om1, om2, de0, de1, de2, driven = _stage_values(schedule, ens.t, dt)
    gamma_ang = angular(gamma)
    kernels.mf_substep(
        c, pops, schedule.site_group, indptr, nbr, v_ang,
        om0, om1, om2, de0, de1, de2, driven, gamma_ang, dt,
    )
    jumps: list[tuple[float, int]] = []
    t_next = ens.t + dt
    for j in range(g.n_sites):
        if gamma_ang > 0.0:
            p = gamma_ang * pops[j] * dt
            if stream.uniform(j) < p:
                c[j, 0] = 1.0
                c[j, 1] = 0.0
                jumps.append((t_next, j))
                continue
        nrm2 = (
            c[j, 0].real * c[j, 0].real + c[j, 0].imag * c[j, 0].imag
            + c[j, 1].real * c[j, 1].real + c[j, 1].imag * c[j, 1].imag
        )
        inv = 1.0 / math.sqrt(nrm2)
        c[j, 0] *= inv
        c[j, 1] *= inv
    stream.step += 1
    return SiteEnsemble(g, c, t_next), jumps


def jump_probabilities(ens: SiteEnsemble, gamma: float, dt: float) -> np.ndarray:
    """First-order per-site jump probabilities for the coming substep."""
    return angular(gamma) * ens.populations() * dt


def _validate_jump_budget(g: Geometry, gamma: float, dt: float) -> None:
    budget = angular(gamma) * g.n_sites * dt
    if budget >= 0.01:
        raise ConfigError(
            f"solver.dt_us too coarse for the jump unravelling: worst-case total "
            f"jump probability per substep {budget:.3g} >= 0.01"
        )


def _traj_block(args):
    """Run trajectories [k0, k1); returns fixed-order partial sums."""
    (g, schedule, gamma, dt, stride, bits, seed, k0, k1, record_jumps, n_sub) = args
    stage_om, stage_de, stage_group = kernels.build_drive_stage_tables(schedule, dt, n_sub)
    indptr, nbr, v_ang = _angular_neighbors(g)
    n = g.n_sites
    n_samples = n_sub // stride + 1
    ssum = np.zeros((n_samples, n), dtype=np.float64)
    ssq = np.zeros((n_samples, n), dtype=np.float64)
    gsum = np.zeros(n_samples, dtype=np.float64)
    gsq = np.zeros(n_samples, dtype=np.float64)
    jumps: list[tuple[int, float, int]] = []
    out_pops = np.empty((n_samples, n), dtype=np.float64)
    mask = (1 << 64) - 1
    gamma_ang = angular(gamma)
    for k in range(k0, k1):
        ens = SiteEnsemble.from_bitstring(g, bits)
        c = ens.amplitudes
        jt = np.empty(_JUMP_CAP if record_jumps else 0, dtype=np.float64)
        js = np.empty(_JUMP_CAP if record_jumps else 0, dtype=np.int64)
        status, bad_t, n_jumps = kernels.mf_trajectory_kernel(
            c, dt, n_sub, stride,
            stage_om, stage_de, stage_group,
            schedule.site_group, indptr, nbr, v_ang,
            gamma_ang,
            np.uint64(seed & mask), np.uint64(k & mask),
            record_jumps,
            out_pops, jt, js,
        )
        if status != 0:
            raise NumericalInstabilityError(
                f"trajectory {k} lost normalisability at t = {bad_t:g} us", bad_t
            )
        ssum += out_pops
        ssq += out_pops * out_pops
        gk = out_pops.sum(axis=1)
        gsum += gk
        gsq += gk * gk
        if record_jumps:
            for i in range(min(n_jumps, _JUMP_CAP)):
                jumps.append((k, float(jt[i]), int(js[i])))
    return ssum, ssq, gsum, gsq, jumps


def run_ensemble(
    g: Geometry,
    schedule: Schedule,
    tspec: TrajectorySpec,
    initial_bits: str,
    gamma: float,
    output_stride: int,
    threads: int = 1,
) -> RunResult:
    """Average the jump unravelling over tspec.n_trajectories trajectories."""
    from .fullme import substep_layout  # local import to avoid a cycle

    _validate_jump_budget(g, gamma, tspec.dt)
    n_sub, _ = substep_layout(schedule, tspec.dt, schedule.t_final, output_stride)
    n_samples = n_sub // output_stride + 1
    t_grid = np.zeros(n_samples, dtype=np.float64)
    for i in range(1, n_samples):
        t_grid[i] = (i * output_stride) * tspec.dt

    ntraj = tspec.n_trajectories
    blocks = [
        (g, schedule, gamma, tspec.dt, output_stride, initial_bits,
         tspec.base_seed, k0, min(k0 + _BLOCK, ntraj), tspec.jump_record, n_sub)
        for k0 in range(0, ntraj, _BLOCK)
    ]
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_traj_block, blocks, chunksize=1))
    else:
        parts = [_traj_block(b) for b in blocks]

    ssum = pairwise_sum([p[0] for p in parts])
    ssq = pairwise_sum([p[1] for p in parts])
    gsum = pairwise_sum([p[2] for p in parts])
    gsq = pairwise_sum([p[3] for p in parts])
    jumps = [row for p in parts for row in p[4]]

    mean = ssum / ntraj
    if ntraj > 1:
        var = np.maximum(ssq / ntraj - mean * mean, 0.0) * (ntraj / (ntraj - 1))
        se = np.sqrt(var / ntraj)
        gmean = gsum / ntraj
        gvar = np.maximum(gsq / ntraj - gmean * gmean, 0.0) * (ntraj / (ntraj - 1))
        gse = np.sqrt(gvar / ntraj)
    else:
        se = np.zeros_like(mean)
        gse = np.zeros(n_samples)

    return RunResult(
        t_us=t_grid,
        populations=mean,
        stderr=se,
        step_duration_us=schedule.step_duration,
        n_steps=schedule.n_steps,
        variant="MF_QMC",
        geometry=g,
        residuals={},
        meta={
            "dt_us": tspec.dt,
            "gamma_mhz": gamma,
            "n_substeps": n_sub,
            "output_stride": output_stride,
            "n_trajectories": ntraj,
            "base_seed": tspec.base_seed,
            "gain_se": gse.tolist() if n_samples <= 4096 else None,
            "jumps": jumps if tspec.jump_record else None,
            "n_jumps_total": len(jumps) if tspec.jump_record else None,
        },
        final_state=None,
    )


def run_mfme(
    g: Geometry,
    schedule: Schedule,
    initial_bits: str,
    gamma: float,
    dt: float,
    output_stride: int,
) -> RunResult:
    """Deterministic mean-field master equation (per-site 2x2 density matrices)."""
    from .fullme import substep_layout

    n_sub, _ = substep_layout(schedule, dt, schedule.t_final, output_stride)
    n = g.n_sites
    n_samples = n_sub // output_stride + 1
    t_grid = np.zeros(n_samples, dtype=np.float64)
    for i in range(1, n_samples):
        t_grid[i] = (i * output_stride) * dt
    out_pops = np.empty((n_samples, n), dtype=np.float64)

    if len(initial_bits) != n or any(ch not in "01" for ch in initial_bits):
        raise ConfigError(f"initial state must be a 0/1 string of length {n}")
    n1 = np.zeros(n, dtype=np.float64)
    for j, ch in enumerate(initial_bits):
        if ch == "1":
            n1[j] = 1.0
    x = np.zeros(n, dtype=np.complex128)

    stage_om, stage_de, stage_group = kernels.build_drive_stage_tables(schedule, dt, n_sub)
    indptr, nbr, v_ang = _angular_neighbors(g)
    status, bad_t = kernels.mfme_kernel(
        n1, x, dt, n_sub, output_stride,
        stage_om, stage_de, stage_group,
        schedule.site_group, indptr, nbr, v_ang,
        angular(gamma),
        out_pops,
    )
    if status != 0:
        raise NumericalInstabilityError(
            f"mean-field master equation diverged at t = {bad_t:g} us", bad_t
        )

    return RunResult(
        t_us=t_grid,
        populations=out_pops,
        stderr=None,
        step_duration_us=schedule.step_duration,
        n_steps=schedule.n_steps,
        variant="MF_ME",
        geometry=g,
        residuals={},
        meta={
            "dt_us": dt,
            "gamma_mhz": gamma,
            "n_substeps": n_sub,
            "output_stride": output_stride,
        },
        final_state=None,
    )
