"""Observables derived from runs: avalanche gain, dark counts, excitation
patterns, and robustness scans over calibration errors.

Gain counts the total excitation at avalanche-step boundaries,
G(S) = sum_j <n_j> at t = S * step_duration (the seed included, so G(0) = 1
for a single-seed run). Two closed-form single-decay laws are provided for
seeded chains: a polynomial approximation

    G(S) = 2S + 1 - p (S^2 + (2/3) S^3 - (2/3) S - 1),   p = Gamma T0 / 2

(Gamma angular) and the fuller bookkeeping law with explicit survival factors
(see gain_exact_single_decay). They agree at p = 0 and differ at O(p) by
construction of the approximation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .drive import RabiSchedule, RapSchedule, Schedule
from .errors import ConfigError
from .fullme import EvolveSpec, ManyBodyState, evolve
from .lattice import Geometry
from .results import RunResult, fmt
from .units import angular

VARIANT_EQ12 = "EQ12"
VARIANT_EQS2 = "EQS2"


@dataclass
class GainSeries:
    step: np.ndarray     # int64, 0..S
    t_us: np.ndarray
    gain: np.ndarray
    variant: str


def decay_probability_per_step(gamma: float, t0: float) -> float:
    """p = Gamma * (T0/2) with Gamma = 2 pi gamma (cyclic MHz in, probability out)."""
    return angular(gamma) * 0.5 * t0


def gain(result: RunResult) -> GainSeries:
    """Total excitation at the avalanche-step boundaries of a run."""
    pops = result.populations_at_steps()
    steps = np.arange(result.n_steps + 1, dtype=np.int64)
    return GainSeries(
        step=steps,
        t_us=steps * result.step_duration_us,
        gain=pops.sum(axis=1),
        variant=result.variant,
    )


def gain_approx(n_steps: int, gamma: float, t0: float) -> float:
    """Polynomial single-decay gain law at step count n_steps (>= 1)."""
    if n_steps < 0:
        raise ConfigError("n_steps must be >= 0")
    if n_steps == 0:
        return 1.0  # no avalanche yet: just the seed
    s = float(n_steps)
    p = decay_probability_per_step(gamma, t0)
    return 2.0 * s + 1.0 - p * (s * s + (2.0 / 3.0) * s**3 - (2.0 / 3.0) * s - 1.0)


def gain_exact_single_decay(n_steps: int, gamma: float, t0: float) -> float:
    """Single-decay bookkeeping law with explicit survival factors.

    G(S) = (2S+1) [1 - (1-p)^(S-1) p]
           - p * sum_{i=1}^{S-1} [3(i+1) + i + 2(2i+1)(S-i-1)] (1-p)^(i-1)

    where a decay at the end of step i (probability (1-p)^(i-1) p) freezes a
    hole pattern whose lost excitation is the bracketed count.
    """
    if n_steps < 0:
        raise ConfigError("n_steps must be >= 0")
    if n_steps == 0:
        return 1.0
    s = int(n_steps)
    p = decay_probability_per_step(gamma, t0)
    q = 1.0 - p
    total = (2.0 * s + 1.0) * (1.0 - q ** (s - 1) * p)
    loss = 0.0
    for i in range(1, s):
        bracket = 3.0 * (i + 1) + i + 2.0 * (2 * i + 1) * (s - i - 1)
        loss += bracket * q ** (i - 1)
    return total - p * loss


def formula_series(n_steps: int, gamma: float, t0: float, variant: str) -> GainSeries:
    fn = gain_approx if variant == VARIANT_EQ12 else gain_exact_single_decay
    steps = np.arange(n_steps + 1, dtype=np.int64)
    return GainSeries(
        step=steps,
        t_us=steps * (0.5 * t0),
        gain=np.array([fn(int(s), gamma, t0) for s in steps]),
        variant=variant,
    )


def argmax_gain_approx(gamma: float, t0: float, s_max: int = 200) -> tuple[int, float]:
    """Integer step count maximising the polynomial gain law, and its value."""
    best_s, best_g = 0, -np.inf
    for s in range(s_max + 1):
        gval = gain_approx(s, gamma, t0)
        if gval > best_g:
            best_s, best_g = s, gval
    return best_s, best_g


def dark_count(result: RunResult) -> float:
    """Final total excitation of a vacuum-seeded run (false-avalanche weight)."""
    initial = result.meta.get("initial_bits")
    if initial is not None and "1" in initial:
        raise ConfigError("dark_count requires a run that started from all zeros")
    if initial is None and float(result.populations[0].sum()) > 1e-12:
        raise ConfigError("dark_count requires a run that started from all zeros")
    return float(result.populations[-1].sum())


@dataclass
class PatternLabeling:
    """Per-site excitation history at step boundaries (hysteresis thresholding).

    A site becomes 'excited' when its population crosses threshold+hysteresis
    upward and 'de-excited' when it crosses threshold-hysteresis downward;
    populations inside the band keep the previous label.
    """

    first_step: np.ndarray            # int64, -1 = never excited
    deexcite_steps: list[list[int]]
    reexcite_steps: list[list[int]]
    threshold: float
    hysteresis: float


def label_pattern(
    result: RunResult, threshold: float = 0.5, hysteresis: float = 0.1
) -> PatternLabeling:
    if not 0.0 < threshold < 1.0:
        raise ConfigError("threshold must lie in (0, 1)")
    if not 0.0 <= hysteresis < min(threshold, 1.0 - threshold):
        raise ConfigError("hysteresis must be >= 0 and keep both bands inside [0, 1]")
    pops = result.populations_at_steps()
    n_steps_p1, n = pops.shape
    hi = threshold + hysteresis
    lo = threshold - hysteresis
    first = np.full(n, -1, dtype=np.int64)
    deex: list[list[int]] = [[] for _ in range(n)]
    reex: list[list[int]] = [[] for _ in range(n)]
    for j in range(n):
        state = False
        for k in range(n_steps_p1):
            p = pops[k, j]
            if not state and p >= hi:
                state = True
                if first[j] < 0:
                    first[j] = k
                else:
                    reex[j].append(k)
            elif state and p <= lo:
                state = False
                deex[j].append(k)
    return PatternLabeling(first, deex, reex, threshold, hysteresis)


def pattern_csv_lines(g: Geometry, lab: PatternLabeling) -> list[str]:
    lines = ["site,row,col,first_step,deexcite_steps,reexcite_steps"]
    for s in range(g.n_sites):
        r, c = g.site_rowcol(s)
        de = ";".join(str(k) for k in lab.deexcite_steps[s])
        re_ = ";".join(str(k) for k in lab.reexcite_steps[s])
        lines.append(f"{s},{r},{c},{lab.first_step[s]},{de},{re_}")
    return lines


@dataclass
class ScanResult:
    d_delta_frac: np.ndarray
    d_omega_frac: np.ndarray
    final_pop: np.ndarray    # (len(d_delta), len(d_omega)), site-1 population at t_final


def _with_errors(schedule: Schedule, d_delta: float, d_omega: float) -> Schedule:
    if isinstance(schedule, RapSchedule):
        return RapSchedule(
            omega0=schedule.omega0,
            t0=schedule.t0,
            delta0=schedule.delta0,
            amplitude=schedule.amplitude,
            n_steps=schedule.n_steps,
            site_group=schedule.site_group,
            beta=schedule.beta,
            delta_error=d_delta,
            omega_error=d_omega,
            first_driven_group=schedule.first_driven_group,
        )
    return RabiSchedule(
        omega0=schedule.omega0,
        delta0=schedule.delta0,
        n_steps=schedule.n_steps,
        site_group=schedule.site_group,
        delta_error=d_delta,
        omega_error=d_omega,
        first_driven_group=schedule.first_driven_group,
    )


def scan_parameters(
    g: Geometry,
    schedule: Schedule,
    dt: float,
    stride: int,
    initial_bits: str,
    d_delta_frac: np.ndarray,
    d_omega_frac: np.ndarray,
) -> ScanResult:
    """Final site-1 population over a grid of fractional calibration errors.

    Errors are static offsets d_delta = f * delta0 and d_omega = f * omega0;
    scans always run clean (no decay, no disorder) so the surface isolates
    the calibration sensitivity.
    """
    if g.n_sites < 2:
        raise ConfigError("scan needs at least two sites (observable is site 1)")
    out = np.empty((len(d_delta_frac), len(d_omega_frac)), dtype=np.float64)
    spec = EvolveSpec(
        t_final=schedule.t_final, dt=dt, output_stride=stride, gamma=0.0
    )
    for a, fd in enumerate(d_delta_frac):
        for b, fo in enumerate(d_omega_frac):
            sched = _with_errors(
                schedule, float(fd) * schedule.delta0, float(fo) * schedule.omega0
            )
            r = evolve(g, sched, spec, ManyBodyState.from_bitstring(initial_bits))
            out[a, b] = r.populations[-1, 1]
    return ScanResult(
        d_delta_frac=np.asarray(d_delta_frac, dtype=np.float64),
        d_omega_frac=np.asarray(d_omega_frac, dtype=np.float64),
        final_pop=out,
    )


def gain_csv_lines(series_list: list[GainSeries]) -> list[str]:
    lines = ["step,t_us,gain,variant"]
    for gs in series_list:
        for i in range(gs.step.shape[0]):
            lines.append(
                f"{int(gs.step[i])},{fmt(float(gs.t_us[i]))},{fmt(float(gs.gain[i]))},{gs.variant}"
            )
    return lines


def scan_csv_lines(sr: ScanResult) -> list[str]:
    lines = ["d_delta_frac,d_omega_frac,final_pop"]
    for a in range(sr.d_delta_frac.shape[0]):
        for b in range(sr.d_omega_frac.shape[0]):
            lines.append(
                f"{fmt(float(sr.d_delta_frac[a]))},{fmt(float(sr.d_omega_frac[b]))},"
                f"{fmt(float(sr.final_pop[a, b]))}"
            )
    return lines
