"""Pulse schedules: hyperbolic-secant adiabatic sweeps and square Rabi pulses.

Two interleaved site groups (A = odd lattice parity, B = even) are driven in
alternation; each drive step lasts half a sweep cycle (sweep schedules) or one
pi-pulse window (Rabi schedules). All returned frequencies are cyclic MHz.

The *_scalar functions are numba-compiled and shared verbatim with the solver
kernels, so there is a single source of truth for the pulse shapes. They take
two times: t_branch selects the drive step (solvers pass the RK4 step midpoint
so integration substeps never straddle a drive discontinuity) and t_eval is
where the smooth envelope is evaluated; the public single-time accessors pass
the same value for both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError
from .lattice import Geometry

GROUP_A = 0  # odd lattice parity (chain sites 1, 3, ...; checkerboard row+col odd)
GROUP_B = 1  # even lattice parity (contains chain site 0 and any central seed)

_GROUP_NAMES = {GROUP_A: "A", GROUP_B: "B"}
_GROUP_CODES = {"A": GROUP_A, "B": GROUP_B}

KIND_RAP = 0
KIND_RABI = 1


def group_code(name: str) -> int:
    try:
        return _GROUP_CODES[name.upper()]
    except (KeyError, AttributeError):
        raise ConfigError(f"drive.first_driven_group must be 'A' or 'B', got {name!r}") from None


def group_name(code: int) -> str:
    return _GROUP_NAMES[code]


def assign_groups(g: Geometry) -> np.ndarray:
    """Group label per site: odd lattice parity -> GROUP_A, even -> GROUP_B."""
    if g.dimension == 1:
        parity = np.arange(g.n_sites) % 2
    else:
        rows = np.arange(g.n_sites) // g.shape[1]
        cols = np.arange(g.n_sites) % g.shape[1]
        parity = (rows + cols) % 2
    return np.where(parity == 1, GROUP_A, GROUP_B).astype(np.int8)


def amplitude_from_beta(beta: float, t0: float) -> float:
    """Sweep amplitude A = beta^2 * T0 / (8 pi), all in cyclic MHz / us."""
    return beta * beta * t0 / (8.0 * math.pi)


@njit(cache=True, inline="always")
def _rap_scalar(t_branch, t_eval, t0, amp_signed, om_eff, de_eff, first_group):
    """(omega, delta, driven_group) of the sweep drive.

    First half-cycle: omega = om_eff * sech(x), delta = de_eff + A * tanh(x)
    with x = pi (t' - T0/4) / (T0/8) and A = |amp_signed|; second half is
    centred at 3 T0/4 and drives the other group.  amp_signed > 0 mirrors the
    sweep (second half runs back down); amp_signed < 0 repeats the upward
    sweep, which transfers identically and is kept as a testable variant.
    """
    m = math.floor(t_branch / t0)
    tpe = t_eval - m * t0
    if t_branch - m * t0 < 0.5 * t0:
        x = math.pi * (tpe - 0.25 * t0) / (0.125 * t0)
        driven = first_group
        de = de_eff + abs(amp_signed) * math.tanh(x)
    else:
        x = math.pi * (tpe - 0.75 * t0) / (0.125 * t0)
        driven = 1 - first_group
        de = de_eff - amp_signed * math.tanh(x)
    om = om_eff / math.cosh(x)
    return om, de, driven


@njit(cache=True, inline="always")
def _rabi_scalar(t_branch, step_duration, om_eff, de_eff, first_group):
    """(omega, delta, driven_group) of the square-pulse drive."""
    k = int(math.floor(t_branch / step_duration))
    driven = first_group if k % 2 == 0 else 1 - first_group
    return om_eff, de_eff, driven


@njit(cache=True, inline="always")
def drive_scalar(kind, p0, om_eff, de_eff, amp, first_group, t_branch, t_eval):
    """Uniform kernel-side entry point; p0 is t0 (sweep) or step_duration (Rabi)."""
    if kind == KIND_RAP:
        return _rap_scalar(t_branch, t_eval, p0, amp, om_eff, de_eff, first_group)
    return _rabi_scalar(t_branch, p0, om_eff, de_eff, first_group)


@dataclass
class RapSchedule:
    """Adiabatic sweep schedule; one avalanche step per half-cycle T0/2."""

    omega0: float                 # peak Rabi frequency, MHz
    t0: float                     # full cycle duration, us
    delta0: float                 # sweep centre detuning, MHz
    amplitude: float              # sweep amplitude A, MHz
    n_steps: int                  # number of half-cycles
    site_group: np.ndarray        # int8 per site, GROUP_A / GROUP_B
    beta: float | None = None    # bandwidth the amplitude was derived from, if any
    delta_error: float = 0.0      # static offset added to delta0, MHz
    omega_error: float = 0.0      # static offset added to omega0, MHz
    first_driven_group: int = GROUP_A
    second_half_sweep_down: bool = True  # False repeats the upward sweep (same transfers)

    def __post_init__(self):
        if self.t0 <= 0:
            raise ConfigError("drive.t0_us must be > 0")
        if self.omega0 <= 0:
            raise ConfigError("drive.omega0_mhz must be > 0")
        if self.amplitude < 0:
            raise ConfigError("drive.amplitude_mhz must be >= 0")
        if self.delta0 - self.amplitude <= 0:
            raise ConfigError(
                "drive: sweep must stay red of the bare resonance "
                f"(delta0 - amplitude = {self.delta0 - self.amplitude:g} <= 0)"
            )
        if self.n_steps < 1:
            raise ConfigError("drive.n_steps must be >= 1")
        if self.first_driven_group not in (GROUP_A, GROUP_B):
            raise ConfigError("drive.first_driven_group must be GROUP_A or GROUP_B")
        self.site_group = np.asarray(self.site_group, dtype=np.int8)

    @property
    def kind(self) -> int:
        return KIND_RAP

    @property
    def step_duration(self) -> float:
        return 0.5 * self.t0

    @property
    def t_final(self) -> float:
        return self.n_steps * self.step_duration

    def scalar_params(self) -> tuple:
        amp = self.amplitude if self.second_half_sweep_down else -self.amplitude
        return (
            KIND_RAP,
            self.t0,
            self.omega0 + self.omega_error,
            self.delta0 + self.delta_error,
            amp,
            self.first_driven_group,
        )


@dataclass
class RabiSchedule:
    """Resonant square-pulse schedule; each step is one pi pulse: 2 pi Omega0 * step = pi."""

    omega0: float
    delta0: float
    n_steps: int
    site_group: np.ndarray
    delta_error: float = 0.0
    omega_error: float = 0.0
    first_driven_group: int = GROUP_A

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ConfigError("drive.omega0_mhz must be > 0")
        if self.n_steps < 1:
            raise ConfigError("drive.n_steps must be >= 1")
        if self.first_driven_group not in (GROUP_A, GROUP_B):
            raise ConfigError("drive.first_driven_group must be GROUP_A or GROUP_B")
        self.site_group = np.asarray(self.site_group, dtype=np.int8)

    @property
    def kind(self) -> int:
        return KIND_RABI

    @property
    def step_duration(self) -> float:
        # pi-pulse window for the nominal omega0 (errors deliberately excluded:
        # omega miscalibration must show up as imperfect transfer, not retiming)
        return 1.0 / (2.0 * self.omega0)

    @property
    def t_final(self) -> float:
        return self.n_steps * self.step_duration

    def scalar_params(self) -> tuple:
        return (
            KIND_RABI,
            self.step_duration,
            self.omega0 + self.omega_error,
            self.delta0 + self.delta_error,
            0.0,
            self.first_driven_group,
        )


Schedule = RapSchedule | RabiSchedule


def _eval(schedule: Schedule, t: float) -> tuple[float, float, int]:
    p = schedule.scalar_params()
    return drive_scalar(p[0], p[1], p[2], p[3], p[4], p[5], t, t)


def rap_omega(s: RapSchedule, site: int, t: float) -> float:
    """Rabi frequency (MHz) seen by `site` at time t; 0 when its group is idle."""
    if not 0 <= site < s.site_group.shape[0]:
        raise ConfigError(f"site index {site} out of range")
    om, _, driven = _eval(s, t)
    return om if s.site_group[site] == driven else 0.0


def rap_delta(s: RapSchedule, t: float) -> float:
    """Instantaneous global detuning (MHz) of the sweep drive."""
    _, de, _ = _eval(s, t)
    return de


def rabi_drive(s: RabiSchedule, site: int, t: float) -> tuple[float, float]:
    """(omega, delta) in MHz seen by `site` at time t under the square-pulse drive."""
    if not 0 <= site < s.site_group.shape[0]:
        raise ConfigError(f"site index {site} out of range")
    om, de, driven = _eval(s, t)
    return (om if s.site_group[site] == driven else 0.0, de)


def driven_group(schedule: Schedule, t: float) -> int:
    return _eval(schedule, t)[2]


def drive_csv_lines(schedule: Schedule, t_grid: np.ndarray) -> list[str]:
    lines = ["t_us,delta_mhz,omega_group_a_mhz,omega_group_b_mhz"]
    for t in t_grid:
        om, de, driven = _eval(schedule, float(t))
        oa = om if driven == GROUP_A else 0.0
        ob = om if driven == GROUP_B else 0.0
        lines.append(f"{t:.17g},{de:.17g},{oa:.17g},{ob:.17g}")
    return lines
