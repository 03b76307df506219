"""Exact many-body evolution on the full 2^N space.

State encoding: basis index r holds site j in bit j, so the bitstring
"10" (leftmost char = site 0) is basis index 1. Hamiltonian (angular):

    H = sum_j (Omega_j(t)/2) sx_j  -  (Delta(t)/2) sum_j sz_j  +  sum_{i<j} V_ij n_i n_j

with sz = |1><1| - |0><0|, n = |1><1|. Spontaneous decay |1> -> |0> at rate
gamma enters through the standard dissipator; gamma = 0 runs use a pure
state vector, gamma > 0 runs use the density matrix (dimension capped).
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .drive import GROUP_A, Schedule, rabi_drive, rap_delta, rap_omega, RapSchedule
from .errors import ConfigError, NumericalInstabilityError, ResourceRefusalError
from .lattice import DisorderSpec, Geometry, sample_disorder
from .results import RunResult
from .units import angular

MAX_PURE_SITES = 24
MAX_DENSITY_SITES = 12


class StateKind(Enum):
    PURE = "pure"
    DENSITY = "density"


@dataclass
class ManyBodyState:
    """A state of N two-level sites: unit vector (PURE) or density matrix (DENSITY)."""

    kind: StateKind
    n_sites: int
    data: np.ndarray

    @staticmethod
    def from_bitstring(bits: str) -> "ManyBodyState":
        n = len(bits)
        if n < 1 or any(ch not in "01" for ch in bits):
            raise ConfigError(f"initial state must be a nonempty string of 0/1, got {bits!r}")
        psi = np.zeros(1 << n, dtype=np.complex128)
        psi[basis_index(bits)] = 1.0
        return ManyBodyState(StateKind.PURE, n, psi)

    def to_density(self) -> "ManyBodyState":
        if self.kind is StateKind.DENSITY:
            return self
        rho = np.outer(self.data, np.conj(self.data))
        return ManyBodyState(StateKind.DENSITY, self.n_sites, rho)

    def site_populations(self) -> np.ndarray:
        dim = 1 << self.n_sites
        if self.kind is StateKind.PURE:
            w = np.abs(self.data) ** 2
        else:
            w = np.real(np.diag(self.data))
        idx = np.arange(dim)
        return np.array(
            [float(w[(idx >> j) & 1 == 1].sum()) for j in range(self.n_sites)]
        )

    def validate(self, tol: float = 1e-9) -> dict:
        """Check the structural invariants; returns the residuals it measured."""
        res: dict[str, float] = {}
        if self.kind is StateKind.PURE:
            res["norm_dev"] = abs(float(np.linalg.norm(self.data)) - 1.0)
            if res["norm_dev"] > tol:
                raise ValueError(f"state norm deviates by {res['norm_dev']:.3g}")
        else:
            res["herm_dev"] = float(np.max(np.abs(self.data - self.data.conj().T)))
            res["trace_dev"] = abs(float(np.trace(self.data).real) - 1.0)
            if res["herm_dev"] > tol or res["trace_dev"] > tol:
                raise ValueError(
                    f"density matrix violates Hermiticity/trace: {res}"
                )
            eigs = np.linalg.eigvalsh(self.data)
            res["min_eig"] = float(eigs[0])
            if res["min_eig"] < -1e-7:
                raise ValueError(f"density matrix has eigenvalue {res['min_eig']:.3g}")
        return res


def basis_index(bits: str) -> int:
    """Bitstring (leftmost char = site 0) -> basis index (site j in bit j)."""
    return sum(1 << j for j, ch in enumerate(bits) if ch == "1")


@dataclass
class EvolveSpec:
    """Integration window and output grid. gamma is the decay rate in cyclic MHz."""

    t_final: float
    dt: float
    output_stride: int
    gamma: float = 0.0

    def __post_init__(self):
        if self.t_final <= 0:
            raise ConfigError("evolve.t_final must be > 0")
        if self.dt <= 0:
            raise ConfigError("solver.dt_us must be > 0")
        if self.output_stride < 1:
            raise ConfigError("outputs.stride must be >= 1")
        if self.gamma < 0:
            raise ConfigError("gamma_mhz must be >= 0")


def _interaction_diag(g: Geometry) -> np.ndarray:
    """Angular interaction energy of every basis state (the n_i n_j diagonal)."""
    dim = 1 << g.n_sites
    idx = np.arange(dim, dtype=np.int64)
    diag = np.zeros(dim, dtype=np.float64)
    for (i, j), v in zip(g.pairs, g.pair_v):
        both = ((idx >> int(i)) & 1) & ((idx >> int(j)) & 1)
        diag += angular(float(v)) * both
    return diag


def _zsum(n_sites: int) -> np.ndarray:
    dim = 1 << n_sites
    idx = np.arange(dim, dtype=np.int64)
    pc = np.zeros(dim, dtype=np.float64)
    for j in range(n_sites):
        pc += (idx >> j) & 1
    return 2.0 * pc - n_sites


def _group_bits(site_group: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    bits_a = np.array(
        [1 << j for j in range(site_group.shape[0]) if site_group[j] == GROUP_A],
        dtype=np.int64,
    )
    bits_b = np.array(
        [1 << j for j in range(site_group.shape[0]) if site_group[j] != GROUP_A],
        dtype=np.int64,
    )
    all_bits = np.array([1 << j for j in range(site_group.shape[0])], dtype=np.int64)
    return bits_a, bits_b, all_bits


def substep_layout(schedule: Schedule, dt: float, t_final: float, stride: int) -> tuple[int, int]:
    """(n_substeps, substeps_per_drive_step); validates grid commensurability."""
    sd = schedule.step_duration
    if dt > sd / 1000.0 * (1.0 + 1e-12):
        raise ConfigError(
            f"solver.dt_us = {dt:g} too coarse: must be <= step_duration/1000 = {sd / 1000.0:g}"
        )
    sps = int(round(sd / dt))
    if abs(sps * dt - sd) > 1e-9 * sd:
        raise ConfigError(
            f"solver.dt_us = {dt:g} must divide the drive step duration {sd:g}"
        )
    n_sub = int(round(t_final / dt))
    if abs(n_sub * dt - t_final) > 1e-9 * t_final:
        raise ConfigError("evolve.t_final must be a whole number of substeps")
    if sps % stride != 0:
        raise ConfigError(
            f"outputs.stride = {stride} must divide the {sps} substeps of each drive step"
        )
    return n_sub, sps


def apply_hamiltonian(g: Geometry, schedule: Schedule, t: float, psi: np.ndarray) -> np.ndarray:
    """H(t) |psi> in angular units (rad/us); plain-numpy reference implementation."""
    n = g.n_sites
    dim = 1 << n
    if psi.shape != (dim,):
        raise ConfigError(f"state vector must have length {dim}")
    if isinstance(schedule, RapSchedule):
        delta = rap_delta(schedule, t)
        omegas = [rap_omega(schedule, j, t) for j in range(n)]
    else:
        pairs = [rabi_drive(schedule, j, t) for j in range(n)]
        delta = pairs[0][1]
        omegas = [p[0] for p in pairs]
    idx = np.arange(dim, dtype=np.int64)
    out = (_interaction_diag(g) - 0.5 * angular(delta) * _zsum(n)) * psi
    for j, om in enumerate(omegas):
        if om != 0.0:
            out = out + 0.5 * angular(om) * psi[idx ^ (1 << j)]
    return out


def hamiltonian_matrix(g: Geometry, schedule: Schedule, t: float) -> np.ndarray:
    """Dense H(t) (angular); intended for small N."""
    dim = 1 << g.n_sites
    h = np.empty((dim, dim), dtype=np.complex128)
    for k in range(dim):
        e = np.zeros(dim, dtype=np.complex128)
        e[k] = 1.0
        h[:, k] = apply_hamiltonian(g, schedule, t, e)
    return h


def dressed_spectrum(
    g: Geometry, omega0: float, delta_grid: np.ndarray, driven_sites: tuple[int, ...] = (1,)
) -> np.ndarray:
    """Static two-atom eigenvalues (cyclic MHz) vs detuning, driving `driven_sites`.

    Exposes the interaction-shifted avoided crossing: at delta = V_nn the gap
    between the anticrossing pair equals omega0.
    """
    if g.n_sites != 2:
        raise ConfigError("dressed_spectrum expects a two-site geometry")
    v = float(g.pair_v[0])
    out = np.empty((len(delta_grid), 4), dtype=np.float64)
    sx = np.array([[0, 1], [1, 0]], dtype=np.float64)
    sz = np.array([[-1, 0], [0, 1]], dtype=np.float64)  # basis order |0>, |1>
    nn = np.array([[0, 0], [0, 1]], dtype=np.float64)
    eye = np.eye(2)
    # basis index r = b0 + 2 b1: site 1 owns the high bit, i.e. the first kron factor
    def onsite(op, j):
        return np.kron(eye, op) if j == 0 else np.kron(op, eye)

    hint = v * np.kron(nn, nn)
    hdrive = sum(0.5 * omega0 * onsite(sx, j) for j in driven_sites)
    zsum = onsite(sz, 0) + onsite(sz, 1)
    for i, d in enumerate(delta_grid):
        h = hdrive - 0.5 * float(d) * zsum + hint
        out[i] = np.linalg.eigvalsh(h)
    return out


def evolve(
    g: Geometry, schedule: Schedule, spec: EvolveSpec, initial: ManyBodyState
) -> RunResult:
    """Integrate the (open) many-body dynamics and sample site populations."""
    n = g.n_sites
    if initial.n_sites != n:
        raise ConfigError(
            f"initial state has {initial.n_sites} sites, geometry has {n}"
        )
    if schedule.site_group.shape[0] != n:
        raise ConfigError("schedule site groups do not match the geometry")

    use_density = spec.gamma > 0.0 or initial.kind is StateKind.DENSITY
    if use_density and n > MAX_DENSITY_SITES:
        raise ResourceRefusalError(
            f"density-matrix solver refuses N = {n} > {MAX_DENSITY_SITES} sites "
            f"(matrix would be 4^{n}); use the mean-field solver"
        )
    if not use_density and n > MAX_PURE_SITES:
        raise ResourceRefusalError(
            f"state-vector solver refuses N = {n} > {MAX_PURE_SITES} sites"
        )

    n_sub, _ = substep_layout(schedule, spec.dt, spec.t_final, spec.output_stride)
    stride = spec.output_stride
    n_samples = n_sub // stride + 1
    out_t = np.zeros(n_samples, dtype=np.float64)
    out_pops = np.zeros((n_samples, n), dtype=np.float64)

    int_diag = _interaction_diag(g)
    zs = _zsum(n)
    wc = 0.5 * (zs + n)  # popcount
    bits_a, bits_b, all_bits = _group_bits(schedule.site_group)
    site_bit = all_bits
    kind, p0, om_eff, de_eff, amp, fg = schedule.scalar_params()

    residuals: dict[str, float] = {}
    if use_density:
        rho = np.ascontiguousarray(initial.to_density().data.astype(np.complex128))
        status, bad_t = kernels.evolve_density_kernel(
            rho, spec.dt, n_sub, stride,
            kind, p0, om_eff, de_eff, amp, fg,
            bits_a, bits_b, all_bits,
            int_diag, zs, wc,
            angular(spec.gamma),
            site_bit,
            out_t, out_pops, (tracedev := np.zeros(n_samples)),
        )
        if status != 0:
            raise NumericalInstabilityError(
                f"density evolution produced {'non-finite' if status == 1 else 'out-of-bounds'} "
                f"values at t = {bad_t:g} us (dt too coarse for these parameters?)",
                bad_t,
            )
        residuals["max_trace_dev"] = float(np.max(tracedev))
        residuals["final_herm_dev"] = float(np.max(np.abs(rho - rho.conj().T)))
        if rho.shape[0] <= 4096:
            residuals["final_min_eig"] = float(np.linalg.eigvalsh(rho)[0])
        final = ManyBodyState(StateKind.DENSITY, n, rho)
    else:
        psi = np.ascontiguousarray(initial.data.astype(np.complex128))
        status, bad_t, max_norm_dev = kernels.evolve_pure_kernel(
            psi, spec.dt, n_sub, stride,
            kind, p0, om_eff, de_eff, amp, fg,
            bits_a, bits_b,
            int_diag, zs,
            site_bit,
            out_t, out_pops,
        )
        if status != 0:
            raise NumericalInstabilityError(
                f"state-vector evolution lost normalisability at t = {bad_t:g} us",
                bad_t,
            )
        residuals["max_step_norm_dev"] = float(max_norm_dev)
        residuals["purity"] = 1.0  # vector path: Tr rho^2 = 1 identically
        final = ManyBodyState(StateKind.PURE, n, psi)

    bad = ~np.isfinite(out_pops)
    if bad.any() or out_pops.min() < -1e-9 or out_pops.max() > 1.0 + 1e-9:
        i = int(np.argwhere(bad.any(axis=1) | (out_pops < -1e-9).any(axis=1)
                            | (out_pops > 1 + 1e-9).any(axis=1))[0][0])
        raise NumericalInstabilityError(
            f"site populations left [0, 1] at t = {out_t[i]:g} us", float(out_t[i])
        )

    return RunResult(
        t_us=out_t,
        populations=out_pops,
        stderr=None,
        step_duration_us=schedule.step_duration,
        n_steps=schedule.n_steps,
        variant="FULL_ME",
        geometry=g,
        residuals=residuals,
        meta={
            "dt_us": spec.dt,
            "gamma_mhz": spec.gamma,
            "n_substeps": n_sub,
            "output_stride": stride,
            "path": "density" if use_density else "pure",
        },
        final_state=final,
    )


def _disorder_worker(args) -> np.ndarray:
    g, schedule, spec, bits, d, k = args
    gk = sample_disorder(g, d, k)
    r = evolve(gk, schedule, spec, ManyBodyState.from_bitstring(bits))
    return r.populations


def disorder_average(
    g: Geometry,
    schedule: Schedule,
    spec: EvolveSpec,
    initial_bits: str,
    d: DisorderSpec,
    threads: int = 1,
) -> RunResult:
    """Quenched average over disorder realizations 0..n_realizations-1.

    Results are independent of `threads`: realization k always comes from the
    stream keyed (base_seed, k) and the average is a fixed-order reduction.
    """
    clean = evolve(g, schedule, spec, ManyBodyState.from_bitstring(initial_bits))
    jobs = [(g, schedule, spec, initial_bits, d, k) for k in range(d.n_realizations)]
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            per_real = list(pool.map(_disorder_worker, jobs, chunksize=1))
    else:
        per_real = [_disorder_worker(j) for j in jobs]

    stack = np.stack(per_real)  # (K, samples, sites)
    mean = stack.mean(axis=0)
    kreal = d.n_realizations
    if kreal > 1:
        se = stack.std(axis=0, ddof=1) / np.sqrt(kreal)
    else:
        se = np.zeros_like(mean)
    return RunResult(
        t_us=clean.t_us,
        populations=mean,
        stderr=se,
        step_duration_us=schedule.step_duration,
        n_steps=schedule.n_steps,
        variant="FULL_ME",
        geometry=g,
        residuals=dict(clean.residuals),
        meta={
            **clean.meta,
            "n_realizations": kreal,
            "disorder_sigma_um": d.sigma_r,
            "disorder_axes": d.axes,
            "disorder_seed": d.base_seed,
            "clean_final_populations": clean.populations[-1].tolist(),
        },
        final_state=None,
    )
