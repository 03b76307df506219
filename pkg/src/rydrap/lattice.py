"""Atom geometry: chains and square lattices with van der Waals pair couplings.

Pair topology is fixed by the ideal lattice (index adjacency for chains,
4-neighbourhood plus diagonals for squares); coupling strengths are always
recomputed from the actual, possibly displaced, positions as V = C6 / r^6.
That split is what makes position disorder meaningful: a displaced geometry
keeps the same pair list but different V_ij.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError


class Cutoff(Enum):
    NN_ONLY = "nn_only"
    NN_PLUS_NNN = "nn_plus_nnn"
    RADIUS = "radius"


@dataclass(frozen=True)
class Geometry:
    """A fixed arrangement of atoms and their pairwise couplings.

    positions : (n, 2) float64, um. Chains live on the x axis (y = 0).
    pairs     : (m, 2) int64 with i < j, ordered lexicographically.
    pair_v    : (m,) float64, cyclic MHz, exactly c6 / |r_i - r_j|^6.
    shape     : (height, width) for square lattices, None for chains.
    """

    dimension: int
    positions: np.ndarray
    ideal_spacing: float
    c6: float
    cutoff: Cutoff
    cutoff_radius: float | None
    pairs: np.ndarray
    pair_v: np.ndarray
    shape: tuple[int, int] | None = None

    @property
    def n_sites(self) -> int:
        return self.positions.shape[0]

    def site_rowcol(self, site: int) -> tuple[int, int]:
        """(row, col) of a site; chains report row 0."""
        if self.shape is None:
            return (0, int(site))
        return (int(site) // self.shape[1], int(site) % self.shape[1])


@dataclass(frozen=True)
class DisorderSpec:
    """Gaussian position disorder: iid N(0, sigma_r) per site per displaced axis."""

    sigma_r: float          # um, standard deviation per axis
    axes: int               # 1 = along x only, 2 = both in-plane axes
    n_realizations: int
    base_seed: int

    def __post_init__(self):
        if self.sigma_r < 0:
            raise ConfigError("disorder.sigma_r must be >= 0")
        if self.axes not in (1, 2):
            raise ConfigError("disorder.axes must be 1 or 2")
        if self.n_realizations < 1:
            raise ConfigError("disorder.n_realizations must be >= 1")


def _pair_couplings(positions: np.ndarray, pairs: np.ndarray, c6: float) -> np.ndarray:
    if pairs.shape[0] == 0:
        return np.zeros(0, dtype=np.float64)
    d = positions[pairs[:, 0]] - positions[pairs[:, 1]]
    r2 = np.sum(d * d, axis=1)
    return c6 / (r2 * r2 * r2)


def _ideal_pair_couplings(index_disp: np.ndarray, v_base: np.float64) -> np.ndarray:
    """Couplings of the undisplaced lattice, from integer index displacements.

    v_base is the coupling at one lattice constant. Scaling it by the integer
    (k^2+l^2)^3 instead of recomputing c6/r^6 from the stored positions keeps
    same-offset pairs bit-identical and makes the NN value, the 1/64 (1D
    next-nearest) and the 1/8 (2D diagonal) ratios exact, with a single
    rounding for every other shell.
    """
    if index_disp.shape[0] == 0:
        return np.zeros(0, dtype=np.float64)
    d2 = np.sum(index_disp * index_disp, axis=1).astype(np.float64)
    return v_base / (d2 * d2 * d2)


def _resolve_c6(spacing: float, c6: float | None, v_nn: float | None) -> tuple[float, float]:
    """Return (c6, coupling at one lattice constant)."""
    if (c6 is None) == (v_nn is None):
        raise ConfigError("geometry: give exactly one of c6 or v_nn")
    if c6 is None:
        v_base = float(v_nn)
        c6 = v_base * spacing**6
    else:
        v_base = float(c6) / spacing**6
    if c6 <= 0:
        raise ConfigError("geometry: c6 must be > 0")
    return float(c6), v_base


def build_chain(
    n_sites: int,
    spacing: float,
    *,
    c6: float | None = None,
    v_nn: float | None = None,
    cutoff: Cutoff = Cutoff.NN_ONLY,
    cutoff_radius: float | None = None,
) -> Geometry:
    """Equally spaced chain along x. Pair topology by index distance:
    NN_ONLY -> |i-j| = 1, NN_PLUS_NNN -> |i-j| <= 2, RADIUS -> ideal distance <= cutoff_radius.
    """
    if n_sites < 1:
        raise ConfigError("geometry.n must be >= 1")
    if spacing <= 0:
        raise ConfigError("geometry.spacing_um must be > 0")
    c6, v_base = _resolve_c6(spacing, c6, v_nn)
    if cutoff is Cutoff.RADIUS:
        if cutoff_radius is None or cutoff_radius <= 0:
            raise ConfigError("geometry.cutoff_radius_um must be > 0 for radius cutoff")
        max_hop = int(np.floor(cutoff_radius * (1 + 1e-12) / spacing))
    elif cutoff is Cutoff.NN_PLUS_NNN:
        max_hop = 2
    else:
        max_hop = 1

    positions = np.zeros((n_sites, 2), dtype=np.float64)
    positions[:, 0] = spacing * np.arange(n_sites)
    pairs = [
        (i, j)
        for i in range(n_sites)
        for j in range(i + 1, min(i + max_hop, n_sites - 1) + 1)
    ]
    pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    index_disp = np.zeros((pairs.shape[0], 2), dtype=np.int64)
    index_disp[:, 0] = pairs[:, 1] - pairs[:, 0]
    return Geometry(
        dimension=1,
        positions=positions,
        ideal_spacing=float(spacing),
        c6=c6,
        cutoff=cutoff,
        cutoff_radius=cutoff_radius,
        pairs=pairs,
        pair_v=_ideal_pair_couplings(index_disp, v_base),
        shape=None,
    )


def build_square(
    width: int,
    height: int,
    spacing: float,
    *,
    c6: float | None = None,
    v_nn: float | None = None,
) -> Geometry:
    """width x height square lattice, row-major indexing (site = row*width + col).

    Couplings extend over the full 8-neighbourhood: the 4 nearest neighbours
    plus the 4 diagonals (V_diag = V_nn / 8); nothing beyond.
    """
    if width < 1 or height < 1:
        raise ConfigError("geometry.width/height must be >= 1")
    if spacing <= 0:
        raise ConfigError("geometry.spacing_um must be > 0")
    c6, v_base = _resolve_c6(spacing, c6, v_nn)

    n = width * height
    positions = np.zeros((n, 2), dtype=np.float64)
    positions[:, 0] = spacing * (np.arange(n) % width)
    positions[:, 1] = spacing * (np.arange(n) // width)

    pairs = []
    for s in range(n):
        r, c = divmod(s, width)
        for dr, dc in ((0, 1), (1, -1), (1, 0), (1, 1)):
            r2, c2 = r + dr, c + dc
            if 0 <= r2 < height and 0 <= c2 < width:
                pairs.append((s, r2 * width + c2))
    pairs = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    index_disp = np.zeros((pairs.shape[0], 2), dtype=np.int64)
    index_disp[:, 0] = pairs[:, 1] % width - pairs[:, 0] % width
    index_disp[:, 1] = pairs[:, 1] // width - pairs[:, 0] // width
    return Geometry(
        dimension=2,
        positions=positions,
        ideal_spacing=float(spacing),
        c6=c6,
        cutoff=Cutoff.NN_PLUS_NNN,
        cutoff_radius=None,
        pairs=pairs,
        pair_v=_ideal_pair_couplings(index_disp, v_base),
        shape=(height, width),
    )


def sample_disorder(g: Geometry, d: DisorderSpec, k: int) -> Geometry:
    """Realization k of the disorder ensemble: same pair topology, displaced positions.

    Deterministic: realization k is drawn from a Philox stream keyed
    (d.base_seed, k), independent of how many realizations run or in what order.
    """
    if not 0 <= k:
        raise ConfigError("disorder realization index must be >= 0")
    rng = np.random.Generator(
        np.random.Philox(key=np.array([d.base_seed % 2**64, k % 2**64], dtype=np.uint64))
    )
    delta = np.zeros_like(g.positions)
    delta[:, : d.axes] = rng.normal(0.0, d.sigma_r, size=(g.n_sites, d.axes))
    positions = g.positions + delta
    return Geometry(
        dimension=g.dimension,
        positions=positions,
        ideal_spacing=g.ideal_spacing,
        c6=g.c6,
        cutoff=g.cutoff,
        cutoff_radius=g.cutoff_radius,
        pairs=g.pairs,
        pair_v=_pair_couplings(positions, g.pairs, g.c6),
        shape=g.shape,
    )


def disorder_scale_estimate(v_nn: float, sigma_r: float, c6: float) -> float:
    """First-order rms spread of the NN coupling under per-axis sigma_r on both atoms.

    6 |V|^(7/6) sqrt(2) sigma_r / |C6|^(1/6)  [MHz]; the sqrt(2) collects the
    two independent atom displacements along the pair axis.
    """
    return 6.0 * abs(v_nn) ** (7.0 / 6.0) * np.sqrt(2.0) * sigma_r / abs(c6) ** (1.0 / 6.0)


def neighbor_table(g: Geometry) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSR-style adjacency (indptr, site_index, v_mhz) over both pair directions.

    Neighbour lists are sorted by site index, so sums over them have a fixed
    floating-point evaluation order.
    """
    n = g.n_sites
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for (i, j), v in zip(g.pairs, g.pair_v):
        adj[int(i)].append((int(j), float(v)))
        adj[int(j)].append((int(i), float(v)))
    indptr = np.zeros(n + 1, dtype=np.int64)
    idx = []
    val = []
    for s in range(n):
        adj[s].sort()
        indptr[s + 1] = indptr[s] + len(adj[s])
        idx.extend(a for a, _ in adj[s])
        val.extend(v for _, v in adj[s])
    return indptr, np.array(idx, dtype=np.int64), np.array(val, dtype=np.float64)


def geometry_csv_lines(g: Geometry) -> list[str]:
    lines = ["site,x_um,y_um"]
    for s in range(g.n_sites):
        lines.append(f"{s},{g.positions[s, 0]:.17g},{g.positions[s, 1]:.17g}")
    return lines


def pairs_csv_lines(g: Geometry) -> list[str]:
    lines = ["i,j,distance_um,v_mhz"]
    for (i, j), v in zip(g.pairs, g.pair_v):
        d = float(np.hypot(*(g.positions[i] - g.positions[j])))
        lines.append(f"{i},{j},{d:.17g},{v:.17g}")
    return lines
