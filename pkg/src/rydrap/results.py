"""Run results and deterministic artifact serialisation.

CSV floats are written with %.17g (round-trip exact for float64) and '\n'
newlines, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lattice import Geometry


@dataclass
class RunResult:
    """Sampled site populations of one run (or ensemble/disorder average).

    t_us        : (n_samples,) sample times, always including t = 0 and every
                  avalanche-step boundary k * step_duration_us, k = 0..n_steps.
    populations : (n_samples, n_sites) <n_j>.
    stderr      : same shape, standard error over the ensemble, or None.
    """

    t_us: np.ndarray
    populations: np.ndarray
    stderr: np.ndarray | None
    step_duration_us: float
    n_steps: int
    variant: str
    geometry: Geometry
    residuals: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    final_state: object = None

    @property
    def n_sites(self) -> int:
        return self.populations.shape[1]

    def step_indices(self) -> np.ndarray:
        """Sample indices of the avalanche-step boundaries 0..n_steps."""
        idx = np.empty(self.n_steps + 1, dtype=np.int64)
        for k in range(self.n_steps + 1):
            target = k * self.step_duration_us
            i = int(np.argmin(np.abs(self.t_us - target)))
            if abs(self.t_us[i] - target) > 1e-9 * max(1.0, abs(target)):
                raise ValueError(
                    f"sample grid misses step boundary {k} (wanted t={target:g}, "
                    f"nearest {self.t_us[i]:g})"
                )
            idx[k] = i
        return idx

    def populations_at_steps(self) -> np.ndarray:
        """(n_steps + 1, n_sites) populations at step boundaries."""
        return self.populations[self.step_indices()]


def pairwise_sum(arrays: list[np.ndarray]) -> np.ndarray:
    """Sum a list of equal-shape arrays by pairwise halving.

    The reduction tree depends only on len(arrays), so the result is
    bit-identical however the inputs were produced (serially or in a pool).
    """
    if not arrays:
        raise ValueError("pairwise_sum needs at least one array")
    work = list(arrays)
    while len(work) > 1:
        nxt = []
        for i in range(0, len(work) - 1, 2):
            nxt.append(work[i] + work[i + 1])
        if len(work) % 2:
            nxt.append(work[-1])
        work = nxt
    return work[0]


def fmt(x: float) -> str:
    return f"{x:.17g}"


def write_lines(path: Path, lines: list[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def populations_csv_lines(result: RunResult) -> list[str]:
    n = result.n_sites
    lines = ["t_us," + ",".join(f"n_{j}" for j in range(n))]
    for i in range(result.t_us.shape[0]):
        row = [fmt(float(result.t_us[i]))]
        row.extend(fmt(float(result.populations[i, j])) for j in range(n))
        lines.append(",".join(row))
    return lines


def stderr_csv_lines(result: RunResult) -> list[str]:
    n = result.n_sites
    lines = ["t_us," + ",".join(f"se_{j}" for j in range(n))]
    for i in range(result.t_us.shape[0]):
        row = [fmt(float(result.t_us[i]))]
        row.extend(fmt(float(result.stderr[i, j])) for j in range(n))
        lines.append(",".join(row))
    return lines


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: Path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
