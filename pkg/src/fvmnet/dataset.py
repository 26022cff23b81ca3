"""Per-cell training data extracted from snapshot series.

Each sample pairs a stencil of local values at time t with a scalar target for
one designated variable. Inputs come in two layouts: a five-point tier per
variable (center, axial neighbors, radial neighbors) or the bare cell-center
values. Targets come in two flavors: the forward-difference time derivative
(x_next - x) / dt or the raw next-step value.

Samples are harvested only from the middle band of the channel; the inlet and
outlet strips stay on the solver's books, which also guarantees every sampled
cell has both axial neighbors. Missing radial neighbors are patched by rule:
the axis mirror uses the center value, the wall either repeats the center
(zero-gradient reading) or substitutes a fixed per-variable wall value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError
from .solver import IDX, N_VARS, VARIABLES, GridSpec, Snapshot

INPUT_MODES = ("tier", "center")
OUTPUT_MODES = ("derivative", "absolute")
WALL_POLICIES = ("zero_neumann", "wall_value")

# Stencil slots per variable, in feature order.
TIER_SLOTS = ("center", "i-1", "i+1", "j-1", "j+1")
TIER_WIDTH = len(TIER_SLOTS) * N_VARS  # 30


@dataclass(frozen=True)
class DomainPartition:
    """Axial split into inlet strip, sampled middle band, outlet strip.

    Strips are m_star columns wide on each end; the middle band is
    [m_star, m - m_star).
    """

    m: int
    m_star: int

    def __post_init__(self):
        if self.m_star < 1:
            raise DomainError(f"m_star must be >= 1, got {self.m_star}")
        if self.m - 2 * self.m_star < 1:
            raise DomainError(
                f"partition leaves no middle band: m={self.m}, m_star={self.m_star}"
            )

    @property
    def inlet(self) -> Tuple[int, int]:
        return (0, self.m_star)

    @property
    def flame(self) -> Tuple[int, int]:
        return (self.m_star, self.m - self.m_star)

    @property
    def outlet(self) -> Tuple[int, int]:
        return (self.m - self.m_star, self.m)

    def flame_width(self) -> int:
        return self.m - 2 * self.m_star

    def contains(self, i: int) -> bool:
        return self.m_star <= i < self.m - self.m_star


@dataclass(frozen=True)
class TierSample:
    """One training sample: stencil input, scalar target, provenance."""

    input: np.ndarray
    target: float
    cell: Tuple[int, int]
    time: float


def _check_wall_args(wall_policy: str, wall_values) -> Optional[np.ndarray]:
    if wall_policy not in WALL_POLICIES:
        raise DomainError(f"wall_policy must be one of {WALL_POLICIES}, got {wall_policy!r}")
    if wall_policy == "wall_value":
        if wall_values is None:
            raise DomainError("wall_value policy needs a wall_values vector")
        wv = np.asarray(wall_values, dtype=np.float64)
        if wv.shape != (N_VARS,):
            raise DomainError(f"wall_values must have shape ({N_VARS},), got {wv.shape}")
        return wv
    return None


def tier_input(
    snapshot: Snapshot,
    i: int,
    j: int,
    partition: DomainPartition,
    wall_policy: str = "zero_neumann",
    wall_values=None,
) -> np.ndarray:
    """Stencil vector for one cell: per variable [center, i-1, i+1, j-1, j+1].

    The cell must lie in the middle band, so both axial neighbors exist (the
    band edges legally read into the solver-owned strips). On the axis the
    j-1 slot repeats the center; at the wall the j+1 slot repeats the center
    or takes the per-variable wall value, by policy.
    """
    wv = _check_wall_args(wall_policy, wall_values)
    m, n = snapshot.shape
    if partition.m != m:
        raise DomainError(f"partition built for m={partition.m}, snapshot has m={m}")
    if not partition.contains(i):
        raise DomainError(f"cell ({i}, {j}) outside the sampled band {partition.flame}")
    if not 0 <= j < n:
        raise DomainError(f"radial index {j} outside [0, {n})")

    vals = snapshot.values
    out = np.empty(TIER_WIDTH)
    for k in range(N_VARS):
        c = vals[k, i, j]
        jm1 = c if j == 0 else vals[k, i, j - 1]
        if j == n - 1:
            jp1 = c if wv is None else wv[k]
        else:
            jp1 = vals[k, i, j + 1]
        out[5 * k : 5 * k + 5] = (c, vals[k, i - 1, j], vals[k, i + 1, j], jm1, jp1)
    return out


def center_input(snapshot: Snapshot, i: int, j: int, partition: DomainPartition) -> np.ndarray:
    """Cell-center values only, in variable order."""
    if not partition.contains(i):
        raise DomainError(f"cell ({i}, {j}) outside the sampled band {partition.flame}")
    return snapshot.values[:, i, j].copy()


def flame_cells(partition: DomainPartition, n: int) -> np.ndarray:
    """(count, 2) array of sampled cells, i-major then j, matching matrix rows."""
    lo, hi = partition.flame
    ii, jj = np.meshgrid(np.arange(lo, hi), np.arange(n), indexing="ij")
    return np.stack([ii.ravel(), jj.ravel()], axis=1)


def tier_matrix(
    snapshot: Snapshot,
    partition: DomainPartition,
    wall_policy: str = "zero_neumann",
    wall_values=None,
) -> np.ndarray:
    """Tier inputs for every middle-band cell, rows ordered like flame_cells."""
    wv = _check_wall_args(wall_policy, wall_values)
    m, n = snapshot.shape
    if partition.m != m:
        raise DomainError(f"partition built for m={partition.m}, snapshot has m={m}")
    lo, hi = partition.flame
    vals = snapshot.values

    slab = vals[:, lo:hi, :]
    im1 = vals[:, lo - 1 : hi - 1, :]
    ip1 = vals[:, lo + 1 : hi + 1, :]
    jm1 = np.empty_like(slab)
    jm1[:, :, 1:] = slab[:, :, :-1]
    jm1[:, :, 0] = slab[:, :, 0]
    jp1 = np.empty_like(slab)
    jp1[:, :, :-1] = slab[:, :, 1:]
    if wv is None:
        jp1[:, :, -1] = slab[:, :, -1]
    else:
        jp1[:, :, -1] = wv[:, None]

    # (vars, slots, band, n) -> (band, n, vars, slots) -> rows of width 5*vars
    stack = np.stack([slab, im1, ip1, jm1, jp1], axis=1)
    return np.ascontiguousarray(
        stack.transpose(2, 3, 0, 1).reshape((hi - lo) * n, TIER_WIDTH)
    )


def center_matrix(snapshot: Snapshot, partition: DomainPartition) -> np.ndarray:
    """Center-only inputs for every middle-band cell."""
    m, n = snapshot.shape
    if partition.m != m:
        raise DomainError(f"partition built for m={partition.m}, snapshot has m={m}")
    lo, hi = partition.flame
    slab = snapshot.values[:, lo:hi, :]
    return np.ascontiguousarray(slab.transpose(1, 2, 0).reshape((hi - lo) * n, N_VARS))


def input_matrix(
    snapshot: Snapshot,
    partition: DomainPartition,
    input_mode: str,
    wall_policy: str = "zero_neumann",
    wall_values=None,
) -> np.ndarray:
    if input_mode == "tier":
        return tier_matrix(snapshot, partition, wall_policy, wall_values)
    if input_mode == "center":
        return center_matrix(snapshot, partition)
    raise DomainError(f"input_mode must be one of {INPUT_MODES}, got {input_mode!r}")


def _check_pair(snap_t: Snapshot, snap_next: Snapshot, dt: float) -> None:
    if snap_t.shape != snap_next.shape:
        raise DomainError(
            f"snapshot pair shapes differ: {snap_t.shape} vs {snap_next.shape}"
        )
    elapsed = snap_next.time - snap_t.time
    if abs(elapsed - dt) > 1e-9 * max(1.0, abs(dt)):
        raise DomainError(
            f"snapshot pair is not one step apart: gap {elapsed:.12g}, dt {dt:.12g}"
        )


def derivative_target(
    snap_t: Snapshot,
    snap_next: Snapshot,
    i: int,
    j: int,
    variable: str,
    dt: float,
) -> float:
    """Forward-difference rate (x_next - x) / dt for one cell and variable."""
    _check_pair(snap_t, snap_next, dt)
    if variable not in IDX:
        raise DomainError(f"unknown variable {variable!r}")
    k = IDX[variable]
    return float((snap_next.values[k, i, j] - snap_t.values[k, i, j]) / dt)


def target_matrix(
    snap_t: Snapshot,
    snap_next: Snapshot,
    partition: DomainPartition,
    dt: float,
    output_mode: str,
) -> np.ndarray:
    """(cells, vars) matrix of targets for one consecutive pair."""
    if output_mode not in OUTPUT_MODES:
        raise DomainError(f"output_mode must be one of {OUTPUT_MODES}, got {output_mode!r}")
    _check_pair(snap_t, snap_next, dt)
    lo, hi = partition.flame
    n = snap_t.shape[1]
    cur = snap_t.values[:, lo:hi, :]
    nxt = snap_next.values[:, lo:hi, :]
    if output_mode == "derivative":
        block = (nxt - cur) / dt
    else:
        block = nxt
    return np.ascontiguousarray(block.transpose(1, 2, 0).reshape((hi - lo) * n, N_VARS))


# ----- standardization -----


STD_FLOOR_SCALE = 1e-12


def _floored_std(std: np.ndarray, mean: np.ndarray) -> np.ndarray:
    floor = STD_FLOOR_SCALE * np.maximum(1.0, np.abs(mean))
    return np.maximum(std, floor)


@dataclass
class Standardizer:
    """Per-feature affine map to zero mean, unit spread, with exact inverse.

    Stds carry a floor of 1e-12 * max(1, |mean|) so constant features stay
    invertible. Optional scalar target statistics ride along for bundles that
    standardize their regression target.
    """

    mean: np.ndarray
    std: np.ndarray
    target_mean: Optional[float] = None
    target_std: Optional[float] = None

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise DomainError("standardizer mean/std must be matching 1-D arrays")
        if np.any(self.std <= 0.0):
            raise DomainError("standardizer stds must be positive")

    @property
    def width(self) -> int:
        return self.mean.size

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.width:
            raise DomainError(f"standardizer width {self.width}, input width {x.shape[-1]}")
        return (x - self.mean) / self.std

    def invert(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.width:
            raise DomainError(f"standardizer width {self.width}, input width {z.shape[-1]}")
        return z * self.std + self.mean

    def apply_target(self, y):
        if self.target_mean is None:
            raise DomainError("standardizer has no target statistics")
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def invert_target(self, z):
        if self.target_mean is None:
            raise DomainError("standardizer has no target statistics")
        return np.asarray(z, dtype=np.float64) * self.target_std + self.target_mean

    def to_dict(self) -> dict:
        out = {"mean": self.mean.tolist(), "std": self.std.tolist()}
        if self.target_mean is not None:
            out["target_mean"] = float(self.target_mean)
            out["target_std"] = float(self.target_std)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Standardizer":
        return cls(
            mean=np.asarray(data["mean"], dtype=np.float64),
            std=np.asarray(data["std"], dtype=np.float64),
            target_mean=data.get("target_mean"),
            target_std=data.get("target_std"),
        )


def fit_standardizer(inputs: np.ndarray, targets: Optional[np.ndarray] = None) -> Standardizer:
    """Population statistics of the given rows (training rows only, by contract)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise DomainError(f"need a non-empty 2-D sample matrix, got shape {inputs.shape}")
    mean = inputs.mean(axis=0)
    std = _floored_std(inputs.std(axis=0), mean)
    tm = ts = None
    if targets is not None:
        targets = np.asarray(targets, dtype=np.float64)
        if targets.shape != (inputs.shape[0],):
            raise DomainError("targets must be one scalar per input row")
        tm = float(targets.mean())
        ts = float(
            _floored_std(np.array([targets.std()]), np.array([tm]))[0]
        )
    return Standardizer(mean=mean, std=std, target_mean=tm, target_std=ts)


def target_scale(targets: np.ndarray) -> Tuple[float, float]:
    """Scalar (mean, floored std) for standardizing one regression target."""
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if targets.size == 0:
        raise DomainError("cannot compute a target scale from zero samples")
    tm = float(targets.mean())
    ts = float(_floored_std(np.array([targets.std()]), np.array([tm]))[0])
    return tm, ts


# ----- dataset assembly -----


@dataclass
class DatasetSplit:
    """Shuffled train/validation rows for one designated variable."""

    variable: str
    input_mode: str
    output_mode: str
    wall_policy: str
    train_inputs: np.ndarray
    train_targets: np.ndarray
    train_cells: np.ndarray
    train_times: np.ndarray
    val_inputs: np.ndarray
    val_targets: np.ndarray
    val_cells: np.ndarray
    val_times: np.ndarray
    split_fraction: float
    seed: int

    @property
    def n_total(self) -> int:
        return self.train_inputs.shape[0] + self.val_inputs.shape[0]

    def iter_samples(self, which: str = "train") -> Iterator[TierSample]:
        if which not in ("train", "val"):
            raise DomainError("which must be 'train' or 'val'")
        inputs = getattr(self, f"{which}_inputs")
        targets = getattr(self, f"{which}_targets")
        cells = getattr(self, f"{which}_cells")
        times = getattr(self, f"{which}_times")
        for row in range(inputs.shape[0]):
            yield TierSample(
                input=inputs[row],
                target=float(targets[row]),
                cell=(int(cells[row, 0]), int(cells[row, 1])),
                time=float(times[row]),
            )


def _harvest(
    series: Sequence[Snapshot],
    grid: GridSpec,
    partition: DomainPartition,
    input_mode: str,
    output_mode: str,
    wall_policy: str,
    wall_values,
):
    if len(series) < 2:
        raise DomainError(f"dataset window needs >= 2 snapshots, got {len(series)}")
    if input_mode not in INPUT_MODES:
        raise DomainError(f"input_mode must be one of {INPUT_MODES}, got {input_mode!r}")
    if output_mode not in OUTPUT_MODES:
        raise DomainError(f"output_mode must be one of {OUTPUT_MODES}, got {output_mode!r}")

    n = series[0].shape[1]
    cells = flame_cells(partition, n)
    inputs, targets, cell_rows, times = [], [], [], []
    for snap_t, snap_next in zip(series[:-1], series[1:]):
        inputs.append(input_matrix(snap_t, partition, input_mode, wall_policy, wall_values))
        targets.append(target_matrix(snap_t, snap_next, partition, grid.dt, output_mode))
        cell_rows.append(cells)
        times.append(np.full(cells.shape[0], snap_t.time))
    return (
        np.concatenate(inputs, axis=0),
        np.concatenate(targets, axis=0),
        np.concatenate(cell_rows, axis=0),
        np.concatenate(times, axis=0),
    )


def build_datasets(
    series: Sequence[Snapshot],
    grid: GridSpec,
    partition: DomainPartition,
    variables: Sequence[str] = VARIABLES,
    input_mode: str = "tier",
    output_mode: str = "derivative",
    split_fraction: float = 0.8,
    seed: int = 0,
    wall_policy: str = "zero_neumann",
    wall_values=None,
) -> dict:
    """One DatasetSplit per requested variable, sharing inputs and shuffle.

    Every consecutive pair in the window yields one sample per middle-band
    cell. All variables see identical input rows in identical shuffled order,
    so an input standardizer fitted on any one train split serves them all.
    """
    for v in variables:
        if v not in IDX:
            raise DomainError(f"unknown variable {v!r}")
    if not 0.0 < split_fraction < 1.0:
        raise DomainError(f"split_fraction must be in (0, 1), got {split_fraction}")

    inputs, target_cols, cells, times = _harvest(
        series, grid, partition, input_mode, output_mode, wall_policy, wall_values
    )
    total = inputs.shape[0]
    perm = np.random.default_rng(seed).permutation(total)
    n_train = int(round(split_fraction * total))
    if n_train == 0 or n_train == total:
        raise DomainError(
            f"split {split_fraction} leaves an empty side for {total} samples"
        )
    tr, va = perm[:n_train], perm[n_train:]

    out = {}
    for v in variables:
        col = target_cols[:, IDX[v]]
        out[v] = DatasetSplit(
            variable=v,
            input_mode=input_mode,
            output_mode=output_mode,
            wall_policy=wall_policy,
            train_inputs=inputs[tr],
            train_targets=col[tr],
            train_cells=cells[tr],
            train_times=times[tr],
            val_inputs=inputs[va],
            val_targets=col[va],
            val_cells=cells[va],
            val_times=times[va],
            split_fraction=split_fraction,
            seed=seed,
        )
    return out


def build_dataset(
    series: Sequence[Snapshot],
    grid: GridSpec,
    partition: DomainPartition,
    variable: str,
    **kwargs,
) -> DatasetSplit:
    """Single-variable convenience wrapper around build_datasets."""
    return build_datasets(series, grid, partition, variables=[variable], **kwargs)[variable]
