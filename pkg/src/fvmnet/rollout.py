"""Rollout evaluation: surrogate stepping, error metrics, residual tracking.

A trained SurrogateBundle advances the middle band of the domain one Euler
step at a time while the reference solver keeps advancing the inlet and
outlet strips. Three evaluation modes compare the result against a stored
truth series: teacher-forced single-step, autoregressive multi-step, and a
frozen constant-gradient baseline.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .dataset import (
    INPUT_MODES,
    OUTPUT_MODES,
    TIER_WIDTH,
    DomainPartition,
    Standardizer,
    build_datasets,
    fit_standardizer,
    input_matrix,
    target_scale,
)
from .errors import BlowupError, ConfigurationError, DomainError
from .network import Network, NetworkSpec, init_network, predict
from .solver import (
    IDX,
    N_VARS,
    VARIABLES,
    GridSpec,
    PhysicalParams,
    Snapshot,
    continuity_residual,
    step,
    step_columns,
)
from .training import TrainConfig, TrainReport, derived_seed, train

MODES = ("multi", "single", "constant-gradient")

# Flame cells whose |truth| falls below this fraction of the variable's
# largest |truth| report absolute error and stay out of the max statistic;
# species and velocities pass through zero where a ratio means nothing.
DENOM_FLOOR_SCALE = 1e-6


def _check_state(state: Snapshot, grid: GridSpec, partition: DomainPartition) -> None:
    if state.shape != (grid.m, grid.n):
        raise DomainError(
            f"state shape {state.shape} does not match grid ({grid.m}, {grid.n})"
        )
    if partition.m != grid.m:
        raise DomainError(
            f"partition built for m={partition.m}, grid has m={grid.m}"
        )


@dataclass
class SurrogateBundle:
    """One trained network per variable plus the scaling that wraps them.

    All six networks read the same standardized input row; each output is
    un-scaled by that variable's target statistics before use.
    """

    networks: Dict[str, Network]
    standardizer: Standardizer
    target_scales: Dict[str, Tuple[float, float]]
    input_mode: str = "tier"
    output_mode: str = "derivative"
    wall_policy: str = "zero_neumann"
    wall_values: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.input_mode not in INPUT_MODES:
            raise DomainError(f"input_mode must be one of {INPUT_MODES}")
        if self.output_mode not in OUTPUT_MODES:
            raise DomainError(f"output_mode must be one of {OUTPUT_MODES}")
        missing = [v for v in VARIABLES if v not in self.networks]
        if missing:
            raise DomainError(f"bundle is missing networks for {missing}")
        missing = [v for v in VARIABLES if v not in self.target_scales]
        if missing:
            raise DomainError(f"bundle is missing target scales for {missing}")
        width = TIER_WIDTH if self.input_mode == "tier" else N_VARS
        if self.standardizer.width != width:
            raise DomainError(
                f"{self.input_mode!r} inputs have width {width}, "
                f"standardizer has width {self.standardizer.width}"
            )
        for v in VARIABLES:
            spec = self.networks[v].spec
            if spec.n_inputs != width or spec.n_outputs != 1:
                raise DomainError(
                    f"network for {v!r} maps {spec.n_inputs}->{spec.n_outputs}, "
                    f"bundle needs {width}->1"
                )
            if self.target_scales[v][1] <= 0.0:
                raise DomainError(f"target scale std for {v!r} must be positive")

    def cell_outputs(
        self,
        state: Snapshot,
        partition: DomainPartition,
        grid: GridSpec,
        params: PhysicalParams,
    ) -> np.ndarray:
        """(n_flame_cells, 6) physical-unit outputs, rows i-major over the band."""
        x = input_matrix(
            state, partition, self.input_mode, self.wall_policy, self.wall_values
        )
        z = self.standardizer.apply(x)
        out = np.empty((x.shape[0], N_VARS), dtype=np.float64)
        for v in VARIABLES:
            mean, std = self.target_scales[v]
            out[:, IDX[v]] = predict(self.networks[v], z) * std + mean
        return out


@dataclass
class DerivativeOracle:
    """Bundle stand-in returning the exact solver derivative per flame cell.

    Closes the loop for tests: feeding these outputs through predict_step
    must reproduce the reference solver on the middle band.
    """

    input_mode: str = "tier"
    output_mode: str = "derivative"

    def cell_outputs(
        self,
        state: Snapshot,
        partition: DomainPartition,
        grid: GridSpec,
        params: PhysicalParams,
    ) -> np.ndarray:
        advanced = step(state, grid, params)
        lo, hi = partition.flame
        band = (advanced.values[:, lo:hi, :] - state.values[:, lo:hi, :]) / grid.dt
        return np.ascontiguousarray(band.transpose(1, 2, 0).reshape(-1, N_VARS))


def _require_finite(values: np.ndarray, time_: float) -> None:
    if np.isfinite(values).all():
        return
    bad = np.argwhere(~np.isfinite(values))[0]
    k, i, j = int(bad[0]), int(bad[1]), int(bad[2])
    raise BlowupError(
        f"non-finite {VARIABLES[k]} at cell ({i}, {j}) "
        f"after surrogate step to t={time_:.6g}",
        variable=VARIABLES[k],
        cell=(i, j),
    )


def timed_predict_step(
    bundle,
    state: Snapshot,
    partition: DomainPartition,
    grid: GridSpec,
    params: PhysicalParams,
) -> Tuple[Snapshot, float, float]:
    """predict_step plus (ml_ms, cfd_ms) wall-clock split of the work."""
    _check_state(state, grid, partition)
    lo, hi = partition.flame

    t0 = time.perf_counter()
    outputs = bundle.cell_outputs(state, partition, grid, params)
    band = outputs.reshape(hi - lo, grid.n, N_VARS).transpose(2, 0, 1)
    if bundle.output_mode == "derivative":
        band = state.values[:, lo:hi, :] + grid.dt * band
    ml_ms = (time.perf_counter() - t0) * 1e3

    t1 = time.perf_counter()
    advanced = step_columns(state, grid, params, [partition.inlet, partition.outlet])
    cfd_ms = (time.perf_counter() - t1) * 1e3

    values = advanced.values
    values[:, lo:hi, :] = band
    _require_finite(values, advanced.time)
    return Snapshot(values, advanced.time), ml_ms, cfd_ms


def predict_step(
    bundle,
    state: Snapshot,
    partition: DomainPartition,
    grid: GridSpec,
    params: PhysicalParams,
) -> Snapshot:
    """One hybrid step: networks advance the middle band, solver the strips.

    Strip fluxes that touch the band read its time-t values, exactly as a
    whole-grid solver step would.
    """
    advanced, _, _ = timed_predict_step(bundle, state, partition, grid, params)
    return advanced


def relative_error(
    pred: Snapshot,
    truth: Snapshot,
    variable: str,
    partition: DomainPartition,
) -> Tuple[float, float]:
    """(max, mean) relative error over the middle band.

    Cells with |truth| below 1e-6 of the variable's band maximum contribute
    absolute error to the mean and are excluded from the max.
    """
    if pred.shape != truth.shape:
        raise DomainError(f"shape mismatch {pred.shape} vs {truth.shape}")
    lo, hi = partition.flame
    p = pred.var(variable)[lo:hi, :]
    t = truth.var(variable)[lo:hi, :]
    diff = np.abs(p - t)
    scale = float(np.abs(t).max())
    if scale == 0.0:
        return 0.0, float(diff.mean())
    ok = np.abs(t) >= DENOM_FLOOR_SCALE * scale
    err = np.where(ok, diff / np.where(ok, np.abs(t), 1.0), diff)
    max_err = float(err[ok].max()) if ok.any() else 0.0
    return max_err, float(err.mean())


def scaled_residual(
    state: Snapshot,
    prev: Snapshot,
    grid: GridSpec,
    params: PhysicalParams,
    denominator: float,
) -> float:
    """Continuity residual of the pair, scaled by the training-window value."""
    if not denominator > 0.0:
        raise ConfigurationError(
            f"residual denominator must be positive, got {denominator}"
        )
    return continuity_residual(state, prev, grid, params) / denominator


def residual_denominator(
    window: Sequence[Snapshot], grid: GridSpec, params: PhysicalParams
) -> float:
    """Unscaled continuity residual of the window's final consecutive pair."""
    if len(window) < 2:
        raise DomainError("residual denominator needs at least two snapshots")
    return continuity_residual(window[-1], window[-2], grid, params)


@dataclass(frozen=True)
class StepRecord:
    """Per-step evaluation row: errors by variable, residual, wall clock."""

    step: int
    max_errors: Mapping[str, float]
    mean_errors: Mapping[str, float]
    scaled_residual: float
    ml_ms: float
    cfd_ms: float


@dataclass
class RolloutReport:
    """One evaluation mode's full per-step record."""

    mode: str
    steps: List[StepRecord] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        for k, rec in enumerate(self.steps, start=1):
            if rec.step != k:
                raise DomainError(f"step records must be contiguous from 1, got {rec.step} at position {k}")
            for v in VARIABLES:
                if rec.max_errors[v] < 0.0 or rec.mean_errors[v] < 0.0:
                    raise DomainError(f"negative error recorded for {v!r} at step {k}")

    @property
    def horizon(self) -> int:
        return len(self.steps)

    def max_series(self, variable: str) -> List[float]:
        return [rec.max_errors[variable] for rec in self.steps]

    def mean_series(self, variable: str) -> List[float]:
        return [rec.mean_errors[variable] for rec in self.steps]

    def residual_series(self) -> List[float]:
        return [rec.scaled_residual for rec in self.steps]

    def final_max(self, variable: str) -> float:
        if not self.steps:
            raise DomainError("report has no steps")
        return self.steps[-1].max_errors[variable]


def _check_truth(
    truth: Sequence[Snapshot], initial: Snapshot, horizon: int, grid: GridSpec
) -> None:
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    if len(truth) < horizon + 1:
        raise DomainError(
            f"truth series has {len(truth)} snapshots, horizon {horizon} needs {horizon + 1}"
        )
    if abs(truth[0].time - initial.time) > 1e-9 * max(1.0, grid.dt):
        raise DomainError(
            f"truth starts at t={truth[0].time}, initial state is at t={initial.time}"
        )


def _record(
    k: int,
    pred: Snapshot,
    prev: Snapshot,
    truth_k: Snapshot,
    partition: DomainPartition,
    grid: GridSpec,
    params: PhysicalParams,
    denominator: float,
    ml_ms: float,
    cfd_ms: float,
) -> StepRecord:
    maxes, means = {}, {}
    for v in VARIABLES:
        maxes[v], means[v] = relative_error(pred, truth_k, v, partition)
    res = scaled_residual(pred, prev, grid, params, denominator)
    return StepRecord(
        step=k,
        max_errors=maxes,
        mean_errors=means,
        scaled_residual=res,
        ml_ms=ml_ms,
        cfd_ms=cfd_ms,
    )


def multi_step(
    bundle,
    initial: Snapshot,
    horizon: int,
    truth: Sequence[Snapshot],
    partition: DomainPartition,
    grid: GridSpec,
    params: PhysicalParams,
    denominator: float,
) -> RolloutReport:
    """Autoregressive rollout: each step consumes the previous predicted state."""
    _check_truth(truth, initial, horizon, grid)
    records = []
    state = initial
    for k in range(1, horizon + 1):
        try:
            advanced, ml_ms, cfd_ms = timed_predict_step(
                bundle, state, partition, grid, params
            )
        except BlowupError as err:
            raise BlowupError(
                f"multi-step rollout failed at step {k}: {err}",
                variable=err.variable,
                cell=err.cell,
            ) from err
        records.append(
            _record(k, advanced, state, truth[k], partition, grid, params,
                    denominator, ml_ms, cfd_ms)
        )
        state = advanced
    return RolloutReport(mode="multi", steps=records)


def single_step(
    bundle,
    truth: Sequence[Snapshot],
    partition: DomainPartition,
    grid: GridSpec,
    params: PhysicalParams,
    denominator: float,
    horizon: Optional[int] = None,
) -> RolloutReport:
    """Teacher-forced rollout: every step restarts from the true snapshot."""
    if horizon is None:
        horizon = len(truth) - 1
    _check_truth(truth, truth[0], horizon, grid)
    records = []
    for k in range(1, horizon + 1):
        try:
            advanced, ml_ms, cfd_ms = timed_predict_step(
                bundle, truth[k - 1], partition, grid, params
            )
        except BlowupError as err:
            raise BlowupError(
                f"single-step rollout failed at step {k}: {err}",
                variable=err.variable,
                cell=err.cell,
            ) from err
        records.append(
            _record(k, advanced, truth[k - 1], truth[k], partition, grid, params,
                    denominator, ml_ms, cfd_ms)
        )
    return RolloutReport(mode="single", steps=records)


def window_gradient(first: Snapshot, second: Snapshot, grid: GridSpec) -> np.ndarray:
    """Frozen per-cell time gradient (6, m, n) from one consecutive pair."""
    if first.shape != second.shape:
        raise DomainError(f"shape mismatch {first.shape} vs {second.shape}")
    gap = second.time - first.time
    if abs(gap - grid.dt) > 1e-9 * max(1.0, grid.dt):
        raise DomainError(
            f"snapshots are {gap} apart, expected one step of dt={grid.dt}"
        )
    return (second.values - first.values) / grid.dt


def constant_gradient(
    initial: Snapshot,
    gradient: np.ndarray,
    horizon: int,
    truth: Sequence[Snapshot],
    partition: DomainPartition,
    grid: GridSpec,
    params: PhysicalParams,
    denominator: float,
) -> RolloutReport:
    """Baseline: apply one frozen gradient to the middle band every step.

    The strips hold their initial values; error statistics only read the
    middle band, so the strips serve the residual diagnostic alone.
    """
    _check_state(initial, grid, partition)
    _check_truth(truth, initial, horizon, grid)
    gradient = np.asarray(gradient, dtype=np.float64)
    if gradient.shape != initial.values.shape:
        raise DomainError(
            f"gradient shape {gradient.shape} does not match state {initial.values.shape}"
        )
    lo, hi = partition.flame
    records = []
    prev = initial
    for k in range(1, horizon + 1):
        t0 = time.perf_counter()
        values = initial.values.copy()
        values[:, lo:hi, :] += (k * grid.dt) * gradient[:, lo:hi, :]
        ml_ms = (time.perf_counter() - t0) * 1e3
        state = Snapshot(values, initial.time + k * grid.dt)
        records.append(
            _record(k, state, prev, truth[k], partition, grid, params,
                    denominator, ml_ms, 0.0)
        )
        prev = state
    return RolloutReport(mode="constant-gradient", steps=records)


def growth_fit_rss(errors: Sequence[float]) -> Tuple[float, float]:
    """(linear RSS, quadratic RSS) of equal-parameter fits to an error curve.

    Both models spend two parameters: err = a + b*k versus err = c + d*k**2,
    k counting steps from 1. Lower RSS wins with no penalty needed.
    """
    y = np.asarray(errors, dtype=np.float64)
    if y.ndim != 1 or y.size < 3:
        raise DomainError(f"need at least 3 error values, got shape {y.shape}")
    k = np.arange(1, y.size + 1, dtype=np.float64)
    ones = np.ones_like(k)
    rss = []
    for design in (np.stack([ones, k], axis=1), np.stack([ones, k**2], axis=1)):
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        rss.append(float(((design @ coef - y) ** 2).sum()))
    return rss[0], rss[1]


def train_bundle(
    series: Sequence[Snapshot],
    grid: GridSpec,
    partition: DomainPartition,
    spec: NetworkSpec,
    train_config: TrainConfig,
    seed: int = 0,
    input_mode: str = "tier",
    output_mode: str = "derivative",
    split_fraction: float = 0.8,
    wall_policy: str = "zero_neumann",
    wall_values: Optional[Sequence[float]] = None,
    warm_from: Optional[SurrogateBundle] = None,
) -> Tuple[SurrogateBundle, Dict[str, TrainReport]]:
    """Build datasets from a snapshot window and train all six networks.

    The input standardizer is fitted on the shared training rows; each
    variable gets its own target scale. With `warm_from`, training continues
    from that bundle's parameters instead of a fresh initialization; the
    standardizer and target scales are refitted on the new window either way.
    """
    expected_width = TIER_WIDTH if input_mode == "tier" else N_VARS
    if spec.n_inputs != expected_width or spec.n_outputs != 1:
        raise DomainError(
            f"{input_mode!r} inputs need a {expected_width}->1 network, "
            f"spec maps {spec.n_inputs}->{spec.n_outputs}"
        )
    if warm_from is not None:
        for v in VARIABLES:
            if warm_from.networks[v].spec != spec:
                raise DomainError(
                    f"warm start requires matching specs; network for {v!r} differs"
                )
        if (warm_from.input_mode, warm_from.output_mode) != (input_mode, output_mode):
            raise DomainError("warm start requires matching input/output modes")

    splits = build_datasets(
        series,
        grid,
        partition,
        input_mode=input_mode,
        output_mode=output_mode,
        split_fraction=split_fraction,
        seed=derived_seed(seed, "split"),
        wall_policy=wall_policy,
        wall_values=wall_values,
    )
    shared = splits[VARIABLES[0]]
    standardizer = fit_standardizer(shared.train_inputs)
    z_train = standardizer.apply(shared.train_inputs)
    z_val = standardizer.apply(shared.val_inputs)

    networks: Dict[str, Network] = {}
    reports: Dict[str, TrainReport] = {}
    scales: Dict[str, Tuple[float, float]] = {}
    for v in VARIABLES:
        split = splits[v]
        mean, std = target_scale(split.train_targets)
        if warm_from is not None:
            net = warm_from.networks[v].copy()
        else:
            net = init_network(spec, derived_seed(seed, "init", v))
        config = replace(train_config, seed=derived_seed(seed, "train", v))
        net, report = train(
            net,
            z_train,
            (split.train_targets - mean) / std,
            z_val,
            (split.val_targets - mean) / std,
            config,
        )
        networks[v] = net
        reports[v] = report
        scales[v] = (mean, std)

    bundle = SurrogateBundle(
        networks=networks,
        standardizer=standardizer,
        target_scales=scales,
        input_mode=input_mode,
        output_mode=output_mode,
        wall_policy=wall_policy,
        wall_values=wall_values,
    )
    return bundle, reports
