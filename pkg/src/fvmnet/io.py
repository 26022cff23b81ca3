"""On-disk artifact formats: series, checkpoints, reports, traces, datasets.

Every format round-trips bit-exactly: floats are written with repr (the
shortest decimal string that parses back to the same double) inside JSON or
CSV, keys are sorted, and newlines are pinned to "\n", so rerunning a seeded
experiment reproduces each file byte for byte. Wall-clock measurements go to
separate timing sidecars to keep the main artifacts deterministic.
"""

from __future__ import annotations

import json
import os
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .dataset import DatasetSplit, Standardizer
from .errors import ArtifactIOError, DomainError
from .macnet import FallbackEvent, MacnetTrace, Phase, RetrainEvent
from .network import Network, NetworkSpec, param_count
from .rollout import RolloutReport, StepRecord, SurrogateBundle
from .solver import VARIABLES, GridSpec, PhysicalParams, Snapshot
from .training import TrainConfig, TrainReport, config_digest

SERIES_FORMAT = "fvmnet-series-1"
SNAPSHOT_HEADER = "i,j," + ",".join(VARIABLES)
CHECKPOINT_FORMAT = "fvmnet-checkpoint-1"
STANDARDIZER_FORMAT = "fvmnet-standardizer-1"
STANDARDIZER_FILE = "standardizer.json"
DATASET_FORMAT = "fvmnet-dataset-1"
TRACE_FORMAT = "fvmnet-trace-1"


def _fmt(x) -> str:
    return repr(float(x))


def dump_json(path: str, payload) -> str:
    """Write JSON deterministically: sorted keys, 2-space indent, one trailing \\n."""
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ArtifactIOError(f"file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ArtifactIOError(f"corrupt JSON in {path}: {err}") from None


def _expect_format(payload: Mapping, tag: str, path: str) -> None:
    if payload.get("format") != tag:
        raise ArtifactIOError(
            f"{path} has format {payload.get('format')!r}, expected {tag!r}"
        )


def write_csv(path: str, header: str, rows: Sequence[Sequence]) -> str:
    """Write one CSV with repr-precision floats and \\n line endings."""
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    _fmt(v) if isinstance(v, float) else str(v) for v in row
                )
                + "\n"
            )
    return path


def read_csv(path: str, header: str) -> List[List[str]]:
    try:
        with open(path) as fh:
            first = fh.readline().rstrip("\n")
            if first != header:
                raise ArtifactIOError(
                    f"{path} header is {first!r}, expected {header!r}"
                )
            return [line.rstrip("\n").split(",") for line in fh if line.strip()]
    except FileNotFoundError:
        raise ArtifactIOError(f"file not found: {path}") from None


# ----- grid and params records -----


def grid_to_dict(grid: GridSpec) -> dict:
    return {
        "m": grid.m,
        "n": grid.n,
        "dx": grid.dx,
        "dr": grid.dr,
        "dt": grid.dt,
    }


def grid_from_dict(data: Mapping) -> GridSpec:
    return GridSpec(
        m=int(data["m"]),
        n=int(data["n"]),
        dx=float(data["dx"]),
        dr=float(data["dr"]),
        dt=float(data["dt"]),
    )


def params_to_dict(params: PhysicalParams) -> dict:
    out = {
        "diffusivity": {k: float(v) for k, v in params.diffusivity.items()},
        "arrhenius_a": params.arrhenius_a,
        "arrhenius_b": params.arrhenius_b,
        "activation_energy": params.activation_energy,
        "gas_constant": params.gas_constant,
        "heat_release": params.heat_release,
        "reference_pressure": params.reference_pressure,
        "molar_mass": params.molar_mass,
        "wall_temperature": params.wall_temperature,
        "axial_bc": params.axial_bc,
    }
    if params.velocity_field is not None:
        vx, vr = params.velocity_field
        out["velocity_field"] = [np.asarray(vx).tolist(), np.asarray(vr).tolist()]
    return out


def params_from_dict(data: Mapping) -> PhysicalParams:
    velocity = None
    if data.get("velocity_field") is not None:
        vx, vr = data["velocity_field"]
        velocity = (np.asarray(vx, dtype=np.float64), np.asarray(vr, dtype=np.float64))
    wall = data.get("wall_temperature")
    return PhysicalParams(
        diffusivity=dict(data["diffusivity"]),
        arrhenius_a=float(data["arrhenius_a"]),
        arrhenius_b=float(data["arrhenius_b"]),
        activation_energy=float(data["activation_energy"]),
        gas_constant=float(data["gas_constant"]),
        heat_release=float(data["heat_release"]),
        reference_pressure=float(data["reference_pressure"]),
        molar_mass=float(data["molar_mass"]),
        wall_temperature=None if wall is None else float(wall),
        axial_bc=str(data["axial_bc"]),
        velocity_field=velocity,
    )


# ----- snapshot series -----


def save_series(
    out_dir: str,
    series: Sequence[Snapshot],
    grid: GridSpec,
    params: PhysicalParams,
    extra: Optional[Mapping] = None,
) -> str:
    """Write one CSV per snapshot plus manifest.json; returns the manifest path."""
    if not series:
        raise DomainError("cannot save an empty series")
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for idx, snap in enumerate(series):
        if snap.shape != (grid.m, grid.n):
            raise DomainError(
                f"snapshot {idx} has shape {snap.shape}, grid is ({grid.m}, {grid.n})"
            )
        name = f"snap_{idx:06d}.csv"
        values = snap.values
        with open(os.path.join(out_dir, name), "w", newline="\n") as fh:
            fh.write(SNAPSHOT_HEADER + "\n")
            for i in range(grid.m):
                for j in range(grid.n):
                    fh.write(
                        f"{i},{j},"
                        + ",".join(_fmt(values[k, i, j]) for k in range(len(VARIABLES)))
                        + "\n"
                    )
        entries.append({"file": name, "time": snap.time})
    manifest = {
        "format": SERIES_FORMAT,
        "grid": grid_to_dict(grid),
        "variables": list(VARIABLES),
        "params": params_to_dict(params),
        "snapshots": entries,
    }
    if extra:
        manifest["extra"] = dict(extra)
    return dump_json(os.path.join(out_dir, "manifest.json"), manifest)


def _load_snapshot_csv(path: str, m: int, n: int, time_: float) -> Snapshot:
    rows = read_csv(path, SNAPSHOT_HEADER)
    if len(rows) != m * n:
        raise ArtifactIOError(f"{path} has {len(rows)} cells, grid needs {m * n}")
    values = np.empty((len(VARIABLES), m, n), dtype=np.float64)
    for idx, row in enumerate(rows):
        i, j = idx // n, idx % n
        if int(row[0]) != i or int(row[1]) != j:
            raise ArtifactIOError(
                f"{path} row {idx} labels cell ({row[0]}, {row[1]}), "
                f"expected ({i}, {j})"
            )
        for k in range(len(VARIABLES)):
            values[k, i, j] = float(row[2 + k])
    return Snapshot(values, time_)


def load_series(manifest_path: str) -> Tuple[List[Snapshot], GridSpec, PhysicalParams]:
    if not os.path.exists(manifest_path):
        raise ArtifactIOError(f"manifest not found: {manifest_path}")
    payload = read_json(manifest_path)
    _expect_format(payload, SERIES_FORMAT, manifest_path)
    if payload["variables"] != list(VARIABLES):
        raise ArtifactIOError(
            f"{manifest_path} stores variables {payload['variables']}, "
            f"this package uses {list(VARIABLES)}"
        )
    grid = grid_from_dict(payload["grid"])
    params = params_from_dict(payload["params"])
    base = os.path.dirname(manifest_path)
    series = [
        _load_snapshot_csv(
            os.path.join(base, entry["file"]), grid.m, grid.n, float(entry["time"])
        )
        for entry in payload["snapshots"]
    ]
    return series, grid, params


def manifest_extra(manifest_path: str) -> dict:
    """The free-form 'extra' block a writer attached to the manifest."""
    payload = read_json(manifest_path)
    _expect_format(payload, SERIES_FORMAT, manifest_path)
    return dict(payload.get("extra", {}))


# ----- standardizer and network checkpoints -----


def save_standardizer(path: str, standardizer: Standardizer) -> str:
    payload = {"format": STANDARDIZER_FORMAT}
    payload.update(standardizer.to_dict())
    return dump_json(path, payload)


def load_standardizer(path: str) -> Standardizer:
    payload = read_json(path)
    _expect_format(payload, STANDARDIZER_FORMAT, path)
    return Standardizer.from_dict(payload)


def _spec_to_dict(spec: NetworkSpec) -> dict:
    return {
        "n_inputs": spec.n_inputs,
        "hidden": list(spec.hidden),
        "n_outputs": spec.n_outputs,
        "activation": spec.activation,
    }


def _spec_from_dict(data: Mapping) -> NetworkSpec:
    return NetworkSpec(
        n_inputs=int(data["n_inputs"]),
        hidden=tuple(int(h) for h in data["hidden"]),
        n_outputs=int(data["n_outputs"]),
        activation=str(data["activation"]),
    )


def checkpoint_path(out_dir: str, variable: str) -> str:
    return os.path.join(out_dir, f"checkpoint_{variable}.json")


def save_bundle(
    out_dir: str,
    bundle: SurrogateBundle,
    seed: int,
    train_config: TrainConfig,
) -> List[str]:
    """Write standardizer.json plus one checkpoint per variable; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [
        save_standardizer(os.path.join(out_dir, STANDARDIZER_FILE), bundle.standardizer)
    ]
    digest = config_digest(train_config)
    for v in VARIABLES:
        net = bundle.networks[v]
        mean, std = bundle.target_scales[v]
        payload = {
            "format": CHECKPOINT_FORMAT,
            "variable": v,
            "spec": _spec_to_dict(net.spec),
            "param_count": param_count(net.spec),
            "seed": int(seed),
            "train_config_digest": digest,
            "standardizer_file": STANDARDIZER_FILE,
            "target_scale": [mean, std],
            "input_mode": bundle.input_mode,
            "output_mode": bundle.output_mode,
            "wall_policy": bundle.wall_policy,
            "wall_values": None
            if bundle.wall_values is None
            else [float(w) for w in bundle.wall_values],
            "weights": [w.tolist() for w in net.weights],
            "biases": [b.tolist() for b in net.biases],
        }
        paths.append(dump_json(checkpoint_path(out_dir, v), payload))
    return paths


def load_bundle(out_dir: str) -> SurrogateBundle:
    standardizer = load_standardizer(os.path.join(out_dir, STANDARDIZER_FILE))
    networks: Dict[str, Network] = {}
    scales: Dict[str, Tuple[float, float]] = {}
    modes = None
    for v in VARIABLES:
        path = checkpoint_path(out_dir, v)
        payload = read_json(path)
        _expect_format(payload, CHECKPOINT_FORMAT, path)
        if payload["variable"] != v:
            raise ArtifactIOError(
                f"{path} stores variable {payload['variable']!r}, expected {v!r}"
            )
        spec = _spec_from_dict(payload["spec"])
        networks[v] = Network(
            spec=spec,
            weights=[np.asarray(w, dtype=np.float64) for w in payload["weights"]],
            biases=[np.asarray(b, dtype=np.float64) for b in payload["biases"]],
        )
        scales[v] = (float(payload["target_scale"][0]), float(payload["target_scale"][1]))
        these = (
            payload["input_mode"],
            payload["output_mode"],
            payload["wall_policy"],
            None
            if payload["wall_values"] is None
            else tuple(float(w) for w in payload["wall_values"]),
        )
        if modes is None:
            modes = these
        elif modes != these:
            raise ArtifactIOError(f"{path} disagrees with sibling checkpoints on modes")
    return SurrogateBundle(
        networks=networks,
        standardizer=standardizer,
        target_scales=scales,
        input_mode=modes[0],
        output_mode=modes[1],
        wall_policy=modes[2],
        wall_values=modes[3],
    )


def save_train_reports(out_dir: str, reports: Mapping[str, TrainReport]) -> str:
    payload = {
        v: {
            "best_epoch": rep.best_epoch,
            "stopped_epoch": rep.stopped_epoch,
            "best_val_loss": rep.best_val_loss,
            "epochs_run": rep.epochs_run,
            "param_snapshot_id": rep.param_snapshot_id,
            "train_losses": list(rep.train_losses),
            "val_losses": list(rep.val_losses),
        }
        for v, rep in reports.items()
    }
    return dump_json(os.path.join(out_dir, "train_reports.json"), payload)


# ----- rollout reports -----

REPORT_HEADER = "step,mode,variable,max_rel_err,mean_rel_err,scaled_residual"
TIMING_HEADER = "step,ml_ms,cfd_ms"


def report_paths(out_dir: str, mode: str) -> Tuple[str, str]:
    return (
        os.path.join(out_dir, f"report_{mode}.csv"),
        os.path.join(out_dir, f"timing_{mode}.csv"),
    )


def write_rollout_report(out_dir: str, report: RolloutReport) -> Tuple[str, str]:
    """Write the deterministic report CSV and its wall-clock sidecar."""
    os.makedirs(out_dir, exist_ok=True)
    report_file, timing_file = report_paths(out_dir, report.mode)
    rows = []
    for rec in report.steps:
        for v in VARIABLES:
            rows.append(
                (
                    rec.step,
                    report.mode,
                    v,
                    float(rec.max_errors[v]),
                    float(rec.mean_errors[v]),
                    float(rec.scaled_residual),
                )
            )
    write_csv(report_file, REPORT_HEADER, rows)
    write_csv(
        timing_file,
        TIMING_HEADER,
        [(rec.step, float(rec.ml_ms), float(rec.cfd_ms)) for rec in report.steps],
    )
    return report_file, timing_file


def load_rollout_report(path: str, timing_path: Optional[str] = None) -> RolloutReport:
    rows = read_csv(path, REPORT_HEADER)
    timings: Dict[int, Tuple[float, float]] = {}
    if timing_path is not None:
        for row in read_csv(timing_path, TIMING_HEADER):
            timings[int(row[0])] = (float(row[1]), float(row[2]))
    mode = None
    by_step: Dict[int, Tuple[dict, dict, float]] = {}
    for row in rows:
        step, row_mode, variable = int(row[0]), row[1], row[2]
        if mode is None:
            mode = row_mode
        elif row_mode != mode:
            raise ArtifactIOError(f"{path} mixes modes {mode!r} and {row_mode!r}")
        maxes, means, _ = by_step.setdefault(step, ({}, {}, 0.0))
        maxes[variable] = float(row[3])
        means[variable] = float(row[4])
        by_step[step] = (maxes, means, float(row[5]))
    steps = []
    for step in sorted(by_step):
        maxes, means, residual = by_step[step]
        ml_ms, cfd_ms = timings.get(step, (0.0, 0.0))
        steps.append(
            StepRecord(
                step=step,
                max_errors=maxes,
                mean_errors=means,
                scaled_residual=residual,
                ml_ms=ml_ms,
                cfd_ms=cfd_ms,
            )
        )
    return RolloutReport(mode=mode, steps=steps)


ERROR_FIELD_HEADER = "i,j," + ",".join(f"{v}_abs_err" for v in VARIABLES)


def write_error_field(path: str, pred: Snapshot, truth: Snapshot) -> str:
    """Per-cell absolute error dump over the whole grid, for external plotting."""
    if pred.shape != truth.shape:
        raise DomainError(f"shape mismatch {pred.shape} vs {truth.shape}")
    m, n = pred.shape
    diff = np.abs(pred.values - truth.values)
    rows = []
    for i in range(m):
        for j in range(n):
            rows.append((i, j, *(float(diff[k, i, j]) for k in range(len(VARIABLES)))))
    return write_csv(path, ERROR_FIELD_HEADER, rows)


# ----- traces and audits -----


def write_trace(out_dir: str, trace: MacnetTrace, emit_residuals: bool = False) -> List[str]:
    """Write trace.json (deterministic) and optionally residuals.csv.

    Wall-clock fields stay out of trace.json; the caller owns timing sidecars.
    """
    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "format": TRACE_FORMAT,
        "horizon": trace.horizon,
        "cfd_window": trace.cfd_window,
        "tolerance": trace.tolerance,
        "max_ml_steps": trace.max_ml_steps,
        "phases": [
            {
                "mode": p.mode,
                "start": p.start,
                "end": p.end,
                "residuals": [float(r) for r in p.residuals],
                "ended_by": p.ended_by,
                "breach_residual": p.breach_residual,
            }
            for p in trace.phases
        ],
        "retrains": [
            {
                "at_step": r.at_step,
                "policy": r.policy,
                "val_losses": {v: float(r.val_losses[v]) for v in VARIABLES},
                "param_ids": {v: str(r.param_ids[v]) for v in VARIABLES},
                "denominator": r.denominator,
            }
            for r in trace.retrains
        ],
        "fallbacks": [
            {"at_step": f.at_step, "residual": f.residual} for f in trace.fallbacks
        ],
    }
    paths = [dump_json(os.path.join(out_dir, "trace.json"), payload)]
    if emit_residuals:
        rows = []
        for phase in trace.phases:
            if phase.mode != "ML":
                continue
            for offset, residual in enumerate(phase.residuals, start=1):
                rows.append((phase.start + offset, float(residual)))
        paths.append(
            write_csv(
                os.path.join(out_dir, "residuals.csv"), "step,scaled_residual", rows
            )
        )
    return paths


def load_trace(path: str) -> MacnetTrace:
    payload = read_json(path)
    _expect_format(payload, TRACE_FORMAT, path)
    trace = MacnetTrace(
        horizon=int(payload["horizon"]),
        cfd_window=int(payload["cfd_window"]),
        tolerance=float(payload["tolerance"]),
        max_ml_steps=int(payload["max_ml_steps"]),
    )
    for p in payload["phases"]:
        trace.phases.append(
            Phase(
                mode=str(p["mode"]),
                start=int(p["start"]),
                end=int(p["end"]),
                residuals=tuple(float(r) for r in p["residuals"]),
                ended_by=str(p["ended_by"]),
                breach_residual=None
                if p["breach_residual"] is None
                else float(p["breach_residual"]),
            )
        )
    for r in payload["retrains"]:
        trace.retrains.append(
            RetrainEvent(
                at_step=int(r["at_step"]),
                policy=str(r["policy"]),
                val_losses={v: float(r["val_losses"][v]) for v in VARIABLES},
                param_ids={v: str(r["param_ids"][v]) for v in VARIABLES},
                denominator=float(r["denominator"]),
            )
        )
    for f in payload["fallbacks"]:
        trace.fallbacks.append(
            FallbackEvent(at_step=int(f["at_step"]), residual=float(f["residual"]))
        )
    return trace


AUDIT_HEADER = "step,mode,variable,max_rel_err,mean_rel_err"


def write_audit(out_dir: str, rows) -> str:
    """rows: AuditRow sequence from the hybrid error audit."""
    flat = []
    for row in rows:
        for v in VARIABLES:
            flat.append(
                (row.step, row.mode, v, float(row.max_errors[v]), float(row.mean_errors[v]))
            )
    return write_csv(os.path.join(out_dir, "audit.csv"), AUDIT_HEADER, flat)


# ----- datasets -----


def save_dataset(path: str, split: DatasetSplit, standardizer: Optional[Standardizer] = None) -> str:
    payload = {
        "format": DATASET_FORMAT,
        "n_samples": split.n_total,
        "variable": split.variable,
        "input_mode": split.input_mode,
        "output_mode": split.output_mode,
        "wall_policy": split.wall_policy,
        "split_fraction": split.split_fraction,
        "seed": split.seed,
        "standardizer": None if standardizer is None else standardizer.to_dict(),
        "train": {
            "inputs": split.train_inputs.tolist(),
            "targets": split.train_targets.tolist(),
            "cells": split.train_cells.tolist(),
            "times": split.train_times.tolist(),
        },
        "val": {
            "inputs": split.val_inputs.tolist(),
            "targets": split.val_targets.tolist(),
            "cells": split.val_cells.tolist(),
            "times": split.val_times.tolist(),
        },
    }
    return dump_json(path, payload)


def load_dataset(path: str) -> Tuple[DatasetSplit, Optional[Standardizer]]:
    payload = read_json(path)
    _expect_format(payload, DATASET_FORMAT, path)
    split = DatasetSplit(
        variable=str(payload["variable"]),
        input_mode=str(payload["input_mode"]),
        output_mode=str(payload["output_mode"]),
        wall_policy=str(payload["wall_policy"]),
        train_inputs=np.asarray(payload["train"]["inputs"], dtype=np.float64),
        train_targets=np.asarray(payload["train"]["targets"], dtype=np.float64),
        train_cells=np.asarray(payload["train"]["cells"], dtype=np.int64),
        train_times=np.asarray(payload["train"]["times"], dtype=np.float64),
        val_inputs=np.asarray(payload["val"]["inputs"], dtype=np.float64),
        val_targets=np.asarray(payload["val"]["targets"], dtype=np.float64),
        val_cells=np.asarray(payload["val"]["cells"], dtype=np.int64),
        val_times=np.asarray(payload["val"]["times"], dtype=np.float64),
        split_fraction=float(payload["split_fraction"]),
        seed=int(payload["seed"]),
    )
    if split.n_total != int(payload["n_samples"]):
        raise ArtifactIOError(
            f"{path} claims {payload['n_samples']} samples, found {split.n_total}"
        )
    standardizer = (
        None
        if payload["standardizer"] is None
        else Standardizer.from_dict(payload["standardizer"])
    )
    return split, standardizer
