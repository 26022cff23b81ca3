"""Experiment configuration: desk defaults, file loading, strict validation.

One JSON document with fixed sections drives every command. Each field has a
desk-scale default, so a missing file resolves to the reference experiment.
Unknown sections or keys are rejected by name, a field set to null is
reported as missing, and dotted `a.b=value` overrides edit the tree before
validation, so a bad flag fails the same way a bad file does.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .dataset import INPUT_MODES, OUTPUT_MODES, WALL_POLICIES, TIER_WIDTH, DomainPartition
from .errors import ArtifactIOError, ConfigurationError
from .macnet import RETRAIN_POLICIES, MacnetConfig
from .network import CASES, NetworkSpec
from .solver import IDX, N_VARS, VARIABLES, GridSpec, PhysicalParams, Snapshot
from .training import TrainConfig

DEFAULTS = {
    "grid": {"m": 96, "n": 24, "dx": 0.001, "dr": 0.001, "dt": 0.001},
    "physical": {
        "diffusivity": {"T": 5e-5, "X_fuel": 2e-5, "X_prod": 2e-5, "X_ox": 2e-5},
        "arrhenius_a": 10000.0,
        "arrhenius_b": 0.0,
        "activation_energy": 49884.0,
        "gas_constant": 8.314,
        "heat_release": 30000.0,
        "reference_pressure": 101325.0,
        "molar_mass": 0.0289,
        "wall_temperature": 300.0,
        "axial_bc": "inflow_outflow",
    },
    "partition": {"m_star": 16},
    "initial": {
        "temperature": 300.0,
        "blob_peak": 1200.0,
        "blob_center_x": 0.25,
        "blob_center_r": 0.0,
        "blob_sigma_x": 0.08,
        "blob_sigma_r": 0.25,
        "fuel": 0.08,
        "oxidizer": 0.2,
        "product": 0.0,
        "vx_max": 0.25,
        "vr_max": 0.02,
    },
    "generate": {"burn_in": 14, "horizon": 40},
    "dataset": {
        "train_window": 1,
        "input_mode": "tier",
        "output_mode": "derivative",
        "split_fraction": 0.8,
        "wall_policy": "zero_neumann",
        "wall_values": None,
    },
    "network": {"case": "c", "custom": None},
    "train": {
        "learning_rate": 0.001,
        "optimizer": "adam",
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "batch_size": 128,
        "max_epochs": 300,
        "patience": 50,
        "min_delta": 1e-8,
    },
    "rollout": {"horizon": 10},
    "macnet": {
        "cfd_window": 2,
        "tolerance": 5.0,
        "max_ml_steps": 10,
        "horizon": 40,
        "retrain": "warm-start",
    },
    "seed": 0,
    "out": "runs/desk",
}


def default_tree() -> dict:
    return copy.deepcopy(DEFAULTS)


# ----- leaf casters; each names the dotted path it rejects -----


def _as_int(path: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigurationError(f"config field {path} must be an integer, got {v!r}")
    return v


def _as_float(path: str, v) -> float:
    if isinstance(v, bool):
        raise ConfigurationError(f"config field {path} must be a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            pass
    raise ConfigurationError(f"config field {path} must be a number, got {v!r}")


def _as_str(path: str, v) -> str:
    if not isinstance(v, str):
        raise ConfigurationError(f"config field {path} must be a string, got {v!r}")
    return v


def _as_diffusivity(path: str, v) -> dict:
    if not isinstance(v, dict):
        raise ConfigurationError(f"config field {path} must map variables to numbers")
    known = set(VARIABLES) - {"v_x", "v_r"}
    for key in v:
        if key not in known:
            raise ConfigurationError(
                f"config field {path} names unknown variable {key!r}"
            )
    return {k: _as_float(f"{path}.{k}", val) for k, val in v.items()}


def _as_wall_values(path: str, v) -> Tuple[float, ...]:
    if not isinstance(v, list) or len(v) != N_VARS:
        raise ConfigurationError(
            f"config field {path} must be a list of {N_VARS} numbers"
        )
    return tuple(_as_float(f"{path}[{k}]", x) for k, x in enumerate(v))


def _as_custom_network(path: str, v) -> dict:
    if not isinstance(v, dict):
        raise ConfigurationError(f"config field {path} must be an object")
    allowed = {"hidden", "activation"}
    for key in v:
        if key not in allowed:
            raise ConfigurationError(f"unknown config key {path}.{key}")
    hidden = v.get("hidden")
    if not isinstance(hidden, list) or not hidden or not all(
        isinstance(h, int) and not isinstance(h, bool) and h > 0 for h in hidden
    ):
        raise ConfigurationError(
            f"config field {path}.hidden must be a non-empty list of positive integers"
        )
    activation = v.get("activation", "relu")
    return {"hidden": hidden, "activation": _as_str(f"{path}.activation", activation)}


# (caster, nullable); a null value for a non-nullable field is "missing".
_SCHEMA = {
    "grid": {
        "m": (_as_int, False),
        "n": (_as_int, False),
        "dx": (_as_float, False),
        "dr": (_as_float, False),
        "dt": (_as_float, False),
    },
    "physical": {
        "diffusivity": (_as_diffusivity, False),
        "arrhenius_a": (_as_float, False),
        "arrhenius_b": (_as_float, False),
        "activation_energy": (_as_float, False),
        "gas_constant": (_as_float, False),
        "heat_release": (_as_float, False),
        "reference_pressure": (_as_float, False),
        "molar_mass": (_as_float, False),
        "wall_temperature": (_as_float, True),
        "axial_bc": (_as_str, False),
    },
    "partition": {"m_star": (_as_int, False)},
    "initial": {
        "temperature": (_as_float, False),
        "blob_peak": (_as_float, False),
        "blob_center_x": (_as_float, False),
        "blob_center_r": (_as_float, False),
        "blob_sigma_x": (_as_float, False),
        "blob_sigma_r": (_as_float, False),
        "fuel": (_as_float, False),
        "oxidizer": (_as_float, False),
        "product": (_as_float, False),
        "vx_max": (_as_float, False),
        "vr_max": (_as_float, False),
    },
    "generate": {"burn_in": (_as_int, False), "horizon": (_as_int, False)},
    "dataset": {
        "train_window": (_as_int, False),
        "input_mode": (_as_str, False),
        "output_mode": (_as_str, False),
        "split_fraction": (_as_float, False),
        "wall_policy": (_as_str, False),
        "wall_values": (_as_wall_values, True),
    },
    "network": {"case": (_as_str, True), "custom": (_as_custom_network, True)},
    "train": {
        "learning_rate": (_as_float, False),
        "optimizer": (_as_str, False),
        "beta1": (_as_float, False),
        "beta2": (_as_float, False),
        "eps": (_as_float, False),
        "batch_size": (_as_int, False),
        "max_epochs": (_as_int, False),
        "patience": (_as_int, False),
        "min_delta": (_as_float, False),
    },
    "rollout": {"horizon": (_as_int, False)},
    "macnet": {
        "cfd_window": (_as_int, False),
        "tolerance": (_as_float, False),
        "max_ml_steps": (_as_int, False),
        "horizon": (_as_int, False),
        "retrain": (_as_str, False),
    },
}
_TOP_SCALARS = {"seed": (_as_int, False), "out": (_as_str, False)}


def merge_tree(base: dict, user: dict) -> dict:
    """Overlay a user document on the defaults, rejecting unknown names."""
    out = copy.deepcopy(base)
    for section, value in user.items():
        if section in _TOP_SCALARS:
            out[section] = value
            continue
        if section not in _SCHEMA:
            raise ConfigurationError(f"unknown config section {section!r}")
        if not isinstance(value, dict):
            raise ConfigurationError(f"config section {section!r} must be an object")
        for key, leaf in value.items():
            if key not in _SCHEMA[section]:
                raise ConfigurationError(f"unknown config key {section}.{key}")
            out[section][key] = leaf
    return out


def apply_override(tree: dict, assignment: str) -> None:
    """Apply one `path.to.key=value` override in place; values parse as JSON
    first and fall back to bare strings."""
    if "=" not in assignment:
        raise ConfigurationError(
            f"override {assignment!r} must look like section.key=value"
        )
    path, raw = assignment.split("=", 1)
    parts = path.strip().split(".")
    if not all(parts):
        raise ConfigurationError(f"override {assignment!r} has an empty path segment")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    if parts[0] in _TOP_SCALARS:
        if len(parts) != 1:
            raise ConfigurationError(f"config field {parts[0]} has no sub-keys")
        tree[parts[0]] = value
        return
    if parts[0] not in _SCHEMA:
        raise ConfigurationError(f"unknown config section {parts[0]!r}")
    if len(parts) < 2 or parts[1] not in _SCHEMA[parts[0]]:
        raise ConfigurationError(f"unknown config key {'.'.join(parts[:2])}")
    node = tree[parts[0]]
    for part in parts[1:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[parts[-1]] = value


def _leaf(tree: dict, section: str, key: str):
    caster, nullable = _SCHEMA[section][key]
    value = tree[section][key]
    if value is None:
        if nullable:
            return None
        raise ConfigurationError(f"config field {section}.{key} is missing a value")
    return caster(f"{section}.{key}", value)


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


@dataclass(frozen=True)
class InitialCondition:
    """Premixed-charge initial state: parabolic axial flow, a weak radial
    profile vanishing at axis and wall, and a Gaussian hot spot in a uniform
    fuel/oxidizer mixture. Blob position and widths are domain fractions."""

    temperature: float
    blob_peak: float
    blob_center_x: float
    blob_center_r: float
    blob_sigma_x: float
    blob_sigma_r: float
    fuel: float
    oxidizer: float
    product: float
    vx_max: float
    vr_max: float

    def __post_init__(self):
        if not 0.0 < self.temperature <= self.blob_peak:
            raise ConfigurationError(
                "initial.temperature must be positive and at most initial.blob_peak"
            )
        if self.blob_sigma_x <= 0.0 or self.blob_sigma_r <= 0.0:
            raise ConfigurationError("initial blob widths must be positive")
        for name in ("fuel", "oxidizer", "product"):
            frac = getattr(self, name)
            if not 0.0 <= frac <= 1.0:
                raise ConfigurationError(f"initial.{name} must lie in [0, 1]")

    def build(self, grid: GridSpec) -> Snapshot:
        length, radius = grid.m * grid.dx, grid.n * grid.dr
        x = ((np.arange(grid.m) + 0.5) * grid.dx)[:, None]
        r = ((np.arange(grid.n) + 0.5) * grid.dr)[None, :]
        values = np.zeros((N_VARS, grid.m, grid.n), dtype=np.float64)
        values[IDX["v_x"]] = self.vx_max * (1.0 - (r / radius) ** 2)
        values[IDX["v_r"]] = 4.0 * self.vr_max * (r / radius) * (1.0 - r / radius)
        bump = np.exp(
            -((x - self.blob_center_x * length) ** 2)
            / (2.0 * (self.blob_sigma_x * length) ** 2)
            - ((r - self.blob_center_r * radius) ** 2)
            / (2.0 * (self.blob_sigma_r * radius) ** 2)
        )
        values[IDX["T"]] = self.temperature + (self.blob_peak - self.temperature) * bump
        values[IDX["X_fuel"]] = self.fuel
        values[IDX["X_prod"]] = self.product
        values[IDX["X_ox"]] = self.oxidizer
        return Snapshot(values, 0.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved run description; `tree` is the effective document."""

    grid: GridSpec
    params: PhysicalParams
    partition: DomainPartition
    initial: InitialCondition
    burn_in: int
    generate_horizon: int
    train_window: int
    input_mode: str
    output_mode: str
    split_fraction: float
    wall_policy: str
    wall_values: Optional[Tuple[float, ...]]
    case: Optional[str]
    spec: NetworkSpec
    train: TrainConfig
    rollout_horizon: int
    macnet: MacnetConfig
    seed: int
    out: str
    tree: dict = field(repr=False)

    def initial_snapshot(self) -> Snapshot:
        return self.initial.build(self.grid)


def input_width(input_mode: str) -> int:
    return TIER_WIDTH if input_mode == "tier" else N_VARS


def _resolve_spec(tree: dict, input_mode: str) -> Tuple[Optional[str], NetworkSpec]:
    case = _leaf(tree, "network", "case")
    custom = _leaf(tree, "network", "custom")
    if (case is None) == (custom is None):
        raise ConfigurationError(
            "network needs exactly one of network.case or network.custom"
        )
    width = input_width(input_mode)
    if case is not None:
        if case not in CASES:
            raise ConfigurationError(
                f"network.case must be one of {sorted(CASES)}, got {case!r}"
            )
        base = CASES[case]
        return case, NetworkSpec(width, base.hidden, 1, base.activation)
    return None, NetworkSpec(width, tuple(custom["hidden"]), 1, custom["activation"])


def resolve_config(tree: dict) -> ExperimentConfig:
    """Validate a merged tree and construct every referenced object."""
    for section, keys in _SCHEMA.items():
        if not isinstance(tree.get(section), dict):
            raise ConfigurationError(f"config section {section!r} must be an object")
        for key in keys:
            if key not in tree[section]:
                tree[section][key] = copy.deepcopy(DEFAULTS[section][key])
            # Canonicalize so the echoed document holds resolved values
            # (e.g. the string "inf" becomes the float it parsed to).
            tree[section][key] = _jsonable(_leaf(tree, section, key))
    for name in _TOP_SCALARS:
        if name not in tree:
            tree[name] = copy.deepcopy(DEFAULTS[name])
        caster, _ = _TOP_SCALARS[name]
        tree[name] = caster(name, tree[name])

    grid = GridSpec(
        m=_leaf(tree, "grid", "m"),
        n=_leaf(tree, "grid", "n"),
        dx=_leaf(tree, "grid", "dx"),
        dr=_leaf(tree, "grid", "dr"),
        dt=_leaf(tree, "grid", "dt"),
    )
    params = PhysicalParams(
        diffusivity=_leaf(tree, "physical", "diffusivity"),
        arrhenius_a=_leaf(tree, "physical", "arrhenius_a"),
        arrhenius_b=_leaf(tree, "physical", "arrhenius_b"),
        activation_energy=_leaf(tree, "physical", "activation_energy"),
        gas_constant=_leaf(tree, "physical", "gas_constant"),
        heat_release=_leaf(tree, "physical", "heat_release"),
        reference_pressure=_leaf(tree, "physical", "reference_pressure"),
        molar_mass=_leaf(tree, "physical", "molar_mass"),
        wall_temperature=_leaf(tree, "physical", "wall_temperature"),
        axial_bc=_leaf(tree, "physical", "axial_bc"),
    )
    partition = DomainPartition(m=grid.m, m_star=_leaf(tree, "partition", "m_star"))
    initial = InitialCondition(
        **{key: _leaf(tree, "initial", key) for key in _SCHEMA["initial"]}
    )

    burn_in = _leaf(tree, "generate", "burn_in")
    generate_horizon = _leaf(tree, "generate", "horizon")
    if burn_in < 0:
        raise ConfigurationError("generate.burn_in must be non-negative")
    if generate_horizon < 1:
        raise ConfigurationError("generate.horizon must be at least 1")

    train_window = _leaf(tree, "dataset", "train_window")
    if train_window < 1:
        raise ConfigurationError("dataset.train_window must be at least 1")
    input_mode = _leaf(tree, "dataset", "input_mode")
    if input_mode not in INPUT_MODES:
        raise ConfigurationError(
            f"dataset.input_mode must be one of {INPUT_MODES}, got {input_mode!r}"
        )
    output_mode = _leaf(tree, "dataset", "output_mode")
    if output_mode not in OUTPUT_MODES:
        raise ConfigurationError(
            f"dataset.output_mode must be one of {OUTPUT_MODES}, got {output_mode!r}"
        )
    split_fraction = _leaf(tree, "dataset", "split_fraction")
    if not 0.0 < split_fraction < 1.0:
        raise ConfigurationError("dataset.split_fraction must lie strictly in (0, 1)")
    wall_policy = _leaf(tree, "dataset", "wall_policy")
    if wall_policy not in WALL_POLICIES:
        raise ConfigurationError(
            f"dataset.wall_policy must be one of {WALL_POLICIES}, got {wall_policy!r}"
        )
    wall_values = _leaf(tree, "dataset", "wall_values")

    case, spec = _resolve_spec(tree, input_mode)

    train = TrainConfig(
        learning_rate=_leaf(tree, "train", "learning_rate"),
        optimizer=_leaf(tree, "train", "optimizer"),
        beta1=_leaf(tree, "train", "beta1"),
        beta2=_leaf(tree, "train", "beta2"),
        eps=_leaf(tree, "train", "eps"),
        batch_size=_leaf(tree, "train", "batch_size"),
        max_epochs=_leaf(tree, "train", "max_epochs"),
        patience=_leaf(tree, "train", "patience"),
        min_delta=_leaf(tree, "train", "min_delta"),
        seed=_TOP_SCALARS["seed"][0]("seed", tree["seed"]),
    )

    rollout_horizon = _leaf(tree, "rollout", "horizon")
    if rollout_horizon < 1:
        raise ConfigurationError("rollout.horizon must be at least 1")

    retrain = _leaf(tree, "macnet", "retrain")
    if retrain not in RETRAIN_POLICIES:
        raise ConfigurationError(
            f"macnet.retrain must be one of {RETRAIN_POLICIES}, got {retrain!r}"
        )
    macnet = MacnetConfig(
        cfd_window=_leaf(tree, "macnet", "cfd_window"),
        tolerance=_leaf(tree, "macnet", "tolerance"),
        max_ml_steps=_leaf(tree, "macnet", "max_ml_steps"),
        horizon=_leaf(tree, "macnet", "horizon"),
        retrain=retrain,
        spec=spec,
        train_config=train,
        input_mode=input_mode,
        output_mode=output_mode,
        split_fraction=split_fraction,
        wall_policy=wall_policy,
        wall_values=wall_values,
    )

    seed = _TOP_SCALARS["seed"][0]("seed", tree["seed"])
    out = _TOP_SCALARS["out"][0]("out", tree["out"])

    return ExperimentConfig(
        grid=grid,
        params=params,
        partition=partition,
        initial=initial,
        burn_in=burn_in,
        generate_horizon=generate_horizon,
        train_window=train_window,
        input_mode=input_mode,
        output_mode=output_mode,
        split_fraction=split_fraction,
        wall_policy=wall_policy,
        wall_values=wall_values,
        case=case,
        spec=spec,
        train=train,
        rollout_horizon=rollout_horizon,
        macnet=macnet,
        seed=seed,
        out=out,
        tree=tree,
    )


def load_config(
    path: Optional[str] = None, overrides: Optional[List[str]] = None
) -> ExperimentConfig:
    """Defaults, then the file at `path` (if given), then dotted overrides."""
    tree = default_tree()
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except FileNotFoundError:
            raise ArtifactIOError(f"config file not found: {path}") from None
        except json.JSONDecodeError as err:
            raise ConfigurationError(f"config file {path} is not valid JSON: {err}")
        if not isinstance(user, dict):
            raise ConfigurationError(f"config file {path} must hold a JSON object")
        tree = merge_tree(tree, user)
    for assignment in overrides or []:
        apply_override(tree, assignment)
    return resolve_config(tree)
