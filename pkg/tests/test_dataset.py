"""Dataset extraction tests: stencil layout, targets, standardizer, splits."""

import math

import numpy as np
import pytest

from fvmnet.dataset import (
    TIER_WIDTH,
    DomainPartition,
    Standardizer,
    build_dataset,
    build_datasets,
    center_input,
    center_matrix,
    derivative_target,
    fit_standardizer,
    flame_cells,
    target_matrix,
    tier_input,
    tier_matrix,
)
from fvmnet.errors import DomainError
from fvmnet.solver import IDX, N_VARS, VARIABLES, GridSpec, Snapshot


def coded_snapshot(m, n, time=0.0, scale=1.0):
    # values[k, i, j] = scale * (1000 k + 10 i + j): every entry names its origin.
    k = np.arange(N_VARS)[:, None, None]
    i = np.arange(m)[None, :, None]
    j = np.arange(n)[None, None, :]
    return Snapshot(scale * (1000.0 * k + 10.0 * i + j), time)


def random_snapshot(rng, m, n, time=0.0):
    return Snapshot(rng.standard_normal((N_VARS, m, n)), time)


# ----- partition -----


def test_partition_bounds_and_validation():
    p = DomainPartition(m=96, m_star=16)
    assert p.inlet == (0, 16) and p.flame == (16, 80) and p.outlet == (80, 96)
    assert p.flame_width() == 64
    assert p.contains(16) and p.contains(79)
    assert not p.contains(15) and not p.contains(80)
    with pytest.raises(DomainError):
        DomainPartition(m=10, m_star=5)  # no middle band left
    with pytest.raises(DomainError):
        DomainPartition(m=10, m_star=0)


# ----- tier stencil -----


def test_tier_input_layout_interior_cell():
    snap = coded_snapshot(8, 5)
    part = DomainPartition(m=8, m_star=2)
    vec = tier_input(snap, 4, 2, part)
    assert vec.shape == (TIER_WIDTH,)
    for k in range(N_VARS):
        base = 1000.0 * k + 40.0 + 2.0
        np.testing.assert_array_equal(
            vec[5 * k : 5 * k + 5],
            [base, base - 10.0, base + 10.0, base - 1.0, base + 1.0],
        )


def test_tier_axis_rule_repeats_center():
    snap = coded_snapshot(8, 5)
    part = DomainPartition(m=8, m_star=2)
    vec = tier_input(snap, 3, 0, part)
    for k in range(N_VARS):
        center, jm1 = vec[5 * k], vec[5 * k + 3]
        assert jm1 == center


def test_tier_wall_rules():
    snap = coded_snapshot(8, 5)
    part = DomainPartition(m=8, m_star=2)
    # Zero-gradient reading repeats the center in the j+1 slot.
    vec = tier_input(snap, 3, 4, part)
    for k in range(N_VARS):
        assert vec[5 * k + 4] == vec[5 * k]
    # Wall-value policy substitutes the per-variable wall vector instead:
    # temperature gets the wall temperature, everything else zero.
    wall = np.zeros(N_VARS)
    wall[IDX["T"]] = 300.0
    vec = tier_input(snap, 3, 4, part, wall_policy="wall_value", wall_values=wall)
    kt = IDX["T"]
    center = snap.values[kt, 3, 4]
    np.testing.assert_array_equal(
        vec[5 * kt : 5 * kt + 5],
        [center, center - 10.0, center + 10.0, center - 1.0, 300.0],
    )
    for k in range(N_VARS):
        if k != kt:
            assert vec[5 * k + 4] == 0.0


def test_tier_band_edges_read_into_strips():
    snap = coded_snapshot(8, 5)
    part = DomainPartition(m=8, m_star=2)
    vec = tier_input(snap, 2, 1, part)  # first band column
    assert vec[1] == snap.values[0, 1, 1]  # i-1 lives in the inlet strip
    vec = tier_input(snap, 5, 1, part)  # last band column
    assert vec[2] == snap.values[0, 6, 1]  # i+1 lives in the outlet strip


def test_tier_rejects_cells_outside_band_and_bad_args():
    snap = coded_snapshot(8, 5)
    part = DomainPartition(m=8, m_star=2)
    with pytest.raises(DomainError):
        tier_input(snap, 1, 2, part)
    with pytest.raises(DomainError):
        tier_input(snap, 6, 2, part)
    with pytest.raises(DomainError):
        tier_input(snap, 3, 5, part)
    with pytest.raises(DomainError):
        tier_input(snap, 3, 2, part, wall_policy="mirror")
    with pytest.raises(DomainError):
        tier_input(snap, 3, 2, part, wall_policy="wall_value")  # vector missing
    with pytest.raises(DomainError):
        tier_input(snap, 3, 2, DomainPartition(m=9, m_star=2))


def test_tier_matrix_agrees_with_scalar_extraction():
    rng = np.random.default_rng(21)
    snap = random_snapshot(rng, 12, 6)
    part = DomainPartition(m=12, m_star=3)
    wall = rng.standard_normal(N_VARS)
    for policy, wv in (("zero_neumann", None), ("wall_value", wall)):
        mat = tier_matrix(snap, part, policy, wv)
        cells = flame_cells(part, 6)
        assert mat.shape == (cells.shape[0], TIER_WIDTH)
        for row in range(0, cells.shape[0], 7):
            i, j = cells[row]
            np.testing.assert_array_equal(
                mat[row], tier_input(snap, int(i), int(j), part, policy, wv)
            )


def test_center_matrix_agrees_with_scalar_extraction():
    rng = np.random.default_rng(22)
    snap = random_snapshot(rng, 10, 4)
    part = DomainPartition(m=10, m_star=2)
    mat = center_matrix(snap, part)
    cells = flame_cells(part, 4)
    assert mat.shape == (cells.shape[0], N_VARS)
    for row in (0, 5, 11, cells.shape[0] - 1):
        i, j = cells[row]
        np.testing.assert_array_equal(mat[row], center_input(snap, int(i), int(j), part))


# ----- targets -----


def test_derivative_target_frozen_example():
    vals = np.zeros((N_VARS, 6, 3))
    a = Snapshot(vals.copy(), 0.0)
    b = Snapshot(vals.copy(), 0.1)
    a.values[IDX["T"], 3, 1] = 5.0
    b.values[IDX["T"], 3, 1] = 5.3
    got = derivative_target(a, b, 3, 1, "T", dt=0.1)
    assert got == pytest.approx(3.0, rel=1e-12)


def test_derivative_then_euler_advance_recovers_next_value():
    rng = np.random.default_rng(4)
    a = random_snapshot(rng, 9, 4, time=2.0)
    b = random_snapshot(rng, 9, 4, time=2.0 + 5e-4)
    dt = 5e-4
    for variable in ("T", "X_fuel", "v_r"):
        z = derivative_target(a, b, 4, 2, variable, dt)
        advanced = a.values[IDX[variable], 4, 2] + dt * z
        assert advanced == pytest.approx(b.values[IDX[variable], 4, 2], rel=1e-12)


def test_target_pair_consistency_checks():
    a = Snapshot(np.zeros((N_VARS, 6, 3)), 0.0)
    b = Snapshot(np.zeros((N_VARS, 6, 3)), 0.002)
    with pytest.raises(DomainError):
        derivative_target(a, b, 3, 1, "T", dt=0.001)  # gap is 2 dt
    c = Snapshot(np.zeros((N_VARS, 7, 3)), 0.001)
    with pytest.raises(DomainError):
        derivative_target(a, c, 3, 1, "T", dt=0.001)  # shapes differ
    with pytest.raises(DomainError):
        derivative_target(a, b, 3, 1, "enthalpy", dt=0.002)


def test_target_matrix_modes():
    rng = np.random.default_rng(8)
    a = random_snapshot(rng, 10, 4, time=0.0)
    b = random_snapshot(rng, 10, 4, time=0.001)
    part = DomainPartition(m=10, m_star=2)
    deriv = target_matrix(a, b, part, 0.001, "derivative")
    absol = target_matrix(a, b, part, 0.001, "absolute")
    cells = flame_cells(part, 4)
    row = 9
    i, j = (int(c) for c in cells[row])
    assert deriv[row, IDX["T"]] == pytest.approx(
        (b.values[IDX["T"], i, j] - a.values[IDX["T"], i, j]) / 0.001, rel=1e-12
    )
    assert absol[row, IDX["X_ox"]] == b.values[IDX["X_ox"], i, j]
    with pytest.raises(DomainError):
        target_matrix(a, b, part, 0.001, "delta")


# ----- standardizer -----


def test_fit_matches_longhand_population_statistics():
    rows = np.array([[1.0, 10.0], [2.0, 10.0], [4.0, 10.0], [5.0, 10.0]])
    s = fit_standardizer(rows)
    mu0 = (1 + 2 + 4 + 5) / 4.0
    var0 = sum((x - mu0) ** 2 for x in (1, 2, 4, 5)) / 4.0
    assert s.mean[0] == pytest.approx(mu0, rel=1e-15)
    assert s.std[0] == pytest.approx(math.sqrt(var0), rel=1e-15)
    # Constant feature gets the floor, scaled by its mean magnitude.
    assert s.mean[1] == 10.0
    assert s.std[1] == 1e-12 * 10.0


def test_apply_invert_round_trip_including_constant_features():
    rng = np.random.default_rng(13)
    rows = rng.standard_normal((50, 7)) * np.array([1, 10, 100, 1e-6, 1, 1, 1])
    rows[:, 5] = 3.25  # constant
    rows[:, 6] = 0.0  # constant at zero
    s = fit_standardizer(rows)
    back = s.invert(s.apply(rows))
    np.testing.assert_allclose(back, rows, rtol=1e-12, atol=1e-12)
    z = s.apply(rows)
    np.testing.assert_allclose(z[:, :5].mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(z[:, :5].std(axis=0), 1.0, rtol=1e-12)


def test_target_statistics_round_trip():
    rng = np.random.default_rng(14)
    rows = rng.standard_normal((40, 3))
    targets = 5.0 + 2.0 * rng.standard_normal(40)
    s = fit_standardizer(rows, targets)
    assert s.target_mean == pytest.approx(targets.mean(), rel=1e-14)
    z = s.apply_target(targets)
    assert float(np.mean(z)) == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(s.invert_target(z), targets, rtol=1e-12)


def test_standardizer_width_and_serialization():
    s = fit_standardizer(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([1.0, 2.0]))
    with pytest.raises(DomainError):
        s.apply(np.zeros((4, 3)))
    clone = Standardizer.from_dict(s.to_dict())
    np.testing.assert_array_equal(clone.mean, s.mean)
    np.testing.assert_array_equal(clone.std, s.std)
    assert clone.target_mean == s.target_mean and clone.target_std == s.target_std


# ----- dataset assembly -----


def series_fixture(pairs=1, m=12, n=5, dt=0.001, seed=30):
    rng = np.random.default_rng(seed)
    return [random_snapshot(rng, m, n, time=k * dt) for k in range(pairs + 1)], GridSpec(
        m=m, n=n, dx=0.01, dr=0.01, dt=dt
    )


def test_sample_count_matches_band_times_pairs():
    series, grid = series_fixture(pairs=3, m=12, n=5)
    part = DomainPartition(m=12, m_star=3)
    ds = build_dataset(series, grid, part, "T", seed=1)
    assert ds.n_total == 3 * part.flame_width() * 5


def test_desk_scale_sample_count():
    series, grid = series_fixture(pairs=1, m=96, n=24)
    part = DomainPartition(m=96, m_star=16)
    ds = build_dataset(series, grid, part, "T", seed=1)
    assert ds.n_total == 1536
    assert ds.train_inputs.shape == (round(0.8 * 1536), 30)
    assert ds.val_inputs.shape[0] == 1536 - round(0.8 * 1536)


def test_split_preserves_the_sample_multiset():
    series, grid = series_fixture(pairs=2, m=10, n=4)
    part = DomainPartition(m=10, m_star=2)
    ds = build_dataset(series, grid, part, "X_fuel", seed=7)
    joined = np.concatenate(
        [
            np.column_stack([ds.train_inputs, ds.train_targets]),
            np.column_stack([ds.val_inputs, ds.val_targets]),
        ]
    )
    from fvmnet.dataset import input_matrix

    raw_inputs = np.concatenate(
        [input_matrix(s, part, "tier") for s in series[:-1]], axis=0
    )
    raw_targets = np.concatenate(
        [
            target_matrix(a, b, part, grid.dt, "derivative")[:, IDX["X_fuel"]]
            for a, b in zip(series[:-1], series[1:])
        ]
    )
    raw = np.column_stack([raw_inputs, raw_targets])
    key = lambda m: m[np.lexsort(m.T[::-1])]
    np.testing.assert_array_equal(key(joined), key(raw))


def test_split_is_seed_deterministic_and_seed_sensitive():
    series, grid = series_fixture(pairs=1, m=12, n=5)
    part = DomainPartition(m=12, m_star=3)
    a = build_dataset(series, grid, part, "T", seed=3)
    b = build_dataset(series, grid, part, "T", seed=3)
    c = build_dataset(series, grid, part, "T", seed=4)
    np.testing.assert_array_equal(a.train_inputs, b.train_inputs)
    np.testing.assert_array_equal(a.train_targets, b.train_targets)
    assert not np.array_equal(a.train_inputs, c.train_inputs)


def test_variables_share_inputs_and_shuffle():
    series, grid = series_fixture(pairs=1, m=12, n=5)
    part = DomainPartition(m=12, m_star=3)
    splits = build_datasets(series, grid, part, variables=("T", "X_ox"), seed=5)
    np.testing.assert_array_equal(splits["T"].train_inputs, splits["X_ox"].train_inputs)
    np.testing.assert_array_equal(splits["T"].train_cells, splits["X_ox"].train_cells)
    assert not np.array_equal(splits["T"].train_targets, splits["X_ox"].train_targets)


def test_center_mode_and_absolute_mode():
    series, grid = series_fixture(pairs=1, m=12, n=5)
    part = DomainPartition(m=12, m_star=3)
    ds = build_dataset(
        series, grid, part, "T", input_mode="center", output_mode="absolute", seed=2
    )
    assert ds.train_inputs.shape[1] == N_VARS
    # Absolute targets are next-step values; all train targets must appear in
    # the next snapshot's temperature plane.
    assert set(np.round(ds.train_targets, 12)).issubset(
        set(np.round(series[1].values[IDX["T"]].ravel(), 12))
    )


def test_dataset_input_validation():
    series, grid = series_fixture(pairs=1, m=12, n=5)
    part = DomainPartition(m=12, m_star=3)
    with pytest.raises(DomainError):
        build_dataset(series[:1], grid, part, "T")
    with pytest.raises(DomainError):
        build_dataset(series, grid, part, "T", input_mode="stencil")
    with pytest.raises(DomainError):
        build_dataset(series, grid, part, "T", output_mode="next")
    with pytest.raises(DomainError):
        build_dataset(series, grid, part, "rho")
    with pytest.raises(DomainError):
        build_dataset(series, grid, part, "T", split_fraction=1.0)


def test_iter_samples_round_trip():
    series, grid = series_fixture(pairs=1, m=10, n=4)
    part = DomainPartition(m=10, m_star=2)
    ds = build_dataset(series, grid, part, "T", seed=9)
    samples = list(ds.iter_samples("val"))
    assert len(samples) == ds.val_inputs.shape[0]
    s0 = samples[0]
    np.testing.assert_array_equal(s0.input, ds.val_inputs[0])
    assert s0.target == ds.val_targets[0]
    assert part.contains(s0.cell[0])
