import numpy as np
import pandas as pd
import pytest

from fshnnlib.analysis import (
    MetricReport,
    align_time,
    collect_reports,
    energy_deviation,
    evaluate,
    format_table,
    mse_curve,
    resolution_label,
    results_table,
    rollout_mse,
    size_table,
    zero_crossing_frequency,
)
from fshnnlib.analysis.metrics import load_report_summary
from fshnnlib.core import TrajectoryDataset
from fshnnlib.errors import ShapeError


def test_rollout_mse_examples():
    a = np.random.default_rng(0).normal(size=(2, 5, 3))
    assert rollout_mse(a, a) == 0.0
    assert rollout_mse(a + 0.5, a) == pytest.approx(0.25)

    pred = np.array([[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]])
    truth = np.array([[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0 + np.sqrt(6.0 / 22.0)]]])
    assert rollout_mse(pred, truth) == pytest.approx(1.0 / 22.0)

    with pytest.raises(ShapeError):
        rollout_mse(np.zeros((1, 3, 2)), np.zeros((1, 4, 2)))


def test_rollout_mse_of_diverged_prediction_is_nan():
    pred = np.zeros((1, 3, 2))
    pred[0, 2] = np.nan
    assert np.isnan(rollout_mse(pred, np.zeros((1, 3, 2))))


def test_mse_curve_per_frame():
    truth = np.zeros((2, 4, 3))
    pred = truth.copy()
    pred[:, 2] = 1.0
    pred[0, 3] = 2.0
    np.testing.assert_allclose(mse_curve(pred, truth), [0.0, 0.0, 1.0, 2.0])
    assert rollout_mse(pred, truth) == pytest.approx(mse_curve(pred, truth).mean())


def test_energy_deviation_examples():
    def energy(states):
        return np.sum(states**2, axis=-1)

    constant = np.ones((2, 4, 2))
    curve, absolute = energy_deviation(constant, energy)
    np.testing.assert_array_equal(curve, 0.0)
    assert not absolute

    growing = np.ones((1, 2, 2))
    growing[0, 1] *= np.sqrt(2.0)
    curve, _ = energy_deviation(growing, energy)
    np.testing.assert_allclose(curve[0], [0.0, 1.0])

    from_rest = np.zeros((1, 3, 2))
    from_rest[0, 1:] = 1.0
    curve, absolute = energy_deviation(from_rest, energy)
    assert absolute
    np.testing.assert_allclose(curve[0], [0.0, 2.0, 2.0])


def test_align_time_subsamples_reference():
    truth = TrajectoryDataset(states=np.arange(11.0)[None, :, None], dt=0.1)
    pred = TrajectoryDataset(states=np.arange(0.0, 11.0, 2.0)[None, :, None] + 0.5, dt=0.2)
    p, t = align_time(pred, truth)
    assert p.n_frames == t.n_frames == 6
    np.testing.assert_allclose(t.states[0, :, 0], [0, 2, 4, 6, 8, 10])
    assert rollout_mse(p, t) == pytest.approx(0.25)

    odd = TrajectoryDataset(states=np.zeros((1, 4, 1)), dt=0.15)
    with pytest.raises(ShapeError):
        align_time(odd, truth)


def test_zero_crossing_frequency():
    dt = 1e-3
    t = np.arange(0, 10, dt)
    signal = np.sin(2.0 * np.pi * t + 0.3) + 2.0
    assert zero_crossing_frequency(signal, dt) == pytest.approx(2.0 * np.pi, rel=1e-4)
    with pytest.raises(ValueError):
        zero_crossing_frequency(np.linspace(-1.0, 1.0, 100), dt)


def test_evaluate_and_report_round_trip(tmp_path):
    truth = TrajectoryDataset(states=np.ones((2, 4, 2)), dt=0.1)
    pred_states = np.ones((2, 4, 2))
    pred_states[1, 3] = np.nan
    pred = TrajectoryDataset(states=pred_states, dt=0.1)

    report = evaluate(pred, truth, lambda s: np.sum(s**2, axis=-1), {"system": "toy"})
    assert np.isnan(report.mse)
    assert report.divergence_step == 3
    np.testing.assert_allclose(report.energy_curve, 0.0)
    frame = report.curves()
    assert list(frame.columns) == ["time", "mse", "energy_deviation"]

    data = report.to_dict()
    assert data["mse"] is None
    assert data["final_mse"] is None
    assert data["n_frames"] == 4
    assert data["label"] == {"system": "toy"}

    path = str(tmp_path / "run_metrics.json")
    report.save(path, {"prediction": "p.fsh"})
    summary = load_report_summary(path)
    assert summary["divergence_step"] == 3
    assert summary["provenance"] == {"prediction": "p.fsh"}


def test_metric_report_checks_lengths():
    with pytest.raises(ShapeError):
        MetricReport(mse=0.0, times=np.zeros(3), mse_curve=np.zeros(4))


def test_resolution_label():
    assert resolution_label([1, 2, 3], None) == "Com."
    assert resolution_label([1, 2, 3], 0) == "High"
    assert resolution_label([1, 2, 3], 2) == "Low"
    assert resolution_label([1, 4], 1) == "I=4"
    with pytest.raises(ValueError):
        resolution_label([1, 2], 2)


def write_report(path, system, model, resolution, seed, mse, param_count=None):
    label = {"system": system, "model": model, "resolution": resolution, "seed": seed}
    if param_count is not None:
        label["param_count"] = param_count
    MetricReport(
        mse=mse,
        times=np.arange(2.0),
        mse_curve=np.array([0.0, mse]),
        label=label,
    ).save(str(path))


def test_results_table_orders_rows_and_takes_median(tmp_path):
    write_report(tmp_path / "a_1.json", "pendulum", "fs_hnn", "Com.", 0, 1.0)
    write_report(tmp_path / "a_2.json", "pendulum", "fs_hnn", "Com.", 1, 3.0)
    write_report(tmp_path / "a_3.json", "pendulum", "fs_hnn", "Com.", 2, 10.0)
    write_report(tmp_path / "b_1.json", "pendulum", "fs_hnn", "High", 0, 2.0)
    write_report(tmp_path / "c_1.json", "pendulum", "hnn", "Low", 0, 4.0)
    write_report(tmp_path / "d_1.json", "pendulum", "mlp", "High", 0, 5.0)
    write_report(tmp_path / "e_1.json", "fput", "mlp", "High", 0, 6.0)
    # Not a metric report; skipped.
    (tmp_path / "data.fsh.json").write_text('{"kind": "dataset"}\n')

    reports = collect_reports(str(tmp_path / "*.json"))
    assert len(reports) == 7
    table = results_table(reports)
    assert list(table.columns) == ["model", "res", "fput", "pendulum"]
    assert list(zip(table["model"], table["res"])) == [
        ("MLP", "High"),
        ("HNN", "Low"),
        ("FS-HNN", "High"),
        ("FS-HNN", "Com."),
    ]
    assert table.loc[3, "pendulum"] == pytest.approx(3.0)
    assert np.isnan(table.loc[1, "fput"])

    text = format_table(table)
    assert "FS-HNN" in text
    assert "3.000e+00" in text

    with pytest.raises(FileNotFoundError):
        collect_reports(str(tmp_path / "missing_*.json"))
    with pytest.raises(ValueError):
        results_table(pd.DataFrame())


def test_size_table_lists_parameter_counts(tmp_path):
    write_report(tmp_path / "a_1.json", "pendulum", "fs_hnn", "Com.", 0, 1.0, 1200)
    write_report(tmp_path / "a_2.json", "pendulum", "fs_hnn", "Low", 0, 2.0, 1200)
    write_report(tmp_path / "b_1.json", "pendulum", "hnn", "Com.", 0, 3.0, 400)
    write_report(tmp_path / "c_1.json", "fput", "mlp", "High", 0, 4.0, 900)
    write_report(tmp_path / "d_1.json", "fput", "reference", "Com.", 0, 0.0)

    reports = collect_reports(str(tmp_path / "*.json"))
    assert reports["param_count"].isna().sum() == 1
    table = size_table(reports)
    assert list(zip(table["model"], table["res"])) == [
        ("MLP", "High"),
        ("HNN", "Com."),
        ("FS-HNN", "Low"),
        ("FS-HNN", "Com."),
    ]
    assert table.loc[3, "pendulum"] == 1200
    assert np.isnan(table.loc[0, "pendulum"])
    assert "1200" in format_table(table, floatfmt=".0f")

    bare = collect_reports(str(tmp_path / "d_*.json"))
    with pytest.raises(ValueError):
        size_table(bare)
