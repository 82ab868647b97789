import json

import numpy as np
import pandas as pd
import pytest

import run
from config import DEFAULT_CONFIG, save_config
from conftest import SMALL_SYSTEM
from utils.common import aggregate_results, is_nondecreasing, trend_by_mode
from utils.conic import load_program
from utils.errors import OutputError
from utils.experiments import (
    SweepResult,
    SweepSpec,
    apply_full_scale,
    dump_first_subproblem,
    emit_outputs,
    parse_sweep_spec,
    read_raw_csv,
    replay_row,
    run_initialization_study,
    run_sweep,
    run_uncertainty_experiment,
    uncertainty_offsets,
)

TINY_SWEEP = {"parameter": "N", "values": [4], "seeds": 1, "base_seed": 3, "modes": ["active"],
              "system": dict(SMALL_SYSTEM)}


@pytest.fixture(scope="module")
def tiny_result():
    spec, error = parse_sweep_spec(TINY_SWEEP)
    assert error is None
    return spec, run_sweep(spec, workers=1, show_progress=False)


class TestSweepSpec:
    def test_defaults_are_merged(self):
        spec, error = parse_sweep_spec({"values": [8]}, {"seeds": 4, "system": {"L": 2}})
        assert error is None
        assert spec.seeds == 4 and spec.values == (8.0,)
        assert spec.system == {"L": 2}

    @pytest.mark.parametrize("bad", [{"parameter": "bandwidth"}, {"values": []}, {"seeds": 0}])
    def test_invalid_specs_return_error(self, bad):
        spec, error = parse_sweep_spec(bad)
        assert spec is None
        assert "扫描描述无效" in error

    def test_missing_file_returns_error(self, tmp_path):
        spec, error = parse_sweep_spec(tmp_path / "missing.json")
        assert spec is None and "不存在" in error

    def test_descriptor_order_and_seeds(self):
        spec = SweepSpec(parameter="p_max_dbm", values=(30.0, 40.0), seeds=2, base_seed=2 ** 64 - 1,
                         modes=("passive", "active"))
        tasks = spec.descriptors()
        assert [(t["value"], t["seed"], t["mode"]) for t in tasks[:4]] == [
            (30.0, 2 ** 64 - 1, "passive"), (30.0, 2 ** 64 - 1, "active"),
            (30.0, 0, "passive"), (30.0, 0, "active"),
        ]
        assert len(tasks) == 8

    def test_full_scale_preset(self):
        spec = apply_full_scale(SweepSpec(parameter="p_max_dbm", system={"N": 8}))
        assert spec.system["N"] == 100
        assert spec.seeds == 100
        assert spec.values == (30.0, 35.0, 40.0, 45.0)
        assert "N" not in apply_full_scale(SweepSpec(parameter="N", system={"N": 8})).system


def test_uncertainty_offsets_share_random_numbers():
    az_small, el_small = uncertainty_offsets(17, 2.5)
    az_large, el_large = uncertainty_offsets(17, 5.0)
    assert az_large == pytest.approx(2 * az_small)
    assert el_large == pytest.approx(2 * el_small)
    assert abs(az_small) <= 2.5 and abs(el_small) <= 2.5
    assert uncertainty_offsets(17, 0.0) == (0.0, 0.0)


def test_emit_outputs_rejects_empty_table(tmp_path):
    empty = SweepResult(raw=pd.DataFrame(), timing=pd.DataFrame(), aggregate=pd.DataFrame())
    with pytest.raises(OutputError):
        emit_outputs(empty, tmp_path / "out")
    assert not (tmp_path / "out").exists()


def test_sweep_rows_and_columns(tiny_result):
    _, result = tiny_result
    assert result.complete
    assert len(result.raw) == 1
    row = result.raw.iloc[0]
    assert row["mode"] == "active" and row["value"] == 4
    if row["feasible"]:
        assert row["gain"] > 0 and row["worst_residual"] >= -1e-6
    else:
        assert np.isnan(row["gain"])
    assert "solve_time" not in result.raw.columns
    assert list(result.timing.columns[-2:]) == ["solve_time", "subproblem_iterations"]


def test_rerun_gives_byte_identical_raw_table(tiny_result, tmp_path):
    spec, result = tiny_result
    again = run_sweep(spec, workers=1, show_progress=False)
    first = emit_outputs(result, tmp_path / "a")
    second = emit_outputs(again, tmp_path / "b")
    assert first[0].read_bytes() == second[0].read_bytes()
    assert first[0].read_text(encoding="utf-8").startswith("# schema_version=1\n")


def test_aggregates_recomputed_from_raw_file(tiny_result, tmp_path):
    _, result = tiny_result
    raw_path, aggregate_path, _ = emit_outputs(result, tmp_path)
    recomputed = aggregate_results(read_raw_csv(raw_path))
    written = read_raw_csv(aggregate_path)
    assert list(recomputed.columns) == list(written.columns)
    numeric = written.select_dtypes("number").columns
    np.testing.assert_allclose(recomputed[numeric].to_numpy(float), written[numeric].to_numpy(float),
                               rtol=1e-12, equal_nan=True)


def test_json_output_carries_schema_version(tiny_result, tmp_path):
    _, result = tiny_result
    raw_path = emit_outputs(result, tmp_path, fmt="json")[0]
    payload = json.loads(raw_path.read_text(encoding="utf-8"))
    assert payload["schema_version"] == 1
    assert payload["columns"][:4] == ["parameter", "value", "seed", "mode"]
    assert len(payload["rows"]) == 1


def test_replay_matches_recorded_row(tiny_result, tmp_path):
    spec, result = tiny_result
    raw_path = emit_outputs(result, tmp_path)[0]
    row = read_raw_csv(raw_path).iloc[0].to_dict()
    outcome = replay_row(row, spec)
    assert outcome["match"]


def test_zero_half_width_has_no_degradation():
    spec, _ = parse_sweep_spec({**TINY_SWEEP, "values": [0.0]})
    result = run_uncertainty_experiment(spec, workers=1, show_progress=False)
    row = result.raw.iloc[0]
    assert row["parameter"] == "target_uncertainty_deg"
    if row["feasible"]:
        assert row["ratio"] == pytest.approx(1.0, abs=1e-12)
        assert row["degradation"] == pytest.approx(0.0, abs=1e-12)
    assert "median_degradation" in result.aggregate.columns


def test_negative_half_width_rejected():
    spec, _ = parse_sweep_spec({**TINY_SWEEP, "values": [-1.0]})
    with pytest.raises(ValueError):
        run_uncertainty_experiment(spec, workers=1, show_progress=False)


def test_dump_first_subproblem_is_loadable(tmp_path):
    descriptor = {"seed": 3, "mode": "passive", "system": dict(SMALL_SYSTEM, N=4), "scene": {}, "solver": {}}
    path = dump_first_subproblem(descriptor, tmp_path / "dump" / "program.txt")
    program = load_program(path)
    assert program.group("theta").size == 4
    assert any(block.name.startswith("power") for block in program.blocks)


class TestCommandLine:
    @pytest.fixture
    def config_path(self, tmp_path):
        path = tmp_path / "config.json"
        save_config(DEFAULT_CONFIG, path)
        return path

    def _sweep_file(self, tmp_path, **overrides):
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps({**TINY_SWEEP, **overrides}), encoding="utf-8")
        return path

    def test_sweep_writes_outputs(self, tmp_path, config_path):
        out = tmp_path / "results"
        code = run.main(["sweep", "--config", str(config_path), "--sweep", str(self._sweep_file(tmp_path)),
                         "--output-dir", str(out), "--workers", "1", "--quiet"])
        assert code == 0
        assert sorted(p.name for p in out.iterdir()) == [
            "sweep_N_aggregate.csv", "sweep_N_raw.csv", "sweep_N_report.json", "sweep_N_timing.csv"]

    def test_invalid_sweep_exits_with_config_code(self, tmp_path, config_path):
        code = run.main(["sweep", "--config", str(config_path),
                         "--sweep", str(self._sweep_file(tmp_path, parameter="bandwidth")),
                         "--output-dir", str(tmp_path / "results"), "--quiet"])
        assert code == 2
        assert not (tmp_path / "results").exists()

    def test_missing_config_exits_with_config_code(self, tmp_path):
        assert run.main(["sweep", "--config", str(tmp_path / "absent.json"), "--quiet"]) == 2

    def test_dump_program_command(self, tmp_path, config_path):
        config = json.loads(config_path.read_text(encoding="utf-8"))
        config["system"].update(SMALL_SYSTEM, N=4)
        save_config(config, config_path)
        code = run.main(["dump-program", "--config", str(config_path), "--mode", "active", "--seed", "1",
                         "--output-dir", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "subproblem_active_1.txt").exists()


@pytest.mark.slow
def test_initialization_insensitivity():
    table, spread = run_initialization_study(5, n_starts=5, system=dict(SMALL_SYSTEM))
    assert table["feasible"].all()
    assert spread <= 0.02


@pytest.mark.slow
@pytest.mark.parametrize("mode", ["passive", "active"])
@pytest.mark.parametrize("parameter, values, increasing", [
    ("N", [8, 16, 32], True),
    ("p_max_dbm", [30.0, 35.0, 40.0], True),
    ("gamma_c_db", [5.0, 10.0, 15.0], False),
    ("gamma_t_db", [-5.0, 0.0, 5.0], True),
])
def test_gain_trends(parameter, values, increasing, mode):
    spec, _ = parse_sweep_spec({"parameter": parameter, "values": values, "seeds": 20, "modes": [mode]})
    result = run_sweep(spec, show_progress=False)
    trend = trend_by_mode(result.aggregate)[mode]
    assert len(trend) == len(values)
    assert is_nondecreasing(trend if increasing else trend[::-1], rtol=1e-6)


@pytest.mark.slow
def test_active_ris_gain_not_below_passive_on_shared_seeds():
    spec, _ = parse_sweep_spec({"parameter": "N", "values": [8, 16], "seeds": 20,
                                "modes": ["passive", "active"], "system": {"beta_max": 4.0}})
    result = run_sweep(spec, show_progress=False)
    medians = trend_by_mode(result.aggregate, "median_gain")
    for active, passive in zip(medians["active"], medians["passive"]):
        assert active >= passive
    paired = result.raw.pivot_table(index=["value", "seed"], columns="mode", values="gain").dropna()
    assert len(paired) > 0
    assert (paired["active"] >= paired["passive"]).mean() >= 0.5


@pytest.mark.slow
def test_uncertainty_degradation_grows_with_half_width():
    spec, _ = parse_sweep_spec({"values": [0.0, 2.5, 5.0], "seeds": 20, "modes": ["active"]})
    result = run_uncertainty_experiment(spec, show_progress=False)
    degradation = trend_by_mode(result.aggregate, "median_degradation")["active"]
    assert degradation[0] == 0.0
    assert degradation[1] <= 0.2
    assert is_nondecreasing(degradation)
