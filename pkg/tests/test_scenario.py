"""Tests for scenario loading, validation, pipelines and garment calibration."""

import json
import math

import pytest

from meander_nfc.exceptions import CalibrationFailure, ScenarioParseError, ScenarioValidationError
from meander_nfc.export import read_csv
from meander_nfc.geometry import make_circular_coil
from meander_nfc.scenario import (
    canonical_hash,
    calibrate_garment,
    load_scenario,
    reference_scenarios,
    parse_scenario,
    run,
    save_scenario,
    sweep_grid,
    validate,
)


def _body(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("# generated")]


def _errors(data):
    with pytest.raises(ScenarioValidationError) as info:
        validate(data)
    return info.value


def test_minimal_scenario_loads(minimal_scenario):
    config = validate(minimal_scenario)

    assert config.pipeline == "impedance"
    assert config.seed == 7
    assert len(config.reader_paths) == 1
    assert len(config.tags) == 1
    assert config.tags[0].descriptor.sensor_kind.value == "temperature"
    assert config.reader_circuit.C_each == pytest.approx(250e-12, rel=0.02)
    assert config.row_count is None


def test_missing_seed_is_reported(minimal_scenario):
    del minimal_scenario["seed"]

    assert "seed" in _errors(minimal_scenario).field_paths()


def test_unknown_fields_are_reported(minimal_scenario):
    minimal_scenario["colour"] = "blue"

    assert "colour" in _errors(minimal_scenario).field_paths()


def test_all_problems_are_reported_at_once(minimal_scenario):
    minimal_scenario["reader"]["n_runs"] = 1
    minimal_scenario["tags"][0]["diameter"] = -0.03
    minimal_scenario["reader_circuit"] = {"R": "eighteen"}

    paths = _errors(minimal_scenario).field_paths()
    assert {"reader.n_runs", "tags[0].diameter", "reader_circuit.R"} <= set(paths)


def test_error_messages_name_the_field(minimal_scenario):
    minimal_scenario["reader"]["n_runs"] = 1

    assert "reader.n_runs: Must be >= 2." in str(_errors(minimal_scenario))


def test_duplicate_tag_uids_are_rejected(minimal_scenario):
    minimal_scenario["tags"].append({"uid": "01"})

    assert "tags[1].uid" in _errors(minimal_scenario).field_paths()


def test_non_finite_numbers_are_rejected(minimal_scenario):
    minimal_scenario["reader"]["panel_width"] = float("inf")

    assert "reader.panel_width" in _errors(minimal_scenario).field_paths()


def test_power_pipeline_needs_a_tag(minimal_scenario):
    minimal_scenario.update(pipeline="power", tags=[])

    assert "tags" in _errors(minimal_scenario).field_paths()


def test_sweep_variable_must_suit_the_pipeline(minimal_scenario):
    minimal_scenario["sweeps"] = [{"variable": "offset", "start": 0, "stop": 0.01, "step": 0.005}]

    assert "sweeps[0].variable" in _errors(minimal_scenario).field_paths()


def test_motions_need_a_seed(minimal_scenario):
    minimal_scenario.update(pipeline="power", power={"motions": [{"mode": "stretch", "amplitude": 0.05}]})

    assert "power.motions[0].seed" in _errors(minimal_scenario).field_paths()


def test_integer_link_ber_is_accepted(minimal_scenario):
    minimal_scenario.update(pipeline="protocol", session={"link_ber": 0})

    assert validate(minimal_scenario).section("session")["link_ber"] == 0


def test_link_ber_out_of_range_is_rejected(minimal_scenario):
    minimal_scenario["session"] = {"link_ber": [0.0, 0.7]}

    assert "session.link_ber" in _errors(minimal_scenario).field_paths()


def test_bad_tag_numbers_are_reported_by_field(minimal_scenario):
    minimal_scenario["tags"][0].update(
        calibration={"slope": "abc", "intercept": 30.0},
        placement={"axis": [0, 0, 1], "angle": "half"},
        ratio_baseline=None,
    )

    paths = _errors(minimal_scenario).field_paths()
    assert {"tags[0].calibration.slope", "tags[0].placement.angle", "tags[0].ratio_baseline"} <= set(paths)


def test_slot_shorter_than_airtime_is_rejected(minimal_scenario):
    minimal_scenario["frame"] = {"slot_duration": 1e-4}

    assert "frame.slot_duration" in _errors(minimal_scenario).field_paths()


def test_frame_is_calibrated_for_the_reference_count(minimal_scenario):
    config = validate(minimal_scenario)

    assert config.frame.slots_per_round == 4
    assert config.frame.slot_duration == pytest.approx(0.0703, abs=1e-4)


def test_tag_fields(minimal_scenario):
    minimal_scenario["tags"] = [
        {
            "uid": "0a",
            "placement": {"axis": [0, 0, 1], "angle": 0.5, "translation": [0.06, 0.15, 0.01]},
            "calibration": {"points": [[0.0, 30.0], [0.01, 31.0], [0.02, 32.0]]},
        }
    ]
    tag = validate(minimal_scenario).tags[0]

    assert tag.descriptor.uid == 10
    assert tag.descriptor.calibration.slope == pytest.approx(100.0)
    assert tag.coil.points[:, 2].min() == 0.0
    assert tag.path.points[:, 2].min() == pytest.approx(0.01)


def test_twin_and_helical_readers(minimal_scenario):
    minimal_scenario["reader"]["kind"] = "twin-meander"
    assert len(validate(minimal_scenario).reader_paths) == 2

    minimal_scenario["reader"] = {"kind": "helical", "circumference": 0.8, "turns": 4}
    assert len(validate(minimal_scenario).reader_paths) == 1


def test_reader_from_coil_file(tmp_path, minimal_scenario):
    (tmp_path / "coil.json").write_text(make_circular_coil(0.1, 1).to_json())
    minimal_scenario["reader"] = {"kind": "path", "file": "coil.json"}
    scenario = tmp_path / "scenario.json"
    scenario.write_text(json.dumps(minimal_scenario))

    assert load_scenario(scenario).reader_paths[0].closed


def test_parse_error_has_line_and_column():
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario('{\n  "seed": 1,\n  oops\n}', source="bad.json")

    assert info.value.line == 3
    assert info.value.column == 3
    assert str(info.value).startswith("bad.json:3:3:")


def test_missing_file_is_a_parse_error(tmp_path):
    with pytest.raises(ScenarioParseError):
        load_scenario(tmp_path / "nope.json")


def test_save_and_load_round_trip(tmp_path, minimal_scenario):
    config = validate(minimal_scenario)
    loaded = load_scenario(save_scenario(config, tmp_path / "scenario.json"))

    assert loaded.data == config.data
    assert loaded.hash == config.hash


def test_hash_ignores_key_order():
    assert canonical_hash({"a": 1, "b": [1, 2]}) == canonical_hash({"b": [1, 2], "a": 1})
    assert canonical_hash({"a": 1}) != canonical_hash({"a": 2})


def test_hash_changes_with_seed(minimal_scenario):
    first = validate(minimal_scenario).hash
    minimal_scenario["seed"] = 8

    assert validate(minimal_scenario).hash != first


def test_sweep_grid_is_inclusive():
    grid = sweep_grid(-0.03, 0.03, 0.005)

    assert len(grid) == 13
    assert grid[0] == -0.03
    assert grid[-1] == pytest.approx(0.03)


def test_row_count_is_the_sweep_product(minimal_scenario):
    minimal_scenario.update(
        pipeline="power",
        sweeps=[
            {"variable": "offset", "start": -0.01, "stop": 0.01, "step": 0.01},
            {"variable": "height", "values": [0.005, 0.01]},
        ],
    )

    assert validate(minimal_scenario).row_count == 6


def test_reference_preset_validates():
    configs = reference_scenarios(seed=3)

    assert len(configs) == 12
    assert len({c.name for c in configs}) == 12
    assert all(c.seed == 3 for c in configs)
    assert {c.pipeline for c in configs} == {"field-map", "impedance", "power", "ber", "protocol"}


def test_reference_sessions_share_one_frame():
    configs = {c.name: c for c in reference_scenarios(seed=3)}

    assert configs["session-8-tags"].frame == configs["session-4-tags"].frame


def test_impedance_pipeline(tmp_path, minimal_scenario):
    report = run(validate(minimal_scenario), out_dir=tmp_path)

    assert report.ok
    header, columns, rows = read_csv(tmp_path / "impedance.csv")
    assert header["seed"] == "7"
    assert columns == ["f_Hz", "Re", "Im", "Re_twin", "Im_twin", "difference_ratio"]
    assert len(rows) == 801
    summary = json.loads((tmp_path / "impedance_summary.json").read_text())
    assert summary["Q"] == pytest.approx(10.41, abs=0.05)
    assert summary["provenance"]["config_hash"] == header["config_hash"]


def test_impedance_mismatch_sweep(tmp_path, minimal_scenario):
    minimal_scenario["sweeps"] = [{"variable": "mismatch", "values": [0.0, 0.005, 0.05]}]
    run(validate(minimal_scenario), out_dir=tmp_path)

    _, columns, rows = read_csv(tmp_path / "impedance.csv")
    assert columns[0] == "mismatch"
    assert [r[4] for r in rows] == ["True", "True", "False"]


def test_json_output_format(tmp_path, minimal_scenario):
    minimal_scenario["output"] = {"format": "json"}
    run(validate(minimal_scenario), out_dir=tmp_path)

    table = json.loads((tmp_path / "impedance.json").read_text())
    assert table["columns"][0] == "f_Hz"
    assert len(table["rows"]) == 801


def test_field_map_pipeline(tmp_path, minimal_scenario):
    minimal_scenario.update(pipeline="field-map", field_map={"shape": [5, 3]})
    report = run(validate(minimal_scenario), out_dir=tmp_path)

    _, columns, rows = read_csv(tmp_path / "field_map.csv")
    assert columns == ["x", "y", "z", "Bx", "By", "Bz", "B_abs"]
    assert len(rows) == 15
    summary = json.loads((tmp_path / "field_map_summary.json").read_text())
    assert 0 < summary["depth_decay_ratio"] < 1
    assert report.rows == 15


def test_power_misalignment_pipeline(tmp_path, minimal_scenario):
    minimal_scenario.update(
        pipeline="power",
        sweeps=[{"variable": "offset", "start": -0.03, "stop": 0.03, "step": 0.005}],
    )
    report = run(validate(minimal_scenario), out_dir=tmp_path)

    _, columns, rows = read_csv(tmp_path / "power.csv")
    assert columns == ["offset", "k", "P_out_W", "efficiency", "outage", "error"]
    assert len(rows) == 13
    assert report.ok
    summary = json.loads((tmp_path / "power_summary.json").read_text())
    assert summary["k_reference"] != 0


def test_power_motion_pipeline_reports_outage(tmp_path, minimal_scenario):
    minimal_scenario.update(
        pipeline="power",
        power={"motions": [
            {"name": "standing", "mode": "stretch", "amplitude": 0.0, "seed": 1},
            {"name": "crossed", "mode": "stretch", "amplitude": 0.0, "seed": 1, "coil_contact": True},
        ]},
        sweeps=[{"variable": "motion"}],
    )
    run(validate(minimal_scenario), out_dir=tmp_path)

    _, _, rows = read_csv(tmp_path / "power.csv")
    assert rows[0][4] == "False"
    assert rows[1][4] == "True"
    assert float(rows[1][2]) == 0.0


def test_ber_pipeline_default_grid(tmp_path, minimal_scenario):
    minimal_scenario.update(pipeline="ber", channel={"bits_per_point": 2000})
    report = run(validate(minimal_scenario), out_dir=tmp_path)

    header, columns, rows = read_csv(tmp_path / "ber_bpsk_212.csv")
    assert len(rows) == 21
    assert columns[:5] == ["P_in_dBm", "bits", "errors", "ber", "sync_failures"]
    assert {r[6] for r in rows} == {header["config_hash"]}
    assert report.rows == 21
    assert "bpsk-212" in json.loads((tmp_path / "ber_summary.json").read_text())["threshold_dBm"]


def test_reruns_differ_only_in_timestamp(tmp_path, minimal_scenario):
    minimal_scenario.update(
        pipeline="ber",
        channel={"bits_per_point": 2000},
        sweeps=[{"variable": "P_in_dBm", "start": -16, "stop": -8, "step": 2}],
    )
    config = validate(minimal_scenario)
    run(config, out_dir=tmp_path / "a")
    run(config, out_dir=tmp_path / "b", threads=3)

    assert _body(tmp_path / "a" / "ber_bpsk_212.csv") == _body(tmp_path / "b" / "ber_bpsk_212.csv")


def test_protocol_session_pipeline(tmp_path, minimal_scenario):
    minimal_scenario.update(pipeline="protocol", session={"duration": 10.0})
    report = run(validate(minimal_scenario), out_dir=tmp_path)

    assert (tmp_path / "session_0000000000000001.csv").exists()
    assert (tmp_path / "session_summary.json").exists()
    assert report.rows > 0


def test_protocol_tag_count_sweep(tmp_path, minimal_scenario):
    minimal_scenario.update(
        pipeline="protocol",
        session={"duration": 30.0},
        sweeps=[{"variable": "n_tags", "values": [1, 4, 8]}],
    )
    run(validate(minimal_scenario), out_dir=tmp_path)

    _, columns, rows = read_csv(tmp_path / "protocol.csv")
    assert columns[:3] == ["n_tags", "slot_duration_s", "mean_rate_Hz"]
    slots = {float(r[1]) for r in rows}
    rates = [float(r[2]) for r in rows]
    assert len(slots) == 1
    assert rates[0] > rates[1] > rates[2]


def test_calibrate_tops_garment():
    result = calibrate_garment(
        {"L": 2.2e-6, "R": 18.0, "k_at_reference_tag": 0.04}, reference_tag=make_circular_coil(0.03, 6)
    )

    assert abs(result.residual) < 1e-3
    assert result.Q == pytest.approx(10.41, abs=0.05)
    assert result.circuit.n_caps == 4
    assert 0 < abs(result.k_reference) < 0.2
    assert result.report()["n_runs"] == result.spec.n_runs
    assert result.report()["target_k"] == 0.04


def test_calibrate_bottoms_garment():
    result = calibrate_garment({"L": 3.0e-6, "R": 23.0}, n_caps=5)

    assert result.Q == pytest.approx(11.12, abs=0.05)
    report = result.report()
    assert report["target_L"] == 3.0e-6
    assert report["target_Q"] == pytest.approx(2 * math.pi * 13.56e6 * 3.0e-6 / 23.0)
    assert report["target_k"] is None


def test_calibration_reports_unreachable_inductance():
    with pytest.raises(CalibrationFailure) as info:
        calibrate_garment({"L": 1e-3, "R": 18.0}, panel_width=0.2, max_height=0.3)

    assert info.value.residual < -0.1
    assert info.value.best > 0
