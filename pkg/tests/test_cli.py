import io
import json

import pytest

from aerial_twin.cli import main

from scenarios import minimal, radio


def cli(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture
def scenario_file(tmp_path):
    def write(doc, name="s.json"):
        p = tmp_path / name
        p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
        return str(p)
    return write


@pytest.fixture(scope="module")
def slicing_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("slicing")
    assert main(["run", "slicing_fig9", "--out", str(out)], out=io.StringIO()) == 0
    return out


@pytest.fixture(scope="module")
def rsrp_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("rsrp")
    assert main(["run", "rsrp_altitudes", "--out", str(out)], out=io.StringIO()) == 0
    return out


# -- validate ----------------------------------------------------------------------------------------


def test_validate_ok(scenario_file):
    code, text = cli("validate", scenario_file(minimal()))
    assert code == 0 and text.startswith("OK\n")
    assert json.loads(text[3:])["dt"] == 0.1


def test_validate_bundled_by_name():
    assert cli("validate", "tracer_orbiter")[0] == 0


def test_validate_airborne_prohibited(scenario_file, capsys):
    doc = minimal(registry=None)
    doc["nodes"][0]["radio"] = radio(freq=2.6e9, power=30.0, n_prb=6)
    doc["nodes"][1]["radio"] = radio(freq=2.6e9, power=20.0)
    code, _ = cli("validate", scenario_file(doc))
    err = capsys.readouterr().err
    assert code == 2 and "airborne_prohibited" in err and "UAV1" in err


def test_validate_malformed_json(scenario_file, capsys):
    code, _ = cli("validate", scenario_file('{"name":\n  oops}'))
    assert code == 2 and "line 2 column" in capsys.readouterr().err


def test_validate_missing_file(tmp_path):
    assert cli("validate", str(tmp_path / "absent.json"))[0] == 1


def test_bad_seed_rejected_by_parser():
    with pytest.raises(SystemExit) as exc:
        cli("validate", "tracer_orbiter", "--seed", "-1")
    assert exc.value.code == 2


# -- run -----------------------------------------------------------------------------------------------


def test_run_summary_and_outputs(scenario_file, tmp_path):
    code, text = cli("run", scenario_file(minimal(duration=5.0)), "--out", str(tmp_path / "o"))
    assert code == 0 and "ticks 50" in text and "records" in text
    assert (tmp_path / "o" / "measurements.csv").exists() and (tmp_path / "o" / "manifest.json").exists()


def test_run_invalid_scenario(scenario_file, tmp_path):
    doc = minimal()
    doc["missions"][0]["node"] = "UAV9"
    assert cli("run", scenario_file(doc), "--out", str(tmp_path / "o"))[0] == 2


def test_run_unwritable_output(scenario_file, tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert cli("run", scenario_file(minimal(duration=0.5)), "--out", str(blocker / "o"))[0] == 3


def test_run_same_seed_twice(tmp_path):
    for d in ("a", "b"):
        assert cli("run", "geofence_override", "--seed", "7", "--out", str(tmp_path / d))[0] == 0
    for name in ("measurements.csv", "events.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# -- plot-data -----------------------------------------------------------------------------------------


def test_plot_throughput_by_node(slicing_run):
    code, text = cli("plot-data", str(slicing_run / "measurements.csv"), "--metric", "throughput_bps")
    lines = text.splitlines()
    assert code == 0 and lines[0] == "time,UE1,UE2"
    assert len(lines) == 801


def test_plot_rsrp_by_leg(rsrp_run):
    code, text = cli("plot-data", str(rsrp_run / "measurements.csv"), "--metric", "rsrp_dbm",
                     "--group-by", "leg", "--events", str(rsrp_run / "events.jsonl"))
    header = text.splitlines()[0].split(",")
    assert code == 0
    assert [h for h in header if h.startswith("alt_")] == [f"alt_{a}m" for a in (100, 20, 40, 60, 80)]


def test_plot_unknown_metric(slicing_run):
    assert cli("plot-data", str(slicing_run / "measurements.csv"), "--metric", "loudness")[0] == 2


def test_plot_ambiguous_pivot(rsrp_run):
    code, _ = cli("plot-data", str(rsrp_run / "measurements.csv"), "--metric", "rsrp_dbm", "--group-by", "metric")
    assert code == 0
    code, _ = cli("plot-data", str(rsrp_run / "measurements.csv"), "--metric", "rsrp_dbm", "--group-by", "leg")
    assert code == 2


def test_plot_empty_csv(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("time,node_id,peer_node_id,lat,lon,alt,metric,value\r\n")
    assert cli("plot-data", str(p), "--metric", "snr_db") == (0, "time\n")
    p.write_text("")
    assert cli("plot-data", str(p), "--metric", "snr_db") == (0, "time\n")


def test_plot_is_pure(slicing_run):
    a = cli("plot-data", str(slicing_run / "measurements.csv"), "--metric", "throughput_bps")
    b = cli("plot-data", str(slicing_run / "measurements.csv"), "--metric", "throughput_bps")
    assert a == b


def test_plot_missing_file(tmp_path):
    assert cli("plot-data", str(tmp_path / "none.csv"), "--metric", "snr_db")[0] == 1


# -- replay --------------------------------------------------------------------------------------------


def test_replay_timeline(slicing_run):
    code, text = cli("replay", str(slicing_run / "events.jsonl"))
    lines = text.splitlines()
    assert code == 0 and lines[0].startswith("# scenario slicing_fig9")
    assert sum("slice_reconfig" in ln for ln in lines) == 4


def test_replay_flags_override(tmp_path):
    assert cli("run", "geofence_override", "--out", str(tmp_path))[0] == 0
    events = [json.loads(ln) for ln in (tmp_path / "events.jsonl").read_text().splitlines()]
    flagged = sum(e["kind"] in ("override", "rf_violation") for e in events)
    code, text = cli("replay", str(tmp_path / "events.jsonl"))
    assert code == 0 and flagged >= 1
    assert sum(ln.startswith("!!") for ln in text.splitlines()) == flagged


def test_replay_empty_log(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_text("")
    assert cli("replay", str(p)) == (0, "")


def test_replay_malformed_line(tmp_path, capsys):
    p = tmp_path / "e.jsonl"
    p.write_text('{"kind":"override","time":1.0,"payload":{}}\nnot json\n')
    assert cli("replay", str(p))[0] == 2
    assert "line 2" in capsys.readouterr().err
