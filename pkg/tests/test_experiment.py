import json

import numpy as np
import pytest

from cogmac import cli
from cogmac.errors import ParameterError
from cogmac.experiment import (
    CSV_HEADER,
    PRESETS,
    ExperimentSpec,
    SimSettings,
    compare,
    load_spec,
    parse_sweep,
    read_csv,
    run_sweep,
    spec_from_dict,
    sweep_range,
)


def write_json(tmp_path, data, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


@pytest.mark.parametrize("name, expected", [
    ("fig3", (0.8, 0.6, 0.9, 0.7)),
    ("fig4", (0.5, 0.3, 0.6, 0.35)),
    ("fig5", (0.8, 0.3, 0.9, 0.4)),
    ("fig6", (0.5, 0.15, 0.6, 0.2)),
])
def test_presets(tmp_path, name, expected):
    spec = load_spec(write_json(tmp_path, {"preset": name}))
    assert spec.profile.as_tuple() == expected


def test_q_range_out_of_domain(tmp_path):
    path = write_json(tmp_path, {"preset": "fig3", "sweep": {"var": "q", "start": 0, "stop": 1.5, "step": 0.5}})
    with pytest.raises(ParameterError, match="q"):
        load_spec(path)


def test_bad_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n "preset": "fig3",\n "q": }')
    with pytest.raises(ParameterError, match="line 3"):
        load_spec(path)


@pytest.mark.parametrize("data, match", [
    ({"preset": "fig9"}, "preset"),
    ({}, "required"),
    ({"preset": "fig3", "profile": [0.8, 0.6, 0.9, 0.7]}, "only one"),
    ({"profile": [0.5, 0.6, 0.9, 0.7]}, "p_1_12"),
    ({"preset": "fig3", "sweep": "q:0:1:0"}, "step"),
    ({"preset": "fig3", "sweep": "x:0:1:0.1"}, "sweep var"),
    ({"preset": "fig3", "M": 0}, "M"),
    ({"preset": "fig3", "bogus": 1}, "bogus"),
    ({"preset": "fig3", "simulation": {"slots": 10, "reps": 2}}, "reps"),
])
def test_spec_validation(data, match):
    with pytest.raises(ParameterError, match=match):
        spec_from_dict(data)


def test_scenario_spec():
    gain = {"P": {"D_P": 1.0, "D_S": 1.0}, "S": {"D_P": 1.0, "D_S": 1.0}}
    spec = spec_from_dict({"scenario": {"gain": gain, "noise": {"D_P": 0, "D_S": 0},
                                        "sinr_threshold": {"D_P": 1, "D_S": 1}}})
    assert spec.profile.as_tuple() == (1.0, 0.5, 1.0, 0.5)


def test_sweep_range_inclusive():
    assert sweep_range(0, 1, 0.1) == tuple(round(0.1 * k, 12) for k in range(11))
    assert sweep_range(1, 10, 3, integer=True) == (1, 4, 7, 10)
    assert parse_sweep("M=1,2,4,10") == ("M", (1, 2, 4, 10))
    assert parse_sweep("lambda:0:0.2:0.05") == ("lambda", (0.0, 0.05, 0.1, 0.15, 0.2))


def q_sweep(name):
    return ExperimentSpec(profile=PRESETS[name], sweep_var="q", sweep_values=sweep_range(0, 1, 0.1),
                          lam=0.3, M=2)


def test_fig3_sweep_nondecreasing_in_q():
    rows = run_sweep(q_sweep("fig3"))
    assert [r.value for r in rows] == list(sweep_range(0, 1, 0.1))
    assert np.all(np.diff([r.Taggr for r in rows]) >= 0)


def test_fig5_sweep_nonincreasing_in_q():
    rows = run_sweep(q_sweep("fig5"))
    assert np.all(np.diff([r.Taggr for r in rows]) <= 0)


def test_lambda_sweep_flags_unstable(tmp_path):
    spec = ExperimentSpec(profile=PRESETS["fig3"], sweep_var="lambda",
                          sweep_values=sweep_range(0, 0.95, 0.05), q=0.9)
    out = tmp_path / "lam.csv"
    rows = run_sweep(spec, out)
    for row in rows:
        assert row.stable == (row.value < 0.8)
        if not row.stable:
            assert row.Ts is None and row.Taggr is None and row.pi0 is None
    parsed = read_csv(out)
    unstable = [r for r in parsed if r["stable"] == "false"]
    assert [r["value"] for r in unstable] == ["0.8", "0.85", "0.9", "0.95"]
    assert all(r["Ts"] == r["Taggr"] == r["pi0"] == r["prob_band"] == "" for r in unstable)


def test_csv_round_trip(tmp_path):
    spec = ExperimentSpec(profile=PRESETS["fig4"], sweep_var="M", sweep_values=(1, 2, 4, 10),
                          lam=0.3, q=0.5, simulation=SimSettings(slots=20_000, replications=2, seed=3))
    out = tmp_path / "m.csv"
    rows = run_sweep(spec, out)
    parsed = read_csv(out)
    assert parsed == [r.to_record() for r in rows]
    assert out.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    assert parsed[0]["Ts_sim"] != "" and parsed[0]["Ts_ci"] != ""
    assert not list(tmp_path.glob(".*.tmp"))


def test_csv_values_have_ten_significant_digits():
    rows = run_sweep(ExperimentSpec(profile=PRESETS["fig3"], sweep_var="q", sweep_values=(0.9,)))
    rec = rows[0].to_record()
    assert rec["pi0"] == "0.5224077641"
    assert rec["Ts"] == "0.7574252483"
    assert rec["Ts_sim"] == "" and rec["Taggr_ci"] == ""


def test_sweep_rows_sorted():
    spec = ExperimentSpec(profile=PRESETS["fig3"], sweep_var="M", sweep_values=(10, 1, 4))
    assert [r.value for r in run_sweep(spec)] == [1, 4, 10]


def test_write_failure_surfaces_path(tmp_path):
    spec = ExperimentSpec(profile=PRESETS["fig3"])
    with pytest.raises(OSError):
        run_sweep(spec, tmp_path / "missing" / "x.csv")


def test_compare_passes_and_includes_zero_load():
    spec = ExperimentSpec(profile=PRESETS["fig3"], sweep_var="lambda", sweep_values=(0.0, 0.3, 0.85),
                          q=0.9, simulation=SimSettings(slots=200_000, replications=3, seed=5))
    report = compare(spec)
    assert report.passed
    assert report.unstable == [0.85]
    zero = [c for c in report.checks if c.value == 0.0 and c.metric == "Ts"][0]
    assert zero.analytical == 0.9
    assert "PASS" in report.format()


def test_compare_needs_simulation():
    with pytest.raises(ParameterError):
        compare(ExperimentSpec(profile=PRESETS["fig3"]))


# --- CLI -------------------------------------------------------------------

def test_cli_analyze(capsys):
    assert cli.main(["analyze", "--preset", "fig3", "--q", "0.9", "--lambda", "0.3", "--M", "2", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["t_secondary"] == pytest.approx(0.7574252483, abs=1e-10)
    assert out["stable"] is True


def test_cli_analyze_unstable(capsys):
    assert cli.main(["analyze", "--preset", "fig3", "--lambda", "0.9"]) == cli.EXIT_USAGE
    assert "unstable" in capsys.readouterr().err


def test_cli_profile_flag(capsys):
    assert cli.main(["analyze", "--profile", "0.8,0.6,0.9,0.7", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["mu1"] == pytest.approx(0.62)


def test_cli_bad_profile_is_validation_error(capsys):
    assert cli.main(["analyze", "--profile", "0.5,0.6,0.9,0.7"]) == cli.EXIT_USAGE


def test_cli_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["analyze", "--q", "abc"])
    assert exc.value.code == cli.EXIT_USAGE


def test_cli_sweep_writes_csv(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--preset", "fig5", "--sweep", "q:0:1:0.25", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [r["value"] for r in rows] == ["0", "0.25", "0.5", "0.75", "1"]


def test_cli_sweep_io_error(tmp_path, capsys):
    out = tmp_path / "nope" / "s.csv"
    assert cli.main(["sweep", "--preset", "fig5", "--out", str(out)]) == cli.EXIT_IO


def test_cli_config_file_with_override(tmp_path, capsys):
    path = write_json(tmp_path, {"preset": "fig3", "sweep": "lambda:0:0.2:0.1", "q": 0.5})
    assert cli.main(["sweep", "--config", str(path), "--q", "0.9"]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert len(text.splitlines()) == 4
    assert "0.62" in text.splitlines()[1]


def test_cli_simulate_and_trace(tmp_path, capsys):
    trace = tmp_path / "trace.txt"
    assert cli.main(["simulate", "--preset", "fig3", "--slots", "5000", "--warmup", "100",
                     "--reps", "2", "--seed", "1", "--trace", str(trace)]) == 0
    assert "t_secondary" in capsys.readouterr().out
    lines = trace.read_text().splitlines()
    assert lines[0].startswith("#") and len(lines) == 5001


def test_cli_compare_exit_codes(tmp_path, capsys):
    args = ["compare", "--preset", "fig3", "--sweep", "M=1,2", "--slots", "100000", "--reps", "2"]
    assert cli.main(args) == 0
    assert cli.main(["compare", "--profile", "0.5,0.6,0.9,0.7"]) == cli.EXIT_USAGE


def test_cli_compare_failure_exit(monkeypatch, capsys):
    import cogmac.experiment as experiment

    monkeypatch.setattr(experiment, "SIGMA_GATE", 0.0)
    monkeypatch.setattr(experiment.compare, "__defaults__", (0.0,))
    args = ["compare", "--preset", "fig3", "--slots", "20000", "--reps", "2"]
    assert cli.main(args) == cli.EXIT_COMPARE


def test_cli_phy(tmp_path, capsys):
    path = write_json(tmp_path, {
        "gain": {"P": {"D_P": 1.0, "D_S": 1.0}, "S": {"D_P": 1.0, "D_S": 1.0}},
        "noise": {"D_P": 0.0, "D_S": 0.0},
        "sinr_threshold": {"D_P": 1.0, "D_S": 1.0},
    }, "sc.json")
    assert cli.main(["phy", str(path)]) == 0
    out = capsys.readouterr().out
    assert "p_1_12 = 0.5" in out
    assert cli.main(["phy", str(tmp_path / "missing.json")]) == cli.EXIT_IO
