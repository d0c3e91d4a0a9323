import csv
import json

import pytest

from hybrid_reward.cli import main
from hybrid_reward.config import ConfigError, load_config, scorer_params


def load_expected(data_dir):
    return json.loads((data_dir / "pipeline_expected.json").read_text())["reports"]


def assert_reports_equal(got, expected):
    assert len(got) == len(expected)
    for g, e in zip(got, expected):
        assert g["task"] == e["task"] and g["n_items"] == e["n_items"]
        for key in ("acc_at", "pass_at_1"):
            if key in e:
                assert g[key] == e[key]
        if "map" in e:
            assert g["map"].keys() == e["map"].keys()
            for k in e["map"]:
                # summation order differs from the oracle's, hence ulp-level slack
                assert g["map"][k] == pytest.approx(e["map"][k], abs=1e-12)


def test_score_then_eval(tmp_path, data_dir):
    resp, ev, rep = tmp_path / "resp.jsonl", tmp_path / "ev.jsonl", tmp_path / "rep.json"
    src = str(data_dir / "pipeline_requests.jsonl")
    assert main(["score", src, "--strict", "--output", str(resp), "--eval-output", str(ev)]) == 0
    assert len(resp.read_text().splitlines()) == 50
    assert main(["eval", str(ev), "--strict", "--output", str(rep)]) == 0
    assert_reports_equal(json.loads(rep.read_text())["reports"], load_expected(data_dir))


def test_score_is_deterministic_and_parallel_safe(tmp_path, data_dir):
    src = str(data_dir / "pipeline_requests.jsonl")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["score", src, "--output", str(a)]) == 0
    assert main(["score", src, "--output", str(b), "--parallel", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_score_empty_input(tmp_path, capsys):
    f = tmp_path / "in.jsonl"
    f.write_text("")
    assert main(["score", str(f)]) == 0
    assert capsys.readouterr().out == ""


def test_score_one_group(tmp_path, capsys):
    f = tmp_path / "in.jsonl"
    f.write_text(json.dumps({"request_id": "a", "task": "VQA", "ground_truth": "yes", "rollouts": ["<think>t</think><answer>yes</answer>"]}))
    assert main(["score", str(f)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 and json.loads(lines[0])["request_id"] == "a"


def test_score_strict_reports_line(tmp_path, capsys):
    f = tmp_path / "in.jsonl"
    good = json.dumps({"request_id": "a", "task": "VQA", "ground_truth": "yes", "rollouts": ["x"]})
    f.write_text(good + "\n{broken\n")
    assert main(["score", str(f), "--strict"]) == 2
    assert f"{f}:2: INVALID_REQUEST" in capsys.readouterr().err
    # lenient mode writes an error body and carries on
    assert main(["score", str(f)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert json.loads(out[1])["error"]["code"] == "INVALID_REQUEST"


def test_eval_errors(tmp_path, data_dir, capsys):
    ev = tmp_path / "ev.jsonl"
    ev.write_text(json.dumps({"id": "a", "task": "VQA", "pred": "x", "gt": "x"}) + "\n")
    assert main(["eval", str(ev), "--task", "REC"]) == 2
    assert main(["eval", str(tmp_path / "missing.jsonl")]) == 2
    assert main(["eval", str(ev), "--thresholds", "0.5,abc"]) == 2
    ev.write_text("{bad\n")
    assert main(["eval", str(ev), "--strict"]) == 2
    assert ":1:" in capsys.readouterr().err


def test_eval_stdout_json(tmp_path, capsys):
    ev = tmp_path / "ev.jsonl"
    ev.write_text(json.dumps({"id": "a", "task": "REC", "pred": [0, 0, 10, 6], "gt": [0, 0, 10, 10]}) + "\n")
    assert main(["eval", str(ev), "--thresholds", "0.5,0.6"]) == 0
    captured = capsys.readouterr()
    assert json.loads(captured.out)["reports"][0]["acc_at"] == {"0.5": 100.0, "0.6": 0.0}
    assert "Acc@0.5" in captured.err


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["eval", "x", "--no-such-flag"])
    assert exc.value.code == 2


@pytest.mark.parametrize("cmd", ["score", "eval", "serve", "simulate", "plot-data", "config"])
def test_help(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for flag in ("--config", "--strict", "--seed", "--weights", "--matching", "--kl", "--output", "--parallel"):
        assert flag in out


def test_simulate_and_plot_data(tmp_path, capsys):
    out = tmp_path / "sim"
    assert main(["simulate", "--steps", "20", "--seeds", "2", "--compare-evol", "--output", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["runs"]) == {"evol", "no_evol"} and "comparison" in summary
    files = sorted(out.glob("trajectory_evol_seed*.csv"))
    assert [f.name for f in files] == ["trajectory_evol_seed0.csv", "trajectory_evol_seed1.csv"]
    agg = tmp_path / "agg.csv"
    assert main(["plot-data", *map(str, files), "--output", str(agg)]) == 0
    rows = list(csv.DictReader(agg.open()))
    assert len(rows) == 20 and rows[0]["runs"] == "2"
    assert float(rows[0]["entropy_min"]) <= float(rows[0]["entropy_median"]) <= float(rows[0]["entropy_max"])
    assert main(["plot-data", str(tmp_path / "nope.csv")]) == 2


def test_simulate_bad_world(capsys):
    assert main(["simulate", "--templates", "1", "--steps", "1"]) == 2


def test_config_precedence(tmp_path, monkeypatch, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[weights]\nlambda_evol = 0.5\nlambda_rpcr = 0.4\n[service]\nport = 9000\n")
    monkeypatch.setenv("HYBRID_REWARD_WEIGHTS_LAMBDA_EVOL", "0.3")
    monkeypatch.setenv("HYBRID_REWARD_PORT", "9100")
    cfg = load_config(ini)
    assert cfg["weights"]["lambda_evol"] == 0.3
    assert cfg["weights"]["lambda_rpcr"] == 0.4
    assert cfg["service"]["port"] == 9100
    cfg = load_config(ini, overrides={("weights", "lambda_evol"): 0.9})
    assert cfg["weights"]["lambda_evol"] == 0.9
    assert main(["config", "--config", str(ini), "--weights", "0,1,0"]) == 0
    out = capsys.readouterr().out
    assert "lambda_rpcr = 1.0" in out and "port = 9100" in out


def test_config_errors(tmp_path):
    bad = tmp_path / "c.ini"
    bad.write_text("[weights]\nlambda_oops = 1\n")
    with pytest.raises(ConfigError):
        load_config(bad, env={})
    with pytest.raises(ConfigError):
        load_config(None, env={"HYBRID_REWARD_PORT": "eighty"})
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini", env={})
    assert main(["config", "--config", str(bad)]) == 2


def test_scorer_params_from_config():
    params = scorer_params(load_config(env={}))
    assert params["lambda_rpcr"] == 0.7 and params["matching"] == "one_to_one" and params["n_features"] == 256
