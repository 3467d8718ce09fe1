import csv
import json
import subprocess
import sys

import pytest

from acsim import cli
from acsim.sim import SimConfig

from test_sim import _cyclic_sampler, toy_config, toy_scheme

SMALL = ["--goal-hours", "0.25", "--seed", "5"]


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def small_config(tmp_path, **extra):
    cfg = {"population": {"users": [5, 8], "admins": [1, 2]}, "out": str(tmp_path / "out"), **extra}
    return write(tmp_path, "cfg.json", cfg)


def test_list_schemes(capsys):
    assert cli.run_cli(["list-schemes"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    for name in ("gms", "rbac_u", "dac_v", "sd3gm", "adac", "dac_m"):
        assert name in out


def test_simulate_writes_logs_and_csv(tmp_path):
    assert cli.run_cli(["simulate", "--config", small_config(tmp_path)] + SMALL) == cli.EXIT_OK
    out = tmp_path / "out"
    lines = (out / "run_00000.jsonl").read_text().splitlines()
    types = {json.loads(x)["type"] for x in lines}
    assert types == {"event", "summary", "metrics"}
    rows = list(csv.reader((out / "summary.csv").open()))
    head = rows[0]
    assert head[:4] == ["run", "scheme", "users", "admins"]
    assert head[4:7] == ["time", "am_calls", "state_size"]
    assert head[7:12] == ["roles", "role_user_ratio", "coi_attempted", "coi_completed", "wall_ms"]
    assert [r[1] for r in rows[1:]] == ["rbac_u", "dac_v", "sd3gm"]


def test_montecarlo_and_workers_agree(tmp_path):
    cfg = small_config(tmp_path)
    assert cli.run_cli(["montecarlo", "--config", cfg, "--runs", "3"] + SMALL) == 0
    serial = sorted((tmp_path / "out").glob("run_*.jsonl"))
    texts = [p.read_text() for p in serial]
    assert len(serial) == 3
    assert cli.run_cli(["montecarlo", "--config", cfg, "--runs", "3", "--workers", "2",
                        "--out", str(tmp_path / "par")] + SMALL) == 0
    assert [p.read_text() for p in sorted((tmp_path / "par").glob("run_*.jsonl"))] == texts


def test_ci(tmp_path, capsys):
    cfg = small_config(tmp_path)
    assert cli.run_cli(["ci", "--config", cfg, "--max-runs", "4", "--tolerance", "0.5"] + SMALL) == 0
    doc = json.loads((tmp_path / "out" / "ci.json").read_text())
    assert doc["n"] <= 4 and doc["terminated_by"] in ("tolerance", "cap") and doc["confidence"] == 0.9


def test_verify_ok(tmp_path, capsys):
    argv = ["verify", "--workload", "gms", "--scheme", "rbac_u", "--impl", "sigma_r", "--depth", "2",
            "--out", str(tmp_path)]
    assert cli.run_cli(argv) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out)["verdict"] == "verified-to-bound"


def test_verify_counterexample_and_replay(tmp_path, capsys):
    argv = ["verify", "--workload", "dac", "--scheme", "dac_grant_all", "--impl", "identity", "--depth", "2",
            "--out", str(tmp_path)]
    assert cli.run_cli(argv) == cli.EXIT_COUNTEREXAMPLE
    path = tmp_path / "counterexample.json"
    doc = json.loads(path.read_text())
    assert doc["format"] == "acsim-trace/1" and doc["property"] == 2 and doc["witness_side"] == "target"
    capsys.readouterr()
    assert cli.run_cli(["replay", str(path)]) == cli.EXIT_OK
    first = json.loads(capsys.readouterr().out)
    assert cli.run_cli(["replay", str(path)]) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out) == first
    assert first["query"]["target_answer"] is True
    assert any(s["command"] == "GrantAll" and s["fired"] for s in first["steps"])


@pytest.mark.parametrize("cfg,needle", [
    ({"schemes": ["rbac_u", "gtrbac"]}, "schemes[1]"),
    ({"populaton": {}}, "populaton"),
    ({"rates": {"poast": 1.0}}, "poast"),
    ({"ci": {"confidence": 1.5}}, "ci.confidence"),
    ({"step_seconds": 0}, "step_seconds"),
    ({"population": {"users": [9, 3]}}, "population.users"),
])
def test_bad_config_exits_1(tmp_path, capsys, cfg, needle):
    assert cli.run_cli(["simulate", "--config", write(tmp_path, "bad.json", cfg)]) == cli.EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_unreadable_and_malformed_config(tmp_path):
    assert cli.run_cli(["simulate", "--config", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG
    assert cli.run_cli(["simulate", "--config", write(tmp_path, "x.json", "{nope")]) == cli.EXIT_CONFIG
    assert cli.run_cli(["simulate", "--bogus-flag"]) == cli.EXIT_CONFIG
    assert cli.run_cli(["verify", "--workload", "rbac"]) == cli.EXIT_CONFIG
    assert cli.run_cli(["verify", "--impl", "sigma_d"]) == cli.EXIT_CONFIG
    assert cli.run_cli(["replay", str(tmp_path / "none.json")]) == cli.EXIT_CONFIG


def test_invariant_breach_exits_2(tmp_path, monkeypatch, capsys):
    bad = SimConfig(toy_scheme(), toy_config().schemes, 50.0, 1.0, sampler=_cyclic_sampler, seed=3)
    monkeypatch.setattr(cli, "sim_config", lambda cfg: bad)
    code = cli.run_cli(["montecarlo", "--runs", "6", "--out", str(tmp_path)])
    assert code == cli.EXIT_INVARIANT
    assert "invariant error" in capsys.readouterr().err


def test_print_config_roundtrip(tmp_path, capsys):
    assert cli.run_cli(["simulate", "--config", small_config(tmp_path), "--seed", "7", "--print-config"]) == 0
    echoed = json.loads(capsys.readouterr().out)
    again = cli.load_config(write(tmp_path, "echo.json", echoed))
    assert again == echoed and echoed["seed"] == 7


def test_export_csv_is_stable(tmp_path):
    over = {"goal_hours": 0.1, "schemes": ["sd3gm"], "ci": {"scheme": "sd3gm"}}
    recs = cli.monte_carlo(cli.sim_config(cli.load_config(small_config(tmp_path), over)), 1)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.export_csv(recs, a)
    cli.export_csv(recs, b)
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 2
    with pytest.raises(cli.ConfigError):
        cli.export_csv([], a)


def test_dump_state(tmp_path, capsys):
    assert cli.run_cli(["dump-state", "--config", small_config(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "# rbac_u via sigma_r" in out and "Tc = 1" in out


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "acsim.cli", "list-schemes"], capture_output=True, text=True)
    assert r.returncode == 0 and "schemes:" in r.stdout
