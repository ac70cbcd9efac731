import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from phasekit.cli import parse_and_dispatch
from phasekit.config import ConfigError, load_config, parse_override

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = sorted((ROOT / "configs").glob("*.json"))
BAD = sorted((Path(__file__).parent / "data" / "bad").glob("*.json"))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_shipped_configs_validate(path, capsys):
    assert parse_and_dispatch(["validate-config", "--config", str(path)]) == 0
    assert capsys.readouterr().out.strip().endswith(": ok")


def test_malformed_configs_rejected_with_distinct_messages(capsys):
    assert len(BAD) >= 10
    messages = set()
    for path in BAD:
        assert parse_and_dispatch(["validate-config", "--config", str(path)]) == 2, path.name
        err = capsys.readouterr().err.strip()
        assert err.startswith(f"error: {path}:"), err
        line = err.split(":")[2]
        assert line.isdigit() and int(line) >= 1
        messages.add(err.split(":", 3)[3])
    assert len(messages) == len(BAD)


def test_config_error_lines():
    with pytest.raises(ConfigError, match=r"syntax_error\.json:5:"):
        load_config(Path(__file__).parent / "data" / "bad" / "syntax_error.json")
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(CONFIGS[0], ["nonsense=1"])
    with pytest.raises(ConfigError, match="key=value"):
        load_config(CONFIGS[0], ["tau"])
    with pytest.raises(ConfigError, match=":0:"):
        load_config(ROOT / "missing.json")


def test_parse_override():
    assert parse_override("tau=0.5") == ("tau", 0.5)
    assert parse_override("scheme=sl-cn") == ("scheme", "sl-cn")
    assert parse_override("tau_list=[1, 0.5]") == ("tau_list", [1, 0.5])
    assert parse_override("bootstrap_A=null") == ("bootstrap_A", None)


def test_run_energy_config(tmp_path, capsys):
    out = tmp_path / "energy"
    code = parse_and_dispatch(["run", "--config", str(ROOT / "configs" / "energy.json"),
                               "--set", "steps=50", "--output-dir", str(out)])
    assert code == 0
    assert "certified" in capsys.readouterr().out
    with open(out / "ledger.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 51
    assert all(abs(float(r["E_eps"])) <= 1e-13 and abs(float(r["E_mod"])) <= 1e-13 for r in rows)
    resolved = json.loads((out / "config.resolved.json").read_text())
    assert resolved["steps"] == 50 and resolved["schema_version"] == 1


def test_set_override_matches_edited_json(tmp_path):
    base = {"schema_version": 1, "M": 10, "steps": 40, "tau": 0.1, "A": 2.0, "B": 3.0}
    cfg_a = tmp_path / "a.json"
    cfg_a.write_text(json.dumps(base))
    cfg_b = tmp_path / "b.json"
    cfg_b.write_text(json.dumps({**base, "tau": 0.01}))
    assert parse_and_dispatch(["run", "--config", str(cfg_a), "--set", "tau=0.01",
                               "--output-dir", str(tmp_path / "oa")]) == 0
    assert parse_and_dispatch(["run", "--config", str(cfg_b), "--output-dir", str(tmp_path / "ob")]) == 0
    assert (tmp_path / "oa" / "ledger.csv").read_bytes() == (tmp_path / "ob" / "ledger.csv").read_bytes()
    assert (tmp_path / "oa" / "config.resolved.json").read_text() == \
        (tmp_path / "ob" / "config.resolved.json").read_text()


def test_run_blowup_exit_code(tmp_path, capsys):
    code = parse_and_dispatch(["run", "--config", str(ROOT / "configs" / "energy.json"),
                               "--set", "init=random-uniform", "--set", "M=12", "--set", "steps=50",
                               "--set", "tau=1000", "--set", "bootstrap_A=0",
                               "--output-dir", str(tmp_path)])
    assert code == 3
    assert "blow-up at step" in capsys.readouterr().err
    assert (tmp_path / "ledger.csv").exists()


def test_scan_csv_schema(tmp_path):
    code = parse_and_dispatch(["scan", "--config", str(ROOT / "configs" / "table41_bdf2.json"),
                               "--set", "M=6", "--set", "steps=32", "--set", "tau_list=[10, 0.01]",
                               "--set", "candidates=[0, 5, 500]", "--jobs", "2",
                               "--output-dir", str(tmp_path)])
    assert code == 0
    path = tmp_path / "scan_sl-bdf2_A.csv"
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    assert header == ["tau", "fixed_name", "fixed_value", "min_constant"]
    assert len(rows) == 2 * 3
    for tau, name, fixed, m in rows:
        assert name == "B" and float(fixed) in (0, 5, 10)
        assert float(m) in (-1, 0, 5, 500)
        if float(tau) == 0.01:
            assert float(m) == 0


def test_converge_six_rows(tmp_path):
    code = parse_and_dispatch(["converge", "--config", str(ROOT / "configs" / "table45_bdf2.json"),
                               "--set", "M=10", "--set", "T=0.128", "--set", "preset_time=0.01",
                               "--output-dir", str(tmp_path)])
    assert code == 0
    with open(tmp_path / "convergence_sl-bdf2.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert rows[0]["l2_order"] == "" and all(r["l2_order"] for r in rows[1:])
    assert [float(r["tau"]) for r in rows] == [0.032, 0.016, 0.008, 0.004, 0.002, 0.001]


def test_converge_rejects_non_commensurate(tmp_path, capsys):
    code = parse_and_dispatch(["converge", "--config", str(ROOT / "configs" / "table45_bdf2.json"),
                               "--set", "T=0.05", "--output-dir", str(tmp_path)])
    assert code == 2
    assert "multiple" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("phasekit") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["phasekit", "validate-config", "--config", str(BAD[0])],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and proc.stderr.startswith("error:")
    proc = subprocess.run([sys.executable, "-m", "phasekit.cli", "validate-config",
                           "--config", str(CONFIGS[0])], capture_output=True, text=True)
    assert proc.returncode == 0
