import json
import math
import shutil
from pathlib import Path

import pytest

from sgdlab.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def out(tmp_path):
    return tmp_path / "out"


def test_check_pass(out, capsys):
    assert main(["check", "--config", str(CONFIGS / "multiplicative.toml"), "--out", str(out)]) == 0
    doc = json.loads((out / "check.json").read_text())
    assert doc["master_seed"] == 0 and doc["config"]["oracle"]["kind"] == "multiplicative"
    text = capsys.readouterr().out
    assert "[derived]" in text and "[paper]" in text and "b F'(x)^2" in text


def test_check_fail_exit_1(out):
    assert main(["check", "--config", str(CONFIGS / "value-dependent.toml"), "--out", str(out)]) == 1


def test_check_quoted_channel(out):
    assert main(["check", "--config", str(CONFIGS / "additive.toml"), "--out", str(out), "--channel", "paper"]) == 1
    assert main(["check", "--config", str(CONFIGS / "additive.toml"), "--out", str(out)]) == 0


def test_parse_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[run]\nx0 = = 3\n")
    assert main(["check", "--config", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    bad.write_text("[run]\nwhat = 3\n")
    assert main(["check", "--config", str(bad)]) == 2
    assert main(["check", "--config", str(tmp_path / "absent.toml")]) == 2


def test_io_error_exit_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--config", str(CONFIGS / "exact.toml"), "--out", str(blocker / "sub"), "--k-max", "10"]) == 3


def test_run_xi_plot(out, capsys):
    assert main(["run", "--config", str(CONFIGS / "exact.toml"), "--out", str(out), "--x0", "1",
                 "--k-max", "3000", "--seed", "7"]) == 0
    rid = capsys.readouterr().out.splitlines()[0]
    for ext in ("csv", "json", "svg"):
        text = (out / f"{rid}.{ext}").read_text()
        assert '"master_seed": 0' in text or "&quot;master_seed&quot;: 0" in text
    assert "<metadata>" in (out / f"{rid}.svg").read_text()
    assert main(["xi", "--run", rid, "--out", str(out), "--probe", "0:50", "--n-draws", "1000"]) == 0
    doc = json.loads((out / f"{rid}.xi.json").read_text())
    assert len(doc["probes"]) == 51 and math.isfinite(doc["gamma_max"])
    (out / f"{rid}.svg").unlink()
    assert main(["plot", "--run", rid, "--out", str(out)]) == 0
    assert (out / f"{rid}.svg").exists()


def test_run_plateau_single_point(out, capsys):
    assert main(["run", "--config", str(CONFIGS / "exact.toml"), "--out", str(out), "--x0", str(2 * math.pi),
                 "--k-max", "100"]) == 0
    rid = capsys.readouterr().out.splitlines()[0]
    rows = [l for l in (out / f"{rid}.csv").read_text().splitlines()[2:]]
    assert {r.split(",")[1] for r in rows} == {repr(2 * math.pi)}


def test_run_gated(out):
    args = ["run", "--config", str(CONFIGS / "value-dependent.toml"), "--out", str(out), "--k-max", "2000"]
    assert main(args) == 1
    assert main(args + ["--force"]) == 0


def test_missing_run_exit_4(out):
    out.mkdir()
    assert main(["xi", "--run", "nothing", "--out", str(out)]) == 4
    assert main(["plot", "--run", "nothing", "--out", str(out)]) == 4


def test_kl(out, capsys):
    assert main(["kl", "--config", str(CONFIGS / "multiplicative.toml"), "--out", str(out), "--component", "min-5pi"]) == 0
    assert "theta_hat = " in capsys.readouterr().out
    lines = (out / "kl_min-5pi.csv").read_text().splitlines()
    header = json.loads(lines[0][2:])
    assert 0.45 <= header["theta"] <= 0.55 and header["master_seed"] == 0
    assert lines[1] == "x,side,gap,grad_norm" and len(lines) == 2002


def test_kl_plateau_interior(out, capsys):
    code = main(["kl", "--config", str(CONFIGS / "multiplicative.toml"), "--out", str(out),
                 "--component", "plateau", "--center", str(2 * math.pi)])
    assert code == 1 and "boundary" in capsys.readouterr().err


def test_kl_unknown_component(out):
    assert main(["kl", "--config", str(CONFIGS / "multiplicative.toml"), "--out", str(out), "--component", "zz"]) == 4


def test_table_small(out, capsys):
    assert main(["table", "--config", str(CONFIGS / "exact.toml"), "--out", str(out), "--seeds", "2",
                 "--k-max", "5000", "--workers", "1"]) == 0
    assert (out / "table_exact.csv").read_text().startswith("# ")
    assert "global-min" in capsys.readouterr().out


def test_run_escape_example(out, capsys):
    assert main(["run", "--config", str(CONFIGS / "additive.toml"), "--out", str(out), "--x0", "-0.5",
                 "--level", "10", "--k-max", "50000"]) == 0
    rid = capsys.readouterr().out.splitlines()[0]
    from sgdlab.engine import TrajectoryRecord
    rec = TrajectoryRecord.read(out / f"{rid}.csv", out / f"{rid}.json")
    assert rec.x[0, 0] == -0.5 and math.pi <= rec.final_x[0] <= 3 * math.pi
