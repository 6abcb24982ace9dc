import json
import subprocess
import sys

import pytest

from properdisc.cli import CSV_HEADER, parse_poly2, parse_polymap, read_config, run

LIFT = ["lift", "--h", "2;0", "--c", "0.5", "--eps", "0.1", "--r", "0.5"]


@pytest.fixture(scope="module")
def lift_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("lift")
    assert run(LIFT + ["--out", str(out)]) == 0
    return out


def test_artifacts(lift_dir):
    names = {p.name for p in lift_dir.iterdir()}
    assert {"report.json", "samples.csv", "samples.provenance.json", "coeffs.json"} <= names
    assert ".lock" not in names


def test_csv_shape(lift_dir):
    raw = (lift_dir / "samples.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == CSV_HEADER == "theta,r,re_f1,im_f1,re_f2,im_f2,rho"
    assert len(lines) == 513
    assert all(len(row.split(",")) == 7 for row in lines[1:])


def test_provenance(lift_dir):
    prov = json.loads((lift_dir / "report.json").read_text())["provenance"]
    assert prov["command"] == "lift" and prov["seed"] == 7 and prov["partial"] is False
    assert "out" not in prov["config"]
    side = json.loads((lift_dir / "samples.provenance.json").read_text())
    assert side["provenance"] == prov


def test_rerun_byte_identical(lift_dir, tmp_path):
    assert run(LIFT + ["--out", str(tmp_path)]) == 0
    for name in ("report.json", "samples.csv", "coeffs.json", "samples.provenance.json"):
        assert (tmp_path / name).read_bytes() == (lift_dir / name).read_bytes()


def test_grid_flags(tmp_path):
    assert run(LIFT + ["--out", str(tmp_path), "--gridTheta", "16", "--gridRadii", "0.5,1"]) == 0
    assert len((tmp_path / "samples.csv").read_text().splitlines()) == 33


def test_c_ge_1_rejected(tmp_path, capsys):
    assert run(["cone", "--c", "1.2", "--out", str(tmp_path)]) == 2
    assert "c:" in capsys.readouterr().err


@pytest.mark.parametrize("flag,val", [("--r1", "1.5"), ("--stages", "0"), ("--eps", "-1"),
                                      ("--gridRadii", "0.5,2")])
def test_invalid_fields(flag, val, capsys):
    assert run(["cone", flag, val]) == 2
    assert flag.lstrip("-") in capsys.readouterr().err


def test_partial_flag(tmp_path):
    code = run(["cone", "--stages", "2", "--max_family", "4", "--a", "0.2", "--out", str(tmp_path)])
    assert code == 1
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["provenance"]["partial"] is True
    assert (tmp_path / "samples.csv").exists()


def test_lockfile(tmp_path, capsys):
    (tmp_path / ".lock").touch()
    assert run(LIFT + ["--out", str(tmp_path)]) == 2
    assert "locked" in capsys.readouterr().err


def test_config_file(tmp_path, lift_dir):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("command = lift\n# the standard example\nh = 2;0\nc = 0.5\neps = 0.1\nr = 0.5\n")
    out = tmp_path / "o"
    assert run(["--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "samples.csv").read_bytes() == (lift_dir / "samples.csv").read_bytes()
    js = tmp_path / "run.json"
    js.write_text(json.dumps({"command": "lift", "h": "2;0", "eps": 0.1}))
    assert read_config(str(js)) == ["lift", "--h", "2;0", "--eps", "0.1"]


def test_oracle(capsys):
    assert run(["oracle", "--c", "0.5"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("a(0.5) = 0.8916")
    assert "100/100" in out


def test_diagnose_from_source(lift_dir, capsys):
    code = run(["diagnose", "--source", str(lift_dir), "--P", "2,0:1", "--directions", "8", "--targets", "3"])
    rep = json.loads(capsys.readouterr().out)
    assert code == 0 and rep["ok"]
    assert rep["proper_pair"]["ok"]


def test_parsers():
    assert parse_polymap("1,2;0").degree == 1
    assert parse_poly2("1,1:2; 0,0:1") == {(1, 1): 2, (0, 0): 1}


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "properdisc.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
