import csv
import json
from pathlib import Path

import pytest

from driftlab.cli import main
from driftlab.config import DEFAULT_CONFIGS, EXPERIMENTS, list_experiments

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=2))
    return p


def small(**physics):
    cfg = {"experiment": "l1_decay",
           "domain": {"kind": "interval", "bounds": [0, 1], "resolution": 40},
           "time": {"T": 0.2, "steps": 20},
           "physics": {"drift": {"kind": "linear", "rate": -1.0}, "u0": "signed_bumps"}}
    cfg["physics"].update(physics)
    return cfg


def test_list(capsys):
    assert main(["--list"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    for name in EXPERIMENTS:
        assert any(line.startswith(name) for line in lines)
    assert all(("Theorem" in line) or ("Proposition" in line) for line in lines)
    assert out == list_experiments() + "\n"


def test_minimal_config_passes(tmp_path):
    out = tmp_path / "out"
    assert main(["--config", str(write(tmp_path, small())), "--out", str(out), "--quiet"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["verdict"] == "pass"
    assert rep["config"]["physics"]["nu"] == 1.0
    assert rep["config"]["solver"]["advection_scheme"] == "upwind"
    assert rep["config"]["tolerances"]["rel_tol"] == 1e-12
    head = (out / "series.csv").read_text().splitlines()[0]
    assert head == "t,l1,l2,linf,grad_energy"


def test_expanding_drift_exit_two(tmp_path):
    cfg = small(drift={"kind": "linear", "rate": 1.0})
    out = tmp_path / "o"
    assert main(["--config", str(write(tmp_path, cfg)), "--out", str(out), "--quiet"]) == 2
    assert json.loads((out / "report.json").read_text())["verdict"] == "hypothesis_violated"


def test_falsified_check_exit_one(tmp_path):
    cfg = json.loads(json.dumps(DEFAULT_CONFIGS["uniqueness"]))
    cfg["domain"]["resolution"] = 20
    cfg["time"]["steps"] = 10
    cfg["tolerances"] = {"min_order": 50.0}
    assert main(["--config", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o"), "--quiet"]) == 1


@pytest.mark.parametrize("mutate,pattern", [
    (lambda c: c.update(experiment="max_principle", params={"s": 1.0}), r"\(n\+2\)/2"),
    (lambda c: c["physics"].update(drift={"kind": "vortex"}), "radial_power"),
    (lambda c: c.update(bogus=1), "bogus"),
    (lambda c: c["domain"].update(resolution=2), "resolution"),
    (lambda c: c["physics"].update(nu=0), "nu"),
])
def test_config_errors_exit_three(tmp_path, caplog, mutate, pattern):
    import re
    cfg = small()
    mutate(cfg)
    assert main(["--config", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 3
    assert re.search(pattern, caplog.text)


def test_unknown_key_reports_line(tmp_path, caplog):
    text = json.dumps(small(), indent=2).replace('"u0"', '"u_init"')
    path = write(tmp_path, text)
    line = next(i for i, s in enumerate(text.splitlines(), 1) if "u_init" in s)
    assert main(["--config", str(path)]) == 3
    assert f"{path}:{line}:" in caplog.text and "u_init" in caplog.text


def test_malformed_json(tmp_path, caplog):
    assert main(["--config", str(write(tmp_path, '{\n  "experiment": "energy",\n  oops\n}'))]) == 3
    assert ":3:" in caplog.text


def test_io_errors_exit_four(tmp_path):
    assert main(["--config", str(tmp_path / "missing.json")]) == 4
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["--config", str(write(tmp_path, small())), "--out", str(blocker / "sub"), "--quiet"]) == 4


def test_missing_config_flag():
    assert main([]) == 3


def test_byte_stable_reports_and_ledger(tmp_path):
    path = write(tmp_path, small())
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b, a):
        assert main(["--config", str(path), "--out", str(out), "--quiet"]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()
    rows = list(csv.reader((a / "ledger.csv").open()))
    assert rows[0][0] == "experiment" and len(rows) == 3
    assert rows[1] == rows[2]
    assert len((a / "run.log").read_text().splitlines()) == 2
    assert "T" not in json.loads((a / "report.json").read_text()).get("timestamp", "")


def test_series_precision(tmp_path):
    out = tmp_path / "o"
    main(["--config", str(write(tmp_path, small())), "--out", str(out), "--quiet"])
    row = (out / "series.csv").read_text().splitlines()[2].split(",")
    assert float(row[1]) == float("%.17g" % float(row[1]))
    assert len(row[1].replace("-", "").replace(".", "").split("e")[0]) >= 15


def test_shipped_configs_parse():
    from driftlab.config import parse_config
    names = sorted(p.name for p in CONFIGS.glob("*.json") if p.name != "suite_small.json")
    assert len(names) >= 9
    for name in names:
        parse_config(CONFIGS / name)


def test_suite(tmp_path):
    out = tmp_path / "suite"
    assert main(["--suite", "--config", str(CONFIGS / "suite_small.json"), "--out", str(out), "--quiet"]) == 0
    dirs = sorted(p.name for p in out.iterdir())
    assert dirs == ["00_l1_decay", "01_nonuniqueness", "02_instability"]
    for d in dirs:
        assert json.loads((out / d / "report.json").read_text())["verdict"] == "pass"


def test_suite_combines_exit_codes(tmp_path):
    bad = small(drift={"kind": "linear", "rate": 1.0})
    path = write(tmp_path, {"runs": [small(), bad]}, "suite.json")
    assert main(["--suite", "--config", str(path), "--out", str(tmp_path / "s"), "--quiet"]) == 2
