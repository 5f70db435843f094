import csv
import json

import pytest

from fkrigidity import cli
from fkrigidity.errors import NumericError

NEU_CFG = {
    "domain": {"case": "interval", "b": 1.0, "alpha_bar": "neumann", "beta_bar": "neumann"},
    "potential": {"name": "zero"},
    "noise": {"name": "white"},
    "n_paths": 100,
    "seed": 3,
}


def write_cfg(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_airy_subcommand(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["airy", "--t", "0.25,0.5,1,2", "--out", str(out)]) == 0
    rows = read_csv(out / "airy.csv")
    assert len(rows) == 4 and all(float(r["rel_diff"]) < 1e-6 for r in rows)
    assert json.loads((out / "airy.json").read_text())["config"]["t_list"] == [0.25, 0.5, 1.0, 2.0]


def test_lt_scaling_slope(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["lt-scaling", "--q", "2", "--seed", "1", "--n-paths", "4000", "--out", str(out)]) == 0
    assert abs(json.loads((out / "lt-scaling.json").read_text())["slope"] - 1.5) < 0.1


def test_malformed_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "o"
    assert cli.main(["trace", "--config", str(bad), "--out", str(out)]) == 2
    assert not out.exists()
    err = json.loads(capsys.readouterr().err.strip())
    assert err["exit_status"] == 2


@pytest.mark.parametrize(
    "patch",
    [{"threads": 0}, {"domain": {"case": "disk"}}, {"n_paths": "many"}, {"unknown_key": 1}, {"seed": None}],
)
def test_schema_violations(tmp_path, patch):
    cfg = {**NEU_CFG, **patch}
    if patch.get("seed", 0) is None:
        cfg.pop("seed")
    out = tmp_path / "o"
    assert cli.main(["trace", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]) == 2
    assert not out.exists()


def test_missing_growth_exit_2(tmp_path):
    cfg = {**NEU_CFG, "domain": {"case": "full_line"}}
    assert cli.main(["trace", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2


def test_numeric_failure_exit_3(tmp_path, monkeypatch, capsys):
    def boom(cfg, out):
        out.csv("trace.csv", ["a"], [(1,)])
        raise NumericError("overflow")

    monkeypatch.setitem(cli._DISPATCH, "trace", boom)
    out = tmp_path / "o"
    assert cli.main(["trace", "--config", write_cfg(tmp_path, NEU_CFG), "--out", str(out)]) == 3
    assert not out.exists()
    assert json.loads(capsys.readouterr().err)["error"] == "NumericError"


def test_trace_deterministic_across_threads(tmp_path):
    path = write_cfg(tmp_path, NEU_CFG)
    outs = []
    for i, th in enumerate(("1", "1", "2")):
        out = tmp_path / f"o{i}"
        assert cli.main(["trace", "--config", path, "--t", "0.2,0.4", "--threads", th, "--out", str(out)]) == 0
        outs.append((out / "trace.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_report_and_scan(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["report", "--config", write_cfg(tmp_path, NEU_CFG), "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())["report"]
    assert doc["verdict"]["condition_holds"]
    assert doc["scans"][0]["fit"]["slope"] >= 0.4
    assert (out / "report.txt").read_text().startswith("domain: interval")
    assert sorted(p.name for p in out.iterdir()) == ["report-scan.csv", "report-scan.json", "report.csv", "report.json", "report.txt"]


def test_variance_scan_zero_noise(tmp_path):
    cfg = {**NEU_CFG, "noise": {"name": "none"}, "n_paths": 20}
    out = tmp_path / "o"
    assert cli.main(["variance-scan", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]) == 0
    assert json.loads((out / "variance-scan.json").read_text())["fit"]["degenerate"]


def test_spectrum_and_noise_check(tmp_path):
    cfg = {"domain": {"case": "full_line"}, "potential": {"name": "harmonic"}, "R": 10.0, "n_grid": 2000, "k": 3}
    out = tmp_path / "o"
    assert cli.main(["spectrum", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]) == 0
    lam = [float(r["eigenvalue"]) for r in read_csv(out / "spectrum.csv")]
    assert lam[0] == pytest.approx(0.70711, rel=1e-3)
    assert cli.main(["noise-check", "--config", write_cfg(tmp_path, {"noise": {"name": "fractional"}}), "--out", str(out)]) == 0
    assert all(r["psd"] == "true" for r in read_csv(out / "noise-check.csv"))


def test_config_subcommand_mismatch(tmp_path):
    cfg = {**NEU_CFG, "subcommand": "airy"}
    assert cli.main(["trace", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2
