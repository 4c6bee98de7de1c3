import json
import re
from pathlib import Path

import pytest

from bec_floquet.cli import EXIT_CONFIG, EXIT_OK, build_report, main

GOLDEN = Path(__file__).parent / "golden"
KAPPA1_CFG = "a00_nm = 7.51\n"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def body_and_header(path):
    lines = Path(path).read_text().splitlines()
    return [x for x in lines if x.startswith("#")], [x for x in lines if not x.startswith("#")]


# --- exit codes ---------------------------------------------------------------


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(capsys, "period", "--config", tmp_path / "absent.cfg", "--out-dir", tmp_path)
    assert code == EXIT_CONFIG
    assert "config error" in err


def test_inverted_k_range(tmp_path, capsys):
    code, _, err = run(capsys, "spectrum", "--k-min", 3e6, "--k-max", 1e6, "--out-dir", tmp_path)
    assert code == EXIT_CONFIG
    assert "k_min" in err


def test_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = red\n")
    code, _, err = run(capsys, "meanfield", "--config", cfg, "--out-dir", tmp_path)
    assert code == EXIT_CONFIG
    assert "unknown key" in err


# --- subcommands --------------------------------------------------------------


def test_meanfield_kappa1_reports_analytic_match(tmp_path, capsys):
    cfg = tmp_path / "k1.cfg"
    cfg.write_text(KAPPA1_CFG)
    code, out, _ = run(capsys, "meanfield", "--config", cfg, "--t-final", 2e-4, "--dt", 1e-7,
                       "--out-dir", tmp_path)
    assert code == EXIT_OK
    err = float(re.search(r"max relative deviation (\S+)", out).group(1))
    assert err < 1e-6
    data = json.loads((tmp_path / "meanfield.json").read_text())
    assert data["kappa"] == 1.0
    header, rows = body_and_header(tmp_path / "meanfield.csv")
    assert header[0] == f"# manifest_sha256={data['manifest_sha256']}"
    manifest = json.loads((tmp_path / "meanfield_manifest.json").read_text())
    assert manifest["manifest_sha256"] == data["manifest_sha256"]
    assert str(tmp_path / "meanfield.csv") in manifest["outputs"]


def test_period_subcommand(tmp_path, capsys):
    code, out, _ = run(capsys, "period", "--out-dir", tmp_path)
    assert code == EXIT_OK
    data = json.loads((tmp_path / "period.json").read_text())
    assert data["T"] == pytest.approx(150.39e-6, rel=1e-4)
    assert data["periodicity_passed"] is True
    assert "T = 150.39" in out


def test_kappa1_spectrum_is_stable(tmp_path, capsys):
    cfg = tmp_path / "k1.cfg"
    cfg.write_text(KAPPA1_CFG)
    code, out, _ = run(capsys, "spectrum", "--config", cfg, "--k-count", 30, "--out-dir", tmp_path)
    assert code == EXIT_OK
    assert "no instabilities" in out
    bands = json.loads((tmp_path / "bands.json").read_text())
    assert bands["instabilities"] is False and bands["bands"] == []


def test_spectrum_csv_identical_across_threads(tmp_path, capsys):
    outputs = []
    for threads in (1, 4):
        out_dir = tmp_path / f"t{threads}"
        code, _, _ = run(capsys, "spectrum", "--k-count", 60, "--threads", threads, "--out-dir", out_dir)
        assert code == EXIT_OK
        outputs.append((out_dir / "spectrum.csv").read_bytes())
    assert outputs[0] == outputs[1]
    manifest = json.loads((tmp_path / "t1" / "spectrum_manifest.json").read_text())
    assert outputs[0].decode().startswith(f"# manifest_sha256={manifest['manifest_sha256']}\n")


def test_twa_identical_across_threads(tmp_path, capsys):
    outputs = []
    for threads in (1, 3):
        out_dir = tmp_path / f"t{threads}"
        code, _, _ = run(capsys, "twa", "--realizations", 30, "--t-final", 1e-4, "--threads", threads,
                         "--out-dir", out_dir)
        assert code == EXIT_OK
        outputs.append([(out_dir / name).read_bytes() for name in ("twa_density.csv", "twa_growth.csv")])
    assert outputs[0] == outputs[1]


def test_twa_smoke_and_manifest(tmp_path, capsys):
    code, _, _ = run(capsys, "twa", "--realizations", 1, "--t-final", 1e-4, "--seed", 9, "--out-dir", tmp_path)
    assert code == EXIT_OK
    data = json.loads((tmp_path / "twa.json").read_text())
    assert data["realizations"] == 1 and data["seed"] == 9
    assert data["comparison"] is None
    manifest = json.loads((tmp_path / "twa_manifest.json").read_text())
    assert manifest["seed"] == 9
    assert set(manifest["versions"]) >= {"numpy", "scipy", "numba", "python"}


def test_twa_warns_on_parameter_mismatch(tmp_path, capsys):
    code, _, _ = run(capsys, "spectrum", "--k-count", 20, "--out-dir", tmp_path)
    assert code == EXIT_OK
    cfg = tmp_path / "other.cfg"
    cfg.write_text("atom_number = 2e5\n")
    code, _, err = run(capsys, "twa", "--config", cfg, "--realizations", 1, "--t-final", 5e-5,
                       "--spectrum", tmp_path / "spectrum.csv", "--out-dir", tmp_path / "twa")
    assert code == EXIT_OK
    assert "params hash mismatch" in err
    data = json.loads((tmp_path / "twa" / "twa.json").read_text())
    assert data["comparison"] == {"skipped": "params_sha256 mismatch"}


# --- report -------------------------------------------------------------------


def test_golden_report(tmp_path, capsys):
    code, out, _ = run(capsys, "report", "--inputs", GOLDEN, "--out-dir", tmp_path)
    assert code == EXIT_OK
    assert out == ""
    expected = json.loads((GOLDEN / "expected_report.json").read_text())
    assert json.loads((tmp_path / "report.json").read_text()) == expected
    assert (tmp_path / "report.md").read_text() == (GOLDEN / "expected_report.md").read_text()


def test_partial_report(tmp_path, capsys):
    code, out, _ = run(capsys, "report", "--period", GOLDEN / "period.json", "--bands", GOLDEN / "bands.json",
                       "--twa", tmp_path / "nothing.json", "--out-dir", tmp_path)
    assert code == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["period"]["nu0"] == pytest.approx(6649.25, rel=1e-5)
    assert report["twa_agreement"] == {"missing": "file not found: nothing.json"}
    assert "twa_agreement: missing" in out


def test_empty_report(tmp_path, capsys):
    code, out, _ = run(capsys, "report", "--out-dir", tmp_path)
    assert code == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    for name in ("period", "bands", "gamma_max", "twa_agreement"):
        assert "missing" in report[name]
    assert out.count("missing") == 3


def test_unreadable_input(tmp_path):
    bad = tmp_path / "period.json"
    bad.write_text("{not json")
    report = build_report(period_path=bad)
    assert report["period"]["missing"].startswith("unreadable JSON")
