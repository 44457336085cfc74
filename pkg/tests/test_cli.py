import json

import numpy as np
import pytest

from sdiqrng.cli import main, parse_grid
from sdiqrng.extractors import ExtractorFunction, constant_table


def test_parse_grid():
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("0.1,0.5") == [0.1, 0.5]


def test_pguess_command_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["pguess", "--delta-grid", "0,0.5,1", "--out", str(out1)]) == 0
    assert main(["pguess", "--delta-grid", "0,0.5,1", "--out", str(out2)]) == 0
    csv1 = (out1 / "pguess.csv").read_bytes()
    csv2 = (out2 / "pguess.csv").read_bytes()
    assert csv1 == csv2  # byte-identical under identical configuration
    lines = csv1.decode().strip().split("\n")
    assert lines[0] == "delta,primal_lower,dual_upper,gap,certificate_id"
    first = lines[1].split(",")
    assert float(first[1]) == pytest.approx(1.0, abs=1e-6)
    assert float(first[2]) == pytest.approx(1.0, abs=1e-6)
    assert (out1 / "pguess.svg").read_text().startswith("<svg")
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["command"] == "pguess"
    assert str(out1 / "pguess.csv") in manifest["outputs"]


def test_extractor_build_and_check(tmp_path):
    table = tmp_path / "g.ext"
    assert main(["extractor", "build", "--nr", "7", "--m", "2",
                 "--table-file", str(table)]) == 0
    assert main(["extractor", "check", "--table-file", str(table)]) == 0
    g = ExtractorFunction.load(table)
    assert g.verified and g.n_r == 7 and g.m == 2


def test_extractor_check_violation_exit_code(tmp_path):
    bad = tmp_path / "bad.ext"
    constant_table(5, 5).save(bad)
    assert main(["extractor", "check", "--table-file", str(bad)]) == 2


def test_validate_identities_exit_zero(capsys):
    assert main(["validate", "--suite", "identities", "--instances", "10"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "max residual" in out


def test_config_file_fills_defaults(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"delta-grid": "0,1", "out": str(tmp_path / "run")}))
    assert main(["--config", str(cfg), "pguess"]) == 0
    csv = (tmp_path / "run" / "pguess.csv").read_text().strip().split("\n")
    assert len(csv) == 3  # header + two grid points


def test_flags_beat_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"delta-grid": "0,0.5,1"}))
    out = tmp_path / "flagged"
    assert main(["--config", str(cfg), "pguess", "--delta-grid", "0,1",
                 "--out", str(out)]) == 0
    csv = (out / "pguess.csv").read_text().strip().split("\n")
    assert len(csv) == 3


def test_rates_command_small(tmp_path):
    out = tmp_path / "rates"
    code = main(["rates", "--delta", "0.5", "--n-grid", "7000", "--pe", "0.95",
                 "--samples", "2", "--out", str(out)])
    assert code == 0
    lines = (out / "rates.csv").read_text().strip().split("\n")
    assert lines[0] == ("kind,delta,gamma,n,p_e,epsilon,samples,mean_rate,"
                        "std_error,certificate_id,seed")
    assert len(lines) == 2
    cert_id = lines[1].split(",")[-2]
    assert (out / "certificates" / f"{cert_id}.json").exists()


def test_rates_no_output_exit_code(tmp_path):
    # the deterministic endpoint certifies nothing
    out = tmp_path / "zero"
    code = main(["rates", "--delta", "0", "--n-grid", "2000", "--pe", "0.5",
                 "--samples", "2", "--out", str(out)])
    assert code == 3


def test_pguess_v_shape(tmp_path):
    # coarse grid: dual curve decreases to the midpoint then increases
    out = tmp_path / "shape"
    assert main(["pguess", "--delta-grid", "0:1:9", "--out", str(out)]) == 0
    rows = (out / "pguess.csv").read_text().strip().split("\n")[1:]
    duals = [float(r.split(",")[2]) for r in rows]
    mid = len(duals) // 2
    assert np.argmin(duals) == mid
    assert all(a >= b - 1e-6 for a, b in zip(duals[:mid], duals[1 : mid + 1]))
    assert all(b >= a - 1e-6 for a, b in zip(duals[mid:], duals[mid + 1 :]))


def test_extractor_check_malformed_file(tmp_path):
    bad = tmp_path / "not_a_table.bin"
    bad.write_bytes(b"definitely not a table")
    assert main(["extractor", "check", "--table-file", str(bad)]) == 4


def test_extractor_check_parity_table_reports_witness(tmp_path, capsys):
    from sdiqrng.extractors import parity_table

    table = tmp_path / "parity18.ext"
    parity_table(18).save(table)
    code = main(["extractor", "check", "--table-file", str(table)])
    out = capsys.readouterr().out
    assert code == 2  # 2^17 beats 18^2 sqrt(2)^17: XOR is not in this family
    assert f"r={(1 << 18) - 1}" in out and "131072" in out


def test_rates_gamma_one_certifies_nothing(tmp_path):
    out = tmp_path / "u"
    code = main(["rates", "--delta", "0.5", "--n-grid", "2000", "--gamma", "1.0",
                 "--pe", "0.9", "--samples", "2", "--out", str(out)])
    assert code == 3
    row = (out / "rates.csv").read_text().strip().split("\n")[1].split(",")
    assert float(row[7]) == 0.0  # mean_rate


def test_validate_thm2_cli(capsys):
    assert main(["validate", "--suite", "thm2"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "bound - exact distance" in out


def test_manifest_replays_byte_identical_csv(tmp_path):
    out1 = tmp_path / "orig"
    assert main(["rates", "--delta", "0.5", "--n-grid", "7000", "--pe", "0.95",
                 "--samples", "3", "--out", str(out1)]) == 0
    manifest = json.loads((out1 / "manifest.json").read_text())
    replay_cfg = dict(manifest["config"])
    replay_cfg["out"] = str(tmp_path / "replay")
    cfg_file = tmp_path / "replay.json"
    cfg_file.write_text(json.dumps(replay_cfg))
    assert main(["--config", str(cfg_file), "rates"]) == 0
    orig = (out1 / "rates.csv").read_bytes()
    replay = (tmp_path / "replay" / "rates.csv").read_bytes()
    assert orig == replay
