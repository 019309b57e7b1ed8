import subprocess
import sys
from pathlib import Path

import pytest

from misblowup.cli import main
from misblowup.files import read_certificate, read_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def shell_cfg(tmp_path):
    # a coarse copy of the shell configuration keeps the CLI tests quick
    text = (CONFIGS / "shell.cfg").read_text().replace("N = 2000", "N = 400")
    path = tmp_path / "shell.cfg"
    path.write_text(text)
    return path


def test_no_arguments_is_a_usage_error(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_exits_two():
    proc = subprocess.run([sys.executable, "-m", "misblowup", "explode"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage" in proc.stderr


def test_bad_config_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[eos]\ngamma_adx = 2\n")
    assert main(["validate-eos", "--config", str(bad)]) == 2
    assert "did you mean" in capsys.readouterr().err


def test_validate_eos(shell_cfg):
    assert main(["validate-eos", "--config", str(shell_cfg)]) == 0


def test_certify_writes_certificate(shell_cfg, tmp_path):
    out = tmp_path / "cert"
    assert main(["certify", "--config", str(shell_cfg), "--out", str(out)]) == 0
    cert = read_certificate(out / "certificate.txt")
    assert cert.valid and cert.sigma == 220.0


def test_invalid_certificate_is_a_domain_failure(shell_cfg, tmp_path):
    out = tmp_path / "cert"
    assert main(["certify", "--config", str(shell_cfg), "--out", str(out), "--sigma", "1"]) == 1
    assert not read_certificate(out / "certificate.txt").valid


def test_certificate_verification_round_trip(shell_cfg, tmp_path):
    out = tmp_path / "cert"
    main(["certify", "--config", str(shell_cfg), "--out", str(out)])
    path = out / "certificate.txt"
    assert main(["--verify-certificate", str(path)]) == 0
    assert main(["--verify-certificate", str(path), "--config", str(shell_cfg)]) == 0
    # a certificate whose stored energy no longer matches the data
    lines = [("E = 1.0" if line.startswith("E = ") else line) for line in path.read_text().splitlines()]
    path.write_text("\n".join(lines) + "\n")
    assert main(["--verify-certificate", str(path), "--config", str(shell_cfg)]) == 1


def test_find_sigma0(shell_cfg, tmp_path):
    assert main(["find-sigma0", "--config", str(shell_cfg), "--out", str(tmp_path)]) == 0
    assert read_certificate(tmp_path / "certificate.txt").sigma0 == pytest.approx(220.0, rel=0.01)


def test_simulate_outputs_and_determinism(shell_cfg, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["simulate", "--config", str(shell_cfg), "--out", str(out), "--tmax", "0.02"]) == 0
        outs.append(out)
    a, b = outs
    header, rows = read_csv(a / "diagnostics.csv")
    assert header[:5] == ["t", "E", "I", "Q", "T_kin"] and len(header) == 14
    assert rows
    snap_header, _ = read_csv(a / "snap_0.csv")
    assert snap_header == ["r", "rho", "n", "Pi", "u", "cs2", "e"]
    report = (a / "breakdown.txt").read_text()
    assert "triggered = true" in report
    for f in sorted(p.name for p in a.iterdir()):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_simulate_rejects_small_domain(shell_cfg, tmp_path):
    text = shell_cfg.read_text().replace("mode = radial", "mode = radial\nL = 1.0")
    shell_cfg.write_text(text)
    assert main(["simulate", "--config", str(shell_cfg), "--out", str(tmp_path)]) == 2


def test_flowline_csv(tmp_path):
    assert main(["flowline", "--config", str(CONFIGS / "flowline.cfg"), "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "flowline.csv")
    assert header == ["tau", "rho", "n", "Pi", "e", "bound_Pi", "F"]
    assert len(rows) == 101
    assert all(abs(r[3]) <= r[5] for r in rows)


def test_riemann_table(shell_cfg, capsys):
    assert main(["riemann-check", "--config", str(shell_cfg)]) == 0
    out = capsys.readouterr().out
    assert "curl" in out and "max eigen-residual" in out
