import json
import os
import subprocess
import sys

import pytest

from active_scalar_lab.cli import bundled_config, main
from active_scalar_lab.config import SCHEMA, parse_config
from active_scalar_lab.errors import ConfigError


# {{{ config parsing

def test_defaults_fill_every_key():
    cfg = parse_config("")
    for sec, keys in SCHEMA.items():
        assert set(cfg[sec]) == set(keys)


def test_values_are_converted():
    cfg = parse_config("[rough]\np = 1.5, 2 4\ntimedep = no\n[solver]\nn = 256\n")
    assert cfg["rough"]["p"] == (1.5, 2.0, 4.0)
    assert cfg["rough"]["timedep"] is False
    assert cfg["solver"]["n"] == 256


@pytest.mark.parametrize("text,line", [
    ("[modulus]\nfamily = burgers\nKK = 3\n", 3),
    ("[modulus]\n\n[bogus]\nx = 1\n", 3),
    ("[nmp]\nalpha = half\n", 2),
    ("x = 1\n", 1),
    ("[nmp]\nalpha = 0.5\nalpha = 0.4\n", 3),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_digest_depends_on_resolved_values_only():
    a = parse_config("[modulus]\nK = 50\n")
    b = parse_config("# comment\n[modulus]\nK = 50.0   ; same value\n")
    c = parse_config("[modulus]\nK = 51\n")
    assert a.digest() == b.digest() != c.digest()
    head = a.header_lines("0.1.0", "certify")
    assert head[1] == f"config sha256 {a.digest()}"


def test_bundled_configs_parse():
    names = ["burgers_critical", "supercritical_fail", "blowup_alpha025", "ccf_supercritical",
             "rough_p2", "kernel_table", "simulate_burgers", "sqg_sweep"]
    for n in names:
        parse_config(bundled_config(n).read_text(), n)

# }}}

# {{{ cli


def test_certify_exit_codes(tmp_path, capsys):
    assert main(["certify", "--config", "burgers_critical", "--out-dir", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "burgers_critical_certificate.json").read_text())
    assert data["pass"] is True
    for key in ("constants", "grid", "flow_values", "diss", "total", "worst_xi", "config_sha256"):
        assert key in data
    assert main(["certify", "--config", "supercritical_fail", "--out-dir", str(tmp_path)]) == 1


def test_malformed_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[modulus]\nfamily = burgers\nKay = 50\n")
    assert main(["certify", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["certify", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_domain_error_exit_2(tmp_path, capsys):
    cfg = tmp_path / "k.cfg"
    cfg.write_text("[modulus]\nfamily = burgers\nK = 5\n")
    assert main(["certify", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2


def test_csv_header_and_reruns(tmp_path, capsys):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("[solver]\nn = 64\nT = 0.05\ndt = 0.01\nevery = 1\n[output]\nname = s\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(a)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(b)]) == 0
    text = (a / "s_simulate.csv").read_text()
    assert text == (b / "s_simulate.csv").read_text()
    lines = text.splitlines()
    assert lines[0].startswith("# active_scalar_lab ")
    digest = parse_config(cfg.read_text()).digest()
    assert lines[1] == f"# config sha256 {digest}"
    assert "#   n = 64" in lines


def test_out_dir_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ASL_OUT_DIR", str(tmp_path / "env"))
    assert main(["kernel-table", "--config", str(_small_kernel_cfg(tmp_path))]) == 0
    assert (tmp_path / "env" / "kt_kernel_table.csv").is_file()


def _small_kernel_cfg(tmp_path):
    p = tmp_path / "kt.cfg"
    p.write_text("[kernel]\nalphas = 0.5\nx_max = 10\nn = 20\n[output]\nname = kt\n")
    return p


def test_console_script_version():
    out = subprocess.run([sys.executable, "-m", "active_scalar_lab.cli", "--version"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.startswith("asl ")


def test_numpy_backend_switch():
    code = "from active_scalar_lab._backend import backend_name; print(backend_name())"
    env = {**os.environ, "ASL_BACKEND": "numpy"}
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"

# }}}
