import csv
import subprocess
import sys

import numpy as np
import pytest

from boltzsoft import cli, linop
from boltzsoft.collision import PerturbationField
from boltzsoft.config import load, parse_text
from boltzsoft.errors import ConfigError

QUICK = """
[grid]
n = 7
[solver]
windows = 2
[weight]
mode = exploratory
beta = 6
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_defaults():
    cfg = load(None)
    assert cfg.grid.n == 25 and cfg.weight.beta == 37.0 and cfg.weight.mode == "theorem"
    assert cfg.exploratory_weight().beta == 6.0


def test_sections_and_dotted_keys_agree():
    a = parse_text("[kernel]\ngamma = -0.5\n")
    b = parse_text("kernel.gamma = -0.5  # comment\n")
    assert a["kernel.gamma"] == b["kernel.gamma"] == -0.5


@pytest.mark.parametrize("text,line,key", [
    ("grid.n = 9\nkernel.colour = red\n", 2, "kernel.colour"),
    ("grid.n = nine\n", 1, "grid.n"),
    ("grid.n = 9\ngrid.n = 11\n", 2, "grid.n"),
    ("\n\nno equals sign\n", 3, None),
])
def test_parse_errors_name_line_and_field(text, line, key):
    with pytest.raises(ConfigError) as exc:
        parse_text(text)
    assert exc.value.line == line and exc.value.key == key
    assert f"line {line}" in str(exc.value)


def test_validation_errors_name_field(tmp_path):
    p = _write(tmp_path, "grid.n = 9\ngrid.n2 = 3\n")
    with pytest.raises(ConfigError):
        load(p)
    p = _write(tmp_path, "\nkernel.gamma = -4\n")
    with pytest.raises(ConfigError) as exc:
        load(p)
    assert exc.value.line == 2 and exc.value.key == "kernel.gamma"


def test_cli_malformed_config_exits_2(tmp_path, capsys):
    p = _write(tmp_path, "[grid]\nn = 8\n")
    assert cli.main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "grid.n" in err


def test_cli_bad_arguments_exit_2(tmp_path):
    assert cli.main(["simulate", "--threads", "0", "--out", str(tmp_path)]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_simulate_zero_data(tmp_path):
    p = _write(tmp_path, QUICK + "[initial]\nfamily = zero\n")
    out = tmp_path / "zero"
    assert cli.main(["simulate", "--config", str(p), "--out", str(out)]) == 0
    rows = _csv(out / "norms.csv")
    header = rows[0]
    for r in rows[1:]:
        rec = dict(zip(header, r))
        for k in ("lp_v_linf_t_linf_x", "lp_v_linf_x", "M0", "E0", "entropy_functional"):
            assert float(rec[k]) == 0.0
    assert "status: ok" in (out / "run_report.txt").read_text()


def test_simulate_bump_writes_artifacts(tmp_path):
    p = _write(tmp_path, QUICK + "[initial]\nfamily = gaussian-bump\ntarget_norm = 0.5\n"
                                 "[domain]\nmode = slab1d\nperiod = 1\ncells = 4\n")
    out = tmp_path / "bump"
    assert cli.main(["simulate", "--config", str(p), "--out", str(out)]) == 0
    header = _csv(out / "norms.csv")[0]
    assert {"entropy_nonincreasing", "relative_entropy_lhs_max", "relative_entropy_rhs"} <= set(header)
    assert _csv(out / "iterations.csv")[0] == ["window", "iterate", "weighted_norm", "difference", "ratio",
                                               "min_F_over_max_F"]
    assert (out / "norm_reports.txt").exists()
    traj = sorted(out.glob("trajectory*.csv"))
    assert traj and _csv(traj[0])[0][:3] == ["cell", "v_index", "vx"]


def test_simulate_positivity_violation_exits_4(tmp_path, monkeypatch):
    def negative(cfg):
        g = cfg.grid
        return PerturbationField(-2.0 * g.sqrt_mu, g, cfg.domain)  # F0 = -mu

    monkeypatch.setattr(cli, "_initial", negative)
    p = _write(tmp_path, QUICK)
    out = tmp_path / "neg"
    assert cli.main(["simulate", "--config", str(p), "--out", str(out)]) == 4
    assert "PositivityViolationError" in (out / "run_report.txt").read_text()


def test_simulate_divergence_exits_3(tmp_path):
    p = _write(tmp_path, "[grid]\nn = 7\n[weight]\nmode = exploratory\nbeta = 6\n"
                         "[solver]\npicard_tol = 1e-300\npicard_max_iters = 2\n"
                         "[initial]\nfamily = gaussian-bump\ntarget_norm = 0.5\n")
    out = tmp_path / "div"
    assert cli.main(["simulate", "--config", str(p), "--out", str(out)]) == 3
    assert "SolverDivergenceError" in (out / "run_report.txt").read_text()
    assert len(_csv(out / "iterations.csv")) == 3


def test_verify_failure_exits_1(tmp_path, capsys):
    p = _write(tmp_path, "[verify]\nn = 9\ncoarse_n = 7\nrandom_fields = 2\ncriteria = 1\n")
    assert cli.main(["verify", "--config", str(p), "--out", str(tmp_path / "v")]) == 1
    lines = (tmp_path / "v" / "verify_report.txt").read_text().splitlines()
    assert lines[0].startswith("#")
    assert any(ln.startswith("C01 FAIL") for ln in lines[1:])


def test_verify_report_independent_of_threads(tmp_path):
    p = _write(tmp_path, "[verify]\nn = 9\ncoarse_n = 7\ncriteria = 2, 12, 13\n")
    outs = []
    for t in ("1", "3"):
        out = tmp_path / f"t{t}"
        assert cli.main(["verify", "--config", str(p), "--out", str(out), "--threads", t]) == 0
        outs.append((out / "verify_report.txt").read_bytes())
    assert outs[0] == outs[1]
    for ln in outs[0].decode().splitlines()[1:]:
        fields = ln.split()
        assert fields[0].startswith("C") and fields[1] in ("PASS", "FAIL", "INFO")
        float(fields[2]), float(fields[3])


def test_sweep_m_flags_constant_series(tmp_path, monkeypatch):
    monkeypatch.setattr(linop, "km_point", lambda probe, m, params: 1.0)
    out = tmp_path / "sw"
    assert cli.main(["sweep-m", "--out", str(out), "--m-list", "0.4,0.2,0.1"]) == 1
    assert "non_scaling: true" in (out / "sweep_m.txt").read_text().lower()
    assert _csv(out / "sweep_m.csv")[0] == ["m", "sup_norm", "fitted_slope"]


def test_sweep_m_rejects_short_list(tmp_path):
    assert cli.main(["sweep-m", "--out", str(tmp_path), "--m-list", "0.4,0.2"]) == 2
    assert cli.main(["sweep-m", "--out", str(tmp_path), "--m-list", "0.4,abc"]) == 2


def test_kernel_report(tmp_path):
    p = _write(tmp_path, "grid.n = 7\nkernel_report.betas = 0, 10\n")
    out = tmp_path / "kr"
    assert cli.main(["kernel-report", "--config", str(p), "--out", str(out)]) == 0
    kb = _csv(out / "kernel_k_bound.csv")
    assert kb[0] == ["v_speed", "eta_speed", "distance", "bound"]
    assert all(float(r[3]) > 0 for r in kb[1:])
    lb = _csv(out / "l_bounds.csv")
    assert lb[0] == ["beta", "m", "statistic", "max", "min", "spread"]
    assert len(lb) == 1 + 2 * 4


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "boltzsoft.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("simulate", "verify", "sweep-m", "kernel-report"):
        assert cmd in res.stdout
