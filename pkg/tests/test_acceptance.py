"""Desk-scale acceptance run: one pass/fail line per criterion at the stated tolerance.

Criteria 1-12 share one verification context (grids, quadratures and solver
runs are computed once).  Criterion 13 runs the command-line ``verify`` twice
on a small configuration with 1 and 8 threads and compares the reports byte
for byte, in addition to the in-process bitwise kernel check.
"""

import pytest

from boltzsoft import cli, verify
from boltzsoft.config import load

pytestmark = pytest.mark.slow

QUICK = """
[grid]
n = 9
[solver]
windows = 2
[verify]
n = 9
coarse_n = 7
solver_n = 9
fields = 3
random_fields = 2
norms = 0.1, 1.0
criteria = 2, 3, 6, 7, 8, 9, 12, 13
"""


@pytest.fixture(scope="module")
def context():
    return verify.Context(load(None), threads=1)


def _emit(capsys, rows):
    with capsys.disabled():
        for line in verify.report_lines(rows)[1:]:
            print("\n" + line, end="")
        print()


@pytest.mark.parametrize("cid", range(1, 13))
def test_criterion(context, capsys, cid):
    rows = verify.CRITERIA[cid](context)
    _emit(capsys, rows)
    failing = [r for r in rows if r.status == "FAIL"]
    assert not failing, verify.report_lines(failing)


def test_criterion_13_thread_independence(context, capsys, tmp_path):
    rows = verify.CRITERIA[13](verify.Context(load(None), threads=8))
    cfg = tmp_path / "quick.cfg"
    cfg.write_text(QUICK)
    reports = []
    for threads in ("1", "8"):
        out = tmp_path / f"threads{threads}"
        cli.main(["verify", "--config", str(cfg), "--out", str(out), "--threads", threads])
        reports.append((out / "verify_report.txt").read_bytes())
    same = reports[0] == reports[1]
    rows.append(verify.Row("C13-report", "PASS" if same else "FAIL", 0.0 if same else 1.0, 0.0,
                           verify.ANCHORS[13]))
    _emit(capsys, rows)
    assert all(r.status != "FAIL" for r in rows)
