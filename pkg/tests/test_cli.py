import csv
import io
import json
import math
import subprocess
import sys

import pytest

from jetcarnot.cli import EXIT_BUDGET, EXIT_INPUT, EXIT_OK, EXIT_VIOLATION, main, stokes_table
from jetcarnot.config import dump_polynomial
from jetcarnot.polynomial import Polynomial

X2 = json.dumps({"n": 1, "terms": [[[2], 1.0]]})
FAST_DIST = ["--steps", "16", "--starts", "3"]


def run(capsys, *argv):
    rc = main(list(argv))
    return rc, capsys.readouterr().out


def jet(x, u):
    return json.dumps({"n": len(x), "k": len(u) - 1, "x": x, "u": u})


# prolong -------------------------------------------------------------------------


def test_prolong_examples(capsys):
    rc, out = run(capsys, "prolong", "--field", X2, "--x", "1")
    assert rc == EXIT_OK
    assert json.loads(out) == {"n": 1, "k": 1, "x": [1.0], "u": [[2.0], [1.0]]}
    x3 = json.dumps({"n": 1, "terms": [[[3], 1.0]]})
    rc, out = run(capsys, "prolong", "--k", "2", "--field", x3, "--x", "1")
    assert json.loads(out)["u"] == [[6.0], [3.0], [1.0]]
    zero = json.dumps({"n": 2, "terms": []})
    rc, out = run(capsys, "--n", "2", "prolong", "--field", zero, "--x", "0.3", "-2")
    assert json.loads(out)["u"] == [[0.0, 0.0], [0.0]]


def test_prolong_input_errors(capsys, tmp_path):
    assert main(["prolong", "--field", str(tmp_path / "none.json"), "--x", "1"]) == EXIT_INPUT
    assert main(["prolong", "--field", "{not json", "--x", "1"]) == EXIT_INPUT
    assert main(["--n", "2", "prolong", "--field", X2, "--x", "1", "2"]) == EXIT_INPUT


def test_prolong_writes_output(capsys, tmp_path):
    rc, out = run(capsys, "prolong", "--field", X2, "--x", "3", "--out", str(tmp_path))
    assert (tmp_path / "prolong.json").read_text() == out


# dist ------------------------------------------------------------------------------


def test_dist_equal_points(capsys):
    p = jet([0.3], [[1.0], [2.0]])
    rc, out = run(capsys, "dist", p, p, "--format", "json")
    assert rc == EXIT_OK
    d = json.loads(out)
    assert (d["lower"], d["r0_upper"], d["cc_upper"]) == (0.0, 0.0, 0.0)
    assert d["sandwich_ok"]


def test_dist_axis_displacement(capsys):
    p, q = jet([0.0, 0.0], [[0, 0], [0]]), jet([1.5, -2.0], [[0, 0], [0]])
    rc, out = run(capsys, "dist", p, q, "--format", "json", *FAST_DIST)
    d = json.loads(out)
    assert rc == EXIT_OK
    for key in ("lower", "r0_upper", "cc_upper"):
        assert d[key] == pytest.approx(2.5, rel=0.01)


def test_dist_E_subspace(capsys):
    p, q = jet([0, 0], [[0.3, -1.0], [0]]), jet([0, 0], [[1.1, 0.4], [0]])
    rc, out = run(capsys, "dist", p, q, "--format", "json", "--metric", "cc", *FAST_DIST)
    d = json.loads(out)
    expected = math.hypot(0.8, 1.4)
    assert d["lower"] == pytest.approx(expected, rel=1e-15)
    assert d["selected"] == d["cc_upper"] == pytest.approx(expected, rel=0.01)
    assert d["r0_upper"] == pytest.approx(expected, rel=0.01)


def test_dist_csv(capsys):
    p, q = jet([0.0], [[0.0], [0.0]]), jet([0.0], [[0.0], [1.0]])
    rc, out = run(capsys, "dist", p, q, *FAST_DIST)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rc == EXIT_OK
    r = rows[0]
    assert float(r["lower"]) == 0.0
    assert float(r["lower"]) <= float(r["r0_upper"]) <= float(r["cc_upper"]) + 1e-6
    assert r["sandwich_ok"] == "1"


def test_dist_shape_mismatch(capsys):
    p, q = jet([0.0], [[0.0], [0.0]]), jet([0.0], [[0.0], [0.0], [0.0]])
    assert main(["dist", p, q]) == EXIT_INPUT


def test_dist_budget_failure(capsys):
    p, q = jet([0.0], [[0.0], [0.0], [0.0]]), jet([0.3], [[2.0], [-1.0], [5.0]])
    assert main(["dist", p, q, "--steps", "1", "--starts", "1"]) == EXIT_BUDGET


# certify ---------------------------------------------------------------------------


def _footer(out):
    line = [ln for ln in out.splitlines() if ln.startswith("# slope=")][0]
    return dict(item.split("=") for item in line[2:].split())


@pytest.mark.parametrize("n,k", [(1, 1), (1, 2)])
def test_certify(capsys, n, k):
    rc, out = run(capsys, "certify", "--n", str(n), "--k", str(k))
    assert rc == EXIT_OK
    foot = _footer(out)
    assert float(foot["slope"]) == pytest.approx(1 + k / (n + 1), abs=1e-12)
    assert float(foot["expected"]) == 1 + k / (n + 1)
    assert foot["pass"] == "1"
    rows = list(csv.DictReader(io.StringIO("\n".join(ln for ln in out.splitlines() if not ln.startswith("#")))))
    assert [float(r["L"]) for r in rows] == [1.0, 2.0, 4.0, 8.0]


def test_certify_flat_pair(capsys, tmp_path):
    f = Polynomial.variable(1, 1) ** 2
    (tmp_path / "f.json").write_text(dump_polynomial(f))
    rc, out = run(capsys, "certify", "--f0", str(tmp_path / "f.json"), "--f1", str(tmp_path / "f.json"), "--L", "1", "2")
    assert rc == EXIT_OK
    rows = list(csv.DictReader(io.StringIO("\n".join(ln for ln in out.splitlines() if not ln.startswith("#")))))
    assert [float(r["certified"]) for r in rows] == [0.0, 0.0]


def test_certify_incompatible_pair(capsys, tmp_path):
    x = Polynomial.variable(1, 1)
    (tmp_path / "f0.json").write_text(dump_polynomial(0 * x))
    (tmp_path / "f1.json").write_text(dump_polynomial(x * (1 - x)))
    assert main(["certify", "--f0", str(tmp_path / "f0.json"), "--f1", str(tmp_path / "f1.json")]) == EXIT_INPUT


def test_certify_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    rc1, out1 = run(capsys, "certify", "--seed", "3", "--out", str(a))
    rc2, out2 = run(capsys, "--seed", "3", "--out", str(b), "certify")
    assert rc1 == rc2 == EXIT_OK
    assert out1 == out2
    assert (a / "growth.csv").read_bytes() == (b / "growth.csv").read_bytes()


def test_certify_json(capsys):
    rc, out = run(capsys, "certify", "--format", "json", "--L", "1", "4")
    d = json.loads(out)
    assert d["pass"] is True
    assert d["slope"] == pytest.approx(1.5, abs=1e-12)


# witness -----------------------------------------------------------------------------


def test_witness(capsys, tmp_path):
    rc, out = run(capsys, "witness", "--lam", "1", "--L-max", "6", "--cross-pairs", "500", "--format", "json", "--out", str(tmp_path))
    assert rc == EXIT_OK
    s = json.loads(out)
    assert s["contradiction_level"] == 5
    assert s["cross_ok"] and s["shell_separation_ok"] and s["within_ok"]
    assert s["cross_bound_8c"] == 8 * s["c"]
    data = json.loads((tmp_path / "witness.json").read_text())
    assert len(data["shells"]) == 7
    assert data["contradiction_level"] == 5


def test_witness_levels_grow_with_lambda(capsys):
    levels = []
    for lam in ("1", "4", "30"):
        rc, out = run(capsys, "witness", "--lam", lam, "--L-max", "2", "--cross-pairs", "100", "--format", "json")
        levels.append(json.loads(out)["contradiction_level"])
    assert levels == sorted(levels) and levels[0] < levels[-1]


# fillvol ------------------------------------------------------------------------------


def test_fillvol(capsys, tmp_path):
    rc, out = run(capsys, "fillvol", "--L", "1", "2", "4", "8", "16", "--out", str(tmp_path))
    assert rc == EXIT_OK
    head = dict(item.split("=") for item in out.splitlines()[0][2:].split())
    lam, delta = float(head["lipF_upper"]), float(head["delta"])
    assert delta == pytest.approx(1 / (1920 * lam**3), rel=1e-14)
    assert float(head["exponent"]) == 3.0
    assert out.splitlines()[-1] == "# identity=pass"
    report = json.loads((tmp_path / "filling_report.json").read_text())
    assert report["identity_ok"]
    curve = (tmp_path / "fv_curve.csv").read_text().splitlines()
    assert curve[0] == "r,fv_lower" and curve[1] == "0.0,0.0"


def test_fillvol_zero_gap(capsys, tmp_path):
    f = Polynomial.variable(1, 1)
    (tmp_path / "f.json").write_text(dump_polynomial(f))
    assert main(["fillvol", "--f0", str(tmp_path / "f.json"), "--f1", str(tmp_path / "f.json")]) == EXIT_INPUT


# stokes --------------------------------------------------------------------------------


def test_stokes(capsys):
    rc, out = run(capsys, "stokes")
    assert rc == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["N"]) for r in rows if r["map"] == "identity"] == [8, 16, 32, 64]
    assert all(float(r["residual"]) <= 1e-12 for r in rows if r["map"] == "identity")
    for name in ("pwlinear0", "pwlinear1"):
        res = [float(r["residual"]) for r in rows if r["map"] == name]
        assert res[-1] < res[0]


def test_stokes_table_cubic_rates():
    rows = stokes_table((8, 16, 32, 64))
    for name in ("cubic0", "cubic1", "cubic2"):
        res = [r[4] for r in rows if r[0] == name]
        # the fourth-order scheme improves on the N^-2 rate: ratios near 16, at least 4
        ratios = [a / b for a, b in zip(res, res[1:])]
        assert min(ratios) >= 3.7
        assert res[-1] < 1e-6


# misc ------------------------------------------------------------------------------------


def test_config_file_and_flag_override(capsys, tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nk = 2\nLs = 1 2\nformat = json\n")
    rc, out = run(capsys, "certify", "--config", str(ini), "--k", "1")
    assert rc == EXIT_OK
    assert json.loads(out)["expected_slope"] == 1.5


def test_exit_codes_are_distinct():
    assert len({EXIT_OK, EXIT_INPUT, EXIT_VIOLATION, EXIT_BUDGET}) == 4


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "jetcarnot.cli", "prolong", "--field", X2, "--x", "2"], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["u"] == [[4.0], [4.0]]
