import csv
import io
import json

import numpy as np
import pytest

from unduloid import cli, report
from unduloid.errors import NonConvergenceError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_csv(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(lines))))
    return rows[0], np.array(rows[1:], dtype=float)


def summary_lines(text):
    return dict(ln[2:].split(": ", 1) for ln in text.splitlines() if ln.startswith("# ") and ": " in ln)


def test_family_cylinder(capsys):
    code, out, _ = run(capsys, "family", "--n", "8", "--t", "1", "--grid-n", "128")
    assert code == 0
    names, data = parse_csv(out)
    assert names == ["z", "v", "v_z", "v_zz", "eta"]
    assert data.shape == (129, 5)
    np.testing.assert_allclose(data[:, 1], data[0, 1], rtol=1e-14)
    assert np.all(data[:, 2] == 0)


def test_family_walls_are_flat(capsys):
    code, out, _ = run(capsys, "family", "--n", "3", "--t", "0.5", "--grid-n", "256")
    _, data = parse_csv(out)
    assert code == 0
    assert abs(data[0, 2]) <= 1e-8 and abs(data[-1, 2]) <= 1e-8
    assert data[0, 1] == pytest.approx(0.5 * data[-1, 1], rel=1e-12)


def test_config_echo_is_first_line(capsys):
    _, out, _ = run(capsys, "family", "--n", "4", "--d", "2", "--t", "0.7", "--grid-n", "128")
    first = out.splitlines()[0]
    assert first.startswith("# ") and "n=4" in first and "d=2" in first


@pytest.mark.parametrize("t", ["0", "-0.5", "1e-4", "nan"])
def test_family_rejects_t_below_floor(capsys, t):
    code, _, err = run(capsys, "family", "--n", "8", f"--t={t}")
    assert code == 2
    assert "t_min" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["scan", "--n", "1"],
        ["scan", "--n", "8", "--steps", "5"],
        ["scan", "--n", "8", "--t-min", "0.5", "--t-max", "0.4"],
        ["scan", "--n", "8", "--t-max", "1.5"],
        ["spectrum", "--n", "8", "--t", "0.5", "--modes", "0"],
        ["spectrum", "--n", "8", "--t", "0.5", "--grid-n", "64"],
        ["scan", "--n", "8", "--method", "simpson"],
        ["figures", "--n", "8", "--t-max", "1"],
        ["conjecture", "--n", "8", "--t-max", "1"],
        ["family", "--t", "0.5"],
        ["frobnicate", "--n", "8"],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_scan_columns_and_cylinder_row(capsys):
    code, out, _ = run(capsys, "scan", "--n", "8", "--t-min", "0.9", "--steps", "10")
    assert code == 0
    names, data = parse_csv(out)
    assert names == ["t", "eta", "V", "V1", "V2", "xi", "xi1"]
    np.testing.assert_allclose(data[:, 5], data[:, 1] ** 9 * data[:, 2], rtol=1e-13)
    # V'(t) = O(1 - t) at the cylinder
    last = data[-1]
    assert abs(last[3]) <= 10 * (1 - last[0]) * last[2]


def test_scan_at_cylinder_is_stationary(capsys):
    code, out, _ = run(capsys, "scan", "--n", "8", "--t-min", "0.99", "--t-max", "1", "--steps", "10")
    _, data = parse_csv(out)
    assert code == 0 and data[-1, 0] == 1.0
    assert abs(data[-1, 3]) <= 1e-6 * data[-1, 2]


def test_symmetric_scan_pairs(capsys):
    code, out, _ = run(capsys, "scan", "--n", "8", "--symmetric", "--t-min", "0.5", "--t-max", "2",
                       "--steps", "11", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    t = np.array(doc["columns"]["t"])
    vol = np.array(doc["columns"]["V"])
    np.testing.assert_allclose(t * t[::-1], 1.0, rtol=1e-14)
    np.testing.assert_allclose(vol, vol[::-1], rtol=1e-8)


def test_scan_is_deterministic(capsys):
    argv = ["scan", "--n", "5", "--t-min", "0.3", "--t-max", "0.6", "--steps", "10", "--seedless"]
    first, second = run(capsys, *argv), run(capsys, *argv)
    assert first[0] == 0 and first[1] == second[1]


def test_spectrum_cylinder(capsys):
    code, out, _ = run(capsys, "spectrum", "--n", "8", "--t", "1", "--grid-n", "512", "--modes", "3")
    assert code == 0
    names, data = parse_csv(out)
    assert names == ["mode", "eigenvalue", "residual", "form_eigenvalue"]
    pi2 = np.pi**2
    np.testing.assert_allclose(data[:, 1], [0.0, 3 * pi2, 8 * pi2], atol=pi2 * 1e-3 * 8)
    assert np.all(data[:, 2] <= 1e-6)


def test_spectrum_no_negative_modes_for_eleven(capsys):
    code, out, _ = run(capsys, "spectrum", "--n", "11", "--t", "0.95", "--grid-n", "512")
    assert code == 0
    _, data = parse_csv(out)
    assert summary_lines(out)["negative_count"] == "0"
    assert np.all(data[:, 1] > 0)
    assert np.all(np.sign(data[:, 3]) == np.sign(data[:, 1]))


def test_spectrum_json_mirrors_csv(capsys):
    argv = ["spectrum", "--n", "8", "--t", "0.95", "--grid-n", "256", "--modes", "2"]
    _, out_csv, _ = run(capsys, *argv)
    _, out_json, _ = run(capsys, *argv, "--format", "json")
    names, data = parse_csv(out_csv)
    doc = json.loads(out_json)
    assert list(doc["columns"]) == names
    for j, name in enumerate(names):
        np.testing.assert_array_equal(np.array(doc["columns"][name], dtype=float), data[:, j])
    assert doc["summary"]["negative_count"] == 1


def test_classify_dimension_eight(capsys):
    code, out, _ = run(capsys, "classify", "--n", "8", "--steps", "60", "--no-evidence")
    assert code == 0
    summary = summary_lines(out)
    assert summary["hypothesis_ok"] == "True"
    assert summary["stable_intervals"] != "none"
    rows = list(csv.reader(ln for ln in out.splitlines() if not ln.startswith("#")))
    assert rows[0] == ["t", "V1", "tol", "verdict"]
    assert {r[3] for r in rows[1:]} == {"stable", "unstable"}


def test_figures_write_two_tables(tmp_path, capsys):
    prefix = tmp_path / "out"
    code, _, _ = run(capsys, "figures", "--n", "8", "--steps", "20", "--output", str(prefix))
    assert code == 0
    names1, fig1 = parse_csv((tmp_path / "out_fig1.csv").read_text())
    names2, fig2 = parse_csv((tmp_path / "out_fig2.csv").read_text())
    assert names1 == list(report.FIG1_COLUMNS) and names2 == list(report.FIG2_COLUMNS)
    assert np.all(np.max(np.abs(fig1[:, 1:]), axis=0) == 1.0)
    assert fig1.shape == fig2.shape[:1] + (4,)


def test_conjecture_reports_status(capsys, tmp_path):
    path = tmp_path / "xi.csv"
    code, out, _ = run(capsys, "conjecture", "--n", "2", "--steps", "20", "--output", str(path))
    assert code == 0
    assert out.strip() == report.NO_COUNTEREXAMPLE
    assert summary_lines(path.read_text())["status"] == report.NO_COUNTEREXAMPLE
    _, data = parse_csv(path.read_text())
    assert np.all(data[:, 1] < 0) and not np.any(data[:, 4])


def test_numerical_failure_exit_code(capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise NonConvergenceError("no convergence", 0.0, 1.0)

    monkeypatch.setattr(cli.report, "conjecture_scan", boom)
    code, _, err = run(capsys, "conjecture", "--n", "8", "--steps", "20")
    assert code == 3
    assert "NonConvergenceError" in err and "test_cli" in err
