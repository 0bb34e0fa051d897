import json
import math

import numpy as np
import pytest

from kwplane.cli import ConfigError, main, parse_config, read_field_csv, run, write_field_csv
from kwplane.grid import GridMismatchError, ScalarField, build_grid


def _run(tmp_path, text, *args, name="run.cfg"):
    cfg = tmp_path / name
    cfg.write_text(text)
    out = tmp_path / "out"
    code = main([*args, "--config", str(cfg), "--out", str(out)])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, out, report


def test_parse_family_example():
    cfg = parse_config("command = family\nl = 3\nlambda = 4\nks = 1.0,1.5")
    assert cfg.command == "family"
    assert cfg.get("ks") == (1.0, 1.5)
    assert cfg.certificate().l == 3.0 and cfg.certificate().lam == 4.0


def test_empty_config_needs_command():
    with pytest.raises(ConfigError, match="command required"):
        parse_config("")


def test_even_grid_rejected_with_line_number():
    with pytest.raises(ConfigError, match=r"line 2: n: grid nodes must be odd"):
        parse_config("command = solve\nn = 6")


@pytest.mark.parametrize(
    "text, match",
    [
        ("command = solve\nfoo = 1", "unknown key 'foo'"),
        ("command = solve\nradius = abc", "line 2"),
        ("command = solve\nradius = -1", "line 2"),
        ("command = solve\nn = 5\nn = 7", "duplicate key"),
        ("command = frobnicate", "line 1"),
        ("command = solve\nf_file = missing.csv", "no such file"),
        ("command = family\nl = 3", "family runs need"),
        ("command = solve\nradius = 5\nradii = 5,10", "either radius or radii"),
        ("command = solve\njust text", "key = value"),
    ],
)
def test_parse_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_comments_and_blank_lines_ignored():
    cfg = parse_config("# header\n\ncommand = solve  # trailing\nn = 21\n")
    assert cfg.command == "solve" and cfg.get("n") == 21


def test_admissible_empty_window_is_not_a_failure(tmp_path):
    code, _, rep = _run(tmp_path, "command = admissible\nl = 3\nlambda = 1")
    assert code == 0
    assert rep["window"]["empty"] and rep["window"]["text"] == "empty"
    assert rep["status"] == "ok"


def test_admissible_reports_window(tmp_path):
    code, _, rep = _run(tmp_path, "command = admissible\nl = 3\nlambda = 4\nks = 1,2")
    assert code == 0 and rep["window"]["text"] == "[1, 2)"
    assert rep["ks"]["1"]["in_window"] and not rep["ks"]["2"]["in_window"]


def test_input_error_exit_code(tmp_path):
    code, _, _ = _run(tmp_path, "command = solve\nn = 6")
    assert code == 2


def test_command_conflict(tmp_path):
    code, _, _ = _run(tmp_path, "command = solve\nf = -1\nh = -1", "oracle")
    assert code == 2


def test_sign_violation_exit_code(tmp_path):
    text = "command = solve\nf = 1:-2\nh = -1:-2\nradius = 10\nn = 61\n"
    code, _, rep = _run(tmp_path, text)
    assert code == 3
    assert rep["status"] == "solver_failure" and rep["partial"]
    assert "hypotheses likely violated" in rep["error"]


def test_solve_then_verify_round_trip(tmp_path):
    solve = "command = solve\nf = -1,0.5:-2\nh = -1\nradius = 5\nn = 41\neps = 0.5\n"
    code, out, rep = _run(tmp_path, solve, name="solve.cfg")
    assert code == 0 and rep["verdicts"]["residual_ok"]
    assert rep["apriori"]["pass"]
    saved = tmp_path / "saved.csv"
    saved.write_bytes((out / "solution.csv").read_bytes())
    verify = "command = verify\nf = -1,0.5:-2\nh = -1\nradius = 5\nn = 41\neps = 0.5\nsolution = saved.csv\n"
    code, _, vrep = _run(tmp_path, verify, name="verify.cfg")
    assert code == 0
    assert vrep["residual"] <= 1e-10
    assert vrep["apriori"]["sup_pass"] and vrep["apriori"]["energy_pass"]


def test_verify_detects_bad_solution(tmp_path):
    g = build_grid(5.0, 41)
    write_field_csv(tmp_path / "bad.csv", ScalarField(np.where(g.interior, 100.0, 0.0), g))
    text = "command = verify\nf = -1\nh = -1\nradius = 5\nn = 41\neps = 1\nsolution = bad.csv\n"
    code, _, rep = _run(tmp_path, text)
    assert code == 1 and not rep["apriori"]["sup_pass"]


def test_csv_outputs_are_byte_identical(tmp_path):
    text = "command = solve\nf = -1,0.5:-2\nh = -1:-1\nradius = 6\nn = 41\neps_min = 0.01\n"
    blobs = []
    for i in range(2):
        d = tmp_path / f"r{i}"
        d.mkdir()
        code, out, _ = _run(d, text)
        assert code == 0
        blobs.append((out / "solution.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_csv_format(tmp_path):
    g = build_grid(1.0, 5)
    u = ScalarField(np.where(g.interior, 1.0 / 3.0, 0.0), g)
    write_field_csv(tmp_path / "u.csv", u)
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "x,y,value" and len(lines) == 26
    # 17 significant digits round-trip exactly
    back = read_field_csv(tmp_path / "u.csv", g)
    assert np.array_equal(back.values, u.values)


def test_sampled_field_grid_mismatch(tmp_path):
    write_field_csv(tmp_path / "f.csv", ScalarField.zeros(build_grid(5.0, 21)))
    with pytest.raises(GridMismatchError):
        read_field_csv(tmp_path / "f.csv", build_grid(5.0, 41))
    text = "command = solve\nf_file = f.csv\nh = -1\nradius = 5\nn = 41\n"
    code, _, rep = _run(tmp_path, text)
    assert code == 2 and rep["status"] == "input_error"


def test_sampled_field_ingestion(tmp_path):
    g = build_grid(5.0, 41)
    write_field_csv(tmp_path / "f.csv", ScalarField(-1.0 + 0.0 * g.r2, g))
    text = "command = solve\nf_file = f.csv\nh = -1\nradius = 5\nn = 41\n"
    code, out, rep = _run(tmp_path, text)
    assert code == 0
    assert rep["sup_norm"] <= 1e-10


def test_oracle_run_writes_radial_csv(tmp_path):
    code, out, rep = _run(tmp_path, "command = oracle\nk = 1\nradius = 20\nm = 2000\n")
    assert code == 0
    rows = (out / "radial.csv").read_text().splitlines()
    assert rows[0] == "r,value" and len(rows) == 2002
    assert math.isclose(rep["growth_fit"]["slope"], 1.0, rel_tol=0.2)


def test_vortex_trivial_run(tmp_path):
    code, out, rep = _run(tmp_path, "command = vortex\nradius = 5\nn = 41\n")
    assert code == 0
    assert rep["vortex_residual"] <= 1e-12
    assert (out / "vortex_exponent.csv").exists()


def test_family_run_reports_growth(tmp_path):
    text = "command = family\nl = 3\nlambda = 4\nks = 1.0,1.5\nradius = 20\nn = 101\n"
    code, out, rep = _run(tmp_path, text)
    assert code == 0
    assert [m["k"] for m in rep["members"]] == [1.0, 1.5]
    for m in rep["members"]:
        assert (out / m["file"]).exists()
        assert math.isfinite(m["growth_fit"]["slope"]) and m["growth_fit"]["slope"] > 0


def test_family_outside_window_is_input_error(tmp_path):
    code, _, rep = _run(tmp_path, "command = family\nl = 3\nlambda = 4\nks = 2.0\nradius = 5\nn = 21\n")
    assert code == 2 and "window" in rep["error"]


def test_overrides_apply(tmp_path):
    code, _, rep = _run(tmp_path, "command = solve\nf = -1\nh = -1\nradius = 5\nn = 41\n", "--n", "21")
    assert code == 0 and rep["grid"]["n"] == 21
    code, _, _ = _run(tmp_path, "command = solve\nf = -1\nh = -1\n", "--n", "20")
    assert code == 2


def test_run_accepts_parsed_config(tmp_path):
    cfg = parse_config("command = admissible\nl = 3\nlambda = 4")
    cfg = type(cfg)(cfg.command, cfg.values, tmp_path)
    assert run(cfg) == 0
    assert json.loads((tmp_path / "report.json").read_text())["window"]["text"] == "[1, 2)"
