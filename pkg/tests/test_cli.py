import csv
import io

import pytest
import yaml

from ncsched.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main
from ncsched.pinwheel import CyclicSchedule, verify_schedule
from ncsched.windows import WspInstance, verify_wsp


def write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def test_alpha_example2(capsys):
    assert main(["alpha", "example2"]) == EXIT_OK
    assert "alpha = 3" in capsys.readouterr().out


def test_empty_admissible_set_fails(tmp_path, capsys):
    cfg = {"agents": [{"A": [[1.0, 0.5], [-0.5, 1.0]], "B": [[0.0], [1.0]], "E": [[0.0], [1.0]],
                       "K": [[0.2263, 1.2988]], "state_bounds": [2, 2], "input_bounds": [5],
                       "disturbance_bounds": [3.0]}]}
    assert main(["alpha", write(tmp_path, cfg)]) == EXIT_FAILURE
    assert "computation failed" in capsys.readouterr().err


@pytest.mark.parametrize("name", ["example3", "example4"])
def test_schedule_pattern_examples(name, capsys):
    assert main(["schedule", name, "--method", "M1"]) == EXIT_OK
    assert "verdict: feasible" in capsys.readouterr().out


def test_example5_m2_reports_scaled_failure(capsys):
    assert main(["schedule", "example5", "--method", "M2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "scaled single-channel instance has no schedule" in out
    assert "verdict: infeasible" in out


def test_example6_m2_schedule_verifies(tmp_path, capsys):
    dest = tmp_path / "sched.txt"
    assert main(["schedule", "example6", "--method", "M2", "--out", str(dest)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "verdict: feasible" in out
    cfg = yaml.safe_load(open(__import__("ncsched").__path__[0] + "/data/example6.yaml"))
    sched = CyclicSchedule.from_text(dest.read_text().strip(), "tuples")
    assert verify_wsp(WspInstance(cfg["channels"], tuple(cfg["alphas"])), sched)


def test_infeasible_instance_exits_zero(tmp_path, capsys):
    path = write(tmp_path, {"alphas": [2, 3, 12]})
    assert main(["schedule", path, "--method", "M1"]) == EXIT_OK
    assert "verdict: infeasible" in capsys.readouterr().out
    assert not verify_schedule([2, 3, 12], CyclicSchedule((), (0, 1, 2)))


def test_unknown_key_is_config_error(tmp_path, capsys):
    path = write(tmp_path, {"alphas": [2, 4], "colour": "red"})
    assert main(["schedule", path]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_file_is_config_error(capsys):
    assert main(["schedule", "no_such_fixture"]) == EXIT_CONFIG


def test_bench_empty(capsys):
    assert main(["bench", "--n", "0"]) == EXIT_OK
    out = capsys.readouterr().out
    assert len(out.strip().splitlines()) == 1


def test_bench_section_a_nesting(capsys):
    assert main(["bench", "--section", "A", "--n", "30", "--seed", "4"]) == EXIT_OK
    cap = capsys.readouterr()
    assert "false positives 0" in cap.err and "nesting holds" in cap.err
    rows = list(csv.DictReader(io.StringIO(cap.out)))
    assert len(rows) == 90
    assert {r["method"] for r in rows} == {"M1", "M2", "M3"}


def test_simulate_example8_trace(tmp_path, capsys):
    dest = tmp_path / "trace.csv"
    code = main(["simulate", "example8", "--horizon", "40", "--out", str(dest)])
    assert code == EXIT_OK
    lines = dest.read_text().splitlines()
    assert lines[0] == "# ncsched trace v1"
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 40
    for col in ("t", "element", "nu", "connected_5", "in_set_5", "gamma_x_5", "gamma_c_5",
                "residual_5", "z_5"):
        assert col in rows[0]
    assert rows[0]["element"].startswith("(")
    assert "violations=0" in capsys.readouterr().out
