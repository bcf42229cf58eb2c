import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclame.cli import EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK, main, run
from fraclame.config import ConfigError, parse_config, parse_text

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_minimal_config_parses():
    cfg = parse_text("experiment = symbols\nn = 1\nN = 256\ns = 0.5\n")
    assert (cfg.experiment, cfg.n, cfg.N, cfg.s, cfg.resolved_t) == ("symbols", 1, 256, 0.5, 0.5)


def test_comments_and_blank_lines():
    cfg = parse_text("# header\n\nexperiment = korn   # inline\ns = 0.3\nfrequencies = 2, 4\n")
    assert cfg.experiment == "korn" and cfg.frequencies == (2, 4)


def test_t_at_boundary_is_rejected_with_constraint():
    with pytest.raises(ConfigError) as err:
        parse_text("experiment = symbols\ns = 0.5\nt = 1.0\n")
    msg = str(err.value)
    assert "min{2s, 1}" in msg and "line 2" in msg and "line 3" in msg


def test_t_just_below_one_is_admissible_for_half():
    # 0.99 < min(2 * 0.5, 1) = 1, so this pairing is legal
    assert parse_text("experiment = symbols\ns = 0.5\nt = 0.99\n").t == 0.99


def test_missing_key_is_named():
    with pytest.raises(ConfigError) as err:
        parse_text("experiment = symbols\nn = 1\n")
    assert "missing required key 's'" in str(err.value)


def test_unknown_and_duplicate_keys_report_lines():
    with pytest.raises(ConfigError) as err:
        parse_text("experiment = symbols\ns = 0.5\nbogus = 1\ns = 0.4\nN = abc\n")
    v = err.value.violations
    assert any(e.startswith("line 3: unknown key 'bogus'") for e in v)
    assert any(e.startswith("line 4: duplicate key 's'") for e in v)
    assert any(e.startswith("line 5: cannot parse N") for e in v)


@pytest.mark.parametrize("line", ["N = 100", "n = 3", "coefficient = wobbly", "experiment = dance",
                                  "tail_policy = maybe", "lame_c = 1", "oscillation = 0.5", "frequencies = 8, 4"])
def test_module_constraints_revalidated(line):
    with pytest.raises(ConfigError):
        parse_text(f"experiment = symbols\ns = 0.5\n{line}\n")


@settings(max_examples=30, deadline=None)
@given(s=st.floats(0.05, 0.95), N=st.sampled_from([8, 64, 512]), seed=st.integers(0, 2**31))
def test_valid_configs_round_trip(s, N, seed):
    cfg = parse_text(f"experiment = solve\ns = {s!r}\nN = {N}\nseed = {seed}\n")
    assert (cfg.s, cfg.N, cfg.seed) == (s, N, seed)


def test_every_shipped_config_parses():
    paths = sorted(CONFIGS.glob("*.cfg"))
    assert paths
    for p in paths:
        parse_config(p)


def test_cli_exit_code_for_bad_config(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("experiment = symbols\n")
    assert main([str(p)]) == EXIT_CONFIG
    assert "missing required key 's'" in capsys.readouterr().err
    assert main([str(tmp_path / "nope.cfg")]) == EXIT_CONFIG


def test_solve_with_zero_load_dumps_zero_field(tmp_path):
    cfg = parse_text("experiment = solve\nn = 1\nN = 64\ns = 0.5\nload = zero\n")
    code, report = run(cfg, tmp_path)
    assert code == EXIT_OK
    assert report["headline"]["iterations"] <= 1
    lines = (tmp_path / "solution.txt").read_text().splitlines()
    assert lines[0] == "1 64 1"
    assert len(lines) == 65
    assert all(float(l.split()[1]) == 0.0 for l in lines[1:])


def test_symbols_report_and_csv(tmp_path):
    cfg = parse_text("experiment = symbols\nn = 2\nN = 32\ns = 0.5\n")
    code, _ = run(cfg, tmp_path)
    report = json.loads((tmp_path / "report.json").read_text())
    assert code == EXIT_OK and report["status"] == "passed"
    assert report["headline"]["ell1"] == pytest.approx(2 * np.pi / 3)
    assert {a["criterion"] for a in report["assertions"]} == {1, 2}
    text = (tmp_path / "symbols.csv").read_bytes()
    assert b"\r" not in text and text.startswith(b"dim,s,ell1,ell2,")


def test_same_seed_same_tables(tmp_path):
    cfg = parse_text("experiment = korn\nn = 2\nN = 16\ns = 0.5\ntrials = 5\nseed = 11\n")
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "korn.csv").read_bytes() == (tmp_path / "b" / "korn.csv").read_bytes()


def test_failed_assertion_gives_exit_one(tmp_path):
    # N = 8 is far too coarse for the constant-coefficient coincidence tolerance
    cfg = parse_text("experiment = commutator\nn = 1\nN = 8\ns = 0.5\nfrequencies = 1, 2\n")
    code, report = run(cfg, tmp_path)
    assert code == EXIT_ASSERTION and report["status"] == "failed"
    assert (tmp_path / "report.json").exists() and (tmp_path / "decay.csv").exists()


def test_solver_failure_exit_code(tmp_path):
    cfg = parse_text("experiment = solve\nn = 1\nN = 64\ns = 0.5\ncoefficient = constant\nkappa = 0.01\n")
    code, report = run(cfg, tmp_path)
    assert code == 3 and report["status"] == "solver-failure"


def test_threads_flag_sets_environment(tmp_path, monkeypatch):
    monkeypatch.delenv("OMP_NUM_THREADS", raising=False)
    cfg = tmp_path / "c.cfg"
    cfg.write_text("experiment = solve\nn = 1\nN = 32\ns = 0.5\nload = zero\n")
    assert main([str(cfg), "--out", str(tmp_path / "o"), "--threads", "2", "--seed", "4"]) == EXIT_OK
    import os
    assert os.environ["OMP_NUM_THREADS"] == "2"
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["parameters"]["seed"] == 4
