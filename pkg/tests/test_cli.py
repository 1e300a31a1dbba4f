"""Command-line workflows: search runs, artifacts, reporting, exit codes."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from ased.cli import (
    EXIT_CONFIG,
    EXIT_EVALUATOR,
    EXIT_IO,
    EXIT_OK,
    build_evaluator_config,
    build_search_config,
    load_config_file,
    main,
    parse_evaluator_flag,
)
from ased.search import ConfigError

FAKE_WORKER = Path(__file__).parent / "fake_worker.py"


def write_config(tmp_path, **overrides):
    cfg = {
        "seed": 7,
        "variant": "prob_cap",
        "n_init": 4,
        "t_max": 4,
        "k": 60,
        "k_s": 8,
        "growth": {},
        "p_max": 0.9,
        "evaluator": {"kind": "surrogate", "surrogate": "target_match",
                      "target": "c3-m2-c5-c1"},
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"seed": 1, "surprise": true}')
    with pytest.raises(ConfigError, match="surprise"):
        load_config_file(path)


def test_load_config_rejects_bad_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config_file(path)
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config_file(path)
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "absent.json")


def test_build_search_config_resolves_overrides():
    cfg = build_search_config({
        "profile": "modified",
        "t_max": 3,
        "p_max": 0.8,
        "growth": {"2": 1},
        "shortcut": {"kind": "residual", "d": 2},
        "tokens": ["id", "c3", "m2"],
    }, seed_override=11)
    assert cfg.library.tokens == ("id", "c3", "m2")
    assert cfg.k == 100 and cfg.k_s == 10          # profile base survives
    assert cfg.t_max == 3
    assert cfg.cap.p_max == 0.8
    assert cfg.growth_schedule == {2: 1}
    assert cfg.shortcut_pattern.kind == "residual"
    assert cfg.seed == 11


def test_build_search_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        build_search_config({"tokens": ["id", "zz"]})
    with pytest.raises(ConfigError):
        build_search_config({"p_max": 2.0})
    with pytest.raises(ConfigError):
        build_search_config({"growth": [1, 2]})
    with pytest.raises(ConfigError):
        build_search_config({"shortcut": {"kind": "webbed"}})
    with pytest.raises(ConfigError):
        build_search_config({"k_s": 5000})         # k_s >= default k


def test_parse_evaluator_flag_forms():
    assert parse_evaluator_flag("surrogate:target_match:c3-m2") == {
        "kind": "surrogate", "surrogate": "target_match", "target": "c3-m2",
    }
    noisy = parse_evaluator_flag("surrogate:noisy_target:c3:0.1")
    assert noisy["noise_sigma"] == 0.1
    worker = parse_evaluator_flag("worker:python3 worker.py --fast")
    assert worker == {"kind": "worker", "command": ["python3", "worker.py", "--fast"]}
    for bad in ("surrogate:target_match", "worker:", "oracle:x:y"):
        with pytest.raises(ConfigError):
            parse_evaluator_flag(bad)


def test_build_evaluator_config_flag_overrides_section():
    section = {"kind": "surrogate", "surrogate": "target_match", "target": "c3"}
    evcfg = build_evaluator_config(section, "surrogate:deceptive_trap:id-c3", 4)
    assert evcfg.kind == "surrogate"
    assert evcfg.surrogate_kind == "deceptive_trap"
    assert evcfg.target == "id-c3"
    assert evcfg.pool_size == 4
    with pytest.raises(ConfigError):
        build_evaluator_config(None)
    with pytest.raises(ConfigError):
        build_evaluator_config({"surrogate": "target_match"})


def test_search_writes_complete_run_directory(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["search", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    printed = capsys.readouterr().out
    assert printed.startswith("final: c3-m2-c5-c1 []")
    assert "stop: t_max_reached" in printed
    assert (out / "config.json").is_file()
    assert (out / "candidates.csv").is_file()
    assert (out / "summary.csv").is_file()
    assert (out / "final_architecture.json").is_file()
    for t in range(1, 5):
        assert (out / "prototypes" / f"iter_{t:03d}.txt").is_file()
    assert json.loads((out / "final_architecture.json").read_text())["layers"] == "c3-m2-c5-c1"
    candidates = (out / "candidates.csv").read_text().splitlines()
    assert candidates[0] == "iteration,candidate_id,layers,matthews,accuracy,parameter_count,status,wall_time"
    assert len(candidates) == 1 + 4 * 60
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0].startswith("iteration,max_matthews")
    assert len(summary) == 5


def test_run_replays_byte_identically_from_its_snapshot(tmp_path, capsys):
    cfg = write_config(tmp_path)
    first = tmp_path / "first"
    again = tmp_path / "again"
    assert main(["search", "--config", str(cfg), "--out", str(first)]) == EXIT_OK
    assert main(["search", "--config", str(first / "config.json"),
                 "--out", str(again)]) == EXIT_OK
    for name in ("config.json", "candidates.csv", "summary.csv",
                 "final_architecture.json"):
        assert (first / name).read_bytes() == (again / name).read_bytes()


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = write_config(tmp_path)
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["search", "--config", str(cfg), "--out", str(a), "--seed", "99"]) == EXIT_OK
    assert main(["search", "--config", str(cfg), "--out", str(b)]) == EXIT_OK
    assert json.loads((a / "config.json").read_text())["seed"] == 99
    assert (a / "candidates.csv").read_bytes() != (b / "candidates.csv").read_bytes()


def test_report_matches_stored_summary(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    main(["search", "--config", str(cfg), "--out", str(out)])
    capsys.readouterr()
    report_file = tmp_path / "summary_again.csv"
    assert main(["report", str(out), "--out", str(report_file)]) == EXIT_OK
    stdout = capsys.readouterr().out
    stored = (out / "summary.csv").read_text()
    assert report_file.read_text() == stored
    assert stdout.replace("\r\n", "\n").startswith(stored.replace("\r\n", "\n"))


def test_report_lists_archived_solutions(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        variant="full_inversion",
        seed=0,
        t_max=6,
        k=80,
        k_s=4,
        inversion_threshold=0.65,
        evaluator={"kind": "surrogate", "surrogate": "deceptive_trap",
                   "target": "id-id-c3-m2"},
    )
    out = tmp_path / "run"
    assert main(["search", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    search_out = capsys.readouterr().out
    assert "archived iteration" in search_out
    assert any((out / "archive").glob("iter_*.txt"))
    assert any((out / "archive").glob("iter_*_architecture.json"))
    assert main(["report", str(out)]) == EXIT_OK
    assert "# archived iter_" in capsys.readouterr().out


def test_sample_prints_shorthand_lines(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    main(["search", "--config", str(cfg), "--out", str(out)])
    capsys.readouterr()
    snap = out / "prototypes" / "iter_004.txt"
    assert main(["sample", str(snap), "--count", "5", "--seed", "3"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5
    assert all(part and set(part) <= set("acdim0123456789")
               for line in lines for part in line.split("-"))
    main(["sample", str(snap), "--count", "5", "--seed", "3"])
    assert capsys.readouterr().out.splitlines() == lines     # seeded
    assert main(["sample", str(snap), "--count", "0"]) == EXIT_OK
    assert capsys.readouterr().out == ""


def test_inspect_prints_rows_and_argmax(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    main(["search", "--config", str(cfg), "--out", str(out)])
    capsys.readouterr()
    snap = out / "prototypes" / "iter_004.txt"
    assert main(["inspect", str(snap)]) == EXIT_OK
    text = capsys.readouterr().out
    assert text.startswith("layers: 4  library: id c1 c3 c5 c7 d3 d5 m2 m3 a3")
    assert text.count("norm=") == 4
    assert "mean_l2_norm:" in text
    assert "argmax: c3-m2-c5-c1" in text


def test_exit_code_for_config_errors(tmp_path, capsys):
    assert main(["search", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "r")]) == EXIT_CONFIG
    cfg = write_config(tmp_path)
    assert main(["search", "--config", str(cfg), "--out", str(tmp_path / "r2"),
                 "--evaluator", "oracle:x:y"]) == EXIT_CONFIG
    # Target shorter than the deepest prototype the run can reach.
    cfg2 = write_config(tmp_path, growth=None,
                        evaluator={"kind": "surrogate", "target": "c3-m2"})
    assert main(["search", "--config", str(cfg2),
                 "--out", str(tmp_path / "r3")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_exit_code_for_io_errors(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["search", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert main(["search", "--config", str(cfg), "--out", str(out)]) == EXIT_IO
    assert main(["report", str(tmp_path / "missing")]) == EXIT_IO
    err = capsys.readouterr().err
    assert "i/o error" in err


def test_exit_code_for_evaluator_failures(tmp_path, capsys):
    cfg = write_config(tmp_path, evaluator={
        "kind": "worker",
        "command": [sys.executable, str(FAKE_WORKER), "no-handshake"],
    })
    out = tmp_path / "run"
    assert main(["search", "--config", str(cfg), "--out", str(out)]) == EXIT_EVALUATOR
    assert "evaluator failure" in capsys.readouterr().err


def test_aborted_search_keeps_partial_artifacts(tmp_path, capsys):
    # Every evaluation reports failure, so the failure-ratio guard
    # aborts during iteration 1; the run directory must survive.
    cfg = write_config(tmp_path, evaluator={
        "kind": "worker",
        "command": [sys.executable, str(FAKE_WORKER), "failed"],
    })
    out = tmp_path / "run"
    assert main(["search", "--config", str(cfg), "--out", str(out)]) == EXIT_EVALUATOR
    assert "evaluations failed" in capsys.readouterr().err
    assert (out / "config.json").is_file()
    assert (out / "candidates.csv").read_text().startswith("iteration,")
    assert not (out / "final_architecture.json").exists()


def test_worker_evaluator_end_to_end(tmp_path, capsys):
    cfg = write_config(
        tmp_path, t_max=2, k=12, k_s=3,
        evaluator={
            "kind": "worker",
            "command": [sys.executable, str(FAKE_WORKER), "ok"],
            "pool_size": 2,
        },
    )
    out = tmp_path / "run"
    assert main(["search", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert "stop:" in capsys.readouterr().out
    snapshot = json.loads((out / "config.json").read_text())
    assert snapshot["evaluator"]["pool_size"] == 2
    candidates = (out / "candidates.csv").read_text().splitlines()
    assert len(candidates) == 1 + 2 * 12
    assert all(line.split(",")[6] == "ok" for line in candidates[1:])


def test_sample_rejects_negative_count(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    main(["search", "--config", str(cfg), "--out", str(out)])
    capsys.readouterr()
    snap = out / "prototypes" / "iter_001.txt"
    assert main(["sample", str(snap), "--count", "-1"]) == EXIT_CONFIG
