"""Command-line entry point: search runs, sampling, reporting, inspection.

A run directory holds everything needed to reproduce and analyze a
search: the resolved config snapshot, one prototype snapshot per
iteration, the candidate log CSV, pre-inversion prototypes under
archive/, the per-iteration summary CSV, and the final architecture
files.

Exit codes: 0 success, 1 configuration error, 2 evaluator failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import shlex
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import prototype as proto
from . import search as search_mod
from .architecture import (
    ShortcutPattern,
    apply_pattern,
    format_layers,
    parse_layers,
    save_architecture,
    shortcuts_to_json,
)
from .evaluation import (
    EvaluatorPool,
    PoolExhausted,
    SurrogateEvaluator,
    SurrogateSpec,
    WorkerClient,
    WorkerError,
    dispatch,
)
from .layer_library import LayerLibrary, UnknownShorthand, default_library, library_from_tokens
from .metrics import CANDIDATE_LOG_COLUMNS, candidate_log_row
from .search import ConfigError, SearchAborted, SearchConfig, SUMMARY_COLUMNS

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_EVALUATOR = 2
EXIT_IO = 3

_CONFIG_KEYS = {
    "profile", "seed", "variant", "n_init", "t_max", "k", "k_s", "k_init",
    "growth", "p_max", "inversion_threshold", "shortcut", "infeasibility_policy",
    "channels", "tokens", "dataset", "regime", "max_failure_ratio", "evaluator",
}


@dataclass(frozen=True)
class EvaluatorConfig:
    """Resolved evaluator selection: builtin surrogate or external worker."""

    kind: str                      # "surrogate" or "worker"
    surrogate_kind: str = "target_match"
    target: str = ""               # hyphenated shorthand
    noise_sigma: float = 0.0
    command: tuple = ()
    pool_size: int = 1
    timeout: float = 600.0

    def __post_init__(self):
        if self.kind not in ("surrogate", "worker"):
            raise ConfigError(f"unknown evaluator kind {self.kind!r}")
        if self.kind == "surrogate" and not self.target:
            raise ConfigError("surrogate evaluator needs a target")
        if self.kind == "worker" and not self.command:
            raise ConfigError("worker evaluator needs a command")
        if self.pool_size < 1:
            raise ConfigError("pool_size must be >= 1")


def load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = sorted(set(cfg) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return cfg


def build_search_config(cfg: dict, seed_override=None) -> SearchConfig:
    """Resolves a config dict (profile plus overrides) into a SearchConfig."""
    tokens = cfg.get("tokens")
    try:
        library = library_from_tokens(tokens) if tokens else default_library()
    except (UnknownShorthand, ValueError) as exc:
        raise ConfigError(f"bad library tokens: {exc}")
    if "profile" in cfg:
        base = search_mod.profile(cfg["profile"], library)
    else:
        base = SearchConfig(library=library, cap=proto.CapConfig.for_library(0.9, library.size))
    updates = {}
    for key in ("variant", "n_init", "t_max", "k", "k_s", "k_init",
                "inversion_threshold", "infeasibility_policy", "channels",
                "dataset", "regime", "max_failure_ratio", "seed"):
        if key in cfg:
            updates[key] = cfg[key]
    if "p_max" in cfg:
        try:
            updates["cap"] = proto.CapConfig.for_library(float(cfg["p_max"]), library.size)
        except ValueError as exc:
            raise ConfigError(str(exc))
    if "growth" in cfg:
        growth = cfg["growth"]
        if growth is None:
            updates["growth_schedule"] = None
        elif isinstance(growth, dict):
            updates["growth_schedule"] = {int(t): int(v) for t, v in growth.items()}
        else:
            raise ConfigError("growth must be a {iteration: rows} object or null")
    if "shortcut" in cfg:
        sc = cfg["shortcut"]
        try:
            updates["shortcut_pattern"] = ShortcutPattern(sc.get("kind", "none"), int(sc.get("d", 1)))
        except (AttributeError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad shortcut pattern: {exc}")
    if seed_override is not None:
        updates["seed"] = int(seed_override)
    try:
        return dataclasses.replace(base, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def parse_evaluator_flag(text: str) -> dict:
    """--evaluator shorthand.

    ``surrogate:KIND:TARGET[:SIGMA]`` selects a builtin oracle;
    ``worker:COMMAND LINE`` launches an external trainer.
    """
    kind, _, rest = text.partition(":")
    if kind == "surrogate":
        parts = rest.split(":")
        if len(parts) < 2 or not parts[1]:
            raise ConfigError("--evaluator surrogate:KIND:TARGET[:SIGMA]")
        out = {"kind": "surrogate", "surrogate": parts[0], "target": parts[1]}
        if len(parts) > 2:
            out["noise_sigma"] = float(parts[2])
        return out
    if kind == "worker":
        if not rest:
            raise ConfigError("--evaluator worker:COMMAND")
        return {"kind": "worker", "command": shlex.split(rest)}
    raise ConfigError(f"unknown evaluator kind {kind!r}")


def build_evaluator_config(section, flag_text=None, pool_override=None) -> EvaluatorConfig:
    if flag_text is not None:
        section = parse_evaluator_flag(flag_text)
    if section is None:
        raise ConfigError("no evaluator configured (config 'evaluator' key or --evaluator)")
    if not isinstance(section, dict) or "kind" not in section:
        raise ConfigError("evaluator section must be an object with a 'kind'")
    kind = section["kind"]
    kwargs = {"kind": kind}
    if kind == "surrogate":
        kwargs["surrogate_kind"] = section.get("surrogate", "target_match")
        kwargs["target"] = section.get("target", "")
        kwargs["noise_sigma"] = float(section.get("noise_sigma", 0.0))
    elif kind == "worker":
        command = section.get("command", ())
        if isinstance(command, str):
            command = shlex.split(command)
        kwargs["command"] = tuple(command)
        kwargs["timeout"] = float(section.get("timeout", 600.0))
    kwargs["pool_size"] = int(section.get("pool_size", 1))
    if pool_override is not None:
        kwargs["pool_size"] = int(pool_override)
    return EvaluatorConfig(**kwargs)


def build_pool(evcfg: EvaluatorConfig, config: SearchConfig) -> EvaluatorPool:
    if evcfg.kind == "surrogate":
        try:
            target = parse_layers(evcfg.target, config.library)
            spec = SurrogateSpec(evcfg.surrogate_kind, target, evcfg.noise_sigma)
        except (UnknownShorthand, ValueError) as exc:
            raise ConfigError(f"bad surrogate spec: {exc}")
        if len(spec.target) < search_mod.max_depth(config):
            raise ConfigError(
                f"surrogate target length {len(spec.target)} is below the run's "
                f"maximum depth {search_mod.max_depth(config)}; pad with 'id'"
            )
        members = [SurrogateEvaluator(spec, config.library) for _ in range(evcfg.pool_size)]
        return EvaluatorPool(members)
    members = []
    try:
        for _ in range(evcfg.pool_size):
            members.append(WorkerClient(list(evcfg.command), timeout=evcfg.timeout))
    except WorkerError:
        for m in members:
            m.close()
        raise
    except OSError as exc:
        for m in members:
            m.close()
        raise WorkerError(f"cannot start worker {list(evcfg.command)}: {exc}")
    return EvaluatorPool(members)


def config_snapshot(config: SearchConfig, evcfg: EvaluatorConfig) -> dict:
    """Resolved run parameters; loading this snapshot reproduces the run."""
    snap = {
        "tokens": list(config.library.tokens),
        "variant": config.variant,
        "n_init": config.n_init,
        "t_max": config.t_max,
        "k": config.k,
        "k_s": config.k_s,
        "inversion_threshold": config.inversion_threshold,
        "shortcut": {"kind": config.shortcut_pattern.kind, "d": config.shortcut_pattern.d},
        "infeasibility_policy": config.infeasibility_policy,
        "seed": config.seed,
        "channels": config.channels,
        "dataset": config.dataset,
        "regime": config.regime,
        "max_failure_ratio": config.max_failure_ratio,
    }
    if config.k_init is not None:
        snap["k_init"] = config.k_init
    if config.cap is not None:
        snap["p_max"] = config.cap.p_max
    if config.growth_schedule is not None:
        snap["growth"] = {str(t): v for t, v in config.growth_schedule.items()}
    if evcfg.kind == "surrogate":
        snap["evaluator"] = {
            "kind": "surrogate",
            "surrogate": evcfg.surrogate_kind,
            "target": evcfg.target,
            "noise_sigma": evcfg.noise_sigma,
            "pool_size": evcfg.pool_size,
        }
    else:
        snap["evaluator"] = {
            "kind": "worker",
            "command": list(evcfg.command),
            "pool_size": evcfg.pool_size,
            "timeout": evcfg.timeout,
        }
    return snap


def _summary_row(stats) -> list[str]:
    return [
        str(stats.iteration),
        repr(stats.max_matthews),
        repr(stats.median_matthews),
        repr(stats.max_accuracy),
        repr(stats.median_accuracy),
        repr(stats.mean_l2_norm),
        str(stats.depth),
    ]


class RunWriter:
    """Persists run artifacts incrementally, so aborted runs keep logs."""

    def __init__(self, out_dir: Path, config: SearchConfig, evcfg: EvaluatorConfig):
        self.out = Path(out_dir)
        self.config = config
        self.tokens = config.library.tokens
        (self.out / "prototypes").mkdir(parents=True)
        (self.out / "archive").mkdir()
        with open(self.out / "config.json", "w", encoding="utf-8") as fh:
            json.dump(config_snapshot(config, evcfg), fh, indent=2)
            fh.write("\n")
        self._cand = open(self.out / "candidates.csv", "w", encoding="utf-8", newline="")
        self._cand_csv = csv.writer(self._cand)
        self._cand_csv.writerow(CANDIDATE_LOG_COLUMNS)
        self._summ = open(self.out / "summary.csv", "w", encoding="utf-8", newline="")
        self._summ_csv = csv.writer(self._summ)
        self._summ_csv.writerow(SUMMARY_COLUMNS)

    def on_iteration(self, record) -> None:
        proto.save(record.prototype, self.tokens,
                   self.out / "prototypes" / f"iter_{record.iteration:03d}.txt")
        if record.archived is not None:
            proto.save(record.archived, self.tokens,
                       self.out / "archive" / f"iter_{record.iteration:03d}.txt")
        for req, res in zip(record.requests, record.results):
            self._cand_csv.writerow(candidate_log_row(record.iteration, req.layers, res))
        self._summ_csv.writerow(_summary_row(record.stats))
        self._cand.flush()
        self._summ.flush()

    def finish(self, outcome) -> None:
        save_architecture(outcome.final_architecture, self.config.library,
                          self.out / "final_architecture.json")
        for (iteration, _), arch in zip(outcome.archive, outcome.archived_architectures):
            save_architecture(arch, self.config.library,
                              self.out / "archive" / f"iter_{iteration:03d}_architecture.json")
        self.close()

    def close(self) -> None:
        self._cand.close()
        self._summ.close()


def _architecture_line(arch, library: LayerLibrary) -> str:
    return f"{format_layers(arch.layers, library)} {shortcuts_to_json(arch.shortcuts)}"


def cmd_search(args) -> int:
    cfg = load_config_file(args.config)
    config = build_search_config(cfg, seed_override=args.seed)
    evcfg = build_evaluator_config(cfg.get("evaluator"), args.evaluator, args.pool_size)
    out_dir = Path(args.out)
    if out_dir.exists() and any(out_dir.iterdir()):
        raise OSError(f"output directory {out_dir} exists and is not empty")
    out_dir.mkdir(parents=True, exist_ok=True)
    with build_pool(evcfg, config) as pool:
        writer = RunWriter(out_dir, config, evcfg)
        try:
            outcome = search_mod.run(
                config, lambda reqs: dispatch(reqs, pool), writer.on_iteration
            )
        except (SearchAborted, PoolExhausted):
            writer.close()
            raise
        writer.finish(outcome)
    print(f"final: {_architecture_line(outcome.final_architecture, config.library)}")
    for (iteration, _), arch in zip(outcome.archive, outcome.archived_architectures):
        print(f"archived iteration {iteration}: {_architecture_line(arch, config.library)}")
    print(f"stop: {outcome.stop_reason}")
    return EXIT_OK


def _load_snapshot(path):
    try:
        p, tokens = proto.load(path)
    except ValueError as exc:
        raise ConfigError(f"bad prototype snapshot {path}: {exc}")
    try:
        library = library_from_tokens(tokens)
    except (UnknownShorthand, ValueError) as exc:
        raise ConfigError(f"snapshot {path} has unusable library tokens: {exc}")
    return p, library


def cmd_sample(args) -> int:
    if args.count < 0:
        raise ConfigError("--count must be >= 0")
    p, library = _load_snapshot(args.prototype)
    if args.count == 0:
        return EXIT_OK
    samples = proto.sample(p, args.count, np.random.default_rng(args.seed))
    for row in samples:
        print(format_layers(row, library))
    return EXIT_OK


def cmd_inspect(args) -> int:
    p, library = _load_snapshot(args.prototype)
    print(f"layers: {p.n_layers}  library: {' '.join(library.tokens)}")
    for i, row in enumerate(p.probs, start=1):
        cells = " ".join(f"{v:.6f}" for v in row)
        print(f"row {i:2d}: {cells}  norm={np.linalg.norm(row):.5f}")
    print(f"mean_l2_norm: {proto.mean_l2_norm(p, exclude_fresh=False):.5f}")
    print(f"argmax: {format_layers(proto.argmax_architecture(p), library)}")
    return EXIT_OK


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing artifact: {what} ({path})")
    return path


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    _require(run_dir, "run directory")
    cand_path = _require(run_dir / "candidates.csv", "candidates.csv")
    cfg = load_config_file(_require(run_dir / "config.json", "config.json"))
    config = build_search_config(cfg)
    by_iter: dict[int, list] = {}
    with open(cand_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            by_iter.setdefault(int(row["iteration"]), []).append(
                (float(row["matthews"]), float(row["accuracy"]))
            )
    rows = []
    for t in sorted(by_iter):
        snap = _require(run_dir / "prototypes" / f"iter_{t:03d}.txt", f"prototypes/iter_{t:03d}.txt")
        p, _ = proto.load(snap)
        matthews = np.array([m for m, _ in by_iter[t]])
        accs = np.array([a for _, a in by_iter[t]])
        stats = search_mod.IterationStats(
            iteration=t,
            max_matthews=float(matthews.max()),
            median_matthews=float(np.median(matthews)),
            max_accuracy=float(accs.max()),
            median_accuracy=float(np.median(accs)),
            mean_l2_norm=proto.mean_l2_norm(p, exclude_fresh=False),
            depth=p.n_layers,
        )
        rows.append(_summary_row(stats))
    writer = csv.writer(sys.stdout)
    writer.writerow(SUMMARY_COLUMNS)
    writer.writerows(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            out_csv = csv.writer(fh)
            out_csv.writerow(SUMMARY_COLUMNS)
            out_csv.writerows(rows)
    for snap in sorted((run_dir / "archive").glob("iter_*.txt")):
        p, _ = proto.load(snap)
        arch = apply_pattern(proto.argmax_architecture(p), config.shortcut_pattern,
                             config.channels)
        print(f"# archived {snap.stem}: {_architecture_line(arch, config.library)}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ased",
        description="Architecture search by estimation of network structure distributions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_search = sub.add_parser("search", help="run a full search")
    p_search.add_argument("--config", required=True, help="JSON config file")
    p_search.add_argument("--seed", type=int, default=None, help="override config seed")
    p_search.add_argument("--out", default="ased-run", help="run directory to create")
    p_search.add_argument("--pool-size", type=int, default=None, help="override evaluator pool size")
    p_search.add_argument("--evaluator", default=None,
                          help="override evaluator: surrogate:KIND:TARGET[:SIGMA] or worker:COMMAND")
    p_search.set_defaults(func=cmd_search)

    p_sample = sub.add_parser("sample", help="sample candidates from a prototype snapshot")
    p_sample.add_argument("prototype", help="prototype snapshot file")
    p_sample.add_argument("--count", "-k", type=int, default=10)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.set_defaults(func=cmd_sample)

    p_report = sub.add_parser("report", help="summarize a completed run directory")
    p_report.add_argument("run_dir")
    p_report.add_argument("--out", default=None, help="also write the summary CSV here")
    p_report.set_defaults(func=cmd_report)

    p_inspect = sub.add_parser("inspect", help="pretty-print a prototype snapshot")
    p_inspect.add_argument("prototype", help="prototype snapshot file")
    p_inspect.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WorkerError, PoolExhausted, SearchAborted) as exc:
        print(f"evaluator failure: {exc}", file=sys.stderr)
        return EXIT_EVALUATOR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
