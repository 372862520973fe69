"""Experiment driver: simulate / attack / track / eval / compare.

A single JSON config document describes the scenario, the attack, the
tracker, and the evaluation; ``--set section.key=value`` overrides
individual entries.  Runs are deterministic: the same config produces
byte-identical output files.  ``LSQMAMOT_THREADS`` caps the worker pool
used for per-seed work.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import shutil
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import scenario as sc
from .adversary import AttackConfig, perturb_frame
from .geometry import to_agent_frame
from .metrics import MetricsReport, evaluate, merge_reports
from .pipelines import METHODS, TrackerConfig, build_frame_inputs, run_tracker
from .scenario import DataError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3


class ConfigError(Exception):
    """The experiment config is malformed."""


# ---------------------------------------------------------------------------
# config handling

_SCHEMA: dict[str, set[str] | None] = {
    "scenario": {"num_objects", "num_frames", "extent", "speed_min",
                 "speed_max", "fov_range", "fov_azimuth", "noise_std",
                 "miss_rate", "num_agents"},
    "attack": {"epsilon", "drop_rate", "fp_rate", "yaw_jitter", "targets",
               "seed", "displacement_low_frac"},
    "tracker": {"method", "hits", "age", "iou_gate", "overlap_gate"},
    "eval": {"iou_min", "recall_points"},
    "seeds": None,
}


@dataclass(frozen=True)
class EvalConfig:
    iou_min: float = 0.25
    recall_points: int = 40


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: sc.ScenarioConfig = field(default_factory=sc.ScenarioConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seeds: tuple[int, ...] = (0,)


def _validate_keys(raw: dict) -> None:
    for key, value in raw.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key '{key}'")
        allowed = _SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"config section '{key}' must be an object")
        for sub in value:
            if sub not in allowed:
                raise ConfigError(f"unknown config key '{key}.{sub}'")


def _per_agent(value, num_agents: int, name: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * num_agents
    out = tuple(float(v) for v in value)
    if len(out) != num_agents:
        raise ConfigError(f"'{name}' must have one entry per agent "
                          f"({num_agents}), got {len(out)}")
    return out


def _build_scenario(raw: dict) -> sc.ScenarioConfig:
    raw = dict(raw)
    num_agents = int(raw.pop("num_agents", 2))
    per_agent_defaults = {"fov_range": 200.0,
                          "fov_azimuth": 2.0 * math.pi,
                          "noise_std": 0.05}
    kwargs = {}
    for key, default in per_agent_defaults.items():
        kwargs[key] = _per_agent(raw.pop(key, default), num_agents, key)
    for key in ("num_objects", "num_frames"):
        if key in raw:
            kwargs[key] = int(raw.pop(key))
    for key in ("extent", "speed_min", "speed_max", "miss_rate"):
        if key in raw:
            kwargs[key] = float(raw.pop(key))
    return sc.ScenarioConfig(**kwargs)


def load_config(path: str | None, sets: list[str] | None = None,
                seed_override: int | None = None) -> ExperimentConfig:
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    for item in sets or []:
        _apply_set(raw, item)
    _validate_keys(raw)
    try:
        cfg = ExperimentConfig(
            scenario=_build_scenario(raw.get("scenario", {})),
            attack=AttackConfig(**{k: (tuple(v) if k == "targets" else v)
                                   for k, v in raw.get("attack", {}).items()}),
            tracker=TrackerConfig(**raw.get("tracker", {})),
            eval=EvalConfig(**raw.get("eval", {})),
            seeds=tuple(int(s) for s in raw.get("seeds", [0])),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if seed_override is not None:
        cfg = replace(cfg, seeds=(seed_override,))
    if not cfg.seeds:
        raise ConfigError("'seeds' must not be empty")
    return cfg


def _apply_set(raw: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"--set expects KEY=VALUE, got '{item}'")
    dotted, text = item.split("=", 1)
    keys = dotted.strip().split(".")
    if not all(keys):
        raise ConfigError(f"--set has an empty key segment: '{item}'")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    node = raw
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set path '{dotted}' crosses a non-object")
    node[keys[-1]] = value


# ---------------------------------------------------------------------------
# worker pool

def _max_workers(n_items: int) -> int:
    env = os.environ.get("LSQMAMOT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"LSQMAMOT_THREADS must be an integer: {env}") \
                from exc
    return max(1, min(4, n_items))


def _pool_map(fn, items: list):
    workers = _max_workers(len(items))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _seed_dir_name(seed: int) -> str:
    return f"seed_{seed:04d}"


def _find_sequence_dirs(root: Path) -> list[tuple[int, Path]]:
    """Seed-scoped subdirectories, or the directory itself for bare runs."""
    if (root / sc.DETECTIONS_FILE).exists():
        return [(0, root)]
    found = []
    for child in sorted(root.iterdir()) if root.is_dir() else []:
        if child.is_dir() and child.name.startswith("seed_"):
            try:
                found.append((int(child.name.split("_", 1)[1]), child))
            except ValueError:
                continue
    if not found:
        raise DataError(f"no sequence data under {root}")
    return found


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(config_path: str | None, out_dir: str | Path,
                 sets: list[str] | None = None,
                 seed_override: int | None = None) -> list[Path]:
    cfg = load_config(config_path, sets, seed_override)
    out = Path(out_dir)

    def job(seed: int) -> Path:
        scen = sc.generate(replace(cfg.scenario, seed=seed))
        seq_dir = out / _seed_dir_name(seed)
        sc.save_sequence(scen, seq_dir)
        return seq_dir

    return _pool_map(job, list(cfg.seeds))


def _attack_sequence(seq_dir: Path, out_dir: Path, attack: AttackConfig,
                     seq_seed: int) -> None:
    scen = sc.load_sequence(seq_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(seq_dir / sc.GT_FILE, out_dir / sc.GT_FILE)
    shutil.copyfile(seq_dir / sc.POSES_FILE, out_dir / sc.POSES_FILE)

    # raw input lines keep their exact bytes for untargeted agents and for
    # targeted detections the attack happens to leave untouched
    raw_lines: dict[tuple[int, int], list[str]] = {}
    raw_by_det: dict[tuple[int, int, int], str] = {}
    with open(seq_dir / sc.DETECTIONS_FILE, encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if not stripped:
                continue
            rec = json.loads(stripped)
            key = (int(rec["frame"]), int(rec["agent"]))
            raw_lines.setdefault(key, []).append(stripped)
            raw_by_det[key + (int(rec["det_id"]),)] = stripped

    rng = np.random.default_rng([attack.seed, seq_seed])
    with open(out_dir / sc.DETECTIONS_FILE, "w", encoding="utf-8",
              newline="\n") as fh:
        for frame in scen.frames:
            world = frame.detections_world()
            perturbed = perturb_frame(world, attack, rng)
            for agent_id in sorted(world):
                if agent_id not in attack.targets:
                    for line in raw_lines.get((frame.index, agent_id), []):
                        fh.write(line + "\n")
                    continue
                pose = frame.poses[agent_id]
                originals = {d.det_id: d for d in world[agent_id]}
                for det in perturbed[agent_id]:
                    if originals.get(det.det_id) == det:
                        fh.write(raw_by_det[(frame.index, agent_id,
                                             det.det_id)] + "\n")
                        continue
                    local = to_agent_frame(det, pose)
                    fh.write(json.dumps({
                        "frame": frame.index, "agent": agent_id,
                        "det_id": local.det_id, "x": local.x, "y": local.y,
                        "z": local.z, "yaw": local.yaw, "h": local.h,
                        "w": local.w, "l": local.l, "score": local.score,
                    }, separators=(",", ":")) + "\n")


def cmd_attack(in_dir: str | Path, config_path: str | None,
               out_dir: str | Path, sets: list[str] | None = None) -> None:
    cfg = load_config(config_path, sets)
    root = Path(in_dir)
    out = Path(out_dir)
    sequences = _find_sequence_dirs(root)

    def job(item: tuple[int, Path]) -> None:
        seq_seed, seq_dir = item
        target = out if seq_dir == root else out / seq_dir.name
        _attack_sequence(seq_dir, target, cfg.attack, seq_seed)

    _pool_map(job, sequences)


def cmd_track(in_dir: str | Path, method: str | None,
              out_path: str | Path, config_path: str | None = None,
              sets: list[str] | None = None) -> None:
    cfg = load_config(config_path, sets)
    tracker_cfg = cfg.tracker
    if method is not None:
        try:
            tracker_cfg = replace(tracker_cfg, method=method)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    root = Path(in_dir)
    out = Path(out_path)
    sequences = _find_sequence_dirs(root)

    def job(item: tuple[int, Path]) -> None:
        _, seq_dir = item
        scen = sc.load_sequence(seq_dir)
        records = run_tracker(build_frame_inputs(scen), tracker_cfg)
        if seq_dir == root:
            target = out if out.suffix == ".jsonl" else out / sc.TRACKS_FILE
        else:
            target = out / seq_dir.name / sc.TRACKS_FILE
        sc.save_tracks(records, target)

    _pool_map(job, sequences)


def _report_summary(report: MetricsReport) -> dict:
    return {"samota": report.samota, "amota": report.amota,
            "amotp": report.amotp, "mt": report.mt, "num_gt": report.num_gt}


def cmd_eval(gt_path: str | Path, tracks_path: str | Path,
             out_path: str | Path, config_path: str | None = None,
             sets: list[str] | None = None, label: str | None = None) -> dict:
    cfg = load_config(config_path, sets)
    gt_root = Path(gt_path)
    tracks_root = Path(tracks_path)

    gt_seqs = dict(_find_sequence_dirs(gt_root))
    if tracks_root.is_file():
        if len(gt_seqs) != 1:
            raise DataError("a single tracks file needs a single gt sequence")
        track_files = {next(iter(gt_seqs)): tracks_root}
    else:
        track_files = {}
        for seed, seq_dir in gt_seqs.items():
            candidate = (tracks_root / seq_dir.name / sc.TRACKS_FILE
                         if seq_dir != gt_root else tracks_root / sc.TRACKS_FILE)
            track_files[seed] = candidate
    missing = [str(p) for p in track_files.values() if not p.exists()]
    if missing:
        raise DataError("gt and tracks sequence sets do not match; missing: "
                        + ", ".join(missing))

    def job(seed: int) -> tuple[int, MetricsReport]:
        scen = sc.load_sequence(gt_seqs[seed])
        records = sc.load_tracks(track_files[seed])
        gt_by_frame = {f.index: list(f.gt) for f in scen.frames}
        return seed, evaluate(gt_by_frame, records, cfg.eval.iou_min,
                              cfg.eval.recall_points)

    results = sorted(_pool_map(job, sorted(gt_seqs)), key=lambda r: r[0])
    reports = [rep for _, rep in results]
    merged = merge_reports(reports)

    doc = {
        "label": label or Path(tracks_path).stem,
        **_report_summary(merged),
        "seed_mean": {}, "seed_std": {},
        "per_seed": [{"seed": seed, **rep.to_dict()}
                     for seed, rep in results],
    }
    for key in ("samota", "amota", "amotp", "mt"):
        values = [getattr(rep, key) for rep in reports]
        doc["seed_mean"][key] = statistics.fmean(values)
        doc["seed_std"][key] = (statistics.stdev(values)
                                if len(values) > 1 else 0.0)

    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return doc


_HEADLINE = ("samota", "amota", "amotp", "mt")


def cmd_compare(report_paths: list[str | Path],
                out_path: str | Path | None = None) -> str:
    rows = []
    for path in report_paths:
        p = Path(path)
        if not p.exists():
            raise DataError(f"report not found: {p}")
        doc = json.loads(p.read_text(encoding="utf-8"))
        rows.append((doc.get("label", p.stem), doc))

    table: list[list[str]] = []
    header = ["method"] + [f"{k.upper()} (%)" for k in _HEADLINE]
    if len(rows) > 1:
        header += [f"d{k.upper()} (%)" for k in _HEADLINE]
    table.append(header)
    for idx, (label, doc) in enumerate(rows):
        cells = [label]
        cells += [f"{100.0 * doc[k]:.2f}" for k in _HEADLINE]
        if len(rows) > 1:
            for k in _HEADLINE:
                best_other = max(other[k] for j, (_, other) in enumerate(rows)
                                 if j != idx)
                if best_other > 0:
                    delta = 100.0 * (doc[k] - best_other) / best_other
                    cells.append(f"{delta:+.2f}")
                else:
                    cells.append("n/a")
        table.append(cells)

    if out_path is not None:
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerows(table)

    widths = [max(len(row[c]) for row in table) for c in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row))
             for row in table]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsqmamot",
        description="simulate, attack, track, and evaluate multi-agent "
                    "3D tracking scenarios")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, help="experiment config JSON")
        p.add_argument("--set", dest="sets", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config entry (repeatable)")

    p = sub.add_parser("simulate", help="generate synthetic sequences")
    add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="run a single seed instead of the config list")

    p = sub.add_parser("attack", help="perturb detections in place")
    add_common(p)
    p.add_argument("in_dir", help="directory produced by simulate")
    p.add_argument("--out", required=True)

    p = sub.add_parser("track", help="run a tracking pipeline")
    add_common(p)
    p.add_argument("in_dir")
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="compute tracking metrics")
    add_common(p)
    p.add_argument("gt", help="directory with ground-truth sequences")
    p.add_argument("tracks", help="tracks directory or file")
    p.add_argument("--out", required=True, help="report.json path")
    p.add_argument("--label", default=None)

    p = sub.add_parser("compare", help="tabulate reports side by side")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", default=None, help="also write a CSV table")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cmd_simulate(args.config, args.out, args.sets, args.seed)
        elif args.command == "attack":
            cmd_attack(args.in_dir, args.config, args.out, args.sets)
        elif args.command == "track":
            cmd_track(args.in_dir, args.method, args.out, args.config,
                      args.sets)
        elif args.command == "eval":
            cmd_eval(args.gt, args.tracks, args.out, args.config, args.sets,
                     args.label)
        elif args.command == "compare":
            print(cmd_compare(args.reports, args.out))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
