"""Synthetic multi-agent scenarios and line-delimited JSON sequence I/O.

A scenario holds, per frame, the ground-truth objects (common frame), the
agent poses, and each agent's clean detections stored in that agent's
local frame.  File records mirror real cooperative-perception layouts:
detections are written in the sensing agent's frame and projected into the
common frame on load using the pose records.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .geometry import DetectionBox, Pose2p5D, to_agent_frame, to_common_frame, wrap_angle


class DataError(Exception):
    """A sequence file is missing, malformed, or internally inconsistent."""


class ParseError(DataError):
    pass


class ReferentialError(DataError):
    pass


DETECTIONS_FILE = "detections.jsonl"
GT_FILE = "gt.jsonl"
POSES_FILE = "poses.jsonl"
TRACKS_FILE = "tracks.jsonl"


@dataclass(frozen=True)
class ScenarioFrame:
    index: int
    gt: tuple[tuple[int, DetectionBox], ...]             # (object_id, world box)
    poses: dict[int, Pose2p5D]
    detections_local: dict[int, tuple[DetectionBox, ...]]

    def detections_world(self) -> dict[int, list[DetectionBox]]:
        out: dict[int, list[DetectionBox]] = {}
        for agent_id in sorted(self.detections_local):
            pose = self.poses[agent_id]
            out[agent_id] = [to_common_frame(d, pose)
                             for d in self.detections_local[agent_id]]
        return out


@dataclass(frozen=True)
class Scenario:
    frames: tuple[ScenarioFrame, ...]

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def gt_frames(self) -> list[list[tuple[int, DetectionBox]]]:
        return [list(f.gt) for f in self.frames]


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs for the synthetic scene generator (two agents by default)."""

    num_objects: int = 5
    num_frames: int = 60
    extent: float = 60.0                      # scene is [-extent, extent]^2
    speed_min: float = 0.2                    # m/frame
    speed_max: float = 0.8
    fov_range: tuple[float, ...] = (200.0, 200.0)
    fov_azimuth: tuple[float, ...] = (2.0 * math.pi, 2.0 * math.pi)
    noise_std: tuple[float, ...] = (0.05, 0.05)
    miss_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_objects <= 0 or self.num_frames <= 0:
            raise ValueError("num_objects and num_frames must be positive")
        if self.extent <= 0:
            raise ValueError("extent must be positive")
        if any(s < 0 for s in self.noise_std):
            raise ValueError("noise std must be >= 0")
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError("miss_rate must be in [0, 1]")
        lengths = {len(self.fov_range), len(self.fov_azimuth), len(self.noise_std)}
        if len(lengths) != 1:
            raise ValueError("per-agent parameter lists must share a length")

    @property
    def num_agents(self) -> int:
        return len(self.fov_range)


HEADING_DRIFT_STD = 0.02  # rad/frame of gentle ground-truth turning


def _agent_poses(cfg: ScenarioConfig) -> list[Pose2p5D]:
    """Static poses spread along the x axis, facing the scene center."""
    n = cfg.num_agents
    poses = []
    for a in range(n):
        frac = 0.0 if n == 1 else a / (n - 1)
        tx = -0.6 * cfg.extent + 1.2 * cfg.extent * frac
        heading = 0.0 if tx <= 0 else math.pi
        poses.append(Pose2p5D(tx=tx, ty=0.0, tz=0.0, heading=heading))
    return poses


def _in_fov(box: DetectionBox, pose: Pose2p5D, fov_range: float,
            fov_azimuth: float) -> bool:
    local = to_agent_frame(box, pose)
    dist = math.hypot(local.x, local.y)
    if dist > fov_range:
        return False
    if fov_azimuth >= 2.0 * math.pi:
        return True
    bearing = math.atan2(local.y, local.x)
    return abs(bearing) <= fov_azimuth / 2.0


def generate(cfg: ScenarioConfig) -> Scenario:
    """Constant-velocity objects with small heading drift, sensed by each
    agent inside its field of view with Gaussian centroid noise."""
    rng = np.random.default_rng(cfg.seed)
    poses = _agent_poses(cfg)

    dims = []
    positions = []
    headings = []
    speeds = []
    for _ in range(cfg.num_objects):
        h = rng.uniform(1.4, 1.8)
        dims.append((h, rng.uniform(1.6, 2.1), rng.uniform(3.6, 5.0)))
        positions.append(np.array([
            rng.uniform(-0.4 * cfg.extent, 0.4 * cfg.extent),
            rng.uniform(-0.4 * cfg.extent, 0.4 * cfg.extent),
        ]))
        headings.append(rng.uniform(-math.pi, math.pi))
        speeds.append(rng.uniform(cfg.speed_min, cfg.speed_max))

    frames: list[ScenarioFrame] = []
    for t in range(cfg.num_frames):
        gt: list[tuple[int, DetectionBox]] = []
        for obj in range(cfg.num_objects):
            h, w, l = dims[obj]
            x, y = positions[obj]
            gt.append((obj, DetectionBox(
                x=float(x), y=float(y), z=h / 2.0, yaw=headings[obj],
                h=h, w=w, l=l, score=1.0, agent_id=-1, det_id=obj,
            )))

        dets_local: dict[int, tuple[DetectionBox, ...]] = {}
        for agent_id, pose in enumerate(poses):
            sigma = cfg.noise_std[agent_id]
            agent_dets: list[DetectionBox] = []
            det_id = 0
            for _, box in gt:
                if not _in_fov(box, pose, cfg.fov_range[agent_id],
                               cfg.fov_azimuth[agent_id]):
                    continue
                if cfg.miss_rate > 0.0 and rng.random() < cfg.miss_rate:
                    continue
                local = to_agent_frame(box, pose)
                noise = rng.normal(0.0, sigma, size=3) if sigma > 0 else np.zeros(3)
                agent_dets.append(replace(
                    local,
                    x=local.x + float(noise[0]),
                    y=local.y + float(noise[1]),
                    z=local.z + float(noise[2]),
                    score=float(rng.uniform(0.5, 1.0)),
                    agent_id=agent_id, det_id=det_id,
                ))
                det_id += 1
            dets_local[agent_id] = tuple(agent_dets)

        frames.append(ScenarioFrame(
            index=t, gt=tuple(gt),
            poses={a: poses[a] for a in range(len(poses))},
            detections_local=dets_local,
        ))

        # advance ground truth
        for obj in range(cfg.num_objects):
            headings[obj] = wrap_angle(
                headings[obj] + float(rng.normal(0.0, HEADING_DRIFT_STD)))
            step = speeds[obj]
            positions[obj] = positions[obj] + step * np.array(
                [math.cos(headings[obj]), math.sin(headings[obj])])

    return Scenario(tuple(frames))


# ---------------------------------------------------------------------------
# tracker output records

@dataclass(frozen=True)
class TrackRecord:
    frame: int
    track_id: int
    box: DetectionBox
    confirmed: bool


# ---------------------------------------------------------------------------
# serialization

def _dump_line(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))


def _box_fields(box: DetectionBox) -> dict:
    return {"x": box.x, "y": box.y, "z": box.z, "yaw": box.yaw,
            "h": box.h, "w": box.w, "l": box.l}


def save_sequence(scenario: Scenario, out_dir: str | Path) -> None:
    """Write gt.jsonl, poses.jsonl, and detections.jsonl for one sequence."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / GT_FILE, "w", encoding="utf-8", newline="\n") as fh:
        for frame in scenario.frames:
            for obj_id, box in frame.gt:
                fh.write(_dump_line({"frame": frame.index, "obj": obj_id,
                                     **_box_fields(box)}) + "\n")
    with open(out / POSES_FILE, "w", encoding="utf-8", newline="\n") as fh:
        for frame in scenario.frames:
            for agent_id in sorted(frame.poses):
                pose = frame.poses[agent_id]
                fh.write(_dump_line({
                    "frame": frame.index, "agent": agent_id,
                    "tx": pose.tx, "ty": pose.ty, "tz": pose.tz,
                    "heading": pose.heading}) + "\n")
    with open(out / DETECTIONS_FILE, "w", encoding="utf-8", newline="\n") as fh:
        for frame in scenario.frames:
            for agent_id in sorted(frame.detections_local):
                for det in frame.detections_local[agent_id]:
                    fh.write(_dump_line({
                        "frame": frame.index, "agent": agent_id,
                        "det_id": det.det_id, **_box_fields(det),
                        "score": det.score}) + "\n")


def _read_records(path: Path, required: tuple[str, ...]) -> list[dict]:
    if not path.exists():
        raise DataError(f"missing file: {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(rec, dict):
                raise ParseError(f"{path}:{lineno}: expected a JSON object")
            for key in required:
                if key not in rec:
                    raise ParseError(f"{path}:{lineno}: missing field '{key}'")
            records.append(rec)
    return records


_BOX_KEYS = ("x", "y", "z", "yaw", "h", "w", "l")


def load_sequence(path: str | Path) -> Scenario:
    """Load one sequence directory; detections are projected into the
    common frame via the pose records (the local copies are kept too)."""
    root = Path(path)
    gt_recs = _read_records(root / GT_FILE, ("frame", "obj") + _BOX_KEYS)
    pose_recs = _read_records(root / POSES_FILE,
                              ("frame", "agent", "tx", "ty", "tz", "heading"))
    det_recs = _read_records(root / DETECTIONS_FILE,
                             ("frame", "agent", "det_id") + _BOX_KEYS + ("score",))

    poses: dict[int, dict[int, Pose2p5D]] = {}
    for rec in pose_recs:
        poses.setdefault(int(rec["frame"]), {})[int(rec["agent"])] = Pose2p5D(
            tx=float(rec["tx"]), ty=float(rec["ty"]), tz=float(rec["tz"]),
            heading=float(rec["heading"]))

    gt: dict[int, list[tuple[int, DetectionBox]]] = {}
    for rec in gt_recs:
        frame = int(rec["frame"])
        gt.setdefault(frame, []).append((int(rec["obj"]), DetectionBox(
            x=float(rec["x"]), y=float(rec["y"]), z=float(rec["z"]),
            yaw=float(rec["yaw"]), h=float(rec["h"]), w=float(rec["w"]),
            l=float(rec["l"]), score=1.0, agent_id=-1, det_id=int(rec["obj"]))))

    dets: dict[int, dict[int, list[DetectionBox]]] = {}
    for rec in det_recs:
        frame = int(rec["frame"])
        agent = int(rec["agent"])
        frame_poses = poses.get(frame, {})
        if agent not in frame_poses:
            raise ReferentialError(
                f"detection at frame {frame} references agent {agent} "
                f"with no pose record")
        dets.setdefault(frame, {}).setdefault(agent, []).append(DetectionBox(
            x=float(rec["x"]), y=float(rec["y"]), z=float(rec["z"]),
            yaw=float(rec["yaw"]), h=float(rec["h"]), w=float(rec["w"]),
            l=float(rec["l"]), score=float(rec["score"]),
            agent_id=agent, det_id=int(rec["det_id"])))

    # normalization: frames sorted by index, ground truth by object id,
    # detections by det_id within each (frame, agent)
    indices = sorted(set(gt) | set(poses) | set(dets))
    frames = []
    for idx in indices:
        frame_poses = poses.get(idx, {})
        frames.append(ScenarioFrame(
            index=idx,
            gt=tuple(sorted(gt.get(idx, []), key=lambda item: item[0])),
            poses=frame_poses,
            detections_local={a: tuple(sorted(v, key=lambda d: d.det_id))
                              for a, v in sorted(dets.get(idx, {}).items())},
        ))
    return Scenario(tuple(frames))


def save_tracks(records: list[TrackRecord], path: str | Path) -> None:
    """Write a tracks.jsonl file; an empty output produces an empty file."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(_dump_line({
                    "frame": rec.frame, "track": rec.track_id,
                    **_box_fields(rec.box), "score": rec.box.score,
                    "confirmed": rec.confirmed}) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write tracks file {out}: {exc}") from exc


def load_tracks(path: str | Path) -> list[TrackRecord]:
    recs = _read_records(Path(path), ("frame", "track") + _BOX_KEYS
                         + ("score", "confirmed"))
    out = []
    for rec in recs:
        out.append(TrackRecord(
            frame=int(rec["frame"]), track_id=int(rec["track"]),
            box=DetectionBox(
                x=float(rec["x"]), y=float(rec["y"]), z=float(rec["z"]),
                yaw=float(rec["yaw"]), h=float(rec["h"]), w=float(rec["w"]),
                l=float(rec["l"]), score=float(rec["score"])),
            confirmed=bool(rec["confirmed"])))
    out.sort(key=lambda r: (r.frame, r.track_id))
    return out
