"""Frame-level orchestration of the fused two-stage tracker and the three
comparison pipelines (single-agent, merged-detection, sequential).

All four share the same Kalman core and lifecycle rules; they differ only
in how multi-agent detections reach the association stage:

* ``arlot``       least-squares graph fusion, then two association stages
                  (first set anchored to agent j, second to agent i)
* ``single``      lowest-id agent's raw detections, one stage
* ``merged``      pooled raw detections with greedy duplicate suppression,
                  one stage
* ``sequential``  ego detections first, other agents' raw detections
                  against leftover tracks, no fusion
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .association import associate_by_iou, cross_agent_overlap, iou_matrix
from .geometry import DetectionBox, Pose2p5D, iou3d
from .lsq_graph import fuse_detections
from .scenario import Scenario, TrackRecord
from .tracking import (CONFIRMED, KalmanConfig, Track, init_track,
                       measurement_from_box, predict, step_lifecycle, update)

METHODS = ("arlot", "single", "merged", "sequential")


@dataclass(frozen=True)
class FrameInput:
    """One frame of common-frame detections plus the agent poses."""

    frame_index: int
    detections: dict[int, list[DetectionBox]]
    poses: dict[int, Pose2p5D] = field(default_factory=dict)

    def agent_ids(self) -> list[int]:
        return sorted(self.detections)


@dataclass(frozen=True)
class TrackerConfig:
    method: str = "arlot"
    hits: int = 3
    age: int = 2
    iou_gate: float = 0.25
    overlap_gate: float = 0.25
    kalman: KalmanConfig = field(default_factory=KalmanConfig.default)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method '{self.method}', "
                             f"expected one of {METHODS}")
        if self.hits < 1 or self.age < 1:
            raise ValueError("hits and age must be >= 1")


def fold_fusion(dets_by_agent: list[list[DetectionBox]], overlap_gate: float
                ) -> tuple[list[DetectionBox], list[DetectionBox]]:
    """Fuse agents pairwise left to right, producing the two anchored sets.

    With two agents this is a single fusion step.  For more agents the
    running fused set plays the role of agent i against each next agent;
    both anchored chains share the pair structure of the first chain, so
    their outputs stay index-aligned (same physical object per slot).
    """
    if not dets_by_agent:
        return [], []
    set_ij = list(dets_by_agent[0])
    set_ji = list(dets_by_agent[0])
    first = True
    for nxt in dets_by_agent[1:]:
        pairs = cross_agent_overlap(set_ij, nxt, overlap_gate)
        fused_a = fuse_detections(set_ij, nxt, pairs)
        if first:
            set_ij, set_ji = fused_a.j_ij, fused_a.j_ji
            first = False
        else:
            fused_b = fuse_detections(set_ji, nxt, pairs)
            set_ij, set_ji = fused_a.j_ij, fused_b.j_ji
    return set_ij, set_ji


def merge_agent_detections(detections: dict[int, list[DetectionBox]],
                           overlap_gate: float) -> list[DetectionBox]:
    """Pool all agents' detections, greedily suppressing cross-agent
    duplicates above the gate (the higher-score copy survives)."""
    pooled: list[DetectionBox] = []
    owner: list[int] = []
    for agent_id in sorted(detections):
        for det in detections[agent_id]:
            pooled.append(det)
            owner.append(agent_id)
    candidates = []
    for a in range(len(pooled)):
        for b in range(a + 1, len(pooled)):
            if owner[a] == owner[b]:
                continue
            iou = iou3d(pooled[a], pooled[b])
            if iou >= overlap_gate:
                candidates.append((-iou, a, b))
    candidates.sort()
    dropped: set[int] = set()
    for _, a, b in candidates:
        if a in dropped or b in dropped:
            continue
        loser = b if pooled[a].score >= pooled[b].score else a
        dropped.add(loser)
    return [det for idx, det in enumerate(pooled) if idx not in dropped]


class CooperativeTracker:
    """Owns one track table and advances it one frame at a time."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[Track] = []
        self.next_id = 1
        self.frame_count = 0  # 1-based frames seen

    # -- helpers ----------------------------------------------------------

    def _spawn(self, det: DetectionBox) -> None:
        self.tracks.append(init_track(det, self.config.kalman, self.next_id,
                                      frame_index=self.frame_count))
        self.next_id += 1

    def _associate_and_update(self, dets: list[DetectionBox],
                              candidates: list[Track]) -> tuple[set[int], set[int]]:
        """Match dets to candidate tracks; update matched tracks in place.

        Returns (matched track ids, matched det indices).
        """
        if not dets or not candidates:
            return set(), set()
        assign = associate_by_iou(dets, [t.to_box() for t in candidates],
                                  self.config.iou_gate)
        index_of = {id(t): k for k, t in enumerate(self.tracks)}
        matched_tracks: set[int] = set()
        matched_dets: set[int] = set()
        for det_idx, trk_idx in assign.matches:
            track = candidates[trk_idx]
            det = dets[det_idx]
            updated = update(track, measurement_from_box(det),
                             self.config.kalman, det_score=det.score)
            self.tracks[index_of[id(track)]] = updated
            matched_tracks.add(track.track_id)
            matched_dets.add(det_idx)
        return matched_tracks, matched_dets

    def _report(self, frame_index: int) -> list[TrackRecord]:
        rows = []
        early = self.frame_count <= self.config.hits
        for track in sorted(self.tracks, key=lambda t: t.track_id):
            confirmed = track.status == CONFIRMED
            if confirmed or early:
                rows.append(TrackRecord(frame=frame_index,
                                        track_id=track.track_id,
                                        box=track.to_box(),
                                        confirmed=confirmed))
        return rows

    # -- per-method stages --------------------------------------------------

    def _stages_arlot(self, frame: FrameInput) -> set[int]:
        dets_by_agent = [frame.detections[a] for a in frame.agent_ids()]
        set_ij, set_ji = fold_fusion(dets_by_agent, self.config.overlap_gate)
        assert len(set_ij) == len(set_ji), "fused sets must stay slot-aligned"

        existing = list(self.tracks)
        matched_1, det_matched_1 = self._associate_and_update(set_ij, existing)
        consumed = set(det_matched_1)
        for det_idx, det in enumerate(set_ij):
            if det_idx not in det_matched_1:
                self._spawn(det)
                consumed.add(det_idx)

        leftovers = [t for t in existing if t.track_id not in matched_1]
        matched_2, det_matched_2 = self._associate_and_update(set_ji, leftovers)
        assert not (matched_1 & matched_2), "stage-two track set must be disjoint"
        for det_idx, det in enumerate(set_ji):
            # a slot already consumed in stage one describes the same
            # physical object: initializing its sibling would duplicate it
            if det_idx in det_matched_2 or det_idx in consumed:
                continue
            self._spawn(det)
        return matched_1 | matched_2

    def _stages_single(self, frame: FrameInput) -> set[int]:
        agents = frame.agent_ids()
        dets = frame.detections[agents[0]] if agents else []
        existing = list(self.tracks)
        matched, det_matched = self._associate_and_update(dets, existing)
        for det_idx, det in enumerate(dets):
            if det_idx not in det_matched:
                self._spawn(det)
        return matched

    def _stages_merged(self, frame: FrameInput) -> set[int]:
        pooled = merge_agent_detections(frame.detections,
                                        self.config.overlap_gate)
        existing = list(self.tracks)
        matched, det_matched = self._associate_and_update(pooled, existing)
        for det_idx, det in enumerate(pooled):
            if det_idx not in det_matched:
                self._spawn(det)
        return matched

    def _stages_sequential(self, frame: FrameInput) -> set[int]:
        agents = frame.agent_ids()
        existing = list(self.tracks)
        matched_all: set[int] = set()
        remaining = existing
        for stage, agent_id in enumerate(agents):
            dets = frame.detections[agent_id]
            matched, det_matched = self._associate_and_update(dets, remaining)
            assert not (matched & matched_all), "stages must touch disjoint tracks"
            matched_all |= matched
            remaining = [t for t in remaining if t.track_id not in matched]
            for det_idx, det in enumerate(dets):
                if det_idx in det_matched:
                    continue
                if stage == 0:
                    self._spawn(det)
                else:
                    # later stages: only objects no current track explains
                    boxes = [t.to_box() for t in self.tracks]
                    if not boxes or iou_matrix([det], boxes).max() < self.config.iou_gate:
                        self._spawn(det)
        return matched_all

    # -- public API -------------------------------------------------------

    def step(self, frame: FrameInput) -> list[TrackRecord]:
        """Advance one frame and return the reported track rows."""
        self.frame_count += 1
        self.tracks = [predict(t, self.config.kalman) for t in self.tracks]

        stages = {
            "arlot": self._stages_arlot,
            "single": self._stages_single,
            "merged": self._stages_merged,
            "sequential": self._stages_sequential,
        }[self.config.method]
        matched_ids = stages(frame)

        self.tracks = step_lifecycle(self.tracks, matched_ids,
                                     self.frame_count, self.config.hits,
                                     self.config.age)
        return self._report(frame.frame_index)


def build_frame_inputs(scenario: Scenario) -> list[FrameInput]:
    """Scenario frames as tracker input, detections in the common frame."""
    frames = []
    for sf in scenario.frames:
        dets = sf.detections_world()
        for agent_id in sf.poses:
            dets.setdefault(agent_id, [])
        frames.append(FrameInput(frame_index=sf.index,
                                 detections=dict(sorted(dets.items())),
                                 poses=dict(sf.poses)))
    return frames


def run_tracker(frames: list[FrameInput],
                config: TrackerConfig | None = None) -> list[TrackRecord]:
    tracker = CooperativeTracker(config)
    records: list[TrackRecord] = []
    for frame in frames:
        records.extend(tracker.step(frame))
    return records
