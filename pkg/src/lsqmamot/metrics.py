"""Tracking evaluation: CLEAR-MOT frame matching and recall-integrated
sAMOTA / AMOTA / AMOTP / MT.

Per-frame matching is a gated Hungarian assignment on 3D IoU.  An identity
switch is counted when a ground-truth object's matched track id differs
from the id it last matched (across any gap).  The integrated metrics
sweep confidence thresholds chosen to realize a uniform grid of recall
levels; levels beyond the tracker's top recall contribute zero, and per
level

    MOTA_r  = max(0, 1 - (FP + FN + IDSW) / GT)
    sMOTA_r = min(1, max(0, 1 - (FP + FN + IDSW - (1 - r) GT) / (r GT)))
    MOTP_r  = mean IoU of the matched pairs (higher is better)

MT is the fraction of ground-truth objects matched in >= 80% of their
frames, measured with every prediction kept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .association import gate_assignment, hungarian, iou_matrix
from .geometry import DetectionBox
from .scenario import TrackRecord

DEFAULT_RECALL_POINTS = 40
MT_RATIO = 0.8


class MetricsError(Exception):
    """Evaluation is undefined for the given input."""


@dataclass(frozen=True)
class FrameMatch:
    tp: int
    fp: int
    fn: int
    idsw: int
    matched_ious: tuple[float, ...]
    matched_pairs: tuple[tuple[int, int], ...]  # (gt object id, track id)


@dataclass(frozen=True)
class RecallLevel:
    """One evaluated point of the recall sweep."""

    target_recall: float
    threshold: float | None  # None when the level is unreachable
    achieved_recall: float
    smota: float
    mota: float
    motp: float
    tp: int
    fp: int
    fn: int
    idsw: int


@dataclass(frozen=True)
class MetricsReport:
    samota: float
    amota: float
    amotp: float
    mt: float
    num_gt: int
    levels: tuple[RecallLevel, ...]

    def to_dict(self) -> dict:
        return {
            "samota": self.samota,
            "amota": self.amota,
            "amotp": self.amotp,
            "mt": self.mt,
            "num_gt": self.num_gt,
            "levels": [{
                "target_recall": lv.target_recall,
                "threshold": lv.threshold,
                "achieved_recall": lv.achieved_recall,
                "smota": lv.smota,
                "mota": lv.mota,
                "motp": lv.motp,
                "tp": lv.tp, "fp": lv.fp, "fn": lv.fn, "idsw": lv.idsw,
            } for lv in self.levels],
        }


def _match_with_matrix(gt_ids: list[int], pred_ids: list[int],
                       ious: np.ndarray, iou_min: float,
                       last_ids: dict[int, int]) -> FrameMatch:
    """Match one frame given a precomputed (gt x pred) IoU matrix.

    `last_ids` maps each ground-truth object to the track id it last
    matched; it is updated in place.
    """
    assign = gate_assignment(hungarian(-ious), ious, iou_min) if ious.size \
        else None
    matched = assign.matches if assign else ()
    tp = len(matched)
    fp = len(pred_ids) - tp
    fn = len(gt_ids) - tp
    idsw = 0
    matched_ious = []
    pairs = []
    for gi, pj in matched:
        obj = gt_ids[gi]
        trk = pred_ids[pj]
        if obj in last_ids and last_ids[obj] != trk:
            idsw += 1
        last_ids[obj] = trk
        matched_ious.append(float(ious[gi, pj]))
        pairs.append((obj, trk))
    return FrameMatch(tp, fp, fn, idsw, tuple(matched_ious), tuple(pairs))


def match_frame(gt: list[tuple[int, DetectionBox]],
                preds: list[tuple[int, DetectionBox]],
                iou_min: float,
                last_ids: dict[int, int] | None = None) -> FrameMatch:
    """Gated Hungarian matching of one frame's predictions to ground truth."""
    if last_ids is None:
        last_ids = {}
    ious = iou_matrix([b for _, b in gt], [b for _, b in preds])
    return _match_with_matrix([i for i, _ in gt], [i for i, _ in preds],
                              ious, iou_min, last_ids)


@dataclass
class _SequenceData:
    frames: list[int]
    gt_ids: dict[int, list[int]]
    pred_ids: dict[int, list[int]]
    pred_scores: dict[int, np.ndarray]
    ious: dict[int, np.ndarray]
    num_gt: int


def _prepare(gt_by_frame: dict[int, list[tuple[int, DetectionBox]]],
             records: list[TrackRecord]) -> _SequenceData:
    preds_by_frame: dict[int, list[TrackRecord]] = {}
    for rec in records:
        preds_by_frame.setdefault(rec.frame, []).append(rec)
    frames = sorted(set(gt_by_frame) | set(preds_by_frame))
    gt_ids, pred_ids, pred_scores, ious = {}, {}, {}, {}
    num_gt = 0
    for f in frames:
        gt = gt_by_frame.get(f, [])
        preds = sorted(preds_by_frame.get(f, []), key=lambda r: r.track_id)
        num_gt += len(gt)
        gt_ids[f] = [i for i, _ in gt]
        pred_ids[f] = [r.track_id for r in preds]
        pred_scores[f] = np.array([r.box.score for r in preds])
        ious[f] = iou_matrix([b for _, b in gt], [r.box for r in preds])
    return _SequenceData(frames, gt_ids, pred_ids, pred_scores, ious, num_gt)


def _run_pass(data: _SequenceData, iou_min: float, threshold: float | None):
    """One full-sequence matching pass at a confidence threshold.

    Returns (tp, fp, fn, idsw, iou_sum, tp_scores, per-object frame tallies).
    """
    totals = np.zeros(4, dtype=int)
    iou_sum = 0.0
    tp_scores: list[float] = []
    seen: dict[int, int] = {}
    matched_count: dict[int, int] = {}
    last_ids: dict[int, int] = {}
    for f in data.frames:
        scores = data.pred_scores[f]
        if threshold is None:
            keep = list(range(len(scores)))
        else:
            keep = [j for j, s in enumerate(scores) if s >= threshold]
        ious = data.ious[f][:, keep] if len(keep) else \
            np.zeros((len(data.gt_ids[f]), 0))
        fm = _match_with_matrix(data.gt_ids[f],
                                [data.pred_ids[f][j] for j in keep],
                                ious, iou_min, last_ids)
        totals += (fm.tp, fm.fp, fm.fn, fm.idsw)
        iou_sum += sum(fm.matched_ious)
        for obj in data.gt_ids[f]:
            seen[obj] = seen.get(obj, 0) + 1
        matched_objs = {obj for obj, _ in fm.matched_pairs}
        for obj in matched_objs:
            matched_count[obj] = matched_count.get(obj, 0) + 1
        if threshold is None:
            kept_ids = [data.pred_ids[f][j] for j in keep]
            score_of = {tid: float(scores[j]) for j, tid in
                        zip(keep, kept_ids)}
            for obj, trk in fm.matched_pairs:
                tp_scores.append(score_of[trk])
    return totals, iou_sum, tp_scores, seen, matched_count


def _select_thresholds(tp_scores: list[float], num_gt: int,
                       num_recall_points: int) -> list[tuple[float, float | None]]:
    """For each target recall level pick the highest confidence threshold
    whose kept true positives reach at least that recall; None if the
    tracker never gets there."""
    scores = sorted(tp_scores, reverse=True)
    uniq: list[tuple[float, float]] = []  # (threshold, recall at threshold)
    for i, s in enumerate(scores):
        if uniq and uniq[-1][0] == s:
            uniq[-1] = (s, (i + 1) / num_gt)
        else:
            uniq.append((s, (i + 1) / num_gt))
    levels = []
    for k in range(1, num_recall_points + 1):
        target = k / num_recall_points
        chosen = None
        for s, rec in uniq:
            if rec >= target - 1e-12:
                chosen = s
                break
        levels.append((target, chosen))
    return levels


def evaluate(gt_by_frame: dict[int, list[tuple[int, DetectionBox]]],
             records: list[TrackRecord],
             iou_min: float = 0.25,
             num_recall_points: int = DEFAULT_RECALL_POINTS) -> MetricsReport:
    """Integrated tracking metrics for one sequence.

    Raises MetricsError when the ground truth is empty.
    """
    data = _prepare(gt_by_frame, records)
    if data.num_gt == 0:
        raise MetricsError("ground truth is empty; metrics are undefined")
    G = data.num_gt

    totals, iou_sum, tp_scores, seen, matched_count = _run_pass(
        data, iou_min, threshold=None)
    objects = sorted(seen)
    mt = (sum(1 for obj in objects
              if matched_count.get(obj, 0) >= MT_RATIO * seen[obj])
          / len(objects)) if objects else 0.0

    levels: list[RecallLevel] = []
    cache: dict[float, tuple] = {}
    for target, threshold in _select_thresholds(tp_scores, G,
                                                num_recall_points):
        if threshold is None:
            levels.append(RecallLevel(target, None, 0.0, 0.0, 0.0, 0.0,
                                      0, 0, G, 0))
            continue
        if threshold not in cache:
            cache[threshold] = _run_pass(data, iou_min, threshold)[:2]
        (tp, fp, fn, idsw), level_iou = cache[threshold]
        errors = fp + fn + idsw
        mota = min(1.0, max(0.0, 1.0 - errors / G))
        smota = min(1.0, max(0.0, 1.0 - (errors - (1.0 - target) * G)
                             / (target * G)))
        motp = level_iou / tp if tp else 0.0
        levels.append(RecallLevel(target, threshold, tp / G, smota, mota,
                                  motp, int(tp), int(fp), int(fn), int(idsw)))

    L = num_recall_points
    return MetricsReport(
        samota=sum(lv.smota for lv in levels) / L,
        amota=sum(lv.mota for lv in levels) / L,
        amotp=sum(lv.motp for lv in levels) / L,
        mt=mt,
        num_gt=G,
        levels=tuple(levels),
    )


def merge_reports(reports: list[MetricsReport]) -> MetricsReport:
    """Combine per-sequence reports, weighting by ground-truth count."""
    if not reports:
        raise MetricsError("no reports to merge")
    weights = np.array([r.num_gt for r in reports], dtype=float)
    if weights.sum() == 0:
        raise MetricsError("cannot merge reports with zero ground truth")
    w = weights / weights.sum()

    def avg(attr: str) -> float:
        return float(sum(getattr(r, attr) * wi for r, wi in zip(reports, w)))

    return MetricsReport(
        samota=avg("samota"), amota=avg("amota"), amotp=avg("amotp"),
        mt=avg("mt"), num_gt=int(weights.sum()), levels=(),
    )
