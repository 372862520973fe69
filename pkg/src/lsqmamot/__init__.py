"""Least-squares-graph fusion and two-stage Kalman tracking for
multi-agent 3D detections, with single-agent / merged / sequential
baselines, a surrogate detection-level attack model, a synthetic scenario
generator, and sAMOTA/AMOTA/AMOTP/MT evaluation."""

from .adversary import AttackConfig, clip_displacement, perturb_frame
from .association import Assignment, associate_by_iou, cross_agent_overlap, hungarian
from .geometry import DetectionBox, Pose2p5D, bev_corners, iou3d, to_common_frame
from .lsq_graph import (AnchorPair, DetectionGraph, FusedDetections,
                        build_anchor_vectors, build_graph,
                        differential_coordinates, fuse_detections, solve_lsq)
from .metrics import MetricsReport, evaluate, match_frame, merge_reports
from .pipelines import (CooperativeTracker, FrameInput, TrackerConfig,
                        build_frame_inputs, run_tracker)
from .scenario import (Scenario, ScenarioConfig, TrackRecord, generate,
                       load_sequence, load_tracks, save_sequence, save_tracks)
from .tracking import KalmanConfig, Track, init_track, predict, step_lifecycle, update

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "clip_displacement", "perturb_frame",
    "Assignment", "associate_by_iou", "cross_agent_overlap", "hungarian",
    "DetectionBox", "Pose2p5D", "bev_corners", "iou3d", "to_common_frame",
    "AnchorPair", "DetectionGraph", "FusedDetections", "build_anchor_vectors",
    "build_graph", "differential_coordinates", "fuse_detections", "solve_lsq",
    "MetricsReport", "evaluate", "match_frame", "merge_reports",
    "CooperativeTracker", "FrameInput", "TrackerConfig", "build_frame_inputs",
    "run_tracker",
    "Scenario", "ScenarioConfig", "TrackRecord", "generate", "load_sequence",
    "load_tracks", "save_sequence", "save_tracks",
    "KalmanConfig", "Track", "init_track", "predict", "step_lifecycle",
    "update",
]
