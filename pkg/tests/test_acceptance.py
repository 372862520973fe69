"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines as they complete.
"""

import json
import math
import time
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
import pytest

from lsqmamot.adversary import EPS20, perturb_frame
from lsqmamot.association import hungarian
from lsqmamot.cli import main as cli_main
from lsqmamot.geometry import DetectionBox, iou3d
from lsqmamot.lsq_graph import (build_anchor_vectors, build_graph,
                                differential_coordinates, fuse_detections,
                                solve_lsq)
from lsqmamot.metrics import evaluate
from lsqmamot.pipelines import (METHODS, FrameInput, TrackerConfig,
                                build_frame_inputs, run_tracker)
from lsqmamot.scenario import ScenarioConfig, TrackRecord, generate
from lsqmamot.tracking import (CONFIRMED, DEAD, TENTATIVE, KalmanConfig,
                               init_track, measurement_from_box, predict,
                               step_lifecycle, update)
from util import (brute_force_assignment, lsq_oracle, mc_iou,
                  overlapping_box_pair, random_box)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}", flush=True)
        raise
    print(f"[PASS] {name}", flush=True)


def make_box(x, y=0.0, score=1.0, agent_id=0, det_id=0):
    return DetectionBox(x=x, y=y, z=0.75, yaw=0.0, h=1.5, w=2.0, l=4.0,
                        score=score, agent_id=agent_id, det_id=det_id)


def test_solver_oracle_equivalence():
    with criterion("solver oracle equivalence (200 graphs, n<=50, <5s)"):
        rng = np.random.default_rng(2024)
        start = time.monotonic()
        for _ in range(200):
            n_pairs = int(rng.integers(0, 12))
            n_uni = int(rng.integers(0, 13))
            n_unj = int(rng.integers(0, 13))
            if 2 * n_pairs + n_uni + n_unj == 0:
                n_pairs = 1
            dets_i = [random_box(rng, 30.0) for _ in range(n_pairs + n_uni)]
            dets_j = [random_box(rng, 30.0) for _ in range(n_pairs + n_unj)]
            graph = build_graph(dets_i, dets_j,
                                [(k, k) for k in range(n_pairs)])
            assert graph.n <= 50
            for axis in ("x", "y", "z"):
                delta = differential_coordinates(graph, axis)
                for anchors in build_anchor_vectors(graph, axis):
                    got = solve_lsq(graph, delta, anchors)
                    want = lsq_oracle(graph.laplacian, delta, anchors)
                    np.testing.assert_allclose(got, want, rtol=1e-9,
                                               atol=1e-12)
        elapsed = time.monotonic() - start
        assert elapsed < 5.0, f"solver oracle sweep took {elapsed:.2f}s"


def test_fusion_fixed_points_and_k2_example():
    with criterion("fusion fixed points and K2 worked example"):
        # zero pairs: anchors equal inputs, fusion reproduces them
        dets_i = [make_box(3.0, y=1.0)]
        dets_j = [make_box(40.0, y=-7.0, agent_id=1)]
        fused = fuse_detections(dets_i, dets_j, [])
        for out, src in zip(fused.j_ij, dets_i + dets_j):
            assert abs(out.x - src.x) <= 1e-9
            assert abs(out.y - src.y) <= 1e-9
            assert abs(out.z - src.z) <= 1e-9

        # identical detections from both agents: fused centroids unchanged
        dets_i = [make_box(1.0), make_box(9.0, y=5.0, det_id=1)]
        dets_j = [replace(d, agent_id=1) for d in dets_i]
        fused = fuse_detections(dets_i, dets_j, [(0, 0), (1, 1)])
        for out, src in zip(fused.j_ij, dets_i):
            assert abs(out.x - src.x) <= 1e-9
            assert abs(out.y - src.y) <= 1e-9

        # K2 worked example: raw solutions then deduplicated values
        di = [make_box(1.0)]
        dj = [make_box(0.0, agent_id=1)]
        graph = build_graph(di, dj, [(0, 0)])
        delta = differential_coordinates(graph, "x")
        c_ij, c_ji = build_anchor_vectors(graph, "x")
        np.testing.assert_allclose(solve_lsq(graph, delta, c_ij),
                                   [0.4, -0.4], atol=1e-12)
        fused = fuse_detections(di, dj, [(0, 0)])
        assert abs(fused.j_ij[0].x - 0.0) <= 1e-9
        assert abs(fused.j_ji[0].x - 1.0) <= 1e-9


def test_hungarian_optimality():
    with criterion("hungarian optimality vs brute force (1000 trials, <10s)"):
        rng = np.random.default_rng(7)
        start = time.monotonic()
        for _ in range(1000):
            r = int(rng.integers(1, 8))
            c = int(rng.integers(1, 8))
            cost = rng.uniform(-10.0, 10.0, size=(r, c))
            assign = hungarian(cost)
            assert len(assign.matches) == min(r, c)
            total = sum(cost[i, j] for i, j in assign.matches)
            assert total == pytest.approx(brute_force_assignment(cost),
                                          abs=1e-9)
        elapsed = time.monotonic() - start
        assert elapsed < 10.0, f"hungarian sweep took {elapsed:.2f}s"


def test_iou_monte_carlo_oracle():
    with criterion("3D IoU vs Monte-Carlo oracle (100 pairs, 1e6 samples)"):
        rng = np.random.default_rng(99)
        for _ in range(100):
            a, b = overlapping_box_pair(rng)
            estimate = mc_iou(a, b, 1_000_000, rng)
            assert abs(iou3d(a, b) - estimate) <= 0.01


def test_kalman_invariants():
    with criterion("kalman covariance invariants (1e4 steps) and scalar case"):
        cfg = KalmanConfig.default()
        rng = np.random.default_rng(5)
        track = init_track(make_box(0.0), cfg, 1)
        for step in range(10_000):
            track = predict(track, cfg)
            z = measurement_from_box(make_box(
                x=float(rng.uniform(-20, 20)), y=float(rng.uniform(-20, 20))))
            z[3] = rng.uniform(-math.pi, math.pi)
            track = update(track, z, cfg)
            P = track.covariance
            assert np.abs(P - P.T).max() <= 1e-9
            if step % 100 == 0:
                assert np.linalg.eigvalsh(P).min() >= -1e-9
        assert np.linalg.eigvalsh(track.covariance).min() >= -1e-9

        # scalar analogue: P = 1, R = 1, prior 0, z = 2 -> posterior 1, K = 1/2
        track = init_track(make_box(0.0), cfg, 2)
        track.state = np.zeros(10)
        track.covariance = np.eye(10)
        z = np.zeros(7)
        z[0] = 2.0
        out = update(track, z, cfg)
        assert out.state[0] == 1.0
        assert out.covariance[0, 0] == 0.5


def _benign_scene(seed):
    return generate(ScenarioConfig(num_objects=5, num_frames=60, extent=60.0,
                                   noise_std=(0.0, 0.0), miss_rate=0.0,
                                   seed=seed))


def test_benign_perfection():
    with criterion("benign perfection: sAMOTA=1 and MT=1, all pipelines, "
                   "10 scenes"):
        for seed in range(10):
            scen = _benign_scene(seed)
            frames = build_frame_inputs(scen)
            gt = {f.index: list(f.gt) for f in scen.frames}
            for method in METHODS:
                records = run_tracker(frames, TrackerConfig(method=method))
                rep = evaluate(gt, records)
                assert abs(rep.samota - 1.0) <= 1e-12, \
                    f"{method} seed {seed}: sAMOTA {rep.samota}"
                assert abs(rep.mt - 1.0) <= 1e-12, \
                    f"{method} seed {seed}: MT {rep.mt}"


def test_directional_robustness():
    with criterion("directional robustness at eps=0.20, both agents, "
                   "20 seeds, <2min"):
        start = time.monotonic()
        attack = replace(EPS20, targets=(0, 1))
        amotp = {m: [] for m in METHODS}
        for seed in range(20):
            scen = generate(ScenarioConfig(num_objects=5, num_frames=60,
                                           seed=seed))
            frames = build_frame_inputs(scen)
            rng = np.random.default_rng([attack.seed, seed])
            attacked = [FrameInput(frame_index=f.frame_index,
                                   detections=perturb_frame(f.detections,
                                                            attack, rng),
                                   poses=f.poses)
                        for f in frames]
            gt = {f.index: list(f.gt) for f in scen.frames}
            for method in METHODS:
                records = run_tracker(attacked, TrackerConfig(method=method))
                amotp[method].append(evaluate(gt, records).amotp)
        means = {m: float(np.mean(v)) for m, v in amotp.items()}
        elapsed = time.monotonic() - start
        print(f"  mean AMOTP: " + ", ".join(f"{m}={means[m]:.4f}"
                                            for m in METHODS), flush=True)
        assert means["arlot"] >= means["merged"]
        assert means["arlot"] >= means["sequential"]
        assert means["arlot"] >= 1.2 * means["single"]
        assert elapsed < 120.0, f"robustness sweep took {elapsed:.1f}s"


def test_lifecycle_schedules():
    with criterion("lifecycle schedules at hits=3, age=2"):
        cfg = KalmanConfig.default()

        def trace(schedule):
            tracks = [init_track(make_box(0.0), cfg, 1, frame_index=1)]
            states = []
            for frame, matched in enumerate(schedule, start=1):
                matched_ids = {1} if matched and frame > 1 else set()
                tracks = step_lifecycle(tracks, matched_ids, frame,
                                        hits=3, age=2)
                states.append(tracks[0].status if tracks else DEAD)
            return states

        # matched on frames 1,2,3 -> confirmed exactly at frame 3
        assert trace([True, True, True]) == [TENTATIVE, TENTATIVE, CONFIRMED]
        # confirmed track missing frames 4,5 -> dead exactly at frame 5
        assert trace([True, True, True, False, False]) == \
            [TENTATIVE, TENTATIVE, CONFIRMED, CONFIRMED, DEAD]
        # alternating match/miss never confirms
        states = trace([True, False, True, False, True, False, True, False])
        assert CONFIRMED not in states and DEAD not in states


def test_metrics_oracle():
    with criterion("metrics oracle: 2-frame/2-object enumeration and "
                   "no-prediction clamp"):
        gt = {0: [(0, make_box(0.0)), (1, make_box(20.0))],
              1: [(0, make_box(0.0)), (1, make_box(20.0))]}

        def row(frame, tid, x, y=0.0, score=1.0):
            return TrackRecord(frame=frame, track_id=tid,
                               box=make_box(x, y=y, score=score),
                               confirmed=True)

        records = [
            row(0, 1, 0.0, score=0.9), row(1, 1, 0.0, score=0.9),
            row(0, 2, 20.0, score=0.6), row(1, 4, 20.0, score=0.6),
            row(1, 3, 100.0, y=50.0, score=0.95),
        ]
        rep = evaluate(gt, records, iou_min=0.25, num_recall_points=4)
        assert [(lv.tp, lv.fp, lv.fn, lv.idsw) for lv in rep.levels] == \
            [(2, 1, 2, 0), (2, 1, 2, 0), (4, 1, 0, 1), (4, 1, 0, 1)]
        assert rep.samota == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert rep.amota == pytest.approx(0.375, abs=1e-12)
        assert rep.amotp == pytest.approx(1.0, abs=1e-12)
        assert rep.mt == pytest.approx(1.0)

        empty = evaluate(gt, [], iou_min=0.25, num_recall_points=4)
        assert empty.samota == 0.0
        assert all(lv.smota == 0.0 for lv in empty.levels)


def test_end_to_end_determinism(tmp_path):
    with criterion("end-to-end determinism: byte-identical runs"):
        config = {
            "scenario": {"num_objects": 4, "num_frames": 20},
            "attack": {"epsilon": 0.2, "drop_rate": 0.3, "fp_rate": 2.0,
                       "yaw_jitter": 0.05, "targets": [0, 1]},
            "tracker": {"method": "arlot"},
            "eval": {"recall_points": 20},
            "seeds": [0, 1],
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))

        def run(root):
            assert cli_main(["simulate", "--config", str(cfg_path),
                             "--out", str(root / "base")]) == 0
            assert cli_main(["attack", str(root / "base"), "--config",
                             str(cfg_path), "--out", str(root / "atk")]) == 0
            assert cli_main(["track", str(root / "atk"), "--method", "arlot",
                             "--config", str(cfg_path),
                             "--out", str(root / "trk")]) == 0
            assert cli_main(["eval", str(root / "base"), str(root / "trk"),
                             "--config", str(cfg_path),
                             "--out", str(root / "report.json"),
                             "--label", "arlot"]) == 0
            return {str(p.relative_to(root)): p.read_bytes()
                    for p in sorted(root.rglob("*")) if p.is_file()}

        assert run(tmp_path / "runA") == run(tmp_path / "runB")
