"""Surrogate detection-level attack model.

Reproduces the observable effects of a bounded point-cloud perturbation
attack on a 3D detector: centroid displacements clipped to an epsilon
ball, yaw jitter, dropped detections, and injected false positives.
Magnitudes are knobs, not measured values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import DetectionBox, wrap_angle


@dataclass(frozen=True)
class AttackConfig:
    """Effect magnitudes for one attack regime.

    epsilon bounds the per-detection centroid displacement (meters);
    drop_rate is the per-detection miss probability; fp_rate the Poisson
    mean of injected false boxes per agent per frame.  Displacement
    magnitudes are drawn uniformly from [displacement_low_frac * epsilon,
    epsilon], directions uniformly on the sphere.
    """

    epsilon: float = 0.0
    drop_rate: float = 0.0
    fp_rate: float = 0.0
    yaw_jitter: float = 0.0
    targets: tuple[int, ...] = (0,)
    seed: int = 0
    displacement_low_frac: float = 0.5

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not 0.0 <= self.drop_rate <= 1.0:
            raise ValueError("drop_rate must be in [0, 1]")
        if self.fp_rate < 0:
            raise ValueError("fp_rate must be >= 0")
        if not 0.0 <= self.displacement_low_frac <= 1.0:
            raise ValueError("displacement_low_frac must be in [0, 1]")
        object.__setattr__(self, "targets", tuple(sorted(set(self.targets))))


# severe-regime presets matching the two studied epsilon settings
EPS20 = AttackConfig(epsilon=0.20, drop_rate=0.3, fp_rate=2.0, yaw_jitter=0.05)
EPS25 = AttackConfig(epsilon=0.25, drop_rate=0.5, fp_rate=4.0, yaw_jitter=0.05)


def clip_displacement(d, epsilon: float) -> np.ndarray:
    """Scale `d` back onto the epsilon ball if its norm exceeds epsilon."""
    d = np.asarray(d, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm <= epsilon or norm == 0.0:
        return d
    return d * (epsilon / norm)


def _random_displacement(cfg: AttackConfig, rng: np.random.Generator) -> np.ndarray:
    direction = rng.normal(size=3)
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        direction = np.array([1.0, 0.0, 0.0])
        norm = 1.0
    lo = cfg.displacement_low_frac * cfg.epsilon
    magnitude = rng.uniform(lo, cfg.epsilon)
    return clip_displacement(direction * (magnitude / norm), cfg.epsilon)


def _scene_extent(detections: list[DetectionBox],
                  margin: float = 10.0) -> tuple[float, float, float, float]:
    if not detections:
        return (-50.0, 50.0, -50.0, 50.0)
    xs = [d.x for d in detections]
    ys = [d.y for d in detections]
    return (min(xs) - margin, max(xs) + margin, min(ys) - margin, max(ys) + margin)


def _false_positive(extent, det_id: int, agent_id: int,
                    rng: np.random.Generator) -> DetectionBox:
    x = rng.uniform(extent[0], extent[1])
    y = rng.uniform(extent[2], extent[3])
    h = rng.uniform(1.3, 1.9)
    return DetectionBox(
        x=x, y=y, z=h / 2.0,
        yaw=rng.uniform(-math.pi, math.pi),
        h=h, w=rng.uniform(1.5, 2.2), l=rng.uniform(3.4, 5.2),
        score=rng.uniform(0.3, 0.9),
        agent_id=agent_id, det_id=det_id,
    )


def perturb_detections(dets: list[DetectionBox], cfg: AttackConfig,
                       rng: np.random.Generator, agent_id: int,
                       all_scene_dets: list[DetectionBox] | None = None
                       ) -> list[DetectionBox]:
    """Attack one agent's detection list; det_id lineage is preserved for
    surviving detections, false positives get fresh ids."""
    extent = _scene_extent(all_scene_dets if all_scene_dets is not None else dets)
    out: list[DetectionBox] = []
    for det in dets:
        if cfg.drop_rate > 0.0 and rng.random() < cfg.drop_rate:
            continue
        d = _random_displacement(cfg, rng) if cfg.epsilon > 0.0 else np.zeros(3)
        yaw = det.yaw
        if cfg.yaw_jitter > 0.0:
            yaw = wrap_angle(yaw + rng.normal(0.0, cfg.yaw_jitter))
        out.append(replace(det, x=det.x + float(d[0]), y=det.y + float(d[1]),
                           z=det.z + float(d[2]), yaw=yaw))
    n_fp = int(rng.poisson(cfg.fp_rate)) if cfg.fp_rate > 0.0 else 0
    next_id = max((d.det_id for d in dets), default=-1) + 1
    for k in range(n_fp):
        out.append(_false_positive(extent, next_id + k, agent_id, rng))
    return out


def perturb_frame(detections: dict[int, list[DetectionBox]], cfg: AttackConfig,
                  rng: np.random.Generator) -> dict[int, list[DetectionBox]]:
    """Attack every targeted agent's detections in one frame.

    Untargeted agents pass through untouched (same objects).  Deterministic
    for a given (detections, cfg, rng state).
    """
    scene = [d for dets in detections.values() for d in dets]
    out: dict[int, list[DetectionBox]] = {}
    for agent_id in sorted(detections):
        dets = detections[agent_id]
        if agent_id in cfg.targets:
            out[agent_id] = perturb_detections(dets, cfg, rng, agent_id,
                                               all_scene_dets=scene)
        else:
            out[agent_id] = list(dets)
    return out
