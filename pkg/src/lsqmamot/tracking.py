"""Constant-velocity Kalman filtering and hits/age track lifecycle.

State is the 10-vector [x y z yaw h w l vx vy vz]; measurements are the
7-vector box parameters.  Velocities are in meters per frame (dt = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import DetectionBox, wrap_angle

STATE_DIM = 10
MEAS_DIM = 7

TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DEAD = "dead"


def _check_psd(mat: np.ndarray, name: str) -> None:
    if not np.allclose(mat, mat.T, atol=1e-9):
        raise ValueError(f"{name} must be symmetric")
    eigvals = np.linalg.eigvalsh(mat)
    if eigvals.min() < -1e-9:
        raise ValueError(f"{name} must be positive semidefinite")


@dataclass(frozen=True)
class KalmanConfig:
    """Constant-velocity model matrices and noise covariances."""

    F: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        if self.F.shape != (STATE_DIM, STATE_DIM):
            raise ValueError("F must be 10x10")
        if self.H.shape != (MEAS_DIM, STATE_DIM):
            raise ValueError("H must be 7x10")
        _check_psd(self.Q, "Q")
        _check_psd(self.R, "R")
        _check_psd(self.P0, "P0")

    @staticmethod
    def default(dt: float = 1.0) -> "KalmanConfig":
        """AB3DMOT-style defaults: uncertain velocities, unit measurement noise."""
        F = np.eye(STATE_DIM)
        F[0, 7] = F[1, 8] = F[2, 9] = dt
        H = np.zeros((MEAS_DIM, STATE_DIM))
        H[:MEAS_DIM, :MEAS_DIM] = np.eye(MEAS_DIM)
        Q = np.zeros((STATE_DIM, STATE_DIM))
        Q[7:, 7:] = 0.01 * np.eye(3)
        R = np.eye(MEAS_DIM)
        P0 = 10.0 * np.eye(STATE_DIM)
        P0[7:, 7:] = 1000.0 * np.eye(3)
        return KalmanConfig(F=F, H=H, Q=Q, R=R, P0=P0)


@dataclass
class Track:
    """One tracked object: Kalman state plus lifecycle counters."""

    state: np.ndarray
    covariance: np.ndarray
    track_id: int
    hit_streak: int = 0
    miss_streak: int = 0
    status: str = TENTATIVE
    birth_frame: int = 0
    score_sum: float = 0.0
    score_count: int = 0

    @property
    def confidence(self) -> float:
        """Mean score of the detections that contributed to this track."""
        return self.score_sum / self.score_count if self.score_count else 0.0

    @property
    def alive(self) -> bool:
        return self.status != DEAD

    def to_box(self) -> DetectionBox:
        x, y, z, yaw, h, w, l = (float(v) for v in self.state[:MEAS_DIM])
        return DetectionBox(x=x, y=y, z=z, yaw=yaw,
                            h=max(h, 1e-6), w=max(w, 1e-6), l=max(l, 1e-6),
                            score=min(max(self.confidence, 0.0), 1.0))


def measurement_from_box(box: DetectionBox) -> np.ndarray:
    return np.array([box.x, box.y, box.z, box.yaw, box.h, box.w, box.l])


def init_track(det: DetectionBox, cfg: KalmanConfig, next_id: int,
               frame_index: int = 0) -> Track:
    """New tentative track at the detection, with zero velocity."""
    state = np.zeros(STATE_DIM)
    state[:MEAS_DIM] = measurement_from_box(det)
    state[3] = wrap_angle(state[3])
    return Track(
        state=state,
        covariance=cfg.P0.copy(),
        track_id=next_id,
        birth_frame=frame_index,
        score_sum=det.score,
        score_count=1,
    )


def predict(track: Track, cfg: KalmanConfig) -> Track:
    """Advance one frame: state <- F state, P <- F P F^T + Q."""
    state = cfg.F @ track.state
    state[3] = wrap_angle(state[3])
    cov = cfg.F @ track.covariance @ cfg.F.T + cfg.Q
    cov = 0.5 * (cov + cov.T)
    return replace(track, state=state, covariance=cov)


def _wrap_measured_yaw(state_yaw: float, meas_yaw: float) -> float:
    """Flip the measured yaw by pi when needed so the innovation lies in
    (-pi/2, pi/2]; boxes are symmetric under that flip."""
    d = wrap_angle(meas_yaw - state_yaw)
    if d > math.pi / 2.0:
        d -= math.pi
    elif d <= -math.pi / 2.0:
        d += math.pi
    return state_yaw + d


def update(track: Track, z: np.ndarray, cfg: KalmanConfig,
           det_score: float | None = None) -> Track:
    """Fold a 7-dim measurement into the track state."""
    z = np.asarray(z, dtype=float).copy()
    x, P = track.state, track.covariance
    z[3] = _wrap_measured_yaw(float(x[3]), float(z[3]))
    S = cfg.H @ P @ cfg.H.T + cfg.R
    K = np.linalg.solve(S.T, (P @ cfg.H.T).T).T
    state = x + K @ (z - cfg.H @ x)
    state[3] = wrap_angle(state[3])
    cov = P - K @ cfg.H @ P
    cov = 0.5 * (cov + cov.T)
    out = replace(track, state=state, covariance=cov)
    if det_score is not None:
        out.score_sum += det_score
        out.score_count += 1
    return out


def step_lifecycle(tracks: list[Track], matched_ids: set[int],
                   frame_index: int, hits: int, age: int) -> list[Track]:
    """Advance hit/miss streaks, confirm, and remove dead tracks.

    Tracks born this frame count as matched: the detection that created
    them is their first hit.  Confirmation (hit_streak >= hits) is sticky;
    a track dies after `age` consecutive misses.
    """
    survivors: list[Track] = []
    for track in tracks:
        if track.track_id in matched_ids or track.birth_frame == frame_index:
            track.hit_streak += 1
            track.miss_streak = 0
            if track.status == TENTATIVE and track.hit_streak >= hits:
                track.status = CONFIRMED
        else:
            track.miss_streak += 1
            track.hit_streak = 0
            if track.miss_streak >= age:
                track.status = DEAD
        if track.status != DEAD:
            survivors.append(track)
    return survivors
