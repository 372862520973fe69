"""Oriented 3D bounding boxes, rigid-frame projection, and 3D IoU.

Boxes are 7-DoF: centroid (x, y, z), yaw about the z-axis, and dimensions
(h, w, l).  IoU is computed as BEV polygon overlap (Sutherland-Hodgman
clipping of the two yaw-rotated rectangles) times the z-extent overlap,
divided by the union volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

TAU = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    r = math.remainder(angle, TAU)
    if r <= -math.pi:
        r += TAU
    return r


@dataclass(frozen=True)
class DetectionBox:
    """One 7-DoF detection: centroid, yaw, dimensions, confidence, ownership.

    h, w, l must be strictly positive; yaw is normalized to (-pi, pi] at
    construction.  agent_id/det_id default to -1 for boxes that do not
    originate from a sensor (ground truth, track states).
    """

    x: float
    y: float
    z: float
    yaw: float
    h: float
    w: float
    l: float
    score: float = 1.0
    agent_id: int = -1
    det_id: int = -1

    def __post_init__(self):
        for name in ("x", "y", "z", "h", "w", "l", "score"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.h > 0 and self.w > 0 and self.l > 0):
            raise ValueError(
                f"box dimensions must be strictly positive, got "
                f"h={self.h}, w={self.w}, l={self.l}"
            )
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def centroid(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def volume(self) -> float:
        return self.h * self.w * self.l

    def with_centroid(self, x: float, y: float, z: float) -> "DetectionBox":
        return replace(self, x=x, y=y, z=z)


@dataclass(frozen=True)
class Pose2p5D:
    """Agent-to-common-frame transform: z-axis rotation plus 3D translation."""

    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        for name in ("tx", "ty", "tz"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "heading", wrap_angle(self.heading))


def bev_corners(box: DetectionBox) -> list[tuple[float, float]]:
    """Corners of the box footprint in the x-y plane, counter-clockwise.

    Length runs along the box's local x axis (yaw = 0), width along y.
    """
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    hl, hw = box.l / 2.0, box.w / 2.0
    local = ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw))
    return [(box.x + c * px - s * py, box.y + s * px + c * py) for px, py in local]


def _polygon_area(poly: list[tuple[float, float]]) -> float:
    """Shoelace area of a simple polygon (positive for CCW order)."""
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return 0.5 * acc


def _clip_polygon(subject: list[tuple[float, float]],
                  clip: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of `subject` by convex CCW polygon `clip`."""
    output = subject
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        input_pts = output
        output = []
        for j in range(len(input_pts)):
            px, py = input_pts[j - 1]
            qx, qy = input_pts[j]
            # inside = on or left of the directed clip edge
            p_in = ex * (py - ay) - ey * (px - ax) >= 0.0
            q_in = ex * (qy - ay) - ey * (qx - ax) >= 0.0
            if q_in:
                if not p_in:
                    output.append(_intersect(px, py, qx, qy, ax, ay, bx, by))
                output.append((qx, qy))
            elif p_in:
                output.append(_intersect(px, py, qx, qy, ax, ay, bx, by))
    return output


def _intersect(px, py, qx, qy, ax, ay, bx, by) -> tuple[float, float]:
    """Intersection of segment p-q with the infinite line a-b."""
    dx1, dy1 = qx - px, qy - py
    dx2, dy2 = bx - ax, by - ay
    denom = dx1 * dy2 - dy1 * dx2
    if denom == 0.0:
        return (qx, qy)
    t = ((ax - px) * dy2 - (ay - py) * dx2) / denom
    return (px + t * dx1, py + t * dy1)


def bev_overlap_area(a: DetectionBox, b: DetectionBox) -> float:
    """Area of the intersection of the two BEV footprints."""
    inter = _clip_polygon(bev_corners(a), bev_corners(b))
    return abs(_polygon_area(inter))


def iou3d(a: DetectionBox, b: DetectionBox) -> float:
    """3D intersection-over-union of two oriented boxes, in [0, 1].

    Intersection volume is the BEV polygon overlap area times the z-extent
    overlap.  Touching boxes with zero-measure overlap score 0.
    """
    # cheap reject: BEV circumscribing circles cannot intersect
    dx, dy = a.x - b.x, a.y - b.y
    reach = 0.5 * (math.hypot(a.l, a.w) + math.hypot(b.l, b.w))
    if dx * dx + dy * dy > reach * reach:
        return 0.0
    z_lo = max(a.z - a.h / 2.0, b.z - b.h / 2.0)
    z_hi = min(a.z + a.h / 2.0, b.z + b.h / 2.0)
    if z_hi <= z_lo:
        return 0.0
    area = bev_overlap_area(a, b)
    inter = area * (z_hi - z_lo)
    if inter <= 0.0:
        return 0.0
    union = a.volume + b.volume - inter
    return inter / union


def to_common_frame(box: DetectionBox, pose: Pose2p5D) -> DetectionBox:
    """Project an agent-frame box into the common frame."""
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    return replace(
        box,
        x=pose.tx + c * box.x - s * box.y,
        y=pose.ty + s * box.x + c * box.y,
        z=pose.tz + box.z,
        yaw=wrap_angle(box.yaw + pose.heading),
    )


def to_agent_frame(box: DetectionBox, pose: Pose2p5D) -> DetectionBox:
    """Inverse of :func:`to_common_frame`."""
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    dx, dy = box.x - pose.tx, box.y - pose.ty
    return replace(
        box,
        x=c * dx + s * dy,
        y=-s * dx + c * dy,
        z=box.z - pose.tz,
        yaw=wrap_angle(box.yaw - pose.heading),
    )
