"""Independent oracles shared by the test suite.

These deliberately avoid the production code paths: Gaussian elimination
instead of Cholesky, permutation search instead of Kuhn-Munkres,
Monte-Carlo volume sampling instead of polygon clipping.
"""

import itertools
import math

import numpy as np

from lsqmamot.geometry import DetectionBox


def gaussian_elim_solve(A, b):
    """Solve A x = b by Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(A[col:, col])))
        if A[pivot, col] == 0.0:
            raise ZeroDivisionError("singular matrix")
        if pivot != col:
            A[[col, pivot]] = A[[pivot, col]]
            b[[col, pivot]] = b[[pivot, col]]
        for row in range(col + 1, n):
            factor = A[row, col] / A[col, col]
            A[row, col:] -= factor * A[col, col:]
            b[row] -= factor * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - A[row, row + 1:] @ x[row + 1:]) / A[row, row]
    return x


def lsq_oracle(laplacian, delta, anchors):
    """Normal-equations oracle for the extended-Laplacian least squares."""
    L = np.asarray(laplacian, dtype=float)
    A = L.T @ L + np.eye(L.shape[0])
    return gaussian_elim_solve(A, L.T @ np.asarray(delta) + np.asarray(anchors))


def brute_force_assignment(cost):
    """Minimum total cost over all complete injections (exhaustive)."""
    cost = np.asarray(cost, dtype=float)
    r, c = cost.shape
    if r == 0 or c == 0:
        return 0.0
    if r <= c:
        return min(sum(cost[i, p[i]] for i in range(r))
                   for p in itertools.permutations(range(c), r))
    return min(sum(cost[p[j], j] for j in range(c))
               for p in itertools.permutations(range(r), c))


def _points_in_box(pts, box: DetectionBox):
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx = pts[:, 0] - box.x
    dy = pts[:, 1] - box.y
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    return ((np.abs(lx) <= box.l / 2.0)
            & (np.abs(ly) <= box.w / 2.0)
            & (np.abs(pts[:, 2] - box.z) <= box.h / 2.0))


def mc_iou(a: DetectionBox, b: DetectionBox, n_samples: int,
           rng: np.random.Generator) -> float:
    """IoU estimated by uniform sampling over the union's bounding box."""
    corners = []
    for box in (a, b):
        half = math.hypot(box.l, box.w) / 2.0
        corners.append((box.x - half, box.x + half,
                        box.y - half, box.y + half,
                        box.z - box.h / 2.0, box.z + box.h / 2.0))
    lo = [min(c[0] for c in corners), min(c[2] for c in corners),
          min(c[4] for c in corners)]
    hi = [max(c[1] for c in corners), max(c[3] for c in corners),
          max(c[5] for c in corners)]
    pts = rng.uniform(lo, hi, size=(n_samples, 3))
    in_a = _points_in_box(pts, a)
    in_b = _points_in_box(pts, b)
    union = int((in_a | in_b).sum())
    if union == 0:
        return 0.0
    return int((in_a & in_b).sum()) / union


def random_box(rng: np.random.Generator, spread: float = 10.0) -> DetectionBox:
    return DetectionBox(
        x=rng.uniform(-spread, spread),
        y=rng.uniform(-spread, spread),
        z=rng.uniform(-2.0, 2.0),
        yaw=rng.uniform(-math.pi, math.pi),
        h=rng.uniform(0.5, 3.0),
        w=rng.uniform(0.5, 3.0),
        l=rng.uniform(0.5, 6.0),
        score=rng.uniform(0.0, 1.0),
    )


def overlapping_box_pair(rng: np.random.Generator):
    """A random box and a jittered copy, usually with nonzero overlap."""
    a = random_box(rng)
    b = DetectionBox(
        x=a.x + rng.uniform(-a.l, a.l) * 0.6,
        y=a.y + rng.uniform(-a.w, a.w) * 0.6,
        z=a.z + rng.uniform(-a.h, a.h) * 0.4,
        yaw=a.yaw + rng.uniform(-0.5, 0.5),
        h=a.h * rng.uniform(0.7, 1.3),
        w=a.w * rng.uniform(0.7, 1.3),
        l=a.l * rng.uniform(0.7, 1.3),
        score=rng.uniform(0.0, 1.0),
    )
    return a, b
