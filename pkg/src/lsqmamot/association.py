"""Min-cost assignment (Kuhn-Munkres) and gated 3D-IoU association."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DetectionBox, iou3d

DEFAULT_IOU_GATE = 0.25


@dataclass(frozen=True)
class Assignment:
    """Result of a rectangular assignment: matches plus both leftover sets."""

    matches: tuple[tuple[int, int], ...]
    unmatched_rows: tuple[int, ...]
    unmatched_cols: tuple[int, ...]

    @property
    def row_to_col(self) -> dict[int, int]:
        return dict(self.matches)


def _solve_square(cost: list[list[float]], n: int) -> list[int]:
    """Kuhn-Munkres with potentials on an n x n matrix.

    Returns col_to_row: for each column j, the row assigned to it.
    Deterministic: rows are inserted in index order, columns scanned in
    index order.
    """
    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # 1-based: p[j] = row matched to col j, 0 = free
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            row = cost[i0 - 1]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    return [p[j] - 1 for j in range(1, n + 1)]


def hungarian(cost) -> Assignment:
    """Globally min-cost assignment; exactly min(rows, cols) pairs matched.

    Rectangular inputs are padded to square with a constant larger than any
    real entry, so padding never changes which real assignment is optimal.
    Raises ValueError on non-finite costs.
    """
    mat = np.asarray(cost, dtype=float)
    if mat.ndim != 2:
        mat = mat.reshape(mat.shape[0], -1) if mat.size else mat.reshape(0, 0)
    r, c = mat.shape
    if r == 0 or c == 0:
        return Assignment((), tuple(range(r)), tuple(range(c)))
    if not np.isfinite(mat).all():
        raise ValueError("assignment costs must be finite")

    n = max(r, c)
    pad = float(mat.max()) + 1.0
    square = [[pad] * n for _ in range(n)]
    for i in range(r):
        row = square[i]
        for j in range(c):
            row[j] = float(mat[i, j])

    col_to_row = _solve_square(square, n)
    matches = []
    for j, i in enumerate(col_to_row):
        if i < r and j < c:
            matches.append((i, j))
    matches.sort()
    matched_rows = {i for i, _ in matches}
    matched_cols = {j for _, j in matches}
    return Assignment(
        tuple(matches),
        tuple(i for i in range(r) if i not in matched_rows),
        tuple(j for j in range(c) if j not in matched_cols),
    )


def iou_matrix(a: list[DetectionBox], b: list[DetectionBox]) -> np.ndarray:
    out = np.zeros((len(a), len(b)))
    for i, box_a in enumerate(a):
        for j, box_b in enumerate(b):
            out[i, j] = iou3d(box_a, box_b)
    return out


def associate_by_iou(a: list[DetectionBox], b: list[DetectionBox],
                     iou_min: float = DEFAULT_IOU_GATE) -> Assignment:
    """Hungarian on cost = -IoU, then demote matches below the gate.

    Gating happens after the global assignment (post-gating), so a gated-out
    pair frees both its row and its column.
    """
    ious = iou_matrix(a, b)
    return gate_assignment(hungarian(-ious), ious, iou_min)


def gate_assignment(assignment: Assignment, ious: np.ndarray,
                    iou_min: float) -> Assignment:
    """Demote assignment matches whose IoU falls below `iou_min`."""
    kept = []
    extra_rows = []
    extra_cols = []
    for i, j in assignment.matches:
        if ious[i, j] >= iou_min:
            kept.append((i, j))
        else:
            extra_rows.append(i)
            extra_cols.append(j)
    return Assignment(
        tuple(kept),
        tuple(sorted((*assignment.unmatched_rows, *extra_rows))),
        tuple(sorted((*assignment.unmatched_cols, *extra_cols))),
    )


def cross_agent_overlap(dets_i: list[DetectionBox], dets_j: list[DetectionBox],
                        iou_min: float = DEFAULT_IOU_GATE
                        ) -> list[tuple[int, int]]:
    """Gated cross-agent pairing: which detections describe the same object."""
    return list(associate_by_iou(dets_i, dets_j, iou_min).matches)
