"""Least-squares detection-graph fusion.

Two agents' detections of the same scene form one fully connected graph.
Differential coordinates capture the relative geometry of all observed
centroids; two anchor vectors inject each agent's absolute positions for
the detections the agents share.  Solving the extended-Laplacian
least-squares system once per anchor vector yields two fused detection
sets, one anchored to each agent, which downstream tracking consumes in
two association stages.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .geometry import DetectionBox

AXES = ("x", "y", "z")

# node ordering: both members of every overlapped pair first (agent-i copies,
# then agent-j copies), then unique-i, then unique-j
SIDE_I = 0
SIDE_J = 1


@dataclass(frozen=True)
class DetectionGraph:
    """Fully connected graph over one fusion step's detections."""

    nodes: tuple[DetectionBox, ...]
    pair_count: int
    laplacian: np.ndarray
    source: tuple[int, ...]  # SIDE_I / SIDE_J per node

    @property
    def n(self) -> int:
        return len(self.nodes)

    def coords(self, axis: str) -> np.ndarray:
        return np.array([getattr(b, axis) for b in self.nodes])


@dataclass(frozen=True)
class AnchorPair:
    """Per-axis anchor vectors, rows ordered x, y, z; shape (3, n) each."""

    c_ij: np.ndarray
    c_ji: np.ndarray


@dataclass(frozen=True)
class FusedDetections:
    """The two fused sets, deduplicated to one box per physical object."""

    j_ij: list[DetectionBox]
    j_ji: list[DetectionBox]


def complete_laplacian(n: int) -> np.ndarray:
    """Laplacian of the complete graph on n nodes with unit edge weights."""
    lap = np.full((n, n), -1.0)
    np.fill_diagonal(lap, float(n - 1))
    return lap


def build_graph(dets_i: list[DetectionBox], dets_j: list[DetectionBox],
                pairs: list[tuple[int, int]]) -> DetectionGraph:
    """Assemble the canonical node ordering and complete-graph Laplacian.

    `pairs` lists (index into dets_i, index into dets_j) for detections the
    two agents share.  Indices must be valid and one-to-one.
    """
    used_i = [pi for pi, _ in pairs]
    used_j = [pj for _, pj in pairs]
    if len(set(used_i)) != len(used_i) or len(set(used_j)) != len(used_j):
        raise ValueError("pair indices must be one-to-one")
    for pi, pj in pairs:
        if not (0 <= pi < len(dets_i)) or not (0 <= pj < len(dets_j)):
            raise ValueError(f"pair index out of range: ({pi}, {pj})")

    paired_i = set(used_i)
    paired_j = set(used_j)
    nodes: list[DetectionBox] = []
    source: list[int] = []
    for pi, _ in pairs:
        nodes.append(dets_i[pi])
        source.append(SIDE_I)
    for _, pj in pairs:
        nodes.append(dets_j[pj])
        source.append(SIDE_J)
    for idx, det in enumerate(dets_i):
        if idx not in paired_i:
            nodes.append(det)
            source.append(SIDE_I)
    for idx, det in enumerate(dets_j):
        if idx not in paired_j:
            nodes.append(det)
            source.append(SIDE_J)

    n = len(nodes)
    return DetectionGraph(tuple(nodes), len(pairs), complete_laplacian(n),
                          tuple(source))


def differential_coordinates(graph: DetectionGraph, axis: str) -> np.ndarray:
    """delta = L u: each node's coordinate relative to all its neighbours."""
    return graph.laplacian @ graph.coords(axis)


def build_anchor_vectors(graph: DetectionGraph, axis: str
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Anchor-vector slice (c_ij, c_ji) for one axis.

    Both slots of an overlapped pair carry the counterpart agent's
    coordinate (agent j in c_ij, agent i in c_ji); unique detections anchor
    to their own coordinate in both vectors.
    """
    u = graph.coords(axis)
    m = graph.pair_count
    c_ij = u.copy()
    c_ji = u.copy()
    for k in range(m):
        xi = u[k]
        xj = u[k + m]
        c_ij[k] = c_ij[k + m] = xj
        c_ji[k] = c_ji[k + m] = xi
    return c_ij, c_ji


def build_anchor_pair(graph: DetectionGraph) -> AnchorPair:
    slices = [build_anchor_vectors(graph, axis) for axis in AXES]
    return AnchorPair(np.stack([s[0] for s in slices]),
                      np.stack([s[1] for s in slices]))


def solve_lsq(graph: DetectionGraph, delta: np.ndarray,
              anchors: np.ndarray) -> np.ndarray:
    """Minimize ||L u - delta||^2 + ||u - c||^2 via the normal equations.

    L^T L + I is symmetric positive definite by construction, so the
    system is solved with a Cholesky factorization.
    """
    n = graph.n
    delta = np.asarray(delta, dtype=float)
    anchors = np.asarray(anchors, dtype=float)
    if delta.shape != (n,) or anchors.shape != (n,):
        raise ValueError(
            f"expected length-{n} delta and anchors, got "
            f"{delta.shape} and {anchors.shape}"
        )
    lap = graph.laplacian
    lhs = lap.T @ lap + np.eye(n)
    rhs = lap.T @ delta + anchors
    return cho_solve(cho_factor(lhs, lower=True), rhs)


def _fused_box(anchor_member: DetectionBox, other_member: DetectionBox,
               centroid: np.ndarray) -> DetectionBox:
    # yaw/dims follow the anchor-source member; score keeps the better of the two
    return replace(
        anchor_member,
        x=float(centroid[0]), y=float(centroid[1]), z=float(centroid[2]),
        score=max(anchor_member.score, other_member.score),
    )


def fuse_detections(dets_i: list[DetectionBox], dets_j: list[DetectionBox],
                    pairs: list[tuple[int, int]]) -> FusedDetections:
    """Solve both anchored systems on all three axes and deduplicate pairs.

    Raw solutions contain every node; the two copies of each overlapped
    pair are averaged into one fused box whose non-centroid attributes come
    from the anchor-source agent (agent j for J_ij, agent i for J_ji).
    Unique detections keep their own attributes with solved centroids.
    """
    graph = build_graph(dets_i, dets_j, pairs)
    n, m = graph.n, graph.pair_count
    if n == 0:
        return FusedDetections([], [])

    lap = graph.laplacian
    factor = cho_factor(lap.T @ lap + np.eye(n), lower=True)
    sol_ij = np.empty((3, n))
    sol_ji = np.empty((3, n))
    for a, axis in enumerate(AXES):
        delta = lap @ graph.coords(axis)
        c_ij, c_ji = build_anchor_vectors(graph, axis)
        sol_ij[a] = cho_solve(factor, lap.T @ delta + c_ij)
        sol_ji[a] = cho_solve(factor, lap.T @ delta + c_ji)

    j_ij: list[DetectionBox] = []
    j_ji: list[DetectionBox] = []
    for k in range(m):
        member_i, member_j = graph.nodes[k], graph.nodes[k + m]
        mid_ij = 0.5 * (sol_ij[:, k] + sol_ij[:, k + m])
        mid_ji = 0.5 * (sol_ji[:, k] + sol_ji[:, k + m])
        j_ij.append(_fused_box(member_j, member_i, mid_ij))
        j_ji.append(_fused_box(member_i, member_j, mid_ji))
    for v in range(2 * m, n):
        node = graph.nodes[v]
        j_ij.append(node.with_centroid(*(float(c) for c in sol_ij[:, v])))
        j_ji.append(node.with_centroid(*(float(c) for c in sol_ji[:, v])))
    return FusedDetections(j_ij, j_ji)
