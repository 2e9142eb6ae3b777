"""Agglomerative hierarchical clustering with deterministic tie-breaking.

Used for picking upright mocap frames (rotation-angle vectors) and for
filtering upright poses (feet/torso coordinates). The implementation keeps a
full distance matrix and Lance-Williams row updates, so memory and time are
O(n^2)/O(n^3): fine at desk scale (n up to a few thousand), not beyond.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PoseError
from .skeleton import FRAME_PELVIS, JointId, to_pelvis_relative

LINKAGES = ("single", "complete", "average")


@dataclass(frozen=True)
class ClusterResult:
    """Flat labels (contiguous from 0) plus the ordered dendrogram merges."""

    labels: np.ndarray            # (n,) int
    merges: tuple                 # ((i, j, distance), ...) in merge order

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1


def _lance_williams(linkage, d_ai, d_bi, na, nb):
    if linkage == "single":
        return np.minimum(d_ai, d_bi)
    if linkage == "complete":
        return np.maximum(d_ai, d_bi)
    return (na * d_ai + nb * d_bi) / (na + nb)


def agglomerative(points, k: int, linkage: str = "average") -> ClusterResult:
    """Greedy bottom-up merging until k clusters remain.

    Ties on merge distance are broken toward the lexicographically smallest
    pair of cluster slots, so the result is deterministic for a given input
    order. A merged cluster keeps the smaller slot of the pair.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a nonempty 2-D array of row vectors")
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"cluster count must be in 1..{n}, got {k}")
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}")

    sq = np.sum(pts ** 2, axis=1)
    dist = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * pts @ pts.T, 0.0))
    np.fill_diagonal(dist, np.inf)

    active = np.ones(n, dtype=bool)
    sizes = np.ones(n, dtype=int)
    members = [[i] for i in range(n)]
    # Cached per-slot nearest neighbor; argmin returns the smallest index on
    # ties, which is exactly the tie-break rule.
    nn_idx = dist.argmin(axis=1)
    nn_val = dist[np.arange(n), nn_idx]

    merges = []
    for _ in range(n - k):
        i = int(np.argmin(np.where(active, nn_val, np.inf)))
        j = int(nn_idx[i])
        merges.append((i, j, float(dist[i, j])))

        row = _lance_williams(linkage, dist[i], dist[j], sizes[i], sizes[j])
        row[i] = np.inf
        row[~active] = np.inf
        dist[i] = row
        dist[:, i] = row
        dist[j] = np.inf
        dist[:, j] = np.inf
        active[j] = False
        members[i].extend(members[j])
        members[j] = None
        sizes[i] += sizes[j]
        nn_val[j] = np.inf

        nn_idx[i] = int(np.argmin(dist[i]))
        nn_val[i] = dist[i, nn_idx[i]]
        for r in np.nonzero(active)[0]:
            if r == i:
                continue
            if nn_idx[r] == i or nn_idx[r] == j:
                nn_idx[r] = int(np.argmin(dist[r]))
                nn_val[r] = dist[r, nn_idx[r]]
            elif dist[r, i] < nn_val[r] or (dist[r, i] == nn_val[r] and i < nn_idx[r]):
                nn_idx[r] = i
                nn_val[r] = dist[r, i]

    clusters = sorted((m for m in members if m is not None), key=min)
    labels = np.empty(n, dtype=int)
    for label, cluster in enumerate(clusters):
        labels[cluster] = label
    return ClusterResult(labels=labels, merges=tuple(merges))


def largest_cluster(result: ClusterResult) -> np.ndarray:
    """Indices of the most populous cluster; ties go to the smallest label."""
    counts = np.bincount(result.labels)
    label = int(np.argmax(counts))
    return np.nonzero(result.labels == label)[0]


_UPRIGHT_JOINTS = (JointId.RAnkle, JointId.LAnkle, JointId.Thorax)


def upright_filter(poses) -> np.ndarray:
    """Select standing poses: cluster feet/torso coordinates into 3 groups
    (average linkage) and keep the largest one."""
    poses = list(poses)
    if len(poses) < 3:
        raise PoseError("upright filtering needs at least 3 poses")
    vectors = []
    for pose in poses:
        if pose.frame != FRAME_PELVIS:
            pose = to_pelvis_relative(pose)
        vectors.append(np.concatenate([pose[j] for j in _UPRIGHT_JOINTS]))
    vectors = np.array(vectors)
    if not (vectors != vectors[0]).any():
        return np.arange(len(poses))  # identical poses: nothing to separate
    result = agglomerative(vectors, k=3, linkage="average")
    return largest_cluster(result)
