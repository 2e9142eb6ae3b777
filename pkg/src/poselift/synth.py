"""Synthetic training-sample generation from BVH motion capture.

Pipeline per sequence: forward kinematics -> 17-joint mapping -> upright
frame selection -> for each of the requested viewpoint classes, rotate the
character about the vertical axis so its yaw hits the class center exactly,
place it in front of the camera, project, and optionally perturb the 2D
joints with Gaussian pixel noise. Everything is driven by one seeded
generator, so identical inputs and seed give bit-identical record files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bvh import forward_kinematics, map_to_skeleton17, rotation_vectors
from .camera import (
    Camera,
    ViewpointClass,
    compute_yaw,
    project,
    rotate_character,
    wrap_angle_deg,
)
from .clustering import agglomerative, largest_cluster, upright_filter
from .errors import PoseError, ProjectionError
from .records import PoseRecord
from .skeleton import FRAME_CAMERA, FRAME_PELVIS, Pose3D, to_pelvis_relative

# world (y up) -> camera (y down, z forward): 180 degree turn about x.
_WORLD_TO_CAMERA = np.diag([1.0, -1.0, -1.0])

ALL_VIEWPOINTS = tuple(range(1, 9))


@dataclass(frozen=True)
class SynthConfig:
    viewpoints: tuple = ALL_VIEWPOINTS
    noise_sigma: float = 0.0               # px
    depth_range: tuple = (2000.0, 6000.0)  # mm
    lateral_range: tuple = (-300.0, 300.0)
    vertical_range: tuple = (-100.0, 100.0)
    upright_mode: str = "rotation"         # rotation | pose | none
    upright_clusters: int = 3
    frame_stride: int = 1
    max_frames: int = None                 # per-sequence cap after striding


def _upright_frames(doc, poses, cfg):
    n = len(poses)
    if cfg.upright_mode == "none" or n < 3:
        return list(range(n))
    if cfg.upright_mode == "pose":
        return [int(i) for i in upright_filter([p for _, p in poses])]
    # rotation mode: cluster the wrapped rotation channels of the kept frames
    vecs = rotation_vectors(doc)[[idx for idx, _ in poses]]
    result = agglomerative(vecs, k=min(cfg.upright_clusters, n), linkage="average")
    return [int(i) for i in largest_cluster(result)]


def generate_dataset(corpus, joint_map, unit_scale: float, cam: Camera,
                     cfg: SynthConfig = SynthConfig(), seed: int = 0,
                     activity: str = "synthetic"):
    """Produce labeled pose records from (name, BvhDocument) pairs.

    Returns (records, skipped) where skipped counts frame/viewpoint
    combinations dropped because the placed body fell outside the view.
    """
    corpus = sorted(corpus, key=lambda item: item[0])
    if not corpus:
        raise ValueError("empty BVH corpus")
    for k in cfg.viewpoints:
        ViewpointClass(k)  # validate early
    if cfg.upright_mode not in ("rotation", "pose", "none"):
        raise ValueError(f"unknown upright mode {cfg.upright_mode!r}")

    rng = np.random.default_rng(seed)
    records = []
    skipped = 0
    for name, doc in corpus:
        frame_ids = list(range(0, doc.n_frames, max(1, cfg.frame_stride)))
        if cfg.max_frames is not None:
            frame_ids = frame_ids[:cfg.max_frames]
        poses = []
        for idx in frame_ids:
            world = map_to_skeleton17(forward_kinematics(doc, idx), joint_map,
                                      unit_scale)
            poses.append((idx, world))
        keep = _upright_frames(doc, poses, cfg)
        for local_idx in keep:
            frame_idx, world = poses[local_idx]
            rel = to_pelvis_relative(world)
            base = Pose3D(rel.coords @ _WORLD_TO_CAMERA.T, FRAME_PELVIS)
            try:
                yaw0 = compute_yaw(base)
            except PoseError:
                skipped += len(cfg.viewpoints)
                continue
            for k in cfg.viewpoints:
                target = ViewpointClass(k).angle_deg
                rotated = rotate_character(base, wrap_angle_deg(target - yaw0))
                position = np.array([
                    rng.uniform(*cfg.lateral_range),
                    rng.uniform(*cfg.vertical_range),
                    rng.uniform(*cfg.depth_range),
                ])
                cam_pose = Pose3D(rotated.coords + position, FRAME_CAMERA)
                try:
                    p2d = project(cam_pose, cam)
                except ProjectionError:
                    skipped += 1
                    continue
                uv = p2d.coords
                if (uv[:, 0] < 0).any() or (uv[:, 0] > 2 * cam.cx).any() \
                        or (uv[:, 1] < 0).any() or (uv[:, 1] > 2 * cam.cy).any():
                    skipped += 1
                    continue
                if cfg.noise_sigma > 0:
                    uv = uv + cfg.noise_sigma * rng.standard_normal(uv.shape)
                records.append(PoseRecord(
                    id=f"{name}/{frame_idx}/vp{k}",
                    subject=name,
                    activity=activity,
                    joints3d=cam_pose.coords,
                    joints2d=uv,
                    yaw_deg=compute_yaw(cam_pose),
                ))
    return records, skipped


def split_dataset(records, ratio: float, mode: str = "random", seed: int = 0):
    """Disjoint, exhaustive train/test split.

    by_sequence keeps all records of one subject on the same side, assigning
    shuffled sequences to the training side until it holds `ratio` of the
    records.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    if mode not in ("random", "by_sequence"):
        raise ValueError(f"unknown split mode {mode!r}")
    records = list(records)
    n = len(records)
    rng = np.random.default_rng(seed)
    if mode == "random":
        perm = rng.permutation(n)
        n_train = int(round(n * ratio))
        train = [records[i] for i in sorted(perm[:n_train])]
        test = [records[i] for i in sorted(perm[n_train:])]
    else:
        sequences = sorted({rec.subject for rec in records})
        order = list(rng.permutation(len(sequences)))
        train_seqs = set()
        count = 0
        for si in order:
            if count >= ratio * n:
                break
            train_seqs.add(sequences[si])
            count += sum(1 for rec in records if rec.subject == sequences[si])
        train = [rec for rec in records if rec.subject in train_seqs]
        test = [rec for rec in records if rec.subject not in train_seqs]
    if not train or not test:
        raise ValueError("degenerate split: one side is empty")
    return train, test
