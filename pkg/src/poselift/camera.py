"""Pinhole projection, character rotation, yaw, viewpoint binning and features.

Camera frame convention: x right, y down, z forward (into the scene), all in
millimeters. Yaw is measured from the shoulder line so that a person facing
the camera squarely has yaw 0, growing counter-clockwise when seen from above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PoseError, ProjectionError
from .skeleton import (
    FRAME_CAMERA,
    FRAME_PELVIS,
    JointId,
    Pose2D,
    Pose3D,
)

NUM_VIEWPOINTS = 8
VIEWPOINT_STEP_DEG = 45.0
DEFAULT_VIEWPOINT_SCALE = 100.0
DEFAULT_BIN_HALF_WIDTH_DEG = 5.0


@dataclass(frozen=True)
class Camera:
    """Pinhole intrinsics: focal length and principal point in pixels."""

    f: float
    cx: float
    cy: float

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError("focal length must be positive")


@dataclass(frozen=True)
class ViewpointClass:
    """One of the 8 orientation bins; class k covers center angle 45*(k-1)."""

    k: int

    def __post_init__(self):
        if not 1 <= self.k <= NUM_VIEWPOINTS:
            raise ValueError(f"viewpoint class must be in 1..{NUM_VIEWPOINTS}, got {self.k}")

    @property
    def angle_deg(self) -> float:
        return VIEWPOINT_STEP_DEG * (self.k - 1)


def wrap_angle_deg(angle: float) -> float:
    """Wrap an angle to (-180, 180]."""
    wrapped = (angle + 180.0) % 360.0 - 180.0
    if wrapped == -180.0:
        wrapped = 180.0
    return wrapped


def project(pose: Pose3D, cam: Camera) -> Pose2D:
    """Pinhole projection of a camera-frame pose; every joint needs z > 0."""
    if pose.frame != FRAME_CAMERA:
        raise PoseError("projection requires a camera-frame pose")
    z = pose.coords[:, 2]
    bad = np.nonzero(z <= 0)[0]
    if bad.size:
        raise ProjectionError(
            f"joint {JointId(bad[0]).name} has non-positive depth {z[bad[0]]:g}")
    u = cam.f * pose.coords[:, 0] / z + cam.cx
    v = cam.f * pose.coords[:, 1] / z + cam.cy
    return Pose2D(np.column_stack([u, v]))


def _yaw_rotation(angle_deg: float) -> np.ndarray:
    # Rotation about the vertical (y) axis chosen so that rotating a pose by
    # `a` degrees adds `a` to its shoulder-line yaw.
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, -s],
                     [0.0, 1.0, 0.0],
                     [s, 0.0, c]])


def rotate_character(pose: Pose3D, angle_deg: float) -> Pose3D:
    """Rotate a pose about the vertical axis through its pelvis."""
    rot = _yaw_rotation(angle_deg)
    pelvis = pose.coords[JointId.Pelvis]
    coords = (pose.coords - pelvis) @ rot.T + pelvis
    if pose.frame == FRAME_PELVIS:
        coords[JointId.Pelvis] = 0.0  # exact, not just up to rounding
    return Pose3D(coords, pose.frame)


def compute_yaw(pose: Pose3D) -> float:
    """Yaw of the shoulder line, in [0, 360): frontal is 0, quarter turn 90."""
    d = pose[JointId.LShoulder] - pose[JointId.RShoulder]
    if math.hypot(d[0], d[2]) < 1.0:
        raise PoseError("degenerate shoulder configuration (horizontal span < 1 mm)")
    return math.degrees(math.atan2(d[2], d[0])) % 360.0


def bin_yaw(yaw_deg: float, mode: str = "strict",
            half_width_deg: float = DEFAULT_BIN_HALF_WIDTH_DEG):
    """Discretize a yaw angle into one of the 8 viewpoint classes.

    strict: return the class whose center lies within +-half_width of the
    yaw, or None when no center is that close (the sample is discarded).
    nearest: always return the closest class, ties toward smaller k.
    """
    if mode not in ("strict", "nearest"):
        raise ValueError(f"unknown binning mode {mode!r}")
    best_k, best_err = None, None
    for k in range(1, NUM_VIEWPOINTS + 1):
        center = VIEWPOINT_STEP_DEG * (k - 1)
        err = abs(wrap_angle_deg(yaw_deg - center))
        if best_err is None or err < best_err:
            best_k, best_err = k, err
    if mode == "strict" and best_err > half_width_deg:
        return None
    return ViewpointClass(best_k)


def encode_viewpoint(cls: ViewpointClass, scale: float = DEFAULT_VIEWPOINT_SCALE) -> np.ndarray:
    """Scaled (sin, cos) encoding of a viewpoint class center angle."""
    if not scale > 0:
        raise ValueError("viewpoint scale must be positive")
    theta = math.radians(cls.angle_deg)
    return np.array([scale * math.sin(theta), scale * math.cos(theta)])


def build_feature(p2d: Pose2D, encoding=None) -> np.ndarray:
    """Regression input: pelvis-centered flattened 2D joints, encoding last.

    With an encoding the vector has 17*2 + 2 = 36 entries; without (the
    viewpoint-free ablation) it has 34.
    """
    if p2d.visibility is not None and not p2d.visibility.all():
        missing = np.nonzero(~p2d.visibility)[0]
        raise PoseError(f"joint {JointId(missing[0]).name} is not visible")
    centered = p2d.coords - p2d.coords[JointId.Pelvis]
    flat = centered.ravel()
    if encoding is None:
        return flat.copy()
    encoding = np.asarray(encoding, dtype=float)
    if encoding.shape != (2,):
        raise PoseError(f"viewpoint encoding must be a 2-vector, got {encoding.shape}")
    return np.concatenate([flat, encoding])


def feature_dim(with_viewpoint: bool) -> int:
    return 36 if with_viewpoint else 34
