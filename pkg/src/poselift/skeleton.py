"""Canonical 17-joint skeleton: joint ids, pose containers, joint-set partition.

Joint naming and ordering follow the Human3.6M convention with the pelvis
at index 0. All poses are stored as float64 arrays in millimeters.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .errors import PoseError


class JointId(IntEnum):
    Pelvis = 0
    RHip = 1
    RKnee = 2
    RAnkle = 3
    LHip = 4
    LKnee = 5
    LAnkle = 6
    Spine = 7
    Thorax = 8
    Neck = 9
    Head = 10
    LShoulder = 11
    LElbow = 12
    LWrist = 13
    RShoulder = 14
    RElbow = 15
    RWrist = 16


NUM_JOINTS = 17

FRAME_WORLD = "world"
FRAME_CAMERA = "camera"
FRAME_PELVIS = "pelvis-relative"
FRAMES = (FRAME_WORLD, FRAME_CAMERA, FRAME_PELVIS)


class JointSetId(Enum):
    RightHand = "right_hand"
    LeftHand = "left_hand"
    TorsoLegs = "torso_legs"


@dataclass(frozen=True)
class JointPartition:
    """Assignment of the 16 non-pelvis joints to the three joint sets.

    The three sets must be pairwise disjoint and together cover every
    non-pelvis joint. Within a set, joints are kept in canonical JointId
    order regardless of the order given.
    """

    sets: dict

    def __post_init__(self):
        cleaned = {}
        for set_id in JointSetId:
            if set_id not in self.sets:
                raise ValueError(f"partition missing joint set {set_id.value}")
            members = tuple(sorted(self.sets[set_id], key=int))
            if JointId.Pelvis in members:
                raise ValueError("pelvis cannot belong to a joint set")
            cleaned[set_id] = members
        all_members = [j for m in cleaned.values() for j in m]
        if len(all_members) != len(set(all_members)):
            raise ValueError("joint sets overlap")
        expected = {j for j in JointId if j != JointId.Pelvis}
        if set(all_members) != expected:
            missing = sorted(expected - set(all_members), key=int)
            raise ValueError(f"joint sets do not cover: {[j.name for j in missing]}")
        object.__setattr__(self, "sets", cleaned)

    def joints(self, set_id: JointSetId) -> tuple:
        return self.sets[set_id]

    def dim(self, set_id: JointSetId) -> int:
        return 3 * len(self.sets[set_id])

    def to_config(self) -> dict:
        return {s.value: [j.name for j in m] for s, m in self.sets.items()}

    @classmethod
    def from_config(cls, cfg: dict) -> "JointPartition":
        sets = {s: tuple(JointId[name] for name in cfg[s.value]) for s in JointSetId}
        return cls(sets)


DEFAULT_PARTITION = JointPartition({
    JointSetId.RightHand: (JointId.RShoulder, JointId.RElbow, JointId.RWrist),
    JointSetId.LeftHand: (JointId.LShoulder, JointId.LElbow, JointId.LWrist),
    JointSetId.TorsoLegs: (
        JointId.RHip, JointId.RKnee, JointId.RAnkle,
        JointId.LHip, JointId.LKnee, JointId.LAnkle,
        JointId.Spine, JointId.Thorax, JointId.Neck, JointId.Head,
    ),
})


def _check_coords(coords, shape, what):
    arr = np.array(coords, dtype=float)
    if arr.shape != shape:
        raise PoseError(f"{what} must have shape {shape}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise PoseError(f"{what} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pose3D:
    """17 joints, 3D coordinates in millimeters, tagged with a frame."""

    coords: np.ndarray
    frame: str

    def __post_init__(self):
        arr = _check_coords(self.coords, (NUM_JOINTS, 3), "3D pose")
        if self.frame not in FRAMES:
            raise PoseError(f"unknown frame {self.frame!r}")
        if self.frame == FRAME_PELVIS and arr[JointId.Pelvis].any():
            raise PoseError("pelvis-relative pose must have pelvis at the origin")
        object.__setattr__(self, "coords", arr)

    def __getitem__(self, joint: JointId) -> np.ndarray:
        return self.coords[int(joint)]

    def __eq__(self, other):
        if not isinstance(other, Pose3D):
            return NotImplemented
        return self.frame == other.frame and np.array_equal(self.coords, other.coords)


@dataclass(frozen=True, eq=False)
class Pose2D:
    """17 joints, 2D pixel coordinates, with an optional visibility flag."""

    coords: np.ndarray
    visibility: np.ndarray = None

    def __post_init__(self):
        arr = _check_coords(self.coords, (NUM_JOINTS, 2), "2D pose")
        object.__setattr__(self, "coords", arr)
        if self.visibility is not None:
            vis = np.array(self.visibility, dtype=bool)
            if vis.shape != (NUM_JOINTS,):
                raise PoseError("visibility must have one flag per joint")
            vis.setflags(write=False)
            object.__setattr__(self, "visibility", vis)

    def __getitem__(self, joint: JointId) -> np.ndarray:
        return self.coords[int(joint)]

    def __eq__(self, other):
        if not isinstance(other, Pose2D):
            return NotImplemented
        if not np.array_equal(self.coords, other.coords):
            return False
        if (self.visibility is None) != (other.visibility is None):
            return False
        return self.visibility is None or np.array_equal(self.visibility, other.visibility)


def to_pelvis_relative(pose: Pose3D) -> Pose3D:
    """Translate a pose so the pelvis sits at the origin.

    Idempotent: a pelvis-relative pose passes through unchanged.
    """
    if pose.frame == FRAME_PELVIS:
        return pose
    coords = pose.coords - pose.coords[JointId.Pelvis]
    return Pose3D(coords, FRAME_PELVIS)


def select_joint_set(pose: Pose3D, set_id: JointSetId,
                     partition: JointPartition = DEFAULT_PARTITION) -> np.ndarray:
    """Flat coordinate vector of the joints assigned to one set."""
    if pose.frame != FRAME_PELVIS:
        raise PoseError("joint-set selection requires a pelvis-relative pose")
    idx = [int(j) for j in partition.joints(set_id)]
    return pose.coords[idx].ravel().copy()


def merge_joint_sets(rh, lh, tl,
                     partition: JointPartition = DEFAULT_PARTITION) -> Pose3D:
    """Inverse of select_joint_set over the three sets; pelvis stays at 0."""
    coords = np.zeros((NUM_JOINTS, 3))
    for set_id, vec in ((JointSetId.RightHand, rh),
                       (JointSetId.LeftHand, lh),
                       (JointSetId.TorsoLegs, tl)):
        vec = np.asarray(vec, dtype=float)
        want = partition.dim(set_id)
        if vec.shape != (want,):
            raise PoseError(
                f"{set_id.value} vector must have dimension {want}, got {vec.shape}")
        idx = [int(j) for j in partition.joints(set_id)]
        coords[idx] = vec.reshape(-1, 3)
    return Pose3D(coords, FRAME_PELVIS)


def flatten(pose: Pose3D) -> np.ndarray:
    """Joint-major (x, y, z) flattening to a 51-vector."""
    return pose.coords.ravel().copy()


def unflatten(vec, frame: str = FRAME_PELVIS) -> Pose3D:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (3 * NUM_JOINTS,):
        raise PoseError(f"pose vector must have dimension {3 * NUM_JOINTS}, got {vec.shape}")
    return Pose3D(vec.reshape(NUM_JOINTS, 3), frame)
