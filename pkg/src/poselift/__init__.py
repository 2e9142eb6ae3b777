"""3D human pose reconstruction from 2D joints and camera viewpoint."""

from .skeleton import (
    DEFAULT_PARTITION,
    JointId,
    JointPartition,
    JointSetId,
    Pose2D,
    Pose3D,
    flatten,
    merge_joint_sets,
    select_joint_set,
    to_pelvis_relative,
    unflatten,
)
from .camera import (
    Camera,
    ViewpointClass,
    bin_yaw,
    build_feature,
    compute_yaw,
    encode_viewpoint,
    project,
    rotate_character,
)
from .records import PoseRecord, read_records, write_records
from .tgp import Hyperparams, TgpModel, fit, predict

__version__ = "0.1.0"
