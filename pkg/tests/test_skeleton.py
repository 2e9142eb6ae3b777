import numpy as np
import pytest

from poselift.errors import PoseError
from poselift.skeleton import (
    DEFAULT_PARTITION,
    FRAME_CAMERA,
    FRAME_PELVIS,
    JointId,
    JointPartition,
    JointSetId,
    NUM_JOINTS,
    Pose3D,
    flatten,
    merge_joint_sets,
    select_joint_set,
    to_pelvis_relative,
    unflatten,
)


def make_pose(rng, frame=FRAME_CAMERA):
    coords = rng.normal(0.0, 400.0, size=(NUM_JOINTS, 3))
    coords[:, 2] += 3000.0
    return Pose3D(coords, frame)


def random_relative(rng):
    return to_pelvis_relative(make_pose(rng))


class TestJointIds:
    def test_seventeen_joints_with_pelvis_zero(self):
        assert len(JointId) == NUM_JOINTS == 17
        assert JointId.Pelvis == 0
        assert sorted(int(j) for j in JointId) == list(range(17))


class TestPose3D:
    def test_rejects_nonfinite(self):
        coords = np.zeros((17, 3))
        coords[5, 1] = np.nan
        with pytest.raises(PoseError):
            Pose3D(coords, FRAME_CAMERA)

    def test_rejects_offset_pelvis_in_relative_frame(self):
        coords = np.ones((17, 3))
        with pytest.raises(PoseError):
            Pose3D(coords, FRAME_PELVIS)

    def test_immutable(self):
        pose = Pose3D(np.zeros((17, 3)), FRAME_CAMERA)
        with pytest.raises(ValueError):
            pose.coords[0, 0] = 1.0


class TestToPelvisRelative:
    def test_subtracts_pelvis(self):
        coords = np.zeros((17, 3))
        coords[:, 2] = 3000
        coords[JointId.Pelvis] = (100, 200, 3000)
        coords[JointId.Head] = (100, -500, 3000)
        rel = to_pelvis_relative(Pose3D(coords, FRAME_CAMERA))
        assert rel.frame == FRAME_PELVIS
        assert np.array_equal(rel[JointId.Pelvis], [0, 0, 0])
        assert np.array_equal(rel[JointId.Head], [0, -700, 0])

    def test_identity_on_centered_pose(self):
        rng = np.random.default_rng(0)
        rel = random_relative(rng)
        assert to_pelvis_relative(rel) == rel

    def test_preserves_pairwise_distances(self):
        rng = np.random.default_rng(1)
        pose = make_pose(rng)
        rel = to_pelvis_relative(pose)
        before = np.linalg.norm(
            pose.coords[:, None, :] - pose.coords[None, :, :], axis=2)
        after = np.linalg.norm(
            rel.coords[:, None, :] - rel.coords[None, :, :], axis=2)
        assert np.allclose(before, after, atol=1e-9)


class TestPartition:
    def test_default_partition_covers_non_pelvis_joints(self):
        members = [j for s in JointSetId for j in DEFAULT_PARTITION.joints(s)]
        assert len(members) == 16
        assert set(members) == {j for j in JointId if j != JointId.Pelvis}

    def test_set_dimensions(self):
        assert DEFAULT_PARTITION.dim(JointSetId.RightHand) == 9
        assert DEFAULT_PARTITION.dim(JointSetId.LeftHand) == 9
        assert DEFAULT_PARTITION.dim(JointSetId.TorsoLegs) == 30

    def test_rejects_overlap(self):
        with pytest.raises(ValueError, match="overlap"):
            JointPartition({
                JointSetId.RightHand: (JointId.RShoulder, JointId.RElbow,
                                       JointId.RWrist),
                JointSetId.LeftHand: (JointId.LShoulder, JointId.LElbow,
                                      JointId.RWrist),
                JointSetId.TorsoLegs: tuple(
                    j for j in JointId
                    if j not in (JointId.Pelvis, JointId.RShoulder,
                                 JointId.RElbow, JointId.RWrist,
                                 JointId.LShoulder, JointId.LElbow)),
            })

    def test_rejects_missing_joint(self):
        with pytest.raises(ValueError, match="cover"):
            JointPartition({
                JointSetId.RightHand: (JointId.RShoulder, JointId.RElbow),
                JointSetId.LeftHand: (JointId.LShoulder, JointId.LElbow,
                                      JointId.LWrist),
                JointSetId.TorsoLegs: tuple(
                    j for j in JointId
                    if j not in (JointId.Pelvis, JointId.RShoulder,
                                 JointId.RElbow, JointId.RWrist,
                                 JointId.LShoulder, JointId.LElbow,
                                 JointId.LWrist)),
            })

    def test_config_round_trip(self):
        cfg = DEFAULT_PARTITION.to_config()
        assert JointPartition.from_config(cfg).sets == DEFAULT_PARTITION.sets


class TestSelectMerge:
    def test_right_hand_selection(self):
        rng = np.random.default_rng(2)
        rel = random_relative(rng)
        vec = select_joint_set(rel, JointSetId.RightHand)
        assert vec.shape == (9,)
        expected = np.concatenate([rel[JointId.RShoulder], rel[JointId.RElbow],
                                   rel[JointId.RWrist]])
        assert np.array_equal(vec, expected)

    def test_left_hand_dimension(self):
        rng = np.random.default_rng(3)
        assert select_joint_set(random_relative(rng), JointSetId.LeftHand).shape == (9,)

    def test_torso_legs_dimension(self):
        rng = np.random.default_rng(4)
        assert select_joint_set(random_relative(rng), JointSetId.TorsoLegs).shape == (30,)

    def test_requires_relative_frame(self):
        rng = np.random.default_rng(5)
        with pytest.raises(PoseError):
            select_joint_set(make_pose(rng), JointSetId.RightHand)

    def test_merge_zero_inputs(self):
        pose = merge_joint_sets(np.zeros(9), np.zeros(9), np.zeros(30))
        assert not pose.coords.any()

    def test_merge_dimension_mismatch(self):
        with pytest.raises(PoseError):
            merge_joint_sets(np.zeros(8), np.zeros(9), np.zeros(30))

    def test_round_trip_100_random_poses(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            rel = random_relative(rng)
            back = merge_joint_sets(
                select_joint_set(rel, JointSetId.RightHand),
                select_joint_set(rel, JointSetId.LeftHand),
                select_joint_set(rel, JointSetId.TorsoLegs))
            assert back == rel  # bit-exact


class TestFlatten:
    def test_dimension(self):
        rng = np.random.default_rng(7)
        assert flatten(random_relative(rng)).shape == (51,)

    def test_round_trip(self):
        rng = np.random.default_rng(8)
        pose = make_pose(rng)
        assert unflatten(flatten(pose), pose.frame) == pose

    def test_relative_pose_has_zero_prefix(self):
        rng = np.random.default_rng(9)
        assert not flatten(random_relative(rng))[:3].any()

    def test_wrong_dimension(self):
        with pytest.raises(PoseError):
            unflatten(np.zeros(50))
