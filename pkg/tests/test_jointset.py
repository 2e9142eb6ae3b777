import numpy as np
import pytest

from conftest import random_camera_pose
from poselift.errors import FitError, LayoutMismatchError
from poselift.jointset import (
    load_regressor,
    nn_pose,
    predict_alljoints,
    predict_pose,
    save_alljoints,
    save_regressor,
    train_alljoints,
    train_jointset,
)
from poselift.skeleton import (
    DEFAULT_PARTITION,
    FRAME_CAMERA,
    FRAME_PELVIS,
    JointSetId,
    select_joint_set,
    to_pelvis_relative,
)
from poselift.tgp import Hyperparams

HP = Hyperparams(k_init=2, max_iter=30)


def make_samples(n=25, seed=0, feature_dim=8):
    """Synthetic (feature, pelvis-relative pose) pairs with a learnable link."""
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        pose = to_pelvis_relative(random_camera_pose(rng))
        feat = np.concatenate([pose.coords[1:feature_dim // 2 + 1, 0],
                               pose.coords[1:feature_dim // 2 + 1, 1]])
        feat = feat + 0.5 * rng.normal(size=feature_dim)
        samples.append((feat, pose))
    return samples


class TestTrainJointset:
    def test_three_models_with_expected_output_dims(self):
        reg = train_jointset(make_samples(), HP)
        assert set(reg.models) == set(JointSetId)
        assert reg.models[JointSetId.RightHand].X.shape[1] == 9
        assert reg.models[JointSetId.LeftHand].X.shape[1] == 9
        assert reg.models[JointSetId.TorsoLegs].X.shape[1] == 30

    def test_targets_match_partition_selection(self):
        samples = make_samples(n=10)
        reg = train_jointset(samples, HP)
        want = np.array([select_joint_set(p, JointSetId.RightHand, DEFAULT_PARTITION)
                         for _, p in samples])
        assert np.array_equal(reg.models[JointSetId.RightHand].X, want)

    def test_rejects_non_pelvis_frame(self):
        rng = np.random.default_rng(1)
        pose = random_camera_pose(rng)
        assert pose.frame == FRAME_CAMERA
        with pytest.raises(ValueError, match="pelvis"):
            train_jointset([(np.zeros(4), pose)] * 3, HP)

    def test_failure_names_the_joint_set(self):
        samples = make_samples(n=1)  # too few rows for any fit
        with pytest.raises(FitError, match="right_hand"):
            train_jointset(samples, HP)

    def test_per_set_hyper_override(self):
        override = Hyperparams(gamma_x=0.123, k_init=2, max_iter=30)
        reg = train_jointset(make_samples(n=10), HP,
                             per_set_hyper={JointSetId.LeftHand: override})
        assert reg.models[JointSetId.LeftHand].hyper.gamma_x == 0.123
        assert reg.models[JointSetId.RightHand].hyper.gamma_x != 0.123


class TestPredict:
    def test_pose_is_pelvis_relative_and_finite(self):
        samples = make_samples()
        reg = train_jointset(samples, HP)
        pose = predict_pose(reg, samples[0][0])
        assert pose.frame == FRAME_PELVIS
        assert not pose.coords[0].any()
        assert np.isfinite(pose.coords).all()

    def test_merges_independent_subpredictions(self):
        from poselift import tgp
        samples = make_samples(n=15, seed=2)
        reg = train_jointset(samples, HP)
        feat = samples[3][0]
        pose = predict_pose(reg, feat)
        for set_id in JointSetId:
            part = tgp.predict(reg.models[set_id], feat).x
            assert np.array_equal(
                select_joint_set(pose, set_id, DEFAULT_PARTITION), part)

    def test_feature_dim_mismatch(self):
        reg = train_jointset(make_samples(), HP)
        with pytest.raises(LayoutMismatchError):
            predict_pose(reg, np.zeros(5))

    def test_alljoints_round_trip(self):
        samples = make_samples(n=15, seed=3)
        model = train_alljoints(samples, HP)
        assert model.X.shape[1] == 48
        pose = predict_alljoints(model, samples[0][0])
        assert pose.frame == FRAME_PELVIS
        with pytest.raises(LayoutMismatchError):
            predict_alljoints(model, np.zeros(3))

    def test_nn_pose_returns_exact_training_pose(self):
        samples = make_samples(n=12, seed=4)
        reg = train_jointset(samples, HP)
        model = train_alljoints(samples, HP)
        feat, pose = samples[5]
        for via in (nn_pose(reg, feat), nn_pose(model, feat)):
            assert via.frame == FRAME_PELVIS
            assert np.allclose(via.coords, pose.coords, atol=1e-12)


class TestPersistence:
    def test_jointset_directory_round_trip(self, tmp_path):
        samples = make_samples(n=12, seed=5)
        reg = train_jointset(samples, HP, feature_layout={"viewpoint": "gt"})
        save_regressor(reg, tmp_path / "model")
        mode, loaded, manifest = load_regressor(tmp_path / "model")
        assert mode == "jointset"
        assert manifest["feature_layout"] == {"viewpoint": "gt"}
        assert loaded.partition == DEFAULT_PARTITION
        feat = samples[0][0]
        assert np.array_equal(predict_pose(loaded, feat).coords,
                              predict_pose(reg, feat).coords)

    def test_alljoints_directory_round_trip(self, tmp_path):
        samples = make_samples(n=12, seed=6)
        model = train_alljoints(samples, HP)
        save_alljoints(model, tmp_path / "model")
        mode, loaded, manifest = load_regressor(tmp_path / "model")
        assert mode == "alljoints"
        feat = samples[1][0]
        assert np.array_equal(predict_alljoints(loaded, feat).coords,
                              predict_alljoints(model, feat).coords)

    def test_bad_manifest_mode(self, tmp_path):
        samples = make_samples(n=10, seed=7)
        save_alljoints(train_alljoints(samples, HP), tmp_path / "model")
        manifest = (tmp_path / "model" / "manifest.json")
        manifest.write_text(manifest.read_text().replace("alljoints", "nonsense"))
        with pytest.raises(ValueError, match="nonsense"):
            load_regressor(tmp_path / "model")
