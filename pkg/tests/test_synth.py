import numpy as np
import pytest

import bvhgen
from poselift.bvh import IDENTITY_JOINT_MAP, parse_bvh
from poselift.camera import Camera, ViewpointClass, compute_yaw, project
from poselift.records import read_records, write_records
from poselift.skeleton import FRAME_CAMERA, Pose3D
from poselift.synth import SynthConfig, generate_dataset, split_dataset

CAM = Camera(f=1000.0, cx=500.0, cy=500.0)


@pytest.fixture(scope="module")
def corpus():
    docs = []
    for i in range(3):
        text = bvhgen.make_h36m_bvh(n_upright=12, n_lying=2, seed=100 + i)
        docs.append((f"seq{i}", parse_bvh(text)))
    return docs


def test_yaw_labels_hit_class_centers_exactly(corpus):
    records, _ = generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM,
                                  SynthConfig(upright_mode="none"), seed=0)
    assert records
    for rec in records:
        k = int(rec.id.rsplit("vp", 1)[1])
        want = ViewpointClass(k).angle_deg
        assert abs(rec.yaw_deg - want) % 360.0 < 1e-6 or \
            abs(abs(rec.yaw_deg - want) % 360.0 - 360.0) < 1e-6


def test_all_eight_viewpoints_present(corpus):
    records, _ = generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM,
                                  SynthConfig(upright_mode="none"), seed=0)
    ks = {int(rec.id.rsplit("vp", 1)[1]) for rec in records}
    assert ks == set(range(1, 9))


def test_noise_free_2d_is_exact_projection(corpus):
    records, _ = generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM,
                                  SynthConfig(upright_mode="none"), seed=0)
    for rec in records[:20]:
        pose = Pose3D(rec.joints3d, FRAME_CAMERA)
        assert np.array_equal(rec.joints2d, project(pose, CAM).coords)


def test_depth_and_placement_ranges(corpus):
    cfg = SynthConfig(upright_mode="none")
    records, _ = generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM, cfg, seed=0)
    for rec in records:
        pelvis = rec.joints3d.mean(axis=0)  # body centroid near placement point
        assert 1500.0 < pelvis[2] < 6500.0


def test_yaw_labels_match_recomputation(corpus):
    records, _ = generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM,
                                  SynthConfig(upright_mode="none"), seed=0)
    for rec in records[:20]:
        pose = Pose3D(rec.joints3d, FRAME_CAMERA)
        assert rec.yaw_deg == compute_yaw(pose)


def test_byte_identical_determinism(corpus, tmp_path):
    cfg = SynthConfig(noise_sigma=2.0, upright_mode="none")
    a, _ = generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM, cfg, seed=7)
    b, _ = generate_dataset(list(reversed(corpus)), IDENTITY_JOINT_MAP, 1.0, CAM, cfg, seed=7)
    write_records(tmp_path / "a.jsonl", a)
    write_records(tmp_path / "b.jsonl", b)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    c, _ = generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM, cfg, seed=8)
    write_records(tmp_path / "c.jsonl", c)
    assert (tmp_path / "a.jsonl").read_bytes() != (tmp_path / "c.jsonl").read_bytes()


def test_noise_perturbs_2d_but_not_3d(corpus):
    noisy, _ = generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM,
                                SynthConfig(noise_sigma=5.0, upright_mode="none"),
                                seed=3)
    assert noisy
    for rec in noisy[:20]:
        exact = project(Pose3D(rec.joints3d, FRAME_CAMERA), CAM).coords
        deltas = rec.joints2d - exact
        assert (deltas != 0).all()
        assert np.abs(deltas).max() < 5.0 * 6  # a few sigma, not structural


def test_upright_pose_mode_drops_lying_frames():
    text = bvhgen.make_h36m_bvh(n_upright=20, n_lying=5, seed=42)
    doc = parse_bvh(text)
    kept, _ = generate_dataset([("s", doc)], IDENTITY_JOINT_MAP, 1.0, CAM,
                               SynthConfig(upright_mode="pose",
                                           viewpoints=(1,)), seed=0)
    nofilter, _ = generate_dataset([("s", doc)], IDENTITY_JOINT_MAP, 1.0, CAM,
                                   SynthConfig(upright_mode="none",
                                               viewpoints=(1,)), seed=0)
    kept_frames = {int(rec.id.split("/")[1]) for rec in kept}
    all_frames = {int(rec.id.split("/")[1]) for rec in nofilter}
    # lying frames are the last 5 of the sequence
    lying = {f for f in all_frames if f >= 20}
    assert lying and not (kept_frames & lying)
    assert kept_frames == all_frames - lying


def test_frame_stride_and_cap(corpus):
    cfg = SynthConfig(upright_mode="none", viewpoints=(1,), frame_stride=3,
                      max_frames=2)
    records, _ = generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM, cfg, seed=0)
    frames = sorted({int(rec.id.split("/")[1]) for rec in records})
    assert frames == [0, 3]


def test_validation_errors(corpus):
    with pytest.raises(ValueError):
        generate_dataset([], IDENTITY_JOINT_MAP, 1.0, CAM)
    with pytest.raises(ValueError):
        generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM, SynthConfig(viewpoints=(0,)))
    with pytest.raises(ValueError):
        generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM, SynthConfig(upright_mode="bogus"))


def test_records_round_trip_through_jsonl(corpus, tmp_path):
    records, _ = generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM,
                                  SynthConfig(upright_mode="none",
                                              viewpoints=(1, 5)), seed=0)
    path = tmp_path / "records.jsonl"
    write_records(path, records)
    loaded = read_records(path)
    assert len(loaded) == len(records)
    assert loaded[0].id == records[0].id
    assert np.array_equal(loaded[0].joints3d, records[0].joints3d)


class TestSplit:
    def make(self, corpus):
        records, _ = generate_dataset(corpus, IDENTITY_JOINT_MAP, 1.0, CAM,
                                      SynthConfig(upright_mode="none",
                                                  viewpoints=(1,)), seed=0)
        return records

    def test_random_split_partition(self, corpus):
        records = self.make(corpus)
        train, test = split_dataset(records, 0.8, "random", seed=1)
        assert len(train) + len(test) == len(records)
        assert {r.id for r in train}.isdisjoint({r.id for r in test})
        assert len(train) == round(0.8 * len(records))

    def test_by_sequence_keeps_subjects_together(self, corpus):
        records = self.make(corpus)
        train, test = split_dataset(records, 0.6, "by_sequence", seed=1)
        assert {r.subject for r in train}.isdisjoint({r.subject for r in test})
        assert len(train) + len(test) == len(records)

    def test_split_determinism(self, corpus):
        records = self.make(corpus)
        a = split_dataset(records, 0.7, "random", seed=5)
        b = split_dataset(records, 0.7, "random", seed=5)
        assert [r.id for r in a[0]] == [r.id for r in b[0]]

    def test_bad_arguments(self, corpus):
        records = self.make(corpus)
        with pytest.raises(ValueError):
            split_dataset(records, 0.0)
        with pytest.raises(ValueError):
            split_dataset(records, 0.5, "nope")
