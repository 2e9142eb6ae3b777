"""MPJPE metrics and the ablation harness.

The harness trains models over a grid of conditions (viewpoint features
on/off, 2D noise level, joint-set vs all-joint regression) and reports
MPJPE, per-joint errors, and the hand/torso-leg subset means. Noise rows
reuse the clean-trained model and perturb only the test-time 2D joints,
with one fixed noise draw per sample scaled by sigma, so that sweep rows
differ only in noise magnitude.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import jointset, tgp
from .camera import (
    DEFAULT_VIEWPOINT_SCALE,
    ViewpointClass,
    bin_yaw,
    build_feature,
    compute_yaw,
    encode_viewpoint,
)
from .errors import PoseError
from .skeleton import (
    DEFAULT_PARTITION,
    FRAME_PELVIS,
    JointId,
    JointPartition,
    NUM_JOINTS,
    Pose2D,
    Pose3D,
    to_pelvis_relative,
)

HAND_JOINTS = (JointId.RShoulder, JointId.RElbow, JointId.RWrist,
               JointId.LShoulder, JointId.LElbow, JointId.LWrist)
TORSO_LEG_JOINTS = tuple(j for j in JointId
                         if j != JointId.Pelvis and j not in HAND_JOINTS)

REPORT_FORMAT_VERSION = 1


def mpjpe(est: Pose3D, gt: Pose3D) -> float:
    """Mean Euclidean joint error in millimeters."""
    if est.frame != gt.frame:
        raise PoseError(
            f"MPJPE expects both poses in the same frame, "
            f"got {est.frame!r} vs {gt.frame!r}")
    return float(np.linalg.norm(est.coords - gt.coords, axis=1).mean())


def per_joint_error(est_poses, gt_poses) -> np.ndarray:
    """Per-joint mean error over a set of pose pairs; shape (17,)."""
    est_poses, gt_poses = list(est_poses), list(gt_poses)
    if len(est_poses) != len(gt_poses):
        raise ValueError("pose lists differ in length")
    if not est_poses:
        raise ValueError("empty pose set")
    errors = np.zeros(NUM_JOINTS)
    for est, gt in zip(est_poses, gt_poses):
        if est.frame != FRAME_PELVIS or gt.frame != FRAME_PELVIS:
            raise PoseError("per-joint error expects pelvis-relative poses")
        errors += np.linalg.norm(est.coords - gt.coords, axis=1)
    return errors / len(est_poses)


def _viewpoint_encoding(record, mode, scale, bin_mode, labels=None):
    if mode == "none":
        return None
    if mode == "file":
        if labels is None or record.id not in labels:
            raise PoseError(f"no viewpoint label for record {record.id}")
        label = labels[record.id]
        if not isinstance(label, ViewpointClass):
            label = ViewpointClass(int(label))
        return encode_viewpoint(label, scale)
    yaw = record.yaw_deg
    if yaw is None:
        yaw = compute_yaw(record.pose3d())
    cls = bin_yaw(yaw, mode=bin_mode)
    if cls is None:
        return None  # strict mode discards the sample
    return encode_viewpoint(cls, scale)


def build_features(records, viewpoint: str = "gt",
                   scale: float = DEFAULT_VIEWPOINT_SCALE,
                   bin_mode: str = "strict", labels=None,
                   noise2d=None):
    """Feature matrix plus the indices of the records actually used.

    viewpoint: gt (bin the record's yaw), none (34-dim features), or file
    (labels maps record id -> ViewpointClass). Strict binning drops records
    whose yaw is far from every class center. noise2d, when given, is an
    (n, 17, 2) array added to the raw 2D joints before centering.
    """
    features, kept = [], []
    for i, rec in enumerate(records):
        if rec.joints2d is None:
            raise PoseError(f"record {rec.id} has no 2D joints")
        enc = _viewpoint_encoding(rec, viewpoint, scale, bin_mode, labels)
        if enc is None and viewpoint != "none":
            continue
        uv = rec.joints2d if noise2d is None else rec.joints2d + noise2d[i]
        features.append(build_feature(Pose2D(uv), enc))
        kept.append(i)
    if not features:
        raise PoseError("no usable records (all discarded by viewpoint binning?)")
    return np.array(features), kept


def predict_poses(mode, model, features, threads: int = 1):
    """Ordered predictions for a feature matrix; mode is jointset|alljoints."""
    if mode == "jointset":
        one = lambda f: jointset.predict_pose(model, f)
    else:
        one = lambda f: jointset.predict_alljoints(model, f)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, features))
    return [one(f) for f in features]


@dataclass
class AblationConfig:
    train_records: list
    test_records: list
    viewpoint_modes: tuple = ("gt", "none")
    sigmas: tuple = (0.0,)
    model_kinds: tuple = ("jointset", "alljoints")
    hyper: tgp.Hyperparams = field(default_factory=tgp.Hyperparams)
    partition: JointPartition = DEFAULT_PARTITION
    viewpoint_scale: float = DEFAULT_VIEWPOINT_SCALE
    bin_mode: str = "nearest"
    eval_max_samples: int = None     # cap on evaluated test samples
    seed: int = 0
    threads: int = 1


def run_ablation(cfg: AblationConfig) -> dict:
    """Produce one report row per (viewpoint, sigma, model kind) condition.

    A failing condition yields a row with an "error" field; the run
    continues with the remaining rows.
    """
    rng = np.random.default_rng(cfg.seed)
    noise_unit = rng.standard_normal((len(cfg.test_records), NUM_JOINTS, 2))

    trained = {}   # (viewpoint_mode, kind) -> model
    rows = []
    for vp_mode in cfg.viewpoint_modes:
        for sigma in cfg.sigmas:
            for kind in cfg.model_kinds:
                condition = {"viewpoint": vp_mode, "sigma": float(sigma),
                             "model": kind}
                try:
                    rows.append(_ablation_row(cfg, trained, noise_unit,
                                              vp_mode, sigma, kind, condition))
                except Exception as exc:  # report, keep going
                    rows.append({"condition": condition, "error": str(exc)})
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "conditions": {
            "viewpoint_modes": list(cfg.viewpoint_modes),
            "sigmas": [float(s) for s in cfg.sigmas],
            "model_kinds": list(cfg.model_kinds),
        },
        "rows": rows,
    }


def _get_trained(cfg, trained, vp_mode, kind):
    key = (vp_mode, kind)
    if key not in trained:
        F, kept = build_features(cfg.train_records, viewpoint=vp_mode,
                                 scale=cfg.viewpoint_scale, bin_mode=cfg.bin_mode)
        layout = {"joint_count": NUM_JOINTS, "with_viewpoint": vp_mode != "none",
                  "viewpoint_scale": cfg.viewpoint_scale}
        samples = [(F[j], to_pelvis_relative(cfg.train_records[i].pose3d()))
                   for j, i in enumerate(kept)]
        if kind == "jointset":
            model = jointset.train_jointset(samples, cfg.hyper, cfg.partition,
                                            feature_layout=layout)
        else:
            model = jointset.train_alljoints(samples, cfg.hyper,
                                             feature_layout=layout)
        trained[key] = model
    return trained[key]


def _ablation_row(cfg, trained, noise_unit, vp_mode, sigma, kind, condition):
    model = _get_trained(cfg, trained, vp_mode, kind)
    noise2d = sigma * noise_unit if sigma > 0 else None
    F_test, kept = build_features(cfg.test_records, viewpoint=vp_mode,
                                  scale=cfg.viewpoint_scale,
                                  bin_mode=cfg.bin_mode, noise2d=noise2d)
    if cfg.eval_max_samples is not None and len(kept) > cfg.eval_max_samples:
        sel = np.linspace(0, len(kept) - 1, cfg.eval_max_samples).astype(int)
        F_test = F_test[sel]
        kept = [kept[i] for i in sel]
    gt = [to_pelvis_relative(cfg.test_records[i].pose3d()) for i in kept]
    est = predict_poses(kind, model, F_test, threads=cfg.threads)
    baseline = [jointset.nn_pose(model, f) for f in F_test]

    per_joint = per_joint_error(est, gt)
    hand_idx = [int(j) for j in HAND_JOINTS]
    torso_idx = [int(j) for j in TORSO_LEG_JOINTS]
    return {
        "condition": condition,
        "n_samples": len(kept),
        "mpjpe_mm": float(np.mean([mpjpe(e, g) for e, g in zip(est, gt)])),
        "per_joint_mm": [float(v) for v in per_joint],
        "hand_mpjpe_mm": float(per_joint[hand_idx].mean()),
        "torso_legs_mpjpe_mm": float(per_joint[torso_idx].mean()),
        "baseline_1nn_mpjpe_mm": float(np.mean(
            [mpjpe(b, g) for b, g in zip(baseline, gt)])),
    }


def format_report_text(report: dict) -> str:
    """Aligned text table for terminals; one line per row."""
    header = f"{'viewpoint':>9} {'sigma':>6} {'model':>10} {'n':>5} " \
             f"{'mpjpe':>9} {'hands':>9} {'torso+legs':>11} {'1-NN':>9}"
    lines = [header, "-" * len(header)]
    for row in report["rows"]:
        c = row["condition"]
        if "error" in row:
            lines.append(f"{c['viewpoint']:>9} {c['sigma']:>6g} {c['model']:>10} "
                         f"ERROR: {row['error']}")
            continue
        lines.append(
            f"{c['viewpoint']:>9} {c['sigma']:>6g} {c['model']:>10} "
            f"{row['n_samples']:>5d} {row['mpjpe_mm']:>9.2f} "
            f"{row['hand_mpjpe_mm']:>9.2f} {row['torso_legs_mpjpe_mm']:>11.2f} "
            f"{row['baseline_1nn_mpjpe_mm']:>9.2f}")
    return "\n".join(lines)
