"""Per-joint-set TGP models (right hand, left hand, torso+legs) and the
all-joints reference model, plus directory persistence.

The three sub-models share input features but regress disjoint output
subspaces; each gets its own median-heuristic output width unless the
hyperparameters pin gamma_x explicitly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import tgp
from .errors import FitError, LayoutMismatchError
from .skeleton import (
    DEFAULT_PARTITION,
    FRAME_PELVIS,
    JointId,
    JointPartition,
    JointSetId,
    NUM_JOINTS,
    Pose3D,
    merge_joint_sets,
    select_joint_set,
)

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT_VERSION = 1

_SET_FILES = {
    JointSetId.RightHand: "right_hand.json",
    JointSetId.LeftHand: "left_hand.json",
    JointSetId.TorsoLegs: "torso_legs.json",
}

NON_PELVIS_JOINTS = tuple(j for j in JointId if j != JointId.Pelvis)


@dataclass
class JointSetRegressor:
    models: dict                      # JointSetId -> TgpModel
    partition: JointPartition
    feature_layout: dict

    @property
    def feature_dim(self) -> int:
        return next(iter(self.models.values())).R.shape[1]


def _stack_samples(samples):
    features, poses = [], []
    for feat, pose in samples:
        if pose.frame != FRAME_PELVIS:
            raise ValueError("training poses must be pelvis-relative")
        features.append(np.asarray(feat, dtype=float))
        poses.append(pose)
    return np.array(features), poses


def train_jointset(samples, hyper: tgp.Hyperparams = tgp.Hyperparams(),
                   partition: JointPartition = DEFAULT_PARTITION,
                   feature_layout: dict = None,
                   per_set_hyper: dict = None) -> JointSetRegressor:
    """Fit one TGP per joint set on shared input features.

    per_set_hyper optionally overrides the hyperparameters of individual
    sets; every other set uses `hyper`.
    """
    F, poses = _stack_samples(samples)
    models = {}
    for set_id in JointSetId:
        h = (per_set_hyper or {}).get(set_id, hyper)
        targets = np.array([select_joint_set(p, set_id, partition) for p in poses])
        try:
            models[set_id] = tgp.fit(F, targets, h, joint_set=set_id.value,
                                     feature_layout=feature_layout)
        except (FitError, ValueError) as exc:
            raise FitError(f"fitting joint set {set_id.value} failed: {exc}") from exc
    return JointSetRegressor(models=models, partition=partition,
                             feature_layout=feature_layout or {})


def predict_pose(reg: JointSetRegressor, feature) -> Pose3D:
    """Merge the three independent sub-predictions into a full pose."""
    feature = np.asarray(feature, dtype=float)
    if feature.shape != (reg.feature_dim,):
        raise LayoutMismatchError(
            f"feature has dimension {feature.shape}, model expects {reg.feature_dim}")
    parts = {set_id: tgp.predict(model, feature).x
             for set_id, model in reg.models.items()}
    return merge_joint_sets(parts[JointSetId.RightHand],
                            parts[JointSetId.LeftHand],
                            parts[JointSetId.TorsoLegs],
                            reg.partition)


def train_alljoints(samples, hyper: tgp.Hyperparams = tgp.Hyperparams(),
                    feature_layout: dict = None) -> tgp.TgpModel:
    """Single model over the 48-dim non-pelvis output space."""
    F, poses = _stack_samples(samples)
    targets = np.array([p.coords[1:].ravel() for p in poses])
    return tgp.fit(F, targets, hyper, joint_set="all",
                   feature_layout=feature_layout)


def predict_alljoints(model: tgp.TgpModel, feature) -> Pose3D:
    feature = np.asarray(feature, dtype=float)
    if feature.shape != (model.R.shape[1],):
        raise LayoutMismatchError(
            f"feature has dimension {feature.shape}, model expects {model.R.shape[1]}")
    vec = tgp.predict(model, feature).x
    coords = np.zeros((NUM_JOINTS, 3))
    coords[1:] = vec.reshape(NUM_JOINTS - 1, 3)
    return Pose3D(coords, FRAME_PELVIS)


def nn_pose(reg_or_model, feature) -> Pose3D:
    """1-nearest-neighbor baseline: return the stored output of the closest
    training input (all models share inputs, so any of them can answer)."""
    if isinstance(reg_or_model, JointSetRegressor):
        parts = {set_id: tgp.knn_init(model, feature, 1)[0]
                 for set_id, model in reg_or_model.models.items()}
        return merge_joint_sets(parts[JointSetId.RightHand],
                                parts[JointSetId.LeftHand],
                                parts[JointSetId.TorsoLegs],
                                reg_or_model.partition)
    vec = tgp.knn_init(reg_or_model, feature, 1)[0]
    coords = np.zeros((NUM_JOINTS, 3))
    coords[1:] = vec.reshape(NUM_JOINTS - 1, 3)
    return Pose3D(coords, FRAME_PELVIS)


def save_regressor(reg: JointSetRegressor, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    for set_id, filename in _SET_FILES.items():
        tgp.save_model(reg.models[set_id], os.path.join(directory, filename))
    manifest = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "mode": "jointset",
        "partition": reg.partition.to_config(),
        "feature_layout": reg.feature_layout,
        "files": {s.value: f for s, f in _SET_FILES.items()},
    }
    _write_manifest(directory, manifest)


def save_alljoints(model: tgp.TgpModel, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    tgp.save_model(model, os.path.join(directory, "all_joints.json"))
    manifest = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "mode": "alljoints",
        "feature_layout": model.feature_layout or {},
        "files": {"all": "all_joints.json"},
    }
    _write_manifest(directory, manifest)


def _write_manifest(directory, manifest):
    with open(os.path.join(directory, MANIFEST_NAME), "w",
              encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_manifest(directory) -> dict:
    path = os.path.join(directory, MANIFEST_NAME)
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported manifest version")
    return manifest


def load_regressor(directory):
    """Load either kind of model directory.

    Returns (mode, JointSetRegressor or TgpModel, manifest).
    """
    manifest = load_manifest(directory)
    if manifest["mode"] == "jointset":
        partition = JointPartition.from_config(manifest["partition"])
        models = {set_id: tgp.load_model(os.path.join(directory, filename))
                  for set_id, filename in _SET_FILES.items()}
        reg = JointSetRegressor(models=models, partition=partition,
                                feature_layout=manifest.get("feature_layout", {}))
        return "jointset", reg, manifest
    if manifest["mode"] == "alljoints":
        model = tgp.load_model(os.path.join(directory, manifest["files"]["all"]))
        return "alljoints", model, manifest
    raise ValueError(f"unknown model mode {manifest['mode']!r}")
