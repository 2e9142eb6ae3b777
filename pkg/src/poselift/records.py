"""Pose record JSON-lines format, shared by all pipeline stages.

One object per line with fields: id, subject, activity, joints3d (17x3, mm,
camera frame), joints2d (17x2, px, optional), yaw_deg (optional).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import PoseError
from .skeleton import FRAME_CAMERA, NUM_JOINTS, Pose2D, Pose3D


@dataclass
class PoseRecord:
    id: str
    subject: str
    activity: str
    joints3d: np.ndarray          # (17, 3) mm, camera frame
    joints2d: np.ndarray = None   # (17, 2) px
    yaw_deg: float = None

    def pose3d(self) -> Pose3D:
        return Pose3D(self.joints3d, FRAME_CAMERA)

    def pose2d(self) -> Pose2D:
        if self.joints2d is None:
            raise PoseError(f"record {self.id} has no 2D joints")
        return Pose2D(self.joints2d)

    def to_json_obj(self) -> dict:
        obj = {
            "id": self.id,
            "subject": self.subject,
            "activity": self.activity,
            "joints3d": [[float(v) for v in row] for row in self.joints3d],
        }
        if self.joints2d is not None:
            obj["joints2d"] = [[float(v) for v in row] for row in self.joints2d]
        if self.yaw_deg is not None:
            obj["yaw_deg"] = float(self.yaw_deg)
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PoseRecord":
        joints3d = np.asarray(obj["joints3d"], dtype=float)
        if joints3d.shape != (NUM_JOINTS, 3):
            raise PoseError(f"joints3d must be {NUM_JOINTS}x3, got {joints3d.shape}")
        joints2d = None
        if obj.get("joints2d") is not None:
            joints2d = np.asarray(obj["joints2d"], dtype=float)
            if joints2d.shape != (NUM_JOINTS, 2):
                raise PoseError(f"joints2d must be {NUM_JOINTS}x2, got {joints2d.shape}")
        return cls(
            id=str(obj["id"]),
            subject=str(obj.get("subject", "")),
            activity=str(obj.get("activity", "")),
            joints3d=joints3d,
            joints2d=joints2d,
            yaw_deg=None if obj.get("yaw_deg") is None else float(obj["yaw_deg"]),
        )


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_obj()) + "\n")


def read_records(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(PoseRecord.from_json_obj(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise PoseError(f"{path}: bad record on line {lineno}: {exc}") from exc
    return records
