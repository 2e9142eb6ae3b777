"""BVH (Biovision Hierarchy) parsing, forward kinematics and 17-joint mapping.

Rotation convention: intrinsic rotations composed in the file's channel
order, right-handed axes, column vectors, angles in degrees. End Sites are
parsed (and re-serialized) but not treated as joints.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import BvhParseError
from .skeleton import FRAME_WORLD, JointId, NUM_JOINTS, Pose3D

POSITION_CHANNELS = ("Xposition", "Yposition", "Zposition")
ROTATION_CHANNELS = ("Xrotation", "Yrotation", "Zrotation")
VALID_CHANNELS = POSITION_CHANNELS + ROTATION_CHANNELS


@dataclass
class BvhJoint:
    name: str
    parent: int                       # index into BvhDocument.joints, -1 for root
    offset: np.ndarray                # (3,) file units
    channels: tuple                   # subset of VALID_CHANNELS, file order
    end_offset: np.ndarray = None     # End Site offset, if present


@dataclass
class BvhDocument:
    joints: list
    frame_time: float
    frames: np.ndarray                # (n_frames, n_channels)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_channels(self) -> int:
        return sum(len(j.channels) for j in self.joints)

    def joint_index(self, name: str) -> int:
        for i, joint in enumerate(self.joints):
            if joint.name == name:
                return i
        raise KeyError(f"no joint named {name!r}")

    def channel_start(self, joint_index: int) -> int:
        return sum(len(j.channels) for j in self.joints[:joint_index])

    def __eq__(self, other):
        if not isinstance(other, BvhDocument):
            return NotImplemented
        if self.frame_time != other.frame_time:
            return False
        if not np.array_equal(self.frames, other.frames):
            return False
        if len(self.joints) != len(other.joints):
            return False
        for a, b in zip(self.joints, other.joints):
            if (a.name, a.parent, a.channels) != (b.name, b.parent, b.channels):
                return False
            if not np.array_equal(a.offset, b.offset):
                return False
            if (a.end_offset is None) != (b.end_offset is None):
                return False
            if a.end_offset is not None and not np.array_equal(a.end_offset, b.end_offset):
                return False
        return True


class _Tokens:
    """Whitespace token stream that remembers the line of each token."""

    def __init__(self, text):
        self.items = []  # (token, line)
        for lineno, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.items.append((tok, lineno))
        self.pos = 0
        self.last_line = 1

    def peek(self):
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    def next(self, expect=None):
        if self.pos >= len(self.items):
            raise BvhParseError("unexpected end of file", self.last_line)
        tok, line = self.items[self.pos]
        self.pos += 1
        self.last_line = line
        if expect is not None and tok != expect:
            raise BvhParseError(f"expected {expect!r}, found {tok!r}", line)
        return tok

    def next_float(self, what):
        tok = self.next()
        try:
            return float(tok)
        except ValueError:
            raise BvhParseError(f"expected a number for {what}, found {tok!r}",
                                self.last_line) from None

    def next_int(self, what):
        tok = self.next()
        try:
            return int(tok)
        except ValueError:
            raise BvhParseError(f"expected an integer for {what}, found {tok!r}",
                                self.last_line) from None


def _parse_offset(toks):
    toks.next("OFFSET")
    return np.array([toks.next_float("offset") for _ in range(3)])


def _parse_joint(toks, joints, parent, keyword):
    toks.next(keyword)
    name = toks.next()
    index = len(joints)
    joints.append(BvhJoint(name=name, parent=parent, offset=None, channels=()))
    toks.next("{")
    joints[index].offset = _parse_offset(toks)
    toks.next("CHANNELS")
    n = toks.next_int("channel count")
    channels = []
    for _ in range(n):
        ch = toks.next()
        if ch not in VALID_CHANNELS:
            raise BvhParseError(f"unknown channel name {ch!r}", toks.last_line)
        channels.append(ch)
    joints[index].channels = tuple(channels)
    while True:
        tok = toks.peek()
        if tok == "JOINT":
            _parse_joint(toks, joints, index, "JOINT")
        elif tok == "End":
            toks.next("End")
            toks.next("Site")
            toks.next("{")
            if joints[index].end_offset is not None:
                raise BvhParseError("joint has more than one End Site", toks.last_line)
            joints[index].end_offset = _parse_offset(toks)
            toks.next("}")
        elif tok == "}":
            toks.next("}")
            return
        else:
            raise BvhParseError(f"expected JOINT, End Site or '}}', found {tok!r}",
                                toks.last_line)


def parse_bvh(text: str) -> BvhDocument:
    """Parse BVH text (LF or CRLF, arbitrary whitespace within lines).

    Frames must come one per line; a line with the wrong number of values is
    reported with its frame index and line number.
    """
    lines = text.splitlines()
    toks = _Tokens(text)
    toks.next("HIERARCHY")
    joints = []
    _parse_joint(toks, joints, -1, "ROOT")
    if toks.peek() == "ROOT":
        raise BvhParseError("more than one ROOT", toks.last_line)
    if toks.peek() != "MOTION":
        raise BvhParseError(
            f"missing MOTION section (found {toks.peek()!r})", toks.last_line)
    toks.next("MOTION")
    toks.next("Frames:")
    n_frames = toks.next_int("frame count")
    tok = toks.next("Frame")
    toks.next("Time:")
    frame_time = toks.next_float("frame time")
    if not frame_time > 0:
        raise BvhParseError(f"frame time must be positive, got {frame_time:g}",
                            toks.last_line)

    n_channels = sum(len(j.channels) for j in joints)
    first_data_line = toks.last_line + 1
    data_lines = [(i, line) for i, line in enumerate(lines[first_data_line - 1:],
                                                     start=first_data_line)
                  if line.strip()]
    if len(data_lines) != n_frames:
        raise BvhParseError(
            f"expected {n_frames} frame lines, found {len(data_lines)}",
            data_lines[-1][0] if data_lines else toks.last_line)
    frames = np.empty((n_frames, n_channels))
    for frame_idx, (lineno, line) in enumerate(data_lines):
        values = line.split()
        if len(values) != n_channels:
            raise BvhParseError(
                f"frame {frame_idx} has {len(values)} values, expected {n_channels}",
                lineno)
        try:
            frames[frame_idx] = [float(v) for v in values]
        except ValueError:
            raise BvhParseError(f"frame {frame_idx} contains a non-numeric value",
                                lineno) from None
    return BvhDocument(joints=joints, frame_time=frame_time, frames=frames)


def serialize_bvh(doc: BvhDocument) -> str:
    """Emit BVH text that parses back to an equal document."""
    out = ["HIERARCHY"]

    def fmt(v):
        return repr(float(v))

    def emit(index, depth):
        joint = doc.joints[index]
        pad = "\t" * depth
        keyword = "ROOT" if joint.parent == -1 else "JOINT"
        out.append(f"{pad}{keyword} {joint.name}")
        out.append(pad + "{")
        inner = "\t" * (depth + 1)
        out.append(f"{inner}OFFSET {' '.join(fmt(v) for v in joint.offset)}")
        out.append(f"{inner}CHANNELS {len(joint.channels)} {' '.join(joint.channels)}".rstrip())
        for child, cj in enumerate(doc.joints):
            if cj.parent == index:
                emit(child, depth + 1)
        if joint.end_offset is not None:
            out.append(f"{inner}End Site")
            out.append(inner + "{")
            out.append(f"{inner}\tOFFSET {' '.join(fmt(v) for v in joint.end_offset)}")
            out.append(inner + "}")
        out.append(pad + "}")

    emit(0, 0)
    out.append("MOTION")
    out.append(f"Frames: {doc.n_frames}")
    out.append(f"Frame Time: {repr(float(doc.frame_time))}")
    for row in doc.frames:
        out.append(" ".join(fmt(v) for v in row))
    return "\n".join(out) + "\n"


def _channel_rotation(channel, angle_deg):
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    if channel == "Xrotation":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)
    if channel == "Yrotation":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=float)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=float)


def forward_kinematics(doc: BvhDocument, frame: int) -> dict:
    """World-space joint positions for one frame, keyed by joint name."""
    if not 0 <= frame < doc.n_frames:
        raise IndexError(f"frame {frame} out of range 0..{doc.n_frames - 1}")
    values = doc.frames[frame]
    positions = {}
    world_rot = [None] * len(doc.joints)
    world_pos = [None] * len(doc.joints)
    channel_pos = 0
    for i, joint in enumerate(doc.joints):
        translation = np.zeros(3)
        rotation = np.eye(3)
        for channel in joint.channels:
            value = values[channel_pos]
            channel_pos += 1
            if channel.endswith("position"):
                translation["XYZ".index(channel[0])] += value
            else:
                rotation = rotation @ _channel_rotation(channel, value)
        local = joint.offset + translation
        if joint.parent == -1:
            world_pos[i] = local
            world_rot[i] = rotation
        else:
            p = joint.parent
            world_pos[i] = world_pos[p] + world_rot[p] @ local
            world_rot[i] = world_rot[p] @ rotation
        positions[joint.name] = world_pos[i]
    return positions


def rotation_vectors(doc: BvhDocument) -> np.ndarray:
    """Per-frame concatenation of all rotation channels, wrapped to (-180, 180]."""
    cols = []
    channel_pos = 0
    for joint in doc.joints:
        for channel in joint.channels:
            if channel.endswith("rotation"):
                cols.append(channel_pos)
            channel_pos += 1
    raw = doc.frames[:, cols]
    wrapped = (raw + 180.0) % 360.0 - 180.0
    wrapped[wrapped == -180.0] = 180.0
    return wrapped


# H36M joint -> CMU mocap skeleton joint names.
DEFAULT_CMU_JOINT_MAP = {
    JointId.Pelvis: "Hips",
    JointId.RHip: "RightUpLeg",
    JointId.RKnee: "RightLeg",
    JointId.RAnkle: "RightFoot",
    JointId.LHip: "LeftUpLeg",
    JointId.LKnee: "LeftLeg",
    JointId.LAnkle: "LeftFoot",
    JointId.Spine: "Spine",
    JointId.Thorax: "Spine1",
    JointId.Neck: "Neck1",
    JointId.Head: "Head",
    JointId.LShoulder: "LeftArm",
    JointId.LElbow: "LeftForeArm",
    JointId.LWrist: "LeftHand",
    JointId.RShoulder: "RightArm",
    JointId.RElbow: "RightForeArm",
    JointId.RWrist: "RightHand",
}

# Maps a BVH whose joints are already named after the 17 canonical joints.
IDENTITY_JOINT_MAP = {j: j.name for j in JointId}


def load_joint_map(path) -> dict:
    """Read a JSON joint map {canonical joint name: BVH joint name}."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    joint_map = {}
    for key, value in raw.items():
        try:
            joint_map[JointId[key]] = str(value)
        except KeyError:
            raise ValueError(f"unknown canonical joint name {key!r} in {path}") from None
    missing = [j.name for j in JointId if j not in joint_map]
    if missing:
        raise ValueError(f"joint map {path} is missing: {missing}")
    return joint_map


def map_to_skeleton17(positions: dict, joint_map: dict, unit_scale: float) -> Pose3D:
    """Pick the 17 mapped joints out of an FK result and convert to mm."""
    coords = np.empty((NUM_JOINTS, 3))
    for joint in JointId:
        name = joint_map[joint]
        if name not in positions:
            raise KeyError(f"BVH document has no joint {name!r} (mapped from {joint.name})")
        coords[int(joint)] = positions[name] * unit_scale
    return Pose3D(coords, FRAME_WORLD)
