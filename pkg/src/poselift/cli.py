"""Command-line interface: parse-bvh, synth, train, predict, eval.

Exit codes: 0 ok, 2 input error, 3 training error, 4 model/record layout
mismatch. A JSON config file supplies defaults (camera, viewpoint scale,
hyperparameters, partition); explicit flags win over the config.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

import numpy as np

from . import bvh, evaluate, jointset, synth, tgp
from .camera import (
    Camera,
    DEFAULT_VIEWPOINT_SCALE,
    ViewpointClass,
)
from .errors import BvhParseError, FitError, LayoutMismatchError, PoseError
from .records import PoseRecord, read_records, write_records
from .skeleton import (
    DEFAULT_PARTITION,
    JointPartition,
    NUM_JOINTS,
    to_pelvis_relative,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TRAIN = 3
EXIT_MISMATCH = 4


class CliError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}")


def _camera_from(args, config):
    if args.camera:
        try:
            f, cx, cy = (float(v) for v in args.camera.split(","))
        except ValueError:
            raise CliError(f"--camera expects f,cx,cy, got {args.camera!r}")
    elif "camera" in config:
        cam = config["camera"]
        f, cx, cy = cam["f"], cam["cx"], cam["cy"]
    else:
        raise CliError("camera parameters required (--camera f,cx,cy or config)")
    try:
        return Camera(f=f, cx=cx, cy=cy)
    except ValueError as exc:
        raise CliError(str(exc))


def _partition_from(config):
    if "partition" in config:
        try:
            return JointPartition.from_config(config["partition"])
        except (KeyError, ValueError) as exc:
            raise CliError(f"bad partition in config: {exc}")
    return DEFAULT_PARTITION


def _hyper_from(args, config):
    obj = dict(config.get("hyperparams", {}))
    if getattr(args, "hyper", None):
        try:
            with open(args.hyper, "r", encoding="utf-8") as fh:
                obj.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read hyperparameter file {args.hyper}: {exc}")
    try:
        return tgp.Hyperparams.from_json_obj(obj)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad hyperparameters: {exc}")


def _read_records_checked(path):
    try:
        return read_records(path)
    except (OSError, PoseError) as exc:
        raise CliError(str(exc))


def cmd_parse_bvh(args):
    try:
        with open(args.input, "r", encoding="utf-8") as fh:
            doc = bvh.parse_bvh(fh.read())
    except OSError as exc:
        raise CliError(str(exc))
    except BvhParseError as exc:
        raise CliError(f"{args.input}: {exc}")
    if args.fk is not None:
        joint_map = bvh.load_joint_map(args.map) if args.map else None
        try:
            positions = bvh.forward_kinematics(doc, args.fk)
        except IndexError as exc:
            raise CliError(str(exc))
        if joint_map is not None:
            pose = bvh.map_to_skeleton17(positions, joint_map, args.scale)
            out = {j.name: [float(v) for v in pose[j]]
                   for j in sorted(joint_map, key=int)}
        else:
            out = {name: [float(v) * args.scale for v in pos]
                   for name, pos in positions.items()}
        print(json.dumps(out, indent=2))
    else:
        print(json.dumps({
            "joints": len(doc.joints),
            "frames": doc.n_frames,
            "frame_time_s": doc.frame_time,
            "channels": doc.n_channels,
            "joint_names": [j.name for j in doc.joints],
        }, indent=2))
    return EXIT_OK


def _load_corpus(bvh_dir):
    paths = sorted(glob.glob(os.path.join(bvh_dir, "*.bvh")))
    if not paths:
        raise CliError(f"no .bvh files in {bvh_dir}")
    corpus = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = bvh.parse_bvh(fh.read())
            except BvhParseError as exc:
                raise CliError(f"{path}: {exc}")
        corpus.append((os.path.splitext(os.path.basename(path))[0], doc))
    return corpus


def _joint_map_for(args, corpus):
    if args.map:
        try:
            return bvh.load_joint_map(args.map)
        except (OSError, ValueError) as exc:
            raise CliError(str(exc))
    # fall back to canonical names, then the bundled CMU map
    names = {j.name for _, doc in corpus for j in doc.joints}
    if all(m in names for m in bvh.IDENTITY_JOINT_MAP.values()):
        return bvh.IDENTITY_JOINT_MAP
    if all(m in names for m in bvh.DEFAULT_CMU_JOINT_MAP.values()):
        return bvh.DEFAULT_CMU_JOINT_MAP
    raise CliError("cannot infer a joint map for this corpus; pass --map FILE")


def cmd_synth(args):
    config = _load_config(args.config)
    cam = _camera_from(args, config)
    corpus = _load_corpus(args.bvh_dir)
    joint_map = _joint_map_for(args, corpus)
    viewpoints = synth.ALL_VIEWPOINTS
    if args.viewpoints:
        try:
            viewpoints = tuple(int(v) for v in args.viewpoints.split(","))
            for v in viewpoints:
                ViewpointClass(v)
        except ValueError as exc:
            raise CliError(f"bad --viewpoints: {exc}")
    cfg = synth.SynthConfig(
        viewpoints=viewpoints,
        noise_sigma=args.noise,
        upright_mode=args.upright,
        frame_stride=args.stride,
        max_frames=args.max_frames,
    )
    try:
        records, skipped = synth.generate_dataset(
            corpus, joint_map, args.scale, cam, cfg, seed=args.seed)
    except (ValueError, KeyError) as exc:
        raise CliError(str(exc))
    write_records(args.out, records)
    print(f"wrote {len(records)} records to {args.out} ({skipped} skipped)")
    return EXIT_OK


def _viewpoint_labels(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return {rec_id: ViewpointClass(int(k)) for rec_id, k in raw.items()}
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read viewpoint labels {path}: {exc}")


def cmd_train(args):
    config = _load_config(args.config)
    hyper = _hyper_from(args, config)
    partition = _partition_from(config)
    scale = args.viewpoint_scale if args.viewpoint_scale is not None \
        else config.get("viewpoint_scale", DEFAULT_VIEWPOINT_SCALE)
    records = _read_records_checked(args.records)
    labels = _viewpoint_labels(args.viewpoint_labels) \
        if args.viewpoint == "file" else None
    try:
        F, kept = evaluate.build_features(records, viewpoint=args.viewpoint,
                                          scale=scale, bin_mode=args.bin_mode,
                                          labels=labels)
    except PoseError as exc:
        raise CliError(str(exc))
    layout = {"joint_count": NUM_JOINTS,
              "with_viewpoint": args.viewpoint != "none",
              "viewpoint_scale": scale,
              "viewpoint_source": args.viewpoint,
              "feature_dim": int(F.shape[1])}
    samples = [(F[j], to_pelvis_relative(records[i].pose3d()))
               for j, i in enumerate(kept)]
    try:
        if args.mode == "jointset":
            model = jointset.train_jointset(samples, hyper, partition,
                                            feature_layout=layout)
            jointset.save_regressor(model, args.out)
        else:
            model = jointset.train_alljoints(samples, hyper, feature_layout=layout)
            jointset.save_alljoints(model, args.out)
    except FitError as exc:
        raise CliError(str(exc), code=EXIT_TRAIN)
    dropped = len(records) - len(kept)
    print(f"trained {args.mode} model on {len(kept)} records "
          f"({dropped} discarded by binning) -> {args.out}")
    return EXIT_OK


def _load_model_dir(path):
    try:
        return jointset.load_regressor(path)
    except (OSError, ValueError, FitError) as exc:
        raise CliError(f"cannot load model directory {path}: {exc}")


def _features_for_model(manifest, records, bin_mode, noise2d=None):
    layout = manifest.get("feature_layout", {})
    vp = "gt" if layout.get("with_viewpoint", True) else "none"
    scale = layout.get("viewpoint_scale", DEFAULT_VIEWPOINT_SCALE)
    try:
        F, kept = evaluate.build_features(records, viewpoint=vp, scale=scale,
                                          bin_mode=bin_mode, noise2d=noise2d)
    except PoseError as exc:
        raise CliError(str(exc))
    want = layout.get("feature_dim")
    if want is not None and F.shape[1] != want:
        raise CliError(
            f"feature dimension {F.shape[1]} does not match model manifest "
            f"({want})", code=EXIT_MISMATCH)
    return F, kept


def cmd_predict(args):
    mode, model, manifest = _load_model_dir(args.model)
    records = _read_records_checked(args.records)
    F, kept = _features_for_model(manifest, records, args.bin_mode)
    poses = evaluate.predict_poses(mode, model, F, threads=args.threads)
    out_records = []
    for pose, i in zip(poses, kept):
        src = records[i]
        out_records.append(PoseRecord(
            id=src.id, subject=src.subject, activity=src.activity,
            joints3d=pose.coords, joints2d=src.joints2d, yaw_deg=src.yaw_deg))
    write_records(args.out, out_records)
    print(f"wrote {len(out_records)} predictions to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    mode, model, manifest = _load_model_dir(args.model)
    records = _read_records_checked(args.records)
    sigmas = [0.0]
    if args.sweep_noise:
        try:
            sigmas = [float(s) for s in args.sweep_noise.split(",")]
        except ValueError:
            raise CliError(f"bad --sweep-noise {args.sweep_noise!r}")
    rng = np.random.default_rng(args.seed)
    noise_unit = rng.standard_normal((len(records), NUM_JOINTS, 2))
    rows = []
    for sigma in sigmas:
        noise2d = sigma * noise_unit if sigma > 0 else None
        F, kept = _features_for_model(manifest, records, args.bin_mode, noise2d)
        if args.max_samples is not None and len(kept) > args.max_samples:
            sel = np.linspace(0, len(kept) - 1, args.max_samples).astype(int)
            F = F[sel]
            kept = [kept[i] for i in sel]
        gt = [to_pelvis_relative(records[i].pose3d()) for i in kept]
        est = evaluate.predict_poses(mode, model, F, threads=args.threads)
        baseline = [jointset.nn_pose(model, f) for f in F]
        per_joint = evaluate.per_joint_error(est, gt)
        hand_idx = [int(j) for j in evaluate.HAND_JOINTS]
        rows.append({
            "condition": {"sigma": sigma, "model": mode},
            "n_samples": len(kept),
            "mpjpe_mm": float(np.mean([evaluate.mpjpe(e, g)
                                       for e, g in zip(est, gt)])),
            "per_joint_mm": [float(v) for v in per_joint],
            "hand_mpjpe_mm": float(per_joint[hand_idx].mean()),
            "baseline_1nn_mpjpe_mm": float(np.mean(
                [evaluate.mpjpe(b, g) for b, g in zip(baseline, gt)])),
        })
        print(f"sigma={sigma:g}: mpjpe={rows[-1]['mpjpe_mm']:.2f} mm "
              f"(1-NN baseline {rows[-1]['baseline_1nn_mpjpe_mm']:.2f} mm, "
              f"{len(kept)} samples)")
    report = {"format_version": evaluate.REPORT_FORMAT_VERSION,
              "conditions": {"sigmas": sigmas, "model": mode},
              "rows": rows}
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="poselift",
        description="3D pose reconstruction from 2D joints and camera viewpoint")
    parser.add_argument("--config", help="JSON config file (flags override it)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse-bvh", help="summarize a BVH file or run FK")
    p.add_argument("input")
    p.add_argument("--fk", type=int, default=None, metavar="FRAME",
                   help="print world joint positions for one frame")
    p.add_argument("--map", help="joint map JSON (canonical name -> BVH name)")
    p.add_argument("--scale", type=float, default=1.0,
                   help="millimeters per BVH file unit")
    p.set_defaults(handler=cmd_parse_bvh)

    p = sub.add_parser("synth", help="generate pose records from a BVH corpus")
    p.add_argument("--bvh-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--camera", metavar="F,CX,CY")
    p.add_argument("--map", help="joint map JSON")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0, metavar="SIGMA")
    p.add_argument("--viewpoints", metavar="LIST", help="e.g. 1,5")
    p.add_argument("--upright", choices=["rotation", "pose", "none"],
                   default="rotation")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--max-frames", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("train", help="fit TGP models on pose records")
    p.add_argument("--records", required=True)
    p.add_argument("--mode", choices=["jointset", "alljoints"],
                   default="jointset")
    p.add_argument("--viewpoint", choices=["gt", "none", "file"], default="gt")
    p.add_argument("--viewpoint-labels", help="JSON {record id: class 1..8}")
    p.add_argument("--bin-mode", choices=["strict", "nearest"], default="strict")
    p.add_argument("--viewpoint-scale", type=float, default=None)
    p.add_argument("--hyper", help="hyperparameter JSON file")
    p.add_argument("--out", required=True, metavar="MODEL_DIR")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", help="emit predicted poses as JSON lines")
    p.add_argument("--model", required=True, metavar="MODEL_DIR")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bin-mode", choices=["strict", "nearest"], default="nearest")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("eval", help="MPJPE report against ground truth")
    p.add_argument("--model", required=True, metavar="MODEL_DIR")
    p.add_argument("--records", required=True)
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--sweep-noise", metavar="LIST", help="e.g. 0,2,5,10")
    p.add_argument("--bin-mode", choices=["strict", "nearest"], default="nearest")
    p.add_argument("--max-samples", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except LayoutMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAIN


if __name__ == "__main__":
    sys.exit(main())
