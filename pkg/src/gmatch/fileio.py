"""JSON file formats for keypoint sets and poses.

Both formats are single JSON documents: human-inspectable, diff-friendly,
and lossless (floats serialize via shortest round-trip repr, feature
payloads via base64). A keypoint file carries either explicit 3-D points or
per-record depths plus intrinsics — never a mix; the loader back-projects
the latter. Field-by-field documentation lives in the README next to a
conformance fixture.
"""

from __future__ import annotations

import base64
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDepthWarning, MetricUnknown, ParseError
from .geometry import CameraIntrinsics, RigidTransform, back_project
from .keypoints import FeatureMetric, KeypointSet

__all__ = [
    "PoseData",
    "load_keypoints",
    "save_keypoints",
    "load_pose",
    "save_pose",
    "pose_to_json",
    "KEYPOINT_FORMAT",
    "POSE_FORMAT",
]

KEYPOINT_FORMAT = "gmatch-keypoints"
POSE_FORMAT = "gmatch-pose"
_VERSION = 1
_TIMING_STAGES = ("candidate", "seed", "expand", "solve", "refine")


@dataclass(frozen=True)
class PoseData:
    """In-memory form of a pose file."""

    transform: RigidTransform
    pairs: tuple[tuple[int, int], ...] = ()
    accumulated_cost: float = 0.0
    timings: dict | None = None

    @property
    def match_count(self) -> int:
        return len(self.pairs)


def _read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object at top level")
    return doc


def _require(doc: dict, key: str, path) -> object:
    if key not in doc:
        raise ParseError(f"{path}: missing required field {key!r}")
    return doc[key]


def _check_format(doc: dict, expected: str, path) -> None:
    if _require(doc, "format", path) != expected:
        raise ParseError(f"{path}: format is {doc.get('format')!r}, expected {expected!r}")
    if _require(doc, "version", path) != _VERSION:
        raise ParseError(f"{path}: unsupported version {doc.get('version')!r}")


def _intrinsics_from(doc_val, path) -> CameraIntrinsics | None:
    if doc_val is None:
        return None
    if not isinstance(doc_val, dict):
        raise ParseError(f"{path}: intrinsics must be an object or null")
    try:
        return CameraIntrinsics(
            fx=float(doc_val["fx"]),
            fy=float(doc_val["fy"]),
            cx=float(doc_val["cx"]),
            cy=float(doc_val["cy"]),
            width=int(doc_val["width"]),
            height=int(doc_val["height"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad intrinsics: {exc}") from exc


def _decode_feature(record: dict, kind: str, length: int, index: int, path) -> np.ndarray:
    try:
        raw = base64.b64decode(record["feature"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: record {index}: bad feature payload: {exc}") from exc
    if kind == "real":
        expected = 8 * length
        if len(raw) != expected:
            raise ParseError(
                f"{path}: record {index}: feature payload is {len(raw)} bytes, expected {expected}"
            )
        return np.frombuffer(raw, dtype="<f8")
    expected = (length + 7) // 8
    if len(raw) != expected:
        raise ParseError(
            f"{path}: record {index}: feature payload is {len(raw)} bytes, expected {expected}"
        )
    return np.frombuffer(raw, dtype=np.uint8)


def load_keypoints(path) -> KeypointSet:
    """Read a keypoint file; back-projects depth-mode records.

    Records whose depth is non-positive or non-finite are dropped, and a
    single InvalidDepthWarning names their indices — missing depth is a
    data condition to surface, not a crash.
    """
    doc = _read_json(path)
    _check_format(doc, KEYPOINT_FORMAT, path)
    metric = FeatureMetric.from_name(str(_require(doc, "metric", path)))
    kind = _require(doc, "feature_kind", path)
    if kind not in ("real", "binary"):
        raise ParseError(f"{path}: feature_kind must be 'real' or 'binary', got {kind!r}")
    if (metric is FeatureMetric.EUCLIDEAN) != (kind == "real"):
        raise ParseError(f"{path}: metric {metric.value!r} cannot apply to {kind} features")
    length = _require(doc, "feature_length", path)
    if not isinstance(length, int) or length < 1:
        raise ParseError(f"{path}: feature_length must be a positive integer, got {length!r}")
    view = _require(doc, "view", path)
    intrinsics = _intrinsics_from(doc.get("intrinsics"), path)
    records = _require(doc, "keypoints", path)
    if not isinstance(records, list):
        raise ParseError(f"{path}: keypoints must be a list")

    has_depth = [isinstance(r, dict) and "depth" in r for r in records]
    has_point = [isinstance(r, dict) and "point" in r for r in records]
    if any(not isinstance(r, dict) for r in records):
        raise ParseError(f"{path}: every keypoint record must be an object")
    if any(d and p for d, p in zip(has_depth, has_point)):
        raise ParseError(f"{path}: records may carry depth or point, not both")
    if records and not (all(has_depth) or all(has_point)):
        raise ParseError(f"{path}: depth-mode and point-mode records are mixed")
    depth_mode = bool(records) and all(has_depth)
    if depth_mode and intrinsics is None:
        raise ParseError(f"{path}: depth-mode records require intrinsics")

    pixels, points, feats = [], [], []
    dropped: list[int] = []
    for index, rec in enumerate(records):
        try:
            u, v = int(rec["pixel"][0]), int(rec["pixel"][1])
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"{path}: record {index}: bad pixel: {exc}") from exc
        feature = _decode_feature(rec, kind, length, index, path)
        if depth_mode:
            depth = rec["depth"]
            if not isinstance(depth, (int, float)) or not math.isfinite(depth) or depth <= 0:
                dropped.append(index)
                continue
            try:
                point = back_project((u, v), float(depth), intrinsics)
            except ValueError as exc:
                raise ParseError(f"{path}: record {index}: {exc}") from exc
        else:
            raw = rec["point"]
            if not (isinstance(raw, list) and len(raw) == 3):
                raise ParseError(f"{path}: record {index}: point must be a 3-element list")
            point = np.array([float(c) for c in raw])
        pixels.append((u, v))
        points.append(point)
        feats.append(feature)

    if dropped:
        warnings.warn(
            f"{path}: dropped {len(dropped)} record(s) with invalid depth at indices {dropped}",
            InvalidDepthWarning,
            stacklevel=2,
        )

    n = len(points)
    if kind == "real":
        features = np.array(feats).reshape(n, length)
        bits = None
    else:
        features = np.array(feats, dtype=np.uint8).reshape(n, (length + 7) // 8)
        bits = length
    try:
        return KeypointSet(
            pixels=np.array(pixels, dtype=np.int64).reshape(n, 2),
            points=np.array(points).reshape(n, 3),
            features=features,
            metric=metric,
            view=np.asarray(view, dtype=np.float64),
            feature_bits=bits,
        )
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_keypoints(ks: KeypointSet, path, intrinsics: CameraIntrinsics | None = None) -> None:
    """Write a keypoint set in explicit-point mode (lossless round trip)."""
    if ks.metric is FeatureMetric.EUCLIDEAN:
        kind = "real"
        length = ks.features.shape[1]
        payloads = [
            base64.b64encode(np.ascontiguousarray(row, dtype="<f8").tobytes()).decode("ascii")
            for row in ks.features
        ]
    else:
        kind = "binary"
        length = ks.feature_bits
        payloads = [base64.b64encode(row.tobytes()).decode("ascii") for row in ks.features]
    doc = {
        "format": KEYPOINT_FORMAT,
        "version": _VERSION,
        "metric": ks.metric.value,
        "view": [float(c) for c in ks.view],
        "intrinsics": None
        if intrinsics is None
        else {
            "fx": intrinsics.fx,
            "fy": intrinsics.fy,
            "cx": intrinsics.cx,
            "cy": intrinsics.cy,
            "width": intrinsics.width,
            "height": intrinsics.height,
        },
        "feature_kind": kind,
        "feature_length": int(length),
        "keypoints": [
            {
                "pixel": [int(ks.pixels[i, 0]), int(ks.pixels[i, 1])],
                "point": [float(c) for c in ks.points[i]],
                "feature": payloads[i],
            }
            for i in range(len(ks))
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_pose(path) -> PoseData:
    doc = _read_json(path)
    _check_format(doc, POSE_FORMAT, path)
    matrix = _require(doc, "matrix", path)
    try:
        transform = RigidTransform.from_matrix(np.asarray(matrix, dtype=np.float64))
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: bad matrix: {exc}") from exc
    raw_pairs = _require(doc, "pairs", path)
    if not isinstance(raw_pairs, list):
        raise ParseError(f"{path}: pairs must be a list")
    try:
        pairs = tuple((int(i), int(j)) for i, j in raw_pairs)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad pair entry: {exc}") from exc
    count = _require(doc, "match_count", path)
    if count != len(pairs):
        raise ParseError(f"{path}: match_count {count} disagrees with {len(pairs)} pairs")
    cost = _require(doc, "accumulated_cost", path)
    if not isinstance(cost, (int, float)) or not math.isfinite(cost):
        raise ParseError(f"{path}: accumulated_cost must be a finite number")
    timings = doc.get("timings")
    if timings is not None:
        if not isinstance(timings, dict):
            raise ParseError(f"{path}: timings must be an object or null")
        timings = {str(k): float(v) for k, v in timings.items()}
    return PoseData(transform, pairs, float(cost), timings)


def pose_to_json(data: PoseData) -> str:
    """The exact file text for a pose; stdout and --out emit identical bytes."""
    timings = data.timings
    if timings is not None:
        ordered = {k: timings[k] for k in _TIMING_STAGES if k in timings}
        ordered.update({k: v for k, v in timings.items() if k not in ordered})
        timings = ordered
    doc = {
        "format": POSE_FORMAT,
        "version": _VERSION,
        "matrix": [[float(x) for x in row] for row in data.transform.matrix],
        "match_count": data.match_count,
        "accumulated_cost": float(data.accumulated_cost),
        "pairs": [[int(i), int(j)] for i, j in data.pairs],
        "timings": timings,
    }
    return json.dumps(doc, indent=2) + "\n"


def save_pose(data: PoseData, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(pose_to_json(data))
