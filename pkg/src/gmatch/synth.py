"""Synthetic RGB-D keypoint scenes with known ground truth.

Scenes mimic two camera observations of one rigid object: source points
sampled in a half-meter cube about (0, 0, 1), a ground-truth rigid motion,
per-point descriptors, and the ambiguity sources that defeat feature-only
matching — duplicated descriptors, outlier points present in only one set,
and depth noise. Everything derives from one integer seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidParams
from .geometry import CameraIntrinsics, RigidTransform, project_point
from .keypoints import FeatureMetric, KeypointSet

__all__ = ["SceneParams", "SynthScene", "SYNTH_INTRINSICS", "synth_scene", "planar_mirror_scene"]

SYNTH_INTRINSICS = CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0, width=640, height=480)

_CUBE_CENTER = np.array([0.0, 0.0, 1.0])
_CUBE_HALF = 0.25  # 0.5 m cube


@dataclass(frozen=True)
class SceneParams:
    """Generator knobs; every derived value flows from seed.

    duplicate_feature_groups lists group sizes; each group's points share one
    exact descriptor. outlier_count points are added to each set separately,
    carrying copies of inlier descriptors so they pass the feature gate.
    rotation_axis "any" draws a random axis with angle up to
    max_rotation_deg, staying inside the one-sided-visibility regime;
    "view" rotates about the optical axis only, which preserves every
    triangle's facing direction exactly.
    """

    n_points: int
    duplicate_feature_groups: tuple[int, ...] = ()
    feature_noise_sigma: float = 0.0
    depth_noise_sigma: float = 0.0
    outlier_count: int = 0
    seed: int = 0
    feature_dim: int = 128
    max_rotation_deg: float = 60.0
    rotation_axis: str = "any"
    min_separation: float = 0.04

    def __post_init__(self):
        if not (isinstance(self.n_points, int) and self.n_points >= 3):
            raise InvalidParams(f"n_points must be an integer >= 3, got {self.n_points}")
        groups = tuple(int(g) for g in self.duplicate_feature_groups)
        if any(g < 2 for g in groups):
            raise InvalidParams(f"duplicate groups need size >= 2, got {groups}")
        if sum(groups) > self.n_points:
            raise InvalidParams(
                f"duplicate groups cover {sum(groups)} points but the scene has {self.n_points}"
            )
        if self.feature_noise_sigma < 0 or self.depth_noise_sigma < 0:
            raise InvalidParams("noise sigmas must be non-negative")
        if not (isinstance(self.outlier_count, int) and self.outlier_count >= 0):
            raise InvalidParams(f"outlier_count must be a non-negative integer, got {self.outlier_count}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise InvalidParams(f"seed must be a non-negative integer, got {self.seed}")
        if not (isinstance(self.feature_dim, int) and self.feature_dim >= 1):
            raise InvalidParams(f"feature_dim must be a positive integer, got {self.feature_dim}")
        if not 0.0 <= self.max_rotation_deg <= 180.0:
            raise InvalidParams(f"max_rotation_deg must be in [0, 180], got {self.max_rotation_deg}")
        if self.rotation_axis not in ("any", "view"):
            raise InvalidParams(f"rotation_axis must be 'any' or 'view', got {self.rotation_axis!r}")
        if self.min_separation < 0:
            raise InvalidParams(f"min_separation must be non-negative, got {self.min_separation}")
        object.__setattr__(self, "duplicate_feature_groups", groups)


@dataclass(frozen=True)
class SynthScene:
    source: KeypointSet
    target: KeypointSet
    truth: RigidTransform
    truth_pairs: tuple[tuple[int, int], ...]
    params: SceneParams


def _sample_separated(rng: np.random.Generator, count: int, min_sep: float, existing: np.ndarray | None = None) -> np.ndarray:
    """Uniform cube samples with pairwise (and vs. existing) min separation."""
    kept = [] if existing is None else [p for p in existing]
    out = []
    attempts = 0
    limit = 10000 * max(count, 1)
    while len(out) < count:
        attempts += 1
        if attempts > limit:
            raise InvalidParams(
                f"could not place {count} points with min_separation {min_sep}; loosen the parameters"
            )
        cand = _CUBE_CENTER + rng.uniform(-_CUBE_HALF, _CUBE_HALF, 3)
        ok = True
        for p in kept:
            d = cand - p
            if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] < min_sep * min_sep:
                ok = False
                break
        if ok:
            kept.append(cand)
            out.append(cand)
    return np.array(out).reshape(count, 3)


def _unit_features(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    feats = rng.standard_normal((count, dim))
    norms = np.linalg.norm(feats, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return feats / norms


def _truth_transform(rng: np.random.Generator, params: SceneParams, source_centroid: np.ndarray) -> RigidTransform:
    max_rad = math.radians(params.max_rotation_deg)
    if params.rotation_axis == "view":
        axis = np.array([0.0, 0.0, 1.0])
        angle = rng.uniform(-max_rad, max_rad)
    else:
        axis = rng.standard_normal(3)
        axis = axis / np.linalg.norm(axis)
        angle = rng.uniform(0.0, max_rad)
    rot = Rotation.from_rotvec(angle * axis).as_matrix()
    target_centroid = _CUBE_CENTER + rng.uniform(-0.15, 0.15, 3)
    return RigidTransform(rot, target_centroid - rot @ source_centroid)


def _pixels_for(points: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    pix = np.empty((points.shape[0], 2), dtype=np.int64)
    for row, pt in enumerate(points):
        u, v = project_point(pt, intr)
        pix[row, 0] = min(max(int(round(u)), 0), intr.width - 1)
        pix[row, 1] = min(max(int(round(v)), 0), intr.height - 1)
    return pix


def synth_scene(params: SceneParams) -> SynthScene:
    """Generate one reproducible scene.

    Both sets are row-shuffled so index equality carries no information;
    truth_pairs records where each true correspondence landed. Depth noise
    perturbs the target z coordinate, clipped at three sigma, so every truth
    pair stays within 3 * depth_noise_sigma of the exact transform.
    """
    rng = np.random.default_rng(params.seed)
    n = params.n_points

    src_inliers = _sample_separated(rng, n, params.min_separation)
    feats = _unit_features(rng, n, params.feature_dim)

    grouped = rng.permutation(n)
    cursor = 0
    for size in params.duplicate_feature_groups:
        members = grouped[cursor : cursor + size]
        feats[members[1:]] = feats[members[0]]
        cursor += size

    truth = _truth_transform(rng, params, src_inliers.mean(axis=0))

    depth_noise = rng.normal(0.0, params.depth_noise_sigma, n) if params.depth_noise_sigma > 0 else np.zeros(n)
    sigma3 = 3.0 * params.depth_noise_sigma
    depth_noise = np.clip(depth_noise, -sigma3, sigma3)
    tgt_inliers = truth.apply(src_inliers)
    tgt_inliers[:, 2] += depth_noise

    tgt_feats = feats.copy()
    if params.feature_noise_sigma > 0:
        tgt_feats = tgt_feats + rng.normal(0.0, params.feature_noise_sigma, tgt_feats.shape)

    o = params.outlier_count
    if o > 0:
        src_out = _sample_separated(rng, o, params.min_separation, existing=src_inliers)
        src_out_feats = feats[rng.integers(0, n, o)].copy()
        tgt_out_frame = _sample_separated(rng, o, params.min_separation, existing=src_inliers)
        tgt_out = truth.apply(tgt_out_frame)
        tgt_out_feats = feats[rng.integers(0, n, o)].copy()
        if params.feature_noise_sigma > 0:
            tgt_out_feats = tgt_out_feats + rng.normal(0.0, params.feature_noise_sigma, tgt_out_feats.shape)
        src_points = np.vstack([src_inliers, src_out])
        src_features = np.vstack([feats, src_out_feats])
        tgt_points = np.vstack([tgt_inliers, tgt_out])
        tgt_features = np.vstack([tgt_feats, tgt_out_feats])
    else:
        src_points = src_inliers
        src_features = feats
        tgt_points = tgt_inliers
        tgt_features = tgt_feats

    perm_s = rng.permutation(src_points.shape[0])
    perm_t = rng.permutation(tgt_points.shape[0])
    pos_s = np.argsort(perm_s)
    pos_t = np.argsort(perm_t)
    truth_pairs = tuple(sorted((int(pos_s[i]), int(pos_t[i])) for i in range(n)))

    src_points = src_points[perm_s]
    src_features = src_features[perm_s]
    tgt_points = tgt_points[perm_t]
    tgt_features = tgt_features[perm_t]

    source = KeypointSet(
        pixels=_pixels_for(src_points, SYNTH_INTRINSICS),
        points=src_points,
        features=src_features,
        metric=FeatureMetric.EUCLIDEAN,
    )
    target = KeypointSet(
        pixels=_pixels_for(tgt_points, SYNTH_INTRINSICS),
        points=tgt_points,
        features=tgt_features,
        metric=FeatureMetric.EUCLIDEAN,
    )
    return SynthScene(source, target, truth, truth_pairs, params)


def planar_mirror_scene(seed: int, n_pairs: int = 10, feature_dim: int = 128) -> SynthScene:
    """The flip-over regression geometry: a mirror-symmetric planar layout.

    n_pairs point pairs on the z = 1 plane, each pair mirror-placed across
    x = 0 and sharing one exact descriptor — like lettering seen alongside
    its mirror image. Distances alone cannot distinguish the true assignment
    from the globally mirrored one (an in-plane reflection is an isometry,
    and on a coplanar set it is even realizable by a proper 180-degree
    rotation), so only the view-direction chirality test separates them.
    Point coordinates keep |x| >= 0.09 and the layout small enough that any
    mixed true/mirrored pair breaks distance consistency outright.
    """
    if n_pairs < 3:
        raise InvalidParams(f"n_pairs must be >= 3, got {n_pairs}")
    rng = np.random.default_rng(seed)

    halves = []
    attempts = 0
    while len(halves) < n_pairs:
        attempts += 1
        if attempts > 10000 * n_pairs:
            raise InvalidParams("could not place mirror pairs with the required separation")
        x = rng.uniform(0.09, 0.20)
        y = rng.uniform(-0.12, 0.12)
        ok = True
        for (px, py) in halves:
            # Both the point and its mirror twin must stay clear of the
            # existing points and their twins.
            if (x - px) ** 2 + (y - py) ** 2 < 0.02 ** 2 or (x + px) ** 2 + (y - py) ** 2 < 0.02 ** 2:
                ok = False
                break
        if ok:
            halves.append((x, y))

    pts = np.zeros((2 * n_pairs, 3))
    for k, (x, y) in enumerate(halves):
        pts[2 * k] = (x, y, 1.0)
        pts[2 * k + 1] = (-x, y, 1.0)

    pair_feats = _unit_features(rng, n_pairs, feature_dim)
    feats = np.repeat(pair_feats, 2, axis=0)

    max_rad = math.radians(30.0)
    axis = rng.standard_normal(3)
    axis = axis / np.linalg.norm(axis)
    angle = rng.uniform(0.0, max_rad)
    rot = Rotation.from_rotvec(angle * axis).as_matrix()
    target_centroid = _CUBE_CENTER + rng.uniform(-0.1, 0.1, 3)
    truth = RigidTransform(rot, target_centroid - rot @ pts.mean(axis=0))

    tgt_pts = truth.apply(pts)

    n_total = 2 * n_pairs
    perm_s = rng.permutation(n_total)
    perm_t = rng.permutation(n_total)
    pos_s = np.argsort(perm_s)
    pos_t = np.argsort(perm_t)
    truth_pairs = tuple(sorted((int(pos_s[i]), int(pos_t[i])) for i in range(n_total)))

    source = KeypointSet(
        pixels=_pixels_for(pts[perm_s], SYNTH_INTRINSICS),
        points=pts[perm_s],
        features=feats[perm_s],
        metric=FeatureMetric.EUCLIDEAN,
    )
    target = KeypointSet(
        pixels=_pixels_for(tgt_pts[perm_t], SYNTH_INTRINSICS),
        points=tgt_pts[perm_t],
        features=feats[perm_t],
        metric=FeatureMetric.EUCLIDEAN,
    )
    params = SceneParams(
        n_points=n_total,
        duplicate_feature_groups=(2,) * n_pairs,
        seed=seed,
        feature_dim=feature_dim,
        max_rotation_deg=30.0,
        min_separation=0.02,
    )
    return SynthScene(source, target, truth, truth_pairs, params)
