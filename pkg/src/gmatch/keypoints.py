"""Keypoint-set container and feature-distance computation.

A KeypointSet bundles what one RGB-D observation contributes to matching:
pixel locations, back-projected 3-D points in the camera frame, descriptor
vectors, the comparison metric for those descriptors, and the camera view
direction used by the chirality check.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import MetricMismatch, MetricUnknown
from .geometry import CameraIntrinsics, back_project

__all__ = ["FeatureMetric", "KeypointSet", "feature_distances"]


class FeatureMetric(enum.Enum):
    """How descriptor distance is measured."""

    EUCLIDEAN = "euclidean"
    HAMMING = "hamming"

    @classmethod
    def from_name(cls, name: str) -> "FeatureMetric":
        try:
            return cls(name.lower())
        except ValueError:
            raise MetricUnknown(
                f"unknown feature metric {name!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None

    @property
    def default_epsilon_f(self) -> float:
        """Feature-gate threshold used when the caller does not set one."""
        return {FeatureMetric.EUCLIDEAN: 0.1, FeatureMetric.HAMMING: 90.0}[self]


@dataclass(frozen=True)
class KeypointSet:
    """Immutable bundle of n keypoints from one observation.

    pixels: (n, 2) integer (u, v) image coordinates.
    points: (n, 3) float camera-frame positions in meters.
    features: (n, d) float descriptors for EUCLIDEAN, or (n, nbytes) uint8
        packed bit-strings for HAMMING (bit count in feature_bits).
    view: unit 3-vector pointing from the camera into the scene (+z for an
        unrotated pinhole camera).
    """

    pixels: np.ndarray
    points: np.ndarray
    features: np.ndarray
    metric: FeatureMetric
    view: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    feature_bits: int | None = None

    def __post_init__(self):
        pix = np.asarray(self.pixels)
        if pix.ndim != 2 or pix.shape[1] != 2:
            raise ValueError(f"pixels must be (n, 2), got {pix.shape}")
        if not np.issubdtype(pix.dtype, np.integer):
            as_int = np.asarray(pix, dtype=np.int64)
            if not np.array_equal(as_int, pix):
                raise ValueError("pixels must be integer coordinates")
            pix = as_int
        else:
            pix = pix.astype(np.int64, copy=True)

        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be (n, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("points contain non-finite coordinates")
        n = pts.shape[0]
        if pix.shape[0] != n:
            raise ValueError(f"pixels ({pix.shape[0]}) and points ({n}) disagree on n")

        feats = np.asarray(self.features)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise ValueError(f"features must be (n={n}, d), got {feats.shape}")
        if self.metric is FeatureMetric.EUCLIDEAN:
            feats = feats.astype(np.float64, copy=True)
            if not np.isfinite(feats).all():
                raise ValueError("features contain non-finite values")
            if self.feature_bits is not None:
                raise ValueError("feature_bits applies only to the hamming metric")
        elif self.metric is FeatureMetric.HAMMING:
            if feats.dtype != np.uint8:
                raise ValueError(f"hamming features must be packed uint8, got dtype {feats.dtype}")
            feats = feats.copy()
            if self.feature_bits is None:
                raise ValueError("hamming features require feature_bits")
            nbytes = feats.shape[1]
            if not (8 * (nbytes - 1) < self.feature_bits <= 8 * nbytes):
                raise ValueError(
                    f"feature_bits={self.feature_bits} does not fit {nbytes} packed bytes"
                )
        else:
            raise MetricUnknown(f"unknown feature metric {self.metric!r}")

        vw = np.asarray(self.view, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(vw)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"view must be a unit vector within 1e-9, |view| = {norm}")

        for arr in (pix, pts, feats, vw):
            arr.setflags(write=False)
        object.__setattr__(self, "pixels", pix)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "view", vw)

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_depth(
        cls,
        pixels,
        depths,
        features,
        intrinsics: CameraIntrinsics,
        metric: FeatureMetric,
        view=None,
        feature_bits: int | None = None,
    ) -> "KeypointSet":
        """Back-project (pixel, depth) pairs into camera-frame points."""
        pixels = np.asarray(pixels)
        depths = np.asarray(depths, dtype=np.float64).reshape(-1)
        if pixels.shape[0] != depths.shape[0]:
            raise ValueError("pixels and depths disagree on n")
        points = np.array(
            [back_project(pixels[i], float(depths[i]), intrinsics) for i in range(len(depths))]
        ).reshape(-1, 3)
        kwargs = {} if view is None else {"view": view}
        return cls(pixels, points, features, metric, feature_bits=feature_bits, **kwargs)

    def subset(self, indices) -> "KeypointSet":
        """New set restricted to the given row indices, in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        return KeypointSet(
            self.pixels[idx],
            self.points[idx],
            self.features[idx],
            self.metric,
            view=self.view,
            feature_bits=self.feature_bits,
        )


def feature_distances(source: KeypointSet, target: KeypointSet) -> np.ndarray:
    """Dense (len(source), len(target)) float64 descriptor-distance matrix.

    Euclidean sets use scipy's pairwise distance (dot-product-free, so the
    result does not depend on BLAS threading); hamming sets XOR the packed
    bytes and count bits.
    """
    if source.metric is not target.metric:
        raise MetricMismatch(
            f"cannot compare {source.metric.value} features with {target.metric.value}"
        )
    if source.metric is FeatureMetric.EUCLIDEAN:
        if source.features.shape[1] != target.features.shape[1]:
            raise MetricMismatch(
                f"feature dimensions differ: {source.features.shape[1]} vs "
                f"{target.features.shape[1]}"
            )
        if len(source) == 0 or len(target) == 0:
            return np.zeros((len(source), len(target)))
        return cdist(source.features, target.features, metric="euclidean")
    if source.feature_bits != target.feature_bits:
        raise MetricMismatch(
            f"feature bit counts differ: {source.feature_bits} vs {target.feature_bits}"
        )
    xor = source.features[:, None, :] ^ target.features[None, :, :]
    return np.bitwise_count(xor).sum(axis=2, dtype=np.int64).astype(np.float64)
