"""Shared builders for hand-constructed keypoint sets."""

import numpy as np
import pytest

from gmatch import CameraIntrinsics, FeatureMetric, KeypointSet


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0, width=640, height=480)


def make_set(points, features=None, view=(0.0, 0.0, 1.0)):
    """KeypointSet from bare 3-D points; features default to one-hot rows so
    index i only matches index i under the default gate."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = points.shape[0]
    if features is None:
        features = np.eye(max(n, 1))[:n]
    features = np.asarray(features, dtype=np.float64)
    pixels = np.zeros((n, 2), dtype=np.int64)
    return KeypointSet(
        pixels=pixels,
        points=points,
        features=features,
        metric=FeatureMetric.EUCLIDEAN,
        view=np.asarray(view, dtype=np.float64),
    )
