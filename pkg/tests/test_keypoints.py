import numpy as np
import pytest

from gmatch import (
    FeatureMetric,
    KeypointSet,
    MetricMismatch,
    MetricUnknown,
    feature_distances,
)
from tests.conftest import make_set


class TestFeatureMetric:
    def test_from_name_round_trip(self):
        assert FeatureMetric.from_name("euclidean") is FeatureMetric.EUCLIDEAN
        assert FeatureMetric.from_name("HAMMING") is FeatureMetric.HAMMING

    def test_unknown_name_raises(self):
        with pytest.raises(MetricUnknown):
            FeatureMetric.from_name("cosine")

    def test_default_gates(self):
        assert FeatureMetric.EUCLIDEAN.default_epsilon_f == 0.1
        assert FeatureMetric.HAMMING.default_epsilon_f == 90.0


class TestKeypointSetValidation:
    def test_basic_construction(self):
        ks = make_set([[0.0, 0.0, 1.0], [0.1, 0.0, 1.0]])
        assert len(ks) == 2
        assert ks.points.dtype == np.float64

    def test_arrays_are_read_only(self):
        ks = make_set([[0.0, 0.0, 1.0]])
        with pytest.raises(ValueError):
            ks.points[0, 0] = 5.0

    def test_integral_float_pixels_accepted(self):
        ks = KeypointSet(
            pixels=np.array([[10.0, 20.0]]),
            points=np.array([[0.0, 0.0, 1.0]]),
            features=np.eye(1),
            metric=FeatureMetric.EUCLIDEAN,
        )
        assert ks.pixels.dtype == np.int64

    def test_fractional_pixels_rejected(self):
        with pytest.raises(ValueError, match="integer"):
            KeypointSet(
                pixels=np.array([[10.5, 20.0]]),
                points=np.array([[0.0, 0.0, 1.0]]),
                features=np.eye(1),
                metric=FeatureMetric.EUCLIDEAN,
            )

    def test_row_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            KeypointSet(
                pixels=np.zeros((2, 2), dtype=np.int64),
                points=np.zeros((3, 3)),
                features=np.eye(3),
                metric=FeatureMetric.EUCLIDEAN,
            )

    def test_nonfinite_points_rejected(self):
        with pytest.raises(ValueError):
            make_set([[0.0, np.inf, 1.0]])

    def test_non_unit_view_rejected(self):
        with pytest.raises(ValueError, match="unit"):
            make_set([[0.0, 0.0, 1.0]], view=(0.0, 0.0, 1.1))

    def test_hamming_requires_packed_uint8_and_bits(self):
        pix = np.zeros((1, 2), dtype=np.int64)
        pts = np.zeros((1, 3))
        with pytest.raises(ValueError, match="uint8"):
            KeypointSet(pix, pts, np.zeros((1, 4)), FeatureMetric.HAMMING, feature_bits=32)
        with pytest.raises(ValueError, match="feature_bits"):
            KeypointSet(pix, pts, np.zeros((1, 4), dtype=np.uint8), FeatureMetric.HAMMING)
        with pytest.raises(ValueError, match="fit"):
            KeypointSet(pix, pts, np.zeros((1, 4), dtype=np.uint8), FeatureMetric.HAMMING, feature_bits=40)

    def test_feature_bits_rejected_for_euclidean(self):
        with pytest.raises(ValueError, match="hamming"):
            KeypointSet(
                np.zeros((1, 2), dtype=np.int64),
                np.zeros((1, 3)),
                np.eye(1),
                FeatureMetric.EUCLIDEAN,
                feature_bits=8,
            )

    def test_subset_preserves_order_and_metadata(self):
        ks = make_set([[0.0, 0.0, 1.0], [0.1, 0.0, 1.0], [0.2, 0.0, 1.0]])
        sub = ks.subset([2, 0])
        assert np.array_equal(sub.points, ks.points[[2, 0]])
        assert np.array_equal(sub.features, ks.features[[2, 0]])
        assert sub.metric is ks.metric

    def test_from_depth_back_projects(self, intrinsics):
        ks = KeypointSet.from_depth(
            pixels=np.array([[320, 240], [620, 240]]),
            depths=[1.0, 2.0],
            features=np.eye(2),
            intrinsics=intrinsics,
            metric=FeatureMetric.EUCLIDEAN,
        )
        assert np.allclose(ks.points[0], [0.0, 0.0, 1.0], atol=1e-15)
        assert np.allclose(ks.points[1], [1.0, 0.0, 2.0], atol=1e-15)


class TestFeatureDistances:
    def test_euclidean_hand_case(self):
        a = make_set([[0.0, 0.0, 1.0]], features=[[1.0, 0.0]])
        b = make_set([[0.0, 0.0, 1.0]], features=[[0.0, 1.0]])
        d = feature_distances(a, b)
        assert abs(d[0, 0] - np.sqrt(2.0)) < 1e-15

    def test_hamming_bit_count_oracle(self):
        # 0xFF^0x0F has 4 set bits, 0x00^0x0F has 4: distance 8 exactly.
        pix = np.zeros((1, 2), dtype=np.int64)
        pts = np.zeros((1, 3))
        a = KeypointSet(pix, pts, np.array([[0xFF, 0x00]], dtype=np.uint8), FeatureMetric.HAMMING, feature_bits=16)
        b = KeypointSet(pix, pts, np.array([[0x0F, 0x0F]], dtype=np.uint8), FeatureMetric.HAMMING, feature_bits=16)
        d = feature_distances(a, b)
        assert d.dtype == np.float64
        assert d[0, 0] == 8.0

    def test_hamming_zero_distance_on_self(self):
        rng = np.random.default_rng(0)
        feats = rng.integers(0, 256, (5, 4), dtype=np.uint8)
        ks = KeypointSet(np.zeros((5, 2), dtype=np.int64), np.zeros((5, 3)), feats, FeatureMetric.HAMMING, feature_bits=32)
        d = feature_distances(ks, ks)
        assert np.array_equal(np.diag(d), np.zeros(5))

    def test_metric_mismatch_raises(self):
        a = make_set([[0.0, 0.0, 1.0]])
        b = KeypointSet(
            np.zeros((1, 2), dtype=np.int64),
            np.zeros((1, 3)),
            np.zeros((1, 4), dtype=np.uint8),
            FeatureMetric.HAMMING,
            feature_bits=32,
        )
        with pytest.raises(MetricMismatch):
            feature_distances(a, b)

    def test_dimension_mismatch_raises(self):
        a = make_set([[0.0, 0.0, 1.0]], features=[[1.0, 0.0]])
        b = make_set([[0.0, 0.0, 1.0]], features=[[1.0, 0.0, 0.0]])
        with pytest.raises(MetricMismatch):
            feature_distances(a, b)

    def test_bit_count_mismatch_raises(self):
        pix = np.zeros((1, 2), dtype=np.int64)
        pts = np.zeros((1, 3))
        a = KeypointSet(pix, pts, np.zeros((1, 4), dtype=np.uint8), FeatureMetric.HAMMING, feature_bits=32)
        b = KeypointSet(pix, pts, np.zeros((1, 4), dtype=np.uint8), FeatureMetric.HAMMING, feature_bits=30)
        with pytest.raises(MetricMismatch):
            feature_distances(a, b)

    def test_matches_manual_norms(self):
        rng = np.random.default_rng(1)
        a = make_set(rng.uniform(0, 1, (6, 3)), features=rng.normal(size=(6, 8)))
        b = make_set(rng.uniform(0, 1, (4, 3)), features=rng.normal(size=(4, 8)))
        d = feature_distances(a, b)
        manual = np.linalg.norm(a.features[:, None, :] - b.features[None, :, :], axis=2)
        assert np.abs(d - manual).max() < 1e-12
