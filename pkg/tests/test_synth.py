import numpy as np
import pytest

from gmatch import (
    InvalidParams,
    MatchConfig,
    SceneParams,
    candidate_pairs,
    feature_distances,
    gmatch,
    planar_mirror_scene,
    synth_scene,
)

EXPECTED_INTRINSICS_SHAPE = (640, 480)


class TestSceneParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_points": 2},
            {"n_points": 10, "duplicate_feature_groups": (1,)},
            {"n_points": 10, "duplicate_feature_groups": (6, 6)},
            {"n_points": 10, "depth_noise_sigma": -0.1},
            {"n_points": 10, "outlier_count": -1},
            {"n_points": 10, "seed": -1},
            {"n_points": 10, "rotation_axis": "diagonal"},
            {"n_points": 10, "max_rotation_deg": 200.0},
        ],
    )
    def test_invalid_params(self, kwargs):
        with pytest.raises(InvalidParams):
            SceneParams(**kwargs)


class TestSynthScene:
    def test_same_seed_bit_identical(self):
        p = SceneParams(n_points=30, duplicate_feature_groups=(5,), depth_noise_sigma=0.002, outlier_count=5, seed=21)
        a = synth_scene(p)
        b = synth_scene(p)
        assert np.array_equal(a.source.points, b.source.points)
        assert np.array_equal(a.source.features, b.source.features)
        assert np.array_equal(a.target.points, b.target.points)
        assert np.array_equal(a.target.features, b.target.features)
        assert np.array_equal(a.truth.matrix, b.truth.matrix)
        assert a.truth_pairs == b.truth_pairs

    def test_different_seeds_differ(self):
        a = synth_scene(SceneParams(n_points=10, seed=0))
        b = synth_scene(SceneParams(n_points=10, seed=1))
        assert not np.array_equal(a.source.points, b.source.points)

    def test_truth_pairs_are_a_bijection_on_inliers(self):
        scene = synth_scene(SceneParams(n_points=25, outlier_count=5, seed=2))
        si = [i for i, _ in scene.truth_pairs]
        ti = [j for _, j in scene.truth_pairs]
        assert len(scene.truth_pairs) == 25
        assert len(set(si)) == 25 and len(set(ti)) == 25
        assert len(scene.source) == 30 and len(scene.target) == 30

    def test_noise_free_pairs_transform_exactly(self):
        scene = synth_scene(SceneParams(n_points=20, seed=3))
        moved = scene.truth.apply(scene.source.points)
        for i, j in scene.truth_pairs:
            assert np.abs(moved[i] - scene.target.points[j]).max() < 1e-12

    def test_depth_noise_bounded_by_three_sigma(self):
        sigma = 0.002
        for seed in range(10):
            scene = synth_scene(SceneParams(n_points=20, depth_noise_sigma=sigma, seed=seed))
            moved = scene.truth.apply(scene.source.points)
            for i, j in scene.truth_pairs:
                gap = scene.target.points[j] - moved[i]
                assert np.abs(gap[:2]).max() < 1e-12  # z-only noise
                assert abs(gap[2]) <= 3.0 * sigma + 1e-15

    def test_duplicate_groups_share_exact_features(self):
        scene = synth_scene(SceneParams(n_points=20, duplicate_feature_groups=(4, 3), seed=4))
        feats = scene.source.features
        # 4 + 3 duplicated members leave 20 - (4-1) - (3-1) = 15 distinct rows.
        distinct = {feats[i].tobytes() for i in range(len(scene.source))}
        assert len(distinct) == 15

    def test_all_duplicates_give_full_candidate_grid(self):
        scene = synth_scene(SceneParams(n_points=8, duplicate_feature_groups=(8,), seed=5))
        d = feature_distances(scene.source, scene.target)
        assert (d < 0.1).all()

    def test_min_separation_enforced(self):
        scene = synth_scene(SceneParams(n_points=40, min_separation=0.05, seed=6))
        pts = scene.source.points
        dist = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        np.fill_diagonal(dist, np.inf)
        assert dist.min() >= 0.05

    def test_impossible_separation_raises(self):
        # 0.9 m exceeds the cube diagonal: a second point can never land.
        with pytest.raises(InvalidParams, match="min_separation"):
            synth_scene(SceneParams(n_points=3, min_separation=0.9, seed=7))

    def test_outliers_reuse_inlier_features(self):
        scene = synth_scene(SceneParams(n_points=15, outlier_count=5, seed=8))
        pool = candidate_pairs(scene.source, scene.target, MatchConfig())
        # outliers pass the feature gate, so the pool exceeds the inlier count
        assert len(pool) > 15

    def test_view_axis_rotation_stays_about_z(self):
        scene = synth_scene(SceneParams(n_points=10, rotation_axis="view", seed=9))
        # rotation about +z keeps the third row/column of R at e_z
        assert np.allclose(scene.truth.rotation[:, 2], [0.0, 0.0, 1.0], atol=1e-12)
        assert np.allclose(scene.truth.rotation[2, :], [0.0, 0.0, 1.0], atol=1e-12)

    def test_max_rotation_respected(self):
        for seed in range(10):
            scene = synth_scene(SceneParams(n_points=10, max_rotation_deg=30.0, seed=seed))
            trace = np.trace(scene.truth.rotation)
            ang = np.degrees(np.arccos(np.clip((trace - 1.0) / 2.0, -1.0, 1.0)))
            assert ang <= 30.0 + 1e-9

    def test_pixels_inside_image(self):
        scene = synth_scene(SceneParams(n_points=50, seed=10))
        for ks in (scene.source, scene.target):
            assert (ks.pixels[:, 0] >= 0).all() and (ks.pixels[:, 0] < 640).all()
            assert (ks.pixels[:, 1] >= 0).all() and (ks.pixels[:, 1] < 480).all()

    def test_gmatch_recovers_noise_free_scene(self):
        scene = synth_scene(SceneParams(n_points=40, seed=11))
        state = gmatch(scene.source, scene.target)
        truth = set(scene.truth_pairs)
        assert len(state) == 24
        assert all(p in truth for p in state.pairs)


class TestPlanarMirrorScene:
    def test_basic_shape(self):
        scene = planar_mirror_scene(0)
        assert len(scene.source) == 20 and len(scene.target) == 20
        assert len(scene.truth_pairs) == 20

    def test_rejects_tiny_layout(self):
        with pytest.raises(InvalidParams):
            planar_mirror_scene(0, n_pairs=2)

    def test_source_points_coplanar(self):
        scene = planar_mirror_scene(1)
        assert np.allclose(scene.source.points[:, 2], 1.0, atol=1e-12)

    def test_mirror_twins_share_features(self):
        scene = planar_mirror_scene(2)
        feats = scene.source.features
        pts = scene.source.points
        for i in range(len(scene.source)):
            twins = [
                k
                for k in range(len(scene.source))
                if k != i
                and np.allclose(pts[k], pts[i] * np.array([-1.0, 1.0, 1.0]), atol=1e-12)
            ]
            assert len(twins) == 1
            assert np.array_equal(feats[twins[0]], feats[i])

    def test_mixed_family_pairs_break_distances(self):
        # A cross-assignment (true pair + mirrored pair) always shifts some
        # segment length by more than the eta margin, so it cannot seed.
        scene = planar_mirror_scene(3)
        pts = scene.source.points
        x = np.abs(pts[:, 0])
        assert x.min() >= 0.09
        # smallest possible mixed-pair length change: 2*x_i*x_k/l >= eta
        lmax = np.linalg.norm(pts[:, None] - pts[None, :], axis=2).max()
        assert 4.0 * x.min() ** 2 / (2.0 * lmax) > 0.02

    def test_truth_maps_source_onto_target(self):
        scene = planar_mirror_scene(4)
        moved = scene.truth.apply(scene.source.points)
        for i, j in scene.truth_pairs:
            assert np.abs(moved[i] - scene.target.points[j]).max() < 1e-12
