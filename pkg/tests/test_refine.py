import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from gmatch import (
    IcpConfig,
    InvalidParams,
    NoOverlap,
    RigidTransform,
    SceneParams,
    evaluate_pose,
    icp_refine,
    synth_scene,
)


def perturbed(truth, target_points, rng, max_deg=2.0, max_shift=0.005):
    """Pose perturbation about the target centroid: bounds how far any point
    moves, which is the quantity the association radius cares about."""
    center = target_points.mean(axis=0)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    ang = np.deg2rad(rng.uniform(0.2, max_deg))
    dr = Rotation.from_rotvec(axis * ang).as_matrix()
    dt = rng.normal(size=3)
    dt = dt / np.linalg.norm(dt) * rng.uniform(0.0005, max_shift)
    return RigidTransform(dr @ truth.rotation, dr @ (truth.translation - center) + center + dt)


class TestIcpConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"max_iterations": 0}, {"correspondence_radius": 0.0}, {"convergence_eps": 0.0}],
    )
    def test_invalid_params(self, kwargs):
        with pytest.raises(InvalidParams):
            IcpConfig(**kwargs)


class TestIcpRefine:
    def test_truth_is_a_fixed_point(self):
        scene = synth_scene(SceneParams(n_points=80, seed=0))
        res = icp_refine(scene.truth, scene.source.points, scene.target.points)
        assert res.rmse < 1e-12
        rot, trans = evaluate_pose(res.transform, scene.truth)
        assert rot < 1e-9 and trans < 1e-12

    def test_recovers_from_perturbation(self):
        rng = np.random.default_rng(1)
        for seed in range(20):
            scene = synth_scene(SceneParams(n_points=150, seed=seed))
            start = perturbed(scene.truth, scene.target.points, rng)
            res = icp_refine(start, scene.source.points, scene.target.points)
            rot, trans = evaluate_pose(res.transform, scene.truth)
            assert rot < 0.1 and trans < 5e-4

    def test_rmse_history_non_increasing(self):
        rng = np.random.default_rng(2)
        for seed in range(20):
            scene = synth_scene(SceneParams(n_points=100, depth_noise_sigma=0.002, seed=seed))
            start = perturbed(scene.truth, scene.target.points, rng)
            res = icp_refine(start, scene.source.points, scene.target.points)
            h = res.rmse_history
            assert len(h) == res.iterations >= 1
            assert all(h[k + 1] <= h[k] for k in range(len(h) - 1))
            assert res.rmse == h[-1]

    def test_transform_stays_rigid_every_iteration(self):
        scene = synth_scene(SceneParams(n_points=60, depth_noise_sigma=0.003, seed=5))
        rng = np.random.default_rng(3)
        start = perturbed(scene.truth, scene.target.points, rng)
        res = icp_refine(start, scene.source.points, scene.target.points)
        rot = res.transform.rotation
        assert np.abs(rot.T @ rot - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(rot) - 1.0) < 1e-9

    def test_no_overlap_raises(self):
        scene = synth_scene(SceneParams(n_points=40, seed=7))
        far = RigidTransform(scene.truth.rotation, scene.truth.translation + np.array([5.0, 0.0, 0.0]))
        with pytest.raises(NoOverlap):
            icp_refine(far, scene.source.points, scene.target.points)

    def test_empty_cloud_rejected(self):
        with pytest.raises(InvalidParams):
            icp_refine(RigidTransform.identity(), np.zeros((0, 3)), np.zeros((4, 3)))

    def test_radius_gates_outliers(self):
        # Outlier points sit >= min_separation from every inlier, outside the
        # association radius under a near-truth pose, so they cannot drag the fit.
        scene = synth_scene(SceneParams(n_points=60, outlier_count=15, seed=11))
        res = icp_refine(scene.truth, scene.source.points, scene.target.points)
        rot, trans = evaluate_pose(res.transform, scene.truth)
        assert rot < 1e-6 and trans < 1e-9

    def test_respects_max_iterations(self):
        scene = synth_scene(SceneParams(n_points=60, depth_noise_sigma=0.004, seed=13))
        rng = np.random.default_rng(4)
        start = perturbed(scene.truth, scene.target.points, rng)
        res = icp_refine(start, scene.source.points, scene.target.points, IcpConfig(max_iterations=2))
        assert res.iterations <= 2
