"""Geometry-constrained keypoint matching and 6DoF rigid pose estimation.

The package matches two RGB-D keypoint sets by growing correspondence
hypotheses under pairwise-isometry and chirality constraints, then solves
and refines the rigid transform between them.
"""

from .errors import (
    ChiralityViolation,
    DegenerateGeometry,
    GMatchError,
    InsufficientCorrespondences,
    InvalidDepth,
    InvalidDepthWarning,
    InvalidParams,
    MetricMismatch,
    MetricUnknown,
    NoConsensus,
    NoOverlap,
    NotConsistent,
    ParseError,
    PoolTooLarge,
)
from .fileio import (
    PoseData,
    load_keypoints,
    load_pose,
    pose_to_json,
    save_keypoints,
    save_pose,
)
from .geometry import (
    CameraIntrinsics,
    RigidTransform,
    back_project,
    kabsch_solve,
    pairwise_distance,
    project_point,
    recover_transform_constructive,
    scalar_triple,
    verify_consistency,
)
from .keypoints import FeatureMetric, KeypointSet, feature_distances
from .matcher import (
    CandidatePair,
    MatchConfig,
    MatchResult,
    MatchState,
    candidate_pairs,
    distance_cost,
    flip_over_ok,
    gmatch,
    gmatch_detailed,
    pairwise_error,
    pose_from_matches,
    seed_hypotheses,
    step,
)
from .oracle import (
    brute_force_max_consistent,
    evaluate_pose,
    nearest_neighbor_match,
    ransac_baseline,
)
from .refine import IcpConfig, IcpResult, icp_refine
from .synth import SYNTH_INTRINSICS, SceneParams, SynthScene, planar_mirror_scene, synth_scene

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "CandidatePair",
    "ChiralityViolation",
    "DegenerateGeometry",
    "FeatureMetric",
    "GMatchError",
    "IcpConfig",
    "IcpResult",
    "InsufficientCorrespondences",
    "InvalidDepth",
    "InvalidDepthWarning",
    "InvalidParams",
    "KeypointSet",
    "MatchConfig",
    "MatchResult",
    "MatchState",
    "MetricMismatch",
    "MetricUnknown",
    "NoConsensus",
    "NoOverlap",
    "NotConsistent",
    "ParseError",
    "PoolTooLarge",
    "PoseData",
    "RigidTransform",
    "SYNTH_INTRINSICS",
    "SceneParams",
    "SynthScene",
    "back_project",
    "brute_force_max_consistent",
    "candidate_pairs",
    "distance_cost",
    "evaluate_pose",
    "feature_distances",
    "flip_over_ok",
    "gmatch",
    "gmatch_detailed",
    "icp_refine",
    "kabsch_solve",
    "load_keypoints",
    "load_pose",
    "nearest_neighbor_match",
    "pairwise_distance",
    "pairwise_error",
    "planar_mirror_scene",
    "pose_from_matches",
    "pose_to_json",
    "project_point",
    "ransac_baseline",
    "recover_transform_constructive",
    "save_keypoints",
    "save_pose",
    "scalar_triple",
    "seed_hypotheses",
    "step",
    "synth_scene",
    "verify_consistency",
]
