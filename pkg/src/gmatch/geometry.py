"""Rigid-geometry primitives: back-projection, distances, triple products,
Kabsch solving, and a constructive transform recovery used as an independent
oracle for the SVD-based solver.

Points are plain numpy arrays of shape (3,) in meters; point sets are (n, 3).
All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChiralityViolation,
    DegenerateGeometry,
    InsufficientCorrespondences,
    InvalidDepth,
    NotConsistent,
)

__all__ = [
    "CameraIntrinsics",
    "RigidTransform",
    "back_project",
    "project_point",
    "pairwise_distance",
    "scalar_triple",
    "kabsch_solve",
    "recover_transform_constructive",
    "verify_consistency",
]

# Orthonormality / properness tolerance for stored rotations.
_ROTATION_TOL = 1e-9

# Relative singular-value threshold below which the source set counts as
# colinear (rotation about the line is unobservable).
_COLINEAR_SV_RATIO = 1e-12

# Relative singular-value threshold for the coplanarity branch of the
# constructive recovery.
_RANK_SV_RATIO = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside image {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid transform: y = rotation @ x + translation.

    Construction rejects anything that is not a rotation (orthonormal,
    det = +1) within 1e-9, reflections included.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        tra = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if not (np.isfinite(rot).all() and np.isfinite(tra).all()):
            raise ValueError("non-finite entries in transform")
        if np.abs(rot.T @ rot - np.eye(3)).max() > _ROTATION_TOL:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(rot) - 1.0) > _ROTATION_TOL:
            raise ValueError("rotation must be proper (det = +1); reflections are rejected")
        rot.setflags(write=False)
        tra.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tra)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, mat) -> "RigidTransform":
        """Build from a 4x4 homogeneous matrix with bottom row (0,0,0,1)."""
        mat = np.asarray(mat, dtype=np.float64)
        if mat.shape != (4, 4):
            raise ValueError(f"expected 4x4 matrix, got {mat.shape}")
        if np.abs(mat[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > 1e-12:
            raise ValueError("bottom row must be (0, 0, 0, 1)")
        return cls(mat[:3, :3], mat[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix, row-major."""
        mat = np.eye(4)
        mat[:3, :3] = self.rotation
        mat[:3, 3] = self.translation
        return mat

    def apply(self, points) -> np.ndarray:
        """Transform one (3,) point or an (n, 3) stack of points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rot_inv = self.rotation.T
        return RigidTransform(rot_inv, -rot_inv @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self ∘ other)(x) = self(other(x))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


def back_project(pixel, depth: float, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Lift a pixel with a depth reading into the camera frame (+z forward).

    Returns ((u-cx)*depth/fx, (v-cy)*depth/fy, depth); the z component equals
    the depth exactly.
    """
    if not (np.isfinite(depth) and depth > 0):
        raise InvalidDepth(f"depth must be positive and finite, got {depth}")
    u, v = float(pixel[0]), float(pixel[1])
    if not (0 <= u < intrinsics.width and 0 <= v < intrinsics.height):
        raise ValueError(f"pixel ({u}, {v}) outside image {intrinsics.width}x{intrinsics.height}")
    return np.array(
        [
            (u - intrinsics.cx) * depth / intrinsics.fx,
            (v - intrinsics.cy) * depth / intrinsics.fy,
            depth,
        ]
    )


def project_point(point, intrinsics: CameraIntrinsics) -> tuple[float, float]:
    """Forward pinhole projection; exact inverse of back_project up to rounding.

    Returns continuous (u, v); callers that need integer pixels round and
    clip themselves.
    """
    point = np.asarray(point, dtype=np.float64)
    z = float(point[2])
    if not (np.isfinite(z) and z > 0):
        raise InvalidDepth(f"point depth must be positive and finite, got {z}")
    return (
        intrinsics.cx + intrinsics.fx * float(point[0]) / z,
        intrinsics.cy + intrinsics.fy * float(point[1]) / z,
    )


def pairwise_distance(a, b) -> float:
    """Euclidean distance between two points."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(a - b))


def scalar_triple(origin, a, b, c) -> float:
    """((origin-a) x (origin-b)) . (origin-c); antisymmetric in a, b."""
    origin = np.asarray(origin, dtype=np.float64)
    u = origin - np.asarray(a, dtype=np.float64)
    v = origin - np.asarray(b, dtype=np.float64)
    w = origin - np.asarray(c, dtype=np.float64)
    return float(np.dot(np.cross(u, v), w))


def _as_point_matrix(points, name: str) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"{name} must be an (n, 3) array, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError(f"{name} contains non-finite coordinates")
    return pts


def kabsch_solve(source, target) -> RigidTransform:
    """Least-squares proper rigid transform mapping source onto target.

    Standard SVD solution of the centered cross-covariance; when the optimal
    orthogonal map would be a reflection, the smallest singular direction is
    flipped so det = +1.
    """
    src = _as_point_matrix(source, "source")
    tgt = _as_point_matrix(target, "target")
    if src.shape != tgt.shape:
        raise ValueError(f"point sets differ in shape: {src.shape} vs {tgt.shape}")
    if src.shape[0] < 3:
        raise InsufficientCorrespondences(f"need at least 3 pairs, got {src.shape[0]}")

    centroid_src = src.mean(axis=0)
    centroid_tgt = tgt.mean(axis=0)
    src_c = src - centroid_src
    tgt_c = tgt - centroid_tgt

    cov = src_c.T @ tgt_c
    u, sv, vt = np.linalg.svd(cov)
    # Rank < 2 means a colinear (or coincident) configuration: the rotation
    # about the remaining axis is unobservable.
    if sv[0] <= 0.0 or sv[1] < _COLINEAR_SV_RATIO * sv[0]:
        raise DegenerateGeometry("point sets are colinear; rotation is underdetermined")

    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rot, centroid_tgt - rot @ centroid_src)


def _orthonormal_residual(vec: np.ndarray, frame: list[np.ndarray]) -> np.ndarray:
    """Component of vec orthogonal to an orthonormal frame (modified G-S)."""
    res = vec.copy()
    for q in frame:
        res -= np.dot(q, res) * q
    return res


def _select_basis(centered: np.ndarray, scale: float) -> list[int]:
    """Greedy pick of centered-vector indices spanning the set, in input order."""
    frame: list[np.ndarray] = []
    chosen: list[int] = []
    tol = _RANK_SV_RATIO * scale
    for i in range(centered.shape[0]):
        if len(chosen) == 3:
            break
        res = _orthonormal_residual(centered[i], frame)
        norm = np.linalg.norm(res)
        if norm > tol:
            frame.append(res / norm)
            chosen.append(i)
    return chosen


def _complete_frame(columns: list[np.ndarray]) -> list[np.ndarray]:
    """Gram-Schmidt vectors from the standard basis, orthonormal and
    orthogonal to the span of the given columns."""
    frame: list[np.ndarray] = []
    span: list[np.ndarray] = []
    for col in columns:
        res = _orthonormal_residual(col, span)
        span.append(res / np.linalg.norm(res))
    extras: list[np.ndarray] = []
    for k in range(3):
        if len(columns) + len(extras) == 3:
            break
        cand = _orthonormal_residual(np.eye(3)[k], span + extras)
        norm = np.linalg.norm(cand)
        if norm > 0.1:
            extras.append(cand / norm)
    return extras


def recover_transform_constructive(source, target, rtol: float = 1e-9) -> RigidTransform:
    """Recover Q, t with target_i = Q @ source_i + t by direct construction.

    Independent of the SVD path: centers both sets at their first point,
    picks a spanning basis among the centered vectors, completes it to three
    dimensions with Gram-Schmidt vectors orthogonal to the span, and forms
    Q = Y @ inv(X). For coplanar sets whose direct Q is a reflection, flips
    the completion column via diag(1, 1, -1) to land in SO(3).

    Requires the two sets to have equal pairwise distances within rtol
    (relative); raises NotConsistent otherwise. Non-coplanar sets related by
    a reflection raise ChiralityViolation.
    """
    src = _as_point_matrix(source, "source")
    tgt = _as_point_matrix(target, "target")
    if src.shape != tgt.shape:
        raise ValueError(f"point sets differ in shape: {src.shape} vs {tgt.shape}")
    n = src.shape[0]
    if n < 2:
        raise InsufficientCorrespondences(f"need at least 2 points, got {n}")

    dist_src = np.linalg.norm(src[:, None, :] - src[None, :, :], axis=2)
    dist_tgt = np.linalg.norm(tgt[:, None, :] - tgt[None, :, :], axis=2)
    gap = np.abs(dist_src - dist_tgt)
    bound = rtol * np.maximum(dist_src, dist_tgt)
    if (gap > bound).any():
        worst = np.unravel_index(np.argmax(gap - bound), gap.shape)
        raise NotConsistent(
            f"pairwise distances disagree at index pair {tuple(int(k) for k in worst)}: "
            f"{dist_src[worst]:.9g} vs {dist_tgt[worst]:.9g}"
        )

    x_c = src - src[0]
    y_c = tgt - tgt[0]
    scale = float(np.linalg.norm(x_c, axis=1).max())

    if scale == 0.0:
        rot = np.eye(3)
    else:
        basis_idx = _select_basis(x_c, scale)
        d = len(basis_idx)
        x_cols = [x_c[i] for i in basis_idx]
        y_cols = [y_c[i] for i in basis_idx]
        mat_x = np.column_stack(x_cols + _complete_frame(x_cols))
        mat_y = np.column_stack(y_cols + _complete_frame(y_cols))
        rot = mat_y @ np.linalg.inv(mat_x)
        if np.linalg.det(rot) < 0:
            if d == 3:
                raise ChiralityViolation(
                    "non-coplanar sets are related by a reflection; no rotation maps one onto the other"
                )
            rot = (mat_y * np.array([1.0, 1.0, -1.0])) @ np.linalg.inv(mat_x)
        # Round off the inversion noise so the result passes the SO(3) gate.
        u, _, vt = np.linalg.svd(rot)
        rot = u @ vt
        if np.linalg.det(rot) < 0:
            rot = u @ np.diag([1.0, 1.0, -1.0]) @ vt

    return RigidTransform(rot, tgt[0] - rot @ src[0])


def verify_consistency(source, target, tol: float, triple_floor: float = 1e-12) -> bool:
    """Exhaustively check geometric consistency of two ordered point sets.

    True iff every pairwise distance agrees within tol (relative) and every
    scalar triple product over index quadruples agrees in sign and within tol
    (relative). Quadruples where either set's triple product falls below
    triple_floor (cubic meters) abstain: near-degenerate volumes carry no
    usable sign. Quartic in n; intended as an oracle for small sets.
    """
    src = _as_point_matrix(source, "source")
    tgt = _as_point_matrix(target, "target")
    if src.shape != tgt.shape:
        raise ValueError(f"point sets differ in shape: {src.shape} vs {tgt.shape}")
    n = src.shape[0]

    dist_src = np.linalg.norm(src[:, None, :] - src[None, :, :], axis=2)
    dist_tgt = np.linalg.norm(tgt[:, None, :] - tgt[None, :, :], axis=2)
    if (np.abs(dist_src - dist_tgt) > tol * np.maximum(dist_src, dist_tgt)).any():
        return False

    for i, j, k, l in _quadruples(n):
        vol_src = scalar_triple(src[i], src[j], src[k], src[l])
        vol_tgt = scalar_triple(tgt[i], tgt[j], tgt[k], tgt[l])
        if min(abs(vol_src), abs(vol_tgt)) < triple_floor:
            continue
        if (vol_src > 0) != (vol_tgt > 0):
            return False
        if abs(vol_src - vol_tgt) > tol * max(abs(vol_src), abs(vol_tgt)):
            return False
    return True


def _quadruples(n: int):
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                for l in range(k + 1, n):
                    yield i, j, k, l
