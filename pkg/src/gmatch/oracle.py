"""Ground-truth machinery: exhaustive maximum-consistent-subset search, a
seeded RANSAC baseline, plain nearest-neighbor matching, and pose error
metrics. Correctness over speed throughout; the exhaustive search is the
yardstick the matcher is measured against."""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    DegenerateGeometry,
    InsufficientCorrespondences,
    NoConsensus,
    PoolTooLarge,
)
from .geometry import RigidTransform, kabsch_solve
from .keypoints import KeypointSet, feature_distances
from .matcher import CandidatePair, MatchConfig, MatchState, flip_over_ok, pairwise_error

__all__ = [
    "brute_force_max_consistent",
    "ransac_baseline",
    "nearest_neighbor_match",
    "evaluate_pose",
]

_MAX_POOL = 20


def brute_force_max_consistent(
    pool: list[CandidatePair],
    src: KeypointSet,
    tgt: KeypointSet,
    cfg: MatchConfig | None = None,
) -> MatchState:
    """Exhaustive maximum consistent subset of the pool.

    A subset qualifies when it is injective in both coordinates, every pair
    of members has pairwise error <= epsilon_c, and (when flip_check is on)
    every triple passes the chirality test. Among maximum-cardinality
    subsets, the one with the smallest total pairwise error wins; remaining
    ties go to the lexicographically smallest pool-index set. The returned
    state's accumulated_cost holds that total pairwise error, the quantity
    the tie-break uses.

    By construction an upper bound on what any filter can extract from the
    pool. Exponential: pools over 20 raise PoolTooLarge.
    """
    cfg = cfg if cfg is not None else MatchConfig()
    n = len(pool)
    if n > _MAX_POOL:
        raise PoolTooLarge(f"pool of {n} exceeds the exhaustive-search cap of {_MAX_POOL}")
    if n == 0:
        return MatchState()

    delta = np.ones((n, n))
    compat = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(a + 1, n):
            pa, pb = pool[a], pool[b]
            if pa.source_idx == pb.source_idx or pa.target_idx == pb.target_idx:
                continue
            d = pairwise_error(pa, pb, src, tgt, cfg.eta)
            delta[a, b] = delta[b, a] = d
            compat[a, b] = compat[b, a] = d <= cfg.epsilon_c

    best_len = 0
    best_total = math.inf
    best_subset: tuple[int, ...] = ()

    def dfs(idx: int, chosen: list[int], total: float):
        nonlocal best_len, best_total, best_subset
        if len(chosen) + (n - idx) < best_len:
            return
        if len(chosen) + (n - idx) == best_len and total >= best_total:
            return
        if idx == n:
            if len(chosen) > best_len or (len(chosen) == best_len and total < best_total):
                best_len = len(chosen)
                best_total = total
                best_subset = tuple(chosen)
            return
        cand = pool[idx]
        admissible = all(compat[idx, c] for c in chosen)
        if admissible and cfg.flip_check and len(chosen) >= 2:
            for x in range(len(chosen)):
                for y in range(x + 1, len(chosen)):
                    a, b = pool[chosen[x]], pool[chosen[y]]
                    if not flip_over_ok(
                        cand.source_idx, a.source_idx, b.source_idx,
                        cand.target_idx, a.target_idx, b.target_idx,
                        src, tgt, cfg.colinear_eps,
                    ):
                        admissible = False
                        break
                if not admissible:
                    break
        if admissible:
            added = float(sum(delta[idx, c] for c in chosen))
            chosen.append(idx)
            dfs(idx + 1, chosen, total + added)
            chosen.pop()
        dfs(idx + 1, chosen, total)

    dfs(0, [], 0.0)
    pairs = tuple((pool[k].source_idx, pool[k].target_idx) for k in best_subset)
    return MatchState(pairs, 0.0 if not pairs else best_total)


def ransac_baseline(
    pool: list[CandidatePair],
    src: KeypointSet,
    tgt: KeypointSet,
    iterations: int = 500,
    inlier_tol: float = 0.01,
    rng_seed: int = 0,
) -> tuple[RigidTransform, list[tuple[int, int]]]:
    """Classic 3-point hypothesize-and-verify over the candidate pool.

    Each iteration samples three distinct pool entries, solves the rigid
    transform they imply, and counts pool pairs whose transfer error falls
    under inlier_tol. The best consensus set is refit once by least squares.
    Seeded, hence reproducible. Raises NoConsensus when no hypothesis ever
    collects three inliers (including iterations = 0).
    """
    n = len(pool)
    if n < 3:
        raise InsufficientCorrespondences(f"need a pool of at least 3, got {n}")
    rng = np.random.default_rng(rng_seed)
    src_pts = np.array([src.points[p.source_idx] for p in pool])
    tgt_pts = np.array([tgt.points[p.target_idx] for p in pool])

    best_count = 0
    best_mask: np.ndarray | None = None
    best_transform: RigidTransform | None = None
    for _ in range(iterations):
        sel = rng.choice(n, size=3, replace=False)
        tri = [pool[k] for k in sel]
        if len({p.source_idx for p in tri}) < 3 or len({p.target_idx for p in tri}) < 3:
            continue
        try:
            hyp = kabsch_solve(src_pts[sel], tgt_pts[sel])
        except DegenerateGeometry:
            continue
        err = np.linalg.norm(hyp.apply(src_pts) - tgt_pts, axis=1)
        mask = err < inlier_tol
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            best_transform = hyp

    if best_count < 3 or best_transform is None:
        raise NoConsensus(f"no hypothesis reached 3 inliers in {iterations} iterations")

    try:
        refit = kabsch_solve(src_pts[best_mask], tgt_pts[best_mask])
        err = np.linalg.norm(refit.apply(src_pts) - tgt_pts, axis=1)
        refit_mask = err < inlier_tol
        if int(refit_mask.sum()) >= 3:
            best_transform, best_mask = refit, refit_mask
    except DegenerateGeometry:
        pass
    inliers = [
        (pool[k].source_idx, pool[k].target_idx) for k in np.flatnonzero(best_mask)
    ]
    return best_transform, inliers


def nearest_neighbor_match(src: KeypointSet, tgt: KeypointSet) -> list[tuple[int, int]]:
    """Each source index paired with its feature-nearest target index.

    The baseline GMatch is compared against: no geometric filtering, not
    even injectivity — duplicated descriptors collapse onto one target.
    """
    if len(src) == 0 or len(tgt) == 0:
        return []
    dmat = feature_distances(src, tgt)
    nearest = np.argmin(dmat, axis=1)
    return [(i, int(nearest[i])) for i in range(len(src))]


def evaluate_pose(estimate: RigidTransform, truth: RigidTransform) -> tuple[float, float]:
    """(geodesic rotation error in degrees, translation error in meters)."""
    trace = float(np.trace(estimate.rotation.T @ truth.rotation))
    cos_angle = min(1.0, max(-1.0, (trace - 1.0) / 2.0))
    rot_err = math.degrees(math.acos(cos_angle))
    trans_err = float(np.linalg.norm(estimate.translation - truth.translation))
    return rot_err, trans_err
