"""Point-to-point ICP refinement of an initial rigid pose."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidParams, NoOverlap
from .geometry import RigidTransform, kabsch_solve

__all__ = ["IcpConfig", "IcpResult", "icp_refine"]


@dataclass(frozen=True)
class IcpConfig:
    """max_iterations caps the loop; correspondence_radius (meters) gates
    nearest-neighbor association; convergence_eps stops on relative RMSE
    change."""

    max_iterations: int = 30
    correspondence_radius: float = 0.02
    convergence_eps: float = 1e-6

    def __post_init__(self):
        if not (isinstance(self.max_iterations, int) and self.max_iterations > 0):
            raise InvalidParams(f"max_iterations must be a positive integer, got {self.max_iterations}")
        if not self.correspondence_radius > 0:
            raise InvalidParams(f"correspondence_radius must be positive, got {self.correspondence_radius}")
        if not self.convergence_eps > 0:
            raise InvalidParams(f"convergence_eps must be positive, got {self.convergence_eps}")


@dataclass(frozen=True)
class IcpResult:
    transform: RigidTransform
    rmse: float
    iterations: int
    rmse_history: tuple[float, ...]


def icp_refine(
    initial: RigidTransform,
    source_points,
    target_points,
    cfg: IcpConfig | None = None,
) -> IcpResult:
    """Alternate radius-gated nearest-neighbor association with least-squares
    solving until the RMSE change falls under convergence_eps or iterations
    run out.

    Each iteration re-solves from the original source points, so the returned
    transform is absolute, not a composition of increments. RMSE over the
    pairs of one association step never increases after its solve (the solver
    is optimal for that association); the history records the post-solve RMSE
    per iteration. Raises NoOverlap when the initial pose puts no source
    point within the association radius of the target.
    """
    cfg = cfg if cfg is not None else IcpConfig()
    src = np.asarray(source_points, dtype=np.float64).reshape(-1, 3)
    tgt = np.asarray(target_points, dtype=np.float64).reshape(-1, 3)
    if src.shape[0] == 0 or tgt.shape[0] == 0:
        raise InvalidParams("both point clouds must be non-empty")

    tree = cKDTree(tgt)
    current = initial
    history: list[float] = []
    prev_rmse = math.inf
    iterations = 0

    for it in range(cfg.max_iterations):
        moved = current.apply(src)
        dist, nn = tree.query(moved, k=1, distance_upper_bound=cfg.correspondence_radius)
        mask = np.isfinite(dist)
        if mask.sum() < 3:
            if it == 0:
                raise NoOverlap(
                    f"only {int(mask.sum())} associations within "
                    f"{cfg.correspondence_radius} m of the target under the initial pose"
                )
            break
        pairs_src = src[mask]
        pairs_tgt = tgt[nn[mask]]
        solved = kabsch_solve(pairs_src, pairs_tgt)
        residual = solved.apply(pairs_src) - pairs_tgt
        rmse = float(np.sqrt(np.mean(np.sum(residual * residual, axis=1))))
        if rmse > prev_rmse:
            # Re-association moved the goalposts upward; keep the better pose.
            break
        current = solved
        history.append(rmse)
        iterations = it + 1
        if prev_rmse - rmse <= cfg.convergence_eps * max(prev_rmse, 1e-30):
            prev_rmse = rmse
            break
        prev_rmse = rmse

    if not history:
        raise NoOverlap("no associations formed")
    return IcpResult(current, history[-1], iterations, tuple(history))
