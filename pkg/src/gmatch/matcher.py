"""Geometry-consistent incremental keypoint matching.

Descriptor distance proposes candidate pairs; geometry disposes. Candidates
are grown into hypotheses whose pairwise 3-D distances must stay mutually
consistent (relative error within epsilon_c, hard margin eta), with a
view-direction chirality test rejecting mirror-image assignments that
distances alone cannot tell apart. Hypotheses are seeded as triples from the
top-scoring candidates, expanded independently one best pair at a time, and
the longest one (cheapest on ties) wins.

Every public operation here is a pure function and deterministic: fixed
total orders break all ties. The module-level functions (pairwise_error,
distance_cost, flip_over_ok, step, seed_hypotheses) are the reference
implementation; gmatch dispatches to compiled kernels that replicate them
exactly unless config.use_kernels is off.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels
from .errors import InvalidParams
from .geometry import RigidTransform, kabsch_solve
from .keypoints import KeypointSet, feature_distances

__all__ = [
    "MatchConfig",
    "CandidatePair",
    "MatchState",
    "MatchResult",
    "candidate_pairs",
    "pairwise_error",
    "distance_cost",
    "flip_over_ok",
    "step",
    "seed_hypotheses",
    "gmatch",
    "gmatch_detailed",
    "pose_from_matches",
]


@dataclass(frozen=True)
class MatchConfig:
    """Tunables of the matcher.

    epsilon_f: feature-distance gate; None picks the metric's default
        (0.1 euclidean, 90 hamming).
    epsilon_c: geometric cost tolerance in (0, 1].
    eta: hard margin of the pairwise error, meters; length differences at or
        beyond it saturate the error to 1.
    top_t: how many best candidates seed hypotheses.
    max_len: hypothesis length cap.
    colinear_eps: degeneracy threshold (square meters of cross-product
        magnitude) below which triples abstain from chirality votes.
    flip_check: disable only to measure what the chirality test contributes.
    tie_break: fixed policy tag, single supported value.
    use_kernels: run the compiled path; off = pure-python reference.
    """

    epsilon_f: float | None = None
    epsilon_c: float = 0.08
    eta: float = 0.02
    top_t: int = 24
    max_len: int = 24
    colinear_eps: float = 1e-9
    flip_check: bool = True
    tie_break: str = "cost-featdist-lex"
    use_kernels: bool = True

    def __post_init__(self):
        if self.epsilon_f is not None and not self.epsilon_f > 0:
            raise InvalidParams(f"epsilon_f must be positive, got {self.epsilon_f}")
        if not 0 < self.epsilon_c <= 1:
            raise InvalidParams(f"epsilon_c must be in (0, 1], got {self.epsilon_c}")
        if not self.eta > 0:
            raise InvalidParams(f"eta must be positive, got {self.eta}")
        if not (isinstance(self.top_t, int) and self.top_t >= 3):
            raise InvalidParams(f"top_t must be an integer >= 3, got {self.top_t}")
        if not (isinstance(self.max_len, int) and self.max_len >= 3):
            raise InvalidParams(f"max_len must be an integer >= 3, got {self.max_len}")
        if not self.colinear_eps > 0:
            raise InvalidParams(f"colinear_eps must be positive, got {self.colinear_eps}")
        if self.tie_break != "cost-featdist-lex":
            raise InvalidParams(f"unsupported tie_break policy {self.tie_break!r}")

    def resolve_epsilon_f(self, metric) -> float:
        return self.epsilon_f if self.epsilon_f is not None else metric.default_epsilon_f


class CandidatePair(NamedTuple):
    """A (source, target) index pair whose feature distance passed the gate."""

    source_idx: int
    target_idx: int
    feat_dist: float


@dataclass(frozen=True)
class MatchState:
    """An ordered, injective hypothesis: pairs and the sum of accepted step costs."""

    pairs: tuple[tuple[int, int], ...] = ()
    accumulated_cost: float = 0.0

    def __len__(self) -> int:
        return len(self.pairs)

    def source_indices(self) -> list[int]:
        return [p[0] for p in self.pairs]

    def target_indices(self) -> list[int]:
        return [p[1] for p in self.pairs]

    def extended(self, pair: tuple[int, int], cost: float) -> "MatchState":
        return MatchState(self.pairs + (tuple(pair),), self.accumulated_cost + cost)


@dataclass(frozen=True)
class MatchResult:
    """gmatch output plus the counters and timings behind it."""

    state: MatchState
    pool_size: int
    seed_count: int
    step_scans: int
    hypothesis_lengths: np.ndarray
    hypothesis_costs: np.ndarray
    winner_seed: int
    candidate_seconds: float
    seed_seconds: float
    expand_seconds: float

    @property
    def match_seconds(self) -> float:
        """Seeding plus expansion: the geometry-search stage."""
        return self.seed_seconds + self.expand_seconds


def _dist3(p, q) -> float:
    # One canonical scalar distance expression, shared operation order with
    # the compiled kernels so both paths agree bitwise.
    dx = p[0] - q[0]
    dy = p[1] - q[1]
    dz = p[2] - q[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def pairwise_error(p, pair, src: KeypointSet, tgt: KeypointSet, eta: float) -> float:
    """Relative segment-length error of two candidate pairs, margin-limited.

    With l_s the source-segment length and l_t the target's: |l_s - l_t|/l_s
    when the gap is under eta, else exactly 1; coincident source points (l_s
    = 0) also score 1, penalizing pairs formed from points too close apart.
    """
    i1, j1 = p[0], p[1]
    i2, j2 = pair[0], pair[1]
    l_s = _dist3(src.points[i1], src.points[i2])
    l_t = _dist3(tgt.points[j1], tgt.points[j2])
    if l_s == 0.0:
        return 1.0
    gap = abs(l_s - l_t)
    if gap >= eta:
        return 1.0
    return gap / l_s


def distance_cost(state: MatchState, pair, src: KeypointSet, tgt: KeypointSet, eta: float) -> float:
    """Max pairwise_error between the candidate and every existing match.

    Monotone in the state: extending the state can never lower any
    candidate's cost.
    """
    if len(state.pairs) == 0:
        raise InvalidParams("distance_cost needs a non-empty state")
    worst = 0.0
    for member in state.pairs:
        d = pairwise_error(member, pair, src, tgt, eta)
        if d > worst:
            worst = d
    return worst


def flip_over_ok(
    i1: int, i2: int, i3: int, j1: int, j2: int, j3: int,
    src: KeypointSet, tgt: KeypointSet, colinear_eps: float = 1e-9,
) -> bool:
    """Chirality consistency of a matched triple.

    The triangle normal (pt1-pt2) x (pt1-pt3), dotted with the camera view,
    must have the same sign on the source and target sides: an opaque surface
    is seen from one side only, so a sign flip marks a mirror assignment.
    Degenerate triangles abstain (return True): when either cross product or
    its view dot-product has magnitude under colinear_eps there is no
    orientation to compare. Since views are unit vectors, |dot| <= |cross|,
    so testing the dot products covers both conditions.
    """
    s = src.points
    t = tgt.points
    ds = _signed_view_volume(s[i1], s[i2], s[i3], src.view)
    dt = _signed_view_volume(t[j1], t[j2], t[j3], tgt.view)
    if abs(ds) < colinear_eps or abs(dt) < colinear_eps:
        return True
    return (ds > 0.0) == (dt > 0.0)


def _signed_view_volume(p1, p2, p3, view) -> float:
    ax = p1[0] - p2[0]
    ay = p1[1] - p2[1]
    az = p1[2] - p2[2]
    bx = p1[0] - p3[0]
    by = p1[1] - p3[1]
    bz = p1[2] - p3[2]
    return (
        (ay * bz - az * by) * view[0]
        + (az * bx - ax * bz) * view[1]
        + (ax * by - ay * bx) * view[2]
    )


def _cross_norm(p1, p2, p3) -> float:
    ax = p1[0] - p2[0]
    ay = p1[1] - p2[1]
    az = p1[2] - p2[2]
    bx = p1[0] - p3[0]
    by = p1[1] - p3[1]
    bz = p1[2] - p3[2]
    cx = ay * bz - az * by
    cy = az * bx - ax * bz
    cz = ax * by - ay * bx
    return math.sqrt(cx * cx + cy * cy + cz * cz)


def candidate_pairs(src: KeypointSet, tgt: KeypointSet, cfg: MatchConfig | None = None) -> list[CandidatePair]:
    """All (i, j) with feature distance strictly under epsilon_f.

    Sorted ascending by feature distance, ties by (i, j) lexicographic.
    Computed once per set pair; every step later masks used indices instead
    of re-deriving the pool.
    """
    cfg = cfg if cfg is not None else MatchConfig()
    ii, jj, fd = _candidate_arrays(src, tgt, cfg)
    return [
        CandidatePair(int(i), int(j), float(d))
        for i, j, d in zip(ii.tolist(), jj.tolist(), fd.tolist())
    ]


def _candidate_arrays(src: KeypointSet, tgt: KeypointSet, cfg: MatchConfig):
    eps_f = cfg.resolve_epsilon_f(src.metric)
    dmat = feature_distances(src, tgt)
    ii, jj = np.nonzero(dmat < eps_f)
    fd = dmat[ii, jj]
    order = np.lexsort((jj, ii, fd))
    return (
        np.ascontiguousarray(ii[order], dtype=np.int64),
        np.ascontiguousarray(jj[order], dtype=np.int64),
        np.ascontiguousarray(fd[order], dtype=np.float64),
    )


def step(
    state: MatchState,
    pool: list[CandidatePair],
    src: KeypointSet,
    tgt: KeypointSet,
    cfg: MatchConfig,
) -> Optional[CandidatePair]:
    """One extension: the cheapest admissible pool pair, or None.

    Admissible means: source and target indices unused by the state, cost
    g <= epsilon_c, and (when enabled) a chirality vote consistent with the
    last two matches. Ties break by smaller feature distance then (i, j)
    lexicographic, which is pool order. Requires at least two matches in the
    state, since the chirality test anchors on them.
    """
    if len(state.pairs) < 2:
        raise InvalidParams("step needs a state of length >= 2 for the chirality anchors")
    used_s = set(state.source_indices())
    used_t = set(state.target_indices())
    m1 = state.pairs[-1]
    m2 = state.pairs[-2]
    best: Optional[CandidatePair] = None
    best_g = 0.0
    for cand in pool:
        g = distance_cost(state, cand, src, tgt, cfg.eta)
        if g > cfg.epsilon_c:
            continue
        if best is not None and g >= best_g:
            continue
        if cand.source_idx in used_s or cand.target_idx in used_t:
            continue
        if cfg.flip_check and not flip_over_ok(
            cand.source_idx, m1[0], m2[0],
            cand.target_idx, m1[1], m2[1],
            src, tgt, cfg.colinear_eps,
        ):
            continue
        best = cand
        best_g = g
    return best


def seed_hypotheses(
    pool: list[CandidatePair],
    src: KeypointSet,
    tgt: KeypointSet,
    cfg: MatchConfig,
) -> list[MatchState]:
    """Length-3 hypotheses from the top-T pool prefix, in enumeration order.

    Enumerates combinations p1 < p2 < p3 (pool order), pruning index
    collisions, any pairwise error above epsilon_c, colinear source triples,
    and (when enabled) chirality-inconsistent triples. Each survivor carries
    accumulated_cost = delta(p1,p2) + max(delta(p1,p3), delta(p2,p3)), the
    costs its two extension steps would have paid.
    """
    top = min(cfg.top_t, len(pool))
    out: list[MatchState] = []
    for a in range(top):
        pa = pool[a]
        for b in range(a + 1, top):
            pb = pool[b]
            if pa.source_idx == pb.source_idx or pa.target_idx == pb.target_idx:
                continue
            dab = pairwise_error(pa, pb, src, tgt, cfg.eta)
            if dab > cfg.epsilon_c:
                continue
            for c in range(b + 1, top):
                pc = pool[c]
                if pc.source_idx in (pa.source_idx, pb.source_idx):
                    continue
                if pc.target_idx in (pa.target_idx, pb.target_idx):
                    continue
                dac = pairwise_error(pa, pc, src, tgt, cfg.eta)
                if dac > cfg.epsilon_c:
                    continue
                dbc = pairwise_error(pb, pc, src, tgt, cfg.eta)
                if dbc > cfg.epsilon_c:
                    continue
                if (
                    _cross_norm(src.points[pa.source_idx], src.points[pb.source_idx], src.points[pc.source_idx])
                    < cfg.colinear_eps
                ):
                    continue
                if cfg.flip_check and not flip_over_ok(
                    pa.source_idx, pb.source_idx, pc.source_idx,
                    pa.target_idx, pb.target_idx, pc.target_idx,
                    src, tgt, cfg.colinear_eps,
                ):
                    continue
                ext = dac if dac > dbc else dbc
                out.append(
                    MatchState(
                        (
                            (pa.source_idx, pa.target_idx),
                            (pb.source_idx, pb.target_idx),
                            (pc.source_idx, pc.target_idx),
                        ),
                        dab + ext,
                    )
                )
    return out


def _expand_python(seed_state: MatchState, pool, src, tgt, cfg) -> tuple[MatchState, int]:
    state = seed_state
    scans = 0
    while len(state) < cfg.max_len:
        scans += 1
        nxt = step(state, pool, src, tgt, cfg)
        if nxt is None:
            break
        g = distance_cost(state, nxt, src, tgt, cfg.eta)
        state = state.extended((nxt.source_idx, nxt.target_idx), g)
    return state, scans


def _empty_result(pool_size: int, candidate_seconds: float) -> MatchResult:
    return MatchResult(
        state=MatchState(),
        pool_size=pool_size,
        seed_count=0,
        step_scans=0,
        hypothesis_lengths=np.zeros(0, dtype=np.int64),
        hypothesis_costs=np.zeros(0, dtype=np.float64),
        winner_seed=-1,
        candidate_seconds=candidate_seconds,
        seed_seconds=0.0,
        expand_seconds=0.0,
    )


def gmatch_detailed(src: KeypointSet, tgt: KeypointSet, cfg: MatchConfig | None = None) -> MatchResult:
    """Full search with per-stage timings and hypothesis diagnostics."""
    cfg = cfg if cfg is not None else MatchConfig()
    t0 = time.perf_counter()
    ii, jj, fd = _candidate_arrays(src, tgt, cfg)
    t1 = time.perf_counter()
    n_pool = ii.shape[0]
    if n_pool < 3:
        return _empty_result(n_pool, t1 - t0)

    if cfg.use_kernels:
        ps = np.ascontiguousarray(src.points[ii])
        pt = np.ascontiguousarray(tgt.points[jj])
        vs = np.ascontiguousarray(src.view)
        vt = np.ascontiguousarray(tgt.view)
        top = min(cfg.top_t, n_pool)
        t2 = time.perf_counter()
        seeds, seed_costs = _kernels.seed_kernel(
            ps, pt, ii, jj, top,
            cfg.epsilon_c, cfg.eta, cfg.colinear_eps, vs, vt, cfg.flip_check,
        )
        t3 = time.perf_counter()
        if seeds.shape[0] == 0:
            res = _empty_result(n_pool, t1 - t0)
            return MatchResult(
                state=res.state, pool_size=n_pool, seed_count=0, step_scans=0,
                hypothesis_lengths=res.hypothesis_lengths,
                hypothesis_costs=res.hypothesis_costs, winner_seed=-1,
                candidate_seconds=t1 - t0, seed_seconds=t3 - t2, expand_seconds=0.0,
            )
        out_pairs, out_len, out_cost, out_scans = _kernels.expand_kernel(
            ps, pt, ii, jj, len(src), len(tgt), seeds, seed_costs,
            cfg.epsilon_c, cfg.eta, cfg.colinear_eps, vs, vt, cfg.flip_check, cfg.max_len,
        )
        t4 = time.perf_counter()
        win = _select_winner(out_len, out_cost)
        pairs = tuple(
            (int(ii[p]), int(jj[p])) for p in out_pairs[win, : out_len[win]]
        )
        return MatchResult(
            state=MatchState(pairs, float(out_cost[win])),
            pool_size=n_pool,
            seed_count=int(seeds.shape[0]),
            step_scans=int(out_scans.sum()),
            hypothesis_lengths=out_len,
            hypothesis_costs=out_cost,
            winner_seed=win,
            candidate_seconds=t1 - t0,
            seed_seconds=t3 - t2,
            expand_seconds=t4 - t3,
        )

    pool = [
        CandidatePair(int(i), int(j), float(d))
        for i, j, d in zip(ii.tolist(), jj.tolist(), fd.tolist())
    ]
    t2 = time.perf_counter()
    seeds_py = seed_hypotheses(pool, src, tgt, cfg)
    t3 = time.perf_counter()
    if not seeds_py:
        res = _empty_result(n_pool, t1 - t0)
        return MatchResult(
            state=res.state, pool_size=n_pool, seed_count=0, step_scans=0,
            hypothesis_lengths=res.hypothesis_lengths,
            hypothesis_costs=res.hypothesis_costs, winner_seed=-1,
            candidate_seconds=t1 - t0, seed_seconds=t3 - t2, expand_seconds=0.0,
        )
    lengths = np.empty(len(seeds_py), dtype=np.int64)
    costs = np.empty(len(seeds_py), dtype=np.float64)
    expanded: list[MatchState] = []
    total_scans = 0
    for idx, seed_state in enumerate(seeds_py):
        state, scans = _expand_python(seed_state, pool, src, tgt, cfg)
        expanded.append(state)
        lengths[idx] = len(state)
        costs[idx] = state.accumulated_cost
        total_scans += scans
    t4 = time.perf_counter()
    win = _select_winner(lengths, costs)
    return MatchResult(
        state=expanded[win],
        pool_size=n_pool,
        seed_count=len(seeds_py),
        step_scans=total_scans,
        hypothesis_lengths=lengths,
        hypothesis_costs=costs,
        winner_seed=win,
        candidate_seconds=t1 - t0,
        seed_seconds=t3 - t2,
        expand_seconds=t4 - t3,
    )


def _select_winner(lengths: np.ndarray, costs: np.ndarray) -> int:
    # Max length, then min accumulated cost, then earliest seed.
    win = 0
    for s in range(1, lengths.shape[0]):
        if lengths[s] > lengths[win] or (
            lengths[s] == lengths[win] and costs[s] < costs[win]
        ):
            win = s
    return win


def gmatch(src: KeypointSet, tgt: KeypointSet, cfg: MatchConfig | None = None) -> MatchState:
    """The matcher end to end; empty MatchState when nothing can be seeded.

    The winner is the longest expanded hypothesis; ties break by smaller
    accumulated cost, then seed enumeration order. A correspondences filter:
    every returned pair came from the candidate pool.
    """
    return gmatch_detailed(src, tgt, cfg).state


def pose_from_matches(src: KeypointSet, tgt: KeypointSet, state: MatchState) -> RigidTransform:
    """Least-squares pose of the matched points (source onto target)."""
    idx_s = np.array(state.source_indices(), dtype=np.int64)
    idx_t = np.array(state.target_indices(), dtype=np.int64)
    return kabsch_solve(src.points[idx_s], tgt.points[idx_t])
