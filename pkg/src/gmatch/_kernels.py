"""Compiled inner loops for hypothesis seeding and expansion.

These mirror the reference implementation in matcher.py exactly; the tests
assert that both produce identical output on shared inputs. To keep float
results bit-equal, scalar arithmetic here is written in the same operation
order as the reference, and fastmath stays off.

ps / pt are the source / target 3-D coordinates gathered per candidate-pair
pool entry, so row p of each corresponds to pool entry p.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _delta(ps, pt, a, b, eta):
    # Relative length error of pool entries a, b; saturates to 1 beyond the
    # hard margin and for zero-length (coincident-source) segments.
    dx = ps[a, 0] - ps[b, 0]
    dy = ps[a, 1] - ps[b, 1]
    dz = ps[a, 2] - ps[b, 2]
    l_s = math.sqrt(dx * dx + dy * dy + dz * dz)
    dx = pt[a, 0] - pt[b, 0]
    dy = pt[a, 1] - pt[b, 1]
    dz = pt[a, 2] - pt[b, 2]
    l_t = math.sqrt(dx * dx + dy * dy + dz * dz)
    if l_s == 0.0:
        return 1.0
    gap = abs(l_s - l_t)
    if gap >= eta:
        return 1.0
    return gap / l_s


@njit(cache=True)
def _flip_ok(ps, pt, c, m1, m2, vs, vt, colinear_eps):
    # Chirality vote of the triple (c, m1, m2): the triangle normal must face
    # the same way relative to the view on both sides. |dot| below
    # colinear_eps (which also covers |cross| below it, since view is unit)
    # abstains.
    ax = ps[c, 0] - ps[m1, 0]
    ay = ps[c, 1] - ps[m1, 1]
    az = ps[c, 2] - ps[m1, 2]
    bx = ps[c, 0] - ps[m2, 0]
    by = ps[c, 1] - ps[m2, 1]
    bz = ps[c, 2] - ps[m2, 2]
    ds = (
        (ay * bz - az * by) * vs[0]
        + (az * bx - ax * bz) * vs[1]
        + (ax * by - ay * bx) * vs[2]
    )
    ax = pt[c, 0] - pt[m1, 0]
    ay = pt[c, 1] - pt[m1, 1]
    az = pt[c, 2] - pt[m1, 2]
    bx = pt[c, 0] - pt[m2, 0]
    by = pt[c, 1] - pt[m2, 1]
    bz = pt[c, 2] - pt[m2, 2]
    dt = (
        (ay * bz - az * by) * vt[0]
        + (az * bx - ax * bz) * vt[1]
        + (ax * by - ay * bx) * vt[2]
    )
    if abs(ds) < colinear_eps or abs(dt) < colinear_eps:
        return True
    return (ds > 0.0) == (dt > 0.0)


@njit(cache=True)
def seed_kernel(ps, pt, src_idx, tgt_idx, top, eps_c, eta, colinear_eps, vs, vt, flip_check):
    """Enumerate seed triples (i, j, k), i < j < k < top, with pruning.

    Returns (seeds (S, 3) pool indices, costs (S,)) in enumeration order.
    Cost is the two-extension sum: delta(i,j) + max(delta(i,k), delta(j,k)).
    """
    dmat = np.empty((top, top), np.float64)
    for i in range(top):
        for j in range(i + 1, top):
            d = _delta(ps, pt, i, j, eta)
            dmat[i, j] = d
            dmat[j, i] = d

    cap = top * (top - 1) * (top - 2) // 6 if top >= 3 else 0
    seeds = np.empty((cap, 3), np.int64)
    costs = np.empty(cap, np.float64)
    n = 0
    for i in range(top):
        for j in range(i + 1, top):
            if src_idx[i] == src_idx[j] or tgt_idx[i] == tgt_idx[j]:
                continue
            dij = dmat[i, j]
            if dij > eps_c:
                continue
            for k in range(j + 1, top):
                if src_idx[k] == src_idx[i] or src_idx[k] == src_idx[j]:
                    continue
                if tgt_idx[k] == tgt_idx[i] or tgt_idx[k] == tgt_idx[j]:
                    continue
                dik = dmat[i, k]
                if dik > eps_c:
                    continue
                djk = dmat[j, k]
                if djk > eps_c:
                    continue
                # Colinear source triples span no plane and cannot seed.
                ax = ps[i, 0] - ps[j, 0]
                ay = ps[i, 1] - ps[j, 1]
                az = ps[i, 2] - ps[j, 2]
                bx = ps[i, 0] - ps[k, 0]
                by = ps[i, 1] - ps[k, 1]
                bz = ps[i, 2] - ps[k, 2]
                cx = ay * bz - az * by
                cy = az * bx - ax * bz
                cz = ax * by - ay * bx
                if math.sqrt(cx * cx + cy * cy + cz * cz) < colinear_eps:
                    continue
                if flip_check and not _flip_ok(ps, pt, i, j, k, vs, vt, colinear_eps):
                    continue
                ext = dik
                if djk > ext:
                    ext = djk
                seeds[n, 0] = i
                seeds[n, 1] = j
                seeds[n, 2] = k
                costs[n] = dij + ext
                n += 1
    return seeds[:n], costs[:n]


@njit(cache=True)
def expand_kernel(
    ps, pt, src_idx, tgt_idx, n_src, n_tgt, seeds, seed_costs,
    eps_c, eta, colinear_eps, vs, vt, flip_check, max_len,
):
    """Grow every seed independently to max_len, one best pair per step.

    Returns (pairs (S, max_len) pool indices padded with -1, lengths (S,),
    accumulated costs (S,), step scans (S,)).
    """
    n_seed = seeds.shape[0]
    n_pool = src_idx.shape[0]
    out_pairs = np.full((n_seed, max_len), -1, np.int64)
    out_len = np.empty(n_seed, np.int64)
    out_cost = np.empty(n_seed, np.float64)
    out_scans = np.zeros(n_seed, np.int64)
    # Epoch-stamped used marks: value == current seed index means taken.
    used_src = np.full(n_src, -1, np.int64)
    used_tgt = np.full(n_tgt, -1, np.int64)
    run_cost = np.empty(n_pool, np.float64)

    for s in range(n_seed):
        a = seeds[s, 0]
        b = seeds[s, 1]
        c = seeds[s, 2]
        used_src[src_idx[a]] = s
        used_src[src_idx[b]] = s
        used_src[src_idx[c]] = s
        used_tgt[tgt_idx[a]] = s
        used_tgt[tgt_idx[b]] = s
        used_tgt[tgt_idx[c]] = s
        out_pairs[s, 0] = a
        out_pairs[s, 1] = b
        out_pairs[s, 2] = c
        length = 3
        acc = seed_costs[s]
        for p in range(n_pool):
            g = _delta(ps, pt, p, a, eta)
            d = _delta(ps, pt, p, b, eta)
            if d > g:
                g = d
            d = _delta(ps, pt, p, c, eta)
            if d > g:
                g = d
            run_cost[p] = g
        m1 = c
        m2 = b
        while length < max_len:
            out_scans[s] += 1
            best = -1
            best_g = 0.0
            for p in range(n_pool):
                g = run_cost[p]
                if g > eps_c:
                    continue
                if best != -1 and g >= best_g:
                    continue
                if used_src[src_idx[p]] == s or used_tgt[tgt_idx[p]] == s:
                    continue
                # Flip-over evaluated lazily: only when p would win.
                if flip_check and not _flip_ok(ps, pt, p, m1, m2, vs, vt, colinear_eps):
                    continue
                best = p
                best_g = g
            if best == -1:
                break
            out_pairs[s, length] = best
            length += 1
            acc += best_g
            used_src[src_idx[best]] = s
            used_tgt[tgt_idx[best]] = s
            m2 = m1
            m1 = best
            for p in range(n_pool):
                d = _delta(ps, pt, p, best, eta)
                if d > run_cost[p]:
                    run_cost[p] = d
        out_len[s] = length
        out_cost[s] = acc
    return out_pairs, out_len, out_cost, out_scans
