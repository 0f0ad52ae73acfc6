"""Compiled kernels: keyed hashing, walk replay, range sets and frog fronts.

Every random quantity is a pure function of (seed, site, counter) through a
splitmix64-style mixer, so nothing here carries generator state.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U = np.uint64
GOLDEN = _U(0x9E3779B97F4A7C15)
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
OCC_TAG = _U(0x5851F42D4C957F2D)
WALK_TAG = _U(0x2545F4914F6CDD1D)

REGION_ALL = 0
REGION_L1 = 1
REGION_L2 = 2
REGION_LINF = 3
REGION_MASK = 4


@njit(cache=True, nogil=True)
def mix64(z):
    z = z ^ (z >> _U(30))
    z = z * _M1
    z = z ^ (z >> _U(27))
    z = z * _M2
    return z ^ (z >> _U(31))


@njit(cache=True, nogil=True)
def site_key(seed, p):
    h = mix64(_U(seed) ^ GOLDEN)
    for i in range(p.shape[0]):
        c = _U(np.int64(p[i]) & np.int64(0x7FFFFFFFFFFFFFFF))
        if p[i] < 0:
            c = c | _U(0x8000000000000000)
        h = mix64(h ^ (c * _M1 + _U(i + 1) * _M2))
    return h


@njit(cache=True, nogil=True)
def walk_key(seed, p):
    return mix64(site_key(seed, p) ^ WALK_TAG)


@njit(cache=True, nogil=True)
def step_direction(wkey, k, two_d):
    u = mix64(wkey + _U(k) * GOLDEN)
    return np.int64(((u >> _U(32)) * _U(two_d)) >> _U(32))


@njit(cache=True, nogil=True)
def occupancy_hash(seed, p):
    return mix64(site_key(seed, p) ^ OCC_TAG)


@njit(cache=True, nogil=True)
def in_region(p, kind, center, radius):
    if kind == REGION_ALL:
        return True
    d = p.shape[0]
    acc = 0
    for i in range(d):
        a = abs(p[i] - center[i])
        if kind == REGION_L1:
            acc += a
        elif kind == REGION_L2:
            acc += a * a
        else:
            if a > acc:
                acc = a
    if kind == REGION_L2:
        return acc <= radius * radius
    return acc <= radius


@njit(cache=True, nogil=True)
def is_occupied(seed, p, thresh, full, force_origin, kind, center, radius):
    if force_origin:
        zero = True
        for i in range(p.shape[0]):
            if p[i] != 0:
                zero = False
                break
        if zero:
            return True
    if not in_region(p, kind, center, radius):
        return False
    if full:
        return True
    return occupancy_hash(seed, p) < thresh


@njit(cache=True, nogil=True)
def occupancy_many(seed, pts, thresh, full, force_origin, kind, center, radius):
    out = np.zeros(pts.shape[0], dtype=np.bool_)
    for j in range(pts.shape[0]):
        out[j] = is_occupied(seed, pts[j], thresh, full, force_origin, kind, center, radius)
    return out


@njit(cache=True, nogil=True)
def walk_directions(seed, x, k0, k1):
    """Direction indices of steps k0..k1-1 (1-based step counters) of S^x."""
    wk = walk_key(seed, x)
    two_d = 2 * x.shape[0]
    out = np.empty(k1 - k0, dtype=np.int64)
    for k in range(k0, k1):
        out[k - k0] = step_direction(wk, k, two_d)
    return out


@njit(cache=True, nogil=True)
def walk_path(seed, x, n):
    """Positions S^x_0..S^x_n as an (n+1, d) array."""
    d = x.shape[0]
    out = np.empty((n + 1, d), dtype=np.int64)
    wk = walk_key(seed, x)
    for i in range(d):
        out[0, i] = x[i]
    for k in range(1, n + 1):
        dirn = step_direction(wk, k, 2 * d)
        for i in range(d):
            out[k, i] = out[k - 1, i]
        if dirn & 1:
            out[k, dirn >> 1] -= 1
        else:
            out[k, dirn >> 1] += 1
    return out


@njit(cache=True, nogil=True)
def walk_position(seed, x, n):
    d = x.shape[0]
    pos = x.copy()
    wk = walk_key(seed, x)
    for k in range(1, n + 1):
        dirn = step_direction(wk, k, 2 * d)
        if dirn & 1:
            pos[dirn >> 1] -= 1
        else:
            pos[dirn >> 1] += 1
    return pos


@njit(cache=True, nogil=True)
def first_hit(seed, x, y, horizon):
    """Least k in [0, horizon] with S^x_k = y, or -1."""
    d = x.shape[0]
    pos = x.copy()
    same = True
    for i in range(d):
        if pos[i] != y[i]:
            same = False
    if same:
        return 0
    wk = walk_key(seed, x)
    for k in range(1, horizon + 1):
        dirn = step_direction(wk, k, 2 * d)
        if dirn & 1:
            pos[dirn >> 1] -= 1
        else:
            pos[dirn >> 1] += 1
        if pos[dirn >> 1] == y[dirn >> 1]:
            same = True
            for i in range(d):
                if pos[i] != y[i]:
                    same = False
                    break
            if same:
                return k
    return -1


@njit(cache=True, nogil=True)
def flat_index(p, center, radius):
    side = 2 * radius + 1
    idx = 0
    for i in range(p.shape[0]):
        c = p[i] - center[i] + radius
        if c < 0 or c >= side:
            return -1
        idx = idx * side + c
    return idx


@njit(cache=True, nogil=True)
def unflatten(idx, center, radius, d):
    side = 2 * radius + 1
    out = np.empty(d, dtype=np.int64)
    for i in range(d - 1, -1, -1):
        out[i] = idx % side - radius + center[i]
        idx //= side
    return out


@njit(cache=True, nogil=True)
def range_in_box(seed, starts, n, center, radius):
    """Flat indices (in the LInf box) of sites visited by walks from ``starts`` up to time n."""
    d = center.shape[0]
    side = 2 * radius + 1
    size = side**d
    seen = np.zeros(size, dtype=np.bool_)
    count = 0
    for j in range(starts.shape[0]):
        pos = starts[j].copy()
        wk = walk_key(seed, pos)
        idx = flat_index(pos, center, radius)
        if idx >= 0 and not seen[idx]:
            seen[idx] = True
            count += 1
        for k in range(1, n + 1):
            dirn = step_direction(wk, k, 2 * d)
            if dirn & 1:
                pos[dirn >> 1] -= 1
            else:
                pos[dirn >> 1] += 1
            idx = flat_index(pos, center, radius)
            if idx >= 0 and not seen[idx]:
                seen[idx] = True
                count += 1
    out = np.empty(count, dtype=np.int64)
    m = 0
    for i in range(size):
        if seen[i]:
            out[m] = i
            m += 1
    return out


@njit(cache=True, nogil=True)
def _pack(pos, d):
    # 21 bits per coordinate, offset 2^20; valid for |coord| < 2^20 and d <= 3
    key = np.int64(0)
    for i in range(d):
        key = (key << np.int64(21)) | np.int64(pos[i] + 1048576)
    return key


@njit(cache=True, nogil=True)
def range_size(seed, x, n, table_bits):
    """#R^x_n via an open-addressing hash table (d <= 3)."""
    d = x.shape[0]
    size = np.int64(1) << np.int64(table_bits)
    mask = size - 1
    table = np.full(size, np.int64(-1))
    pos = x.copy()
    wk = walk_key(seed, pos)
    count = 0
    for k in range(0, n + 1):
        if k > 0:
            dirn = step_direction(wk, k, 2 * d)
            if dirn & 1:
                pos[dirn >> 1] -= 1
            else:
                pos[dirn >> 1] += 1
        key = _pack(pos, d)
        h = np.int64(mix64(_U(key)) & _U(mask))
        while True:
            v = table[h]
            if v == -1:
                table[h] = key
                count += 1
                break
            if v == key:
                break
            h = (h + 1) & mask
    return count


@njit(cache=True, nogil=True)
def hit_within(seed, x, z, n):
    return first_hit(seed, x, z, n) >= 0


@njit(cache=True, nogil=True)
def simulate_front(
    walk_seed,
    occ_seed,
    occ_thresh,
    occ_full,
    force_origin,
    cfg_kind,
    cfg_center,
    cfg_radius,
    relay_kind,
    relay_center,
    relay_radius,
    relay_mask,
    box_center,
    box_radius,
    source,
    horizon,
    target_idx,
    target_group,
    n_groups,
    stop_on_groups,
    front_count,
):
    """Time-ordered frog dynamics (a bucket-queue Dijkstra over occupied sites).

    The frog of an occupied site activated at time t sits at S^x_{s-t} at time
    s.  Relays are restricted to the relay region; visits are recorded in the
    LInf box ``box_center/box_radius``.  Returns first-visit times (stored as
    t + 1, zero meaning unvisited), the frog table and per-target hits.
    """
    d = source.shape[0]
    side = 2 * box_radius + 1
    size = side**d
    times = np.zeros(size, dtype=np.int32)
    # hot-path visited check on a bitmap small enough to stay in cache
    seen = np.zeros((size + 63) // 64, dtype=np.uint64)
    one = _U(1)

    cap = 64
    f_site = np.empty((cap, d), dtype=np.int64)
    f_pos = np.empty((cap, d), dtype=np.int64)
    f_key = np.empty(cap, dtype=np.uint64)
    f_act = np.empty(cap, dtype=np.int64)
    f_parent = np.empty(cap, dtype=np.int64)
    f_leg = np.empty(cap, dtype=np.int64)

    n_t = target_idx.shape[0]
    hit_time = np.full(n_t, np.int64(-1))
    hit_frog = np.full(n_t, np.int64(-1))
    group_hit = np.zeros(max(n_groups, 1), dtype=np.bool_)
    groups_left = n_groups
    exited = False
    front_seen = 0

    for i in range(d):
        f_site[0, i] = source[i]
        f_pos[0, i] = source[i]
    f_key[0] = walk_key(walk_seed, source)
    f_act[0] = 0
    f_parent[0] = -1
    f_leg[0] = 0
    nf = 1

    sidx = flat_index(source, box_center, box_radius)
    if sidx >= 0:
        times[sidx] = 1
        seen[sidx >> 6] |= one << _U(sidx & 63)
        if relay_kind == REGION_MASK:
            inside = relay_mask[sidx] != 0
        else:
            inside = in_region(source, relay_kind, relay_center, relay_radius)
        if inside:
            front_seen += 1
        j = np.searchsorted(target_idx, sidx)
        if j < n_t and target_idx[j] == sidx:
            hit_time[j] = 0
            hit_frog[j] = 0
            g = target_group[j]
            if not group_hit[g]:
                group_hit[g] = True
                groups_left -= 1

    t_end = 0
    if (stop_on_groups and groups_left == 0) or (front_count >= 0 and front_seen >= front_count):
        return times, f_site[:nf], f_act[:nf], f_parent[:nf], f_leg[:nf], hit_time, hit_frog, t_end, exited

    for t in range(1, horizon + 1):
        t_end = t
        cur = nf
        for f in range(cur):
            k = t - f_act[f]
            dirn = step_direction(f_key[f], k, 2 * d)
            ax = dirn >> 1
            if dirn & 1:
                f_pos[f, ax] -= 1
            else:
                f_pos[f, ax] += 1
            idx = 0
            for i in range(d):
                cc = f_pos[f, i] - box_center[i] + box_radius
                if cc < 0 or cc >= side:
                    idx = -1
                    break
                idx = idx * side + cc
            if idx < 0:
                exited = True
                continue
            word = seen[idx >> 6]
            bit = one << _U(idx & 63)
            if word & bit:
                continue
            seen[idx >> 6] = word | bit
            times[idx] = t + 1
            pos = f_pos[f]
            if relay_kind == REGION_MASK:
                inside = relay_mask[idx] != 0
            else:
                inside = in_region(pos, relay_kind, relay_center, relay_radius)
            if inside:
                front_seen += 1
                if is_occupied(occ_seed, pos, occ_thresh, occ_full, force_origin, cfg_kind, cfg_center, cfg_radius):
                    if nf == cap:
                        cap *= 2
                        ns = np.empty((cap, d), dtype=np.int64)
                        ns[:nf] = f_site[:nf]
                        f_site = ns
                        np_ = np.empty((cap, d), dtype=np.int64)
                        np_[:nf] = f_pos[:nf]
                        f_pos = np_
                        nk = np.empty(cap, dtype=np.uint64)
                        nk[:nf] = f_key[:nf]
                        f_key = nk
                        na = np.empty(cap, dtype=np.int64)
                        na[:nf] = f_act[:nf]
                        f_act = na
                        npar = np.empty(cap, dtype=np.int64)
                        npar[:nf] = f_parent[:nf]
                        f_parent = npar
                        nl = np.empty(cap, dtype=np.int64)
                        nl[:nf] = f_leg[:nf]
                        f_leg = nl
                        pos = f_pos[f]
                    for i in range(d):
                        f_site[nf, i] = pos[i]
                        f_pos[nf, i] = pos[i]
                    f_key[nf] = walk_key(walk_seed, f_site[nf])
                    f_act[nf] = t
                    f_parent[nf] = f
                    f_leg[nf] = k
                    nf += 1
            else:
                exited = True
            if n_t > 0:
                j = np.searchsorted(target_idx, idx)
                if j < n_t and target_idx[j] == idx:
                    hit_time[j] = t
                    hit_frog[j] = f
                    g = target_group[j]
                    if not group_hit[g]:
                        group_hit[g] = True
                        groups_left -= 1
        if stop_on_groups and groups_left == 0:
            break
        if front_count >= 0 and front_seen >= front_count:
            break
    return times, f_site[:nf], f_act[:nf], f_parent[:nf], f_leg[:nf], hit_time, hit_frog, t_end, exited
