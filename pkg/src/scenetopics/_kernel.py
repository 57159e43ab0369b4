"""Compiled Gibbs pass over a list of observations.

Count layout: ``n_vk[v, k]``, ``n_k[k]``, ``n_c[t, cy, cx, k]``. ``state`` holds
``[n_active, N]``. Labels are recycled smallest-first: a new topic takes the
lowest label whose total count is zero.

Neighbourhood counts are computed once per run of same-cell observations and
kept current incrementally, which is exact because a resample only moves
counts within the observation's own cell.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _neighborhood_counts(n_c, t, cy, cx, rs, rt, g):
    g[:] = 0
    T, ny, nx, K = n_c.shape
    t0 = max(0, t - rt)
    t1 = min(T - 1, t + rt)
    y0 = max(0, cy - rs)
    y1 = min(ny - 1, cy + rs)
    x0 = max(0, cx - rs)
    x1 = min(nx - 1, cx + rs)
    for tt in range(t0, t1 + 1):
        for yy in range(y0, y1 + 1):
            for xx in range(x0, x1 + 1):
                for k in range(K):
                    g[k] += n_c[tt, yy, xx, k]


@njit(cache=True)
def gibbs_pass(order, words, ts, cys, cxs, z, n_vk, n_k, n_c, state,
               alpha, beta, gamma, rs, rt, uniforms, start):
    """Resample ``order[start:]`` in turn; unassigned observations (z < 0) are added.

    Returns the position reached. A return value short of ``len(order)`` means
    every label slot is occupied and the caller must grow the tables and call
    again from that position.
    """
    V = n_vk.shape[0]
    K_cap = n_k.shape[0]
    vbeta = V * beta
    new_mass = gamma / V
    g = np.zeros(K_cap, np.int64)
    cum = np.empty(K_cap, np.float64)
    cur_t = -1
    cur_y = -1
    cur_x = -1
    pos = start
    n = order.shape[0]
    while pos < n:
        if state[0] == K_cap:
            return pos
        i = order[pos]
        t = ts[i]
        cy = cys[i]
        cx = cxs[i]
        if t != cur_t or cy != cur_y or cx != cur_x:
            _neighborhood_counts(n_c, t, cy, cx, rs, rt, g)
            cur_t = t
            cur_y = cy
            cur_x = cx
        v = words[i]
        old = z[i]
        if old >= 0:
            n_vk[v, old] -= 1
            n_k[old] -= 1
            n_c[t, cy, cx, old] -= 1
            g[old] -= 1
            state[1] -= 1
            if n_k[old] == 0:
                state[0] -= 1
        # highest label that can carry mass
        k_high = 0
        total = 0.0
        for k in range(K_cap):
            if n_k[k] > 0:
                total += (n_vk[v, k] + beta) / (n_k[k] + vbeta) * (g[k] + alpha)
                k_high = k + 1
            cum[k] = total
        total += new_mass
        u = uniforms[pos] * total
        chosen = -1
        for k in range(k_high):
            if u < cum[k]:
                chosen = k
                break
        if chosen < 0:
            for k in range(K_cap):
                if n_k[k] == 0:
                    chosen = k
                    break
            state[0] += 1
        n_vk[v, chosen] += 1
        n_k[chosen] += 1
        n_c[t, cy, cx, chosen] += 1
        g[chosen] += 1
        state[1] += 1
        z[i] = chosen
        pos += 1
    return pos
