"""numba twins of the kernels in ``kernels``; same semantics, fused loops."""

import numpy as np
from numba import njit

GOLD = np.uint64(0x9E3779B97F4A7C15)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = z + GOLD
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True, inline="always")
def _pexp_point(breaks, piece_ptr, coef, powr, rate, t):
    p = 0
    nb = breaks.size
    while p < nb and breaks[p] <= t:
        p += 1
    acc = 0.0
    for j in range(piece_ptr[p], piece_ptr[p + 1]):
        term = coef[j] * np.exp(rate[j] * t)
        if powr[j]:
            term = term * t ** powr[j]
        acc += term
    return acc


@njit(cache=True, nogil=True)
def pexp_eval(breaks, piece_ptr, coef, powr, rate, t, use_abs):
    out = np.empty(t.size)
    for i in range(t.size):
        v = _pexp_point(breaks, piece_ptr, coef, powr, rate, t[i])
        out[i] = abs(v) if use_abs else v
    return out


@njit(cache=True, nogil=True)
def grid_eval(xp, fp, t, use_abs):
    out = np.interp(t, xp, fp)
    for i in range(t.size):
        if t[i] < xp[0] or t[i] > xp[-1]:
            out[i] = 0.0
        elif use_abs:
            out[i] = abs(out[i])
    return out


@njit(cache=True, nogil=True)
def dp_expand(head, qkey, w, prep, dxi, deta_exp, qtol, K):
    M = prep.shape[0]
    S = head.size
    cap = M * S
    nh = np.empty(cap, dtype=np.int64)
    nq = np.empty(cap, dtype=np.int64)
    nw = np.empty(cap)
    n = 0
    for j in range(M):
        for s in range(S):
            h2 = prep[j, head[s]]
            if h2 < 0:
                continue
            sxi = qkey[s] * qtol
            nh[n] = h2
            nq[n] = np.int64(np.rint((sxi + dxi[j, head[s]]) / qtol))
            nw[n] = w[s] * deta_exp[j, head[s]]
            n += 1
    nh = nh[:n]
    nq = nq[:n]
    nw = nw[:n]
    key = nq * np.int64(K) + nh
    order = np.argsort(key, kind="mergesort")
    out_h = np.empty(n, dtype=np.int64)
    out_q = np.empty(n, dtype=np.int64)
    out_w = np.empty(n)
    m = 0
    i = 0
    while i < n:
        o = order[i]
        k = key[o]
        acc = nw[o]
        i += 1
        while i < n and key[order[i]] == k:
            acc += nw[order[i]]
            i += 1
        out_h[m] = nh[o]
        out_q[m] = nq[o]
        out_w[m] = acc
        m += 1
    out_s = np.empty(m)
    for i in range(m):
        out_s[i] = out_q[i] * qtol
    return out_h[:m], out_q[:m], out_s, out_w[:m]


@njit(cache=True, nogil=True)
def weighted_sum_pexp(breaks, piece_ptr, coef, powr, rate, tgrid, sxi, w, use_abs):
    out = np.zeros(tgrid.size)
    for s in range(sxi.size):
        for i in range(tgrid.size):
            v = _pexp_point(breaks, piece_ptr, coef, powr, rate, tgrid[i] - sxi[s])
            if use_abs:
                v = abs(v)
            out[i] += w[s] * v
    return out


@njit(cache=True, nogil=True)
def weighted_sum_grid(xp, fp, tgrid, sxi, w, use_abs):
    out = np.zeros(tgrid.size)
    for s in range(sxi.size):
        args = tgrid - sxi[s]
        vals = np.interp(args, xp, fp)
        for i in range(tgrid.size):
            v = vals[i]
            if args[i] < xp[0] or args[i] > xp[-1]:
                v = 0.0
            elif use_abs:
                v = abs(v)
            out[i] += w[s] * v
    return out


@njit(cache=True, nogil=True)
def scatter_eval_pexp(breaks, piece_ptr, coef, powr, rate, args, idx, out, use_abs):
    for i in range(args.size):
        v = _pexp_point(breaks, piece_ptr, coef, powr, rate, args[i])
        out[idx[i]] += abs(v) if use_abs else v


@njit(cache=True, nogil=True)
def scatter_eval_grid(xp, fp, args, idx, out, use_abs):
    vals = np.interp(args, xp, fp)
    for i in range(args.size):
        v = vals[i]
        if args[i] < xp[0] or args[i] > xp[-1]:
            v = 0.0
        elif use_abs:
            v = abs(v)
        out[idx[i]] += v


@njit(cache=True, nogil=True)
def csr_matvec(indptr, indices, data, x):
    n = indptr.size - 1
    out = np.zeros(n)
    for r in range(n):
        acc = 0.0
        for j in range(indptr[r], indptr[r + 1]):
            acc += data[j] * x[indices[j]]
        out[r] = acc
    return out


@njit(cache=True, nogil=True)
def sim_paths(seed, path0, n_paths, n_steps, head0, cum_p, nxt, dxi_tab, deg, letter_tab):
    letters = np.zeros((n_paths, n_steps), dtype=np.int64)
    S = np.zeros((n_paths, n_steps + 1))
    H = np.zeros((n_paths, n_steps + 1), dtype=np.int64)
    for p in range(n_paths):
        base = _mix64(seed + GOLD * (path0 + np.uint64(p)))
        head = head0
        H[p, 0] = head
        s_run = 0.0
        for k in range(n_steps):
            u = (_mix64(base + GOLD * np.uint64(k + 1)) >> np.uint64(11)) * _INV53
            slot = 0
            last = deg[head] - 1
            while slot < last and u >= cum_p[head, slot]:
                slot += 1
            letters[p, k] = letter_tab[head, slot]
            s_run = s_run + dxi_tab[head, slot]
            head = nxt[head, slot]
            S[p, k + 1] = s_run
            H[p, k + 1] = head
    return letters, S, H
