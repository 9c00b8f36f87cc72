"""Hot numeric kernels with two interchangeable lanes.

Every kernel here exists twice: a pure-numpy implementation (in this file)
and a numba ``@njit`` twin (in ``_kern_numba``).  The active lane is chosen
by ``RPF_BACKEND`` / ``set_backend``; both lanes implement identical
semantics and agree to floating-point roundoff.  The counter-based RNG used
for path sampling is bit-identical across lanes.

Kernel families:

* piecewise exponential-polynomial evaluation (``pexp_*``) and sampled-grid
  evaluation (``grid_*``) of time functions,
* the per-level expansion/merge step of the renewal-series state recursion
  (``dp_expand``),
* CSR matrix-vector products for transfer-operator power iteration,
* counter-based path sampling for the Monte-Carlo module.
"""

import numpy as np

from ._backend import get_backend, set_backend, worker_count  # noqa: F401

GOLD = np.uint64(0x9E3779B97F4A7C15)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

_nb_mod = None


def _nb():
    global _nb_mod
    if _nb_mod is None:
        from . import _kern_numba

        _nb_mod = _kern_numba
    return _nb_mod


def _use_numba():
    return get_backend() == "numba"


def mix64(z):
    """SplitMix64 finalizer; works on uint64 scalars and arrays."""
    z = np.uint64(z) if np.isscalar(z) else z.astype(np.uint64)
    with np.errstate(over="ignore"):
        z = z + GOLD
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def pairwise_sum(x):
    """Fixed fan-in-2 tree reduction; identical result on both lanes."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.size
    if n == 0:
        return 0.0
    m = 1
    while m < n:
        m *= 2
    buf = np.zeros(m)
    buf[:n] = x
    while m > 1:
        m //= 2
        buf[:m] = buf[:m] + buf[m : 2 * m]
    return float(buf[0])


# ---------------------------------------------------------------------------
# time-function evaluation


def _pexp_eval_np(breaks, piece_ptr, coef, powr, rate, t, use_abs):
    t = np.ascontiguousarray(t, dtype=np.float64)
    idx = np.searchsorted(breaks, t, side="right")
    out = np.zeros_like(t)
    for p in np.unique(idx):
        lo, hi = piece_ptr[p], piece_ptr[p + 1]
        if lo == hi:
            continue
        m = idx == p
        tv = t[m]
        acc = np.zeros_like(tv)
        for j in range(lo, hi):
            term = coef[j] * np.exp(rate[j] * tv)
            if powr[j]:
                term = term * tv ** powr[j]
            acc += term
        out[m] = acc
    return np.abs(out, out=out) if use_abs else out


def pexp_eval(breaks, piece_ptr, coef, powr, rate, t, use_abs=False):
    t = np.ascontiguousarray(t, dtype=np.float64)
    if _use_numba() and t.size:
        return _nb().pexp_eval(breaks, piece_ptr, coef, powr, rate, t, use_abs)
    return _pexp_eval_np(breaks, piece_ptr, coef, powr, rate, t, use_abs)


def _grid_eval_np(xp, fp, t, use_abs):
    out = np.interp(t, xp, fp, left=0.0, right=0.0)
    return np.abs(out, out=out) if use_abs else out


def grid_eval(xp, fp, t, use_abs=False):
    t = np.ascontiguousarray(t, dtype=np.float64)
    if _use_numba() and t.size:
        return _nb().grid_eval(xp, fp, t, use_abs)
    return _grid_eval_np(xp, fp, t, use_abs)


# ---------------------------------------------------------------------------
# renewal-series state recursion


def dp_expand(head, qkey, w, prep, dxi, deta_exp, qtol, K):
    """One prepend level: expand states over letters, merge equal states.

    States are (head cylinder index, quantized accumulated interarrival sum);
    ``w`` carries the summed probability weights exp(S_n eta).  Returns the
    merged arrays sorted by combined key, with the representative sum
    ``sxi = qkey * qtol``.
    """
    if _use_numba() and head.size:
        return _nb().dp_expand(head, qkey, w, prep, dxi, deta_exp, qtol, K)
    sxi = qkey.astype(np.float64) * qtol
    nh = prep[:, head].ravel()
    nsxi = (sxi[None, :] + dxi[:, head]).ravel()
    nw = (w[None, :] * deta_exp[:, head]).ravel()
    ok = nh >= 0
    nh, nsxi, nw = nh[ok], nsxi[ok], nw[ok]
    nq = np.rint(nsxi / qtol).astype(np.int64)
    key = nq * np.int64(K) + nh
    order = np.argsort(key, kind="stable")
    key, nh, nq, nw = key[order], nh[order], nq[order], nw[order]
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    wsum = np.add.reduceat(nw, starts) if nw.size else nw
    nq = nq[starts]
    return nh[starts], nq, nq.astype(np.float64) * qtol, wsum


def _weighted_sum_pexp_np(breaks, piece_ptr, coef, powr, rate, tgrid, sxi, w, use_abs):
    args = tgrid[None, :] - sxi[:, None]
    vals = _pexp_eval_np(breaks, piece_ptr, coef, powr, rate, args.ravel(), use_abs)
    return w @ vals.reshape(args.shape)


def weighted_sum_pexp(breaks, piece_ptr, coef, powr, rate, tgrid, sxi, w, use_abs=False):
    """out[i] = sum_s w[s] * f(tgrid[i] - sxi[s]) for a single time function."""
    if _use_numba() and sxi.size:
        return _nb().weighted_sum_pexp(
            breaks, piece_ptr, coef, powr, rate, tgrid, sxi, w, use_abs
        )
    if not sxi.size:
        return np.zeros_like(tgrid)
    return _weighted_sum_pexp_np(breaks, piece_ptr, coef, powr, rate, tgrid, sxi, w, use_abs)


def weighted_sum_grid(xp, fp, tgrid, sxi, w, use_abs=False):
    if _use_numba() and sxi.size:
        return _nb().weighted_sum_grid(xp, fp, tgrid, sxi, w, use_abs)
    if not sxi.size:
        return np.zeros_like(tgrid)
    args = tgrid[None, :] - sxi[:, None]
    vals = _grid_eval_np(xp, fp, args.ravel(), use_abs)
    return w @ vals.reshape(args.shape)


def scatter_eval_pexp(breaks, piece_ptr, coef, powr, rate, args, idx, out, use_abs=False):
    """out[idx[i]] += f(args[i]); used for per-path observable totals."""
    if _use_numba() and args.size:
        _nb().scatter_eval_pexp(breaks, piece_ptr, coef, powr, rate, args, idx, out, use_abs)
        return
    vals = _pexp_eval_np(breaks, piece_ptr, coef, powr, rate, args, use_abs)
    np.add.at(out, idx, vals)


def scatter_eval_grid(xp, fp, args, idx, out, use_abs=False):
    if _use_numba() and args.size:
        _nb().scatter_eval_grid(xp, fp, args, idx, out, use_abs)
        return
    vals = _grid_eval_np(xp, fp, args, use_abs)
    np.add.at(out, idx, vals)


# ---------------------------------------------------------------------------
# sparse matvec (CSR)


def csr_matvec(indptr, indices, data, x):
    if _use_numba():
        return _nb().csr_matvec(indptr, indices, data, x)
    prods = data * x[indices]
    return np.add.reduceat(prods, indptr[:-1]) if data.size else np.zeros(len(indptr) - 1)


# ---------------------------------------------------------------------------
# counter-based path sampling


def sim_paths(seed, path0, n_paths, n_steps, head0, cum_p, nxt, dxi_tab, deg, letter_tab):
    """Sample ``n_paths`` chains for ``n_steps`` prepend steps.

    Stream ``path0 + p`` is a pure function of (seed, absolute path index),
    so results do not depend on batching.  Returns (letters, partial sums S
    with S[:, 0] = 0, head indices H with H[:, 0] = head0); bit-identical
    across lanes.
    """
    if _use_numba() and n_paths:
        return _nb().sim_paths(
            np.uint64(seed),
            np.uint64(path0),
            n_paths,
            n_steps,
            head0,
            cum_p,
            nxt,
            dxi_tab,
            deg,
            letter_tab,
        )
    letters = np.zeros((n_paths, n_steps), dtype=np.int64)
    S = np.zeros((n_paths, n_steps + 1))
    H = np.zeros((n_paths, n_steps + 1), dtype=np.int64)
    H[:, 0] = head0
    with np.errstate(over="ignore"):
        pid = np.uint64(path0) + np.arange(n_paths, dtype=np.uint64)
        base = mix64(np.uint64(seed) + GOLD * pid)
        heads = np.full(n_paths, head0, dtype=np.int64)
        s_run = np.zeros(n_paths)
        for k in range(n_steps):
            u = (mix64(base + GOLD * np.uint64(k + 1)) >> np.uint64(11)) * _INV53
            rows = cum_p[heads]
            slot = (u[:, None] >= rows).sum(axis=1)
            slot = np.minimum(slot, deg[heads] - 1)
            letters[:, k] = letter_tab[heads, slot]
            s_run = s_run + dxi_tab[heads, slot]
            heads = nxt[heads, slot]
            S[:, k + 1] = s_run
            H[:, k + 1] = heads
    return letters, S, H
