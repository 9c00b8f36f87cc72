"""Seeded Monte-Carlo realization of the dependent-interarrival point process.

Letters are drawn from the row-stochastic kernel exp(eta_tilde(j . head)),
interarrival times from the grown head, and the observable family is summed
along each path.  Streams are counter-based per (seed, path index), so every
path is independent of the batch size and runs are bit-reproducible.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import HorizonError, InputError, UnsupportedInputError
from .potential import check_eventually_positive
from .spectral import _row_sum_defect
from .symbolic import validate_word


@dataclass
class EmpiricalResult:
    mean: float
    stderr: float
    n_paths: int
    n_max: int
    min_final_sum: float


class SimulationSpec:
    """Simulation inputs; eta must already be a transition kernel.

    The observable family carries chi folded in; only the probabilistic
    regime (row sums one, hence delta = 0) is simulated.
    """

    def __init__(self, shift, eta_normalized, xi, f, x_head, n_max, n_paths, seed):
        defect = _row_sum_defect(eta_normalized, shift)
        if defect > 1e-10:
            raise InputError(
                f"eta rows deviate from probability normalization by {defect:.3g}"
            )
        if n_max < 1 or n_paths < 1:
            raise InputError("n_max and n_paths must be >= 1")
        self.shift = shift
        self.eta = eta_normalized
        self.xi = xi
        self.f = f
        self.n_max = int(n_max)
        self.n_paths = int(n_paths)
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.head_depth = max(1, eta_normalized.depth - 1, xi.depth - 1, f.depth)
        self.x_head = validate_word(shift, x_head, "x_head")
        need = max(self.head_depth, xi.depth, eta_normalized.depth, f.depth)
        if len(self.x_head) < need:
            raise InputError(f"x_head must carry at least {need} letters")
        self._tables = None

    def tables(self):
        if self._tables is None:
            cyl = self.shift.cylinders(self.head_depth)
            prep = cyl.prepend_tables()
            M, K = self.shift.M, cyl.K
            cum = np.full((K, M), np.inf)
            nxt = np.zeros((K, M), dtype=np.int64)
            dxi = np.zeros((K, M))
            letters = np.zeros((K, M), dtype=np.int64)
            deg = np.zeros(K, dtype=np.int64)
            for k, w in enumerate(cyl.words):
                acc = 0.0
                slot = 0
                for j in range(1, M + 1):
                    if prep[j - 1, k] < 0:
                        continue
                    jw = (j,) + w
                    acc += math.exp(self.eta.values[jw[: self.eta.depth]])
                    cum[k, slot] = acc
                    nxt[k, slot] = prep[j - 1, k]
                    dxi[k, slot] = self.xi.values[jw[: self.xi.depth]]
                    letters[k, slot] = j
                    slot += 1
                deg[k] = slot
            cls = np.array(
                [self.f.class_of_word[w[: self.f.depth]] for w in cyl.words],
                dtype=np.int64,
            )
            self._tables = (cyl, cum, nxt, dxi, letters, deg, cls)
        return self._tables

    def _run(self, path0, n_paths):
        cyl, cum, nxt, dxi, letters, deg, _ = self.tables()
        head0 = cyl.idx(self.x_head)
        return kernels.sim_paths(
            self.seed, path0, n_paths, self.n_max, head0, cum, nxt, dxi, deg, letters
        )


def sample_path(spec, path_index):
    """Letters X_1..X_n and interarrivals W_0..W_{n-1} of one path.

    Deterministic in (seed, path_index); the letters prepend to the base
    head, so the state after n steps reads X_n ... X_1 x.
    """
    letters, _, _ = spec._run(path_index, 1)
    letters = letters[0]
    cyl, _, _, _, _, _, _ = spec.tables()
    head = spec.x_head[: spec.head_depth]
    W = np.empty(letters.size)
    for k, j in enumerate(letters):
        grown = (int(j),) + head
        W[k] = spec.xi.values[grown[: spec.xi.depth]]
        head = grown[: spec.head_depth]
    return letters.copy(), W


def empirical_N(spec, t, detail=False):
    """Monte-Carlo estimate (mean, stderr) of the renewal expectation at t.

    Requires the horizon to exhaust the observable support on every sampled
    path: min_paths sum W > t - T_lo, else a HorizonError suggests a safe
    n_max.  The estimated expectation equals eval_N of the same problem with
    delta = 0.
    """
    lower, _ = spec.f.tails
    if lower is None or lower[0] != "support":
        raise UnsupportedInputError(
            "simulation requires a lower support bound on the family"
        )
    t_lo = lower[1]  # +inf means an identically zero family: check is vacuous
    t = float(t)
    letters, S, H = spec._run(0, spec.n_paths)
    final = S[:, -1]
    min_final = float(final.min())
    if math.isfinite(t_lo) and not (min_final > t - t_lo):
        cert = check_eventually_positive(spec.xi, spec.shift)
        need = math.ceil((t - t_lo + cert.spread) / cert.kappa) + 1 if cert.flag else 2 * spec.n_max
        raise HorizonError(
            f"horizon n_max={spec.n_max} leaves observable mass beyond the last step",
            suggested_n_max=max(need, spec.n_max + 1),
            diagnostics={"min_final_sum": min_final, "required_exceeds": t - t_lo},
        )
    _, _, _, _, _, _, cls = spec.tables()
    totals = np.zeros(spec.n_paths)
    path_idx = np.repeat(
        np.arange(spec.n_paths, dtype=np.int64), spec.n_max + 1
    )
    args_all = (t - S).ravel()
    cls_all = cls[H.ravel()]
    for c, tf in enumerate(spec.f.class_funcs):
        sel = cls_all == c
        if not sel.any():
            continue
        packed = tf._pack()
        scatter = (
            kernels.scatter_eval_pexp if tf.kind == "pexp" else kernels.scatter_eval_grid
        )
        scatter(*packed, np.ascontiguousarray(args_all[sel]),
                np.ascontiguousarray(path_idx[sel]), totals)
    mean = kernels.pairwise_sum(totals) / spec.n_paths
    if spec.n_paths > 1:
        var = kernels.pairwise_sum((totals - mean) ** 2) / (spec.n_paths - 1)
    else:
        var = 0.0
    stderr = math.sqrt(var / spec.n_paths)
    if detail:
        return EmpiricalResult(float(mean), float(stderr), spec.n_paths, spec.n_max, min_final)
    return float(mean), float(stderr)
