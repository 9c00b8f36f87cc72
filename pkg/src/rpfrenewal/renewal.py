"""Renewal functions with dependent interarrival times.

The central object is the series

    N(t, x) = sum_n sum_{u: |u| = n, u.x admissible}
              chi(u.x) f_{u.x}(t - S_n xi(u.x)) exp(S_n eta(u.x)),

evaluated by an exact level recursion: prefixes u are grouped by the state
(head cylinder of the locally constant data, accumulated Birkhoff sums), so
each level costs the number of distinct states instead of the number of
prefixes.  Accumulated interarrival sums are quantized on a grid of width
``qtol`` (default 1e-12) so that equal-up-to-roundoff states merge; the
grouped sum is otherwise identical to literal prefix enumeration.

Truncation is certified from the family's tail metadata: either all f vanish
below a support bound, or an exponential envelope combined with the
subcritical spectral radius of the tilted transfer operator bounds the
discarded levels by a geometric series.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InputError, NumericalError, UnsupportedInputError, WrongTheoremError
from .potential import check_eventually_positive, detect_lattice
from .spectral import build_transfer, leading_eigendata, solve_delta
from .symbolic import admissible_words, validate_word
from .timefunc import TimeFunction, combine_tails, dri_check, dri_check_family  # noqa: F401


class FFamily:
    """Per-cylinder time functions: f_y depends on the first ``depth`` letters."""

    def __init__(self, shift, depth, functions):
        if depth < 1:
            raise InputError(f"family depth must be >= 1, got {depth}")
        words = admissible_words(shift, depth)
        functions = {tuple(k): v for k, v in functions.items()}
        missing = [w for w in words if w not in functions]
        if missing:
            raise InputError(f"family missing functions for {len(missing)} cylinders")
        extra = [w for w in functions if w not in set(words)]
        if extra:
            raise InputError(f"family has functions on inadmissible words, e.g. {extra[0]}")
        self.shift = shift
        self.depth = int(depth)
        self.functions = functions
        ids = {}
        self.class_funcs = []
        self.class_of_word = {}
        for w in words:
            f = functions[w]
            if id(f) not in ids:
                ids[id(f)] = len(self.class_funcs)
                self.class_funcs.append(f)
            self.class_of_word[w] = ids[id(f)]
        self.tails = combine_tails(self.class_funcs)

    @classmethod
    def shared(cls, shift, f):
        return cls(shift, 1, {(i,): f for i in range(1, shift.M + 1)})

    def at(self, word):
        return self.functions[tuple(word[: self.depth])]


@dataclass
class AsymptoticResult:
    kind: str  # nonlattice | lattice | average
    G: float | None = None
    table: tuple | None = None  # (ts, values) for the lattice branch
    diagnostics: dict = field(default_factory=dict)


@dataclass
class EvalDiagnostics:
    levels: int
    states: int
    tail_bound: float
    branch: str
    qtol: float


class RenewalProblem:
    """Problem data (shift, eta, xi, chi, f family, base head) plus caches.

    xi must have eventually positive Birkhoff sums and chi must be
    nonnegative and not identically zero; both are validated here.  delta and
    the lattice classification are computed lazily and cached, as are the
    spectral solves for the tilted potentials.
    """

    def __init__(self, shift, eta, xi, chi, f, x_head, zeta=None, psi=None):
        for name, pot in (("eta", eta), ("xi", xi), ("chi", chi)):
            if pot.shift != shift:
                raise InputError(f"potential {name} lives on a different subshift")
        if f.shift != shift:
            raise InputError("f family lives on a different subshift")
        chi_vals = np.array(list(chi.values.values()))
        if (chi_vals < 0).any():
            raise InputError("chi must be nonnegative on all cylinders")
        if not (chi_vals > 0).any():
            raise InputError("chi must be positive somewhere")
        self.shift = shift
        self.eta = eta
        self.xi = xi
        self.chi = chi
        self.f = f
        self.zeta_override = zeta
        self.psi_override = psi
        self.cert = check_eventually_positive(xi, shift)
        if not self.cert.flag:
            raise InputError(
                f"xi is not eventually positive (minimum cycle mean {self.cert.kappa:.6g})"
            )
        self.head_depth = max(
            1, xi.depth - 1, eta.depth - 1, chi.depth, f.depth
        )
        self.depth_m = max(self.head_depth, psi.depth if psi is not None else 1,
                           zeta.depth - 1 if zeta is not None else 1)
        need = max(self.depth_m, xi.depth, eta.depth, chi.depth, f.depth)
        self.x_head = validate_word(shift, x_head, "x_head")
        if len(self.x_head) < need:
            raise InputError(
                f"x_head must carry at least {need} letters to pin all local data"
            )
        self._cache = {}

    # -- cached solves ------------------------------------------------------

    @property
    def delta(self):
        if "delta" not in self._cache:
            self._cache["delta"] = solve_delta(self.eta, self.xi, self.shift, self.depth_m)
        return self._cache["delta"]

    @property
    def lattice(self):
        if "lattice" not in self._cache:
            rep = detect_lattice(self.xi, self.shift)
            if self.zeta_override is not None:
                rep.zeta = self.zeta_override
            if self.psi_override is not None:
                rep.psi = self.psi_override
            self._cache["lattice"] = rep
        return self._cache["lattice"]

    def spectral(self, key, phi):
        if key not in self._cache:
            self._cache[key] = leading_eigendata(
                build_transfer(phi, self.shift, self.depth_m)
            )
        return self._cache[key]

    def main_spectral(self):
        return self.spectral("sd_main", self.eta - self.delta * self.xi)

    def shifted(self, j):
        """Same data with base head (j,) + x_head; used by the renewal identity."""
        if not self.shift.allows(j, self.x_head[0]):
            raise InputError(f"letter {j} cannot precede the base head")
        return RenewalProblem(
            self.shift, self.eta, self.xi, self.chi, self.f,
            (j,) + self.x_head, self.zeta_override, self.psi_override,
        )

    # -- state recursion tables ---------------------------------------------

    def _tables(self):
        if "tables" not in self._cache:
            h = self.head_depth
            cyl = self.shift.cylinders(h)
            prep = cyl.prepend_tables()
            M, K = self.shift.M, cyl.K
            dxi = np.zeros((M, K))
            deta = np.zeros((M, K))
            for k, w in enumerate(cyl.words):
                for j in range(1, M + 1):
                    if prep[j - 1, k] >= 0:
                        jw = (j,) + w
                        dxi[j - 1, k] = self.xi.values[jw[: self.xi.depth]]
                        deta[j - 1, k] = math.exp(self.eta.values[jw[: self.eta.depth]])
            chi_arr = self.chi.as_array(cyl)
            cls_arr = np.array(
                [self.f.class_of_word[w[: self.f.depth]] for w in cyl.words],
                dtype=np.int64,
            )
            self._cache["tables"] = (cyl, prep, dxi, deta, chi_arr, cls_arr)
        return self._cache["tables"]


def _truncation_plan(problem, ts, tol):
    """(n_star, tail_bound, branch): certified level cutoff for the grid ts."""
    lower, _ = problem.f.tails
    kappa, spread = problem.cert.kappa, problem.cert.spread
    t_max = float(np.max(ts))
    if lower is not None and lower[0] == "support":
        T_lo = lower[1]
        if math.isinf(T_lo):  # family vanishes identically below any level
            return 0, 0.0, "support"
        n_star = max(0, math.floor((t_max - T_lo + spread) / kappa) + 1)
        return n_star, 0.0, "support"
    if lower is not None and lower[0] == "exp":
        _, C_lo, rate = lower
        delta = problem.delta
        if rate <= delta:
            raise UnsupportedInputError(
                f"lower envelope rate {rate} must exceed delta {delta:.6g} "
                "for a certified geometric tail"
            )
        sd = problem.spectral(f"sd_tail:{rate!r}", problem.eta - rate * problem.xi)
        gamma_s = sd.gamma
        if gamma_s >= 1.0:
            raise UnsupportedInputError(
                "tilted spectral radius not subcritical; tail not boundable"
            )
        cyl = sd.cyl
        chi_arr = problem.chi.as_array(cyl)
        C_L = float(np.max(chi_arr / sd.h) * np.max(sd.h))
        E_t = max(
            math.exp(rate * float(np.min(ts))), math.exp(rate * t_max)
        )
        A = C_lo * E_t * C_L
        n_star = max(1, math.ceil((t_max + spread) / kappa) + 1)
        while A * gamma_s ** (n_star + 1) / (1.0 - gamma_s) > tol:
            n_star += 1
            if n_star > 200_000:
                raise NumericalError(
                    "tail certification needs too many levels", {"gamma_s": gamma_s}
                )
        return n_star, A * gamma_s ** (n_star + 1) / (1.0 - gamma_s), "exponential"
    raise UnsupportedInputError(
        "family lower-tail metadata missing: certified truncation impossible"
    )


def _run_levels(problem, n_star, t_max, qtol):
    """Collect (head, sxi, weight) states for levels 0..n_star."""
    cyl, prep, dxi, deta, chi_arr, cls_arr = problem._tables()
    max_step = float(np.max(np.abs(dxi))) if dxi.size else 1.0
    max_abs = (n_star + 1) * max(max_step, 1.0) + abs(problem.cert.spread) + 1.0
    if (max_abs / qtol) * cyl.K > 4.6e18:
        raise NumericalError(
            "state quantization would overflow; increase qtol",
            {"qtol": qtol, "levels": n_star},
        )
    head = np.array([cyl.idx(problem.x_head)], dtype=np.int64)
    qkey = np.zeros(1, dtype=np.int64)
    w = np.ones(1)
    sxi = np.zeros(1)
    lower, _ = problem.f.tails
    prune_cut = None
    if lower is not None and lower[0] == "support" and math.isfinite(lower[1]):
        prune_cut = t_max - lower[1] + problem.cert.spread
    heads_all, sxi_all, w_all = [head], [sxi], [w]
    n_states = 1
    for _ in range(n_star):
        head, qkey, sxi, w = kernels.dp_expand(
            head, qkey, w, prep, dxi, deta, qtol, cyl.K
        )
        if prune_cut is not None and head.size:
            keep = sxi <= prune_cut
            head, qkey, sxi, w = head[keep], qkey[keep], sxi[keep], w[keep]
        if not head.size:
            break
        heads_all.append(head)
        sxi_all.append(sxi)
        w_all.append(w)
        n_states += head.size
    return heads_all, sxi_all, w_all, n_states


def _accumulate(problem, heads_all, sxi_all, w_all, ts, use_abs):
    cyl, _, _, _, chi_arr, cls_arr = problem._tables()
    heads = np.concatenate(heads_all)
    sxi = np.concatenate(sxi_all)
    w = np.concatenate(w_all) * chi_arr[heads]
    out = np.zeros_like(ts)
    for c, tf in enumerate(problem.f.class_funcs):
        sel = cls_arr[heads] == c
        if not sel.any():
            continue
        s_c, w_c = sxi[sel], w[sel]
        packed = tf._pack()
        fn = (
            kernels.weighted_sum_pexp if tf.kind == "pexp" else kernels.weighted_sum_grid
        )
        workers = kernels.worker_count()
        if ts.size >= 256 and workers > 1:
            chunks = np.array_split(np.arange(ts.size), workers)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(
                    pool.map(lambda ix: fn(*packed, ts[ix], s_c, w_c, use_abs), chunks)
                )
            out += np.concatenate(parts)
        else:
            out += fn(*packed, ts, s_c, w_c, use_abs)
    return out


def eval_N_grid(problem, ts, tol=1e-10, qtol=1e-12, absolute=False):
    """Renewal function on a grid of times, with certified truncation.

    Returns (values, EvalDiagnostics).  ``absolute`` evaluates the series of
    |f| instead (the N^abs of the boundedness conditions).
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    if tol <= 0 or qtol <= 0:
        raise InputError("tol and qtol must be positive")
    n_star, tail, branch = _truncation_plan(problem, ts, tol)
    heads_all, sxi_all, w_all, n_states = _run_levels(
        problem, n_star, float(np.max(ts)), qtol
    )
    vals = _accumulate(problem, heads_all, sxi_all, w_all, ts, absolute)
    diag = EvalDiagnostics(len(heads_all) - 1, n_states, tail, branch, qtol)
    return vals, diag


def eval_N(problem, t, tol=1e-10, qtol=1e-12):
    """Pointwise renewal function value."""
    vals, _ = eval_N_grid(problem, [t], tol, qtol)
    return float(vals[0])


# ---------------------------------------------------------------------------
# asymptotics


def _G_value(problem):
    """h(x) / int xi dmu * int chi(y) int e^(-T delta) f_y(T) dT dnu(y).

    This expression is the non-lattice limit of e^(-t delta) N(t, x) and, in
    every case, the Cesaro average limit.
    """
    delta = problem.delta
    sd = problem.main_spectral()
    cyl = sd.cyl
    class_int = [tf.exp_weighted_integral(delta) for tf in problem.f.class_funcs]
    chi_arr = problem.chi.as_array(cyl)
    cls = np.array(
        [problem.f.class_of_word[w[: problem.f.depth]] for w in cyl.words], dtype=np.int64
    )
    nu_integral = float(np.sum(chi_arr * np.array(class_int)[cls] * sd.nu))
    xi_mean = float(np.sum(problem.xi.as_array(cyl) * sd.mu))
    h_x = float(sd.h[cyl.idx(problem.x_head)])
    return h_x * nu_integral / xi_mean, {
        "delta": delta,
        "xi_mean": xi_mean,
        "nu_integral": nu_integral,
        "h_x": h_x,
    }


def asymptotic_G(problem):
    """Non-lattice asymptote G(x) of e^(-t delta) N(t, x)."""
    kind = problem.lattice.kind
    if kind == "lattice":
        raise WrongTheoremError(
            "xi is lattice: the limit is periodic, use lattice_Gtilde"
        )
    if kind != "non-lattice":
        raise UnsupportedInputError("lattice classification inconclusive")
    G, diag = _G_value(problem)
    return AsymptoticResult("nonlattice", G=G, diagnostics=diag)


def _frac(x):
    return x - math.floor(x)


def _geom_cutoff(c_eff, r, tol, start):
    """Smallest L >= start with c_eff * r^(L+1) / (1-r) <= tol (0 < r < 1)."""
    L = max(int(start), 0)
    while c_eff * r ** (L + 1) / (1.0 - r) > tol:
        L += 1
        if L > 200_000:
            raise NumericalError("lattice sum truncation too slow", {"ratio": r})
    return L


def _lattice_sum(tf, a, delta, offset, tol):
    """sum_l e^(-a l delta) tf(a l + offset), truncated by tail metadata.

    Envelopes are valid only on their half-axis, so cutoffs never start
    before the argument a*l + offset has the right sign.
    """
    sup_u, exp_u = tf.support_upper(), tf.exp_upper()
    if sup_u is not None:
        if math.isinf(sup_u) and sup_u > 0:
            raise UnsupportedInputError("upper tail metadata missing")
        l_hi = math.floor((sup_u - offset) / a) + 1
    elif exp_u is not None:
        C, rate = exp_u
        if C == 0.0:
            l_hi = math.floor(-offset / a) + 1
        else:
            if rate >= delta:
                raise UnsupportedInputError("upper envelope rate must stay below delta")
            r = math.exp(a * (rate - delta))
            env_from = math.ceil(-offset / a)  # argument >= 0 from here on
            l_hi = _geom_cutoff(C * math.exp(rate * offset), r, tol, env_from)
    else:
        raise UnsupportedInputError("upper tail metadata missing")
    sup_l, exp_l = tf.support_lower(), tf.exp_lower()
    if sup_l is not None:
        l_lo = 0 if math.isinf(sup_l) else math.floor((sup_l - offset) / a)
    elif exp_l is not None:
        C, rate = exp_l
        if C == 0.0:
            l_lo = math.ceil(-offset / a) - 1
        else:
            if rate <= delta:
                raise UnsupportedInputError("lower envelope rate must exceed delta")
            r = math.exp(-a * (rate - delta))
            env_from = math.ceil(offset / a)  # -l at most floor(-offset/a) here
            k = _geom_cutoff(C * math.exp(rate * offset), r, tol, env_from)
            l_lo = -k
    else:
        raise UnsupportedInputError("lower tail metadata missing")
    if l_hi < l_lo:
        return 0.0
    ls = np.arange(l_lo, l_hi + 1, dtype=np.float64)
    vals = tf(a * ls + offset)
    return float(np.sum(np.exp(-a * ls * delta) * vals))


def lattice_Gtilde(problem, t, tol=1e-10):
    """Periodic asymptote of e^(-t delta) N(t, x) in the lattice case."""
    lat = problem.lattice
    if lat.kind != "lattice":
        raise WrongTheoremError("xi is not lattice; use asymptotic_G")
    if lat.zeta is None or lat.psi is None:
        raise UnsupportedInputError(
            "lattice representative zeta / transfer function psi unavailable; "
            "supply them on the problem"
        )
    a, zeta, psi = lat.span, lat.zeta, lat.psi
    delta = problem.delta
    sd = problem.spectral("sd_lattice", problem.eta - delta * zeta)
    cyl = sd.cyl
    psi_x = psi(problem.x_head)
    beta = a * _frac((t + psi_x) / a)
    chi_arr = problem.chi.as_array(cyl)
    cls = [problem.f.class_of_word[w[: problem.f.depth]] for w in cyl.words]
    psi_arr = psi.as_array(cyl)
    cache = {}
    total = 0.0
    for k, w in enumerate(cyl.words):
        if chi_arr[k] == 0.0:
            continue
        key = (cls[k], float(psi_arr[k]))
        if key not in cache:
            cache[key] = _lattice_sum(
                problem.f.class_funcs[cls[k]], a, delta, beta - psi_arr[k],
                tol / max(1, cyl.K),
            )
        total += chi_arr[k] * cache[key] * float(sd.nu[k])
    zeta_mean = float(np.sum(zeta.as_array(cyl) * sd.mu))
    h_x = float(sd.h[cyl.idx(problem.x_head)])
    return (
        math.exp(-beta * delta)
        * (a * math.exp(delta * psi_x) / zeta_mean)
        * h_x
        * total
    )


def lattice_Gtilde_table(problem, n=64, tol=1e-10):
    a = problem.lattice.span
    ts = np.linspace(0.0, a, n, endpoint=False)
    return ts, np.array([lattice_Gtilde(problem, t, tol) for t in ts])


def cesaro_average(problem, t_max, n_points, tol=1e-10):
    """Trapezoid Cesaro average of e^(-T delta) N(T, x) over [0, t_max].

    The reported target is the G(x) expression, which is the limit in both
    the lattice and non-lattice cases (in the lattice case it equals the
    period average of the periodic asymptote).
    """
    if t_max <= 0:
        raise InputError("t_max must be positive")
    if n_points < 2:
        raise InputError("need at least two grid points")
    ts = np.linspace(0.0, float(t_max), int(n_points))
    vals, diag = eval_N_grid(problem, ts, tol)
    Z = np.exp(-problem.delta * ts) * vals
    avg = float(np.trapezoid(Z, ts) / t_max)
    target, gdiag = _G_value(problem)
    return AsymptoticResult(
        "average",
        G=avg,
        diagnostics={
            "target": target,
            "t_max": float(t_max),
            "n_points": int(n_points),
            "tail_bound": diag.tail_bound,
            **gdiag,
        },
    )


# ---------------------------------------------------------------------------
# regularity conditions


@dataclass
class ConditionsReport:
    integrable: dict
    bounded: dict
    negative_decay: dict
    non_oscillatory: dict
    advisory: bool = True

    def as_dict(self):
        return {
            "A_integrable": self.integrable,
            "B_bounded": self.bounded,
            "C_negative_decay": self.negative_decay,
            "D_non_oscillatory": self.non_oscillatory,
            "advisory": self.advisory,
        }


def check_conditions(problem, t_grid, h_grid):
    """Sampled verification of the regularity conditions; advisory only.

    (A) integrability of e^(-t delta)|f| per cylinder class, via Riemann
    sums at the finest mesh; (B) the grid supremum of e^(-t delta) N^abs;
    (C) an exponential fit of N^abs on the negative part of the grid;
    (D) monotonicity sampling and the equi-d.R.i. check of the family.
    """
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=np.float64))
    h_grid = [float(h) for h in h_grid]
    if t_grid.size == 0 or not h_grid:
        raise InputError("grids must be nonempty")
    delta = problem.delta
    fine = min(h_grid)
    integrable = {}
    for c, tf in enumerate(problem.f.class_funcs):
        res = dri_check(tf, delta, [fine])
        _, lo, hi = res.rows[0]
        integrable[f"class_{c}"] = {
            "finite": not res.unbounded,
            "lower_sum": lo,
            "upper_sum": hi,
        }
    n_abs, _ = eval_N_grid(problem, t_grid, absolute=True)
    weighted = np.exp(-delta * t_grid) * n_abs
    bounded = {"constant": float(np.max(weighted)), "t_at": float(t_grid[np.argmax(weighted)])}
    neg = t_grid[t_grid < 0]
    if neg.size >= 2:
        wneg = np.exp(-delta * neg) * eval_N_grid(problem, neg, absolute=True)[0]
        pos = wneg > 0
        if not pos.any():
            negative_decay = {"identically_zero": True, "rate": math.inf, "holds": True}
        elif pos.sum() >= 2:
            slope, icept = np.polyfit(neg[pos], np.log(wneg[pos]), 1)
            negative_decay = {
                "identically_zero": False,
                "rate": float(slope),
                "prefactor": float(math.exp(icept)),
                "holds": bool(slope > 0),
            }
        else:
            negative_decay = {"identically_zero": False, "rate": None, "holds": None}
    else:
        negative_decay = {"skipped": "no negative grid points"}
    monotone = {}
    for c, tf in enumerate(problem.f.class_funcs):
        pts = np.linspace(float(t_grid.min()) - 1.0, float(t_grid.max()) + 1.0, 513)
        dv = np.diff(tf(pts))
        monotone[f"class_{c}"] = bool((dv >= -1e-12).all() or (dv <= 1e-12).all())
    fam = dri_check_family(problem.f.class_funcs, delta, sorted(h_grid, reverse=True))
    non_oscillatory = {
        "monotone_classes": monotone,
        "equi_dri_verdict": fam.verdict,
        "equi_dri_gap": fam.smallest_gap,
    }
    return ConditionsReport(integrable, bounded, negative_decay, non_oscillatory)
