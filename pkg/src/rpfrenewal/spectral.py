"""Exact finite-dimensional transfer matrices for locally constant potentials,
their leading eigendata (Perron root, eigenfunction, eigenmeasure, Gibbs
measure), topological pressure, and the root delta of P(eta - delta*xi) = 0.

A depth-(m+1) potential acts exactly on depth-m cylinder functions, so no
discretization error enters anywhere in this module.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .errors import InputError, NumericalError
from .potential import LocallyConstantPotential, check_eventually_positive


@dataclass
class TransferMatrix:
    """CSR matrix of the weighted preimage sum on depth-m cylinder functions.

    Row w, column (j, w_1..w_{m-1}) holds exp(phi(j . w)) for every letter j
    allowed before w; (matvec g)[w] = sum_j exp(phi(j.w)) g((j.w)|_m).
    """

    m: int
    cyl: object
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    _t: tuple | None = field(default=None, repr=False)

    @property
    def K(self):
        return self.cyl.K

    def matvec(self, x):
        return kernels.csr_matvec(self.indptr, self.indices, self.data, x)

    def rmatvec(self, x):
        if self._t is None:
            self._t = _csr_transpose(self.indptr, self.indices, self.data, self.K)
        tp, ti, td = self._t
        return kernels.csr_matvec(tp, ti, td, x)

    def dense(self):
        out = np.zeros((self.K, self.K))
        for r in range(self.K):
            for j in range(self.indptr[r], self.indptr[r + 1]):
                out[r, self.indices[j]] = self.data[j]
        return out


def _csr_transpose(indptr, indices, data, n):
    counts = np.bincount(indices, minlength=n)
    tp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=tp[1:])
    ti = np.empty_like(indices)
    td = np.empty_like(data)
    cursor = tp[:-1].copy()
    for r in range(n):
        for j in range(indptr[r], indptr[r + 1]):
            c = indices[j]
            ti[cursor[c]] = r
            td[cursor[c]] = data[j]
            cursor[c] += 1
    return tp, ti, td


def build_transfer(phi, shift=None, m=None):
    """Transfer matrix of a depth-d potential on depth-m cylinders, m >= d-1."""
    shift = shift or phi.shift
    if m is None:
        m = max(phi.depth - 1, 1)
    if m < max(phi.depth - 1, 1):
        raise InputError(
            f"depth m={m} too small: the operator of a depth-{phi.depth} "
            f"potential is exact only on cylinders of depth >= {max(phi.depth - 1, 1)}"
        )
    cyl = shift.cylinders(m)
    d = phi.depth
    indptr = [0]
    indices, data = [], []
    for w in cyl.words:
        row = 0
        for j in range(1, shift.M + 1):
            if shift.allows(j, w[0]):
                jw = (j,) + w
                indices.append(cyl.index[jw[:m]])
                data.append(math.exp(phi.values[jw[:d]]))
                row += 1
        if row == 0:
            raise InputError(f"cylinder {w} has no allowed predecessor letter")
        indptr.append(indptr[-1] + row)
    return TransferMatrix(
        m,
        cyl,
        np.array(indptr, dtype=np.int64),
        np.array(indices, dtype=np.int64),
        np.array(data),
    )


@dataclass
class SpectralData:
    """Leading eigendata of a transfer matrix.

    gamma is the Perron root (= exp(pressure)); h the strictly positive right
    eigenvector; nu the left eigenvector normalized to a probability vector;
    h additionally scaled so that sum(h * nu) = 1; mu = h * nu is the Gibbs
    measure on depth-m cylinders.  gap is a heuristic estimate of
    |second eigenvalue| / gamma.
    """

    gamma: float
    pressure: float
    h: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    gap: float
    cyl: object
    residuals: dict
    iterations: int

    def table(self, which="mu"):
        vec = getattr(self, which)
        return {w: float(vec[i]) for i, w in enumerate(self.cyl.words)}


def leading_eigendata(
    T, rayleigh_tol=1e-14, residual_target=1e-13, max_iter=200_000, gap_iters=400
):
    """Power iteration on T and its transpose with all-ones start vectors.

    Stops once successive Rayleigh quotients move by less than rayleigh_tol
    relative and both eigen-residuals fall below residual_target; positivity
    of the iterates is guaranteed by primitivity.
    """
    K = T.K
    h = np.ones(K)
    nu = np.ones(K)
    gamma = np.nan
    res_h = res_nu = np.inf
    it = 0
    while it < max_iter:
        it += 1
        h2 = T.matvec(h)
        nu2 = T.rmatvec(nu)
        g_h = float(h2.sum() / h.sum())
        g_nu = float(nu2.sum() / nu.sum())
        res_h = float(np.max(np.abs(h2 - g_h * h)) / (abs(g_h) * np.max(np.abs(h))))
        res_nu = float(np.max(np.abs(nu2 - g_nu * nu)) / (abs(g_nu) * np.max(np.abs(nu))))
        new_gamma = 0.5 * (g_h + g_nu)
        done = (
            np.isfinite(gamma)
            and abs(new_gamma - gamma) <= rayleigh_tol * abs(new_gamma)
            and res_h <= residual_target
            and res_nu <= residual_target
        )
        gamma = new_gamma
        h = h2 / h2.sum()
        nu = nu2 / nu2.sum()
        if done:
            break
    else:
        raise NumericalError(
            "power iteration did not converge",
            {
                "iterations": it,
                "gamma_estimate": gamma,
                "residual_h": res_h,
                "residual_nu": res_nu,
            },
        )
    gamma = float(nu @ T.matvec(h) / (nu @ h))
    nu = nu / nu.sum()
    h = h / float(h @ nu)
    mu = h * nu
    gap = _estimate_gap(T, gamma, h, nu, gap_iters)
    residuals = {
        "h": float(np.max(np.abs(T.matvec(h) - gamma * h)) / (gamma * np.max(np.abs(h)))),
        "nu": float(np.sum(np.abs(T.rmatvec(nu) - gamma * nu)) / gamma),
    }
    return SpectralData(
        gamma, math.log(gamma), h, nu, mu, gap, T.cyl, residuals, it
    )


def _estimate_gap(T, gamma, h, nu, iters):
    # power iteration on the nu (x) h deflated matrix; heuristic, not certified
    v = np.ones(T.K) + np.linspace(0.0, 1.0, T.K)
    v = v - h * float(nu @ v)
    norm = np.max(np.abs(v))
    if norm == 0.0:
        return 0.0
    v /= norm
    ratios = []
    for _ in range(iters):
        v = T.matvec(v) - gamma * h * float(nu @ v)
        norm = float(np.max(np.abs(v)))
        if norm < 1e-280:
            return 0.0
        ratios.append(norm)
        v /= norm
    tail = ratios[-min(50, len(ratios)) :]
    lam2 = float(np.exp(np.mean(np.log(tail)))) if tail else 0.0
    return min(lam2 / gamma, 1.0)


def pressure(phi, shift=None, m=None):
    """Topological pressure: log of the leading transfer eigenvalue."""
    T = build_transfer(phi, shift, m)
    return leading_eigendata(T).pressure


def solve_delta(eta, xi, shift=None, m=None, tol=1e-12):
    """The unique delta with P(eta - delta*xi) = 0.

    Requires xi to have eventually positive Birkhoff sums (checked), which
    makes s -> P(eta - s*xi) strictly decreasing with limits +/- infinity;
    the root is bracketed by doubling and polished by Brent's method.
    """
    shift = shift or xi.shift
    cert = check_eventually_positive(xi, shift)
    if not cert.flag:
        raise InputError(
            "xi is not eventually positive (minimum cycle mean "
            f"{cert.kappa:.6g} <= 0); delta is not defined"
        )
    if m is None:
        m = max(1, xi.depth - 1, eta.depth - 1)

    def g(s):
        return pressure(eta - s * xi, shift, m)

    lo, hi = -1.0, 1.0
    while g(lo) <= 0.0:
        lo *= 2.0
        if lo < -1e9:
            raise NumericalError("failed to bracket delta from below", {"lo": lo})
    while g(hi) >= 0.0:
        hi *= 2.0
        if hi > 1e9:
            raise NumericalError("failed to bracket delta from above", {"hi": hi})
    gl, gm, gh = g(lo), g(0.5 * (lo + hi)), g(hi)
    if not (gl > gm > gh):
        raise NumericalError(
            "pressure is not strictly decreasing on the bracket",
            {"lo": lo, "hi": hi, "values": (gl, gm, gh)},
        )
    delta = float(brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200))
    resid = g(delta)
    if abs(resid) > tol:
        raise NumericalError(
            "delta root residual above tolerance", {"delta": delta, "residual": resid}
        )
    return delta


@dataclass
class GibbsReport:
    constant: float
    pressure: float
    lengths: tuple
    words_checked: int


def _cylinder_mass(sd, phi, word):
    """nu-mass of an arbitrary admissible cylinder, exact via the eigen-relation.

    For words deeper than the table, nu([u]) = exp(phi(u)) / gamma * nu([sigma u]);
    for shorter words, masses of children sum.
    """
    m = sd.cyl.depth
    L = len(word)
    if L == m:
        return float(sd.nu[sd.cyl.index[word]])
    if L > m:
        return math.exp(phi.values[word[: phi.depth]]) / sd.gamma * _cylinder_mass(
            sd, phi, word[1:]
        )
    return sum(
        float(sd.nu[i]) for i, w in enumerate(sd.cyl.words) if w[:L] == word
    )


def gibbs_measure(phi, shift=None, m=None, extra=4, max_enumeration=500_000):
    """Gibbs measure on depth-m cylinders plus an empirical Gibbs constant.

    The report constant c is the largest two-sided deviation of
    mu([w|_L]) / exp(S_L phi - L P) over all admissible words up to length
    m + extra (the sums pinned exactly by extending to length L + depth - 1).
    """
    shift = shift or phi.shift
    if m is None:
        m = max(phi.depth - 1, 1)
    sd = leading_eigendata(build_transfer(phi, shift, m))
    d = phi.depth
    P = sd.pressure
    c = 1.0
    words_checked = 0
    lengths = tuple(range(1, m + extra + 1))
    from .symbolic import admissible_words

    for L in lengths:
        words = admissible_words(shift, L + d - 1)
        words_checked += len(words)
        if words_checked > max_enumeration:
            raise InputError(
                f"Gibbs scan would enumerate more than {max_enumeration} words"
            )
        for v in words:
            s = sum(phi.values[v[k : k + d]] for k in range(L))
            mass = _mu_mass(sd, phi, v[:L])
            ratio = mass / math.exp(s - L * P)
            c = max(c, ratio, 1.0 / ratio)
    return sd.table("mu"), GibbsReport(c, P, lengths, words_checked)


def _mu_mass(sd, phi, word):
    # mu([w]) = h(w|_m) nu([w]) once |w| >= m; otherwise sum the children
    m = sd.cyl.depth
    if len(word) >= m:
        return float(sd.h[sd.cyl.index[word[:m]]]) * _cylinder_mass(sd, phi, word)
    return sum(
        float(sd.h[i] * sd.nu[i]) for i, w in enumerate(sd.cyl.words) if w[: len(word)] == word
    )


def integrate(psi, table, m=None):
    """Integral of a depth-compatible potential against a cylinder measure."""
    words = list(table.keys())
    if not words:
        raise InputError("empty measure table")
    L = len(words[0])
    if m is not None and L != m:
        raise InputError(f"measure table depth {L} does not match m={m}")
    if psi.depth > L:
        raise InputError(
            f"integrand depth {psi.depth} exceeds measure resolution {L}"
        )
    return float(sum(psi.values[tuple(w)[: psi.depth]] * mass for w, mass in table.items()))


def normalize_potential(eta, shift=None, m=None):
    """Shift eta by log h - log h(sigma .) - log gamma so rows sum to one.

    The result represents a genuine transition kernel: for every depth-m
    cylinder w, sum_j exp(eta_tilde(j.w)) = 1.
    """
    shift = shift or eta.shift
    if m is None:
        m = max(eta.depth - 1, 1)
    sd = leading_eigendata(build_transfer(eta, shift, m))
    log_gamma = math.log(sd.gamma)
    d = eta.depth
    from .symbolic import admissible_words

    table = {}
    for u in admissible_words(shift, m + 1):
        table[u] = (
            eta.values[u[:d]]
            + math.log(sd.h[sd.cyl.index[u[:m]]])
            - math.log(sd.h[sd.cyl.index[u[1 : m + 1]]])
            - log_gamma
        )
    out = LocallyConstantPotential(shift, m + 1, table)
    worst = _row_sum_defect(out, shift)
    if worst > 1e-10:
        raise NumericalError("normalized potential rows deviate from 1", {"defect": worst})
    return out


def _row_sum_defect(eta_n, shift):
    from .symbolic import admissible_words

    m = eta_n.depth - 1
    worst = 0.0
    for w in admissible_words(shift, m):
        s = sum(
            math.exp(eta_n.values[(j,) + w])
            for j in range(1, shift.M + 1)
            if shift.allows(j, w[0])
        )
        worst = max(worst, abs(s - 1.0))
    return worst
