"""Classical renewal corollaries: the key renewal theorem for finitely
supported measures, the Markov renewal theorem with point-mass kernels, and
the lattice counting asymptote for weighted orbit counts.

Each solver is self-contained (closed forms, dense LAPACK eigenpairs and a
scalar root find) so it can serve as an independent oracle for the general
transfer-operator machinery; the embeddings of these specs as depth-1 or
depth-2 problems are provided for cross-checks.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import InputError, NumericalError, WrongTheoremError
from .potential import LocallyConstantPotential, real_gcd
from .renewal import FFamily, RenewalProblem, _lattice_sum
from .spectral import build_transfer, leading_eigendata, solve_delta
from .symbolic import (
    Subshift,
    is_primitive,
    _enumerate_cycles_indexed,
    _karp_min_mean,
)
from .timefunc import TimeFunction


@dataclass
class KeyRenewalSpec:
    """i.i.d. renewal data: probability vector p, positive times s, observable z."""

    p: tuple
    s: tuple
    z: TimeFunction

    def __post_init__(self):
        self.p = tuple(float(v) for v in self.p)
        self.s = tuple(float(v) for v in self.s)
        if len(self.p) != len(self.s) or len(self.p) < 2:
            raise InputError("p and s must have equal length >= 2")
        if any(not (0.0 < v < 1.0) for v in self.p):
            raise InputError("probabilities must lie in (0, 1)")
        if abs(sum(self.p) - 1.0) > 1e-12:
            raise InputError(f"probabilities sum to {sum(self.p)}, not 1")
        if any(v <= 0.0 for v in self.s):
            raise InputError("interarrival values must be positive")

    @property
    def mean(self):
        return float(sum(p * s for p, s in zip(self.p, self.s)))


@dataclass
class KeyRenewalResult:
    nonlattice: float
    mean: float
    integral: float
    span: float | None          # lattice span, None in the non-lattice case
    lattice_value: object       # callable t -> asymptote, or None
    average: float


def key_renewal_asymptote(spec, span_tol=1e-9):
    """Closed-form asymptotes of Z = Z * F + z with F = sum_i p_i delta_{s_i}.

    Non-lattice: integral(z) / mean.  Lattice with maximal span a:
    t -> (a / mean) * sum_l z(a l + t).  The Cesaro average always equals the
    non-lattice value.
    """
    mean = spec.mean
    integral = spec.z.exp_weighted_integral(0.0)
    nonlattice = integral / mean
    span = real_gcd(spec.s, span_tol)
    lattice_value = None
    if span >= 1e3 * span_tol and all(
        abs(s - span * round(s / span)) <= span_tol for s in spec.s
    ):
        a = span

        def lattice_fn(t, _a=a, _z=spec.z, _mean=mean):
            return (_a / _mean) * _lattice_sum(_z, _a, 0.0, float(t), 1e-12)

        lattice_value = lattice_fn
    else:
        span = None
    return KeyRenewalResult(nonlattice, mean, integral, span, lattice_value, nonlattice)


def embed_key_spec(spec, delta=1.0):
    """Key renewal data as a depth-1 problem on the full shift.

    With eta(i.) = log(p_i) + delta * s_i the tilt exponent of the embedded
    problem is exactly ``delta`` and e^(-delta t) N(t, x) = Z(t).
    """
    M = len(spec.p)
    shift = Subshift.full(M)
    eta = LocallyConstantPotential(
        shift, 1, {(i + 1,): math.log(spec.p[i]) + delta * spec.s[i] for i in range(M)}
    )
    xi = LocallyConstantPotential(shift, 1, {(i + 1,): spec.s[i] for i in range(M)})
    chi = LocallyConstantPotential.constant(shift, 1.0)
    fam = FFamily.shared(shift, spec.z.tilted(delta))
    return RenewalProblem(shift, eta, xi, chi, fam, (1,))


# ---------------------------------------------------------------------------
# Markov renewal


@dataclass
class MarkovRenewalSpec:
    """Point-mass Markov renewal data.

    ``transitions`` maps the pair word (j, i) (new state j after current
    state i) to (eta, xi): the kernel for the step i -> j carries mass
    e^(eta) at the time xi.  ``f`` maps each state to its observable.
    """

    M: int
    transitions: dict
    f: dict

    def __post_init__(self):
        self.transitions = {
            (int(j), int(i)): (float(e), float(x))
            for (j, i), (e, x) in self.transitions.items()
        }
        if self.M < 2:
            raise InputError("need at least two states")
        for (j, i) in self.transitions:
            if not (1 <= j <= self.M and 1 <= i <= self.M):
                raise InputError(f"transition ({j},{i}) outside the state space")
        if set(self.f.keys()) != set(range(1, self.M + 1)):
            raise InputError("observables must be given for every state")
        pattern = np.zeros((self.M, self.M), dtype=np.int64)
        for (j, i) in self.transitions:
            pattern[i - 1, j - 1] = 1  # chain step i -> j
        flag, _ = is_primitive(pattern)
        if not flag:
            raise InputError("transition pattern is not primitive")


class _ChainGraph:
    """Minimal graph adapter (states as nodes) for the cycle helpers."""

    def __init__(self, spec):
        src, dst, w = [], [], []
        for (j, i), (_, x) in sorted(spec.transitions.items()):
            src.append(i - 1)
            dst.append(j - 1)
            w.append(x)
        self.src = np.array(src, dtype=np.int64)
        self.dst = np.array(dst, dtype=np.int64)
        self.weights = np.array(w)
        self.n_nodes = spec.M
        self.out = [[] for _ in range(spec.M)]
        for e, s in enumerate(self.src):
            self.out[s].append(e)


@dataclass
class MarkovResult:
    delta: float
    G: dict
    h: np.ndarray
    nu: np.ndarray
    span: float | None
    diagnostics: dict = field(default_factory=dict)


def _perron_pair(B):
    vals, vecs = np.linalg.eig(B)
    k = int(np.argmax(np.abs(vals)))
    if abs(vals[k].imag) > 1e-9 * abs(vals[k]):
        raise NumericalError("leading eigenvalue is not real", {"eigenvalue": vals[k]})
    v = vecs[:, k].real
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    if (v <= 0).any():
        raise NumericalError("Perron vector has nonpositive entries", {"vector": v})
    return float(vals[k].real), v


def markov_renewal_G(spec, tol=1e-12, span_tol=1e-9):
    """Per-state limits G(i) of e^(-delta t) N(t, i) for the Markov system.

    delta is found by bracketing the spectral radius of B(-s) (dense LAPACK
    eigenvalues, independent of the transfer-operator path); G follows the
    point-mass formula with denominator sum nu_k h_j xi(jk) e^(-delta xi) e^(eta).
    A detected lattice span is reported: the values then describe the Cesaro
    averages rather than plain limits.
    """
    graph = _ChainGraph(spec)
    kappa = _karp_min_mean(graph, graph.weights)
    if not (kappa > 0):
        raise InputError(
            f"interarrival cycle means must be positive (minimum {kappa:.6g})"
        )

    def B(s):
        mat = np.zeros((spec.M, spec.M))
        for (j, i), (e, x) in spec.transitions.items():
            mat[i - 1, j - 1] = math.exp(e + s * x)
        return mat

    def g(s):
        return math.log(max(np.abs(np.linalg.eigvals(B(-s)))))

    lo, hi = -1.0, 1.0
    while g(lo) <= 0.0:
        lo *= 2.0
    while g(hi) >= 0.0:
        hi *= 2.0
    delta = float(brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16))
    if abs(g(delta)) > max(tol, 1e-13):
        raise NumericalError("spectral radius root residual too large", {"residual": g(delta)})
    Bd = B(-delta)
    _, h = _perron_pair(Bd)
    _, nu = _perron_pair(Bd.T)
    num = np.array([spec.f[j + 1].exp_weighted_integral(delta) for j in range(spec.M)])
    den = 0.0
    for (j, i), (e, x) in spec.transitions.items():
        den += nu[i - 1] * h[j - 1] * x * math.exp(-delta * x) * math.exp(e)
    G = {i + 1: float(h[i] * (nu @ num) / den) for i in range(spec.M)}
    cycles, _ = _enumerate_cycles_indexed(graph, graph.n_nodes)
    sums = []
    for c in cycles:
        total = 0.0
        for a, b in zip(c, c[1:] + c[:1]):
            total += spec.transitions[(b + 1, a + 1)][1]
        sums.append(total)
    span = real_gcd(sums, span_tol)
    span = span if span >= 1e3 * span_tol else None
    return MarkovResult(delta, G, h, nu, span, {"kappa": kappa})


def embed_markov_spec(spec):
    """Depth-2 problems (one per starting state) matching the Markov data."""
    A = np.zeros((spec.M, spec.M), dtype=np.int64)
    for (j, i) in spec.transitions:
        A[j - 1, i - 1] = 1  # word pair (j, i) admissible
    shift = Subshift(spec.M, A)
    eta = LocallyConstantPotential(
        shift, 2, {(j, i): e for (j, i), (e, _) in spec.transitions.items()}
    )
    xi = LocallyConstantPotential(
        shift, 2, {(j, i): x for (j, i), (_, x) in spec.transitions.items()}
    )
    chi = LocallyConstantPotential.constant(shift, 1.0)
    fam = FFamily(shift, 1, {(i,): spec.f[i] for i in range(1, spec.M + 1)})
    problems = {}
    for i in range(1, spec.M + 1):
        nxt = next(k for k in range(1, spec.M + 1) if shift.allows(i, k))
        problems[i] = RenewalProblem(shift, eta, xi, chi, fam, (i, nxt))
    return problems


# ---------------------------------------------------------------------------
# lattice counting asymptote


def lalley_counting_asymptote(shift, xi, chi, lattice_data, x_head, t, m=None):
    """Asymptote of the counting function N~(t, x) for lattice xi, eta = 0.

    Evaluates a h(x) int chi(y) e^(delta a floor(t/a - (psi(y)-psi(x))/a)) dnu(y)
    / ((1 - e^(-delta a)) int zeta dmu) with spectral data of -delta zeta.
    """
    if lattice_data.kind != "lattice":
        raise WrongTheoremError("counting asymptote requires a lattice potential")
    if lattice_data.zeta is None or lattice_data.psi is None:
        raise InputError("lattice data must carry zeta and psi")
    a, zeta, psi = lattice_data.span, lattice_data.zeta, lattice_data.psi
    zero = LocallyConstantPotential.constant(shift, 0.0)
    delta = solve_delta(zero, xi, shift)
    if m is None:
        m = max(1, xi.depth - 1, zeta.depth - 1, chi.depth, psi.depth)
    sd = leading_eigendata(build_transfer(zeta * (-delta), shift, m))
    cyl = sd.cyl
    x_head = tuple(x_head)
    psi_x = psi(x_head)
    chi_arr = chi.as_array(cyl)
    psi_arr = psi.as_array(cyl)
    floors = np.floor(t / a - (psi_arr - psi_x) / a)
    integral = float(np.sum(chi_arr * np.exp(delta * a * floors) * sd.nu))
    zeta_mean = float(np.sum(zeta.as_array(cyl) * sd.mu))
    h_x = float(sd.h[cyl.idx(x_head)])
    return a * h_x * integral / ((1.0 - math.exp(-delta * a)) * zeta_mean)
