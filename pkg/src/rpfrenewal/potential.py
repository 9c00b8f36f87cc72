"""Locally constant potential functions, Birkhoff sums, eventual positivity,
and lattice/non-lattice classification via periodic-orbit sums.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .symbolic import (
    Subshift,
    admissible_words,
    is_admissible,
    _enumerate_cycles_indexed,
    _min_mean_cycle_indexed,
)


class LocallyConstantPotential:
    """Real function on the path space depending on the first ``depth`` letters.

    The table is total over admissible depth-d words, so the function is
    exactly locally constant: all variations var_n vanish for n >= d.
    """

    def __init__(self, shift, depth, values):
        if depth < 1:
            raise InputError(f"potential depth must be >= 1, got {depth}")
        words = admissible_words(shift, depth)
        values = {tuple(k): float(v) for k, v in values.items()}
        missing = [w for w in words if w not in values]
        extra = [w for w in values if w not in set(words)]
        if missing:
            raise InputError(f"potential table missing {len(missing)} words, e.g. {missing[0]}")
        if extra:
            raise InputError(f"potential table has inadmissible words, e.g. {extra[0]}")
        self.shift = shift
        self.depth = int(depth)
        self.values = values
        self._arrays = {}

    @classmethod
    def constant(cls, shift, c, depth=1):
        return cls(shift, depth, {w: c for w in admissible_words(shift, depth)})

    def __call__(self, word):
        if len(word) < self.depth:
            raise InputError(
                f"word of length {len(word)} is shorter than potential depth {self.depth}"
            )
        return self.values[tuple(word[: self.depth])]

    def lift(self, depth):
        """Same function represented on deeper cylinders."""
        if depth < self.depth:
            raise InputError("cannot lift to a shallower depth")
        if depth == self.depth:
            return self
        table = {w: self.values[w[: self.depth]] for w in admissible_words(self.shift, depth)}
        return LocallyConstantPotential(self.shift, depth, table)

    def _binary(self, other, op):
        if isinstance(other, LocallyConstantPotential):
            if other.shift != self.shift:
                raise InputError("potentials live on different subshifts")
            d = max(self.depth, other.depth)
            a, b = self.lift(d), other.lift(d)
            return LocallyConstantPotential(
                self.shift, d, {w: op(a.values[w], b.values[w]) for w in a.values}
            )
        c = float(other)
        return LocallyConstantPotential(
            self.shift, self.depth, {w: op(v, c) for w, v in self.values.items()}
        )

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __neg__(self):
        return self * (-1.0)

    def __mul__(self, c):
        c = float(c)
        return LocallyConstantPotential(
            self.shift, self.depth, {w: c * v for w, v in self.values.items()}
        )

    __rmul__ = __mul__

    def as_array(self, cyl):
        """Values aligned with a CylinderIndex of depth >= self.depth."""
        if cyl.depth < self.depth:
            raise InputError("cylinder depth shallower than potential depth")
        key = (id(cyl.shift), cyl.depth)
        if key not in self._arrays:
            self._arrays[key] = np.array(
                [self.values[w[: self.depth]] for w in cyl.words]
            )
        return self._arrays[key]

    def __repr__(self):
        return f"LocallyConstantPotential(depth={self.depth}, words={len(self.values)})"


def evaluate(pot, word):
    """Value of the potential at the depth-d prefix of ``word``."""
    return pot(word)


def birkhoff_sum(pot, u, x_head, n=None):
    """Sum of the potential along the first n shifts of the point u + x_head."""
    u, x_head = tuple(u), tuple(x_head)
    if n is None:
        n = len(u)
    if n != len(u):
        raise InputError(f"prefix length {len(u)} does not match n={n}")
    if len(x_head) < pot.depth:
        raise InputError("x_head shorter than potential depth")
    y = u + x_head
    if not is_admissible(pot.shift, y):
        raise InputError(f"concatenation {y} is not admissible")
    return float(sum(pot.values[y[k : k + pot.depth]] for k in range(n))) if n else 0.0


def _edge_weights(xi, graph):
    d = xi.depth
    return np.array([xi.values[w[:d]] for w in graph.edge_words])


def _orbit_graph(xi, shift):
    m = max(1, xi.depth - 1)
    return shift.cylinders(m).graph()


@dataclass
class PositivityCertificate:
    """Certified eventual positivity of Birkhoff sums.

    ``kappa`` is the minimum cycle mean; node potentials give ``spread`` such
    that S_m >= m*kappa - spread along every admissible path, so sums are
    strictly positive for all m >= ``m_star``.
    """

    flag: bool
    kappa: float
    m_star: int | None
    spread: float
    cycle: list = field(default_factory=list)

    def lower_bound(self, m):
        return m * self.kappa - self.spread


def check_eventually_positive(xi, shift=None):
    shift = shift or xi.shift
    graph = _orbit_graph(xi, shift)
    wts = _edge_weights(xi, graph)
    kappa, cycle_idx, p = _min_mean_cycle_indexed(graph, wts)
    spread = float(np.max(p) - np.min(p))
    flag = kappa > 0.0
    m_star = None
    if flag:
        slack = spread + 1e-9 * max(1.0, spread)
        m_star = max(1, int(math.floor(slack / kappa)) + 1)
    cycle = [graph.cyl.words[v] for v in cycle_idx]
    return PositivityCertificate(flag, float(kappa), m_star, spread, cycle)


def real_gcd(values, tol):
    """Generator of the group spanned by ``values`` up to tolerance ``tol``.

    Iterated Euclid with symmetric remainders; values within tol of zero are
    ignored.  Returns 0.0 when no value exceeds tol.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    g = 0.0
    for v in values:
        v = abs(float(v))
        if v <= tol:
            continue
        if g == 0.0:
            g = v
            continue
        a, b = max(g, v), min(g, v)
        while b > tol:
            a, b = b, abs(a - b * round(a / b))
        g = a
    return g


@dataclass
class LatticeReport:
    """Outcome of periodic-orbit span detection.

    kind is one of {"lattice", "non-lattice", "inconclusive"}.  For lattice
    potentials whose table values already sit on span*Z the canonical pair
    zeta = xi, psi = 0 is filled in; otherwise the transfer function must be
    supplied by the caller.
    """

    kind: str
    span: float | None = None
    zeta: LocallyConstantPotential | None = None
    psi: LocallyConstantPotential | None = None
    details: dict = field(default_factory=dict)


def detect_lattice(xi, shift=None, max_cycle_len=None, tol=1e-9, max_cycles=20000):
    """Classify xi as lattice/non-lattice from simple-cycle Birkhoff sums.

    Simple cycles generate all closed-walk sums over the nonnegative
    integers, so their real gcd is the candidate span.  The verdict is
    certified only relative to max_cycle_len, max_cycles and tol.
    """
    shift = shift or xi.shift
    graph = _orbit_graph(xi, shift)
    if max_cycle_len is None:
        max_cycle_len = graph.n_nodes
    cycles, truncated = _enumerate_cycles_indexed(graph, max_cycle_len, max_cycles)
    words = graph.cyl.words
    d = xi.depth
    sums = []
    for c in cycles:
        total = 0.0
        for i, v in enumerate(c):
            w = words[v] + (words[c[(i + 1) % len(c)]][-1],)
            total += xi.values[w[:d]]
        sums.append(total)
    details = {
        "cycles_inspected": len(cycles),
        "max_cycle_len": max_cycle_len,
        "truncated": truncated,
        "tol": tol,
    }
    if not sums or max(abs(s) for s in sums) <= tol:
        return LatticeReport("inconclusive", details={**details, "reason": "all sums ~ 0"})
    span = real_gcd(sums, tol)
    details["span_candidate"] = span
    if span < 1e3 * tol:
        return LatticeReport("non-lattice", details=details)
    if any(abs(s - span * round(s / span)) > tol for s in sums):
        return LatticeReport("inconclusive", details={**details, "reason": "sums off the grid"})
    report = LatticeReport("lattice", span=span, details=details)
    if all(abs(v - span * round(v / span)) <= tol for v in xi.values.values()):
        report.zeta = xi
        report.psi = LocallyConstantPotential.constant(shift, 0.0)
    return report


def geometric_potential(ratios):
    """Depth-1 potential -log(r_i) on the full shift over len(ratios) letters."""
    ratios = [float(r) for r in ratios]
    if len(ratios) < 2:
        raise InputError("need at least two contraction ratios")
    if any(not (0.0 < r < 1.0) for r in ratios):
        raise InputError(f"contraction ratios must lie in (0, 1), got {ratios}")
    shift = Subshift.full(len(ratios))
    return LocallyConstantPotential(
        shift, 1, {(i + 1,): -math.log(r) for i, r in enumerate(ratios)}
    )
