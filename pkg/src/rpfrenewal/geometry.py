"""Self-similar fractal application: Minkowski dimension from the Moran
equation, the tube-volume renewal series, and the average Minkowski content.

Only the self-similar specialization is implemented: the eigenfunction is
constant, the interarrival potential is depth 1 with values -log(r_i), and
the observable is a single tube-volume profile t -> volume of the
e^(-t)-neighborhood of the attractor inside the fundamental gap region.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .potential import LocallyConstantPotential, detect_lattice, geometric_potential
from .renewal import FFamily, RenewalProblem, eval_N
from .timefunc import TimeFunction

SQ3 = math.sqrt(3.0)

# breakpoint of the gasket tube-volume profile: below it the e^(-t)-
# neighborhood covers the whole middle triangle of area sqrt(3)/16
GASKET_BREAK = -math.log(SQ3 / 12.0)


def sierpinski_gamma_tube(t):
    """Tube volume inside the middle triangle of the unit Sierpinski gasket.

    Equals sqrt(3)/16 for t <= -log(sqrt(3)/12) and
    (3/2) e^(-t) - 3 sqrt(3) e^(-2t) beyond; continuous at the break.
    """
    t = np.asarray(t, dtype=np.float64)
    out = np.where(
        t > GASKET_BREAK,
        1.5 * np.exp(-t) - 3.0 * SQ3 * np.exp(-2.0 * t),
        SQ3 / 16.0,
    )
    return float(out) if out.ndim == 0 else out


def sierpinski_tube_function():
    """The gasket profile as a TimeFunction with certified tails."""
    return TimeFunction.from_pieces(
        breaks=[GASKET_BREAK],
        pieces=[
            [(SQ3 / 16.0, 0, 0.0)],
            [(1.5, 0, -1.0), (-3.0 * SQ3, 0, -2.0)],
        ],
        lower_exp=(SQ3 / 16.0, 0.0),
        upper_exp=(1.5, -1.0),
    )


def minkowski_dimension(ratios, tol=1e-13):
    """Root of the Moran equation sum r_i^D = 1, by monotone bisection.

    Independent of the transfer-operator route (which recovers the same D
    via the pressure equation); both are compared in the tests.
    """
    ratios = [float(r) for r in ratios]
    if len(ratios) < 2:
        raise InputError("need at least two contraction ratios")
    if any(not (0.0 < r < 1.0) for r in ratios):
        raise InputError("contraction ratios must lie in (0, 1)")

    def F(D):
        return sum(r ** D for r in ratios) - 1.0

    lo, hi = 0.0, 1.0
    while F(hi) > 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise InputError("Moran equation root out of range")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if F(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class SelfSimilarSystem:
    """Contraction ratios, ambient dimension, and a tube-volume profile."""

    ratios: tuple
    d: int
    gamma_tube: TimeFunction
    D: float = field(init=False)

    def __post_init__(self):
        self.ratios = tuple(float(r) for r in self.ratios)
        if self.d < 1:
            raise InputError("ambient dimension must be >= 1")
        self.D = minkowski_dimension(self.ratios)
        self._validate_gamma()
        self._problem = None

    @classmethod
    def gasket(cls):
        return cls((0.5, 0.5, 0.5), 2, sierpinski_tube_function())

    def _validate_gamma(self):
        delta = self.D - self.d
        g = self.gamma_tube
        pts = np.linspace(-5.0, 60.0, 257)
        if (g(pts) < -1e-12).any():
            raise InputError("tube-volume profile must be nonnegative")
        su, eu = g.support_upper(), g.exp_upper()
        if su is not None and math.isfinite(su):
            return
        if eu is not None and (eu[0] == 0.0 or eu[1] < delta):
            return
        raise InputError(
            "tube profile must vanish faster than e^(t (D - d)): declare a "
            f"support bound or an envelope with rate below {delta:.6g}"
        )

    def problem(self):
        """The embedded renewal problem behind the tube-volume series."""
        if self._problem is None:
            xi = geometric_potential(self.ratios)
            shift = xi.shift
            eta = xi * (-float(self.d))
            chi = LocallyConstantPotential.constant(shift, 1.0)
            fam = FFamily.shared(shift, self.gamma_tube)
            self._problem = RenewalProblem(shift, eta, xi, chi, fam, (1,))
        return self._problem

    def lattice_report(self):
        return detect_lattice(geometric_potential(self.ratios))


def tube_volume_series(system, t, tol=1e-10):
    """Renewal-series value of the tube volume of the fundamental domain.

    This is the e^(-t)-neighborhood volume inside the feasible open set up
    to the unmodeled o(e^(t (D-d))) boundary correction.
    """
    return eval_N(system.problem(), float(t), tol)


def average_minkowski_content(system):
    """The Cesaro-average Minkowski content of the self-similar set.

    Numerator: exact integral of e^(-T (D-d)) gamma(T); denominator:
    -sum log(r_i) r_i^D.  The same value is the plain Minkowski content in
    the non-lattice case.
    """
    delta = system.D - system.d
    numerator = system.gamma_tube.exp_weighted_integral(delta)
    denominator = sum(-math.log(r) * r ** system.D for r in system.ratios)
    return numerator / denominator
