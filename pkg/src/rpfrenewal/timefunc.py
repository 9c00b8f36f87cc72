"""Time-dependent observables f_y(t) with certified tail metadata.

Two representations share one interface: closed-form piecewise
exponential-polynomials (sum of c * t^p * e^(q t) on half-open intervals,
exact integration) and uniformly sampled grids with linear interpolation
(trapezoid integration, compact support).

Decay metadata is either a support bound (the function vanishes below/above
a threshold) or an exponential envelope |f(t)| <= C e^(rate t) valid on the
corresponding half-axis; declared envelopes are verified by sampling at
construction.  The renewal machinery relies on this metadata for certified
series truncation.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InputError

_SUP = "support"
_EXP = "exp"


class TimeFunction:
    def __init__(self, kind, *, breaks=None, pieces=None, xp=None, fp=None,
                 lower=None, upper=None):
        self.kind = kind
        if kind == "pexp":
            breaks = np.asarray(breaks if breaks is not None else [], dtype=np.float64)
            if breaks.size and not (np.diff(breaks) > 0).all():
                raise InputError("piece breakpoints must be strictly increasing")
            if pieces is None or len(pieces) != breaks.size + 1:
                raise InputError(
                    f"need {breaks.size + 1} pieces for {breaks.size} breakpoints"
                )
            norm = []
            for terms in pieces:
                cur = []
                for (c, p, q) in terms:
                    p = int(p)
                    if p < 0:
                        raise InputError("polynomial powers must be nonnegative integers")
                    cur.append((float(c), p, float(q)))
                norm.append(cur)
            self.breaks = breaks
            self.pieces = norm
            if lower is None and not norm[0]:
                lower = (_SUP, float(breaks[0]) if breaks.size else math.inf)
            if upper is None and not norm[-1]:
                upper = (_SUP, float(breaks[-1]) if breaks.size else -math.inf)
        elif kind == "grid":
            xp = np.asarray(xp, dtype=np.float64)
            fp = np.asarray(fp, dtype=np.float64)
            if xp.size < 2 or xp.size != fp.size:
                raise InputError("grid needs >= 2 samples with matching values")
            if not (np.diff(xp) > 0).all():
                raise InputError("grid abscissae must be strictly increasing")
            self.xp, self.fp = xp, fp
            lower = (_SUP, float(xp[0]))
            upper = (_SUP, float(xp[-1]))
        else:
            raise InputError(f"unknown time-function kind {kind!r}")
        self.lower = lower
        self.upper = upper
        self._packed = None
        self._validate_metadata()

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_pieces(cls, breaks, pieces, lower_exp=None, upper_exp=None):
        lower = (_EXP, float(lower_exp[0]), float(lower_exp[1])) if lower_exp else None
        upper = (_EXP, float(upper_exp[0]), float(upper_exp[1])) if upper_exp else None
        return cls("pexp", breaks=breaks, pieces=pieces, lower=lower, upper=upper)

    @classmethod
    def from_grid(cls, t0, dt, values):
        values = np.asarray(values, dtype=np.float64)
        if dt <= 0:
            raise InputError("grid spacing must be positive")
        xp = float(t0) + float(dt) * np.arange(values.size)
        return cls("grid", xp=xp, fp=values)

    @classmethod
    def zero(cls):
        return cls("pexp", breaks=[], pieces=[[]])

    @classmethod
    def step(cls, at=0.0):
        """Indicator of [at, infinity)."""
        return cls("pexp", breaks=[at], pieces=[[], [(1.0, 0, 0.0)]],
                   upper=(_EXP, 1.0, 0.0))

    @classmethod
    def box(cls, a, b):
        """Indicator of [a, b)."""
        return cls("pexp", breaks=[a, b], pieces=[[], [(1.0, 0, 0.0)], []])

    # -- evaluation ---------------------------------------------------------

    def _pack(self):
        if self._packed is None:
            if self.kind == "pexp":
                ptr = [0]
                coef, powr, rate = [], [], []
                for terms in self.pieces:
                    for (c, p, q) in terms:
                        coef.append(c)
                        powr.append(p)
                        rate.append(q)
                    ptr.append(len(coef))
                self._packed = (
                    self.breaks,
                    np.array(ptr, dtype=np.int64),
                    np.array(coef, dtype=np.float64),
                    np.array(powr, dtype=np.int64),
                    np.array(rate, dtype=np.float64),
                )
            else:
                self._packed = (self.xp, self.fp)
        return self._packed

    def __call__(self, t, use_abs=False):
        scalar = np.isscalar(t)
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if self.kind == "pexp":
            out = kernels.pexp_eval(*self._pack(), t, use_abs)
        else:
            out = kernels.grid_eval(*self._pack(), t, use_abs)
        return float(out[0]) if scalar else out

    def scaled(self, c):
        c = float(c)
        rescale = lambda tail: (  # noqa: E731
            (tail[0], tail[1]) if tail and tail[0] == _SUP
            else ((_EXP, abs(c) * tail[1], tail[2]) if tail else None)
        )
        if self.kind == "pexp":
            pieces = [[(c * a, p, q) for (a, p, q) in terms] for terms in self.pieces]
            return TimeFunction("pexp", breaks=self.breaks, pieces=pieces,
                                lower=rescale(self.lower), upper=rescale(self.upper))
        return TimeFunction("grid", xp=self.xp, fp=c * self.fp)

    def tilted(self, rho):
        """The function t -> e^(rho t) f(t); envelope rates shift by rho."""
        rho = float(rho)
        if rho == 0.0:
            return self
        shift_tail = lambda tail: (  # noqa: E731
            tail if tail is None or tail[0] == _SUP
            else (_EXP, tail[1], tail[2] + rho)
        )
        if self.kind == "pexp":
            pieces = [[(c, p, q + rho) for (c, p, q) in terms] for terms in self.pieces]
            return TimeFunction("pexp", breaks=self.breaks, pieces=pieces,
                                lower=shift_tail(self.lower), upper=shift_tail(self.upper))
        return TimeFunction("grid", xp=self.xp, fp=self.fp * np.exp(rho * self.xp))

    # -- metadata -----------------------------------------------------------

    def support_lower(self):
        """T such that f vanishes below T, or None."""
        if self.lower and self.lower[0] == _SUP:
            return self.lower[1]
        return None

    def exp_lower(self):
        """(C, rate) with |f(t)| <= C e^(rate t) for t <= 0, or None."""
        if self.lower and self.lower[0] == _EXP:
            return self.lower[1], self.lower[2]
        return None

    def support_upper(self):
        if self.upper and self.upper[0] == _SUP:
            return self.upper[1]
        return None

    def exp_upper(self):
        """(C, rate) with |f(t)| <= C e^(rate t) for t >= 0, or None."""
        if self.upper and self.upper[0] == _EXP:
            return self.upper[1], self.upper[2]
        return None

    def _sample_points(self, lo, hi, n=257):
        pts = [np.linspace(lo, hi, n)]
        if self.kind == "pexp" and self.breaks.size:
            inner = self.breaks[(self.breaks >= lo) & (self.breaks <= hi)]
            pts += [inner, inner + 1e-9, inner - 1e-9]
        return np.unique(np.concatenate(pts))

    def _validate_metadata(self):
        span = 1.0
        if self.kind == "pexp" and self.breaks.size:
            span += float(self.breaks[-1] - self.breaks[0]) + np.abs(self.breaks).max()
        if self.kind == "grid":
            span += float(self.xp[-1] - self.xp[0]) + np.abs(self.xp).max()
        for tail, side in ((self.lower, -1), (self.upper, +1)):
            if not tail:
                continue
            if tail[0] == _SUP:
                T = tail[1]
                if math.isinf(T):
                    continue
                pts = self._sample_points(*((T - 20 * span, T) if side < 0 else (T, T + 20 * span)))
                pts = pts[pts < T] if side < 0 else pts[pts > T]
                if pts.size and np.any(np.abs(self(pts)) > 0.0):
                    raise InputError("declared support bound violated by samples")
            else:
                _, C, rate = tail
                if C < 0:
                    raise InputError("envelope constant must be nonnegative")
                pts = self._sample_points(-20 * span, 0.0) if side < 0 else self._sample_points(0.0, 20 * span)
                envelope = C * np.exp(rate * pts) * (1 + 1e-9) + 1e-300
                if np.any(np.abs(self(pts)) > envelope):
                    raise InputError("declared exponential envelope violated by samples")

    # -- integration --------------------------------------------------------

    def exp_weighted_integral(self, rho):
        """Integral over the real line of e^(-rho t) f(t); exact for pieces.

        Raises InputError when a piece makes the integral divergent.
        """
        if self.kind == "grid":
            g = np.exp(-rho * self.xp) * self.fp
            return float(np.trapezoid(g, self.xp))
        bounds = np.concatenate(([-np.inf], self.breaks, [np.inf]))
        total = 0.0
        for i, terms in enumerate(self.pieces):
            a, b = bounds[i], bounds[i + 1]
            for (c, p, q) in terms:
                if c == 0.0:
                    continue
                total += c * _power_exp_integral(p, q - rho, a, b)
        if not math.isfinite(total):
            raise InputError("exponential-polynomial integral is not finite")
        return total


def _power_exp_integral(p, mu, a, b):
    """Exact integral of t^p e^(mu t) over [a, b), allowing infinite ends."""
    if a == b:
        return 0.0
    if math.isinf(a) and math.isinf(b):
        raise InputError("integral over the whole line of a nonzero term diverges")
    if math.isinf(b):
        if mu >= 0:
            raise InputError("divergent integral: nonnegative rate on an upper tail")
        acc = -math.exp(mu * a) / mu
        for k in range(1, p + 1):
            acc = -(a ** k) * math.exp(mu * a) / mu - (k / mu) * acc
        return acc
    if math.isinf(a):
        if mu <= 0:
            raise InputError("divergent integral: nonpositive rate on a lower tail")
        acc = math.exp(mu * b) / mu
        for k in range(1, p + 1):
            acc = (b ** k) * math.exp(mu * b) / mu - (k / mu) * acc
        return acc
    if abs(mu) * max(abs(a), abs(b), 1.0) < 1e-8:
        # near-degenerate rate: series in mu avoids cancellation
        acc = 0.0
        for k in range(0, 60):
            term = mu ** k / math.factorial(k) * (
                (b ** (p + k + 1) - a ** (p + k + 1)) / (p + k + 1)
            )
            acc += term
            if abs(term) <= 1e-18 * max(abs(acc), 1e-300):
                break
        return acc
    acc = (math.exp(mu * b) - math.exp(mu * a)) / mu
    for k in range(1, p + 1):
        acc = ((b ** k) * math.exp(mu * b) - (a ** k) * math.exp(mu * a)) / mu - (k / mu) * acc
    return acc


# ---------------------------------------------------------------------------
# direct Riemann integrability


@dataclass
class DriResult:
    rows: list  # (h, lower_sum, upper_sum)
    verdict: str
    gap_monotone: bool
    smallest_gap: float
    unbounded: bool


def _cell_bounds(funcs, delta, lo, hi, samples):
    """Sampled inf/sup of g = e^(-delta t) |f(t)| over [lo, hi) across funcs."""
    pts = [np.linspace(lo, hi - 1e-12 * (hi - lo), samples)]
    for f in funcs:
        if f.kind == "pexp" and f.breaks.size:
            inner = f.breaks[(f.breaks >= lo) & (f.breaks < hi)]
            pts += [inner, np.minimum(inner + 1e-12, hi - 1e-15)]
    pts = np.unique(np.concatenate(pts))
    weights = np.exp(-delta * pts)
    inf_v, sup_v = math.inf, -math.inf
    for f in funcs:
        g = weights * f(pts, use_abs=True)
        inf_v = min(inf_v, float(g.min()))
        sup_v = max(sup_v, float(g.max()))
    return inf_v, sup_v


def _dri_truncation(funcs, delta):
    """Cell range [t_lo, t_hi] outside which the upper sums are certified tiny.

    Returns (t_lo, t_hi, tail_bound, unbounded_flag).
    """
    t_lo, t_hi, tail = 0.0, 0.0, 0.0
    for f in funcs:
        sup_l, exp_l = f.support_lower(), f.exp_lower()
        sup_u, exp_u = f.support_upper(), f.exp_upper()
        if sup_l is not None:
            t_lo = min(t_lo, sup_l if math.isfinite(sup_l) else 0.0)
        elif exp_l is not None:
            C, rate = exp_l
            r = rate - delta
            if r <= 0 and C > 0:
                return None, None, None, True
            if C > 0:
                cut = min(0.0, (math.log(1e-15 / C) if C else 0.0) / r)
                t_lo = min(t_lo, cut)
                tail += C * math.exp(r * t_lo) / r
        else:
            return None, None, None, True
        if sup_u is not None:
            t_hi = max(t_hi, sup_u if math.isfinite(sup_u) else 0.0)
        elif exp_u is not None:
            C, rate = exp_u
            r = rate - delta
            if r >= 0 and C > 0:
                return None, None, None, True
            if C > 0:
                cut = max(0.0, math.log(1e-15 / C) / r)
                t_hi = max(t_hi, cut)
                tail += C * math.exp(r * t_hi) / (-r)
        else:
            return None, None, None, True
    return t_lo, t_hi, tail, False


def dri_check(f, delta, h_list, threshold=1e-2, samples_per_cell=64):
    """Lower/upper Riemann sums of e^(-delta t)|f(t)| on shrinking meshes.

    Verdict "dri-consistent" when the gaps decrease monotonically and the
    smallest falls below ``threshold``; unbounded tails are reported as a
    failure rather than raised.
    """
    return dri_check_family([f], delta, h_list, threshold, samples_per_cell)


def dri_check_family(funcs, delta, h_list, threshold=1e-2, samples_per_cell=64):
    h_list = [float(h) for h in h_list]
    if not h_list or any(h <= 0 for h in h_list):
        raise InputError("mesh sizes must be positive")
    if any(b > a for a, b in zip(h_list, h_list[1:])):
        raise InputError("mesh sizes must be non-increasing")
    t_lo, t_hi, tail, unbounded = _dri_truncation(funcs, delta)
    if unbounded:
        return DriResult(
            [(h, 0.0, math.inf) for h in h_list],
            "not-dri (unbounded upper sum)",
            False,
            math.inf,
            True,
        )
    rows = []
    for h in h_list:
        k_min = math.floor(t_lo / h) - 1
        k_max = math.ceil(t_hi / h) + 1
        lower = upper = 0.0
        for k in range(k_min, k_max + 1):
            inf_v, sup_v = _cell_bounds(funcs, delta, (k - 1) * h, k * h, samples_per_cell)
            lower += h * inf_v
            upper += h * sup_v
        rows.append((h, lower, upper + tail))
    gaps = [u - l for (_, l, u) in rows]
    monotone = all(g2 <= g1 + 1e-12 for g1, g2 in zip(gaps, gaps[1:]))
    smallest = min(gaps)
    verdict = (
        "dri-consistent" if monotone and smallest < threshold else "not-dri"
    )
    return DriResult(rows, verdict, monotone, smallest, False)


def _envelope_constant(f, rate, lo, hi):
    """Smallest C with |f(t)| <= C e^(rate t) on [lo, hi], by sampling."""
    if hi <= lo:
        return 0.0
    pts = f._sample_points(lo, hi)
    vals = f(pts, use_abs=True) * np.exp(-rate * pts)
    return float(vals.max()) * (1 + 1e-9)


def combine_tails(funcs):
    """Shared decay metadata of a family: weakest support or envelope bounds.

    Returns (lower, upper) in the TimeFunction tail format; None when the
    members do not share a boundable side.
    """
    lowers = [(f.support_lower(), f.exp_lower()) for f in funcs]
    uppers = [(f.support_upper(), f.exp_upper()) for f in funcs]
    if all(s is not None for s, _ in lowers):
        lower = (_SUP, min(s for s, _ in lowers))
    elif all((s is not None or e is not None) for s, e in lowers):
        exps = [e for _, e in lowers if e is not None]
        rate = min(r for _, r in exps)
        C = max(c for c, _ in exps)
        for f, (s, e) in zip(funcs, lowers):
            if e is None:
                # support-bounded member: sample its bulk below 0 for the constant
                C = max(C, _envelope_constant(f, rate, min(s, 0.0), 0.0))
        lower = (_EXP, C, rate)
    else:
        lower = None
    if all(s is not None for s, _ in uppers):
        upper = (_SUP, max(s for s, _ in uppers))
    elif all((s is not None or e is not None) for s, e in uppers):
        exps = [e for _, e in uppers if e is not None]
        rate = max(r for _, r in exps)
        C = max(c for c, _ in exps)
        for f, (s, e) in zip(funcs, uppers):
            if e is None:
                C = max(C, _envelope_constant(f, rate, 0.0, max(s, 0.0)))
        upper = (_EXP, C, rate)
    else:
        upper = None
    return lower, upper
