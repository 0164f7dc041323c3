"""Directed-rounding interval arithmetic over MPFR endpoints.

Every operation here computes its lower endpoint rounding toward -inf and
its upper endpoint rounding toward +inf, so an Interval is always a rigorous
enclosure of the exact real result.  Endpoints carry 140 bits: binary64
inputs embed exactly, and the enclosure slack stays many orders of magnitude
below any error threshold we ever need to separate from.

Target functions get enclosures through MPFR's correctly rounded
transcendentals where available (exp2, log2, erf are all monotone on the
domains we use).  The shifted Airy target has no MPFR primitive, so its
value and derivative are enclosed with the defining power series plus an
explicit geometric tail bound.
"""

from __future__ import annotations

from functools import lru_cache

import gmpy2

PRECISION = 140

_DOWN = gmpy2.context(precision=PRECISION, round=gmpy2.RoundDown)
_UP = gmpy2.context(precision=PRECISION, round=gmpy2.RoundUp)
# 53-bit contexts only re-round finished endpoints for reporting.
_DOWN64 = gmpy2.context(precision=53, round=gmpy2.RoundDown)
_UP64 = gmpy2.context(precision=53, round=gmpy2.RoundUp)


def _neg(x):
    # bare -x and abs(x) re-round at the ambient 53-bit context; these
    # context calls are exact because operand and result precision match
    return _DOWN.minus(x)


def _abs(x):
    return _DOWN.abs(x)


class PossiblePole(ArithmeticError):
    """Division by an interval that contains zero.

    The quotient may be unbounded somewhere inside the operand box, so no
    finite enclosure exists at this width.  Callers either refine the box
    or report the program as not provably well defined.
    """


def _to_mpfr(value) -> gmpy2.mpfr:
    if isinstance(value, gmpy2.mpfr):
        return value
    if isinstance(value, (int, float)):
        # 140 bits hold any binary64 (and any int we use) exactly
        return gmpy2.mpfr(value, PRECISION)
    raise TypeError(f"cannot build interval endpoint from {type(value).__name__}")


class Interval:
    """Closed interval [lo, hi] with outward-rounded arithmetic."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = _to_mpfr(lo)
        hi = lo if hi is None else _to_mpfr(hi)
        if gmpy2.is_nan(lo) or gmpy2.is_nan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if lo > hi:
            raise ValueError(f"interval endpoints out of order: [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    def __repr__(self) -> str:
        return f"Interval({float(self.lo)!r}, {float(self.hi)!r})"

    # -- predicates ------------------------------------------------------

    @property
    def contains_zero(self) -> bool:
        return self.lo <= 0 <= self.hi

    def contains(self, x) -> bool:
        x = _to_mpfr(x)
        return self.lo <= x <= self.hi

    def is_finite(self) -> bool:
        return gmpy2.is_finite(self.lo) and gmpy2.is_finite(self.hi)

    # -- ring operations -------------------------------------------------

    def __neg__(self) -> "Interval":
        return Interval(_neg(self.hi), _neg(self.lo))

    def __add__(self, other) -> "Interval":
        other = as_interval(other)
        return Interval(_DOWN.add(self.lo, other.lo), _UP.add(self.hi, other.hi))

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        other = as_interval(other)
        return Interval(_DOWN.sub(self.lo, other.hi), _UP.sub(self.hi, other.lo))

    def __rsub__(self, other) -> "Interval":
        return as_interval(other) - self

    def __mul__(self, other) -> "Interval":
        other = as_interval(other)
        pairs = ((self.lo, other.lo), (self.lo, other.hi),
                 (self.hi, other.lo), (self.hi, other.hi))
        lo = min(_DOWN.mul(a, b) for a, b in pairs)
        hi = max(_UP.mul(a, b) for a, b in pairs)
        return Interval(lo, hi)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        other = as_interval(other)
        if other.contains_zero:
            raise PossiblePole(f"division by {other!r}")
        pairs = ((self.lo, other.lo), (self.lo, other.hi),
                 (self.hi, other.lo), (self.hi, other.hi))
        lo = min(_DOWN.div(a, b) for a, b in pairs)
        hi = max(_UP.div(a, b) for a, b in pairs)
        return Interval(lo, hi)

    def __rtruediv__(self, other) -> "Interval":
        return as_interval(other) / self

    def square(self) -> "Interval":
        """Enclosure of {x^2 : x in self}; tighter than self*self around 0."""
        lo_m, hi_m = _abs(self.lo), _abs(self.hi)
        hi = _UP.mul(max(lo_m, hi_m), max(lo_m, hi_m))
        if self.contains_zero:
            return Interval(gmpy2.mpfr(0, PRECISION), hi)
        small = min(lo_m, hi_m)
        return Interval(_DOWN.mul(small, small), hi)

    # -- geometry --------------------------------------------------------

    def midpoint(self) -> gmpy2.mpfr:
        # rounded-down sum halved exactly; stays inside [lo, hi]
        return _DOWN.div(_DOWN.add(self.lo, self.hi), 2)

    def width_upper(self) -> gmpy2.mpfr:
        return _UP.sub(self.hi, self.lo)

    def half_width_upper(self) -> gmpy2.mpfr:
        return _UP.div(_UP.sub(self.hi, self.lo), 2)

    def mag_upper(self) -> gmpy2.mpfr:
        """Upper bound of |x| over the interval."""
        return max(_abs(self.lo), _abs(self.hi))

    def abs_enclosure(self) -> "Interval":
        hi = self.mag_upper()
        lo = gmpy2.mpfr(0, PRECISION) if self.contains_zero else min(_abs(self.lo), _abs(self.hi))
        return Interval(lo, hi)


def as_interval(value) -> Interval:
    return value if isinstance(value, Interval) else Interval(value)


def float_up(x) -> float:
    """Smallest binary64 >= x (x an mpfr at any precision)."""
    return float(_UP64.add(x, 0))


def float_down(x) -> float:
    return float(_DOWN64.add(x, 0))


# -- constants ------------------------------------------------------------


@lru_cache(maxsize=None)
def ln2_interval() -> Interval:
    return Interval(_DOWN.const_log2(), _UP.const_log2())


@lru_cache(maxsize=None)
def two_over_sqrt_pi_interval() -> Interval:
    pi = Interval(_DOWN.const_pi(), _UP.const_pi())
    root = Interval(_DOWN.sqrt(pi.lo), _UP.sqrt(pi.hi))
    return Interval(2) / root


@lru_cache(maxsize=None)
def _airy_origin() -> tuple[Interval, Interval]:
    """(Ai(0), Ai'(0)) = (3^(-2/3)/gamma(2/3), -3^(-1/3)/gamma(1/3))."""
    third_lo = _DOWN.div(gmpy2.mpfr(1, PRECISION), 3)
    third_hi = _UP.div(gmpy2.mpfr(1, PRECISION), 3)
    third = Interval(third_lo, third_hi)
    two_thirds = Interval(_DOWN.div(gmpy2.mpfr(2, PRECISION), 3),
                          _UP.div(gmpy2.mpfr(2, PRECISION), 3))
    # gamma is decreasing on (0, 1.46), so endpoint order flips
    g13 = Interval(_DOWN.gamma(third.hi), _UP.gamma(third.lo))
    g23 = Interval(_DOWN.gamma(two_thirds.hi), _UP.gamma(two_thirds.lo))
    root9 = Interval(_DOWN.root(gmpy2.mpfr(9, PRECISION), 3),
                     _UP.root(gmpy2.mpfr(9, PRECISION), 3))
    root3 = Interval(_DOWN.root(gmpy2.mpfr(3, PRECISION), 3),
                     _UP.root(gmpy2.mpfr(3, PRECISION), 3))
    ai0 = Interval(1) / (root9 * g23)
    aip0 = -(Interval(1) / (root3 * g13))
    return ai0, aip0


# -- elementary enclosures -------------------------------------------------


def exp_interval(iv: Interval) -> Interval:
    return Interval(_DOWN.exp(iv.lo), _UP.exp(iv.hi))


def exp2_interval(iv: Interval) -> Interval:
    return Interval(_DOWN.exp2(iv.lo), _UP.exp2(iv.hi))


def log2_interval(iv: Interval) -> Interval:
    if iv.lo <= 0:
        raise PossiblePole(f"log2 of interval touching zero: {iv!r}")
    return Interval(_DOWN.log2(iv.lo), _UP.log2(iv.hi))


def erf_interval(iv: Interval) -> Interval:
    return Interval(_DOWN.erf(iv.lo), _UP.erf(iv.hi))


_AIRY_TERMS = 60


def airy_pair_interval(z: Interval) -> tuple[Interval, Interval]:
    """Rigorous (Ai(z), Ai'(z)) enclosures from the defining power series.

    Ai = Ai(0)*F + Ai'(0)*G with F'' = zF, G'' = zG, F(0)=G'(0)=1.
    Terms are summed in interval arithmetic; the discarded tail of each of
    the four sums is bounded by a geometric series once the term ratio
    |z|^3/((3k)(3k-1)) drops below 1, and added as a symmetric interval.
    Converges for any z; sized for |z| up to a few tens.
    """
    zmag = z.mag_upper()
    if not gmpy2.is_finite(zmag):
        raise ValueError("airy enclosure needs a finite interval")
    z2 = z.square()
    z3 = z2 * z
    zero = Interval(0)

    f_term, f_sum = Interval(1), Interval(1)
    fd_sum = zero                      # F' = sum of c_k*3k*z^(3k-1)
    g_term, g_sum = z, z
    gd_term, gd_sum = Interval(1), Interval(1)   # G' terms c'_k*(3k+1)*z^(3k)
    for k in range(1, _AIRY_TERMS + 1):
        fd_term = f_term * z2 / Interval(3 * k - 1)
        f_term = f_term * z3 / Interval((3 * k) * (3 * k - 1))
        gd_term = g_term * z2 / Interval(3 * k)
        g_term = g_term * z3 / Interval((3 * k + 1) * (3 * k))
        f_sum = f_sum + f_term
        fd_sum = fd_sum + fd_term
        g_sum = g_sum + g_term
        gd_sum = gd_sum + gd_term

    # ratio bound valid for all four series from term K onward
    k = _AIRY_TERMS
    q = _UP.div(_UP.mul(zmag, _UP.mul(zmag, zmag)), (3 * k) * (3 * k + 1))
    if not q < 1:
        raise ValueError(f"airy series truncated too early for |z| <= {float(zmag)}")
    geo = _UP.div(q, _DOWN.sub(gmpy2.mpfr(1, PRECISION), q))

    def with_tail(sum_iv: Interval, last: Interval) -> Interval:
        tau = _UP.mul(last.mag_upper(), geo)
        return sum_iv + Interval(_neg(tau), tau)

    ai0, aip0 = _airy_origin()
    ai = ai0 * with_tail(f_sum, f_term) + aip0 * with_tail(g_sum, g_term)
    aip = ai0 * with_tail(fd_sum, fd_term) + aip0 * with_tail(gd_sum, gd_term)
    return ai, aip


# -- target value and slope ------------------------------------------------


def target_enclosure(name: str, iv: Interval) -> tuple[Interval, Interval]:
    """(g(iv), g'(iv)) enclosures for a named target over an x interval."""
    val, slope, _ = target_enclosure2(name, iv)
    return val, slope


def target_enclosure2(name: str, iv: Interval) -> tuple[Interval, Interval, Interval]:
    """(g, g', g'') enclosures for a named target over an x interval."""
    if name == "exp2":
        val = exp2_interval(iv)
        ln2 = ln2_interval()
        return val, ln2 * val, ln2 * ln2 * val
    if name == "log2":
        val = log2_interval(iv)
        slope = Interval(1) / (iv * ln2_interval())
        return val, slope, -(slope / iv)
    if name == "erf":
        val = erf_interval(iv)
        gauss = two_over_sqrt_pi_interval() * exp_interval(-iv.square())
        return val, gauss, Interval(-2) * iv * gauss
    if name == "airy_shifted":
        z = iv * Interval(-7)
        ai, aip = airy_pair_interval(z)
        # Ai'' = z*Ai by the defining equation, so g'' = 49*z*Ai(z)
        return Interval(1) + ai, Interval(-7) * aip, Interval(49) * z * ai
    raise ValueError(f"unknown target {name!r}")
