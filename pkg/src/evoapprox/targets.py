"""Target functions: domains, extended-precision oracles, range reduction.

Four targets are supported:

  exp2          g(x) = 2^x            on (0, 1]
  log2          g(x) = log2(x)        on [1, 2)
  erf           g(x) = erf(x)         on [0, 2]
  airy_shifted  g(x) = 1 + Ai(-k x)   on [0, 1], k = 7

Scalar oracles return gmpy2.mpfr values at a configurable precision
(default 120 bits, contract is >= 70).  Bulk labelling uses vectorized
double-double arithmetic for exp2/log2 and per-point mpfr for erf/airy.
The Airy oracle is an in-house Maclaurin series with a ratio-bounded
truncation tail; the mpfr library function serves as an independent
cross-check in the tests, not as the oracle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator

import gmpy2
import numpy as np

from . import dd
from .graphs import ArithmeticMode


class DomainError(ValueError):
    """Input outside the target's approximation domain."""


@dataclass(frozen=True)
class TargetFunction:
    name: str
    domain: tuple[float, float]
    closed: tuple[bool, bool]  # whether each endpoint belongs to the domain
    airy_scale: float = 7.0

    def contains(self, x: float) -> bool:
        lo, hi = self.domain
        if not (lo <= x <= hi):
            return False
        if x == lo and not self.closed[0]:
            return False
        if x == hi and not self.closed[1]:
            return False
        return True


EXP2 = TargetFunction("exp2", (0.0, 1.0), (False, True))
LOG2 = TargetFunction("log2", (1.0, 2.0), (True, False))
ERF = TargetFunction("erf", (0.0, 2.0), (True, True))
AIRY = TargetFunction("airy_shifted", (0.0, 1.0), (True, True))

_REGISTRY = {
    "exp2": EXP2,
    "log2": LOG2,
    "erf": ERF,
    "airy_shifted": AIRY,
    "airyshifted": AIRY,
    "airy": AIRY,
}


def get_target(name: str) -> TargetFunction:
    key = name.strip().lower().replace("-", "_")
    if key not in _REGISTRY:
        raise ValueError(f"unknown target {name!r}; expected one of exp2, log2, erf, airy_shifted")
    return _REGISTRY[key]


def oracle(target: TargetFunction, x: float, precision: int = 120, check_domain: bool = True):
    """Ground-truth g(x) as an mpfr with >= 70 correct significand bits.

    check_domain=False evaluates the underlying mathematical function
    outside the approximation domain (used by range-reduction identities).
    """
    if check_domain and not target.contains(x):
        raise DomainError(f"{x!r} outside domain of {target.name}")
    with gmpy2.context(precision=precision):
        mx = gmpy2.mpfr(x)
        if target.name == "exp2":
            return gmpy2.exp2(mx)
        if target.name == "log2":
            return gmpy2.log2(mx)
        if target.name == "erf":
            return gmpy2.erf(mx)
        return 1 + airy_ai_series(-target.airy_scale * mx, precision)


def airy_ai_series(z, precision: int = 120):
    """Ai(z) by its Maclaurin series, for z in [-7, 0].

    Ai(z) = Ai(0) f(z) + Ai'(0) g(z) with
      f(z) = sum a_k,  a_0 = 1,      a_{k+1} = a_k z^3 / ((3k+2)(3k+3))
      g(z) = sum b_k,  b_0 = z,      b_{k+1} = b_k z^3 / ((3k+3)(3k+4))
    Terms grow until (3k+2)(3k+3) > |z|^3 (k ~ 5 at z = -7, peak ~ 1.3e4)
    and then decay superlinearly; once the step ratio falls below 1/2 the
    tail is bounded by twice the next term.  40 guard bits absorb both the
    tail and the ~15 bits of cancellation at the deep end.
    """
    work = precision + 40
    with gmpy2.context(precision=work):
        z = gmpy2.mpfr(z)
        z3 = z * z * z
        ai0 = 1 / (gmpy2.cbrt(gmpy2.mpfr(9)) * gmpy2.gamma(gmpy2.mpfr(2) / 3))
        aip0 = -1 / (gmpy2.cbrt(gmpy2.mpfr(3)) * gmpy2.gamma(gmpy2.mpfr(1) / 3))
        a = gmpy2.mpfr(1)
        b = z
        f = a
        g = b
        k = 0
        tol = gmpy2.exp2(gmpy2.mpfr(-(precision + 30)))
        while True:
            a = a * z3 / ((3 * k + 2) * (3 * k + 3))
            b = b * z3 / ((3 * k + 3) * (3 * k + 4))
            f += a
            g += b
            k += 1
            ratio = abs(z3) / ((3 * k + 2) * (3 * k + 3))
            if ratio < 0.5 and (abs(a) + abs(b)) < tol:
                break
            if k > 500:  # unreachable for |z| <= 7; guards misuse
                raise ValueError("Airy series failed to converge")
        result = ai0 * f + aip0 * g
    return gmpy2.mpfr(result, precision)


@dataclass(frozen=True)
class RangeReduction:
    eta: int
    xi: float
    overflow: bool
    underflow: bool


def range_reduce_exp2(x: float) -> RangeReduction:
    """Split x into integer part eta and fraction xi in [0, 1).

    2^x = 2^eta * 2^xi, so an approximator on the unit interval extends to
    the whole line via one exponent adjustment.  Both eta and xi are exact.
    Flags warn when 2^eta alone leaves binary32 range (eta >= 128 overflows;
    eta <= -150 underflows even the subnormals).
    """
    if not math.isfinite(x):
        raise ValueError(f"range reduction needs finite x, got {x!r}")
    eta = math.floor(x)
    xi = x - eta  # exact: both operands share the representable result
    return RangeReduction(eta=eta, xi=xi, overflow=eta >= 128, underflow=eta <= -150)


def reconstruct_exp2(eta: int, value: float, mode: ArithmeticMode = ArithmeticMode.REAL64):
    if mode is ArithmeticMode.FLOAT32:
        return np.ldexp(np.float32(value), eta)
    return np.ldexp(np.float64(value), eta)


def range_reduce_log2(x: float) -> tuple[int, float]:
    """log2(x) = e + log2(m) with m in [1, 2), via exponent extraction.

    Provided for completeness; the search itself works on the raw [1, 2)
    domain.
    """
    if not (math.isfinite(x) and x > 0):
        raise ValueError(f"log2 range reduction needs finite positive x, got {x!r}")
    m, e = math.frexp(x)  # m in [0.5, 1)
    return e - 1, m * 2.0


def _mode_eps(mode: ArithmeticMode) -> float:
    return float(np.finfo(np.float32 if mode is ArithmeticMode.FLOAT32 else np.float64).eps)


def _nudge_inward(endpoint: float, other: float, mode: ArithmeticMode) -> float:
    if endpoint == 0.0:
        return _mode_eps(mode)
    if mode is ArithmeticMode.FLOAT32:
        return float(np.nextafter(np.float32(endpoint), np.float32(other)))
    return float(np.nextafter(endpoint, other))


def grid(target: TargetFunction, count: int, mode: ArithmeticMode = ArithmeticMode.REAL64) -> np.ndarray:
    """Evenly spaced inputs over the domain.

    Endpoints are included when closed; an open endpoint is replaced by its
    inward neighbor in the mode's type (machine epsilon when the endpoint
    is zero), so e.g. exp2 with count=3 samples {eps, 0.5, 1} and log2 with
    count=2 samples {1, 2-ulp}.
    """
    if count < 2:
        raise ValueError("count must be >= 2")
    lo, hi = target.domain
    xs = np.linspace(lo, hi, count, dtype=np.float64)
    if mode is ArithmeticMode.FLOAT32:
        xs = xs.astype(np.float32).astype(np.float64)
    # spacing is over the closed hull; open endpoints are then replaced by
    # their inward neighbor, so interior points stay round (0.5, not 0.5+eps/2)
    if not target.closed[0]:
        xs = np.where(xs == lo, _nudge_inward(lo, hi, mode), xs)
    if not target.closed[1]:
        xs = np.where(xs == hi, _nudge_inward(hi, lo, mode), xs)
    return xs


def oracle_dd(target: TargetFunction, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels for an input array as double-double pairs (>= 100 bits)."""
    xs = np.asarray(xs, dtype=np.float64)
    if target.name == "exp2":
        return dd.dd_exp2(xs)
    if target.name == "log2":
        return dd.dd_log2(xs)
    hi = np.empty_like(xs)
    lo = np.empty_like(xs)
    for i, x in enumerate(xs):
        v = oracle(target, float(x), precision=150, check_domain=False)
        h = float(v)
        hi[i] = h
        lo[i] = float(v - gmpy2.mpfr(h, 150))
    return hi, lo


# Domain points where g is exactly zero.  Relative error is undefined there,
# so real-valued datasets nudge them inward; float32 datasets keep them (the
# ULP metric handles g = 0 through ulp(0) = 2^-149).
_EXACT_ZEROS = {"log2": 1.0, "erf": 0.0}


def make_dataset(target: TargetFunction, count: int, mode: ArithmeticMode = ArithmeticMode.REAL64,
                 role: str = "test"):
    """Build a labelled evenly spaced dataset (see evaluation.Dataset).

    In real mode, a grid point where g(x) = 0 exactly (log2 at 1, erf at 0)
    is replaced by its inward neighbor so the relative-error denominator
    never vanishes.
    """
    from .evaluation import Dataset

    xs = grid(target, count, mode)
    if mode is not ArithmeticMode.FLOAT32 and target.name in _EXACT_ZEROS:
        z = _EXACT_ZEROS[target.name]
        other = target.domain[1] if z == target.domain[0] else target.domain[0]
        xs = np.where(xs == z, _nudge_inward(z, other, mode), xs)
    hi, lo = oracle_dd(target, xs)
    return Dataset(target=target.name, role=role, mode=mode, xs=xs, label_hi=hi, label_lo=lo)


def export_dataset_csv(dataset, path: str) -> None:
    """Write a dataset as CSV with hex-float columns (bit-exact round trip)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "label_hi", "label_lo"])
        for x, h, l in zip(dataset.xs, dataset.label_hi, dataset.label_lo):
            w.writerow([float(x).hex(), float(h).hex(), float(l).hex()])


def _f32_bits(x: float) -> int:
    return int(np.float32(x).view(np.uint32))


def iter_exhaustive_float32(target: TargetFunction, chunk_size: int = 1 << 20) -> Iterator[np.ndarray]:
    """Every binary32 value in the domain, ascending, in float32 chunks.

    Positive binary32 values are monotone in their bit patterns, so the
    stream is an arange over patterns.  Negative-zero is not emitted
    separately (it is the same value as +0.0).  Domains here are subsets
    of [0, inf).
    """
    lo, hi = target.domain
    lo32 = np.float32(lo)
    hi32 = np.float32(hi)
    if not target.closed[0]:
        lo32 = np.nextafter(lo32, np.float32(np.inf))
    if not target.closed[1]:
        hi32 = np.nextafter(hi32, np.float32(-np.inf))
    start = _f32_bits(float(lo32))
    stop = _f32_bits(float(hi32)) + 1
    for a in range(start, stop, chunk_size):
        bits = np.arange(a, min(a + chunk_size, stop), dtype=np.uint32)
        yield bits.view(np.float32)


def exhaustive_float32_count(target: TargetFunction) -> int:
    lo, hi = target.domain
    lo32 = np.float32(lo)
    hi32 = np.float32(hi)
    if not target.closed[0]:
        lo32 = np.nextafter(lo32, np.float32(np.inf))
    if not target.closed[1]:
        hi32 = np.nextafter(hi32, np.float32(-np.inf))
    return _f32_bits(float(hi32)) - _f32_bits(float(lo32)) + 1
