"""Certified relative-error bounds through adaptive interval bisection.

Empirical grid maxima say nothing about what happens between grid points.
This module proves statements of the form

    |f(x)/g(x) - 1| <= epsilon   for every real x in [lo, hi]

where f is a program graph evaluated in exact real arithmetic and g is the
target function.  The domain is split recursively; a subinterval B with
midpoint m is accepted once

    eta(B) = |r(m)| + sup_B |r'| * width(B)/2  <=  epsilon

with every quantity an outward-rounded interval bound, so an accepted leaf
is a theorem about all reals in it, not a sample.  r' comes from a forward
dual-number pass over the graph in interval arithmetic.

A successful proof can be exported as a certificate: the exact leaf
partition plus per-leaf bounds.  Checking a certificate re-derives each
leaf's bound from scratch and verifies the leaves tile the domain exactly,
so the checker shares no state with the prover beyond this module's
arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import gmpy2

from .graphs import (
    ADD,
    COEFF,
    DIV,
    INPUT,
    MUL,
    SUB,
    ProgramGraph,
    parse,
    program_hash,
    serialize,
)
from .intervals import (
    PRECISION,
    Interval,
    PossiblePole,
    airy_pair_interval,
    erf_interval,
    exp2_interval,
    exp_interval,
    float_up,
    ln2_interval,
    log2_interval,
    two_over_sqrt_pi_interval,
)
from .targets import TargetFunction, get_target

__all__ = [
    "ProofLimits",
    "ProofResult",
    "CertificateError",
    "interval_eval",
    "interval_eval_dual",
    "local_error_bound",
    "prove_bound",
    "prove_well_defined",
    "to_certificate",
    "write_certificate",
    "check_certificate",
]


@dataclass(frozen=True)
class ProofLimits:
    max_depth: int = 96
    max_leaves: int = 10_000_000

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_leaves < 1:
            raise ValueError("max_leaves must be >= 1")


@dataclass
class ProofResult:
    status: str                      # 'Proven' or 'Failed'
    epsilon: float | None
    target: str
    domain: tuple[float, float]
    subintervals: int
    max_depth_reached: int
    witness: dict | None = None      # on failure: x, eta (if any), reason
    leaves: list = field(default_factory=list)   # (lo, hi, eta) mpfr endpoints

    @property
    def proven(self) -> bool:
        return self.status == "Proven"


class CertificateError(ValueError):
    pass


def _coeff_map(graph: ProgramGraph, coeffs) -> dict[int, float]:
    free = graph.free_coefficients
    if coeffs is None:
        coeffs = ()
    if len(coeffs) != len(free):
        raise ValueError(f"graph has {len(free)} free coefficients, got {len(coeffs)}")
    values = dict(zip(free, coeffs))
    for v in graph.vertices:
        if v.kind == COEFF and v.value is not None:
            values[v.vid] = v.value
    return values


def interval_eval(graph: ProgramGraph, coeffs, box: Interval) -> Interval:
    """Enclosure of the exact real evaluation over every x in the box.

    Raises PossiblePole if any division's denominator enclosure contains
    zero; at that width the program is not provably defined everywhere.
    """
    values = _coeff_map(graph, coeffs)
    out: dict[int, Interval] = {}
    for vid in graph.total_order:
        v = graph.by_id[vid]
        if v.kind == INPUT:
            out[vid] = box
        elif v.kind == COEFF:
            out[vid] = Interval(values[vid])
        else:
            a, b = out[v.args[0]], out[v.args[1]]
            if v.kind == ADD:
                out[vid] = a + b
            elif v.kind == SUB:
                out[vid] = a - b
            elif v.kind == MUL:
                out[vid] = a * b
            elif v.kind == DIV:
                out[vid] = a / b
            else:
                raise ValueError(f"unknown vertex kind {v.kind!r}")
    return out[graph.output_id]


def interval_eval_dual(graph: ProgramGraph, coeffs, box: Interval) -> tuple[Interval, Interval]:
    """(value, derivative) enclosures over the box via forward dual numbers."""
    values = _coeff_map(graph, coeffs)
    one, zero = Interval(1), Interval(0)
    out: dict[int, tuple[Interval, Interval]] = {}
    for vid in graph.total_order:
        v = graph.by_id[vid]
        if v.kind == INPUT:
            out[vid] = (box, one)
        elif v.kind == COEFF:
            out[vid] = (Interval(values[vid]), zero)
        else:
            (a, da), (b, db) = out[v.args[0]], out[v.args[1]]
            if v.kind == ADD:
                out[vid] = (a + b, da + db)
            elif v.kind == SUB:
                out[vid] = (a - b, da - db)
            elif v.kind == MUL:
                out[vid] = (a * b, da * b + a * db)
            elif v.kind == DIV:
                q = a / b
                out[vid] = (q, (da - q * db) / b)
            else:
                raise ValueError(f"unknown vertex kind {v.kind!r}")
    return out[graph.output_id]


SERIES_ORDER = 8

_ZERO = Interval(0)
_ONE = Interval(1)


def _series_mul(a: list, b: list, n: int) -> list:
    out = [_ZERO] * n
    for i in range(n):
        ai = a[i]
        if ai is _ZERO:
            continue
        for j in range(n - i):
            bj = b[j]
            if bj is _ZERO:
                continue
            cur = out[i + j]
            out[i + j] = ai * bj if cur is _ZERO else cur + ai * bj
    return out


def _series_div(a: list, b: list, n: int) -> list:
    inv0 = _ONE / b[0]      # raises PossiblePole when b may vanish
    out = []
    for k in range(n):
        acc = a[k]
        for j in range(1, k + 1):
            if b[j] is _ZERO or out[k - j] is _ZERO:
                continue
            acc = acc - b[j] * out[k - j]
        out.append(acc * inv0)
    return out


def taylor_series(graph: ProgramGraph, coeffs, center: Interval, order: int) -> list:
    """Interval Taylor coefficients of the program around a center.

    With a point center the coefficients are tight; with a box center the
    k-th entry encloses f^(k)(t)/k! for every t in the box, which is what
    the Lagrange remainder needs.
    """
    values = _coeff_map(graph, coeffs)
    n = order + 1
    out: dict[int, list] = {}
    for vid in graph.total_order:
        v = graph.by_id[vid]
        if v.kind == INPUT:
            out[vid] = [center, _ONE] + [_ZERO] * (n - 2)
        elif v.kind == COEFF:
            out[vid] = [Interval(values[vid])] + [_ZERO] * (n - 1)
        else:
            a, b = out[v.args[0]], out[v.args[1]]
            if v.kind == ADD:
                out[vid] = [a[k] + b[k] for k in range(n)]
            elif v.kind == SUB:
                out[vid] = [a[k] - b[k] for k in range(n)]
            elif v.kind == MUL:
                out[vid] = _series_mul(a, b, n)
            elif v.kind == DIV:
                out[vid] = _series_div(a, b, n)
            else:
                raise ValueError(f"unknown vertex kind {v.kind!r}")
    return out[graph.output_id]


def target_taylor(name: str, center: Interval, order: int) -> list:
    """Interval Taylor coefficients of the target function around a center."""
    n = order + 1
    if name == "exp2":
        ln2 = ln2_interval()
        coeffs = [exp2_interval(center)]
        for k in range(1, n):
            coeffs.append(coeffs[-1] * ln2 / Interval(k))
        return coeffs
    if name == "log2":
        inv_ln2 = _ONE / ln2_interval()
        coeffs = [log2_interval(center)]
        u = _ONE
        neg_p = -(_ONE / center)
        for k in range(1, n):
            u = u * neg_p
            coeffs.append(-(u * inv_ln2) / Interval(k))
        return coeffs
    if name == "erf":
        gauss = [exp_interval(-center.square())]
        for k in range(n - 1):
            prev = gauss[k - 1] if k >= 1 else _ZERO
            gauss.append(Interval(-2) * (center * gauss[k] + prev) / Interval(k + 1))
        coeffs = [erf_interval(center)]
        scale = two_over_sqrt_pi_interval()
        for k in range(1, n):
            coeffs.append(scale * gauss[k - 1] / Interval(k))
        return coeffs
    if name == "airy_shifted":
        z = center * Interval(-7)
        b0, b1 = airy_pair_interval(z)
        ai = [b0, b1]
        for k in range(n - 2):
            prev = ai[k - 1] if k >= 1 else _ZERO
            ai.append((z * ai[k] + prev) / Interval((k + 1) * (k + 2)))
        coeffs = []
        seven = Interval(-7)
        pw = _ONE
        for k in range(n):
            coeffs.append(ai[k] * pw)
            pw = pw * seven
        coeffs[0] = coeffs[0] + _ONE
        return coeffs
    raise ValueError(f"unknown target {name!r}")


def local_error_bound(graph: ProgramGraph, coeffs, target_name: str, box: Interval):
    """Upper bound of |f/g - 1| over the box from a degree-K Taylor model.

    The difference n = f - g is expanded around the midpoint: coefficients
    through order K come from tight point passes, and the Lagrange remainder
    uses the (K+1)-th coefficient enclosed over the whole box.  Then

        sup |n| <= sum_k |n_k| h^k + |n_{K+1}(box)| h^(K+1)

    and dividing by a lower bound of |g| gives the result.  Raises
    PossiblePole when f is not provably defined on the box or g may vanish.
    """
    k_max = SERIES_ORDER + 1
    m = Interval(box.midpoint())
    f_pt = taylor_series(graph, coeffs, m, k_max)
    g_pt = target_taylor(target_name, m, k_max)
    f_box = taylor_series(graph, coeffs, box, k_max)
    g_box = target_taylor(target_name, box, k_max)

    # |x - m| can exceed half the width when the midpoint rounds off-center
    h_lo = (m - Interval(box.lo)).hi
    h_hi = (Interval(box.hi) - m).hi
    h = Interval(max(h_lo, h_hi))

    acc = _ZERO
    h_pow = _ONE
    for k in range(k_max):
        nk = f_pt[k] - g_pt[k]
        acc = acc + Interval(nk.mag_upper()) * h_pow
        h_pow = h_pow * h
    remainder = f_box[k_max] - g_box[k_max]
    acc = acc + Interval(remainder.mag_upper()) * h_pow
    return (acc / g_box[0].abs_enclosure()).hi


def _as_target_name(target) -> str:
    if isinstance(target, TargetFunction):
        return target.name
    return get_target(target).name


def prove_bound(graph: ProgramGraph, coeffs, target, lo: float, hi: float,
                epsilon: float, limits: ProofLimits = ProofLimits()) -> ProofResult:
    """Prove sup over [lo, hi] of |f/g - 1| <= epsilon, or fail with a witness.

    Bisects until every leaf certifies, a leaf hits max_depth still too
    wide, or the leaf budget runs out.  Leaves come back in ascending
    order, tiling [lo, hi] exactly.
    """
    name = _as_target_name(target)
    if not (lo < hi):
        raise ValueError("domain must satisfy lo < hi")
    if not (epsilon > 0):
        raise ValueError("epsilon must be positive")
    eps = gmpy2.mpfr(epsilon, PRECISION)

    def fail(box: Interval, eta, reason: str, leaves, depth: int) -> ProofResult:
        witness = {"x": float(box.midpoint()), "reason": reason}
        if eta is not None:
            witness["eta"] = float_up(eta)
        return ProofResult("Failed", epsilon, name, (lo, hi),
                           len(leaves), depth, witness, [])

    leaves: list[tuple] = []
    stack = [(Interval(lo, hi), 0)]
    deepest = 0
    while stack:
        box, depth = stack.pop()
        deepest = max(deepest, depth)
        try:
            eta = local_error_bound(graph, coeffs, name, box)
            pole = False
        except PossiblePole:
            eta, pole = None, True
        if not pole and eta <= eps:
            leaves.append((box.lo, box.hi, float_up(eta)))
            continue
        if depth >= limits.max_depth:
            return fail(box, eta, "possible pole" if pole else "bound too large at max depth",
                        leaves, depth)
        if len(leaves) + len(stack) + 2 > limits.max_leaves:
            return fail(box, eta, "leaf budget exhausted", leaves, depth)
        m = box.midpoint()
        if not (box.lo < m < box.hi):
            return fail(box, eta, "interval too narrow to split", leaves, depth)
        stack.append((Interval(m, box.hi), depth + 1))
        stack.append((Interval(box.lo, m), depth + 1))
    return ProofResult("Proven", epsilon, name, (lo, hi), len(leaves), deepest,
                       None, leaves)


def prove_well_defined(graph: ProgramGraph, coeffs, domain: tuple[float, float],
                       limits: ProofLimits = ProofLimits()) -> ProofResult:
    """Prove every division denominator stays away from zero on the domain."""
    lo, hi = float(domain[0]), float(domain[1])
    name = "well-defined"
    leaves: list[tuple] = []
    stack = [(Interval(lo, hi), 0)]
    deepest = 0
    while stack:
        box, depth = stack.pop()
        deepest = max(deepest, depth)
        try:
            interval_eval(graph, coeffs, box)
        except PossiblePole:
            if depth >= limits.max_depth:
                witness = {"x": float(box.midpoint()), "reason": "possible pole"}
                return ProofResult("Failed", None, name, (lo, hi),
                                   len(leaves), depth, witness, [])
            if len(leaves) + len(stack) + 2 > limits.max_leaves:
                witness = {"x": float(box.midpoint()), "reason": "leaf budget exhausted"}
                return ProofResult("Failed", None, name, (lo, hi),
                                   len(leaves), depth, witness, [])
            m = box.midpoint()
            if not (box.lo < m < box.hi):
                witness = {"x": float(m), "reason": "interval too narrow to split"}
                return ProofResult("Failed", None, name, (lo, hi),
                                   len(leaves), depth, witness, [])
            stack.append((Interval(m, box.hi), depth + 1))
            stack.append((Interval(box.lo, m), depth + 1))
            continue
        leaves.append((box.lo, box.hi, 0.0))
    return ProofResult("Proven", None, name, (lo, hi), len(leaves), deepest, None, leaves)


# -- certificates ----------------------------------------------------------

_CERT_FORMAT = "program-error-certificate/1"


def _endpoint_to_json(x) -> list:
    m, e = x.as_mantissa_exp()
    return [hex(int(m)), int(e)]


def _endpoint_from_json(pair) -> gmpy2.mpfr:
    m, e = int(pair[0], 16), int(pair[1])
    with gmpy2.context(precision=PRECISION):
        value = gmpy2.mpfr(m) * gmpy2.mpfr(2) ** e
    return value


def to_certificate(result: ProofResult, graph: ProgramGraph, coeffs) -> dict:
    if not result.proven:
        raise CertificateError("only a Proven result can be exported")
    if result.epsilon is None:
        raise CertificateError("well-definedness proofs have no error certificate")
    return {
        "format": _CERT_FORMAT,
        "target": result.target,
        "domain": [result.domain[0].hex(), result.domain[1].hex()],
        "epsilon": result.epsilon.hex(),
        "program": serialize(graph),
        "coefficients": [float(c).hex() for c in (coeffs or ())],
        "program_hash": program_hash(graph, coeffs),
        "leaves": [[*_endpoint_to_json(lo), *_endpoint_to_json(hi), eta]
                   for lo, hi, eta in result.leaves],
    }


def write_certificate(path: str, result: ProofResult, graph: ProgramGraph, coeffs) -> None:
    with open(path, "w") as fh:
        json.dump(to_certificate(result, graph, coeffs), fh)
        fh.write("\n")


def check_certificate(cert: dict) -> ProofResult:
    """Re-verify a certificate from scratch.

    Confirms the leaf intervals tile the domain exactly and re-derives the
    per-leaf error bound for each; any discrepancy raises CertificateError.
    """
    if cert.get("format") != _CERT_FORMAT:
        raise CertificateError(f"unrecognized certificate format {cert.get('format')!r}")
    try:
        graph = parse(cert["program"])
        coeffs = tuple(float.fromhex(c) for c in cert["coefficients"])
        lo = float.fromhex(cert["domain"][0])
        hi = float.fromhex(cert["domain"][1])
        epsilon = float.fromhex(cert["epsilon"])
        raw_leaves = cert["leaves"]
    except (KeyError, ValueError, TypeError) as exc:
        raise CertificateError(f"malformed certificate: {exc}") from exc
    if program_hash(graph, coeffs) != cert.get("program_hash"):
        raise CertificateError("program hash does not match serialized program")
    if not raw_leaves:
        raise CertificateError("certificate has no leaves")

    name = _as_target_name(cert["target"])
    eps = gmpy2.mpfr(epsilon, PRECISION)
    cursor = gmpy2.mpfr(lo, PRECISION)
    deepest = 0
    for i, entry in enumerate(raw_leaves):
        leaf_lo = _endpoint_from_json(entry[0:2])
        leaf_hi = _endpoint_from_json(entry[2:4])
        if leaf_lo != cursor:
            raise CertificateError(f"leaf {i} does not start where the previous ended")
        if not leaf_lo < leaf_hi:
            raise CertificateError(f"leaf {i} is empty or inverted")
        eta = local_error_bound(graph, coeffs, name, Interval(leaf_lo, leaf_hi))
        if not eta <= eps:
            raise CertificateError(f"leaf {i} fails re-verification: eta={float_up(eta)}")
        cursor = leaf_hi
    if cursor != gmpy2.mpfr(hi, PRECISION):
        raise CertificateError("leaves do not cover the full domain")
    return ProofResult("Proven", epsilon, name, (lo, hi), len(raw_leaves), deepest)
