"""Classical approximation baselines emitted as program graphs.

Taylor, Padé, Chebyshev, three continued-fraction families, and a Remez
relative-error minimax, all generated with extended-precision coefficient
math (mpmath) and emitted in the same graph form evolved programs use, so
one evaluation/certification pipeline scores everything.

Polynomial families share one shape: a single shift u = x - center (one
subtraction) followed by a Horner chain (2M operations), so a degree-M
polynomial costs 2M+1 operations and op-count comparisons across families
are like for like.  M = 0 degenerates to a bare constant (0 operations).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import mpmath

from .graphs import ADD, COEFF, DIV, INPUT, MUL, SUB, ProgramGraph, Vertex, constant_graph, prune
from .targets import TargetFunction, get_target, grid

_FAMILIES = ("TaylorHorner", "Pade", "Chebyshev", "CFracEuler", "CFracGauss",
             "CFracMacon", "PolyMinimax", "RationalMinimaxImported")

_PREC = 150  # working significand bits for all coefficient math


class DegenerateOrderError(ValueError):
    """Padé system singular at the requested orders."""


class NumericalIntegrationError(ValueError):
    """Quadrature failed to stabilize."""


class PoleInDomainError(ValueError):
    """A truncation places a denominator zero inside the domain."""


class RemezConvergenceError(ValueError):
    def __init__(self, message: str, profile: list[float]):
        super().__init__(message)
        self.profile = profile  # last per-node relative errors


@dataclass(frozen=True)
class BaselineSpec:
    family: str
    order: int = 0
    center: float | None = None  # None = interval midpoint
    interval: tuple[float, float] | None = None  # None = target domain
    coeff_file: str | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {_FAMILIES}")
        if self.order < 0:
            raise ValueError("order must be >= 0")


class _Builder:
    """Incremental graph assembly; orders follow creation sequence."""

    def __init__(self):
        self.vertices = [Vertex(vid=0, kind=INPUT, args=(), order=0)]
        self.x = 0

    def coeff(self, value: float) -> int:
        vid = len(self.vertices)
        self.vertices.append(Vertex(vid=vid, kind=COEFF, args=(), value=float(value), order=vid))
        return vid

    def op(self, kind: str, a: int, b: int) -> int:
        vid = len(self.vertices)
        self.vertices.append(Vertex(vid=vid, kind=kind, args=(a, b), order=vid))
        return vid

    def build(self, output: int) -> ProgramGraph:
        return prune(ProgramGraph(vertices=tuple(self.vertices), output_id=output))


def _horner_into(b: _Builder, coeffs: list, u: int) -> int:
    """Emit sum coeffs[j] * u^j as Horner; returns the output vertex id."""
    acc = b.coeff(float(coeffs[-1]))
    for c in reversed(coeffs[:-1]):
        t = b.op(MUL, u, acc)
        acc = b.op(ADD, b.coeff(float(c)), t)
    return acc


def _polynomial_graph(coeffs: list, center: float) -> ProgramGraph:
    """Shift-then-Horner emission; degree 0 collapses to a constant."""
    if len(coeffs) == 1:
        return constant_graph(float(coeffs[0]))
    b = _Builder()
    u = b.op(SUB, b.x, b.coeff(center)) if center != 0.0 else b.x
    return b.build(_horner_into(b, coeffs, u))


def _rational_graph(num: list, den: list, center: float) -> ProgramGraph:
    if len(den) == 1 and float(den[0]) == 1.0:
        return _polynomial_graph(num, center)
    b = _Builder()
    needs_u = len(num) > 1 or len(den) > 1
    u = (b.op(SUB, b.x, b.coeff(center)) if center != 0.0 else b.x) if needs_u else b.x
    p = _horner_into(b, num, u) if len(num) > 1 else b.coeff(float(num[0]))
    q = _horner_into(b, den, u) if len(den) > 1 else b.coeff(float(den[0]))
    return b.build(b.op(DIV, p, q))


def _mp_oracle(target: TargetFunction):
    """Target as an mpmath callable (domain checks are the caller's job)."""
    if target.name == "exp2":
        return lambda x: mpmath.power(2, x)
    if target.name == "log2":
        return lambda x: mpmath.log(x) / mpmath.log(2)
    if target.name == "erf":
        return mpmath.erf
    k = mpmath.mpf(target.airy_scale)
    return lambda x: 1 + mpmath.airyai(-k * x)


def _default_center(target: TargetFunction, interval: tuple[float, float] | None) -> float:
    lo, hi = interval if interval is not None else target.domain
    return (lo + hi) / 2.0


def taylor_coefficients(target: TargetFunction, order: int, center: float) -> list:
    """Taylor coefficients c_j = f^(j)(center)/j! as mpmath values.

    Closed-form derivative families:
      exp2: (ln 2)^j 2^c
      log2: c0 = log2 c; j>=1: (-1)^(j-1) (j-1)! / (c^j ln 2)
      erf:  d^j erf = 2/sqrt(pi) * (-1)^(j-1) H_(j-1)(c) e^(-c^2), Hermite
            H_(n+1) = 2c H_n - 2n H_(n-1)
      airy: Ai'' = z Ai gives A_(n+2) = z0 A_n + n A_(n-1) at z0 = -k c,
            then d^j g = (-k)^j A_j
    """
    with mpmath.workprec(_PREC):
        c = mpmath.mpf(center)
        ln2 = mpmath.log(2)
        out = []
        if target.name == "exp2":
            base = mpmath.power(2, c)
            for j in range(order + 1):
                out.append(base * ln2**j / mpmath.factorial(j))
        elif target.name == "log2":
            out.append(mpmath.log(c) / ln2)
            for j in range(1, order + 1):
                out.append((-1) ** (j - 1) / (j * c**j * ln2))
        elif target.name == "erf":
            out.append(mpmath.erf(c))
            gauss = 2 / mpmath.sqrt(mpmath.pi) * mpmath.exp(-c * c)
            h_prev, h = mpmath.mpf(1), 2 * c  # H_0, H_1
            for j in range(1, order + 1):
                out.append((-1) ** (j - 1) * h_prev * gauss / mpmath.factorial(j))
                h_prev, h = h, 2 * c * h - 2 * j * h_prev
        else:
            k = mpmath.mpf(target.airy_scale)
            z0 = -k * c
            a = [mpmath.airyai(z0), mpmath.airyai(z0, 1)]
            while len(a) < order + 1:
                n = len(a) - 2
                a.append(z0 * a[n] + (n * a[n - 1] if n >= 1 else 0))
            out.append(1 + a[0])
            for j in range(1, order + 1):
                out.append((-k) ** j * a[j] / mpmath.factorial(j))
        return out


def taylor_horner(target: TargetFunction, order: int, center: float | None = None) -> ProgramGraph:
    """Order-M Taylor polynomial about center, shift + Horner form."""
    center = _default_center(target, None) if center is None else center
    return _polynomial_graph(taylor_coefficients(target, order, center), center)


def pade(target: TargetFunction, m: int, n: int, center: float | None = None) -> ProgramGraph:
    """[m/n] Padé approximant about center: matches the Taylor expansion
    through order m+n, emitted as Horner/Horner with a single division.
    """
    center = _default_center(target, None) if center is None else center
    with mpmath.workprec(_PREC):
        a = taylor_coefficients(target, m + n, center)

        def a_at(i: int):
            return a[i] if 0 <= i < len(a) else mpmath.mpf(0)

        if n == 0:
            bs = [mpmath.mpf(1)]
        else:
            mat = mpmath.matrix(n, n)
            rhs = mpmath.matrix(n, 1)
            for r in range(n):
                for i in range(1, n + 1):
                    mat[r, i - 1] = a_at(m + 1 + r - i)
                rhs[r] = -a_at(m + 1 + r)
            try:
                sol = mpmath.lu_solve(mat, rhs)
            except ZeroDivisionError as exc:
                raise DegenerateOrderError(
                    f"Padé ({m},{n}) system for {target.name} is singular") from exc
            bs = [mpmath.mpf(1)] + [sol[i] for i in range(n)]
        ps = [sum(bs[i] * a_at(k - i) for i in range(min(k, n) + 1)) for k in range(m + 1)]
    return _rational_graph(ps, bs, center)


def _chebyshev_to_power(cheb: list, half) -> list:
    """Series sum c_j T_j(t) rewritten in powers of u = half * t."""
    # T polynomial coefficients by the T_(n+1) = 2t T_n - T_(n-1) recurrence
    deg = len(cheb) - 1
    t_rows = [[mpmath.mpf(1)], [mpmath.mpf(0), mpmath.mpf(1)]]
    while len(t_rows) <= deg:
        prev, cur = t_rows[-2], t_rows[-1]
        nxt = [mpmath.mpf(0)] + [2 * v for v in cur]
        for i, v in enumerate(prev):
            nxt[i] -= v
        t_rows.append(nxt)
    power = [mpmath.mpf(0)] * (deg + 1)
    for j, cj in enumerate(cheb):
        for kk, tv in enumerate(t_rows[j]):
            power[kk] += cj * tv
    return [power[kk] / half**kk for kk in range(deg + 1)]


def chebyshev(target, order: int, interval: tuple[float, float] | None = None) -> ProgramGraph:
    """Degree-M Chebyshev series fit by Gauss-Chebyshev quadrature.

    Node count starts at max(4M, 32) and doubles until every coefficient is
    stable to 1e-15 relative; emitted as shift + Horner about the interval
    midpoint.  target may be a TargetFunction or a plain callable on mpf.
    """
    if isinstance(target, TargetFunction):
        fn = _mp_oracle(target)
        lo, hi = interval if interval is not None else target.domain
    else:
        fn = target
        if interval is None:
            raise ValueError("interval is required for a callable target")
        lo, hi = interval
    with mpmath.workprec(_PREC):
        mid = (mpmath.mpf(lo) + mpmath.mpf(hi)) / 2
        half = (mpmath.mpf(hi) - mpmath.mpf(lo)) / 2

        def coeffs_at(nn: int) -> list:
            theta = [mpmath.pi * (i + mpmath.mpf(1) / 2) / nn for i in range(nn)]
            ts = [mpmath.cos(th) for th in theta]
            fs = [fn(mid + half * t) for t in ts]
            cs = []
            for j in range(order + 1):
                s = sum(fs[i] * mpmath.cos(j * theta[i]) for i in range(nn))
                cs.append(s * (1 if j == 0 else 2) / nn)
            return cs

        n_nodes = max(4 * order, 32)
        prev = coeffs_at(n_nodes)
        for _ in range(12):
            n_nodes *= 2
            cur = coeffs_at(n_nodes)
            scale = max(abs(v) for v in cur) or mpmath.mpf(1)
            if max(abs(cur[j] - prev[j]) for j in range(order + 1)) <= mpmath.mpf("1e-15") * scale:
                power = _chebyshev_to_power(cur, half)
                return _polynomial_graph(power, float(mid))
            prev = cur
    raise NumericalIntegrationError(
        f"Chebyshev quadrature did not stabilize by {n_nodes} nodes")


# Continued-fraction families for e^z (z = x ln 2).  Formulas are the
# classical published expansions; tests validate them purely by convergence
# to the oracle, which is the only contract that matters here.
#
#   euler:  e^z = 1/(1 - r1/(1 + r1 - r2/(1 + r2 - ...)))   with r_i = z/i,
#           the series-to-fraction transform whose k-th convergent equals the
#           k-th Taylor partial sum.
#   gauss:  e^z = 1/(1 - z/(1 + z/(2 - z/(3 + z/(2 - z/(5 + z/(2 - ...)))))))
#           partial denominators 1, 2, 3, 2, 5, 2, 7, ... from the
#           hypergeometric ratio.
#   macon:  e^z = 1 + 2z/(2 - z + z^2/(6 + z^2/(10 + z^2/(14 + ...))))
#           the even contraction; denominators 4k+2.

_CF_KINDS = ("euler", "gauss", "macon")


def continued_fraction(kind: str, depth: int, target: TargetFunction | None = None) -> ProgramGraph:
    """Depth-k truncation of a classical continued fraction for 2^x."""
    kind = kind.lower()
    if kind not in _CF_KINDS:
        raise ValueError(f"kind must be one of {_CF_KINDS}, got {kind!r}")
    target = get_target("exp2") if target is None else target
    if target.name != "exp2":
        raise ValueError("continued-fraction baselines are defined for exp2 only")
    if depth == 0:
        return constant_graph(1.0)

    b = _Builder()
    one = b.coeff(1.0)
    z = b.op(MUL, b.x, b.coeff(0.6931471805599453))  # ln 2 rounded to binary64

    if kind == "euler":
        # innermost level first: D_k = 1 + r_k; then D_i = 1 + r_i - r_(i+1)/D_(i+1)
        rs = [b.op(MUL, z, b.coeff(1.0 / i)) if i > 1 else z for i in range(1, depth + 1)]
        acc = b.op(ADD, one, rs[-1])
        for i in range(depth - 1, 0, -1):
            q = b.op(DIV, rs[i], acc)
            acc = b.op(SUB, b.op(ADD, one, rs[i - 1]), q)
        out = b.op(DIV, one, b.op(SUB, one, b.op(DIV, rs[0], acc)))
    elif kind == "gauss":
        def den(i: int) -> float:
            # partial denominators 1, 1, 2, 3, 2, 5, 2, 7, ... by level
            return 1.0 if i <= 1 else (2.0 if i % 2 == 0 else float(i))

        acc = one if den(depth) == 1.0 else b.coeff(den(depth))
        for i in range(depth - 1, 0, -1):
            q = b.op(DIV, z, acc)
            base = one if den(i) == 1.0 else b.coeff(den(i))
            acc = b.op(ADD if i % 2 == 1 else SUB, base, q)
        out = b.op(DIV, one, b.op(SUB, one, b.op(DIV, z, acc)))
    else:  # macon
        z2 = b.op(MUL, z, z)
        acc = b.coeff(float(4 * (depth - 1) + 2)) if depth > 1 else None
        for k in range(depth - 2, 0, -1):
            q = b.op(DIV, z2, acc)
            acc = b.op(ADD, b.coeff(float(4 * k + 2)), q)
        two_z = b.op(MUL, z, b.coeff(2.0))
        den0 = b.op(SUB, b.coeff(2.0), z)
        if acc is not None:
            den0 = b.op(ADD, den0, b.op(DIV, z2, acc))
        out = b.op(ADD, one, b.op(DIV, two_z, den0))

    graph = b.build(out)
    _check_no_pole(graph, target)
    return graph


def _check_no_pole(graph: ProgramGraph, target: TargetFunction) -> None:
    from .certify import ProofLimits, prove_well_defined

    result = prove_well_defined(graph, None, target.domain, ProofLimits(max_depth=24))
    if result.status != "Proven":
        raise PoleInDomainError(
            f"truncation has a possible denominator zero inside {target.domain}")


def remez_poly_minimax(target: TargetFunction, order: int,
                       interval: tuple[float, float] | None = None) -> ProgramGraph:
    """Degree-M minimax polynomial for relative error, by Remez exchange.

    Solves each iteration in the Chebyshev basis on the interval, exchanges
    toward the M+2 equioscillation extrema of (f - p)/f, and stops when the
    node error levels agree to 1e-3 relative.  Log2 uses the regularized
    domain [1 + 1e-6, 2] by default since relative error degenerates at the
    zero of f.
    """
    if interval is None:
        if target.name == "log2":
            interval = (1.0 + 1e-6, 2.0)
        else:
            glo = grid(target, 2)
            interval = (float(glo[0]), float(glo[1]))
    lo, hi = interval
    fn = _mp_oracle(target)
    # relative error needs f != 0 on the interval; regularize a zero endpoint
    # the same way the log2 default does
    if fn(mpmath.mpf(lo)) == 0:
        lo = lo + 1e-6 * (hi - lo)
    elif fn(mpmath.mpf(hi)) == 0:
        hi = hi - 1e-6 * (hi - lo)
    m2 = order + 2
    with mpmath.workprec(_PREC):
        mid = (mpmath.mpf(lo) + mpmath.mpf(hi)) / 2
        half = (mpmath.mpf(hi) - mpmath.mpf(lo)) / 2
        dense_n = max(2048, 64 * m2)
        dense = [mid + half * mpmath.cos(mpmath.pi * i / (dense_n - 1)) for i in range(dense_n)]
        dense.reverse()
        fvals = [fn(x) for x in dense]
        # initial nodes: Chebyshev extrema of the interval
        nodes = [int(round(i * (dense_n - 1) / (m2 - 1))) for i in range(m2)]

        def cheb_t(x):
            return (x - mid) / half

        cheb_coeffs = None
        profile: list[float] = []
        for _ in range(100):
            mat = mpmath.matrix(m2, m2)
            rhs = mpmath.matrix(m2, 1)
            for r, ni in enumerate(nodes):
                x = dense[ni]
                t = cheb_t(x)
                tprev, tcur = mpmath.mpf(1), t
                for j in range(order + 1):
                    mat[r, j] = tprev
                    tprev, tcur = tcur, 2 * t * tcur - tprev
                mat[r, order + 1] = (-1) ** r * fvals[ni]
                rhs[r] = fvals[ni]
            sol = mpmath.lu_solve(mat, rhs)
            cheb_coeffs = [sol[j] for j in range(order + 1)]

            def p_at(i: int):
                t = cheb_t(dense[i])
                tprev, tcur = mpmath.mpf(1), t
                acc = mpmath.mpf(0)
                for j in range(order + 1):
                    acc += cheb_coeffs[j] * tprev
                    tprev, tcur = tcur, 2 * t * tcur - tprev
                return acc

            errs = [(fvals[i] - p_at(i)) / fvals[i] for i in range(dense_n)]
            # local extrema of the signed error, endpoints included
            ext = [i for i in range(dense_n)
                   if (i == 0 or abs(errs[i]) >= abs(errs[i - 1]))
                   and (i == dense_n - 1 or abs(errs[i]) > abs(errs[i + 1]))]
            # compress runs with equal sign, keeping the largest magnitude
            alt: list[int] = []
            for i in ext:
                if alt and mpmath.sign(errs[i]) == mpmath.sign(errs[alt[-1]]):
                    if abs(errs[i]) > abs(errs[alt[-1]]):
                        alt[-1] = i
                else:
                    alt.append(i)
            while len(alt) > m2:
                # drop the weaker of the two ends, the standard trim
                if abs(errs[alt[0]]) <= abs(errs[alt[-1]]):
                    alt.pop(0)
                else:
                    alt.pop()
            if len(alt) == m2:
                nodes = alt
            node_abs = [abs(errs[i]) for i in nodes]
            profile = [float(v) for v in node_abs]
            hi_e, lo_e = max(node_abs), min(node_abs)
            if hi_e > 0 and (hi_e - lo_e) / hi_e <= mpmath.mpf("1e-3"):
                power = _chebyshev_to_power(cheb_coeffs, half)
                return _polynomial_graph(power, float(mid))
        raise RemezConvergenceError(
            f"Remez exchange did not level in 100 iterations for {target.name} M={order}",
            profile)


def import_rational_minimax(coeff_file: str) -> ProgramGraph:
    """Load externally optimized rational coefficients from a JSON file:
    {"center": c, "numerator": [...], "denominator": [...]}; numbers may be
    plain or hex-float strings.
    """
    def num(v):
        if isinstance(v, str):
            return float.fromhex(v) if "0x" in v.lower() else float(v)
        return float(v)

    try:
        with open(coeff_file) as fh:
            data = json.load(fh)
        center = num(data.get("center", 0.0))
        numerator = [num(v) for v in data["numerator"]]
        denominator = [num(v) for v in data["denominator"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed rational coefficient file {coeff_file!r}: {exc}") from exc
    if not numerator or not denominator:
        raise ValueError(f"coefficient file {coeff_file!r} has empty polynomials")
    return _rational_graph(numerator, denominator, center)


def build_baseline(target: TargetFunction, spec: BaselineSpec) -> ProgramGraph:
    """Dispatch a BaselineSpec to its generator."""
    if spec.family == "TaylorHorner":
        return taylor_horner(target, spec.order, spec.center)
    if spec.family == "Pade":
        return pade(target, spec.order, spec.order, spec.center)
    if spec.family == "Chebyshev":
        return chebyshev(target, spec.order, spec.interval)
    if spec.family == "CFracEuler":
        return continued_fraction("euler", spec.order, target)
    if spec.family == "CFracGauss":
        return continued_fraction("gauss", spec.order, target)
    if spec.family == "CFracMacon":
        return continued_fraction("macon", spec.order, target)
    if spec.family == "PolyMinimax":
        return remez_poly_minimax(target, spec.order, spec.interval)
    if spec.coeff_file is None:
        raise ValueError("RationalMinimaxImported needs coeff_file")
    return import_rational_minimax(spec.coeff_file)
