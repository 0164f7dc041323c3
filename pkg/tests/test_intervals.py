import math

import gmpy2
import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evoapprox.certify import interval_eval, interval_eval_dual
from evoapprox.graphs import evaluate, identity_graph, parse
from evoapprox.intervals import (
    Interval,
    PossiblePole,
    float_down,
    float_up,
    ln2_interval,
    target_enclosure2,
    two_over_sqrt_pi_interval,
)

mpmath.mp.prec = 200


def mpfr_to_mp(x):
    m, e = x.as_mantissa_exp()
    return mpmath.mpf(int(m)) * mpmath.mpf(2) ** int(e)


def contains_mp(iv, v):
    """Exact membership test for an mpmath value."""
    return mpfr_to_mp(iv.lo) <= v <= mpfr_to_mp(iv.hi)


def width(iv):
    return mpfr_to_mp(iv.hi) - mpfr_to_mp(iv.lo)


def test_endpoint_validation():
    with pytest.raises(ValueError):
        Interval(2.0, 1.0)
    with pytest.raises(ValueError):
        Interval(float("nan"), 1.0)
    iv = Interval(1.5)
    assert iv.lo == iv.hi == 1.5


def test_directed_rounding_keeps_true_value_inside():
    third = Interval(1.0) / Interval(3.0)
    assert third.lo < third.hi  # 1/3 is not representable, so strictly widened
    assert contains_mp(third, mpmath.mpf(1) / 3)
    tenth = Interval(1.0) / Interval(10.0)
    assert contains_mp(tenth, mpmath.mpf(1) / 10)


def test_division_by_zero_straddling_interval_raises():
    with pytest.raises(PossiblePole):
        Interval(1.0) / Interval(-1.0, 2.0)
    with pytest.raises(PossiblePole):
        Interval(1.0) / Interval(0.0, 2.0)  # touching zero counts


def test_square_tighter_than_product_around_zero():
    iv = Interval(-0.5, 1.0)
    sq = iv.square()
    prod = iv * iv
    assert float(sq.lo) == 0.0
    assert float(prod.lo) == -0.5
    assert float(sq.hi) == float(prod.hi) == 1.0


def test_midpoint_stays_inside():
    iv = Interval(1.0, float(math.nextafter(1.0, 2.0)))
    mid = iv.midpoint()
    assert iv.lo <= mid <= iv.hi


def test_float_bracketing():
    ctx = gmpy2.context(precision=200)
    x = ctx.div(gmpy2.mpfr(1, 200), gmpy2.mpfr(3, 200))
    lo, hi = float_down(x), float_up(x)
    assert lo < hi
    assert lo <= x <= hi
    assert hi == math.nextafter(lo, 2.0)
    assert float_up(gmpy2.mpfr(0.5)) == float_down(gmpy2.mpfr(0.5)) == 0.5


def test_abs_enclosure():
    assert float(Interval(-3.0, -2.0).abs_enclosure().lo) == 2.0
    assert float(Interval(-3.0, 2.0).abs_enclosure().lo) == 0.0
    assert float(Interval(-3.0, 2.0).mag_upper()) == 3.0


@given(st.floats(-4, 4), st.floats(0, 0.5), st.floats(-4, 4), st.floats(0, 0.5),
       st.sampled_from(["add", "sub", "mul"]))
@settings(max_examples=200, deadline=None)
def test_arithmetic_inclusion_property(a, wa, b, wb, op):
    a2, b2 = a + wa, b + wb
    ia, ib = Interval(a, a2), Interval(b, b2)
    out = {"add": ia + ib, "sub": ia - ib, "mul": ia * ib}[op]
    # every pointwise combination lands inside; exact real arithmetic, since
    # the enclosure covers the real operation, not float64's rounding of it
    for xa in (a, min(a + wa / 2, a2), a2):
        for xb in (b, min(b + wb / 2, b2), b2):
            ma, mb = mpmath.mpf(xa), mpmath.mpf(xb)
            v = {"add": ma + mb, "sub": ma - mb, "mul": ma * mb}[op]
            assert contains_mp(out, v)


def test_constant_enclosures():
    assert contains_mp(ln2_interval(), mpmath.log(2))
    assert contains_mp(two_over_sqrt_pi_interval(), 2 / mpmath.sqrt(mpmath.pi))
    assert width(ln2_interval()) < 1e-40


@pytest.mark.parametrize("name,fn,dfn,d2fn", [
    ("exp2", lambda x: mpmath.power(2, x),
     lambda x: mpmath.log(2) * mpmath.power(2, x),
     lambda x: mpmath.log(2) ** 2 * mpmath.power(2, x)),
    ("log2", lambda x: mpmath.log(x, 2),
     lambda x: 1 / (x * mpmath.log(2)),
     lambda x: -1 / (x * x * mpmath.log(2))),
    ("erf", mpmath.erf,
     lambda x: 2 / mpmath.sqrt(mpmath.pi) * mpmath.exp(-x * x),
     lambda x: -4 * x / mpmath.sqrt(mpmath.pi) * mpmath.exp(-x * x)),
    ("airy_shifted", lambda x: 1 + mpmath.airyai(-7 * x),
     lambda x: -7 * mpmath.airyai(-7 * x, 1),
     lambda x: 49 * (-7 * x) * mpmath.airyai(-7 * x)),
])
def test_target_enclosures_contain_truth(name, fn, dfn, d2fn):
    boxes = {
        "exp2": [(0.0, 0.001), (0.4, 0.401), (0.97, 1.0)],
        "log2": [(1.0, 1.002), (1.5, 1.501), (1.99, 2.0)],
        "erf": [(2.0 ** -60, 0.01), (0.5, 0.502), (0.99, 1.0)],
        "airy_shifted": [(0.0, 0.002), (0.3, 0.301), (0.55, 0.551)],
    }[name]
    for lo, hi in boxes:
        val, slope, curve = target_enclosure2(name, Interval(lo, hi))
        for x in (lo, (lo + hi) / 2, hi):
            assert contains_mp(val, fn(mpmath.mpf(x))), (name, x)
            assert contains_mp(slope, dfn(mpmath.mpf(x))), (name, x)
            assert contains_mp(curve, d2fn(mpmath.mpf(x))), (name, x)
        # airy runs a 60-term series over the box, so dependency widens it
        cap = 1.0 if name == "airy_shifted" else 64 * (hi - lo) + mpmath.mpf("1e-30")
        assert width(val) < cap


def test_unknown_target_enclosure_rejected():
    with pytest.raises(ValueError):
        target_enclosure2("tan", Interval(0.1, 0.2))


def test_interval_eval_identity_and_constant_derivative():
    box = Interval(0.25, 0.75)
    out = interval_eval(identity_graph(), None, box)
    assert float(out.lo) == 0.25 and float(out.hi) == 0.75
    val, der = interval_eval_dual(parse("a = 1.5\nreturn a\n"), None, box)
    assert val.contains(1.5)
    assert float(der.lo) == float(der.hi) == 0.0


def test_interval_eval_matches_pointwise_samples():
    g = parse("a = x * x\n"
              "c = -0.25\n"
              "b = a + c\n"
              "d = 1.75\n"
              "e = b / d\n"
              "return e\n")
    box = Interval(0.1, 0.9)
    out = interval_eval(g, None, box)
    # the enclosure covers the exact real-valued program, so compare against
    # exact arithmetic rather than float64 evaluate()
    for x in (0.1, 0.3, 0.55, 0.9):
        v = (mpmath.mpf(x) ** 2 - mpmath.mpf(0.25)) / mpmath.mpf(1.75)
        assert contains_mp(out, v)


def test_interval_eval_dual_bounds_derivative():
    # d/dx (x*x) = 2x spans [0.2, 1.8] over the box
    g = parse("a = x * x\nreturn a\n")
    _, der = interval_eval_dual(g, None, Interval(0.1, 0.9))
    assert der.contains(0.2) and der.contains(1.8) and der.contains(1.0)
    assert not der.contains(2.5)


def test_interval_eval_reports_possible_pole():
    g = parse("c = -0.5\n"
              "a = x + c\n"
              "one = 1.0\n"
              "b = one / a\n"
              "return b\n")
    with pytest.raises(PossiblePole):
        interval_eval(g, None, Interval(0.25, 0.75))
    out = interval_eval(g, None, Interval(0.6, 0.75))
    assert out.contains(1.0 / (0.6 - 0.5)) and out.contains(1.0 / (0.75 - 0.5))


def test_log2_enclosure_rejects_nonpositive_box():
    with pytest.raises((PossiblePole, ValueError)):
        target_enclosure2("log2", Interval(-0.5, 0.5))
