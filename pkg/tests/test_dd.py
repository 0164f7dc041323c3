"""Double-double arithmetic checked against mpmath at 60+ digits.

The pair (hi, lo) must agree with an independently computed high-precision
value to ~2^-100 relative, far beyond what any error metric in the package
needs to resolve.
"""

import mpmath
import numpy as np
import pytest

from evoapprox import dd

mpmath.mp.prec = 220

REL_2_POW_100 = mpmath.mpf(2) ** -100


def _pair_value(hi, lo):
    return mpmath.mpf(float(hi)) + mpmath.mpf(float(lo))


def _rel_err(pair, exact):
    if exact == 0:
        return abs(pair)
    return abs((pair - exact) / exact)


def _random_pairs(rng, n):
    """Random dd numbers spanning many magnitudes, lo a genuine residual."""
    a = rng.uniform(-1, 1, n) * 10.0 ** rng.uniform(-6, 6, n)
    b = rng.uniform(-1, 1, n) * 10.0 ** rng.uniform(-6, 6, n)
    hi, lo = dd.two_sum(a, b)
    return hi, lo


def test_two_sum_is_exact():
    rng = np.random.default_rng(1)
    a = rng.uniform(-1, 1, 1000) * 10.0 ** rng.uniform(-8, 8, 1000)
    b = rng.uniform(-1, 1, 1000) * 10.0 ** rng.uniform(-8, 8, 1000)
    s, e = dd.two_sum(a, b)
    for i in range(1000):
        assert mpmath.mpf(s[i]) + mpmath.mpf(e[i]) == mpmath.mpf(a[i]) + mpmath.mpf(b[i])
        assert s[i] == a[i] + b[i]  # hi is the rounded sum


def test_two_prod_is_exact():
    rng = np.random.default_rng(2)
    a = rng.uniform(-1, 1, 1000) * 10.0 ** rng.uniform(-6, 6, 1000)
    b = rng.uniform(-1, 1, 1000) * 10.0 ** rng.uniform(-6, 6, 1000)
    p, e = dd.two_prod(a, b)
    for i in range(1000):
        assert mpmath.mpf(p[i]) + mpmath.mpf(e[i]) == mpmath.mpf(a[i]) * mpmath.mpf(b[i])


@pytest.mark.parametrize("op,mp_op", [
    (dd.dd_add, lambda x, y: x + y),
    (dd.dd_sub, lambda x, y: x - y),
    (dd.dd_mul, lambda x, y: x * y),
    (dd.dd_div, lambda x, y: x / y),
])
def test_dd_ops_track_high_precision(op, mp_op):
    rng = np.random.default_rng(hash(op.__name__) % 2**32)
    ah, al = _random_pairs(rng, 400)
    bh, bl = _random_pairs(rng, 400)
    rh, rl = op(ah, al, bh, bl)
    for i in range(400):
        x = _pair_value(ah[i], al[i])
        y = _pair_value(bh[i], bl[i])
        exact = mp_op(x, y)
        got = _pair_value(rh[i], rl[i])
        assert _rel_err(got, exact) <= REL_2_POW_100


def test_dd_mul_d_and_abs():
    rng = np.random.default_rng(9)
    ah, al = _random_pairs(rng, 200)
    b = rng.uniform(-3, 3, 200)
    rh, rl = dd.dd_mul_d(ah, al, b)
    for i in range(200):
        exact = _pair_value(ah[i], al[i]) * mpmath.mpf(b[i])
        assert _rel_err(_pair_value(rh[i], rl[i]), exact) <= REL_2_POW_100
    mh, ml = dd.dd_abs(ah, al)
    for i in range(200):
        assert _pair_value(mh[i], ml[i]) == abs(_pair_value(ah[i], al[i]))


def test_dd_exp2_against_mpmath():
    rng = np.random.default_rng(4)
    xs = rng.uniform(0.0, 1.0, 500)
    hi, lo = dd.dd_exp2(xs)
    worst = mpmath.mpf(0)
    for i in range(500):
        exact = mpmath.mpf(2) ** mpmath.mpf(xs[i])
        worst = max(worst, _rel_err(_pair_value(hi[i], lo[i]), exact))
    assert worst <= mpmath.mpf(2) ** -99


def test_dd_log2_against_mpmath():
    rng = np.random.default_rng(5)
    xs = rng.uniform(1.0, 2.0, 500)
    hi, lo = dd.dd_log2(xs)
    worst = mpmath.mpf(0)
    for i in range(500):
        exact = mpmath.log(mpmath.mpf(xs[i])) / mpmath.log(2)
        if exact == 0:
            continue
        worst = max(worst, _rel_err(_pair_value(hi[i], lo[i]), exact))
    assert worst <= mpmath.mpf(2) ** -99


def test_dd_exp2_endpoints_exact():
    hi, lo = dd.dd_exp2(np.array([0.0, 1.0]))
    assert hi[0] == 1.0 and lo[0] == 0.0
    assert hi[1] == 2.0 and lo[1] == 0.0


def test_round_to_float32_fixes_double_rounding():
    # values near the halfway point between adjacent binary32 numbers: a
    # binary64 intermediate rounding can tip them the wrong way, the dd pair
    # must not.  Residuals use realistic label magnitudes (~2^-50).
    base = np.float32(1.0)
    nxt = np.nextafter(base, np.float32(2.0))
    halfway = (float(base) + float(nxt)) / 2  # exact in binary64
    up = dd.dd_round_to_float32(np.array([halfway]), np.array([2.0 ** -50]))
    assert up[0] == nxt
    below = dd.dd_round_to_float32(np.array([halfway]), np.array([-(2.0 ** -50)]))
    assert below[0] == base
    # crossing downward over the lower halfway point of an interior value
    mid = np.float32(1.5)
    lower = np.nextafter(mid, np.float32(0.0))
    down = dd.dd_round_to_float32(np.array([1.5]), np.array([-(2.0 ** -24 + 2.0 ** -50)]))
    assert down[0] == lower
    # an exact tie stays on the round-to-even side
    tie = dd.dd_round_to_float32(np.array([halfway]), np.array([0.0]))
    assert tie[0] == base


def test_round_to_float32_matches_mpfr_on_random_pairs():
    import gmpy2

    rng = np.random.default_rng(6)
    hi = rng.uniform(0.5, 4.0, 300)
    lo = (rng.uniform(-1, 1, 300)) * np.spacing(hi) * 0.49
    got = dd.dd_round_to_float32(hi, lo)
    ctx = gmpy2.context(precision=24)
    for i in range(300):
        exact = gmpy2.mpfr(hi[i], 120) + gmpy2.mpfr(lo[i], 120)
        want = np.float32(float(ctx.add(exact, 0)))
        assert got[i] == want
