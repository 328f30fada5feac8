import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polquant.coeff_rings import (
    FourierMode,
    SchwartzProfile,
    TrigPoly,
    as_hbar_series,
    schwartz_eval,
    trig_combine,
    trig_derivative,
    trig_derivative_multi,
)

TWO_PI_I = 2j * math.pi


def e(qx, py, c=1.0):
    return TrigPoly.mode(qx, py, c)


@st.composite
def trig_polys(draw, n=1, max_terms=4):
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        qx = tuple(draw(st.integers(-2, 2)) for _ in range(n))
        py = tuple(draw(st.integers(-2, 2)) for _ in range(n))
        re = draw(st.floats(-3, 3, allow_nan=False))
        im = draw(st.floats(-3, 3, allow_nan=False))
        terms[FourierMode(qx, py)] = complex(re, im)
    return TrigPoly(n, terms)


# -- combine ----------------------------------------------------------------------


def test_single_mode_product():
    assert trig_combine(e((0,), (1,)), e((1,), (0,)), "mul") == e((1,), (1,))


def test_additive_identity():
    f = e((1,), (2,), 0.5) + e((0,), (-1,), 2j)
    assert trig_combine(f, TrigPoly.zero(1), "add") == f


def test_cosine_square():
    c = e((0,), (1,)) + e((0,), (-1,))
    sq = trig_combine(c, c, "mul")
    assert sq == e((0,), (2,)) + TrigPoly.const(1, 2.0) + e((0,), (-2,))


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        trig_combine(e((0,), (1,)), e((0, 0), (1, 0)), "add")


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        trig_combine(e((0,), (1,)), e((0,), (1,)), "div")


def test_small_coefficients_dropped():
    f = TrigPoly(1, {FourierMode((0,), (1,)): 1e-16, FourierMode((1,), (0,)): 1.0})
    assert len(f.terms) == 1


@settings(max_examples=60, deadline=None)
@given(trig_polys(), trig_polys(), trig_polys())
def test_product_commutative_associative(a, b, c):
    ab = trig_combine(a, b, "mul")
    assert ab.distance(trig_combine(b, a, "mul")) <= 1e-12 * max(1.0, ab.max_abs())
    lhs = trig_combine(ab, c, "mul")
    rhs = trig_combine(a, trig_combine(b, c, "mul"), "mul")
    assert lhs.distance(rhs) <= 1e-12 * max(1.0, lhs.max_abs())


@settings(max_examples=40, deadline=None)
@given(trig_polys(), trig_polys())
def test_product_support_is_minkowski_sum(a, b):
    prod = trig_combine(a, b, "mul")
    sums = {ma + mb for ma in a.terms for mb in b.terms}
    assert set(prod.terms) <= sums


# -- derivatives -----------------------------------------------------------------


def test_derivative_examples():
    assert trig_derivative(e((0,), (1,)), ("y", 0)) == e((0,), (1,), TWO_PI_I)
    assert trig_derivative(TrigPoly.const(1, 3.0), ("x", 0)) == TrigPoly.zero(1)
    assert trig_derivative(e((1,), (1,)), "x1") == e((1,), (1,), TWO_PI_I)


def test_derivative_axis_out_of_range():
    with pytest.raises(ValueError):
        trig_derivative(e((0,), (1,)), ("x", 1))


@settings(max_examples=40, deadline=None)
@given(trig_polys(n=2))
def test_mixed_partials_commute(f):
    axes = [("x", 0), ("x", 1), ("y", 0), ("y", 1)]
    for a in axes:
        for b in axes:
            ab = trig_derivative(trig_derivative(f, a), b)
            ba = trig_derivative(trig_derivative(f, b), a)
            # same factors, different float association
            assert set(ab.terms) == set(ba.terms)
            assert ab.distance(ba) <= 1e-14 * max(1.0, ab.max_abs())


def test_multi_derivative_matches_repeated():
    f = e((1, -2), (2, 1), 0.3 - 1j) + e((0, 1), (0, -1), 2.0)
    rep = trig_derivative(trig_derivative(trig_derivative(f, ("x", 1)), ("x", 1)), ("y", 0))
    assert trig_derivative_multi(f, (0, 2), (1, 0)).distance(rep) <= 1e-12 * rep.max_abs()


def test_evaluation():
    f = e((1,), (1,), 2.0)
    val = f((0.25,), (0.5,))
    assert abs(val - 2.0 * np.exp(TWO_PI_I * 0.75)) < 1e-14
    assert (e((0,), (1,)) + e((0,), (-1,))).depends_on_y()
    assert not e((3,), (0,)).depends_on_y()


def test_records_round_trip():
    f = e((1,), (-1,), 0.5 + 2j) + e((0,), (2,), -1.0)
    assert TrigPoly.from_records(f.to_records()) == f


def test_hbar_series_normalization():
    assert as_hbar_series(TrigPoly.zero(1)) == {}
    assert as_hbar_series(5.0, 1) == {0: TrigPoly.const(1, 5.0)}
    assert as_hbar_series({0: e((1,), (0,)), 2: TrigPoly.zero(1)}) == {0: e((1,), (0,))}


# -- Schwartz profiles ---------------------------------------------------------------


def test_gaussian_examples():
    g = SchwartzProfile.gaussian(1)
    assert schwartz_eval(g, [0.0]) == 1.0
    assert abs(schwartz_eval(g, [0.25]) - math.exp(-1 / 16)) < 1e-15
    assert schwartz_eval(g, [0.0], (1,)) == 0.0


def test_max_order_enforced():
    g = SchwartzProfile.gaussian(1)
    schwartz_eval(g, [0.1], (8,))
    with pytest.raises(ValueError):
        schwartz_eval(g, [0.1], (9,))


def test_invalid_alpha():
    with pytest.raises(ValueError):
        SchwartzProfile((0.0,), 0.0)


def profiles(n):
    rng = np.random.default_rng(11 + n)
    out = []
    for _ in range(4):
        poly = {tuple(int(v) for v in rng.integers(0, 3, n)): complex(rng.normal(), rng.normal()) for _ in range(3)}
        out.append(SchwartzProfile(tuple(rng.normal(size=n) * 0.5), float(rng.uniform(0.5, 2.0)), poly))
    return out


@pytest.mark.parametrize("n", [1, 2])
def test_derivatives_match_central_differences(n):
    rng = np.random.default_rng(5)
    h = 1e-4
    for prof in profiles(n):
        for _ in range(20):
            x = rng.normal(size=n) * 0.8
            for r in (1, 2):
                axis = int(rng.integers(0, n))
                orders = tuple(r if i == axis else 0 for i in range(n))
                lower = tuple((r - 1) if i == axis else 0 for i in range(n))
                step = np.eye(n)[axis] * h
                fd = (schwartz_eval(prof, x + step, lower) - schwartz_eval(prof, x - step, lower)) / (2 * h)
                exact = schwartz_eval(prof, x, orders)
                assert abs(fd - exact) <= 1e-5 * max(1.0, abs(exact))


def test_translation_identity_dyadic_exact():
    # dyadic centers and points keep x - (c + q) == (x - q) - c bit for bit
    prof = SchwartzProfile((0.25, -0.5), 1.5, {(0, 0): 1.0, (1, 2): 0.5 - 2j})
    q = (1.0, -2.0)
    moved = prof.translate(q)
    for x in ([0.375, 0.125], [1.25, -1.75], [-0.5, 0.875]):
        shifted = [a - b for a, b in zip(x, q)]
        for orders in ((0, 0), (1, 0), (1, 2)):
            assert schwartz_eval(moved, x, orders) == schwartz_eval(prof, shifted, orders)


def test_translation_identity_random():
    for prof in profiles(2):
        q = (1.0, -2.0)
        moved = prof.translate(q)
        for x in ([0.3, 0.1], [1.2, -1.7], [-0.4, 0.9]):
            shifted = [a - b for a, b in zip(x, q)]
            for orders in ((0, 0), (1, 0), (1, 2)):
                want = schwartz_eval(prof, shifted, orders)
                assert abs(schwartz_eval(moved, x, orders) - want) <= 1e-14 * max(1.0, abs(want))


def test_record_literal():
    rec = {"center": [0.5], "alpha": 2.0, "poly": [{"idx": [1], "re": 1.0, "im": -1.0}]}
    p = SchwartzProfile.from_record(rec)
    x = 0.9
    expect = (1 - 1j) * x * math.exp(-2.0 * (x - 0.5) ** 2)
    assert abs(schwartz_eval(p, [x]) - expect) < 1e-14
    with pytest.raises(ValueError):
        SchwartzProfile.from_record({"alpha": 1.0})


def test_eval_many_matches_pointwise():
    prof = profiles(2)[0]
    pts = np.random.default_rng(0).normal(size=(7, 2))
    vec = prof.eval_many(pts, (1, 1))
    for p, v in zip(pts, vec):
        assert abs(schwartz_eval(prof, p, (1, 1)) - v) <= 1e-13 * max(1.0, abs(v))
