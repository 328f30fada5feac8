import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polquant import checks
from polquant.coeff_rings import FourierMode, SchwartzProfile, TrigPoly, schwartz_eval
from polquant.torus_toeplitz import (
    Grid,
    PolarizedState,
    SweepReport,
    SweepRow,
    TestSection,
    fiber_fourier,
    fiber_reassemble,
    fit_decay,
    gaussian_family,
    l1_norm,
    pair_sigma,
    pairing_linear,
    remainder_sweep,
    seminorm,
    toeplitz_pairing,
    toeplitz_term,
    toeplitz_term_via_action,
    wb_reduce,
)

GAUSS = SchwartzProfile.gaussian(1)


def e(qx, py, c=1.0):
    return TrigPoly.mode((qx,), (py,), c)


def gauss_section(k, prof=GAUSS):
    return TestSection.uniform(k, prof)


# -- fibre decomposition ------------------------------------------------------------


def test_fiber_fourier_examples():
    assert fiber_fourier(e(0, 1)) == {(1,): TrigPoly.const(1)}
    assert fiber_fourier(e(1, 1)) == {(1,): e(1, 0)}
    f = e(2, 0, 3.0) + e(-1, 0)
    assert fiber_fourier(f) == {(0,): f}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3),
                          st.floats(-2, 2, allow_nan=False)), max_size=6))
def test_reassembly_exact(raw):
    f = TrigPoly(2, {FourierMode((a, b), (c, d)): v for a, b, c, d, v in raw})
    assert fiber_reassemble(fiber_fourier(f), 2) == f


# -- Weil-Brezin bookkeeping ----------------------------------------------------------


def test_wb_reduce_examples():
    assert wb_reduce(5, 2) == ((1,), (2,))
    assert wb_reduce(0, 7) == ((0,), (0,))
    assert wb_reduce(-1, 4) == ((3,), (-1,))
    assert wb_reduce((5, -3), 3) == ((2, 0), (1, -1))
    with pytest.raises(ValueError):
        wb_reduce(1, 0)


def test_polarized_state_canonical_classes():
    s = PolarizedState(4, 1, {(5,): 1.0, (1,): 2.0, (-2,): 1j})
    assert s.coeffs == {(1,): 3.0, (2,): 1j}


def test_pair_sigma_examples():
    assert pair_sigma(2, 0, gauss_section(2)) == 1.0
    assert abs(pair_sigma(4, 1, gauss_section(4)) - math.exp(-1 / 16)) < 1e-15
    # tau_2 for k = 2 is tau_0(x - 1), at x = 1
    assert pair_sigma(2, 2, gauss_section(2)) == 1.0


def test_section_periodicity():
    prof = SchwartzProfile((0.25,), 1.5, {(1,): 1.0 - 0.5j})
    tau = TestSection(3, 1, {(0,): prof, (1,): GAUSS, (2,): GAUSS})
    for q in (-2, 1, 3):
        for x in (0.1, 0.7):
            assert tau.tilde((3 * q,), [x]) == schwartz_eval(prof, [x - q])


# -- Toeplitz pairing ----------------------------------------------------------------


def test_toeplitz_pairing_examples():
    assert abs(toeplitz_pairing(e(0, 1), 4, 0, gauss_section(4)) - math.exp(-1 / 16)) < 1e-15
    tau = gauss_section(5)
    for m in range(-3, 6):
        assert toeplitz_pairing(TrigPoly.const(1), 5, m, tau) == pair_sigma(5, m, tau)
    f = e(1, 0, 0.5) + e(-2, 0, 1j)
    for m in range(5):
        assert toeplitz_pairing(f, 5, m, tau) == pytest.approx(f((m / 5,), (0.0,)) * pair_sigma(5, m, tau), abs=1e-15)


def test_toeplitz_term_examples():
    k = 8
    tau = gauss_section(k, SchwartzProfile((0.3,), 1.2))
    f = e(1, 1, 0.5) + e(0, -1, 2.0)
    for m in range(k):
        r0 = sum(
            fp((m / k,), (0.0,)) * tau.tilde((m + p[0],), [m / k]) for p, fp in fiber_fourier(f).items()
        )
        assert abs(toeplitz_term(f, 0, k, m, tau) - r0) < 1e-14
        one = toeplitz_term(e(0, 1), 1, k, m, tau)
        assert abs(one - tau.tilde((m + 1,), [m / k], (1,)) / k) < 1e-15
    g = e(2, 0) + e(-1, 0, 3.0)
    assert all(toeplitz_term(g, r, k, m, tau) == 0 for r in (1, 2, 3) for m in range(k))
    with pytest.raises(ValueError):
        toeplitz_term(f, 9, k, 0, tau)


def test_term_matches_action_route():
    rng = np.random.default_rng(8)
    for n in (1, 2):
        f = checks.random_trig(rng, n, 2)
        k = 4
        tau = TestSection.uniform(k, SchwartzProfile((0.5,) * n, 1.0))
        for r in range(3):
            for m in [(0,) * n, (1,) * n, tuple(range(n))]:
                a = toeplitz_term(f, r, k, m, tau)
                b = toeplitz_term_via_action(f, r, k, m, tau)
                assert abs(a - b) <= 1e-10


def test_multiplication_collapse():
    f = e(1, 0, 2.0) + e(-1, 0, 0.5j)
    tau = gauss_section(6, SchwartzProfile((0.5,), 2.0))
    for m in range(6):
        assert toeplitz_pairing(f, 6, m, tau) == toeplitz_term(f, 0, 6, m, tau)


def test_pairing_linearity():
    rng = np.random.default_rng(2)
    f, g = checks.random_trig(rng, 1, 3), checks.random_trig(rng, 1, 3)
    a, b = 0.7 - 0.2j, -1.3
    k = 6
    t1 = gauss_section(k, SchwartzProfile((0.2,), 1.0))
    t2 = gauss_section(k, SchwartzProfile((-0.4,), 0.5, {(2,): 1.0}))
    for m in range(k):
        lhs = toeplitz_pairing(f * a + g * b, k, m, t1)
        rhs = a * toeplitz_pairing(f, k, m, t1) + b * toeplitz_pairing(g, k, m, t1)
        assert abs(lhs - rhs) <= 1e-12
        tsum = TestSection(k, 1, {c: SchwartzProfile((0.2,), 1.0, {(0,): a}) for c in [(i,) for i in range(k)]})
        assert abs(toeplitz_pairing(f, k, m, tsum) - a * toeplitz_pairing(f, k, m, t1)) <= 1e-12
    s1 = PolarizedState(k, 1, {(0,): 1.0, (3,): 2j})
    s2 = PolarizedState(k, 1, {(1,): -1.0})
    fn = lambda m: toeplitz_pairing(f, k, m, t2)  # noqa: E731
    combo = PolarizedState(k, 1, {(0,): a, (3,): 2j * a, (1,): -b})
    assert abs(pairing_linear(combo, t2, fn) - (a * pairing_linear(s1, t2, fn) + b * pairing_linear(s2, t2, fn))) <= 1e-12


# -- norms ---------------------------------------------------------------------------


def test_l1_norm_examples():
    assert l1_norm(PolarizedState(3, 1, {(0,): 2.0, (1,): -1.0})) == 3.0
    assert l1_norm(PolarizedState(3, 1, {})) == 0.0
    assert l1_norm(PolarizedState(3, 1, {(0,): 1j})) == 1.0


def test_seminorm_examples():
    tau = TestSection(1, 1, {(0,): GAUSS})
    s0 = seminorm(tau, 0)
    assert 1.0 <= s0 <= 1.0 + 1e-6
    s1 = seminorm(tau, 1)
    assert 1.0 <= s1 <= 1.0 + 1e-6
    assert seminorm(TestSection(1, 1, {}), 3) == 0.0


def test_seminorm_first_derivative_peak():
    # sup |2x e^{-x^2}| = sqrt(2/e) at x = 1/sqrt(2)
    tau = TestSection(1, 1, {(0,): SchwartzProfile((0.0,), 1.0, {(1,): -2.0})})
    est = seminorm(tau, 0)
    assert math.sqrt(2 / math.e) <= est <= math.sqrt(2 / math.e) + 1e-6


def test_seminorm_is_upper_bound_on_coarse_grid():
    prof = SchwartzProfile((0.123,), 1.7, {(0,): 1.0, (3,): 0.4})
    tau = TestSection(1, 1, {(0,): prof})
    fine = seminorm(tau, 2, Grid(step=1e-4))
    coarse = seminorm(tau, 2, Grid(step=5e-2))
    assert coarse >= fine - 1e-9


def test_seminorm_order_limit():
    with pytest.raises(ValueError):
        seminorm(TestSection(1, 1, {(0,): GAUSS}), 7)


def test_holder_inequality():
    rng = np.random.default_rng(4)
    k = 5
    tau = gauss_section(k, SchwartzProfile((0.5,), 1.0, {(1,): 1.0, (0,): 0.5}))
    f = checks.random_trig(rng, 1, 3)
    for N in (0, 1, 2):
        semi = seminorm(tau, N)
        for _ in range(5):
            s = PolarizedState(k, 1, {(int(m),): complex(rng.normal(), rng.normal()) for m in rng.integers(0, k, 3)})
            assert abs(pairing_linear(s, tau, lambda m: pair_sigma(k, m, tau))) <= l1_norm(s) * semi


# -- remainder sweeps ------------------------------------------------------------------------

KS = [4, 8, 16, 32, 64]


def test_sweep_y_free_is_exact():
    for N in (0, 2):
        rep = remainder_sweep(e(1, 0) + e(-2, 0, 0.5), N, KS)
        assert all(r.remainder_abs == 0.0 for r in rep.rows)
        assert rep.fitted_slope is None


def test_sweep_single_mode_two_point_oracle():
    tmpl = SchwartzProfile((0.5,), 1.0)
    rep = remainder_sweep(e(0, 1), 0, KS, tau_family=gaussian_family(tmpl))
    for row in rep.rows:
        k = row.k
        want = abs(schwartz_eval(tmpl, [1 / k]) - schwartz_eval(tmpl, [0.0]))
        assert row.remainder_abs == pytest.approx(want, rel=1e-12)
    assert rep.fitted_slope == pytest.approx(-1.0, abs=0.1)


def test_sweep_zero_function():
    rep = remainder_sweep(TrigPoly.zero(1), 1, KS)
    assert all(r.remainder_abs == 0 for r in rep.rows)
    assert rep.fitted_slope is None and rep.max_bound_ratio is None


def test_sweep_n1_rate():
    rep = remainder_sweep(e(0, 1) + e(0, -1), 1, KS)
    assert rep.fitted_slope <= -1.85


def test_sweep_bound_ratio_definition():
    rep = remainder_sweep(e(1, 1), 1, [4, 8, 16])
    for r in rep.rows:
        assert r.bound_ratio == pytest.approx(r.remainder_abs * r.k**2 / (r.l1_norm * r.seminorm))


def test_sweep_all_classes():
    rep = remainder_sweep(e(0, 1), 0, [2, 3, 4], all_classes=True)
    assert [r.k for r in rep.rows] == [2, 2, 3, 3, 3, 4, 4, 4, 4]
    assert [r.m_class for r in rep.rows[:2]] == [(0,), (1,)]


def test_sweep_rejects_bad_k_lists():
    with pytest.raises(ValueError):
        remainder_sweep(e(0, 1), 0, [])
    with pytest.raises(ValueError):
        remainder_sweep(e(0, 1), 0, [4, 4, 8])


def _report(values, c=3.0):
    return SweepReport([SweepRow(k, 0, (0,), c * k**v, 1.0, 1.0, 1.0) for k, v in values])


def test_fit_decay_synthetic():
    slope, ratio = fit_decay(_report([(k, -2) for k in KS]))
    assert abs(slope + 2.0) <= 1e-9
    assert ratio == 1.0
    slope, _ = fit_decay(_report([(k, -1) for k in KS]))
    assert abs(slope + 1.0) <= 1e-9


def test_fit_decay_needs_three_rows():
    rep = _report([(4, -1), (8, -1)])
    rep.rows.append(SweepRow(16, 0, (0,), 0.0, 1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        fit_decay(rep)
