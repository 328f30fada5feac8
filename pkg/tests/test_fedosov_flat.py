import math

import numpy as np
import pytest

from polquant import checks
from polquant.coeff_rings import FourierMode, TrigPoly, series_distance, trig_derivative
from polquant.fedosov_flat import (
    act_polarized,
    act_polarized_covariant,
    classical_jet,
    classify_quantizable,
    connection_D_apply,
    fedosov_residual,
    flatness_residual,
    gamma_flat,
    hamiltonian_field,
    kapranov_F,
    kostant_souriau,
    omega_form,
    operator_symbol,
    poisson_bracket,
    quantum_jet,
    quantum_jet_torus_closed,
    star_product,
)
from polquant.weyl_algebra import Geometry, Truncation, WeylElement, hodge_apply

G1 = Geometry.torus(1)
PI = math.pi
W2 = Truncation(2, 2)


def e(qx, py, c=1.0):
    return TrigPoly.mode((qx,), (py,), c)


def mono(c=1.0, geom=G1, trunc=Truncation(6, 4), **kw):
    return WeylElement.monomial(geom, c, trunc=trunc, **kw)


def close(a, b, tol=1e-13):
    return a.distance(b) <= tol * max(1.0, a.max_abs(), b.max_abs())


# -- gamma and the Fedosov equation -------------------------------------------------


def test_gamma_components():
    gam = gamma_flat(G1)
    assert close(gam.components["dP_inv_omega"], mono(-2 * PI, v=(0,), cu=(1,)))
    assert close(gam.components["dQ_inv_omega"], mono(2 * PI, u=(1,), p=(0,)))
    assert not gam.components["I_tilde"]
    assert not gam.components["hbar_FL"]


def test_gamma_has_polarized_weight_at_most_one():
    gam = gamma_flat(Geometry.torus(2)).value
    assert gam.polarized_weight().max() <= 1
    assert (gam.form_degree() == 1).all()


@pytest.mark.parametrize("geom", [G1, Geometry.torus(2), Geometry.local_flat(1), Geometry.local_flat(2, [[1.0, 0.5], [0.0, 2.0]])])
def test_fedosov_residual_zero(geom):
    assert fedosov_residual(gamma_flat(geom)).max_abs() == 0.0


def test_fedosov_negative_control():
    res = fedosov_residual(gamma_flat(G1).without("dQ_inv_omega"))
    assert res.max_abs() > 1.0
    with pytest.raises(KeyError):
        gamma_flat(G1).without("nothing")


def test_connection_examples():
    gam = gamma_flat(G1)
    assert close(connection_D_apply(gam, mono(u=(1,))), mono(-1.0, v=(0,)))
    f = e(1, 0, 0.5) + e(-2, 0)
    df = WeylElement.monomial(G1, e(1, 0, 0.5 * 2j * PI) + e(-2, 0, -4j * PI), v=(0,))
    assert close(connection_D_apply(gam, WeylElement.scalar(G1, f)), df)
    assert not connection_D_apply(gam, WeylElement.scalar(G1, 1.0))


# -- quantum jets ---------------------------------------------------------------------


def test_jet_examples():
    jy = quantum_jet(e(0, 1), G1, W2).jet
    expect = WeylElement.from_terms(G1, [((), (), 0, None, (c,), e(0, 1, v)) for c, v in ((0, 1), (1, 2j * PI), (2, -2 * PI**2))], W2)
    assert close(jy, expect)
    jx = quantum_jet(e(1, 0), G1, W2).jet
    expect = WeylElement.from_terms(G1, [((), (), 0, (c,), None, e(1, 0, v)) for c, v in ((0, 1), (1, 2j * PI), (2, -2 * PI**2))], W2)
    assert close(jx, expect)
    assert quantum_jet(TrigPoly.const(1), G1, W2).jet == WeylElement.scalar(G1, 1.0, W2)


def test_closed_form_examples():
    for f in (e(0, 1), e(1, 0), TrigPoly.const(1)):
        assert close(quantum_jet(f, G1, W2).jet, quantum_jet_torus_closed(f, W2))


def test_jet_projects_to_source():
    f = {0: e(1, 1, 2.0) + e(0, -1), 1: e(2, 0, 1j)}
    J = quantum_jet(f, G1)
    base = hodge_apply("pi0", J.jet)
    for h, fh in f.items():
        assert base.coefficient(h=h).distance(fh) <= 1e-14


def test_jet_oracle_and_flatness_suite():
    for res in checks.jet_oracle_suite(seed=9, count=12):
        assert res.passed, res.line()


def test_flatness_residual_detects_non_flat():
    assert flatness_residual(gamma_flat(G1), WeylElement.scalar(G1, e(0, 1))) > 1.0


# -- star product --------------------------------------------------------------------


def test_star_examples():
    g = e(1, -1, 0.5) + e(0, 2)
    assert series_distance(star_product(TrigPoly.const(1), g, order=2), {0: g}, 1) == 0.0
    prod = star_product(e(0, 1), e(1, 0), order=2)
    expect = {0: e(1, 1), 1: e(1, 1, -2 * PI), 2: e(1, 1, 2 * PI**2)}
    assert series_distance(prod, expect, 1) <= 1e-12
    assert series_distance(star_product(e(1, 0), e(0, 1), order=2), {0: e(1, 1)}, 1) == 0.0


def test_star_jet_weight_stable():
    rng = np.random.default_rng(12)
    for _ in range(4):
        f, g = checks.random_trig(rng, 1, 2), checks.random_trig(rng, 1, 2)
        for N in (1, 2, 3):
            base = star_product(f, g, order=N)
            wide = star_product(f, g, order=N, jet_weight=2 * N + 2)
            scale = max(1.0, checks.series_max_abs(wide))
            assert series_distance(base, wide, 1) <= 1e-12 * scale


def test_poisson_bracket_sign():
    # {f, g} = W (d_y f d_x g - d_y g d_x f) with W = 1/(2 pi)
    br = poisson_bracket(e(0, 1), e(1, 0))
    assert br.distance(e(1, 1, (2j * PI) ** 2 / (2 * PI))) <= 1e-12


def test_associativity_small():
    res = checks.associativity_suite(checks.star_triples(seed=21, count=4), order=3)
    assert res.passed, res.line()


# -- classification ---------------------------------------------------------------------


def test_classify_examples():
    assert str(classify_quantizable(e(1, 0))) == "order 0"
    v = classify_quantizable(e(0, 1))
    assert v.status == "not_quantizable" and v.witness == (1, 0)
    assert str(v) == "not quantizable; witness (1,0)"
    assert classify_quantizable({0: TrigPoly.const(1, 5.0), 1: e(1, 0)}).to_dict() == {"status": "order", "order": 1}


def test_classify_undetermined_when_truncation_too_small():
    v = classify_quantizable({3: e(1, 0)}, trunc=Truncation(3, 3))
    assert v.status == "undetermined"
    assert str(v) == "undetermined at this truncation"


def test_order_verdict_means_finite_weight():
    f = {0: e(1, 0), 2: e(-1, 0, 3.0)}
    v = classify_quantizable(f)
    assert v.order == 2
    assert quantum_jet(f, G1).jet.polarized_weight().max() <= 2


# -- classical jets and the action -----------------------------------------------------------


def test_classical_jet_examples():
    expect = WeylElement.from_terms(G1, [((), (), 0, (c,), None, e(1, 0, v)) for c, v in ((0, 1), (1, 2j * PI), (2, -2 * PI**2))], W2)
    assert close(classical_jet(e(1, 0), 1, W2).jet, expect)
    assert classical_jet(TrigPoly.const(1), 3, W2).jet == WeylElement.scalar(G1, 1.0, W2)
    expect = WeylElement.from_terms(G1, [((), (), 0, (c,), None, e(1, 1, v)) for c, v in ((0, 1), (1, 2j * PI), (2, -2 * PI**2))], W2)
    assert close(classical_jet(e(1, 1), 2, W2).jet, expect)
    assert classical_jet(e(2, -1), 1).residual_norm <= 1e-9


def test_action_examples():
    s = e(1, 0) + e(-2, 1, 0.5)
    trunc = Truncation(4, 4)
    for k in (1, 4):
        got = act_polarized(mono(cu=(1,), trunc=trunc), s, k)
        assert got.distance(trig_derivative(s, ("x", 0)) * (1j / (2 * PI * k))) <= 1e-13
        f = e(2, 0, 1 - 1j)
        assert act_polarized(f, s, k, trunc=trunc).distance(f * s) == 0.0
        assert act_polarized(mono(h=1, trunc=trunc), s, k).distance(s * (1j / k)) <= 1e-15


def test_action_rejects_infinite_weight():
    with pytest.raises(ValueError):
        act_polarized(e(0, 1), e(1, 0), 1)


@pytest.mark.parametrize("geom", [G1, Geometry.torus(2), Geometry.local_flat(2, [[1.0, 0.5], [0.0, 2.0]])])
def test_action_routes_agree(geom):
    rng = np.random.default_rng(31)
    n = geom.n
    trunc = Truncation(4, 4)
    for _ in range(5):
        terms = []
        for _ in range(3):
            cu = tuple(int(v) for v in rng.integers(0, 2, n))
            terms.append(((), (), int(rng.integers(0, 2)), None, cu, checks.random_trig(rng, n, 1)))
        a = WeylElement.from_terms(geom, terms, trunc)
        s = checks.random_trig(rng, n, 2)
        for k in (1, 5):
            fib = act_polarized(a, s, k)
            cov = act_polarized_covariant(a, s, k)
            assert fib.distance(cov) <= 1e-12 * max(1.0, fib.max_abs())


def test_operator_symbol_of_cu():
    sym = operator_symbol(mono(cu=(1,), trunc=Truncation(4, 4)), 3)
    assert set(sym) == {(1,)}
    assert sym[(1,)].distance(TrigPoly.const(1, 1j / (3 * 2 * PI))) <= 1e-15


# -- first-order functions ---------------------------------------------------------------


def test_kostant_souriau_examples():
    s = e(1, 0) + e(0, 2, 0.25)
    assert kostant_souriau(TrigPoly.const(1, 2.5), TrigPoly.zero(1), s, 3).distance(s * 2.5) == 0.0
    f1 = e(1, 0)
    assert kostant_souriau(TrigPoly.zero(1), f1, s, 3).distance(f1 * s * (1j / 3)) <= 1e-15
    f0 = e(1, 0)
    for k in (1, 2, 5):
        ks = kostant_souriau(f0, TrigPoly.zero(1), s, k)
        assert ks.distance(act_polarized(f0, s, k, trunc=Truncation(4, 4))) <= 1e-12


def test_kostant_souriau_rejects():
    with pytest.raises(ValueError, match="dy1dy1"):
        kostant_souriau(e(0, 1), TrigPoly.zero(1), e(1, 0), 1)
    with pytest.raises(ValueError):
        kostant_souriau(e(1, 0), e(0, 1), e(1, 0), 1)


def test_hamiltonian_field_convention():
    geom = Geometry.local_flat(2, [[1.0, 0.5], [0.0, 2.0]])
    f = TrigPoly(2, {FourierMode((1, 0), (0, 1)): 1.0, FourierMode((0, 2), (1, -1)): 0.5j})
    a, b = hamiltonian_field(f, geom)
    om = geom.omega_matrix
    # iota_X omega = df, with omega = sum omega_ij v^i ^ vc^j
    for j in range(2):
        lhs = sum((a[i] * om[i, j] for i in range(2)), TrigPoly.zero(2))
        assert lhs.distance(trig_derivative(f, ("y", j))) <= 1e-12
    for i in range(2):
        lhs = sum((b[j] * (-om[i, j]) for j in range(2)), TrigPoly.zero(2))
        assert lhs.distance(trig_derivative(f, ("x", i))) <= 1e-12


# -- curvature recursion --------------------------------------------------------------


def test_kapranov_prequantum():
    om = omega_form(G1)
    F = kapranov_F(om * -1j, None, 3)
    assert close(F[0], mono(-2j * PI, u=(1,), p=(0,)).with_trunc(F[0].trunc))
    assert all(not Fr for Fr in F[1:])


def test_kapranov_zero_curvature():
    assert all(not Fr for Fr in kapranov_F(WeylElement.zero(G1), None, 4))


def test_kapranov_non_constant():
    g = e(1, 0, 2.0)
    F = kapranov_F(WeylElement.monomial(G1, g, v=(0,), p=(0,)), None, 2)
    assert close(F[0], mono(g, u=(1,), p=(0,)).with_trunc(F[0].trunc))
    assert close(F[1], mono(e(1, 0, 2.0 * 2j * PI * 0.5), u=(2,), p=(0,)).with_trunc(F[1].trunc))


def test_kapranov_with_contraction_term():
    # n=2, R = v^1 ^ v^2: F_1 = (u^1 v^2 - u^2 v^1)/2, F_2 = 0 (constant),
    # F_3 = I_Q/(2+1+1) . iota_{v_1} F_1 = (u^1)^2 v^1 (-u^2/2)/4
    g2 = Geometry.torus(2)
    trunc = Truncation(6, 4)
    R = WeylElement.monomial(g2, 1.0, v=(0, 1), trunc=trunc)
    IQ = WeylElement.monomial(g2, 1.0, u=(2, 0), v=(0,), trunc=trunc)
    F = kapranov_F(R, {2: {0: (WeylElement.zero(g2, trunc), IQ)}}, 3)
    f1 = WeylElement.monomial(g2, 0.5, u=(1, 0), v=(1,), trunc=trunc) + WeylElement.monomial(g2, -0.5, u=(0, 1), v=(0,), trunc=trunc)
    assert close(F[0], f1)
    assert not F[1]
    assert close(F[2], WeylElement.monomial(g2, -0.125, u=(2, 1), v=(0,), trunc=trunc))
    # the I_P slot carries the other weight 1/(2+1)
    IP = WeylElement.monomial(g2, 1.0, u=(2, 0), p=(1,), trunc=trunc)
    F = kapranov_F(R, {2: {0: (IP, WeylElement.zero(g2, trunc))}}, 3)
    assert close(F[2], WeylElement.monomial(g2, -0.5 / 3, u=(2, 1), p=(1,), trunc=trunc))


def test_kapranov_rejects_bad_tensors():
    trunc = Truncation(6, 4)
    R = omega_form(G1, trunc)
    bad_degree = mono(u=(1,), v=(0,), trunc=trunc)
    with pytest.raises(ValueError, match="u-degree"):
        kapranov_F(R, {2: {0: (WeylElement.zero(G1, trunc), bad_degree)}}, 3)
    wrong_block = mono(u=(2,), p=(0,), trunc=trunc)
    with pytest.raises(ValueError, match="Q"):
        kapranov_F(R, {2: {0: (WeylElement.zero(G1, trunc), wrong_block)}}, 3)
    with pytest.raises(ValueError):
        kapranov_F(R, {1: {0: (WeylElement.zero(G1, trunc), WeylElement.zero(G1, trunc))}}, 3)
    with pytest.raises(ValueError):
        kapranov_F(mono(u=(1,), v=(0,), p=(0,)), None, 2)
