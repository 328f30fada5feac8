"""Seeded invariant suites shared by the CLI and the test-suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeff_rings import FourierMode, TrigPoly, series_distance, series_max_abs, trig_combine
from .fedosov_flat import (
    act_polarized,
    fedosov_residual,
    gamma_flat,
    poisson_bracket,
    quantum_jet,
    quantum_jet_torus_closed,
    star_product,
)
from .weyl_algebra import (
    Geometry,
    Truncation,
    WeylElement,
    evaluate_hbar,
    exterior_d,
    fibrewise_act,
    hodge_apply,
    polarized_weight_le,
    random_element,
    weyl_commutator,
    weyl_star,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{flag} {self.name}: {self.value:.3e} <= {self.tol:.1e}{extra}"


def _result(name, value, tol, detail="") -> CheckResult:
    return CheckResult(name, bool(value <= tol), float(value), tol, detail)


def random_trig(rng: np.random.Generator, n: int = 1, nmodes: int = 3, max_mode: int = 2) -> TrigPoly:
    terms = {}
    for _ in range(nmodes):
        qx = tuple(int(v) for v in rng.integers(-max_mode, max_mode + 1, n))
        py = tuple(int(v) for v in rng.integers(-max_mode, max_mode + 1, n))
        terms[FourierMode(qx, py)] = complex(rng.normal(), rng.normal())
    return TrigPoly(n, terms)


def random_series(rng: np.random.Generator, n: int = 1, max_h: int = 1, nmodes: int = 2) -> dict[int, TrigPoly]:
    return {h: random_trig(rng, n, nmodes) for h in range(max_h + 1)}


def _rel(diff: float, scale: float) -> float:
    return diff / scale if scale > 0 else diff


# -- weyl algebra ------------------------------------------------------------------


def hodge_suite(seed: int = 0, count: int = 200, dims=(1, 2), trunc: Truncation = Truncation(6, 4)) -> list[CheckResult]:
    """Hodge decompositions and nilpotency.

    d^-1 raises the weight by one, so samples stay one weight below the
    truncation edge where the identities are meaningful.
    """
    rng = np.random.default_rng(seed)
    worst = {k: 0.0 for k in ("full", "Q", "P", "d2", "dinv2", "dQ2", "dP2", "dQinv2")}
    for i in range(count):
        geom = Geometry.torus(dims[i % len(dims)]) if i % 3 else Geometry.local_flat(dims[i % len(dims)])
        a = random_element(geom, rng, nterms=6, trunc=trunc, max_weight=trunc.max_total_weight - 1)
        scale = max(a.max_abs(), 1e-300)
        lhs = a - hodge_apply("pi0", a)
        rhs = hodge_apply("d", hodge_apply("d_inv", a)) + hodge_apply("d_inv", hodge_apply("d", a))
        worst["full"] = max(worst["full"], lhs.distance(rhs) / scale)
        for side in "QP":
            lhs = a - hodge_apply(f"pi{side}", a)
            rhs = hodge_apply(f"d{side}", hodge_apply(f"d{side}_inv", a)) + hodge_apply(f"d{side}_inv", hodge_apply(f"d{side}", a))
            worst[side] = max(worst[side], lhs.distance(rhs) / scale)
        worst["d2"] = max(worst["d2"], hodge_apply("d", hodge_apply("d", a)).max_abs() / scale)
        worst["dinv2"] = max(worst["dinv2"], hodge_apply("d_inv", hodge_apply("d_inv", a)).max_abs() / scale)
        worst["dQ2"] = max(worst["dQ2"], hodge_apply("dQ", hodge_apply("dQ", a)).max_abs() / scale)
        worst["dP2"] = max(worst["dP2"], hodge_apply("dP", hodge_apply("dP", a)).max_abs() / scale)
        worst["dQinv2"] = max(worst["dQinv2"], hodge_apply("dQ_inv", hodge_apply("dQ_inv", a)).max_abs() / scale)
    names = {
        "full": "hodge: id - pi0 = d d^-1 + d^-1 d",
        "Q": "hodge: id - piQ = dQ dQ^-1 + dQ^-1 dQ",
        "P": "hodge: id - piP = dP dP^-1 + dP^-1 dP",
        "d2": "nilpotent: d^2 = 0",
        "dinv2": "nilpotent: (d^-1)^2 = 0",
        "dQ2": "nilpotent: dQ^2 = 0",
        "dP2": "nilpotent: dP^2 = 0",
        "dQinv2": "nilpotent: (dQ^-1)^2 = 0",
    }
    return [_result(names[k], v, 1e-12, f"{count} elements") for k, v in worst.items()]


def weyl_associativity(seed: int = 1, count: int = 20) -> CheckResult:
    rng = np.random.default_rng(seed)
    trunc = Truncation(6, 4)
    worst = 0.0
    for i in range(count):
        geom = Geometry.torus(1 + i % 2)
        a, b, c = (random_element(geom, rng, nterms=4, trunc=trunc) for _ in range(3))
        lhs = weyl_star(weyl_star(a, b), c)
        rhs = weyl_star(a, weyl_star(b, c))
        worst = max(worst, lhs.rel_error(rhs))
    return _result("weyl star associativity", worst, 1e-9, f"{count} triples")


def weyl_leibniz(seed: int = 2, count: int = 20) -> CheckResult:
    """d(a*b) = da*b + (-1)^|a| a*db on homogeneous-parity forms."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(count):
        geom = Geometry.torus(1 + i % 2)
        a, b = (random_element(geom, rng, nterms=4) for _ in range(2))
        a_even, a_odd = a.parity_split()
        lhs = exterior_d(weyl_star(a, b))
        rhs = weyl_star(exterior_d(a), b) + weyl_star(a_even, exterior_d(b)) - weyl_star(a_odd, exterior_d(b))
        worst = max(worst, lhs.rel_error(rhs))
    return _result("flat Leibniz rule for d", worst, 1e-10, f"{count} pairs")


def _random_fibre_section(geom, rng, trunc, max_deg=2):
    n = geom.n
    terms = []
    for _ in range(3):
        u = tuple(int(v) for v in rng.multinomial(int(rng.integers(0, max_deg + 1)), np.ones(n) / n))
        qx = tuple(int(v) for v in rng.integers(-2, 3, n))
        py = tuple(int(v) for v in rng.integers(-2, 3, n))
        terms.append(((), (), 0, u, None, TrigPoly(n, {FourierMode(qx, py): complex(rng.normal(), rng.normal())})))
    return WeylElement.from_terms(geom, terms, trunc)


def fibrewise_module(seed: int = 3, count: int = 20, ks=(1, 3, 7)) -> CheckResult:
    rng = np.random.default_rng(seed)
    trunc = Truncation(8, 6)
    worst = 0.0
    for i in range(count):
        if i % 3:
            geom = Geometry.torus(1 + i % 2)
        else:
            # a non-diagonal pairing exercises the general contraction table
            geom = Geometry.local_flat(2, [[1.0, 0.5], [0.0, 2.0]]) if i % 2 else Geometry.local_flat(1)
        a, b = (random_element(geom, rng, nterms=3, trunc=Truncation(2, 2), with_forms=False).with_trunc(trunc) for _ in range(2))
        s = _random_fibre_section(geom, rng, trunc)
        for k in ks:
            lhs = fibrewise_act(weyl_star(a, b), s, k)
            rhs = fibrewise_act(a, fibrewise_act(b, s, k), k)
            worst = max(worst, lhs.rel_error(rhs))
    return _result("fibrewise module identity", worst, 1e-10, f"{count} pairs, k in {list(ks)}")


def commutator_action_bridge(seed: int = 4, count: int = 20) -> CheckResult:
    rng = np.random.default_rng(seed)
    trunc = Truncation(6, 4)
    worst = 0.0
    for i in range(count):
        geom = Geometry.torus(1 + i % 2)
        n = geom.n
        j = int(rng.integers(0, n))
        cu = tuple(1 if t == j else 0 for t in range(n))
        alpha = WeylElement.monomial(geom, random_trig(rng, n), cu=cu, h=int(rng.integers(0, 2)), trunc=trunc)
        s = _random_fibre_section(geom, rng, trunc, max_deg=3)
        k = int(rng.integers(1, 8))
        lhs = evaluate_hbar(weyl_commutator(alpha, s, divide_hbar=True), k)
        rhs = fibrewise_act(alpha, s, k) * (k / 1j)
        worst = max(worst, lhs.rel_error(rhs))
    return _result("commutator-action bridge", worst, 1e-12, f"{count} pairs")


def algebra_suite(seed: int = 0) -> list[CheckResult]:
    out = hodge_suite(seed)
    out.append(weyl_associativity(seed + 1))
    out.append(weyl_leibniz(seed + 2))
    out.append(fibrewise_module(seed + 3))
    out.append(commutator_action_bridge(seed + 4))
    return out


# -- fedosov pipeline -------------------------------------------------------------


def fedosov_suite(trunc: Truncation = Truncation(6, 4)) -> list[CheckResult]:
    out = []
    for label, geom in (("torus", Geometry.torus(1)), ("torus n=2", Geometry.torus(2)), ("local_flat", Geometry.local_flat(1)), ("local_flat n=2", Geometry.local_flat(2))):
        res = fedosov_residual(gamma_flat(geom, trunc)).max_abs()
        out.append(_result(f"fedosov residual ({label})", res, 0.0))
    neg = fedosov_residual(gamma_flat(Geometry.torus(1), trunc).without("dQ_inv_omega")).max_abs()
    out.append(CheckResult("fedosov negative control (dQ^-1 omega deleted)", neg > 1e-3, neg, 1e-3, "must be nonzero"))
    return out


def star_triples(seed: int = 5, count: int = 30):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = 1 + (i % 3 == 2)
        out.append(tuple(random_trig(rng, n, nmodes=2 if n == 2 else 3) for _ in range(3)))
    return out


def associativity_suite(triples, order: int = 4) -> CheckResult:
    worst = 0.0
    for f, g, h in triples:
        geom = Geometry.torus(f.n)
        lhs = star_product(star_product(f, g, geom, order), h, geom, order)
        rhs = star_product(f, star_product(g, h, geom, order), geom, order)
        scale = max(series_max_abs(lhs), series_max_abs(rhs))
        worst = max(worst, _rel(series_distance(lhs, rhs, f.n), scale))
    return _result("star associativity to hbar^4", worst, 1e-9, f"{len(triples)} triples")


def quantization_axioms(triples, order: int = 2) -> list[CheckResult]:
    c0 = c1 = unit = 0.0
    for f, g, _ in triples:
        n = f.n
        geom = Geometry.torus(n)
        fg = star_product(f, g, geom, order)
        gf = star_product(g, f, geom, order)
        zero = TrigPoly.zero(n)
        c0 = max(c0, fg.get(0, zero).distance(trig_combine(f, g, "mul")))
        br = poisson_bracket(f, g, geom)
        anti = fg.get(1, zero) - gf.get(1, zero)
        c1 = max(c1, _rel(anti.distance(br), max(br.max_abs(), 1.0)))
        one = TrigPoly.const(n)
        for prod in (star_product(one, f, geom, order), star_product(f, one, geom, order)):
            unit = max(unit, series_distance(prod, {0: f}, n))
    return [
        _result("C0 = pointwise product", c0, 0.0),
        _result("C1 antisymmetrization = Poisson bracket", c1, 1e-10),
        _result("unit law 1*f = f*1 = f", unit, 0.0),
    ]


def jet_oracle_suite(seed: int = 6, count: int = 50, trunc: Truncation = Truncation(6, 4)) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst = flat = 0.0
    for i in range(count):
        n = 1 + (i % 2)
        f = random_series(rng, n, max_h=int(rng.integers(0, 3)), nmodes=2)
        geom = Geometry.torus(n)
        J = quantum_jet(f, geom, trunc)
        C = quantum_jet_torus_closed(f, trunc, geom)
        worst = max(worst, J.jet.rel_error(C))
        flat = max(flat, J.residual_norm)
    return [
        _result("quantum jet = closed-form Taylor jet", worst, 1e-10, f"{count} inputs, weight {trunc.max_total_weight}"),
        _result("D-flatness of quantum jets", flat, 1e-9),
    ]


def module_pairs(seed: int = 7, count: int = 30):
    """D-flat pairs with finite polarized weight.

    Even-indexed pairs use polarized-weight truncations of quantum jets of
    general trig polynomials, odd-indexed pairs jets of y-independent
    hbar-polynomials.
    """
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(count):
        n = 1
        geom = Geometry.torus(n)
        if i % 2 == 0:
            ra, rb = int(rng.integers(0, 3)), int(rng.integers(0, 3))
            W = ra + rb + 2
            trunc = Truncation(W, W)
            a = polarized_weight_le(quantum_jet(random_trig(rng, n, 2), geom, trunc).jet, ra)
            b = polarized_weight_le(quantum_jet(random_trig(rng, n, 2), geom, trunc).jet, rb)
        else:
            trunc = Truncation(4, 4)

            def yfree():
                return {h: TrigPoly(n, {FourierMode((int(q),), (0,)): complex(rng.normal(), rng.normal()) for q in rng.integers(-2, 3, 2)}) for h in range(2)}

            a = quantum_jet(yfree(), geom, trunc).jet
            b = quantum_jet(yfree(), geom, trunc).jet
        s = random_trig(rng, n, 2)
        pairs.append((a, b, s))
    return pairs


def module_suite(pairs, ks=(1, 3, 7)) -> CheckResult:
    worst = 0.0
    for a, b, s in pairs:
        for k in ks:
            lhs = act_polarized(evaluate_hbar(weyl_star(a, b), k), s, k)
            rhs = act_polarized(a, act_polarized(b, s, k), k)
            worst = max(worst, _rel(lhs.distance(rhs), max(lhs.max_abs(), rhs.max_abs())))
    return _result("module property of the level-k action", worst, 1e-9, f"{len(pairs)} pairs, k in {list(ks)}")
