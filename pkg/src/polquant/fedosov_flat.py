"""Fedosov-type pipeline on flat models.

Flat frames make the connection on the Weyl bundle plain coefficient-wise
differentiation, so the flat connection is ``D = d + (1/hbar)[gamma, .]``
with the explicit ``gamma`` built from the symplectic form.  Quantum jets are
the D-flat lifts of functions, and everything downstream (star product,
quantizability, the level-k action) is computed from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .coeff_rings import TrigPoly, as_hbar_series, trig_derivative, trig_derivative_multi
from .weyl_algebra import (
    DEFAULT_TRUNC,
    Geometry,
    Truncation,
    WeylElement,
    _contract_form,
    _insert_form,
    classical_product,
    divide_by_hbar,
    double_weight_component,
    exterior_d,
    fibrewise_act,
    hodge_apply,
    weyl_commutator,
    weyl_star,
)

GAMMA_PARTS = ("dP_inv_omega", "dQ_inv_omega", "I_tilde", "hbar_FL")


# -- gamma and the Fedosov equation ---------------------------------------------


def omega_form(geom: Geometry, trunc: Truncation = DEFAULT_TRUNC) -> WeylElement:
    """The constant 2-form sum omega_ij v^i ^ vc^j."""
    n = geom.n
    terms = [((i,), (j,), 0, None, None, geom.omega[i][j]) for i in range(n) for j in range(n) if geom.omega[i][j]]
    return WeylElement.from_terms(geom, terms, trunc)


@dataclass(frozen=True)
class GammaForm:
    geometry: Geometry
    components: Mapping[str, WeylElement]
    trunc: Truncation = DEFAULT_TRUNC

    @property
    def value(self) -> WeylElement:
        total = WeylElement.zero(self.geometry, self.trunc)
        for part in self.components.values():
            total = total + part
        return total

    def without(self, name: str) -> "GammaForm":
        if name not in self.components:
            raise KeyError(name)
        comps = dict(self.components)
        comps[name] = WeylElement.zero(self.geometry, self.trunc)
        return GammaForm(self.geometry, comps, self.trunc)


def gamma_flat(geom: Geometry, trunc: Truncation = DEFAULT_TRUNC) -> GammaForm:
    om = omega_form(geom, trunc)
    zero = WeylElement.zero(geom, trunc)
    comps = {
        "dP_inv_omega": hodge_apply("dP_inv", om),
        "dQ_inv_omega": hodge_apply("dQ_inv", om),
        "I_tilde": zero,
        "hbar_FL": zero,
    }
    return GammaForm(geom, comps, trunc)


def _lifted(trunc: Truncation) -> Truncation:
    # one extra slot so that (1/hbar)[gamma, a] is exact on the original range
    return Truncation(trunc.max_total_weight + 1, trunc.max_hbar + 1)


def fedosov_residual(gamma: GammaForm) -> WeylElement:
    """d gamma + (1/2 hbar)[gamma, gamma] + omega."""
    trunc = gamma.trunc
    big = _lifted(trunc)
    g = gamma.value.with_trunc(big)
    comm = divide_by_hbar(weyl_commutator(g, g)) * 0.5
    res = exterior_d(g) + comm + omega_form(gamma.geometry, big)
    return res.with_trunc(trunc)


def connection_D_apply(gamma: GammaForm, a: WeylElement) -> WeylElement:
    """D a = d a + (1/hbar)[gamma, a], exact within the truncation of ``a``."""
    trunc = a.trunc
    big = _lifted(trunc)
    g = gamma.value.with_trunc(big)
    al = a.with_trunc(big)
    res = exterior_d(al) + weyl_commutator(g, al, divide_hbar=True)
    return res.with_trunc(trunc)


# -- quantum jets ----------------------------------------------------------------


@dataclass
class JetResult:
    jet: WeylElement
    source: dict
    trunc: Truncation
    residual_norm: float
    iterations: int = 0


def series_element(f, geom: Geometry, trunc: Truncation = DEFAULT_TRUNC) -> WeylElement:
    """Embed a function (or hbar-series of functions) as a scalar Weyl element."""
    if isinstance(f, WeylElement):
        return f.with_trunc(trunc)
    series = as_hbar_series(f, geom.n)
    return WeylElement.from_terms(geom, [((), (), h, None, None, c) for h, c in series.items()], trunc)


def element_series(a: WeylElement) -> dict[int, TrigPoly]:
    """Scalar (pi_0) part of an element as {hbar power: TrigPoly}."""
    out: dict[int, dict] = {}
    for t in hodge_apply("pi0", a).terms():
        out[t.hpow] = t.coeff
    return out


def quantum_jet(f, geom: Geometry | None = None, trunc: Truncation = DEFAULT_TRUNC, tol: float = 1e-13) -> JetResult:
    """Solve a = f + d^{-1}((D + d)a) by iteration; each pass fixes one more weight."""
    geom = geom or Geometry.torus(_dim_of(f))
    gamma = gamma_flat(geom, trunc)
    src = series_element(f, geom, trunc)
    a = src
    for it in range(1, trunc.max_total_weight + 3):
        Da = connection_D_apply(gamma, a)
        nxt = src + hodge_apply("d_inv", Da + hodge_apply("d", a))
        change = nxt.distance(a)
        a = nxt
        if change <= tol * max(1.0, a.max_abs()):
            break
    else:
        raise RuntimeError("quantum jet iteration did not stabilize")
    res = flatness_residual(gamma, a)
    return JetResult(a, as_hbar_series(f, geom.n) if not isinstance(f, WeylElement) else element_series(f), trunc, res, it)


def flatness_residual(gamma: GammaForm, a: WeylElement) -> float:
    """max |D a| on total weights below the truncation edge.

    The top weight is excluded: there d cannot be balanced by the (dropped)
    next-weight terms.
    """
    Da = connection_D_apply(gamma, a)
    return Da.filter(Da.total_weight() < a.trunc.max_total_weight).max_abs()


def _dim_of(f) -> int:
    if isinstance(f, TrigPoly):
        return f.n
    if isinstance(f, Mapping):
        return next(iter(f.values())).n
    if isinstance(f, WeylElement):
        return f.n
    raise ValueError("cannot infer the dimension of a scalar; pass a geometry")


def _multi_indices(n: int, total: int):
    if n == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _multi_indices(n - 1, total - first):
            yield (first,) + rest


def quantum_jet_torus_closed(f, trunc: Truncation = DEFAULT_TRUNC, geom: Geometry | None = None) -> WeylElement:
    """Taylor expansion sum d_x^a d_y^b f / (a! b!) u^a cu^b, termwise in hbar."""
    geom = geom or Geometry.torus(_dim_of(f))
    n = geom.n
    terms = []
    for h, fh in as_hbar_series(f, n).items():
        for w in range(trunc.max_total_weight - h + 1):
            for idx in _multi_indices(2 * n, w):
                a, b = idx[:n], idx[n:]
                c = trig_derivative_multi(fh, a, b) * (1.0 / math.prod(math.factorial(i) for i in idx))
                if c:
                    terms.append(((), (), h, a, b, c))
    return WeylElement.from_terms(geom, terms, trunc)


# -- star product ----------------------------------------------------------------


def star_product(f, g, geom: Geometry | None = None, order: int = 4, jet_weight: int | None = None) -> dict[int, TrigPoly]:
    """f * g = pi_0(J_f *F J_g) up to hbar^order.

    Output terms of the fibre product have weight >= either input weight, so
    jets of total weight ``order`` already determine the result; ``jet_weight``
    can raise this for stability checks.
    """
    geom = geom or Geometry.torus(_dim_of(f))
    trunc = Truncation(order if jet_weight is None else jet_weight, order)
    Jf = quantum_jet(f, geom, trunc).jet
    Jg = quantum_jet(g, geom, trunc).jet
    # only the u-free part of J_f and the cu-free part of J_g reach pi_0
    left = Jf.filter((Jf.mask == 0) & (Jf.u.sum(1) == 0))
    right = Jg.filter((Jg.mask == 0) & (Jg.cu.sum(1) == 0))
    out = element_series(weyl_star(left, right))
    return {h: c for h, c in sorted(out.items()) if h <= order}


def poisson_bracket(f: TrigPoly, g: TrigPoly, geom: Geometry | None = None) -> TrigPoly:
    """{f, g} = W[j][i] (d_{y_j} f d_{x_i} g - d_{y_j} g d_{x_i} f)."""
    geom = geom or Geometry.torus(f.n)
    W = geom.omega_inv
    out = TrigPoly.zero(f.n)
    for j in range(f.n):
        for i in range(f.n):
            if W[j, i]:
                term = trig_derivative(f, ("y", j)) * trig_derivative(g, ("x", i))
                term = term - trig_derivative(g, ("y", j)) * trig_derivative(f, ("x", i))
                out = out + term * W[j, i]
    return out


# -- quantizable functions --------------------------------------------------------


@dataclass(frozen=True)
class QuantizableVerdict:
    status: str  # "order" | "not_quantizable" | "undetermined"
    order: int | None = None
    witness: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        out: dict = {"status": self.status}
        if self.order is not None:
            out["order"] = self.order
        if self.witness is not None:
            out["witness"] = list(self.witness)
        return out

    def __str__(self):
        if self.status == "order":
            return f"order {self.order}"
        if self.status == "not_quantizable":
            return f"not quantizable; witness ({self.witness[0]},{self.witness[1]})"
        return "undetermined at this truncation"


def classify_quantizable(f, geom: Geometry | None = None, trunc: Truncation = DEFAULT_TRUNC, tol: float = 1e-12) -> QuantizableVerdict:
    """Smallest r >= hbar-degree with (J_f)_{r+1,0} = 0.

    A persistent nonzero component is only certified when some hbar
    coefficient depends on y (its pure cu-Taylor terms never vanish).
    """
    geom = geom or Geometry.torus(_dim_of(f))
    series = as_hbar_series(f, geom.n)
    deg = max(series, default=0)
    jet = quantum_jet(series or TrigPoly.zero(geom.n), geom, trunc).jet
    scale = max(1.0, jet.max_abs())
    witness = None
    for r in range(deg, trunc.max_total_weight):
        comp = double_weight_component(jet, r + 1, 0)
        if comp.max_abs() <= tol * scale:
            return QuantizableVerdict("order", order=r)
        if witness is None:
            witness = (r + 1, 0)
    y_dependent = any(c.depends_on_y() for c in series.values())
    if witness is not None and y_dependent:
        return QuantizableVerdict("not_quantizable", witness=witness)
    return QuantizableVerdict("undetermined")


# -- classical jets and the level-k action -------------------------------------------


def _x_only_d(a: WeylElement) -> WeylElement:
    """Q-direction covariant derivative sum_i v^i d/dx_i (gauge nabla_x = d/dx)."""
    n = a.n
    out_r, out_c = [a.rows[:0]], [a.coefs[:0]]
    for i in range(n):
        freq = a.modes[:, i]
        rows, c = _insert_form(a.rows, a.coefs * (2j * math.pi * freq), i, freq != 0)
        out_r.append(rows)
        out_c.append(c)
    return a._like(np.concatenate(out_r), np.concatenate(out_c))


def classical_jet(s: TrigPoly, k: int = 1, trunc: Truncation = DEFAULT_TRUNC, geom: Geometry | None = None) -> JetResult:
    """J_s = sum_r (dQ^{-1} nabla)^r s.

    In the global trivialization used here the Q-direction covariant
    derivative is d/dx at every level k, so ``k`` only labels the bundle.
    """
    geom = geom or Geometry.torus(s.n)
    if k <= 0:
        raise ValueError("level k must be a positive integer")
    term = series_element(s, geom, trunc)
    jet = term
    for _ in range(trunc.max_total_weight):
        term = hodge_apply("dQ_inv", _x_only_d(term))
        if not len(term):
            break
        jet = jet + term
    # residual: the jet is flat for nabla - dQ along Q
    resid = (_x_only_d(jet) - hodge_apply("dQ", jet))
    resid = resid.filter(jet_weight_mask(resid, trunc.max_total_weight - 1))
    return JetResult(jet, {0: s}, trunc, resid.max_abs())


def jet_weight_mask(a: WeylElement, wmax: int) -> np.ndarray:
    return a.total_weight() <= wmax


def _section_value(a: WeylElement) -> TrigPoly:
    if len(a) and a.mask.any():
        raise ValueError("action result carries form factors; expected a section component")
    n = a.n
    out = TrigPoly.zero(n)
    for t in a.terms():
        out = out + t.coeff
    return out


def _as_polarized_element(a, geom: Geometry, trunc: Truncation) -> WeylElement:
    if isinstance(a, WeylElement):
        return a
    verdict = classify_quantizable(a, geom, trunc)
    if verdict.status != "order":
        raise ValueError(f"acting function has no finite polarized weight ({verdict})")
    return quantum_jet(a, geom, trunc).jet


def act_polarized(a, s: TrigPoly, k: int, geom: Geometry | None = None, trunc: Truncation | None = None) -> TrigPoly:
    """a (*)_k s = pi_Q(a (*)F_k J_s), with hbar evaluated at i/k."""
    if isinstance(a, WeylElement):
        geom, trunc = a.geometry, a.trunc
    geom = geom or Geometry.torus(s.n)
    trunc = trunc or DEFAULT_TRUNC
    a = _as_polarized_element(a, geom, trunc)
    if len(a) and a.mask.any():
        raise ValueError("acting element must be a 0-form")
    Js = classical_jet(s, k, a.trunc, geom).jet
    return _section_value(hodge_apply("piQ", fibrewise_act(a, Js, k)))


def duality_matrix(geom: Geometry, k: int) -> np.ndarray:
    """vc^j -> sum_i M[j][i] d/dx_i with M = (i/k) omega^{-1}."""
    return (1j / k) * geom.omega_inv


def act_polarized_covariant(a: WeylElement, s: TrigPoly, k: int) -> TrigPoly:
    """Route through pi_Q(a) at hbar = i/k and the higher covariant derivatives of s."""
    if len(a) and a.mask.any():
        raise ValueError("acting element must be a 0-form")
    geom = a.geometry
    M = duality_matrix(geom, k)
    pa = hodge_apply("piQ", a)
    out = TrigPoly.zero(s.n)
    cache: dict = {}

    def apply_cu(cu):
        if cu in cache:
            return cache[cu]
        if not any(cu):
            val = s
        else:
            j = next(i for i, c in enumerate(cu) if c)
            lower = list(cu)
            lower[j] -= 1
            prev = apply_cu(tuple(lower))
            val = TrigPoly.zero(s.n)
            for i in range(s.n):
                if M[j, i]:
                    val = val + trig_derivative(prev, ("x", i)) * M[j, i]
        cache[cu] = val
        return val

    for t in pa.terms():
        out = out + t.coeff * apply_cu(t.cuexp) * ((1j / k) ** t.hpow)
    return out


def kostant_souriau(f0: TrigPoly, f1: TrigPoly, s: TrigPoly, k: int, geom: Geometry | None = None) -> TrigPoly:
    """f0 s + (i/k) f1 s + (i/k) nabla_{X_f0} s with iota_X omega = d f0.

    Polarized sections have vanishing P-derivatives, so only the Q-part
    a^i = W[j][i] d_{y_j} f0 of the Hamiltonian field acts.
    """
    geom = geom or Geometry.torus(s.n)
    n = geom.n
    for i in range(n):
        for j in range(i, n):
            dd = trig_derivative(trig_derivative(f0, ("y", i)), ("y", j))
            if dd:
                raise ValueError(f"f0 does not preserve the polarization: d2 f0/dy{i + 1}dy{j + 1} != 0")
    if f1.depends_on_y():
        raise ValueError("f1 is not constant along the polarization")
    W = geom.omega_inv
    lam = 1j / k
    out = f0 * s + f1 * s * lam
    for i in range(n):
        ai = TrigPoly.zero(n)
        for j in range(n):
            if W[j, i]:
                ai = ai + trig_derivative(f0, ("y", j)) * W[j, i]
        if ai:
            out = out + ai * trig_derivative(s, ("x", i)) * lam
    return out


def hamiltonian_field(f0: TrigPoly, geom: Geometry | None = None) -> tuple[list[TrigPoly], list[TrigPoly]]:
    """Components (a^i, b^j) of X_f with iota_X omega = df."""
    geom = geom or Geometry.torus(f0.n)
    W = geom.omega_inv
    n = geom.n
    a = [sum((trig_derivative(f0, ("y", j)) * W[j, i] for j in range(n)), TrigPoly.zero(n)) for i in range(n)]
    b = [sum((trig_derivative(f0, ("x", i)) * (-W[j, i]) for i in range(n)), TrigPoly.zero(n)) for j in range(n)]
    return a, b


# -- recursion for the curvature-type 1-form ---------------------------------------


def _validate_I(I: Mapping, geom: Geometry) -> dict:
    n = geom.n
    clean: dict = {}
    for r, comp in I.items():
        r = int(r)
        if r < 2:
            raise ValueError(f"I tensor degree must be >= 2, got {r}")
        clean[r] = {}
        for l, pair in comp.items():
            l = int(l)
            if not 0 <= l < n:
                raise ValueError(f"I tensor index l={l} outside 0..{n - 1}")
            IP, IQ = pair
            for name, el, want in (("I_P", IP, "p"), ("I_Q", IQ, "q")):
                if not len(el):
                    continue
                if el.cu.any() or el.h.any():
                    raise ValueError(f"{name} of I_({r}) must not contain cu or hbar")
                if not np.all(el.u.sum(1) == r):
                    raise ValueError(f"{name} of I_({r}) must be homogeneous of u-degree {r}")
                deg = np.array([bin(int(m)).count("1") for m in el.mask])
                if not np.all(deg == 1):
                    raise ValueError(f"{name} of I_({r}) must be a 1-form")
                in_p = el.mask >= (1 << n)
                if want == "p" and not in_p.all():
                    raise ValueError(f"I_P of I_({r}) must be a P*-valued 1-form")
                if want == "q" and in_p.any():
                    raise ValueError(f"I_Q of I_({r}) must be a Q*-valued 1-form")
            clean[r][l] = (IP, IQ)
    return clean


def iota_I(Ir: Mapping, r: int, F: WeylElement, rprime: int) -> WeylElement:
    """((1/(r+r')) I_P^l + (1/(r+r'+1)) I_Q^l) . iota_{v_l} F."""
    out = WeylElement.zero(F.geometry, F.trunc)
    for l, (IP, IQ) in Ir.items():
        rows, c = _contract_form(F.rows, F.coefs, l)
        iF = WeylElement(F.geometry, rows, c, F.trunc)
        if not len(iF):
            continue
        coef = IP.with_trunc(F.trunc) * (1.0 / (r + rprime)) + IQ.with_trunc(F.trunc) * (1.0 / (r + rprime + 1))
        out = out + classical_product(coef, iF)
    return out


def kapranov_F(R_E: WeylElement, I: Mapping | None = None, steps: int = 3) -> list[WeylElement]:
    """F_1 = dQ^{-1} R_E, F_{r+1} = dQ^{-1} d F_r + sum_{i=1}^{r-1} iota_{I_(i+1)} F_{r-i}."""
    geom = R_E.geometry
    if len(R_E):
        deg = np.array([bin(int(m)).count("1") for m in R_E.mask])
        if not np.all(deg == 2) or R_E.u.any() or R_E.cu.any() or R_E.h.any():
            raise ValueError("R_E must be a scalar-valued 2-form")
    trunc = Truncation(max(steps + 2, R_E.trunc.max_total_weight), R_E.trunc.max_hbar)
    R = R_E.with_trunc(trunc)
    Ic = _validate_I(I or {}, geom)
    Ic = {r: {l: (p.with_trunc(trunc), q.with_trunc(trunc)) for l, (p, q) in comp.items()} for r, comp in Ic.items()}
    Fs = [hodge_apply("dQ_inv", R)]
    for r in range(1, steps):
        nxt = hodge_apply("dQ_inv", exterior_d(Fs[r - 1]))
        for i in range(1, r):
            if i + 1 in Ic:
                nxt = nxt + iota_I(Ic[i + 1], i + 1, Fs[r - i - 1], r - i)
        Fs.append(nxt)
    return Fs


def operator_symbol(a: WeylElement, k: int) -> dict[tuple[int, ...], TrigPoly]:
    """Coefficients c_g with a (*)_k s = sum_g c_g d_x^g s for 0-form ``a``.

    Each cu^b term becomes prod_j (sum_i M[j][i] d_{x_i})^{b_j} with the
    duality matrix M, expanded into commuting derivative monomials.
    """
    if len(a) and a.mask.any():
        raise ValueError("acting element must be a 0-form")
    n = a.n
    M = duality_matrix(a.geometry, k)
    zero = (0,) * n
    expansions: dict = {zero: {zero: 1.0 + 0j}}

    def expand(cu):
        if cu in expansions:
            return expansions[cu]
        j = next(i for i, c in enumerate(cu) if c)
        lower = list(cu)
        lower[j] -= 1
        prev = expand(tuple(lower))
        out: dict = {}
        for g, c in prev.items():
            for i in range(n):
                if M[j, i]:
                    gi = list(g)
                    gi[i] += 1
                    gi = tuple(gi)
                    out[gi] = out.get(gi, 0j) + c * M[j, i]
        expansions[cu] = out
        return out

    symbol: dict = {}
    for t in hodge_apply("piQ", a).terms():
        scale = (1j / k) ** t.hpow
        for g, c in expand(t.cuexp).items():
            symbol[g] = symbol.get(g, TrigPoly.zero(n)) + t.coeff * (c * scale)
    return {g: c for g, c in symbol.items() if c}
