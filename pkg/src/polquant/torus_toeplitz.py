"""Toeplitz-type operators on the standard symplectic torus, acting on the
distributional basis of polarized states, and their asymptotic expansion.

Test sections are described by their Weil-Brezin coefficients: one
Schwartz profile per residue class ``[m]``, extended to all ``m`` by the
shift rule ``tau_{m + k q}(x) = tau_m(x - q)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np

from .coeff_rings import MAX_DERIV_ORDER, FourierMode, SchwartzProfile, TrigPoly, schwartz_eval, trig_derivative_multi
from .fedosov_flat import operator_symbol, quantum_jet
from .weyl_algebra import Geometry, Truncation, double_weight_component

IntVec = tuple[int, ...]


def _vec(m, n: int | None = None) -> IntVec:
    v = (int(m),) if np.isscalar(m) else tuple(int(x) for x in m)
    if n is not None and len(v) != n:
        raise ValueError(f"index {v} does not have dimension {n}")
    return v


def wb_reduce(m, k: int) -> tuple[IntVec, IntVec]:
    """m = m0 + k q with m0 in {0..k-1}^n (floor division)."""
    if k <= 0:
        raise ValueError("level k must be a positive integer")
    m = _vec(m)
    return tuple(x % k for x in m), tuple(x // k for x in m)


@dataclass(frozen=True)
class PolarizedState:
    k: int
    n: int
    coeffs: Mapping[IntVec, complex]

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("level k must be a positive integer")
        canon: dict = {}
        for m, c in self.coeffs.items():
            m0, _ = wb_reduce(_vec(m, self.n), self.k)
            canon[m0] = canon.get(m0, 0j) + complex(c)
        object.__setattr__(self, "coeffs", {m: c for m, c in sorted(canon.items()) if c != 0})

    @classmethod
    def basis(cls, k: int, m, n: int = 1) -> "PolarizedState":
        return cls(k, n, {_vec(m, n): 1.0})


@dataclass(frozen=True)
class TestSection:
    """Weil-Brezin coefficients: ``profiles[m0]`` for classes m0 in {0..k-1}^n."""

    __test__ = False  # not a pytest class

    k: int
    n: int
    profiles: Mapping[IntVec, SchwartzProfile]

    def __post_init__(self):
        canon = {}
        for m, p in self.profiles.items():
            if p.n != self.n:
                raise ValueError("profile dimension mismatch")
            canon[wb_reduce(_vec(m, self.n), self.k)[0]] = p
        object.__setattr__(self, "profiles", canon)

    @classmethod
    def uniform(cls, k: int, template: SchwartzProfile) -> "TestSection":
        n = template.n
        return cls(k, n, {m: template for m in product(range(k), repeat=n)})

    def coefficient(self, m) -> tuple[SchwartzProfile | None, IntVec]:
        """(profile, shift q) such that tau_m(x) = profile(x - q)."""
        m0, q = wb_reduce(_vec(m, self.n), self.k)
        return self.profiles.get(m0), q

    def tilde(self, m, x: Sequence[float], orders: Sequence[int] | None = None) -> complex:
        prof, q = self.coefficient(m)
        if prof is None:
            return 0j
        pt = [xi - qi for xi, qi in zip(x, q)]
        return schwartz_eval(prof, pt, tuple(orders) if orders is not None else ())


def fiber_fourier(f: TrigPoly) -> dict[IntVec, TrigPoly]:
    """f = sum_p fhat_p(x) e^{2 pi i <p, y>}."""
    n = f.n
    out: dict = {}
    for mode, c in f.terms.items():
        out.setdefault(mode.py, {})[FourierMode(mode.qx, (0,) * n)] = c
    return {p: TrigPoly(n, t) for p, t in sorted(out.items())}


def fiber_reassemble(parts: Mapping[IntVec, TrigPoly], n: int) -> TrigPoly:
    terms = {}
    for p, fp in parts.items():
        for mode, c in fp.terms.items():
            terms[FourierMode(mode.qx, tuple(p))] = c
    return TrigPoly(n, terms)


def pair_sigma(k: int, m, tau: TestSection) -> complex:
    """<sigma_k^[m], tau> = tau_m(m / k)."""
    m = _vec(m, tau.n)
    return tau.tilde(m, [mi / k for mi in m])


def _product_derivative(fp: TrigPoly, tau: TestSection, idx: IntVec, point, alpha: IntVec) -> complex:
    """d^alpha (fp * tau_idx) at ``point`` by the Leibniz rule."""
    total = 0j
    for gamma in product(*(range(a + 1) for a in alpha)):
        binom = math.prod(math.comb(a, g) for a, g in zip(alpha, gamma))
        rest = tuple(a - g for a, g in zip(alpha, gamma))
        fval = trig_derivative_multi(fp, gamma)(point, (0.0,) * len(point))
        if fval == 0:
            continue
        total += binom * fval * tau.tilde(idx, point, rest)
    return total


def toeplitz_pairing(f: TrigPoly, k: int, m, tau: TestSection) -> complex:
    """<T_{f,k} sigma^[m], tau> = sum_p (fhat_p tau_{m+p})((m+p)/k)."""
    m = _vec(m, f.n)
    total = 0j
    zero = (0,) * f.n
    for p, fp in fiber_fourier(f).items():
        idx = tuple(a + b for a, b in zip(m, p))
        total += _product_derivative(fp, tau, idx, [i / k for i in idx], zero)
    return total


def _compositions(n: int, r: int):
    if n == 1:
        yield (r,)
        return
    for first in range(r, -1, -1):
        for rest in _compositions(n - 1, r - first):
            yield (first,) + rest


def toeplitz_term(f: TrigPoly, r: int, k: int, m, tau: TestSection, max_order: int = MAX_DERIV_ORDER) -> complex:
    """<T_{f,r,k} sigma^[m], tau>.

    The symmetric index sum sum_{i_1..i_r} p_{i_1}..p_{i_r} d_{i_1..i_r} / r!
    is evaluated as sum_{|a| = r} p^a / a! d^a.
    """
    if r < 0 or r > max_order:
        raise ValueError(f"expansion order {r} outside 0..{max_order}")
    m = _vec(m, f.n)
    point = [i / k for i in m]
    total = 0j
    for p, fp in fiber_fourier(f).items():
        if r and not any(p):
            continue
        idx = tuple(a + b for a, b in zip(m, p))
        for alpha in _compositions(f.n, r):
            w = math.prod(pi**ai / math.factorial(ai) for pi, ai in zip(p, alpha))
            if w == 0:
                continue
            total += w * _product_derivative(fp, tau, idx, point, alpha)
    return total / k**r


def toeplitz_term_via_action(f: TrigPoly, r: int, k: int, m, tau: TestSection, geom: Geometry | None = None) -> complex:
    """Same quantity through the weight-r jet component acting on sigma^[m].

    The action is the differential operator sum_g c_g(x, y) d_x^g; against
    tau it pairs weakly as sum_g (-1)^|g| <sigma^[m], d_x^g (c_g tau)>, and a
    y-mode e^{2 pi i <p, y>} in c_g shifts tau_m to tau_{m+p}.
    """
    geom = geom or Geometry.torus(f.n)
    m = _vec(m, f.n)
    w = max(r, 1)
    jet = quantum_jet(f, geom, Truncation(w, w)).jet
    comp = double_weight_component(jet, r, 0)
    point = [i / k for i in m]
    total = 0j
    for g, coeff in operator_symbol(comp, k).items():
        sign = (-1) ** sum(g)
        for mode, c in coeff.terms.items():
            idx = tuple(a + b for a, b in zip(m, mode.py))
            fx = TrigPoly(f.n, {FourierMode(mode.qx, (0,) * f.n): c})
            total += sign * _product_derivative(fx, tau, idx, point, g)
    return total


def pairing_linear(s: PolarizedState, tau: TestSection, fn: Callable[[IntVec], complex]) -> complex:
    return sum((c * fn(m) for m, c in s.coeffs.items()), 0j)


def l1_norm(s: PolarizedState) -> float:
    return float(sum(abs(c) for c in s.coeffs.values()))


# -- seminorm estimate -----------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    step: float = 1e-3
    radius: float | None = None  # default 6 / sqrt(alpha) around the center
    max_points: int = 200_000


def _tail_bound(poly: Mapping[IntVec, complex], alpha: float, R: float) -> float:
    """sup over |t| >= R of |Q(t)| e^{-alpha |t|^2}, bounded monomial-wise."""
    total = 0.0
    for idx, c in poly.items():
        d = sum(idx)
        rho = max(R, math.sqrt(d / (2 * alpha))) if d else R
        total += abs(c) * rho**d * math.exp(-alpha * rho * rho)
    return total


def _profile_sup(prof: SchwartzProfile, orders: IntVec, grid: Grid) -> float:
    n = prof.n
    R = grid.radius if grid.radius is not None else 6.0 / math.sqrt(prof.alpha)
    h = grid.step
    per_dim = int(math.ceil(2 * R / h)) + 1
    if per_dim**n > grid.max_points:
        per_dim = max(3, int(grid.max_points ** (1.0 / n)))
        h = 2 * R / (per_dim - 1)
    axis = np.linspace(-R, R, per_dim)
    pts = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n) + np.asarray(prof.center)
    g = prof.eval_many(pts, orders)
    sq = np.abs(g) ** 2
    # |g|^2 is smooth with vanishing gradient at its maximum: second-order slack
    grads = []
    for i in range(n):
        o = list(orders)
        o[i] += 1
        grads.append(prof.eval_many(pts, tuple(o)))
    hess = 0.0
    for i in range(n):
        for j in range(n):
            o = list(orders)
            o[i] += 1
            o[j] += 1
            gij = prof.eval_many(pts, tuple(o))
            hij = 2 * np.abs(g) * np.abs(gij) + 2 * np.abs(grads[i]) * np.abs(grads[j])
            hess += float(hij.max())
    slack = 0.5 * (n * h * h / 4.0) * hess
    inner = math.sqrt(float(sq.max()) + slack)
    tail = _tail_bound(prof.deriv_poly(orders), prof.alpha, R)
    return max(inner, tail)


def seminorm(tau: TestSection, N: int, grid: Grid | None = None) -> float:
    """Upper estimate of sup |d^a tau_m(x)| over classes, |a| <= N and x."""
    if N < 0 or N + 2 > MAX_DERIV_ORDER:
        raise ValueError(f"seminorm order {N} outside 0..{MAX_DERIV_ORDER - 2}")
    grid = grid or Grid()
    best = 0.0
    seen: dict = {}
    for prof in tau.profiles.values():
        key = (prof.center, prof.alpha, tuple(sorted(prof.poly.items())))
        if key in seen:
            continue
        val = 0.0
        for r in range(N + 1):
            for orders in _compositions(tau.n, r):
                val = max(val, _profile_sup(prof, orders, grid))
        seen[key] = val
        best = max(best, val)
    return best


# -- remainder sweep ----------------------------------------------------------------


@dataclass
class SweepRow:
    k: int
    N: int
    m_class: IntVec
    remainder_abs: float
    l1_norm: float
    seminorm: float
    bound_ratio: float


@dataclass
class SweepReport:
    rows: list[SweepRow] = field(default_factory=list)
    fitted_slope: float | None = None
    max_bound_ratio: float | None = None


DEFAULT_CENTER = 0.5


def default_template(n: int = 1) -> SchwartzProfile:
    """exp(-|x - c|^2) with c = (0.5, ..); off-center so no Taylor coefficient at m/k = 0 vanishes by symmetry."""
    return SchwartzProfile.gaussian(n, center=(DEFAULT_CENTER,) * n)


def gaussian_family(template: SchwartzProfile | None = None, n: int = 1) -> Callable[[int], TestSection]:
    template = template or default_template(n)
    return lambda k: TestSection.uniform(k, template)


def remainder(f: TrigPoly, N: int, k: int, s: PolarizedState, tau: TestSection) -> float:
    def one(m):
        val = toeplitz_pairing(f, k, m, tau)
        for r in range(N + 1):
            val -= toeplitz_term(f, r, k, m, tau)
        return val

    return abs(pairing_linear(s, tau, one))


def remainder_sweep(
    f: TrigPoly,
    N: int,
    k_list: Sequence[int],
    s: Callable[[int], PolarizedState] | None = None,
    tau_family: Callable[[int], TestSection] | None = None,
    grid: Grid | None = None,
    all_classes: bool = False,
) -> SweepReport:
    """Remainder of the order-N expansion for each k, with the normalized bound ratio."""
    k_list = list(k_list)
    if not k_list:
        raise ValueError("k_list must not be empty")
    if any(k <= 0 for k in k_list) or any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise ValueError("k_list must be strictly increasing positive integers")
    n = f.n
    tau_family = tau_family or gaussian_family(n=n)
    report = SweepReport()
    for k in k_list:
        tau = tau_family(k)
        semi = seminorm(tau, N + 1, grid)
        if all_classes:
            states = [PolarizedState.basis(k, m, n) for m in product(range(k), repeat=n)]
        else:
            states = [s(k) if s else PolarizedState.basis(k, (0,) * n, n)]
        for st in states:
            rem = remainder(f, N, k, st, tau)
            l1 = l1_norm(st)
            denom = l1 * semi
            ratio = rem * k ** (N + 1) / denom if denom > 0 else 0.0
            m_class = next(iter(st.coeffs), (0,) * n) if len(st.coeffs) == 1 else tuple()
            report.rows.append(SweepRow(k, N, m_class, rem, l1, semi, ratio))
    try:
        report.fitted_slope, report.max_bound_ratio = fit_decay(report)
    except ValueError:
        report.fitted_slope, report.max_bound_ratio = None, None
    return report


def fit_decay(report: SweepReport) -> tuple[float, float]:
    """Least-squares slope of log(remainder) against log(k), and the max bound ratio."""
    rows = [r for r in report.rows if r.remainder_abs > 0]
    if len(rows) < 3:
        raise ValueError(f"need at least 3 nonzero rows to fit a decay rate, got {len(rows)}")
    x = np.log([r.k for r in rows])
    y = np.log([r.remainder_abs for r in rows])
    slope = float(np.polyfit(x, y, 1)[0])
    return slope, max(r.bound_ratio for r in rows)
