"""Coefficient rings: trigonometric polynomials on the torus and Gaussian
Schwartz profiles on R^n.

A :class:`TrigPoly` in dimension ``n`` is a finite sum

    sum_{(q, p)} c_{q,p} exp(2 pi i (<q, x> + <p, y>))

stored as a dict keyed by :class:`FourierMode`.  Coefficients are complex
doubles; entries with ``|c| < ZERO_TOL`` are dropped on normalization.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

ZERO_TOL = 1e-15
TWO_PI = 2.0 * math.pi
MAX_DERIV_ORDER = 8


class FourierMode(NamedTuple):
    """Frequency of one exponential: ``qx`` pairs with x, ``py`` with y."""

    qx: tuple[int, ...]
    py: tuple[int, ...]

    @classmethod
    def of(cls, qx, py) -> "FourierMode":
        qx = (int(qx),) if np.isscalar(qx) else tuple(int(v) for v in qx)
        py = (int(py),) if np.isscalar(py) else tuple(int(v) for v in py)
        if len(qx) != len(py) or not qx:
            raise ValueError(f"mode vectors must share a dimension >= 1, got {qx}, {py}")
        return cls(qx, py)

    @property
    def n(self) -> int:
        return len(self.qx)

    def __add__(self, other):  # type: ignore[override]
        return FourierMode(
            tuple(a + b for a, b in zip(self.qx, other.qx)),
            tuple(a + b for a, b in zip(self.py, other.py)),
        )

    def flat(self) -> tuple[int, ...]:
        return self.qx + self.py


def _clean(terms: dict) -> dict:
    return {m: c for m, c in terms.items() if abs(c) >= ZERO_TOL}


class TrigPoly:
    """Finite Fourier sum on the 2n-torus with complex coefficients."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[FourierMode, complex] | None = None):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        self.n = n
        clean = {}
        for mode, c in (terms or {}).items():
            if not isinstance(mode, FourierMode):
                mode = FourierMode.of(*mode)
            if mode.n != n:
                raise ValueError(f"mode {mode} does not have dimension {n}")
            clean[mode] = clean.get(mode, 0j) + complex(c)
        self.terms = _clean(clean)

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> "TrigPoly":
        return cls(n)

    @classmethod
    def const(cls, n: int, c: complex = 1.0) -> "TrigPoly":
        return cls(n, {FourierMode((0,) * n, (0,) * n): c})

    @classmethod
    def mode(cls, qx, py, c: complex = 1.0) -> "TrigPoly":
        m = FourierMode.of(qx, py)
        return cls(m.n, {m: c})

    @classmethod
    def from_records(cls, records: Sequence[Mapping], n: int | None = None) -> "TrigPoly":
        """Build from config literals ``[{qx:[...], py:[...], re:..., im:...}, ...]``."""
        terms: dict[FourierMode, complex] = {}
        for i, rec in enumerate(records):
            try:
                m = FourierMode.of(rec["qx"], rec["py"])
                c = complex(float(rec.get("re", 0.0)), float(rec.get("im", 0.0)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"trig-poly record {i}: {exc}") from exc
            if n is None:
                n = m.n
            terms[m] = terms.get(m, 0j) + c
        if n is None:
            raise ValueError("empty trig-poly literal needs an explicit dimension")
        return cls(n, terms)

    def to_records(self) -> list[dict]:
        return [
            {"qx": list(m.qx), "py": list(m.py), "re": c.real, "im": c.imag}
            for m, c in sorted(self.terms.items())
        ]

    # -- arithmetic -------------------------------------------------------
    def _check(self, other: "TrigPoly") -> None:
        if not isinstance(other, TrigPoly):
            raise TypeError(f"expected TrigPoly, got {type(other).__name__}")
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if not isinstance(other, TrigPoly):
            other = TrigPoly.const(self.n, other)
        return trig_combine(self, other, "add")

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly(self.n, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, TrigPoly):
            other = TrigPoly.const(self.n, other)
        return trig_combine(self, -other, "add")

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TrigPoly):
            return trig_combine(self, other, "mul")
        other = complex(other)
        return TrigPoly(self.n, {m: c * other for m, c in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, TrigPoly):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"TrigPoly({format_trig(self)})"

    # -- queries ----------------------------------------------------------
    def max_abs(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def depends_on_y(self) -> bool:
        return any(any(m.py) for m in self.terms)

    def distance(self, other: "TrigPoly") -> float:
        """Max coefficient difference."""
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(k, 0j) - other.terms.get(k, 0j)) for k in keys), default=0.0)

    def __call__(self, x: Sequence[float], y: Sequence[float]) -> complex:
        total = 0j
        for m, c in self.terms.items():
            phase = sum(q * xi for q, xi in zip(m.qx, x)) + sum(p * yi for p, yi in zip(m.py, y))
            total += c * cmath.exp(1j * TWO_PI * phase)
        return total

    def eval_x(self, x) -> np.ndarray:
        """Evaluate a y-independent polynomial on an array of x points, shape (..., n)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0], dtype=complex)
        for m, c in self.terms.items():
            if any(m.py):
                raise ValueError("eval_x needs a y-independent polynomial")
            out += c * np.exp(1j * TWO_PI * (x @ np.asarray(m.qx, dtype=float)))
        return out


def trig_combine(a: TrigPoly, b: TrigPoly, mode: str) -> TrigPoly:
    """Pointwise sum (``mode='add'``) or product (``mode='mul'``)."""
    a._check(b)
    if mode == "add":
        out = dict(a.terms)
        for m, c in b.terms.items():
            out[m] = out.get(m, 0j) + c
        return TrigPoly(a.n, out)
    if mode == "mul":
        out = {}
        for ma, ca in a.terms.items():
            for mb, cb in b.terms.items():
                m = ma + mb
                out[m] = out.get(m, 0j) + ca * cb
        return TrigPoly(a.n, out)
    raise ValueError(f"unknown combine mode {mode!r}")


def trig_derivative(a: TrigPoly, axis: str | tuple[str, int]) -> TrigPoly:
    """Differentiate along ``('x', i)`` or ``('y', j)`` (0-based), or ``'x1'``-style labels."""
    kind, idx = _parse_axis(axis)
    if not 0 <= idx < a.n:
        raise ValueError(f"axis index {idx} out of range for n={a.n}")
    out = {}
    for m, c in a.terms.items():
        freq = m.qx[idx] if kind == "x" else m.py[idx]
        if freq:
            out[m] = c * (2j * math.pi * freq)
    return TrigPoly(a.n, out)


def trig_derivative_multi(a: TrigPoly, dx: Sequence[int], dy: Sequence[int] | None = None) -> TrigPoly:
    """Apply d^dx/dx d^dy/dy in one pass; orders are per-axis counts."""
    dy = dy if dy is not None else (0,) * a.n
    out = {}
    for m, c in a.terms.items():
        factor = 1.0 + 0j
        for q, k in zip(m.qx, dx):
            factor *= (2j * math.pi * q) ** k
        for p, k in zip(m.py, dy):
            factor *= (2j * math.pi * p) ** k
        if factor != 0:
            out[m] = c * factor
    return TrigPoly(a.n, out)


def _parse_axis(axis) -> tuple[str, int]:
    if isinstance(axis, str):
        kind, idx = axis[0], int(axis[1:]) - 1
    else:
        kind, idx = axis
    if kind not in ("x", "y"):
        raise ValueError(f"axis must be x or y, got {axis!r}")
    return kind, idx


def format_trig(a: TrigPoly) -> str:
    if not a.terms:
        return "0"
    parts = []
    for m, c in sorted(a.terms.items()):
        parts.append(f"({c.real:.12g}{c.imag:+.12g}j)e({list(m.qx)},{list(m.py)})")
    return " + ".join(parts)


# -- formal power series in hbar with trig-poly coefficients ------------------

HbarSeries = dict  # int -> TrigPoly


def as_hbar_series(f, n: int | None = None) -> dict[int, TrigPoly]:
    """Normalize TrigPoly / scalar / {h: TrigPoly} to a zero-free hbar series."""
    if isinstance(f, TrigPoly):
        return {0: f} if f else {}
    if isinstance(f, Mapping):
        return {int(h): c for h, c in f.items() if c}
    if n is None:
        raise ValueError("scalar series need an explicit dimension")
    c = TrigPoly.const(n, f)
    return {0: c} if c else {}


def series_distance(a: Mapping[int, TrigPoly], b: Mapping[int, TrigPoly], n: int) -> float:
    zero = TrigPoly.zero(n)
    return max((a.get(h, zero).distance(b.get(h, zero)) for h in set(a) | set(b)), default=0.0)


def series_max_abs(a: Mapping[int, TrigPoly]) -> float:
    return max((c.max_abs() for c in a.values()), default=0.0)


# -- Schwartz profiles -----------------------------------------------------------

MultiIndex = tuple[int, ...]


def _poly_mul_linear(poly: dict, axis: int, n: int) -> dict:
    out: dict = {}
    for idx, c in poly.items():
        j = list(idx)
        j[axis] += 1
        j = tuple(j)
        out[j] = out.get(j, 0j) + c
    return out


def _poly_diff(poly: dict, axis: int) -> dict:
    out: dict = {}
    for idx, c in poly.items():
        if idx[axis]:
            j = list(idx)
            j[axis] -= 1
            j = tuple(j)
            out[j] = out.get(j, 0j) + c * idx[axis]
    return out


def _shift_poly(poly: Mapping[MultiIndex, complex], center: Sequence[float]) -> dict:
    """Rewrite P(x) as a polynomial in t = x - center."""
    out: dict = {}
    for idx, c in poly.items():
        # x_i^a = (t_i + c_i)^a
        ranges = [range(a + 1) for a in idx]
        for sub in product(*ranges):
            coef = complex(c)
            for a, b, ci in zip(idx, sub, center):
                coef *= math.comb(a, b) * ci ** (a - b)
            out[sub] = out.get(sub, 0j) + coef
    return out


@dataclass(frozen=True)
class SchwartzProfile:
    """x -> P(x) exp(-alpha |x - center|^2).

    ``poly`` maps multi-indices to coefficients of monomials in x.  Internally
    the polynomial is kept in the shifted variable ``t = x - center`` so that
    translation only moves the center.
    """

    center: tuple[float, ...]
    alpha: float
    poly: Mapping[MultiIndex, complex] = field(default=None)  # type: ignore[assignment]
    _tpoly: dict = field(default=None, compare=False, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        if not center:
            raise ValueError("profile center needs dimension >= 1")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        n = len(center)
        poly = self.poly if self.poly is not None else {(0,) * n: 1.0}
        poly = {tuple(int(i) for i in k): complex(v) for k, v in poly.items()}
        for k in poly:
            if len(k) != n:
                raise ValueError(f"poly index {k} does not have dimension {n}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "poly", poly)
        if self._tpoly is None:
            object.__setattr__(self, "_tpoly", _clean_poly(_shift_poly(poly, center)))
        object.__setattr__(self, "_cache", {})

    @classmethod
    def gaussian(cls, n: int = 1, center=None, alpha: float = 1.0, scale: complex = 1.0):
        center = tuple(center) if center is not None else (0.0,) * n
        return cls(center, alpha, {(0,) * len(center): scale})

    @classmethod
    def from_record(cls, rec: Mapping) -> "SchwartzProfile":
        try:
            center = tuple(float(c) for c in rec["center"])
            poly = {}
            for term in rec.get("poly", [{"idx": [0] * len(center), "re": 1.0}]):
                idx = tuple(int(i) for i in term["idx"])
                poly[idx] = poly.get(idx, 0j) + complex(float(term.get("re", 0.0)), float(term.get("im", 0.0)))
            return cls(center, float(rec["alpha"]), poly)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad Schwartz profile literal: {exc}") from exc

    @property
    def n(self) -> int:
        return len(self.center)

    def translate(self, q: Sequence[float]) -> "SchwartzProfile":
        """Profile of x -> self(x - q)."""
        center = tuple(c + float(s) for c, s in zip(self.center, q))
        return SchwartzProfile(center, self.alpha, _shift_poly_back(self._tpoly, center), self._tpoly)

    def deriv_poly(self, orders: MultiIndex) -> dict:
        """Polynomial Q in t with d^orders [P e^{-a t^2}] = Q(t) e^{-a t^2}."""
        cache = self.__dict__["_cache"]
        orders = tuple(orders)
        if orders in cache:
            return cache[orders]
        if sum(orders) == 0:
            result = self._tpoly
        else:
            axis = next(i for i, o in enumerate(orders) if o)
            lower = list(orders)
            lower[axis] -= 1
            base = self.deriv_poly(tuple(lower))
            res = _poly_diff(base, axis)
            for idx, c in _poly_mul_linear(base, axis, self.n).items():
                res[idx] = res.get(idx, 0j) - 2.0 * self.alpha * c
            result = _clean_poly(res)
        cache[orders] = result
        return result

    def eval_many(self, x, orders: MultiIndex | None = None) -> np.ndarray:
        """Vectorized evaluation at points of shape (m, n)."""
        x = np.asarray(x, dtype=float).reshape(-1, self.n)
        orders = tuple(orders) if orders is not None else (0,) * self.n
        t = x - np.asarray(self.center)
        q = self.deriv_poly(orders)
        val = np.zeros(len(t), dtype=complex)
        for idx, c in q.items():
            val += c * np.prod(t ** np.asarray(idx), axis=1)
        return val * np.exp(-self.alpha * np.sum(t * t, axis=1))


def _clean_poly(poly: dict) -> dict:
    return {k: v for k, v in poly.items() if v != 0}


def _shift_poly_back(tpoly: Mapping, center: Sequence[float]) -> dict:
    # Coefficients in x for bookkeeping (poly field); evaluation uses tpoly.
    return _shift_poly(tpoly, [-c for c in center])


def deriv_counts(deriv_axes: Sequence[int] | Mapping[int, int], n: int) -> MultiIndex:
    """Accept either per-axis counts (length n) or a list of 1-based axes."""
    if isinstance(deriv_axes, Mapping):
        counts = [0] * n
        for ax, k in deriv_axes.items():
            counts[int(ax)] += int(k)
        return tuple(counts)
    return tuple(int(v) for v in deriv_axes) if len(deriv_axes) == n else _axes_to_counts(deriv_axes, n)


def _axes_to_counts(axes: Iterable[int], n: int) -> MultiIndex:
    counts = [0] * n
    for ax in axes:
        if not 1 <= ax <= n:
            raise ValueError(f"derivative axis {ax} outside 1..{n}")
        counts[ax - 1] += 1
    return tuple(counts)


def schwartz_eval(
    p: SchwartzProfile,
    x: Sequence[float],
    deriv_axes: Sequence[int] = (),
    max_order: int = MAX_DERIV_ORDER,
) -> complex:
    """Exact partial derivative of the profile at one point.

    ``deriv_axes`` is a multi-index of per-axis derivative counts (length n);
    an empty sequence means no derivative.
    """
    orders = tuple(deriv_axes) if len(deriv_axes) else (0,) * p.n
    if len(orders) != p.n:
        raise ValueError(f"derivative multi-index {orders} does not have dimension {p.n}")
    if any(o < 0 for o in orders):
        raise ValueError("negative derivative order")
    if sum(orders) > max_order:
        raise ValueError(f"derivative order {sum(orders)} exceeds max {max_order}")
    x = tuple(float(v) for v in np.atleast_1d(x))
    if len(x) != p.n:
        raise ValueError(f"point {x} does not have dimension {p.n}")
    t = [xi - ci for xi, ci in zip(x, p.center)]
    total = 0j
    for idx, c in p.deriv_poly(orders).items():
        term = c
        for ti, a in zip(t, idx):
            term *= ti**a
        total += term
    return total * math.exp(-p.alpha * sum(ti * ti for ti in t))
