"""Graded Weyl-algebra arithmetic on flat frames.

An element is a finite sum of terms

    hbar^h  v^{I} ^ vc^{J}  u^a  cu^b  c(x, y)

where ``v``/``vc`` are the odd 1-form generators (Q- and P-directions),
``u``/``cu`` the even fibre coordinates and ``c`` a trigonometric
polynomial.  Internally every (term, Fourier mode) pair is one int64 row

    [mask, h, u_0..u_{n-1}, cu_0..cu_{n-1}, qx_0.., py_0..]

with a complex coefficient.  Bits ``0..n-1`` of ``mask`` are the v-forms and
bits ``n..2n-1`` the vc-forms; a mask is read as the ordered wedge
product with v-block first, each block ascending.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .coeff_rings import TWO_PI, ZERO_TOL, FourierMode, TrigPoly, format_trig

MAX_DIM = 4


# -- geometry and truncation ---------------------------------------------------


@dataclass(frozen=True)
class Geometry:
    """Constant symplectic pairing ``omega[i][j] = omega(v_i, vc_j)``."""

    n: int
    omega: tuple[tuple[float, ...], ...]
    flavor: str = "local_flat"

    def __post_init__(self):
        if not 1 <= self.n <= MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {self.n}")
        if self.flavor not in ("torus", "local_flat"):
            raise ValueError(f"unknown geometry flavor {self.flavor!r}")
        om = np.asarray(self.omega, dtype=float)
        if om.shape != (self.n, self.n):
            raise ValueError(f"omega must be {self.n}x{self.n}")
        if self.flavor == "torus" and not np.allclose(om, TWO_PI * np.eye(self.n), rtol=0, atol=1e-14):
            raise ValueError("torus geometry fixes omega = 2*pi*identity")
        if abs(np.linalg.det(om)) < 1e-12:
            raise ValueError("omega must be invertible")
        object.__setattr__(self, "omega", tuple(tuple(float(v) for v in row) for row in om))

    @classmethod
    def torus(cls, n: int = 1) -> "Geometry":
        return cls(n, tuple(tuple(TWO_PI if i == j else 0.0 for j in range(n)) for i in range(n)), "torus")

    @classmethod
    def local_flat(cls, n: int = 1, omega=None) -> "Geometry":
        if omega is None:
            omega = np.eye(n)
        return cls(n, tuple(map(tuple, np.asarray(omega, dtype=float))), "local_flat")

    @property
    def omega_matrix(self) -> np.ndarray:
        return np.asarray(self.omega)

    @property
    def omega_inv(self) -> np.ndarray:
        """``W[j][i]`` with ``sum_j omega[i][j] W[j][l] = delta_il``."""
        return _inverse(self.omega)

    def check(self) -> float:
        """Residual of omega_inv against the identity."""
        return float(np.abs(self.omega_inv @ self.omega_matrix - np.eye(self.n)).max())


@lru_cache(maxsize=None)
def _inverse_cached(omega):
    inv = np.linalg.inv(np.asarray(omega))
    inv.setflags(write=False)
    return inv


def _inverse(omega):
    return _inverse_cached(omega)


@dataclass(frozen=True)
class Truncation:
    max_total_weight: int = 6
    max_hbar: int = 4

    def __post_init__(self):
        if self.max_total_weight < 0 or self.max_hbar < 0:
            raise ValueError("truncation bounds must be non-negative")


DEFAULT_TRUNC = Truncation()


class WeylTerm(NamedTuple):
    vforms: tuple[int, ...]
    pforms: tuple[int, ...]
    hpow: int
    uexp: tuple[int, ...]
    cuexp: tuple[int, ...]
    coeff: TrigPoly


# -- sign / pattern tables ----------------------------------------------------


@lru_cache(maxsize=None)
def wedge_sign_table(n: int) -> np.ndarray:
    """``T[a, b]`` = sign of (form a) ^ (form b) relative to the sorted mask, 0 on overlap."""
    size = 1 << (2 * n)
    table = np.zeros((size, size), dtype=np.int8)
    for a in range(size):
        for b in range(size):
            if a & b:
                continue
            swaps = 0
            for j in range(2 * n):
                if b >> j & 1:
                    swaps += bin(a >> (j + 1)).count("1")
            table[a, b] = -1 if swaps & 1 else 1
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def falling_table(size: int) -> np.ndarray:
    fall = np.zeros((size + 1, size + 1))
    for c in range(size + 1):
        for k in range(c + 1):
            fall[c, k] = math.perm(c, k)
    fall.setflags(write=False)
    return fall


@lru_cache(maxsize=None)
def contraction_patterns(omega: tuple, rmax: int):
    """Group contraction count matrices M by (colsum alpha, rowsum beta).

    coefficient = sum_M prod_{j,i} W[j][i]^M_ji / M_ji!
    """
    W = _inverse(omega)
    n = W.shape[0]
    cells = [(j, i) for j in range(n) for i in range(n) if abs(W[j, i]) > 0]
    groups: dict = {}

    def rec(idx, remaining, counts):
        if idx == len(cells):
            alpha = [0] * n
            beta = [0] * n
            coef = 1.0
            for (j, i), m in zip(cells, counts):
                alpha[i] += m
                beta[j] += m
                coef *= W[j, i] ** m / math.factorial(m)
            key = (tuple(alpha), tuple(beta))
            groups[key] = groups.get(key, 0.0) + coef
            return
        for m in range(remaining + 1):
            rec(idx + 1, remaining - m, counts + [m])

    rec(0, rmax, [])
    keys = sorted(groups)
    alpha = np.array([k[0] for k in keys], dtype=np.int64).reshape(-1, n)
    beta = np.array([k[1] for k in keys], dtype=np.int64).reshape(-1, n)
    r = alpha.sum(1).astype(np.int64)
    coef = np.array([groups[k] for k in keys], dtype=complex)
    keep = np.abs(coef) > 0
    out = tuple(np.ascontiguousarray(x[keep]) for x in (alpha, beta, r, coef))
    for x in out:
        x.setflags(write=False)
    return out


_POPCOUNT = np.array([bin(i).count("1") for i in range(1 << (2 * MAX_DIM))], dtype=np.int64)


def popcount(arr: np.ndarray) -> np.ndarray:
    return _POPCOUNT[np.asarray(arr, dtype=np.int64)]


# -- the element type ---------------------------------------------------------


class WeylElement:
    """Immutable truncated element; rows canonically sorted and merged."""

    __slots__ = ("geometry", "trunc", "rows", "coefs")

    def __init__(self, geometry: Geometry, rows=None, coefs=None, trunc: Truncation = DEFAULT_TRUNC, *, _canonical=False):
        self.geometry = geometry
        self.trunc = trunc
        n = geometry.n
        ncols = 2 + 4 * n
        if rows is None:
            rows = np.zeros((0, ncols), dtype=np.int64)
            coefs = np.zeros(0, dtype=complex)
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, ncols)
        coefs = np.asarray(coefs, dtype=complex).reshape(-1)
        if not _canonical:
            rows, coefs = _canonicalize(rows, coefs, n, trunc)
        rows.setflags(write=False)
        coefs.setflags(write=False)
        self.rows = rows
        self.coefs = coefs

    # column accessors
    @property
    def n(self) -> int:
        return self.geometry.n

    @property
    def mask(self):
        return self.rows[:, 0]

    @property
    def h(self):
        return self.rows[:, 1]

    @property
    def u(self):
        return self.rows[:, 2:2 + self.n]

    @property
    def cu(self):
        return self.rows[:, 2 + self.n:2 + 2 * self.n]

    @property
    def modes(self):
        return self.rows[:, 2 + 2 * self.n:]

    def _like(self, rows, coefs, trunc=None) -> "WeylElement":
        return WeylElement(self.geometry, rows, coefs, trunc or self.trunc)

    # constructors
    @classmethod
    def zero(cls, geometry: Geometry, trunc: Truncation = DEFAULT_TRUNC) -> "WeylElement":
        return cls(geometry, None, None, trunc)

    @classmethod
    def monomial(
        cls,
        geometry: Geometry,
        coeff: TrigPoly | complex = 1.0,
        *,
        u: Sequence[int] | None = None,
        cu: Sequence[int] | None = None,
        h: int = 0,
        v: Sequence[int] = (),
        p: Sequence[int] = (),
        trunc: Truncation = DEFAULT_TRUNC,
    ) -> "WeylElement":
        """One term; ``v``/``p`` list 0-based form indices (any order, sign applied)."""
        return cls.from_terms(geometry, [(tuple(v), tuple(p), h, u, cu, coeff)], trunc)

    @classmethod
    def scalar(cls, geometry: Geometry, coeff: TrigPoly | complex, trunc: Truncation = DEFAULT_TRUNC):
        return cls.monomial(geometry, coeff, trunc=trunc)

    @classmethod
    def from_terms(cls, geometry: Geometry, terms: Iterable, trunc: Truncation = DEFAULT_TRUNC) -> "WeylElement":
        n = geometry.n
        rows, coefs = [], []
        for vforms, pforms, h, uexp, cuexp, coeff in terms:
            uexp = tuple(uexp) if uexp is not None else (0,) * n
            cuexp = tuple(cuexp) if cuexp is not None else (0,) * n
            if len(uexp) != n or len(cuexp) != n:
                raise ValueError(f"exponent vectors must have length {n}")
            if min(uexp + cuexp + (h,)) < 0:
                raise ValueError("negative exponent")
            sign, mask = _order_forms([i for i in vforms] + [n + j for j in pforms], n)
            if sign == 0:
                continue
            if not isinstance(coeff, TrigPoly):
                coeff = TrigPoly.const(n, coeff)
            elif coeff.n != n:
                raise ValueError("coefficient dimension mismatch")
            for mode, c in coeff.terms.items():
                rows.append((mask, h) + uexp + cuexp + mode.qx + mode.py)
                coefs.append(sign * c)
        return cls(geometry, np.array(rows, dtype=np.int64).reshape(-1, 2 + 4 * n), np.array(coefs, dtype=complex), trunc)

    # arithmetic
    def _check(self, other: "WeylElement") -> None:
        if not isinstance(other, WeylElement):
            raise TypeError(f"expected WeylElement, got {type(other).__name__}")
        if other.geometry != self.geometry:
            raise ValueError("geometry mismatch")
        if other.trunc != self.trunc:
            raise ValueError("truncation policy mismatch")

    def __add__(self, other):
        if not isinstance(other, WeylElement):
            other = WeylElement.scalar(self.geometry, other, self.trunc)
        self._check(other)
        return self._like(np.concatenate([self.rows, other.rows]), np.concatenate([self.coefs, other.coefs]))

    __radd__ = __add__

    def __neg__(self):
        return WeylElement(self.geometry, self.rows.copy(), -self.coefs, self.trunc, _canonical=True)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if isinstance(scalar, (WeylElement, TrigPoly)):
            return NotImplemented
        scalar = complex(scalar)
        return self._like(self.rows.copy(), self.coefs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / complex(scalar))

    def __matmul__(self, other):
        return weyl_star(self, other)

    def __len__(self):
        return len(self.rows)

    def __bool__(self):
        return len(self.rows) > 0

    def __eq__(self, other):
        if not isinstance(other, WeylElement):
            return NotImplemented
        return (
            self.geometry == other.geometry
            and self.rows.shape == other.rows.shape
            and bool(np.all(self.rows == other.rows))
            and bool(np.all(self.coefs == other.coefs))
        )

    __hash__ = None  # type: ignore[assignment]

    def with_trunc(self, trunc: Truncation) -> "WeylElement":
        return WeylElement(self.geometry, self.rows.copy(), self.coefs.copy(), trunc)

    # queries
    def max_abs(self) -> float:
        return float(np.abs(self.coefs).max()) if len(self.coefs) else 0.0

    def distance(self, other: "WeylElement") -> float:
        return (self - other).max_abs()

    def rel_error(self, other: "WeylElement") -> float:
        scale = max(self.max_abs(), other.max_abs())
        diff = self.distance(other)
        return diff / scale if scale > 0 else diff

    def filter(self, keep: np.ndarray) -> "WeylElement":
        keep = np.asarray(keep, dtype=bool)
        return WeylElement(self.geometry, self.rows[keep].copy(), self.coefs[keep].copy(), self.trunc, _canonical=True)

    def form_degree(self) -> np.ndarray:
        return popcount(self.mask)

    def polarized_weight(self) -> np.ndarray:
        return self.cu.sum(1) + self.h

    def total_weight(self) -> np.ndarray:
        return self.polarized_weight() + self.u.sum(1)

    def parity_split(self) -> tuple["WeylElement", "WeylElement"]:
        odd = (self.form_degree() & 1).astype(bool)
        return self.filter(~odd), self.filter(odd)

    def terms(self) -> Iterator[WeylTerm]:
        n = self.n
        groups: dict = {}
        for row, c in zip(self.rows.tolist(), self.coefs.tolist()):
            key = tuple(row[: 2 + 2 * n])
            mode = FourierMode(tuple(row[2 + 2 * n:2 + 3 * n]), tuple(row[2 + 3 * n:]))
            groups.setdefault(key, {})[mode] = c
        for key, coeff in groups.items():
            mask, h = key[0], key[1]
            vforms = tuple(i for i in range(n) if mask >> i & 1)
            pforms = tuple(j for j in range(n) if mask >> (n + j) & 1)
            yield WeylTerm(vforms, pforms, h, tuple(key[2:2 + n]), tuple(key[2 + n:2 + 2 * n]), TrigPoly(n, coeff))

    def coefficient(self, *, u=None, cu=None, h: int = 0, v=(), p=()) -> TrigPoly:
        """TrigPoly coefficient of one monomial (v, p given as sorted 0-based indices)."""
        n = self.n
        u = tuple(u) if u is not None else (0,) * n
        cu = tuple(cu) if cu is not None else (0,) * n
        _, mask = _order_forms(list(v) + [n + j for j in p], n)
        key = np.array((mask, h) + u + cu, dtype=np.int64)
        sel = np.all(self.rows[:, : 2 + 2 * n] == key, axis=1)
        terms = {}
        for row, c in zip(self.rows[sel].tolist(), self.coefs[sel].tolist()):
            terms[FourierMode(tuple(row[2 + 2 * n:2 + 3 * n]), tuple(row[2 + 3 * n:]))] = c
        return TrigPoly(n, terms)

    def dump(self) -> str:
        return dump_element(self)

    def __repr__(self):
        return f"WeylElement(n={self.n}, rows={len(self.rows)})"


def _order_forms(indices: list[int], n: int) -> tuple[int, int]:
    """Sort form indices by adjacent transpositions; sign 0 on repeats."""
    if len(set(indices)) != len(indices):
        return 0, 0
    for i in indices:
        if not 0 <= i < 2 * n:
            raise ValueError(f"form index {i} out of range")
    sign = 1
    idx = list(indices)
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    mask = 0
    for i in idx:
        mask |= 1 << i
    return sign, mask


def _canonicalize(rows: np.ndarray, coefs: np.ndarray, n: int, trunc: Truncation):
    ncols = 2 + 4 * n
    if len(rows):
        h = rows[:, 1]
        w = h + rows[:, 2:2 + 2 * n].sum(1)
        keep = (h <= trunc.max_hbar) & (w <= trunc.max_total_weight)
        if not keep.all():
            rows, coefs = rows[keep], coefs[keep]
    if len(rows) == 0:
        return np.zeros((0, ncols), dtype=np.int64), np.zeros(0, dtype=complex)
    # lexicographic row order, then merge runs of equal rows
    order = np.lexsort(rows.T[::-1])
    rows, coefs = rows[order], coefs[order]
    if len(rows) > 1:
        starts = np.flatnonzero(np.concatenate(([True], (rows[1:] != rows[:-1]).any(1))))
        # np.add.at sums sequentially (reduceat may use pairwise summation),
        # keeping results bit-identical to term-by-term accumulation
        group = np.cumsum(np.concatenate(([False], (rows[1:] != rows[:-1]).any(1))))
        merged = np.zeros(len(starts), dtype=complex)
        np.add.at(merged, group, coefs)
        uniq = rows[starts]
    else:
        uniq, merged = rows, coefs
    keep = np.abs(merged) >= ZERO_TOL
    return np.ascontiguousarray(uniq[keep]), np.ascontiguousarray(merged[keep])


# -- products ------------------------------------------------------------------


def weyl_star(a: WeylElement, b: WeylElement) -> WeylElement:
    """Fibrewise star product with separation of variables (cu on the left, u on the right)."""
    a._check(b)
    geom, trunc = a.geometry, a.trunc
    if not len(a) or not len(b):
        return WeylElement.zero(geom, trunc)
    rmax = int(min(a.cu.sum(1).max(), b.u.sum(1).max()))
    alpha, beta, r, coef = contraction_patterns(geom.omega, rmax)
    rows, coefs = _kernels.star_rows(
        a.rows,
        a.coefs,
        b.rows,
        b.coefs,
        geom.n,
        alpha,
        beta,
        r,
        coef,
        wedge_sign_table(geom.n),
        falling_table(trunc.max_total_weight),
        trunc.max_total_weight,
        trunc.max_hbar,
    )
    return WeylElement(geom, rows, coefs, trunc)


def weyl_commutator(a: WeylElement, b: WeylElement, divide_hbar: bool = False, tol: float = 1e-9) -> WeylElement:
    """Graded commutator a*b - (-1)^{|a||b|} b*a, optionally divided by hbar.

    Inhomogeneous inputs are split by form parity.  With ``divide_hbar`` an
    hbar^0 term above ``tol`` (relative) is an internal-consistency failure;
    smaller ones are float noise and dropped.
    """
    a_even, a_odd = a.parity_split()
    res = weyl_star(a, b) - weyl_star(b, a)
    if len(a_odd):
        b_even, b_odd = b.parity_split()
        if len(b_odd):
            res = res + 2.0 * weyl_star(b_odd, a_odd)
    if divide_hbar:
        res = divide_by_hbar(res, tol)
    return res


def divide_by_hbar(a: WeylElement, tol: float = 1e-9) -> WeylElement:
    zero_h = a.h == 0
    if zero_h.any():
        scale = max(a.max_abs(), 1.0)
        worst = float(np.abs(a.coefs[zero_h]).max())
        if worst > tol * scale:
            raise ArithmeticError(f"hbar division failed: hbar^0 term of size {worst:.3e}")
    rows = a.rows[~zero_h].copy()
    rows[:, 1] -= 1
    return WeylElement(a.geometry, rows, a.coefs[~zero_h].copy(), a.trunc)


def classical_product(a: WeylElement, b: WeylElement) -> WeylElement:
    """Commutative (wedge and coefficient) product, no contractions."""
    a._check(b)
    geom = a.geometry
    if not len(a) or not len(b):
        return WeylElement.zero(geom, a.trunc)
    alpha, beta, r, coef = (x[:1] for x in contraction_patterns(geom.omega, 0))
    rows, coefs = _kernels.star_rows(
        a.rows, a.coefs, b.rows, b.coefs, geom.n, alpha, beta, r, coef,
        wedge_sign_table(geom.n), falling_table(a.trunc.max_total_weight),
        a.trunc.max_total_weight, a.trunc.max_hbar,
    )
    return WeylElement(geom, rows, coefs, a.trunc)


# -- Hodge-type operators -----------------------------------------------------


def _insert_form(rows, coefs, bit: int, select):
    """Left-wedge the generator with index ``bit`` onto selected rows."""
    mask = rows[:, 0]
    ok = select & ((mask >> bit) & 1 == 0)
    rows = rows[ok].copy()
    c = coefs[ok]
    below = popcount(rows[:, 0] & ((1 << bit) - 1))
    c = c * np.where(below & 1, -1.0, 1.0)
    rows[:, 0] |= 1 << bit
    return rows, c


def _contract_form(rows, coefs, bit: int):
    """Left interior product with the dual of generator ``bit``."""
    mask = rows[:, 0]
    ok = (mask >> bit) & 1 == 1
    rows = rows[ok].copy()
    c = coefs[ok]
    below = popcount(rows[:, 0] & ((1 << bit) - 1))
    c = c * np.where(below & 1, -1.0, 1.0)
    rows[:, 0] &= ~(1 << bit)
    return rows, c


def _delta_part(a: WeylElement, which: str) -> WeylElement:
    n = a.n
    out_r, out_c = [a.rows[:0]], [a.coefs[:0]]
    for i in range(n):
        col = 2 + i if which == "Q" else 2 + n + i
        bit = i if which == "Q" else n + i
        exp = a.rows[:, col]
        rows, c = _insert_form(a.rows, a.coefs * exp, bit, exp > 0)
        rows[:, col] -= 1
        out_r.append(rows)
        out_c.append(c)
    return a._like(np.concatenate(out_r), np.concatenate(out_c))


def _kappa_part(a: WeylElement, which: str) -> WeylElement:
    """sum_i x^i * iota_i without normalization."""
    n = a.n
    out_r, out_c = [a.rows[:0]], [a.coefs[:0]]
    for i in range(n):
        col = 2 + i if which == "Q" else 2 + n + i
        bit = i if which == "Q" else n + i
        rows, c = _contract_form(a.rows, a.coefs, bit)
        rows[:, col] += 1
        out_r.append(rows)
        out_c.append(c)
    return WeylElement(a.geometry, np.concatenate(out_r), np.concatenate(out_c), a.trunc)


def _bidegrees(a: WeylElement):
    n = a.n
    qdeg = popcount(a.mask & ((1 << n) - 1))
    pdeg = popcount(a.mask >> n)
    return qdeg, pdeg, a.u.sum(1), a.cu.sum(1)


def _scaled(a: WeylElement, denom: np.ndarray) -> WeylElement:
    keep = denom > 0
    c = np.where(keep, a.coefs / np.where(keep, denom, 1), 0)
    return a._like(a.rows.copy(), c)


HODGE_KINDS = ("dQ", "dP", "d", "dQ_inv", "dP_inv", "d_inv", "piQ", "piP", "pi0")

_ALIASES = {
    "delta_Q": "dQ", "δ_Q": "dQ", "delta_P": "dP", "δ_P": "dP", "delta": "d", "δ": "d",
    "delta_Q_inv": "dQ_inv", "δ_Q⁻¹": "dQ_inv", "delta_P_inv": "dP_inv", "δ_P⁻¹": "dP_inv",
    "delta_inv": "d_inv", "δ⁻¹": "d_inv", "pi_Q": "piQ", "π_Q": "piQ", "pi_P": "piP",
    "π_P": "piP", "pi_0": "pi0", "π₀": "pi0",
}


def hodge_apply(kind: str, a: WeylElement) -> WeylElement:
    """Apply one of the polarization-adapted Hodge operators termwise.

    kinds: dQ, dP, d (= dQ + dP), dQ_inv, dP_inv, d_inv, piQ, piP, pi0.
    """
    kind = _ALIASES.get(kind, kind)
    if kind == "dQ":
        return _delta_part(a, "Q")
    if kind == "dP":
        return _delta_part(a, "P")
    if kind == "d":
        return _delta_part(a, "Q") + _delta_part(a, "P")
    # the inverses are normalized by the (preserved) degree of the input term
    qdeg, pdeg, l, m = _bidegrees(a)
    if kind == "dQ_inv":
        return _kappa_part(_scaled(a, qdeg + l), "Q")
    if kind == "dP_inv":
        return _kappa_part(_scaled(a, pdeg + m), "P")
    if kind == "d_inv":
        s = _scaled(a, qdeg + pdeg + l + m)
        return _kappa_part(s, "Q") + _kappa_part(s, "P")
    if kind == "piQ":
        return a.filter((qdeg == 0) & (l == 0))
    if kind == "piP":
        return a.filter((pdeg == 0) & (m == 0))
    if kind == "pi0":
        return a.filter((a.mask == 0) & (l == 0) & (m == 0))
    raise ValueError(f"unknown Hodge operator {kind!r}; expected one of {HODGE_KINDS}")


def exterior_d(a: WeylElement) -> WeylElement:
    """Coefficient-wise de Rham differential: sum_i v^i d/dx_i + vc^j d/dy_j."""
    n = a.n
    out_r, out_c = [a.rows[:0]], [a.coefs[:0]]
    for bit in range(2 * n):
        freq = a.modes[:, bit]  # qx block then py block, aligned with form bits
        rows, c = _insert_form(a.rows, a.coefs * (2j * math.pi * freq), bit, freq != 0)
        out_r.append(rows)
        out_c.append(c)
    return a._like(np.concatenate(out_r), np.concatenate(out_c))


# -- grading, action, evaluation ----------------------------------------------


def double_weight_component(a: WeylElement, r: int, l: int) -> WeylElement:
    """Terms with polarized weight |cu| + h = r and u-degree |u| = l."""
    return a.filter((a.polarized_weight() == r) & (a.u.sum(1) == l))


def polarized_weight_le(a: WeylElement, r: int) -> WeylElement:
    return a.filter(a.polarized_weight() <= r)


def evaluate_hbar(a: WeylElement, k: int) -> WeylElement:
    """Substitute hbar = i/k."""
    if k <= 0:
        raise ValueError("level k must be a positive integer")
    rows = a.rows.copy()
    factor = (1j / k) ** a.h.astype(float)
    rows[:, 1] = 0
    return WeylElement(a.geometry, rows, a.coefs * factor, a.trunc)


def _u_directional(s: WeylElement, weights: np.ndarray) -> WeylElement:
    """sum_l weights[l] * d/du^l."""
    n = s.n
    out_r, out_c = [s.rows[:0]], [s.coefs[:0]]
    for l in range(n):
        if weights[l] == 0:
            continue
        exp = s.rows[:, 2 + l]
        ok = exp > 0
        rows = s.rows[ok].copy()
        rows[:, 2 + l] -= 1
        out_r.append(rows)
        out_c.append(s.coefs[ok] * exp[ok] * weights[l])
    return s._like(np.concatenate(out_r), np.concatenate(out_c))


def fibrewise_act(a: WeylElement, s: WeylElement, k: int) -> WeylElement:
    """Level-k fibre action: hbar -> i/k, cu^j -> (i/k) sum_l W[j][l] d/du^l, u multiplies."""
    a._check(s)
    if k <= 0:
        raise ValueError("level k must be a positive integer")
    if len(s) and (s.cu.any() or s.h.any()):
        raise ValueError("acted-on element must not contain cu or hbar")
    if not len(a) or not len(s):
        return WeylElement.zero(a.geometry, a.trunc)
    W = a.geometry.omega_inv
    n = a.n
    lam = 1j / k
    total = WeylElement.zero(a.geometry, a.trunc)
    # group rows of a by their fibre exponent pattern to share derivative work
    cu_keys = {}
    for idx, row in enumerate(a.cu.tolist()):
        cu_keys.setdefault(tuple(row), []).append(idx)
    for cu, idxs in cu_keys.items():
        ds = s
        for j in range(n):
            for _ in range(cu[j]):
                ds = _u_directional(ds, W[j])
        if not len(ds):
            continue
        sub = a.filter(np.isin(np.arange(len(a)), idxs))
        rows = sub.rows.copy()
        factor = lam ** (sub.h + sub.cu.sum(1)).astype(float)
        rows[:, 1] = 0
        rows[:, 2 + n:2 + 2 * n] = 0
        left = WeylElement(a.geometry, rows, sub.coefs * factor, a.trunc)
        total = total + classical_product(left, ds)
    return total


# -- dumps ----------------------------------------------------------------------


def dump_element(a: WeylElement) -> str:
    lines = []
    for t in sorted(a.terms(), key=lambda t: (t.hpow, t.vforms, t.pforms, t.uexp, t.cuexp)):
        v = ",".join(str(i + 1) for i in t.vforms)
        p = ",".join(str(j + 1) for j in t.pforms)
        u = ",".join(map(str, t.uexp))
        cu = ",".join(map(str, t.cuexp))
        lines.append(f"hbar^{t.hpow} [v:{v}][p:{p}] u^({u}) cu^({cu}) * {format_trig(t.coeff)}")
    return "\n".join(lines)


# -- random elements for invariant suites ------------------------------------------


def random_element(
    geometry: Geometry,
    rng: np.random.Generator,
    nterms: int = 6,
    trunc: Truncation = DEFAULT_TRUNC,
    max_mode: int = 2,
    with_forms: bool = True,
    max_hbar: int | None = None,
    max_weight: int | None = None,
) -> WeylElement:
    n = geometry.n
    terms = []
    hcap = trunc.max_hbar if max_hbar is None else max_hbar
    wcap = trunc.max_total_weight if max_weight is None else max_weight
    for _ in range(nterms):
        budget = int(rng.integers(0, wcap + 1))
        h = int(rng.integers(0, min(budget, hcap) + 1))
        slots = rng.multinomial(budget - h, np.ones(2 * n) / (2 * n))
        u, cu = tuple(int(x) for x in slots[:n]), tuple(int(x) for x in slots[n:])
        vf = tuple(i for i in range(n) if with_forms and rng.random() < 0.3)
        pf = tuple(j for j in range(n) if with_forms and rng.random() < 0.3)
        qx = tuple(int(x) for x in rng.integers(-max_mode, max_mode + 1, n))
        py = tuple(int(x) for x in rng.integers(-max_mode, max_mode + 1, n))
        c = complex(rng.normal(), rng.normal())
        terms.append((vf, pf, h, u, cu, TrigPoly(n, {FourierMode(qx, py): c})))
    return WeylElement.from_terms(geometry, terms, trunc)
