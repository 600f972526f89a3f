"""Polynomial symbols, phase-space shift identities, evolution operators.

Multiplying a field by x, or applying eps * d/dx, acts on the smoothed
transform of a pair (f, g) through first-order differential operators:

    W[x f, g]        = (x - eps/(4 pi i) d_k + eps sigma_x^2/(4 pi) d_x) W[f, g]
    W[f, x g]        = (x + eps/(4 pi i) d_k + eps sigma_x^2/(4 pi) d_x) W[f, g]
    W[eps f', g]     = (2 pi i k + eps/2 d_x + i eps sigma_k^2/2 d_k) W[f, g]
    W[f, eps g']     = (-2 pi i k + eps/2 d_x - i eps sigma_k^2/2 d_k) W[f, g]

The signs of the sigma^2 correction terms are pinned by the Gaussian
closed form and by the direct-quadrature oracle (see CONVENTIONS.md).
Nesting these shifts pulls any separable polynomial symbol out of the
transform; composing with the coefficient-conjugate side yields the
exact, finite evolution generator G with eps dW/dt + G W = 0 for fields
governed by eps du/dt + L(x, eps d_x) u = 0.

Operator composition is done symbolically: coefficients are bivariate
polynomials, commuted past derivatives with the product rule, and every
term keeps its integer power of eps so truncation is exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .grid import ComplexField1D, spectral_derivative
from .phasespace import (
    PhaseSpaceField,
    PhaseSpaceGrid,
    SmoothingParams,
    smoothed_wigner_cross,
)

__all__ = [
    "PolynomialSymbol",
    "OperatorTerm",
    "PhaseSpaceOperator",
    "SchrodingerSymbol",
    "UnsupportedSymbolError",
    "parse_symbol",
    "x_shift_operator",
    "k_shift_operator",
    "left_shift_operator",
    "build_evolution_operator",
    "truncate",
    "apply_operator",
    "apply_operator_to_array",
    "identity_pair",
    "IDENTITY_KINDS",
]


class UnsupportedSymbolError(ValueError):
    """Symbol outside the supported class (mixed x^m k^n monomials)."""


def _clean(coeffs: dict) -> dict:
    out = {}
    for key, c in coeffs.items():
        c = complex(c)
        if c != 0.0:
            out[(int(key[0]), int(key[1]))] = c
    return out


@dataclass(frozen=True)
class PolynomialSymbol:
    """Bivariate polynomial sum_{mn} c_mn x^m k^n with complex coefficients."""

    coeffs: dict
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _clean(self.coeffs))

    @classmethod
    def zero(cls) -> "PolynomialSymbol":
        return cls({})

    @classmethod
    def constant(cls, c) -> "PolynomialSymbol":
        return cls({(0, 0): c})

    @classmethod
    def x_power(cls, m: int, c=1.0) -> "PolynomialSymbol":
        return cls({(m, 0): c})

    @classmethod
    def k_power(cls, n: int, c=1.0) -> "PolynomialSymbol":
        return cls({(0, n): c})

    def __add__(self, other: "PolynomialSymbol") -> "PolynomialSymbol":
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out.get(key, 0.0) + c
        return PolynomialSymbol(out)

    def __mul__(self, other: "PolynomialSymbol") -> "PolynomialSymbol":
        out = {}
        for (m1, n1), c1 in self.coeffs.items():
            for (m2, n2), c2 in other.coeffs.items():
                key = (m1 + m2, n1 + n2)
                out[key] = out.get(key, 0.0) + c1 * c2
        return PolynomialSymbol(out)

    def scaled(self, c) -> "PolynomialSymbol":
        return PolynomialSymbol({key: c * v for key, v in self.coeffs.items()})

    def conjugated(self) -> "PolynomialSymbol":
        return PolynomialSymbol({key: np.conj(v) for key, v in self.coeffs.items()})

    def derivative(self, dx: int, dk: int) -> "PolynomialSymbol":
        out = {}
        for (m, n), c in self.coeffs.items():
            if m < dx or n < dk:
                continue
            fac = math.perm(m, dx) * math.perm(n, dk)
            out[(m - dx, n - dk)] = out.get((m - dx, n - dk), 0.0) + fac * c
        return PolynomialSymbol(out)

    def evaluate(self, x, k):
        x = np.asarray(x, dtype=np.float64)
        k = np.asarray(k, dtype=np.float64)
        acc = np.zeros(np.broadcast_shapes(x.shape, k.shape), dtype=np.complex128)
        for (m, n), c in self.coeffs.items():
            acc += c * (x**m) * (k**n)
        return acc

    @property
    def degree_x(self) -> int:
        return max((m for (m, _) in self.coeffs), default=0)

    @property
    def degree_k(self) -> int:
        return max((n for (_, n) in self.coeffs), default=0)

    @property
    def is_separable(self) -> bool:
        return all(m == 0 or n == 0 for (m, n) in self.coeffs)

    @property
    def is_real(self) -> bool:
        return all(abs(c.imag) <= 1e-14 * (1.0 + abs(c)) for c in self.coeffs.values())

    def real_part(self) -> "PolynomialSymbol":
        return PolynomialSymbol({key: c.real for key, c in self.coeffs.items()})

    def imag_part(self) -> "PolynomialSymbol":
        return PolynomialSymbol({key: c.imag for key, c in self.coeffs.items()})

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.coeffs.values()), default=0.0)


@dataclass(frozen=True)
class SchrodingerSymbol:
    """Generator symbol i/2 (2 pi k)^2 + i V(x) for the Schrodinger equation.

    potential_coeffs are the real coefficients (c_0, c_1, ...) of
    V(x) = sum_j c_j x^j.  The kinetic sign is pinned by the physical
    oracle: a free packet with positive mean wavenumber must transport
    toward +x under the order-0 generator (CONVENTIONS.md).
    """

    potential_coeffs: tuple
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        coeffs = tuple(float(c) for c in self.potential_coeffs)
        object.__setattr__(self, "potential_coeffs", coeffs)

    def symbol(self) -> PolynomialSymbol:
        out = {(0, 2): 2j * np.pi**2}
        for j, c in enumerate(self.potential_coeffs):
            if c != 0.0:
                out[(j, 0)] = out.get((j, 0), 0.0) + 1j * c
        return PolynomialSymbol(out)

    def hamiltonian(self) -> PolynomialSymbol:
        """Real observable 2 pi^2 k^2 + V(x), the slow-scale energy density."""
        return self.symbol().imag_part()


# -- operators ----------------------------------------------------------------


@dataclass(frozen=True)
class OperatorTerm:
    """coeff(x, k) * d_x^dx d_k^dk, carrying its integer power of eps."""

    dx: int
    dk: int
    coeff: PolynomialSymbol
    eps_power: int


@dataclass(frozen=True)
class PhaseSpaceOperator:
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        merged: dict = {}
        for t in self.terms:
            key = (t.dx, t.dk, t.eps_power)
            merged[key] = merged.get(key, PolynomialSymbol.zero()) + t.coeff
        out = tuple(
            OperatorTerm(dx, dk, c, p)
            for (dx, dk, p), c in sorted(merged.items())
            if c.coeffs
        )
        object.__setattr__(self, "terms", out)

    @classmethod
    def identity(cls) -> "PhaseSpaceOperator":
        return cls((OperatorTerm(0, 0, PolynomialSymbol.constant(1.0), 0),))

    def __add__(self, other: "PhaseSpaceOperator") -> "PhaseSpaceOperator":
        return PhaseSpaceOperator(self.terms + other.terms)

    def scaled(self, c) -> "PhaseSpaceOperator":
        return PhaseSpaceOperator(
            tuple(OperatorTerm(t.dx, t.dk, t.coeff.scaled(c), t.eps_power) for t in self.terms)
        )

    def conjugated(self) -> "PhaseSpaceOperator":
        return PhaseSpaceOperator(
            tuple(
                OperatorTerm(t.dx, t.dk, t.coeff.conjugated(), t.eps_power)
                for t in self.terms
            )
        )

    def compose(self, other: "PhaseSpaceOperator") -> "PhaseSpaceOperator":
        """self applied after other, normalized by the product rule."""
        out = []
        for t1 in self.terms:
            for t2 in other.terms:
                for i in range(t1.dx + 1):
                    for j in range(t1.dk + 1):
                        c2 = t2.coeff.derivative(i, j)
                        if not c2.coeffs:
                            continue
                        fac = math.comb(t1.dx, i) * math.comb(t1.dk, j)
                        out.append(
                            OperatorTerm(
                                t1.dx - i + t2.dx,
                                t1.dk - j + t2.dk,
                                (t1.coeff * c2).scaled(fac),
                                t1.eps_power + t2.eps_power,
                            )
                        )
        return PhaseSpaceOperator(tuple(out))

    def power(self, n: int) -> "PhaseSpaceOperator":
        if n < 0:
            raise ValueError("operator power must be >= 0")
        acc = PhaseSpaceOperator.identity()
        for _ in range(n):
            acc = acc.compose(self)
        return acc

    def realified(self) -> "PhaseSpaceOperator":
        """Drop imaginary coefficient parts after checking they cancel."""
        scale = max((t.coeff.max_abs_coeff() for t in self.terms), default=1.0)
        for t in self.terms:
            for c in t.coeff.coeffs.values():
                if abs(c.imag) > 1e-12 * max(scale, 1.0):
                    raise ValueError("operator coefficients did not combine to real values")
        return PhaseSpaceOperator(
            tuple(
                OperatorTerm(t.dx, t.dk, t.coeff.real_part(), t.eps_power)
                for t in self.terms
            )
        )

    def coefficient(self, dx: int, dk: int, eps_power: int | None = None) -> PolynomialSymbol:
        acc = PolynomialSymbol.zero()
        for t in self.terms:
            if t.dx == dx and t.dk == dk and (eps_power is None or t.eps_power == eps_power):
                acc = acc + t.coeff
        return acc

    @property
    def max_eps_power(self) -> int:
        return max((t.eps_power for t in self.terms), default=0)


def x_shift_operator(params: SmoothingParams, side: str = "left") -> PhaseSpaceOperator:
    """Operator pulling multiplication by x out of the smoothed transform."""
    eps, sx = params.eps, params.sigma_x
    ck = eps * 1j / (4.0 * np.pi)  # -eps/(4 pi i)
    if side == "right":
        ck = -ck
    elif side != "left":
        raise ValueError("side must be 'left' or 'right'")
    return PhaseSpaceOperator(
        (
            OperatorTerm(0, 0, PolynomialSymbol.x_power(1), 0),
            OperatorTerm(0, 1, PolynomialSymbol.constant(ck), 1),
            OperatorTerm(1, 0, PolynomialSymbol.constant(eps * sx * sx / (4.0 * np.pi)), 1),
        )
    )


def k_shift_operator(params: SmoothingParams, side: str = "left") -> PhaseSpaceOperator:
    """Operator pulling the symbol-k action (eps d_x / 2 pi i) out."""
    eps, sk = params.eps, params.sigma_k
    cx = -eps * 1j / (4.0 * np.pi)  # +eps/(4 pi i)
    if side == "right":
        cx = -cx
    elif side != "left":
        raise ValueError("side must be 'left' or 'right'")
    return PhaseSpaceOperator(
        (
            OperatorTerm(0, 0, PolynomialSymbol.k_power(1), 0),
            OperatorTerm(1, 0, PolynomialSymbol.constant(cx), 1),
            OperatorTerm(0, 1, PolynomialSymbol.constant(eps * sk * sk / (4.0 * np.pi)), 1),
        )
    )


def left_shift_operator(L: PolynomialSymbol, params: SmoothingParams) -> PhaseSpaceOperator:
    """L(X, K) with nested shift powers; separable symbols only.

    Satisfies  W[L(x, eps d_x) f, g] = left_shift_operator(L) W[f, g]
    where L(x, eps d_x) is the Weyl operator of the symbol (the symbol k
    corresponds to eps d_x / (2 pi i)).
    """
    if not L.is_separable:
        raise UnsupportedSymbolError(
            "mixed x^m k^n monomials are not supported; split the symbol "
            "into P(x) + Q(k)"
        )
    xo = x_shift_operator(params, "left")
    ko = k_shift_operator(params, "left")
    acc = PhaseSpaceOperator()
    for (m, n), c in L.coeffs.items():
        base = xo.power(m) if m else ko.power(n)
        acc = acc + base.scaled(c)
    return acc


def build_evolution_operator(L: PolynomialSymbol, params: SmoothingParams) -> PhaseSpaceOperator:
    """Exact finite generator G with eps dW/dt + G W = 0.

    G is the shift operator of L plus its coefficient conjugate (the
    contribution of the second transform slot), so it maps real fields
    to real fields.  Each term keeps its eps power; for a symbol whose
    Weyl operator is anti-self-adjoint the eps^0 parts cancel and the
    leading terms are the Liouville transport of the symbol.
    """
    one_sided = left_shift_operator(L, params)
    return (one_sided + one_sided.conjugated()).realified()


def truncate(op: PhaseSpaceOperator, order: int) -> PhaseSpaceOperator:
    """Keep terms of asymptotic order <= order.

    A term with eps power p enters the time-normalized dynamics
    dW/dt = -(G/eps) W at order eps^(p-1), so order 0 keeps p <= 1 (the
    Liouville part) and order 1 adds the mixed-derivative correction.
    """
    if order < 0:
        raise ValueError("truncation order must be >= 0")
    return PhaseSpaceOperator(tuple(t for t in op.terms if t.eps_power <= order + 1))


def apply_operator_to_array(
    op: PhaseSpaceOperator, values: np.ndarray, grid: PhaseSpaceGrid
) -> np.ndarray:
    """Apply with spectral mixed derivatives; complex in, complex out.

    The field must be smooth and decay at the grid edges (derivatives
    periodize).
    """
    vals = np.asarray(values, dtype=np.complex128)
    nx, nk = grid.x_axis.count, grid.k_axis.count
    if vals.shape != (nx, nk):
        raise ValueError("values do not match the grid")
    x = grid.x_axis.values[:, None]
    k = grid.k_axis.values[None, :]
    zx = 2j * np.pi * np.fft.fftfreq(nx, d=grid.x_axis.step)[:, None]
    zk = 2j * np.pi * np.fft.fftfreq(nk, d=grid.k_axis.step)[None, :]
    spec = np.fft.fft2(vals)
    cache: dict = {}
    out = np.zeros_like(vals)
    for t in op.terms:
        key = (t.dx, t.dk)
        if key not in cache:
            if key == (0, 0):
                cache[key] = vals
            else:
                cache[key] = np.fft.ifft2(spec * (zx**t.dx) * (zk**t.dk))
        out += t.coeff.evaluate(x, k) * cache[key]
    return out


def apply_operator(op: PhaseSpaceOperator, w: PhaseSpaceField) -> PhaseSpaceField:
    """Apply a real-coefficient operator to a real field."""
    out = apply_operator_to_array(op, w.values.astype(np.complex128), w.grid)
    scale = float(np.max(np.abs(out.real))) or 1.0
    if float(np.max(np.abs(out.imag))) > 1e-8 * scale:
        raise ValueError("operator application produced a non-real field")
    return PhaseSpaceField(w.grid, out.real, w.kind)


# -- the four shift identities, both sides, for verification -----------------

IDENTITY_KINDS = ("x_f", "x_g", "deriv_f", "deriv_g")


def identity_pair(
    which: str,
    f: ComplexField1D,
    g: ComplexField1D,
    params: SmoothingParams,
    grid: PhaseSpaceGrid,
    *,
    band_tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """(lhs, rhs) complex fields for one shift identity.

    lhs transforms the modified pair directly; rhs applies the shift
    operator to the transform of (f, g).  The two paths share no code
    beyond the base transform.
    """
    base = smoothed_wigner_cross(f, g, params, grid, band_tol=band_tol)
    xvals = f.axis.values
    if which == "x_f":
        lhs = smoothed_wigner_cross(
            ComplexField1D(f.axis, xvals * f.values), g, params, grid, band_tol=band_tol
        )
        op = x_shift_operator(params, "left")
    elif which == "x_g":
        lhs = smoothed_wigner_cross(
            f, ComplexField1D(g.axis, xvals * g.values), params, grid, band_tol=band_tol
        )
        op = x_shift_operator(params, "right")
    elif which == "deriv_f":
        df = spectral_derivative(f, 1)
        lhs = smoothed_wigner_cross(
            ComplexField1D(f.axis, params.eps * df.values), g, params, grid, band_tol=band_tol
        )
        op = k_shift_operator(params, "left").scaled(2j * np.pi)
    elif which == "deriv_g":
        dg = spectral_derivative(g, 1)
        lhs = smoothed_wigner_cross(
            f, ComplexField1D(g.axis, params.eps * dg.values), params, grid, band_tol=band_tol
        )
        op = k_shift_operator(params, "right").scaled(-2j * np.pi)
    else:
        raise ValueError(f"unknown identity kind {which!r}")
    rhs = apply_operator_to_array(op, base, grid)
    return lhs, rhs


# -- text form ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?i?)|(?P<name>pi|x|k|i)"
    r"|(?P<op>[-+*^()]))"
)


def _tokenize(text: str) -> list:
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ValueError(f"symbol syntax error at {text[pos:]!r}")
        if m.group("num"):
            s = m.group("num")
            tokens.append(("num", 1j * float(s[:-1]) if s.endswith("i") else float(s)))
        elif m.group("name"):
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expr(self) -> PolynomialSymbol:
        sign = 1.0
        kind, val = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            sign = -1.0 if val == "-" else 1.0
        acc = self.term().scaled(sign)
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                nxt = self.term()
                acc = acc + (nxt.scaled(-1.0) if val == "-" else nxt)
            else:
                return acc

    def term(self) -> PolynomialSymbol:
        acc = self.factor()
        while True:
            kind, val = self.peek()
            if kind == "op" and val == "*":
                self.take()
                acc = acc * self.factor()
            else:
                return acc

    def factor(self) -> PolynomialSymbol:
        base = self.atom()
        kind, val = self.peek()
        if kind == "op" and val == "^":
            self.take()
            kind, val = self.take()
            if kind != "num" or not float(np.real(val)).is_integer() or np.real(val) < 0:
                raise ValueError("exponent must be a nonnegative integer")
            out = PolynomialSymbol.constant(1.0)
            for _ in range(int(np.real(val))):
                out = out * base
            return out
        return base

    def atom(self) -> PolynomialSymbol:
        kind, val = self.take()
        if kind == "num":
            return PolynomialSymbol.constant(val)
        if kind == "name":
            if val == "pi":
                return PolynomialSymbol.constant(np.pi)
            if val == "i":
                return PolynomialSymbol.constant(1j)
            if val == "x":
                return PolynomialSymbol.x_power(1)
            return PolynomialSymbol.k_power(1)
        if kind == "op" and val == "(":
            inner = self.expr()
            kind, val = self.take()
            if (kind, val) != ("op", ")"):
                raise ValueError("unbalanced parentheses in symbol")
            return inner
        raise ValueError(f"unexpected token {val!r} in symbol")


def parse_symbol(text: str) -> PolynomialSymbol:
    """Parse 'name: expr' or bare 'expr'; see README for the grammar.

    Examples: "i*V: 145*x^2", "kinetic: -0.5i*(2*pi*k)^2".
    """
    name = None
    if ":" in text:
        name, text = text.split(":", 1)
        name = name.strip()
    parser = _Parser(_tokenize(text))
    sym = parser.expr()
    if parser.pos != len(parser.toks):
        raise ValueError("trailing input after symbol expression")
    return PolynomialSymbol(sym.coeffs, name=name)
