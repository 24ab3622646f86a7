"""One-mode CCR *-algebra in normal order and its Fock (GNS) representation.

Elements are finite sums ``sum c_{n,m} a*^n a^m``. The vacuum state kills
every normally ordered monomial except the unit, so expectations reduce to
reading off the ``(0, 0)`` coefficient. Matrix representations act on Fock
levels ``0..N`` with ``a psi_k = sqrt(k) psi_{k-1}``.

The finite truncation stands in for the dense GNS domain spanned by Hermite
functions: every vector that enters a moment computation is a finite
combination of Fock states, and the truncation is chosen so that none of them
ever reaches the cut.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import mpmath
import numpy as np

from .errors import InvalidInputError, InvalidObservableError, TruncationError
from .moment_core import MomentSequence


def _clean(coeffs: Mapping) -> dict:
    return {k: v for k, v in coeffs.items() if v != 0}


@dataclass(frozen=True, eq=False)
class NormalOrderedElement:
    """Coefficients ``{(n, m): c}`` of the monomials ``a*^n a^m``.

    Coefficients may be any numbers supporting ``+``, ``*`` and
    ``conjugate()`` (complex, int, Fraction), so exact arithmetic is possible.
    """

    coeffs: Mapping

    def __post_init__(self):
        terms = {}
        for (n, m), c in dict(self.coeffs).items():
            if n < 0 or m < 0:
                raise InvalidInputError("monomial exponents must be nonnegative")
            terms[(int(n), int(m))] = c
        object.__setattr__(self, "coeffs", _clean(terms))

    @property
    def degree(self) -> int:
        return max((n + m for n, m in self.coeffs), default=0)

    def __eq__(self, other):
        if not isinstance(other, NormalOrderedElement):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def __add__(self, other):
        other = as_element(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return NormalOrderedElement(out)

    __radd__ = __add__

    def __neg__(self):
        return NormalOrderedElement({k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-as_element(other))

    def __rsub__(self, other):
        return as_element(other) - self

    def __mul__(self, other):
        if isinstance(other, NormalOrderedElement):
            return normal_product(self, other)
        return NormalOrderedElement({k: v * other for k, v in self.coeffs.items()})

    def __rmul__(self, other):
        return NormalOrderedElement({k: other * v for k, v in self.coeffs.items()})

    def __pow__(self, k: int):
        return power(self, k)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        adj = adjoint(self)
        keys = set(self.coeffs) | set(adj.coeffs)
        return all(abs(self.coeffs.get(k, 0) - adj.coeffs.get(k, 0)) <= tol for k in keys)

    def to_json(self) -> dict:
        rows = []
        for (n, m), c in sorted(self.coeffs.items()):
            c = complex(c)
            rows.append([n, m, c.real, c.imag])
        return {"coeffs": rows}

    @classmethod
    def from_json(cls, data: dict) -> "NormalOrderedElement":
        try:
            return cls({(int(n), int(m)): complex(re_, im) for n, m, re_, im in data["coeffs"]})
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed element: {exc}") from exc


def as_element(x) -> NormalOrderedElement:
    if isinstance(x, NormalOrderedElement):
        return x
    return NormalOrderedElement({(0, 0): x})


IDENTITY = NormalOrderedElement({(0, 0): 1})
ANNIHILATION = NormalOrderedElement({(0, 1): 1})
CREATION = NormalOrderedElement({(1, 0): 1})
NUMBER = NormalOrderedElement({(1, 1): 1})
ZERO = NormalOrderedElement({})


def normal_product(x: NormalOrderedElement, y: NormalOrderedElement) -> NormalOrderedElement:
    """Normally ordered product using ``[a, a*] = 1``.

    ``a^m a*^p = sum_k C(m,k) C(p,k) k! a*^{p-k} a^{m-k}`` (Wick reordering).
    """
    out: dict = {}
    for (n1, m1), c1 in x.coeffs.items():
        for (n2, m2), c2 in y.coeffs.items():
            for k in range(min(m1, n2) + 1):
                mult = math.comb(m1, k) * math.comb(n2, k) * math.factorial(k)
                key = (n1 + n2 - k, m1 + m2 - k)
                out[key] = out.get(key, 0) + mult * (c1 * c2)
    return NormalOrderedElement(out)


def adjoint(x: NormalOrderedElement) -> NormalOrderedElement:
    return NormalOrderedElement({(m, n): c.conjugate() for (n, m), c in x.coeffs.items()})


def power(x: NormalOrderedElement, k: int) -> NormalOrderedElement:
    if k < 0:
        raise InvalidInputError("negative power")
    result = IDENTITY
    base = x
    while k:
        if k & 1:
            result = normal_product(result, base)
        k >>= 1
        if k:
            base = normal_product(base, base)
    return result


def position_power(k: int, exact: bool = False) -> NormalOrderedElement:
    """``Q^k`` with ``Q = (a + a*)/sqrt(2)``.

    With ``exact=True`` the coefficients of ``(a + a*)^k`` are kept as
    integers and only the overall ``2^{-k/2}`` is applied, as a Fraction when
    ``k`` is even.
    """
    if k < 0:
        raise InvalidInputError("k must be nonnegative")
    raw = power(ANNIHILATION + CREATION, k)
    if exact and k % 2 == 0:
        return raw * Fraction(1, 2 ** (k // 2))
    return raw * (2.0 ** (-k / 2))


def momentum() -> NormalOrderedElement:
    """``P = -i (a - a*)/sqrt(2)``, so that ``a = (Q + iP)/sqrt(2)``."""
    s = 1 / math.sqrt(2)
    return NormalOrderedElement({(0, 1): -1j * s, (1, 0): 1j * s})


def momentum_power(k: int) -> NormalOrderedElement:
    if k < 0:
        raise InvalidInputError("k must be nonnegative")
    return power(ANNIHILATION - CREATION, k) * ((-1j) ** k * 2.0 ** (-k / 2))


def vacuum_expectation(x: NormalOrderedElement) -> complex:
    return x.coeffs.get((0, 0), 0)


def deformed_expectation(b: NormalOrderedElement, x: NormalOrderedElement):
    """``omega(b* x b)`` in the Fock vacuum."""
    return vacuum_expectation(normal_product(adjoint(b), normal_product(x, b)))


@dataclass(frozen=True, eq=False)
class TruncatedRep:
    """Matrix of an operator on Fock levels ``0..dim-1``."""

    matrix: np.ndarray
    exact_rows: int | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "matrix": [[[complex(v).real, complex(v).imag] for v in row] for row in self.matrix],
        }


def _ladder_factor(k: int, n: int, m: int) -> float:
    """Amplitude of ``a*^n a^m psi_k`` on ``psi_{k-m+n}`` (needs ``k >= m``)."""
    down = math.prod(range(k - m + 1, k + 1))
    up = math.prod(range(k - m + 1, k - m + n + 1))
    return math.sqrt(down) * math.sqrt(up)


def gns_matrix(x: NormalOrderedElement, N: int) -> TruncatedRep:
    """Matrix elements ``<psi_j | pi(x) psi_k>`` for ``0 <= j, k <= N``.

    Monomials pushing a state above level ``N`` are cut, so only the first
    ``N + 1 - degree(x)`` columns are exact.
    """
    if N < x.degree:
        raise TruncationError(f"truncation N={N} below element degree {x.degree}")
    M = np.zeros((N + 1, N + 1), dtype=complex)
    for (n, m), c in x.coeffs.items():
        c = complex(c)
        for k in range(m, N + 1):
            j = k - m + n
            if j <= N:
                M[j, k] += c * _ladder_factor(k, n, m)
    return TruncatedRep(M, N + 1 - x.degree)


def fock_vector(b: NormalOrderedElement, N: int) -> np.ndarray:
    """``pi(b) psi_0`` on levels ``0..N``: only ``a*^n`` terms survive."""
    if N < b.degree:
        raise TruncationError(f"truncation N={N} below deformer degree {b.degree}")
    v = np.zeros(N + 1, dtype=complex)
    for (n, m), c in b.coeffs.items():
        if m == 0:
            v[n] += complex(c) * math.sqrt(math.factorial(n))
    return v


def exactness_truncation(x: NormalOrderedElement, b: NormalOrderedElement, K: int) -> int:
    return max(x.degree * K + b.degree, x.degree)


def deformed_moment_sequence(
    x: NormalOrderedElement, b: NormalOrderedElement, K: int, N: int | None = None
) -> MomentSequence:
    """``omega_b(x^n) = <psi_b | pi(x)^n psi_b>`` for ``n = 0..K``.

    The default truncation keeps ``pi(x)^n psi_b`` strictly inside the
    truncated space, so the result is exact up to rounding. Passing a smaller
    ``N`` is allowed but the result may then be wrong; see
    :func:`exactness_truncation`. A singular deformation (``omega(b* b) = 0``)
    gives the zero sequence.
    """
    if not x.is_hermitian():
        raise InvalidObservableError("moment sequences need a Hermitian element")
    if N is None:
        N = exactness_truncation(x, b, K)
    M = gns_matrix(x, N).matrix
    psi = fock_vector(b, N)
    norm = np.vdot(psi, psi).real
    if norm == 0.0:
        return MomentSequence((0.0,) * (K + 1))
    vals = []
    v = psi
    for _ in range(K + 1):
        vals.append(np.vdot(psi, v).real)
        v = M @ v
    return MomentSequence(tuple(vals))


def gaussian_q_moment_oracle(k: int, n: int, dps: int = 30) -> float:
    """``pi^{-1/2} int x^{kn} exp(-x^2) dx`` by adaptive quadrature.

    Deliberately independent of the Fock-space machinery.
    """
    if k < 0 or n < 0:
        raise InvalidInputError("k and n must be nonnegative")
    p = k * n
    if p % 2:
        return 0.0
    with mpmath.workdps(dps):
        peak = mpmath.sqrt(mpmath.mpf(p) / 2)
        f = lambda t: t**p * mpmath.exp(-t * t)
        half = mpmath.quad(f, [0, peak, 2 * peak + 4, mpmath.inf]) if p else mpmath.quad(f, [0, mpmath.inf])
        return float(2 * half / mpmath.sqrt(mpmath.pi))


def fourier_unitary(N: int) -> np.ndarray:
    """``diag(i^n)`` on levels ``0..N``; maps ``Q`` to ``P`` and ``P`` to ``-Q``."""
    return np.diag([1j**n for n in range(N + 1)])


_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)|(A\*|A|Q|P|I|N)|(\^)|([+\-])|([()])|(\.))")


class _Parser:
    def __init__(self, text: str):
        self.tokens = []
        pos = 0
        text = text.strip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise InvalidInputError(f"cannot parse element near {text[pos:]!r}")
            pos = m.end()
            num, gen, caret, sign, paren, dot = m.groups()
            if num:
                self.tokens.append(("num", float(num)))
            elif gen:
                self.tokens.append(("gen", gen))
            elif caret:
                self.tokens.append(("^", None))
            elif sign:
                self.tokens.append(("sign", sign))
            elif paren:
                self.tokens.append((paren, None))
            elif dot:
                self.tokens.append((".", None))
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expr(self):
        sign = 1
        if self.peek()[0] == "sign":
            sign = -1 if self.take()[1] == "-" else 1
        total = self.term() * sign
        while self.peek()[0] == "sign":
            s = -1 if self.take()[1] == "-" else 1
            total = total + self.term() * s
        return total

    def term(self):
        result = IDENTITY
        seen = False
        while True:
            kind, _ = self.peek()
            if kind == ".":
                self.take()
                continue
            if kind not in ("num", "gen", "("):
                break
            result = normal_product(result, self.factor())
            seen = True
        if not seen:
            raise InvalidInputError("empty term in element expression")
        return result

    def factor(self):
        kind, val = self.take()
        if kind == "num":
            base = as_element(val)
        elif kind == "gen":
            base = {
                "A": ANNIHILATION,
                "A*": CREATION,
                "Q": position_power(1),
                "P": momentum(),
                "I": IDENTITY,
                "N": NUMBER,
            }[val]
        else:
            base = self.expr()
            if self.take()[0] != ")":
                raise InvalidInputError("unbalanced parentheses")
        if self.peek()[0] == "^":
            self.take()
            kind, exp = self.take()
            if kind != "num" or exp != int(exp):
                raise InvalidInputError("exponent must be a nonnegative integer")
            if val == "Q":
                return position_power(int(exp))
            if val == "P":
                return momentum_power(int(exp))
            base = power(base, int(exp))
        return base


def parse_element(text: str) -> NormalOrderedElement:
    """Parse shorthand such as ``"Q^4"``, ``"A*A"``, ``"I + 2 A*^2"``, ``"(A + A*)^2"``.

    Generators: ``A`` (annihilation), ``A*`` (creation), ``Q``, ``P``, ``I``
    and ``N`` (number operator). Juxtaposition or ``.`` multiplies.
    """
    p = _Parser(text)
    if not p.tokens:
        raise InvalidInputError("empty element expression")
    out = p.expr()
    if p.i != len(p.tokens):
        raise InvalidInputError(f"trailing input in element expression {text!r}")
    return out
