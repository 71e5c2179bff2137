"""Exact rational group algebra, matrices over it, and polynomial calculus."""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping

from .errors import BudgetExceeded, MissingWord, ParamsMismatch
from .group import GroupParams, Word, format_word, inverse, multiply, parse_word


def _frac(c) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


def format_rational(c: Fraction) -> str:
    c = _frac(c)
    return f"{c.numerator}/{c.denominator}"


class Element:
    """Finite rational combination of words; zero coefficients are never stored."""

    __slots__ = ("params", "terms")

    def __init__(self, params: GroupParams, terms: Mapping[Word, object] | None = None):
        self.params = params
        clean = {}
        for w, c in (terms or {}).items():
            c = _frac(c)
            if c:
                clean[w] = clean.get(w, 0) + c
        self.terms = {w: c for w, c in clean.items() if c}

    @classmethod
    def word(cls, w: Word, coeff=1) -> "Element":
        return cls(w.params, {w: coeff})

    @classmethod
    def scalar(cls, params: GroupParams, c) -> "Element":
        return cls(params, {params.identity(): c})

    @classmethod
    def zero(cls, params: GroupParams) -> "Element":
        return cls(params)

    def coeff(self, w: Word) -> Fraction:
        return self.terms.get(w, Fraction(0))

    def support(self) -> set[Word]:
        return set(self.terms)

    def l1_norm(self) -> Fraction:
        return sum((abs(c) for c in self.terms.values()), Fraction(0))

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.terms.values())

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, Element):
            return self.terms == other.terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __add__(self, other):
        return add(self, _lift(self.params, other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(_lift(self.params, other), -1))

    def __rsub__(self, other):
        return add(_lift(self.params, other), scale(self, -1))

    def __neg__(self):
        return scale(self, -1)

    def __mul__(self, other):
        if isinstance(other, Element):
            return mul(self, other)
        if isinstance(other, Word):
            return mul(self, Element.word(other))
        return scale(self, other)

    def __rmul__(self, other):
        if isinstance(other, Word):
            return mul(Element.word(other), self)
        return scale(self, other)

    def star(self) -> "Element":
        return Element(self.params, {inverse(w): c for w, c in self.terms.items()})

    def __repr__(self):
        return f"Element({format_element(self)})"


def _lift(params, x) -> Element:
    if isinstance(x, Element):
        return x
    if isinstance(x, Word):
        return Element.word(x)
    return Element.scalar(params, x)


def add(a: Element, b: Element) -> Element:
    if a.params is not b.params and a.params != b.params:
        raise ParamsMismatch("elements belong to different groups")
    out = dict(a.terms)
    for w, c in b.terms.items():
        v = out.get(w, 0) + c
        if v:
            out[w] = v
        else:
            out.pop(w, None)
    res = Element(a.params)
    res.terms = out
    return res


def scale(a: Element, c) -> Element:
    c = _frac(c)
    res = Element(a.params)
    if c:
        res.terms = {w: v * c for w, v in a.terms.items()}
    return res


def mul(a: Element, b: Element, max_terms: int | None = None) -> Element:
    """Convolution product. ``max_terms`` bounds the size of the result."""
    if a.params is not b.params and a.params != b.params:
        raise ParamsMismatch("elements belong to different groups")
    out: dict[Word, Fraction] = {}
    for w1, c1 in a.terms.items():
        for w2, c2 in b.terms.items():
            w = multiply(w1, w2)
            out[w] = out.get(w, 0) + c1 * c2
        if max_terms is not None and len(out) > max_terms:
            raise BudgetExceeded(f"product has more than {max_terms} terms")
    res = Element(a.params)
    res.terms = {w: c for w, c in out.items() if c}
    return res


def format_element(a: Element) -> str:
    if not a.terms:
        return "0"
    items = sorted(a.terms.items(), key=lambda kv: kv[0].sort_key())
    return " + ".join(f"{format_rational(c)} * {format_word(w)}" for w, c in items)


def parse_element(params: GroupParams, text: str) -> Element:
    text = text.strip()
    if text == "0":
        return Element.zero(params)
    terms: dict[Word, Fraction] = {}
    for chunk in text.split("+"):
        coeff, _, word = chunk.partition("*")
        w = parse_word(params, word)
        terms[w] = terms.get(w, 0) + Fraction(coeff.strip())
    return Element(params, terms)


class Matrix:
    """Square k x k matrix with entries in the rational group algebra."""

    __slots__ = ("params", "k", "rows")

    def __init__(self, params: GroupParams, rows):
        self.params = params
        self.rows = tuple(tuple(_lift(params, e) for e in row) for row in rows)
        self.k = len(self.rows)
        if any(len(r) != self.k for r in self.rows):
            raise ValueError("matrix must be square")

    @classmethod
    def identity(cls, params: GroupParams, k: int) -> "Matrix":
        return cls(params, [[1 if i == j else 0 for j in range(k)] for i in range(k)])

    @classmethod
    def zero(cls, params: GroupParams, k: int) -> "Matrix":
        return cls(params, [[0] * k for _ in range(k)])

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __eq__(self, other):
        return isinstance(other, Matrix) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __add__(self, other: "Matrix") -> "Matrix":
        _same_shape(self, other)
        return Matrix(self.params, [
            [add(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)
        ])

    def __mul__(self, other):
        if isinstance(other, Matrix):
            return mat_mul(self, other)
        return Matrix(self.params, [[scale(a, other) for a in r] for r in self.rows])

    __rmul__ = __mul__

    def is_integral(self) -> bool:
        return all(e.is_integral() for r in self.rows for e in r)

    def words(self) -> set[Word]:
        return {w for r in self.rows for e in r for w in e.terms}

    def __repr__(self):
        return format_matrix(self)


def _same_shape(A: Matrix, B: Matrix):
    if A.k != B.k:
        raise ValueError("matrix sizes differ")
    if A.params is not B.params and A.params != B.params:
        raise ParamsMismatch("matrices belong to different groups")


def adjoint(A: Matrix) -> Matrix:
    return Matrix(A.params, [[A.rows[j][i].star() for j in range(A.k)] for i in range(A.k)])


def mat_mul(A: Matrix, B: Matrix, max_terms: int | None = None) -> Matrix:
    _same_shape(A, B)
    k = A.k
    rows = []
    for i in range(k):
        row = []
        for j in range(k):
            acc = Element.zero(A.params)
            for l in range(k):
                a, b = A.rows[i][l], B.rows[l][j]
                if a and b:
                    acc = add(acc, mul(a, b, max_terms))
            if max_terms is not None and len(acc.terms) > max_terms:
                raise BudgetExceeded(f"matrix entry has more than {max_terms} terms")
            row.append(acc)
        rows.append(row)
    return Matrix(A.params, rows)


def format_matrix(A: Matrix) -> str:
    return "[" + ", ".join(
        "[" + ", ".join(format_element(e) for e in row) + "]" for row in A.rows
    ) + "]"


def parse_matrix(params: GroupParams, text: str) -> Matrix:
    """Row-major bracketed list, e.g. ``[[1/1 * e + 1/1 * x{1}, 0], [0, 1/1 * e]]``."""
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ValueError("matrix text must be a bracketed list")
    inner = text[1:-1].strip()
    rows = []
    depth, start = 0, None
    for pos, ch in enumerate(inner):
        if ch == "[":
            depth += 1
            if depth == 1:
                start = pos + 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                rows.append([parse_element(params, e) for e in inner[start:pos].split(",")])
    return Matrix(params, rows)


class Polynomial:
    """Rational polynomial, constant term first, trailing zeros trimmed."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [_frac(c) for c in coeffs]
        while cs and not cs[-1]:
            cs.pop()
        self.coeffs = tuple(cs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, t):
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return acc

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([other])
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return Polynomial(x + y for x, y in zip(a, b))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-c for c in self.coeffs)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Polynomial) else -_frac(other))

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial(c * _frac(other) for c in self.coeffs)
        if not self.coeffs or not other.coeffs:
            return Polynomial()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return Polynomial(out)

    __rmul__ = __mul__

    def times_t(self) -> "Polynomial":
        return Polynomial((Fraction(0),) + self.coeffs) if self.coeffs else Polynomial()

    def derivative(self) -> "Polynomial":
        return Polynomial(i * c for i, c in enumerate(self.coeffs) if i)

    def taylor_shift(self, a) -> "Polynomial":
        """Coefficients of p(a + s) as a polynomial in s."""
        cs = list(self.coeffs)
        n = len(cs)
        a = _frac(a)
        for i in range(n - 1):
            for j in range(n - 2, i - 1, -1):
                cs[j] += a * cs[j + 1]
        return Polynomial(cs)

    def range_on(self, a, b) -> tuple[Fraction, Fraction]:
        """Rigorous enclosure of p over [a, b] from the Taylor expansion at a."""
        w = _frac(b) - _frac(a)
        shifted = self.taylor_shift(a).coeffs
        if not shifted:
            return Fraction(0), Fraction(0)
        lo = hi = shifted[0]
        wp = Fraction(1)
        for c in shifted[1:]:
            wp *= w
            if c > 0:
                hi += c * wp
            else:
                lo += c * wp
        return lo, hi

    def __repr__(self):
        return format_polynomial(self)


def format_polynomial(p: Polynomial) -> str:
    cs = p.coeffs or (Fraction(0),)
    return f"deg {max(p.degree, 0)}: " + " ".join(format_rational(c) for c in cs)


def parse_polynomial(text: str) -> Polynomial:
    head, _, body = text.strip().partition(":")
    if not head.startswith("deg"):
        raise ValueError("polynomial text must start with 'deg d:'")
    deg = int(head[3:])
    cs = [Fraction(tok) for tok in body.split()]
    if len(cs) != deg + 1:
        raise ValueError("coefficient count does not match degree")
    return Polynomial(cs)


def poly_apply(p: Polynomial, X: Matrix, max_terms: int | None = None) -> Matrix:
    """sum_j p_j X^j with X^0 the identity matrix."""
    result = Matrix.zero(X.params, X.k)
    power = Matrix.identity(X.params, X.k)
    for j, c in enumerate(p.coeffs):
        if j:
            power = mat_mul(power, X, max_terms)
        if c:
            result = result + power * c
    return result


class Functional:
    """Linear functional on words: tau |-> sum_w c_w tau(w)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[Word, object] | None = None):
        self.coeffs = {w: _frac(c) for w, c in (coeffs or {}).items() if c}

    def __eq__(self, other):
        return isinstance(other, Functional) and self.coeffs == other.coeffs

    def __add__(self, other: "Functional") -> "Functional":
        out = dict(self.coeffs)
        for w, c in other.coeffs.items():
            out[w] = out.get(w, 0) + c
        return Functional(out)

    def __mul__(self, c) -> "Functional":
        return Functional({w: v * _frac(c) for w, v in self.coeffs.items()})

    __rmul__ = __mul__

    def support(self) -> set[Word]:
        return set(self.coeffs)

    def pair(self, tau: Mapping[Word, object]) -> Fraction:
        total = Fraction(0)
        for w, c in self.coeffs.items():
            if w not in tau:
                raise MissingWord(format_word(w))
            total += c * _frac(tau[w])
        return total

    def __repr__(self):
        items = sorted(self.coeffs.items(), key=lambda kv: kv[0].sort_key())
        return "{" + ", ".join(f"{format_word(w)}: {format_rational(c)}" for w, c in items) + "}"


def element_functional(a: Element) -> Functional:
    return Functional(a.terms)


def trace_functional(M: Matrix) -> Functional:
    """Word coefficients of (tau tensor tr_k)(M), tr_k normalised."""
    out: dict[Word, Fraction] = {}
    for i in range(M.k):
        for w, c in M.rows[i][i].terms.items():
            out[w] = out.get(w, 0) + c
    return Functional({w: c / M.k for w, c in out.items()})
