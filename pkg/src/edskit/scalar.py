"""Exact symbolic scalars: multivariate polynomials and truncated power series.

Both kinds carry an ordered variable list and a sparse term map from exponent
tuples to rational coefficients (fractions.Fraction):

    x0^2 * x1 + 3   over (x0, x1)   ->   {(2, 1): Fraction(1), (0, 0): Fraction(3)}

Zero coefficients are never stored; the zero polynomial has an empty map.
Canonical term order everywhere is graded lexicographic over the declared
variable list, which makes string output and iteration deterministic.

A TruncatedSeries is the same data plus a total-degree bound `order`; every
operation truncates its result back to that bound.  All arithmetic is exact
over the rationals -- there is no floating point in this module.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence, Union

Rational = Fraction

Exponent = tuple[int, ...]
Scalar = Union["Poly", "TruncatedSeries"]


class ScalarError(ValueError):
    """Raised on contract violations in scalar operations."""


class ParseError(ScalarError):
    """Syntax or name error while parsing an expression; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise ScalarError(f"not an exact rational: {value!r}")


def _grlex_key(exponent: Exponent) -> tuple:
    return (sum(exponent), tuple(-e for e in exponent))


def _sorted_terms(terms: Mapping[Exponent, Fraction]) -> list[tuple[Exponent, Fraction]]:
    return sorted(terms.items(), key=lambda item: _grlex_key(item[0]))


class Poly:
    """Exact multivariate polynomial over the rationals."""

    __slots__ = ("variables", "terms")

    def __init__(self, variables: Sequence[str], terms: Mapping[Exponent, Fraction] | None = None):
        variables = tuple(variables)
        if len(set(variables)) != len(variables):
            raise ScalarError(f"duplicate variable in {variables}")
        self.variables = variables
        clean: dict[Exponent, Fraction] = {}
        for exponent, coeff in (terms or {}).items():
            coeff = _as_fraction(coeff)
            if len(exponent) != len(variables):
                raise ScalarError(f"exponent {exponent} does not match variables {variables}")
            if any(e < 0 for e in exponent):
                raise ScalarError(f"negative exponent in {exponent}")
            if coeff != 0:
                clean[tuple(exponent)] = coeff
        self.terms = clean

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, variables: Sequence[str] = ()) -> "Poly":
        return cls(variables, {})

    @classmethod
    def constant(cls, value, variables: Sequence[str] = ()) -> "Poly":
        value = _as_fraction(value)
        variables = tuple(variables)
        if value == 0:
            return cls(variables, {})
        return cls(variables, {(0,) * len(variables): value})

    @classmethod
    def variable(cls, name: str, variables: Sequence[str]) -> "Poly":
        variables = tuple(variables)
        if name not in variables:
            raise ScalarError(f"unknown variable {name!r}")
        exponent = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {exponent: Fraction(1)})

    # -- structure ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def total_degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self.terms), default=-1)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.variables), Fraction(0))

    def with_variables(self, variables: Sequence[str]) -> "Poly":
        """Re-express over a superset (or reordering) of the variable list."""
        variables = tuple(variables)
        positions = []
        for v in self.variables:
            if v not in variables:
                raise ScalarError(f"variable {v!r} missing from target list {variables}")
            positions.append(variables.index(v))
        terms: dict[Exponent, Fraction] = {}
        for exponent, coeff in self.terms.items():
            new = [0] * len(variables)
            for pos, e in zip(positions, exponent):
                new[pos] = e
            terms[tuple(new)] = coeff
        return Poly(variables, terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        if self.variables == other.variables:
            return self.terms == other.terms
        union = _union_variables(self.variables, other.variables)
        return self.with_variables(union).terms == other.with_variables(union).terms

    def __hash__(self):
        return hash((self.variables, frozenset(self.terms.items())))

    # -- arithmetic ---------------------------------------------------------

    def __neg__(self) -> "Poly":
        return Poly(self.variables, {e: -c for e, c in self.terms.items()})

    def __add__(self, other) -> "Poly":
        a, b = _aligned(self, other)
        terms = dict(a.terms)
        for exponent, coeff in b.terms.items():
            total = terms.get(exponent, Fraction(0)) + coeff
            if total == 0:
                terms.pop(exponent, None)
            else:
                terms[exponent] = total
        return Poly(a.variables, terms)

    def __radd__(self, other) -> "Poly":
        return self + other

    def __sub__(self, other) -> "Poly":
        return self + (-(other if isinstance(other, Poly) else Poly.constant(other, self.variables)))

    def __rsub__(self, other) -> "Poly":
        return (-self) + other

    def __mul__(self, other) -> "Poly":
        a, b = _aligned(self, other)
        terms: dict[Exponent, Fraction] = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                exponent = tuple(x + y for x, y in zip(e1, e2))
                total = terms.get(exponent, Fraction(0)) + c1 * c2
                if total == 0:
                    terms.pop(exponent, None)
                else:
                    terms[exponent] = total
        return Poly(a.variables, terms)

    def __rmul__(self, other) -> "Poly":
        return self * other

    def __pow__(self, n: int) -> "Poly":
        if not isinstance(n, int) or n < 0:
            raise ScalarError("exponent must be a non-negative integer")
        result = Poly.constant(1, self.variables)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- output -------------------------------------------------------------

    def __repr__(self) -> str:
        return f"Poly({self})"

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for exponent, coeff in _sorted_terms(self.terms):
            factors = []
            for v, e in zip(self.variables, exponent):
                if e == 1:
                    factors.append(v)
                elif e > 1:
                    factors.append(f"{v}^{e}")
            body = "*".join(factors)
            if not body:
                text = str(coeff)
            elif coeff == 1:
                text = body
            elif coeff == -1:
                text = f"-{body}"
            else:
                text = f"{coeff}*{body}"
            parts.append(text)
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out


def _union_variables(a: Sequence[str], b: Sequence[str]) -> tuple[str, ...]:
    merged = list(a)
    for v in b:
        if v not in merged:
            merged.append(v)
    return tuple(merged)


def _aligned(a: Poly, b) -> tuple[Poly, Poly]:
    if not isinstance(b, Poly):
        b = Poly.constant(b, a.variables)
    if a.variables == b.variables:
        return a, b
    union = _union_variables(a.variables, b.variables)
    return a.with_variables(union), b.with_variables(union)


def poly_arith(a: Poly, b: Poly, op: str) -> Poly:
    """Dispatch add/sub/mul with automatic variable-list union."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ScalarError(f"unknown op {op!r}")


def partial_derivative(f: Scalar, var: str) -> Scalar:
    """Exact partial derivative; series keep their stored order bound."""
    if var not in f.variables:
        raise ScalarError(f"unknown variable {var!r}")
    idx = f.variables.index(var)
    terms: dict[Exponent, Fraction] = {}
    for exponent, coeff in f.terms.items():
        e = exponent[idx]
        if e == 0:
            continue
        new = list(exponent)
        new[idx] = e - 1
        terms[tuple(new)] = coeff * e
    if isinstance(f, TruncatedSeries):
        return TruncatedSeries(f.variables, f.order, terms)
    return Poly(f.variables, terms)


def evaluate(f: Scalar, point: Mapping[str, Fraction]) -> Fraction:
    """Exact evaluation; every variable of f must be assigned."""
    values = []
    for v in f.variables:
        if v not in point:
            raise ScalarError(f"missing assignment for {v!r}")
        values.append(_as_fraction(point[v]))
    total = Fraction(0)
    for exponent, coeff in f.terms.items():
        term = coeff
        for val, e in zip(values, exponent):
            if e:
                term *= val**e
        total += term
    return total


def substitute(f: Poly, assignment: Mapping[str, Poly]) -> Poly:
    """Polynomial composition: replace every variable of f by a polynomial."""
    result: Poly | None = None
    for exponent, coeff in f.terms.items():
        term: Poly | None = None
        for v, e in zip(f.variables, exponent):
            if e == 0:
                continue
            if v not in assignment:
                raise ScalarError(f"missing substitution for {v!r}")
            factor = assignment[v] ** e
            term = factor if term is None else term * factor
        if term is None:
            piece = Poly.constant(coeff)
        else:
            piece = term * coeff
        result = piece if result is None else result + piece
    return result if result is not None else Poly.zero()


class TruncatedSeries:
    """Multivariate power series truncated at a total-degree bound."""

    __slots__ = ("variables", "order", "terms")

    def __init__(self, variables: Sequence[str], order: int, terms: Mapping[Exponent, Fraction] | None = None):
        if order < 0:
            raise ScalarError("order must be >= 0")
        variables = tuple(variables)
        if len(set(variables)) != len(variables):
            raise ScalarError(f"duplicate variable in {variables}")
        self.variables = variables
        self.order = order
        clean: dict[Exponent, Fraction] = {}
        for exponent, coeff in (terms or {}).items():
            coeff = _as_fraction(coeff)
            if len(exponent) != len(variables):
                raise ScalarError(f"exponent {exponent} does not match variables {variables}")
            if coeff != 0 and sum(exponent) <= order:
                clean[tuple(exponent)] = coeff
        self.terms = clean

    @classmethod
    def zero(cls, variables: Sequence[str], order: int) -> "TruncatedSeries":
        return cls(variables, order, {})

    @classmethod
    def constant(cls, value, variables: Sequence[str], order: int) -> "TruncatedSeries":
        value = _as_fraction(value)
        terms = {(0,) * len(variables): value} if value != 0 else {}
        return cls(variables, order, terms)

    @classmethod
    def variable(cls, name: str, variables: Sequence[str], order: int) -> "TruncatedSeries":
        variables = tuple(variables)
        if name not in variables:
            raise ScalarError(f"unknown variable {name!r}")
        exponent = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, order, {exponent: Fraction(1)})

    @classmethod
    def from_poly(cls, p: Poly, order: int) -> "TruncatedSeries":
        return cls(p.variables, order, p.terms)

    def to_poly(self) -> Poly:
        """Reinterpret the stored terms as an exact polynomial."""
        return Poly(self.variables, self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.variables), Fraction(0))

    def lowest_degree(self) -> int:
        """Smallest total degree with a nonzero coefficient; -1 if zero."""
        return min((sum(e) for e in self.terms), default=-1)

    def coefficient(self, exponent: Exponent) -> Fraction:
        return self.terms.get(tuple(exponent), Fraction(0))

    def _check(self, other: "TruncatedSeries"):
        if self.variables != other.variables or self.order != other.order:
            raise ScalarError("series variable lists and orders must match")

    def __eq__(self, other) -> bool:
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return (self.variables, self.order, self.terms) == (other.variables, other.order, other.terms)

    def __hash__(self):
        return hash((self.variables, self.order, frozenset(self.terms.items())))

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(self.variables, self.order, {e: -c for e, c in self.terms.items()})

    def __add__(self, other) -> "TruncatedSeries":
        if not isinstance(other, TruncatedSeries):
            other = TruncatedSeries.constant(other, self.variables, self.order)
        self._check(other)
        terms = dict(self.terms)
        for exponent, coeff in other.terms.items():
            total = terms.get(exponent, Fraction(0)) + coeff
            if total == 0:
                terms.pop(exponent, None)
            else:
                terms[exponent] = total
        return TruncatedSeries(self.variables, self.order, terms)

    def __radd__(self, other):
        return self + other

    def __sub__(self, other):
        if not isinstance(other, TruncatedSeries):
            other = TruncatedSeries.constant(other, self.variables, self.order)
        return self + (-other)

    def __mul__(self, other) -> "TruncatedSeries":
        if not isinstance(other, TruncatedSeries):
            if isinstance(other, (int, Fraction)):
                return TruncatedSeries(self.variables, self.order, {e: c * other for e, c in self.terms.items()})
            raise ScalarError(f"cannot multiply series by {type(other).__name__}")
        self._check(other)
        terms: dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms.items():
            d1 = sum(e1)
            for e2, c2 in other.terms.items():
                if d1 + sum(e2) > self.order:
                    continue
                exponent = tuple(x + y for x, y in zip(e1, e2))
                total = terms.get(exponent, Fraction(0)) + c1 * c2
                if total == 0:
                    terms.pop(exponent, None)
                else:
                    terms[exponent] = total
        return TruncatedSeries(self.variables, self.order, terms)

    def __rmul__(self, other):
        return self * other

    def __pow__(self, n: int) -> "TruncatedSeries":
        if not isinstance(n, int) or n < 0:
            raise ScalarError("exponent must be a non-negative integer")
        result = TruncatedSeries.constant(1, self.variables, self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def truncate(self, order: int) -> "TruncatedSeries":
        return TruncatedSeries(self.variables, order, {e: c for e, c in self.terms.items() if sum(e) <= order})

    def with_variables(self, variables: Sequence[str]) -> "TruncatedSeries":
        """Re-express over a superset (or reordering) of the variable list."""
        return TruncatedSeries.from_poly(self.to_poly().with_variables(variables), self.order)

    def __repr__(self) -> str:
        return f"TruncatedSeries(order={self.order}, {self.to_poly()})"


def series_compose(g: Poly, args: Mapping[str, TruncatedSeries], order: int) -> TruncatedSeries:
    """Taylor expansion of g(args) truncated at total degree `order`.

    Every variable of g needs an argument series; all argument series must
    share one variable list and carry order >= the requested bound.
    """
    shared: tuple[str, ...] | None = None
    for v in g.variables:
        if v not in args:
            raise ScalarError(f"missing argument series for {v!r}")
        s = args[v]
        if s.order < order:
            raise ScalarError(f"argument series for {v!r} has order {s.order} < {order}")
        if shared is None:
            shared = s.variables
        elif s.variables != shared:
            raise ScalarError("argument series must share one variable list")
    if shared is None:
        shared = ()
    result = TruncatedSeries.zero(shared, order)
    power_cache: dict[tuple[str, int], TruncatedSeries] = {}

    def power(v: str, e: int) -> TruncatedSeries:
        key = (v, e)
        if key not in power_cache:
            power_cache[key] = args[v].truncate(order) ** e
        return power_cache[key]

    for exponent, coeff in g.terms.items():
        term = TruncatedSeries.constant(coeff, shared, order)
        for v, e in zip(g.variables, exponent):
            if e:
                term = term * power(v, e)
        result = result + term
    return result


def series_matrix_invert(bmat: Sequence[Sequence[TruncatedSeries]], order: int) -> list[list[TruncatedSeries]]:
    """Invert a square series matrix whose constant term is invertible.

    Raises ScalarError on a singular constant term (the chart/neighborhood
    assumption behind the construction fails there).
    """
    from . import linalg

    n = len(bmat)
    if any(len(row) != n for row in bmat):
        raise ScalarError("matrix must be square")
    if n == 0:
        return []
    variables = bmat[0][0].variables
    entries = [[e.truncate(order) if e.order != order else e for e in row] for row in bmat]
    const = [[e.constant_term() for e in row] for row in entries]
    try:
        const_inv = linalg.inverse(const)
    except linalg.LinAlgError as exc:
        raise ScalarError("singular constant term; series matrix not invertible") from exc
    x = [[TruncatedSeries.constant(const_inv[i][j], variables, order) for j in range(n)] for i in range(n)]
    ident = [
        [TruncatedSeries.constant(1 if i == j else 0, variables, order) for j in range(n)]
        for i in range(n)
    ]

    def mat_mul(a, b):
        return [
            [sum((a[i][k] * b[k][j] for k in range(n)), TruncatedSeries.zero(variables, order)) for j in range(n)]
            for i in range(n)
        ]

    def mat_sub(a, b):
        return [[a[i][j] - b[i][j] for j in range(n)] for i in range(n)]

    # Newton iteration X <- X + X(I - BX); doubles the count of correct degrees.
    steps = max(1, order.bit_length() + 1)
    for _ in range(steps):
        increment = mat_mul(x, mat_sub(ident, mat_mul(entries, x)))
        x = [[x[i][j] + increment[i][j] for j in range(n)] for i in range(n)]
    return x


# -- parser ------------------------------------------------------------------
#
# EXPR := TERM (('+'|'-') TERM)*
# TERM := FACTOR ('*' FACTOR)*
# FACTOR := ATOM ('^' UINT)?
# ATOM := RATIONAL | NAME | '(' EXPR ')' | '-' ATOM
# RATIONAL := INT ('/' UINT)?


class _Parser:
    def __init__(self, text: str, variables: tuple[str, ...]):
        self.text = text
        self.pos = 0
        self.variables = variables

    def error(self, message: str):
        raise ParseError(message, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def parse(self) -> Poly:
        result = self.expr()
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("unexpected trailing input")
        return result

    def expr(self) -> Poly:
        result = self.term()
        while self.peek() in ("+", "-"):
            op = self.peek()
            self.pos += 1
            rhs = self.term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term(self) -> Poly:
        result = self.factor()
        while self.peek() == "*":
            self.pos += 1
            result = result * self.factor()
        return result

    def factor(self) -> Poly:
        base = self.atom()
        if self.peek() == "^":
            self.pos += 1
            return base ** self.uint()
        return base

    def atom(self) -> Poly:
        ch = self.peek()
        if ch == "-":
            self.pos += 1
            return -self.atom()
        if ch == "(":
            self.pos += 1
            inner = self.expr()
            self.take(")")
            return inner
        if ch.isdigit():
            return Poly.constant(self.rational(), self.variables)
        if ch.isalpha() or ch == "_":
            return Poly.variable(self.name(), self.variables)
        self.error("expected a rational, name, parenthesis, or unary minus")

    def uint(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            self.error("expected an unsigned integer")
        return int(self.text[start : self.pos])

    def rational(self) -> Fraction:
        numerator = self.uint()
        if self.peek() == "/":
            self.pos += 1
            denominator = self.uint()
            if denominator == 0:
                self.error("zero denominator")
            return Fraction(numerator, denominator)
        return Fraction(numerator)

    def name(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        word = self.text[start : self.pos]
        if word not in self.variables:
            self.pos = start
            self.error(f"unknown variable {word!r}")
        return word


def parse_expr(text: str, variables: Sequence[str]) -> Poly:
    """Parse an expression over the declared variables into a canonical Poly."""
    return _Parser(text, tuple(variables)).parse()
