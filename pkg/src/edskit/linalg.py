"""Exact rational linear algebra: rref, rank, nullspace, solve, inverse.

Matrices are lists of rows of fractions.Fraction.  Everything here is exact;
the regularity verdicts elsewhere in the package are rank conditions that
floating point would corrupt.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Matrix = list[list[Fraction]]
Vector = list[Fraction]


class LinAlgError(ValueError):
    pass


def _copy(m: Sequence[Sequence[Fraction]]) -> Matrix:
    return [[Fraction(x) for x in row] for row in m]


def rref(m: Sequence[Sequence[Fraction]]) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and the list of pivot columns."""
    a = _copy(m)
    if not a:
        return a, []
    rows, cols = len(a), len(a[0])
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        pivot_row = next((i for i in range(r, rows) if a[i][c] != 0), None)
        if pivot_row is None:
            continue
        a[r], a[pivot_row] = a[pivot_row], a[r]
        scale = a[r][c]
        a[r] = [x / scale for x in a[r]]
        for i in range(rows):
            if i != r and a[i][c] != 0:
                factor = a[i][c]
                a[i] = [x - factor * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return a, pivots


def rank(m: Sequence[Sequence[Fraction]]) -> int:
    return len(rref(m)[1])


def nullspace(m: Sequence[Sequence[Fraction]]) -> list[Vector]:
    """Basis of {x : m x = 0}, one vector per free column."""
    if not m:
        return []
    cols = len(m[0])
    reduced, pivots = rref(m)
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        vec = [Fraction(0)] * cols
        vec[f] = Fraction(1)
        for r, p in enumerate(pivots):
            vec[p] = -reduced[r][f]
        basis.append(vec)
    return basis


def solve(m: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> Vector | None:
    """One exact solution of m x = b, or None if inconsistent."""
    if not m:
        return [] if all(x == 0 for x in b) else None
    cols = len(m[0])
    augmented = [list(row) + [rhs] for row, rhs in zip(m, b)]
    reduced, pivots = rref(augmented)
    if cols in pivots:
        return None
    x = [Fraction(0)] * cols
    for r, p in enumerate(pivots):
        x[p] = reduced[r][cols]
    return x


def inverse(m: Sequence[Sequence[Fraction]]) -> Matrix:
    n = len(m)
    if any(len(row) != n for row in m):
        raise LinAlgError("matrix must be square")
    augmented = [list(map(Fraction, row)) + [Fraction(1 if i == j else 0) for j in range(n)] for i, row in enumerate(m)]
    reduced, pivots = rref(augmented)
    if pivots != list(range(n)):
        raise LinAlgError("matrix is singular")
    return [row[n:] for row in reduced]


def det(m: Sequence[Sequence[Fraction]]) -> Fraction:
    n = len(m)
    if any(len(row) != n for row in m):
        raise LinAlgError("matrix must be square")
    a = _copy(m)
    result = Fraction(1)
    for c in range(n):
        pivot_row = next((i for i in range(c, n) if a[i][c] != 0), None)
        if pivot_row is None:
            return Fraction(0)
        if pivot_row != c:
            a[c], a[pivot_row] = a[pivot_row], a[c]
            result = -result
        result *= a[c][c]
        inv = 1 / a[c][c]
        for i in range(c + 1, n):
            if a[i][c] != 0:
                factor = a[i][c] * inv
                a[i] = [x - factor * y for x, y in zip(a[i], a[c])]
    return result


def mat_mul(a: Sequence[Sequence[Fraction]], b: Sequence[Sequence[Fraction]]) -> Matrix:
    if not a or not b:
        return []
    inner = len(b)
    return [[sum((row[k] * b[k][j] for k in range(inner)), Fraction(0)) for j in range(len(b[0]))] for row in a]


def mat_vec(a: Sequence[Sequence[Fraction]], v: Sequence[Fraction]) -> Vector:
    return [sum((row[k] * v[k] for k in range(len(v))), Fraction(0)) for row in a]


def in_row_span(rows: Sequence[Sequence[Fraction]], vector: Sequence[Fraction]) -> bool:
    base = [list(r) for r in rows]
    return rank(base) == rank(base + [list(vector)])


def span_equal(a: Sequence[Sequence[Fraction]], b: Sequence[Sequence[Fraction]]) -> bool:
    """True iff the row spans of a and b coincide."""
    ra, rb = rank(a), rank(b)
    return ra == rb == rank([list(r) for r in a] + [list(r) for r in b])


def independent_subset(rows: Sequence[Sequence[Fraction]]) -> list[int]:
    """Indices of a maximal independent subset, scanning rows in order."""
    chosen: list[int] = []
    current: Matrix = []
    r = 0
    for i, row in enumerate(rows):
        candidate = current + [list(map(Fraction, row))]
        if rank(candidate) > r:
            chosen.append(i)
            current = candidate
            r += 1
    return chosen
