"""Transitive Lie algebroids in split-adapted local form, and their exterior calculus.

A structure is one coordinate chart: base coordinates, a basis of sections
split into kernel sections (anchor row zero) and splitting sections (anchor
row a coordinate unit row), an anchor matrix of polynomials, and a bracket
table.  In this frame the anchor forces every bracket to be kernel-valued,
and the derivation delta is computed from the local formulas

    delta f     = (df/dx^i) rho_alpha^i e^alpha
    delta e^a   = -1/2 L^a_bc e^b ^ e^c

extended to higher degree by the graded Leibniz rule.  Validity (anchor
compatibility and Jacobi) is exactly the statement delta^2 = 0 on coordinate
functions and dual basis elements, which validate_structure checks symbolically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import linalg
from .scalar import Poly, evaluate


class StructureError(ValueError):
    """Malformed algebroid data (dimension/labelling problems)."""


@dataclass(frozen=True)
class BasisSection:
    name: str
    kind: str  # "kernel" or "splitting"
    splits: str | None = None  # coordinate carried by a splitting section

    def __post_init__(self):
        if self.kind not in ("kernel", "splitting"):
            raise StructureError(f"bad section kind {self.kind!r}")
        if self.kind == "splitting" and not self.splits:
            raise StructureError(f"splitting section {self.name!r} names no coordinate")
        if self.kind == "kernel" and self.splits:
            raise StructureError(f"kernel section {self.name!r} must not name a coordinate")


class AlgebroidStructure:
    """Split-adapted transitive Lie algebroid data over one chart."""

    def __init__(
        self,
        base_coords: Sequence[str],
        sections: Sequence[BasisSection],
        anchor: Mapping[str, Sequence[Poly]],
        brackets: Mapping[tuple[str, str], Mapping[str, Poly]] | None = None,
    ):
        self.base_coords = tuple(base_coords)
        self.sections = tuple(sections)
        self.names = tuple(s.name for s in self.sections)
        if len(set(self.names)) != len(self.names):
            raise StructureError("duplicate section names")
        if len(set(self.base_coords)) != len(self.base_coords):
            raise StructureError("duplicate base coordinates")
        self.kernel_names = tuple(s.name for s in self.sections if s.kind == "kernel")
        self.splitting_names = tuple(s.name for s in self.sections if s.kind == "splitting")
        split_map = {s.splits: s.name for s in self.sections if s.kind == "splitting"}
        if set(split_map) != set(self.base_coords) or len(split_map) != len(self.base_coords):
            raise StructureError("splitting sections must match base coordinates one-to-one")
        self.splitting_of = split_map  # coordinate -> section name
        self._index = {name: i for i, name in enumerate(self.names)}

        self.anchor: dict[str, tuple[Poly, ...]] = {}
        for section in self.sections:
            if section.name not in anchor:
                raise StructureError(f"missing anchor row for {section.name!r}")
            row = tuple(p.with_variables(self.base_coords) for p in anchor[section.name])
            if len(row) != len(self.base_coords):
                raise StructureError(f"anchor row for {section.name!r} has wrong length")
            if section.kind == "kernel":
                if any(not p.is_zero() for p in row):
                    raise StructureError(f"kernel section {section.name!r} has a nonzero anchor row")
            else:
                expected = [Poly.constant(1 if c == section.splits else 0, self.base_coords) for c in self.base_coords]
                if list(row) != expected:
                    raise StructureError(f"splitting section {section.name!r} anchor row is not the unit row")
            self.anchor[section.name] = row

        # Bracket table is stored in full; the constructor accepts entries for
        # either orientation and synthesizes the antisymmetric counterpart.
        table: dict[tuple[str, str], dict[str, Poly]] = {}
        for (a, b), value in (brackets or {}).items():
            if a not in self._index or b not in self._index:
                raise StructureError(f"bracket names unknown: ({a!r}, {b!r})")
            if a == b:
                raise StructureError(f"bracket of {a!r} with itself must be omitted (it is zero)")
            entry = {}
            for c, p in value.items():
                if c not in self._index:
                    raise StructureError(f"bracket value names unknown section {c!r}")
                p = p.with_variables(self.base_coords)
                if not p.is_zero():
                    entry[c] = p
            if (a, b) in table:
                raise StructureError(f"duplicate bracket entry ({a!r}, {b!r})")
            table[(a, b)] = entry
            if (b, a) in (brackets or {}):
                mirrored = {c: -p.with_variables(self.base_coords) for c, p in brackets[(b, a)].items()}
                mirrored = {c: p for c, p in mirrored.items() if not p.is_zero()}
                if mirrored != entry:
                    raise StructureError(f"bracket entries ({a!r},{b!r}) and ({b!r},{a!r}) are not antisymmetric")
        full: dict[tuple[str, str], dict[str, Poly]] = {}
        for (a, b), entry in table.items():
            full[(a, b)] = entry
            if (b, a) not in table:
                full[(b, a)] = {c: -p for c, p in entry.items()}
        self.brackets = full
        # Optional provenance for prolongations over fiber bundles.
        self.fiber_of: tuple[AlgebroidStructure, tuple[str, ...]] | None = None

    # -- bookkeeping ---------------------------------------------------------

    @property
    def rank(self) -> int:
        return len(self.sections)

    def index(self, name: str) -> int:
        return self._index[name]

    def section(self, name: str) -> BasisSection:
        return self.sections[self._index[name]]

    def bracket(self, a: str, b: str) -> dict[str, Poly]:
        """Structure functions of [a, b] as a name -> Poly map (may be empty)."""
        return self.brackets.get((a, b), {})

    def structure_function(self, c: str, a: str, b: str) -> Poly:
        """L^c_{ab}."""
        return self.bracket(a, b).get(c, Poly.zero(self.base_coords))

    def anchor_matrix_at(self, point: Mapping[str, Fraction]) -> list[list[Fraction]]:
        """Anchor rows evaluated at a point: rows = sections, columns = coords."""
        return [[evaluate(p, point) for p in self.anchor[name]] for name in self.names]

    def unit_vector(self, name: str, base_point: Mapping[str, Fraction]) -> "FiberVector":
        components = [Fraction(0)] * self.rank
        components[self.index(name)] = Fraction(1)
        return FiberVector(self, dict(base_point), tuple(components))

    def equivalent_to(self, other: "AlgebroidStructure") -> bool:
        """Same coordinates, sections, anchor, and bracket table."""
        if (self.base_coords, self.sections) != (other.base_coords, other.sections):
            return False
        if self.anchor != other.anchor:
            return False
        keys = set(self.brackets) | set(other.brackets)
        zero: dict[str, Poly] = {}
        return all(self.brackets.get(k, zero) == other.brackets.get(k, zero) for k in keys)

    def __repr__(self) -> str:
        return f"AlgebroidStructure(coords={self.base_coords}, basis={self.names})"


@dataclass(frozen=True)
class FiberVector:
    """An element of the fiber over one base point, in basis components."""

    parent: AlgebroidStructure
    base_point: dict[str, Fraction]
    components: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.components) != self.parent.rank:
            raise StructureError("component length must equal the structure rank")

    def anchor_image(self) -> list[Fraction]:
        """Image under the anchor, as coordinates of a base tangent vector."""
        matrix = self.parent.anchor_matrix_at(self.base_point)
        n = len(self.parent.base_coords)
        return [
            sum((self.components[i] * matrix[i][j] for i in range(self.parent.rank)), Fraction(0))
            for j in range(n)
        ]


class AlgebroidForm:
    """Graded exterior form with Poly coefficients on strictly increasing index tuples."""

    __slots__ = ("parent", "degree", "coefficients")

    def __init__(
        self,
        parent: AlgebroidStructure,
        degree: int,
        coefficients: Mapping[tuple[int, ...], Poly] | None = None,
    ):
        if degree < 0:
            raise StructureError(f"degree {degree} out of range")
        if degree > parent.rank and coefficients:
            raise StructureError(f"degree {degree} exceeds rank {parent.rank}")
        self.parent = parent
        self.degree = degree
        clean: dict[tuple[int, ...], Poly] = {}
        for index, coeff in (coefficients or {}).items():
            index = tuple(index)
            if len(index) != degree:
                raise StructureError(f"index {index} has wrong length for degree {degree}")
            if any(not 0 <= i < parent.rank for i in index):
                raise StructureError(f"index {index} out of range")
            if list(index) != sorted(set(index)):
                raise StructureError(f"index {index} is not strictly increasing")
            coeff = coeff.with_variables(parent.base_coords)
            if not coeff.is_zero():
                clean[index] = coeff
        self.coefficients = clean

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zero(cls, parent: AlgebroidStructure, degree: int = 0) -> "AlgebroidForm":
        return cls(parent, degree, {})

    @classmethod
    def function(cls, parent: AlgebroidStructure, value: Poly) -> "AlgebroidForm":
        return cls(parent, 0, {(): value})

    @classmethod
    def dual(cls, parent: AlgebroidStructure, name: str) -> "AlgebroidForm":
        """The dual basis 1-form of a basis section."""
        return cls(parent, 1, {(parent.index(name),): Poly.constant(1, parent.base_coords)})

    @classmethod
    def monomial(cls, parent: AlgebroidStructure, names: Sequence[str], coeff: Poly | None = None) -> "AlgebroidForm":
        """coeff * e^{n1} ^ ... ^ e^{nk} for strictly increasing sections n1..nk."""
        index = tuple(parent.index(n) for n in names)
        if list(index) != sorted(set(index)):
            raise StructureError(f"section names {names} are not strictly increasing in basis order")
        coeff = coeff if coeff is not None else Poly.constant(1, parent.base_coords)
        return cls(parent, len(index), {index: coeff})

    # -- algebra ----------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.coefficients

    def _check(self, other: "AlgebroidForm"):
        if self.parent is not other.parent and not self.parent.equivalent_to(other.parent):
            raise StructureError("forms live on different structures")

    def __eq__(self, other) -> bool:
        if not isinstance(other, AlgebroidForm):
            return NotImplemented
        self._check(other)
        return self.degree == other.degree and self.coefficients == other.coefficients

    def __hash__(self):
        return hash((self.degree, frozenset((i, c) for i, c in self.coefficients.items())))

    def __neg__(self) -> "AlgebroidForm":
        return AlgebroidForm(self.parent, self.degree, {i: -c for i, c in self.coefficients.items()})

    def __add__(self, other: "AlgebroidForm") -> "AlgebroidForm":
        self._check(other)
        if self.degree != other.degree:
            if self.is_zero():
                return other
            if other.is_zero():
                return self
            raise StructureError("cannot add forms of different degree")
        coeffs = dict(self.coefficients)
        for index, coeff in other.coefficients.items():
            total = coeffs.get(index, Poly.zero(self.parent.base_coords)) + coeff
            if total.is_zero():
                coeffs.pop(index, None)
            else:
                coeffs[index] = total
        return AlgebroidForm(self.parent, self.degree, coeffs)

    def __sub__(self, other: "AlgebroidForm") -> "AlgebroidForm":
        return self + (-other)

    def scale(self, factor: Poly | Fraction | int) -> "AlgebroidForm":
        if not isinstance(factor, Poly):
            factor = Poly.constant(factor, self.parent.base_coords)
        return AlgebroidForm(self.parent, self.degree, {i: c * factor for i, c in self.coefficients.items()})

    def __str__(self) -> str:
        if not self.coefficients:
            return "0"
        parts = []
        for index in sorted(self.coefficients):
            body = "^".join(self.parent.names[i] for i in index) or "1"
            parts.append(f"({self.coefficients[index]})*{body}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"AlgebroidForm(deg={self.degree}, {self})"


def _merge_sign(left: tuple[int, ...], right: tuple[int, ...]) -> tuple[tuple[int, ...], int] | None:
    """Sort the concatenation of two increasing tuples; None if they overlap."""
    if set(left) & set(right):
        return None
    merged = []
    sign = 1
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] < right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            # right[j] jumps over the remaining len(left)-i entries of left
            sign *= -1 if (len(left) - i) % 2 else 1
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return tuple(merged), sign


def wedge(omega: AlgebroidForm, theta: AlgebroidForm) -> AlgebroidForm:
    """Exterior product with exact shuffle signs."""
    omega._check(theta)
    parent = omega.parent
    degree = omega.degree + theta.degree
    if degree > parent.rank:
        return AlgebroidForm.zero(parent, degree)
    coeffs: dict[tuple[int, ...], Poly] = {}
    for i1, c1 in omega.coefficients.items():
        for i2, c2 in theta.coefficients.items():
            merged = _merge_sign(i1, i2)
            if merged is None:
                continue
            index, sign = merged
            term = c1 * c2
            if sign < 0:
                term = -term
            total = coeffs.get(index, Poly.zero(parent.base_coords)) + term
            if total.is_zero():
                coeffs.pop(index, None)
            else:
                coeffs[index] = total
    return AlgebroidForm(parent, degree, coeffs)


def delta(omega: AlgebroidForm) -> AlgebroidForm:
    """Lie algebroid exterior derivative, degree k -> k+1."""
    parent = omega.parent
    if omega.degree >= parent.rank:
        return AlgebroidForm.zero(parent, omega.degree + 1)
    result = AlgebroidForm.zero(parent, omega.degree + 1)
    for index, coeff in omega.coefficients.items():
        base = AlgebroidForm(parent, omega.degree, {index: Poly.constant(1, parent.base_coords)})
        result = result + wedge(_delta_function(parent, coeff), base)
        result = result + _delta_basis_monomial(parent, index).scale(coeff)
    return result


def _delta_function(parent: AlgebroidStructure, f: Poly) -> AlgebroidForm:
    """delta f = (df/dx^i) rho_alpha^i e^alpha."""
    from .scalar import partial_derivative

    coeffs: dict[tuple[int, ...], Poly] = {}
    partials = [partial_derivative(f, c) for c in parent.base_coords]
    for alpha, name in enumerate(parent.names):
        row = parent.anchor[name]
        value = Poly.zero(parent.base_coords)
        for dfdx, rho in zip(partials, row):
            if not dfdx.is_zero() and not rho.is_zero():
                value = value + dfdx * rho
        if not value.is_zero():
            coeffs[(alpha,)] = value
    return AlgebroidForm(parent, 1, coeffs)


def _delta_dual(parent: AlgebroidStructure, alpha: int) -> AlgebroidForm:
    """delta e^alpha = -1/2 L^alpha_bc e^b ^ e^c = -sum_{b<c} L^alpha_bc e^b ^ e^c."""
    name = parent.names[alpha]
    coeffs: dict[tuple[int, ...], Poly] = {}
    for b in range(parent.rank):
        for c in range(b + 1, parent.rank):
            l = parent.structure_function(name, parent.names[b], parent.names[c])
            if not l.is_zero():
                coeffs[(b, c)] = -l
    return AlgebroidForm(parent, 2, coeffs)


def _delta_basis_monomial(parent: AlgebroidStructure, index: tuple[int, ...]) -> AlgebroidForm:
    """Leibniz expansion of delta over e^{i1} ^ ... ^ e^{ik}."""
    result = AlgebroidForm.zero(parent, len(index) + 1)
    for j, alpha in enumerate(index):
        left = index[:j]
        right = index[j + 1 :]
        piece = _delta_dual(parent, alpha)
        if piece.is_zero():
            continue
        if left:
            piece = wedge(AlgebroidForm(parent, len(left), {left: Poly.constant(1, parent.base_coords)}), piece)
        if right:
            piece = wedge(piece, AlgebroidForm(parent, len(right), {right: Poly.constant(1, parent.base_coords)}))
        if j % 2:
            piece = -piece
        result = result + piece
    return result


def evaluate_form(omega: AlgebroidForm, point: Mapping[str, Fraction], vectors: Sequence[FiberVector]) -> Fraction:
    """Full antisymmetric multilinear evaluation at one point, exact."""
    if len(vectors) != omega.degree:
        raise StructureError(f"need {omega.degree} vectors, got {len(vectors)}")
    for v in vectors:
        if v.base_point != dict(point):
            raise StructureError("vectors must share the evaluation base point")
    total = Fraction(0)
    for index, coeff in omega.coefficients.items():
        matrix = [[v.components[i] for i in index] for v in vectors]
        minor = linalg.det(matrix) if index else Fraction(1)
        if minor != 0:
            total += evaluate(coeff, point) * minor
    return total


def restrict_vanishes(omega: AlgebroidForm, base_point: Mapping[str, Fraction], span: Sequence[FiberVector]) -> bool:
    """True iff omega evaluates to zero on every increasing tuple from span.

    Raises StructureError on a degenerate spanning set (rank below count).
    """
    matrix = [list(v.components) for v in span]
    if linalg.rank(matrix) < len(span):
        raise StructureError("degenerate spanning set")
    if omega.degree > len(span):
        return True
    for combo in itertools.combinations(range(len(span)), omega.degree):
        if evaluate_form(omega, base_point, [span[i] for i in combo]) != 0:
            return False
    return True


@dataclass
class ValidationReport:
    """Exact symbolic validation witnesses; structure is valid iff all lists are empty."""

    antisymmetry_violations: list[str] = field(default_factory=list)
    anchor_witnesses: list[str] = field(default_factory=list)  # delta^2 x^i != 0
    jacobi_witnesses: list[str] = field(default_factory=list)  # delta^2 e^alpha != 0

    @property
    def valid(self) -> bool:
        return not (self.antisymmetry_violations or self.anchor_witnesses or self.jacobi_witnesses)

    def summary(self) -> str:
        if self.valid:
            return "VALID"
        lines = ["INVALID"]
        for v in self.antisymmetry_violations:
            lines.append(f"  antisymmetry: {v}")
        for v in self.anchor_witnesses:
            lines.append(f"  anchor compatibility (delta^2 on coordinate): {v}")
        for v in self.jacobi_witnesses:
            lines.append(f"  Jacobi (delta^2 on dual): {v}")
        return "\n".join(lines)


def validate_structure(structure: AlgebroidStructure) -> ValidationReport:
    """Check bracket antisymmetry and the delta^2 = 0 identities, exactly."""
    report = ValidationReport()
    for (a, b), entry in structure.brackets.items():
        mirrored = structure.brackets.get((b, a), {})
        for c in set(entry) | set(mirrored):
            lhs = entry.get(c, Poly.zero(structure.base_coords))
            rhs = mirrored.get(c, Poly.zero(structure.base_coords))
            if lhs != -rhs and a < b:
                report.antisymmetry_violations.append(f"L^{c}_({a},{b}) != -L^{c}_({b},{a})")
    for coord in structure.base_coords:
        f = AlgebroidForm.function(structure, Poly.variable(coord, structure.base_coords))
        dd = delta(delta(f))
        if not dd.is_zero():
            report.anchor_witnesses.append(f"delta^2 {coord} = {dd}")
    for name in structure.names:
        dd = delta(delta(AlgebroidForm.dual(structure, name)))
        if not dd.is_zero():
            report.jacobi_witnesses.append(f"delta^2 e^{name} = {dd}")
    return report
