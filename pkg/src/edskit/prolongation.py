"""Prolongation algebroids over fiber bundles, pullbacks through immersions,
and verification of candidate integral manifolds.

Two constructions are instantiated, the two the theory keeps constant-rank:

* build_fiber_prolongation: lift a structure over M to one over M x F by
  coordinate-lifting the basis and adjoining one splitting section per fiber
  coordinate; brackets with the new sections vanish.
* build_pullback: given an immersion candidate written per-coordinate as
  polynomials or truncated series, produce the induced structure over the
  domain together with the pullback table

      I* kbar^a = k^a,      I* gammabar^j = (dz^j/dx^i) gamma^i.

Verification reports are order-qualified: for series candidates of order M
only residual degrees <= M-1 are determined (the pullback differentiates the
components), and the report says which effective order it certifies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

from . import linalg
from .algebroid import AlgebroidForm, AlgebroidStructure, BasisSection, StructureError
from .scalar import Poly, TruncatedSeries, evaluate, partial_derivative, substitute

Component = Union[Poly, TruncatedSeries]


@dataclass(frozen=True)
class FiberBundleSpec:
    """A trivial fiber bundle over the base structure's chart."""

    base: AlgebroidStructure
    fiber_coords: tuple[str, ...]

    def __post_init__(self):
        overlap = set(self.base.base_coords) & set(self.fiber_coords)
        if overlap:
            raise StructureError(f"fiber coordinates collide with base coordinates: {sorted(overlap)}")
        if len(set(self.fiber_coords)) != len(self.fiber_coords):
            raise StructureError("duplicate fiber coordinates")


def build_fiber_prolongation(spec: FiberBundleSpec) -> AlgebroidStructure:
    """Prolongation structure over (base coords + fiber coords)."""
    base = spec.base
    coords = base.base_coords + spec.fiber_coords
    for u in spec.fiber_coords:
        if u in base.names:
            raise StructureError(f"fiber coordinate {u!r} collides with a section name")
    sections = list(base.sections)
    lifted_names = set(base.names)
    fiber_sections = []
    for u in spec.fiber_coords:
        name = f"D{u}"
        if name in lifted_names:
            raise StructureError(f"generated section name {name!r} collides")
        fiber_sections.append(BasisSection(name, "splitting", u))
    sections.extend(fiber_sections)

    zero = Poly.zero(coords)
    anchor = {}
    for s in base.sections:
        row = [p.with_variables(coords) for p in base.anchor[s.name]]
        anchor[s.name] = row + [zero] * len(spec.fiber_coords)
    for s, u in zip(fiber_sections, spec.fiber_coords):
        anchor[s.name] = [Poly.constant(1 if c == u else 0, coords) for c in coords]

    brackets = {}
    for (a, b), entry in base.brackets.items():
        brackets[(a, b)] = {c: p.with_variables(coords) for c, p in entry.items()}
    result = AlgebroidStructure(coords, sections, anchor, brackets)
    result.fiber_of = (base, spec.fiber_coords)
    return result


class SeriesManifold:
    """Candidate immersion given per-coordinate as Poly or TruncatedSeries.

    Domain coordinates map to themselves unless an explicit component is
    supplied; the Jacobian at the domain origin must have full column rank.
    """

    def __init__(
        self,
        domain_coords: Sequence[str],
        components: Mapping[str, Component],
        ambient: AlgebroidStructure,
    ):
        self.domain_coords = tuple(domain_coords)
        self.ambient = ambient
        comps: dict[str, Component] = {}
        for coord in ambient.base_coords:
            if coord in components:
                comps[coord] = components[coord]
            elif coord in self.domain_coords:
                comps[coord] = Poly.variable(coord, self.domain_coords)
            else:
                raise StructureError(f"no component supplied for ambient coordinate {coord!r}")
        for extra in set(components) - set(ambient.base_coords):
            raise StructureError(f"component {extra!r} is not an ambient coordinate")
        for coord, comp in comps.items():
            if set(comp.variables) - set(self.domain_coords):
                raise StructureError(f"component for {coord!r} uses non-domain variables")
            comps[coord] = comp.with_variables(self.domain_coords)
        self.components = comps
        self.order: int | None = min(
            (c.order for c in comps.values() if isinstance(c, TruncatedSeries)), default=None
        )
        if linalg.rank(self.jacobian_at_origin()) < len(self.domain_coords):
            raise StructureError("Jacobian at domain origin is rank deficient; not an immersion there")

    def component(self, coord: str) -> Component:
        return self.components[coord]

    def partials(self, coord: str) -> list[Component]:
        """d z^coord / d x^i for each domain coordinate, in domain order."""
        comp = self.components[coord]
        return [partial_derivative(comp, x) for x in self.domain_coords]

    def jacobian_at_origin(self) -> list[list[Fraction]]:
        origin = {x: Fraction(0) for x in self.domain_coords}
        rows = []
        for coord in self.ambient.base_coords:
            rows.append([evaluate(p, origin) for p in self.partials(coord)])
        return rows

    def value_at_origin(self) -> dict[str, Fraction]:
        origin = {x: Fraction(0) for x in self.domain_coords}
        return {coord: evaluate(self.components[coord], origin) for coord in self.ambient.base_coords}

    def is_section_of(self, bundle_base: AlgebroidStructure) -> bool:
        """True iff domain = bundle base coords with identity components there."""
        if self.domain_coords != bundle_base.base_coords:
            return False
        for coord in self.domain_coords:
            comp = self.components[coord]
            ident = Poly.variable(coord, self.domain_coords)
            if isinstance(comp, TruncatedSeries):
                if comp.to_poly() != ident:
                    return False
            elif comp != ident:
                return False
        return True


@dataclass
class PullbackOperator:
    """Pullback through a candidate immersion: induced structure + dual images."""

    source: AlgebroidStructure
    induced: AlgebroidStructure
    table: dict[str, AlgebroidForm]  # ambient section name -> induced 1-form
    candidate: SeriesManifold
    order: int | None  # None for exact polynomial candidates

    def pull_function(self, f: Poly) -> Component:
        """Compose an ambient-coordinate function with the candidate map."""
        return _compose(f, self.candidate, self.order)

    def pull_form(self, omega: AlgebroidForm) -> "PulledForm":
        """I* of an ambient form, as index-tuple -> scalar over the domain."""
        if omega.parent is not self.source and not omega.parent.equivalent_to(self.source):
            raise StructureError("form does not live on the pullback's source structure")
        n = self.induced.rank
        accum: dict[tuple[int, ...], Component] = {}
        for index, coeff in omega.coefficients.items():
            pulled_coeff = self.pull_function(coeff)
            factor_rows = [self.table[self.source.names[i]] for i in index]
            # Expand the wedge of pulled 1-forms over induced basis indices.
            choices = []
            for row in factor_rows:
                entries = [(idx[0], c) for idx, c in row.coefficients.items()]
                choices.append(entries)
            for combo in itertools.product(*choices):
                indices = [c[0] for c in combo]
                if len(set(indices)) != len(indices):
                    continue
                sign, sorted_idx = _sort_sign(indices)
                term: Component = pulled_coeff
                for _, c in combo:
                    term = _mul(term, _domain_scalar(c, self.candidate, self.order))
                if sign < 0:
                    term = _neg(term)
                key = tuple(sorted_idx)
                accum[key] = _add(accum[key], term) if key in accum else term
        accum = {k: v for k, v in accum.items() if not v.is_zero()}
        return PulledForm(self.induced, omega.degree, accum, self.order)


@dataclass
class PulledForm:
    """A form over the induced structure whose coefficients may be series."""

    parent: AlgebroidStructure
    degree: int
    coefficients: dict[tuple[int, ...], Component]
    order: int | None

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coefficients.values())

    def lowest_nonzero_degree(self) -> int | None:
        """Smallest total degree of any nonzero coefficient term, or None."""
        best: int | None = None
        for coeff in self.coefficients.values():
            for exponent, value in coeff.terms.items():
                if value != 0:
                    d = sum(exponent)
                    best = d if best is None else min(best, d)
        return best

    def to_algebroid_form(self) -> AlgebroidForm:
        coeffs = {}
        for index, c in self.coefficients.items():
            coeffs[index] = c if isinstance(c, Poly) else c.to_poly()
        return AlgebroidForm(self.parent, self.degree, coeffs)


def _sort_sign(indices: Sequence[int]) -> tuple[int, list[int]]:
    sign = 1
    items = list(indices)
    for i in range(len(items)):
        for j in range(len(items) - 1 - i):
            if items[j] > items[j + 1]:
                items[j], items[j + 1] = items[j + 1], items[j]
                sign = -sign
    return sign, items


def _compose(f: Poly, candidate: SeriesManifold, order: int | None) -> Component:
    assignment_p: dict[str, Poly] = {}
    if order is None:
        for v in f.variables:
            comp = candidate.components[v]
            assignment_p[v] = comp if isinstance(comp, Poly) else comp.to_poly()
        return substitute(f, assignment_p).with_variables(candidate.domain_coords)
    from .scalar import series_compose

    args = {}
    for v in f.variables:
        comp = candidate.components[v]
        if isinstance(comp, Poly):
            comp = TruncatedSeries.from_poly(comp.with_variables(candidate.domain_coords), order)
        args[v] = comp.truncate(order) if comp.order > order else comp
    return series_compose(f, args, order)


def _domain_scalar(p: Component, candidate: SeriesManifold, order: int | None) -> Component:
    if order is None:
        return p.with_variables(candidate.domain_coords) if isinstance(p, Poly) else p.to_poly()
    if isinstance(p, Poly):
        return TruncatedSeries.from_poly(p.with_variables(candidate.domain_coords), order)
    return p.truncate(order) if p.order > order else p


def _mul(a: Component, b: Component):
    if isinstance(a, TruncatedSeries) or isinstance(b, TruncatedSeries):
        if isinstance(a, Poly):
            a = TruncatedSeries.from_poly(a, b.order)
        if isinstance(b, Poly):
            b = TruncatedSeries.from_poly(b, a.order)
    return a * b


def _add(a: Component, b: Component):
    if isinstance(a, TruncatedSeries) or isinstance(b, TruncatedSeries):
        if isinstance(a, Poly):
            a = TruncatedSeries.from_poly(a, b.order)
        if isinstance(b, Poly):
            b = TruncatedSeries.from_poly(b, a.order)
    return a + b


def _neg(a: Component):
    return -a


def build_pullback(candidate: SeriesManifold) -> PullbackOperator:
    """Construct the induced structure over the domain and the dual-image table.

    The working order for series candidates is the candidate's own order minus
    one (differentiating the components loses one degree).
    """
    ambient = candidate.ambient
    order = None if candidate.order is None else candidate.order - 1
    domain = candidate.domain_coords

    sections = [BasisSection(k, "kernel") for k in ambient.kernel_names]
    gamma_names = {}
    for x in domain:
        name = f"g_{x}"
        if name in ambient.kernel_names:
            name = f"gamma_{x}"
        gamma_names[x] = name
        sections.append(BasisSection(name, "splitting", x))

    zero = Poly.zero(domain)
    anchor = {}
    for k in ambient.kernel_names:
        anchor[k] = [zero] * len(domain)
    for x in domain:
        anchor[gamma_names[x]] = [Poly.constant(1 if c == x else 0, domain) for c in domain]

    # Induced brackets: ambient structure functions composed with the map and
    # weighted by the Jacobian factors of the splitting legs.  Split-adapted
    # ambient brackets are kernel-valued, which build_* relies on.
    for (a, b), entry in ambient.brackets.items():
        for c in entry:
            if c not in ambient.kernel_names:
                raise StructureError(
                    f"ambient bracket [{a},{b}] has non-kernel value {c!r}; structure is not split-adapted valid"
                )

    partials: dict[str, list[Component]] = {z: candidate.partials(z) for z in ambient.base_coords}

    def composed(poly: Poly) -> Poly:
        out = _compose(poly, candidate, order)
        return out if isinstance(out, Poly) else out.to_poly()

    def factor(z: str, i: int) -> Poly:
        p = partials[z][i]
        return p if isinstance(p, Poly) else p.to_poly()

    splitting_by_coord = ambient.splitting_of  # ambient coord -> section name
    induced_brackets: dict[tuple[str, str], dict[str, Poly]] = {}

    def add_bracket(a: str, b: str, values: dict[str, Poly]):
        values = {c: p for c, p in values.items() if not p.is_zero()}
        if values:
            induced_brackets[(a, b)] = values

    kernel = ambient.kernel_names
    for ka, kb in itertools.combinations(kernel, 2):
        entry = ambient.bracket(ka, kb)
        add_bracket(ka, kb, {c: composed(p) for c, p in entry.items()})
    for i, x in enumerate(domain):
        for ka in kernel:
            values: dict[str, Poly] = {}
            for z in ambient.base_coords:
                entry = ambient.bracket(splitting_by_coord[z], ka)
                for c, p in entry.items():
                    term = factor(z, i) * composed(p)
                    values[c] = values.get(c, Poly.zero(domain)) + term
            add_bracket(gamma_names[x], ka, values)
    for i, j in itertools.combinations(range(len(domain)), 2):
        values = {}
        for z1 in ambient.base_coords:
            for z2 in ambient.base_coords:
                entry = ambient.bracket(splitting_by_coord[z1], splitting_by_coord[z2])
                for c, p in entry.items():
                    term = factor(z1, i) * factor(z2, j) * composed(p)
                    values[c] = values.get(c, Poly.zero(domain)) + term
        add_bracket(gamma_names[domain[i]], gamma_names[domain[j]], values)

    induced = AlgebroidStructure(domain, sections, anchor, induced_brackets)

    table: dict[str, AlgebroidForm] = {}
    for k in ambient.kernel_names:
        table[k] = AlgebroidForm.dual(induced, k)
    for z in ambient.base_coords:
        coeffs = {}
        for i, x in enumerate(domain):
            p = factor(z, i)
            if not p.is_zero():
                coeffs[(induced.index(gamma_names[x]),)] = p
        table[splitting_by_coord[z]] = AlgebroidForm(induced, 1, coeffs)

    return PullbackOperator(ambient, induced, table, candidate, order)


@dataclass
class GeneratorVerification:
    label: str
    clean: bool
    first_failure_degree: int | None


@dataclass
class VerificationReport:
    """Per-generator pullback residuals, qualified by the order actually checked."""

    requested_order: int | None
    effective_order: int | None  # None means exact (polynomial candidate)
    generators: list[GeneratorVerification]

    @property
    def clean(self) -> bool:
        return all(g.clean for g in self.generators)

    def summary(self) -> str:
        scope = "exactly" if self.effective_order is None else f"through total degree {self.effective_order}"
        lines = [f"integral-manifold verification ({scope}):"]
        for g in self.generators:
            if g.clean:
                lines.append(f"  {g.label}: CLEAN")
            else:
                lines.append(f"  {g.label}: nonzero at total degree {g.first_failure_degree}")
        lines.append("verdict: " + ("CLEAN" if self.clean else "NOT an integral manifold at this order"))
        return "\n".join(lines)


def verify_integral_manifold(candidate: SeriesManifold, ideal, requested_order: int | None = None) -> VerificationReport:
    """Pull every closed generator back through the candidate and report residuals.

    For series candidates the effective order is capped at candidate.order - 1;
    asking for more raises no error but the report records the cap.
    """
    operator = build_pullback(candidate)
    effective = operator.order
    if effective is not None and requested_order is not None and requested_order < effective:
        effective = requested_order
        operator = PullbackOperator(
            operator.source, operator.induced, operator.table, operator.candidate, effective
        )
    results = []
    for label, form in ideal.labelled_closed_generators():
        pulled = operator.pull_form(form)
        degree = pulled.lowest_nonzero_degree()
        results.append(GeneratorVerification(label, degree is None, degree))
    return VerificationReport(requested_order, effective, results)


def section_pullback_equivalence(candidate: SeriesManifold) -> bool:
    """Check I = S for a section of a fiber prolongation, entry by entry.

    The ambient structure must carry fiber-bundle provenance; the candidate
    must be a section of that bundle (identity on the base coordinates).
    """
    ambient = candidate.ambient
    if ambient.fiber_of is None:
        raise StructureError("ambient structure is not a fiber prolongation")
    base, fiber_coords = ambient.fiber_of
    if not candidate.is_section_of(base):
        raise StructureError("candidate is not a section of the fiber bundle")

    operator = build_pullback(candidate)
    induced = operator.induced
    order = operator.order

    # Direct construction from the section-induced map: lifted duals pull back
    # to themselves, fiber duals to (ds^mu/dx^i) gamma^i.
    for name in base.names:
        image = operator.table[name]
        section = base.section(name)
        if section.kind == "kernel":
            expected = AlgebroidForm.dual(induced, name)
        else:
            x = section.splits
            expected = AlgebroidForm.dual(induced, induced.splitting_of[x])
        if image != expected:
            return False
    for u in fiber_coords:
        image = operator.table[ambient.splitting_of[u]]
        comp = candidate.components[u]
        aligned = comp.with_variables(candidate.domain_coords) if isinstance(comp, Poly) else comp
        for i, x in enumerate(candidate.domain_coords):
            expected_p = partial_derivative(aligned, x)
            expected_p = expected_p if isinstance(expected_p, Poly) else expected_p.to_poly()
            idx = (induced.index(induced.splitting_of[x]),)
            actual = image.coefficients.get(idx, Poly.zero(induced.base_coords))
            if order is not None:
                if TruncatedSeries.from_poly(actual, order) != TruncatedSeries.from_poly(expected_p, order):
                    return False
            elif actual != expected_p:
                return False

    # The induced structure must reproduce the base's bracket table under the
    # kernel-name / splitting-coordinate identification.
    for a in base.names:
        for b in base.names:
            expected_entry = {
                _rename(c, base, induced): p.with_variables(induced.base_coords)
                for c, p in base.bracket(a, b).items()
            }
            actual_entry = induced.bracket(_rename(a, base, induced), _rename(b, base, induced))
            keys = set(expected_entry) | set(actual_entry)
            zero_poly = Poly.zero(induced.base_coords)
            if any(expected_entry.get(k, zero_poly) != actual_entry.get(k, zero_poly) for k in keys):
                return False
    return True


def _rename(name: str, base: AlgebroidStructure, induced: AlgebroidStructure) -> str:
    section = base.section(name)
    if section.kind == "kernel":
        return name
    return induced.splitting_of[section.splits]
