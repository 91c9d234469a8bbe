"""Finite probability spaces with partition-generated sigma-algebras.

On a finite sample space every sigma-algebra is generated by a unique
partition, so a space is stored as its outcome list, the generating
partition (``atoms``) and one exact mass per atom. An event is measurable iff
it is a union of atoms, and every measurability question below reduces to
that test.

All probabilities are :class:`fractions.Fraction`; floats are refused.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from functools import cached_property

from .errors import (
    DuplicateOutcome,
    InvalidRational,
    MassNotOne,
    MismatchedInput,
    NegativeMass,
    NotAPartition,
    NotMeasurable,
    NotTotal,
    UnknownOutcome,
)

Rational = Fraction

MAX_DECIMAL_DIGITS = 12
_DECIMAL_RE = re.compile(r"[+-]?\d+(?:\.(\d+))?")
_RATIO_RE = re.compile(r"([+-]?\d+)\s*/\s*(\d+)")


def to_rational(value) -> Fraction:
    """Convert ``value`` to an exact rational.

    Accepts ints, Fractions, Decimals, and strings of the form ``"n/d"`` or a
    plain decimal such as ``"0.7"``. Decimals may carry at most
    ``MAX_DECIMAL_DIGITS`` fractional digits. Floats are rejected because
    their binary value is rarely the number that was written.
    """
    if isinstance(value, bool):
        raise InvalidRational(f"not a number: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, Decimal):
        if not value.is_finite():
            raise InvalidRational(f"not a finite number: {value}")
        exponent = value.as_tuple().exponent
        if -exponent > MAX_DECIMAL_DIGITS:
            raise InvalidRational(
                f"{value} has more than {MAX_DECIMAL_DIGITS} fractional digits")
        return Fraction(value)
    if isinstance(value, float):
        raise InvalidRational(
            f"float {value!r} is inexact; write it as a string such as '7/10' or '0.7'")
    if isinstance(value, str):
        text = value.strip()
        m = _RATIO_RE.fullmatch(text)
        if m:
            den = int(m.group(2))
            if den == 0:
                raise InvalidRational(f"zero denominator in {value!r}")
            return Fraction(int(m.group(1)), den)
        m = _DECIMAL_RE.fullmatch(text)
        if m:
            if m.group(1) and len(m.group(1)) > MAX_DECIMAL_DIGITS:
                raise InvalidRational(
                    f"{value!r} has more than {MAX_DECIMAL_DIGITS} fractional digits")
            return Fraction(text)
        raise InvalidRational(f"cannot read {value!r} as a rational")
    raise InvalidRational(f"cannot read {value!r} as a rational")


def format_rational(q: Fraction) -> str:
    """Canonical ``"n/d"`` text, used everywhere rationals are written out."""
    return f"{q.numerator}/{q.denominator}"


def block_label(block: Iterable[str], order: Sequence[str] | None = None) -> str:
    """Display form ``{a,b}`` with members in ``order`` (or sorted)."""
    block = set(block)
    members = [x for x in order if x in block] if order is not None else sorted(block)
    return "{" + ",".join(members) + "}"


@dataclass(frozen=True)
class Event:
    space_id: str
    members: frozenset[str]


@dataclass(frozen=True)
class Skeleton:
    """Outcomes and generating partition of a space, without a measure."""

    id: str
    outcomes: tuple[str, ...]
    atoms: tuple[frozenset[str], ...]

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "atoms", tuple(frozenset(a) for a in self.atoms))
        _check_partition(self.outcomes, self.atoms)

    @cached_property
    def atom_index(self) -> dict[str, int]:
        return {x: i for i, block in enumerate(self.atoms) for x in block}

    @property
    def skeleton(self) -> Skeleton:
        return Skeleton(self.id, self.outcomes, self.atoms)

    def members(self, event) -> frozenset[str]:
        """Validate an event (Event or iterable of labels) against this space."""
        if isinstance(event, Event):
            if event.space_id != self.id:
                raise MismatchedInput(
                    f"event belongs to {event.space_id!r}, not {self.id!r}")
            event = event.members
        members = frozenset(event)
        for x in members:
            if x not in self.atom_index:
                raise UnknownOutcome(x, self.id)
        return members

    def straddled_atom(self, event) -> frozenset[str] | None:
        """First atom that ``event`` cuts in two, or None if measurable."""
        members = self.members(event)
        for block in self.atoms:
            inside = block & members
            if inside and inside != block:
                return block
        return None

    def is_measurable(self, event) -> bool:
        return self.straddled_atom(event) is None

    def event(self, members) -> Event:
        return Event(self.id, self.members(members))


@dataclass(frozen=True)
class FiniteProbSpace(Skeleton):
    """A finite probability space; ``masses[i]`` is the mass of ``atoms[i]``."""

    masses: tuple[Fraction, ...] = field(default=())

    def __post_init__(self):
        super().__post_init__()
        masses = tuple(to_rational(m) for m in self.masses)
        object.__setattr__(self, "masses", masses)
        if len(masses) != len(self.atoms):
            raise NotAPartition(
                f"space {self.id!r}: {len(self.atoms)} atoms but {len(masses)} masses")
        for block, m in zip(self.atoms, masses):
            if m < 0:
                raise NegativeMass(block, m)
        total = sum(masses, Fraction(0))
        if total != 1:
            raise MassNotOne(total)

    @classmethod
    def unchecked(cls, id, outcomes, atoms, masses) -> FiniteProbSpace:
        """Build without validating masses; for corrupted-data fixtures only."""
        self = object.__new__(cls)
        object.__setattr__(self, "id", id)
        object.__setattr__(self, "outcomes", tuple(outcomes))
        object.__setattr__(self, "atoms", tuple(frozenset(a) for a in atoms))
        object.__setattr__(self, "masses", tuple(Fraction(m) for m in masses))
        return self

    @property
    def measure(self) -> dict[frozenset[str], Fraction]:
        return dict(zip(self.atoms, self.masses))

    def measure_of(self, event) -> Fraction:
        members = self.members(event)
        total = Fraction(0)
        for block, m in zip(self.atoms, self.masses):
            inside = block & members
            if inside == block:
                total += m
            elif inside:
                raise NotMeasurable(members, block)
        return total

    def with_masses(self, masses, id=None) -> FiniteProbSpace:
        return FiniteProbSpace(self.id if id is None else id, self.outcomes, self.atoms, masses)


def _check_partition(outcomes, atoms):
    if not outcomes:
        raise NotAPartition("sample space is empty")
    seen = set()
    for x in outcomes:
        if x in seen:
            raise DuplicateOutcome(x)
        seen.add(x)
    covered = set()
    for block in atoms:
        if not block:
            raise NotAPartition("empty atom block")
        for x in block:
            if x not in seen:
                raise UnknownOutcome(x)
            if x in covered:
                raise NotAPartition(f"outcome {x!r} lies in two atom blocks")
            covered.add(x)
    missing = [x for x in outcomes if x not in covered]
    if missing:
        raise NotAPartition(f"outcomes not covered by any atom block: {missing}")


def make_skeleton(id: str, outcomes: Sequence[str], atoms=None) -> Skeleton:
    """Skeleton with singleton atoms unless ``atoms`` is given."""
    outcomes = tuple(outcomes)
    if atoms is None:
        atoms = [[x] for x in outcomes]
    return Skeleton(id, outcomes, tuple(frozenset(a) for a in atoms))


def make_space(id: str, outcomes: Sequence[str], atoms, masses) -> FiniteProbSpace:
    """Validated space; ``atoms=None`` means singleton atoms in outcome order.

    ``masses`` is either a sequence aligned with ``atoms`` or a mapping from
    atom (a frozenset, or a bare label for singleton atoms) to mass.
    """
    outcomes = tuple(outcomes)
    if atoms is None:
        atoms = [[x] for x in outcomes]
    atoms = tuple(frozenset(a) for a in atoms)
    if isinstance(masses, Mapping):
        keyed = {(k if isinstance(k, frozenset) else frozenset([k])): v
                 for k, v in masses.items()}
        try:
            masses = [keyed[a] for a in atoms]
        except KeyError as exc:
            raise NotAPartition(f"no mass given for atom {set(exc.args[0])}") from None
    return FiniteProbSpace(id, outcomes, atoms, tuple(masses))


def uniform_space(id: str, outcomes: Sequence[str]) -> FiniteProbSpace:
    n = len(outcomes)
    return make_space(id, outcomes, None, [Fraction(1, n)] * n)


def measure_of(space: FiniteProbSpace, event) -> Fraction:
    """Probability of a measurable event; raises NotMeasurable otherwise."""
    return space.measure_of(event)


def sigma_closure(outcomes: Sequence[str], generators: Iterable[Iterable[str]]) -> tuple[frozenset[str], ...]:
    """Generating partition of the sigma-algebra spanned by ``generators``.

    Two outcomes share a cell iff they belong to exactly the same generator
    events. Cells are ordered by their first outcome.
    """
    outcomes = tuple(outcomes)
    known = set(outcomes)
    gens = []
    for g in generators:
        g = frozenset(g)
        for x in g:
            if x not in known:
                raise UnknownOutcome(x)
        gens.append(g)
    cells: dict[tuple[bool, ...], list[str]] = {}
    for x in outcomes:
        cells.setdefault(tuple(x in g for g in gens), []).append(x)
    return tuple(frozenset(c) for c in cells.values())


def table_of(mapping) -> Mapping[str, str]:
    """The outcome table of an AbstractionMap, PathComposition or plain mapping."""
    return getattr(mapping, "mapping", mapping)


def check_total(src: Skeleton, dst: Skeleton, mapping) -> Mapping[str, str]:
    table = table_of(mapping)
    for x, y in table.items():
        if x not in src.atom_index:
            raise UnknownOutcome(x, src.id)
        if y not in dst.atom_index:
            raise UnknownOutcome(y, dst.id)
    missing = [x for x in src.outcomes if x not in table]
    if missing:
        raise NotTotal(missing, src.id)
    return table


def preimage(mapping, event: Iterable[str]) -> frozenset[str]:
    event = frozenset(event)
    return frozenset(x for x, y in table_of(mapping).items() if y in event)


@dataclass(frozen=True)
class MeasurabilityReport:
    """``violations`` lists (dst atom, straddled src atom) pairs."""

    measurable: bool
    violations: tuple[tuple[frozenset[str], frozenset[str]], ...] = ()

    def __bool__(self):
        return self.measurable


def check_measurable_map(src: Skeleton, dst: Skeleton, mapping) -> MeasurabilityReport:
    """Is the preimage of every atom of ``dst`` a union of atoms of ``src``?"""
    table = check_total(src, dst, mapping)
    violations = []
    for block in dst.atoms:
        pre = frozenset(x for x in src.outcomes if table[x] in block)
        for src_block in src.atoms:
            inside = src_block & pre
            if inside and inside != src_block:
                violations.append((block, src_block))
    return MeasurabilityReport(not violations, tuple(violations))


def _pushed_masses(src: FiniteProbSpace, dst: Skeleton, table) -> list[Fraction]:
    # Each src atom lands inside one dst atom once measurability is known.
    masses = [Fraction(0)] * len(dst.atoms)
    for block, m in zip(src.atoms, src.masses):
        x = next(iter(block))
        masses[dst.atom_index[table[x]]] += m
    return masses


def pushforward(src: FiniteProbSpace, mapping, dst_outcomes, dst_atoms=None, *, id=None) -> FiniteProbSpace:
    """Push the measure of ``src`` along ``mapping``.

    ``dst_outcomes`` may be a Skeleton (or space), whose id and atoms are then
    used; otherwise it is an outcome list and ``dst_atoms`` defaults to
    singletons. Raises NotMeasurable on the first straddled atom.
    """
    if isinstance(dst_outcomes, Skeleton):
        dst = dst_outcomes.skeleton
        if id is not None:
            dst = Skeleton(id, dst.outcomes, dst.atoms)
    else:
        dst = make_skeleton(id if id is not None else f"{src.id}*", dst_outcomes, dst_atoms)
    report = check_measurable_map(src, dst, mapping)
    if not report:
        block, src_block = report.violations[0]
        raise NotMeasurable(preimage(mapping, block), src_block)
    masses = _pushed_masses(src, dst, table_of(mapping))
    assert sum(masses) == 1, "pushforward lost mass"
    return FiniteProbSpace(dst.id, dst.outcomes, dst.atoms, tuple(masses))


@dataclass(frozen=True)
class Mismatch:
    """``expected`` is the target's mass of ``atom``; ``actual`` the preimage mass
    in the source (None when the preimage is not measurable)."""

    atom: frozenset[str]
    expected: Fraction
    actual: Fraction | None


def preservation_mismatches(src: FiniteProbSpace, dst: FiniteProbSpace, mapping) -> tuple[Mismatch, ...]:
    """Atoms of ``dst`` whose mass differs from the ``src`` mass of their preimage.

    Both sides are additive over disjoint atoms, so agreement on atoms is
    agreement on every event of ``dst``.
    """
    table = check_total(src, dst, mapping)
    out = []
    for block, m in zip(dst.atoms, dst.masses):
        pre = frozenset(x for x in src.outcomes if table[x] in block)
        try:
            actual = src.measure_of(pre)
        except NotMeasurable:
            actual = None
        if actual != m:
            out.append(Mismatch(block, m, actual))
    return tuple(out)
