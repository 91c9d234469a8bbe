"""Abstraction maps and the three one-layer abstraction patterns.

* direct: a bijective measurable map whose pushforward is the abstract measure;
* divergent: one concrete space pushed along several branch maps, with the
  branch images gathered into a tagged disjoint union carrying the weighted
  mixture;
* convergent: several concrete spaces pushed into one abstract space, whose
  measure is the weighted sum of the leg pushforwards.

Weights are explicit rationals summing to one; they default to uniform.
"""

from __future__ import annotations

import enum
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction
from types import MappingProxyType

from .errors import (
    InvalidWeights,
    MismatchedInput,
    NotBijective,
    NotMeasurable,
    WeightsNotNormalized,
)
from .measure import (
    FiniteProbSpace,
    MeasurabilityReport,
    Mismatch,
    Skeleton,
    check_measurable_map,
    check_total,
    make_skeleton,
    preimage,
    preservation_mismatches,
    pushforward,
    to_rational,
)


class MapKind(str, enum.Enum):
    DIRECT = "direct"
    BRANCH = "branch-of-divergent"
    LEG = "leg-of-convergent"
    GENERIC = "generic"


@dataclass(frozen=True)
class AbstractionMap:
    """A total function from the outcomes of ``src_id`` to those of ``dst_id``.

    ``measurable`` caches the last measurability verdict computed by
    :func:`make_map` or :meth:`checked`; it does not take part in equality.
    """

    src_id: str
    dst_id: str
    mapping: Mapping[str, str]
    kind: MapKind = MapKind.GENERIC
    name: str | None = None
    measurable: bool | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mapping", MappingProxyType(dict(self.mapping)))
        object.__setattr__(self, "kind", MapKind(self.kind))

    __hash__ = None

    def __call__(self, x: str) -> str:
        return self.mapping[x]

    def image(self, event) -> frozenset[str]:
        return frozenset(self.mapping[x] for x in event)

    def preimage(self, event) -> frozenset[str]:
        return preimage(self.mapping, event)

    def is_injective(self) -> bool:
        return len(set(self.mapping.values())) == len(self.mapping)

    def then(self, other: AbstractionMap) -> AbstractionMap:
        """Pointwise composition: apply ``self`` first, then ``other``."""
        if other.src_id != self.dst_id:
            raise MismatchedInput(
                f"cannot compose {self.src_id}->{self.dst_id} with {other.src_id}->{other.dst_id}")
        return AbstractionMap(self.src_id, other.dst_id,
                              {x: other.mapping[y] for x, y in self.mapping.items()})

    def inverse(self) -> AbstractionMap:
        if not self.is_injective():
            raise NotBijective(f"map {self.src_id}->{self.dst_id} is not injective")
        return AbstractionMap(self.dst_id, self.src_id,
                              {y: x for x, y in self.mapping.items()}, self.kind)

    def checked(self, src: Skeleton, dst: Skeleton) -> AbstractionMap:
        return replace(self, measurable=check_measurable_map(src, dst, self).measurable)


def is_bijection(src: Skeleton, dst: Skeleton, mapping) -> bool:
    table = check_total(src, dst, mapping)
    return len(set(table.values())) == len(src.outcomes) == len(dst.outcomes)


def make_map(src: Skeleton, dst: Skeleton, mapping, kind=MapKind.GENERIC, name=None) -> AbstractionMap:
    """Map between two known spaces, with totality and (for direct) bijectivity checked."""
    check_total(src, dst, mapping)
    kind = MapKind(kind)
    if kind is MapKind.DIRECT and not is_bijection(src, dst, mapping):
        raise NotBijective(f"direct map {src.id}->{dst.id} is not a bijection of outcomes")
    amap = AbstractionMap(src.id, dst.id, dict(mapping), kind, name)
    return amap.checked(src, dst)


def identity_map(space: Skeleton, dst_id=None) -> AbstractionMap:
    return AbstractionMap(space.id, space.id if dst_id is None else dst_id,
                          {x: x for x in space.outcomes})


@dataclass(frozen=True)
class DirectReport:
    bijective: bool
    measurability: MeasurabilityReport
    mismatches: tuple[Mismatch, ...]
    inverse_measurable: bool

    @property
    def measurable(self) -> bool:
        return self.measurability.measurable

    @property
    def pushforward_equal(self) -> bool:
        return not self.mismatches

    @property
    def passed(self) -> bool:
        return self.bijective and self.measurable and self.pushforward_equal


def validate_direct(src: FiniteProbSpace, dst: FiniteProbSpace, mapping) -> DirectReport:
    """Check a candidate direct abstraction; each verdict is computed on its own.

    ``inverse_measurable`` is informational: a passing bijection can still
    have a non-measurable inverse when ``dst`` has coarser atoms than ``src``.
    """
    bijective = is_bijection(src, dst, mapping)
    measurability = check_measurable_map(src, dst, mapping)
    mismatches = preservation_mismatches(src, dst, mapping)
    inverse_ok = False
    if bijective:
        inverse = {y: x for x, y in check_total(src, dst, mapping).items()}
        inverse_ok = check_measurable_map(dst, src, inverse).measurable
    return DirectReport(bijective, measurability, mismatches, inverse_ok)


def normalize_weights(weights, n: int) -> tuple[Fraction, ...]:
    if n == 0:
        raise InvalidWeights("a family needs at least one member")
    if weights is None:
        return (Fraction(1, n),) * n
    weights = tuple(to_rational(w) for w in weights)
    if len(weights) != n:
        raise InvalidWeights(f"{len(weights)} weights for {n} members")
    for w in weights:
        if w <= 0:
            raise InvalidWeights(f"weight {w} is not positive")
    total = sum(weights, Fraction(0))
    if total != 1:
        raise WeightsNotNormalized(total)
    return weights


@dataclass(frozen=True)
class DivergentFamily:
    """Branch maps out of one source space, each paired with its target skeleton."""

    src_id: str
    branches: tuple[tuple[AbstractionMap, Skeleton], ...]
    weights: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        branches = tuple((m, t) for m, t in self.branches)
        object.__setattr__(self, "branches", branches)
        object.__setattr__(self, "weights", normalize_weights(self.weights, len(branches)))
        for i, (m, t) in enumerate(branches, 1):
            if m.src_id != self.src_id:
                raise MismatchedInput(f"branch {i} starts at {m.src_id!r}, not {self.src_id!r}")
            if m.dst_id != t.id:
                raise MismatchedInput(f"branch {i} map ends at {m.dst_id!r} but target is {t.id!r}")


@dataclass(frozen=True)
class ConvergentFamily:
    """Leg maps from several source spaces into one abstract space."""

    dst_id: str
    legs: tuple[tuple[FiniteProbSpace, AbstractionMap], ...]
    weights: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        legs = tuple((s, m) for s, m in self.legs)
        object.__setattr__(self, "legs", legs)
        object.__setattr__(self, "weights", normalize_weights(self.weights, len(legs)))
        for i, (s, m) in enumerate(legs, 1):
            if m.dst_id != self.dst_id:
                raise MismatchedInput(f"leg {i} ends at {m.dst_id!r}, not {self.dst_id!r}")
            if m.src_id != s.id:
                raise MismatchedInput(f"leg {i} map starts at {m.src_id!r} but source is {s.id!r}")


def tag(index: int, label: str) -> str:
    """Outcome label of ``label`` inside branch ``index`` (1-based) of a unified space."""
    return f"{index}:{label}"


@dataclass(frozen=True)
class UnifiedSpace:
    space: FiniteProbSpace
    weights: tuple[Fraction, ...]

    def tagged(self, index: int, event) -> frozenset[str]:
        return frozenset(tag(index, x) for x in event)

    def measure_of(self, index: int, event) -> Fraction:
        return self.space.measure_of(self.tagged(index, event))


def unify(targets: Sequence[FiniteProbSpace], weights, id: str) -> UnifiedSpace:
    """Tagged disjoint union of ``targets`` carrying the weighted mixture."""
    weights = normalize_weights(weights, len(targets))
    outcomes, atoms, masses = [], [], []
    for i, (t, w) in enumerate(zip(targets, weights), 1):
        outcomes.extend(tag(i, x) for x in t.outcomes)
        for block, m in zip(t.atoms, t.masses):
            atoms.append(frozenset(tag(i, x) for x in block))
            masses.append(w * m)
    return UnifiedSpace(FiniteProbSpace(id, tuple(outcomes), tuple(atoms), tuple(masses)), weights)


def build_divergent(src: FiniteProbSpace, family: DivergentFamily, unified_id=None):
    """Push ``src`` along every branch; returns (targets, unified space)."""
    if family.src_id != src.id:
        raise MismatchedInput(f"family starts at {family.src_id!r}, not {src.id!r}")
    targets = []
    for i, (m, skeleton) in enumerate(family.branches, 1):
        report = check_measurable_map(src, skeleton, m)
        if not report:
            block, src_block = report.violations[0]
            raise NotMeasurable(m.preimage(block), src_block, index=i)
        targets.append(pushforward(src, m, skeleton))
    unified = unify(targets, family.weights, unified_id or f"{src.id}+")
    assert sum(unified.space.masses) == 1
    return targets, unified


def build_convergent(family: ConvergentFamily, dst_outcomes, dst_atoms=None) -> FiniteProbSpace:
    """Weighted sum of the leg pushforwards, on the given target structure.

    ``dst_outcomes`` may also be a Skeleton, in which case its atoms are used.
    """
    if isinstance(dst_outcomes, Skeleton):
        dst = Skeleton(family.dst_id, dst_outcomes.outcomes, dst_outcomes.atoms)
    else:
        dst = make_skeleton(family.dst_id, dst_outcomes, dst_atoms)
    masses = [Fraction(0)] * len(dst.atoms)
    for i, ((source, m), w) in enumerate(zip(family.legs, family.weights), 1):
        report = check_measurable_map(source, dst, m)
        if not report:
            block, src_block = report.violations[0]
            raise NotMeasurable(m.preimage(block), src_block, index=i)
        pushed = pushforward(source, m, dst)
        for k, mass in enumerate(pushed.masses):
            masses[k] += w * mass
    return FiniteProbSpace(dst.id, dst.outcomes, dst.atoms, tuple(masses))
