"""Highest possible abstraction of a space relative to declared essential events.

The quotient keeps exactly the distinctions some essential event needs: two
outcomes share a cell iff every essential event contains both or neither.
That is the generating partition of the sigma-algebra spanned by the
essentials, hence the coarsest partition under which each essential stays
measurable with its probability unchanged. Merging any two cells would cut
some essential event; :class:`HpoaResult` carries one such witness per pair.

Cells are relabelled with :func:`cell_label` (the bare outcome for a
singleton, ``{a,b}`` otherwise) so an identity quotient reproduces the
source labels.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .abstraction import AbstractionMap, MapKind
from .dag import HpamDag, compose_path
from .errors import (
    EmptyEssentials,
    HpamError,
    MismatchedInput,
    NoCoarsestUnique,
    NoPath,
    NoSuchEdge,
    NotMeasurable,
    TooLarge,
    UnknownVertex,
)
from .measure import (
    FiniteProbSpace,
    block_label,
    check_measurable_map,
    preservation_mismatches,
    pushforward,
    sigma_closure,
)
from .partitions import is_union_of_blocks, merge_blocks, set_partitions

BRUTE_FORCE_LIMIT = 10


@dataclass(frozen=True)
class EssentialEventSet:
    space_id: str
    events: tuple[frozenset[str], ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(frozenset(e) for e in self.events))

    def validate(self, space: FiniteProbSpace, allow_empty: bool = False) -> EssentialEventSet:
        if space.id != self.space_id:
            raise MismatchedInput(f"essentials are declared at {self.space_id!r}, not {space.id!r}")
        if not self.events and not allow_empty:
            raise EmptyEssentials(
                f"no essential events at {space.id!r}; pass allow_empty=True for the one-cell quotient")
        for e in self.events:
            block = space.straddled_atom(e)
            if block is not None:
                raise NotMeasurable(e, block)
        return self


def essentials_for(space: FiniteProbSpace, events, allow_empty: bool = False) -> EssentialEventSet:
    if isinstance(events, EssentialEventSet):
        return events.validate(space, allow_empty)
    return EssentialEventSet(space.id, tuple(events)).validate(space, allow_empty)


def cell_label(cell: Iterable[str], order: Sequence[str]) -> str:
    cell = list(cell)
    if len(cell) == 1:
        return cell[0]
    return block_label(cell, order)


@dataclass(frozen=True)
class CertificateEntry:
    event: frozenset[str]
    image: frozenset[str]
    probability: Fraction
    quotient_probability: Fraction


@dataclass(frozen=True)
class Witness:
    """Merging cells ``cells[0]`` and ``cells[1]`` would cut essential ``event_index``."""

    cells: tuple[int, int]
    event_index: int
    event: frozenset[str]


@dataclass(frozen=True)
class HpoaResult:
    source_id: str
    source_atoms: int
    cells: tuple[frozenset[str], ...]
    quotient: FiniteProbSpace
    quotient_map: AbstractionMap
    certificate: tuple[CertificateEntry, ...]
    witnesses: tuple[Witness, ...]

    __hash__ = None

    @property
    def merges(self) -> int:
        """Number of pairwise atom merges between the source sigma-algebra and the quotient."""
        return self.source_atoms - len(self.cells)


def _assemble(space: FiniteProbSpace, cells, masses, events, quotient_id) -> HpoaResult:
    labels = [cell_label([x for x in space.outcomes if x in c], space.outcomes) for c in cells]
    if len(set(labels)) != len(labels):
        raise HpamError(f"cell labels collide in {space.id!r}: {labels}")
    quotient = FiniteProbSpace(quotient_id, tuple(labels),
                               tuple(frozenset([lab]) for lab in labels), tuple(masses))
    table = {x: lab for c, lab in zip(cells, labels) for x in c}
    qmap = AbstractionMap(space.id, quotient_id, table, MapKind.GENERIC, name=f"{space.id}->hpoa")
    qmap = qmap.checked(space, quotient)

    certificate = []
    for e in events:
        image = frozenset(lab for c, lab in zip(cells, labels) if c <= e)
        p, q = space.measure_of(e), quotient.measure_of(image)
        if p != q:
            raise AssertionError(f"essential {sorted(e)} not preserved: {p} != {q}")
        certificate.append(CertificateEntry(e, image, p, q))

    witnesses = []
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            for k, e in enumerate(events):
                if (cells[i] <= e) != (cells[j] <= e):
                    witnesses.append(Witness((i, j), k, e))
                    break
            else:
                raise AssertionError(f"cells {i} and {j} are not separated by any essential")
    return HpoaResult(space.id, len(space.atoms), tuple(cells), quotient, qmap,
                      tuple(certificate), tuple(witnesses))


def compute_hpoa(space: FiniteProbSpace, essentials, *, allow_empty: bool = False,
                 quotient_id: str | None = None) -> HpoaResult:
    """Coarsest quotient of ``space`` preserving every essential event."""
    ess = essentials_for(space, essentials, allow_empty)
    cells = sigma_closure(space.outcomes, ess.events)
    masses = [space.measure_of(c) for c in cells]
    return _assemble(space, cells, masses, ess.events, quotient_id or f"{space.id}_hpoa")


def brute_force_hpoa(space: FiniteProbSpace, essentials, *, allow_empty: bool = False,
                     quotient_id: str | None = None) -> HpoaResult:
    """Exhaustive oracle: search all partitions for the unique coarsest admissible one.

    A partition is admissible when each block is a union of source atoms (so
    the quotient map is measurable) and each essential event is a union of
    blocks.
    """
    n = len(space.outcomes)
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"{n} outcomes exceeds the brute-force limit of {BRUTE_FORCE_LIMIT}")
    ess = essentials_for(space, essentials, allow_empty)
    admissible = [
        p for p in set_partitions(space.outcomes)
        if all(is_union_of_blocks(b, space.atoms) for b in p)
        and all(is_union_of_blocks(e, p) for e in ess.events)
    ]
    fewest = min(len(p) for p in admissible)
    coarsest = [p for p in admissible if len(p) == fewest]
    if len(coarsest) != 1:
        raise NoCoarsestUnique(f"{len(coarsest)} admissible partitions with {fewest} blocks")
    best = coarsest[0]
    for p in admissible:
        if not all(any(b <= c for c in best) for b in p):
            raise NoCoarsestUnique("an admissible partition does not refine the coarsest candidate")
    masses = [sum((m for a, m in zip(space.atoms, space.masses) if a <= b), Fraction(0))
              for b in best]
    return _assemble(space, best, masses, ess.events, quotient_id or f"{space.id}_hpoa")


# -- integrity across a DAG -----------------------------------------------

@dataclass(frozen=True)
class IntegrityReport:
    ancestor_id: str
    path: tuple[str, ...]
    mismatches: tuple[tuple[frozenset[str], Fraction, Fraction | None], ...]

    @property
    def ok(self) -> bool:
        return not self.mismatches


def check_integrity(dag: HpamDag, ancestor_id: str, hpoa_result: HpoaResult) -> IntegrityReport:
    """Compare each HPoA atom's mass with the ancestor's mass of its full preimage."""
    dag.space(ancestor_id)
    if hpoa_result.source_id not in dag.vertices:
        raise UnknownVertex(hpoa_result.source_id)
    path = dag.find_path(ancestor_id, hpoa_result.source_id)
    if path is None:
        raise NoPath(ancestor_id, hpoa_result.source_id)
    composed = compose_path(dag, path, verify=False).mapping
    qmap = hpoa_result.quotient_map.mapping
    table = {x: qmap[y] for x, y in composed.items()}
    ancestor = dag.space(ancestor_id)
    mismatches = []
    for atom, p in zip(hpoa_result.quotient.atoms, hpoa_result.quotient.masses):
        pre = frozenset(x for x, y in table.items() if y in atom)
        try:
            q = ancestor.measure_of(pre)
        except NotMeasurable:
            q = None
        if p != q:
            mismatches.append((atom, p, q))
    return IntegrityReport(ancestor_id, path, tuple(mismatches))


# -- sequential minimality ------------------------------------------------

@dataclass(frozen=True)
class StepReport:
    """Verdicts for one space of a chain; only the first violation of each kind is kept."""

    space_id: str
    mass_preserved: bool
    mass_violation: object = None
    forward_checked: bool = False
    minimal: bool = True
    mergeable_pair: tuple[frozenset[str], frozenset[str]] | None = None

    @property
    def ok(self) -> bool:
        return self.mass_preserved and self.minimal


@dataclass(frozen=True)
class MinimalityReport:
    path: tuple[str, ...]
    steps: tuple[StepReport, ...]

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.steps)


def check_minimality(dag: HpamDag, path: Sequence[str], essentials) -> MinimalityReport:
    """Check mass preservation and essential-relative minimality along a chain.

    Every space after the first must (a) carry the pushforward of its
    predecessor, checked on preimages, and additionally on forward images of
    atoms when the step is injective and the image is measurable; and (b) be
    minimal: each pair of its atoms must be separated by the preimage of some
    essential event declared at the chain end.
    """
    path = tuple(path)
    for a, b in zip(path, path[1:]):
        try:
            dag.edge(a, b)
        except NoSuchEdge:
            raise NoPath(path[0], path[-1]) from None
    end = dag.space(path[-1])
    ess = essentials_for(end, essentials)
    steps = []
    for i in range(1, len(path)):
        prev, cur = dag.space(path[i - 1]), dag.space(path[i])
        emap = dag.edge(path[i - 1], path[i]).map
        bad = preservation_mismatches(prev, cur, emap)
        violation = bad[0] if bad else None
        forward = emap.is_injective()
        if forward and violation is None:
            for block, m in zip(prev.atoms, prev.masses):
                img = emap.image(block)
                if cur.is_measurable(img) and cur.measure_of(img) != m:
                    violation = ("forward", block, m, cur.measure_of(img))
                    break
        to_end = compose_path(dag, path[i:], verify=False).mapping
        pulled = [frozenset(x for x, y in to_end.items() if y in e) for e in ess.events]
        pair = None
        for p in range(len(cur.atoms)):
            for q in range(p + 1, len(cur.atoms)):
                a, b = cur.atoms[p], cur.atoms[q]
                if all((a <= e) == (b <= e) for e in pulled):
                    pair = (a, b)
                    break
            if pair:
                break
        steps.append(StepReport(cur.id, violation is None, violation, forward, pair is None, pair))
    return MinimalityReport(path, tuple(steps))


# -- factorisation through intermediate states ----------------------------

@dataclass(frozen=True)
class Factorization:
    pre_map: AbstractionMap
    mid_space: FiniteProbSpace
    post_map: AbstractionMap

    __hash__ = None


def _check_source(space: FiniteProbSpace, result: HpoaResult):
    if result.source_id != space.id or set(result.quotient_map.mapping) != set(space.outcomes):
        raise MismatchedInput(f"HPoA result was computed from {result.source_id!r}, not {space.id!r}")


def _first_mergeable(blocks, cells):
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            if any(blocks[i] <= c and blocks[j] <= c for c in cells):
                return i, j
    return None


def _stage_space(space, blocks, id):
    """Space whose outcomes are ``blocks`` of ``space``, with the map onto it."""
    labels = [cell_label([x for x in space.outcomes if x in b], space.outcomes) for b in blocks]
    table = {x: lab for b, lab in zip(blocks, labels) for x in b}
    mid = pushforward(space, table, labels, id=id)
    return AbstractionMap(space.id, id, table), mid


def factor_intermediate(space: FiniteProbSpace, result: HpoaResult, mid_id: str | None = None) -> Factorization | None:
    """Split the quotient map through a strictly intermediate space.

    The intermediate space performs exactly one merge (the lexicographically
    first pair of source atoms sharing a cell). Returns None when the
    quotient performs at most one merge, since nothing lies strictly between.
    """
    _check_source(space, result)
    if result.merges < 2:
        return None
    blocks = list(space.atoms)
    i, j = _first_mergeable(blocks, result.cells)
    pre, mid = _stage_space(space, merge_blocks(blocks, i, j), mid_id or f"{space.id}_int")
    qmap = result.quotient_map.mapping
    post_table = {pre.mapping[x]: qmap[x] for x in space.outcomes}
    post = AbstractionMap(mid.id, result.quotient.id, post_table)
    return Factorization(pre.checked(space, mid), mid, post.checked(mid, result.quotient))


def merge_chain(space: FiniteProbSpace, result: HpoaResult) -> list[tuple[AbstractionMap, FiniteProbSpace]]:
    """Decompose the quotient into single-merge steps from ``space``.

    Returns ``[(map_1, space_1), ..., (map_k, space_k)]`` with ``k = merges``;
    each map goes from the previous space (``space`` for the first) to the
    next, and ``space_k`` has the quotient's outcomes and measure.
    """
    _check_source(space, result)
    blocks = list(space.atoms)
    steps = []
    prev = space
    prev_label = {x: x for x in space.outcomes}
    for k in range(result.merges):
        i, j = _first_mergeable(blocks, result.cells)
        blocks = list(merge_blocks(blocks, i, j))
        full, nxt = _stage_space(space, blocks, f"{space.id}_m{k + 1}")
        step = {prev_label[x]: full.mapping[x] for x in space.outcomes}
        steps.append((AbstractionMap(prev.id, nxt.id, step), nxt))
        prev, prev_label = nxt, dict(full.mapping)
    return steps


def validate_merge_chain(space: FiniteProbSpace, steps) -> bool:
    """Each step must be measurable, mass-preserving and merge exactly one pair of atoms."""
    prev = space
    for amap, nxt in steps:
        if not check_measurable_map(prev, nxt, amap):
            return False
        if preservation_mismatches(prev, nxt, amap):
            return False
        if len(prev.atoms) - len(nxt.atoms) != 1:
            return False
        prev = nxt
    return True


__all__ = [
    "BRUTE_FORCE_LIMIT", "CertificateEntry", "EssentialEventSet", "Factorization",
    "HpoaResult", "IntegrityReport", "MinimalityReport", "StepReport", "Witness",
    "brute_force_hpoa", "cell_label", "check_integrity", "check_minimality",
    "compute_hpoa", "essentials_for", "factor_intermediate", "merge_chain",
    "validate_merge_chain",
]
