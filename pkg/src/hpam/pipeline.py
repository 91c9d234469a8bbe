"""Staged construction of a hybrid HPAM-DAG, closed by an HPoA and a comparison.

A run builds the DAG stage by stage from the base space (direct,
sequential, divergent, then convergent stages), computes the HPoA of the
final vertex for the declared essential events, and compares the HPoA
probabilities with the observed ones. On a mismatch the update hook proposes
replacement masses for some vertices and the whole DAG is rebuilt, up to
``max_iterations`` times.

Stage targets are skeletons, in which case their measure is the pushforward,
or full spaces with declared masses, which must then pass the measure
preservation check on admission. Convergent legs are admitted as ordinary
edges, so each leg must carry the aggregated measure by itself.
"""

from __future__ import annotations

import enum
import json
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from .abstraction import (
    AbstractionMap,
    ConvergentFamily,
    DivergentFamily,
    build_convergent,
    build_divergent,
    validate_direct,
)
from .dag import HpamDag, compose_path
from .errors import (
    EmptyEssentials,
    Eq1Violation,
    EventSetMismatch,
    HpamError,
    HpoaImpossible,
    NotMeasurable,
    StageTypeMismatch,
    UnknownOutcome,
)
from .hpoa import HpoaResult, compute_hpoa
from .measure import FiniteProbSpace, Skeleton, format_rational, pushforward, to_rational


@dataclass(frozen=True)
class DirectStage:
    map: AbstractionMap
    target: Skeleton

    __hash__ = None
    kind = "direct"


@dataclass(frozen=True)
class SequentialStage:
    steps: tuple[DirectStage, ...]

    __hash__ = None
    kind = "sequential"

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))


@dataclass(frozen=True)
class DivergentStage:
    branches: tuple[tuple[AbstractionMap, Skeleton], ...]
    weights: tuple[Fraction, ...] | None = None

    __hash__ = None
    kind = "divergent"

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(tuple(b) for b in self.branches))


@dataclass(frozen=True)
class ConvergentStage:
    legs: tuple[AbstractionMap, ...]
    target: Skeleton
    weights: tuple[Fraction, ...] | None = None

    __hash__ = None
    kind = "convergent"

    def __post_init__(self):
        object.__setattr__(self, "legs", tuple(self.legs))


Stage = DirectStage | SequentialStage | DivergentStage | ConvergentStage


class Verdict(str, enum.Enum):
    SUCCESS = "Success"
    FAILURE = "Failure"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class ComparisonEntry:
    event: frozenset[str]
    computed: Fraction
    observed: Fraction
    difference: Fraction


@dataclass(frozen=True)
class ComparisonReport:
    entries: tuple[ComparisonEntry, ...]
    tolerance: Fraction
    match: bool


def _as_pairs(dist) -> list[tuple[frozenset[str], Fraction]]:
    items = dist.items() if isinstance(dist, Mapping) else dist
    return [(frozenset(e), to_rational(p)) for e, p in items]


def compare_outcomes(computed, observed, tolerance=0) -> ComparisonReport:
    """Per-event absolute differences; a match needs every one within ``tolerance``."""
    tolerance = to_rational(tolerance)
    if tolerance < 0:
        raise HpamError(f"tolerance {tolerance} is negative")
    comp = _as_pairs(computed)
    obs = dict(_as_pairs(observed))
    if {e for e, _ in comp} != set(obs) or len(comp) != len({e for e, _ in comp}):
        raise EventSetMismatch(
            f"computed events {[sorted(e) for e, _ in comp]} "
            f"do not match observed events {[sorted(e) for e in obs]}")
    entries = tuple(ComparisonEntry(e, c, obs[e], abs(c - obs[e])) for e, c in comp)
    return ComparisonReport(entries, tolerance, all(x.difference <= tolerance for x in entries))


# -- update hooks ---------------------------------------------------------

@dataclass(frozen=True)
class UpdateContext:
    iteration: int
    dag: HpamDag
    final_id: str
    comparison: ComparisonReport
    vertices: tuple[str, ...]

    __hash__ = None


UpdateHook = Callable[[UpdateContext], "Mapping[str, Sequence[Fraction]] | None"]


def identity_hook(ctx: UpdateContext):
    """Never changes anything, so a mismatch persists until the iteration limit."""
    return {}


def proportional_hook(ctx: UpdateContext):
    """One raking sweep per designated vertex.

    For each compared event in turn, atoms whose image lies in the event are
    scaled by observed/computed and the others by the complementary ratio,
    then the masses are renormalised. Returns None, meaning no update is
    possible, when some event has computed mass 0 or 1 but a different
    observed value.
    """
    out = {}
    for vid in ctx.vertices:
        space = ctx.dag.space(vid)
        path = ctx.dag.find_path(vid, ctx.final_id)
        if path is None:
            return None
        table = compose_path(ctx.dag, path, verify=False).mapping
        images = [table[next(iter(a))] for a in space.atoms]
        masses = list(space.masses)
        for entry in ctx.comparison.entries:
            inside = [img in entry.event for img in images]
            c = sum((m for m, ok in zip(masses, inside) if ok), Fraction(0))
            o = entry.observed
            if c == o:
                continue
            if c == 0 or c == 1:
                return None
            up, down = o / c, (1 - o) / (1 - c)
            masses = [m * (up if ok else down) for m, ok in zip(masses, inside)]
        total = sum(masses, Fraction(0))
        out[vid] = tuple(m / total for m in masses)
    return out


HOOKS: dict[str, UpdateHook] = {"identity": identity_hook, "proportional": proportional_hook}


@dataclass(frozen=True)
class PipelineSpec:
    base: FiniteProbSpace
    stages: tuple[Stage, ...]
    essentials: tuple[frozenset[str], ...]
    observed: tuple[tuple[frozenset[str], Fraction], ...]
    tolerance: Fraction = Fraction(0)
    max_iterations: int = 1
    update_hook: UpdateHook = field(default=identity_hook, compare=False)
    update_vertices: tuple[str, ...] = ()
    hpoa_id: str | None = None

    __hash__ = None

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "essentials", tuple(frozenset(e) for e in self.essentials))
        object.__setattr__(self, "observed", tuple(_as_pairs(self.observed)))
        object.__setattr__(self, "tolerance", to_rational(self.tolerance))
        object.__setattr__(self, "update_vertices", tuple(self.update_vertices))

    def validate(self) -> str:
        """Check stage chaining; returns the id of the final space."""
        if self.tolerance < 0:
            raise HpamError(f"tolerance {self.tolerance} is negative")
        if not isinstance(self.max_iterations, int) or self.max_iterations < 1:
            raise HpamError(f"max_iterations must be a positive integer, got {self.max_iterations!r}")
        current = self.base.id
        used = {current}
        pending = None

        def claim(index, vid):
            if vid in used:
                raise StageTypeMismatch(index, f"vertex id {vid!r} is already used")
            used.add(vid)

        def direct(index, st):
            if not isinstance(st, DirectStage):
                raise StageTypeMismatch(index, "sequential steps must be direct stages")
            if st.map.src_id != current:
                raise StageTypeMismatch(index, f"map starts at {st.map.src_id!r}, expected {current!r}")
            if st.map.dst_id != st.target.id:
                raise StageTypeMismatch(index, f"map ends at {st.map.dst_id!r} but target is {st.target.id!r}")
            claim(index, st.target.id)
            return st.target.id

        for index, stage in enumerate(self.stages, 1):
            if pending is not None and not isinstance(stage, ConvergentStage):
                raise StageTypeMismatch(index - 1, "a divergent stage must be followed by a convergent stage")
            if isinstance(stage, DirectStage):
                current = direct(index, stage)
            elif isinstance(stage, SequentialStage):
                if not stage.steps:
                    raise StageTypeMismatch(index, "sequential stage has no steps")
                for st in stage.steps:
                    current = direct(index, st)
            elif isinstance(stage, DivergentStage):
                if not stage.branches:
                    raise StageTypeMismatch(index, "divergent stage has no branches")
                pending = []
                for m, target in stage.branches:
                    if m.src_id != current:
                        raise StageTypeMismatch(index, f"branch starts at {m.src_id!r}, expected {current!r}")
                    if m.dst_id != target.id:
                        raise StageTypeMismatch(index, f"branch ends at {m.dst_id!r} but target is {target.id!r}")
                    claim(index, target.id)
                    pending.append(target.id)
            elif isinstance(stage, ConvergentStage):
                if pending is None:
                    raise StageTypeMismatch(index, "a convergent stage must follow a divergent stage")
                sources = [leg.src_id for leg in stage.legs]
                if sorted(sources) != sorted(pending):
                    raise StageTypeMismatch(
                        index, f"legs start at {sources}, expected one leg per branch {pending}")
                for leg in stage.legs:
                    if leg.dst_id != stage.target.id:
                        raise StageTypeMismatch(index, f"leg ends at {leg.dst_id!r}, not {stage.target.id!r}")
                claim(index, stage.target.id)
                current, pending = stage.target.id, None
            else:
                raise StageTypeMismatch(index, f"unknown stage {stage!r}")
        if pending is not None:
            raise StageTypeMismatch(len(self.stages), "a divergent stage must be followed by a convergent stage")
        return current


@dataclass(frozen=True)
class StageRecord:
    index: int
    kind: str
    vertices: tuple[str, ...]
    snapshot: str
    unified: FiniteProbSpace | None = None


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    stages: tuple[StageRecord, ...]
    hpoa: HpoaResult | None
    comparison: ComparisonReport | None
    update: tuple[tuple[str, tuple[Fraction, ...]], ...] | None = None

    __hash__ = None


@dataclass(frozen=True)
class PipelineOutcome:
    verdict: Verdict
    iterations: int
    hpoa: HpoaResult | None
    comparison: ComparisonReport | None
    snapshots: tuple[tuple[str, HpamDag], ...]
    trace: tuple[IterationTrace, ...]
    reason: str = ""

    __hash__ = None

    @property
    def dag(self) -> HpamDag:
        return self.snapshots[-1][1]

    @property
    def snapshot_ids(self) -> tuple[str, ...]:
        return tuple(d.digest() for _, d in self.snapshots)


def _target_space(prev: FiniteProbSpace | None, amap, target: Skeleton, overrides) -> FiniteProbSpace:
    if target.id in overrides:
        return FiniteProbSpace(target.id, target.outcomes, target.atoms, overrides[target.id])
    if isinstance(target, FiniteProbSpace):
        return target
    return pushforward(prev, amap, target)


def _build(spec: PipelineSpec, overrides):
    base = spec.base
    if base.id in overrides:
        base = base.with_masses(overrides[base.id])
    dag = HpamDag().add_vertex(base)
    snapshots = [("base", dag)]
    records = []
    current = base.id
    pending = None

    def admit_direct(dag, st):
        prev = dag.space(st.map.src_id)
        tgt = _target_space(prev, st.map, st.target, overrides)
        report = validate_direct(prev, tgt, st.map)
        if not report.bijective:
            raise HpamError(f"direct map {st.map.src_id}->{tgt.id} is not a bijection")
        return dag.add_vertex(tgt).add_edge(prev.id, tgt.id, st.map), tgt.id

    for index, stage in enumerate(spec.stages, 1):
        added = []
        unified = None
        try:
            if isinstance(stage, DirectStage):
                dag, current = admit_direct(dag, stage)
                added.append(current)
            elif isinstance(stage, SequentialStage):
                for st in stage.steps:
                    dag, current = admit_direct(dag, st)
                    added.append(current)
            elif isinstance(stage, DivergentStage):
                src = dag.space(current)
                family = DivergentFamily(current, stage.branches, stage.weights)
                pushed, unified_space = build_divergent(src, family, unified_id=f"{current}+")
                unified = unified_space.space
                for (m, target), computed in zip(stage.branches, pushed):
                    tgt = _target_space(src, m, target, overrides) if (
                        target.id in overrides or isinstance(target, FiniteProbSpace)) else computed
                    dag = dag.add_vertex(tgt).add_edge(current, tgt.id, m)
                    added.append(tgt.id)
                pending = [t.id for _, t in stage.branches]
            else:
                family = ConvergentFamily(
                    stage.target.id, [(dag.space(leg.src_id), leg) for leg in stage.legs], stage.weights)
                computed = build_convergent(family, stage.target)
                if stage.target.id in overrides or isinstance(stage.target, FiniteProbSpace):
                    tgt = _target_space(None, None, stage.target, overrides)
                else:
                    tgt = computed
                dag = dag.add_vertex(tgt)
                for leg in stage.legs:
                    dag = dag.add_edge(leg.src_id, tgt.id, leg)
                current, pending = tgt.id, None
                added.append(tgt.id)
        except Eq1Violation as exc:
            raise exc.at_stage(index)
        except HpamError as exc:
            exc.stage = index
            exc.args = (f"stage {index}: {exc}",)
            raise
        snapshots.append((f"stage {index}", dag))
        records.append(StageRecord(index, stage.kind, tuple(added), dag.digest(), unified))
    return dag, current, snapshots, records


def run_pipeline(spec: PipelineSpec, *, tolerance=None) -> PipelineOutcome:
    """Run the staged construction and the compare/update loop.

    Stage errors (type mismatches, measure preservation failures) raise;
    the three verdicts are returned. Failure means the HPoA cannot be
    constructed at the final space, or the hook reports that no further
    update is possible.
    """
    spec.validate()
    tol = spec.tolerance if tolerance is None else to_rational(tolerance)
    overrides: dict[str, tuple[Fraction, ...]] = {}
    trace = []
    snapshots = ()
    hpoa = None
    report = None
    for iteration in range(1, spec.max_iterations + 1):
        dag, final_id, snaps, records = _build(spec, overrides)
        try:
            hpoa = compute_hpoa(dag.space(final_id), spec.essentials, quotient_id=spec.hpoa_id)
        except (EmptyEssentials, NotMeasurable, UnknownOutcome) as exc:
            reason = str(HpoaImpossible(f"HPoA cannot be constructed at {final_id!r}: {exc}"))
            trace.append(IterationTrace(iteration, tuple(records), None, None))
            return PipelineOutcome(Verdict.FAILURE, iteration, None, None, tuple(snaps), tuple(trace), reason)
        dag = dag.add_vertex(hpoa.quotient).add_edge(final_id, hpoa.quotient.id, hpoa.quotient_map)
        snaps.append(("hpoa", dag))
        snapshots = tuple(snaps)
        computed = [(c.event, c.quotient_probability) for c in hpoa.certificate]
        report = compare_outcomes(computed, spec.observed, tol)
        if report.match:
            trace.append(IterationTrace(iteration, tuple(records), hpoa, report))
            return PipelineOutcome(Verdict.SUCCESS, iteration, hpoa, report, snapshots, tuple(trace))
        update = spec.update_hook(UpdateContext(iteration, dag, final_id, report, spec.update_vertices))
        if update is None:
            trace.append(IterationTrace(iteration, tuple(records), hpoa, report))
            return PipelineOutcome(Verdict.FAILURE, iteration, hpoa, report, snapshots, tuple(trace),
                                   "no further update is possible")
        update = {k: tuple(to_rational(m) for m in v) for k, v in update.items()}
        trace.append(IterationTrace(iteration, tuple(records), hpoa, report, tuple(update.items())))
        overrides.update(update)
    return PipelineOutcome(Verdict.ITERATION_LIMIT, spec.max_iterations, hpoa, report, snapshots,
                           tuple(trace), f"no match after {spec.max_iterations} iteration(s)")


# -- trace serialisation --------------------------------------------------

def _event(e, order=None):
    return [x for x in order if x in e] if order else sorted(e)


def trace_document(outcome: PipelineOutcome) -> dict:
    """JSON-ready trace; the phase list follows the order work was done in."""
    iterations = []
    for it in outcome.trace:
        phases = []
        for r in it.stages:
            entry = {"phase": r.kind, "stage": r.index, "vertices": list(r.vertices), "snapshot": r.snapshot}
            if r.unified is not None:
                entry["unified"] = {"id": r.unified.id, "outcomes": len(r.unified.outcomes)}
            phases.append(entry)
        if it.hpoa is not None:
            q = it.hpoa.quotient
            phases.append({
                "phase": "hpoa",
                "source": it.hpoa.source_id,
                "quotient": q.id,
                "cells": [{"label": lab, "mass": format_rational(m)} for lab, m in zip(q.outcomes, q.masses)],
            })
        if it.comparison is not None:
            phases.append({
                "phase": "compare",
                "match": it.comparison.match,
                "tolerance": format_rational(it.comparison.tolerance),
                "entries": [
                    {"event": _event(e.event), "computed": format_rational(e.computed),
                     "observed": format_rational(e.observed), "difference": format_rational(e.difference)}
                    for e in it.comparison.entries
                ],
            })
        if it.update is not None:
            phases.append({"phase": "update",
                           "vertices": {v: [format_rational(m) for m in ms] for v, ms in it.update}})
        iterations.append({"iteration": it.iteration, "phases": phases})
    return {
        "format": "hpam-trace/1",
        "verdict": outcome.verdict.value,
        "iterations_run": outcome.iterations,
        "reason": outcome.reason,
        "snapshots": [{"label": lab, "id": d.digest()} for lab, d in outcome.snapshots],
        "iterations": iterations,
    }


def dump_trace(outcome: PipelineOutcome) -> str:
    return json.dumps(trace_document(outcome), indent=2) + "\n"


def phase_order(outcome: PipelineOutcome, iteration: int = 1) -> list[str]:
    """Phase kinds of one iteration with consecutive repeats collapsed."""
    kinds = [p["phase"] for p in trace_document(outcome)["iterations"][iteration - 1]["phases"]]
    return [k for i, k in enumerate(kinds) if i == 0 or kinds[i - 1] != k]
