"""The HPAM-DAG container.

Vertices are probability spaces keyed by id, edges carry abstraction maps.
Values are immutable: ``add_vertex``/``add_edge`` return a new DAG and
validate what they admit (endpoints, one edge per ordered pair, acyclicity,
measurability, exact measure preservation on every target atom).

The plain constructor does not validate, so that documents loaded from disk
can be inspected with :func:`check_dag` even when they are broken.
"""

from __future__ import annotations

import hashlib
import heapq
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from functools import cached_property
from types import MappingProxyType

from .abstraction import AbstractionMap, MapKind
from .errors import (
    CycleIntroduced,
    DuplicateEdge,
    DuplicateVertex,
    Eq1Violation,
    HpamError,
    MismatchedInput,
    NoSuchEdge,
    NotMeasurable,
    UnknownVertex,
)
from .measure import (
    FiniteProbSpace,
    check_measurable_map,
    format_rational,
    preservation_mismatches,
)


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    map: AbstractionMap

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    witness: tuple = ()

    __hash__ = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]


class HpamDag:
    def __init__(self, vertices: Iterable[FiniteProbSpace] | Mapping[str, FiniteProbSpace] = (),
                 edges: Iterable[Edge] = ()):
        if isinstance(vertices, Mapping):
            vertices = dict(vertices)
        else:
            vertices = {s.id: s for s in vertices}
        self._vertices = vertices
        self._edges = tuple(edges)

    @property
    def vertices(self) -> Mapping[str, FiniteProbSpace]:
        return MappingProxyType(self._vertices)

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    def __repr__(self):
        return f"HpamDag({len(self._vertices)} vertices, {len(self._edges)} edges)"

    def __eq__(self, other):
        if not isinstance(other, HpamDag):
            return NotImplemented
        return self._vertices == other._vertices and self._edges == other._edges

    __hash__ = None

    def space(self, vertex_id: str) -> FiniteProbSpace:
        try:
            return self._vertices[vertex_id]
        except KeyError:
            raise UnknownVertex(vertex_id) from None

    def edge(self, src: str, dst: str) -> Edge:
        for e in self._edges:
            if e.src == src and e.dst == dst:
                return e
        raise NoSuchEdge(src, dst)

    def has_edge(self, src: str, dst: str) -> bool:
        return any(e.src == src and e.dst == dst for e in self._edges)

    @cached_property
    def _succ(self) -> dict[str, list[str]]:
        succ: dict[str, list[str]] = {v: [] for v in self._vertices}
        for e in self._edges:
            succ.setdefault(e.src, []).append(e.dst)
        for v in succ:
            succ[v].sort()
        return succ

    def successors(self, v: str) -> list[str]:
        return list(self._succ.get(v, ()))

    def predecessors(self, v: str) -> list[str]:
        return sorted(e.src for e in self._edges if e.dst == v)

    def sources(self) -> list[str]:
        targets = {e.dst for e in self._edges}
        return sorted(v for v in self._vertices if v not in targets)

    def sinks(self) -> list[str]:
        return sorted(v for v in self._vertices if not self._succ.get(v))

    # -- building --------------------------------------------------------

    def add_vertex(self, space: FiniteProbSpace) -> HpamDag:
        if space.id in self._vertices:
            raise DuplicateVertex(space.id)
        return HpamDag({**self._vertices, space.id: space}, self._edges)

    def add_edge(self, src_id: str, dst_id: str, mapping) -> HpamDag:
        """Admit an edge, or raise the first reason it cannot be admitted.

        Structural checks (endpoints, duplicates, cycles) come before the
        measure checks.
        """
        src = self.space(src_id)
        dst = self.space(dst_id)
        if isinstance(mapping, AbstractionMap):
            if (mapping.src_id, mapping.dst_id) != (src_id, dst_id):
                raise MismatchedInput(
                    f"map goes {mapping.src_id}->{mapping.dst_id}, edge is {src_id}->{dst_id}")
        else:
            mapping = AbstractionMap(src_id, dst_id, mapping)
        if self.has_edge(src_id, dst_id):
            raise DuplicateEdge(src_id, dst_id)
        back = self.find_path(dst_id, src_id)
        if back is not None:
            raise CycleIntroduced((src_id,) + back)
        report = check_measurable_map(src, dst, mapping)
        if not report:
            block, src_block = report.violations[0]
            raise NotMeasurable(mapping.preimage(block), src_block)
        bad = preservation_mismatches(src, dst, mapping)
        if bad:
            raise Eq1Violation(src_id, dst_id, bad[0].atom, bad[0].expected, bad[0].actual)
        mapping = replace(mapping, measurable=True)
        return HpamDag(self._vertices, self._edges + (Edge(src_id, dst_id, mapping),))

    # -- traversal -------------------------------------------------------

    def find_path(self, start: str, goal: str) -> tuple[str, ...] | None:
        """Shortest path, lexicographically first among shortest; None if absent."""
        if start not in self._vertices or goal not in self._vertices:
            return None
        parent = {start: None}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            if v == goal:
                path = []
                while v is not None:
                    path.append(v)
                    v = parent[v]
                return tuple(reversed(path))
            for w in self._succ.get(v, ()):
                if w not in parent:
                    parent[w] = v
                    queue.append(w)
        return None

    def find_cycle(self) -> tuple[str, ...] | None:
        """Some directed cycle as a closed vertex sequence, or None."""
        WHITE, GREY, BLACK = 0, 1, 2
        colour = {v: WHITE for v in self._succ}
        stack: list[str] = []

        def visit(v):
            colour[v] = GREY
            stack.append(v)
            for w in self._succ.get(v, ()):
                if colour.get(w, WHITE) == GREY:
                    return tuple(stack[stack.index(w):]) + (w,)
                if colour.get(w, WHITE) == WHITE:
                    found = visit(w)
                    if found:
                        return found
            stack.pop()
            colour[v] = BLACK
            return None

        for v in sorted(colour):
            if colour[v] == WHITE:
                found = visit(v)
                if found:
                    return found
        return None

    @cached_property
    def _topo(self) -> tuple[str, ...] | None:
        indegree = {v: 0 for v in self._succ}
        for e in self._edges:
            indegree[e.dst] = indegree.get(e.dst, 0) + 1
        ready = [v for v, d in indegree.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for w in self._succ.get(v, ()):
                indegree[w] -= 1
                if indegree[w] == 0:
                    heapq.heappush(ready, w)
        if len(order) != len(indegree):
            return None
        return tuple(order)

    def topological_order(self) -> tuple[str, ...]:
        """Kahn's algorithm, ties broken by lexicographic vertex id."""
        if self._topo is None:
            raise CycleIntroduced(self.find_cycle() or ())
        return self._topo

    def digest(self) -> str:
        """Content hash of vertices and edges; stable across runs."""
        h = hashlib.sha256()
        for vid, s in self._vertices.items():
            h.update(repr((vid, s.outcomes, [sorted(a) for a in s.atoms],
                           [format_rational(m) for m in s.masses])).encode())
        for e in self._edges:
            h.update(repr((e.src, e.dst, e.map.kind.value, sorted(e.map.mapping.items()))).encode())
        return h.hexdigest()[:16]


def add_vertex(dag: HpamDag, space: FiniteProbSpace) -> HpamDag:
    return dag.add_vertex(space)


def add_edge(dag: HpamDag, src_id: str, dst_id: str, mapping) -> HpamDag:
    return dag.add_edge(src_id, dst_id, mapping)


@dataclass(frozen=True)
class PathComposition:
    vertices: tuple[str, ...]
    mapping: Mapping[str, str]

    __hash__ = None

    def as_map(self) -> AbstractionMap:
        return AbstractionMap(self.vertices[0], self.vertices[-1], self.mapping, MapKind.GENERIC)


def compose_path(dag: HpamDag, path: Sequence[str], *, verify: bool = True) -> PathComposition:
    """Pointwise composition of the edge maps along ``path``.

    With ``verify`` (the default) the composed map is re-checked for exact
    measure preservation between the endpoints; this can only fail on a DAG
    built without validation.
    """
    path = tuple(path)
    if not path:
        raise MismatchedInput("empty path")
    table = {x: x for x in dag.space(path[0]).outcomes}
    for a, b in zip(path, path[1:]):
        step = dag.edge(a, b).map.mapping
        table = {x: step[y] for x, y in table.items()}
    composed = PathComposition(path, MappingProxyType(table))
    if verify:
        bad = preservation_mismatches(dag.space(path[0]), dag.space(path[-1]), table)
        if bad:
            raise Eq1Violation(path[0], path[-1], bad[0].atom, bad[0].expected, bad[0].actual)
    return composed


def check_dag(dag: HpamDag) -> ValidationReport:
    """Re-verify every invariant; an empty report means the DAG is valid."""
    out: list[Violation] = []
    for vid, s in dag.vertices.items():
        if vid != s.id:
            out.append(Violation("MismatchedInput", f"vertex key {vid!r} holds space {s.id!r}", (vid, s.id)))
    seen = set()
    for e in dag.edges:
        label = f"edge {e.src} -> {e.dst}"
        missing = [v for v in (e.src, e.dst) if v not in dag.vertices]
        if missing:
            for v in missing:
                out.append(Violation("UnknownVertex", f"{label}: no vertex {v!r}", (v,)))
            continue
        if (e.src, e.dst) in seen:
            out.append(Violation("DuplicateEdge", f"{label}: duplicate edge", (e.src, e.dst)))
            continue
        seen.add((e.src, e.dst))
        if (e.map.src_id, e.map.dst_id) != (e.src, e.dst):
            out.append(Violation("MismatchedInput",
                                 f"{label}: map goes {e.map.src_id} -> {e.map.dst_id}", (e.src, e.dst)))
            continue
        src, dst = dag.space(e.src), dag.space(e.dst)
        try:
            report = check_measurable_map(src, dst, e.map)
        except HpamError as exc:
            out.append(Violation(type(exc).__name__, f"{label}: {exc}", (e.src, e.dst)))
            continue
        if not report:
            out.append(Violation("NotMeasurable",
                                 f"{label}: " + "; ".join(
                                     f"preimage of {_fmt(b)} straddles {_fmt(a)}"
                                     for b, a in report.violations),
                                 report.violations))
            continue
        bad = preservation_mismatches(src, dst, e.map)
        if bad:
            out.append(Violation("Eq1Violation",
                                 f"{label}: " + "; ".join(
                                     f"atom {_fmt(m.atom)} has {m.expected}, preimage has {m.actual}"
                                     for m in bad),
                                 bad))
    cycle = dag.find_cycle()
    if cycle:
        out.append(Violation("CycleIntroduced", "cycle " + " -> ".join(cycle), cycle))
    return ValidationReport(tuple(out))


def _fmt(block):
    return "{" + ",".join(sorted(block)) + "}"

