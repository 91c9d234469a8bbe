"""The ``hpam/1`` model document: a JSON file describing spaces, maps and runs.

Top-level layout::

    {
      "format": "hpam/1",
      "note": "free text",
      "spaces": [{"id": "S", "outcomes": [...], "atoms": [[...], ...], "masses": ["1/2", ...]}],
      "maps": [{"name": "f", "src": "S", "dst": "T", "kind": "generic", "pairs": {"a": "x"}}],
      "edges": ["f"],
      "divergent": [{"name": "D", "src": "S", "branches": ["f", "g"], "weights": ["1/2", "1/2"]}],
      "convergent": [{"name": "C", "dst": "T", "legs": ["f", "h"], "weights": [...]}],
      "essentials": [{"space": "T", "events": [["x"], ...]}],
      "pipeline": {"base": "S", "stages": [{"direct": "f"}, ...], "essentials": [[...]],
                   "observed": [{"event": [...], "p": "1/2"}], "tolerance": "0",
                   "max_iterations": 1, "update": {"hook": "identity", "vertices": []}}
    }

``atoms`` defaults to singletons; a space without ``masses`` is a skeleton
whose measure is derived when it is used as a pipeline target. Masses may be
``"n/d"`` strings, decimal strings or JSON numbers; JSON numbers are read as
exact decimals. Serialisation always writes ``"n/d"`` strings.

Loading checks everything that makes the objects well formed (partitions,
masses, totality, references, stage chaining) and reports the first problem
with its line and column. Measure preservation and acyclicity are left to
:func:`validate_document`, so broken models can still be inspected.
"""

from __future__ import annotations

import json
import json.decoder
import json.scanner
import warnings
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction

from .abstraction import (
    AbstractionMap,
    ConvergentFamily,
    DivergentFamily,
    MapKind,
    build_convergent,
    build_divergent,
    make_map,
    validate_direct,
)
from .dag import Edge, HpamDag, ValidationReport, Violation, check_dag
from .errors import HpamError, ModelSemanticError, ModelSyntaxError
from .hpoa import EssentialEventSet
from .measure import FiniteProbSpace, Skeleton, format_rational, to_rational
from .pipeline import (
    HOOKS,
    ConvergentStage,
    DirectStage,
    DivergentStage,
    PipelineSpec,
    SequentialStage,
    _build,
)

FORMAT = "hpam/1"


# -- located JSON ---------------------------------------------------------

class _Obj(dict):
    pos = 0


class _Arr(list):
    pos = 0


class _LocatingDecoder(json.JSONDecoder):
    """Stdlib decoder that remembers where each object and array started."""

    def __init__(self):
        super().__init__(object_pairs_hook=_Obj, parse_float=Decimal)

        def parse_object(s_and_end, *args):
            obj, end = json.decoder.JSONObject(s_and_end, *args)
            obj.pos = s_and_end[1] - 1
            return obj, end

        def parse_array(s_and_end, scan_once, _w=json.decoder.WHITESPACE.match):
            arr, end = json.decoder.JSONArray(s_and_end, scan_once, _w)
            out = _Arr(arr)
            out.pos = s_and_end[1] - 1
            return out, end

        self.parse_object = parse_object
        self.parse_array = parse_array
        self.scan_once = json.scanner.py_make_scanner(self)


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


# -- document types -------------------------------------------------------

@dataclass(frozen=True)
class DivergentDecl:
    name: str
    src: str
    branches: tuple[str, ...]
    weights: tuple[Fraction, ...] | None = None


@dataclass(frozen=True)
class ConvergentDecl:
    name: str
    dst: str
    legs: tuple[str, ...]
    weights: tuple[Fraction, ...] | None = None


@dataclass(frozen=True)
class PipelineDecl:
    base: str
    stages: tuple[tuple[str, str | tuple[str, ...]], ...]
    essentials: tuple[frozenset[str], ...]
    observed: tuple[tuple[frozenset[str], Fraction], ...]
    tolerance: Fraction = Fraction(0)
    max_iterations: int = 1
    hook: str = "identity"
    update_vertices: tuple[str, ...] = ()


@dataclass(frozen=True)
class ModelDocument:
    format: str = FORMAT
    spaces: tuple[Skeleton, ...] = ()
    maps: tuple[AbstractionMap, ...] = ()
    edges: tuple[str, ...] = ()
    divergent: tuple[DivergentDecl, ...] = ()
    convergent: tuple[ConvergentDecl, ...] = ()
    essentials: tuple[EssentialEventSet, ...] = ()
    pipeline: PipelineDecl | None = None
    note: str | None = None

    __hash__ = None

    def space(self, space_id: str) -> Skeleton:
        for s in self.spaces:
            if s.id == space_id:
                return s
        raise KeyError(space_id)

    def map(self, name: str) -> AbstractionMap:
        for m in self.maps:
            if m.name == name:
                return m
        raise KeyError(name)

    def essentials_at(self, space_id: str) -> EssentialEventSet | None:
        for e in self.essentials:
            if e.space_id == space_id:
                return e
        return None

    def build_dag(self) -> HpamDag:
        """The declared vertices and edges, without admission checks."""
        vertices = [s for s in self.spaces if isinstance(s, FiniteProbSpace)]
        edges = [Edge(m.src_id, m.dst_id, m) for m in (self.map(n) for n in self.edges)]
        return HpamDag(vertices, edges)

    def pipeline_spec(self, tolerance=None) -> PipelineSpec:
        p = self.pipeline
        if p is None:
            raise HpamError("the model declares no pipeline")
        divs = {d.name: d for d in self.divergent}
        convs = {c.name: c for c in self.convergent}
        stages = []
        for kind, ref in p.stages:
            if kind == "direct":
                m = self.map(ref)
                stages.append(DirectStage(m, self.space(m.dst_id)))
            elif kind == "sequential":
                steps = [self.map(r) for r in ref]
                stages.append(SequentialStage(tuple(DirectStage(m, self.space(m.dst_id)) for m in steps)))
            elif kind == "divergent":
                d = divs[ref]
                branches = tuple((self.map(b), self.space(self.map(b).dst_id)) for b in d.branches)
                stages.append(DivergentStage(branches, d.weights))
            else:
                c = convs[ref]
                stages.append(ConvergentStage(tuple(self.map(n) for n in c.legs), self.space(c.dst), c.weights))
        base = self.space(p.base)
        return PipelineSpec(
            base=base,
            stages=tuple(stages),
            essentials=p.essentials,
            observed=p.observed,
            tolerance=p.tolerance if tolerance is None else to_rational(tolerance),
            max_iterations=p.max_iterations,
            update_hook=HOOKS[p.hook],
            update_vertices=p.update_vertices,
        )


# -- parsing --------------------------------------------------------------

_FIELDS = {
    "document": {"format", "note", "spaces", "maps", "edges", "divergent", "convergent",
                 "essentials", "pipeline"},
    "space": {"id", "outcomes", "atoms", "masses", "note"},
    "map": {"name", "src", "dst", "kind", "pairs", "note"},
    "divergent": {"name", "src", "branches", "weights", "note"},
    "convergent": {"name", "dst", "legs", "weights", "note"},
    "essentials": {"space", "events", "note"},
    "pipeline": {"base", "stages", "essentials", "observed", "tolerance", "max_iterations",
                 "update", "note"},
    "observed": {"event", "p"},
    "update": {"hook", "vertices"},
}


class _Reader:
    def __init__(self, text: str, strict: bool):
        self.text = text
        self.strict = strict

    def fail(self, node, message, cause=None):
        pos = getattr(node, "pos", 0)
        line, col = _line_col(self.text, pos)
        raise ModelSemanticError(message, line, col, cause)

    def obj(self, node, kind, where):
        if not isinstance(node, dict):
            self.fail(node, f"{where} must be an object")
        unknown = sorted(set(node) - _FIELDS[kind])
        if unknown:
            message = f"{where}: unknown field(s) {', '.join(unknown)}"
            if self.strict:
                self.fail(node, message)
            line, col = _line_col(self.text, node.pos)
            warnings.warn(f"line {line}, column {col}: {message}", stacklevel=4)
        return node

    def need(self, node, key, where):
        if key not in node:
            self.fail(node, f"{where}: missing field {key!r}")
        return node[key]

    def string(self, node, parent, where) -> str:
        if not isinstance(node, str):
            self.fail(parent, f"{where} must be a string")
        return node

    def strings(self, node, parent, where) -> tuple[str, ...]:
        if not isinstance(node, list):
            self.fail(parent, f"{where} must be a list of strings")
        return tuple(self.string(x, node, where) for x in node)

    def events(self, node, parent, where) -> tuple[frozenset[str], ...]:
        if not isinstance(node, list):
            self.fail(parent, f"{where} must be a list of events")
        return tuple(frozenset(self.strings(e, node, f"{where} event")) for e in node)

    def rational(self, value, parent, where) -> Fraction:
        if isinstance(value, (list, dict)) or value is None:
            self.fail(parent, f"{where} must be a rational")
        try:
            return to_rational(value)
        except HpamError as exc:
            self.fail(parent, f"{where}: {exc}", exc)

    def rationals(self, node, parent, where) -> tuple[Fraction, ...]:
        if not isinstance(node, list):
            self.fail(parent, f"{where} must be a list")
        return tuple(self.rational(x, node, where) for x in node)

    def guard(self, node, where, fn, *args):
        try:
            return fn(*args)
        except HpamError as exc:
            self.fail(node, f"{where}: {exc}", exc)


def _list(reader, root, key):
    node = root.get(key, [])
    if not isinstance(node, list):
        reader.fail(root, f"{key!r} must be a list")
    return node


def parse_model(text: str, strict: bool = False) -> ModelDocument:
    """Load a model document; raises ModelSyntaxError or ModelSemanticError."""
    try:
        root = _LocatingDecoder().decode(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, exc.lineno, exc.colno, exc) from None
    r = _Reader(text, strict)
    if not isinstance(root, dict):
        raise ModelSyntaxError("a model document must be a JSON object", 1, 1)
    r.obj(root, "document", "document")
    fmt = r.need(root, "format", "document")
    if fmt != FORMAT:
        r.fail(root, f"unsupported format {fmt!r}, expected {FORMAT!r}")
    note = root.get("note")
    if note is not None:
        r.string(note, root, "note")

    spaces: dict[str, Skeleton] = {}
    for node in _list(r, root, "spaces"):
        r.obj(node, "space", "space")
        sid = r.string(r.need(node, "id", "space"), node, "space id")
        where = f"space {sid!r}"
        if sid in spaces:
            r.fail(node, f"{where} is declared twice")
        outcomes = r.strings(r.need(node, "outcomes", where), node, f"{where} outcomes")
        atoms = node.get("atoms")
        atoms = tuple(frozenset([x]) for x in outcomes) if atoms is None else r.events(atoms, node, f"{where} atoms")
        if "masses" in node:
            masses = r.rationals(node["masses"], node, f"{where} masses")
            spaces[sid] = r.guard(node, where, FiniteProbSpace, sid, outcomes, atoms, masses)
        else:
            spaces[sid] = r.guard(node, where, Skeleton, sid, outcomes, atoms)

    def space_ref(node, key, where):
        sid = r.string(r.need(node, key, where), node, f"{where} {key}")
        if sid not in spaces:
            r.fail(node, f"{where}: unknown space {sid!r}")
        return spaces[sid]

    maps: dict[str, AbstractionMap] = {}
    for node in _list(r, root, "maps"):
        r.obj(node, "map", "map")
        name = r.string(r.need(node, "name", "map"), node, "map name")
        where = f"map {name!r}"
        if name in maps:
            r.fail(node, f"{where} is declared twice")
        src, dst = space_ref(node, "src", where), space_ref(node, "dst", where)
        pairs = r.need(node, "pairs", where)
        if not isinstance(pairs, dict):
            r.fail(node, f"{where} pairs must be an object")
        for v in pairs.values():
            r.string(v, pairs, f"{where} image")
        kind = node.get("kind", "generic")
        if kind not in {k.value for k in MapKind}:
            r.fail(node, f"{where}: unknown kind {kind!r}")
        maps[name] = r.guard(node, where, make_map, src, dst, dict(pairs), kind, name)

    def map_ref(parent, name, where):
        r.string(name, parent, where)
        if name not in maps:
            r.fail(parent, f"{where}: unknown map {name!r}")
        return maps[name]

    edges_node = root.get("edges", [])
    edges = r.strings(edges_node, root, "edges")
    seen = set()
    for name in edges:
        m = map_ref(edges_node, name, "edge")
        if name in seen:
            r.fail(edges_node, f"edge {name!r} is listed twice")
        seen.add(name)
        for sid in (m.src_id, m.dst_id):
            if not isinstance(spaces[sid], FiniteProbSpace):
                r.fail(edges_node, f"edge {name!r}: space {sid!r} has no masses")

    divergent = []
    for node in _list(r, root, "divergent"):
        r.obj(node, "divergent", "divergent family")
        name = r.string(r.need(node, "name", "divergent family"), node, "family name")
        where = f"divergent family {name!r}"
        src = space_ref(node, "src", where)
        branches = r.strings(r.need(node, "branches", where), node, f"{where} branches")
        weights = r.rationals(node["weights"], node, f"{where} weights") if "weights" in node else None
        pairs = [(map_ref(node, b, where), None) for b in branches]
        pairs = [(m, spaces[m.dst_id]) for m, _ in pairs]
        r.guard(node, where, DivergentFamily, src.id, pairs, weights)
        divergent.append(DivergentDecl(name, src.id, branches, weights))

    convergent = []
    for node in _list(r, root, "convergent"):
        r.obj(node, "convergent", "convergent family")
        name = r.string(r.need(node, "name", "convergent family"), node, "family name")
        where = f"convergent family {name!r}"
        dst = space_ref(node, "dst", where)
        legs = r.strings(r.need(node, "legs", where), node, f"{where} legs")
        weights = r.rationals(node["weights"], node, f"{where} weights") if "weights" in node else None
        pairs = [(spaces[m.src_id], m) for m in (map_ref(node, n, where) for n in legs)]
        r.guard(node, where, ConvergentFamily, dst.id, pairs, weights)
        convergent.append(ConvergentDecl(name, dst.id, legs, weights))
    for decls in (divergent, convergent):
        names = [d.name for d in decls]
        if len(set(names)) != len(names):
            r.fail(root, f"family names must be unique: {names}")

    essentials = []
    for node in _list(r, root, "essentials"):
        r.obj(node, "essentials", "essentials")
        space = space_ref(node, "space", "essentials")
        where = f"essentials at {space.id!r}"
        events = r.events(r.need(node, "events", where), node, where)
        ess = EssentialEventSet(space.id, events)
        r.guard(node, where, ess.validate, space, True)
        essentials.append(ess)

    pipeline = None
    if "pipeline" in root:
        pipeline = _read_pipeline(r, root["pipeline"], spaces, maps,
                                  {d.name for d in divergent}, {c.name for c in convergent})

    doc = ModelDocument(FORMAT, tuple(spaces.values()), tuple(maps.values()), edges,
                        tuple(divergent), tuple(convergent), tuple(essentials), pipeline, note)
    if pipeline is not None:
        node = root["pipeline"]
        spec = r.guard(node, "pipeline", doc.pipeline_spec)
        r.guard(node, "pipeline", spec.validate)
        for v in pipeline.update_vertices:
            if not isinstance(spaces[v], FiniteProbSpace):
                r.fail(node, f"pipeline: update vertex {v!r} has no masses")
    return doc


def _read_pipeline(r: _Reader, node, spaces, maps, divergent, convergent) -> PipelineDecl:
    r.obj(node, "pipeline", "pipeline")
    where = "pipeline"
    base = r.string(r.need(node, "base", where), node, "pipeline base")
    if base not in spaces:
        r.fail(node, f"pipeline: unknown space {base!r}")
    if not isinstance(spaces[base], FiniteProbSpace):
        r.fail(node, f"pipeline: base space {base!r} has no masses")
    stages_node = r.need(node, "stages", where)
    if not isinstance(stages_node, list):
        r.fail(node, "pipeline stages must be a list")
    stages = []
    for i, st in enumerate(stages_node, 1):
        if not isinstance(st, dict) or len(st) != 1:
            r.fail(st if isinstance(st, dict) else stages_node, f"stage {i} must be an object with one key")
        (kind, ref), = st.items()
        if kind in ("direct", "divergent", "convergent"):
            r.string(ref, st, f"stage {i}")
            known = {"direct": maps, "divergent": divergent, "convergent": convergent}[kind]
            if ref not in known:
                r.fail(st, f"stage {i}: unknown {kind} reference {ref!r}")
        elif kind == "sequential":
            ref = r.strings(ref, st, f"stage {i}")
            for m in ref:
                if m not in maps:
                    r.fail(st, f"stage {i}: unknown map {m!r}")
        else:
            r.fail(st, f"stage {i}: unknown stage kind {kind!r}")
        stages.append((kind, ref))
    essentials = r.events(r.need(node, "essentials", where), node, "pipeline essentials")
    observed = []
    obs_node = r.need(node, "observed", where)
    if not isinstance(obs_node, list):
        r.fail(node, "pipeline observed must be a list")
    for entry in obs_node:
        r.obj(entry, "observed", "observed entry")
        event = frozenset(r.strings(r.need(entry, "event", "observed entry"), entry, "observed event"))
        p = r.rational(r.need(entry, "p", "observed entry"), entry, "observed probability")
        if not 0 <= p <= 1:
            r.fail(entry, f"observed probability {p} is outside [0, 1]")
        observed.append((event, p))
    tolerance = r.rational(node.get("tolerance", 0), node, "pipeline tolerance")
    if tolerance < 0:
        r.fail(node, f"pipeline tolerance {tolerance} is negative")
    max_iterations = node.get("max_iterations", 1)
    if not isinstance(max_iterations, int) or isinstance(max_iterations, bool) or max_iterations < 1:
        r.fail(node, "pipeline max_iterations must be a positive integer")
    hook, vertices = "identity", ()
    if "update" in node:
        upd = r.obj(node["update"], "update", "pipeline update")
        hook = r.string(upd.get("hook", "identity"), upd, "update hook")
        if hook not in HOOKS:
            r.fail(upd, f"unknown update hook {hook!r}; known: {', '.join(sorted(HOOKS))}")
        vertices = r.strings(upd.get("vertices", []), upd, "update vertices")
        for v in vertices:
            if v not in spaces:
                r.fail(upd, f"update: unknown space {v!r}")
    return PipelineDecl(base, tuple(stages), essentials, tuple(observed), tolerance,
                        max_iterations, hook, vertices)


def load_model(path, strict: bool = False) -> ModelDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), strict)


# -- serialisation --------------------------------------------------------

def _ordered(event, order) -> list[str]:
    return [x for x in order if x in event] + sorted(set(event) - set(order))


def to_json(doc: ModelDocument) -> dict:
    out: dict = {"format": doc.format}
    if doc.note is not None:
        out["note"] = doc.note
    out["spaces"] = []
    for s in doc.spaces:
        entry = {"id": s.id, "outcomes": list(s.outcomes),
                 "atoms": [_ordered(a, s.outcomes) for a in s.atoms]}
        if isinstance(s, FiniteProbSpace):
            entry["masses"] = [format_rational(m) for m in s.masses]
        out["spaces"].append(entry)
    out["maps"] = [
        {"name": m.name, "src": m.src_id, "dst": m.dst_id, "kind": m.kind.value,
         "pairs": {x: m.mapping[x] for x in doc.space(m.src_id).outcomes}}
        for m in doc.maps
    ]
    out["edges"] = list(doc.edges)

    def weights(entry, w):
        if w is not None:
            entry["weights"] = [format_rational(x) for x in w]
        return entry

    out["divergent"] = [weights({"name": d.name, "src": d.src, "branches": list(d.branches)}, d.weights)
                        for d in doc.divergent]
    out["convergent"] = [weights({"name": c.name, "dst": c.dst, "legs": list(c.legs)}, c.weights)
                         for c in doc.convergent]
    out["essentials"] = [
        {"space": e.space_id, "events": [_ordered(ev, doc.space(e.space_id).outcomes) for ev in e.events]}
        for e in doc.essentials
    ]
    p = doc.pipeline
    if p is not None:
        final = doc.pipeline_spec().validate()
        order = doc.space(final).outcomes
        out["pipeline"] = {
            "base": p.base,
            "stages": [{k: (list(v) if k == "sequential" else v)} for k, v in p.stages],
            "essentials": [_ordered(e, order) for e in p.essentials],
            "observed": [{"event": _ordered(e, order), "p": format_rational(q)} for e, q in p.observed],
            "tolerance": format_rational(p.tolerance),
            "max_iterations": p.max_iterations,
            "update": {"hook": p.hook, "vertices": list(p.update_vertices)},
        }
    return out


def serialize_model(doc: ModelDocument) -> str:
    return json.dumps(to_json(doc), indent=2, ensure_ascii=False) + "\n"


# -- whole-document validation -------------------------------------------

def validate_document(doc: ModelDocument) -> ValidationReport:
    """Every check beyond well-formedness: DAG invariants, direct maps,
    family constructions against declared masses, and the pipeline build."""
    out = list(check_dag(doc.build_dag()).violations)
    spaces = {s.id: s for s in doc.spaces}
    for m in doc.maps:
        src, dst = spaces[m.src_id], spaces[m.dst_id]
        if m.kind is MapKind.DIRECT and isinstance(src, FiniteProbSpace) and isinstance(dst, FiniteProbSpace):
            rep = validate_direct(src, dst, m)
            if not rep.passed:
                failed = [name for name, ok in (("bijective", rep.bijective), ("measurable", rep.measurable),
                                                ("pushforward", rep.pushforward_equal)) if not ok]
                out.append(Violation("DirectAbstraction", f"map {m.name!r} fails: {', '.join(failed)}",
                                     (m.name,)))
    for d in doc.divergent:
        src = spaces[d.src]
        if not isinstance(src, FiniteProbSpace):
            continue
        branches = [(doc.map(b), spaces[doc.map(b).dst_id]) for b in d.branches]
        try:
            targets, _ = build_divergent(src, DivergentFamily(src.id, branches, d.weights))
        except HpamError as exc:
            out.append(Violation(type(exc).__name__, f"divergent family {d.name!r}: {exc}", (d.name,)))
            continue
        for t in targets:
            declared = spaces[t.id]
            if isinstance(declared, FiniteProbSpace) and declared != t:
                out.append(Violation("Eq1Violation",
                                     f"divergent family {d.name!r}: declared masses of {t.id!r} "
                                     f"differ from the pushforward", (d.name, t.id)))
    for c in doc.convergent:
        legs = [(spaces[doc.map(n).src_id], doc.map(n)) for n in c.legs]
        if not all(isinstance(s, FiniteProbSpace) for s, _ in legs):
            continue
        try:
            computed = build_convergent(ConvergentFamily(c.dst, legs, c.weights), spaces[c.dst])
        except HpamError as exc:
            out.append(Violation(type(exc).__name__, f"convergent family {c.name!r}: {exc}", (c.name,)))
            continue
        declared = spaces[c.dst]
        if isinstance(declared, FiniteProbSpace) and declared != computed:
            out.append(Violation("Eq1Violation",
                                 f"convergent family {c.name!r}: declared masses of {c.dst!r} differ "
                                 f"from the aggregated measure", (c.name, c.dst)))
    if doc.pipeline is not None:
        try:
            _build(doc.pipeline_spec(), {})
        except HpamError as exc:
            out.append(Violation(type(exc).__name__, f"pipeline: {exc}", ("pipeline",)))
    return ValidationReport(tuple(out))


__all__ = [
    "FORMAT",
    "ConvergentDecl",
    "DivergentDecl",
    "ModelDocument",
    "PipelineDecl",
    "load_model",
    "parse_model",
    "serialize_model",
    "to_json",
    "validate_document",
]
