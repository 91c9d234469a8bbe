"""Graphviz DOT text for an HPAM-DAG.

Arrows point from the more concrete space to the more abstract one, and
``rankdir=BT`` draws abstract spaces above concrete ones. Output depends only
on the DAG contents, so it can be diffed and kept as a golden file.
"""

from __future__ import annotations

from collections.abc import Sequence

from .dag import HpamDag
from .hpoa import HpoaResult


def _quote(text: str) -> str:
    return '"' + text.replace('"', '\\"') + '"'


def _node(dag: HpamDag, vid: str, hpoa: HpoaResult | None, indent: str) -> str:
    space = dag.space(vid)
    n = len(space.atoms)
    label = f"{vid}\\n{n} atom{'s' if n != 1 else ''}"
    is_hpoa = hpoa is not None and vid == hpoa.quotient.id
    if is_hpoa:
        label += "\\nHPoA"
    attrs = [f"label={_quote(label)}"]
    if is_hpoa:
        attrs.append("shape=doubleoctagon")
    return f"{indent}{_quote(vid)} [{', '.join(attrs)}];"


def export_dot(dag: HpamDag, hpoa: HpoaResult | None = None,
               clusters: Sequence[tuple[str, Sequence[str]]] | None = None) -> str:
    """DOT text; ``clusters`` groups vertices into labelled boxes, in the given order."""
    if not dag.vertices:
        return "digraph hpam {\n}\n"
    lines = ["digraph hpam {", "  rankdir=BT;", "  node [shape=box];"]
    placed = set()
    for i, (label, members) in enumerate(clusters or (), 1):
        lines.append(f"  subgraph cluster_{i} {{")
        lines.append(f"    label={_quote(label)};")
        for vid in members:
            lines.append(_node(dag, vid, hpoa, "    "))
            placed.add(vid)
        lines.append("  }")
    for vid in dag.topological_order() if dag.find_cycle() is None else sorted(dag.vertices):
        if vid not in placed:
            lines.append(_node(dag, vid, hpoa, "  "))
    for e in sorted(dag.edges, key=lambda e: (e.src, e.dst)):
        lines.append(f"  {_quote(e.src)} -> {_quote(e.dst)} [label={_quote(e.map.kind.value)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def pipeline_clusters(outcome) -> list[tuple[str, list[str]]]:
    """One cluster per stage of the last iteration, plus base and HPoA."""
    last = outcome.trace[-1]
    out = [("base", [outcome.dag.sources()[0]] if outcome.dag.sources() else [])]
    for r in last.stages:
        out.append((f"stage {r.index}: {r.kind}", list(r.vertices)))
    if last.hpoa is not None:
        out.append(("hpoa", [last.hpoa.quotient.id]))
    return out
