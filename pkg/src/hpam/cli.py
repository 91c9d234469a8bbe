"""Command-line interface.

Exit codes: 0 success, 1 usage or load errors, 2 model violations,
3 a pipeline run that did not reach Success.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from importlib import resources
from pathlib import Path

from .dag import compose_path
from .dot import export_dot, pipeline_clusters
from .errors import (
    CycleIntroduced,
    Eq1Violation,
    HpamError,
    ModelError,
    NoSuchEdge,
    NotMeasurable,
    StageTypeMismatch,
    UnknownVertex,
)
from .hpoa import compute_hpoa
from .measure import FiniteProbSpace, block_label, format_rational, pushforward
from .model import parse_model, validate_document
from .pipeline import Verdict, dump_trace, run_pipeline

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_NO_SUCCESS = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _read(path: str) -> str:
    p = Path(path)
    if p.exists():
        return p.read_text(encoding="utf-8")
    bundled = resources.files("hpam").joinpath("fixtures", p.name)
    if p.parent == Path(".") and bundled.is_file():
        return bundled.read_text(encoding="utf-8")
    raise UsageError(f"no such file: {path}")


def _load(args, err):
    text = _read(args.file)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        doc = parse_model(text, strict=args.strict)
    for w in caught:
        print(f"warning: {w.message}", file=err)
    return doc


def _fmt(q) -> str:
    return format_rational(q)


def cmd_validate(args, out, err):
    doc = _load(args, err)
    report = validate_document(doc)
    dag = doc.build_dag()
    if report.ok:
        print(f"ok: {len(dag.vertices)} vertices, {len(dag.edges)} edges", file=out)
        return EXIT_OK
    for v in report.violations:
        print(f"{v.kind}: {v.message}", file=out)
    print(f"{len(report.violations)} violation(s)", file=out)
    return EXIT_VIOLATION


def cmd_pushforward(args, out, err):
    doc = _load(args, err)
    src_id, dst_id = args.edge
    maps = [m for m in doc.maps if (m.src_id, m.dst_id) == (src_id, dst_id)]
    if not maps:
        raise UsageError(f"no map from {src_id!r} to {dst_id!r}")
    src, dst = doc.space(src_id), doc.space(dst_id)
    if not isinstance(src, FiniteProbSpace):
        raise UsageError(f"space {src_id!r} has no masses")
    m = maps[0]
    pushed = pushforward(src, m, dst)
    print(f"pushforward of {src_id} along {m.name} onto {dst_id}", file=out)
    status = EXIT_OK
    for block, mass in zip(pushed.atoms, pushed.masses):
        line = f"  {block_label(block, dst.outcomes)}  {_fmt(mass)}"
        if isinstance(dst, FiniteProbSpace):
            declared = dst.measure[block]
            if declared != mass:
                line += f"  (declared {_fmt(declared)})"
                status = EXIT_VIOLATION
        print(line, file=out)
    if isinstance(dst, FiniteProbSpace):
        print("declared masses: " + ("match" if status == EXIT_OK else "differ"), file=out)
    return status


def _print_hpoa(result, source, out):
    q = result.quotient
    print(f"HPoA of {result.source_id}: {len(result.cells)} cell(s) from "
          f"{result.source_atoms} atom(s), {result.merges} merge(s)", file=out)
    print(f"quotient {q.id}", file=out)
    for cell, mass in zip(result.cells, q.masses):
        print(f"  {block_label(cell, source.outcomes)}  {_fmt(mass)}", file=out)
    print("certificate", file=out)
    for c in result.certificate:
        print(f"  {block_label(c.event, source.outcomes)} -> {block_label(c.image, q.outcomes)}  "
              f"{_fmt(c.probability)} = {_fmt(c.quotient_probability)}", file=out)
    print("witnesses", file=out)
    if not result.witnesses:
        print("  (single cell)", file=out)
    for w in result.witnesses:
        i, j = w.cells
        print(f"  merge {block_label(result.cells[i], source.outcomes)} + "
              f"{block_label(result.cells[j], source.outcomes)} breaks essential "
              f"{w.event_index + 1} {block_label(w.event, source.outcomes)}", file=out)


def cmd_hpoa(args, out, err):
    doc = _load(args, err)
    try:
        space = doc.space(args.space)
    except KeyError:
        raise UsageError(f"no space {args.space!r}") from None
    if not isinstance(space, FiniteProbSpace):
        raise UsageError(f"space {args.space!r} has no masses")
    ess = doc.essentials_at(space.id)
    if ess is None:
        raise UsageError(f"no essential events declared at {space.id!r}")
    _print_hpoa(compute_hpoa(space, ess), space, out)
    return EXIT_OK


def cmd_compose(args, out, err):
    doc = _load(args, err)
    path = [v for v in args.path.split(",") if v]
    dag = doc.build_dag()
    try:
        composed = compose_path(dag, path)
    except (NoSuchEdge, UnknownVertex) as exc:
        raise UsageError(str(exc)) from None
    src, dst = dag.space(path[0]), dag.space(path[-1])
    print(f"composition along {' -> '.join(path)}", file=out)
    for x in src.outcomes:
        print(f"  {x} -> {composed.mapping[x]}", file=out)
    pushed = pushforward(src, composed.mapping, dst)
    print("pushforward", file=out)
    for block, mass in zip(pushed.atoms, pushed.masses):
        print(f"  {block_label(block, dst.outcomes)}  {_fmt(mass)}", file=out)
    return EXIT_OK


def _run(args, err):
    doc = _load(args, err)
    if doc.pipeline is None:
        raise UsageError("the model declares no pipeline")
    return run_pipeline(doc.pipeline_spec(args.tolerance))


def cmd_pipeline_run(args, out, err):
    outcome = _run(args, err)
    for it in outcome.trace:
        print(f"iteration {it.iteration}", file=out)
        for r in it.stages:
            print(f"  stage {r.index} {r.kind}: {', '.join(r.vertices)}  [{r.snapshot}]", file=out)
        if it.hpoa is not None:
            q = it.hpoa.quotient
            cells = ", ".join(f"{lab}={_fmt(m)}" for lab, m in zip(q.outcomes, q.masses))
            print(f"  hpoa {q.id}: {cells}", file=out)
        if it.comparison is not None:
            for e in it.comparison.entries:
                flag = "ok" if e.difference <= it.comparison.tolerance else "MISMATCH"
                print(f"  compare {block_label(e.event)}: computed {_fmt(e.computed)} observed "
                      f"{_fmt(e.observed)} diff {_fmt(e.difference)}  {flag}", file=out)
        if it.update is not None:
            print(f"  update {', '.join(v for v, _ in it.update) or '(none)'}", file=out)
    line = f"verdict: {outcome.verdict.value} after {outcome.iterations} iteration(s)"
    if outcome.reason:
        line += f" ({outcome.reason})"
    print(line, file=out)
    if args.trace:
        Path(args.trace).write_text(dump_trace(outcome), encoding="utf-8")
    return EXIT_OK if outcome.verdict is Verdict.SUCCESS else EXIT_NO_SUCCESS


def cmd_export_dot(args, out, err):
    if args.pipeline:
        outcome = _run(args, err)
        text = export_dot(outcome.dag, outcome.hpoa, pipeline_clusters(outcome))
    else:
        text = export_dot(_load(args, err).build_dag())
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("file", help="model file (bundled fixture names also work)")
    common.add_argument("--strict", action="store_true", help="reject unknown fields")

    parser = _Parser(prog="hpam", description="Probabilistic abstraction models: check, abstract, run.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", parents=[common], help="check every invariant of a model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("pushforward", parents=[common], help="push a space along a declared map")
    p.add_argument("--edge", nargs=2, metavar=("SRC", "DST"), required=True)
    p.set_defaults(func=cmd_pushforward)

    p = sub.add_parser("hpoa", parents=[common], help="highest possible abstraction of a space")
    p.add_argument("--space", required=True)
    p.set_defaults(func=cmd_hpoa)

    p = sub.add_parser("compose", parents=[common], help="compose the edge maps along a path")
    p.add_argument("--path", required=True, help="comma-separated vertex ids")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("pipeline", help="staged pipeline commands")
    psub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    run = psub.add_parser("run", parents=[common], help="run the declared pipeline")
    run.add_argument("--trace", metavar="OUT", help="write the JSON trace here")
    run.add_argument("--tolerance", metavar="RAT", help="override the file's tolerance")
    run.set_defaults(func=cmd_pipeline_run)

    p = sub.add_parser("export-dot", parents=[common], help="DOT text for the model's DAG")
    p.add_argument("--pipeline", action="store_true", help="export the DAG built by the pipeline run")
    p.add_argument("--tolerance", metavar="RAT", help=argparse.SUPPRESS)
    p.add_argument("--output", "-o", metavar="OUT")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out, err)
    except UsageError as exc:
        print(str(exc).rstrip("\n"), file=err)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    except (Eq1Violation, StageTypeMismatch, NotMeasurable, CycleIntroduced) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_VIOLATION
    except HpamError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_VIOLATION
    except SystemExit as exc:
        # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
