"""Command-line front end.

Every stage reads and writes plain files (ledger, id lists, reports), so an
external detector can replace the bundled toy analyzer at any point.

Exit codes: 0 success, 1 corpus or output failure, 2 usage or configuration
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .analyzer import AnalyzerConfig, AnalyzerError, analyze, preset
from .evaluator import FunnelError, call_chains, funnel, survivors
from .minimal import MinimalError, synthesize_minimal, validate_minimal
from .model import CodeModel, build_model, call_graph, load_corpus, read_text, unit_kind_for
from .mutator import LEDGER_NAME, LedgerError, MutantLedger, MutationError, OutputError, _atomic_write, inject_all, write_output
from .operators import CatalogError, OperatorError, SecurityOperator, load_catalog, load_operators
from .report import ReportError, ToolReport
from .schemes import SchemeConfig, derive_mip, parse_schemes
from .tracefilter import TraceFormat, execution_order, filter_executable, read_id_list, read_traces, write_id_list

logger = logging.getLogger("leakmut")

MANIFEST_NAME = "manifest.json"
EXECUTABLE_LIST = "executable.txt"
NON_EXECUTABLE_LIST = "non-executable.txt"


class UsageError(Exception):
    """Bad flags, config or input files (exit 2)."""


class CorpusError(Exception):
    """The corpus could not be processed (exit 1)."""


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    command: str
    corpus: Optional[str]
    schemes: Optional[str]
    operator: Optional[str]
    catalog: Optional[str]
    out_dir: Optional[str]
    seed_note: Optional[str]
    started: str
    tool_version: str = __version__

    def write(self, out_dir: Path) -> Path:
        path = out_dir / MANIFEST_NAME
        data = {k.replace("_", "-"): v for k, v in asdict(self).items()}
        _atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")
        return path


def _write_manifest(args: argparse.Namespace, run_id: Optional[str] = None) -> None:
    out = getattr(args, "out", None)
    if out is None:
        return
    if run_id is None:
        relevant = {k: str(v) for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}
        run_id = hashlib.sha256(json.dumps(relevant, sort_keys=True).encode()).hexdigest()[:16]
    RunManifest(
        run_id=run_id,
        command=args.command,
        corpus=_opt_str(getattr(args, "corpus", None)),
        schemes=getattr(args, "schemes", None),
        operator=_opt_str(getattr(args, "operator", None)),
        catalog=_opt_str(getattr(args, "catalog", None)),
        out_dir=str(out),
        seed_note=getattr(args, "seed_note", None),
        started=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    ).write(Path(out))


def _opt_str(value) -> Optional[str]:
    return None if value is None else str(value)


# --------------------------------------------------------------------------
# Shared loading


def _operator(args) -> SecurityOperator:
    try:
        ops = load_operators(args.operator)
    except (OperatorError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad operator file: {exc}") from None
    if args.operator_id is None:
        return next(iter(ops.values()))
    if args.operator_id not in ops:
        raise UsageError(f"operator {args.operator_id!r} not defined (have: {', '.join(ops)})")
    return ops[args.operator_id]


def _catalog(args):
    try:
        return load_catalog(args.catalog)
    except (CatalogError, OSError) as exc:
        raise UsageError(f"bad source/sink catalog: {exc}") from None


def _load_corpus(path: Path):
    if not path.is_dir():
        raise UsageError(f"corpus {path} is not a directory")
    units, diags = load_corpus(path)
    errors = [d for d in diags if d.severity == "error"]
    for d in errors:
        print(f"warning: {d.path}:{d.line}:{d.col}: {d.message}", file=sys.stderr)
    if errors and not units:
        raise CorpusError(f"no unit of corpus {path} could be parsed")
    return units, errors


def _model(path: Path) -> CodeModel:
    units, _ = _load_corpus(path)
    return build_model(units)


def _ledger(path: Path) -> MutantLedger:
    try:
        return MutantLedger.read(path)
    except (OSError, LedgerError) as exc:
        raise UsageError(f"cannot read ledger {path}: {exc}") from None


def _executable(path: Path) -> frozenset[int]:
    try:
        return read_id_list(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read executable list {path}: {exc}") from None


def _analyzer_config(args) -> AnalyzerConfig:
    try:
        if getattr(args, "config", None):
            return AnalyzerConfig.load(args.config)
        return preset(args.toy)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad analyzer configuration: {exc}") from None


def _report(args, corpus_model: Optional[CodeModel]) -> ToolReport:
    if args.report is not None:
        try:
            return ToolReport.read(args.report)
        except (OSError, ReportError) as exc:
            raise UsageError(f"cannot read report {args.report}: {exc}") from None
    if args.toy is None and getattr(args, "config", None) is None:
        raise UsageError("give either --report FILE or --toy PRESET")
    if corpus_model is None:
        raise UsageError("--toy needs --corpus pointing at the mutated tree")
    return analyze(corpus_model, _catalog(args), _analyzer_config(args))


# --------------------------------------------------------------------------
# Commands


def cmd_profile(args) -> int:
    op = _operator(args)
    schemes = _schemes(args)
    units, _ = _load_corpus(args.corpus)
    model = build_model(units)
    _write_manifest(args)
    config = SchemeConfig(taint_k=args.taint_k, nested_depth=args.nested_depth)
    for scheme in schemes:
        try:
            mip = derive_mip(model, scheme, op, config)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if args.out is not None:
            _atomic_write(Path(args.out) / f"mip-{scheme.value}.tsv", mip.dump())
        if args.format == "records":
            print(f"mip\tscheme={scheme.value}\tpoints={len(mip.points)}")
        else:
            print(f"{scheme.value}: {len(mip.points)} points")
    return 0


def _schemes(args):
    try:
        return parse_schemes(args.schemes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_mutate(args) -> int:
    op = _operator(args)
    schemes = _schemes(args)
    units, errors = _load_corpus(args.corpus)
    model = build_model(units)
    config = SchemeConfig(taint_k=args.taint_k, nested_depth=args.nested_depth)
    settings = (f"schemes={','.join(s.value for s in schemes)};operator={op.operator_id};"
                f"taint-k={config.taint_k};nested-depth={config.nested_depth};strict-pairs={args.strict_pairs}")
    try:
        mips = [derive_mip(model, s, op, config) for s in schemes]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = inject_all(model, mips, op, strict_pairs=args.strict_pairs, settings=settings)
    # everything the parser did not take (build files, broken sources) is copied verbatim
    parsed = {u.path for u in units}
    extra = {}
    for p in sorted(Path(args.corpus).rglob("*")):
        rel = p.relative_to(args.corpus).as_posix()
        if p.is_file() and rel not in parsed and (unit_kind_for(p) is not None or not _is_output_artifact(rel)):
            extra[rel] = read_text(p)
    _write_manifest(args, result.ledger.run_id)
    write_output(result.tree, result.ledger, args.out, extra)
    if errors:
        print(f"warning: {len(errors)} unit(s) skipped and copied unmodified", file=sys.stderr)
    print(f"injected: {len(result.ledger)}")
    for scheme, n in sorted(result.ledger.counts()["scheme"].items()):
        print(f"  {scheme}: {n}")
    return 0


def _is_output_artifact(rel: str) -> bool:
    return rel in (LEDGER_NAME, MANIFEST_NAME, ".leakmut-files", EXECUTABLE_LIST, NON_EXECUTABLE_LIST)


def cmd_filter(args) -> int:
    if not args.trace:
        raise UsageError("at least one --trace file is required")
    ledger = _ledger(args.ledger)
    try:
        trace = read_traces(args.trace, args.trace_format)
    except OSError as exc:
        raise UsageError(f"cannot read trace: {exc}") from None
    result = filter_executable(ledger, trace, strict_pairs=args.strict_pairs)
    if args.out is not None:
        _write_manifest(args)
        out = Path(args.out)
        write_id_list(out / EXECUTABLE_LIST, result.executable)
        write_id_list(out / NON_EXECUTABLE_LIST, result.non_executable)
    if args.format == "records":
        print(f"filter\tinjected={len(ledger)}\texecutable={len(result.executable)}"
              f"\tnon-executable={len(result.non_executable)}\tunknown-tags={len(result.unknown_tags)}")
    else:
        print(f"executable: {len(result.executable)} / {len(ledger)}")
        print(f"non-executable: {len(result.non_executable)}")
        if result.unknown_tags:
            print(f"unknown tags ignored: {len(result.unknown_tags)}")
    return 0


def cmd_analyze(args) -> int:
    model = _model(args.corpus)
    config = _analyzer_config(args)
    try:
        report = analyze(model, _catalog(args), config)
    except AnalyzerError as exc:
        raise CorpusError(str(exc)) from None
    if args.out is not None:
        out = Path(args.out)
        _write_manifest(args)
        _atomic_write(out / f"{report.tool_name}.report", report.dumps())
        print(f"{report.tool_name}: {len(report.detections)} detections -> {out / (report.tool_name + '.report')}")
    else:
        sys.stdout.write(report.dumps())
    return 0


def cmd_evaluate(args) -> int:
    ledger = _ledger(args.ledger)
    executable = _executable(args.executable)
    model = _model(args.corpus) if args.corpus is not None else None
    report = _report(args, model)
    try:
        result = survivors(ledger, executable, report, model)
    except FunnelError as exc:
        raise UsageError(str(exc)) from None
    text = result.records() if args.format == "records" else result.render()
    if args.out is not None:
        _write_manifest(args)
        out = Path(args.out)
        _atomic_write(out / "survivors.txt", result.records())
        _atomic_write(out / f"{report.tool_name}.report", report.dumps())
    sys.stdout.write(text)
    return 0


def cmd_funnel(args) -> int:
    ledger = _ledger(args.ledger)
    executable = _executable(args.executable)
    model = _model(args.corpus) if args.corpus is not None else None
    report = _report(args, model)
    try:
        f = funnel(ledger, executable, report)
    except FunnelError as exc:
        raise UsageError(str(exc)) from None
    if args.format == "records":
        print(f"funnel\tinjected={f.injected}\texecutable={f.executable}\tundetected={f.undetected}")
    else:
        sys.stdout.write(f.render())
    return 0


def cmd_synth(args) -> int:
    ledger_path = args.ledger or Path(args.corpus) / LEDGER_NAME
    ledger = _ledger(ledger_path)
    try:
        mutant = ledger.get(args.id)
    except KeyError:
        raise UsageError(f"mutant {args.id} is not in ledger {ledger_path}") from None
    op = _operator(args)
    if op.operator_id != mutant.operator_id:
        logger.warning("operator %s differs from the ledger's %s", op.operator_id, mutant.operator_id)
    model = _model(args.corpus)
    graph = call_graph(model)
    order = None
    if args.trace:
        order = execution_order(read_traces(args.trace, args.trace_format))
    chains = call_chains(model, mutant, order, ledger, max_paths=args.max_paths, max_depth=args.max_depth, graph=graph)
    if not chains:
        print(f"error: mutant {args.id} is unreachable from every entry point", file=sys.stderr)
        return 1
    if args.chain >= len(chains):
        raise UsageError(f"--chain {args.chain} out of range ({len(chains)} chain(s))")
    try:
        example = synthesize_minimal(model, mutant, chains[args.chain], op, graph)
    except MinimalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_manifest(args)
    for p in example.write(args.out):
        print(p)
    print("chain: " + " -> ".join(example.call_chain), file=sys.stderr)
    if args.toy is not None or args.config is not None:
        report = analyze(example.units(), _catalog(args), _analyzer_config(args))
        verdict = validate_minimal(example, report)
        print(f"verdict ({report.tool_name}): {verdict.value}")
    return 0


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leakmut", description="Mutation-based soundness evaluation of data-leak detectors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed-note", help="free text recorded in the run manifest")
    common.add_argument("--format", choices=("text", "records"), default="text", help="output style")

    def operator_flags(p):
        p.add_argument("--operator", type=Path, help="operator definition file (JSON); built-in calendar-log by default")
        p.add_argument("--operator-id", help="operator to use when the file defines several")

    def scheme_flags(p):
        p.add_argument("--schemes", default="all", help="comma-separated schemes or families (default: all)")
        p.add_argument("--taint-k", type=int, default=1, help="lifecycle distance of split pairs")
        p.add_argument("--nested-depth", type=int, default=2, help="registration depth of nested receivers")

    def tool_flags(p):
        p.add_argument("--report", type=Path, help="detection report of an external tool")
        p.add_argument("--toy", metavar="PRESET", help="run the bundled analyzer with this preset instead")
        p.add_argument("--config", type=Path, help="analyzer configuration file (JSON)")
        p.add_argument("--catalog", type=Path, help="source/sink catalog; bundled one by default")

    p = sub.add_parser("profile", parents=[common], help="print injection-profile sizes and write MIP dumps")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out", type=Path)
    scheme_flags(p)
    operator_flags(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("mutate", parents=[common], help="inject mutants and write the mutated tree and ledger")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--strict-pairs", action="store_true", help="also log a source marker for split pairs")
    scheme_flags(p)
    operator_flags(p)
    p.set_defaults(func=cmd_mutate)

    p = sub.add_parser("filter", parents=[common], help="split mutants by whether an execution trace shows them")
    p.add_argument("--ledger", type=Path, required=True)
    p.add_argument("--trace", type=Path, action="append", default=[], help="trace file (repeatable)")
    p.add_argument("--trace-format", choices=[f.value for f in TraceFormat], default=TraceFormat.LOGCAT.value)
    p.add_argument("--strict-pairs", action="store_true", help="require a split pair's source marker before its sink")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("analyze", parents=[common], help="run the bundled toy analyzer on a tree")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--toy", metavar="PRESET", default="permissive")
    p.add_argument("--config", type=Path)
    p.add_argument("--catalog", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_analyze)

    for name, func, helptext in (
        ("evaluate", cmd_evaluate, "survivors, survival rate and flaw-class hypotheses"),
        ("funnel", cmd_funnel, "injected / executable / undetected counts"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--ledger", type=Path, required=True)
        p.add_argument("--executable", type=Path, required=True, help="id list written by 'filter'")
        p.add_argument("--corpus", type=Path, help="mutated tree (needed for --toy and flaw classes)")
        tool_flags(p)
        if name == "evaluate":
            p.add_argument("--out", type=Path)
        p.set_defaults(func=func)

    p = sub.add_parser("synth", parents=[common], help="synthesize a minimal example for one mutant")
    p.add_argument("--corpus", type=Path, required=True, help="mutated tree")
    p.add_argument("--ledger", type=Path, help="ledger (default: <corpus>/ledger)")
    p.add_argument("--id", type=int, required=True, help="mutant id")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--chain", type=int, default=0, help="index of the ranked call chain to reproduce")
    p.add_argument("--trace", type=Path, action="append", default=[], help="trace used to rank chains")
    p.add_argument("--trace-format", choices=[f.value for f in TraceFormat], default=TraceFormat.LOGCAT.value)
    p.add_argument("--max-paths", type=int, default=32)
    p.add_argument("--max-depth", type=int, default=12)
    operator_flags(p)
    tool_flags(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, OutputError, MutationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
