"""Seed operator instances into a corpus and keep the mutant ledger."""

from __future__ import annotations

import hashlib
import io
import logging
import os
import tempfile
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .model import Anchor, CodeModel, SourceUnit, UnitKind, corpus_fingerprint, parse_unit
from .operators import OperatorInstance, SecurityOperator, _last_statement_start, instantiate, tag_for
from .schemes import MIP, Category, InjectionPoint, MutationScheme, SynthPlan, complex_path_rule, complex_path_names

logger = logging.getLogger(__name__)

LEDGER_NAME = "ledger"
MANAGED_LIST = ".leakmut-files"
LEDGER_FIELDS = (
    "mutant-id", "scheme", "category", "operator-id", "file",
    "source-line", "sink-line", "source-api", "sink-api", "tag",
)


class MutationError(RuntimeError):
    pass


class ScaffoldError(MutationError):
    pass


class LedgerError(ValueError):
    pass


class OutputError(OSError):
    pass


# --------------------------------------------------------------------------
# Ledger


@dataclass(frozen=True)
class Mutant:
    mutant_id: int
    scheme: MutationScheme
    category: Category
    operator_id: str
    file: str
    source_line: int
    sink_line: int
    source_api: str
    sink_api: str

    @property
    def tag(self) -> str:
        return tag_for(self.mutant_id)

    def row(self) -> list[str]:
        return [str(self.mutant_id), self.scheme.value, self.category.value, self.operator_id, self.file,
                str(self.source_line), str(self.sink_line), self.source_api, self.sink_api, self.tag]


@dataclass(frozen=True)
class MutantLedger:
    run_id: str
    fingerprint: str
    mutants: tuple[Mutant, ...] = ()

    def __post_init__(self):
        ids = [m.mutant_id for m in self.mutants]
        if ids != list(range(1, len(ids) + 1)):
            raise LedgerError("mutant ids must be dense 1..N in order")

    def __len__(self) -> int:
        return len(self.mutants)

    def __iter__(self):
        return iter(self.mutants)

    @cached_property
    def ids(self) -> frozenset[int]:
        return frozenset(m.mutant_id for m in self.mutants)

    def get(self, mutant_id: int) -> Mutant:
        if not 1 <= mutant_id <= len(self.mutants):
            raise KeyError(mutant_id)
        return self.mutants[mutant_id - 1]

    def counts(self) -> dict[str, dict[str, int]]:
        by_scheme: dict[str, int] = {}
        by_cat: dict[str, int] = {}
        for m in self.mutants:
            by_scheme[m.scheme.value] = by_scheme.get(m.scheme.value, 0) + 1
            by_cat[m.category.value] = by_cat.get(m.category.value, 0) + 1
        return {"scheme": by_scheme, "category": by_cat}

    def dumps(self) -> str:
        out = io.StringIO()
        out.write("# leakmut ledger v1\n")
        out.write(f"# run-id: {self.run_id}\n")
        out.write(f"# corpus-sha256: {self.fingerprint}\n")
        out.write("\t".join(LEDGER_FIELDS) + "\n")
        for m in self.mutants:
            out.write("\t".join(m.row()) + "\n")
        return out.getvalue()

    @classmethod
    def loads(cls, text: str) -> "MutantLedger":
        run_id = fingerprint = ""
        mutants = []
        header_seen = False
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                if key.strip() == "run-id":
                    run_id = value.strip()
                elif key.strip() == "corpus-sha256":
                    fingerprint = value.strip()
                continue
            cells = line.split("\t")
            if not header_seen:
                if tuple(cells) != LEDGER_FIELDS:
                    raise LedgerError(f"line {lineno}: unexpected ledger header")
                header_seen = True
                continue
            if len(cells) != len(LEDGER_FIELDS):
                raise LedgerError(f"line {lineno}: expected {len(LEDGER_FIELDS)} fields, got {len(cells)}")
            try:
                m = Mutant(int(cells[0]), MutationScheme(cells[1]), Category(cells[2]), cells[3], cells[4],
                           int(cells[5]), int(cells[6]), cells[7], cells[8])
            except ValueError as exc:
                raise LedgerError(f"line {lineno}: {exc}") from None
            if m.tag != cells[9]:
                raise LedgerError(f"line {lineno}: tag {cells[9]!r} does not match id {m.mutant_id}")
            mutants.append(m)
        if not header_seen:
            raise LedgerError("missing ledger header")
        return cls(run_id, fingerprint, tuple(mutants))

    def write(self, path: Path | str) -> None:
        _atomic_write(Path(path), self.dumps())

    @classmethod
    def read(cls, path: Path | str) -> "MutantLedger":
        return cls.loads(Path(path).read_text())


# --------------------------------------------------------------------------
# Text emission


@dataclass
class _Line:
    indent: str
    text: str
    marks: tuple[str, ...] = ()  # keys recorded at the start of the line content
    end_marks: tuple[str, ...] = ()  # keys recorded at the end of the line


@dataclass
class Insertion:
    offset: int
    seq: int
    text: str
    marks: dict[str, int] = field(default_factory=dict)  # key -> offset within text


def _emit(lines: Sequence[_Line], prefix: str = "", suffix: str = "") -> tuple[str, dict[str, int]]:
    buf = [prefix]
    pos = len(prefix)
    marks: dict[str, int] = {}
    for ln in lines:
        head = "\n" + ln.indent
        buf.append(head)
        pos += len(head)
        for k in ln.marks:
            marks[k] = pos
        buf.append(ln.text)
        pos += len(ln.text)
        for k in ln.end_marks:
            marks[k] = pos
    buf.append(suffix)
    return "".join(buf), marks


def _line_indent(text: str, offset: int) -> str:
    start = text.rfind("\n", 0, offset) + 1
    end = start
    while end < len(text) and text[end] in " \t":
        end += 1
    return text[start:end]


def _unit_indent(base: str) -> str:
    return "\t" if "\t" in base else "    "


def _body_indent(text: str, open_brace: int) -> str:
    """Indentation of statements inside the block opened at ``open_brace``."""
    base = _line_indent(text, open_brace)
    j = open_brace + 1
    while j < len(text) and text[j] in " \t\r":
        j += 1
    if j < len(text) and text[j] == "\n":
        k = j + 1
        while k < len(text):
            nl = text.find("\n", k)
            nl = len(text) if nl == -1 else nl
            line = text[k:nl]
            if line.strip():
                if line.strip().startswith("}"):
                    break
                return _line_indent(text, k)
            k = nl + 1
    return base + _unit_indent(base)


def _entry_indent(text: str, entry: int, body_open: int) -> str:
    if entry != body_open + 1:  # after this(...)/super(...)
        return _line_indent(text, entry - 1)
    return _body_indent(text, body_open)


def _split(stmt: str) -> list[str]:
    return stmt.split("\n")


def _operator_lines(indent: str, inst: OperatorInstance, complex_path: bool = False) -> list[_Line]:
    src = _split(inst.source_stmt)
    out = [_Line(indent, src[0], (f"{inst.mutant_id}:source",))]
    out += [_Line(indent, s) for s in src[1:]]
    sink = inst.sink_stmt
    if complex_path:
        rule = complex_path_rule(inst.variable, inst.mutant_id)
        out += [_Line(indent, s) for s in rule]
        sink = inst.sink_for(complex_path_names(inst.variable, inst.mutant_id)[2])
    out.append(_Line(indent, sink, (f"{inst.mutant_id}:sink",)))
    return out


# --------------------------------------------------------------------------
# Scaffolds


def _receiver_lines(indent: str, unit_ind: str, ident: str, level: int, depth: int, ctx: Optional[str],
                    body: list[tuple[str, tuple[str, ...]]]) -> list[_Line]:
    """A receiver registered in the current scope; recursion builds deeper nesting."""
    suffix = ident if level == 1 else f"{ident}_{level}"
    rec, flt, c, it = f"receiver{suffix}", f"filter{suffix}", f"context{suffix}", f"intent{suffix}"
    inner = indent + unit_ind * 2
    lines = [
        _Line(indent, f"android.content.BroadcastReceiver {rec} = new android.content.BroadcastReceiver() {{"),
        _Line(indent + unit_ind, "@Override"),
        _Line(indent + unit_ind, f"public void onReceive(android.content.Context {c}, android.content.Intent {it}) {{",
              end_marks=("scaffold:entry",) if level == depth - 1 else ()),
    ]
    if level < depth - 1:
        lines += _receiver_lines(inner, unit_ind, ident, level + 1, depth, c, body)
    else:
        lines += [_Line(inner, text, marks) for text, marks in body]
    lines += [
        _Line(indent + unit_ind, "}"),
        _Line(indent, "};"),
        _Line(indent, f"android.content.IntentFilter {flt} = new android.content.IntentFilter();"),
        _Line(indent, f'{flt}.addAction("android.intent.action.SEND");'),
        _Line(indent, f"{ctx + '.' if ctx else ''}registerReceiver({rec}, {flt});"),
    ]
    return lines


def _context_param(params: Sequence[str]) -> Optional[str]:
    if not params:
        return None
    parts = params[0].replace("final ", "").split()
    return parts[-1] if len(parts) >= 2 else None


def _scaffold(plan: SynthPlan, model: CodeModel, ident: str,
              body: list[tuple[str, tuple[str, ...]]], seq: int) -> Insertion:
    """Insertion creating the planned code, with ``body`` lines at its innermost entry."""
    if plan.target_class not in model.classes:
        raise ScaffoldError(f"plan '{plan.describe()}': class {plan.target_class} not found")
    unit = model.unit_map[plan.file]
    text = unit.text
    if plan.action == "nested-receiver":
        m = model.methods.get(plan.target_method or "")
        if m is None:
            raise ScaffoldError(f"plan '{plan.describe()}': enclosing method not found")
        entry = m.body_entry_anchor.offset
        indent = _entry_indent(text, entry, m.syntax.body_open)
        lines = _receiver_lines(indent, _unit_indent(indent), ident, 1, plan.depth, _context_param(m.params), body)
        out, marks = _emit(lines)
        return Insertion(entry, seq, out, marks)
    if plan.action == "xml-handler":
        cls = model.classes[plan.target_class]
        close = cls.syntax.body_close
        offset = close
        line_start = text.rfind("\n", 0, close) + 1
        at_line_start = text[line_start:close].strip() == ""
        if at_line_start:
            offset = line_start
        member = _body_indent(text, cls.syntax.body_open)
        inner = member + _unit_indent(member)
        lines = [_Line(member, f"public void {plan.handler}(android.view.View v) {{", end_marks=("scaffold:entry",))]
        lines += [_Line(inner, t, marks) for t, marks in body]
        lines.append(_Line(member, "}"))
        out, marks = _emit(lines, suffix="\n" if at_line_start else "\n" + _line_indent(text, close))
        return Insertion(offset, seq, out, marks)
    raise ScaffoldError(f"unknown synth action {plan.action!r}")


@dataclass(frozen=True)
class ScaffoldResult:
    unit: SourceUnit
    anchors: tuple[Anchor, ...]


def synthesize_scaffold(plan: SynthPlan, model: CodeModel, ident: str = "0") -> ScaffoldResult:
    """Apply one synth plan on its own and return the new unit plus insertion anchors."""
    ins = _scaffold(plan, model, ident, [], 0)
    unit = model.unit_map[plan.file]
    new_text = unit.text[: ins.offset] + ins.text + unit.text[ins.offset :]
    new_unit = parse_unit(new_text, unit.kind, unit.path)
    entry = ins.offset + ins.marks["scaffold:entry"]
    return ScaffoldResult(new_unit, (new_unit.anchor(entry),))


# --------------------------------------------------------------------------
# Injection


@dataclass
class MutatedTree:
    files: dict[str, str]
    kinds: dict[str, UnitKind]

    def units(self) -> list[SourceUnit]:
        return [parse_unit(self.files[p], self.kinds[p], p) for p in sorted(self.files)]


@dataclass(frozen=True)
class MutationResult:
    tree: MutatedTree
    ledger: MutantLedger


def run_id_for(fingerprint: str, settings: str) -> str:
    return hashlib.sha256(f"{fingerprint}\n{settings}".encode()).hexdigest()[:16]


def _check_point(model: CodeModel, p: InjectionPoint) -> None:
    unit = model.unit_map.get(p.source_anchor.file)
    if unit is None or model.unit_map.get(p.sink_anchor.file) is None:
        raise MutationError(f"point {p.point_id}: file {p.source_anchor.file} is not part of the model")
    for method, anchor in ((p.source_method, p.source_anchor), (p.sink_method, p.sink_anchor)):
        if method is None:
            if not 0 <= anchor.offset <= len(unit.text):
                raise MutationError(f"point {p.point_id}: anchor outside {anchor.file}")
            continue
        m = model.methods.get(method)
        if m is None or m.body_entry_anchor != anchor:
            raise MutationError(f"point {p.point_id}: anchor no longer maps to method {method}")


def inject_all(
    model: CodeModel,
    mips: Iterable[MIP],
    operator: SecurityOperator,
    strict_pairs: bool = False,
    settings: str = "",
) -> MutationResult:
    """Seed one mutant per injection point into a single mutated tree."""
    inserts: dict[str, list[Insertion]] = {}
    pending: list[tuple[int, InjectionPoint]] = []
    used: set[int] = set()
    seq = 0

    def add(path: str, ins: Insertion) -> None:
        inserts.setdefault(path, []).append(ins)

    next_id = 1
    for mip in mips:
        for p in mip.points:
            _check_point(model, p)
            ident = next_id
            next_id += 1
            inst = instantiate(operator, ident, used)
            seq += 1
            unit = model.unit_map[p.source_anchor.file]
            text = unit.text
            if p.synth_plan is not None:
                body = [(ln.text, ln.marks) for ln in _operator_lines("", inst)]
                add(unit.path, _scaffold(p.synth_plan, model, str(ident), body, seq))
            elif p.category is Category.TAINT_PAIR:
                src_m = model.methods[p.source_method]
                sink_m = model.methods[p.sink_method]
                cls = model.classes[src_m.owner]
                member = _body_indent(text, cls.syntax.body_open)
                out, marks = _emit([_Line(member, inst.field_decl())])
                add(unit.path, Insertion(cls.syntax.body_open + 1, seq, out, marks))
                indent = _entry_indent(text, src_m.body_entry_anchor.offset, src_m.syntax.body_open)
                cut = _last_statement_start(inst.source_stmt)
                prelude = [s for s in _split(inst.source_stmt[:cut].strip()) if s] if cut else []
                lines = [_Line(indent, s) for s in prelude]
                lines.append(_Line(indent, inst.assignment()))
                lines[0].marks = (f"{ident}:source",)
                if strict_pairs:
                    lines.append(_Line(indent, inst.marker_stmt))
                out, marks = _emit(lines)
                seq += 1
                add(unit.path, Insertion(p.source_anchor.offset, seq, out, marks))
                indent = _entry_indent(text, sink_m.body_entry_anchor.offset, sink_m.syntax.body_open)
                out, marks = _emit([_Line(indent, inst.sink_stmt, (f"{ident}:sink",))])
                seq += 1
                add(p.sink_anchor.file, Insertion(p.sink_anchor.offset, seq, out, marks))
            else:
                m = model.methods[p.source_method]
                indent = _entry_indent(text, p.source_anchor.offset, m.syntax.body_open)
                lines = _operator_lines(indent, inst, complex_path=p.category is Category.COMPLEX_PATH)
                out, marks = _emit(lines)
                add(unit.path, Insertion(p.source_anchor.offset, seq, out, marks))
            pending.append((ident, p))

    # required imports, once per touched java file
    for path in list(inserts):
        unit = model.unit_map[path]
        if unit.java is None or not operator.required_imports:
            continue
        missing = [imp for imp in operator.required_imports if imp not in unit.java.imports]
        if not missing:
            continue
        if unit.java.import_end > 0:
            text = "".join(f"\nimport {imp};" for imp in missing)
        else:
            text = "".join(f"import {imp};\n" for imp in missing)
        add(path, Insertion(unit.java.import_end, -1, text))

    files: dict[str, str] = {}
    positions: dict[str, int] = {}
    for unit in model.units:
        new_text, pos = _apply(unit.text, inserts.get(unit.path, []))
        files[unit.path] = new_text
        for k, v in pos.items():
            positions[f"{unit.path}|{k}"] = v
    line_maps = {p: _LineMap(t) for p, t in files.items() if p in inserts}

    mutants = []
    for ident, p in pending:
        src_file = p.source_anchor.file
        sink_file = p.sink_anchor.file
        try:
            src_line = line_maps[src_file].line(positions[f"{src_file}|{ident}:source"])
            sink_line = line_maps[sink_file].line(positions[f"{sink_file}|{ident}:sink"])
        except KeyError:
            raise MutationError(f"point {p.point_id}: could not remap injected statements") from None
        mutants.append(Mutant(ident, p.scheme, p.category, operator.operator_id, src_file, src_line, sink_line,
                              operator.source_api, operator.sink_api))

    fp = corpus_fingerprint(model.units)
    ledger = MutantLedger(run_id_for(fp, settings), fp, tuple(mutants))
    tree = MutatedTree(files, {u.path: u.kind for u in model.units})
    return MutationResult(tree, ledger)


class _LineMap:
    def __init__(self, text: str):
        from bisect import bisect_right

        self._bisect = bisect_right
        self.starts = [0] + [i + 1 for i, ch in enumerate(text) if ch == "\n"]

    def line(self, offset: int) -> int:
        return self._bisect(self.starts, offset)


def _apply(text: str, inserts: list[Insertion]) -> tuple[str, dict[str, int]]:
    """Apply insertions (original offsets) and report final mark positions.

    Insertions at the same offset keep their ``seq`` order. Splicing runs from
    the largest offset down so pending offsets stay valid; final positions are
    the original offset plus everything inserted before it.
    """
    if not inserts:
        return text, {}
    ordered = sorted(inserts, key=lambda i: (i.offset, i.seq))
    positions: dict[str, int] = {}
    shift = 0
    for ins in ordered:
        base = ins.offset + shift
        for k, rel in ins.marks.items():
            positions[k] = base + rel
        shift += len(ins.text)
    out = text
    for ins in sorted(ordered, key=lambda i: (i.offset, i.seq), reverse=True):
        out = out[: ins.offset] + ins.text + out[ins.offset :]
    return out, positions


def write_output(tree: MutatedTree, ledger: MutantLedger, out_dir: Path | str,
                 extra: Optional[dict[str, str]] = None) -> list[Path]:
    """Write the mutated tree and ledger under out_dir, one atomic rename per file.

    Files written by an earlier run into the same directory but not part of
    this one are removed, so reruns leave exactly this run's output.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"{out}: cannot create output directory: {exc.strerror or exc}") from None
    previous: set[str] = set()
    managed = out / MANAGED_LIST
    if managed.is_file():
        previous = set(managed.read_text().split("\n")) - {""}
    contents = dict(extra or {})
    contents.update(tree.files)
    contents[LEDGER_NAME] = ledger.dumps()
    written = []
    for rel in sorted(contents):
        target = out / rel
        _atomic_write(target, contents[rel])
        written.append(target)
    for rel in sorted(previous - set(contents)):
        stale = out / rel
        if stale.is_file():
            stale.unlink()
    _atomic_write(managed, "\n".join(sorted(contents)) + "\n")
    return written


def _atomic_write(target: Path, text: str) -> None:
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=target.parent)
    except OSError as exc:
        raise OutputError(f"{target}: {exc.strerror or exc}") from None
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(text.encode("utf-8", errors="surrogateescape"))
        os.replace(tmp, target)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise OutputError(f"{target}: {exc.strerror or exc}") from None
