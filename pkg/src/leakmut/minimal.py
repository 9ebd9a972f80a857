"""Minimal examples: a survivor's call chain rebuilt as a standalone activity."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from .javasrc import Call
from .model import CallGraph, ClassKind, CodeModel, EdgeKind, MethodDecl, SourceUnit, UnitKind, call_graph, parse_unit
from .mutator import Mutant, _atomic_write, _context_param
from .operators import SecurityOperator, instantiate
from .report import DetectionIndex, ToolReport
from .schemes import Category, complex_path_names, complex_path_rule


class MinimalError(ValueError):
    pass


class Verdict(str, Enum):
    FLAW_CONFIRMED = "flaw-confirmed"
    DETECTED = "detected-refine-or-discard"


@dataclass
class _Block:
    header: str
    body: list[Union[str, "_Block", tuple[str, str]]] = field(default_factory=list)  # tuple = (stmt, mark)
    footer: str = "}"


@dataclass(frozen=True)
class MinimalExample:
    mutant_id: int
    call_chain: tuple[str, ...]
    skeleton_unit: SourceUnit
    resources: tuple[SourceUnit, ...]
    mutant: Mutant  # the example's own mutant record (points into the skeleton)

    def units(self) -> list[SourceUnit]:
        return [self.skeleton_unit, *self.resources]

    def write(self, out_dir: Path | str) -> list[Path]:
        out = Path(out_dir)
        paths = []
        for u in self.units():
            _atomic_write(out / u.path, u.text)
            paths.append(out / u.path)
        return paths


_PRIMITIVE_DEFAULTS = {"boolean": "false", "char": "'\\0'", "float": "0f", "double": "0d", "long": "0L"}


def _default_for(param: str) -> str:
    parts = param.replace("final ", "").split()
    if len(parts) < 2:
        return "null"
    typ = parts[-2]
    if typ in ("int", "short", "byte"):
        return "0"
    return _PRIMITIVE_DEFAULTS.get(typ, "null")


def _squash(text: str) -> str:
    return " ".join(text.split())


def _strip_comments(text: str) -> str:
    return re.sub(r"//[^\n]*|/\*.*?\*/", " ", text, flags=re.S)


class _Synth:
    def __init__(self, model: CodeModel, mutant: Mutant, chain: list[str], operator: SecurityOperator,
                 graph: Optional[CallGraph] = None):
        if not chain:
            raise MinimalError("empty call chain")
        for mid in chain:
            if mid not in model.methods:
                raise MinimalError(f"chain method {mid} is not in the model")
        self.model = model
        self.mutant = mutant
        self.chain = chain
        self.operator = operator
        self.graph = graph or call_graph(model)
        self.ident = mutant.mutant_id
        self.name = f"Minimal{self.ident}"
        self.layout = f"minimal_{self.ident}"
        self.containers: dict[str, tuple[_Block, str]] = {}  # class id -> (block, java name)
        self.methods: dict[str, _Block] = {}
        self.counter = 0
        self.files: set[str] = set()
        self.uses_layout = False

    # headers ---------------------------------------------------------------
    def unit_of(self, cid: str) -> SourceUnit:
        return self.model.unit_map[self.model.classes[cid].unit]

    def class_header(self, cid: str, new_name: str, nested: bool) -> str:
        cls = self.model.classes[cid]
        unit = self.unit_of(cid)
        self.files.add(unit.path)
        head = _squash(_strip_comments(unit.text[cls.syntax.start : cls.syntax.body_open]))
        head = re.sub(r"@\w+(\([^)]*\))?\s*", "", head)
        head = re.sub(rf"\b(class|interface|enum)\s+{re.escape(cls.simple_name)}\b", rf"\1 {new_name}", head, count=1)
        if nested and not re.search(r"\bstatic\b", head):
            head = re.sub(r"\b(class|interface|enum)\b", r"static \1", head, count=1)
        return head + " {"

    def method_header(self, m: MethodDecl) -> str:
        unit = self.model.unit_map[m.unit]
        self.files.add(unit.path)
        if m.syntax.is_constructor:
            raise MinimalError(f"constructor {m.id} in call chain is outside the supported subset")
        return _squash(_strip_comments(unit.text[m.syntax.start : m.syntax.body_open])) + " {"

    def return_stmt(self, m: MethodDecl) -> Optional[str]:
        unit = self.model.unit_map[m.unit]
        head = _strip_comments(unit.text[m.syntax.start : m.syntax.name_start])
        head = re.sub(r"@\w+(\([^)]*\))?", " ", head)
        words = [w for w in head.split() if w not in ("public", "protected", "private", "static", "final",
                                                      "synchronized", "abstract", "native", "strictfp", "default")]
        ret = " ".join(words)
        if ret in ("", "void"):
            return None
        if ret in ("int", "short", "byte", "long", "float", "double", "char", "boolean"):
            return f"return {_default_for(ret + ' x')};"
        return "return null;"

    # containers --------------------------------------------------------------
    def fresh(self, stem: str) -> str:
        self.counter += 1
        return f"{stem}{self.counter}"

    def method_block(self, mid: str) -> _Block:
        if mid not in self.methods:
            self.methods[mid] = _Block(self.method_header(self.model.methods[mid]))
        return self.methods[mid]

    def add_method(self, container: _Block, mid: str) -> _Block:
        block = self.method_block(mid)
        if block not in container.body:
            container.body.append(block)
        return block

    def named_container(self, cid: str, root: _Block) -> tuple[_Block, str]:
        if cid not in self.containers:
            cls = self.model.classes[cid]
            if cls.is_anonymous:
                raise MinimalError(f"anonymous class {cid} is only reachable through its registration")
            stem = {"fragment": "Fragment", "dialog-fragment": "Fragment", "broadcast-receiver": "Receiver",
                    "listener-impl": "Listener"}.get(cls.kind.value, "Step")
            name = self.fresh(stem)
            block = _Block(self.class_header(cid, name, nested=True))
            root.body.append(block)
            self.containers[cid] = (block, name)
        return self.containers[cid]

    # original registration site --------------------------------------------
    def site_call(self, edge) -> Optional[Call]:
        m = self.model.methods[edge.source]
        for stmt in m.syntax.walk_statements():
            for call in stmt.calls:
                if call.start == edge.site.offset:
                    return call
        return None

    def local_decls(self, m: MethodDecl, names: set[str]) -> list[str]:
        """Declarations of the given locals in the original method, with their own dependencies."""
        unit = self.model.unit_map[m.unit]
        stmts = [s for s in m.syntax.walk_statements() if s.kind == "simple" and s.declared_type and s.assigned]
        wanted = set(names)
        picked: dict[int, str] = {}
        for _ in range(4):
            for s in stmts:
                if s.assigned in wanted and s.start not in picked:
                    text = _squash(_strip_comments(unit.text[s.start : s.end]))
                    picked[s.start] = text
                    wanted |= set(re.findall(r"\b[a-z_]\w*\b", re.sub(r'"[^"]*"', "", text.split("=", 1)[1])))
        return [picked[k] for k in sorted(picked)]

    # edges -------------------------------------------------------------------
    def edge_between(self, a: str, b: str):
        edges = [e for e in self.graph.successors(a) if e.target == b]
        if not edges:
            raise MinimalError(f"no call-graph edge {a} -> {b}")
        # registration-like edges carry the structure worth reproducing
        edges.sort(key=lambda e: e.kind == "call")
        return edges[0]

    def registrar_expr(self, a: str, container_is_activity: bool) -> str:
        m = self.model.methods[a]
        if container_is_activity:
            return ""
        ctx = _context_param(m.params) if m.name == "onReceive" else None
        return f"{ctx}." if ctx else ""

    def anon_block(self, cid: str, prefix: str, suffix: str) -> _Block:
        cls = self.model.classes[cid]
        self.files.add(cls.unit)
        written = cls.syntax.supertypes[0] if cls.syntax.supertypes else "Object"
        return _Block(f"{prefix}new {written}() {{", footer=f"}}{suffix}")

    def link(self, a: str, b: str, a_block: _Block, a_container: _Block, root: _Block) -> tuple[_Block, _Block]:
        """Emit code in ``a`` that reaches ``b``; returns (b's method block, b's container)."""
        edge = self.edge_between(a, b)
        mb = self.model.methods[b]
        b_cls = self.model.classes[mb.owner]
        in_activity = a_container is root
        if edge.kind == "call":
            if mb.owner in self.containers:
                block, name = self.containers[mb.owner]
                container = block
            else:
                container, name = self.named_container(mb.owner, root)
            args = ", ".join(_default_for(p) for p in mb.params)
            if container is a_container or container is root:
                a_block.body.append(f"{mb.name}({args});")
            else:
                a_block.body.append(f"new {name}().{mb.name}({args});")
            return self.add_method(container, b), container
        if edge.kind == EdgeKind.XML_ONCLICK.value:
            self.uses_layout = True
            a_block.body.append(f"setContentView(R.layout.{self.layout});")
            self.handler = mb.name
            self.containers.setdefault(mb.owner, (a_container, ""))
            return self.add_method(a_container, b), a_container

        if edge.kind == EdgeKind.DYNAMIC_RECEIVER.value:
            rec = self.fresh("receiver")
            flt = self.fresh("filter")
            if b_cls.is_anonymous:
                anon = self.anon_block(mb.owner, f"android.content.BroadcastReceiver {rec} = ", ";")
                a_block.body.append(anon)
                self.containers[mb.owner] = (anon, "")
                container = anon
            else:
                container, name = self.named_container(mb.owner, root)
                a_block.body.append(f"android.content.BroadcastReceiver {rec} = new {name}();")
            a_block.body += [
                f"android.content.IntentFilter {flt} = new android.content.IntentFilter();",
                f'{flt}.addAction("android.intent.action.SEND");',
                f"{self.registrar_expr(a, in_activity)}registerReceiver({rec}, {flt});",
            ]
            return self.add_method(container, b), container

        # listener registrations and implicit calls reuse the original call shape
        call = self.site_call(edge)
        if call is None:
            raise MinimalError(f"registration site for {a} -> {b} not found")
        ma = self.model.methods[a]
        listener_idx = next(
            (i for i, anon in call.anon_args.items() if self.model_class_of(anon) == mb.owner), None
        )
        if listener_idx is None:
            listener_idx = next((i for i, arg in enumerate(call.args) if self.arg_names_class(arg, mb.owner)), 0)
        others = [arg for i, arg in enumerate(call.args) if i != listener_idx]
        needed = set()
        recv = call.receiver
        if recv and recv.isidentifier():
            needed.add(recv)
        for arg in others:
            needed |= set(re.findall(r"\b[a-z_]\w*\b", re.sub(r'"[^"]*"', "", arg)))
        a_block.body += self.local_decls(ma, needed)
        if call.is_new:
            callee = f"new {call.receiver or call.name}"
            tail = ").start();" if call.name == "Thread" else ");"
        else:
            callee = f"{recv}.{call.name}" if recv else call.name
            tail = ");"
        before = ", ".join(_squash(x) for x in others[:listener_idx])
        after = ", ".join(_squash(x) for x in others[listener_idx:])
        lead = f"{callee}({before + ', ' if before else ''}"
        trail = f"{', ' + after if after else ''}{tail}"
        if b_cls.is_anonymous:
            anon = self.anon_block(mb.owner, lead, trail)
            a_block.body.append(anon)
            self.containers[mb.owner] = (anon, "")
            container = anon
        else:
            container, name = self.named_container(mb.owner, root)
            a_block.body.append(f"{lead}new {name}(){trail}")
        return self.add_method(container, b), container

    def model_class_of(self, syntax) -> Optional[str]:
        for cid, cls in self.model.classes.items():
            if cls.syntax is syntax:
                return cid
        return None

    def arg_names_class(self, arg: str, cid: str) -> bool:
        simple = self.model.classes[cid].simple_name
        return bool(simple) and re.search(rf"\bnew\s+{re.escape(simple)}\b", arg) is not None

    # leaf ----------------------------------------------------------------------
    def operator_stmts(self) -> list:
        inst = instantiate(self.operator, self.ident)
        out: list = [(line, "source" if i == 0 else "") for i, line in enumerate(inst.source_stmt.split("\n"))]
        sink = inst.sink_stmt
        if self.mutant.category is Category.COMPLEX_PATH:
            out += complex_path_rule(inst.variable, self.ident)
            sink = inst.sink_for(complex_path_names(inst.variable, self.ident)[2])
        out.append((sink, "sink"))
        return out

    # driver --------------------------------------------------------------------
    def build(self) -> MinimalExample:
        model = self.model
        first = model.methods[self.chain[0]]
        root_cls = model.classes[first.owner]
        if root_cls.kind is ClassKind.ACTIVITY and not root_cls.is_anonymous:
            root = _Block(self.class_header(root_cls.id, self.name, nested=False))
            self.containers[root_cls.id] = (root, self.name)
            container = root
        else:
            root = _Block(f"public class {self.name} extends android.app.Activity {{")
            if root_cls.is_anonymous:
                raise MinimalError(f"chain starts inside anonymous class {root_cls.id}")
            container, cname = self.named_container(root_cls.id, root)
            if root_cls.kind in (ClassKind.FRAGMENT, ClassKind.DIALOG_FRAGMENT):
                host = _Block("protected void onCreate(android.os.Bundle savedInstanceState) {")
                host.body += ["super.onCreate(savedInstanceState);",
                              f'getFragmentManager().beginTransaction().add(new {cname}(), "minimal").commit();']
                root.body.insert(0, host)
        block = self.add_method(container, self.chain[0])
        for a, b in zip(self.chain, self.chain[1:]):
            block, container = self.link(a, b, block, container, root)

        leaf = model.methods[self.chain[-1]]
        if self.mutant.category is Category.TAINT_PAIR:
            inst = instantiate(self.operator, self.ident)
            src = model.method_at(self.mutant.file, self.mutant.source_line)
            if src is None or src.owner != leaf.owner:
                raise MinimalError(f"taint pair {self.ident}: source callback not found")
            container.body.insert(0, inst.field_decl())
            src_block = self.add_method(container, src.id)
            src_block.body.insert(0, (inst.assignment(), "source"))
            block.body.append((inst.sink_stmt, "sink"))
        else:
            block.body += self.operator_stmts()
        for mid, mb in self.methods.items():
            ret = self.return_stmt(model.methods[mid])
            if ret:
                mb.body.append(ret)

        unit0 = model.unit_map[first.unit]
        pkg = unit0.java.package if unit0.java else None
        imports: list[str] = []
        for path in sorted(self.files | {first.unit}):
            u = model.unit_map[path]
            if u.java:
                imports += [i for i in u.java.imports if i not in imports]
        head = []
        if pkg:
            head += [f"package {pkg};", ""]
        head += [f"import {i};" for i in imports]
        if imports:
            head.append("")
        lines: list[str] = list(head)
        marks: dict[str, int] = {}
        _render(root, 0, lines, marks)
        text = "\n".join(lines) + "\n"
        path = f"{self.name}.java"
        unit = parse_unit(text, UnitKind.JAVA, path)
        resources = []
        if self.uses_layout:
            xml = (
                '<?xml version="1.0" encoding="utf-8"?>\n'
                '<LinearLayout xmlns:android="http://schemas.android.com/apk/res/android"\n'
                '    android:layout_width="match_parent" android:layout_height="match_parent">\n'
                f'    <Button android:id="@+id/minimal_button" android:onClick="{self.handler}"\n'
                '        android:layout_width="wrap_content" android:layout_height="wrap_content" />\n'
                "</LinearLayout>\n"
            )
            resources.append(parse_unit(xml, UnitKind.XML_LAYOUT, f"res/layout/{self.layout}.xml"))
        m = self.mutant
        record = Mutant(m.mutant_id, m.scheme, m.category, m.operator_id, path,
                        marks["source"], marks["sink"], m.source_api, m.sink_api)
        return MinimalExample(m.mutant_id, tuple(self.chain), unit, tuple(resources), record)


def _render(block: _Block, level: int, out: list[str], marks: dict[str, int]) -> None:
    pad = "    " * level
    out.append(pad + block.header)
    for item in block.body:
        if isinstance(item, _Block):
            _render(item, level + 1, out, marks)
        elif isinstance(item, tuple):
            stmt, mark = item
            out.append(pad + "    " + stmt)
            if mark:
                marks[mark] = len(out)
        else:
            out.append(pad + "    " + item)
    out.append(pad + block.footer)


def synthesize_minimal(model: CodeModel, mutant: Mutant, chain: list[str], operator: SecurityOperator,
                       graph: Optional[CallGraph] = None) -> MinimalExample:
    """Standalone activity reproducing ``chain`` with the operator at its end."""
    return _Synth(model, mutant, list(chain), operator, graph).build()


def validate_minimal(example: MinimalExample, report: ToolReport) -> Verdict:
    """flaw-confirmed iff nothing in the report resolves to the example's mutant."""
    index = DetectionIndex([example.mutant])
    for det in report.detections:
        if index.resolve(det) == example.mutant_id:
            return Verdict.DETECTED
    return Verdict.FLAW_CONFIRMED
