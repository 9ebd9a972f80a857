"""Queryable code model over a Java/Android source corpus.

A corpus is parsed unit by unit (``parse_unit``), then merged into a
``CodeModel`` (``build_model``) that knows about classes, methods,
callback roles, dynamic registrations and layout-declared handlers.
``call_graph`` turns the model into a method-level graph.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

from .javasrc import (
    CompilationUnit,
    JClass,
    JMethod,
    JavaSyntaxError,
    Statement,
    line_starts,
    offset_to_linecol,
    parse_java,
)
from .xmlsrc import XmlDocument, XmlSyntaxError, parse_xml

logger = logging.getLogger(__name__)


class UnitKind(str, Enum):
    JAVA = "java"
    XML_LAYOUT = "xml-layout"
    XML_MANIFEST = "xml-manifest"


class ClassKind(str, Enum):
    ACTIVITY = "activity"
    FRAGMENT = "fragment"
    DIALOG_FRAGMENT = "dialog-fragment"
    BROADCAST_RECEIVER = "broadcast-receiver"
    LISTENER_IMPL = "listener-impl"
    SQLITE_HELPER = "sqlite-helper"
    PLAIN = "plain"


class CallbackKind(str, Enum):
    LIFECYCLE = "lifecycle"
    UI_LISTENER = "ui-listener"
    RECEIVER_ON_RECEIVE = "receiver-on-receive"
    XML_DECLARED = "xml-declared"
    NONE = "none"


class EdgeKind(str, Enum):
    DYNAMIC_RECEIVER = "dynamic-receiver"
    LISTENER_ATTACH = "listener-attach"
    XML_ONCLICK = "xml-onclick"
    IMPLICIT_CALL = "implicit-call"


class ParseError(Exception):
    def __init__(self, path: str, line: int, col: int, message: str):
        super().__init__(f"{path}:{line}:{col}: {message}")
        self.path = path
        self.line = line
        self.col = col
        self.message = message


@dataclass(frozen=True)
class Diagnostic:
    path: str
    line: int
    col: int
    severity: str  # error | warning | info
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}:{self.col}: {self.severity}: {self.message}"


class Anchor(NamedTuple):
    file: str
    line: int
    column: int
    offset: int


# --------------------------------------------------------------------------
# Source units


@dataclass(frozen=True, eq=False)
class SourceUnit:
    path: str
    kind: UnitKind
    text: str
    line_index: tuple[int, ...]
    java: Optional[CompilationUnit] = field(default=None, repr=False)
    xml: Optional[XmlDocument] = field(default=None, repr=False)

    def render(self) -> str:
        return self.text

    def anchor(self, offset: int) -> Anchor:
        line, col = offset_to_linecol(list(self.line_index), offset)
        return Anchor(self.path, line, col, offset)

    def line_of(self, offset: int) -> int:
        return offset_to_linecol(list(self.line_index), offset)[0]

    @property
    def layout_name(self) -> str:
        return Path(self.path).stem


def parse_unit(text: str, kind: UnitKind | str, path: str = "<memory>") -> SourceUnit:
    """Parse one file. Raises ParseError carrying path, line and column."""
    kind = UnitKind(kind)
    index = tuple(line_starts(text))
    if kind is UnitKind.JAVA:
        try:
            java = parse_java(text)
        except JavaSyntaxError as exc:
            raise ParseError(path, exc.line, exc.col, exc.message) from None
        return SourceUnit(path, kind, text, index, java=java)
    try:
        doc = parse_xml(text)
    except XmlSyntaxError as exc:
        raise ParseError(path, exc.line, exc.col, exc.message) from None
    return SourceUnit(path, kind, text, index, xml=doc)


def unit_kind_for(path: Path) -> Optional[UnitKind]:
    if path.suffix == ".java":
        return UnitKind.JAVA
    if path.suffix == ".xml":
        if path.name == "AndroidManifest.xml":
            return UnitKind.XML_MANIFEST
        if path.parent.name.startswith("layout"):
            return UnitKind.XML_LAYOUT
    return None


def read_text(path: Path) -> str:
    return path.read_bytes().decode("utf-8", errors="surrogateescape")


def corpus_files(root: Path, exclude: Iterable[str] = ()) -> list[Path]:
    """Source files of a corpus, sorted by relative path."""
    patterns = list(exclude)
    out = []
    for p in sorted(root.rglob("*")):
        if not p.is_file() or unit_kind_for(p) is None:
            continue
        rel = p.relative_to(root).as_posix()
        if any(fnmatch.fnmatch(rel, pat) for pat in patterns):
            continue
        out.append(p)
    return out


def load_corpus(root: Path | str, exclude: Iterable[str] = ()) -> tuple[list[SourceUnit], list[Diagnostic]]:
    """Parse every supported file under root; unparseable files become diagnostics."""
    root = Path(root)
    units: list[SourceUnit] = []
    diagnostics: list[Diagnostic] = []
    for p in corpus_files(root, exclude):
        rel = p.relative_to(root).as_posix()
        try:
            units.append(parse_unit(read_text(p), unit_kind_for(p), rel))
        except ParseError as exc:
            diagnostics.append(Diagnostic(rel, exc.line, exc.col, "error", f"skipped: {exc.message}"))
            logger.warning("skipping %s", exc)
    return units, diagnostics


def corpus_fingerprint(units: Iterable[SourceUnit]) -> str:
    h = hashlib.sha256()
    for u in sorted(units, key=lambda u: u.path):
        h.update(u.path.encode())
        h.update(b"\0")
        h.update(u.text.encode("utf-8", errors="surrogateescape"))
        h.update(b"\0")
    return h.hexdigest()


# --------------------------------------------------------------------------
# Classification table


def _type_matches(written: str, key: str) -> bool:
    return written == key or key.endswith("." + written)


@dataclass(frozen=True)
class ClassificationTable:
    kinds: dict[str, str]
    kind_priority: tuple[str, ...]
    lifecycle: dict[str, tuple[str, ...]]
    lifecycle_kinds: dict[str, str]
    component_callbacks: dict[str, tuple[str, ...]]
    callbacks: dict[str, tuple[str, ...]]
    abstract_callbacks: frozenset[str]
    registrars: tuple[tuple[str, str], ...]
    implicit_calls: tuple[tuple[str, tuple[str, ...]], ...]

    @classmethod
    def from_dict(cls, data: dict) -> "ClassificationTable":
        try:
            return cls(
                kinds=dict(data["kinds"]),
                kind_priority=tuple(data["kind_priority"]),
                lifecycle={k: tuple(v) for k, v in data["lifecycle"].items()},
                lifecycle_kinds=dict(data["lifecycle_kinds"]),
                component_callbacks={k: tuple(v) for k, v in data.get("component_callbacks", {}).items()},
                callbacks={k: tuple(v["methods"]) for k, v in data["callbacks"].items()},
                abstract_callbacks=frozenset(k for k, v in data["callbacks"].items() if v.get("abstract-class")),
                registrars=tuple((r["pattern"], r["kind"]) for r in data["registrars"]),
                implicit_calls=tuple((r["pattern"], tuple(r["targets"])) for r in data["implicit_calls"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed classification table: missing {exc}") from None

    @classmethod
    def load(cls, path: Path | str | None = None) -> "ClassificationTable":
        if path is None:
            text = resources.files("leakmut.data").joinpath("classification.json").read_text()
        else:
            text = Path(path).read_text()
        return cls.from_dict(json.loads(text))

    def keys_for(self, written: str, table: Iterable[str]) -> list[str]:
        return [k for k in table if _type_matches(written, k)]

    def kind_of(self, written: str) -> Optional[str]:
        found = [self.kinds[k] for k in self.keys_for(written, self.kinds)]
        for kind in self.kind_priority:
            if kind in found:
                return kind
        return None

    def methods_of(self, key: str) -> tuple[str, ...]:
        """Callback method names declared by a table type."""
        if key in self.callbacks:
            return self.callbacks[key]
        kind = self.kinds.get(key)
        if kind in self.lifecycle_kinds:
            return self.lifecycle[self.lifecycle_kinds[kind]]
        if kind in self.component_callbacks:
            return self.component_callbacks[kind]
        return ()

    def lifecycle_order(self, kind: str, method: str) -> Optional[int]:
        seq = self.lifecycle.get(self.lifecycle_kinds.get(kind, ""), ())
        return seq.index(method) if method in seq else None

    def registrar_kind(self, call_name: str) -> Optional[str]:
        for pattern, kind in self.registrars:
            if fnmatch.fnmatchcase(call_name, pattern):
                return kind
        return None

    def implicit_targets(self, call_name: str, is_new: bool) -> tuple[str, ...]:
        name = f"new {call_name}" if is_new else call_name
        for pattern, targets in self.implicit_calls:
            if fnmatch.fnmatchcase(name, pattern):
                return targets
        return ()


# --------------------------------------------------------------------------
# Model types


@dataclass(frozen=True, eq=False)
class ClassDecl:
    id: str
    simple_name: str
    kind: ClassKind
    supertypes: tuple[str, ...]
    is_anonymous: bool
    enclosing_method: Optional[str]
    enclosing_class: Optional[str]
    methods: tuple[str, ...]
    fields: tuple[str, ...]
    unit: str
    syntax: JClass = field(repr=False)
    # library supertypes reached through the corpus inheritance chain
    external_supertypes: tuple[str, ...] = ()

    @property
    def qualified_name(self) -> str:
        return self.id


@dataclass(frozen=True, eq=False)
class MethodDecl:
    id: str
    owner: str
    name: str
    parameter_arity: int
    params: tuple[str, ...]
    body_entry_anchor: Anchor
    statement_anchors: tuple[Anchor, ...]
    callback_kind: CallbackKind
    lifecycle_order: Optional[int]
    unit: str
    syntax: JMethod = field(repr=False)

    @property
    def body_span(self) -> tuple[int, int]:
        return self.syntax.body_open, self.syntax.body_close


@dataclass(frozen=True)
class RegistrationEdge:
    site: Anchor
    registrar_method: str
    registered_class: str
    kind: EdgeKind
    api: str  # registrar call name, e.g. registerReceiver
    targets: tuple[str, ...]  # callback method ids reached through the registration


@dataclass(frozen=True)
class CallSite:
    caller: str
    callee: str
    offset: int


@dataclass(frozen=True)
class XmlBinding:
    layout: str
    widget: str
    handler: str
    anchor: Anchor
    host_class: Optional[str]  # class expected to declare the handler
    method: Optional[str]


@dataclass(frozen=True, eq=False)
class CodeModel:
    units: tuple[SourceUnit, ...]
    classes: dict[str, ClassDecl]
    methods: dict[str, MethodDecl]
    registration_edges: tuple[RegistrationEdge, ...]
    xml_bindings: tuple[XmlBinding, ...]
    entry_points: frozenset[str]
    call_sites: tuple[CallSite, ...]
    diagnostics: tuple[Diagnostic, ...]
    table: ClassificationTable = field(repr=False)
    unresolved_calls: int = 0

    @cached_property
    def xml_handlers(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for b in self.xml_bindings:
            key = b.widget if b.widget not in out else f"{b.layout}/{b.widget}"
            out[key] = b.handler
        return out

    @cached_property
    def unit_map(self) -> dict[str, SourceUnit]:
        return {u.path: u for u in self.units}

    def methods_of(self, class_id: str) -> list[MethodDecl]:
        return [self.methods[m] for m in self.classes[class_id].methods]

    def method_at(self, path: str, line: int) -> Optional[MethodDecl]:
        """Innermost method whose body contains the given line."""
        unit = self.unit_map.get(path)
        if unit is None:
            return None
        best = None
        for m in self.methods.values():
            if m.unit != path:
                continue
            open_, close = m.body_span
            if unit.line_of(open_) <= line <= unit.line_of(close):
                if best is None or open_ > best.syntax.body_open:
                    best = m
        return best

    def registered_classes(self) -> set[str]:
        return {e.registered_class for e in self.registration_edges if e.kind is not EdgeKind.IMPLICIT_CALL}

    def dump(self) -> str:
        """Structured text dump for debugging."""
        lines = []
        for c in self.classes.values():
            lines.append(f"class {c.id} kind={c.kind.value} anonymous={c.is_anonymous} supertypes={','.join(c.supertypes)}")
            for mid in c.methods:
                m = self.methods[mid]
                order = "" if m.lifecycle_order is None else f" order={m.lifecycle_order}"
                a = m.body_entry_anchor
                lines.append(f"  method {m.id} callback={m.callback_kind.value}{order} entry={a.file}:{a.line}:{a.column}")
        for e in self.registration_edges:
            lines.append(f"edge {e.kind.value} {e.registrar_method} -> {e.registered_class} via {e.api} at {e.site.file}:{e.site.line}")
        for b in self.xml_bindings:
            lines.append(f"xml {b.layout}/{b.widget} -> {b.handler} method={b.method}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Model construction


class _Builder:
    def __init__(self, units: list[SourceUnit], table: ClassificationTable):
        self.units = sorted(units, key=lambda u: u.path)
        self.table = table
        self.diagnostics: list[Diagnostic] = []
        self.class_ids: dict[int, str] = {}  # id(JClass) -> class id
        self.method_ids: dict[int, str] = {}
        self.class_syntax: dict[str, tuple[SourceUnit, JClass]] = {}
        self.by_simple: dict[str, list[str]] = {}
        self.unresolved = 0

    # naming -------------------------------------------------------------
    def assign_ids(self) -> None:
        seen_paths: dict[str, str] = {}
        for unit in self.units:
            if unit.java is None:
                continue
            pkg = unit.java.package
            counters: dict[str, int] = {}
            for cls in unit.java.all_classes():
                if cls.parent_class is None and cls.parent_method is None:
                    cid = f"{pkg}.{cls.name}" if pkg else cls.name
                else:
                    parent = self.class_ids[id(cls.parent_class)]
                    if cls.is_anonymous:
                        counters[parent] = counters.get(parent, 0) + 1
                        cid = f"{parent}${counters[parent]}"
                    elif cls.parent_method is not None:
                        cid = f"{parent}$1{cls.name}"
                    else:
                        cid = f"{parent}${cls.name}"
                if cid in seen_paths:
                    self.diagnostics.append(
                        Diagnostic(unit.path, unit.line_of(cls.start), 1, "warning", f"duplicate class {cid} (also in {seen_paths[cid]})")
                    )
                    cid = f"{cid}@{unit.path}"
                seen_paths[cid] = unit.path
                self.class_ids[id(cls)] = cid
                self.class_syntax[cid] = (unit, cls)
                if cls.name:
                    self.by_simple.setdefault(cls.name, []).append(cid)

    def qualify(self, unit: SourceUnit, written: str) -> str:
        head = written.split(".")[0]
        for imp in unit.java.imports if unit.java else ():
            if imp.endswith("." + head):
                return imp[: -len(head)] + written
        return written

    def corpus_class(self, written: str, context: Optional[str] = None) -> Optional[str]:
        """Resolve a written type name to a corpus class id."""
        simple = written.split(".")[-1]
        candidates = self.by_simple.get(simple, [])
        if not candidates:
            return None
        if len(candidates) == 1:
            return candidates[0]
        for c in candidates:
            if c.endswith(written.replace(".", "$")) or c.endswith("." + written):
                return c
        if context is not None:
            pkg = context.rsplit(".", 1)[0] if "." in context else ""
            for c in candidates:
                if c.startswith(pkg):
                    return c
        return candidates[0]

    def supertype_closure(self, cid: str) -> list[str]:
        """External (non-corpus) supertypes reachable through corpus classes, qualified where possible."""
        out: list[str] = []
        seen = {cid}
        stack = [cid]
        while stack:
            cur = stack.pop(0)
            unit, cls = self.class_syntax[cur]
            for st in cls.supertypes:
                inner = self.corpus_class(st, cur)
                if inner is not None and inner not in seen:
                    seen.add(inner)
                    stack.append(inner)
                elif inner is None:
                    out.append(self.qualify(unit, st))
        return out

    def corpus_supers(self, cid: str) -> list[str]:
        out = []
        seen = {cid}
        stack = [cid]
        while stack:
            cur = stack.pop(0)
            _, cls = self.class_syntax[cur]
            for st in cls.supertypes:
                inner = self.corpus_class(st, cur)
                if inner is not None and inner not in seen:
                    seen.add(inner)
                    out.append(inner)
                    stack.append(inner)
        return out

    # build ----------------------------------------------------------------
    def build(self) -> CodeModel:
        self.assign_ids()
        kinds: dict[str, ClassKind] = {}
        externals: dict[str, list[str]] = {}
        for cid in self.class_syntax:
            externals[cid] = self.supertype_closure(cid)
            found = [k for k in (self.table.kind_of(s) for s in externals[cid]) if k]
            kind = next((k for k in self.table.kind_priority if k in found), "plain")
            kinds[cid] = ClassKind(kind)

        # methods
        method_syntax: dict[str, tuple[SourceUnit, JMethod, str]] = {}
        class_methods: dict[str, list[str]] = {cid: [] for cid in self.class_syntax}
        for cid, (unit, cls) in self.class_syntax.items():
            for m in cls.methods:
                if not m.has_body:
                    continue
                mid = f"{cid}#{m.name}/{m.arity}"
                if mid in method_syntax:
                    mid = f"{mid}@L{unit.line_of(m.name_start)}"
                self.method_ids[id(m)] = mid
                method_syntax[mid] = (unit, m, cid)
                class_methods[cid].append(mid)

        xml_bindings, xml_methods = self.resolve_xml(kinds, method_syntax)

        methods: dict[str, MethodDecl] = {}
        for mid, (unit, m, cid) in method_syntax.items():
            kind, order = self.callback_of(m.name, kinds[cid], externals[cid])
            if mid in xml_methods:
                kind, order = CallbackKind.XML_DECLARED, None
            anchors = tuple(unit.anchor(off) for off in m.anchors())
            methods[mid] = MethodDecl(
                id=mid,
                owner=cid,
                name=m.name,
                parameter_arity=m.arity,
                params=tuple(m.params),
                body_entry_anchor=anchors[0],
                statement_anchors=anchors,
                callback_kind=kind,
                lifecycle_order=order,
                unit=unit.path,
                syntax=m,
            )

        classes: dict[str, ClassDecl] = {}
        for cid, (unit, cls) in self.class_syntax.items():
            enclosing_method = self.method_ids.get(id(cls.parent_method)) if cls.parent_method else None
            enclosing_class = self.class_ids.get(id(cls.parent_class)) if cls.parent_class else None
            supers = tuple(self.qualify(unit, s) for s in cls.supertypes)
            classes[cid] = ClassDecl(
                id=cid,
                simple_name=cls.name,
                kind=kinds[cid],
                supertypes=supers,
                is_anonymous=cls.is_anonymous,
                enclosing_method=enclosing_method,
                enclosing_class=enclosing_class,
                methods=tuple(class_methods[cid]),
                fields=tuple(f.name for f in cls.fields),
                unit=unit.path,
                syntax=cls,
                external_supertypes=tuple(externals[cid]),
            )

        self.methods = methods
        self.classes = classes
        edges, call_sites = self.scan_calls(method_syntax)
        edges.extend(self.xml_edges(xml_bindings))
        edges.sort(key=lambda e: (e.site.file, e.site.offset, e.registered_class))

        entry = {m.id for m in methods.values() if m.callback_kind is not CallbackKind.NONE}
        for e in edges:
            if e.kind is not EdgeKind.IMPLICIT_CALL:
                entry.update(e.targets)

        return CodeModel(
            units=tuple(self.units),
            classes=classes,
            methods=methods,
            registration_edges=tuple(edges),
            xml_bindings=tuple(xml_bindings),
            entry_points=frozenset(entry),
            call_sites=tuple(call_sites),
            diagnostics=tuple(self.diagnostics),
            table=self.table,
            unresolved_calls=self.unresolved,
        )

    def callback_of(self, name: str, kind: ClassKind, externals: list[str]) -> tuple[CallbackKind, Optional[int]]:
        order = self.table.lifecycle_order(kind.value, name)
        if order is not None:
            return CallbackKind.LIFECYCLE, order
        if kind is ClassKind.BROADCAST_RECEIVER and name in self.table.component_callbacks.get(kind.value, ()):
            return CallbackKind.RECEIVER_ON_RECEIVE, None
        for st in externals:
            for key in self.table.keys_for(st, self.table.callbacks):
                if name in self.table.callbacks[key]:
                    return CallbackKind.UI_LISTENER, None
        return CallbackKind.NONE, None

    # xml ------------------------------------------------------------------
    def layout_hosts(self, layout: str) -> list[str]:
        needle = f"R.layout.{layout}"
        hosts = []
        for cid, (unit, cls) in self.class_syntax.items():
            for m in cls.methods:
                if any(needle in arg for stmt in m.walk_statements() for call in stmt.calls for arg in call.args):
                    hosts.append(cid)
                    break
        return hosts

    def resolve_xml(self, kinds, method_syntax) -> tuple[list[XmlBinding], set[str]]:
        bindings = []
        resolved: set[str] = set()
        for unit in self.units:
            if unit.kind is not UnitKind.XML_LAYOUT or unit.xml is None:
                continue
            hosts = self.layout_hosts(unit.layout_name)
            if not hosts:
                hosts = [c for c, k in kinds.items() if k is ClassKind.ACTIVITY and not self.class_syntax[c][1].is_anonymous]
            for h in unit.xml.handlers:
                anchor = Anchor(unit.path, h.line, h.col, unit.line_index[h.line - 1] + h.col - 1)
                found = None
                for host in hosts:
                    for cid in [host, *self.corpus_supers(host)]:
                        for mid, (_, m, owner) in method_syntax.items():
                            if owner == cid and m.name == h.handler and m.arity == 1:
                                found = mid
                                break
                        if found:
                            break
                    if found:
                        break
                if found is None:
                    self.diagnostics.append(
                        Diagnostic(unit.path, h.line, h.col, "warning", f"unresolved onClick handler {h.handler!r}")
                    )
                else:
                    resolved.add(found)
                bindings.append(XmlBinding(unit.layout_name, h.widget, h.handler, anchor, hosts[0] if hosts else None, found))
        return bindings, resolved

    def xml_edges(self, bindings: list[XmlBinding]) -> list[RegistrationEdge]:
        out = []
        for b in bindings:
            if b.method is None:
                continue
            needle = f"R.layout.{b.layout}"
            for mid, m in self.methods.items():
                unit = self.class_syntax[m.owner][0]
                for stmt in m.syntax.walk_statements():
                    for call in stmt.calls:
                        if any(needle in a for a in call.args):
                            out.append(
                                RegistrationEdge(unit.anchor(call.start), mid, self.methods[b.method].owner, EdgeKind.XML_ONCLICK, call.name, (b.method,))
                            )
        return out

    # calls ----------------------------------------------------------------
    def scan_calls(self, method_syntax) -> tuple[list[RegistrationEdge], list[CallSite]]:
        edges: list[RegistrationEdge] = []
        sites: list[CallSite] = []
        for mid in sorted(method_syntax, key=lambda k: (method_syntax[k][0].path, method_syntax[k][1].start)):
            unit, m, cid = method_syntax[mid]
            stmts = list(m.walk_statements())
            for stmt in stmts:
                for call in sorted(stmt.calls, key=lambda c: c.start):
                    reg_kind = None if call.is_new else self.table.registrar_kind(call.name)
                    implicit = self.table.implicit_targets(call.name, call.is_new)
                    if reg_kind or implicit:
                        for idx, arg in enumerate(call.args):
                            target_cls = self.resolve_arg(idx, arg, call, stmts, m, cid)
                            if target_cls is None:
                                continue
                            if implicit:
                                kind = EdgeKind.IMPLICIT_CALL
                                targets = tuple(x for x in self.classes[target_cls].methods if self.methods[x].name in implicit)
                            else:
                                kind = EdgeKind(reg_kind)
                                targets = self.callback_targets(target_cls)
                            if targets:
                                edges.append(RegistrationEdge(unit.anchor(call.start), mid, target_cls, kind, call.name, targets))
                    for callee in self.resolve_call(call, stmts, m, cid):
                        sites.append(CallSite(mid, callee, call.start))
        return edges, sites

    def callback_targets(self, cid: str) -> tuple[str, ...]:
        cls = self.classes[cid]
        cbs = tuple(x for x in cls.methods if self.methods[x].callback_kind is not CallbackKind.NONE)
        if cbs:
            return cbs
        return tuple(cls.methods) if cls.is_anonymous else ()

    def resolve_arg(self, idx: int, arg: str, call, stmts: list[Statement], m: JMethod, cid: str) -> Optional[str]:
        if idx in call.anon_args:
            return self.class_ids.get(id(call.anon_args[idx]))
        text = arg.strip()
        if text == "this":
            return cid
        if text.startswith("new "):
            name = text[4:].split("(")[0].split("<")[0].strip()
            return self.corpus_class(name, cid)
        if text.isidentifier():
            return self.resolve_variable(text, call.start, stmts, m, cid, want_class=True)
        return None

    def resolve_variable(self, name: str, before: int, stmts, m: JMethod, cid: str, want_class: bool) -> Optional[str]:
        """Class bound to a local variable, parameter or field (instantiated class or declared type)."""
        best = None
        for stmt in stmts:
            if stmt.assigned == name and stmt.start < before:
                best = stmt
        if best is not None:
            for c in best.classes:
                if c.is_anonymous and c.creation is not None:
                    return self.class_ids.get(id(c))
            for call in best.calls:
                if call.is_new:
                    found = self.corpus_class(call.receiver or call.name, cid)
                    if found:
                        return found
            if best.declared_type:
                return self.corpus_class(best.declared_type, cid)
            return None
        for p in m.params:
            parts = p.replace("final ", "").split()
            if len(parts) >= 2 and parts[-1] == name:
                return self.corpus_class(parts[-2].split("<")[0], cid)
        owner = cid
        while owner is not None:
            unit, cls = self.class_syntax[owner]
            for f in cls.fields:
                if f.name == name:
                    for anon in cls.classes:
                        if anon.is_anonymous and anon.parent_method is None and anon.start > f.start:
                            later = [g for g in cls.fields if f.start < g.start < anon.start]
                            if not later:
                                return self.class_ids.get(id(anon))
                    return self.corpus_class(f.type, owner)
            owner = self.class_ids.get(id(cls.parent_class)) if cls.parent_class else None
        return None

    def find_method(self, cid: str, name: str, arity: int, inherit: bool = True) -> Optional[str]:
        chain = [cid, *self.corpus_supers(cid)] if inherit else [cid]
        for c in chain:
            for mid in self.classes[c].methods:
                mm = self.methods[mid]
                if mm.name == name and mm.parameter_arity == arity:
                    return mid
        return None

    def resolve_call(self, call, stmts, m: JMethod, cid: str) -> list[str]:
        arity = len(call.args)
        if call.is_new:
            target = self.corpus_class(call.receiver or call.name, cid)
            if target is not None:
                ctor = self.find_method(target, self.classes[target].simple_name, arity, inherit=False)
                if ctor:
                    return [ctor]
            self.unresolved += 1
            return []
        recv = call.receiver
        if recv is None or recv == "this":
            owner = cid
            while owner is not None:
                found = self.find_method(owner, call.name, arity)
                if found:
                    return [found]
                owner = self.classes[owner].enclosing_class
            self.unresolved += 1
            return []
        if recv == "super":
            for sup in self.corpus_supers(cid)[:1]:
                found = self.find_method(sup, call.name, arity)
                if found:
                    return [found]
            self.unresolved += 1
            return []
        target = None
        if recv.startswith("new "):
            target = self.corpus_class(recv[4:].split("(")[0].strip(), cid)
        elif recv.isidentifier():
            target = self.resolve_variable(recv, call.start, stmts, m, cid, want_class=False)
            if target is None and recv[:1].isupper():
                target = self.corpus_class(recv, cid)
        elif all(part.isidentifier() for part in recv.split(".")):
            target = self.corpus_class(recv, cid) if recv.split(".")[-1][:1].isupper() else None
        if target is not None:
            found = self.find_method(target, call.name, arity)
            if found:
                return [found]
        self.unresolved += 1
        return []


def build_model(units: Iterable[SourceUnit], table: Optional[ClassificationTable] = None) -> CodeModel:
    return _Builder(list(units), table or ClassificationTable.load()).build()


def load_model(root: Path | str, table: Optional[ClassificationTable] = None, exclude: Iterable[str] = ()) -> CodeModel:
    units, diags = load_corpus(root, exclude)
    model = build_model(units, table)
    if diags:
        model = CodeModel(
            units=model.units,
            classes=model.classes,
            methods=model.methods,
            registration_edges=model.registration_edges,
            xml_bindings=model.xml_bindings,
            entry_points=model.entry_points,
            call_sites=model.call_sites,
            diagnostics=tuple(diags) + model.diagnostics,
            table=model.table,
            unresolved_calls=model.unresolved_calls,
        )
    return model


# --------------------------------------------------------------------------
# Call graph


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    kind: str  # call | dynamic-receiver | listener-attach | xml-onclick | implicit-call
    site: Anchor

    @property
    def implicit(self) -> bool:
        return self.kind == EdgeKind.IMPLICIT_CALL.value


class CallGraph:
    """Directed multigraph over method ids with deterministic edge order."""

    def __init__(self, nodes: Iterable[str], edges: Iterable[Edge]):
        self.nodes = list(nodes)
        self.edges = list(edges)
        self._succ: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        self._pred: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            self._succ[e.source].append(e)
            self._pred[e.target].append(e)

    def successors(self, node: str) -> list[Edge]:
        return self._succ.get(node, [])

    def predecessors(self, node: str) -> list[Edge]:
        return self._pred.get(node, [])

    def has_edge(self, a: str, b: str) -> bool:
        return any(e.target == b for e in self._succ.get(a, ()))

    def reachable(self, sources: Iterable[str]) -> set[str]:
        seen = set()
        stack = list(sources)
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(e.target for e in self.successors(cur))
        return seen


def call_graph(model: CodeModel) -> CallGraph:
    unit_map = model.unit_map
    edges: list[Edge] = []
    seen = set()
    for site in model.call_sites:
        m = model.methods[site.caller]
        key = (site.caller, site.callee, "call")
        if key in seen:
            continue
        seen.add(key)
        edges.append(Edge(site.caller, site.callee, "call", unit_map[m.unit].anchor(site.offset)))
    for reg in model.registration_edges:
        for t in reg.targets:
            key = (reg.registrar_method, t, reg.kind.value)
            if key in seen:
                continue
            seen.add(key)
            edges.append(Edge(reg.registrar_method, t, reg.kind.value, reg.site))
    edges.sort(key=lambda e: (e.site.file, e.site.offset, e.target))
    nodes = sorted(model.methods, key=lambda mid: (model.methods[mid].unit, model.methods[mid].syntax.start))
    return CallGraph(nodes, edges)
