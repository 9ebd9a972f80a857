"""A small reference data-leak detector with switchable unsound shortcuts.

The core is source-to-sink reachability over the call graph plus a
name-based, flow-insensitive taint pass inside each reached method. Each
switch in ``AnalyzerConfig`` removes one piece of Android modeling, which
lets tests reproduce the flaw classes on purpose.
"""

from __future__ import annotations

import dataclasses
import json
import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .model import (
    CallbackKind,
    ClassificationTable,
    CodeModel,
    EdgeKind,
    MethodDecl,
    build_model,
    call_graph,
    load_corpus,
)
from .operators import Signature, SourceSinkCatalog
from .report import Detection, ToolReport

XML_ONCLICK = "xml-onclick"
PROPAGATORS = frozenset({"append", "insert", "add", "put", "concat", "write", "set", "offer", "push"})

_FLOWDROID_DROPPED_KINDS = {"fragment", "dialog-fragment"}
_FLOWDROID_DROPPED_SUFFIXES = (
    "PhoneStateListener",
    "NavigationView.OnNavigationItemSelectedListener",
    "SQLiteOpenHelper",
)


class AnalyzerError(RuntimeError):
    pass


@dataclass(frozen=True)
class AnalyzerConfig:
    known_callbacks: tuple[str, ...]
    abstract_class_callbacks_supported: bool = True
    implicit_calls_supported: bool = True
    anonymous_classes_supported: bool = True
    async_pair_flows_supported: bool = True
    max_call_depth: Optional[int] = None
    name: str = "custom"

    def __post_init__(self):
        if self.max_call_depth is not None and self.max_call_depth < 1:
            raise ValueError("max-call-depth must be >= 1 when bounded")

    def replace(self, **changes) -> "AnalyzerConfig":
        return dataclasses.replace(self, **changes)

    def with_callbacks(self, *names: str) -> "AnalyzerConfig":
        return self.replace(known_callbacks=tuple(dict.fromkeys([*self.known_callbacks, *names])))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "known-callbacks": list(self.known_callbacks),
            "abstract-class-callbacks-supported": self.abstract_class_callbacks_supported,
            "implicit-calls-supported": self.implicit_calls_supported,
            "anonymous-classes-supported": self.anonymous_classes_supported,
            "async-pair-flows-supported": self.async_pair_flows_supported,
            "max-call-depth": self.max_call_depth,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnalyzerConfig":
        base = preset(data["preset"]) if "preset" in data else preset("permissive")
        changes = {}
        for key, value in data.items():
            if key == "preset":
                continue
            attr = key.replace("-", "_")
            if attr not in {f.name for f in dataclasses.fields(cls)}:
                raise ValueError(f"unknown analyzer option {key!r}")
            changes[attr] = tuple(value) if attr == "known_callbacks" else value
        return base.replace(**changes)

    @classmethod
    def load(cls, path: Path | str) -> "AnalyzerConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_callbacks(table: Optional[ClassificationTable] = None) -> tuple[str, ...]:
    table = table or ClassificationTable.load()
    return (*table.kinds, XML_ONCLICK)


def preset(name: str, table: Optional[ClassificationTable] = None) -> AnalyzerConfig:
    table = table or ClassificationTable.load()
    if name == "permissive":
        return AnalyzerConfig(default_callbacks(table), name=name)
    if name == "flowdroid-like":
        known = tuple(
            k for k in default_callbacks(table)
            if table.kinds.get(k) not in _FLOWDROID_DROPPED_KINDS and not k.endswith(_FLOWDROID_DROPPED_SUFFIXES)
        )
        return AnalyzerConfig(
            known,
            abstract_class_callbacks_supported=False,
            implicit_calls_supported=False,
            anonymous_classes_supported=False,
            async_pair_flows_supported=False,
            name=name,
        )
    raise ValueError(f"unknown preset {name!r} (expected permissive or flowdroid-like)")


# --------------------------------------------------------------------------
# API matching


def _receiver_class(receiver: Optional[str]) -> Optional[str]:
    """Simple class name when the receiver is written as a (qualified) type name."""
    if not receiver:
        return None
    parts = receiver.split(".")
    if all(p.isidentifier() for p in parts) and parts[-1][:1].isupper():
        return parts[-1]
    return None


def _matches(call, sigs: Iterable[Signature]) -> Optional[Signature]:
    if call.is_new:
        return None
    cls = _receiver_class(call.receiver)
    for sig in sigs:
        if sig.name == call.name and (cls is None or cls == sig.simple_class):
            return sig
    return None


_STRING = re.compile(r'"(?:\\.|[^"\\])*"|\'(?:\\.|[^\'\\])*\'')
_IDENT = re.compile(r"[A-Za-z_$][\w$]*")


def _idents(text: str) -> set[str]:
    return set(_IDENT.findall(_STRING.sub("", text)))


# --------------------------------------------------------------------------
# Analysis


class _Analysis:
    def __init__(self, model: CodeModel, catalog: SourceSinkCatalog, config: AnalyzerConfig):
        self.model = model
        self.catalog = catalog
        self.config = config
        self.table = model.table
        self.known = set(config.known_callbacks)

    # entry points -------------------------------------------------------
    def is_known_callback(self, m: MethodDecl) -> bool:
        cls = self.model.classes[m.owner]
        supers = cls.external_supertypes
        kind = m.callback_kind
        if kind is CallbackKind.XML_DECLARED:
            return XML_ONCLICK in self.known
        if kind is CallbackKind.LIFECYCLE or kind is CallbackKind.RECEIVER_ON_RECEIVE:
            return any(
                self.table.kinds.get(key) == cls.kind.value and key in self.known
                for st in supers for key in self.table.keys_for(st, self.table.kinds)
            )
        if kind is CallbackKind.UI_LISTENER:
            for st in supers:
                for key in self.table.keys_for(st, self.table.callbacks):
                    if m.name not in self.table.callbacks[key] or key not in self.known:
                        continue
                    if key in self.table.abstract_callbacks and not self.config.abstract_class_callbacks_supported:
                        continue
                    return True
        return False

    def reached(self) -> dict[str, int]:
        """Method id -> call depth from the nearest entry point."""
        model = self.model
        graph = call_graph(model)
        reg_targets = {
            t for e in model.registration_edges
            if e.kind in (EdgeKind.DYNAMIC_RECEIVER, EdgeKind.LISTENER_ATTACH) for t in e.targets
        }
        depth: dict[str, int] = {}
        queue: deque[str] = deque()
        for mid in graph.nodes:
            m = model.methods[mid]
            if not model.classes[m.owner].is_anonymous and self.is_known_callback(m):
                depth[mid] = 0
                queue.append(mid)
        limit = self.config.max_call_depth
        while queue:
            cur = queue.popleft()
            d = depth[cur] + 1
            if limit is not None and d > limit:
                continue
            for edge in graph.successors(cur):
                if edge.target in depth or not self.follow(edge, reg_targets):
                    continue
                depth[edge.target] = d
                queue.append(edge.target)
        return depth

    def follow(self, edge, reg_targets: set[str]) -> bool:
        if edge.kind == "call":
            return True
        if edge.implicit:
            return self.config.implicit_calls_supported
        target = self.model.methods[edge.target]
        if not self.is_known_callback(target):
            return False
        cls = self.model.classes[target.owner]
        if cls.is_anonymous and edge.source in reg_targets and not self.config.anonymous_classes_supported:
            return False
        return True

    # taint ----------------------------------------------------------------
    def field_scope(self, owner: str) -> list[str]:
        out = []
        cur: Optional[str] = owner
        while cur is not None:
            out.append(cur)
            cur = self.model.classes[cur].enclosing_class
        return out

    def run(self) -> list[Detection]:
        reached = self.reached()
        field_taint: dict[tuple[str, str], str] = {}
        detections: dict[tuple, Detection] = {}
        ordered = sorted(reached, key=lambda mid: (self.model.methods[mid].unit, self.model.methods[mid].syntax.start))
        while True:
            before = dict(field_taint)
            for mid in ordered:
                for det in self.analyze_method(self.model.methods[mid], field_taint):
                    detections.setdefault((det.file, det.line, det.source_api, det.sink_api), det)
            if not self.config.async_pair_flows_supported or field_taint == before:
                break
        return sorted(detections.values(), key=lambda d: (d.file, d.line, d.source_api or "", d.sink_api or ""))

    def analyze_method(self, m: MethodDecl, field_taint: dict[tuple[str, str], str]) -> list[Detection]:
        unit = self.model.unit_map[m.unit]
        stmts = list(m.syntax.walk_statements())
        locals_ = {s.assigned for s in stmts if s.declared_type and s.assigned}
        locals_ |= {p.replace("final ", "").split()[-1] for p in m.params if p.split()}
        scope = self.field_scope(m.owner)
        fields = {(c, f) for c in scope for f in self.model.classes[c].fields}
        tainted: dict[str, str] = {}
        if self.config.async_pair_flows_supported:
            for (c, f), origin in field_taint.items():
                if c in scope and f not in locals_:
                    tainted.setdefault(f, origin)
        found: list[Detection] = []
        changed = True
        while changed:
            changed = False
            found = []
            for stmt in stmts:
                calls = sorted(stmt.calls, key=lambda c: c.start)
                src = next((sig for c in calls if (sig := _matches(c, self.catalog.sources))), None)
                if stmt.assigned:
                    toks = stmt.tokens
                    eq = next((k for k, t in enumerate(toks) if t.text == "="), None)
                    rhs = {t.text for t in toks[eq + 1 :]} if eq is not None else set()
                    origin = src.text if src else next((tainted[v] for v in sorted(rhs) if v in tainted), None)
                    if origin and stmt.assigned not in tainted:
                        tainted[stmt.assigned] = origin
                        changed = True
                        if stmt.assigned not in locals_:
                            for c in scope:
                                if (c, stmt.assigned) in fields:
                                    field_taint.setdefault((c, stmt.assigned), origin)
                                    break
                for call in calls:
                    origin = None
                    for a, b in call.arg_spans:
                        inner = next((sig for c in calls if a <= c.start < b and (sig := _matches(c, self.catalog.sources))), None)
                        if inner is not None:
                            origin = inner.text
                            break
                        hit = sorted(v for v in _idents(unit.text[a:b]) if v in tainted)
                        if hit:
                            origin = tainted[hit[0]]
                            break
                    if origin is None:
                        continue
                    sink = _matches(call, self.catalog.sinks)
                    if sink is not None:
                        found.append(Detection(None, m.unit, unit.line_of(call.start), origin, sink.text))
                    if call.name in PROPAGATORS and call.receiver and call.receiver.isidentifier():
                        if call.receiver not in tainted:
                            tainted[call.receiver] = origin
                            changed = True
        return found


def analyze(tree, catalog: SourceSinkCatalog, config: AnalyzerConfig,
            table: Optional[ClassificationTable] = None) -> ToolReport:
    """Run the detector over a corpus directory, a list of units, or a built model."""
    catalog.require()
    if isinstance(tree, CodeModel):
        model = tree
    else:
        if isinstance(tree, (str, Path)):
            units, diags = load_corpus(tree)
            errors = [d for d in diags if d.severity == "error"]
            if errors:
                raise AnalyzerError(f"cannot analyze unparseable input: {errors[0]}")
        else:
            units = list(tree)
        model = build_model(units, table)
    detections = _Analysis(model, catalog, config).run()
    return ToolReport(f"toy-{config.name}", tuple(detections))
