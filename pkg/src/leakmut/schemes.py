"""Mutation schemes: where operator instances may be placed in a code model."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .model import Anchor, CallbackKind, ClassKind, CodeModel, EdgeKind, MethodDecl
from .operators import Goal, SecurityOperator


class MutationScheme(str, Enum):
    ANDROID = "android-abstractions"
    REACHABILITY = "reachability"
    TAINT_SPLIT = "taint-split"
    COMPLEX_PATH = "complex-path"


class Category(str, Enum):
    LIFECYCLE_ACTIVITY = "lifecycle-activity"
    LIFECYCLE_FRAGMENT = "lifecycle-fragment"
    UI_LISTENER = "ui-listener"
    DYNAMIC_RECEIVER = "dynamic-receiver"
    NESTED_RECEIVER = "nested-receiver"
    XML_CALLBACK = "xml-callback"
    PLAIN_METHOD = "plain-method"
    TAINT_PAIR = "taint-pair"
    COMPLEX_PATH = "complex-path"


# Scheme families as exposed on the command line. One output tree is
# produced per invocation; a family run is an invocation with its schemes.
FAMILIES: dict[str, tuple[MutationScheme, ...]] = {
    "android": (MutationScheme.ANDROID,),
    "reachability": (MutationScheme.REACHABILITY,),
    "goal": (MutationScheme.TAINT_SPLIT, MutationScheme.COMPLEX_PATH),
}


def parse_schemes(spec: str) -> list[MutationScheme]:
    """Comma-separated scheme names, family names or ``all``."""
    out: list[MutationScheme] = []
    for part in (p.strip() for p in spec.split(",")):
        if not part:
            continue
        if part == "all":
            found = list(MutationScheme)
        elif part in FAMILIES:
            found = list(FAMILIES[part])
        else:
            try:
                found = [MutationScheme(part)]
            except ValueError:
                raise ValueError(f"unknown scheme {part!r}") from None
        out.extend(s for s in found if s not in out)
    if not out:
        raise ValueError("no schemes selected")
    return sorted(out, key=list(MutationScheme).index)


@dataclass(frozen=True)
class SchemeConfig:
    taint_k: int = 1
    nested_depth: int = 2

    def __post_init__(self):
        if self.taint_k < 1:
            raise ValueError("taint adjacency K must be >= 1")
        if self.nested_depth < 2:
            raise ValueError("nested receiver depth must be >= 2")


@dataclass(frozen=True)
class SynthPlan:
    """Code that has to exist before the operator can be placed."""

    action: str  # nested-receiver | xml-handler
    file: str
    target_class: str
    target_method: Optional[str] = None  # outer onReceive for nested receivers
    handler: Optional[str] = None  # method name for xml handlers
    depth: int = 2

    def describe(self) -> str:
        if self.action == "nested-receiver":
            return f"create nested receiver (depth {self.depth}) inside method {self.target_method}"
        return f"create public void {self.handler}(View v) in {self.target_class}"


@dataclass(frozen=True)
class InjectionPoint:
    point_id: str
    scheme: MutationScheme
    category: Category
    source_anchor: Anchor
    sink_anchor: Anchor
    source_method: Optional[str]
    sink_method: Optional[str]
    synth_plan: Optional[SynthPlan] = None

    def sort_key(self):
        return (self.source_anchor.file, self.source_anchor.offset, self.category.value,
                self.sink_anchor.file, self.sink_anchor.offset)


@dataclass(frozen=True)
class MIP:
    scheme: MutationScheme
    operator_id: str
    points: tuple[InjectionPoint, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.points)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for p in self.points:
            out[p.category.value] = out.get(p.category.value, 0) + 1
        return out

    def dump(self) -> str:
        lines = [f"# scheme={self.scheme.value} operator={self.operator_id} points={len(self.points)}"]
        for p in self.points:
            s, k = p.source_anchor, p.sink_anchor
            row = [p.point_id, p.scheme.value, p.category.value, f"{s.file}:{s.line}:{s.column}", f"{k.file}:{k.line}:{k.column}"]
            if p.synth_plan:
                row.append(p.synth_plan.describe())
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"


def _method_order(model: CodeModel) -> list[MethodDecl]:
    return sorted(model.methods.values(), key=lambda m: (m.unit, m.body_entry_anchor.offset))


def _finish(scheme: MutationScheme, points: Iterable[InjectionPoint]) -> list[InjectionPoint]:
    ordered = sorted(points, key=InjectionPoint.sort_key)
    out = []
    for n, p in enumerate(ordered, 1):
        out.append(InjectionPoint(f"{scheme.value}:{n}", p.scheme, p.category, p.source_anchor, p.sink_anchor,
                                  p.source_method, p.sink_method, p.synth_plan))
    return out


def _point(scheme, category, m: MethodDecl, plan=None) -> InjectionPoint:
    a = m.body_entry_anchor
    return InjectionPoint("", scheme, category, a, a, m.id, m.id, plan)


def points_reachability(model: CodeModel, category: Category = Category.PLAIN_METHOD) -> list[InjectionPoint]:
    scheme = MutationScheme.REACHABILITY if category is Category.PLAIN_METHOD else MutationScheme.COMPLEX_PATH
    return _finish(scheme, (_point(scheme, category, m) for m in _method_order(model)))


def points_complex(model: CodeModel) -> list[InjectionPoint]:
    return points_reachability(model, Category.COMPLEX_PATH)


def _android_category(model: CodeModel, m: MethodDecl) -> Optional[Category]:
    kind = model.classes[m.owner].kind
    if m.callback_kind is CallbackKind.XML_DECLARED:
        return Category.XML_CALLBACK
    if m.callback_kind is CallbackKind.LIFECYCLE:
        if kind is ClassKind.ACTIVITY:
            return Category.LIFECYCLE_ACTIVITY
        if kind in (ClassKind.FRAGMENT, ClassKind.DIALOG_FRAGMENT):
            return Category.LIFECYCLE_FRAGMENT
    if m.callback_kind is CallbackKind.RECEIVER_ON_RECEIVE:
        return Category.DYNAMIC_RECEIVER
    if m.callback_kind is CallbackKind.UI_LISTENER:
        return Category.UI_LISTENER
    return None


def points_android(model: CodeModel, config: SchemeConfig = SchemeConfig()) -> list[InjectionPoint]:
    scheme = MutationScheme.ANDROID
    points: list[InjectionPoint] = []
    for m in _method_order(model):
        cat = _android_category(model, m)
        if cat is not None:
            points.append(_point(scheme, cat, m))
    # one nested receiver per dynamic registration (per registered onReceive)
    for edge in model.registration_edges:
        if edge.kind is not EdgeKind.DYNAMIC_RECEIVER:
            continue
        for target in edge.targets:
            m = model.methods[target]
            if m.callback_kind is not CallbackKind.RECEIVER_ON_RECEIVE:
                continue
            plan = SynthPlan("nested-receiver", m.unit, m.owner, target_method=m.id, depth=config.nested_depth)
            points.append(_point(scheme, Category.NESTED_RECEIVER, m, plan))
    # layout handlers with no Java method get one synthesized
    seen: set[tuple[str, str]] = set()
    for b in model.xml_bindings:
        if b.method is not None or b.host_class is None or (b.host_class, b.handler) in seen:
            continue
        seen.add((b.host_class, b.handler))
        cls = model.classes[b.host_class]
        unit = model.unit_map[cls.unit]
        anchor = unit.anchor(_member_insert_offset(unit.text, cls.syntax.body_close))
        plan = SynthPlan("xml-handler", cls.unit, cls.id, handler=b.handler)
        points.append(InjectionPoint("", scheme, Category.XML_CALLBACK, anchor, anchor, None, None, plan))
    return _finish(scheme, points)


def _member_insert_offset(text: str, close: int) -> int:
    """Start of the line holding a class's closing brace, when only blanks precede it."""
    start = text.rfind("\n", 0, close) + 1
    if text[start:close].strip() == "":
        return start
    return close


def points_taint_pairs(model: CodeModel, k: int = 1) -> list[InjectionPoint]:
    """Ordered same-class lifecycle pairs at most ``k`` ranks apart."""
    if k < 1:
        raise ValueError("K must be >= 1")
    scheme = MutationScheme.TAINT_SPLIT
    points = []
    for cls in model.classes.values():
        cbs = sorted(
            (model.methods[mid] for mid in cls.methods if model.methods[mid].callback_kind is CallbackKind.LIFECYCLE),
            key=lambda m: m.lifecycle_order,
        )
        for i, first in enumerate(cbs):
            for second in cbs[i + 1 : i + 1 + k]:
                if second.lifecycle_order <= first.lifecycle_order:
                    continue
                points.append(InjectionPoint("", scheme, Category.TAINT_PAIR, first.body_entry_anchor,
                                             second.body_entry_anchor, first.id, second.id))
    return _finish(scheme, points)


def derive_mip(
    model: CodeModel,
    scheme: MutationScheme | str,
    op: SecurityOperator,
    config: SchemeConfig = SchemeConfig(),
) -> MIP:
    scheme = MutationScheme(scheme)
    if scheme is MutationScheme.REACHABILITY:
        points = points_reachability(model)
    elif scheme is MutationScheme.COMPLEX_PATH:
        points = points_complex(model)
    elif scheme is MutationScheme.ANDROID:
        points = points_android(model, config)
    else:
        points = points_taint_pairs(model, config.taint_k)
    if scheme in (MutationScheme.TAINT_SPLIT, MutationScheme.COMPLEX_PATH) and op.goal is not Goal.DATA_LEAK and points:
        raise ValueError(f"scheme {scheme.value} needs a data-leak operator, got {op.goal.value}")
    return MIP(scheme, op.operator_id, tuple(points))


# --------------------------------------------------------------------------
# Complex-path transformation


def complex_path_names(input_var: str, mutant_id: int) -> tuple[str, str, str]:
    """(builder, index, output) variable names used by the rule."""
    return f"builder{mutant_id}", f"i{mutant_id}", f"{input_var}x"


def complex_path_rule(input_var: str, mutant_id: int) -> list[str]:
    """Statements copying ``input_var`` char by char through a StringBuilder."""
    builder, idx, out = complex_path_names(input_var, mutant_id)
    return [
        f"StringBuilder {builder} = new StringBuilder();",
        f"for (int {idx} = 0; {idx} < {input_var}.length(); {idx}++) {{",
        f"    {builder}.append({input_var}.charAt({idx}));",
        "}",
        f"String {out} = {builder}.toString();",
    ]


_RULE_PATTERNS = [
    re.compile(r"^StringBuilder (?P<b>\w+) = new StringBuilder\(\);$"),
    re.compile(r"^for \(int (?P<i>\w+) = 0; (?P=i) < (?P<src>\w+)\.length\(\); (?P=i)\+\+\) \{$"),
    re.compile(r"^(?P<b>\w+)\.append\((?P<src>\w+)\.charAt\((?P<i>\w+)\)\);$"),
    re.compile(r"^\}$"),
    re.compile(r"^String (?P<out>\w+) = (?P<b>\w+)\.toString\(\);$"),
]


def evaluate_rule(fragment: list[str], env: dict[str, str]) -> dict[str, str]:
    """Execute a rule fragment over string variables.

    Interprets exactly the statement shapes the rule emits, so the emitted
    Java text itself is what gets checked.
    """
    lines = [ln.strip() for ln in fragment]
    if len(lines) != len(_RULE_PATTERNS):
        raise ValueError("unexpected fragment shape")
    m = [p.match(ln) for p, ln in zip(_RULE_PATTERNS, lines)]
    if not all(m):
        bad = next(ln for p, ln in zip(_RULE_PATTERNS, lines) if not p.match(ln))
        raise ValueError(f"unsupported statement {bad!r}")
    env = dict(env)
    builders: dict[str, list[str]] = {m[0]["b"]: []}
    src = env[m[1]["src"]]
    loop_var = m[1]["i"]
    if m[2]["i"] != loop_var or m[2]["src"] != m[1]["src"]:
        raise ValueError("loop body does not index its own loop")
    i = 0
    while i < len(src):
        builders[m[2]["b"]].append(src[i])
        i += 1
    env[m[4]["out"]] = "".join(builders[m[4]["b"]])
    return env
