"""Survivors, survival statistics and flaw-class hypotheses."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Iterable, Optional

from .model import CallGraph, CodeModel, EdgeKind, call_graph
from .mutator import Mutant, MutantLedger
from .report import ToolReport, match_report
from .schemes import Category

logger = logging.getLogger(__name__)


class FlawClass(str, Enum):
    FC1 = "FC1-missing-callbacks"
    FC2 = "FC2-missing-implicit-calls"
    FC3 = "FC3-anonymous-classes"
    FC4 = "FC4-async-methods"
    UNCLASSIFIED = "unclassified"


class MutantNotFound(KeyError):
    pass


class FunnelError(RuntimeError):
    """Counts that cannot come from a valid pipeline run."""


def percent(part: int, whole: int) -> Decimal:
    """part/whole as a percentage, rounded half-up to one decimal."""
    if whole == 0:
        return Decimal("0.0")
    return (Decimal(part) * 100 / Decimal(whole)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)


def lookup_mutant(ledger: MutantLedger, tag: str) -> Mutant:
    prefix = "leak-"
    if not tag.startswith(prefix) or not tag[len(prefix):].isdigit():
        raise ValueError(f"malformed tag {tag!r}")
    try:
        return ledger.get(int(tag[len(prefix):]))
    except KeyError:
        raise MutantNotFound(tag) from None


# --------------------------------------------------------------------------
# Call chains


def enclosing_method(model: CodeModel, mutant: Mutant) -> Optional[str]:
    m = model.method_at(mutant.file, mutant.sink_line)
    return m.id if m else None


def _node_rank(graph: CallGraph) -> dict[str, int]:
    return {n: i for i, n in enumerate(graph.nodes)}


def call_chains(
    model: CodeModel,
    mutant: Mutant,
    exec_order: Optional[list[int]] = None,
    ledger: Optional[MutantLedger] = None,
    max_paths: int = 32,
    max_depth: int = 12,
    graph: Optional[CallGraph] = None,
) -> list[list[str]]:
    """Simple paths from entry points to the method holding the mutant's sink.

    Ranking: chains agreeing with the observed execution order first, then
    chains rooted at a method nothing else calls, then longer chains, then
    lexicographic order.
    """
    graph = graph or call_graph(model)
    target = enclosing_method(model, mutant)
    if target is None:
        logger.warning("mutant %d: no enclosing method at %s:%d", mutant.mutant_id, mutant.file, mutant.sink_line)
        return []
    can_reach = {target}
    stack = [target]
    while stack:
        cur = stack.pop()
        for e in graph.predecessors(cur):
            if e.source not in can_reach:
                can_reach.add(e.source)
                stack.append(e.source)
    entries = [n for n in graph.nodes if n in model.entry_points and n in can_reach]
    cap = max(max_paths * 8, 64)
    found: list[list[str]] = []

    def dfs(path: list[str]) -> None:
        if len(found) >= cap:
            return
        node = path[-1]
        if node == target:
            found.append(list(path))
            return
        if len(path) - 1 >= max_depth:
            return
        seen_targets: set[str] = set()
        for e in graph.successors(node):
            t = e.target
            if t in seen_targets or t in path or t not in can_reach:
                continue
            seen_targets.add(t)
            path.append(t)
            dfs(path)
            path.pop()

    for entry in entries:
        dfs([entry])
    if not found:
        logger.warning("mutant %d: %s is unreachable from every entry point", mutant.mutant_id, target)
        return []

    positions = _observed_positions(model, exec_order, ledger)
    rank = _node_rank(graph)

    def key(chain: list[str]):
        seq = [positions[n] for n in chain if n in positions]
        consistent = all(a <= b for a, b in zip(seq, seq[1:]))
        rooted = not graph.predecessors(chain[0])
        return (not consistent, not rooted, -len(chain), [rank[n] for n in chain])

    found.sort(key=key)
    return found[:max_paths]


def _observed_positions(model: CodeModel, exec_order, ledger) -> dict[str, int]:
    """Method id -> earliest trace position of any mutant located in it."""
    if not exec_order or ledger is None:
        return {}
    pos_of = {mid: i for i, mid in enumerate(exec_order)}
    out: dict[str, int] = {}
    for m in ledger:
        if m.mutant_id not in pos_of:
            continue
        method = enclosing_method(model, m)
        if method is not None:
            out[method] = min(out.get(method, pos_of[m.mutant_id]), pos_of[m.mutant_id])
    return out


def chain_edge_kinds(graph: CallGraph, chain: list[str]) -> list[set[str]]:
    return [{e.kind for e in graph.successors(a) if e.target == b} for a, b in zip(chain, chain[1:])]


# --------------------------------------------------------------------------
# Flaw classes

_CALLBACK_CATEGORIES = {Category.LIFECYCLE_ACTIVITY, Category.LIFECYCLE_FRAGMENT, Category.UI_LISTENER, Category.XML_CALLBACK}


def _nested_registration_targets(model: CodeModel) -> set[str]:
    return {
        t for e in model.registration_edges
        if e.kind in (EdgeKind.DYNAMIC_RECEIVER, EdgeKind.LISTENER_ATTACH) for t in e.targets
    }


def _crosses_nested_anonymous(model: CodeModel, graph: CallGraph, chain: list[str], reg_targets: set[str]) -> bool:
    for (a, b), kinds in zip(zip(chain, chain[1:]), chain_edge_kinds(graph, chain)):
        if kinds & {EdgeKind.DYNAMIC_RECEIVER.value, EdgeKind.LISTENER_ATTACH.value}:
            if model.classes[model.methods[b].owner].is_anonymous and a in reg_targets:
                return True
    return False


def classify_flaw(mutant: Mutant, model: Optional[CodeModel] = None, graph: Optional[CallGraph] = None) -> FlawClass:
    """Flaw-class hypothesis for one survivor.

    Callback categories and split pairs map directly. Plain placements are
    judged by how their method is reached: only through implicit calls
    (FC2), only through an anonymous class registered inside another
    registered callback (FC3), or through callbacks otherwise (FC1).
    """
    cat = mutant.category
    if cat is Category.TAINT_PAIR:
        return FlawClass.FC4
    if cat is Category.NESTED_RECEIVER:
        return FlawClass.FC3
    if cat in _CALLBACK_CATEGORIES:
        return FlawClass.FC1
    fallback = FlawClass.FC1 if cat is Category.DYNAMIC_RECEIVER else FlawClass.UNCLASSIFIED
    if model is None:
        return fallback
    graph = graph or call_graph(model)
    chains = call_chains(model, mutant, graph=graph)
    if not chains:
        return fallback
    kinds = [chain_edge_kinds(graph, c) for c in chains]
    if all(any(k == {EdgeKind.IMPLICIT_CALL.value} for k in ks) for ks in kinds):
        return FlawClass.FC2
    reg_targets = _nested_registration_targets(model)
    if all(_crosses_nested_anonymous(model, graph, c, reg_targets) for c in chains):
        return FlawClass.FC3
    return FlawClass.FC1


# --------------------------------------------------------------------------
# Survival


@dataclass(frozen=True)
class SurvivalReport:
    tool_name: str
    injected_count: int
    executable_count: int
    detected_count: int
    undetected: frozenset[int]
    survival_rate: Decimal
    per_category: dict[str, tuple[int, int]]  # category -> (executable, undetected)
    hypotheses: dict[int, FlawClass]
    unresolvable: int = 0
    survivors: tuple[Mutant, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.detected_count + len(self.undetected) != self.executable_count:
            raise FunnelError("detected + undetected must equal executable")

    def by_flaw(self) -> dict[FlawClass, list[int]]:
        out: dict[FlawClass, list[int]] = {fc: [] for fc in FlawClass}
        for mid in sorted(self.hypotheses):
            out[self.hypotheses[mid]].append(mid)
        return out

    def category_hypotheses(self) -> dict[str, list[str]]:
        out: dict[str, set[str]] = {}
        for m in self.survivors:
            out.setdefault(m.category.value, set()).add(self.hypotheses[m.mutant_id].value)
        return {k: sorted(v) for k, v in sorted(out.items())}

    def render(self) -> str:
        lines = [
            f"tool: {self.tool_name}",
            f"injected: {self.injected_count}",
            f"executable: {self.executable_count}",
            f"detected: {self.detected_count}",
            f"undetected: {len(self.undetected)}",
            f"survival rate: {self.survival_rate}%",
        ]
        if self.unresolvable:
            lines.append(f"unresolvable detections: {self.unresolvable}")
        lines += ["", f"{'category':<20} {'executable':>10} {'undetected':>10}"]
        for cat, (ex, und) in sorted(self.per_category.items()):
            lines.append(f"{cat:<20} {ex:>10} {und:>10}")
        lines += ["", "flaw-class hypotheses:"]
        for fc, ids in self.by_flaw().items():
            if ids:
                lines.append(f"  {fc.value}: {len(ids)}  ids {', '.join(map(str, ids))}")
        return "\n".join(lines) + "\n"

    def records(self) -> str:
        head = (f"summary\ttool={self.tool_name}\tinjected={self.injected_count}\texecutable={self.executable_count}"
                f"\tdetected={self.detected_count}\tundetected={len(self.undetected)}\tsurvival-rate={self.survival_rate}"
                f"\tunresolvable={self.unresolvable}")
        lines = [head]
        for cat, (ex, und) in sorted(self.per_category.items()):
            lines.append(f"category\tname={cat}\texecutable={ex}\tundetected={und}")
        for m in self.survivors:
            lines.append(f"survivor\tid={m.mutant_id}\tcategory={m.category.value}\thypothesis={self.hypotheses[m.mutant_id].value}"
                         f"\tfile={m.file}\tline={m.sink_line}")
        return "\n".join(lines) + "\n"


def survivors(
    ledger: MutantLedger,
    executable: Iterable[int],
    report: ToolReport,
    model: Optional[CodeModel] = None,
) -> SurvivalReport:
    executable = frozenset(executable)
    stray = executable - ledger.ids
    if stray:
        raise FunnelError(f"executable set mentions ids missing from the ledger: {sorted(stray)[:5]}")
    detected_all, unresolved = match_report(ledger, report)
    detected = detected_all & executable
    undetected = executable - detected
    graph = call_graph(model) if model is not None else None
    per_cat: dict[str, list[int]] = {}
    for m in ledger:
        if m.mutant_id in executable:
            row = per_cat.setdefault(m.category.value, [0, 0])
            row[0] += 1
            row[1] += m.mutant_id in undetected
    surv = tuple(ledger.get(i) for i in sorted(undetected))
    hyp = {m.mutant_id: classify_flaw(m, model, graph) for m in surv}
    return SurvivalReport(
        tool_name=report.tool_name,
        injected_count=len(ledger),
        executable_count=len(executable),
        detected_count=len(detected),
        undetected=undetected,
        survival_rate=percent(len(undetected), len(executable)),
        per_category={k: (v[0], v[1]) for k, v in per_cat.items()},
        hypotheses=hyp,
        unresolvable=unresolved,
        survivors=surv,
    )


@dataclass(frozen=True)
class Funnel:
    injected: int
    executable: int
    undetected: int

    def __post_init__(self):
        if not (self.injected >= self.executable >= self.undetected >= 0):
            raise FunnelError(
                f"funnel must narrow: injected={self.injected} executable={self.executable} undetected={self.undetected}"
            )

    @property
    def filtered(self) -> int:
        return self.injected - self.executable

    def render(self) -> str:
        return (
            f"injected: {self.injected}\n"
            f"executable: {self.executable} ({self.filtered} filtered, {percent(self.filtered, self.injected)}% of injected)\n"
            f"undetected: {self.undetected} ({percent(self.undetected, self.executable)}% of executable)\n"
        )


def funnel(ledger: MutantLedger, executable: Iterable[int], report: ToolReport) -> Funnel:
    executable = frozenset(executable)
    detected, _ = match_report(ledger, report)
    return Funnel(len(ledger), len(executable), len(executable - detected))
