"""Execution traces: which mutants actually ran."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from .mutator import MutantLedger
from .schemes import Category

logger = logging.getLogger(__name__)


class TraceFormat(str, Enum):
    LOGCAT = "logcat"  # ...D/leak-7(1234): payload
    BARE = "bare"  # leak-7<TAB>payload


_PATTERNS = {
    TraceFormat.LOGCAT: re.compile(r"D/(?P<tag>leak-(?:src-)?\d+)\s*(?:\(\s*\d+\))?: (?P<payload>.*)$"),
    TraceFormat.BARE: re.compile(r"^(?P<tag>leak-(?:src-)?\d+)\t(?P<payload>.*)$"),
}
_SINK_TAG = re.compile(r"^leak-(\d+)$")
_SOURCE_TAG = re.compile(r"^leak-src-(\d+)$")


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    tag: str
    payload: str


@dataclass(frozen=True)
class ExecutionTrace:
    records: tuple[TraceRecord, ...] = ()
    ignored: int = 0

    @property
    def executed_tags(self) -> frozenset[str]:
        return frozenset(r.tag for r in self.records if _SINK_TAG.match(r.tag))

    @property
    def executed_ids(self) -> frozenset[int]:
        return frozenset(int(_SINK_TAG.match(r.tag).group(1)) for r in self.records if _SINK_TAG.match(r.tag))

    @property
    def source_marker_ids(self) -> frozenset[int]:
        return frozenset(int(m.group(1)) for r in self.records if (m := _SOURCE_TAG.match(r.tag)))

    def union(self, other: "ExecutionTrace") -> "ExecutionTrace":
        """Concatenate two traces (this one first), renumbering the records."""
        merged = [*self.records, *other.records]
        return ExecutionTrace(
            tuple(TraceRecord(i, r.tag, r.payload) for i, r in enumerate(merged, 1)),
            self.ignored + other.ignored,
        )


def parse_trace(lines: Iterable[str], fmt: TraceFormat | str = TraceFormat.LOGCAT) -> ExecutionTrace:
    pattern = _PATTERNS[TraceFormat(fmt)]
    records = []
    ignored = 0
    for line in lines:
        m = pattern.search(line.rstrip("\r\n"))
        if m is None:
            ignored += 1
            continue
        records.append(TraceRecord(len(records) + 1, m["tag"], m["payload"]))
    return ExecutionTrace(tuple(records), ignored)


def read_traces(paths: Iterable[Path | str], fmt: TraceFormat | str = TraceFormat.LOGCAT) -> ExecutionTrace:
    trace = ExecutionTrace()
    for p in paths:
        with open(p, encoding="utf-8", errors="replace") as fh:
            trace = trace.union(parse_trace(fh, fmt))
    return trace


@dataclass(frozen=True)
class FilterResult:
    executable: frozenset[int]
    non_executable: frozenset[int]
    unknown_tags: frozenset[str]


def execution_order(trace: ExecutionTrace) -> list[int]:
    """Mutant ids by first sink-tag occurrence."""
    seen: dict[int, None] = {}
    for r in trace.records:
        m = _SINK_TAG.match(r.tag)
        if m:
            seen.setdefault(int(m.group(1)), None)
    return list(seen)


def _first_seen(trace: ExecutionTrace, pattern: re.Pattern) -> dict[int, int]:
    out: dict[int, int] = {}
    for r in trace.records:
        m = pattern.match(r.tag)
        if m:
            out.setdefault(int(m.group(1)), r.seq)
    return out


def filter_executable(ledger: MutantLedger, trace: ExecutionTrace, strict_pairs: bool = False) -> FilterResult:
    """Partition ledger ids by whether their tag shows up in the trace.

    With ``strict_pairs`` a taint-pair mutant also needs its source marker,
    logged before the sink tag.
    """
    ids = ledger.ids
    seen = trace.executed_ids
    unknown = frozenset(f"leak-{i}" for i in seen - ids)
    if unknown:
        logger.warning("trace mentions %d tag(s) not in the ledger: %s", len(unknown), ", ".join(sorted(unknown)))
    executable = set(seen & ids)
    if strict_pairs:
        sink_at = _first_seen(trace, _SINK_TAG)
        src_at = _first_seen(trace, _SOURCE_TAG)
        for m in ledger:
            if m.category is Category.TAINT_PAIR and m.mutant_id in executable:
                if m.mutant_id not in src_at or src_at[m.mutant_id] > sink_at[m.mutant_id]:
                    executable.discard(m.mutant_id)
    return FilterResult(frozenset(executable), frozenset(ids - executable), unknown)


def write_id_list(path: Path | str, ids: Iterable[int]) -> None:
    Path(path).write_text("".join(f"{i}\n" for i in sorted(ids)))


def read_id_list(path: Path | str) -> frozenset[int]:
    out = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.add(int(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a mutant id: {line!r}") from None
    return frozenset(out)
