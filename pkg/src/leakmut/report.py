"""Detection reports from data-leak tools and their correlation with the ledger."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .mutator import Mutant


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class Detection:
    mutant_id: Optional[int] = None
    file: Optional[str] = None
    line: Optional[int] = None
    source_api: Optional[str] = None
    sink_api: Optional[str] = None

    def render(self) -> str:
        if self.mutant_id is not None:
            return f"id={self.mutant_id}"
        return f"file={self.file} line={self.line} src={self.source_api or ''} sink={self.sink_api or ''}"


_ID_LINE = re.compile(r"^id=(\d+)$")
_FLOW_LINE = re.compile(r"^file=(\S+) line=(\d+) src=(.*?) sink=(.*)$")


@dataclass(frozen=True)
class ToolReport:
    tool_name: str
    detections: tuple[Detection, ...] = ()

    def dumps(self) -> str:
        lines = [f"# tool: {self.tool_name}"]
        lines += [d.render() for d in self.detections]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, default_name: str = "external") -> "ToolReport":
        name = default_name
        out = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                if key.strip() == "tool" and value.strip():
                    name = value.strip()
                continue
            if m := _ID_LINE.match(line):
                out.append(Detection(mutant_id=int(m[1])))
            elif m := _FLOW_LINE.match(line):
                out.append(Detection(None, m[1], int(m[2]), m[3].strip() or None, m[4].strip() or None))
            else:
                raise ReportError(f"line {lineno}: expected 'id=<n>' or 'file=<path> line=<n> src=<sig> sink=<sig>'")
        return cls(name, tuple(out))

    @classmethod
    def read(cls, path: Path | str) -> "ToolReport":
        return cls.loads(Path(path).read_text(), Path(path).stem)

    def write(self, path: Path | str) -> None:
        Path(path).write_text(self.dumps())


class DetectionIndex:
    """Lookup tables for correlating detections with mutants."""

    def __init__(self, mutants: Iterable[Mutant]):
        self.ids: set[int] = set()
        self.by_line: dict[tuple[str, int], list[int]] = {}
        self.by_apis: dict[tuple[str, str, str], list[int]] = {}
        for m in mutants:
            self.ids.add(m.mutant_id)
            self.by_line.setdefault((m.file, m.sink_line), []).append(m.mutant_id)
            self.by_apis.setdefault((m.file, m.source_api, m.sink_api), []).append(m.mutant_id)

    def resolve(self, det: Detection) -> Optional[int]:
        """Explicit id, then (file, sink line), then a unique (file, source, sink) triple."""
        if det.mutant_id is not None:
            return det.mutant_id if det.mutant_id in self.ids else None
        if det.file is None:
            return None
        if det.line is not None:
            hits = self.by_line.get((det.file, det.line), [])
            if len(hits) == 1:
                return hits[0]
        if det.source_api and det.sink_api:
            hits = self.by_apis.get((det.file, det.source_api, det.sink_api), [])
            if len(hits) == 1:
                return hits[0]
        return None


def resolve_detection(mutants: Iterable[Mutant], det: Detection) -> Optional[int]:
    return DetectionIndex(mutants).resolve(det)


def match_report(mutants: Iterable[Mutant], report: ToolReport | Iterable[Detection]) -> tuple[frozenset[int], int]:
    """(detected mutant ids, number of unresolvable detections)."""
    detections = report.detections if isinstance(report, ToolReport) else tuple(report)
    index = DetectionIndex(mutants)
    found: set[int] = set()
    unresolved = 0
    for det in detections:
        mid = index.resolve(det)
        if mid is None:
            unresolved += 1
        else:
            found.add(mid)
    return frozenset(found), unresolved
