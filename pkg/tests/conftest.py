from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import pytest

from leakmut.model import CodeModel, build_model, load_model
from leakmut.mutator import MutationResult, inject_all
from leakmut.operators import CALENDAR_LEAK, load_catalog
from leakmut.schemes import MutationScheme, derive_mip
from leakmut.tracefilter import filter_executable, read_traces

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(str(resources.files("leakmut.data")))
DEMO = DATA / "demo"
DEMO_TRACE = DATA / "demo-trace.txt"

FIXTURE_CORPORA = {
    "tiny": FIXTURES / "tiny",
    "nested": FIXTURES / "nested",
    "taint": FIXTURES / "taint",
    "dialog": FIXTURES / "dialog",
    "demo": DEMO,
}

_CONTROL = {"if", "for", "while", "switch", "catch", "synchronized", "return", "new", "else", "try", "do"}
_COMMENT_OR_STRING = re.compile(r'//[^\n]*|/\*.*?\*/|"(?:\\.|[^"\\])*"|\'(?:\\.|[^\'\\])*\'', re.S)
_DECL = re.compile(r"(\S+)\s+([A-Za-z_$][\w$]*)\s*\(([^()]*)\)\s*(?:throws\s+[\w.,\s]+)?\{")


def count_method_declarations(root: Path) -> int:
    """Brute-force scanner: `<word> name(params) {` where <word> is a type or modifier.

    Written independently of the parser; anonymous-class creations
    (`new X() {`) and control statements are excluded by the preceding word.
    """
    total = 0
    for path in sorted(root.rglob("*.java")):
        text = _COMMENT_OR_STRING.sub('""', path.read_text())
        for m in _DECL.finditer(text):
            before, name = m.group(1), m.group(2)
            last_word = re.split(r"[^\w$<>\[\]]", before)[-1]
            if name in _CONTROL or last_word in _CONTROL or before.endswith((".", "=", "(", ",")):
                continue
            total += 1
    return total


def scan_tags(files: dict[str, str]) -> set[str]:
    return {t for text in files.values() for t in re.findall(r'"(leak-\d+)"', text)}


@dataclass
class DemoRun:
    model: CodeModel
    result: MutationResult
    mutated: CodeModel
    executable: frozenset[int]


def run_demo(strict_pairs: bool = False) -> DemoRun:
    model = load_model(DEMO)
    mips = [derive_mip(model, s, CALENDAR_LEAK) for s in MutationScheme]
    result = inject_all(model, mips, CALENDAR_LEAK, strict_pairs=strict_pairs)
    mutated = build_model(result.tree.units())
    executable = filter_executable(result.ledger, read_traces([DEMO_TRACE])).executable
    return DemoRun(model, result, mutated, executable)


@pytest.fixture(scope="session")
def demo() -> DemoRun:
    return run_demo()


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()
