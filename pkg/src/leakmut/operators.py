"""Security operators: source/sink code templates instantiated per mutant id."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

PLACEHOLDER = "##"


class Goal(str, Enum):
    DATA_LEAK = "data-leak"
    SSL_MISUSE = "ssl-misuse"


class OperatorError(ValueError):
    pass


class DuplicateMutantId(OperatorError):
    pass


class CatalogError(ValueError):
    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def tag_for(mutant_id: int) -> str:
    return f"leak-{mutant_id}"


def source_marker_for(mutant_id: int) -> str:
    return f"leak-src-{mutant_id}"


# `<Type> <var##> = <expr>;`
_DECL_RE = re.compile(r"^\s*(?P<type>[\w.$<>\[\], #]+?)\s+(?P<var>[A-Za-z_$][\w$]*##)\s*=\s*(?P<expr>.+?);\s*$", re.S)


@dataclass(frozen=True)
class OperatorInstance:
    mutant_id: int
    source_stmt: str
    sink_stmt: str
    tag: str
    variable: str
    var_type: str
    source_expr: str
    marker_stmt: str  # strict-mode source marker for split placements

    def field_decl(self) -> str:
        return f"{self.var_type} {self.variable};"

    def assignment(self) -> str:
        return f"{self.variable} = {self.source_expr};"

    def sink_for(self, variable: str) -> str:
        """Sink statement consuming a different variable (complex-path output)."""
        return re.sub(rf"\b{re.escape(self.variable)}\b", variable, self.sink_stmt)


@dataclass(frozen=True)
class SecurityOperator:
    operator_id: str
    goal: Goal
    source_template: str
    sink_template: str
    required_imports: tuple[str, ...] = ()
    source_api: str = ""
    sink_api: str = ""

    def __post_init__(self):
        if PLACEHOLDER not in self.source_template or PLACEHOLDER not in self.sink_template:
            raise OperatorError(f"operator {self.operator_id}: both templates need the {PLACEHOLDER} placeholder")
        if f"leak-{PLACEHOLDER}" not in self.sink_template:
            raise OperatorError(f"operator {self.operator_id}: sink template must log under leak-{PLACEHOLDER}")
        if self.sink_template.count(f'"leak-{PLACEHOLDER}"') != 1:
            raise OperatorError(f"operator {self.operator_id}: sink template must contain the tag exactly once")
        if self.declaration() is None:
            raise OperatorError(f"operator {self.operator_id}: source template must end with `<Type> <name##> = <expr>;`")

    def declaration(self) -> Optional[re.Match]:
        # the variable declaration is the last statement of the source template
        last = self.source_template.rstrip()
        cut = _last_statement_start(last)
        return _DECL_RE.match(last[cut:])

    def to_dict(self) -> dict:
        return {
            "operator-id": self.operator_id,
            "goal": self.goal.value,
            "source-template": self.source_template,
            "sink-template": self.sink_template,
            "required-imports": list(self.required_imports),
            "source-api": self.source_api,
            "sink-api": self.sink_api,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SecurityOperator":
        missing = [k for k in ("operator-id", "goal", "source-template", "sink-template") if k not in data]
        if missing:
            raise OperatorError(f"operator definition missing {', '.join(missing)}")
        try:
            goal = Goal(data["goal"])
        except ValueError:
            raise OperatorError(f"unknown goal {data['goal']!r}") from None
        return cls(
            operator_id=data["operator-id"],
            goal=goal,
            source_template=data["source-template"],
            sink_template=data["sink-template"],
            required_imports=tuple(data.get("required-imports", ())),
            source_api=data.get("source-api", ""),
            sink_api=data.get("sink-api", ""),
        )


def _last_statement_start(text: str) -> int:
    """Offset where the final top-level statement of a fragment starts."""
    depth = 0
    last = 0
    in_str = False
    prev = ""
    for i, ch in enumerate(text[:-1]):
        if in_str:
            if ch == '"' and prev != "\\":
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch in "({[":
            depth += 1
        elif ch in ")}]":
            depth -= 1
            if depth == 0 and ch == "}":
                last = i + 1
        elif ch == ";" and depth == 0:
            last = i + 1
        prev = ch
    return last


def instantiate(op: SecurityOperator, mutant_id: int, used: Optional[set[int]] = None) -> OperatorInstance:
    """Substitute the mutant id into both templates.

    When ``used`` is given it acts as the run's id registry: reusing an id
    is an error, fresh ids are recorded.
    """
    if not isinstance(mutant_id, int) or mutant_id < 1:
        raise OperatorError(f"mutant id must be a positive integer, got {mutant_id!r}")
    if used is not None:
        if mutant_id in used:
            raise DuplicateMutantId(f"mutant id {mutant_id} already used in this run")
        used.add(mutant_id)
    ident = str(mutant_id)
    source = op.source_template.replace(PLACEHOLDER, ident)
    sink = op.sink_template.replace(PLACEHOLDER, ident)
    decl = op.declaration()
    marker = op.sink_template.replace(f"leak-{PLACEHOLDER}", f"leak-src-{PLACEHOLDER}").replace(PLACEHOLDER, ident)
    return OperatorInstance(
        mutant_id=mutant_id,
        source_stmt=source,
        sink_stmt=sink,
        tag=tag_for(mutant_id),
        variable=decl["var"].replace(PLACEHOLDER, ident),
        var_type=decl["type"].strip().replace(PLACEHOLDER, ident),
        source_expr=decl["expr"].replace(PLACEHOLDER, ident),
        marker_stmt=marker,
    )


# --------------------------------------------------------------------------
# Built-in operators

CALENDAR_LEAK = SecurityOperator(
    operator_id="calendar-log",
    goal=Goal.DATA_LEAK,
    source_template="String dataLeak## = java.util.Calendar.getInstance().getTimeZone().getDisplayName();",
    sink_template='android.util.Log.d("leak-##", dataLeak##);',
    source_api="<java.util.Calendar: java.util.TimeZone getTimeZone()>",
    sink_api="<android.util.Log: int d(java.lang.String,java.lang.String)>",
)

_SSL_SOURCE = (
    "class TrustAll## implements javax.net.ssl.X509TrustManager {\n"
    "    public void checkClientTrusted(java.security.cert.X509Certificate[] chain, String authType) {\n"
    "    }\n"
    "    public void checkServerTrusted(java.security.cert.X509Certificate[] chain, String authType) {\n"
    "    }\n"
    "    public java.security.cert.X509Certificate[] getAcceptedIssuers() {\n"
    "        return new java.security.cert.X509Certificate[0];\n"
    "    }\n"
    "    public boolean isServerTrusted(java.security.cert.X509Certificate[] chain) {\n"
    "        return true;\n"
    "    }\n"
    "}\n"
    "TrustAll## trustManager## = new TrustAll##();"
)


def ssl_operator() -> SecurityOperator:
    """Trust-all TrustManager operator; the log line carries the usual leak tag."""
    return SecurityOperator(
        operator_id="ssl-trust-all",
        goal=Goal.SSL_MISUSE,
        source_template=_SSL_SOURCE,
        sink_template='android.util.Log.d("leak-##", String.valueOf(trustManager##.isServerTrusted(null)));',
        source_api="<javax.net.ssl.X509TrustManager: boolean isServerTrusted(java.security.cert.X509Certificate[])>",
        sink_api="<android.util.Log: int d(java.lang.String,java.lang.String)>",
    )


def load_operators(path: Path | str | None = None) -> dict[str, SecurityOperator]:
    """Read an operator definition file (JSON: {"operators": [...]})."""
    try:
        if path is None:
            text = resources.files("leakmut.data").joinpath("operators.json").read_text()
        else:
            text = Path(path).read_text()
        data = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise OperatorError(f"cannot read operator file {path}: {exc}") from None
    entries = data.get("operators") if isinstance(data, dict) else None
    if not isinstance(entries, list) or not entries:
        raise OperatorError(f"operator file {path} defines no operators")
    ops: dict[str, SecurityOperator] = {}
    for entry in entries:
        op = SecurityOperator.from_dict(entry)
        if op.operator_id in ops:
            raise OperatorError(f"duplicate operator id {op.operator_id!r}")
        ops[op.operator_id] = op
    return ops


# --------------------------------------------------------------------------
# Sources and sinks catalog

_SIG_RE = re.compile(
    r"^<(?P<cls>[\w$.]+):\s+(?P<ret>[\w$.\[\]]+)\s+(?P<name>[\w$<>]+)\((?P<params>[\w$.\[\], ]*)\)>$"
)
_CATALOG_LINE = re.compile(r"^(?P<sig><.*>)\s+->\s+(?P<role>_?SOURCE_?|_?SINK_?)\s*$")


@dataclass(frozen=True)
class Signature:
    text: str
    class_name: str
    return_type: str
    name: str
    params: tuple[str, ...]

    @property
    def simple_class(self) -> str:
        return self.class_name.split(".")[-1].split("$")[-1]

    @classmethod
    def parse(cls, text: str) -> "Signature":
        m = _SIG_RE.match(text.strip())
        if m is None:
            raise ValueError(f"malformed signature {text!r}")
        params = tuple(p.strip() for p in m["params"].split(",") if p.strip())
        return cls(text.strip(), m["cls"], m["ret"], m["name"], params)


@dataclass(frozen=True)
class SourceSinkCatalog:
    sources: tuple[Signature, ...] = ()
    sinks: tuple[Signature, ...] = ()

    @property
    def sizes(self) -> tuple[int, int]:
        return len(self.sources), len(self.sinks)

    def require(self, goal: Goal = Goal.DATA_LEAK) -> "SourceSinkCatalog":
        if goal is Goal.DATA_LEAK and (not self.sources or not self.sinks):
            raise CatalogError("<catalog>", 0, "data-leak usage needs at least one source and one sink")
        return self


def parse_catalog(lines: Iterable[str], path: str = "<catalog>") -> SourceSinkCatalog:
    sources: dict[str, Signature] = {}
    sinks: dict[str, Signature] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        m = _CATALOG_LINE.match(line)
        if m is None:
            raise CatalogError(path, lineno, f"expected '<signature> -> SOURCE|SINK', got {line!r}")
        try:
            sig = Signature.parse(m["sig"])
        except ValueError as exc:
            raise CatalogError(path, lineno, str(exc)) from None
        target = sources if "SOURCE" in m["role"] else sinks
        target.setdefault(sig.text, sig)
    return SourceSinkCatalog(tuple(sources.values()), tuple(sinks.values()))


def load_catalog(path: Path | str | None = None) -> SourceSinkCatalog:
    if path is None:
        text = resources.files("leakmut.data").joinpath("SourcesAndSinks.txt").read_text()
        return parse_catalog(text.splitlines(), "SourcesAndSinks.txt")
    return parse_catalog(Path(path).read_text().splitlines(), str(path))


def catalog_operator(
    source: Signature,
    sink: Signature,
    receiver: Optional[str] = None,
    operator_id: Optional[str] = None,
) -> SecurityOperator:
    """Build a data-leak operator from one catalog source and one catalog sink.

    ``receiver`` is the Java expression the source is invoked on; static
    sources default to the declaring class. Non-string sources are wrapped
    in ``String.valueOf``. The sink must take (tag, message) strings.
    """
    if source.params:
        raise OperatorError(f"source {source.text} takes arguments; give an explicit template instead")
    if len(sink.params) != 2 or any(p not in ("java.lang.String", "String") for p in sink.params):
        raise OperatorError(f"sink {sink.text} is not a (tag, message) logging call")
    call = f"{receiver or source.class_name}.{source.name}()"
    if source.return_type not in ("java.lang.String", "String"):
        call = f"String.valueOf({call})"
    return SecurityOperator(
        operator_id=operator_id or f"{source.simple_class}.{source.name}-{sink.simple_class}.{sink.name}",
        goal=Goal.DATA_LEAK,
        source_template=f"String dataLeak## = {call};",
        sink_template=f'{sink.class_name}.{sink.name}("leak-##", dataLeak##);',
        source_api=source.text,
        sink_api=sink.text,
    )
