"""Structural parser for the Java subset the mutation engine needs.

The parser recovers declarations (types, methods, fields), statement
boundaries inside method bodies, method calls and anonymous class
instantiations. Expressions are not modeled beyond that; generics,
lambdas and annotations are skipped over.

All positions are character offsets into the original text, so the
source can be edited in place without re-rendering anything.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional


class JavaSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized this
    throw throws transient try void volatile while true false null""".split()
)

MODIFIERS = frozenset(
    "public protected private static final abstract native synchronized "
    "transient volatile strictfp default sealed non-sealed".split()
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<textblock>\"\"\"(?:\\.|[^\\])*?\"\"\")
  | (?P<string>"(?:\\.|[^"\\\n])*")
  | (?P<char>'(?:\\.|[^'\\\n])+')
  | (?P<number>(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eEpP][+-]?\d+)?[A-Za-z_]*)
  | (?P<ident>[^\W\d][\w$]*|\$[\w$]*)
  | (?P<op>\.\.\.|->|::|\+\+|--|&&|\|\||==|!=|<=|>=|\+=|-=|\*=|/=|%=|&=|\|=|\^=|<<=|>>>=|>>=|<<
        |[-+*/%&|^!~<>=?:;,.(){}\[\]@])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int
    end: int


def line_starts(text: str) -> list[int]:
    starts = [0]
    for m in re.finditer("\n", text):
        starts.append(m.end())
    return starts


def offset_to_linecol(starts: list[int], offset: int) -> tuple[int, int]:
    """1-based (line, column) of a character offset."""
    lo, hi = 0, len(starts) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if starts[mid] <= offset:
            lo = mid
        else:
            hi = mid - 1
    return lo + 1, offset - starts[lo] + 1


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line, col = offset_to_linecol(line_starts(text), pos)
            ch = text[pos]
            if ch == '"' or ch == "'":
                raise JavaSyntaxError("unterminated literal", line, col)
            if text.startswith("/*", pos):
                raise JavaSyntaxError("unterminated comment", line, col)
            raise JavaSyntaxError(f"unexpected character {ch!r}", line, col)
        kind = m.lastgroup
        if kind not in ("ws", "lcomment", "bcomment"):
            tokens.append(Token(kind, m.group(), m.start(), m.end()))
        pos = m.end()
    return tokens


# --------------------------------------------------------------------------
# Syntax tree


@dataclass
class Call:
    name: str
    start: int  # offset of the name token
    end: int  # offset after the closing parenthesis
    receiver: Optional[str] = None  # source text before the dot, if any
    args: list[str] = field(default_factory=list)
    arg_spans: list[tuple[int, int]] = field(default_factory=list)
    is_new: bool = False
    # anonymous classes passed directly as arguments, by argument index
    anon_args: dict[int, "JClass"] = field(default_factory=dict)
    # anonymous class created by this `new` expression
    anon: Optional["JClass"] = None


@dataclass
class Statement:
    kind: str  # simple | block | if | for | while | do | try | switch | sync | label | class | empty
    start: int
    end: int
    tokens: list[Token] = field(default_factory=list)  # own tokens, nested bodies excluded
    children: list["Statement"] = field(default_factory=list)
    calls: list[Call] = field(default_factory=list)
    classes: list["JClass"] = field(default_factory=list)  # anonymous or local classes
    # `name = new ...` / `Type name = ...` facts used for light resolution
    assigned: Optional[str] = None
    declared_type: Optional[str] = None

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class JMethod:
    name: str
    start: int
    name_start: int
    params: list[str]
    body_open: Optional[int]  # offset of '{', None for abstract methods
    body_close: Optional[int]
    is_constructor: bool = False
    statements: list[Statement] = field(default_factory=list)
    owner: Optional["JClass"] = None

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def has_body(self) -> bool:
        return self.body_open is not None

    @property
    def entry_offset(self) -> int:
        """First insertable position: after '{', or after an explicit this(...)/super(...) call."""
        assert self.body_open is not None
        if self.is_constructor and self.statements:
            first = self.statements[0]
            toks = first.tokens
            if first.kind == "simple" and len(toks) >= 2 and toks[0].text in ("this", "super") and toks[1].text == "(":
                return first.end
        return self.body_open + 1

    def anchors(self) -> list[int]:
        entry = self.entry_offset
        out = [entry]
        for stmt in self.statements:
            if stmt.end > entry:
                out.append(stmt.end)
        return out

    def walk_statements(self):
        for stmt in self.statements:
            yield from stmt.walk()


@dataclass
class JField:
    name: str
    type: str
    start: int


@dataclass
class JClass:
    name: str  # simple name, "" for anonymous classes
    keyword: str  # class | interface | enum | record | anonymous
    start: int
    body_open: int
    body_close: int
    supertypes: list[str] = field(default_factory=list)
    methods: list[JMethod] = field(default_factory=list)
    fields: list[JField] = field(default_factory=list)
    classes: list["JClass"] = field(default_factory=list)  # member classes
    parent_class: Optional["JClass"] = None
    parent_method: Optional[JMethod] = None
    creation: Optional[Call] = None  # the `new` call for anonymous classes

    @property
    def is_anonymous(self) -> bool:
        return self.keyword == "anonymous"


@dataclass
class CompilationUnit:
    text: str
    package: Optional[str]
    imports: list[str]
    import_end: int  # offset after the last import (or package) declaration
    classes: list[JClass]

    def all_classes(self):
        """Every class in the unit, outer before inner, in source order."""
        out: list[JClass] = []

        def visit(cls: JClass):
            out.append(cls)
            nested = list(cls.classes)
            for m in cls.methods:
                for stmt in m.walk_statements():
                    nested.extend(stmt.classes)
            for c in sorted(nested, key=lambda c: c.start):
                visit(c)

        for c in self.classes:
            visit(c)
        return out


# --------------------------------------------------------------------------
# Parser

_CONTROL = {"if", "for", "while", "do", "try", "switch", "synchronized"}
_TYPE_KEYWORDS = {"class", "interface", "enum", "record"}
_NOT_CALLS = KEYWORDS | {"record", "yield", "var"}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.n = len(self.toks)
        self._starts: Optional[list[int]] = None

    # helpers -------------------------------------------------------------
    def error(self, i: int, message: str) -> JavaSyntaxError:
        if self._starts is None:
            self._starts = line_starts(self.text)
        offset = self.toks[i].start if i < self.n else len(self.text)
        line, col = offset_to_linecol(self._starts, offset)
        return JavaSyntaxError(message, line, col)

    def t(self, i: int) -> str:
        return self.toks[i].text if i < self.n else ""

    def expect(self, i: int, text: str) -> int:
        if self.t(i) != text:
            found = self.t(i) or "end of file"
            raise self.error(i, f"expected {text!r}, found {found!r}")
        return i + 1

    def ident(self, i: int) -> int:
        if i >= self.n or self.toks[i].kind != "ident":
            found = self.t(i) or "end of file"
            raise self.error(i, f"expected identifier, found {found!r}")
        return i + 1

    def match_close(self, i: int) -> int:
        """Index of the bracket closing the one at i."""
        pairs = {"(": ")", "[": "]", "{": "}"}
        opener = self.t(i)
        stack = [pairs[opener]]
        j = i + 1
        while j < self.n:
            s = self.toks[j].text
            if s in pairs:
                stack.append(pairs[s])
            elif s in (")", "]", "}"):
                if s != stack[-1]:
                    raise self.error(j, f"mismatched {s!r}")
                stack.pop()
                if not stack:
                    return j
            j += 1
        raise self.error(i, f"unclosed {opener!r}")

    def skip_typeargs(self, i: int) -> int:
        """Skip a balanced <...> starting at i (which must be '<')."""
        depth = 0
        while i < self.n:
            s = self.t(i)
            if s == "<":
                depth += 1
            elif s == ">":
                depth -= 1
                if depth == 0:
                    return i + 1
            elif s in (";", "{", "}", "(", ")", "="):
                raise self.error(i, "malformed type arguments")
            i += 1
        raise self.error(i, "unclosed type arguments")

    def skip_annotation(self, i: int) -> int:
        i = self.ident(i + 1)
        while self.t(i) == "." and i + 1 < self.n and self.toks[i + 1].kind == "ident":
            i += 2
        if self.t(i) == "(":
            i = self.match_close(i) + 1
        return i

    def skip_modifiers(self, i: int) -> int:
        while i < self.n:
            s = self.t(i)
            if s == "@" and self.t(i + 1) != "interface":
                i = self.skip_annotation(i)
            elif s in MODIFIERS and self.t(i + 1) not in ("(", "=", ";", "."):
                i += 1
            elif s == "non" and self.t(i + 1) == "-":
                i += 3
            else:
                return i
        return i

    def skip_type(self, i: int) -> int:
        while self.t(i) == "@":
            i = self.skip_annotation(i)
        if self.t(i) == "?":
            i += 1
        else:
            i = self.ident(i)
        while True:
            if self.t(i) == "<":
                i = self.skip_typeargs(i)
            if self.t(i) == "." and i + 1 < self.n and self.toks[i + 1].kind == "ident":
                i += 2
                continue
            break
        while self.t(i) == "[" and self.t(i + 1) == "]":
            i += 2
        if self.t(i) == "...":
            i += 1
        return i

    def type_text(self, i: int, j: int) -> str:
        """Type written in tokens [i, j) with generic arguments dropped."""
        parts = []
        depth = 0
        for tok in self.toks[i:j]:
            if tok.text == "<":
                depth += 1
            elif tok.text == ">":
                depth -= 1
            elif depth == 0 and tok.text != "@":
                parts.append(tok.text)
        return "".join(parts)

    def type_list(self, i: int, stops: tuple[str, ...]) -> tuple[list[str], int]:
        names = []
        while True:
            j = self.skip_type(i)
            names.append(self.type_text(i, j))
            i = j
            if self.t(i) == ",":
                i += 1
                continue
            if self.t(i) in stops:
                return names, i
            raise self.error(i, f"unexpected {self.t(i)!r} in type list")

    # compilation unit ----------------------------------------------------
    def parse_unit(self) -> CompilationUnit:
        i = 0
        package = None
        imports: list[str] = []
        import_end = 0
        j = self.skip_modifiers(i)
        if self.t(j) == "package":
            k = j + 1
            while self.t(k) != ";":
                if k >= self.n:
                    raise self.error(j, "unterminated package declaration")
                k += 1
            package = "".join(tok.text for tok in self.toks[j + 1 : k])
            import_end = self.toks[k].end
            i = k + 1
        while self.t(i) == "import":
            k = i + 1
            while self.t(k) != ";":
                if k >= self.n:
                    raise self.error(i, "unterminated import")
                k += 1
            imports.append("".join(tok.text for tok in self.toks[i + 1 : k] if tok.text != "static"))
            import_end = self.toks[k].end
            i = k + 1
        classes = []
        while i < self.n:
            if self.t(i) == ";":
                i += 1
                continue
            j = self.skip_modifiers(i)
            if self.t(j) in _TYPE_KEYWORDS or (self.t(j) == "@" and self.t(j + 1) == "interface"):
                cls, i = self.parse_type_decl(i, j, None, None)
                classes.append(cls)
            else:
                raise self.error(j, f"expected type declaration, found {self.t(j)!r}")
        return CompilationUnit(self.text, package, imports, import_end, classes)

    def parse_type_decl(self, start_i: int, i: int, parent_class, parent_method) -> tuple[JClass, int]:
        if self.t(i) == "@":
            keyword = "interface"
            i += 2
        else:
            keyword = self.t(i)
            i += 1
        name_i = i
        i = self.ident(i)
        name = self.t(name_i)
        if self.t(i) == "<":
            i = self.skip_typeargs(i)
        if keyword == "record" and self.t(i) == "(":
            i = self.match_close(i) + 1
        supertypes: list[str] = []
        while self.t(i) in ("extends", "implements", "permits"):
            kw = self.t(i)
            names, i = self.type_list(i + 1, ("{", "implements", "permits", "extends"))
            if kw != "permits":
                supertypes.extend(names)
        if self.t(i) != "{":
            raise self.error(i, f"expected class body for {name}")
        cls = JClass(
            name=name,
            keyword=keyword,
            start=self.toks[start_i].start,
            body_open=self.toks[i].start,
            body_close=-1,
            supertypes=supertypes,
            parent_class=parent_class,
            parent_method=parent_method,
        )
        end = self.parse_class_body(i, cls, enum=(keyword == "enum"))
        return cls, end

    def parse_class_body(self, i: int, cls: JClass, enum: bool = False) -> int:
        """Parse members from '{' at i; returns index after the closing '}'."""
        i += 1
        if enum:
            i = self.skip_enum_constants(i)
        while True:
            if i >= self.n:
                raise self.error(i - 1, "unterminated class body")
            s = self.t(i)
            if s == "}":
                cls.body_close = self.toks[i].start
                return i + 1
            if s == ";":
                i += 1
                continue
            i = self.parse_member(i, cls)

    def skip_enum_constants(self, i: int) -> int:
        while i < self.n and self.t(i) not in (";", "}"):
            s = self.t(i)
            if s in ("(", "{", "["):
                i = self.match_close(i) + 1
            else:
                i += 1
        if self.t(i) == ";":
            i += 1
        return i

    def parse_member(self, i: int, cls: JClass) -> int:
        start_i = i
        if self.t(i) == "{" or (self.t(i) == "static" and self.t(i + 1) == "{"):
            if self.t(i) == "static":
                i += 1
            return self.match_close(i) + 1  # initializer blocks are not modeled
        i = self.skip_modifiers(i)
        s = self.t(i)
        if s in _TYPE_KEYWORDS and i + 1 < self.n and self.toks[i + 1].kind == "ident" or (s == "@" and self.t(i + 1) == "interface"):
            inner, i = self.parse_type_decl(start_i, i, cls, None)
            cls.classes.append(inner)
            return i
        if s == "<":
            i = self.skip_typeargs(i)
        # constructor
        if self.toks[i].kind == "ident" if i < self.n else False:
            if self.t(i) == cls.name and self.t(i + 1) == "(":
                return self.parse_method(start_i, i, cls, constructor=True)
        if cls.keyword == "record" and self.t(i) == cls.name and self.t(i + 1) == "{":
            # compact canonical constructor
            close = self.match_close(i + 1)
            return close + 1
        type_i = i
        i = self.skip_type(i)
        type_end = i
        if i < self.n and self.toks[i].kind == "ident" and self.t(i + 1) == "(":
            return self.parse_method(start_i, i, cls, constructor=False)
        # field declarators
        declared = self.type_text(type_i, type_end)
        end = i
        while end < self.n and self.t(end) != ";":
            if self.t(end) in ("(", "[", "{"):
                end = self.match_close(end) + 1
                continue
            if self.t(end) in (")", "]", "}"):
                raise self.error(end, f"unexpected {self.t(end)!r} in field declaration")
            end += 1
        if end >= self.n:
            raise self.error(start_i, "unterminated member declaration")
        expecting_name = True
        k = i
        while k < end:
            tok = self.toks[k]
            if tok.text in ("(", "[", "{"):
                k = self.match_close(k) + 1
                continue
            if tok.text == ",":
                expecting_name = True
            elif expecting_name and tok.kind == "ident":
                cls.fields.append(JField(tok.text, declared, tok.start))
                expecting_name = False
            k += 1
        init = Statement("simple", 0, 0)
        self.scan_expression(i, end, None, cls, init)
        cls.classes.extend(init.classes)
        return end + 1

    def parse_method(self, start_i: int, name_i: int, cls: JClass, constructor: bool) -> int:
        i = name_i + 1
        close = self.match_close(i)
        params = self.split_args(i, close)
        i = close + 1
        while self.t(i) == "[" and self.t(i + 1) == "]":
            i += 2
        if self.t(i) == "throws":
            _, i = self.type_list(i + 1, ("{", ";"))
        method = JMethod(
            name=self.t(name_i),
            start=self.toks[start_i].start,
            name_start=self.toks[name_i].start,
            params=[self.text[a:b].strip() for a, b in params],
            body_open=None,
            body_close=None,
            is_constructor=constructor,
            owner=cls,
        )
        cls.methods.append(method)
        if self.t(i) == ";":
            return i + 1
        if self.t(i) == "default":  # annotation element default value
            while self.t(i) != ";":
                i += 1
            return i + 1
        if self.t(i) != "{":
            raise self.error(i, f"expected method body for {method.name}")
        method.body_open = self.toks[i].start
        stmts, end = self.parse_block(i, method, cls)
        method.statements = stmts
        method.body_close = self.toks[end - 1].start
        return end

    def split_args(self, open_i: int, close_i: int) -> list[tuple[int, int]]:
        """Character spans of the comma separated items between two parens."""
        spans = []
        depth = 0
        item_start = open_i + 1
        for j in range(open_i + 1, close_i):
            s = self.t(j)
            if s in ("(", "[", "{"):
                depth += 1
            elif s in (")", "]", "}"):
                depth -= 1
            elif s == "," and depth == 0:
                spans.append((self.toks[item_start].start, self.toks[j - 1].end))
                item_start = j + 1
        if item_start < close_i:
            spans.append((self.toks[item_start].start, self.toks[close_i - 1].end))
        return spans

    # statements ----------------------------------------------------------
    def parse_block(self, i: int, method, cls) -> tuple[list[Statement], int]:
        """Parse statements of the block opening at i; returns index after '}'."""
        i += 1
        stmts = []
        while True:
            if i >= self.n:
                raise self.error(i - 1, "unterminated block")
            if self.t(i) == "}":
                return stmts, i + 1
            stmt, i = self.parse_statement(i, method, cls)
            stmts.append(stmt)

    def parse_statement(self, i: int, method, cls) -> tuple[Statement, int]:
        tok = self.toks[i]
        s = tok.text
        if s == "{":
            children, end = self.parse_block(i, method, cls)
            return Statement("block", tok.start, self.toks[end - 1].end, children=children), end
        if s == ";":
            return Statement("empty", tok.start, tok.end), i + 1
        if s == "case" or (s == "default" and self.t(i + 1) in (":", "->")):
            j = i + 1
            depth = 0
            while j < self.n:
                x = self.t(j)
                if x in ("(", "["):
                    depth += 1
                elif x in (")", "]"):
                    depth -= 1
                elif depth == 0 and x in (":", "->"):
                    break
                j += 1
            return Statement("label", tok.start, self.toks[j].end), j + 1
        if tok.kind == "ident" and self.t(i + 1) == ":" and s not in KEYWORDS:
            inner, end = self.parse_statement(i + 2, method, cls)
            return Statement("label", tok.start, inner.end, children=[inner]), end
        if s in _CONTROL and not (s == "synchronized" and self.t(i + 1) != "("):
            return self.parse_control(i, method, cls)
        j = self.skip_modifiers(i)
        kw = self.t(j)
        named = j + 1 < self.n and self.toks[j + 1].kind == "ident"
        if (kw in ("class", "interface", "enum") and named) or (kw == "record" and named and self.t(j + 2) in ("(", "<")):
            local, end = self.parse_type_decl(i, j, cls, method)
            return Statement("class", tok.start, self.toks[end - 1].end, classes=[local]), end
        if s == "else":
            raise self.error(i, "'else' without 'if'")
        return self.parse_simple(i, method, cls)

    def parse_control(self, i: int, method, cls) -> tuple[Statement, int]:
        tok = self.toks[i]
        s = tok.text
        stmt = Statement(s if s != "synchronized" else "sync", tok.start, tok.end)
        j = i + 1
        if s in ("if", "while", "switch", "synchronized", "for"):
            j = self.expect(j, "(") - 1
            close = self.match_close(j)
            self.scan_expression(j, close + 1, method, cls, stmt)
            j = close + 1
            if s == "switch":
                if self.t(j) != "{":
                    raise self.error(j, "expected switch body")
                children, j = self.parse_block(j, method, cls)
                stmt.children.extend(children)
            else:
                body, j = self.parse_statement(j, method, cls)
                stmt.children.append(body)
                if s == "if" and self.t(j) == "else":
                    other, j = self.parse_statement(j + 1, method, cls)
                    stmt.children.append(other)
        elif s == "do":
            body, j = self.parse_statement(j, method, cls)
            stmt.children.append(body)
            j = self.expect(j, "while")
            close = self.match_close(self.expect(j, "(") - 1)
            self.scan_expression(j, close + 1, method, cls, stmt)
            j = self.expect(close + 1, ";")
        elif s == "try":
            if self.t(j) == "(":
                close = self.match_close(j)
                self.scan_expression(j, close + 1, method, cls, stmt)
                j = close + 1
            if self.t(j) != "{":
                raise self.error(j, "expected try block")
            stmt.children.append(self._block_stmt(j, method, cls))
            j = self.match_close(j) + 1
            while self.t(j) == "catch":
                j = self.expect(j + 1, "(")
                j = self.match_close(j - 1) + 1
                stmt.children.append(self._block_stmt(j, method, cls))
                j = self.match_close(j) + 1
            if self.t(j) == "finally":
                stmt.children.append(self._block_stmt(j + 1, method, cls))
                j = self.match_close(j + 1) + 1
        stmt.end = self.toks[j - 1].end
        return stmt, j

    def _block_stmt(self, i: int, method, cls) -> Statement:
        if self.t(i) != "{":
            raise self.error(i, "expected block")
        children, end = self.parse_block(i, method, cls)
        return Statement("block", self.toks[i].start, self.toks[end - 1].end, children=children)

    def parse_simple(self, i: int, method, cls) -> tuple[Statement, int]:
        start = i
        j = i
        while True:
            if j >= self.n:
                raise self.error(start, "unterminated statement")
            s = self.t(j)
            if s in ("(", "[", "{"):
                j = self.match_close(j) + 1
                continue
            if s == ";":
                break
            if s in (")", "]", "}"):
                raise self.error(j, f"unexpected {s!r}")
            j += 1
        stmt = Statement("simple", self.toks[start].start, self.toks[j].end)
        self.scan_expression(start, j + 1, method, cls, stmt)
        self.note_assignment(stmt)
        return stmt, j + 1

    def note_assignment(self, stmt: Statement) -> None:
        toks = stmt.tokens
        depth = 0
        for k, tok in enumerate(toks):
            if tok.text in ("(", "["):
                depth += 1
            elif tok.text in (")", "]"):
                depth -= 1
            elif tok.text == "=" and depth == 0:
                if k >= 1 and toks[k - 1].kind == "ident":
                    stmt.assigned = toks[k - 1].text
                    head = [t for t in toks[: k - 1] if t.text not in MODIFIERS]
                    if head and head[0].kind == "ident" and head[0].text not in ("this", "super", "return"):
                        if all(t.kind == "ident" or t.text in (".", "<", ">", "[", "]", ",", "?") for t in head):
                            stmt.declared_type = _strip_generics("".join(t.text for t in head))
                return

    def scan_expression(self, i: int, j: int, method, cls, stmt: Optional[Statement] = None) -> None:
        """Record calls and anonymous classes found in tokens [i, j)."""
        own: list[Token] = []
        calls: list[Call] = []
        classes: list[JClass] = []
        k = i
        while k < j:
            tok = self.toks[k]
            if tok.text == "new":
                k = self.scan_new(k, method, cls, calls, classes, own)
                continue
            if tok.text == "->" and k + 1 < j and self.t(k + 1) == "{":
                close = self.match_close(k + 1)
                own.append(tok)
                # lambda bodies are scanned for calls but not modeled as methods
                self.scan_expression(k + 2, close, method, cls, stmt)
                k = close + 1
                continue
            own.append(tok)
            if tok.kind == "ident" and tok.text not in _NOT_CALLS and self.t(k + 1) == "(" and k + 1 < j:
                close = self.match_close(k + 1)
                call = Call(tok.text, tok.start, self.toks[close].end)
                call.receiver = self.receiver_text(k)
                spans = self.split_args(k + 1, close)
                call.arg_spans = spans
                call.args = [self.text[a:b] for a, b in spans]
                calls.append(call)
            k += 1
        if stmt is not None:
            stmt.tokens.extend(own)
            stmt.calls.extend(calls)
            stmt.classes.extend(classes)
            self._link_anon_args(stmt.calls, stmt.classes)

    def _link_anon_args(self, calls: list[Call], classes: list[JClass]) -> None:
        for call in calls:
            for idx, (a, b) in enumerate(call.arg_spans):
                for anon in classes:
                    if anon.start == a and anon.creation is not None and anon.creation.end == b:
                        call.anon_args[idx] = anon

    def scan_new(self, k: int, method, cls, calls, classes=None, own=None) -> int:
        """Handle `new T(...)` / `new T(...) {...}` / `new T[...]` starting at k."""
        if classes is None:
            classes = []
        if own is not None:
            own.append(self.toks[k])
        new_tok = self.toks[k]
        m = k + 1
        while self.t(m) == "@":
            m = self.skip_annotation(m)
        if m >= self.n or self.toks[m].kind != "ident":
            return m
        type_start = m
        m = self.skip_type_no_array(m)
        type_name = self.type_text(type_start, m)
        if own is not None:
            own.extend(self.toks[type_start:m])
        if self.t(m) == "[":
            return m
        if self.t(m) != "(":
            return m
        close = self.match_close(m)
        call = Call(type_name.split(".")[-1], self.toks[type_start].start, self.toks[close].end, is_new=True)
        call.receiver = type_name if "." in type_name else None
        spans = self.split_args(m, close)
        call.arg_spans = spans
        call.args = [self.text[a:b] for a, b in spans]
        # scan arguments for nested calls / anonymous classes
        inner = Statement("simple", 0, 0)
        self.scan_expression(m + 1, close, method, cls, inner)
        if own is not None:
            own.append(self.toks[m])
            own.extend(inner.tokens)
            own.append(self.toks[close])
        calls.append(call)
        calls.extend(inner.calls)
        classes.extend(inner.classes)
        self._link_anon_args([call], inner.classes)
        m = close + 1
        if self.t(m) == "{":
            anon = JClass(
                name="",
                keyword="anonymous",
                start=new_tok.start,
                body_open=self.toks[m].start,
                body_close=-1,
                supertypes=[type_name],
                parent_class=cls,
                parent_method=method,
                creation=call,
            )
            end = self.parse_class_body(m, anon)
            call.anon = anon
            call.end = self.toks[end - 1].end
            classes.append(anon)
            return end
        return m

    def skip_type_no_array(self, i: int) -> int:
        i = self.ident(i)
        while True:
            if self.t(i) == "<":
                i = self.skip_typeargs(i)
            if self.t(i) == "." and i + 1 < self.n and self.toks[i + 1].kind == "ident":
                i += 2
                continue
            return i

    def match_open(self, j: int) -> int:
        """Index of the bracket opening the one closing at j."""
        pairs = {")": "(", "]": "[", "}": "{"}
        stack = []
        while j >= 0:
            s = self.t(j)
            if s in pairs:
                stack.append(pairs[s])
            elif s in ("(", "[", "{"):
                if not stack or stack[-1] != s:
                    raise self.error(j, f"mismatched {s!r}")
                stack.pop()
                if not stack:
                    return j
            j -= 1
        raise self.error(0, "unbalanced brackets")

    def receiver_text(self, k: int) -> Optional[str]:
        """Source text of the receiver expression for the call named at k."""
        if k < 2 or self.t(k - 1) != ".":
            return None
        j = k - 2
        while True:
            s = self.t(j)
            if s in (")", "]"):
                j = self.match_open(j)
                if s == "]":
                    if j == 0:
                        break
                    j -= 1
                    continue
                if j > 0 and self.toks[j - 1].kind == "ident" and self.t(j - 1) not in _NOT_CALLS:
                    j -= 1
                else:
                    break  # parenthesized expression
            elif self.toks[j].kind not in ("ident", "string", "number", "char", "textblock"):
                j += 1
                break
            if j >= 2 and self.t(j - 1) == "." and self.t(j - 2) not in ("(", "{", ";", ","):
                j -= 2
                continue
            break
        if j > 0 and self.t(j - 1) == "new":
            j -= 1
        if j > k - 2:
            return None
        return self.text[self.toks[j].start : self.toks[k - 2].end]


def _strip_generics(text: str) -> str:
    out = []
    depth = 0
    for ch in text:
        if ch == "<":
            depth += 1
        elif ch == ">":
            depth -= 1
        elif depth == 0:
            out.append(ch)
    return "".join(out)


def parse_java(text: str) -> CompilationUnit:
    """Parse a Java compilation unit; raises JavaSyntaxError on malformed input."""
    return _Parser(text).parse_unit()
