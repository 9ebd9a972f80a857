"""Android layout and manifest scanning."""

from __future__ import annotations

from dataclasses import dataclass
from xml.parsers import expat

ANDROID_NS = "http://schemas.android.com/apk/res/android"


class XmlSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class XmlHandler:
    widget: str
    handler: str
    line: int
    col: int


@dataclass(frozen=True)
class ManifestComponent:
    tag: str  # activity | receiver | service | provider
    name: str
    line: int


@dataclass(frozen=True)
class XmlDocument:
    root_tag: str
    package: str | None
    handlers: tuple[XmlHandler, ...]
    components: tuple[ManifestComponent, ...]


def _attr(attrs: dict[str, str], local: str) -> str | None:
    for key in (f"{ANDROID_NS} {local}", f"android:{local}", local):
        if key in attrs:
            return attrs[key]
    return None


def parse_xml(text: str) -> XmlDocument:
    parser = expat.ParserCreate(namespace_separator=" ")
    root: list[str] = []
    package: list[str] = []
    handlers: list[XmlHandler] = []
    components: list[ManifestComponent] = []
    counter = [0]

    def start(name: str, attrs: dict[str, str]) -> None:
        local = name.split(" ")[-1]
        line, col = parser.CurrentLineNumber, parser.CurrentColumnNumber + 1
        if not root:
            root.append(local)
            if "package" in attrs:
                package.append(attrs["package"])
        on_click = _attr(attrs, "onClick")
        if on_click:
            widget_ref = _attr(attrs, "id")
            if widget_ref:
                widget = widget_ref.split("/")[-1]
            else:
                counter[0] += 1
                widget = f"{local}#{counter[0]}"
            handlers.append(XmlHandler(widget, on_click, line, col))
        if root[0] == "manifest" and local in ("activity", "receiver", "service", "provider"):
            comp = _attr(attrs, "name")
            if comp:
                components.append(ManifestComponent(local, comp, line))

    parser.StartElementHandler = start
    try:
        parser.Parse(text, True)
    except expat.ExpatError as exc:
        raise XmlSyntaxError(expat.errors.messages[exc.code], exc.lineno, exc.offset + 1) from None
    return XmlDocument(
        root_tag=root[0] if root else "",
        package=package[0] if package else None,
        handlers=tuple(handlers),
        components=tuple(components),
    )
