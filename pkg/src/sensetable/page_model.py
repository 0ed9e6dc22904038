"""HTML page ingestion: segment raw pages into ordered, section-aware content blocks.

Segmentation is a pure function of (html, url): block ids are content hashes,
so re-ingesting byte-identical HTML reproduces the identical snapshot.
"""

from __future__ import annotations

import html as html_lib
import re
from dataclasses import dataclass
from enum import Enum
from html.parser import HTMLParser
from typing import Iterable, Optional
from urllib.parse import urlparse

from .errors import EmptyDocument, MalformedUrl
from .normalize import normalize_ws, stable_id

OPENING_BLOCK_COUNT = 3

_VOID_TAGS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}
_IGNORE_TAGS = {
    "script", "style", "noscript", "template", "head", "title", "meta",
    "link", "svg", "iframe", "object", "embed", "canvas", "map",
    "datalist", "select", "textarea",
}
_BLOCK_TAGS = {
    "address", "article", "aside", "blockquote", "body", "caption", "dd",
    "details", "dialog", "div", "dl", "dt", "fieldset", "figcaption", "figure",
    "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr",
    "html", "li", "main", "nav", "ol", "p", "pre", "section", "summary",
    "table", "tbody", "td", "tfoot", "th", "thead", "tr", "ul",
}
_HEADING_TAGS = {"h1", "h2", "h3", "h4", "h5", "h6"}


class BlockKind(str, Enum):
    paragraph = "paragraph"
    list_item = "list_item"
    code = "code"
    table_cell_group = "table_cell_group"
    heading = "heading"
    other = "other"


@dataclass(frozen=True)
class ContentBlock:
    block_id: str
    kind: BlockKind
    text: str
    html: str
    section_path: tuple[str, ...]
    order_index: int
    scroll_offset: int
    scroll_estimated: bool = True


@dataclass(frozen=True)
class PageSnapshot:
    page_id: str
    url: str
    title: str
    captured_at: int
    blocks: tuple[ContentBlock, ...]
    table_headers: tuple[str, ...]
    opening_block_ids: tuple[str, ...]

    def block(self, block_id: str) -> Optional[ContentBlock]:
        for b in self.blocks:
            if b.block_id == block_id:
                return b
        return None


class _Node:
    __slots__ = ("tag", "attrs", "children", "parent")

    def __init__(self, tag: str, attrs=None, parent: "_Node | None" = None):
        self.tag = tag
        self.attrs = list(attrs or [])
        self.children: list = []  # _Node | str
        self.parent = parent


def _closes(open_tag: str, new_tag: str) -> bool:
    # Implicit end tags the way browsers recover from unclosed elements.
    if open_tag == "p":
        return new_tag in _BLOCK_TAGS
    if open_tag == "li":
        return new_tag == "li"
    if open_tag in ("td", "th"):
        return new_tag in ("td", "th", "tr")
    if open_tag == "tr":
        return new_tag == "tr"
    if open_tag in ("dt", "dd"):
        return new_tag in ("dt", "dd")
    return False


class _TreeBuilder(HTMLParser):
    """Lenient HTML -> lightweight DOM tree."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = _Node("#root")
        self._cur = self.root

    def handle_starttag(self, tag, attrs):
        while self._cur is not self.root and _closes(self._cur.tag, tag):
            self._cur = self._cur.parent
        node = _Node(tag, attrs, self._cur)
        self._cur.children.append(node)
        if tag not in _VOID_TAGS:
            self._cur = node

    def handle_startendtag(self, tag, attrs):
        while self._cur is not self.root and _closes(self._cur.tag, tag):
            self._cur = self._cur.parent
        self._cur.children.append(_Node(tag, attrs, self._cur))

    def handle_endtag(self, tag):
        if tag in _VOID_TAGS:
            return
        node = self._cur
        while node is not self.root:
            if node.tag == tag:
                self._cur = node.parent
                return
            node = node.parent
        # stray end tag: ignore

    def handle_data(self, data):
        if data:
            self._cur.children.append(data)


def _parse_tree(html: str) -> _Node:
    builder = _TreeBuilder()
    builder.feed(html)
    builder.close()
    return builder.root


def _raw_text(node: _Node) -> str:
    """Un-normalized text of a subtree; block boundaries contribute spaces,
    inline boundaries do not (mirrors browser text flow)."""
    parts: list[str] = []
    for child in node.children:
        if isinstance(child, str):
            parts.append(child)
        elif child.tag in _IGNORE_TAGS:
            continue
        elif child.tag == "br":
            parts.append(" ")
        elif child.tag in _BLOCK_TAGS:
            parts.append(" " + _raw_text(child) + " ")
        else:
            parts.append(_raw_text(child))
    return "".join(parts)


_UNSAFE_ATTR = re.compile(r"^on", re.IGNORECASE)


def _serialize(node) -> str:
    """Sanitized markup of a node: scripting removed, text re-escaped."""
    if isinstance(node, str):
        return html_lib.escape(node, quote=False)
    if node.tag in _IGNORE_TAGS:
        return ""
    attrs = []
    for name, value in node.attrs:
        if _UNSAFE_ATTR.match(name):
            continue
        if value is not None and name.lower() in ("href", "src") and value.strip().lower().startswith("javascript:"):
            continue
        if value is None:
            attrs.append(f" {name}")
        else:
            attrs.append(f' {name}="{html_lib.escape(value)}"')
    open_tag = f"<{node.tag}{''.join(attrs)}>"
    if node.tag in _VOID_TAGS:
        return open_tag
    inner = "".join(_serialize(c) for c in node.children)
    return f"{open_tag}{inner}</{node.tag}>"


class _Segmenter:
    """Walks the tree in document order emitting leaf blocks."""

    def __init__(self):
        self.raw_blocks: list[tuple[BlockKind, str, str, tuple[str, ...]]] = []
        self.heading_stack: list[tuple[int, str]] = []
        self.table_headers: list[str] = []
        self.first_headings: list[tuple[int, str]] = []

    def _path(self) -> tuple[str, ...]:
        return tuple(text for _, text in self.heading_stack)

    def _emit(self, kind: BlockKind, raw_text: str, html: str, path: tuple[str, ...]):
        text = normalize_ws(raw_text)
        if text:
            self.raw_blocks.append((kind, text, html, path))

    def walk(self, node: _Node):
        for child in node.children:
            if isinstance(child, str):
                continue  # stray top-level text handled by container logic
            self._visit(child)

    def _visit(self, node: _Node):
        tag = node.tag
        if tag in _IGNORE_TAGS:
            return
        if tag in _HEADING_TAGS:
            level = int(tag[1])
            text = normalize_ws(_raw_text(node))
            while self.heading_stack and self.heading_stack[-1][0] >= level:
                self.heading_stack.pop()
            self._emit(BlockKind.heading, text, _serialize(node), self._path())
            if text:
                self.heading_stack.append((level, text))
                self.first_headings.append((level, text))
            return
        if tag == "pre":
            self._emit(BlockKind.code, _raw_text(node), _serialize(node), self._path())
            return
        if tag == "p":
            self._emit(BlockKind.paragraph, _raw_text(node), _serialize(node), self._path())
            return
        if tag == "tr":
            cell_texts = []
            for cell in node.children:
                if isinstance(cell, _Node) and cell.tag in ("td", "th"):
                    cell_text = normalize_ws(_raw_text(cell))
                    if cell.tag == "th" and cell_text:
                        self.table_headers.append(cell_text)
                    cell_texts.append(cell_text)
            self._emit(
                BlockKind.table_cell_group,
                " ".join(t for t in cell_texts if t),
                _serialize(node),
                self._path(),
            )
            return
        # Generic container: direct inline runs become leaf blocks, block
        # children are recursed into, preserving document order.
        run_kind = BlockKind.list_item if tag in ("li", "dt", "dd") else BlockKind.other
        pending: list = []

        def flush():
            if not pending:
                return
            raw = "".join(p if isinstance(p, str) else _raw_text(p) for p in pending)
            html = "".join(_serialize(p) for p in pending)
            self._emit(run_kind, raw, html, self._path())
            pending.clear()

        for child in node.children:
            if isinstance(child, str):
                pending.append(child)
            elif child.tag in _IGNORE_TAGS:
                continue
            elif child.tag == "br":
                pending.append(" ")
            elif child.tag in _BLOCK_TAGS or child.tag in _HEADING_TAGS:
                flush()
                self._visit(child)
            else:
                pending.append(child)
        flush()


def _find_title(root: _Node) -> str:
    stack = [root]
    while stack:
        node = stack.pop(0)
        for child in node.children:
            if isinstance(child, _Node):
                if child.tag == "title":
                    return normalize_ws(_raw_text_unfiltered(child))
                stack.append(child)
    return ""


def _raw_text_unfiltered(node: _Node) -> str:
    parts = []
    for child in node.children:
        if isinstance(child, str):
            parts.append(child)
        elif isinstance(child, _Node):
            parts.append(_raw_text_unfiltered(child))
    return "".join(parts)


def _require_absolute(url: str):
    parsed = urlparse(url)
    if not parsed.scheme or not parsed.netloc:
        raise MalformedUrl(f"url must be absolute: {url!r}")


def segment_page(
    html: str,
    url: str,
    captured_at: int,
    *,
    page_id: Optional[str] = None,
    title: Optional[str] = None,
    layout: Optional[Iterable[dict]] = None,
) -> PageSnapshot:
    """Segment raw HTML into a PageSnapshot of ordered leaf content blocks.

    `layout` optionally carries client-measured scroll offsets as
    [{"block_index": i, "scroll_offset": px}]; offsets for unmeasured blocks
    are estimated from a cumulative text-length proxy.
    """
    _require_absolute(url)
    root = _parse_tree(html)
    seg = _Segmenter()
    seg.walk(root)
    if not seg.raw_blocks:
        raise EmptyDocument(f"no text-bearing blocks in document from {url}")

    if title is None:
        title = _find_title(root)
    if not title and seg.first_headings:
        best_level = min(level for level, _ in seg.first_headings)
        title = next(text for level, text in seg.first_headings if level == best_level)

    explicit = {}
    for entry in layout or ():
        explicit[int(entry["block_index"])] = int(entry["scroll_offset"])

    blocks: list[ContentBlock] = []
    proxy = 0
    floor = 0
    for index, (kind, text, block_html, path) in enumerate(seg.raw_blocks):
        estimated = index not in explicit
        offset = proxy if estimated else explicit[index]
        offset = max(offset, floor)  # monotonic with document order
        floor = offset
        proxy += len(text) + 1
        blocks.append(
            ContentBlock(
                block_id=stable_id("blk", url, index, text),
                kind=kind,
                text=text,
                html=block_html,
                section_path=path,
                order_index=index,
                scroll_offset=offset,
                scroll_estimated=estimated,
            )
        )

    if page_id is None:
        page_id = stable_id("pg", url, captured_at)

    opening = [
        b.block_id
        for b in blocks
        if b.kind not in (BlockKind.heading, BlockKind.code)
    ][:OPENING_BLOCK_COUNT]

    return PageSnapshot(
        page_id=page_id,
        url=url,
        title=title,
        captured_at=captured_at,
        blocks=tuple(blocks),
        table_headers=tuple(seg.table_headers),
        opening_block_ids=tuple(opening),
    )


def opening_paragraphs(page: PageSnapshot) -> list[ContentBlock]:
    """The first few non-heading, non-code blocks (typical article lead)."""
    wanted = set(page.opening_block_ids)
    return [b for b in page.blocks if b.block_id in wanted]
