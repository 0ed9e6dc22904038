"""Segmentation: gold fixture walk, ordering/coverage properties, errors."""

from __future__ import annotations

from html.parser import HTMLParser

import pytest

from conftest import PAGES_DIR, segmented
from sensetable.errors import EmptyDocument, MalformedUrl
from sensetable.normalize import normalize_ws
from sensetable.page_model import BlockKind, opening_paragraphs, segment_page

H1 = "Splide vs Slick vs Swiper"

# Hand-walked gold for carousel_review.html: (kind, text, section_path).
CAROUSEL_GOLD = [
    ("heading", "Splide vs Slick vs Swiper", ()),
    ("paragraph", "Picking a carousel for a modern site is harder than it looks.", (H1,)),
    ("paragraph", "We compared Splide, Slick, and Swiper across the areas that matter to working developers.", (H1,)),
    ("paragraph", "All three ship under permissive licenses and stay actively maintained.", (H1,)),
    ("heading", "Bundle Size", (H1,)),
    ("paragraph", "Splide weighs in around 29kB minified, while Slick needs jQuery which bloats the payload.", (H1, "Bundle Size")),
    ("paragraph", "Swiper is the heaviest of the trio but remains tree-shakeable.", (H1, "Bundle Size")),
    ("heading", "Performance", (H1,)),
    ("paragraph", "Swiper leans on hardware accelerated transitions for buttery scrolling.", (H1, "Performance")),
    ("code", "import Swiper from 'swiper';", (H1, "Performance")),
    ("heading", "Accessibility", (H1,)),
    ("paragraph", "Splide ships ARIA attributes out of the box.", (H1, "Accessibility")),
    ("list_item", "Keyboard navigation works everywhere in Splide", (H1, "Accessibility")),
    ("list_item", "Screen reader support lags behind in Slick", (H1, "Accessibility")),
    ("heading", "RTL", (H1,)),
    ("paragraph", "Swiper has first class right to left rendering for Arabic and Hebrew sites.", (H1, "RTL")),
    ("heading", "Autoplay and Lazy Loading", (H1,)),
    ("paragraph", "Autoplay ships everywhere, though Swiper exposes the most knobs for it.", (H1, "Autoplay and Lazy Loading")),
    ("table_cell_group", "Library License Stars", (H1, "Autoplay and Lazy Loading")),
    ("table_cell_group", "Splide MIT 3k", (H1, "Autoplay and Lazy Loading")),
    ("table_cell_group", "Slick MIT 27k", (H1, "Autoplay and Lazy Loading")),
    ("table_cell_group", "Swiper MIT 31k", (H1, "Autoplay and Lazy Loading")),
]


def test_carousel_gold_segmentation():
    page = segmented(0)
    got = [(b.kind.value, b.text, b.section_path) for b in page.blocks]
    assert got == CAROUSEL_GOLD
    assert page.table_headers == ("Library", "License", "Stars")
    assert page.title == "Splide vs Slick vs Swiper: Which Carousel Wins in 2021?"


def test_minimal_paragraph_document():
    page = segment_page(
        "<html><head><title>T</title></head><body><p>hello world</p></body></html>",
        "https://x.test/a",
        1000,
    )
    assert len(page.blocks) == 1
    block = page.blocks[0]
    assert block.kind == BlockKind.paragraph
    assert block.text == "hello world"
    assert block.section_path == ()
    assert page.title == "T"


def test_heading_sets_section_path_for_following_blocks():
    page = segment_page(
        "<h2>Performance</h2><p>fast one</p><p>slow one</p>",
        "https://x.test/b",
        1000,
    )
    kinds = [b.kind for b in page.blocks]
    assert kinds == [BlockKind.heading, BlockKind.paragraph, BlockKind.paragraph]
    assert page.blocks[1].section_path == ("Performance",)
    assert page.blocks[2].section_path == ("Performance",)
    # no <title>, falls back to the first top-level heading
    assert page.title == "Performance"


def test_empty_document_raises():
    with pytest.raises(EmptyDocument):
        segment_page("<html><body><script>x()</script></body></html>", "https://x.test/c", 0)


def test_relative_url_rejected():
    with pytest.raises(MalformedUrl):
        segment_page("<p>ok</p>", "/relative/path", 0)


def test_segmentation_is_deterministic():
    html = (
        "<html><head><title>T</title></head><body><h2>A</h2><p>one</p>"
        "<ul><li>two</li></ul></body></html>"
    )
    a = segment_page(html, "https://x.test/d", 123)
    b = segment_page(html, "https://x.test/d", 123)
    assert a == b
    assert [blk.block_id for blk in a.blocks] == [blk.block_id for blk in b.blocks]


class _VisibleText(HTMLParser):
    """Independent visible-text extractor used as the coverage oracle."""

    SKIP = {"script", "style", "noscript", "template", "head", "title", "svg",
            "iframe", "select", "textarea"}
    BLOCK = {"address", "article", "aside", "blockquote", "body", "caption", "dd",
             "details", "div", "dl", "dt", "fieldset", "figcaption", "figure",
             "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header",
             "html", "li", "main", "nav", "ol", "p", "pre", "section", "summary",
             "table", "tbody", "td", "tfoot", "th", "thead", "tr", "ul"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_stack: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag in self.SKIP:
            self._skip_stack.append(tag)
        if tag in self.BLOCK or tag == "br":
            self.parts.append(" ")

    def handle_endtag(self, tag):
        if self._skip_stack and self._skip_stack[-1] == tag:
            self._skip_stack.pop()
        if tag in self.BLOCK:
            self.parts.append(" ")

    def handle_data(self, data):
        if not self._skip_stack:
            self.parts.append(data)

    def text(self) -> str:
        return normalize_ws("".join(self.parts))


COVERAGE_DOCS = [
    "<html><head><title>X</title><script>skip()</script></head><body>"
    "<h1>One</h1><p>alpha <b>beta</b> gamma</p><div>loose<p>inner</p>tail</div>"
    "<ul><li>first</li><li>second <ul><li>deep</li></ul></li></ul>"
    "<table><tr><th>H</th></tr><tr><td>a</td><td>b</td></tr></table></body></html>",
    "<p>unclosed paragraph<p>second<li>stray item",
    "<div><div><div>deeply<br>nested</div></div></div>",
]


@pytest.mark.parametrize("doc", COVERAGE_DOCS + [None])
def test_block_texts_reproduce_visible_text(doc):
    if doc is None:
        doc = (PAGES_DIR / "carousel_review.html").read_text(encoding="utf-8")
    oracle = _VisibleText()
    oracle.feed(doc)
    page = segment_page(doc, "https://x.test/cov", 0)
    joined = normalize_ws(" ".join(b.text for b in page.blocks))
    assert joined == oracle.text()


def test_block_invariants_on_corpus():
    for index in range(5):
        page = segmented(index)
        ids = [b.block_id for b in page.blocks]
        assert len(ids) == len(set(ids))
        offsets = [b.scroll_offset for b in page.blocks]
        assert offsets == sorted(offsets)
        assert [b.order_index for b in page.blocks] == list(range(len(page.blocks)))


def test_layout_offsets_respected():
    html = "<p>one</p><p>two</p><p>three</p>"
    page = segment_page(
        html,
        "https://x.test/layout",
        0,
        layout=[{"block_index": 0, "scroll_offset": 100}, {"block_index": 2, "scroll_offset": 900}],
    )
    assert page.blocks[0].scroll_offset == 100
    assert page.blocks[0].scroll_estimated is False
    assert page.blocks[1].scroll_estimated is True
    assert page.blocks[1].scroll_offset >= 100  # clamped monotonic
    assert page.blocks[2].scroll_offset == 900
    assert page.blocks[2].scroll_estimated is False


def test_opening_paragraphs_first_three_body_blocks():
    page = segment_page(
        "<p>a1</p><p>a2</p><p>a3</p><p>a4</p><p>a5</p>", "https://x.test/open", 0
    )
    assert [b.text for b in opening_paragraphs(page)] == ["a1", "a2", "a3"]


def test_opening_paragraphs_skip_headings_and_code():
    page = segment_page(
        "<h1>Head</h1><pre>code</pre><p>a1</p><p>a2</p><p>a3</p><p>a4</p>",
        "https://x.test/open2",
        0,
    )
    assert [b.text for b in opening_paragraphs(page)] == ["a1", "a2", "a3"]


def test_opening_paragraphs_fewer_than_limit():
    page = segment_page("<p>only</p><p>two</p>", "https://x.test/open3", 0)
    assert [b.text for b in opening_paragraphs(page)] == ["only", "two"]
