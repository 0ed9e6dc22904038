"""Shared fixtures: the annotated five-page corpus, the fixture suggester,
and the deterministic scoring trace."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from sensetable.config import EngineConfig
from sensetable.page_model import segment_page
from sensetable.session import Session

FIXTURES = Path(__file__).parent / "fixtures"
PAGES_DIR = FIXTURES / "pages"
SUGGESTIONS = FIXTURES / "suggestions.json"

# (file, page_id, url, captured_at)
CORPUS = [
    ("carousel_review.html", "p1", "https://devreviews.example/carousel-showdown", 1_600_000_000_000),
    ("splide_docs.html", "p2", "https://splide.example/docs", 1_600_000_100_000),
    ("swiper_docs.html", "p3", "https://swiper.example/api", 1_600_000_200_000),
    ("slick_guide.html", "p4", "https://slick.example/guide", 1_600_000_300_000),
    ("framework_review.html", "p5", "https://devreviews.example/framework-face-off", 1_600_000_400_000),
]


def page_payload(name: str, page_id: str, url: str, captured_at: int) -> dict:
    return {
        "page_id": page_id,
        "url": url,
        "html": (PAGES_DIR / name).read_text(encoding="utf-8"),
        "captured_at": captured_at,
    }


def corpus_payloads(count: int = len(CORPUS)) -> list[dict]:
    return [page_payload(*entry) for entry in CORPUS[:count]]


def engine_config(**overrides) -> EngineConfig:
    defaults = {"suggester_fixture": str(SUGGESTIONS)}
    defaults.update(overrides)
    return EngineConfig(**defaults)


@pytest.fixture
def config() -> EngineConfig:
    return engine_config()


@pytest.fixture
def corpus_session(config) -> Session:
    session = Session("corpus", config)
    for payload in corpus_payloads():
        session.ingest_page(payload)
    return session


@pytest.fixture
def gold() -> dict:
    return json.loads((FIXTURES / "gold_corpus.json").read_text(encoding="utf-8"))


def segmented(name_index: int):
    name, page_id, url, captured_at = CORPUS[name_index]
    html = (PAGES_DIR / name).read_text(encoding="utf-8")
    return segment_page(html, url, captured_at, page_id=page_id)


# --- the 60-event scoring trace ---------------------------------------------------
#
# Exercises every signal kind, both caps (hover 30s and dwell 25s), and every
# disqualification rule: short highlight, highlight-linked click (flagged and
# unflagged), sub-2s hover/dwell, and the 2-minute idle rule (events 13/14 sit
# inside gaps of 155s and 200s with no other activity).
#
# (kind, page_index, block_order_index, t_seconds, extra)
SCORING_EVENTS = [
    ("copy", 0, 5, 0, {}),
    ("highlight", 0, 5, 2, {"text_len": 42}),
    ("click", 0, 5, 2.2, {"highlight_linked": True}),
    ("click", 0, 8, 5, {}),
    ("highlight", 0, 11, 6, {"text_len": 4}),
    ("click", 0, 11, 6.3, {}),
    ("hover", 0, 5, 10, {"duration_s": 30}),
    ("dwell", 0, 5, 45, {"duration_s": 25}),
    ("hover", 0, 8, 75, {"duration_s": 1.5}),
    ("dwell", 0, 11, 80, {"duration_s": 1}),
    ("hover", 0, 11, 85, {"duration_s": 6}),
    ("copy", 0, 12, 95, {}),
    ("hover", 0, 15, 200, {"duration_s": 30}),
    ("dwell", 0, 15, 250, {"duration_s": 20}),
    ("copy", 0, 15, 400, {}),
    ("highlight", 0, 13, 405, {"text_len": 18}),
    ("click", 0, 13, 410, {}),
    ("hover", 0, 17, 415, {"duration_s": 8}),
    ("dwell", 0, 17, 420, {"duration_s": 10}),
    ("highlight", 0, 6, 430, {"text_len": 5}),
    ("copy", 0, 19, 440, {}),
    ("hover", 0, 19, 445, {"duration_s": 4}),
    ("dwell", 0, 20, 450, {"duration_s": 3}),
    ("click", 0, 21, 455, {}),
    ("highlight", 0, 21, 460, {"text_len": 120}),
    ("dwell", 0, 1, 465, {"duration_s": 2}),
    ("hover", 0, 2, 470, {"duration_s": 2}),
    ("copy", 1, 1, 480, {}),
    ("hover", 1, 6, 485, {"duration_s": 12}),
    ("dwell", 1, 6, 500, {"duration_s": 15}),
    ("highlight", 1, 8, 510, {"text_len": 30}),
    ("click", 1, 10, 515, {}),
    ("dwell", 1, 12, 520, {"duration_s": 8}),
    ("hover", 1, 14, 530, {"duration_s": 3.5}),
    ("copy", 1, 14, 535, {}),
    ("hover", 0, 12, 540, {"duration_s": 9}),
    ("dwell", 0, 13, 550, {"duration_s": 11}),
    ("click", 0, 12, 560, {}),
    ("highlight", 0, 12, 565, {"text_len": 64}),
    ("dwell", 0, 21, 575, {"duration_s": 6}),
    ("hover", 0, 20, 585, {"duration_s": 2.4}),
    ("copy", 0, 17, 595, {}),
    ("highlight", 0, 17, 600, {"text_len": 2}),
    ("click", 0, 17, 600.3, {}),
    ("hover", 0, 6, 610, {"duration_s": 1.9}),
    ("dwell", 0, 8, 615, {"duration_s": 0.5}),
    ("dwell", 1, 3, 625, {"duration_s": 22}),
    ("hover", 1, 3, 650, {"duration_s": 25}),
    ("click", 1, 4, 680, {}),
    ("copy", 1, 4, 685, {}),
    ("highlight", 1, 6, 690, {"text_len": 7}),
    ("dwell", 0, 5, 700, {"duration_s": 2.5}),
    ("hover", 0, 11, 710, {"duration_s": 7.2}),
    ("click", 0, 1, 720, {}),
    ("copy", 0, 2, 725, {}),
    ("dwell", 0, 2, 730, {"duration_s": 4}),
    ("hover", 0, 1, 740, {"duration_s": 5}),
    ("highlight", 0, 2, 750, {"text_len": 5}),
    ("dwell", 1, 1, 760, {"duration_s": 19}),
    ("hover", 1, 8, 790, {"duration_s": 30}),
]

TRACE_BASE_MS = 1_600_000_500_000


def scoring_event_payloads() -> list[dict]:
    pages = [segmented(0), segmented(1)]
    payloads = []
    for kind, page_index, block_index, t_s, extra in SCORING_EVENTS:
        page = pages[page_index]
        payload = {
            "kind": kind,
            "page_id": page.page_id,
            "block_id": page.blocks[block_index].block_id,
            "timestamp": TRACE_BASE_MS + int(t_s * 1000),
        }
        payload.update(extra)
        payloads.append(payload)
    return payloads


def build_scoring_trace() -> str:
    """The two carousel pages plus the sixty signal events as an NDJSON trace."""
    lines = []
    for entry in CORPUS[:2]:
        record = {"type": "page", **page_payload(*entry)}
        lines.append(json.dumps(record, sort_keys=True))
    for payload in scoring_event_payloads():
        lines.append(json.dumps({"type": "event", **payload}, sort_keys=True))
    return "\n".join(lines) + "\n"
