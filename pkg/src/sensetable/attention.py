"""Behavioral-signal ledger: qualification, scoring, block association, and
per-criterion attention aggregation.

Scoring model: copy 40, highlight 20, click 20, hover 0.5/s capped at 10,
dwell 0.2/s capped at 4, per triggering. A criterion's attention is the sum
of qualified triggering scores over blocks associated with it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

from .errors import MalformedEvent, UnqualifiedEvent
from .extraction import Candidate
from .normalize import contains_word, normalize_name, stable_id
from .page_model import ContentBlock, PageSnapshot
from .table import EvidenceSnippet

COPY_SCORE = 40.0
HIGHLIGHT_SCORE = 20.0
CLICK_SCORE = 20.0
HOVER_RATE = 0.5
HOVER_CAP = 10.0
DWELL_RATE = 0.2
DWELL_CAP = 4.0

MIN_HIGHLIGHT_CHARS = 5
MIN_ACTIVE_SECONDS = 2.0
IDLE_THRESHOLD_S = 120.0
HIGHLIGHT_CLICK_WINDOW_MS = 500

QUALIFIED = "qualified"
DISQUALIFIED = "disqualified"


class SignalKind(str, Enum):
    copy = "copy"
    highlight = "highlight"
    click = "click"
    hover = "hover"
    dwell = "dwell"


_TIMED_KINDS = (SignalKind.hover, SignalKind.dwell)


@dataclass
class SignalEvent:
    event_id: str
    kind: SignalKind
    page_id: str
    block_id: str
    timestamp: int  # ms since epoch
    duration_s: Optional[float] = None  # hover/dwell
    text_len: Optional[int] = None  # highlight
    highlight_linked: bool = False  # client-tagged selection clicks
    qualification: str = QUALIFIED
    reason: Optional[str] = None
    score: float = 0.0

    @property
    def end_ms(self) -> int:
        if self.kind in _TIMED_KINDS and self.duration_s is not None:
            return self.timestamp + int(self.duration_s * 1000)
        return self.timestamp


def make_event(payload: Mapping, sequence: int = 0) -> SignalEvent:
    """Validate a wire payload and build the event; ids are deterministic."""
    try:
        kind = SignalKind(payload["kind"])
        page_id = str(payload["page_id"])
        block_id = str(payload["block_id"])
        timestamp = int(payload["timestamp"])
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedEvent(f"missing or invalid field: {exc}") from exc
    duration_s = payload.get("duration_s")
    text_len = payload.get("text_len")
    if kind in _TIMED_KINDS:
        if duration_s is None:
            raise MalformedEvent(f"{kind.value} event requires duration_s")
        duration_s = float(duration_s)
        if duration_s < 0:
            raise MalformedEvent("duration_s must be >= 0")
    else:
        duration_s = None
    if kind == SignalKind.highlight:
        if text_len is None:
            raise MalformedEvent("highlight event requires text_len")
        text_len = int(text_len)
    else:
        text_len = None
    return SignalEvent(
        event_id=payload.get("event_id")
        or stable_id("evt", kind.value, page_id, block_id, timestamp, sequence),
        kind=kind,
        page_id=page_id,
        block_id=block_id,
        timestamp=timestamp,
        duration_s=duration_s,
        text_len=text_len,
        highlight_linked=bool(payload.get("highlight_linked", False)),
    )


@dataclass
class SignalLedger:
    """Append-only set of signal triggerings; qualification is re-derived
    from the full ledger on every recomputation epoch."""

    events: list[SignalEvent] = field(default_factory=list)
    idle_threshold_s: float = IDLE_THRESHOLD_S
    last_activity_at: int = 0

    def append(self, event: SignalEvent) -> None:
        self.events.append(event)
        self.last_activity_at = max(self.last_activity_at, event.timestamp)


def _raw_score(event: SignalEvent) -> float:
    if event.kind == SignalKind.copy:
        return COPY_SCORE
    if event.kind == SignalKind.highlight:
        return HIGHLIGHT_SCORE
    if event.kind == SignalKind.click:
        return CLICK_SCORE
    if event.kind == SignalKind.hover:
        return min(HOVER_RATE * (event.duration_s or 0.0), HOVER_CAP)
    return min(DWELL_RATE * (event.duration_s or 0.0), DWELL_CAP)


def score(event: SignalEvent) -> float:
    if event.qualification != QUALIFIED:
        raise UnqualifiedEvent(f"{event.event_id}: {event.reason}")
    return _raw_score(event)


def _idle_overlap(event: SignalEvent, others: Sequence[SignalEvent], idle_ms: float,
                  lo: int, hi: int) -> bool:
    """True when the event's interval intersects a gap of >= idle_ms with no
    activity. Every *other* event's timestamp counts as activity; the
    evaluated event cannot vouch for itself."""
    points = sorted({lo, hi, *(o.timestamp for o in others)})
    start, end = event.timestamp, event.end_ms
    for a, b in zip(points, points[1:]):
        if b - a >= idle_ms and end > a and start < b:
            return True
    return False


def qualify_all(events: Sequence[SignalEvent], idle_threshold_s: float = IDLE_THRESHOLD_S) -> None:
    """(Re-)derive qualification and score for every event in the ledger."""
    if not events:
        return
    ordered = sorted(events, key=lambda e: (e.timestamp, e.event_id))
    lo = min(e.timestamp for e in ordered)
    hi = max(e.end_ms for e in ordered)
    idle_ms = idle_threshold_s * 1000.0
    highlights = [e for e in ordered if e.kind == SignalKind.highlight]
    for event in ordered:
        verdict, reason = QUALIFIED, None
        if event.kind == SignalKind.highlight and (event.text_len or 0) < MIN_HIGHLIGHT_CHARS:
            verdict, reason = DISQUALIFIED, "min_length"
        elif event.kind == SignalKind.click:
            linked = event.highlight_linked or any(
                h.page_id == event.page_id
                and h.block_id == event.block_id
                and abs(h.timestamp - event.timestamp) <= HIGHLIGHT_CLICK_WINDOW_MS
                for h in highlights
            )
            if linked:
                verdict, reason = DISQUALIFIED, "highlight_linked"
        elif event.kind in _TIMED_KINDS:
            if (event.duration_s or 0.0) < MIN_ACTIVE_SECONDS:
                verdict, reason = DISQUALIFIED, "min_duration"
            elif _idle_overlap(event, [o for o in ordered if o is not event], idle_ms, lo, hi):
                verdict, reason = DISQUALIFIED, "idle"
        event.qualification = verdict
        event.reason = reason
        event.score = _raw_score(event) if verdict == QUALIFIED else 0.0


def qualify(event: SignalEvent, ledger: SignalLedger) -> SignalEvent:
    """Qualify a single event in the context of the ledger."""
    pool = list(ledger.events)
    if event not in pool:
        pool.append(event)
    qualify_all(pool, ledger.idle_threshold_s)
    return event


# --- block association ----------------------------------------------------------

ASSOC_VERBATIM = "verbatim"
ASSOC_SECTION_HEADER = "section_header"
ASSOC_PAGE_TITLE = "page_title"
ASSOC_PLACEHOLDER = "placeholder_option"


@dataclass
class BlockAssociation:
    page_id: str
    block_id: str
    option_ids: list[str]
    criterion_ids: list[str]
    source: str


def _match_tiers(block: ContentBlock, page: PageSnapshot, candidates: Sequence[Candidate]):
    """Tiered matching: verbatim text mention, then section headers above the
    block, then the page title. The first non-empty tier wins."""
    text_norm = normalize_name(block.text)
    section_norms = [normalize_name(h) for h in block.section_path]
    title_norm = normalize_name(page.title)
    tiers = (
        (ASSOC_VERBATIM, lambda c: contains_word(text_norm, c.normalized_name)),
        (ASSOC_SECTION_HEADER, lambda c: any(contains_word(h, c.normalized_name) for h in section_norms)),
        (ASSOC_PAGE_TITLE, lambda c: contains_word(title_norm, c.normalized_name)),
    )
    for tier_name, predicate in tiers:
        matched = [c.candidate_id for c in candidates if predicate(c)]
        if matched:
            return tier_name, matched
    return None, []


def associate_block(
    block: ContentBlock,
    page: PageSnapshot,
    options: Sequence[Candidate],
    criteria: Sequence[Candidate],
    placeholder_option_id: Optional[str] = None,
) -> BlockAssociation:
    """Attach options and criteria to a block; when no option matches at any
    tier the page-title placeholder option is referenced."""
    option_tier, option_ids = _match_tiers(block, page, options)
    _, criterion_ids = _match_tiers(block, page, criteria)
    source = option_tier
    if not option_ids:
        source = ASSOC_PLACEHOLDER
        if placeholder_option_id is not None:
            option_ids = [placeholder_option_id]
    return BlockAssociation(
        page_id=page.page_id,
        block_id=block.block_id,
        option_ids=option_ids,
        criterion_ids=criterion_ids,
        source=source or ASSOC_PLACEHOLDER,
    )


# --- aggregation -----------------------------------------------------------------

@dataclass
class CriterionAttention:
    criterion_id: str
    score: float
    last_updated: int


def accumulate(
    events: Sequence[SignalEvent],
    associations: Mapping[tuple[str, str], BlockAssociation],
    criteria: Sequence[Candidate],
) -> list[CriterionAttention]:
    """Sum qualified triggering scores into per-criterion attention; criteria
    with no events score 0. Invariant under permutation of the ledger."""
    totals = {c.candidate_id: 0.0 for c in criteria}
    updated = {c.candidate_id: 0 for c in criteria}
    for event in sorted(events, key=lambda e: (e.timestamp, e.event_id)):
        if event.qualification != QUALIFIED:
            continue
        assoc = associations.get((event.page_id, event.block_id))
        if assoc is None:
            continue
        for criterion_id in assoc.criterion_ids:
            if criterion_id in totals:
                totals[criterion_id] += event.score
                updated[criterion_id] = max(updated[criterion_id], event.timestamp)
    return [
        CriterionAttention(criterion_id=cid, score=totals[cid], last_updated=updated[cid])
        for cid in totals
    ]


def capture_evidence(
    event: SignalEvent,
    block: ContentBlock,
    page: PageSnapshot,
    existing: Optional[Mapping[tuple[str, str], EvidenceSnippet]] = None,
) -> EvidenceSnippet:
    """Collect the target block as an evidence snippet on a qualified
    triggering; one snippet per block, reused on later triggerings."""
    if event.qualification != QUALIFIED:
        raise UnqualifiedEvent(f"cannot capture evidence for {event.event_id}: {event.reason}")
    key = (page.page_id, block.block_id)
    if existing and key in existing:
        return existing[key]
    return EvidenceSnippet(
        snippet_id=stable_id("snip", page.page_id, block.block_id),
        page_id=page.page_id,
        block_id=block.block_id,
        html=block.html,
        text=block.text,
        url=page.url,
        scroll_offset=block.scroll_offset,
        captured_at=event.timestamp,
        scroll_estimated=block.scroll_estimated,
    )
