"""Option and criterion candidate extraction from titles, headers, and corroboration."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence

from .errors import EmptySelection, ProviderUnavailable
from .normalize import contains_word, normalize_name, normalize_ws, stable_id
from .page_model import BlockKind, PageSnapshot

OPTION = "option"
CRITERION = "criterion"

# option sources
SOURCE_TITLE_VS = "title_vs"
SOURCE_ENTITY_TITLE = "entity_title_corroboration"
SOURCE_AUTOCOMPLETE = "autocomplete_vs"
SOURCE_REPEATED = "repeated_mention"
SOURCE_MANUAL = "manual"
SOURCE_PLACEHOLDER = "placeholder"
# criterion sources
SOURCE_SECTION_HEADER = "section_header"
SOURCE_TABLE_HEADER = "table_header"
SOURCE_ENTITY = "entity"

DEFAULT_REPEATED_MENTION_THRESHOLD = 3

_ID_PREFIX = {OPTION: "opt", CRITERION: "crt"}


@dataclass
class Candidate:
    """An extracted option or criterion with provenance and normalization."""

    candidate_id: str
    kind: str  # OPTION | CRITERION
    name: str
    normalized_name: str
    sources: set[str]
    provenance: list[tuple[str, Optional[str]]]
    first_seen_at: int

    @property
    def manual(self) -> bool:
        return SOURCE_MANUAL in self.sources


def make_candidate(
    kind: str,
    name: str,
    sources: Iterable[str],
    provenance: Iterable[tuple[str, Optional[str]]] = (),
    first_seen_at: int = 0,
) -> Candidate:
    display = normalize_ws(name)
    normalized = normalize_name(display)
    if not normalized:
        raise ValueError(f"candidate name normalizes to empty: {name!r}")
    return Candidate(
        candidate_id=stable_id(_ID_PREFIX[kind], normalized),
        kind=kind,
        name=display,
        normalized_name=normalized,
        sources=set(sources),
        provenance=list(provenance),
        first_seen_at=first_seen_at,
    )


# --- "vs"-separated option mining -------------------------------------------

_VS_RE = re.compile(r"(?<![A-Za-z0-9])(?i:v\.s\.|vs\.?|versus)(?![A-Za-z0-9])")
_SUBTITLE_SEPARATORS = (":", " — ", " - ", "?")


def extract_options_from_title(title: str) -> list[str]:
    """Split a title on vs/vs./v.s./versus; the final segment is cut at the
    first subtitle separator. Returns [] when fewer than two names result."""
    segments = _VS_RE.split(title)
    if len(segments) < 2:
        return []
    last = segments[-1]
    cut = len(last)
    for sep in _SUBTITLE_SEPARATORS:
        idx = last.find(sep)
        if idx != -1:
            cut = min(cut, idx)
    segments[-1] = last[:cut]
    names = [seg.strip() for seg in segments]
    names = [n for n in names if n]
    return names if len(names) >= 2 else []


_CAP_TOKEN = r"[A-Z][A-Za-z0-9.+#-]*"
_VS_WORD = r"(?i:v\.s\.|vs\.?|versus)"
_MENTION_RE = re.compile(
    rf"((?:{_CAP_TOKEN}[ \t]){{0,3}}{_CAP_TOKEN})[ \t]+{_VS_WORD}[ \t]+((?:{_CAP_TOKEN}[ \t]){{0,3}}{_CAP_TOKEN})"
)


def extract_vs_mentions(text: str) -> list[str]:
    """Mine "X vs Y" pairs from running prose: each side must be an adjacent
    run of capitalized tokens, so sentence context does not leak in."""
    names: list[str] = []
    pos = 0
    while True:
        match = _MENTION_RE.search(text, pos)
        if not match:
            break
        for side in (match.group(1), match.group(2)):
            name = side.strip()
            if name:
                names.append(name)
        pos = match.start(2)  # allow chained "A vs B vs C"
    seen = set()
    out = []
    for n in names:
        key = normalize_name(n)
        if key and key not in seen:
            seen.add(key)
            out.append(n)
    return out


# --- entity extraction --------------------------------------------------------

class EntityProvider(Protocol):
    def extract(self, text: str) -> list[str]: ...


_STOPWORDS = frozenset(
    """a an the and or but nor so yet if then else this that these those it its is are was
    were be been being for of in on at to from by with as we you they he she i our your
    their my his her them us what which who whom how why when where not no do does did
    can could should would will shall may might must have has had having there here also
    more most less least very just than too such both each few own same other another
    into over under again once all any some only now between through during before after
    above below out off up down about against further while because until unless per
    via vs versus""".split()
)

_TOKEN_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9.+#-]*")
_VS_TOKENS = frozenset({"vs", "vs.", "v.s.", "versus"})
MAX_ENTITY_TOKENS = 4


def heuristic_entities(text: str) -> list[str]:
    """Built-in entity chunker: maximal capitalized-token runs plus frequent
    (>= 2 occurrences) short lowercase noun-like phrases."""
    matches = list(_TOKEN_RE.finditer(text))
    entities: list[str] = []

    # capitalized runs, broken by punctuation or lowercase tokens
    run: list[str] = []
    prev_end = None
    for m in matches:
        token = m.group(0)
        adjacent = prev_end is not None and text[prev_end:m.start()].strip() == ""
        capital = token[0].isupper() and token.lower() not in _VS_TOKENS
        if not capital or (run and not adjacent):
            _flush_run(run, entities)
        if capital:
            run.append(token)
        prev_end = m.end()
    _flush_run(run, entities)

    # frequent lowercase phrases (unigrams and bigrams)
    lower_tokens: list[tuple[str, int]] = []  # (token, position)
    for idx, m in enumerate(matches):
        token = m.group(0)
        if token.islower() and token not in _STOPWORDS and len(token) > 2:
            lower_tokens.append((token, idx))
    counts: dict[str, int] = {}
    first_pos: dict[str, int] = {}
    for token, idx in lower_tokens:
        counts[token] = counts.get(token, 0) + 1
        first_pos.setdefault(token, idx)
    for (t1, i1), (t2, i2) in zip(lower_tokens, lower_tokens[1:]):
        if i2 == i1 + 1:
            phrase = f"{t1} {t2}"
            counts[phrase] = counts.get(phrase, 0) + 1
            first_pos.setdefault(phrase, i1)
    frequent = [p for p, c in counts.items() if c >= 2]
    frequent.sort(key=lambda p: (first_pos[p], p))
    entities.extend(frequent)

    seen: set[str] = set()
    out: list[str] = []
    for name in entities:
        key = normalize_name(name)
        if key and key not in seen:
            seen.add(key)
            out.append(name)
    return out


def _flush_run(run: list[str], entities: list[str]):
    if not run:
        return
    if len(run) <= MAX_ENTITY_TOKENS:
        if len(run) > 1 or run[0].lower() not in _STOPWORDS:
            entities.append(" ".join(run))
    run.clear()


def extract_entities(text: str, provider: Optional[EntityProvider] = None) -> list[str]:
    """Candidate noun phrases via the configured provider, falling back to the
    built-in heuristic chunker when the provider is unavailable."""
    if not text:
        return []
    if provider is not None:
        try:
            return list(provider.extract(text))
        except ProviderUnavailable:
            pass
    return heuristic_entities(text)


# --- alternatives suggester (the "[name] vs" autocomplete technique) ----------

class AlternativesSuggester(Protocol):
    def suggest(self, name: str) -> list[str]: ...


class FixtureSuggester:
    """File- or dict-backed suggester: a map of normalized name -> alternatives."""

    def __init__(self, mapping: dict[str, list[str]]):
        self._mapping = {normalize_name(k): list(v) for k, v in mapping.items()}

    @classmethod
    def from_file(cls, path: str) -> "FixtureSuggester":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    def suggest(self, name: str) -> list[str]:
        return list(self._mapping.get(normalize_name(name), []))


class NullSuggester:
    def suggest(self, name: str) -> list[str]:
        return []


def corroborate_option(
    entity: str,
    session_pages: Sequence[PageSnapshot],
    suggester: Optional[AlternativesSuggester],
    current_page: PageSnapshot,
    known_options: Iterable[str] = (),
    repeated_mention_threshold: int = DEFAULT_REPEATED_MENTION_THRESHOLD,
) -> tuple[bool, set[str]]:
    """Decide whether an entity is an option: cross-page title mention,
    autocomplete alternatives against known options, or repeated mention
    in the current page. Suggester failures degrade to the other tests."""
    normalized = normalize_name(entity)
    if not normalized:
        return False, set()
    sources: set[str] = set()

    for page in session_pages:
        if page.page_id == current_page.page_id:
            continue
        if contains_word(normalize_name(page.title), normalized):
            sources.add(SOURCE_ENTITY_TITLE)
            break

    known = [k for k in known_options if normalize_name(k) != normalized]
    if suggester is not None and known:
        try:
            suggested = {normalize_name(s) for s in suggester.suggest(entity)}
            if any(normalize_name(k) in suggested for k in known):
                sources.add(SOURCE_AUTOCOMPLETE)
            else:
                for k in known:
                    if normalized in {normalize_name(s) for s in suggester.suggest(k)}:
                        sources.add(SOURCE_AUTOCOMPLETE)
                        break
        except ProviderUnavailable:
            pass

    mentions = sum(
        1 for block in current_page.blocks if contains_word(normalize_name(block.text), normalized)
    )
    if mentions >= repeated_mention_threshold:
        sources.add(SOURCE_REPEATED)

    return bool(sources), sources


# --- criteria ------------------------------------------------------------------

_CLAUSE_SPLIT_RE = re.compile(r"[:;,?]|\s+(?:and|or|&)\s+|\s+[—–-]\s+")


def _split_clauses(header: str) -> list[str]:
    return [part.strip() for part in _CLAUSE_SPLIT_RE.split(header) if part.strip()]


def extract_criteria(
    page: PageSnapshot,
    known_option_names: Iterable[str] = (),
    provider: Optional[EntityProvider] = None,
) -> list[Candidate]:
    """One candidate per distinct section header and table header; multi-clause
    headers are split and long clauses go through entity extraction; option
    names are excluded."""
    option_norms = {normalize_name(n) for n in known_option_names}
    title_norm = normalize_name(page.title)
    seen: set[str] = set()
    out: list[Candidate] = []

    def consider(header: str, base_source: str, block_id: Optional[str]):
        if not header or _VS_RE.search(header):
            return  # comparison headers carry options, not criteria
        parts = _split_clauses(header)
        names: list[tuple[str, bool]] = []  # (name, came from entity extraction)
        for part in parts:
            if len(part.split()) <= MAX_ENTITY_TOKENS:
                names.append((part, len(parts) > 1))
            else:
                names.extend((n, True) for n in extract_entities(part, provider))
        for name, extracted in names:
            normalized = normalize_name(name)
            if not normalized or normalized == title_norm:
                continue
            if normalized in option_norms or normalized in seen:
                continue
            seen.add(normalized)
            sources = {base_source}
            if extracted:
                sources.add(SOURCE_ENTITY)
            out.append(
                make_candidate(
                    CRITERION,
                    name,
                    sources,
                    provenance=[(page.page_id, block_id)],
                    first_seen_at=page.captured_at,
                )
            )

    for block in page.blocks:
        if block.kind == BlockKind.heading:
            consider(block.text, SOURCE_SECTION_HEADER, block.block_id)
    for header in page.table_headers:
        consider(header, SOURCE_TABLE_HEADER, None)
    return out


# --- dedup and manual capture ----------------------------------------------------

def dedupe_candidates(candidates: Sequence[Candidate]) -> list[Candidate]:
    """Merge candidates sharing a normalized name: earliest first_seen_at wins
    the display name and id; sources and provenance are unioned."""
    merged: dict[tuple[str, str], Candidate] = {}
    order: list[tuple[str, str]] = []
    for cand in candidates:
        key = (cand.kind, cand.normalized_name)
        existing = merged.get(key)
        if existing is None:
            merged[key] = Candidate(
                candidate_id=cand.candidate_id,
                kind=cand.kind,
                name=cand.name,
                normalized_name=cand.normalized_name,
                sources=set(cand.sources),
                provenance=list(cand.provenance),
                first_seen_at=cand.first_seen_at,
            )
            order.append(key)
            continue
        if cand.first_seen_at < existing.first_seen_at:
            existing.name = cand.name
            existing.candidate_id = cand.candidate_id
            existing.first_seen_at = cand.first_seen_at
        existing.sources |= cand.sources
        for prov in cand.provenance:
            if prov not in existing.provenance:
                existing.provenance.append(prov)
    return [merged[key] for key in order]


def manual_capture(
    text: str,
    kind: str,
    provenance: tuple[str, Optional[str]],
    first_seen_at: int = 0,
) -> Candidate:
    """A user-selected option/criterion; never auto-deleted by later passes."""
    trimmed = normalize_ws(text)
    if not trimmed:
        raise EmptySelection("manual capture requires non-empty text")
    return make_candidate(
        kind, trimmed, {SOURCE_MANUAL}, provenance=[provenance], first_seen_at=first_seen_at
    )
