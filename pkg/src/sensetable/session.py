"""Event-sourced session: the current state is a pure fold of page ingests,
signal events, and user actions in log order. Every revision recomputes the
extraction -> qualification -> association -> attention -> grouping -> ranking
pipeline from the immutable input log, so late discoveries retroactively
reshape the whole table."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from . import attention, grouping, table
from .attention import (
    BlockAssociation,
    SignalEvent,
    SignalLedger,
    associate_block,
    accumulate,
    capture_evidence,
    make_event,
    qualify_all,
)
from .config import EngineConfig
from .errors import (
    CorruptLog,
    EmptySelection,
    InvalidCount,
    InvalidPartition,
    MalformedEvent,
    ProviderUnavailable,
    SchemaViolation,
    TraceParseError,
    UnknownGroup,
    UnknownSession,
    UnknownSnippet,
    UnknownTarget,
)
from .extraction import (
    CRITERION,
    OPTION,
    SOURCE_MANUAL,
    SOURCE_PLACEHOLDER,
    SOURCE_TITLE_VS,
    Candidate,
    dedupe_candidates,
    extract_criteria,
    extract_entities,
    extract_options_from_title,
    extract_vs_mentions,
    corroborate_option,
    make_candidate,
)
from .grouping import CriterionGroup, GroupingOverrides, embed_criterion, propose_groups
from .normalize import normalize_name, normalize_ws, stable_id
from .page_model import PageSnapshot, opening_paragraphs, segment_page
from .table import (
    EvidenceSnippet,
    Rating,
    RankingState,
    rank_criteria,
    visible_slice,
)

SCHEMA_VERSION = 1

log = logging.getLogger(__name__)

ACTION_KINDS = {
    "pin", "unpin", "reorder", "merge", "split", "rename", "delete",
    "set_rating", "move_snippet", "set_visible_count", "manual_capture",
}


@dataclass
class _ActionFold:
    """Everything the action log contributes to one recomputation epoch."""

    renames: dict[str, str] = field(default_factory=dict)
    rename_idx: dict[tuple[str, str], int] = field(default_factory=dict)
    label_overrides: dict[str, str] = field(default_factory=dict)
    deletes: dict[tuple[str, str], int] = field(default_factory=dict)
    manual: list[tuple[int, dict]] = field(default_factory=list)
    pinned: list[str] = field(default_factory=list)
    visible_count: Optional[int] = None
    ratings: dict[str, str] = field(default_factory=dict)
    moves: dict[str, tuple[str, str]] = field(default_factory=dict)
    overrides: GroupingOverrides = field(default_factory=GroupingOverrides)


@dataclass
class _Derived:
    options: list[Candidate] = field(default_factory=list)
    criteria: list[Candidate] = field(default_factory=list)
    aliases: dict[str, str] = field(default_factory=dict)
    associations: dict[tuple[str, str], BlockAssociation] = field(default_factory=dict)
    attentions: dict[str, float] = field(default_factory=dict)
    option_attentions: dict[str, float] = field(default_factory=dict)
    snippets: dict[str, EvidenceSnippet] = field(default_factory=dict)  # by snippet_id
    snippets_by_block: dict[tuple[str, str], EvidenceSnippet] = field(default_factory=dict)
    vectors: dict = field(default_factory=dict)
    groups: list[CriterionGroup] = field(default_factory=list)
    group_of: dict[str, str] = field(default_factory=dict)  # criterion -> group
    ranking: RankingState = field(default_factory=RankingState)
    ranked: list[str] = field(default_factory=list)
    cells: dict[tuple[str, str], list[str]] = field(default_factory=dict)
    overlooked: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    grouping_stale: bool = False


class Session:
    """Single-writer session; callers serialize access (the service holds one
    lock per session)."""

    def __init__(
        self,
        session_id: str,
        config: Optional[EngineConfig] = None,
        store: Optional["SessionStore"] = None,
    ):
        self.session_id = session_id
        self.config = config or EngineConfig()
        self.embedder = self.config.build_embedder()
        self.suggester = self.config.build_suggester()
        self.entity_provider = None  # built-in heuristic chunker
        self.store = store
        self.records: list[dict] = []
        self.ledger = SignalLedger(idle_threshold_s=self.config.idle_threshold_s)
        self._pages: dict[str, PageSnapshot] = {}
        self._derived = _Derived()
        self._dirty = False

    # --- revision / log -----------------------------------------------------

    @property
    def revision(self) -> int:
        return len(self.records)

    def _append(self, record: dict) -> int:
        self.records.append(record)
        if self.store is not None:
            self.store.append_record(self.session_id, record)
            if self.revision % self.config.snapshot_every == 0:
                self.store.write_snapshot(self.session_id, self.state_snapshot())
        self._dirty = True
        return self.revision

    def _ensure(self) -> None:
        if self._dirty:
            self._recompute()
            self._dirty = False

    # --- ingestion ------------------------------------------------------------

    def ingest_page(self, payload: dict) -> int:
        try:
            url = payload["url"]
            html = payload["html"]
            captured_at = int(payload["captured_at"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"page payload: {exc}") from exc
        snapshot = segment_page(
            html,
            url,
            captured_at,
            page_id=payload.get("page_id"),
            title=payload.get("title"),
            layout=payload.get("layout"),
        )
        record = {
            "type": "page",
            "page_id": snapshot.page_id,
            "url": url,
            "title": payload.get("title"),
            "html": html,
            "captured_at": captured_at,
            "layout": payload.get("layout"),
        }
        self._pages[snapshot.page_id] = snapshot
        return self._append(record)

    def ingest_events(self, batch: Iterable[dict]) -> tuple[int, list[dict]]:
        """Apply valid events, reject invalid ones individually."""
        rejected: list[dict] = []
        for index, payload in enumerate(batch):
            try:
                event = make_event(payload, sequence=len(self.records))
            except MalformedEvent as exc:
                rejected.append({"index": index, "reason": str(exc)})
                continue
            record = {
                "type": "event",
                "event_id": event.event_id,
                "kind": event.kind.value,
                "page_id": event.page_id,
                "block_id": event.block_id,
                "timestamp": event.timestamp,
            }
            if event.duration_s is not None:
                record["duration_s"] = event.duration_s
            if event.text_len is not None:
                record["text_len"] = event.text_len
            if event.highlight_linked:
                record["highlight_linked"] = True
            self.ledger.append(event)
            self._append(record)
        return self.revision, rejected

    # --- actions -------------------------------------------------------------

    def apply_action(self, action: dict) -> int:
        try:
            kind = action["kind"]
            payload = dict(action.get("payload") or {})
            timestamp = int(action.get("timestamp", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"action payload: {exc}") from exc
        if kind not in ACTION_KINDS:
            raise SchemaViolation(f"unknown action kind: {kind}")
        payload = self._validate_action(kind, payload)
        record = {
            "type": "action",
            "action_id": stable_id("act", kind, timestamp, len(self.records)),
            "kind": kind,
            "payload": payload,
            "timestamp": timestamp,
        }
        return self._append(record)

    def _validate_action(self, kind: str, payload: dict) -> dict:
        """Validate against current state; enrich payloads whose fold semantics
        depend on state at issue time (merge members, delete names)."""
        self._ensure()
        d = self._derived
        groups_by_id = {g.group_id: g for g in d.groups}
        if kind in ("pin", "unpin"):
            if payload.get("group_id") not in groups_by_id:
                raise UnknownGroup(str(payload.get("group_id")))
        elif kind == "reorder":
            if payload.get("group_id") not in groups_by_id:
                raise UnknownGroup(str(payload.get("group_id")))
            try:
                payload["new_index"] = int(payload["new_index"])
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaViolation(f"reorder requires new_index: {exc}") from exc
        elif kind == "merge":
            a = groups_by_id.get(payload.get("group_a"))
            b = groups_by_id.get(payload.get("group_b"))
            if a is None or b is None:
                raise UnknownGroup(f"{payload.get('group_a')}, {payload.get('group_b')}")
            payload["members_a"] = list(a.member_criterion_ids)
            payload["members_b"] = list(b.member_criterion_ids)
        elif kind == "split":
            group = groups_by_id.get(payload.get("group_id"))
            if group is None:
                raise UnknownGroup(str(payload.get("group_id")))
            partition = payload.get("partition")
            if not isinstance(partition, list):
                raise SchemaViolation("split requires partition: list of member-id lists")
            grouping.manual_split(group, partition, GroupingOverrides())  # validates
        elif kind == "rename":
            target_kind = payload.get("target_kind")
            target_id = payload.get("target_id")
            name = normalize_ws(str(payload.get("name") or ""))
            if not name or not normalize_name(name):
                raise SchemaViolation("rename requires a non-empty name")
            payload["name"] = name
            if target_kind == "group":
                if target_id not in groups_by_id:
                    raise UnknownGroup(str(target_id))
            elif target_kind in (OPTION, CRITERION):
                if self._find_candidate(target_kind, target_id) is None:
                    raise UnknownTarget(f"{target_kind} {target_id}")
            else:
                raise SchemaViolation(f"rename target_kind must be option|criterion|group")
        elif kind == "delete":
            target_kind = payload.get("target_kind")
            if target_kind not in (OPTION, CRITERION):
                raise SchemaViolation("delete target_kind must be option|criterion")
            cand = self._find_candidate(target_kind, payload.get("target_id"))
            if cand is None:
                raise UnknownTarget(f"{target_kind} {payload.get('target_id')}")
            payload["normalized_name"] = cand.normalized_name
        elif kind == "set_rating":
            if payload.get("snippet_id") not in d.snippets:
                raise UnknownSnippet(str(payload.get("snippet_id")))
            try:
                Rating(payload.get("rating"))
            except ValueError as exc:
                raise SchemaViolation(f"invalid rating: {payload.get('rating')}") from exc
        elif kind == "move_snippet":
            if payload.get("snippet_id") not in d.snippets:
                raise UnknownSnippet(str(payload.get("snippet_id")))
            if payload.get("option_id") not in {c.candidate_id for c in d.options}:
                raise UnknownTarget(f"option {payload.get('option_id')}")
            if payload.get("group_id") not in groups_by_id:
                raise UnknownGroup(str(payload.get("group_id")))
        elif kind == "set_visible_count":
            try:
                count = int(payload["count"])
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaViolation(f"set_visible_count requires count: {exc}") from exc
            if count < 1:
                raise InvalidCount(f"visible count must be >= 1, got {count}")
            payload["count"] = count
        elif kind == "manual_capture":
            if not normalize_ws(str(payload.get("text") or "")):
                raise EmptySelection("manual capture requires non-empty text")
            if payload.get("capture_kind") not in (OPTION, CRITERION):
                raise SchemaViolation("manual_capture capture_kind must be option|criterion")
        return payload

    def _find_candidate(self, kind: str, target_id: Optional[str]) -> Optional[Candidate]:
        self._ensure()
        d = self._derived
        resolved = d.aliases.get(target_id or "", target_id)
        pool = d.options if kind == OPTION else d.criteria
        for cand in pool:
            if cand.candidate_id == resolved:
                return cand
        return None

    # --- the fold --------------------------------------------------------------

    def _fold_actions(self) -> _ActionFold:
        fold = _ActionFold()
        for index, record in enumerate(self.records):
            if record["type"] != "action":
                continue
            kind = record["kind"]
            payload = record["payload"]
            if kind == "pin":
                gid = payload["group_id"]
                if gid not in fold.pinned:
                    fold.pinned.append(gid)
            elif kind == "unpin":
                gid = payload["group_id"]
                if gid in fold.pinned:
                    fold.pinned.remove(gid)
            elif kind == "reorder":
                gid = payload["group_id"]
                if gid in fold.pinned:
                    fold.pinned.remove(gid)
                idx = max(0, min(payload["new_index"], len(fold.pinned)))
                fold.pinned.insert(idx, gid)
            elif kind == "merge":
                for a in payload["members_a"]:
                    for b in payload["members_b"]:
                        fold.overrides.force(a, b)
            elif kind == "split":
                partition = payload["partition"]
                for i, part_a in enumerate(partition):
                    for part_b in partition[i + 1 :]:
                        for a in part_a:
                            for b in part_b:
                                fold.overrides.forbid(a, b)
            elif kind == "rename":
                if payload["target_kind"] == "group":
                    fold.label_overrides[payload["target_id"]] = payload["name"]
                else:
                    fold.renames[payload["target_id"]] = payload["name"]
                    key = (payload["target_kind"], normalize_name(payload["name"]))
                    fold.rename_idx[key] = index
            elif kind == "delete":
                key = (payload["target_kind"], payload["normalized_name"])
                fold.deletes[key] = index
            elif kind == "set_rating":
                fold.ratings[payload["snippet_id"]] = payload["rating"]
            elif kind == "move_snippet":
                fold.moves[payload["snippet_id"]] = (payload["option_id"], payload["group_id"])
            elif kind == "set_visible_count":
                fold.visible_count = payload["count"]
            elif kind == "manual_capture":
                fold.manual.append((index, {**payload, "timestamp": record["timestamp"]}))
        return fold

    def _extract_candidates(self, fold: _ActionFold) -> tuple[list[Candidate], dict[str, str]]:
        pages = list(self._pages.values())
        raw: list[Candidate] = []
        known_names: list[str] = []
        known_norms: set[str] = set()

        def add_option(name: str, sources: set[str], prov: tuple, seen: int) -> None:
            try:
                cand = make_candidate(OPTION, name, sources, [prov], seen)
            except ValueError:
                return
            raw.append(cand)
            if cand.normalized_name not in known_norms:
                known_norms.add(cand.normalized_name)
                known_names.append(cand.name)

        # options: "vs"-separated names in titles and opening paragraphs
        for page in pages:
            for name in extract_options_from_title(page.title):
                add_option(name, {SOURCE_TITLE_VS}, (page.page_id, None), page.captured_at)
            for block in opening_paragraphs(page):
                for name in extract_vs_mentions(block.text):
                    add_option(name, {SOURCE_TITLE_VS}, (page.page_id, block.block_id), page.captured_at)

        # options: header entities corroborated across pages / suggester / mentions
        for page in pages:
            header_texts = [page.title]
            header_texts += [b.text for b in page.blocks if b.kind.value == "heading"]
            header_texts += list(page.table_headers)
            entities: list[str] = []
            seen_entities: set[str] = set()
            for header in header_texts:
                for entity in extract_entities(header, self.entity_provider):
                    key = normalize_name(entity)
                    if key and key not in seen_entities:
                        seen_entities.add(key)
                        entities.append(entity)
            for entity in entities:
                ok, sources = corroborate_option(
                    entity,
                    pages,
                    self.suggester,
                    page,
                    known_names,
                    self.config.repeated_mention_threshold,
                )
                if ok:
                    add_option(entity, sources, (page.page_id, None), page.captured_at)

        # criteria from section and table headers
        for page in pages:
            raw.extend(extract_criteria(page, known_names, self.entity_provider))

        # manual captures, in action order
        manual_idx: dict[tuple[str, str], int] = {}
        for index, payload in fold.manual:
            try:
                cand = make_candidate(
                    payload["capture_kind"],
                    payload["text"],
                    {SOURCE_MANUAL},
                    [(payload.get("page_id", ""), payload.get("block_id"))],
                    payload["timestamp"],
                )
            except ValueError:
                continue
            raw.append(cand)
            key = (cand.kind, cand.normalized_name)
            manual_idx[key] = max(manual_idx.get(key, -1), index)

        merged = dedupe_candidates(raw)

        # display renames (by id), then re-dedupe so collisions merge
        for cand in merged:
            if cand.candidate_id in fold.renames:
                cand.name = fold.renames[cand.candidate_id]
                cand.normalized_name = normalize_name(cand.name)
        pre_ids = [(c.candidate_id, c.kind, c.normalized_name) for c in merged]
        final = dedupe_candidates(merged)
        by_key = {(c.kind, c.normalized_name): c for c in final}
        aliases = {cid: by_key[(kind, norm)].candidate_id for cid, kind, norm in pre_ids}

        # tombstones: deletion wins unless a later user action re-adds the name
        survivors: list[Candidate] = []
        for cand in final:
            key = (cand.kind, cand.normalized_name)
            delete_at = fold.deletes.get(key)
            if delete_at is not None:
                revived_at = max(manual_idx.get(key, -1), fold.rename_idx.get(key, -1))
                if revived_at <= delete_at:
                    continue
            survivors.append(cand)
        return survivors, aliases

    def _recompute(self) -> None:
        fold = self._fold_actions()
        d = _Derived()
        candidates, d.aliases = self._extract_candidates(fold)
        d.options = [c for c in candidates if c.kind == OPTION]
        d.criteria = [c for c in candidates if c.kind == CRITERION]

        qualify_all(self.ledger.events, self.config.idle_threshold_s)

        # associations; placeholder options appear on pages where some block
        # has no option at any tier
        pages = list(self._pages.values())
        matchable = list(d.options)
        placeholders: dict[str, Optional[str]] = {}
        for page in pages:
            needs_placeholder = any(
                not associate_block(block, page, matchable, []).option_ids
                for block in page.blocks
            )
            placeholder_id = None
            if needs_placeholder and normalize_name(page.title):
                key = (OPTION, normalize_name(page.title))
                if fold.deletes.get(key) is None:
                    existing = next(
                        (c for c in d.options if c.normalized_name == key[1]), None
                    )
                    if existing is None:
                        cand = make_candidate(
                            OPTION,
                            page.title,
                            {SOURCE_PLACEHOLDER},
                            [(page.page_id, None)],
                            page.captured_at,
                        )
                        d.options.append(cand)
                        existing = cand
                    placeholder_id = existing.candidate_id
            placeholders[page.page_id] = placeholder_id
        for page in pages:
            for block in page.blocks:
                assoc = associate_block(
                    block, page, matchable, d.criteria, placeholders[page.page_id]
                )
                d.associations[(page.page_id, block.block_id)] = assoc

        attentions = accumulate(self.ledger.events, d.associations, d.criteria)
        d.attentions = {a.criterion_id: a.score for a in attentions}

        # option-level attention: same sum with the option indicator; feeds
        # detail views only, never the ranking
        d.option_attentions = {c.candidate_id: 0.0 for c in d.options}
        for event in self.ledger.events:
            if event.qualification != attention.QUALIFIED:
                continue
            assoc = d.associations.get((event.page_id, event.block_id))
            if assoc is None:
                continue
            for option_id in assoc.option_ids:
                if option_id in d.option_attentions:
                    d.option_attentions[option_id] += event.score

        # evidence snippets on qualified triggerings, one per block
        for event in sorted(self.ledger.events, key=lambda e: (e.timestamp, e.event_id)):
            if event.qualification != attention.QUALIFIED:
                continue
            page = self._pages.get(event.page_id)
            block = page.block(event.block_id) if page else None
            if block is None:
                continue
            key = (event.page_id, event.block_id)
            if key not in d.snippets_by_block:
                snippet = capture_evidence(event, block, page, d.snippets_by_block)
                d.snippets_by_block[key] = snippet
                d.snippets[snippet.snippet_id] = snippet
        for snippet_id, rating in fold.ratings.items():
            if snippet_id in d.snippets:
                d.snippets[snippet_id].rating = Rating(rating)

        # embeddings and grouping; a dead provider pauses grouping
        snippets_of: dict[str, list[EvidenceSnippet]] = {c.candidate_id: [] for c in d.criteria}
        for snippet in sorted(d.snippets.values(), key=lambda s: (s.captured_at, s.snippet_id)):
            assoc = d.associations.get((snippet.page_id, snippet.block_id))
            if assoc is None:
                continue
            for criterion_id in assoc.criterion_ids:
                if criterion_id in snippets_of:
                    snippets_of[criterion_id].append(snippet)
        try:
            for criterion in d.criteria:
                d.vectors[criterion.candidate_id] = embed_criterion(
                    criterion, snippets_of[criterion.candidate_id], self.embedder
                )
            d.groups = propose_groups(
                d.criteria,
                d.vectors,
                fold.overrides,
                self.config.similarity_threshold,
                d.attentions,
                fold.label_overrides,
            )
        except ProviderUnavailable:
            log.warning("embedding provider unavailable; retaining previous groups")
            d.grouping_stale = True
            live = {c.candidate_id for c in d.criteria}
            d.groups = []
            for group in self._derived.groups:
                members = [cid for cid in group.member_criterion_ids if cid in live]
                if members:
                    d.groups.append(
                        CriterionGroup(group.group_id, members, group.label, group.pinned_label_manual)
                    )
        d.group_of = {cid: g.group_id for g in d.groups for cid in g.member_criterion_ids}

        # ranking
        mode = self.config.group_score_mode
        scores: dict[str, float] = {}
        for group in d.groups:
            member_scores = [d.attentions.get(cid, 0.0) for cid in group.member_criterion_ids]
            scores[group.group_id] = max(member_scores) if mode == "max" else sum(member_scores)
        d.ranking = RankingState(
            pinned=[gid for gid in fold.pinned if gid in d.group_of.values()],
            visible_count=fold.visible_count or self.config.visible_count,
            scores=scores,
        )
        criteria_by_id = {c.candidate_id: c for c in d.criteria}
        d.ranked = rank_criteria(d.ranking, d.groups, criteria_by_id)

        # cells: snippets attached to every (option, group) pair of their
        # block, unless manually re-homed
        group_ids = {g.group_id for g in d.groups}
        option_ids = {c.candidate_id for c in d.options}
        for snippet in sorted(d.snippets.values(), key=lambda s: (s.captured_at, s.snippet_id)):
            move = fold.moves.get(snippet.snippet_id)
            if move and move[0] in option_ids and move[1] in group_ids:
                d.cells.setdefault(move, []).append(snippet.snippet_id)
                continue
            assoc = d.associations.get((snippet.page_id, snippet.block_id))
            if assoc is None:
                continue
            for oid in assoc.option_ids:
                if oid not in option_ids:
                    continue
                for cid in assoc.criterion_ids:
                    gid = d.group_of.get(cid)
                    if gid is None:
                        continue
                    cell = d.cells.setdefault((oid, gid), [])
                    if snippet.snippet_id not in cell:
                        cell.append(snippet.snippet_id)

        # overlooked evidence per group -> notification dots
        attended = {
            (e.page_id, e.block_id)
            for e in self.ledger.events
            if e.qualification == attention.QUALIFIED
        }
        assoc_order = [
            d.associations[(p.page_id, b.block_id)] for p in pages for b in p.blocks
        ]
        for group in d.groups:
            d.overlooked[group.group_id] = grouping.detect_overlooked(
                group,
                assoc_order,
                attended,
                d.vectors or None,
                self.config.similarity_threshold,
                group_attended=scores.get(group.group_id, 0.0) > 0,
            )

        self._derived = d

    # --- views -----------------------------------------------------------------

    def _snippet_payload(self, snippet: EvidenceSnippet) -> dict:
        return {
            "snippet_id": snippet.snippet_id,
            "page_id": snippet.page_id,
            "block_id": snippet.block_id,
            "text": snippet.text,
            "html": snippet.html,
            "url": snippet.url,
            "scroll_offset": snippet.scroll_offset,
            "scroll_estimated": snippet.scroll_estimated,
            "captured_at": snippet.captured_at,
            "rating": snippet.rating.value,
            "teleport": snippet.teleport(),
        }

    def list_view(self) -> dict:
        self._ensure()
        d = self._derived
        groups_by_id = {g.group_id: g for g in d.groups}
        criteria = []
        for gid in visible_slice(d.ranked, d.ranking.visible_count):
            group = groups_by_id[gid]
            criteria.append(
                {
                    "group_id": gid,
                    "label": group.label,
                    "score": d.ranking.scores.get(gid, 0.0),
                    "pinned": gid in d.ranking.pinned,
                    "member_count": len(group.member_criterion_ids),
                    "grouped": len(group.member_criterion_ids) > 1,
                    "overlooked": bool(d.overlooked.get(gid)),
                }
            )
        return {
            "options": [
                {
                    "option_id": c.candidate_id,
                    "name": c.name,
                    "placeholder": SOURCE_PLACEHOLDER in c.sources,
                }
                for c in sorted(d.options, key=lambda c: c.first_seen_at)
            ],
            "criteria": criteria,
        }

    def table_view(self) -> dict:
        self._ensure()
        d = self._derived
        groups_by_id = {g.group_id: g for g in d.groups}
        visible = visible_slice(d.ranked, d.ranking.visible_count)
        options = sorted(d.options, key=lambda c: c.first_seen_at)
        cells: dict[str, dict[str, list[dict]]] = {}
        for (oid, gid), snippet_ids in d.cells.items():
            if gid not in visible:
                continue
            cells.setdefault(gid, {})[oid] = [
                self._snippet_payload(d.snippets[sid]) for sid in snippet_ids
            ]
        return {
            "options": [{"option_id": c.candidate_id, "name": c.name} for c in options],
            "groups": [
                {
                    "group_id": gid,
                    "label": groups_by_id[gid].label,
                    "score": d.ranking.scores.get(gid, 0.0),
                    "pinned": gid in d.ranking.pinned,
                }
                for gid in visible
            ],
            "cells": cells,
        }

    def detail_view(self, kind: str, target_id: str) -> dict:
        """Evidence for one criterion group organized by option, or for one
        option organized by group."""
        self._ensure()
        d = self._derived
        options = sorted(d.options, key=lambda c: c.first_seen_at)
        groups_by_id = {g.group_id: g for g in d.groups}
        if kind in ("group", "criterion"):
            group = groups_by_id.get(target_id)
            if group is None:
                raise UnknownGroup(target_id)
            sections = []
            for option in options:
                snippet_ids = d.cells.get((option.candidate_id, group.group_id), [])
                if snippet_ids:
                    sections.append(
                        {
                            "option_id": option.candidate_id,
                            "name": option.name,
                            "snippets": [self._snippet_payload(d.snippets[s]) for s in snippet_ids],
                        }
                    )
            return {
                "kind": "criterion",
                "group_id": group.group_id,
                "label": group.label,
                "score": d.ranking.scores.get(group.group_id, 0.0),
                "options": sections,
                "overlooked": [
                    {"page_id": p, "block_id": b} for p, b in d.overlooked.get(group.group_id, [])
                ],
            }
        if kind == "option":
            option = next((c for c in d.options if c.candidate_id == target_id), None)
            if option is None:
                raise UnknownTarget(f"option {target_id}")
            sections = []
            for gid in d.ranked:
                snippet_ids = d.cells.get((option.candidate_id, gid), [])
                if snippet_ids:
                    sections.append(
                        {
                            "group_id": gid,
                            "label": groups_by_id[gid].label,
                            "snippets": [self._snippet_payload(d.snippets[s]) for s in snippet_ids],
                        }
                    )
            return {
                "kind": "option",
                "option_id": option.candidate_id,
                "name": option.name,
                "score": d.option_attentions.get(option.candidate_id, 0.0),
                "groups": sections,
            }
        raise SchemaViolation(f"detail kind must be option|criterion|group, got {kind}")

    def state_snapshot(self) -> dict:
        self._ensure()
        d = self._derived
        options = sorted(d.options, key=lambda c: c.first_seen_at)
        criteria = sorted(d.criteria, key=lambda c: c.first_seen_at)
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": self.session_id,
            "revision": self.revision,
            "pages": [
                {
                    "page_id": p.page_id,
                    "url": p.url,
                    "title": p.title,
                    "captured_at": p.captured_at,
                    "block_count": len(p.blocks),
                }
                for p in self._pages.values()
            ],
            "options": [
                {
                    "option_id": c.candidate_id,
                    "name": c.name,
                    "normalized_name": c.normalized_name,
                    "sources": sorted(c.sources),
                    "first_seen_at": c.first_seen_at,
                    "placeholder": SOURCE_PLACEHOLDER in c.sources,
                    "score": d.option_attentions.get(c.candidate_id, 0.0),
                    "provenance": [[p, b] for p, b in c.provenance],
                }
                for c in options
            ],
            "criteria": [
                {
                    "criterion_id": c.candidate_id,
                    "name": c.name,
                    "normalized_name": c.normalized_name,
                    "sources": sorted(c.sources),
                    "first_seen_at": c.first_seen_at,
                    "score": d.attentions.get(c.candidate_id, 0.0),
                    "group_id": d.group_of.get(c.candidate_id),
                    "provenance": [[p, b] for p, b in c.provenance],
                }
                for c in criteria
            ],
            "groups": [
                {
                    "group_id": g.group_id,
                    "label": g.label,
                    "label_manual": g.pinned_label_manual,
                    "member_criterion_ids": list(g.member_criterion_ids),
                    "score": d.ranking.scores.get(g.group_id, 0.0),
                    "overlooked": [[p, b] for p, b in d.overlooked.get(g.group_id, [])],
                }
                for g in d.groups
            ],
            "ranking": {
                "order": list(d.ranked),
                "visible": visible_slice(d.ranked, d.ranking.visible_count),
                "pinned": list(d.ranking.pinned),
                "visible_count": d.ranking.visible_count,
                "scores": {gid: d.ranking.scores.get(gid, 0.0) for gid in d.ranked},
            },
            "snippets": [
                self._snippet_payload(s)
                for s in sorted(d.snippets.values(), key=lambda s: (s.captured_at, s.snippet_id))
            ],
            "cells": [
                {
                    "option_id": oid,
                    "group_id": gid,
                    "snippet_ids": list(snippet_ids),
                }
                for (oid, gid), snippet_ids in sorted(d.cells.items())
            ],
            "list_view": self.list_view(),
            "table_view": self.table_view(),
        }

    def diff_since(self, since: int) -> dict:
        """Changed top-level sections between `since` and the current revision,
        computed by refolding the log prefix."""
        if since >= self.revision:
            return {
                "schema_version": SCHEMA_VERSION,
                "session_id": self.session_id,
                "since": since,
                "revision": self.revision,
                "changed": {},
            }
        old = self._refold_prefix(max(0, since))
        old_snapshot = old.state_snapshot()
        new_snapshot = self.state_snapshot()
        changed = {}
        for key, value in new_snapshot.items():
            if key in ("schema_version", "session_id", "revision"):
                continue
            if json.dumps(value, sort_keys=True) != json.dumps(old_snapshot.get(key), sort_keys=True):
                changed[key] = value
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": self.session_id,
            "since": since,
            "revision": self.revision,
            "changed": changed,
        }

    def _refold_prefix(self, count: int) -> "Session":
        twin = Session(self.session_id, self.config)
        for record in self.records[:count]:
            twin.apply_record(record)
        return twin

    def structural_fingerprint(self) -> str:
        """Fingerprint of everything except attention scores and rank order;
        used to tell ranking-only updates from structural ones."""
        snapshot = self.state_snapshot()
        reduced = {
            "options": [(o["option_id"], o["name"]) for o in snapshot["options"]],
            "criteria": [(c["criterion_id"], c["name"]) for c in snapshot["criteria"]],
            "groups": [
                (g["group_id"], g["label"], tuple(g["member_criterion_ids"]), tuple(map(tuple, g["overlooked"])))
                for g in snapshot["groups"]
            ],
            "snippets": [(s["snippet_id"], s["rating"]) for s in snapshot["snippets"]],
            "cells": [(c["option_id"], c["group_id"], tuple(c["snippet_ids"])) for c in snapshot["cells"]],
            "pinned": tuple(snapshot["ranking"]["pinned"]),
            "visible_count": snapshot["ranking"]["visible_count"],
        }
        return hashlib.sha256(repr(reduced).encode("utf-8")).hexdigest()

    # --- export ------------------------------------------------------------------

    def export(self, fmt: str = "json") -> str:
        self._ensure()
        if fmt == "json":
            return table.export_json(self.state_snapshot())
        if fmt == "csv":
            return table.export_csv(self.table_view())
        if fmt in ("md", "markdown"):
            return table.export_markdown(self.table_view())
        raise SchemaViolation(f"unknown export format: {fmt}")

    def teleport(self, snippet_id: str) -> dict:
        self._ensure()
        return table.teleport_target(self._derived.snippets.get(snippet_id))

    # --- replay / persistence ------------------------------------------------------

    def apply_record(self, record: dict) -> int:
        """Apply a canonical log record (no re-validation; used by replay and
        restore, where records were validated when first written)."""
        rtype = record.get("type")
        if rtype == "page":
            snapshot = segment_page(
                record["html"],
                record["url"],
                int(record["captured_at"]),
                page_id=record.get("page_id"),
                title=record.get("title"),
                layout=record.get("layout"),
            )
            self._pages[snapshot.page_id] = snapshot
            return self._append(record)
        if rtype == "event":
            event = make_event(record, sequence=len(self.records))
            self.ledger.append(event)
            return self._append(record)
        if rtype == "action":
            return self._append(record)
        raise SchemaViolation(f"unknown record type: {rtype}")


def replay_session(
    trace_path: str | Path,
    config: Optional[EngineConfig] = None,
    session_id: str = "replay",
) -> Session:
    """Replay a newline-delimited trace of page/event/action records.
    Deterministic: timestamps come from the trace, never the wall clock."""
    session = Session(session_id, config)
    with open(trace_path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceParseError(str(exc), line_no) from exc
            rtype = record.get("type")
            try:
                if rtype == "page":
                    session.ingest_page(record)
                elif rtype == "event":
                    _, rejected = session.ingest_events([record])
                    if rejected:
                        raise TraceParseError(rejected[0]["reason"], line_no)
                elif rtype == "action":
                    session.apply_action(record)
                else:
                    raise TraceParseError(f"unknown record type: {rtype}", line_no)
            except TraceParseError:
                raise
            except Exception as exc:
                raise TraceParseError(str(exc), line_no) from exc
    return session


# --- persistence ---------------------------------------------------------------------

def _record_checksum(record: dict) -> str:
    canonical = json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class SessionStore:
    """Append-only record log with per-record checksums, plus periodic
    state snapshots for inspection."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def log_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.log"

    def snapshot_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.snapshot.json"

    def append_record(self, session_id: str, record: dict) -> None:
        line = json.dumps(
            {"record": record, "sha256": _record_checksum(record)},
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
        )
        with open(self.log_path(session_id), "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def write_snapshot(self, session_id: str, snapshot: dict) -> None:
        self.snapshot_path(session_id).write_text(
            json.dumps(snapshot, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )

    def session_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.log"))

    def load_records(self, session_id: str) -> list[dict]:
        """Read and verify the log. A truncated final line is dropped with a
        warning; a checksum mismatch or malformed interior line is corruption."""
        path = self.log_path(session_id)
        if not path.exists():
            raise UnknownSession(session_id)
        lines = path.read_text(encoding="utf-8").splitlines()
        records: list[dict] = []
        for index, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                record = entry["record"]
                checksum = entry["sha256"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                if index == len(lines) - 1:
                    log.warning(
                        "session %s: dropping truncated final log record (%s)", session_id, exc
                    )
                    break
                raise CorruptLog(f"malformed record at line {index + 1}: {exc}") from exc
            if _record_checksum(record) != checksum:
                raise CorruptLog(f"checksum mismatch at line {index + 1}")
            records.append(record)
        return records


def persist(session: Session, store: SessionStore) -> None:
    """Write the full input log and a state snapshot."""
    path = store.log_path(session.session_id)
    if path.exists():
        path.unlink()
    for record in session.records:
        store.append_record(session.session_id, record)
    store.write_snapshot(session.session_id, session.state_snapshot())


def restore(
    session_id: str, store: SessionStore, config: Optional[EngineConfig] = None
) -> Session:
    """Refold the persisted log; state and revision reproduce exactly."""
    session = Session(session_id, config)
    for record in store.load_records(session_id):
        session.apply_record(record)
    return session
