"""Decision space: evidence snippets, criteria ranking with pins, and exports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

from .errors import InvalidCount, UnknownGroup, UnknownSnippet
from .extraction import Candidate
from .grouping import CriterionGroup

DEFAULT_VISIBLE_COUNT = 15


class Rating(str, Enum):
    positive = "positive"
    negative = "negative"
    informational = "informational"
    unrated = "unrated"


RATING_INITIALS = {
    Rating.positive: "P",
    Rating.negative: "N",
    Rating.informational: "I",
    Rating.unrated: "U",
}


@dataclass
class EvidenceSnippet:
    snippet_id: str
    page_id: str
    block_id: str
    html: str
    text: str
    url: str
    scroll_offset: int
    captured_at: int
    rating: Rating = Rating.unrated
    scroll_estimated: bool = False

    def teleport(self) -> dict:
        return {
            "url": self.url,
            "scroll_offset": self.scroll_offset,
            "estimated": self.scroll_estimated,
        }


def teleport_target(snippet: Optional[EvidenceSnippet]) -> dict:
    """Provenance pair for client navigation back to the source."""
    if snippet is None:
        raise UnknownSnippet("snippet does not exist or was deleted")
    return snippet.teleport()


@dataclass
class RankingState:
    pinned: list[str] = field(default_factory=list)
    visible_count: int = DEFAULT_VISIBLE_COUNT
    scores: dict[str, float] = field(default_factory=dict)


def _group_sort_key(group: CriterionGroup, state: RankingState, criteria_by_id: Mapping[str, Candidate]):
    members = [criteria_by_id[cid] for cid in group.member_criterion_ids if cid in criteria_by_id]
    first_seen = min((c.first_seen_at for c in members), default=0)
    label_norm = min((c.normalized_name for c in members), default=group.label.lower())
    return (-state.scores.get(group.group_id, 0.0), first_seen, label_norm)


def rank_criteria(
    state: RankingState,
    groups: Sequence[CriterionGroup],
    criteria_by_id: Mapping[str, Candidate],
) -> list[str]:
    """Pinned groups first in pin order, then unpinned by score descending;
    ties break by earliest member first-seen, then by normalized label."""
    live = {g.group_id: g for g in groups}
    pinned = [gid for gid in state.pinned if gid in live]
    rest = [g for g in groups if g.group_id not in set(pinned)]
    rest.sort(key=lambda g: _group_sort_key(g, state, criteria_by_id))
    return pinned + [g.group_id for g in rest]


def visible_slice(ranked: Sequence[str], visible_count: int) -> list[str]:
    return list(ranked)[: min(visible_count, len(ranked))]


def pin(state: RankingState, groups: Sequence[CriterionGroup], group_id: str) -> None:
    if group_id not in {g.group_id for g in groups}:
        raise UnknownGroup(group_id)
    if group_id not in state.pinned:
        state.pinned.append(group_id)


def unpin(state: RankingState, groups: Sequence[CriterionGroup], group_id: str) -> None:
    if group_id not in {g.group_id for g in groups}:
        raise UnknownGroup(group_id)
    if group_id in state.pinned:
        state.pinned.remove(group_id)


def reorder(state: RankingState, groups: Sequence[CriterionGroup], group_id: str, new_index: int) -> None:
    """Manual placement pins the group if it is not already pinned, then moves
    it to new_index among the pinned entries."""
    if group_id not in {g.group_id for g in groups}:
        raise UnknownGroup(group_id)
    if group_id in state.pinned:
        state.pinned.remove(group_id)
    index = max(0, min(new_index, len(state.pinned)))
    state.pinned.insert(index, group_id)


def set_visible_count(state: RankingState, n: int) -> RankingState:
    if n < 1:
        raise InvalidCount(f"visible count must be >= 1, got {n}")
    state.visible_count = n
    return state


# --- exports ---------------------------------------------------------------------

def export_json(state_snapshot: dict) -> str:
    """Full-fidelity deterministic export: sorted keys, revision stamped."""
    return json.dumps(state_snapshot, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def export_csv(table_view: dict) -> str:
    """Options as rows, ranked criterion groups as columns, rating initials as cells."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    groups = table_view["groups"]
    writer.writerow(["option"] + [g["label"] for g in groups])
    cells = table_view["cells"]
    for option in table_view["options"]:
        row = [option["name"]]
        for g in groups:
            snippets = cells.get(g["group_id"], {}).get(option["option_id"], [])
            row.append("".join(RATING_INITIALS[Rating(s["rating"])] for s in snippets))
        writer.writerow(row)
    return buf.getvalue()


_MD_RATING_MARK = {
    Rating.positive: "(+)",
    Rating.negative: "(-)",
    Rating.informational: "(i)",
    Rating.unrated: "",
}


def export_markdown(table_view: dict) -> str:
    """Human-readable grid with truncated snippet texts."""
    groups = table_view["groups"]
    lines = []
    header = "| option | " + " | ".join(g["label"] for g in groups) + " |"
    lines.append(header)
    lines.append("|" + " --- |" * (len(groups) + 1))
    cells = table_view["cells"]
    for option in table_view["options"]:
        row = [option["name"]]
        for g in groups:
            snippets = cells.get(g["group_id"], {}).get(option["option_id"], [])
            parts = []
            for s in snippets:
                text = s["text"]
                if len(text) > 60:
                    text = text[:57] + "..."
                mark = _MD_RATING_MARK[Rating(s["rating"])]
                parts.append(f"{mark} {text}".strip())
            row.append("<br>".join(parts))
        lines.append("| " + " | ".join(cell.replace("|", "\\|") for cell in row) + " |")
    return "\n".join(lines) + "\n"
