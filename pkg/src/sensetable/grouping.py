"""Criteria grouping by embedding similarity, with sticky manual merges/splits
and overlooked-evidence detection."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Optional, Protocol, Sequence

import numpy as np

from .errors import InvalidPartition, ProviderUnavailable
from .extraction import Candidate
from .normalize import normalize_ws

if TYPE_CHECKING:
    from .attention import BlockAssociation
    from .table import EvidenceSnippet

DEFAULT_DIMENSION = 512
DEFAULT_THRESHOLD = 0.80


def unit(vector: np.ndarray, dimension: Optional[int] = None) -> np.ndarray:
    """Unit-normalize; a zero vector maps to the first canonical basis vector
    so the unit-norm invariant always holds."""
    v = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        basis = np.zeros(dimension or v.shape[0], dtype=np.float64)
        basis[0] = 1.0
        return basis
    return v / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b))


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class HashedTrigramEmbedder:
    """Deterministic offline embedder: hashed character-trigram term
    frequencies, unit-normalized. Hermetic stand-in for a transformer
    sentence encoder."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        normalized = normalize_ws(text.lower())
        vec = np.zeros(self.dimension, dtype=np.float64)
        if not normalized:
            vec[0] = 1.0
            return vec
        padded = f" {normalized} "
        for i in range(len(padded) - 2):
            trigram = padded[i : i + 3]
            vec[zlib.crc32(trigram.encode("utf-8")) % self.dimension] += 1.0
        return unit(vec, self.dimension)


class FixtureEmbedder:
    """Test/fixture provider: explicit vectors per text, deterministic basis
    vectors for anything unmapped."""

    def __init__(self, mapping: Mapping[str, Sequence[float]], dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension
        self._mapping = {k.lower(): unit(np.asarray(v, dtype=np.float64)) for k, v in mapping.items()}

    def embed(self, text: str) -> np.ndarray:
        key = normalize_ws(text.lower())
        if key in self._mapping:
            return self._mapping[key]
        vec = np.zeros(self.dimension, dtype=np.float64)
        vec[zlib.crc32(key.encode("utf-8")) % self.dimension] = 1.0
        return vec


class RemoteEmbedder:
    """Remote provider speaking {"texts": [...]} -> {"vectors": [[...]]}."""

    def __init__(self, endpoint: str, dimension: int = DEFAULT_DIMENSION, timeout: float = 10.0):
        self.endpoint = endpoint
        self.dimension = dimension
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        import httpx

        try:
            response = httpx.post(self.endpoint, json={"texts": [text]}, timeout=self.timeout)
            response.raise_for_status()
            vectors = response.json()["vectors"]
        except Exception as exc:  # connection, HTTP, schema
            raise ProviderUnavailable(f"embedding endpoint {self.endpoint}: {exc}") from exc
        return unit(np.asarray(vectors[0], dtype=np.float64))


def embed_criterion(
    criterion: Candidate,
    evidence: Sequence["EvidenceSnippet"],
    provider: EmbeddingProvider,
) -> np.ndarray:
    """Re-normalized mean of the name embedding and all attached snippet
    embeddings; bare name when there is no evidence yet."""
    vectors = [provider.embed(criterion.name)]
    vectors.extend(provider.embed(snippet.text) for snippet in evidence)
    return unit(np.mean(vectors, axis=0), provider.dimension)


# --- groups and overrides -----------------------------------------------------

def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass
class GroupingOverrides:
    forced_merges: set[tuple[str, str]] = field(default_factory=set)
    forbidden_merges: set[tuple[str, str]] = field(default_factory=set)

    def force(self, a: str, b: str) -> None:
        key = _pair(a, b)
        self.forbidden_merges.discard(key)
        self.forced_merges.add(key)

    def forbid(self, a: str, b: str) -> None:
        key = _pair(a, b)
        self.forced_merges.discard(key)
        self.forbidden_merges.add(key)


@dataclass
class CriterionGroup:
    group_id: str
    member_criterion_ids: list[str]
    label: str
    pinned_label_manual: bool = False


class _UnionFind:
    def __init__(self, items: Iterable[str]):
        self.parent = {item: item for item in items}

    def find(self, item: str) -> str:
        root = item
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[item] != root:
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def propose_groups(
    criteria: Sequence[Candidate],
    vectors: Mapping[str, np.ndarray],
    overrides: GroupingOverrides,
    threshold: float = DEFAULT_THRESHOLD,
    scores: Optional[Mapping[str, float]] = None,
    label_overrides: Optional[Mapping[str, str]] = None,
) -> list[CriterionGroup]:
    """Single-link clustering: an edge connects pairs at or above the cosine
    threshold or forced pairs, except tombstoned pairs (which still allow
    transitive connection through a third criterion). Output is invariant to
    input ordering."""
    ordered = sorted(criteria, key=lambda c: (c.first_seen_at, c.candidate_id))
    ids = [c.candidate_id for c in ordered]
    by_id = {c.candidate_id: c for c in ordered}
    uf = _UnionFind(ids)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            key = _pair(a, b)
            if key in overrides.forbidden_merges:
                continue
            if key in overrides.forced_merges or cosine(vectors[a], vectors[b]) >= threshold:
                uf.union(a, b)

    components: dict[str, list[str]] = {}
    for cid in ids:
        components.setdefault(uf.find(cid), []).append(cid)

    scores = scores or {}
    groups: list[CriterionGroup] = []
    for members in components.values():
        members.sort(key=lambda cid: (by_id[cid].first_seen_at, cid))
        anchor = members[0]
        group_id = f"grp-{anchor}"
        override_label = (label_overrides or {}).get(group_id)
        if override_label:
            label = override_label
            pinned = True
        else:
            # highest attention wins the label; ties fall to the earliest member
            top = max(scores.get(cid, 0.0) for cid in members)
            contenders = [cid for cid in members if scores.get(cid, 0.0) == top]
            label_member = min(contenders, key=lambda cid: (by_id[cid].first_seen_at, cid))
            label = by_id[label_member].name
            pinned = False
        groups.append(CriterionGroup(group_id, members, label, pinned))
    groups.sort(key=lambda g: (by_id[g.member_criterion_ids[0]].first_seen_at, g.group_id))
    return groups


def manual_merge(
    group_a: CriterionGroup, group_b: CriterionGroup, overrides: GroupingOverrides
) -> CriterionGroup:
    """Force every cross pair so re-clustering always keeps the union together."""
    for a in group_a.member_criterion_ids:
        for b in group_b.member_criterion_ids:
            overrides.force(a, b)
    members = sorted(set(group_a.member_criterion_ids) | set(group_b.member_criterion_ids))
    return CriterionGroup(group_a.group_id, members, group_a.label, group_a.pinned_label_manual)


def manual_split(
    group: CriterionGroup, partition: Sequence[Sequence[str]], overrides: GroupingOverrides
) -> list[CriterionGroup]:
    """Tombstone every cross-partition pair; the partition must cover the
    group's members exactly."""
    flat = [cid for part in partition for cid in part]
    if sorted(flat) != sorted(group.member_criterion_ids) or len(flat) != len(set(flat)):
        raise InvalidPartition("partition must cover group members exactly")
    for i, part_a in enumerate(partition):
        for part_b in partition[i + 1 :]:
            for a in part_a:
                for b in part_b:
                    overrides.forbid(a, b)
    out = []
    for part in partition:
        members = sorted(part)
        out.append(CriterionGroup(f"grp-{members[0]}", list(members), group.label, False))
    return out


def detect_overlooked(
    group: CriterionGroup,
    associations: Sequence["BlockAssociation"],
    attended_blocks: set[tuple[str, str]],
    vectors: Optional[Mapping[str, np.ndarray]] = None,
    threshold: float = DEFAULT_THRESHOLD,
    group_attended: bool = True,
) -> list[tuple[str, str]]:
    """Blocks associated with the group (or with a criterion near its
    centroid) that received zero qualified attention. Empty means no
    notification dot."""
    if not group_attended:
        return []
    member_set = set(group.member_criterion_ids)
    centroid = None
    if vectors:
        member_vectors = [vectors[cid] for cid in group.member_criterion_ids if cid in vectors]
        if member_vectors:
            centroid = unit(np.mean(member_vectors, axis=0))

    def related(criterion_id: str) -> bool:
        if criterion_id in member_set:
            return True
        if centroid is not None and vectors and criterion_id in vectors:
            return cosine(vectors[criterion_id], centroid) >= threshold
        return False

    out: list[tuple[str, str]] = []
    for assoc in associations:
        key = (assoc.page_id, assoc.block_id)
        if key in attended_blocks:
            continue
        if any(related(cid) for cid in assoc.criterion_ids):
            out.append(key)
    return out
