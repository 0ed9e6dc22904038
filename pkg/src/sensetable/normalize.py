"""Text normalization shared by extraction, matching, and dedup."""

from __future__ import annotations

import hashlib
import re

_PUNCT_RE = re.compile(r"[^\w\s]|_", re.UNICODE)
_WS_RE = re.compile(r"\s+")


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return _WS_RE.sub(" ", text).strip()


def normalize_name(name: str) -> str:
    """Canonical form used for dedup: lowercase, punctuation stripped,
    whitespace collapsed, naive plural strip per token (trailing "s" when
    the token is longer than 3 characters)."""
    lowered = _PUNCT_RE.sub(" ", name.lower())
    tokens = lowered.split()
    stripped = [t[:-1] if len(t) > 3 and t.endswith("s") else t for t in tokens]
    return " ".join(stripped)


def contains_word(haystack_normalized: str, needle_normalized: str) -> bool:
    """Whole-word containment between two already-normalized strings."""
    if not needle_normalized:
        return False
    return re.search(rf"(?<!\w){re.escape(needle_normalized)}(?!\w)", haystack_normalized) is not None


def stable_id(prefix: str, *parts: object) -> str:
    """Deterministic opaque id derived from content, stable across replays."""
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).hexdigest()
    return f"{prefix}-{digest[:16]}"
