"""Brute-force re-computation of per-criterion attention, written
independently of the engine: plain dict events, quadratic scans, no shared
code. Used to cross-check the ledger's qualification, scoring, and Eq-style
aggregation."""

from __future__ import annotations

from collections import defaultdict

IDLE_MS = 120_000.0


def _interval(event: dict) -> tuple[float, float]:
    start = float(event["timestamp"])
    if event["kind"] in ("hover", "dwell"):
        return start, start + float(event.get("duration_s") or 0.0) * 1000.0
    return start, start


def oracle_qualified(event: dict, all_events: list[dict]) -> bool:
    kind = event["kind"]
    if kind == "copy":
        return True
    if kind == "highlight":
        return int(event.get("text_len") or 0) >= 5
    if kind == "click":
        if event.get("highlight_linked"):
            return False
        for other in all_events:
            if other is event:
                continue
            if (
                other["kind"] == "highlight"
                and other["page_id"] == event["page_id"]
                and other["block_id"] == event["block_id"]
                and abs(float(other["timestamp"]) - float(event["timestamp"])) <= 500.0
            ):
                return False
        return True
    # hover / dwell
    duration = float(event.get("duration_s") or 0.0)
    if duration < 2.0:
        return False
    others = sorted(float(o["timestamp"]) for o in all_events if o is not event)
    lo = min(float(o["timestamp"]) for o in all_events)
    hi = max(_interval(o)[1] for o in all_events)
    bounds = [lo] + others + [hi]
    start, end = _interval(event)
    for a, b in zip(bounds, bounds[1:]):
        if b - a >= IDLE_MS and end > a and start < b:
            return False
    return True


def oracle_weight(event: dict) -> float:
    kind = event["kind"]
    if kind == "copy":
        return 40.0
    if kind in ("highlight", "click"):
        return 20.0
    duration = float(event.get("duration_s") or 0.0)
    if kind == "hover":
        return min(0.5 * duration, 10.0)
    return min(0.2 * duration, 4.0)


def oracle_attention(
    raw_events: list[dict],
    block_criteria: dict[tuple[str, str], list[str]],
) -> dict[str, float]:
    """Per-criterion sum of qualified triggering weights."""
    totals: dict[str, float] = defaultdict(float)
    for event in raw_events:
        if not oracle_qualified(event, raw_events):
            continue
        for criterion_id in block_criteria.get((event["page_id"], event["block_id"]), ()):
            totals[criterion_id] += oracle_weight(event)
    return dict(totals)
