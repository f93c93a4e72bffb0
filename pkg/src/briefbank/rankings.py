"""Ranked-result containers shared by the lexical, dense, and pipeline layers."""

from __future__ import annotations

from dataclasses import dataclass, field

SOURCES = ("dense", "sparse", "rerank", "gold_neighbor")


@dataclass(frozen=True)
class RankedEntry:
    paragraph_id: str
    score: float
    rank: int  # 1-based
    source: str


@dataclass
class RankedList:
    query_id: str
    entries: list[RankedEntry] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def paragraph_ids(self) -> list[str]:
        return [e.paragraph_id for e in self.entries]


def ranked(query_id: str, scored: list[tuple[str, float]], source: str,
           flags: list[str] | None = None) -> RankedList:
    """Wrap (paragraph_id, score) pairs, already in final order, as a RankedList."""
    entries = [
        RankedEntry(paragraph_id=pid, score=float(s), rank=i + 1, source=source)
        for i, (pid, s) in enumerate(scored)
    ]
    return RankedList(query_id=query_id, entries=entries, flags=list(flags or []))
