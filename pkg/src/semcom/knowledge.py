"""Per-receiver knowledge base: general priors plus per-identifier history.

History reads are counted so the pipeline can assert that schemes without
historical knowledge never touch it.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class HistoryRecord:
    """Remembered appearance of one transmitted object."""

    color: int
    class_id: int
    reference_image: bytes | None = None


@dataclass
class KnowledgeBase:
    name: str = "receiver"
    general: bool = True
    _history: dict[int, HistoryRecord] = field(default_factory=dict)
    history_reads: int = 0
    history_writes: int = 0

    def put(self, identifier: int, record: HistoryRecord) -> None:
        if identifier == 0:
            raise ValueError("identifier must be nonzero")
        self._history[identifier] = record
        self.history_writes += 1

    def get(self, identifier: int) -> HistoryRecord | None:
        self.history_reads += 1
        return self._history.get(identifier)

    def has_history(self) -> bool:
        # presence test, not a read of any record
        return bool(self._history)

    def identifiers(self) -> tuple[int, ...]:
        return tuple(self._history)

    def history_snapshot(self) -> dict[int, HistoryRecord]:
        return dict(self._history)


def kb_put(kb: KnowledgeBase, identifier: int, record: HistoryRecord) -> None:
    kb.put(identifier, record)


def kb_get(kb: KnowledgeBase, identifier: int) -> HistoryRecord | None:
    return kb.get(identifier)
