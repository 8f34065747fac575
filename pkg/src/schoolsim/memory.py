"""Dual experience/knowledge memory with short-term/long-term tiers.

Long-term memory is the append-only record set (one collection per kind under
the dual structure, a single collection when unified). Short-term memory is an
index over long-term: a bounded, salience-ordered subset of record ids that
gets retrieval priority. Records are never duplicated between tiers.

Retrieval ranking rules (mirrored exactly by the brute-force test oracle):

* similarity is the canonical cosine of the query embedding and the record
  embedding; a record qualifies when similarity is strictly above
  ``min_similarity``;
* with the short/long-term hierarchy enabled, the result is the top
  ``k_short`` qualifying short-term records followed by the top ``k_long``
  qualifying long-term records not already returned; with the hierarchy
  disabled, a single segment of ``k_short + k_long`` long-term records is
  returned and short-term is never read;
* under the dual structure with both kinds enabled, the long-term budget is
  split between the bases (experience gets the larger half); under the
  unified structure, or with a single enabled kind, records rank jointly;
* each segment is sorted by non-increasing similarity, ties broken by lower
  record id.
"""

from __future__ import annotations

import base64
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .config import BaseStructure, SimulationConfig
from .embedding import Embedder, cosine
from .environment import SimTime
from .errors import EmptyTextError, KindDisabledError, MemoryDisabledError

logger = logging.getLogger(__name__)

DEFAULT_SHORT_TERM_CAPACITY = 32
DEFAULT_SALIENCE_DECAY = 0.99
LONG_TERM_SALIENCE = 0.5
SHORT_TERM_SALIENCE = 1.0


class MemoryKind(Enum):
    EXPERIENCE = "experience"
    KNOWLEDGE = "knowledge"


@dataclass(frozen=True)
class MemoryRecord:
    id: int
    kind: MemoryKind
    text: str
    embedding: np.ndarray
    created_at: SimTime
    salience: float


@dataclass(frozen=True)
class RetrievalPolicy:
    k_short: int = 4
    k_long: int = 8
    min_similarity: float = 0.0

    def __post_init__(self) -> None:
        if self.k_short < 0 or self.k_long < 0:
            raise ValueError("retrieval counts must be non-negative")


@dataclass
class MemoryUpdate:
    """The four-list payload produced by the memory-update step."""

    long_term_experience_updates: list[str] = field(default_factory=list)
    long_term_knowledge_updates: list[str] = field(default_factory=list)
    short_term_experience_content: list[str] = field(default_factory=list)
    short_term_knowledge_content: list[str] = field(default_factory=list)

    FIELDS = (
        "long_term_experience_updates",
        "long_term_knowledge_updates",
        "short_term_experience_content",
        "short_term_knowledge_content",
    )

    def as_dict(self) -> dict[str, list[str]]:
        return {name: list(getattr(self, name)) for name in self.FIELDS}

    def is_empty(self) -> bool:
        return not any(getattr(self, name) for name in self.FIELDS)


# (kind, mark_short, salience) routing per update field.
_UPDATE_ROUTES = (
    ("long_term_experience_updates", MemoryKind.EXPERIENCE, False, LONG_TERM_SALIENCE),
    ("long_term_knowledge_updates", MemoryKind.KNOWLEDGE, False, LONG_TERM_SALIENCE),
    ("short_term_experience_content", MemoryKind.EXPERIENCE, True, SHORT_TERM_SALIENCE),
    ("short_term_knowledge_content", MemoryKind.KNOWLEDGE, True, SHORT_TERM_SALIENCE),
)


def _new_counters() -> dict[str, int]:
    return {
        "retrieve_calls": 0,
        "short_term_queries": 0,
        "insert_experience": 0,
        "insert_knowledge": 0,
        "skipped_disabled": 0,
        "skipped_empty": 0,
    }


class MemoryStore:
    """One agent's memory. Single-writer; concurrent reads are safe."""

    def __init__(
        self,
        agent_id: str,
        config: SimulationConfig,
        embedder: Embedder,
        capacity: int = DEFAULT_SHORT_TERM_CAPACITY,
        decay: float = DEFAULT_SALIENCE_DECAY,
    ):
        self.agent_id = agent_id
        self.config = config
        self.embedder = embedder
        self.capacity = capacity
        self.decay = decay
        self._records: list[MemoryRecord] = []
        self._short_term: list[int] = []
        self._next_id = 0
        self._now = SimTime(1, 0)
        self.counters = _new_counters()

    # Read-only views

    @property
    def records(self) -> tuple[MemoryRecord, ...]:
        return tuple(self._records)

    @property
    def short_term_ids(self) -> tuple[int, ...]:
        return tuple(self._short_term)

    def long_term_size(self, kind: MemoryKind | None = None) -> int:
        if kind is None:
            return len(self._records)
        return sum(1 for r in self._records if r.kind is kind)

    def get(self, record_id: int) -> MemoryRecord:
        return self._records[record_id]

    # Mutations

    def insert(
        self,
        kind: MemoryKind,
        text: str,
        timestamp: SimTime,
        salience: float = LONG_TERM_SALIENCE,
        mark_short: bool = False,
    ) -> int:
        if not self.config.memory_enabled:
            raise MemoryDisabledError(f"{self.agent_id}: memory base is disabled")
        if not self.config.kind_enabled(kind):
            raise KindDisabledError(
                f"{self.agent_id}: {kind.value} base is disabled by config "
                f"{self.config.id}"
            )
        if not text or not text.strip():
            raise EmptyTextError("memory text must be non-empty")
        record = MemoryRecord(
            id=self._next_id,
            kind=kind,
            text=text,
            embedding=self.embedder.embed(text),
            created_at=timestamp,
            salience=salience,
        )
        self._records.append(record)
        self._next_id += 1
        if timestamp.ordinal > self._now.ordinal:
            self._now = timestamp
        self.counters[f"insert_{kind.value}"] += 1
        if mark_short:
            self._short_term.append(record.id)
            self.evict_short_term()
        return record.id

    def evict_short_term(self) -> list[int]:
        """Drop lowest-salience ids while over capacity.

        Ordering uses salience decayed per elapsed slot (decay applies to
        eviction only; the stored salience is untouched). Ties go to the
        oldest record, then the lowest id.
        """
        evicted: list[int] = []
        now = self._now.ordinal
        while len(self._short_term) > self.capacity:
            victim = min(
                self._short_term,
                key=lambda rid: (
                    self._records[rid].salience
                    * self.decay ** (now - self._records[rid].created_at.ordinal),
                    self._records[rid].created_at.ordinal,
                    rid,
                ),
            )
            self._short_term.remove(victim)
            evicted.append(victim)
        return evicted

    def apply_update(
        self, update: MemoryUpdate, timestamp: SimTime
    ) -> dict[str, int]:
        """Insert the update's strings, routed by field name.

        Short-term content is inserted with ``mark_short`` (salience 1.0);
        long-term-only content gets salience 0.5. Strings for a disabled kind
        are skipped, not errors: ablation configs must not abort a run.
        Returns per-route insert counts plus skip counts.
        """
        counts = {name: 0 for name, _, _, _ in _UPDATE_ROUTES}
        counts["skipped_disabled"] = 0
        counts["skipped_empty"] = 0
        for field_name, kind, mark_short, salience in _UPDATE_ROUTES:
            for text in getattr(update, field_name):
                if not self.config.memory_enabled or not self.config.kind_enabled(kind):
                    counts["skipped_disabled"] += 1
                    self.counters["skipped_disabled"] += 1
                    continue
                if not text or not text.strip():
                    counts["skipped_empty"] += 1
                    self.counters["skipped_empty"] += 1
                    logger.debug("%s: skipped empty update string", self.agent_id)
                    continue
                self.insert(
                    kind, text, timestamp, salience=salience, mark_short=mark_short
                )
                counts[field_name] += 1
        if counts["skipped_disabled"]:
            logger.debug(
                "%s: skipped %d update strings for disabled kinds",
                self.agent_id,
                counts["skipped_disabled"],
            )
        return counts

    # Retrieval

    def _rank(
        self, candidates: list[tuple[MemoryRecord, float]], limit: int
    ) -> list[tuple[MemoryRecord, float]]:
        ordered = sorted(candidates, key=lambda pair: (-pair[1], pair[0].id))
        return ordered[:limit]

    def _long_term_segment(
        self,
        scored: dict[int, float],
        exclude: set[int],
        budget: int,
    ) -> list[tuple[MemoryRecord, float]]:
        pool = [
            (record, scored[record.id])
            for record in self._records
            if record.id not in exclude and record.id in scored
        ]
        both_kinds = self.config.eb_enabled and self.config.kb_enabled
        if self.config.base_structure is BaseStructure.DUAL and both_kinds:
            exp_quota = budget - budget // 2
            kn_quota = budget // 2
            experience = self._rank(
                [p for p in pool if p[0].kind is MemoryKind.EXPERIENCE], exp_quota
            )
            knowledge = self._rank(
                [p for p in pool if p[0].kind is MemoryKind.KNOWLEDGE], kn_quota
            )
            return sorted(experience + knowledge, key=lambda p: (-p[1], p[0].id))
        return self._rank(pool, budget)

    def retrieve(
        self, query: str, policy: RetrievalPolicy | None = None
    ) -> list[tuple[MemoryRecord, float]]:
        """Ranked (record, similarity) pairs for a query; see module rules."""
        if not self.config.memory_enabled:
            raise MemoryDisabledError(f"{self.agent_id}: memory base is disabled")
        policy = policy or RetrievalPolicy()
        self.counters["retrieve_calls"] += 1
        if not self._records:
            return []
        query_vec = self.embedder.embed(query)
        scored = {
            record.id: sim
            for record in self._records
            if (sim := cosine(query_vec, record.embedding)) > policy.min_similarity
        }
        if not self.config.stlt_enabled:
            return self._long_term_segment(
                scored, exclude=set(), budget=policy.k_short + policy.k_long
            )
        self.counters["short_term_queries"] += 1
        st_pool = [
            (self._records[rid], scored[rid])
            for rid in self._short_term
            if rid in scored
        ]
        short_segment = self._rank(st_pool, policy.k_short)
        taken = {record.id for record, _ in short_segment}
        long_segment = self._long_term_segment(
            scored, exclude=taken, budget=policy.k_long
        )
        return short_segment + long_segment

    # Persistence: meta line then one JSON record per line, key order
    # id, kind, day, slot, salience, text, vector (base64 little-endian f64).

    def save(self, path: str | Path) -> None:
        meta = {
            "format": "memory-store-v1",
            "agent_id": self.agent_id,
            "dim": self.embedder.dim,
            "capacity": self.capacity,
            "decay": self.decay,
            "now": self._now.as_dict(),
            "short_term": list(self._short_term),
        }
        lines = [json.dumps(meta, ensure_ascii=False)]
        for record in self._records:
            lines.append(
                json.dumps(
                    {
                        "id": record.id,
                        "kind": record.kind.value,
                        "day": record.created_at.day,
                        "slot": record.created_at.slot.label,
                        "salience": record.salience,
                        "text": record.text,
                        "vector": base64.b64encode(
                            record.embedding.astype("<f8").tobytes()
                        ).decode("ascii"),
                    },
                    ensure_ascii=False,
                )
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(
        cls,
        path: str | Path,
        config: SimulationConfig,
        embedder: Embedder,
    ) -> "MemoryStore":
        from .environment import Slot

        lines = Path(path).read_text(encoding="utf-8").splitlines()
        meta = json.loads(lines[0])
        if meta.get("format") != "memory-store-v1":
            raise ValueError(f"unknown snapshot format in {path}")
        store = cls(
            meta["agent_id"],
            config,
            embedder,
            capacity=meta["capacity"],
            decay=meta["decay"],
        )
        for line in lines[1:]:
            if not line.strip():
                continue
            row = json.loads(line)
            record = MemoryRecord(
                id=row["id"],
                kind=MemoryKind(row["kind"]),
                text=row["text"],
                embedding=np.frombuffer(
                    base64.b64decode(row["vector"]), dtype="<f8"
                ).copy(),
                created_at=SimTime.at(row["day"], Slot.from_label(row["slot"])),
                salience=row["salience"],
            )
            # Record id doubles as the list index; the snapshot preserves order.
            if record.id != len(store._records):
                raise ValueError(f"snapshot records out of order at id {record.id}")
            store._records.append(record)
        store._next_id = len(store._records)
        store._short_term = list(meta["short_term"])
        store._now = SimTime.at(
            meta["now"]["day"], Slot.from_label(meta["now"]["slot"])
        )
        missing = [rid for rid in store._short_term if rid >= len(store._records)]
        if missing:
            raise ValueError(f"short-term ids without records: {missing}")
        return store
