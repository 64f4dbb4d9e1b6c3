"""Trace data model and span-file ingestion.

A span file is JSON Lines: one object per communication-API call with keys
``trace_id``, ``sender``, ``service``, ``start_us``, ``duration_us`` and
``layer`` (``"client"`` or ``"internal"``). Unknown keys are ignored.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyTraceError, SpanParseError

Pair = tuple[str, str]


class Layer(str, Enum):
    CLIENT = "client"
    INTERNAL = "internal"


class TraceLabel(str, Enum):
    FAULT_FREE = "fault_free"
    FAULT_INJECTED = "fault_injected"
    IDLE = "idle"


@dataclass(frozen=True, slots=True)
class Event:
    """One call to a communication API, collapsed from its begin/end probes."""

    sender: str
    service: str
    start: int
    duration: int
    layer: Layer = Layer.INTERNAL
    trace_id: str = ""

    def __post_init__(self):
        if not self.sender or not self.service:
            raise ValueError("sender and service must be non-empty")
        if self.start <= 0:
            raise ValueError(f"start must be positive, got {self.start}")
        if self.duration < 0:
            raise ValueError(f"duration must be >= 0, got {self.duration}")

    @property
    def pair(self) -> Pair:
        return (self.sender, self.service)

    def to_record(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "sender": self.sender,
            "service": self.service,
            "start_us": self.start,
            "duration_us": self.duration,
            "layer": self.layer.value,
        }


class SymbolTable:
    """Bijection between ``(sender, service)`` pairs and dense integer ids.

    Ids are handed out in first-seen order and never reused. Registration is
    serialized by a lock so concurrent ingestion behaves as if sequential.
    """

    def __init__(self, pairs: Iterable[Pair] = ()):
        self._ids: dict[Pair, int] = {}
        self._pairs: list[Pair] = []
        self._lock = threading.Lock()
        for p in pairs:
            self.register(p)

    def register(self, pair: Pair) -> int:
        pair = (pair[0], pair[1])
        sym = self._ids.get(pair)
        if sym is not None:
            return sym
        with self._lock:
            sym = self._ids.get(pair)
            if sym is None:
                sym = len(self._pairs)
                self._pairs.append(pair)
                self._ids[pair] = sym
            return sym

    def lookup(self, pair: Pair) -> int | None:
        return self._ids.get((pair[0], pair[1]))

    def decode(self, sym: int) -> Pair:
        return self._pairs[sym]

    def name(self, sym: int) -> str:
        sender, service = self._pairs[sym]
        return f"{sender}:{service}"

    def pairs(self) -> list[Pair]:
        return list(self._pairs)

    def __len__(self):
        return len(self._pairs)

    def __contains__(self, pair) -> bool:
        return (pair[0], pair[1]) in self._ids

    def to_json(self) -> str:
        return json.dumps([list(p) for p in self._pairs])

    @classmethod
    def from_json(cls, text: str) -> "SymbolTable":
        return cls(tuple(p) for p in json.loads(text))


@dataclass
class EventSequence:
    symbols: list[int]
    events: list[Event]
    label: TraceLabel = TraceLabel.FAULT_FREE
    name: str = ""

    def __post_init__(self):
        if len(self.symbols) != len(self.events):
            raise ValueError("symbols and events must have equal length")

    def __len__(self):
        return len(self.symbols)

    def pairs(self) -> list[Pair]:
        return [e.pair for e in self.events]

    def select(self, keep: Sequence[int]) -> "EventSequence":
        return EventSequence(
            [self.symbols[i] for i in keep],
            [self.events[i] for i in keep],
            self.label,
            self.name,
        )


@dataclass
class TraceSet:
    training: list[EventSequence]
    idle: list[EventSequence] = field(default_factory=list)
    symbol_table: SymbolTable = field(default_factory=SymbolTable)


def _sort_key(item):
    pos, ev = item
    return (ev.start, ev.sender, ev.service, pos)


def parse_record(obj, path, lineno) -> Event:
    if not isinstance(obj, dict):
        raise SpanParseError(path, lineno, "record is not a JSON object")
    for key, kind in (("trace_id", str), ("sender", str), ("service", str),
                      ("start_us", int), ("duration_us", int), ("layer", str)):
        if key not in obj:
            raise SpanParseError(path, lineno, f"missing field {key!r}")
        val = obj[key]
        if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
            raise SpanParseError(path, lineno, f"field {key!r} must be {kind.__name__}")
    try:
        layer = Layer(obj["layer"])
    except ValueError:
        raise SpanParseError(path, lineno, f"unknown layer {obj['layer']!r}") from None
    try:
        return Event(obj["sender"], obj["service"], obj["start_us"],
                     obj["duration_us"], layer, obj["trace_id"])
    except ValueError as exc:
        raise SpanParseError(path, lineno, str(exc)) from None


def read_spans(path) -> list[Event]:
    """Parse a span file and return its events in collector-timestamp order.

    Ties on start time are broken by (sender, service), then by file order.
    """
    path = Path(path)
    events = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SpanParseError(path, lineno, f"invalid JSON: {exc.msg}") from None
            events.append(parse_record(obj, path, lineno))
    if not events:
        raise EmptyTraceError(f"{path}: no span records")
    return [ev for _, ev in sorted(enumerate(events), key=_sort_key)]


def encode(events: Sequence[Event] | EventSequence, table: SymbolTable) -> list[int]:
    """Map events to symbol ids, registering unseen pairs."""
    if isinstance(events, EventSequence):
        events = events.events
    return [table.register(ev.pair) for ev in events]


def decode(symbols: Sequence[int], table: SymbolTable) -> list[Pair]:
    return [table.decode(s) for s in symbols]


def ingest_spans(path, label: TraceLabel = TraceLabel.FAULT_FREE,
                 table: SymbolTable | None = None) -> EventSequence:
    events = read_spans(path)
    table = table if table is not None else SymbolTable()
    return EventSequence(encode(events, table), events, TraceLabel(label), Path(path).stem)


def write_spans(path, events: Iterable[Event]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_record(), sort_keys=True) + "\n")


def ingest_many(paths: Iterable, label: TraceLabel, table: SymbolTable,
                jobs: int = 1) -> list[EventSequence]:
    """Ingest files in sorted path order.

    Parsing may run on a thread pool; symbol registration always happens in
    sorted-path order so ids do not depend on scheduling.
    """
    paths = sorted(Path(p) for p in paths)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parsed = list(pool.map(read_spans, paths))
    else:
        parsed = [read_spans(p) for p in paths]
    return [EventSequence(encode(evs, table), evs, TraceLabel(label), p.stem)
            for p, evs in zip(paths, parsed)]


def load_trace_set(training_paths, idle_paths=(), table: SymbolTable | None = None,
                   jobs: int = 1) -> TraceSet:
    table = table if table is not None else SymbolTable()
    training = ingest_many(training_paths, TraceLabel.FAULT_FREE, table, jobs)
    idle = ingest_many(idle_paths, TraceLabel.IDLE, table, jobs)
    return TraceSet(training, idle, table)
