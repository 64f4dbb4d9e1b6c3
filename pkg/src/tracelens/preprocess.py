"""Background-event dictionary built from idle traces."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable

from .trace_model import EventSequence, SymbolTable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BackgroundDictionary:
    symbols: frozenset[int] = field(default_factory=frozenset)

    def __contains__(self, sym) -> bool:
        return sym in self.symbols

    def __len__(self):
        return len(self.symbols)

    def to_json(self, table: SymbolTable) -> str:
        return json.dumps(sorted(list(table.decode(s)) for s in self.symbols))

    @classmethod
    def from_json(cls, text: str, table: SymbolTable) -> "BackgroundDictionary":
        return cls(frozenset(table.register((s, v)) for s, v in json.loads(text)))


def build_background_dictionary(idle: Iterable[EventSequence]) -> BackgroundDictionary:
    syms: set[int] = set()
    for seq in idle:
        syms.update(seq.symbols)
    return BackgroundDictionary(frozenset(syms))


def filter_background(seq: EventSequence, dictionary: BackgroundDictionary) -> EventSequence:
    """Drop every event whose symbol is in the dictionary, keeping order."""
    if not dictionary.symbols:
        return seq
    keep = [i for i, s in enumerate(seq.symbols) if s not in dictionary.symbols]
    if not keep and len(seq):
        log.warning("trace %r consists entirely of background events", seq.name)
    return seq.select(keep)


def overlapping_symbols(dictionary: BackgroundDictionary,
                        training: Iterable[EventSequence]) -> set[int]:
    """Background symbols that also show up in workload traces.

    Such symbols are hidden from the analysis everywhere; callers log them.
    """
    seen: set[int] = set()
    for seq in training:
        seen.update(seq.symbols)
    return seen & dictionary.symbols


def warn_overlap(dictionary: BackgroundDictionary, training, table: SymbolTable | None = None):
    shared = overlapping_symbols(dictionary, training)
    if shared:
        names = sorted(table.name(s) if table else str(s) for s in shared)
        # expected whenever traces were recorded on a live system; filtered below
        log.info("%d background symbol(s) also occur in training traces and are "
                 "filtered there: %s", len(shared), ", ".join(names))
    return shared
