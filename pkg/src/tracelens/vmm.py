"""Variable-order Markov model learned with PPM, escape method C.

Counts are kept for every context of length 0..D that preceded a symbol in
the training data. Prediction walks from the longest available context down
to the empty one; a context that has seen ``distinct`` different successors
over ``total`` occurrences gives a seen symbol ``count / (total + distinct)``
and escapes with ``distinct / (total + distinct)``. Below order 0 sits a
uniform distribution over the alphabet.

Two variants are provided:

* ``exclusion=True`` (default): symbols already offered at a longer context
  are excluded from the counts of shorter ones and from the uniform base.
* ``exclusion=False``: shorter contexts keep all their counts; the escape
  mass is spread over the symbols not seen at the current context in
  proportion to the lower-order estimate, which keeps the result normalized.

When a context has already seen every symbol still in play there is nothing
to escape to, and the escape mass is zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EncodingError, InsufficientDataError, OrderEstimationError
from .trace_model import EventSequence, Layer

Context = tuple[int, ...]

FORMAT = "tracelens-ppm"
FORMAT_VERSION = 1
DEFAULT_ORDER_CAP = 64


@dataclass(frozen=True)
class OrderEstimate:
    d: int
    per_request_max: list[int] = field(default_factory=list)


def estimate_order(training: Iterable[EventSequence], cap: int = DEFAULT_ORDER_CAP) -> OrderEstimate:
    """Largest number of events issued from one client request to the next.

    Each segment starts at a client-layer event and runs up to, not
    including, the next one. Events before the first client call belong to
    no request and are not counted.
    """
    per_trace = []
    for seq in training:
        starts = [i for i, ev in enumerate(seq.events) if ev.layer == Layer.CLIENT]
        if not starts:
            continue
        bounds = starts + [len(seq)]
        per_trace.append(max(b - a for a, b in zip(bounds, bounds[1:])))
    if not per_trace:
        raise OrderEstimationError(
            "no client-layer events found; supply the model order explicitly")
    return OrderEstimate(min(max(per_trace), cap), per_trace)


class PpmModel:
    """Trained PPM-C predictor. Treat instances as immutable."""

    def __init__(self, max_order: int, alphabet_size: int,
                 counts: dict[Context, dict[int, int]], totals: dict[Context, int],
                 trained_on: int, exclusion: bool = True):
        self.max_order = max_order
        self.alphabet_size = alphabet_size
        self.counts = counts
        self.totals = totals
        self.trained_on = trained_on
        self.exclusion = exclusion

    def __repr__(self):
        return (f"PpmModel(max_order={self.max_order}, alphabet_size={self.alphabet_size}, "
                f"contexts={len(self.counts)}, trained_on={self.trained_on})")

    def _truncate(self, context: Sequence[int]) -> Context:
        if self.max_order == 0:
            return ()
        return tuple(context[-self.max_order:])

    def predict(self, context: Sequence[int], symbol: int) -> float:
        """P(symbol | context); the context is cut to its last D symbols."""
        if not 0 <= symbol < self.alphabet_size:
            raise EncodingError(f"symbol {symbol} outside alphabet of size {self.alphabet_size}")
        if not self.exclusion:
            return float(self.distribution(context)[symbol])
        ctx = self._truncate(context)
        counts, totals = self.counts, self.totals
        excluded: set[int] = set()
        mass = 1.0
        n = len(ctx)
        for k in range(n, -1, -1):
            table = counts.get(ctx[n - k:])
            if table is None:
                continue
            if excluded:
                live = [(s, c) for s, c in table.items() if s not in excluded]
                if not live:
                    continue
                total = sum(c for _, c in live)
                distinct = len(live)
            else:
                total = totals[ctx[n - k:]]
                distinct = len(table)
            c = table.get(symbol, 0)
            if distinct == self.alphabet_size - len(excluded):
                return mass * c / total
            if c:
                return mass * c / (total + distinct)
            mass *= distinct / (total + distinct)
            excluded.update(table)
        return mass / (self.alphabet_size - len(excluded))

    def distribution(self, context: Sequence[int]) -> np.ndarray:
        """Full predictive distribution over the alphabet."""
        if self.exclusion:
            return np.array([self.predict(context, s) for s in range(self.alphabet_size)])
        ctx = self._truncate(context)
        n = len(ctx)
        p = np.full(self.alphabet_size, 1.0 / self.alphabet_size)
        for k in range(0, n + 1):
            table = self.counts.get(ctx[n - k:])
            if not table:
                continue
            total = self.totals[ctx[n - k:]]
            distinct = len(table)
            idx = np.fromiter(table.keys(), dtype=np.int64, count=distinct)
            cnt = np.fromiter(table.values(), dtype=np.float64, count=distinct)
            new = np.zeros_like(p)
            if distinct == self.alphabet_size:
                new[idx] = cnt / total
            else:
                denom = total + distinct
                unseen = np.ones(self.alphabet_size, dtype=bool)
                unseen[idx] = False
                rest = p[unseen]
                new[unseen] = (distinct / denom) * rest / rest.sum()
                new[idx] = cnt / denom
            p = new
        return p

    def log_loss(self, test: Sequence[int]) -> float:
        return log_loss(self, test)

    def leave_out(self, part: "PpmModel") -> "PpmModel":
        """Model trained on everything except the sequences behind ``part``.

        Counting is additive, so subtracting the counts of a sub-model gives
        exactly the model a fresh training run without those sequences
        would produce.
        """
        counts = dict(self.counts)
        totals = dict(self.totals)
        for ctx, sub in part.counts.items():
            table = dict(counts[ctx])
            for s, c in sub.items():
                left = table[s] - c
                if left:
                    table[s] = left
                else:
                    del table[s]
            if table:
                counts[ctx] = table
                totals[ctx] = totals[ctx] - part.totals[ctx]
            else:
                del counts[ctx]
                del totals[ctx]
        return PpmModel(self.max_order, self.alphabet_size, counts, totals,
                        self.trained_on - part.trained_on, self.exclusion)

    def to_dict(self) -> dict:
        contexts = [[list(ctx), sorted([s, c] for s, c in table.items())]
                    for ctx, table in sorted(self.counts.items(), key=lambda kv: (len(kv[0]), kv[0]))]
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "max_order": self.max_order,
            "alphabet_size": self.alphabet_size,
            "exclusion": self.exclusion,
            "trained_on": self.trained_on,
            "contexts": contexts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "PpmModel":
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise ValueError("not a tracelens PPM model (format/version mismatch)")
        counts, totals = {}, {}
        for ctx, pairs in d["contexts"]:
            key = tuple(ctx)
            counts[key] = {s: c for s, c in pairs}
            totals[key] = sum(c for _, c in pairs)
        return cls(d["max_order"], d["alphabet_size"], counts, totals,
                   d["trained_on"], d["exclusion"])

    @classmethod
    def from_json(cls, text: str) -> "PpmModel":
        return cls.from_dict(json.loads(text))


def train(sequences: Iterable[Sequence[int]], max_order: int, alphabet_size: int,
          exclusion: bool = True) -> PpmModel:
    """Count every (context, next symbol) occurrence for context lengths 0..D.

    Contexts near the start of a sequence are simply shorter; no padding.
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    if alphabet_size < 1:
        raise ValueError("alphabet_size must be >= 1")
    counts: dict[Context, dict[int, int]] = {}
    totals: dict[Context, int] = {}
    n_seq = 0
    for seq in sequences:
        seq = tuple(getattr(seq, "symbols", seq))
        if not seq:
            raise InsufficientDataError("cannot train on an empty sequence")
        n_seq += 1
        for i, sym in enumerate(seq):
            if not 0 <= sym < alphabet_size:
                raise EncodingError(f"symbol {sym} outside alphabet of size {alphabet_size}")
            for start in range(i, max(0, i - max_order) - 1, -1):
                ctx = seq[start:i]
                table = counts.get(ctx)
                if table is None:
                    counts[ctx] = {sym: 1}
                    totals[ctx] = 1
                else:
                    table[sym] = table.get(sym, 0) + 1
                    totals[ctx] += 1
    if not n_seq:
        raise InsufficientDataError("no training sequences")
    return PpmModel(max_order, alphabet_size, counts, totals, n_seq, exclusion)


def predict(model: PpmModel, context: Sequence[int], symbol: int) -> float:
    return model.predict(context, symbol)


def log_loss(model: PpmModel, test: Sequence[int]) -> float:
    """Average negative log2-probability of ``test`` under ``model``."""
    test = list(getattr(test, "symbols", test))
    if not test:
        raise InsufficientDataError("log-loss of an empty sequence is undefined")
    d = model.max_order
    acc = 0.0
    for i, sym in enumerate(test):
        acc -= math.log2(model.predict(test[max(0, i - d):i], sym))
    return acc / len(test)
