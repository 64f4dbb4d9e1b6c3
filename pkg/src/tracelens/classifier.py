"""Two-step labeling of LCS differences with the PPM model.

The fault-injected trace is aligned against its most similar fault-free
trace. Matched events are common. Events only in the injected trace are
spurious when the model, trained on the remaining fault-free traces, finds
them unlikely (p < eps_spurious). Events only in the reference are missing
when the model finds them likely (p > eps_missing).
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .alignment import AlignmentResult, select_reference
from .errors import ConfigError, InsufficientDataError
from .trace_model import EventSequence
from .vmm import PpmModel, estimate_order, train

log = logging.getLogger(__name__)


class Label(str, Enum):
    COMMON = "common"
    SPURIOUS = "spurious"
    MISSING = "missing"
    NON_ANOMALOUS = "non_anomalous"


class Mode(str, Enum):
    LCS_ONLY = "lcs"
    LCS_WITH_VMM = "vmm"


class Origin(str, Enum):
    INJECTED = "injected"
    REFERENCE = "reference"


@dataclass(frozen=True)
class Thresholds:
    eps_spurious: float = 0.20
    eps_missing: float = 0.80

    def __post_init__(self):
        for name in ("eps_spurious", "eps_missing"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {val}")
        if self.eps_spurious > self.eps_missing:
            warnings.warn(f"eps_spurious ({self.eps_spurious}) exceeds eps_missing "
                          f"({self.eps_missing})", stacklevel=3)


@dataclass
class EventRecord:
    position: int
    symbol: int
    name: str
    origin: Origin
    label: Label
    probability: float | None = None
    context: list[int] | None = None
    partner: int | None = None  # reference position of a common event

    @property
    def anomalous(self) -> bool:
        return self.label in (Label.SPURIOUS, Label.MISSING)

    def to_dict(self) -> dict:
        d = {
            "position": self.position,
            "symbol": self.symbol,
            "name": self.name,
            "origin": self.origin.value,
            "label": self.label.value,
        }
        if self.probability is not None:
            d["probability"] = self.probability
            d["context"] = self.context
        if self.partner is not None:
            d["partner"] = self.partner
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EventRecord":
        return cls(d["position"], d["symbol"], d["name"], Origin(d["origin"]),
                   Label(d["label"]), d.get("probability"), d.get("context"), d.get("partner"))


@dataclass
class ClassificationReport:
    experiment_id: str
    reference_index: int
    reference_name: str
    mode: Mode
    thresholds: Thresholds
    order: int
    nlcs: float
    records: list[EventRecord] = field(default_factory=list)

    def by_label(self, label: Label) -> list[EventRecord]:
        return [r for r in self.records if r.label == label]

    @property
    def spurious(self) -> list[EventRecord]:
        return self.by_label(Label.SPURIOUS)

    @property
    def missing(self) -> list[EventRecord]:
        return self.by_label(Label.MISSING)

    @property
    def anomalies(self) -> list[EventRecord]:
        return [r for r in self.records if r.anomalous]

    def summary(self) -> dict[str, int]:
        out = {lab.value: 0 for lab in Label}
        for r in self.records:
            out[r.label.value] += 1
        out["anomalies"] = out["spurious"] + out["missing"]
        return out

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "reference_index": self.reference_index,
            "reference_name": self.reference_name,
            "mode": self.mode.value,
            "thresholds": {"eps_spurious": self.thresholds.eps_spurious,
                           "eps_missing": self.thresholds.eps_missing},
            "order": self.order,
            "nlcs": self.nlcs,
            "summary": self.summary(),
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ClassificationReport":
        return cls(d["experiment_id"], d["reference_index"], d.get("reference_name", ""),
                   Mode(d["mode"]), Thresholds(**d["thresholds"]), d["order"], d["nlcs"],
                   [EventRecord.from_dict(r) for r in d["records"]])

    @classmethod
    def from_json(cls, text: str) -> "ClassificationReport":
        return cls.from_dict(json.loads(text))


def _symbol_name(seq: EventSequence, pos: int) -> str:
    ev = seq.events[pos]
    return f"{ev.sender}:{ev.service}"


class Classifier:
    """Classifies fault-injected traces against one fixed training set.

    Leave-one-out models are derived from a single model over all training
    traces and cached per selected reference, so a campaign of many
    experiments trains once.
    """

    def __init__(self, training: Sequence[EventSequence], order: int | None = None,
                 thresholds: Thresholds | None = None, alphabet_size: int | None = None,
                 exclusion: bool = True, skip_anomalous_context: bool = False,
                 model: PpmModel | None = None):
        if len(training) < 2:
            raise ConfigError("classification needs at least two fault-free traces")
        for i, seq in enumerate(training):
            if not len(seq):
                raise InsufficientDataError(f"training trace {i} ({seq.name!r}) is empty")
        if len(training) == 2:
            log.warning("only two training traces: the model is built from a single trace")
        self.training = list(training)
        self.order = order if order is not None else estimate_order(self.training).d
        self.thresholds = thresholds or Thresholds()
        top = max(max(seq.symbols) for seq in self.training) + 1
        self.alphabet_size = max(alphabet_size or 0, top)
        self.exclusion = exclusion
        self.skip_anomalous_context = skip_anomalous_context
        self._full: PpmModel | None = None
        self._models: dict[int, PpmModel] = {}
        if model is not None:
            # a persisted model over exactly these traces skips one training pass
            if model.max_order != self.order or model.trained_on != len(self.training):
                raise ConfigError("supplied model does not match the training set or order")
            self.exclusion = model.exclusion
            self.alphabet_size = max(self.alphabet_size, model.alphabet_size)
            self._full = self._resized(model)

    def _train(self, seqs) -> PpmModel:
        return train((s.symbols for s in seqs), self.order, self.alphabet_size, self.exclusion)

    def model_without(self, ref: int) -> PpmModel:
        """Model trained on every training trace except ``training[ref]``."""
        model = self._models.get(ref)
        if model is None:
            if self._full is None:
                self._full = self._train(self.training)
            model = self._full.leave_out(self._train([self.training[ref]]))
            self._models[ref] = model
        return model

    def select(self, injected: EventSequence) -> tuple[int, AlignmentResult]:
        return select_reference(injected, self.training)

    def _resized(self, model: PpmModel) -> PpmModel:
        if model.alphabet_size == self.alphabet_size:
            return model
        return PpmModel(model.max_order, self.alphabet_size, model.counts, model.totals,
                        model.trained_on, model.exclusion)

    def _widen(self, symbols: Sequence[int]):
        top = max(symbols, default=-1) + 1
        if top > self.alphabet_size:
            # an unseen symbol enlarges the alphabet; counts stay valid but the
            # order -1 base changes, so cached leave-one-out models are stale
            self.alphabet_size = top
            if self._full is not None:
                self._full = self._resized(self._full)
            self._models.clear()

    def classify(self, injected: EventSequence, mode: Mode = Mode.LCS_WITH_VMM,
                 selection: tuple[int, AlignmentResult] | None = None,
                 experiment_id: str | None = None) -> ClassificationReport:
        mode = Mode(mode)
        ref_idx, aln = selection if selection is not None else self.select(injected)
        reference = self.training[ref_idx]
        th = self.thresholds
        self._widen(injected.symbols)
        model = self.model_without(ref_idx) if mode == Mode.LCS_WITH_VMM else None

        inj_label: dict[int, EventRecord] = {}
        ref_label: dict[int, EventRecord] = {}
        partner = {i: j for i, j in aln.lcs_pairs}

        def context(seq, pos, flagged):
            if self.skip_anomalous_context:
                prior = [seq.symbols[k] for k in range(pos) if k not in flagged]
            else:
                prior = seq.symbols[:pos]
            return list(prior[max(0, len(prior) - self.order):]) if self.order else []

        flagged_inj: set[int] = set()
        for i in aln.only_in_a:
            sym = injected.symbols[i]
            rec = EventRecord(i, sym, _symbol_name(injected, i), Origin.INJECTED, Label.SPURIOUS)
            if model is not None:
                ctx = context(injected, i, flagged_inj)
                p = model.predict(ctx, sym)
                rec.probability, rec.context = p, ctx
                if not p < th.eps_spurious:
                    rec.label = Label.NON_ANOMALOUS
            if rec.label == Label.SPURIOUS:
                flagged_inj.add(i)
            inj_label[i] = rec

        flagged_ref: set[int] = set()
        for j in aln.only_in_b:
            sym = reference.symbols[j]
            rec = EventRecord(j, sym, _symbol_name(reference, j), Origin.REFERENCE, Label.MISSING)
            if model is not None:
                ctx = context(reference, j, flagged_ref)
                p = model.predict(ctx, sym)
                rec.probability, rec.context = p, ctx
                if not p > th.eps_missing:
                    rec.label = Label.NON_ANOMALOUS
            if rec.label == Label.MISSING:
                flagged_ref.add(j)
            ref_label[j] = rec

        records = []
        ia = ib = 0
        for i, j in aln.lcs_pairs + [(len(injected), len(reference))]:
            while ib < j:
                records.append(ref_label[ib])
                ib += 1
            while ia < i:
                records.append(inj_label[ia])
                ia += 1
            if i < len(injected):
                records.append(EventRecord(i, injected.symbols[i], _symbol_name(injected, i),
                                           Origin.INJECTED, Label.COMMON, partner=partner[i]))
                ia, ib = i + 1, j + 1

        return ClassificationReport(
            experiment_id if experiment_id is not None else injected.name,
            ref_idx, reference.name, mode, th, self.order, aln.nlcs, records)


def classify(injected: EventSequence, training: Sequence[EventSequence],
             thresholds: Thresholds | None = None, order: int | None = None,
             mode: Mode = Mode.LCS_WITH_VMM, **kwargs) -> ClassificationReport:
    """One-shot classification; builds a throwaway :class:`Classifier`.

    Without an explicit ``order`` the model order is estimated from the
    client-layer structure of the training traces.
    """
    return Classifier(training, order, thresholds, **kwargs).classify(injected, mode)
