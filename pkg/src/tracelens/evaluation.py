"""Accuracy and cost measurements on trace corpora.

False positives are measured on fault-free traces held out from training:
any anomaly reported for them is a false alarm. False negatives are measured
on failed fault-injection runs, after ignoring every event type that ever
raised a false alarm.
"""

from __future__ import annotations

import csv
import gc
import io
import json
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .classifier import Classifier, ClassificationReport, Label, Mode, Thresholds
from .errors import InsufficientDataError
from .preprocess import BackgroundDictionary, filter_background
from .synthgen import GeneratedTrace, GroundTruth, WorkloadTemplate, fault_campaign, fault_free_corpus
from .trace_model import EventSequence, SymbolTable
from .vmm import estimate_order, train

log = logging.getLogger(__name__)

MODES = (Mode.LCS_ONLY, Mode.LCS_WITH_VMM)


@dataclass
class FpRunConfig:
    n_values: list[int] = field(default_factory=lambda: list(range(5, 21)))
    m: int = 10
    repetitions: int = 30
    thresholds: Thresholds = field(default_factory=Thresholds)
    modes: tuple[Mode, ...] = MODES
    order: int | None = None
    seed: int = 0
    alphabet_size: int | None = None

    def __post_init__(self):
        if any(n < 2 for n in self.n_values):
            raise ValueError("every training-set size must be >= 2")
        if self.m < 1 or self.repetitions < 1:
            raise ValueError("m and repetitions must be positive")
        self.modes = tuple(Mode(m) for m in self.modes)


@dataclass
class FpRow:
    n: int
    mode: Mode
    mean_fp_pct: float
    std_fp_pct: float
    repetitions: int


@dataclass
class FnRow:
    mode: Mode
    failed: int
    undetected: int

    @property
    def fn_pct(self) -> float:
        return 100.0 * self.undetected / self.failed if self.failed else 0.0


@dataclass
class EvalSummary:
    fp: list[FpRow] = field(default_factory=list)
    fn: list[FnRow] = field(default_factory=list)
    uncertain: set[int] = field(default_factory=set)
    details: list[dict] = field(default_factory=list)

    def fp_mean(self, n: int, mode: Mode) -> float:
        for row in self.fp:
            if row.n == n and row.mode == Mode(mode):
                return row.mean_fp_pct
        raise KeyError((n, mode))

    def fn_pct(self, mode: Mode) -> float:
        for row in self.fn:
            if row.mode == Mode(mode):
                return row.fn_pct
        raise KeyError(mode)

    def fp_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "mode", "mean_fp_pct", "std_fp_pct"])
        for r in self.fp:
            w.writerow([r.n, r.mode.value, repr(r.mean_fp_pct), repr(r.std_fp_pct)])
        return buf.getvalue()

    def fn_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "failed", "undetected", "fn_pct"])
        for r in self.fn:
            w.writerow([r.mode.value, r.failed, r.undetected, repr(r.fn_pct)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "false_positives": [{"n": r.n, "mode": r.mode.value, "mean_fp_pct": r.mean_fp_pct,
                                 "std_fp_pct": r.std_fp_pct, "repetitions": r.repetitions}
                                for r in self.fp],
            "false_negatives": [{"mode": r.mode.value, "failed": r.failed,
                                 "undetected": r.undetected, "fn_pct": r.fn_pct} for r in self.fn],
            "uncertain_symbols": sorted(self.uncertain),
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def anomaly_pct(report: ClassificationReport, length: int) -> float:
    return 100.0 * len(report.anomalies) / length


def split_indices(size: int, n: int, m: int, seed: int, rep: int) -> tuple[list[int], list[int]]:
    """Disjoint training (n) and test (m) corpus indices for one repetition."""
    rng = np.random.default_rng([seed, n, rep])
    picks = [int(i) for i in rng.choice(size, n + m, replace=False)]
    return picks[:n], picks[n:]


def _fp_repetition(corpus, n, rep, config):
    train_idx, test_idx = split_indices(len(corpus), n, config.m, config.seed, rep)
    training = [corpus[i] for i in train_idx]
    tests = [corpus[i] for i in test_idx]
    clf = Classifier(training, config.order, config.thresholds, config.alphabet_size)
    anomalies = {mode: 0 for mode in config.modes}
    flagged: set[int] = set()
    length = 0
    for test in tests:
        selection = clf.select(test)
        length += len(test)
        for mode in config.modes:
            report = clf.classify(test, mode, selection)
            anomalies[mode] += len(report.anomalies)
            flagged.update(r.symbol for r in report.anomalies)
    pct = {mode: 100.0 * anomalies[mode] / length for mode in config.modes}
    return pct, flagged


def eval_false_positives(config: FpRunConfig, corpus: Sequence[EventSequence],
                         jobs: int = 1) -> EvalSummary:
    """FP% of held-out fault-free traces, per training-set size and mode.

    Each repetition draws ``n`` training and ``m`` test traces without
    overlap and scores all ``m`` tests against one classifier; its FP% is
    the anomaly count over the total test length. Both modes reuse the same
    reference alignment, so their difference is the model's effect alone.
    """
    need = max(config.n_values) + config.m
    if len(corpus) < need:
        raise InsufficientDataError(f"corpus has {len(corpus)} traces, need {need}")
    tasks = [(n, r) for n in config.n_values for r in range(config.repetitions)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fp_repetition, *zip(*[(corpus, n, r, config)
                                                           for n, r in tasks])))
    else:
        results = [_fp_repetition(corpus, n, r, config) for n, r in tasks]

    summary = EvalSummary()
    per: dict[tuple[int, Mode], list[float]] = {}
    for (n, _), (pct, flagged) in zip(tasks, results):
        summary.uncertain |= flagged
        for mode, value in pct.items():
            per.setdefault((n, mode), []).append(value)
    for n in config.n_values:
        for mode in config.modes:
            vals = np.array(per[(n, mode)])
            summary.fp.append(FpRow(n, mode, float(vals.mean()), float(vals.std()), len(vals)))
    return summary


@dataclass
class Experiment:
    """A fault-injected run after background filtering, with its ground truth.

    ``spurious`` holds positions in the filtered sequence; ``missing`` is the
    multiset of symbols the fault removed.
    """

    sequence: EventSequence
    truth: GroundTruth
    spurious: set[int]
    missing: Counter

    @property
    def failed(self) -> bool:
        return self.truth.failed


def prepare_experiment(trace: GeneratedTrace | tuple[EventSequence, GroundTruth],
                       dictionary: BackgroundDictionary, table: SymbolTable) -> Experiment:
    """Filter background events and translate ground truth to symbols.

    ``table`` must be the table the trace was encoded with.
    """
    seq, truth = (trace.sequence, trace.truth) if isinstance(trace, GeneratedTrace) else trace
    keep = [i for i, s in enumerate(seq.symbols) if s not in dictionary]
    where = {old: new for new, old in enumerate(keep)}
    spurious = {where[p] for p in truth.spurious if p in where}
    missing = Counter(table.register(pair) for _, pair in truth.missing)
    for sym in dictionary.symbols:
        missing.pop(sym, None)
    return Experiment(seq.select(keep), truth, spurious, missing)


def matched_anomalies(report: ClassificationReport, exp: Experiment,
                      ignore: set[int] = frozenset()) -> tuple[int, int]:
    """(ground-truth events recovered, ground-truth events) for one report.

    Spurious events match by position in the injected trace, missing events
    by symbol (as a multiset). Events whose symbol is in ``ignore`` are left
    out on both sides.
    """
    left = Counter({k: v for k, v in exp.missing.items() if k not in ignore})
    spur = {p for p in exp.spurious if exp.sequence.symbols[p] not in ignore}
    hits = 0
    for r in report.records:
        if r.symbol in ignore:
            continue
        if r.label == Label.SPURIOUS and r.position in spur:
            hits += 1
        elif r.label == Label.MISSING and left[r.symbol] > 0:
            left[r.symbol] -= 1
            hits += 1
    return hits, len(spur) + sum(v for k, v in exp.missing.items() if k not in ignore)


def eval_false_negatives(training: Sequence[EventSequence], experiments: Sequence[Experiment],
                         uncertain: set[int], thresholds: Thresholds | None = None,
                         order: int | None = None, modes=MODES,
                         alphabet_size: int | None = None) -> EvalSummary:
    """FN% over failed experiments, ignoring the uncertain event types.

    A failed experiment counts as detected when at least one reported
    anomaly, outside the uncertain set, matches its ground truth.
    """
    failed = [e for e in experiments if e.failed]
    if not failed:
        raise InsufficientDataError("no failed experiments to evaluate")
    clf = Classifier(training, order, thresholds, alphabet_size=alphabet_size)
    summary = EvalSummary(uncertain=set(uncertain))
    undetected = {Mode(m): 0 for m in modes}
    for exp in failed:
        selection = clf.select(exp.sequence)
        row = {"experiment": exp.sequence.name,
               "fault": exp.truth.fault.fault_type.value if exp.truth.fault else None}
        for mode in undetected:
            report = clf.classify(exp.sequence, mode, selection)
            hits, _ = matched_anomalies(report, exp, summary.uncertain)
            row[mode.value] = hits > 0
            if not hits:
                undetected[mode] += 1
        summary.details.append(row)
    summary.fn = [FnRow(m, len(failed), u) for m, u in undetected.items()]
    return summary


@dataclass
class BenchTable:
    rows: list[tuple[str, int, float]] = field(default_factory=list)
    fits: dict[str, tuple[float, float, float]] = field(default_factory=dict)

    def series(self, axis: str) -> tuple[np.ndarray, np.ndarray]:
        pts = [(x, t) for a, x, t in self.rows if a == axis]
        return np.array([p[0] for p in pts], float), np.array([p[1] for p in pts])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis", "value", "seconds"])
        for a, x, t in self.rows:
            w.writerow([a, x, f"{t:.6f}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"rows": [list(r) for r in self.rows],
                "fits": {a: {"slope": s, "intercept": c, "r2": r2}
                         for a, (s, c, r2) in self.fits.items()}}


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares line through (x, y) and its R²."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _timed(fns: Sequence[Callable[[], object]], repeats: int) -> list[float]:
    """Best of ``repeats`` runs of each function, garbage collector paused.

    Same policy as :mod:`timeit`: the minimum is the run least disturbed by
    the rest of the machine. The functions are run round-robin so a slow
    spell on a shared machine touches every point, not a few neighbours.
    """
    for fn in fns:
        fn()  # warm-up
    best = [float("inf")] * len(fns)
    enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(repeats):
            for i, fn in enumerate(fns):
                t0 = time.perf_counter()
                fn()
                best[i] = min(best[i], time.perf_counter() - t0)
    finally:
        if enabled:
            gc.enable()
    return best


def scale_template(template: WorkloadTemplate, factor: int) -> WorkloadTemplate:
    """Template whose runs are ``factor`` back-to-back copies of the original."""
    return WorkloadTemplate(f"{template.name}x{factor}", list(template.blocks) * factor,
                            list(template.background))


def benchmark_scaling(template: WorkloadTemplate,
                      training_counts: Sequence[int] = (5, 10, 15, 20, 25, 30, 35, 40),
                      experiment_counts: Sequence[int] = (250, 500, 1000, 1500, 2000),
                      length_factors: Sequence[int] = (1, 2, 3, 4),
                      fixed_training: int = 10, seed: int = 0, noise: float = 0.05,
                      repeats: int = 5, experiment_repeats: int = 3,
                      order: int | None = None) -> BenchTable:
    """Wall-clock cost of training and classification along three axes.

    ``training``: model training time vs number of fault-free traces.
    ``experiments``: time to classify the first k runs of one fault campaign
    against a fixed training set (model training, reference selection and
    labeling), read at each checkpoint of a single pass; best of
    ``experiment_repeats`` passes.
    ``events``: training time on ``fixed_training`` traces vs trace length.
    """
    table = BenchTable()
    symtab = template.symbol_table()
    corpus = [g.sequence for g in fault_free_corpus(template, max(training_counts, default=0)
                                                    or fixed_training, seed, noise, symtab)]
    d = order if order is not None else estimate_order(corpus).d
    size = len(symtab)

    jobs = [(lambda seqs=[s.symbols for s in corpus[:n]]: train(seqs, d, size))
            for n in training_counts]
    table.rows += [("training", n, t) for n, t in zip(training_counts, _timed(jobs, repeats))]

    if experiment_counts:
        counts = sorted(experiment_counts)
        runs = [g.sequence for g in fault_campaign(template, counts[-1], seed + 1,
                                                   noise, table=symtab)]
        base = corpus[:fixed_training]
        best = [float("inf")] * len(counts)
        for _ in range(experiment_repeats):
            # one pass over the campaign, read off the clock at each checkpoint
            enabled = gc.isenabled()
            gc.disable()
            try:
                t0 = time.perf_counter()
                clf = Classifier(base, d, alphabet_size=size)
                done = 0
                for c, k in enumerate(counts):
                    for seq in runs[done:k]:
                        clf.classify(seq)
                    done = k
                    best[c] = min(best[c], time.perf_counter() - t0)
            finally:
                if enabled:
                    gc.enable()
        table.rows += [("experiments", k, t) for k, t in zip(counts, best)]

    sizes, jobs = [], []
    for f in length_factors:
        big = scale_template(template, f)
        bigtab = big.symbol_table()
        seqs = [g.sequence.symbols for g in fault_free_corpus(big, fixed_training, seed, noise, bigtab)]
        sizes.append(int(np.mean([len(s) for s in seqs])))
        jobs.append(lambda seqs=seqs, k=len(bigtab): train(seqs, d, k))
    table.rows += [("events", n, t) for n, t in zip(sizes, _timed(jobs, repeats))]

    for axis in ("training", "experiments", "events"):
        x, y = table.series(axis)
        if len(x) >= 2:
            table.fits[axis] = linear_fit(x, y)
    return table


def prepare_corpus(traces: Sequence[GeneratedTrace | EventSequence],
                   dictionary: BackgroundDictionary) -> list[EventSequence]:
    return [filter_background(getattr(t, "sequence", t), dictionary) for t in traces]
