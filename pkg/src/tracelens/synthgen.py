"""Synthetic fault-free, idle and fault-injected traces with ground truth.

A workload template is an ordered list of request blocks. Each block is a
client call followed by the internal calls it triggers. Benign variation
comes from two sources: adjacent internal calls marked commutable swap with
probability ``noise``, and background calls are sprinkled in at
Poisson-distributed positions.

Faults edit a noise-only realization of the template, so every generated
trace carries the exact list of events a fault inserted or removed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FaultSpecError
from .trace_model import Event, EventSequence, Layer, Pair, SymbolTable, TraceLabel, write_spans

T0_US = 1_700_000_000_000_000
COMMUTE_RATE = 0.06  # chance that an adjacent internal pair is marked commutable


@dataclass
class RequestBlock:
    client: Pair
    internal: list[Pair]
    commutable: list[tuple[int, int]] = field(default_factory=list)
    error: Pair | None = None

    def error_pair(self) -> Pair:
        return self.error or (self.client[0], f"{self.client[1]}:error")


def corrupt_pair(pair: Pair) -> Pair:
    """The call a component makes instead of ``pair`` after a bad value."""
    return (pair[0], f"{pair[1]}:invalid")


@dataclass
class WorkloadTemplate:
    name: str
    blocks: list[RequestBlock]
    background: list[tuple[Pair, float]] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for b, block in enumerate(self.blocks):
            n = len(block.internal)
            for i, j in block.commutable:
                if j != i + 1 or not (0 <= i and j < n):
                    raise ValueError(f"block {b}: commutable pair ({i}, {j}) is not an "
                                     f"adjacent index pair within {n} internal events")
        for pair, rate in self.background:
            if rate < 0:
                raise ValueError(f"negative background rate for {pair}")

    def canonical(self) -> list[Pair]:
        out = []
        for block in self.blocks:
            out.append(block.client)
            out.extend(block.internal)
        return out

    def workload_pairs(self) -> list[Pair]:
        return list(dict.fromkeys(self.canonical()))

    def symbol_table(self) -> SymbolTable:
        """Table covering every pair the generator can emit, in a fixed order."""
        table = SymbolTable(self.workload_pairs())
        for pair, _ in self.background:
            table.register(pair)
        for block in self.blocks:
            table.register(block.error_pair())
        for pair in self.workload_pairs():
            table.register(corrupt_pair(pair))
        return table

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "blocks": [{
                "client": list(b.client),
                "internal": [list(p) for p in b.internal],
                "commutable": [list(c) for c in b.commutable],
                **({"error": list(b.error)} if b.error else {}),
            } for b in self.blocks],
            "background": [[list(p), r] for p, r in self.background],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "WorkloadTemplate":
        blocks = [RequestBlock(tuple(b["client"]), [tuple(p) for p in b["internal"]],
                               [tuple(c) for c in b.get("commutable", [])],
                               tuple(b["error"]) if b.get("error") else None)
                  for b in d["blocks"]]
        return cls(d["name"], blocks, [(tuple(p), float(r)) for p, r in d.get("background", [])])

    @classmethod
    def from_json(cls, text: str) -> "WorkloadTemplate":
        return cls.from_dict(json.loads(text))


class FaultType(str, Enum):
    THROW_EXCEPTION = "throw_exception"
    WRONG_RETURN_VALUE = "wrong_return_value"
    WRONG_PARAMETER_VALUE = "wrong_parameter_value"
    DELAY = "delay"


@dataclass
class FaultSpec:
    """Where and how a fault is injected.

    ``event`` indexes the internal calls of ``block`` as they occur in the
    realized trace. ``truncate`` caps how many calls an exception removes
    (None removes the rest of the block). ``substitute`` is how many calls a
    wrong value corrupts. ``reorder_window`` > 0 makes a delayed call land
    that many workload calls later.
    """

    fault_type: FaultType
    block: int
    event: int
    manifest: bool = True
    truncate: int | None = None
    error_symbols: int = 1
    substitute: int = 1
    propagate: bool = False
    delay_us: int = 5_000_000
    reorder_window: int = 0

    def __post_init__(self):
        self.fault_type = FaultType(self.fault_type)

    def validate(self, template: WorkloadTemplate):
        if not 0 <= self.block < len(template.blocks):
            raise FaultSpecError(f"block {self.block} out of range "
                                 f"(template has {len(template.blocks)})")
        n = len(template.blocks[self.block].internal)
        if not 0 <= self.event < n:
            raise FaultSpecError(f"event {self.event} out of range for block {self.block} "
                                 f"({n} internal events)")
        if self.truncate is not None and self.truncate < 1:
            raise FaultSpecError("truncate must be >= 1")
        if self.substitute < 1 or self.error_symbols < 0 or self.delay_us < 0:
            raise FaultSpecError("substitute >= 1, error_symbols >= 0, delay_us >= 0 required")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fault_type"] = self.fault_type.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FaultSpec":
        return cls(**d)


@dataclass
class GroundTruth:
    """Positions of background and fault-caused events.

    ``spurious`` and ``background`` index the generated trace. ``missing``
    lists ``(position, pair)`` in the noise-only trace the fault edited.
    """

    background: list[int] = field(default_factory=list)
    spurious: list[int] = field(default_factory=list)
    missing: list[tuple[int, Pair]] = field(default_factory=list)
    failed: bool = False
    fault: FaultSpec | None = None

    @property
    def anomalies(self) -> int:
        return len(self.spurious) + len(self.missing)

    def to_dict(self) -> dict:
        return {
            "background": self.background,
            "spurious": self.spurious,
            "missing": [[p, list(pair)] for p, pair in self.missing],
            "failed": self.failed,
            "fault": self.fault.to_dict() if self.fault else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(list(d["background"]), list(d["spurious"]),
                   [(p, tuple(pair)) for p, pair in d["missing"]], d["failed"],
                   FaultSpec.from_dict(d["fault"]) if d.get("fault") else None)


@dataclass
class GeneratedTrace:
    sequence: EventSequence
    truth: GroundTruth


@dataclass
class _Item:
    pair: Pair
    layer: Layer
    block: int = -1
    index: int = -1  # position within the realized block's internal calls
    background: bool = False


def _entropy(seed):
    if isinstance(seed, np.random.SeedSequence):
        return [int(x) for x in seed.generate_state(4)]
    return seed


def _streams(seed):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(_entropy(seed)).spawn(3)]


def _realize(template: WorkloadTemplate, seed, noise: float) -> tuple[list[_Item], np.random.Generator]:
    swap_rng, bg_rng, time_rng = _streams(seed)
    work: list[_Item] = []
    for b, block in enumerate(template.blocks):
        order = list(range(len(block.internal)))
        draws = swap_rng.random(len(block.commutable))
        for (i, j), u in zip(block.commutable, draws):
            if u < noise:
                order[i], order[j] = order[j], order[i]
        work.append(_Item(block.client, Layer.CLIENT, b))
        work.extend(_Item(block.internal[k], Layer.INTERNAL, b, pos) for pos, k in enumerate(order))

    inserts = []
    for pair, rate in template.background:
        for pos in bg_rng.integers(0, len(work) + 1, size=bg_rng.poisson(rate)):
            inserts.append((int(pos), len(inserts), pair))
    inserts.sort()
    items, k = [], 0
    for p in range(len(work) + 1):
        while k < len(inserts) and inserts[k][0] == p:
            items.append(_Item(inserts[k][2], Layer.INTERNAL, background=True))
            k += 1
        if p < len(work):
            items.append(work[p])
    return items, time_rng


def _materialize(items: Sequence[_Item], time_rng, table: SymbolTable, label: TraceLabel,
                 name: str, delayed: int | None = None, delay_us: int = 0) -> EventSequence:
    n = len(items)
    starts = T0_US + np.cumsum(time_rng.integers(200, 2000, size=n))
    durations = time_rng.integers(50, 1500, size=n)
    events, symbols = [], []
    shift = 0
    for q, it in enumerate(items):
        dur = int(durations[q])
        if q == delayed:
            dur += delay_us
        ev = Event(it.pair[0], it.pair[1], int(starts[q]) + shift, dur, it.layer, name)
        if q == delayed:
            shift += delay_us
        events.append(ev)
        symbols.append(table.register(it.pair))
    return EventSequence(symbols, events, label, name)


def generate_fault_free(template: WorkloadTemplate, seed, noise: float = 0.05,
                        table: SymbolTable | None = None, name: str = "") -> GeneratedTrace:
    """One golden run: canonical expansion plus swap noise plus background."""
    table = table if table is not None else template.symbol_table()
    items, time_rng = _realize(template, seed, noise)
    seq = _materialize(items, time_rng, table, TraceLabel.FAULT_FREE, name or f"ff-{seed}")
    truth = GroundTruth(background=[q for q, it in enumerate(items) if it.background])
    return GeneratedTrace(seq, truth)


def generate_idle(template: WorkloadTemplate, seed, length: float = 5.0,
                  table: SymbolTable | None = None, name: str = "") -> EventSequence:
    """Background-only trace; ``length`` is in units of one workload run."""
    table = table if table is not None else template.symbol_table()
    rng = np.random.default_rng(_entropy(seed))
    items = []
    for pair, rate in template.background:
        items.extend(_Item(pair, Layer.INTERNAL, background=True)
                     for _ in range(rng.poisson(rate * length)))
    order = rng.permutation(len(items))
    items = [items[i] for i in order]
    return _materialize(items, rng, table, TraceLabel.IDLE, name or f"idle-{seed}")


def inject_fault(template: WorkloadTemplate, fault: FaultSpec, seed, noise: float = 0.05,
                 table: SymbolTable | None = None, name: str = "") -> GeneratedTrace:
    """Apply ``fault`` to the noise-only trace that ``seed`` and ``noise`` produce.

    throw_exception: drop the rest of the block from the faulty call on and
    emit the block's error call in its place. wrong_parameter_value: the
    faulty call and up to ``substitute - 1`` followers are replaced by
    corrupted calls. wrong_return_value: the calls after the faulty one are
    corrupted instead. With ``propagate`` the next block loses its internal
    calls. delay: the call's duration grows by ``delay_us``; with a reorder
    window it also moves later in the trace.
    """
    fault.validate(template)
    table = table if table is not None else template.symbol_table()
    base, time_rng = _realize(template, seed, noise)
    name = name or f"fi-{seed}"
    label = TraceLabel.FAULT_INJECTED
    if not fault.manifest:
        seq = _materialize(base, time_rng, table, label, name)
        bg = [q for q, it in enumerate(base) if it.background]
        return GeneratedTrace(seq, GroundTruth(background=bg, failed=False, fault=fault))

    def block_positions(b):
        return [p for p, it in enumerate(base)
                if it.block == b and it.layer == Layer.INTERNAL and not it.background]

    idxs = block_positions(fault.block)
    deleted: set[int] = set()
    inserted: dict[int, list[_Item]] = {}

    def insert_before(p, item):
        inserted.setdefault(p, []).append(item)

    ft = fault.fault_type
    moved = None
    if ft == FaultType.THROW_EXCEPTION:
        stop = len(idxs) if fault.truncate is None else fault.event + fault.truncate
        gone = idxs[fault.event:stop]
        deleted.update(gone)
        err = template.blocks[fault.block].error_pair()
        for _ in range(fault.error_symbols):
            insert_before(gone[0], _Item(err, Layer.INTERNAL, fault.block))
    elif ft in (FaultType.WRONG_PARAMETER_VALUE, FaultType.WRONG_RETURN_VALUE):
        first = fault.event
        if ft == FaultType.WRONG_RETURN_VALUE and fault.event + 1 < len(idxs):
            first = fault.event + 1
        for p in idxs[first:first + fault.substitute]:
            deleted.add(p)
            insert_before(p, _Item(corrupt_pair(base[p].pair), Layer.INTERNAL, fault.block))
        if fault.propagate and fault.block + 1 < len(template.blocks):
            deleted.update(block_positions(fault.block + 1))
    elif ft == FaultType.DELAY:
        src = idxs[fault.event]
        moved = base[src]
        if fault.reorder_window > 0:
            later = [p for p in range(src + 1, len(base)) if not base[p].background]
            if later:
                dest = later[min(fault.reorder_window, len(later)) - 1] + 1
                deleted.add(src)
                insert_before(dest, moved)

    items: list[_Item] = []
    truth = GroundTruth(failed=True, fault=fault)
    delayed = None
    for p in range(len(base) + 1):
        for it in inserted.get(p, ()):
            truth.spurious.append(len(items))
            if it is moved:
                delayed = len(items)
            items.append(it)
        if p == len(base):
            break
        if p in deleted:
            truth.missing.append((p, base[p].pair))
            continue
        if base[p].background:
            truth.background.append(len(items))
        if base[p] is moved and delayed is None:
            delayed = len(items)
        items.append(base[p])
    seq = _materialize(items, time_rng, table, label, name,
                       delayed=delayed if ft == FaultType.DELAY else None,
                       delay_us=fault.delay_us)
    return GeneratedTrace(seq, truth)


def random_fault(template: WorkloadTemplate, rng: np.random.Generator,
                 fault_type: FaultType | str | None = None,
                 manifest_prob: float = 1.0) -> FaultSpec:
    """Draw a fault with a uniformly chosen type (unless given) and location."""
    if fault_type is None:
        fault_type = list(FaultType)[int(rng.integers(len(FaultType)))]
    b = int(rng.integers(len(template.blocks)))
    e = int(rng.integers(len(template.blocks[b].internal)))
    manifest = bool(rng.random() < manifest_prob)
    return FaultSpec(FaultType(fault_type), b, e, manifest=manifest,
                     substitute=int(rng.integers(1, 3)), propagate=bool(rng.random() < 0.5))


def fault_free_corpus(template: WorkloadTemplate, count: int, seed: int, noise: float = 0.05,
                      table: SymbolTable | None = None) -> list[GeneratedTrace]:
    table = table if table is not None else template.symbol_table()
    seeds = np.random.SeedSequence([seed, 0]).generate_state(count)
    return [generate_fault_free(template, s, noise, table, f"ff-{k:04d}")
            for k, s in enumerate(seeds)]


def idle_corpus(template: WorkloadTemplate, count: int, seed: int, length: float = 5.0,
                table: SymbolTable | None = None) -> list[EventSequence]:
    table = table if table is not None else template.symbol_table()
    seeds = np.random.SeedSequence([seed, 1]).generate_state(count)
    return [generate_idle(template, s, length, table, f"idle-{k:04d}") for k, s in enumerate(seeds)]


def fault_campaign(template: WorkloadTemplate, count: int, seed: int, noise: float = 0.05,
                   fault_types: Sequence[FaultType | str] | None = None,
                   manifest_prob: float = 1.0,
                   table: SymbolTable | None = None) -> list[GeneratedTrace]:
    """``count`` fault-injected runs, one fault each.

    Fault types cycle through ``fault_types`` (all four by default) so the
    mix is balanced; locations are random.
    """
    table = table if table is not None else template.symbol_table()
    types = [FaultType(t) for t in (fault_types or list(FaultType))]
    rng = np.random.default_rng([seed, 2])
    run_seeds = np.random.SeedSequence([seed, 3]).generate_state(count)
    out = []
    for k, s in enumerate(run_seeds):
        fault = random_fault(template, rng, types[k % len(types)], manifest_prob)
        out.append(inject_fault(template, fault, s, noise, table, f"exp-{k:04d}"))
    return out


# Component and operation names for the presets. Pure decoration: only the
# distinctness of (sender, service) pairs matters to the analysis.
_COMPONENTS = {
    "nova": ["nova-api", "nova-conductor", "nova-scheduler", "nova-compute"],
    "neutron": ["neutron-server", "neutron-dhcp-agent", "neutron-l3-agent", "neutron-ovs-agent"],
    "cinder": ["cinder-api", "cinder-scheduler", "cinder-volume"],
    "glance": ["glance-api"],
    "keystone": ["keystone"],
}
_VERBS = ["create", "get", "update", "delete", "list", "attach", "detach", "allocate",
          "release", "sync", "notify", "reserve", "commit", "build", "schedule", "bind"]
_NOUNS = ["instance", "volume", "port", "network", "subnet", "router", "floating_ip",
          "keypair", "secgroup", "image", "token", "quota", "host", "allocation", "snapshot"]

# name: (subsystems stressed, workload pairs, client pairs, blocks, workload events,
#        background pairs, background events per trace)
PRESETS = {
    "depl": (("nova", "neutron", "cinder", "glance", "keystone"), 50, 10, 12, 240, 3, 3.0),
    "net": (("neutron", "nova", "keystone"), 34, 7, 10, 209, 3, 3.0),
    "sto": (("cinder", "nova", "glance", "keystone"), 32, 6, 6, 83, 2, 2.0),
}


def build_preset(name: str, seed: int = 7) -> WorkloadTemplate:
    """Template whose size matches one of the three studied workloads.

    ``depl``, ``net`` and ``sto`` target 53, 37 and 34 distinct events and
    243, 212 and 85 events per fault-free run (background included).
    """
    key = name.lower()
    if key not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    subsystems, n_pairs, n_client, n_blocks, n_events, n_bg, bg_events = PRESETS[key]
    rng = np.random.default_rng([seed, sorted(PRESETS).index(key)])

    senders = [c for s in subsystems for c in _COMPONENTS[s]]
    seen: set[Pair] = set()

    def fresh(sender_pool, prefix):
        while True:
            sender = sender_pool[int(rng.integers(len(sender_pool)))]
            svc = (f"{prefix}.{_VERBS[int(rng.integers(len(_VERBS)))]}_"
                   f"{_NOUNS[int(rng.integers(len(_NOUNS)))]}")
            if (sender, svc) not in seen:
                seen.add((sender, svc))
                return (sender, svc)

    clients = [fresh(["tempest"], subsystems[k % len(subsystems)]) for k in range(n_client)]
    internal_pool = [fresh(senders, "rpc") for _ in range(n_pairs - n_client)]
    background = [(fresh(senders, "periodic"), bg_events / n_bg) for _ in range(n_bg)]

    n_internal = n_events - n_blocks
    sizes = rng.multinomial(n_internal - 2 * n_blocks, np.ones(n_blocks) / n_blocks) + 2
    # each pool pair appears at least once, then blocks fill up with repeats
    # drawn from a per-block working set, which is how related calls recur
    order = list(rng.permutation(len(internal_pool)))
    blocks = []
    for b in range(n_blocks):
        size = int(sizes[b])
        mine = [internal_pool[i] for i in order[b::n_blocks]][:size]
        working = [internal_pool[int(i)] for i in rng.choice(len(internal_pool), 6, replace=False)]
        while len(mine) < size:
            mine.append(working[int(rng.integers(len(working)))])
        mine = [mine[i] for i in rng.permutation(size)]
        commutable = []
        i = 0
        while i + 1 < size:
            if mine[i] != mine[i + 1] and rng.random() < COMMUTE_RATE:
                commutable.append((i, i + 1))
                i += 2
            else:
                i += 1
        blocks.append(RequestBlock(clients[b % n_client], mine, commutable))
    return WorkloadTemplate(key, blocks, background)


def write_generated(directory, trace: GeneratedTrace | EventSequence, truth: bool = True) -> Path:
    """Write a trace as span JSON Lines, plus ``<name>.truth.json`` if known."""
    directory = Path(directory)
    seq = trace.sequence if isinstance(trace, GeneratedTrace) else trace
    path = directory / f"{seq.name}.jsonl"
    write_spans(path, seq.events)
    if truth and isinstance(trace, GeneratedTrace):
        (directory / f"{seq.name}.truth.json").write_text(
            json.dumps(trace.truth.to_dict(), sort_keys=True), encoding="utf-8")
    return path


def load_truth(path) -> GroundTruth:
    return GroundTruth.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def truth_path(trace_path) -> Path:
    p = Path(trace_path)
    return p.with_name(p.stem + ".truth.json")

