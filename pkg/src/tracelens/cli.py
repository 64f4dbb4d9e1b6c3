"""``tracelens`` command line.

Every command reads an optional JSON manifest (``--manifest``); flags given
on the command line override the manifest's fields. Relative paths inside a
manifest are resolved against the manifest's own directory.

Exit codes: 0 success, 1 other tool error, 2 usage, 3 span parse error,
4 configuration error, 5 insufficient or invalid data, 6 missing input file.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import ClassificationReport, Classifier, Mode, Thresholds
from .errors import ConfigError, TraceLensError
from .evaluation import (FpRunConfig, benchmark_scaling, eval_false_negatives,
                         eval_false_positives, prepare_corpus, prepare_experiment)
from .preprocess import (BackgroundDictionary, build_background_dictionary, filter_background,
                         warn_overlap)
from .render import FORMATS, render_report
from .synthgen import (PRESETS, FaultType, WorkloadTemplate, build_preset, fault_campaign,
                       fault_free_corpus, idle_corpus, load_truth, truth_path, write_generated)
from .trace_model import SymbolTable, TraceLabel, ingest_many, load_trace_set
from .vmm import PpmModel, estimate_order, train

log = logging.getLogger("tracelens")

EXIT_USAGE = 2
EXIT_MISSING_INPUT = 6

MODEL_FILE = "model.json"
BACKGROUND_FILE = "background.json"
SYMBOLS_FILE = "symbols.json"
META_FILE = "meta.json"


@dataclass
class RunManifest:
    training: list[str] = field(default_factory=list)
    idle: list[str] = field(default_factory=list)
    experiments: list[str] = field(default_factory=list)
    model: str | None = None
    output: str | None = None
    eps_spurious: float = 0.20
    eps_missing: float = 0.80
    order: int | None = None
    mode: str = "vmm"
    format: str = "text"
    seed: int = 0
    jobs: int = 1
    # synthetic corpora
    preset: str = "depl"
    template: str | None = None
    noise: float = 0.05
    count: int = 40
    idle_count: int = 3
    experiment_count: int = 100
    fault_types: list[str] | None = None
    manifest_prob: float = 1.0
    # evaluation
    n_values: list[int] = field(default_factory=lambda: [5, 10, 15, 20])
    m: int = 10
    repetitions: int = 30
    corpus_size: int = 200
    training_size: int = 20
    uncertain: str | None = None
    # benchmark
    training_counts: list[int] = field(default_factory=lambda: [5, 10, 15, 20, 25, 30, 35, 40])
    experiment_counts: list[int] = field(default_factory=lambda: [250, 500, 1000, 1500, 2000])
    length_factors: list[int] = field(default_factory=lambda: [1, 2, 3, 4])
    repeats: int = 5

    PATH_FIELDS = ("training", "idle", "experiments", "model", "output", "template", "uncertain")

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"manifest not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: manifest must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"{path}: unknown manifest fields {unknown}")
        base = path.parent
        for key in cls.PATH_FIELDS:
            if key not in raw or raw[key] is None:
                continue
            if isinstance(raw[key], list):
                raw[key] = [str(base / p) for p in raw[key]]
            else:
                raw[key] = str(base / raw[key])
        return cls(**raw)

    def override(self, args: argparse.Namespace) -> "RunManifest":
        for f in dataclasses.fields(self):
            val = getattr(args, f.name, None)
            if val is not None and val != []:
                setattr(self, f.name, val)
        return self

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(self.eps_spurious, self.eps_missing)

    def template_obj(self) -> WorkloadTemplate:
        if self.template:
            p = Path(self.template)
            if not p.exists():
                raise FileNotFoundError(f"template not found: {p}")
            return WorkloadTemplate.from_json(p.read_text(encoding="utf-8"))
        return build_preset(self.preset)


def expand(entries, what: str) -> list[Path]:
    """Files named by ``entries``: plain files, directories of ``*.jsonl`` or globs."""
    out: list[Path] = []
    for entry in entries or ():
        p = Path(entry)
        if any(ch in str(entry) for ch in "*?["):
            hits = sorted(glob.glob(str(entry)))
            if not hits:
                raise FileNotFoundError(f"no {what} files match {entry}")
            out += [Path(h) for h in hits]
        elif p.is_dir():
            out += sorted(p.glob("*.jsonl"))
        elif p.exists():
            out.append(p)
        else:
            raise FileNotFoundError(f"{what} file not found: {p}")
    return out


def output_dir(man: RunManifest, default: str) -> Path:
    out = Path(man.output or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


# -- train / analyze --------------------------------------------------------

def cmd_train(man: RunManifest) -> int:
    training_paths = expand(man.training, "training")
    if not training_paths:
        raise ConfigError("no training traces given (manifest 'training' or --training)")
    idle_paths = expand(man.idle, "idle")
    if not idle_paths:
        log.warning("no idle traces: background dictionary is empty, nothing is filtered")
    ts = load_trace_set(training_paths, idle_paths, jobs=man.jobs)
    dictionary = build_background_dictionary(ts.idle)
    warn_overlap(dictionary, ts.training, ts.symbol_table)
    training = [filter_background(s, dictionary) for s in ts.training]
    if man.order is not None:
        order, source = man.order, "override"
    else:
        order, source = estimate_order(training).d, "estimated"
    model = train(training, order, len(ts.symbol_table))

    out = Path(man.output or man.model or "model")
    out.mkdir(parents=True, exist_ok=True)
    _write(out / MODEL_FILE, model.to_json())
    _write(out / BACKGROUND_FILE, dictionary.to_json(ts.symbol_table))
    _write(out / SYMBOLS_FILE, ts.symbol_table.to_json())
    meta = {
        "order": order,
        "order_source": source,
        "alphabet_size": len(ts.symbol_table),
        "contexts": len(model.counts),
        "training": [str(p.resolve()) for p in sorted(training_paths)],
        "idle": [str(p.resolve()) for p in sorted(idle_paths)],
    }
    _write(out / META_FILE, json.dumps(meta, indent=2, sort_keys=True))
    print(f"trained on {len(training)} traces: order {order} ({source}), "
          f"{len(ts.symbol_table)} symbols, {len(model.counts)} contexts -> {out}")
    return 0


@dataclass
class LoadedModel:
    classifier: Classifier
    table: SymbolTable
    dictionary: BackgroundDictionary


def load_model(man: RunManifest) -> LoadedModel:
    if not man.model:
        raise ConfigError("no model directory given (manifest 'model' or --model)")
    root = Path(man.model)
    for name in (MODEL_FILE, BACKGROUND_FILE, SYMBOLS_FILE, META_FILE):
        if not (root / name).exists():
            raise FileNotFoundError(f"model file not found: {root / name}")
    table = SymbolTable.from_json((root / SYMBOLS_FILE).read_text(encoding="utf-8"))
    dictionary = BackgroundDictionary.from_json(
        (root / BACKGROUND_FILE).read_text(encoding="utf-8"), table)
    meta = json.loads((root / META_FILE).read_text(encoding="utf-8"))
    model = PpmModel.from_json((root / MODEL_FILE).read_text(encoding="utf-8"))
    training_paths = expand(meta["training"], "training")
    training = [filter_background(s, dictionary)
                for s in ingest_many(training_paths, TraceLabel.FAULT_FREE, table, man.jobs)]
    order = meta["order"]
    if man.order is not None and man.order != order:
        log.warning("--order %d ignored: the saved model has order %d", man.order, order)
    clf = Classifier(training, order, man.thresholds, alphabet_size=len(table), model=model)
    return LoadedModel(clf, table, dictionary)


def cmd_analyze(man: RunManifest) -> int:
    paths = expand(man.experiments, "experiment")
    if not paths:
        raise ConfigError("no experiment traces given")
    loaded = load_model(man)
    runs = ingest_many(paths, TraceLabel.FAULT_INJECTED, loaded.table, man.jobs)
    fmt = man.format
    out = Path(man.output) if man.output else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for seq in runs:
        seq = filter_background(seq, loaded.dictionary)
        report = loaded.classifier.classify(seq, Mode(man.mode))
        s = report.summary()
        if out:
            _write(out / f"{seq.name}.report.json", report.to_json() + "\n")
            if fmt != "json":
                ext = "txt" if fmt == "text" else "svg"
                _write(out / f"{seq.name}.report.{ext}", render_report(report, fmt))
            print(f"{seq.name}\treference {report.reference_name}\t"
                  f"spurious {s['spurious']}\tmissing {s['missing']}")
        else:
            sys.stdout.write(render_report(report, fmt))
    return 0


def cmd_render(man: RunManifest, report_path: str) -> int:
    p = Path(report_path)
    if not p.exists():
        raise FileNotFoundError(f"report not found: {p}")
    try:
        report = ClassificationReport.from_json(p.read_text(encoding="utf-8"))
    except (KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{p}: not a classification report ({exc})") from None
    text = render_report(report, man.format)
    if man.output:
        _write(Path(man.output), text)
    else:
        sys.stdout.write(text)
    return 0


# -- synthetic corpora and evaluation ---------------------------------------

def cmd_gen(man: RunManifest) -> int:
    template = man.template_obj()
    table = template.symbol_table()
    out = output_dir(man, f"corpus-{template.name}")
    _write(out / "template.json", template.to_json())
    types = [FaultType(t) for t in man.fault_types] if man.fault_types else None
    groups = {
        "training": fault_free_corpus(template, man.count, man.seed, man.noise, table),
        "idle": idle_corpus(template, man.idle_count, man.seed, table=table),
        "experiments": fault_campaign(template, man.experiment_count, man.seed, man.noise,
                                      types, man.manifest_prob, table),
    }
    for sub, items in groups.items():
        (out / sub).mkdir(exist_ok=True)
        for item in items:
            write_generated(out / sub, item)
    manifest = {"training": ["training"], "idle": ["idle"], "experiments": ["experiments"],
                "model": "model", "seed": man.seed}
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
    print(f"{template.name}: {man.count} fault-free, {man.idle_count} idle, "
          f"{man.experiment_count} fault-injected traces -> {out}")
    return 0


def _corpus(man: RunManifest):
    """Fault-free traces (background-filtered), the symbol table and dictionary."""
    if man.training:
        ts = load_trace_set(expand(man.training, "training"), expand(man.idle, "idle"),
                            jobs=man.jobs)
        dictionary = build_background_dictionary(ts.idle)
        return prepare_corpus(ts.training, dictionary), ts.symbol_table, dictionary
    template = man.template_obj()
    table = template.symbol_table()
    traces = fault_free_corpus(template, man.corpus_size, man.seed, man.noise, table)
    dictionary = build_background_dictionary(idle_corpus(template, man.idle_count, man.seed,
                                                         table=table))
    return prepare_corpus(traces, dictionary), table, dictionary


def _fp_config(man: RunManifest, table: SymbolTable) -> FpRunConfig:
    return FpRunConfig(list(man.n_values), man.m, man.repetitions, man.thresholds,
                       order=man.order, seed=man.seed, alphabet_size=len(table))


def cmd_eval_fp(man: RunManifest) -> int:
    corpus, table, _ = _corpus(man)
    summary = eval_false_positives(_fp_config(man, table), corpus, jobs=man.jobs)
    out = output_dir(man, "eval-fp")
    _write(out / "fp.csv", summary.fp_csv())
    _write(out / "fp.json", summary.to_json() + "\n")
    _write(out / "uncertain.json",
           json.dumps(sorted(list(table.decode(s)) for s in summary.uncertain)) + "\n")
    sys.stdout.write(summary.fp_csv())
    return 0


def cmd_eval_fn(man: RunManifest) -> int:
    corpus, table, dictionary = _corpus(man)
    if man.uncertain:
        p = Path(man.uncertain)
        if not p.exists():
            raise FileNotFoundError(f"uncertain-symbol file not found: {p}")
        uncertain = {table.register(tuple(pair)) for pair in json.loads(p.read_text("utf-8"))}
    else:
        uncertain = eval_false_positives(_fp_config(man, table), corpus, jobs=man.jobs).uncertain

    if man.experiments:
        experiments = []
        paths = sorted(expand(man.experiments, "experiment"))
        seqs = ingest_many(paths, TraceLabel.FAULT_INJECTED, table, man.jobs)
        for path, seq in zip(paths, seqs):
            tp = truth_path(path)
            if not tp.exists():
                raise FileNotFoundError(f"ground truth not found: {tp}")
            experiments.append(prepare_experiment((seq, load_truth(tp)), dictionary, table))
    else:
        template = man.template_obj()
        types = [FaultType(t) for t in man.fault_types] if man.fault_types else None
        runs = fault_campaign(template, man.experiment_count, man.seed, man.noise, types,
                              man.manifest_prob, table)
        experiments = [prepare_experiment(g, dictionary, table) for g in runs]

    training = corpus[:man.training_size]
    summary = eval_false_negatives(training, experiments, uncertain, man.thresholds,
                                   man.order, alphabet_size=len(table))
    out = output_dir(man, "eval-fn")
    _write(out / "fn.csv", summary.fn_csv())
    _write(out / "fn.json", summary.to_json() + "\n")
    sys.stdout.write(summary.fn_csv())
    return 0


def cmd_bench(man: RunManifest) -> int:
    table = benchmark_scaling(man.template_obj(), man.training_counts, man.experiment_counts,
                              man.length_factors, seed=man.seed, noise=man.noise,
                              repeats=man.repeats, order=man.order)
    out = output_dir(man, "bench")
    _write(out / "bench.csv", table.to_csv())
    _write(out / "bench.json", json.dumps(table.to_dict(), indent=2) + "\n")
    sys.stdout.write(table.to_csv())
    for axis, (slope, intercept, r2) in table.fits.items():
        print(f"# {axis}: slope {slope:.3g} s/unit, intercept {intercept:.3g} s, R^2 {r2:.3f}")
    return 0


# -- argument parsing ---------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="JSON run manifest; flags override its fields")
    common.add_argument("--eps-spurious", type=float, help="spurious threshold (default 0.20)")
    common.add_argument("--eps-missing", type=float, help="missing threshold (default 0.80)")
    common.add_argument("--order", type=int, help="model order D (default: estimated)")
    common.add_argument("--mode", choices=[m.value for m in Mode], help="lcs or vmm (default)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--jobs", type=int, help="worker parallelism")
    common.add_argument("--format", choices=FORMATS, help="report format (default text)")
    common.add_argument("-o", "--output", help="output directory (file for 'render')")

    corpus = argparse.ArgumentParser(add_help=False)
    corpus.add_argument("--preset", choices=sorted(PRESETS), help="synthetic workload preset")
    corpus.add_argument("--template", help="workload template JSON instead of a preset")
    corpus.add_argument("--noise", type=float, help="benign swap probability")
    corpus.add_argument("--training", nargs="+", help="fault-free trace files or directories")
    corpus.add_argument("--idle", nargs="+", help="idle trace files or directories")

    p = argparse.ArgumentParser(prog="tracelens", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", parents=[common], help="build model and background dictionary")
    sp.add_argument("--training", nargs="+", help="fault-free trace files or directories")
    sp.add_argument("--idle", nargs="+", help="idle trace files or directories")

    sp = sub.add_parser("analyze", parents=[common], help="classify fault-injected traces")
    sp.add_argument("experiments", nargs="*", help="fault-injected trace files or directories")
    sp.add_argument("--model", help="directory written by 'train'")

    sp = sub.add_parser("render", parents=[common], help="re-render a saved JSON report")
    sp.add_argument("report", help="report JSON written by 'analyze'")

    sp = sub.add_parser("gen", parents=[common, corpus], help="generate a synthetic corpus")
    sp.add_argument("--count", type=int, help="fault-free traces (default 40)")
    sp.add_argument("--idle-count", type=int, help="idle traces (default 3)")
    sp.add_argument("--experiment-count", type=int, help="fault-injected traces (default 100)")
    sp.add_argument("--fault-types", nargs="+", choices=[f.value for f in FaultType])
    sp.add_argument("--manifest-prob", type=float, help="chance a fault shows in the trace")

    for name, helptext in (("eval-fp", "false-positive curve vs training size"),
                           ("eval-fn", "false negatives on failed experiments")):
        sp = sub.add_parser(name, parents=[common, corpus], help=helptext)
        sp.add_argument("--n-values", type=_int_list, help="training sizes, e.g. 5,10,15,20")
        sp.add_argument("--m", type=int, help="test traces per repetition (default 10)")
        sp.add_argument("--repetitions", type=int, help="repetitions per size (default 30)")
        sp.add_argument("--corpus-size", type=int, help="generated fault-free traces (default 200)")
        if name == "eval-fn":
            sp.add_argument("--experiments", nargs="+", help="fault-injected traces with truth files")
            sp.add_argument("--experiment-count", type=int, help="generated experiments (default 100)")
            sp.add_argument("--fault-types", nargs="+", choices=[f.value for f in FaultType])
            sp.add_argument("--manifest-prob", type=float)
            sp.add_argument("--training-size", type=int, help="training traces (default 20)")
            sp.add_argument("--uncertain", help="uncertain-symbol JSON from eval-fp")

    sp = sub.add_parser("bench", parents=[common, corpus], help="timing vs scale")
    sp.add_argument("--training-counts", type=_int_list)
    sp.add_argument("--experiment-counts", type=_int_list)
    sp.add_argument("--length-factors", type=_int_list)
    sp.add_argument("--repeats", type=int)
    return p


def configure_logging():
    level = os.environ.get("TRACELENS_LOG", "WARNING").upper()
    if level.isdigit():
        level = int(level)
    elif not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def main(argv=None) -> int:
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        man = RunManifest.load(args.manifest) if args.manifest else RunManifest()
        man.override(args)
        man.thresholds  # validate early
        handlers = {"train": cmd_train, "analyze": cmd_analyze, "gen": cmd_gen,
                    "eval-fp": cmd_eval_fp, "eval-fn": cmd_eval_fn, "bench": cmd_bench}
        if args.command == "render":
            return cmd_render(man, args.report)
        return handlers[args.command](man)
    except TraceLensError as exc:
        print(f"tracelens: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"tracelens: error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except ValueError as exc:
        print(f"tracelens: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
