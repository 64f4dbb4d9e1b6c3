"""Anomaly detection in fault-injection traces.

Fault-injected runs are aligned against the most similar fault-free run by
longest common subsequence; the differences are then kept or dismissed by a
variable-order Markov model trained on the remaining fault-free runs.
"""

from .alignment import AlignmentResult, lcs, nlcs, select_reference
from .classifier import (ClassificationReport, Classifier, EventRecord, Label, Mode, Origin,
                         Thresholds, classify)
from .errors import (ConfigError, DataError, EmptyTraceError, EncodingError, FaultSpecError,
                     InsufficientDataError, OrderEstimationError, SpanParseError, TraceLensError,
                     UndefinedSimilarityError)
from .evaluation import (EvalSummary, FpRunConfig, benchmark_scaling, eval_false_negatives,
                         eval_false_positives, prepare_corpus, prepare_experiment)
from .preprocess import BackgroundDictionary, build_background_dictionary, filter_background
from .render import render_report, render_svg, render_text
from .synthgen import (FaultSpec, FaultType, GeneratedTrace, GroundTruth, RequestBlock,
                       WorkloadTemplate, build_preset, fault_campaign, fault_free_corpus,
                       generate_fault_free, generate_idle, idle_corpus, inject_fault)
from .trace_model import (Event, EventSequence, Layer, SymbolTable, TraceLabel, TraceSet,
                          ingest_spans, load_trace_set, read_spans, write_spans)
from .vmm import PpmModel, estimate_order, log_loss, predict, train

__version__ = "0.1.0"
