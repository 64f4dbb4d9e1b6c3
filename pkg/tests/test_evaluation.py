from collections import Counter

import numpy as np
import pytest

from tracelens.classifier import Mode
from tracelens.errors import InsufficientDataError
from tracelens.evaluation import (FpRunConfig, benchmark_scaling, eval_false_negatives,
                                  eval_false_positives, linear_fit, matched_anomalies,
                                  prepare_corpus, prepare_experiment, scale_template,
                                  split_indices)
from tracelens.preprocess import build_background_dictionary
from tracelens.synthgen import FaultType, fault_campaign, fault_free_corpus, idle_corpus


@pytest.fixture(scope="module")
def setup(depl):
    table = depl.symbol_table()
    dictionary = build_background_dictionary(idle_corpus(depl, 3, 0, table=table))
    corpus = prepare_corpus(fault_free_corpus(depl, 40, 1, 0.05, table), dictionary)
    return depl, table, dictionary, corpus


def test_split_is_disjoint():
    for rep in range(50):
        tr, te = split_indices(40, 20, 10, seed=3, rep=rep)
        assert len(tr) == 20 and len(te) == 10 and not set(tr) & set(te)
    assert split_indices(40, 5, 10, 3, 0) == split_indices(40, 5, 10, 3, 0)


def test_noise_free_corpus_has_no_false_positives(depl):
    table = depl.symbol_table()
    dictionary = build_background_dictionary(idle_corpus(depl, 3, 0, table=table))
    corpus = prepare_corpus(fault_free_corpus(depl, 12, 0, 0.0, table), dictionary)
    s = eval_false_positives(FpRunConfig([2, 5], m=5, repetitions=3), corpus)
    assert [r.mean_fp_pct for r in s.fp] == [0.0] * 4
    assert s.uncertain == set()


def test_fp_summary_shape_and_determinism(setup):
    _, table, _, corpus = setup
    cfg = FpRunConfig([5, 10], m=5, repetitions=4, seed=2, alphabet_size=len(table))
    a = eval_false_positives(cfg, corpus)
    lines = a.fp_csv().splitlines()
    assert lines[0] == "n,mode,mean_fp_pct,std_fp_pct"
    assert [tuple(l.split(",")[:2]) for l in lines[1:]] == [
        ("5", "lcs"), ("5", "vmm"), ("10", "lcs"), ("10", "vmm")]
    for n in (5, 10):
        assert a.fp_mean(n, Mode.LCS_WITH_VMM) <= a.fp_mean(n, Mode.LCS_ONLY)
    for r in a.fp:
        assert 0.0 <= r.mean_fp_pct <= 100.0
    b = eval_false_positives(cfg, corpus, jobs=2)
    assert a.to_json() == b.to_json()


def test_fp_needs_enough_traces(setup):
    _, _, _, corpus = setup
    with pytest.raises(InsufficientDataError):
        eval_false_positives(FpRunConfig([35], m=10), corpus)
    with pytest.raises(ValueError):
        FpRunConfig([1])


def test_prepare_experiment_remaps_positions(setup):
    depl, table, dictionary, _ = setup
    for run in fault_campaign(depl, 8, 4, table=table):
        exp = prepare_experiment(run, dictionary, table)
        assert all(s not in dictionary for s in exp.sequence.symbols)
        spurious_pairs = sorted(run.sequence.pairs()[p] for p in run.truth.spurious)
        assert sorted(exp.sequence.pairs()[p] for p in exp.spurious) == spurious_pairs
        assert sum(exp.missing.values()) == len(run.truth.missing)


def test_fn_by_fault_type(setup):
    depl, table, dictionary, corpus = setup
    runs = fault_campaign(depl, 24, 5, fault_types=[FaultType.THROW_EXCEPTION, FaultType.DELAY],
                          table=table)
    exps = [prepare_experiment(g, dictionary, table) for g in runs]
    s = eval_false_negatives(corpus[:15], exps, set(), alphabet_size=len(table))
    by_type = Counter((d["fault"], d["lcs"], d["vmm"]) for d in s.details)
    assert by_type == Counter({("throw_exception", True, True): 12, ("delay", False, False): 12})
    assert s.fn_pct(Mode.LCS_ONLY) == s.fn_pct(Mode.LCS_WITH_VMM) == 50.0
    assert s.fn_csv().splitlines()[0] == "mode,failed,undetected,fn_pct"


def test_fn_ignores_uncertain_symbols(setup):
    depl, table, dictionary, corpus = setup
    runs = fault_campaign(depl, 4, 6, fault_types=[FaultType.THROW_EXCEPTION], table=table)
    exps = [prepare_experiment(g, dictionary, table) for g in runs]
    everything = set(range(len(table)))
    s = eval_false_negatives(corpus[:10], exps, everything, alphabet_size=len(table))
    assert s.fn_pct(Mode.LCS_ONLY) == 100.0


def test_fn_needs_failed_experiments(setup):
    depl, table, dictionary, corpus = setup
    runs = fault_campaign(depl, 4, 6, manifest_prob=0.0, table=table)
    exps = [prepare_experiment(g, dictionary, table) for g in runs]
    with pytest.raises(InsufficientDataError):
        eval_false_negatives(corpus[:5], exps, set())


def test_matched_anomalies_counts(setup):
    depl, table, dictionary, corpus = setup
    from tracelens.classifier import Classifier
    run = fault_campaign(depl, 1, 7, fault_types=[FaultType.THROW_EXCEPTION], table=table)[0]
    exp = prepare_experiment(run, dictionary, table)
    rep = Classifier(corpus[:10], alphabet_size=len(table)).classify(exp.sequence, Mode.LCS_ONLY)
    hits, total = matched_anomalies(rep, exp)
    assert total == run.truth.anomalies and 0 < hits <= total


def test_linear_fit():
    x = np.arange(10.0)
    slope, icpt, r2 = linear_fit(x, 3 * x + 1)
    assert slope == pytest.approx(3) and icpt == pytest.approx(1) and r2 == pytest.approx(1)


def test_scale_template(depl):
    big = scale_template(depl, 2)
    assert big.canonical() == depl.canonical() * 2


def test_benchmark_small(depl):
    t = benchmark_scaling(depl, training_counts=(2, 4, 6), experiment_counts=(5, 10),
                          length_factors=(1, 2), fixed_training=4, repeats=1,
                          experiment_repeats=1, order=10)
    for axis in ("training", "experiments", "events"):
        x, y = t.series(axis)
        assert list(x) == sorted(x) and (y > 0).all()
        assert axis in t.fits
    assert t.to_csv().splitlines()[0] == "axis,value,seconds"


def test_doubling_trace_length_doubles_training_time(depl):
    # wall-clock timing on a shared machine: take the median of several ratios
    ratios = []
    for seed in range(5):
        t = benchmark_scaling(depl, training_counts=(), experiment_counts=(),
                              length_factors=(1, 2), fixed_training=20, repeats=5, seed=seed)
        (_, y) = t.series("events")
        ratios.append(y[1] / y[0])
    assert 1.5 <= float(np.median(ratios)) <= 3.0, ratios
