"""
False alarms versus training size
=================================

Fault-free runs are held out and classified as if they were experiments.
Anything they report is a false alarm. The model-filtered mode should
report no more than the plain diff, for every training-set size.
"""

from tracelens import (FpRunConfig, Mode, build_background_dictionary, build_preset,
                       eval_false_positives, fault_free_corpus, idle_corpus, prepare_corpus)

template = build_preset("net")
table = template.symbol_table()
dictionary = build_background_dictionary(idle_corpus(template, 3, seed=1, table=table))
corpus = prepare_corpus(fault_free_corpus(template, 60, seed=1, noise=0.08, table=table),
                        dictionary)

###############################################################################
# Ten repetitions per size keep this quick; the acceptance suite uses thirty.
config = FpRunConfig([5, 10, 15, 20], m=10, repetitions=10, seed=1, alphabet_size=len(table))
summary = eval_false_positives(config, corpus)

print(" n   diff only   with model")
for n in config.n_values:
    print(f"{n:2d}   {summary.fp_mean(n, Mode.LCS_ONLY):8.3f}%   "
          f"{summary.fp_mean(n, Mode.LCS_WITH_VMM):8.3f}%")

###############################################################################
# Event types that raised any false alarm are "uncertain" and are ignored
# when false negatives are counted later.
print("uncertain event types:", sorted(table.decode(s) for s in summary.uncertain))
