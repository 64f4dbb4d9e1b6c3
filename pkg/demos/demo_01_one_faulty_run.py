"""
Diagnosing one fault-injected run
=================================

A fault-free corpus of the deployment workload is generated, a model is
trained on it, and a single run with an injected exception is compared
against its closest fault-free trace.
"""

from tracelens import (Classifier, FaultSpec, FaultType, build_background_dictionary, build_preset,
                       fault_free_corpus, filter_background, idle_corpus, inject_fault, render_text)

###############################################################################
# Twenty fault-free runs and three idle runs. The idle runs only contain
# periodic background activity, which becomes the background dictionary.
template = build_preset("depl")
table = template.symbol_table()
runs = fault_free_corpus(template, 20, seed=7, noise=0.05, table=table)
dictionary = build_background_dictionary(idle_corpus(template, 3, seed=7, table=table))
training = [filter_background(g.sequence, dictionary) for g in runs]
print(f"{len(training)} training traces, {len(table)} symbols, "
      f"{len(dictionary.symbols)} background symbols")

###############################################################################
# An exception thrown in the fourth request cuts that request short and
# replaces the rest of it with an error reply.
fault = FaultSpec(FaultType.THROW_EXCEPTION, block=3, event=2)
run = inject_fault(template, fault, seed=7, noise=0.05, table=table)
injected = filter_background(run.sequence, dictionary)

###############################################################################
# The classifier picks the most similar training trace, diffs against it and
# asks the model how surprising each difference is.
clf = Classifier(training, alphabet_size=len(table))
report = clf.classify(injected)
print(render_text(report))

###############################################################################
# Compare with what the generator says really happened.
print("injected error events:", [run.sequence.events[i].pair for i in run.truth.spurious])
print("events that never ran:", [pair for _, pair in run.truth.missing])
print("reported:", report.summary())
