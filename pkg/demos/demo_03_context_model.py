"""
What the context model predicts
===============================

A small look at the variable-order model on a toy alphabet: how the
prediction sharpens with context, and how the average log-loss separates
familiar sequences from shuffled ones.
"""

import numpy as np

from tracelens import log_loss, train

alphabet = "abcd"
enc = {ch: i for i, ch in enumerate(alphabet)}
training = ["abcabcabd", "abcabd", "abcabcabcabd"]
model = train([[enc[c] for c in s] for s in training], max_order=3, alphabet_size=4)

###############################################################################
# Longer contexts narrow the guess; unseen contexts fall back to shorter ones.
for ctx in ["", "b", "ab", "cab", "dd"]:
    p = model.distribution([enc[c] for c in ctx])
    print(f"after {ctx!r:6}", "  ".join(f"{ch}={x:.3f}" for ch, x in zip(alphabet, p)))

###############################################################################
# Average bits per event: low on a sequence like the training data, higher
# once the order is scrambled.
rng = np.random.default_rng(0)
seq = [enc[c] for c in "abcabcabcabd"]
print(f"familiar  {log_loss(model, seq):.3f} bits/event")
print(f"shuffled  {np.mean([log_loss(model, list(rng.permutation(seq))) for _ in range(20)]):.3f}"
      " bits/event")
