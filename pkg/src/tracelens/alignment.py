"""Longest-common-subsequence alignment and reference selection.

The production path is Myers' O(ND) greedy diff. Fault-injected traces are
usually near-copies of some fault-free trace, so the edit distance D is small
and the search stays close to linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .errors import ConfigError, UndefinedSimilarityError


@dataclass(frozen=True)
class AlignmentResult:
    lcs_pairs: list[tuple[int, int]]
    only_in_a: list[int]
    only_in_b: list[int]
    len_a: int = 0
    len_b: int = 0
    nlcs: float = field(init=False)

    def __post_init__(self):
        if self.len_a and self.len_b:
            value = len(self.lcs_pairs) / math.sqrt(self.len_a * self.len_b)
        else:
            value = 0.0
        object.__setattr__(self, "nlcs", value)

    @property
    def length(self) -> int:
        return len(self.lcs_pairs)

    def to_dict(self) -> dict:
        return {
            "lcs_pairs": [list(p) for p in self.lcs_pairs],
            "only_in_a": list(self.only_in_a),
            "only_in_b": list(self.only_in_b),
            "len_a": self.len_a,
            "len_b": self.len_b,
            "nlcs": self.nlcs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AlignmentResult":
        return cls([tuple(p) for p in d["lcs_pairs"]], list(d["only_in_a"]),
                   list(d["only_in_b"]), d["len_a"], d["len_b"])


def _myers_middle(a, b, a0, b0, out):
    """Append matched index pairs of a[a0:a0+n] vs b[b0:b0+m] to ``out``."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return
    v = {1: 0}
    history = []
    end_d = None
    for d in range(n + m + 1):
        # history[d] holds the furthest-reaching x per diagonal after step d-1
        history.append(v.copy())
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and v[k - 1] < v[k + 1]):
                x = v[k + 1]
            else:
                x = v[k - 1] + 1
            y = x - k
            while x < n and y < m and a[x] == b[y]:
                x += 1
                y += 1
            v[k] = x
            if x >= n and y >= m:
                end_d = d
                break
        if end_d is not None:
            break

    matches = []
    x, y = n, m
    for d in range(end_d, 0, -1):
        vd = history[d]
        k = x - y
        if k == -d or (k != d and vd[k - 1] < vd[k + 1]):
            pk = k + 1
            px = vd[pk]
            edge_x = px
        else:
            pk = k - 1
            px = vd[pk]
            edge_x = px + 1
        py = px - pk
        edge_y = edge_x - k
        while x > edge_x and y > edge_y:
            x -= 1
            y -= 1
            matches.append((x, y))
        x, y = px, py
    while x > 0 and y > 0:
        x -= 1
        y -= 1
        matches.append((x, y))
    matches.reverse()
    out.extend((i + a0, j + b0) for i, j in matches)


def lcs(a: Sequence[Hashable], b: Sequence[Hashable]) -> AlignmentResult:
    """Align two symbol sequences by a longest common subsequence.

    Common prefix and suffix are matched directly; the middle is solved with
    the Myers traversal, so the returned match set is deterministic.
    """
    n, m = len(a), len(b)
    pre = 0
    while pre < n and pre < m and a[pre] == b[pre]:
        pre += 1
    suf = 0
    while suf < n - pre and suf < m - pre and a[n - 1 - suf] == b[m - 1 - suf]:
        suf += 1

    pairs = [(i, i) for i in range(pre)]
    _myers_middle(a[pre:n - suf], b[pre:m - suf], pre, pre, pairs)
    pairs.extend((n - suf + t, m - suf + t) for t in range(suf))

    in_a = {i for i, _ in pairs}
    in_b = {j for _, j in pairs}
    return AlignmentResult(
        pairs,
        [i for i in range(n) if i not in in_a],
        [j for j in range(m) if j not in in_b],
        n,
        m,
    )


def nlcs(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    """|LCS(a, b)| / sqrt(len(a) * len(b))."""
    if not len(a) or not len(b):
        raise UndefinedSimilarityError("nLCS is undefined for an empty sequence")
    return lcs(a, b).nlcs


def _symbols(seq):
    return seq.symbols if hasattr(seq, "symbols") else seq


def select_reference(test, training: Sequence) -> tuple[int, AlignmentResult]:
    """Pick the training trace most similar to ``test`` by nLCS.

    Ties go to the lowest index. Accepts EventSequences or raw symbol lists.
    """
    if not training:
        raise ConfigError("reference selection needs at least one training trace")
    t = _symbols(test)
    if not len(t):
        raise UndefinedSimilarityError("test trace is empty")
    best_idx, best = -1, None
    for idx, cand in enumerate(training):
        c = _symbols(cand)
        if not len(c):
            raise UndefinedSimilarityError(f"training trace {idx} is empty")
        res = lcs(t, c)
        if best is None or res.nlcs > best.nlcs:
            best_idx, best = idx, res
    return best_idx, best
