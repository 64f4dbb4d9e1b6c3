import itertools
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_seq
from oracles import is_common_subsequence, lcs_brute, lcs_dp
from tracelens.alignment import AlignmentResult, lcs, nlcs, select_reference
from tracelens.errors import ConfigError, UndefinedSimilarityError


def check_shape(res, a, b):
    assert is_common_subsequence(res.lcs_pairs, a, b)
    assert len(res.lcs_pairs) + len(res.only_in_a) == len(a)
    assert len(res.lcs_pairs) + len(res.only_in_b) == len(b)
    assert res.only_in_a == sorted(res.only_in_a) and res.only_in_b == sorted(res.only_in_b)


def test_textbook_example():
    res = lcs("ABCBDAB", "BDCABA")
    assert res.length == 4 == lcs_brute("ABCBDAB", "BDCABA")
    check_shape(res, "ABCBDAB", "BDCABA")


def test_identity_and_disjoint():
    a = list("abcabc")
    res = lcs(a, a)
    assert res.length == 6 and not res.only_in_a and not res.only_in_b
    res = lcs("abc", "xyz")
    assert res.length == 0 and res.only_in_a == [0, 1, 2] and res.only_in_b == [0, 1, 2]
    assert res.nlcs == 0.0


def test_empty_inputs():
    assert lcs([], "ab").length == 0
    assert lcs("ab", []).only_in_a == [0, 1]
    with pytest.raises(UndefinedSimilarityError):
        nlcs([], "a")


def test_exhaustive_small_against_brute_force():
    seqs = [s for k in range(4) for s in itertools.product(range(3), repeat=k)]
    for a in seqs:
        for b in seqs:
            res = lcs(a, b)
            assert res.length == lcs_brute(a, b), (a, b)
            check_shape(res, a, b)


def test_random_against_dp():
    rng = random.Random(42)
    for _ in range(200):
        a = [rng.randrange(5) for _ in range(rng.randrange(0, 80))]
        b = [rng.randrange(5) for _ in range(rng.randrange(0, 80))]
        res = lcs(a, b)
        assert res.length == lcs_dp(a, b)
        check_shape(res, a, b)


def test_near_identical_traces():
    rng = random.Random(1)
    a = [rng.randrange(30) for _ in range(300)]
    b = a[:]
    del b[100:110]
    b.insert(50, 99)
    res = lcs(a, b)
    assert res.length == lcs_dp(a, b) == 290
    assert len(res.only_in_a) == 10
    assert res.only_in_b == [50]


def test_nlcs_values():
    assert nlcs("AAB", "AB") == pytest.approx(2 / math.sqrt(6), abs=1e-12)
    assert nlcs(list(range(10)), list(range(10))) == 1.0
    assert nlcs("ab", "cd") == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 3), max_size=25), st.lists(st.integers(0, 3), max_size=25),
       st.integers(0, 3))
def test_properties(a, b, extra):
    res = lcs(a, b)
    check_shape(res, a, b)
    # removing the unmatched positions leaves the same string on both sides
    keep_a = [x for i, x in enumerate(a) if i not in set(res.only_in_a)]
    keep_b = [x for j, x in enumerate(b) if j not in set(res.only_in_b)]
    assert keep_a == keep_b
    assert lcs(a + [extra], b + [extra]).length >= res.length
    if a and b:
        assert nlcs(a, b) == pytest.approx(nlcs(b, a), abs=1e-15)
        assert 0.0 <= nlcs(a, b) <= 1.0
        assert nlcs(a, a) == 1.0


def test_deterministic():
    a, b = list("abacabadabacaba"), list("bacabadacabab")
    assert lcs(a, b) == lcs(a, b)


def test_result_json_round_trip():
    res = lcs("abcd", "acd")
    assert AlignmentResult.from_dict(res.to_dict()) == res


def test_select_reference_exact_copy():
    test = make_seq("abcdef")
    other = make_seq("abzzzf")
    idx, res = select_reference(test, [other, test])
    assert idx == 1 and res.nlcs == 1.0


def test_select_reference_prefers_more_similar():
    rng = random.Random(5)
    base = [rng.randrange(20) for _ in range(100)]
    close = base[:]
    del close[10:20]        # nlcs 90/sqrt(100*90)
    far = base[:60]         # nlcs 60/sqrt(100*60)
    assert lcs_dp(base, close) == 90 and lcs_dp(base, far) == 60
    idx, res = select_reference(base, [far, close])
    assert idx == 1
    assert res.nlcs == pytest.approx(90 / math.sqrt(9000))


def test_select_reference_ties_and_errors():
    idx, _ = select_reference("ab", ["ax", "ay", "az"])
    assert idx == 0
    with pytest.raises(ConfigError):
        select_reference("ab", [])
    with pytest.raises(UndefinedSimilarityError):
        select_reference("", ["ab"])
