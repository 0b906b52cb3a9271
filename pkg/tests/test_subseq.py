import random

import pytest
from hypothesis import given, strategies as st
from scipy import stats

from oracles import all_subsequences, chi2_closed_form, mine_bruteforce
from trajmine.subseq import (
    chi2_sf_1dof,
    contains,
    discriminate,
    format_pattern,
    mine_frequent,
    parse_pattern,
    pearson_2x2,
)

seq_st = st.lists(st.sampled_from("ABC"), min_size=1, max_size=8).map(tuple)


def test_contains_worked_pair(worked_pair):
    p1, _ = worked_pair
    assert contains(p1, ("BLD", "INF"))
    assert not contains(p1, ("INF", "BLD"))
    assert contains(p1, ("BLD", "DTH"))
    assert not contains(("BLD",), ("BLD", "BLD"))
    assert contains(p1, ())


@given(seq_st, st.lists(st.sampled_from("ABC"), max_size=5).map(tuple))
def test_contains_matches_enumeration(seq, pat):
    assert contains(seq, pat) == (pat in all_subsequences(seq))
    assert contains(seq, seq)
    for c in seq:
        assert contains(seq, (c,))


def test_pattern_text_roundtrip():
    assert format_pattern(("BLD", "INF")) == "BLD-INF"
    assert parse_pattern("BLD-INF") == ("BLD", "INF")


def test_mine_recurrent_bleeding():
    group = [("BLD", "BLD"), ("BLD", "INF", "BLD"), ("BLD", "BLD", "BLD", "DTH")]
    res = {r.pattern: r.support for r in mine_frequent(group, 0.5, 3)}
    assert res[("BLD",)] == 1.0 and res[("BLD", "BLD")] == 1.0
    top = mine_frequent(group, 0.5, 3)
    assert [r.pattern for r in top[:2]] == [("BLD",), ("BLD", "BLD")]


def test_mine_unary_only():
    res = mine_frequent([("B", "I"), ("I", "B")], 1.0, 1)
    assert [(r.pattern, r.support) for r in res] == [(("B",), 1.0), (("I",), 1.0)]
    assert all(len(r.pattern) == 1 for r in mine_frequent([("B", "I"), ("I", "B")], 1.0, 2))


def test_mine_counts_each_patient_once():
    res = {r.pattern: r.count for r in mine_frequent([("A", "A", "A"), ("B",)], 0.1, 2)}
    assert res[("A",)] == 1 and res[("A", "A")] == 1


def test_mine_argument_checks():
    with pytest.raises(ValueError):
        mine_frequent([], 0.5, 2)
    with pytest.raises(ValueError):
        mine_frequent([("A",)], 0.0, 2)
    with pytest.raises(ValueError):
        mine_frequent([("A",)], 0.5, 0)


def test_mine_matches_bruteforce():
    rng = random.Random(21)
    seqs = [tuple(rng.choice("ABCDE") for _ in range(rng.randint(1, 10))) for _ in range(50)]
    got = {r.pattern: r.count for r in mine_frequent(seqs, 0.1, 3)}
    assert got == mine_bruteforce(seqs, "ABCDE", 0.1, 3)


@given(st.lists(seq_st, min_size=1, max_size=15), st.sampled_from([0.05, 0.2, 0.5, 1.0]))
def test_mine_closure_and_antimonotone(seqs, min_support):
    res = mine_frequent(seqs, min_support, 4)
    sup = {r.pattern: r.support for r in res}
    for pat, s in sup.items():
        assert 0 <= s <= 1
        if len(pat) > 1:
            assert pat[:-1] in sup and sup[pat[:-1]] >= s
            for k in range(len(pat)):
                sub = pat[:k] + pat[k + 1:]
                assert sup[sub] >= s
    keys = [(-r.support, len(r.pattern), r.pattern) for r in res]
    assert keys == sorted(keys)


def test_chi2_perfect_separation():
    chi2, p, sign, degenerate = pearson_2x2(30, 0, 0, 30)
    assert chi2 == 60.0 == chi2_closed_form(30, 0, 0, 30)
    assert p < 1e-10 and sign == "+" and not degenerate


def test_chi2_homogeneous():
    chi2, p, _, degenerate = pearson_2x2(10, 20, 5, 10)
    assert chi2 == 0.0 and p == 1.0 and not degenerate


def test_chi2_degenerate_margin():
    chi2, p, _, degenerate = pearson_2x2(10, 0, 20, 0)
    assert (chi2, p, degenerate) == (0.0, 1.0, True)


@pytest.mark.parametrize("x", [1e-6, 0.01, 0.5, 1.0, 2.706, 3.841, 6.635, 10.0, 25.0, 60.0, 120.0])
def test_chi2_sf_reference(x):
    ref = stats.chi2.sf(x, 1)
    assert abs(chi2_sf_1dof(x) - ref) <= 1e-8 * ref


def test_chi2_matches_scipy_contingency():
    rng = random.Random(2)
    for _ in range(200):
        a, b, c, d = (rng.randint(1, 60) for _ in range(4))
        chi2, p, sign, _ = pearson_2x2(a, b, c, d)
        ref = stats.chi2_contingency([[a, b], [c, d]], correction=False)
        assert chi2 == pytest.approx(ref.statistic, rel=1e-10)
        assert p == pytest.approx(ref.pvalue, rel=1e-8)
        expected = ref.expected_freq[0][0]
        assert sign == ("+" if a > expected + 1e-9 else "-" if a < expected - 1e-9 else "0")


@given(st.integers(0, 40), st.integers(0, 40), st.integers(0, 40), st.integers(0, 40))
def test_chi2_swap_groups(a, b, c, d):
    x1, p1, s1, _ = pearson_2x2(a, b, c, d)
    x2, p2, s2, _ = pearson_2x2(c, d, a, b)
    assert x1 == pytest.approx(x2) and p1 == pytest.approx(p2)
    flip = {"+": "-", "-": "+", "0": "0"}
    assert s2 == flip[s1]


def test_discriminate_ranks_recurrent_bleeding_first():
    rng = random.Random(5)
    g1 = [("BLD",) * rng.randint(3, 6) for _ in range(99)] + [("BLD", "INF")]
    g2 = [tuple(rng.choice(["INF", "ARR", "BLD", "NEU"]) for _ in range(rng.randint(1, 3))) for _ in range(300)]
    res = discriminate(g1, g2, [("BLD", "BLD", "BLD"), ("INF",), ("ARR",)])
    top = res[0]
    assert top.pattern == ("BLD", "BLD", "BLD")
    assert top.residual_sign_g1 == "+" and top.support_g1 > 0.98 and top.p_value < 1e-10
    assert [r.p_value for r in res] == sorted(r.p_value for r in res)


def test_discriminate_default_candidates():
    g1 = [("A", "A")] * 20
    g2 = [("B",)] * 20
    res = discriminate(g1, g2)
    assert {r.pattern for r in res} == {("A",), ("A", "A"), ("B",)}
    assert res[0].chi2 == pytest.approx(40.0)


def test_discriminate_identical_groups():
    res = discriminate([("A", "B")] * 5, [("A", "B")] * 7)
    assert all(r.degenerate and r.p_value == 1.0 for r in res)
    with pytest.raises(ValueError):
        discriminate([], [("A",)])
