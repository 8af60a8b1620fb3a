"""Languages of summaries: enumeration, emptiness, inclusion, confluence."""
import random

import pytest

from igshape import (
    Edge,
    Heap,
    IsoSet,
    PreconditionError,
    confluence_probe,
    derive_all,
    enumerate_bounded,
    includes,
    inverse_language,
    is_empty,
    isomorphic,
    nonempty_witness,
    single_edge_heap,
)

from conftest import random_walk


def balanced_count(height: int) -> int:
    """Number of height-balanced trees of exactly this height, counted by the
    recurrence over the two admissible child-height splits."""
    if height < 0:
        return 1
    a_prev, a = 1, 1  # heights -1 (empty) and 0 (leaf)
    for _ in range(height):
        a_prev, a = a, a * a + 2 * a * a_prev
    return a


def test_balanced_count_recurrence():
    assert [balanced_count(h) for h in range(4)] == [1, 3, 15, 315]


@pytest.mark.parametrize("height,expected", [(0, 1), (1, 3), (2, 15)])
def test_enumeration_matches_count(trees, height, expected):
    index = ("s",) * height + ("z",)
    start = single_edge_heap(trees.signature, "B", index)
    enum = enumerate_bounded(trees.grammar, start)
    assert enum.complete
    assert len(enum.heaps) == expected == balanced_count(height)
    assert all(h.is_concrete() for h in enum.heaps)


def test_enumeration_reports_incomplete(trees):
    start = single_edge_heap(trees.signature, "B", ("s", "s", "z"))
    enum = enumerate_bounded(trees.grammar, start, max_graphs=2)
    assert not enum.complete
    assert len(enum.heaps) <= 2


def test_enumeration_respects_index_cap(dll):
    start = single_edge_heap(dll.signature, "DLL", ("z",))
    enum = enumerate_bounded(dll.grammar, start, max_steps=6)
    # every list of two or more cells, one shape per length, within the bound
    assert len(enum.heaps) >= 3
    assert not enum.complete
    lengths = {
        len([e for e in h.edges.values() if e.label == "next"]) for h in enum.heaps
    }
    assert lengths == set(range(2, len(enum.heaps) + 2))


class TestEmptiness:
    def test_unproductive_summary_is_empty(self, unproductive):
        h = single_edge_heap(unproductive.signature, "U", ("z",))
        assert is_empty(unproductive.grammar, h)
        assert nonempty_witness(unproductive.grammar, h) is None

    def test_ground_tree_summary_is_nonempty(self, trees):
        h = single_edge_heap(trees.signature, "B", ("s", "z"))
        assert not is_empty(trees.grammar, h)

    def test_index_nonterminal_needs_the_index_grammar(self, trees):
        h = single_edge_heap(trees.signature, "B", ("X",))
        assert is_empty(trees.grammar, h)
        assert not is_empty(trees.grammar, h, trees.index_grammar)

    def test_concrete_heap_is_nonempty(self, trees):
        h = Heap(trees.signature, [0, 1], {0: Edge("left", ("z",), (1, 0))}, [0])
        assert not is_empty(trees.grammar, h)

    def test_mixed_heap_with_empty_part_is_empty(self, unproductive):
        sig = unproductive.signature
        h = Heap(
            sig,
            [0, 1, 2],
            {0: Edge("f", ("z",), (1, 2)), 1: Edge("U", ("z",), (0, 2))},
            [0],
        )
        assert is_empty(unproductive.grammar, h)


def test_witness_replays_to_a_concrete_heap(trees):
    h = single_edge_heap(trees.signature, "B", ("s", "s", "z"))
    steps = nonempty_witness(trees.grammar, h)
    assert steps
    assert steps[-1].result.is_concrete()
    # and the witness is itself a derivation: each step applies to its predecessor
    current = h
    for step in steps:
        options = derive_all(trees.grammar, current)
        assert any(
            s.rule_id == step.rule_id and isomorphic(s.result, step.result)
            for s in options
        )
        current = step.result


class TestInclusion:
    def test_derived_heap_is_included(self, trees):
        rng = random.Random(11)
        sup = trees.target
        for _ in range(5):
            sub = random_walk(trees.grammar, sup, rng, rng.randrange(1, 4),
                              index_grammar=trees.index_grammar)
            assert includes(trees.grammar, sub, sup, trees.index_grammar)

    def test_different_heights_are_not_included(self, trees):
        one = single_edge_heap(trees.signature, "B", ("s", "z"))
        two = single_edge_heap(trees.signature, "B", ("s", "s", "z"))
        assert not includes(trees.grammar, one, two)
        assert not includes(trees.grammar, two, one)

    def test_reflexive(self, dll):
        assert includes(dll.grammar, dll.initial, dll.initial, dll.index_grammar)

    def test_rejects_foldable_target(self, trees):
        h = single_edge_heap(trees.signature, "B", ("s", "z"))
        step = derive_all(trees.grammar, h)[0]
        with pytest.raises(PreconditionError):
            includes(trees.grammar, h, step.result)

    def test_rejects_index_foldable_target(self, trees):
        sup = single_edge_heap(trees.signature, "B", ("s", "X"))
        sub = single_edge_heap(trees.signature, "B", ("s", "z"))
        with pytest.raises(PreconditionError):
            includes(trees.grammar, sub, sup, trees.index_grammar)
        # without the index grammar the same target is fully abstract
        assert includes(trees.grammar, sub, sup) in (True, False)

    def test_empty_sub_is_always_included(self, unproductive):
        sig = unproductive.signature
        sub = single_edge_heap(sig, "U", ("z",))
        sup = Heap(sig, [0, 1], {0: Edge("f", ("z",), (1, 0))}, [0])
        assert includes(unproductive.grammar, sub, sup)


class TestConfluenceProbe:
    def test_clean_fixtures(self, trees, dll):
        assert confluence_probe(trees.grammar, max_samples=25) == []
        assert confluence_probe(dll.grammar, max_samples=25) == []

    def test_ambiguous_chain_grammar_is_flagged(self, ab_list):
        violations = confluence_probe(ab_list.grammar, max_samples=25)
        assert violations
        v = violations[0]
        assert v.nonterminal == "S"
        assert len(v.normal_forms) != 1
        # the offending sample really does abstract two ways
        forms = inverse_language(ab_list.grammar, v.sample)
        assert len(forms) == len(v.normal_forms)


def test_inverse_language_of_summary_is_itself(trees):
    h = single_edge_heap(trees.signature, "B", ("s", "X"))
    forms = inverse_language(trees.grammar, h)
    assert len(forms) == 1
    assert isomorphic(forms[0], h)


def test_inverse_language_folds_ground_tree(trees):
    start = single_edge_heap(trees.signature, "B", ("s", "z"))
    enum = enumerate_bounded(trees.grammar, start)
    for g in enum.heaps:
        forms = inverse_language(trees.grammar, g)
        assert len(forms) == 1
        assert isomorphic(forms[0], start)
