"""Forward and inverse replacement steps, global index derivations."""
import random

import pytest

from igshape import (
    Edge,
    Heap,
    IsoSet,
    derive_all,
    derive_at,
    derive_leftmost,
    global_derive_all,
    global_inverse_derive_all,
    inverse_derive_all,
    isomorphic,
    match_pattern,
    single_edge_heap,
    substitute_nu,
)

from conftest import ground_instance, random_walk


def _edge_of(heap: Heap, eid: int) -> Edge:
    return heap.edges[eid]


def test_substitute_nu():
    assert substitute_nu(("s", "_nu"), ("z",)) == ("s", "z")
    assert substitute_nu(("_nu",), ("s", "X")) == ("s", "X")
    assert substitute_nu(("s", "z"), None) == ("s", "z")
    assert substitute_nu(("s", "z"), ("s",)) == ("s", "z")


def test_match_pattern(trees):
    rules = {i: r for i, r in trees.grammar.rules_for("B")}
    leaf = rules[5]          # ground pattern z
    nu = rules[0]            # pattern s·ν
    assert match_pattern(leaf, ("z",)) == (True, None)
    assert match_pattern(leaf, ("s", "z"))[0] is False
    ok, rho = match_pattern(nu, ("s", "s", "z"))
    assert ok and rho == ("s", "z")
    ok, rho = match_pattern(nu, ("s", "X"))
    assert ok and rho == ("X",)
    assert match_pattern(nu, ("z",))[0] is False
    assert match_pattern(nu, ("s",))[0] is False  # empty remainder is not allowed


def test_applicable_rules_per_index(trees):
    g = trees.grammar
    by_index = {
        ("z",): 1,        # only the leaf rule
        ("s", "z"): 3,    # both one-child rules plus s·ν with remainder z
        ("s", "s", "z"): 3,
        ("X",): 0,        # nothing consumes a bare index nonterminal
        ("s", "X"): 1,
    }
    for index, count in by_index.items():
        h = single_edge_heap(g.signature, "B", index)
        assert len(derive_all(g, h)) == count, index


def test_replace_identifies_externals(trees):
    g = trees.grammar
    h = single_edge_heap(g.signature, "B", ("s", "z"))
    steps = [s for s in derive_at(g, h, next(iter(h.edges))) if s.rho is None]
    # the two ground s·z rules: child hanging left or right
    assert len(steps) == 2
    shapes = set()
    for s in steps:
        r = s.result
        root = [v for v in r.nodes if v not in (r.null,) and r.field_target(v, "parent") is None]
        assert len(r.nodes) == 3
        child = max(r.nodes)
        assert r.field_target(child, "parent") is not None
        b = [e for e in r.edges.values() if e.label == "B"]
        assert len(b) == 1 and b[0].index == ("z",) and b[0].attached == (r.null, child)
        shapes.add((r.field_target(1, "left"), r.field_target(1, "right")))
    assert shapes == {(child, r.null), (r.null, child)}


def test_nu_step_carries_remainder(trees):
    h = single_edge_heap(trees.signature, "B", ("s", "s", "z"))
    nu_steps = [s for s in derive_all(trees.grammar, h) if s.rho is not None]
    assert {s.rho for s in nu_steps} == {("s", "z"), ("z",)}
    for s in nu_steps:
        for e in s.result.edges.values():
            if e.label == "B":
                assert e.index[-1] == "z" and "_nu" not in e.index


def test_forward_then_inverse_recovers(trees, dll):
    for bundle in (trees, dll):
        g = bundle.grammar
        rng = random.Random(7)
        for trial in range(20):
            subject = random_walk(g, bundle.initial, rng, rng.randrange(1, 3),
                                  index_grammar=bundle.index_grammar)
            for step in derive_all(g, subject)[:3]:
                back = inverse_derive_all(g, step.result)
                assert back
                # every fold is a genuine inverse: it derives the folded heap again
                for b in back:
                    redone = derive_all(g, b.result)
                    assert any(isomorphic(s.result, step.result) for s in redone)
                # when the fired rule keeps the remainder ν in its right-hand
                # side (or is ground), the fold recovers the subject exactly;
                # a rule that drops ν leaves the remainder unconstrained, and
                # the fold is free to pick another index for the summary
                rule = g.rules[step.rule_id]
                keeps = step.rho is None or any(
                    e.index and e.index[-1] == "_nu" for e in rule.rhs.edges.values()
                )
                if keeps:
                    assert any(isomorphic(b.result, subject) for b in back)


def test_variable_on_internal_image_blocks_fold(trees):
    g = trees.grammar
    h = single_edge_heap(g.signature, "B", ("s", "z"))
    step = next(s for s in derive_at(g, h, 0) if s.rho is None)
    derived = step.result
    child = max(derived.nodes)
    root = 1

    plain = inverse_derive_all(g, derived)
    assert len(plain) == 1
    assert isomorphic(plain[0].result, h)

    on_child = derived.with_edges(added=[Edge("n", ("z",), (child,))])
    assert inverse_derive_all(g, on_child) == []

    on_root = derived.with_edges(added=[Edge("n", ("z",), (root,))])
    folded = inverse_derive_all(g, on_root)
    assert len(folded) == 1
    assert any(e.label == "n" for e in folded[0].result.edges.values())


def test_pinned_nodes_block_folds(trees):
    g = trees.grammar
    h = single_edge_heap(g.signature, "B", ("s", "z"))
    derived = next(s for s in derive_at(g, h, 0) if s.rho is None).result
    child = max(derived.nodes)
    assert inverse_derive_all(g, derived, pinned=frozenset([child])) == []
    assert len(inverse_derive_all(g, derived, pinned=frozenset([99]))) == 1


def test_inverse_unifies_remainders(trees):
    g = trees.grammar
    # children of heights 2 and 1 fold through the left-heavy rule only
    h = single_edge_heap(g.signature, "B", ("s", "s", "s", "z"))
    step = next(s for s in derive_all(g, h) if s.rule_id == 1)
    back = inverse_derive_all(g, step.result)
    assert len(back) == 1
    assert back[0].rule_id == 1
    assert back[0].rho == ("s", "z")
    assert isomorphic(back[0].result, h)


def test_global_steps_substitute_everywhere(trees):
    ig = trees.index_grammar
    steps = global_derive_all(ig, trees.initial)
    assert len(steps) == 2
    by_rule = {s.rule_id: s.result for s in steps}
    words = {
        rid: sorted("".join(e.index) for e in res.edges.values() if e.label == "B")
        for rid, res in by_rule.items()
    }
    assert sorted(words.values()) == [["sX", "ssX"], ["sz", "z"]]


def test_global_inverse_round_trip(trees):
    ig = trees.index_grammar
    grounded = next(
        s.result for s in global_derive_all(ig, trees.initial)
        if all(e.index[-1] == "z" for e in s.result.edges.values())
    )
    back = global_inverse_derive_all(ig, grounded)
    assert any(isomorphic(s.result, trees.initial) for s in back)


def test_leftmost_agrees_with_full_exploration(trees):
    g = trees.grammar
    start = single_edge_heap(g.signature, "B", ("s", "z"))

    full = IsoSet()
    frontier = [start]
    seen = IsoSet([start])
    while frontier:
        nxt = []
        for h in frontier:
            for s in derive_all(g, h):
                if s.result.is_concrete():
                    full.add(s.result)
                elif seen.add(s.result):
                    nxt.append(s.result)
        frontier = nxt

    leftmost = IsoSet()
    frontier = [start]
    seen = IsoSet([start])
    while frontier:
        nxt = []
        for h in frontier:
            for s in derive_leftmost(g, h):
                if s.result.is_concrete():
                    leftmost.add(s.result)
                elif seen.add(s.result):
                    nxt.append(s.result)
        frontier = nxt

    assert len(full) == len(leftmost) == 3
    for h in leftmost:
        assert h in full


def test_leftmost_restricts_to_one_edge(trees):
    g = trees.grammar
    h = single_edge_heap(g.signature, "B", ("s", "s", "z"))
    two = next(s for s in derive_all(g, h) if s.rho is not None and s.rho == ("s", "z")).result
    nts = two.nonterminal_edge_ids()
    assert len(nts) == 2
    steps = derive_leftmost(g, two)
    assert steps and all(s.edge_id == min(nts) for s in steps)
    assert {(s.edge_id, s.rule_id) for s in steps} <= {
        (s.edge_id, s.rule_id) for s in derive_all(g, two)
    }
