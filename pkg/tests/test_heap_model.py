"""Heap structure: validation, documents, union, isomorphism, hashing."""
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from igshape import (
    Edge,
    Heap,
    IsoSet,
    Signature,
    UnionUndefinedError,
    canonical_hash,
    find_isomorphism,
    format_index,
    isomorphic,
    single_edge_heap,
    union,
    validate,
)

from conftest import ground_instance, load_bundle

SIG = Signature(
    fields=("f", "g"),
    variables=("x",),
    nonterminals={"N": 2},
    index_terminals=("s", "z"),
    index_nonterminals=("X",),
)


def _heap(nodes, edges, external):
    return Heap(SIG, nodes, edges, external)


class TestSignature:
    def test_rejects_duplicate_labels(self):
        with pytest.raises(ValueError):
            Signature(fields=("f",), variables=("f",))

    def test_rejects_missing_z(self):
        with pytest.raises(ValueError):
            Signature(index_terminals=("s",))

    def test_rejects_reserved_nu(self):
        with pytest.raises(ValueError):
            Signature(index_terminals=("z", "_nu"))

    def test_rejects_zero_rank(self):
        with pytest.raises(ValueError):
            Signature(nonterminals={"N": 0})

    def test_kind_and_arity(self):
        assert SIG.kind("f") == "field"
        assert SIG.kind("x") == "variable"
        assert SIG.kind("N") == "nonterminal"
        assert SIG.arity("f") == 2
        assert SIG.arity("x") == 1
        assert SIG.arity("N") == 2
        with pytest.raises(KeyError):
            SIG.kind("nope")

    def test_document_round_trip(self):
        assert Signature.from_document(SIG.to_document()) == SIG


class TestValidate:
    def test_clean_heap(self):
        h = _heap([0, 1], {0: Edge("f", ("z",), (1, 0)), 1: Edge("x", ("z",), (1,))}, [0])
        assert validate(h) == []

    def test_flags_arity_mismatch(self):
        h = _heap([0, 1], {0: Edge("f", ("z",), (1,))}, [0])
        assert any(d.code == "arity-mismatch" for d in validate(h))

    def test_flags_unknown_label(self):
        h = _heap([0, 1], {0: Edge("q", ("z",), (1, 0))}, [0])
        assert any(d.code == "unknown-symbol" for d in validate(h))

    def test_flags_field_nondeterminism(self):
        h = _heap(
            [0, 1, 2],
            {0: Edge("f", ("z",), (1, 0)), 1: Edge("f", ("z",), (1, 2))},
            [0],
        )
        assert any(d.code == "field-determinism" for d in validate(h))

    def test_flags_duplicate_variable(self):
        h = _heap([0, 1], {0: Edge("x", ("z",), (1,)), 1: Edge("x", ("z",), (0,))}, [0])
        assert any(d.code == "variable-duplicate" for d in validate(h))

    def test_flags_terminal_index(self):
        h = _heap([0, 1], {0: Edge("f", ("s", "z"), (1, 0))}, [0])
        assert any(d.code == "terminal-index" for d in validate(h))

    def test_flags_repeated_external(self):
        h = _heap([0, 1], {}, [0, 0])
        assert any(d.code == "external-repetition" for d in validate(h))

    def test_flags_dangling_attachment(self):
        h = _heap([0, 1], {0: Edge("f", ("z",), (1, 7))}, [0])
        assert any(d.code == "dangling-attachment" for d in validate(h))

    def test_flags_bad_index_word(self):
        h = _heap([0, 1], {0: Edge("N", ("X", "z"), (0, 1))}, [0])
        assert any(d.code == "bad-index-word" for d in validate(h))

    def test_flags_nonterminal_off_null(self):
        h = _heap([0, 1, 2], {0: Edge("N", ("z",), (1, 2))}, [0])
        assert any(d.code == "nonterminal-null-attachment" for d in validate(h))


class TestDocuments:
    def test_round_trip_with_signature(self):
        h = _heap([0, 1, 2], {3: Edge("N", ("s", "X"), (0, 2)), 5: Edge("x", ("z",), (2,))}, [0, 1])
        back = Heap.from_document(h.to_document(include_signature=True))
        assert back == h

    def test_round_trip_fixture(self):
        bundle = load_bundle("balanced_trees")
        doc = bundle.initial.to_document()
        assert Heap.from_document(doc, bundle.signature) == bundle.initial

    def test_rejects_duplicate_nodes(self):
        with pytest.raises(Exception, match="duplicate"):
            Heap.from_document({"nodes": [0, 0], "edges": [], "external": [0]}, SIG)


class TestUnion:
    def test_merges_disjoint_parts(self):
        a = _heap([0, 1], {0: Edge("f", ("z",), (1, 0))}, [0])
        b = _heap([0, 2], {1: Edge("g", ("z",), (2, 0))}, [0])
        m = union(a, b)
        assert set(m.nodes) == {0, 1, 2}
        assert len(m.edges) == 2
        assert validate(m) == []

    def test_shared_edge_must_agree(self):
        a = _heap([0, 1], {0: Edge("f", ("z",), (1, 0))}, [0])
        b = _heap([0, 1], {0: Edge("g", ("z",), (1, 0))}, [0])
        with pytest.raises(UnionUndefinedError):
            union(a, b)

    def test_rejects_external_mismatch(self):
        a = _heap([0, 1], {}, [0])
        b = _heap([0, 1], {}, [0, 1])
        with pytest.raises(UnionUndefinedError):
            union(a, b)

    def test_rejects_invalid_merge(self):
        a = _heap([0, 1, 2], {0: Edge("f", ("z",), (1, 0))}, [0])
        b = _heap([0, 1, 2], {1: Edge("f", ("z",), (1, 2))}, [0])
        with pytest.raises(UnionUndefinedError):
            union(a, b)

    def test_idempotent(self):
        a = _heap([0, 1], {0: Edge("f", ("z",), (1, 0))}, [0])
        assert union(a, a) == a


def _relabeled(heap: Heap, rng: random.Random) -> Heap:
    nodes = list(heap.nodes)
    images = nodes[:]
    rng.shuffle(images)
    perm = dict(zip(nodes, images))
    eids = list(heap.edges)
    new_eids = [e + 100 for e in eids]
    rng.shuffle(new_eids)
    edges = {
        ne: Edge(e.label, e.index, tuple(perm[v] for v in e.attached))
        for ne, (_, e) in zip(new_eids, heap.edges.items())
    }
    return Heap(heap.signature, [perm[v] for v in nodes], edges, [perm[v] for v in heap.external])


_TREES = load_bundle("balanced_trees")
_DLL = load_bundle("dll")


def _sample(seed: int) -> Heap:
    rng = random.Random(seed)
    bundle = _TREES if seed % 2 else _DLL
    return ground_instance(bundle.grammar, bundle.initial, rng,
                           index_grammar=bundle.index_grammar, grow=1, max_items=30)


class TestIsomorphism:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_invariant_under_relabeling(self, seed):
        h = _sample(seed)
        g = _relabeled(h, random.Random(seed + 1))
        assert canonical_hash(g) == canonical_hash(h)
        assert isomorphic(h, g)
        mapping = find_isomorphism(h, g)
        assert mapping is not None
        node_map, _ = mapping
        for v, pos in zip(h.external, range(len(h.external))):
            assert node_map[v] == g.external[pos]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_detects_dropped_edge(self, seed):
        h = _sample(seed)
        some = next(iter(h.edges))
        g = h.with_edges(removed=[some])
        assert not isomorphic(h, g)

    def test_externals_are_pinned(self):
        # Same drawing, externals listed in a different order: not isomorphic.
        a = _heap([0, 1], {0: Edge("f", ("z",), (1, 0))}, [0, 1])
        b = _heap([0, 1], {0: Edge("f", ("z",), (0, 1))}, [0, 1])
        assert not isomorphic(a, b)

    def test_attachment_order_matters(self):
        a = _heap([0, 1, 2], {0: Edge("N", ("z",), (1, 2))}, [0])
        b = _heap([0, 1, 2], {0: Edge("N", ("z",), (2, 1))}, [0])
        assert isomorphic(a, b)  # relabeling can swap the two anonymous nodes
        c = _heap([0, 1], {0: Edge("N", ("z",), (0, 1))}, [0])
        d = _heap([0, 1], {0: Edge("N", ("z",), (1, 0))}, [0])
        assert not isomorphic(c, d)  # null is pinned, so the flip is visible

    def test_index_words_matter(self):
        a = single_edge_heap(SIG, "N", ("s", "z"))
        b = single_edge_heap(SIG, "N", ("z",))
        assert not isomorphic(a, b)


class TestIsoSet:
    def test_deduplicates_relabelings(self):
        h = _sample(3)
        s = IsoSet()
        assert s.add(h)
        assert not s.add(_relabeled(h, random.Random(9)))
        assert len(s) == 1
        assert h in s

    def test_keeps_distinct_heaps(self):
        s = IsoSet()
        assert s.add(single_edge_heap(SIG, "N", ("z",)))
        assert s.add(single_edge_heap(SIG, "N", ("s", "z")))
        assert len(s) == 2


class TestSmallHelpers:
    def test_single_edge_heap_shape(self):
        h = single_edge_heap(SIG, "N", ("s", "X"))
        assert len(h.nodes) == 2
        assert len(h.edges) == 1
        e = next(iter(h.edges.values()))
        assert e.label == "N"
        assert e.index == ("s", "X")
        assert h.external[0] == h.null

    def test_format_index(self):
        assert format_index(("s", "s", "z")) == "ssz"
        assert format_index(("s", "_nu")) == "sν"

    def test_renumbered_is_isomorphic(self):
        h = _relabeled(_sample(5), random.Random(2))
        r = h.renumbered()
        assert list(r.nodes) == list(range(len(h.nodes)))
        assert isomorphic(h, r)

    def test_fresh_ids_do_not_collide(self):
        h = _heap([0, 5], {3: Edge("f", ("z",), (5, 0))}, [0])
        assert h.fresh_node_ids(2) == [6, 7]
        assert h.fresh_edge_ids(1) == [4]
