"""Grammar documents: loading, rule checking, lint findings."""
import pytest

from igshape import (
    GrammarError,
    Heap,
    lint_grammar,
    lint_index_grammar,
    load_grammar,
    load_index_grammar,
    validate,
    well_formed_index,
)

from conftest import DATA, FIXTURES, read_json


@pytest.mark.parametrize("name", ["balanced_trees", "dll", "ab_list", "extra_p", "unproductive"])
def test_fixture_grammars_load_clean(name):
    doc = read_json(FIXTURES / name / "grammar.json")
    assert lint_grammar(doc) == []
    grammar = load_grammar(doc)
    assert grammar.rules


@pytest.mark.parametrize("name", ["balanced_trees", "dll"])
def test_fixture_index_grammars_load_clean(name):
    doc = read_json(FIXTURES / name / "index_grammar.json")
    assert lint_index_grammar(doc) == []
    assert load_index_grammar(doc).rules


@pytest.mark.parametrize(
    "name,code",
    [
        ("bad_index", "bad-index-symbol"),
        ("bad_nu", "nu-discipline"),
        ("bad_rank", "rank-mismatch"),
        ("not_increasing", "not-increasing"),
    ],
)
def test_broken_grammar_documents(name, code):
    doc = read_json(DATA / f"{name}.json")
    findings = lint_grammar(doc)
    assert any(d.code == code for d in findings)
    with pytest.raises(GrammarError) as err:
        load_grammar(doc)
    assert err.value.code == code


@pytest.mark.parametrize(
    "name,code",
    [("bad_arity", "arity-mismatch"), ("bad_label", "unknown-symbol")],
)
def test_broken_heap_documents(name, code):
    heap = Heap.from_document(read_json(DATA / f"{name}.json"))
    assert any(d.code == code for d in validate(heap))


def test_unit_index_rule_is_rejected():
    doc = read_json(DATA / "unit_rule_index.json")
    assert any(d.code == "unit-rule-grammar" for d in lint_index_grammar(doc))
    with pytest.raises(GrammarError):
        load_index_grammar(doc)


def test_rule_accessors(trees):
    pairs = trees.grammar.rules_for("B")
    assert len(pairs) == 6
    ground = sorted(r.pattern for _, r in pairs if not r.has_nu)
    nu = [r for _, r in pairs if r.has_nu]
    assert ground == [("s", "z"), ("s", "z"), ("z",)]
    assert sorted(r.pattern for r in nu) == [("s", "_nu"), ("s", "s", "_nu"), ("s", "s", "_nu")]
    assert all(r.prefix == r.pattern[:-1] for r in nu)
    assert trees.grammar.max_pattern_len() == 2


def test_well_formed_index(trees):
    sig = trees.signature
    assert well_formed_index(sig, ("z",))
    assert well_formed_index(sig, ("s", "s", "z"))
    assert well_formed_index(sig, ("s", "X"))
    assert well_formed_index(sig, ("X",))
    assert not well_formed_index(sig, ())
    assert not well_formed_index(sig, ("s",))
    assert not well_formed_index(sig, ("z", "z"))
    assert not well_formed_index(sig, ("X", "z"))


def test_grammar_document_round_trip(trees):
    doc = trees.grammar.to_document()
    again = load_grammar(doc)
    assert again.signature == trees.signature
    assert len(again.rules) == len(trees.grammar.rules)
    for a, b in zip(again.rules, trees.grammar.rules):
        assert (a.nonterminal, a.pattern) == (b.nonterminal, b.pattern)
        assert a.rhs == b.rhs


def test_rejects_variable_edges_in_rules(trees):
    doc = trees.grammar.to_document()
    doc["rules"][5]["rhs"]["edges"].append(
        {"id": 99, "label": "n", "index": ["z"], "attached": [1]}
    )
    assert any(d.code == "rule-variable-edge" for d in lint_grammar(doc))


def test_rejects_undeclared_nonterminal(trees):
    doc = trees.grammar.to_document()
    doc["rules"][0]["nonterminal"] = "Q"
    assert any(d.code == "unknown-symbol" for d in lint_grammar(doc))
