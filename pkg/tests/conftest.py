"""Shared fixtures: the example bundles plus small sampling helpers."""
from __future__ import annotations

import json
import random
from pathlib import Path
from types import SimpleNamespace

import pytest

from igshape import (
    Heap,
    build_cfg,
    derive_all,
    global_derive_all,
    load_grammar,
    load_index_grammar,
    parse_program,
)

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
DATA = Path(__file__).resolve().parent / "data"


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_bundle(name: str) -> SimpleNamespace:
    base = FIXTURES / name
    grammar = load_grammar(read_json(base / "grammar.json"))
    out = SimpleNamespace(
        name=name,
        grammar=grammar,
        signature=grammar.signature,
        index_grammar=None,
        initial=None,
        target=None,
        program=None,
        cfg=None,
    )
    if (base / "index_grammar.json").exists():
        out.index_grammar = load_index_grammar(read_json(base / "index_grammar.json"))
    if (base / "initial.json").exists():
        out.initial = Heap.from_document(read_json(base / "initial.json"), grammar.signature)
    if (base / "target.json").exists():
        out.target = Heap.from_document(read_json(base / "target.json"), grammar.signature)
    if (base / "program.prog").exists():
        out.program = parse_program((base / "program.prog").read_text(encoding="utf-8"))
        out.cfg = build_cfg(out.program)
    return out


@pytest.fixture(scope="session")
def trees():
    return load_bundle("balanced_trees")


@pytest.fixture(scope="session")
def dll():
    return load_bundle("dll")


@pytest.fixture(scope="session")
def ab_list():
    return load_bundle("ab_list")


@pytest.fixture(scope="session")
def extra_p():
    return load_bundle("extra_p")


@pytest.fixture(scope="session")
def unproductive():
    return load_bundle("unproductive")


def has_index_nonterminal(heap: Heap) -> bool:
    nts = heap.signature.index_nonterminals
    return any(e.index and e.index[-1] in nts for e in heap.edges.values())


def random_walk(grammar, heap, rng: random.Random, steps: int, index_grammar=None) -> Heap:
    """A few random forward steps, mixing graph and global derivations."""
    h = heap
    for _ in range(steps):
        options = list(derive_all(grammar, h))
        if index_grammar is not None:
            options.extend(global_derive_all(index_grammar, h))
        if not options:
            break
        h = rng.choice(options).result
    return h


def ground_instance(grammar, heap, rng: random.Random, index_grammar=None,
                    grow: int = 2, max_items: int = 45) -> Heap:
    """A random concrete heap from a summary.

    Index nonterminals are expanded first (at most ``grow`` growing steps),
    then graph rules run until no summary is left, preferring
    summary-consuming rules once the heap reaches ``max_items``.
    """
    h = heap
    budget = grow
    while index_grammar is not None and has_index_nonterminal(h):
        steps = global_derive_all(index_grammar, h)
        if not steps:
            break
        growing = [s for s in steps if has_index_nonterminal(s.result)]
        closing = [s for s in steps if not has_index_nonterminal(s.result)]
        if budget > 0 and growing and rng.random() < 0.5:
            h = rng.choice(growing).result
            budget -= 1
        elif closing:
            h = rng.choice(closing).result
        else:
            h = rng.choice(steps).result
    while not h.is_concrete():
        steps = derive_all(grammar, h)
        assert steps, "derivation is stuck before reaching a concrete heap"
        if h.size >= max_items:
            count = len(h.nonterminal_edge_ids())
            lean = [s for s in steps if len(s.result.nonterminal_edge_ids()) < count]
            flat = [s for s in steps if len(s.result.nonterminal_edge_ids()) == count]
            steps = lean or flat or steps
        h = rng.choice(steps).result
    return h
