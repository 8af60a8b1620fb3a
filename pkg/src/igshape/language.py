"""Language-level questions about grammars and heaps.

A heap's language is the set of concrete heaps derivable from it.  This
module answers the questions the analysis needs: bounded enumeration,
emptiness (decided on the indexed-string-grammar translation through an
alternating automaton over the index alphabet), the inverse language
(normal forms of backward rewriting), inclusion between a heap's language
and a fully abstract summary, and a sampling probe for backward confluence.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import PreconditionError, SaturationLimitError
from .grammar import Grammar, IndexGrammar, well_formed_index
from .heap import Z, Heap, IsoSet, canonical_hash, isomorphic, single_edge_heap
from .rewriting import (
    Step,
    derive_all,
    derive_leftmost,
    global_derive_all,
    global_inverse_derive_all,
    inverse_derive_all,
    match_pattern,
)

__all__ = [
    "Enumeration",
    "enumerate_bounded",
    "inverse_language",
    "StringRule",
    "to_indexed_string_grammar",
    "heap_word",
    "is_empty",
    "nonempty_witness",
    "includes",
    "ProbeViolation",
    "confluence_probe",
]


@dataclass
class Enumeration:
    """Terminal heaps found within the bounds, and whether that is all of them."""

    heaps: list[Heap]
    complete: bool
    visited: int


def _max_index_len(heap: Heap) -> int:
    return max((len(e.index) for e in heap.edges.values()), default=0)


def enumerate_bounded(
    grammar: Grammar,
    start: Heap,
    max_steps: int = 64,
    max_index_len: int = 8,
    max_graphs: int | None = None,
) -> Enumeration:
    """All concrete heaps derivable from ``start``, up to isomorphism.

    Explores leftmost derivations only, which reach the same terminal heaps
    as the full step relation.  Derivation depth beyond ``max_steps``, an
    intermediate index longer than ``max_index_len``, or more than
    ``max_graphs`` explored states marks the result incomplete; with
    ``complete`` set, the list is the entire language.
    """
    visited = IsoSet([start])
    frontier = [start]
    terminal = IsoSet()
    complete = True
    if start.is_concrete():
        terminal.add(start)
    for _ in range(max_steps):
        if not frontier:
            break
        level = []
        for h in frontier:
            if max_graphs is not None and len(visited) > max_graphs:
                return Enumeration(list(terminal), False, len(visited))
            for step in derive_leftmost(grammar, h):
                r = step.result
                if _max_index_len(r) > max_index_len:
                    complete = False
                    continue
                if not visited.add(r):
                    continue
                if r.is_concrete():
                    terminal.add(r)
                else:
                    level.append(r)
        frontier = level
    if frontier:
        complete = False
    return Enumeration(list(terminal), complete, len(visited))


def inverse_language(
    grammar: Grammar, heap: Heap, pinned: frozenset[int] = frozenset()
) -> list[Heap]:
    """Normal forms of backward rewriting reachable from ``heap``.

    Every inverse step strictly shrinks the heap, so the search always
    terminates; the result is non-empty (at worst ``heap`` itself is
    normal) and deduplicated up to isomorphism.  ``pinned`` is forwarded
    to :func:`inverse_derive_all`.
    """
    visited = IsoSet([heap])
    frontier = [heap]
    normal = IsoSet()
    while frontier:
        level = []
        for h in frontier:
            preds = inverse_derive_all(grammar, h, pinned)
            if not preds:
                normal.add(h)
                continue
            for step in preds:
                if visited.add(step.result):
                    level.append(step.result)
        frontier = level
    return list(normal)


@dataclass(frozen=True)
class StringRule:
    """A heap rule flattened to an indexed word: the right-hand side read
    off as (label, index) pairs in edge order."""

    lhs: str
    pattern: tuple[str, ...]
    word: tuple[tuple[str, tuple[str, ...]], ...]


def heap_word(heap: Heap) -> tuple[tuple[str, tuple[str, ...]], ...]:
    """The heap's edges as an indexed word, in edge-id order."""
    return tuple((e.label, e.index) for _, e in sorted(heap.edges.items()))


def to_indexed_string_grammar(grammar: Grammar) -> list[StringRule]:
    """Forget the graph structure of every rule, keeping labels and indices.

    Derivability of a terminal configuration only depends on this view,
    which is what the emptiness decision runs on.
    """
    return [
        StringRule(r.nonterminal, r.pattern, heap_word(r.rhs)) for r in grammar.rules
    ]


class _Automaton:
    """Alternating automaton deciding which summary indices are productive.

    One state per nonterminal plus chain states per rule pattern; a
    transition maps (state, symbol) to a set of obligation sets, and a word
    is accepted from a state when some obligation choice discharges every
    member on the rest of the word.  Rules that copy the pattern remainder
    into child indices contribute saturated transitions built from the
    children's own obligations.
    """

    FINAL = ("f",)

    def __init__(self, grammar: Grammar, cap: int):
        self.grammar = grammar
        self.cap = cap
        sig = grammar.signature
        self.alphabet = tuple(sorted(sig.index_terminals | sig.index_nonterminals))
        self.delta: dict[tuple, list[frozenset]] = {}
        self.revision = 0
        self._obl_cache: dict = {}
        self._acc_cache: dict = {}

        self.nt_state = {X: ("nt", X) for X in sig.nonterminals}
        self.states = {self.FINAL, *self.nt_state.values()}

        # Per rule: entry chain and the item split of the right-hand side.
        self.rules = []
        nts = sig.nonterminals
        for rid, rule in enumerate(grammar.rules):
            sigma = rule.prefix
            ground_items = []
            copy_items = []
            for _, (label, index) in enumerate(heap_word(rule.rhs)):
                if label not in nts:
                    continue
                if index and index[-1] == "_nu":
                    copy_items.append((label, index[:-1]))
                else:
                    ground_items.append((label, index))
            if rule.has_nu:
                chain = [self.nt_state[rule.nonterminal]]
                for i in range(len(sigma)):
                    chain.append(("chain", rid, i))
                tail = chain[-1]
            else:
                chain = [self.nt_state[rule.nonterminal]]
                for i in range(len(sigma) - 1):
                    chain.append(("chain", rid, i))
                chain.append(self.FINAL)
                tail = None
            self.states.update(chain)
            self.rules.append(
                {
                    "id": rid,
                    "nu": rule.has_nu,
                    "sigma": sigma,
                    "chain": chain,
                    "tail": tail,
                    "ground_items": ground_items,
                    "copy_items": copy_items,
                    "chain_added": False,
                }
            )

    def _bump(self):
        self.revision += 1
        self._obl_cache.clear()
        self._acc_cache.clear()

    def _add(self, state, sym, obligation: frozenset) -> bool:
        bucket = self.delta.setdefault((state, sym), [])
        if obligation in bucket:
            return False
        bucket.append(obligation)
        total = len(self.states) + sum(len(b) for b in self.delta.values())
        if total > self.cap:
            raise SaturationLimitError(
                f"emptiness automaton exceeded {self.cap} states and transitions"
            )
        self._bump()
        return True

    def _add_chain(self, rule) -> bool:
        chain, sigma = rule["chain"], rule["sigma"]
        changed = False
        for i, sym in enumerate(sigma):
            changed |= self._add(chain[i], sym, frozenset([chain[i + 1]]))
        if not rule["nu"] and not sigma:
            raise PreconditionError("a ground rule cannot have an empty index pattern")
        return changed

    def obligations(self, state, word: tuple[str, ...]) -> list[frozenset]:
        """Obligation sets left after reading ``word`` from ``state``."""
        key = (state, word)
        hit = self._obl_cache.get(key)
        if hit is not None:
            return hit
        if not word:
            out = [frozenset([state])]
        else:
            a, rest = word[0], word[1:]
            found = set()
            for S in self.delta.get((state, a), ()):
                parts = [self.obligations(p, rest) for p in sorted(S)]
                if any(not pp for pp in parts):
                    continue
                for combo in itertools.product(*parts):
                    merged = frozenset().union(*combo)
                    found.add(merged)
                    if len(found) > self.cap:
                        raise SaturationLimitError(
                            f"obligation sets for one word exceeded {self.cap}"
                        )
            out = sorted(found, key=sorted)
        self._obl_cache[key] = out
        return out

    def accepts(self, state, word: tuple[str, ...]) -> bool:
        key = (state, word)
        hit = self._acc_cache.get(key)
        if hit is not None:
            return hit
        out = any(O <= {self.FINAL} for O in self.obligations(state, word))
        self._acc_cache[key] = out
        return out

    def guard(self, rule) -> bool:
        return all(self.accepts(self.nt_state[Y], t) for Y, t in rule["ground_items"])

    def saturate(self):
        while True:
            changed = False
            for rule in self.rules:
                if not self.guard(rule):
                    continue
                if not rule["chain_added"]:
                    self._add_chain(rule)
                    rule["chain_added"] = True
                    changed = True
                if not rule["nu"]:
                    continue
                tail = rule["tail"]
                for a in self.alphabet:
                    parts = []
                    dead = False
                    for Y, u in rule["copy_items"]:
                        obls = self.obligations(self.nt_state[Y], u + (a,))
                        if not obls:
                            dead = True
                            break
                        parts.append(obls)
                    if dead:
                        continue
                    for combo in itertools.product(*parts):
                        merged = frozenset().union(*combo)
                        if self._add(tail, a, merged):
                            changed = True
            if not changed:
                return self


def _automaton(grammar: Grammar, cap: int = 10_000) -> _Automaton:
    cached = getattr(grammar, "_emptiness_automaton", None)
    if cached is not None and cached.cap >= cap:
        return cached
    aut = _Automaton(grammar, cap).saturate()
    grammar._emptiness_automaton = aut
    return aut


def _combined_nonempty(aut: _Automaton, index_grammar: IndexGrammar, groups, ground_ok: bool) -> bool:
    """Search for one trailing-nonterminal expansion making every summary
    edge productive at once.

    ``groups`` maps an index nonterminal to the (state, prefix) pairs of
    the edges it tails.  All edges share the expansion, so their automaton
    obligations travel together as one frontier; the expansion word is
    generated by the index grammar rule by rule, and a frontier wholly on
    the final state at a stopping point means success.
    """
    if not ground_ok:
        return False
    live = {X: pairs for X, pairs in groups.items() if pairs}
    if not live:
        return True
    if len(live) > 1:
        raise PreconditionError(
            "combined emptiness supports summary indices tailed by one index "
            f"nonterminal at a time, got {sorted(live)}"
        )
    (X, pairs), = live.items()

    def frontier_after(frontier: frozenset, sym: str):
        outs = set()
        parts = []
        for p in sorted(frontier):
            obls = aut.obligations(p, (sym,))
            if not obls:
                return []
            parts.append(obls)
        for combo in itertools.product(*parts):
            outs.add(frozenset().union(*combo))
        return sorted(outs, key=sorted)

    starts = set()
    parts = []
    for state, prefix in pairs:
        obls = aut.obligations(state, prefix)
        if not obls:
            return False
        parts.append(obls)
    for combo in itertools.product(*parts):
        starts.add(frozenset().union(*combo))

    seen = set()
    work = [(S, X) for S in sorted(starts, key=sorted)]
    while work:
        S, nt = work.pop()
        if (S, nt) in seen:
            continue
        seen.add((S, nt))
        # Stop here: the tail nonterminal itself is the last letter.
        for S2 in frontier_after(S, nt):
            if S2 <= {aut.FINAL}:
                return True
        for _, rule in index_grammar.rules_for(nt):
            frontiers = [S]
            for sym in rule.rhs[:-1]:
                nxt = []
                for F in frontiers:
                    nxt.extend(frontier_after(F, sym))
                frontiers = sorted(set(nxt), key=sorted)
                if not frontiers:
                    break
            last = rule.rhs[-1]
            if last in index_grammar.signature.index_nonterminals:
                for F in frontiers:
                    work.append((F, last))
            else:
                for F in frontiers:
                    for F2 in frontier_after(F, last):
                        if F2 <= {aut.FINAL}:
                            return True
    return False


def is_empty(grammar: Grammar, heap: Heap, index_grammar: IndexGrammar | None = None) -> bool:
    """Whether no concrete heap is derivable from ``heap``.

    Without an index grammar, a summary edge is productive exactly when the
    automaton accepts its index.  With one, trailing index nonterminals may
    first be expanded (simultaneously across all edges), and the check
    searches for one expansion under which everything is productive.  The
    decision assumes rules preserve the heap invariants, which loading
    enforces for the shipped grammars.
    """
    aut = _automaton(grammar)
    nts = grammar.signature.nonterminals
    index_nts = grammar.signature.index_nonterminals
    if index_grammar is None:
        for e in heap.edges.values():
            if e.label in nts and not aut.accepts(aut.nt_state[e.label], e.index):
                return True
        return False

    groups: dict[str, list] = {X: [] for X in index_nts}
    ground_ok = True
    for e in sorted(heap.edges.values(), key=lambda e: (e.label, e.index)):
        if e.label not in nts:
            continue
        if e.index and e.index[-1] in index_nts:
            groups[e.index[-1]].append((aut.nt_state[e.label], e.index[:-1]))
        elif not aut.accepts(aut.nt_state[e.label], e.index):
            ground_ok = False
            break
    return not _combined_nonempty(aut, index_grammar, groups, ground_ok)


def _min_heights(grammar: Grammar, aut: _Automaton, targets, cap: int = 64):
    """Least derivation-tree heights for (nonterminal, index) pairs.

    Computed by iterative deepening; ``None`` where no witness exists
    within the cap.
    """
    memo: dict[tuple, int | None] = {}

    def can(Y, w, depth) -> bool:
        if depth <= 0:
            return False
        key = (Y, w)
        best = memo.get(key)
        if best is not None and best <= depth:
            return True
        for _, rule in grammar.rules_for(Y):
            ok, rho = match_pattern(rule, w)
            if not ok:
                continue
            children = []
            for label, index in heap_word(rule.rhs):
                if label not in grammar.signature.nonterminals:
                    continue
                if index and index[-1] == "_nu":
                    children.append((label, index[:-1] + tuple(rho)))
                else:
                    children.append((label, index))
            if all(can(cy, cw, depth - 1) for cy, cw in children):
                if best is None or depth < best:
                    memo[key] = depth
                return True
        return False

    out = {}
    for Y, w in targets:
        found = None
        for d in range(1, cap + 1):
            if can(Y, w, d):
                found = d
                break
        out[(Y, w)] = found
    return out


def nonempty_witness(grammar: Grammar, heap: Heap, cap: int = 64) -> list[Step] | None:
    """A replayable derivation of some concrete heap from ``heap``.

    None when the language is empty (or no witness exists within the height
    cap, which does not happen for productive summaries of sane grammars).
    """
    nts = grammar.signature.nonterminals
    targets = {(e.label, e.index) for e in heap.edges.values() if e.label in nts}
    aut = _automaton(grammar)
    heights = _min_heights(grammar, aut, sorted(targets), cap)
    if any(heights[t] is None for t in targets):
        return None

    def height_of(Y, w):
        if (Y, w) not in heights:
            heights.update(_min_heights(grammar, aut, [(Y, w)], cap))
        return heights[(Y, w)]

    steps: list[Step] = []
    current = heap
    while not current.is_concrete():
        options = derive_leftmost(grammar, current)
        eid = current.nonterminal_edge_ids()[0]
        e = current.edges[eid]
        budget = height_of(e.label, e.index)
        if budget is None:
            return None
        chosen = None
        for step in options:
            rule = grammar.rules[step.rule_id]
            good = True
            for label, index in heap_word(rule.rhs):
                if label not in nts:
                    continue
                w = index[:-1] + tuple(step.rho) if index and index[-1] == "_nu" else index
                h = height_of(label, w)
                if h is None or h > budget - 1:
                    good = False
                    break
            if good:
                chosen = step
                break
        if chosen is None:
            return None
        steps.append(chosen)
        current = chosen.result
    return steps


def includes(
    grammar: Grammar,
    sub: Heap,
    sup: Heap,
    index_grammar: IndexGrammar | None = None,
) -> bool:
    """Is every concrete heap of ``sub`` also one of ``sup``?

    Exact under two preconditions: the grammar is backward confluent
    (caller-asserted, see ``confluence_probe``) and ``sup`` is fully
    abstract, which is checked here.  The answer is yes exactly when
    ``sup`` derives ``sub`` within |sub| steps, or ``sub``'s language is
    empty.  With an index grammar, global expansion steps are interleaved
    into the search.
    """
    if inverse_derive_all(grammar, sup):
        raise PreconditionError("inclusion target is not fully abstract")
    if index_grammar is not None and global_inverse_derive_all(index_grammar, sup):
        raise PreconditionError("inclusion target is not fully abstract under index rewriting")

    want = canonical_hash(sub)
    if canonical_hash(sup) == want and isomorphic(sup, sub):
        return True
    per_step = max(
        grammar.max_pattern_len(),
        index_grammar.max_rhs_len() if index_grammar is not None else 0,
        1,
    )
    limit = _max_index_len(sub) + (sub.size + 1) * per_step
    visited = IsoSet([sup])
    frontier = [sup]
    while frontier:
        level = []
        for h in frontier:
            steps = list(derive_all(grammar, h))
            if index_grammar is not None:
                steps.extend(global_derive_all(index_grammar, h))
            for step in steps:
                r = step.result
                if r.size > sub.size or _max_index_len(r) > limit:
                    continue
                if canonical_hash(r) == want and isomorphic(r, sub):
                    return True
                if visited.add(r):
                    level.append(r)
        frontier = level
    return is_empty(grammar, sub, index_grammar)


@dataclass
class ProbeViolation:
    """A sampled concrete heap with more than one abstraction normal form."""

    nonterminal: str
    index: tuple[str, ...]
    sample: Heap
    normal_forms: list[Heap] = field(repr=False)


def _ground_indices(signature, max_len):
    letters = sorted(signature.index_terminals - {Z})
    for n in range(max_len):
        for head in itertools.product(letters, repeat=n):
            yield head + (Z,)


def confluence_probe(
    grammar: Grammar,
    max_index_len: int = 3,
    max_steps: int = 8,
    max_samples: int = 50,
) -> list[ProbeViolation]:
    """Sample concrete heaps per summary and report non-singleton inverse
    languages.

    A clean report over the samples is evidence of backward confluence, not
    proof; a violation is a definite counterexample.
    """
    out = []
    for X in sorted(grammar.signature.nonterminals):
        for index in _ground_indices(grammar.signature, max_index_len):
            start = single_edge_heap(grammar.signature, X, index)
            enum = enumerate_bounded(
                grammar, start, max_steps=max_steps, max_graphs=20 * max_samples
            )
            for sample in enum.heaps[:max_samples]:
                forms = inverse_language(grammar, sample)
                if len(forms) != 1:
                    out.append(ProbeViolation(X, index, sample, forms))
    return out
