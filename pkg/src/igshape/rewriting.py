"""Derivation steps on indexed heaps.

Three rewriting relations live here: forward hyperedge replacement (a
nonterminal edge is replaced by a rule's right-hand side, with the ν
remainder threaded through), its inverse (an embedded right-hand-side image
is folded back into a single summary edge), and the global index rewriting
that replaces an index nonterminal simultaneously in every edge index.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import IgshapeError
from .grammar import Grammar, IndexGrammar, Rule
from .heap import NU, Edge, Heap, IsoSet, validate

__all__ = [
    "Step",
    "InverseStep",
    "GlobalStep",
    "replace",
    "substitute_nu",
    "match_pattern",
    "derive_all",
    "inverse_derive_all",
    "global_derive_all",
    "global_inverse_derive_all",
    "global_inverse_language",
]


@dataclass(frozen=True)
class Step:
    """One forward derivation: fired rule, rewritten edge, remainder ρ."""

    edge_id: int
    rule_id: int
    rho: tuple[str, ...] | None
    result: Heap


@dataclass(frozen=True)
class InverseStep:
    """One abstraction step: folded rule, embedding images, remainder ρ."""

    rule_id: int
    rho: tuple[str, ...] | None
    node_map: tuple[tuple[int, int], ...]
    edge_map: tuple[tuple[int, int], ...]
    result: Heap


@dataclass(frozen=True)
class GlobalStep:
    rule_id: int
    result: Heap


def substitute_nu(index: tuple[str, ...], rho: tuple[str, ...] | None) -> tuple[str, ...]:
    """Replace a trailing ν by ρ; ν-free indices pass through unchanged."""
    if index and index[-1] == NU:
        if rho is None:
            raise ValueError("index ends in ν but no ρ was supplied")
        return index[:-1] + tuple(rho)
    return index


def match_pattern(rule: Rule, index: tuple[str, ...]) -> tuple[bool, tuple[str, ...] | None]:
    """Whether the rule's pattern matches the edge index.

    Ground patterns match exactly; ν patterns match any strict extension of
    their prefix and return the non-empty remainder as ρ.
    """
    if rule.has_nu:
        p = rule.prefix
        if len(index) > len(p) and index[: len(p)] == p:
            return True, index[len(p):]
        return False, None
    return (index == rule.pattern, None)


def replace(heap: Heap, edge_id: int, rhs: Heap) -> Heap:
    """Hyperedge replacement: substitute ``rhs`` for the edge ``edge_id``.

    The i-th external node of ``rhs`` lands on the i-th attachment of the
    replaced edge (attachments may repeat, so distinct externals can merge);
    internal right-hand-side nodes and all right-hand-side edges come in
    fresh, with identifiers assigned in ascending source order.
    """
    e = heap.edges[edge_id]
    if len(rhs.external) != len(e.attached):
        raise ValueError(
            f"replacement interface mismatch: edge has {len(e.attached)} attachments, "
            f"right-hand side exposes {len(rhs.external)}"
        )
    node_map = dict(zip(rhs.external, e.attached))
    internal = [v for v in rhs.nodes if v not in node_map]
    fresh = heap.fresh_node_ids(len(internal))
    node_map.update(zip(internal, fresh))

    edges = {eid: ed for eid, ed in heap.edges.items() if eid != edge_id}
    base = max(edges, default=-1) + 1
    if heap.edges:
        base = max(base, max(heap.edges) + 1)
    for offset, (reid, re) in enumerate(sorted(rhs.edges.items())):
        edges[base + offset] = Edge(re.label, re.index, tuple(node_map[v] for v in re.attached))
    return Heap(heap.signature, heap.nodes + tuple(fresh), edges, heap.external)


def _instantiate(rule: Rule, rho: tuple[str, ...] | None) -> Heap:
    if rho is None:
        return rule.rhs
    rhs = rule.rhs
    edges = {eid: e.with_index(substitute_nu(e.index, rho)) for eid, e in rhs.edges.items()}
    return Heap(rhs.signature, rhs.nodes, edges, rhs.external)


def derive_all(grammar: Grammar, heap: Heap) -> list[Step]:
    """Every single forward derivation step, ordered by (edge id, rule id)."""
    steps = []
    for eid in sorted(heap.edges):
        e = heap.edges[eid]
        if e.label not in grammar.signature.nonterminals:
            continue
        for rid, rule in grammar.rules_for(e.label):
            ok, rho = match_pattern(rule, e.index)
            if not ok:
                continue
            result = replace(heap, eid, _instantiate(rule, rho))
            problems = validate(result)
            if problems:
                raise IgshapeError(
                    f"rule {rid} on edge {eid} produced an invalid heap: {problems[0]}",
                    code="invalid-derivation-result",
                )
            steps.append(Step(eid, rid, rho, result))
    return steps


def derive_at(grammar: Grammar, heap: Heap, edge_id: int) -> list[Step]:
    """Forward steps at one specific nonterminal edge."""
    e = heap.edges[edge_id]
    steps = []
    for rid, rule in grammar.rules_for(e.label):
        ok, rho = match_pattern(rule, e.index)
        if not ok:
            continue
        result = replace(heap, edge_id, _instantiate(rule, rho))
        problems = validate(result)
        if problems:
            raise IgshapeError(
                f"rule {rid} on edge {edge_id} produced an invalid heap: {problems[0]}",
                code="invalid-derivation-result",
            )
        steps.append(Step(edge_id, rid, rho, result))
    return steps


def derive_leftmost(grammar: Grammar, heap: Heap) -> list[Step]:
    """Forward steps restricted to the lowest-id nonterminal edge.

    Replacements at distinct edges commute (a rule only consults its own
    edge's index), so exploring leftmost derivations alone reaches exactly
    the same terminal graphs as the full step relation, with far fewer
    intermediate states.  An inapplicable lowest edge stays inapplicable
    forever, so returning no steps for it prunes soundly.
    """
    nts = heap.nonterminal_edge_ids()
    if not nts:
        return []
    eid = nts[0]
    e = heap.edges[eid]
    steps = []
    for rid, rule in grammar.rules_for(e.label):
        ok, rho = match_pattern(rule, e.index)
        if not ok:
            continue
        result = replace(heap, eid, _instantiate(rule, rho))
        problems = validate(result)
        if problems:
            raise IgshapeError(
                f"rule {rid} on edge {eid} produced an invalid heap: {problems[0]}",
                code="invalid-derivation-result",
            )
        steps.append(Step(eid, rid, rho, result))
    return steps


def _host_candidates(heap: Heap, rule: Rule):
    """Per right-hand-side edge, the host edges it could map to."""
    by_label: dict[str, list[int]] = {}
    for eid in sorted(heap.edges):
        by_label.setdefault(heap.edges[eid].label, []).append(eid)

    cands = {}
    for reid, re in rule.rhs.edges.items():
        pool = []
        for heid in by_label.get(re.label, ()):
            he = heap.edges[heid]
            if len(he.attached) != len(re.attached):
                continue
            if re.index and re.index[-1] == NU:
                u = re.index[:-1]
                if len(he.index) > len(u) and he.index[: len(u)] == u:
                    pool.append(heid)
            elif he.index == re.index:
                pool.append(heid)
        cands[reid] = pool
    return cands


def _embeddings(heap: Heap, rule: Rule):
    """Yield (node_map, edge_map, rho) for each admissible embedding.

    The edge map is injective; node images may merge external right-hand-side
    nodes (the forward direction can pinch them together) but internal nodes
    map injectively, away from every external image and every host-external
    node, and must have their entire incident edge set inside the image.
    """
    rhs = rule.rhs
    cands = _host_candidates(heap, rule)
    order = sorted(rhs.edges, key=lambda reid: (len(cands[reid]), reid))
    if any(not cands[reid] for reid in order):
        return

    ext_set = set(rhs.external)
    node_map: dict[int, int] = {}
    edge_map: dict[int, int] = {}
    used: set[int] = set()

    def assign(reid, heid, rho):
        re, he = rhs.edges[reid], heap.edges[heid]
        if re.index and re.index[-1] == NU:
            remainder = he.index[len(re.index) - 1 :]
            if rho is None:
                rho = remainder
            elif rho != remainder:
                return None, None
        undo = []
        for rv, hv in zip(re.attached, he.attached):
            if rv in node_map:
                if node_map[rv] != hv:
                    for v in undo:
                        del node_map[v]
                    return None, None
            else:
                node_map[rv] = hv
                undo.append(rv)
        return undo, rho

    def search(i, rho):
        if i == len(order):
            yield from finish(rho)
            return
        reid = order[i]
        for heid in cands[reid]:
            if heid in used:
                continue
            undo, bound = assign(reid, heid, rho)
            if undo is None:
                continue
            edge_map[reid] = heid
            used.add(heid)
            yield from search(i + 1, bound)
            used.discard(heid)
            del edge_map[reid]
            for v in undo:
                del node_map[v]

    def finish(rho):
        # Isolated nodes (attached to no right-hand-side edge) are
        # unconstrained by matching; the null position is forced, the rest
        # range over all host nodes.
        loose = [v for v in rhs.nodes if v not in node_map]
        pools = []
        for v in loose:
            if v == rhs.null:
                pools.append([heap.null])
            else:
                pools.append(list(heap.nodes))
        for images in itertools.product(*pools):
            trial = dict(node_map)
            ok = True
            for v, w in zip(loose, images):
                if trial.get(v, w) != w:
                    ok = False
                    break
                trial[v] = w
            if not ok:
                continue
            if rhs.null in trial and trial[rhs.null] != heap.null:
                continue
            internal_images = [trial[v] for v in rhs.nodes if v not in ext_set]
            ext_images = {trial[v] for v in ext_set if v in trial}
            if len(set(internal_images)) != len(internal_images):
                continue
            if any(w in ext_images or w in heap.external for w in internal_images):
                continue
            image_edges = set(edge_map.values())
            if any(
                set(heap.incident_edge_ids(w)) - image_edges for w in internal_images
            ):
                continue
            yield dict(trial), dict(edge_map), rho

    yield from search(0, None)


def _rho_candidates(heap: Heap) -> list[tuple[str, ...]]:
    """Non-empty suffixes of indices present in the host, shortest first."""
    seen = set()
    for e in heap.edges.values():
        for i in range(len(e.index)):
            seen.add(e.index[i:])
    return sorted(seen, key=lambda s: (len(s), s))


def inverse_derive_all(
    grammar: Grammar, heap: Heap, pinned: frozenset[int] = frozenset()
) -> list[InverseStep]:
    """Every predecessor of ``heap`` under one derivation step.

    Results are deduplicated up to isomorphism (first witness kept) in a
    deterministic order.  For ν rules whose right-hand side repeats ν, the
    remainder ρ is forced by unification; a ν rule with a ν-free right-hand
    side admits any ρ, so candidates are drawn from the suffixes of host
    indices, shortest first.

    Nodes in ``pinned`` keep their selectors visible: an embedding whose
    image contains a field edge leaving a pinned node is skipped.  Node ids
    survive inverse steps (folds only delete nodes), so the set stays
    meaningful along an iterated search.
    """
    fields = heap.signature.fields
    steps: list[InverseStep] = []
    seen = IsoSet()
    for rid, rule in enumerate(grammar.rules):
        for node_map, edge_map, rho in _embeddings(heap, rule):
            if pinned and any(
                heap.edges[eid].label in fields and heap.edges[eid].attached[0] in pinned
                for eid in edge_map.values()
            ):
                continue
            if rule.has_nu and rho is None:
                rhos = _rho_candidates(heap)
            else:
                rhos = [rho]
            for cand in rhos:
                if rule.has_nu and not cand:
                    continue
                index = rule.prefix + tuple(cand) if rule.has_nu else rule.pattern
                att = tuple(node_map[v] for v in rule.rhs.external)
                internal = {
                    node_map[v] for v in rule.rhs.nodes if v not in set(rule.rhs.external)
                }
                nodes = [v for v in heap.nodes if v not in internal]
                edges = {
                    eid: e
                    for eid, e in heap.edges.items()
                    if eid not in set(edge_map.values())
                }
                new_id = max(heap.edges, default=-1) + 1
                edges[new_id] = Edge(rule.nonterminal, index, att)
                result = Heap(heap.signature, nodes, edges, heap.external)
                if validate(result):
                    continue
                if seen.add(result):
                    steps.append(
                        InverseStep(
                            rid,
                            tuple(cand) if cand is not None else None,
                            tuple(sorted(node_map.items())),
                            tuple(sorted(edge_map.items())),
                            result,
                        )
                    )
    return steps


def _forward_applicable(grammar: IndexGrammar, heap: Heap) -> bool:
    nts = grammar.signature.index_nonterminals
    for e in heap.edges.values():
        if e.label in grammar.signature.nonterminals:
            if not e.index or e.index[-1] not in nts:
                return False
    return True


def _substitute_everywhere(heap: Heap, lhs: str, rhs: tuple[str, ...]) -> Heap:
    def subst(index):
        out = []
        for sym in index:
            if sym == lhs:
                out.extend(rhs)
            else:
                out.append(sym)
        return tuple(out)

    edges = {eid: e.with_index(subst(e.index)) for eid, e in heap.edges.items()}
    return Heap(heap.signature, heap.nodes, edges, heap.external)


def global_derive_all(grammar: IndexGrammar, heap: Heap) -> list[GlobalStep]:
    """One step per index rule, substituting simultaneously in every index.

    Applicable only when each summary edge's index ends in an index
    nonterminal; a rule whose left-hand side does not occur yields a
    vacuous (identity) step.
    """
    if not _forward_applicable(grammar, heap):
        return []
    return [
        GlobalStep(rid, _substitute_everywhere(heap, rule.lhs, rule.rhs))
        for rid, rule in enumerate(grammar.rules)
    ]


def global_inverse_derive_all(grammar: IndexGrammar, heap: Heap) -> list[GlobalStep]:
    """Predecessors of ``heap`` under one global index step.

    Per summary edge the index either keeps its value (possible when it
    already ends in a different index nonterminal) or strips the rule's
    replacement word off the end and regains the left-hand side.  One
    predecessor per combination with at least one strip; identity
    predecessors are dropped so inverse normal forms exist.
    """
    nts = grammar.signature.index_nonterminals
    out: list[GlobalStep] = []
    seen = IsoSet()
    for rid, rule in enumerate(grammar.rules):
        per_edge: list[list[tuple[str, ...] | None]] = []
        eids = heap.nonterminal_edge_ids()
        feasible = True
        for eid in eids:
            h = heap.edges[eid].index
            opts: list[tuple[str, ...] | None] = []
            k = len(rule.rhs)
            if len(h) > k - 1 and h[len(h) - k :] == rule.rhs:
                opts.append(h[: len(h) - k] + (rule.lhs,))
            if h and h[-1] in nts and h[-1] != rule.lhs:
                opts.append(None)  # keep as-is
            if not opts:
                feasible = False
                break
            per_edge.append(opts)
        if not feasible:
            continue
        for combo in itertools.product(*per_edge):
            if all(choice is None for choice in combo):
                continue
            edges = dict(heap.edges)
            for eid, choice in zip(eids, combo):
                if choice is not None:
                    edges[eid] = edges[eid].with_index(choice)
            pred = Heap(heap.signature, heap.nodes, edges, heap.external)
            if seen.add(pred):
                out.append(GlobalStep(rid, pred))
    return out


def global_inverse_language(grammar: IndexGrammar, heap: Heap) -> list[Heap]:
    """Normal forms of the global inverse rewriting reachable from ``heap``."""
    visited = IsoSet([heap])
    frontier = [heap]
    normal = IsoSet()
    while frontier:
        nxt = []
        for h in frontier:
            preds = global_inverse_derive_all(grammar, h)
            if not preds:
                normal.add(h)
                continue
            for step in preds:
                if visited.add(step.result):
                    nxt.append(step.result)
        frontier = nxt
    return list(normal)
