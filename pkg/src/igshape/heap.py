"""Heap configurations as indexed hypergraphs.

A heap is a hypergraph whose hyperedges carry a label, a non-empty index
word, and an ordered attachment sequence.  Selector fields are binary edges,
program variables unary edges, and summary (nonterminal) edges have the rank
their label declares.  A distinguished external node sequence pins the null
node (always first) and, inside grammar right-hand sides, the interface of
the rule.

Node and edge identifiers are opaque small integers.  All iteration orders
are ascending by identifier so that every operation in the package is
deterministic.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import Diagnostic, DocumentError, UnionUndefinedError

Z = "z"
NU = "_nu"

__all__ = [
    "Z",
    "NU",
    "Signature",
    "Edge",
    "Heap",
    "validate",
    "union",
    "find_isomorphism",
    "isomorphic",
    "canonical_hash",
    "IsoSet",
    "format_index",
]


def format_index(index: tuple[str, ...]) -> str:
    """Human-readable rendering of an index word, e.g. ``ss_nu`` as 'ssν'."""
    return "".join("ν" if sym == NU else sym for sym in index)


class Signature:
    """Declares the edge labels and index symbols a heap may use.

    Fields are binary, variables unary, nonterminals carry an explicit
    rank of at least one.  The index terminal ``z`` is mandatory; the
    recursion marker ν is reserved and never part of the signature.
    """

    def __init__(
        self,
        fields=(),
        variables=(),
        nonterminals=None,
        index_terminals=(Z,),
        index_nonterminals=(),
    ):
        self.fields = frozenset(fields)
        self.variables = frozenset(variables)
        self.nonterminals = dict(sorted((nonterminals or {}).items()))
        self.index_terminals = frozenset(index_terminals)
        self.index_nonterminals = frozenset(index_nonterminals)

        names = [*self.fields, *self.variables, *self.nonterminals]
        if len(names) != len(set(names)):
            raise ValueError("edge labels must be unique across categories")
        if Z not in self.index_terminals:
            raise ValueError(f"index terminals must contain {Z!r}")
        if NU in self.index_terminals or NU in self.index_nonterminals:
            raise ValueError(f"{NU!r} is reserved and cannot be declared")
        if self.index_terminals & self.index_nonterminals:
            raise ValueError("index terminals and nonterminals overlap")
        for name, rank in self.nonterminals.items():
            if not isinstance(rank, int) or rank < 1:
                raise ValueError(f"nonterminal {name!r} needs a rank >= 1")

    def kind(self, label: str) -> str:
        if label in self.fields:
            return "field"
        if label in self.variables:
            return "variable"
        if label in self.nonterminals:
            return "nonterminal"
        raise KeyError(label)

    def arity(self, label: str) -> int:
        if label in self.fields:
            return 2
        if label in self.variables:
            return 1
        return self.nonterminals[label]

    @property
    def index_symbols(self) -> frozenset[str]:
        return self.index_terminals | self.index_nonterminals

    def __eq__(self, other) -> bool:
        return isinstance(other, Signature) and (
            self.fields,
            self.variables,
            self.nonterminals,
            self.index_terminals,
            self.index_nonterminals,
        ) == (
            other.fields,
            other.variables,
            other.nonterminals,
            other.index_terminals,
            other.index_nonterminals,
        )

    def __hash__(self):
        return hash(
            (
                self.fields,
                self.variables,
                tuple(self.nonterminals.items()),
                self.index_terminals,
                self.index_nonterminals,
            )
        )

    def __repr__(self) -> str:
        return (
            f"Signature(fields={sorted(self.fields)}, variables={sorted(self.variables)}, "
            f"nonterminals={self.nonterminals})"
        )

    def to_document(self) -> dict:
        return {
            "fields": sorted(self.fields),
            "variables": sorted(self.variables),
            "nonterminals": dict(self.nonterminals),
            "index_terminals": sorted(self.index_terminals),
            "index_nonterminals": sorted(self.index_nonterminals),
        }

    @classmethod
    def from_document(cls, doc) -> "Signature":
        if not isinstance(doc, dict):
            raise DocumentError("signature document must be an object")
        try:
            return cls(
                fields=doc.get("fields", ()),
                variables=doc.get("variables", ()),
                nonterminals=doc.get("nonterminals", {}),
                index_terminals=doc.get("index_terminals", (Z,)),
                index_nonterminals=doc.get("index_nonterminals", ()),
            )
        except (ValueError, TypeError, AttributeError) as exc:
            raise DocumentError(f"bad signature: {exc}") from None


@dataclass(frozen=True)
class Edge:
    """A labelled hyperedge with an index word and ordered attachments."""

    label: str
    index: tuple[str, ...]
    attached: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(self.index))
        object.__setattr__(self, "attached", tuple(self.attached))

    def with_index(self, index) -> "Edge":
        return Edge(self.label, tuple(index), self.attached)

    def __repr__(self) -> str:
        att = ",".join(str(v) for v in self.attached)
        return f"{self.label}[{format_index(self.index)}]({att})"


class Heap:
    """An indexed heap configuration over a fixed signature.

    Instances are treated as immutable; the ``with_*`` helpers return fresh
    heaps.  Equality is exact (same identifiers), isomorphism is a separate
    check.
    """

    __slots__ = ("signature", "nodes", "edges", "external", "_digest", "_ranks", "_incidence")

    def __init__(self, signature: Signature, nodes, edges, external):
        self.signature = signature
        self.nodes = tuple(sorted(nodes))
        if isinstance(edges, dict):
            items = sorted(edges.items())
        else:
            items = sorted(edges)
        self.edges = {eid: e for eid, e in items}
        self.external = tuple(external)
        self._digest = None
        self._ranks = None
        self._incidence = None

    @property
    def null(self) -> int:
        """The null node, by convention the first external node."""
        return self.external[0]

    @property
    def size(self) -> int:
        return len(self.nodes) + len(self.edges)

    def fresh_node_ids(self, count: int) -> list[int]:
        base = max(self.nodes, default=-1) + 1
        return list(range(base, base + count))

    def fresh_edge_ids(self, count: int) -> list[int]:
        base = max(self.edges, default=-1) + 1
        return list(range(base, base + count))

    def with_edges(self, removed=(), added=()) -> "Heap":
        """Copy with edge ids in ``removed`` dropped and ``added`` appended.

        ``added`` may contain bare :class:`Edge` values (fresh ids are
        assigned in order) or explicit ``(id, Edge)`` pairs.
        """
        removed = set(removed)
        edges = {eid: e for eid, e in self.edges.items() if eid not in removed}
        pending = []
        for item in added:
            if isinstance(item, Edge):
                pending.append(item)
            else:
                eid, e = item
                edges[eid] = e
        base = max(edges, default=-1) + 1
        for offset, e in enumerate(pending):
            edges[base + offset] = e
        return Heap(self.signature, self.nodes, edges, self.external)

    def with_nodes(self, added) -> "Heap":
        return Heap(self.signature, self.nodes + tuple(added), self.edges, self.external)

    def edge_ids_by_label(self, label: str) -> list[int]:
        return [eid for eid, e in self.edges.items() if e.label == label]

    def nonterminal_edge_ids(self) -> list[int]:
        nts = self.signature.nonterminals
        return [eid for eid, e in self.edges.items() if e.label in nts]

    def is_concrete(self) -> bool:
        return not self.nonterminal_edge_ids()

    def variable_target(self, name: str) -> int | None:
        """Node the variable edge ``name`` sits on, or None if absent."""
        hits = [e.attached[0] for e in self.edges.values() if e.label == name]
        return hits[0] if hits else None

    def field_target(self, node: int, fieldname: str) -> int | None:
        """Target of the unique outgoing ``fieldname`` edge at ``node``."""
        for e in self.edges.values():
            if e.label == fieldname and e.attached[0] == node:
                return e.attached[1]
        return None

    def incident_edge_ids(self, node: int) -> list[int]:
        if self._incidence is None:
            inc: dict[int, list[int]] = {v: [] for v in self.nodes}
            for eid, e in self.edges.items():
                for v in set(e.attached):
                    inc.setdefault(v, []).append(eid)
            self._incidence = inc
        return self._incidence.get(node, [])

    def renumbered(self) -> "Heap":
        """Equivalent heap with node and edge ids compacted to 0..n-1."""
        node_map = {v: i for i, v in enumerate(self.nodes)}
        edges = {
            i: Edge(e.label, e.index, tuple(node_map[v] for v in e.attached))
            for i, (eid, e) in enumerate(self.edges.items())
        }
        return Heap(
            self.signature,
            range(len(self.nodes)),
            edges,
            tuple(node_map[v] for v in self.external),
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Heap)
            and self.signature == other.signature
            and self.nodes == other.nodes
            and self.edges == other.edges
            and self.external == other.external
        )

    def __hash__(self):
        return hash((self.nodes, tuple(self.edges.items()), self.external))

    def __repr__(self) -> str:
        parts = ", ".join(repr(e) for e in self.edges.values())
        return f"Heap(|V|={len(self.nodes)}, ext={list(self.external)}, {parts})"

    def to_document(self, include_signature: bool = False) -> dict:
        doc = {
            "nodes": list(self.nodes),
            "edges": [
                {
                    "id": eid,
                    "label": e.label,
                    "index": list(e.index),
                    "attached": list(e.attached),
                }
                for eid, e in self.edges.items()
            ],
            "external": list(self.external),
        }
        if include_signature:
            doc["signature"] = self.signature.to_document()
        return doc

    @classmethod
    def from_document(cls, doc, signature: Signature | None = None) -> "Heap":
        if not isinstance(doc, dict):
            raise DocumentError("heap document must be an object")
        if signature is None:
            if "signature" not in doc:
                raise DocumentError("heap document carries no signature")
            signature = Signature.from_document(doc["signature"])
        nodes = doc.get("nodes")
        if not isinstance(nodes, list) or not all(isinstance(v, int) for v in nodes):
            raise DocumentError("'nodes' must be a list of integers")
        if len(set(nodes)) != len(nodes):
            raise DocumentError("duplicate node ids")
        edges = {}
        for pos, edoc in enumerate(doc.get("edges", [])):
            if not isinstance(edoc, dict):
                raise DocumentError(f"edge #{pos} must be an object")
            eid = edoc.get("id", pos)
            if not isinstance(eid, int) or eid in edges:
                raise DocumentError(f"edge #{pos} has a missing or duplicate id")
            label = edoc.get("label")
            index = edoc.get("index")
            attached = edoc.get("attached")
            if not isinstance(label, str):
                raise DocumentError(f"edge {eid} has no label")
            if not isinstance(index, list) or not all(isinstance(s, str) for s in index):
                raise DocumentError(f"edge {eid}: 'index' must be a list of strings")
            if not isinstance(attached, list) or not all(isinstance(v, int) for v in attached):
                raise DocumentError(f"edge {eid}: 'attached' must be a list of node ids")
            edges[eid] = Edge(label, tuple(index), tuple(attached))
        external = doc.get("external")
        if not isinstance(external, list) or not all(isinstance(v, int) for v in external):
            raise DocumentError("'external' must be a list of node ids")
        return cls(signature, nodes, edges, external)


def validate(heap: Heap) -> list[Diagnostic]:
    """Check the structural invariants; an empty list means the heap is valid.

    Checks cover: declared labels and arities, known index symbols shaped as
    a word of non-z terminals ending in z, ν, or an index nonterminal,
    z-indexed terminal edges, non-empty indices, attachment and external
    references, a repetition-free external sequence headed by null, at most
    one edge per variable, at most one outgoing edge per node and field, and
    null as the first attachment of every nonterminal edge.
    """
    sig = heap.signature
    out: list[Diagnostic] = []
    nodes = set(heap.nodes)

    if not heap.external:
        out.append(Diagnostic("external-empty", "external node sequence is empty"))
    else:
        if len(set(heap.external)) != len(heap.external):
            out.append(
                Diagnostic("external-repetition", f"external sequence {list(heap.external)} repeats a node")
            )
        for v in heap.external:
            if v not in nodes:
                out.append(Diagnostic("dangling-attachment", f"external node {v} does not exist"))

    seen_vars: dict[str, int] = {}
    seen_fields: dict[tuple[int, str], int] = {}
    for eid, e in heap.edges.items():
        try:
            kind = sig.kind(e.label)
        except KeyError:
            out.append(Diagnostic("unknown-symbol", f"edge {eid}: label {e.label!r} is not declared"))
            continue
        want = sig.arity(e.label)
        if len(e.attached) != want:
            out.append(
                Diagnostic(
                    "arity-mismatch",
                    f"edge {eid}: label {e.label!r} has arity {want}, got {len(e.attached)}",
                )
            )
            continue
        for v in e.attached:
            if v not in nodes:
                out.append(Diagnostic("dangling-attachment", f"edge {eid}: attached node {v} does not exist"))
        if not e.index:
            out.append(Diagnostic("empty-index", f"edge {eid} has an empty index"))
        symbols_ok = True
        for pos, sym in enumerate(e.index):
            if sym == NU:
                if pos != len(e.index) - 1:
                    out.append(
                        Diagnostic("bad-index-symbol", f"edge {eid}: ν may only appear last in an index")
                    )
                    symbols_ok = False
            elif sym not in sig.index_symbols:
                out.append(Diagnostic("bad-index-symbol", f"edge {eid}: unknown index symbol {sym!r}"))
                symbols_ok = False
        if symbols_ok and e.index:
            head, last = e.index[:-1], e.index[-1]
            shaped = (last == Z or last == NU or last in sig.index_nonterminals) and all(
                sym != Z and sym in sig.index_terminals for sym in head
            )
            if not shaped:
                out.append(
                    Diagnostic(
                        "bad-index-word",
                        f"edge {eid}: index must be non-z terminals ending in {Z!r}, ν, "
                        f"or an index nonterminal",
                    )
                )
        if kind == "field" and e.index != (Z,):
            out.append(
                Diagnostic("terminal-index", f"edge {eid}: selector edges carry index {Z!r} only")
            )
        if kind == "variable" and e.index != (Z,):
            out.append(
                Diagnostic("terminal-index", f"edge {eid}: variable edges carry index {Z!r} only")
            )
        if kind == "variable":
            if e.label in seen_vars:
                out.append(
                    Diagnostic(
                        "variable-duplicate",
                        f"variable {e.label!r} appears on edges {seen_vars[e.label]} and {eid}",
                    )
                )
            else:
                seen_vars[e.label] = eid
        elif kind == "field":
            key = (e.attached[0], e.label)
            if key in seen_fields:
                out.append(
                    Diagnostic(
                        "field-determinism",
                        f"node {e.attached[0]} has two outgoing {e.label!r} edges "
                        f"({seen_fields[key]} and {eid})",
                    )
                )
            else:
                seen_fields[key] = eid
        else:
            if heap.external and e.attached and e.attached[0] != heap.null:
                out.append(
                    Diagnostic(
                        "nonterminal-null-attachment",
                        f"edge {eid}: first attachment must be the null node {heap.null}",
                    )
                )
    return out


def union(left: Heap, right: Heap) -> Heap:
    """Componentwise union of two heaps sharing identifiers and externals.

    Undefined (raises) when the signatures or external sequences differ,
    when a shared edge id disagrees, or when the merged heap breaks an
    invariant such as field determinism.
    """
    if left.signature != right.signature:
        raise UnionUndefinedError("signatures differ")
    if left.external != right.external:
        raise UnionUndefinedError(
            f"external sequences differ: {list(left.external)} vs {list(right.external)}"
        )
    edges = dict(left.edges)
    for eid, e in right.edges.items():
        if eid in edges and edges[eid] != e:
            raise UnionUndefinedError(f"edge {eid} disagrees between the two heaps")
        edges[eid] = e
    merged = Heap(
        left.signature,
        set(left.nodes) | set(right.nodes),
        edges,
        left.external,
    )
    problems = validate(merged)
    if problems:
        raise UnionUndefinedError(f"merged heap is invalid: {problems[0]}")
    return merged


def _refine_colors(heap: Heap) -> dict[int, int]:
    """Stable node partition via iterated neighborhood refinement.

    External positions seed the partition, then each round folds in the
    multiset of incident edge profiles (label, index, own position, ranks
    of all attachments in order) until the partition stops splitting.
    Ranks are dense integers assigned by sorting the round's descriptors,
    so the result only depends on the heap up to renaming, never on the
    process hash seed.  Label/index/position profiles are interned (in
    sorted order, again renaming-independent) into small integers once.
    """
    if heap._ranks is not None:
        return heap._ranks
    nodes = heap.nodes
    pos_of = {v: i for i, v in enumerate(nodes)}

    static_keys = sorted(
        {(e.label, e.index, pos) for e in heap.edges.values() for pos in range(len(e.attached))}
    )
    code = {key: i for i, key in enumerate(static_keys)}
    incident: list[list[tuple[int, tuple[int, ...]]]] = [[] for _ in nodes]
    for e in heap.edges.values():
        att = tuple(pos_of[v] for v in e.attached)
        for pos, i in enumerate(att):
            incident[i].append((code[(e.label, e.index, pos)], att))

    ext_pos: dict[int, tuple[int, ...]] = {}
    for i, v in enumerate(heap.external):
        j = pos_of[v]
        ext_pos[j] = ext_pos.get(j, ()) + (i,)

    def dense(desc: list) -> list[int]:
        order = {d: r for r, d in enumerate(sorted(set(desc)))}
        return [order[d] for d in desc]

    rank = dense([ext_pos.get(i, ()) for i in range(len(nodes))])
    n_classes = len(set(rank))
    for _ in range(len(nodes) + 1):
        desc = [
            (
                rank[i],
                tuple(sorted((c, tuple(rank[j] for j in att)) for c, att in incident[i])),
            )
            for i in range(len(nodes))
        ]
        rank = dense(desc)
        classes = len(set(rank))
        if classes == n_classes:
            break
        n_classes = classes
    heap._ranks = {v: rank[pos_of[v]] for v in nodes}
    return heap._ranks


def canonical_hash(heap: Heap) -> str:
    """Isomorphism-invariant digest of a heap.

    Built from the refined node partition, so renaming ids never changes
    it.  Rare collisions between non-isomorphic heaps are possible; dedup
    containers confirm candidates with the full isomorphism check.
    """
    if heap._digest is not None:
        return heap._digest
    rank = _refine_colors(heap)
    node_part = sorted(rank[v] for v in heap.nodes)
    edge_part = sorted(
        (e.label, e.index, tuple(rank[v] for v in e.attached)) for e in heap.edges.values()
    )
    ext_part = tuple(rank[v] for v in heap.external)
    payload = repr((node_part, edge_part, ext_part)).encode()
    heap._digest = hashlib.sha256(payload).hexdigest()
    return heap._digest


def find_isomorphism(left: Heap, right: Heap):
    """Attachment-order-preserving isomorphism with pinned externals.

    Returns ``(node_map, edge_map)`` or None.  The node map must send the
    i-th external of ``left`` to the i-th external of ``right``; edge
    correspondence respects label, index, and mapped attachment sequence.
    """
    if left.signature != right.signature:
        return None
    if len(left.nodes) != len(right.nodes) or len(left.edges) != len(right.edges):
        return None
    if len(left.external) != len(right.external):
        return None

    def edge_census(h):
        counts: dict[tuple, int] = {}
        for e in h.edges.values():
            key = (e.label, e.index, len(e.attached))
            counts[key] = counts.get(key, 0) + 1
        return counts

    if edge_census(left) != edge_census(right):
        return None

    # Isomorphic heaps get identical descriptor multisets every refinement
    # round, so their dense ranks line up class for class; equal rank is a
    # sound (and sharp) candidate filter.
    lkey, rkey = _refine_colors(left), _refine_colors(right)
    by_key: dict[int, list[int]] = {}
    for v in right.nodes:
        by_key.setdefault(rkey[v], []).append(v)
    lcounts: dict[int, int] = {}
    for v in left.nodes:
        lcounts[lkey[v]] = lcounts.get(lkey[v], 0) + 1
    if any(len(by_key.get(k, ())) != n for k, n in lcounts.items()):
        return None

    node_map: dict[int, int] = {}
    used: set[int] = set()
    for lv, rv in zip(left.external, right.external):
        if node_map.get(lv, rv) != rv:
            return None
        node_map[lv] = rv
    used.update(node_map.values())
    if len(used) != len(set(node_map)):
        return None

    order = sorted(
        (v for v in left.nodes if v not in node_map),
        key=lambda v: (len(by_key.get(lkey[v], ())), v),
    )

    redges: dict[tuple, list[int]] = {}
    for eid, e in right.edges.items():
        redges.setdefault((e.label, e.index, e.attached), []).append(eid)

    def edges_match(nmap):
        want: dict[tuple, int] = {}
        for e in left.edges.values():
            key = (e.label, e.index, tuple(nmap[v] for v in e.attached))
            want[key] = want.get(key, 0) + 1
        for key, n in want.items():
            if len(redges.get(key, ())) != n:
                return None
        emap: dict[int, int] = {}
        cursor = {key: 0 for key in want}
        for eid in sorted(left.edges):
            e = left.edges[eid]
            key = (e.label, e.index, tuple(nmap[v] for v in e.attached))
            emap[eid] = redges[key][cursor[key]]
            cursor[key] += 1
        return emap

    def backtrack(i):
        if i == len(order):
            emap = edges_match(node_map)
            if emap is not None:
                return dict(node_map), emap
            return None
        lv = order[i]
        for rv in by_key.get(lkey[lv], ()):
            if rv in used:
                continue
            node_map[lv] = rv
            used.add(rv)
            found = backtrack(i + 1)
            if found:
                return found
            del node_map[lv]
            used.discard(rv)
        return None

    return backtrack(0)


def isomorphic(left: Heap, right: Heap) -> bool:
    return find_isomorphism(left, right) is not None


def single_edge_heap(signature: Signature, label: str, index) -> Heap:
    """Heap holding one nonterminal edge over fresh pairwise-distinct nodes.

    Node 0 is null; the attachment and external sequences both run 0..rank-1.
    This is the usual starting point for enumerating a summary's meaning.
    """
    rank = signature.nonterminals[label]
    nodes = range(rank)
    return Heap(
        signature,
        nodes,
        {0: Edge(label, tuple(index), tuple(nodes))},
        tuple(nodes),
    )


class IsoSet:
    """Insertion-ordered collection of heaps deduplicated up to isomorphism.

    The canonical hash is a prefilter; membership is always confirmed by the
    full isomorphism check within a hash bucket.
    """

    def __init__(self, items=()):
        self._buckets: dict[str, list[Heap]] = {}
        self._order: list[Heap] = []
        for h in items:
            self.add(h)

    def add(self, heap: Heap) -> bool:
        """Insert unless an isomorphic heap is present; True when new."""
        digest = canonical_hash(heap)
        bucket = self._buckets.setdefault(digest, [])
        for other in bucket:
            if isomorphic(heap, other):
                return False
        bucket.append(heap)
        self._order.append(heap)
        return True

    def find(self, heap: Heap) -> Heap | None:
        """The stored representative isomorphic to ``heap``, if any."""
        for other in self._buckets.get(canonical_hash(heap), ()):
            if isomorphic(heap, other):
                return other
        return None

    def __contains__(self, heap: Heap) -> bool:
        return self.find(heap) is not None

    def __iter__(self):
        return iter(self._order)

    def __len__(self) -> int:
        return len(self._order)
