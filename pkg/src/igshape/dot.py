"""Graphviz rendering of heaps and explored state spaces.

Output is deterministic: node and edge declarations are emitted in id order,
so two calls on the same object (or on equal objects with the same ids)
produce byte-identical text.
"""
from __future__ import annotations

from .analysis import AbstractResult
from .heap import Heap, canonical_hash, format_index

_FIELD_COLORS = ["black", "blue3", "red3", "darkgreen", "purple3", "orange2"]


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def heap_dot(heap: Heap, name: str = "heap") -> str:
    """Render one heap.

    Plain nodes are circles, the null node is filled black, selector edges are
    directed arcs colored per field, variables hang off their node as dashed
    arrows, and each summary edge becomes a box labeled with its nonterminal
    and index whose numbered tentacles lead to the attached nodes.
    """
    sig = heap.signature
    null = heap.external[0] if heap.external else None
    colors = {f: _FIELD_COLORS[i % len(_FIELD_COLORS)] for i, f in enumerate(sorted(sig.fields))}
    lines = [f"digraph {name} {{", "  rankdir=LR;", "  node [shape=circle];"]
    for v in sorted(heap.nodes):
        style = ", style=filled, fillcolor=black, label=" + _quote("") if v == null else f", label={_quote(str(v))}"
        peripheries = ", peripheries=2" if v in heap.external else ""
        lines.append(f"  n{v} [shape=circle{style}{peripheries}];")
    for eid in sorted(heap.edges):
        e = heap.edges[eid]
        kind = sig.kind(e.label)
        if kind == "field":
            src, dst = e.attached
            lines.append(f"  n{src} -> n{dst} [label={_quote(e.label)}, color={colors[e.label]}, fontcolor={colors[e.label]}];")
        elif kind == "variable":
            lines.append(f"  x{eid} [shape=plaintext, label={_quote(e.label)}];")
            lines.append(f"  x{eid} -> n{e.attached[0]} [style=dashed, arrowhead=vee];")
        else:
            label = _quote(f"{e.label}, {format_index(e.index)}")
            lines.append(f"  e{eid} [shape=box, style=filled, fillcolor=gray85, label={label}];")
            for pos, v in enumerate(e.attached, start=1):
                lines.append(f"  e{eid} -> n{v} [label={_quote(str(pos))}, arrowhead=none, style=dotted];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def state_space_dot(result: AbstractResult, name: str = "states") -> str:
    """Render an explored state space, one node per state, one arc per transition."""
    lines = [f"digraph {name} {{", "  rankdir=TB;", "  node [shape=ellipse];"]
    for s in result.states:
        digest = canonical_hash(s.heap)[:8]
        shape = ", peripheries=2" if s.location == result.cfg.exit else ""
        lines.append(f"  s{s.id} [label={_quote(f'{s.id} @ L{s.location}|{digest}')}{shape}];")
    for src, label, dst in result.transitions:
        lines.append(f"  s{src} -> s{dst} [label={_quote(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(obj: Heap | AbstractResult, name: str | None = None) -> str:
    """Render a heap or a state space, picked by type."""
    if isinstance(obj, Heap):
        return heap_dot(obj, name or "heap")
    if isinstance(obj, AbstractResult):
        return state_space_dot(obj, name or "states")
    raise TypeError(f"cannot render {type(obj).__name__} as DOT")
