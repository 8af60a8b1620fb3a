"""Concrete execution of pointer programs on heaps.

Pointer expressions evaluate to nodes; conditions are three-valued, with
``None`` standing for undefined, and conjunction is strict in it.  Atomic
statements transform the heap or are undefined (null dereference, update
of a missing field edge); running a whole program threads these through
the syntax tree under a fuel bound.
"""
from __future__ import annotations

from .errors import (
    EvaluationUndefinedError,
    OutOfFuelError,
    UndefinedSemanticsError,
)
from .heap import Z, Edge, Heap
from .programs import (
    And,
    Assign,
    Assume,
    Atomic,
    BExpr,
    Eq,
    Field,
    FieldAssign,
    If,
    New,
    Not,
    Null,
    PExpr,
    Seq,
    Skip,
    Stmt,
    Var,
    While,
    to_text,
)

__all__ = [
    "eval_pexpr",
    "eval_bexpr",
    "concrete_step",
    "run_concrete",
    "mod_set",
]


def eval_pexpr(heap: Heap, expr: PExpr) -> int:
    """The node the expression denotes; raises when undefined."""
    match expr:
        case Null():
            return heap.null
        case Var(name):
            node = heap.variable_target(name)
            if node is None:
                raise EvaluationUndefinedError(f"variable {name} is not set")
            return node
        case Field(var, fld):
            node = heap.variable_target(var)
            if node is None:
                raise EvaluationUndefinedError(f"variable {var} is not set")
            if node == heap.null:
                raise EvaluationUndefinedError(f"{var}.{fld} dereferences null")
            target = heap.field_target(node, fld)
            if target is None:
                raise EvaluationUndefinedError(f"{var}.{fld} is not present")
            return target
    raise TypeError(f"not a pointer expression: {expr!r}")


def eval_bexpr(heap: Heap, cond: BExpr) -> bool | None:
    """Three-valued truth of a condition; ``None`` when undefined."""
    match cond:
        case Eq(left, right):
            try:
                return eval_pexpr(heap, left) == eval_pexpr(heap, right)
            except EvaluationUndefinedError:
                return None
        case Not(operand):
            inner = eval_bexpr(heap, operand)
            return None if inner is None else not inner
        case And(left, right):
            a = eval_bexpr(heap, left)
            b = eval_bexpr(heap, right)
            if a is None or b is None:
                return None
            return a and b
    raise TypeError(f"not a condition: {cond!r}")


def _set_variable(heap: Heap, name: str, node: int) -> Heap:
    return heap.with_edges(
        removed=heap.edge_ids_by_label(name),
        added=[Edge(name, (Z,), (node,))],
    )


def concrete_step(heap: Heap, stmt: Atomic) -> Heap:
    """One atomic statement on a concrete heap.

    Raises when the statement is undefined there; the heap is otherwise
    unchanged, since heaps are immutable.
    """
    match stmt:
        case Skip():
            return heap
        case Assign(var, value):
            try:
                node = eval_pexpr(heap, value)
            except EvaluationUndefinedError as err:
                raise UndefinedSemanticsError(f"{to_text(stmt)} {err.message}") from err
            return _set_variable(heap, var, node)
        case New(var):
            node = heap.fresh_node_ids(1)[0]
            added = [
                Edge(fld, (Z,), (node, heap.null))
                for fld in sorted(heap.signature.fields)
            ]
            grown = heap.with_nodes(added=[node]).with_edges(added=added)
            return _set_variable(grown, var, node)
        case FieldAssign(var, fld, value):
            source = heap.variable_target(var)
            if source is None or source == heap.null:
                raise UndefinedSemanticsError(
                    f"{to_text(stmt)} dereferences {'null' if source is not None else 'an unset variable'}"
                )
            try:
                node = eval_pexpr(heap, value)
            except EvaluationUndefinedError as err:
                raise UndefinedSemanticsError(f"{to_text(stmt)} {err.message}") from err
            old = [
                eid
                for eid in heap.incident_edge_ids(source)
                if heap.edges[eid].label == fld and heap.edges[eid].attached[0] == source
            ]
            if not old:
                raise UndefinedSemanticsError(
                    f"{to_text(stmt)} updates a field with no edge to redirect"
                )
            return heap.with_edges(removed=old, added=[Edge(fld, (Z,), (source, node))])
    raise TypeError(f"not an atomic statement: {stmt!r}")


def run_concrete(program: Stmt, heap: Heap, fuel: int = 10_000) -> Heap:
    """Execute the whole program, spending one fuel unit per atomic step
    or guard evaluation."""
    budget = [fuel]

    def spend():
        budget[0] -= 1
        if budget[0] < 0:
            raise OutOfFuelError(f"execution exceeded {fuel} steps")

    def check(cond: BExpr, h: Heap) -> bool:
        spend()
        value = eval_bexpr(h, cond)
        if value is None:
            raise UndefinedSemanticsError(f"assume({to_text(cond)}) is undefined")
        return value

    def go(s: Stmt, h: Heap) -> Heap:
        match s:
            case Seq(body):
                for part in body:
                    h = go(part, h)
                return h
            case If(cond, then, orelse):
                return go(then if check(cond, h) else orelse, h)
            case While(cond, body):
                while check(cond, h):
                    h = go(body, h)
                return h
            case _:
                spend()
                return concrete_step(h, s)

    return go(program, heap)


def mod_set(stmt: Atomic, heap: Heap) -> tuple[set[str], set[tuple[int, str]]]:
    """Variables and (node, field) slots an atomic statement changes on
    this heap, read off the pre/post edge difference."""
    post = concrete_step(heap, stmt)
    variables: set[str] = set()
    slots: set[tuple[int, str]] = set()
    # compare by content: edge ids freed by a removal may be reissued
    for eid in heap.edges.keys() | post.edges.keys():
        old, new = heap.edges.get(eid), post.edges.get(eid)
        if old == new:
            continue
        for e in (old, new):
            if e is None:
                continue
            if e.label in heap.signature.variables:
                variables.add(e.label)
            elif e.label in heap.signature.fields:
                slots.add((e.attached[0], e.label))
    return variables, slots
