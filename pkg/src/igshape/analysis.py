"""Abstract interpretation of pointer programs over summarized heaps.

Each control-flow edge is interpreted as materialize, then the concrete
transformer, then abstraction: summaries are partially concretized exactly
where the statement dereferences, the statement itself runs as on a
concrete heap, and the result is folded back to normal form.  The state
space explored this way is finite for the shipped grammars, and its exit
states can be checked against an intended summary.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import Diagnostic, IgshapeError, MaterializationError, UndefinedSemanticsError
from .grammar import Grammar, IndexGrammar, Rule
from .heap import Heap, IsoSet, isomorphic, validate
from .language import includes, inverse_language
from .programs import (
    And,
    Assign,
    Assume,
    Atomic,
    BExpr,
    ControlFlow,
    Eq,
    Field,
    FieldAssign,
    New,
    Not,
    Skip,
    Stmt,
    Var,
    build_cfg,
    to_text,
)
from .rewriting import _substitute_everywhere, derive_at, global_inverse_language
from .semantics import concrete_step, eval_bexpr

__all__ = [
    "dereferences",
    "split_index",
    "materialize",
    "canonicalize",
    "AbstractState",
    "AbstractResult",
    "abstract_execute",
    "check_covered",
]


def dereferences(label: Atomic | Assume) -> list[tuple[str, str]]:
    """The (variable, field) pairs a statement or guard reads or writes
    through, in evaluation order."""
    out: list[tuple[str, str]] = []

    def expr(e):
        if isinstance(e, Field):
            out.append((e.var, e.field))

    def cond(b: BExpr):
        match b:
            case Eq(left, right):
                expr(left)
                expr(right)
            case Not(operand):
                cond(operand)
            case And(left, right):
                cond(left)
                cond(right)

    match label:
        case Assume(c):
            cond(c)
        case Assign(_, value):
            expr(value)
        case FieldAssign(var, fld, value):
            out.append((var, fld))
            expr(value)
        case Skip() | New():
            pass
    return out


def _classify(rule: Rule, word: tuple[str, ...], index_nts: frozenset) -> str:
    """Whether the rule applies to every ("yes"), no ("no"), or only some
    ("maybe") expansion of a word whose last symbol may still expand."""
    tailed = word[-1] in index_nts
    stem = word[:-1] if tailed else word
    if rule.has_nu:
        sigma = rule.prefix
        if len(word) > len(sigma) and word[: len(sigma)] == sigma:
            return "yes"
        if tailed and len(stem) < len(sigma) and sigma[: len(stem)] == stem:
            return "maybe"
        if tailed and len(stem) == len(sigma) and stem == sigma:
            return "yes"
        return "no"
    sigma = rule.pattern
    if not tailed:
        return "yes" if word == sigma else "no"
    if len(stem) < len(sigma) and sigma[: len(stem)] == stem:
        return "maybe"
    return "no"


def split_index(
    grammar: Grammar,
    index_grammar: IndexGrammar,
    nonterminal: str,
    index: tuple[str, ...],
    depth_cap: int = 8,
) -> list[list]:
    """Expansions of a summary's trailing index nonterminal that settle
    which rules apply.

    Returns index-rule sequences; applying one globally yields a heap where
    every rule for this summary either matches its index or never will,
    whatever the remaining tail expands to.  The empty sequence means the
    index already settles everything.  Stopping before all rules are
    settled would lose the rules that only match deeper expansions, so
    unsettled words are expanded further, up to the cap.
    """
    index_nts = grammar.signature.index_nonterminals
    rules = [r for _, r in grammar.rules_for(nonterminal)]
    out: list[list] = []
    work = [(index, [])]
    for _ in range(depth_cap + 1):
        if not work:
            return out
        deeper = []
        for word, path in work:
            verdicts = [_classify(r, word, index_nts) for r in rules]
            if "maybe" not in verdicts:
                out.append(path)
                continue
            tail = word[-1]
            for _, crule in index_grammar.rules_for(tail):
                deeper.append((word[:-1] + crule.rhs, path + [crule]))
        work = deeper
    raise MaterializationError(
        f"index splitting for {nonterminal}[{','.join(index)}] kept branching "
        f"past depth {depth_cap}"
    )


def _apply_split(heap: Heap, path: list) -> Heap:
    h = heap
    for crule in path:
        h = _substitute_everywhere(h, crule.lhs, crule.rhs)
    return h


def _materialize_edge(
    grammar: Grammar,
    index_grammar: IndexGrammar | None,
    heap: Heap,
    edge_id: int,
) -> tuple[list[Heap], list[Heap]]:
    """Replace one summary edge through its rules, splitting a trailing
    index nonterminal first.  Returns (split bases, replacement results).
    """
    e = heap.edges[edge_id]
    index_nts = grammar.signature.index_nonterminals
    bases = [heap]
    if e.index and e.index[-1] in index_nts:
        if index_grammar is None:
            raise MaterializationError(
                f"edge {edge_id} has index tail {e.index[-1]} but no index "
                "grammar was supplied"
            )
        paths = split_index(grammar, index_grammar, e.label, e.index)
        if any(paths):
            # Expansion substitutes globally; with a ground-indexed summary
            # elsewhere the simultaneous step is not available.
            for other in heap.edges.values():
                if other.label in grammar.signature.nonterminals and (
                    not other.index or other.index[-1] not in index_nts
                ):
                    raise MaterializationError(
                        "cannot expand indices globally while another summary "
                        "is already ground"
                    )
        bases = [_apply_split(heap, path) for path in paths]
    out = []
    for base in bases:
        for step in derive_at(grammar, base, edge_id):
            out.append(step.result)
    return bases, out


def materialize(
    grammar: Grammar,
    index_grammar: IndexGrammar | None,
    heap: Heap,
    needed: list[tuple[str, str]],
    depth_cap: int = 8,
) -> tuple[list[Heap], list[Diagnostic]]:
    """Partially concretize until every needed dereference is answerable.

    A dereference x.f is blocked while x's node lacks an outgoing f edge
    but still touches a summary edge; blocked summaries are replaced
    through their rules (splitting trailing index nonterminals first), and
    the union of results covers every concretization of the input.

    A replacement that can be folded back to a form already replaced has
    made no progress, and its concretizations re-derive from that form's
    other branches, so it is cut.  Selectors at variable-held nodes stay
    out of the folds, which keeps values the program read earlier in the
    block (and freshly exposed dereferences) from being mistaken for
    redundancy.  Branches still blocked at the depth cap are dropped with
    a diagnostic; it is an error when nothing resolves at all.
    """
    sig = grammar.signature
    nts = sig.nonterminals
    null = heap.external[0] if heap.external else None
    held = frozenset(
        e.attached[0]
        for e in heap.edges.values()
        if e.label in sig.variables and e.attached[0] != null
    )
    resolved = IsoSet()
    expanded = IsoSet()
    diagnostics: list[Diagnostic] = []
    work = [(heap, 0)]
    dropped = 0
    while work:
        h, depth = work.pop()
        blocking: list[int] = []
        for var, fld in needed:
            u = h.variable_target(var)
            if u is None or u == h.null:
                continue
            if h.field_target(u, fld) is not None:
                continue
            blocking = sorted(
                eid for eid in h.incident_edge_ids(u) if h.edges[eid].label in nts
            )
            if blocking:
                break
        if not blocking:
            resolved.add(h)
            continue
        if depth >= depth_cap:
            dropped += 1
            diagnostics.append(
                Diagnostic(
                    "unproductive-materialization",
                    f"dropped a branch still blocked after {depth_cap} replacements",
                )
            )
            continue
        expanded.add(h)
        for eid in blocking:
            bases, succs = _materialize_edge(grammar, index_grammar, h, eid)
            for b in bases:
                expanded.add(b)
            for h2 in succs:
                if any(g in expanded for g in inverse_language(grammar, h2, held)):
                    continue
                work.append((h2, depth + 1))
    if not len(resolved):
        raise MaterializationError("no branch exposed the dereferenced fields")
    return list(resolved), diagnostics


def canonicalize(
    grammar: Grammar,
    index_grammar: IndexGrammar | None,
    heap: Heap,
) -> list[Heap]:
    """Most abstract forms of ``heap``: fold the graph with the heap rules
    as far as possible, then abstract the indices with the index rules,
    and repeat until stable.

    Graph folds run before index abstraction within each round; stripping
    first can strand a form that a ground fold still needed to match.
    Folds that would erase a variable's node are impossible (the variable
    edge lies outside any match), so variables survive, but their node may
    end up as an attachment of a summary.

    Indices are only abstracted on forms where no variable-held node
    touches an exposed selector.  Such structure was materialized for the
    program's current focus and still constrains the summaries next to it
    (a ground fold matches only exact indices); stripping there would
    admit instantiations the shape rules out.  The gate only makes the
    result tighter, and every returned form still covers the input's
    language.

    Each productive step shrinks the heap or its indices, so the search
    terminates.  With a backward confluent grammar and no variables in
    play the result is a single heap.
    """
    sig = heap.signature
    null = heap.external[0] if heap.external else None
    held = frozenset(
        e.attached[0]
        for e in heap.edges.values()
        if e.label in sig.variables and e.attached[0] != null
    )

    def observing(h: Heap) -> bool:
        return any(
            e.label in sig.fields and held.intersection(e.attached)
            for e in h.edges.values()
        )

    out = IsoSet()
    seen = IsoSet()
    work = [h for h in inverse_language(grammar, heap) if seen.add(h)]
    while work:
        h = work.pop()
        if index_grammar is None or observing(h):
            out.add(h)
            continue
        stripped = global_inverse_language(index_grammar, h)
        if len(stripped) == 1 and isomorphic(stripped[0], h):
            out.add(h)
            continue
        for g in stripped:
            for f in inverse_language(grammar, g):
                if seen.add(f):
                    work.append(f)
    return list(out)


@dataclass(frozen=True)
class AbstractState:
    id: int
    location: int
    heap: Heap


@dataclass
class AbstractResult:
    """Explored abstract state space of one program.

    ``flags`` is empty for a clean run; otherwise it names what cut the
    exploration short or which statements may be undefined.
    """

    cfg: ControlFlow
    states: list[AbstractState] = field(default_factory=list)
    transitions: list[tuple[int, str, int]] = field(default_factory=list)
    flags: set[str] = field(default_factory=set)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def states_at(self, location: int) -> list[AbstractState]:
        return [s for s in self.states if s.location == location]

    def exit_states(self) -> list[AbstractState]:
        return self.states_at(self.cfg.exit)


def _check_program_symbols(grammar: Grammar, cfg: ControlFlow):
    names = set()
    fields = set()
    for _, label, _ in cfg.edges:
        for var, fld in dereferences(label):
            names.add(var)
            fields.add(fld)
        match label:
            case Assign(var, value) | FieldAssign(var, _, value):
                names.add(var)
                if isinstance(value, (Var, Field)):
                    names.add(value.var if isinstance(value, Field) else value.name)
            case New(var):
                names.add(var)
            case Assume(_) | Skip():
                pass
    sig = grammar.signature
    bad = sorted(names - sig.variables) + sorted(fields - sig.fields)
    if bad:
        raise IgshapeError(
            f"program uses undeclared symbols: {', '.join(bad)}",
            code="unknown-symbol",
        )


def abstract_execute(
    grammar: Grammar,
    program: Stmt | ControlFlow,
    initial: Heap | list[Heap],
    index_grammar: IndexGrammar | None = None,
    max_heap_size: int = 50,
    max_states: int = 2000,
) -> AbstractResult:
    """Explore the abstract state space from the initial heaps.

    States are (location, heap) pairs up to isomorphism.  Heaps are
    renormalized where control can revisit a location (targets of
    backward edges) and at the exit; in between, materialized structure
    is left alone, so values the program has read stay consistent with
    the shape they were read from until the block ends.  A state growing
    past ``max_heap_size`` aborts the run with the ``aborted_by_widening``
    flag; possibly undefined statements are reported as diagnostics and
    flagged, and their failing branches are not continued.
    """
    cfg = program if isinstance(program, ControlFlow) else build_cfg(program)
    _check_program_symbols(grammar, cfg)
    heaps = [initial] if isinstance(initial, Heap) else list(initial)
    result = AbstractResult(cfg)
    rest_points = {dst for src, _, dst in cfg.edges if dst <= src}
    rest_points.add(cfg.exit)

    spaces: dict[int, IsoSet] = {}
    ids: dict[tuple[int, int], int] = {}
    seen_transitions = set()

    def intern(loc: int, h: Heap) -> tuple[int, bool]:
        space = spaces.setdefault(loc, IsoSet())
        fresh = space.add(h)
        canonical = space.find(h)
        key = (loc, id(canonical))
        if key not in ids:
            ids[key] = len(result.states)
            result.states.append(AbstractState(ids[key], loc, canonical))
        return ids[key], fresh

    work: deque[int] = deque()
    for h in heaps:
        problems = validate(h)
        if problems:
            raise IgshapeError(
                f"initial heap is invalid: {problems[0]}", code="precondition-violated"
            )
        for c in canonicalize(grammar, index_grammar, h):
            sid, fresh = intern(cfg.entry, c)
            if fresh:
                work.append(sid)

    while work:
        sid = work.popleft()
        state = result.states[sid]
        for label, dst in cfg.outgoing(state.location):
            try:
                mats, diags = materialize(
                    grammar, index_grammar, state.heap, dereferences(label)
                )
            except MaterializationError as err:
                result.flags.add(err.code)
                result.diagnostics.append(Diagnostic(err.code, err.message))
                return result
            result.diagnostics.extend(diags)
            if diags:
                result.flags.add("unproductive-materialization")
            outputs = []
            for m in mats:
                if isinstance(label, Assume):
                    value = eval_bexpr(m, label.cond)
                    if value is None:
                        result.flags.add("undefined-semantics")
                        result.diagnostics.append(
                            Diagnostic(
                                "undefined-semantics",
                                f"{to_text(label)} is undefined at location {state.location}",
                            )
                        )
                    elif value:
                        outputs.append(m)
                else:
                    try:
                        outputs.append(concrete_step(m, label))
                    except UndefinedSemanticsError as err:
                        result.flags.add("undefined-semantics")
                        result.diagnostics.append(
                            Diagnostic(
                                err.code,
                                f"{err.message} at location {state.location}",
                            )
                        )
            for out in outputs:
                if dst in rest_points:
                    landed = canonicalize(grammar, index_grammar, out)
                else:
                    landed = [out]
                for c in landed:
                    if c.size > max_heap_size:
                        result.flags.add("aborted_by_widening")
                        result.diagnostics.append(
                            Diagnostic(
                                "aborted_by_widening",
                                f"a heap at location {dst} grew to {c.size}, "
                                f"past the bound {max_heap_size}",
                            )
                        )
                        return result
                    did, fresh = intern(dst, c)
                    if fresh:
                        if len(result.states) > max_states:
                            result.flags.add("state-bound-exceeded")
                            result.diagnostics.append(
                                Diagnostic(
                                    "state-bound-exceeded",
                                    f"more than {max_states} abstract states",
                                )
                            )
                            return result
                        work.append(did)
                    if (sid, to_text(label), did) not in seen_transitions:
                        seen_transitions.add((sid, to_text(label), did))
                        result.transitions.append((sid, to_text(label), did))
    return result


def check_covered(
    grammar: Grammar,
    result: AbstractResult,
    target: Heap,
    index_grammar: IndexGrammar | None = None,
) -> tuple[bool, list[AbstractState]]:
    """Whether every exit state's language is below the target summary.

    Returns the verdict and the exit states that are not covered.
    """
    uncovered = [
        s
        for s in result.exit_states()
        if not includes(grammar, s.heap, target, index_grammar)
    ]
    return not uncovered, uncovered
