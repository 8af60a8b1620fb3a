"""Shape analysis over indexed heap hypergraphs.

The package models program heaps as hypergraphs whose summary edges carry
index words, gives them meaning through replacement grammars paired with an
index grammar, and verifies structural data-structure properties of small
pointer programs by abstract interpretation over such summaries.
"""
from .errors import (
    Diagnostic,
    DocumentError,
    EvaluationUndefinedError,
    GrammarError,
    IgshapeError,
    MaterializationError,
    OutOfFuelError,
    PreconditionError,
    SaturationLimitError,
    UndefinedSemanticsError,
    UnionUndefinedError,
)
from .heap import (
    NU,
    Z,
    Edge,
    Heap,
    IsoSet,
    Signature,
    canonical_hash,
    find_isomorphism,
    format_index,
    isomorphic,
    single_edge_heap,
    union,
    validate,
)
from .grammar import (
    Grammar,
    IndexGrammar,
    IndexRule,
    Rule,
    lint_grammar,
    lint_index_grammar,
    load_grammar,
    load_index_grammar,
    well_formed_index,
)
from .rewriting import (
    GlobalStep,
    InverseStep,
    Step,
    derive_all,
    derive_at,
    derive_leftmost,
    global_derive_all,
    global_inverse_derive_all,
    global_inverse_language,
    inverse_derive_all,
    match_pattern,
    replace,
    substitute_nu,
)
from .language import (
    Enumeration,
    ProbeViolation,
    confluence_probe,
    enumerate_bounded,
    includes,
    inverse_language,
    is_empty,
    nonempty_witness,
)
from .programs import (
    Assign,
    Assume,
    ControlFlow,
    FieldAssign,
    If,
    New,
    Seq,
    Skip,
    While,
    build_cfg,
    parse_program,
    to_text,
)
from .semantics import concrete_step, eval_bexpr, eval_pexpr, mod_set, run_concrete
from .analysis import (
    AbstractResult,
    AbstractState,
    abstract_execute,
    canonicalize,
    check_covered,
    materialize,
    split_index,
)
from .dot import export_dot, heap_dot, state_space_dot

__version__ = "0.1.0"
