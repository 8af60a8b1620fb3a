"""Replacement grammars over indexed heaps, and index grammars.

A heap rule rewrites a nonterminal edge whose index matches the rule's
pattern into a right-hand-side heap.  Patterns are words of index terminals,
optionally ending in the recursion marker ν; a ν pattern matches any strict
extension of its terminal prefix and threads the remainder into the
right-hand side's ν positions.  An index grammar separately rewrites the
index nonterminals that keep summaries finite.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import Diagnostic, DocumentError, GrammarError
from .heap import NU, Z, Heap, Signature, validate

__all__ = [
    "Rule",
    "Grammar",
    "IndexRule",
    "IndexGrammar",
    "well_formed_index",
    "lint_grammar",
    "load_grammar",
    "lint_index_grammar",
    "load_index_grammar",
]


@dataclass(frozen=True)
class Rule:
    """One replacement rule: nonterminal, index pattern, right-hand side."""

    nonterminal: str
    pattern: tuple[str, ...]
    rhs: Heap

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(self.pattern))

    @property
    def has_nu(self) -> bool:
        return bool(self.pattern) and self.pattern[-1] == NU

    @property
    def prefix(self) -> tuple[str, ...]:
        """Terminal part of the pattern (everything before a trailing ν)."""
        return self.pattern[:-1] if self.has_nu else self.pattern


class Grammar:
    def __init__(self, signature: Signature, rules):
        self.signature = signature
        self.rules = tuple(rules)

    def rules_for(self, nonterminal: str) -> list[tuple[int, Rule]]:
        return [(i, r) for i, r in enumerate(self.rules) if r.nonterminal == nonterminal]

    def max_pattern_len(self) -> int:
        return max((len(r.prefix) for r in self.rules), default=0)

    def __repr__(self) -> str:
        return f"Grammar({len(self.rules)} rules over {sorted(self.signature.nonterminals)})"

    def to_document(self) -> dict:
        return {
            "signature": self.signature.to_document(),
            "rules": [
                {
                    "nonterminal": r.nonterminal,
                    "index": list(r.pattern),
                    "rhs": r.rhs.to_document(),
                }
                for r in self.rules
            ],
        }


@dataclass(frozen=True)
class IndexRule:
    lhs: str
    rhs: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "rhs", tuple(self.rhs))


class IndexGrammar:
    def __init__(self, signature: Signature, rules):
        self.signature = signature
        self.rules = tuple(rules)

    def rules_for(self, lhs: str) -> list[tuple[int, IndexRule]]:
        return [(i, r) for i, r in enumerate(self.rules) if r.lhs == lhs]

    def max_rhs_len(self) -> int:
        return max((len(r.rhs) for r in self.rules), default=0)

    def __repr__(self) -> str:
        shown = ", ".join(f"{r.lhs}->{''.join(r.rhs)}" for r in self.rules)
        return f"IndexGrammar({shown})"

    def to_document(self) -> dict:
        return {
            "signature": self.signature.to_document(),
            "rules": [{"lhs": r.lhs, "rhs": list(r.rhs)} for r in self.rules],
        }


def well_formed_index(signature: Signature, index) -> bool:
    """True when the word lies in (terminals without z)* followed by z or an
    index nonterminal."""
    index = tuple(index)
    if not index:
        return False
    head, last = index[:-1], index[-1]
    if last != Z and last not in signature.index_nonterminals:
        return False
    return all(sym in signature.index_terminals and sym != Z for sym in head)


def _check_rule(signature: Signature, pos: int, rule: Rule) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    where = f"rule #{pos}"
    if rule.nonterminal not in signature.nonterminals:
        out.append(Diagnostic("unknown-symbol", f"{where}: nonterminal {rule.nonterminal!r} is not declared"))
        return out
    rank = signature.nonterminals[rule.nonterminal]

    if not rule.pattern:
        out.append(Diagnostic("bad-index-symbol", f"{where}: empty index pattern"))
    for i, sym in enumerate(rule.pattern):
        if sym == NU:
            if i != len(rule.pattern) - 1:
                out.append(Diagnostic("bad-index-symbol", f"{where}: ν may only end the pattern"))
        elif sym not in signature.index_terminals:
            out.append(
                Diagnostic(
                    "bad-index-symbol",
                    f"{where}: pattern symbol {sym!r} is not an index terminal",
                )
            )

    rhs = rule.rhs
    out.extend(
        Diagnostic(d.code, f"{where}: {d.message}") for d in validate(rhs)
    )
    if len(rhs.external) != rank:
        out.append(
            Diagnostic(
                "rank-mismatch",
                f"{where}: {rule.nonterminal} has rank {rank} but the right-hand side "
                f"exposes {len(rhs.external)} external nodes",
            )
        )
    if rhs.size <= rank + 1:
        out.append(
            Diagnostic(
                "not-increasing",
                f"{where}: right-hand side size {rhs.size} does not exceed rank+1 = {rank + 1}",
            )
        )
    for eid, e in rhs.edges.items():
        kind = None
        try:
            kind = signature.kind(e.label)
        except KeyError:
            continue  # already reported by validate
        if kind == "variable":
            out.append(
                Diagnostic("rule-variable-edge", f"{where}: edge {eid} puts variable {e.label!r} in a rule")
            )
        elif kind == "field":
            pass  # index checks are covered by the right-hand side validation above
        else:
            if NU in e.index:
                if not rule.has_nu:
                    out.append(
                        Diagnostic(
                            "nu-discipline",
                            f"{where}: edge {eid} uses ν but the pattern is ground",
                        )
                    )
                body = e.index[:-1]
            else:
                if not e.index or e.index[-1] != Z:
                    out.append(
                        Diagnostic(
                            "bad-index-symbol",
                            f"{where}: edge {eid}: a ν-free nonterminal index must end in {Z!r}",
                        )
                    )
                body = e.index[:-1]
            for sym in body:
                if sym not in signature.index_terminals:
                    out.append(
                        Diagnostic(
                            "bad-index-symbol",
                            f"{where}: edge {eid}: index symbol {sym!r} is not an index terminal",
                        )
                    )
    return out


def lint_grammar(doc) -> list[Diagnostic]:
    """All findings for a grammar document; empty means it loads cleanly."""
    try:
        grammar = _parse_grammar(doc)
    except DocumentError as exc:
        return [Diagnostic(exc.code, str(exc.args[0]) if exc.args else str(exc))]
    out = []
    for pos, rule in enumerate(grammar.rules):
        out.extend(_check_rule(grammar.signature, pos, rule))
    return out


def _parse_grammar(doc) -> Grammar:
    if not isinstance(doc, dict):
        raise DocumentError("grammar document must be an object")
    signature = Signature.from_document(doc.get("signature"))
    rules = []
    for pos, rdoc in enumerate(doc.get("rules", [])):
        if not isinstance(rdoc, dict):
            raise DocumentError(f"rule #{pos} must be an object")
        nt = rdoc.get("nonterminal")
        pattern = rdoc.get("index")
        if not isinstance(nt, str):
            raise DocumentError(f"rule #{pos} has no nonterminal")
        if not isinstance(pattern, list) or not all(isinstance(s, str) for s in pattern):
            raise DocumentError(f"rule #{pos}: 'index' must be a list of strings")
        rhs = Heap.from_document(rdoc.get("rhs"), signature)
        rules.append(Rule(nt, tuple(pattern), rhs))
    return Grammar(signature, rules)


def load_grammar(doc) -> Grammar:
    """Parse and fully check a grammar document, raising on any finding."""
    grammar = _parse_grammar(doc)
    problems = []
    for pos, rule in enumerate(grammar.rules):
        problems.extend(_check_rule(grammar.signature, pos, rule))
    if problems:
        first = problems[0]
        raise GrammarError(f"{first.message} (+{len(problems) - 1} more)" if len(problems) > 1 else first.message, code=first.code)
    return grammar


def _check_index_rule(signature: Signature, pos: int, rule: IndexRule) -> list[Diagnostic]:
    out = []
    where = f"index rule #{pos}"
    if rule.lhs not in signature.index_nonterminals:
        out.append(Diagnostic("unknown-symbol", f"{where}: {rule.lhs!r} is not an index nonterminal"))
    if not rule.rhs:
        out.append(Diagnostic("bad-index-symbol", f"{where}: empty replacement"))
        return out
    if len(rule.rhs) == 1 and rule.rhs[0] in signature.index_nonterminals:
        out.append(
            Diagnostic(
                "unit-rule-grammar",
                f"{where}: {rule.lhs} -> {rule.rhs[0]} only renames an index nonterminal",
            )
        )
    if not well_formed_index(signature, rule.rhs):
        out.append(
            Diagnostic(
                "not-well-formed",
                f"{where}: replacement {''.join(rule.rhs)!r} must be (terminals without "
                f"{Z!r})* followed by {Z!r} or an index nonterminal",
            )
        )
    return out


def lint_index_grammar(doc) -> list[Diagnostic]:
    try:
        grammar = _parse_index_grammar(doc)
    except DocumentError as exc:
        return [Diagnostic(exc.code, str(exc.args[0]) if exc.args else str(exc))]
    out = []
    for pos, rule in enumerate(grammar.rules):
        out.extend(_check_index_rule(grammar.signature, pos, rule))
    return out


def _parse_index_grammar(doc) -> IndexGrammar:
    if not isinstance(doc, dict):
        raise DocumentError("index grammar document must be an object")
    signature = Signature.from_document(doc.get("signature"))
    rules = []
    for pos, rdoc in enumerate(doc.get("rules", [])):
        if not isinstance(rdoc, dict):
            raise DocumentError(f"index rule #{pos} must be an object")
        lhs = rdoc.get("lhs")
        rhs = rdoc.get("rhs")
        if not isinstance(lhs, str):
            raise DocumentError(f"index rule #{pos} has no lhs")
        if not isinstance(rhs, list) or not all(isinstance(s, str) for s in rhs):
            raise DocumentError(f"index rule #{pos}: 'rhs' must be a list of strings")
        rules.append(IndexRule(lhs, tuple(rhs)))
    return IndexGrammar(signature, rules)


def load_index_grammar(doc) -> IndexGrammar:
    grammar = _parse_index_grammar(doc)
    problems = []
    for pos, rule in enumerate(grammar.rules):
        problems.extend(_check_index_rule(grammar.signature, pos, rule))
    if problems:
        first = problems[0]
        raise GrammarError(first.message, code=first.code)
    return grammar
