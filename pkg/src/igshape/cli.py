"""Command line front end.

Every subcommand prints one JSON report on stdout, shaped as
``{"command", "result", "diagnostics", "artifacts"}``, and exits 0 when the
answer is positive (verified, covered, clean), 1 when a decided answer is
negative, and 2 when the inputs are unusable.  ``analyze --export dot``
replaces the report with Graphviz text.  A one-line verdict goes to stderr;
set IGSHAPE_COLOR=always|never|auto to control its coloring.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .analysis import abstract_execute, canonicalize, check_covered
from .dot import heap_dot, state_space_dot
from .errors import Diagnostic, DocumentError, IgshapeError, PreconditionError
from .grammar import Grammar, lint_grammar, lint_index_grammar, load_grammar, load_index_grammar
from .heap import Heap, canonical_hash, format_index, single_edge_heap, validate
from .language import confluence_probe, enumerate_bounded, includes, is_empty, nonempty_witness
from .programs import build_cfg, parse_program, to_text
from .rewriting import derive_all, global_derive_all, global_inverse_derive_all, inverse_derive_all
from .semantics import run_concrete


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DocumentError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


def _load_heap(path: str, signature=None) -> Heap:
    heap = Heap.from_document(_load_json(path), signature)
    problems = validate(heap)
    if problems:
        raise DocumentError(f"{path}: {problems[0].message}", code=problems[0].code)
    return heap


def _load_program(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(f"{path}: {exc.strerror or exc}") from exc
    return parse_program(text)


def _parse_index(signature, text: str) -> tuple[str, ...]:
    """Read an index word like 'ssz' or 's s X' against the declared symbols."""
    tokens = text.replace(",", " ").split()
    if len(tokens) > 1:
        return tuple(tokens)
    symbols = sorted(signature.index_terminals | signature.index_nonterminals, key=len, reverse=True)
    out: list[str] = []
    rest = text.strip()
    while rest:
        for sym in symbols:
            if rest.startswith(sym):
                out.append(sym)
                rest = rest[len(sym):]
                break
        else:
            raise DocumentError(f"cannot read index {text!r}: no declared symbol starts {rest!r}")
    return tuple(out)


def _emit(command: str, result, diagnostics=(), artifacts=None):
    report = {
        "command": command,
        "result": result,
        "diagnostics": [{"code": d.code, "message": d.message} for d in diagnostics],
        "artifacts": artifacts if artifacts is not None else {},
    }
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _say(ok: bool, text: str):
    mode = os.environ.get("IGSHAPE_COLOR", "auto")
    use_color = mode == "always" or (mode != "never" and sys.stderr.isatty())
    if use_color:
        text = f"\x1b[32m{text}\x1b[0m" if ok else f"\x1b[31m{text}\x1b[0m"
    print(text, file=sys.stderr)


def _gate_confluence(grammar: Grammar, assumed: bool) -> str:
    """Inclusion is only exact for backward confluent grammars, so refuse to
    answer unless the caller asserts that or a sampling probe comes back clean."""
    if assumed:
        return "assumed"
    violations = confluence_probe(grammar, max_samples=20)
    if violations:
        v = violations[0]
        raise PreconditionError(
            f"backward confluence probe found a counterexample for "
            f"({v.nonterminal}, {format_index(v.index)}); rerun with --assume-confluent "
            f"to override or fix the grammar"
        )
    return "probed"


def _step_doc(step) -> dict:
    return {
        "edge": step.edge_id,
        "rule": step.rule_id,
        "rho": format_index(step.rho) if step.rho is not None else None,
        "result": step.result.to_document(),
    }


def cmd_lint(args) -> int:
    findings: list[Diagnostic] = []
    checked = []

    def note(path, diags):
        checked.append(str(path))
        findings.extend(Diagnostic(d.code, f"{path}: {d.message}") for d in diags)

    def lint_one(path: Path, signature=None):
        if path.suffix == ".prog":
            try:
                build_cfg(parse_program(path.read_text(encoding="utf-8")))
                note(path, [])
            except IgshapeError as exc:
                note(path, [Diagnostic(exc.code, exc.args[0] if exc.args else str(exc))])
            return
        try:
            doc = _load_json(str(path))
        except DocumentError as exc:
            note(path, [Diagnostic(exc.code, exc.args[0] if exc.args else str(exc))])
            return
        if isinstance(doc, dict) and "nodes" in doc:
            if signature is None and "signature" not in doc:
                note(path, [Diagnostic("bad-document", "heap document carries no signature")])
                return
            try:
                note(path, validate(Heap.from_document(doc, signature)))
            except DocumentError as exc:
                note(path, [Diagnostic(exc.code, exc.args[0] if exc.args else str(exc))])
        elif isinstance(doc, dict) and any("lhs" in r for r in doc.get("rules", []) if isinstance(r, dict)):
            note(path, lint_index_grammar(doc))
        else:
            note(path, lint_grammar(doc))

    for raw in args.paths:
        path = Path(raw)
        if path.is_dir():
            signature = None
            gpath = path / "grammar.json"
            if gpath.exists():
                lint_one(gpath)
                try:
                    signature = load_grammar(_load_json(str(gpath))).signature
                except IgshapeError:
                    pass
            for name in ("index_grammar.json", "initial.json", "target.json", "program.prog"):
                sub = path / name
                if sub.exists():
                    lint_one(sub, signature if name.endswith(".json") and name != "index_grammar.json" else None)
        elif path.exists():
            lint_one(path)
        else:
            note(path, [Diagnostic("bad-document", "no such file")])

    _emit("lint", {"checked": checked, "findings": len(findings)}, findings)
    _say(not findings, f"lint: {len(findings)} finding(s) in {len(checked)} input(s)")
    return 2 if findings else 0


def cmd_empty(args) -> int:
    grammar = load_grammar(_load_json(args.grammar))
    index_grammar = load_index_grammar(_load_json(args.index_grammar)) if args.index_grammar else None
    heap = _load_heap(args.heap, grammar.signature)
    empty = is_empty(grammar, heap, index_grammar)
    diagnostics = []
    artifacts = {}
    if not empty and args.witness:
        steps = nonempty_witness(grammar, heap)
        if steps is None:
            diagnostics.append(
                Diagnostic(
                    "witness-unavailable",
                    "the language is nonempty but only via index replacement; "
                    "substitute the index nonterminal first to get a replay",
                )
            )
        else:
            artifacts["witness"] = {
                "steps": [{"edge": s.edge_id, "rule": s.rule_id,
                           "rho": format_index(s.rho) if s.rho is not None else None}
                          for s in steps],
                "heap": (steps[-1].result if steps else heap).to_document(),
            }
            if args.dot:
                Path(args.dot).write_text(heap_dot(steps[-1].result if steps else heap), encoding="utf-8")
                artifacts["dot"] = args.dot
    _emit("empty", {"empty": empty}, diagnostics, artifacts)
    _say(True, f"empty: {empty}")
    return 0


def cmd_enumerate(args) -> int:
    grammar = load_grammar(_load_json(args.grammar))
    if args.heap:
        start = _load_heap(args.heap, grammar.signature)
    elif args.nonterminal and args.index:
        start = single_edge_heap(grammar.signature, args.nonterminal,
                                 _parse_index(grammar.signature, args.index))
    else:
        raise DocumentError("pass either --heap or both --nonterminal and --index")
    enum = enumerate_bounded(grammar, start, max_steps=args.max_steps,
                             max_index_len=args.max_index_len, max_graphs=args.max_graphs)
    result = {"count": len(enum.heaps), "complete": enum.complete, "visited": enum.visited}
    if args.emit_heaps:
        result["heaps"] = [h.to_document() for h in enum.heaps]
    artifacts = {}
    if args.dot:
        outdir = Path(args.dot)
        outdir.mkdir(parents=True, exist_ok=True)
        for i, h in enumerate(enum.heaps):
            (outdir / f"graph_{i:03d}.dot").write_text(heap_dot(h, f"graph_{i:03d}"), encoding="utf-8")
        artifacts = {"dot_dir": str(outdir), "written": len(enum.heaps)}
    _emit("enumerate", result, (), artifacts)
    _say(True, f"enumerate: {len(enum.heaps)} heap(s), complete={enum.complete}")
    return 0


def cmd_include(args) -> int:
    grammar = load_grammar(_load_json(args.grammar))
    index_grammar = load_index_grammar(_load_json(args.index_grammar)) if args.index_grammar else None
    sub = _load_heap(args.sub, grammar.signature)
    sup = _load_heap(args.sup, grammar.signature)
    confluence = _gate_confluence(grammar, args.assume_confluent)
    verdict = includes(grammar, sub, sup, index_grammar)
    _emit("include", {"includes": verdict, "confluence": confluence})
    _say(verdict, f"include: {verdict}")
    return 0 if verdict else 1


def cmd_probe_confluence(args) -> int:
    grammar = load_grammar(_load_json(args.grammar))
    violations = confluence_probe(grammar, max_index_len=args.max_index_len,
                                  max_steps=args.max_steps, max_samples=args.max_samples)
    result = {
        "clean": not violations,
        "violations": [
            {
                "nonterminal": v.nonterminal,
                "index": format_index(v.index),
                "sample": v.sample.to_document(),
                "normal_forms": [h.to_document() for h in v.normal_forms],
            }
            for v in violations
        ],
    }
    artifacts = {}
    if args.dot and violations:
        outdir = Path(args.dot)
        outdir.mkdir(parents=True, exist_ok=True)
        written = 0
        for i, v in enumerate(violations):
            (outdir / f"sample_{i:02d}.dot").write_text(heap_dot(v.sample, f"sample_{i:02d}"), encoding="utf-8")
            written += 1
            for j, h in enumerate(v.normal_forms):
                (outdir / f"sample_{i:02d}_form_{j}.dot").write_text(heap_dot(h, f"form_{j}"), encoding="utf-8")
                written += 1
        artifacts = {"dot_dir": str(outdir), "written": written}
    _emit("probe-confluence", result, (), artifacts)
    _say(not violations, f"probe-confluence: {len(violations)} violation(s)")
    return 1 if violations else 0


def cmd_derive(args) -> int:
    grammar = load_grammar(_load_json(args.grammar))
    index_grammar = load_index_grammar(_load_json(args.index_grammar)) if args.index_grammar else None
    heap = _load_heap(args.heap, grammar.signature)
    result = {"steps": [_step_doc(s) for s in derive_all(grammar, heap)]}
    if index_grammar is not None:
        result["global_steps"] = [
            {"rule": s.rule_id, "result": s.result.to_document()}
            for s in global_derive_all(index_grammar, heap)
        ]
    _emit("derive", result)
    _say(True, f"derive: {len(result['steps'])} step(s)")
    return 0


def cmd_abstract(args) -> int:
    grammar = load_grammar(_load_json(args.grammar))
    index_grammar = load_index_grammar(_load_json(args.index_grammar)) if args.index_grammar else None
    heap = _load_heap(args.heap, grammar.signature)
    steps = [
        {
            "rule": s.rule_id,
            "rho": format_index(s.rho) if s.rho is not None else None,
            "nodes": dict(s.node_map),
            "edges": dict(s.edge_map),
            "result": s.result.to_document(),
        }
        for s in inverse_derive_all(grammar, heap)
    ]
    result = {"steps": steps}
    if index_grammar is not None:
        result["global_steps"] = [
            {"rule": s.rule_id, "result": s.result.to_document()}
            for s in global_inverse_derive_all(index_grammar, heap)
        ]
    result["normal_forms"] = [h.to_document() for h in canonicalize(grammar, index_grammar, heap)]
    _emit("abstract", result)
    _say(True, f"abstract: {len(steps)} step(s), {len(result['normal_forms'])} normal form(s)")
    return 0


def cmd_run(args) -> int:
    signature = None
    if args.grammar:
        signature = load_grammar(_load_json(args.grammar)).signature
    program = _load_program(args.program)
    heap = _load_heap(args.heap, signature)
    try:
        final = run_concrete(program, heap, fuel=args.fuel)
    except IgshapeError as exc:
        if exc.code not in ("undefined-semantics", "undefined-evaluation", "out-of-fuel"):
            raise
        _emit("run", {"outcome": exc.code},
              [Diagnostic(exc.code, exc.args[0] if exc.args else str(exc))])
        _say(False, f"run: {exc.code}")
        return 1
    _emit("run", {"outcome": "completed", "heap": final.to_document()})
    _say(True, "run: completed")
    return 0


def cmd_analyze(args) -> int:
    grammar = load_grammar(_load_json(args.grammar))
    index_grammar = load_index_grammar(_load_json(args.index_grammar)) if args.index_grammar else None
    program = _load_program(args.program)
    initial = [_load_heap(path, grammar.signature) for path in args.initial]
    target = _load_heap(args.target, grammar.signature) if args.target else None

    confluence = _gate_confluence(grammar, args.assume_confluent) if target is not None else None
    res = abstract_execute(grammar, program, initial, index_grammar,
                           max_heap_size=args.max_size, max_states=args.max_states)

    covered = None
    uncovered_ids: list[int] = []
    if target is not None:
        exits = res.exit_states()
        if args.jobs > 1 and len(exits) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                oks = list(pool.map(lambda s: includes(grammar, s.heap, target, index_grammar), exits))
            uncovered_ids = [s.id for s, ok in zip(exits, oks) if not ok]
        else:
            _, uncovered = check_covered(grammar, res, target, index_grammar)
            uncovered_ids = [s.id for s in uncovered]
        covered = not uncovered_ids

    locations: dict[str, list[str]] = {}
    for s in res.states:
        locations.setdefault(str(s.location), []).append(canonical_hash(s.heap)[:12])
    for digests in locations.values():
        digests.sort()

    if args.export == "dot":
        sys.stdout.write(state_space_dot(res))
    else:
        result = {
            "states": len(res.states),
            "transitions": len(res.transitions),
            "flags": sorted(res.flags),
            "locations": locations,
            "exit_states": len(res.exit_states()),
            "covered": covered,
            "uncovered": uncovered_ids,
        }
        if confluence is not None:
            result["confluence"] = confluence
        artifacts = {}
        if args.export == "json":
            artifacts = {
                "states": [{"id": s.id, "location": s.location, "heap": s.heap.to_document()}
                           for s in res.states],
                "transitions": [[src, lab, dst] for src, lab, dst in res.transitions],
            }
        _emit("analyze", result, res.diagnostics, artifacts)

    ok = not res.flags and (covered is not False)
    bits = [f"{len(res.states)} state(s)"]
    if res.flags:
        bits.append("flags: " + ",".join(sorted(res.flags)))
    if covered is not None:
        bits.append(f"covered: {covered}")
    _say(ok, "analyze: " + ", ".join(bits))
    return 0 if ok else 1


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="igshape",
        description="Shape analysis over indexed heap hypergraphs",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("analyze", help="abstractly execute a program and check target coverage")
    p.add_argument("--grammar", required=True)
    p.add_argument("--index-grammar")
    p.add_argument("--program", required=True)
    p.add_argument("--initial", action="append", required=True, help="initial heap (repeatable)")
    p.add_argument("--target", help="fully abstract heap every exit state must fall under")
    p.add_argument("--max-size", type=int, default=50, help="abort when a state grows past this many items")
    p.add_argument("--max-states", type=int, default=2000)
    p.add_argument("--assume-confluent", action="store_true")
    p.add_argument("--export", choices=("json", "dot"), help="dump the state space into the report, or as Graphviz text")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for independent coverage checks")

    p = sub.add_parser("run", help="execute a program on a concrete heap")
    p.add_argument("--grammar", help="supplies the signature when the heap document has none")
    p.add_argument("--program", required=True)
    p.add_argument("--heap", required=True)
    p.add_argument("--fuel", type=int, default=10_000)

    p = sub.add_parser("derive", help="list the single replacement steps from a heap")
    p.add_argument("--grammar", required=True)
    p.add_argument("--index-grammar")
    p.add_argument("--heap", required=True)

    p = sub.add_parser("abstract", help="list the single inverse steps and the normal forms of a heap")
    p.add_argument("--grammar", required=True)
    p.add_argument("--index-grammar")
    p.add_argument("--heap", required=True)

    p = sub.add_parser("enumerate", help="enumerate the concrete heaps of a summary")
    p.add_argument("--grammar", required=True)
    p.add_argument("--heap", help="start heap document")
    p.add_argument("--nonterminal", help="start from a single summary edge instead")
    p.add_argument("--index", help="index word for --nonterminal, e.g. 'ssz'")
    p.add_argument("--max-steps", type=int, default=64)
    p.add_argument("--max-index-len", type=int, default=8)
    p.add_argument("--max-graphs", type=int, default=None)
    p.add_argument("--emit-heaps", action="store_true", help="include every heap document in the report")
    p.add_argument("--dot", metavar="DIR", help="write each heap as a .dot file into DIR")

    p = sub.add_parser("empty", help="decide emptiness of a heap's concretization language")
    p.add_argument("--grammar", required=True)
    p.add_argument("--index-grammar")
    p.add_argument("--heap", required=True)
    p.add_argument("--witness", action="store_true", help="include a derivation replay when nonempty")
    p.add_argument("--dot", metavar="FILE", help="write the witness heap as Graphviz text")

    p = sub.add_parser("include", help="decide language inclusion between two heaps")
    p.add_argument("--grammar", required=True)
    p.add_argument("--index-grammar")
    p.add_argument("--sub", required=True)
    p.add_argument("--sup", required=True)
    p.add_argument("--assume-confluent", action="store_true",
                   help="skip the backward confluence probe")

    p = sub.add_parser("probe-confluence", help="sample concretizations and re-abstract them")
    p.add_argument("--grammar", required=True)
    p.add_argument("--max-index-len", type=int, default=3)
    p.add_argument("--max-steps", type=int, default=8)
    p.add_argument("--max-samples", type=int, default=50)
    p.add_argument("--dot", metavar="DIR", help="write counterexample heaps as .dot files into DIR")

    p = sub.add_parser("lint", help="check grammar, heap, and program documents")
    p.add_argument("paths", nargs="+", help="JSON/.prog files or fixture directories")

    args = parser.parse_args(argv)

    handlers = {
        "analyze": cmd_analyze,
        "run": cmd_run,
        "derive": cmd_derive,
        "abstract": cmd_abstract,
        "enumerate": cmd_enumerate,
        "empty": cmd_empty,
        "include": cmd_include,
        "probe-confluence": cmd_probe_confluence,
        "lint": cmd_lint,
    }
    if args.command is None:
        parser.print_help(sys.stderr)
        sys.exit(2)
    try:
        code = handlers[args.command](args)
    except IgshapeError as exc:
        _emit(args.command, {"error": exc.code},
              [Diagnostic(exc.code, str(exc.args[0]) if exc.args else str(exc))])
        _say(False, f"{args.command}: {exc.code}")
        code = 2
    sys.exit(code)


if __name__ == "__main__":
    main()
