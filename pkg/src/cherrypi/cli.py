"""Command line front end.

Exit codes: 0 success (or a compliant / safe / matching verdict), 1 a
violation or error verdict, 2 usage, parse, or input errors, 3 exploration
budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .infer import TypingError, infer_collaboration
from .multiparty import (m_check_rollback_safety, m_explore,
                         m_infer_collaboration, m_simulate)
from .parser import ParseError, parse_program, parse_type
from .runtime import (DecisionOracle, ExploreError, OracleExhausted, explore,
                      replay, simulate)
from .semantics import (BudgetExceeded, check_compliance,
                        check_rollback_safety, compliance_dot)
from .sessiontypes import render_type
from .syntax import MalformedTerm


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_program(path: str):
    return parse_program(_read(path))


def _load_type(path: str):
    return parse_type(_read(path).strip())


def _emit(args, payload: dict, text_lines: list) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        for line in text_lines:
            print(line)


def _dq(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_infer(args) -> int:
    program = _load_program(args.file)
    assoc = (m_infer_collaboration(program.term) if program.multiparty
             else infer_collaboration(program.term))
    rendered = {name: render_type(t) for name, t in assoc.items()}
    _emit(args, rendered, [f"{k}: {v}" for k, v in rendered.items()])
    return 0


def cmd_check(args) -> int:
    program = _load_program(args.file)
    report = (m_check_rollback_safety(program.term, args.budget)
              if program.multiparty
              else check_rollback_safety(program.term, args.budget))
    data = report.to_json()
    lines = [data["verdict"]]
    for name, svc in data["services"].items():
        lines.append(f"  service {name}: {svc['verdict']} "
                     f"({svc['states']} states, {svc['edges']} edges)")
        for v in svc["violations"]:
            lines.append(f"    violating terminal {v['state']}: "
                         f"{' -> '.join(v['path']) or '<initial>'}")
    _emit(args, data, lines)
    return 0 if report.safe else 1


def cmd_comply(args) -> int:
    t1 = _load_type(args.left)
    t2 = _load_type(args.right)
    report = check_compliance(t1, t2, args.budget)
    data = report.to_json()
    lines = [data["verdict"],
             f"  {data['states']} states, {data['edges']} edges"]
    for v in data["violations"]:
        lines.append(f"  violating terminal {v['state']}: "
                     f"{' -> '.join(v['path']) or '<initial>'}")
        for party, side in v["terminal"].items():
            mark = "^imposed" if side["imposed"] else ""
            lines.append(f"    {party}: <{side['checkpoint']}>{mark} "
                         f"{side['current']}")
    _emit(args, data, lines)
    return 0 if report.compliant else 1


def _oracle_from(args) -> DecisionOracle:
    if args.script is not None:
        script = json.loads(_read(args.script))
        return DecisionOracle("scripted", script)
    if args.seed is not None:
        return DecisionOracle("seeded-random", seed=args.seed)
    return DecisionOracle()


def cmd_run(args) -> int:
    program = _load_program(args.file)
    oracle = _oracle_from(args)
    run = m_simulate if program.multiparty else simulate
    trace = run(program, oracle, max_steps=args.max_steps,
                mode=args.error_mode)
    if args.trace:
        Path(args.trace).write_text(
            json.dumps(trace.to_json(), indent=2) + "\n", encoding="utf-8")
    lines = [trace.to_json()["initial"]]
    for k, step in enumerate(trace.steps):
        lines.append(f"{k + 1}. {step.label()}")
    lines.append(f"status: {trace.status}")
    _emit(args, trace.to_json(), lines)
    return 0 if trace.status in ("completed", "cut-off") else 1


def cmd_explore(args) -> int:
    program = _load_program(args.file)
    go = m_explore if program.multiparty else explore
    report = go(program, depth=args.depth, mode=args.error_mode,
                budget=args.budget)
    if args.dot:
        Path(args.dot).write_text(_explore_dot(report), encoding="utf-8")
    data = report.to_json()
    lines = [f"{data['states']} states, {data['edges']} edges, "
             f"{data['completed']} completed (depth {data['depth']})"]
    for entry in report.errors + report.stuck:
        lines.append(f"  {entry.kind} at state {entry.state}: "
                     f"{' -> '.join(entry.path) or '<initial>'}")
        if entry.script:
            lines.append(f"    script: {json.dumps(entry.script)}")
    if report.ok:
        lines.append("no errors, no stuck states")
    _emit(args, data, lines)
    return 0 if report.ok else 1


def _explore_dot(report) -> str:
    bad = {e.state for e in report.errors} | {e.state for e in report.stuck}
    lines = ["digraph explored {", "  rankdir=LR;",
             "  node [shape=circle];"]
    for sid in range(len(report.states)):
        attrs = [f'label="{sid}"']
        if sid == 0:
            attrs.append("style=bold")
        if sid in bad:
            attrs.append("peripheries=2")
        lines.append(f"  n{sid} [{', '.join(attrs)}];")
    seen = set()
    for src, dst, rule, text, _ in report.transitions:
        key = (src, dst, rule, text)
        if key in seen:
            continue
        seen.add(key)
        lines.append(f'  n{src} -> n{dst} [label="{_dq(rule)} '
                     f'{_dq(text)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_graph(args) -> int:
    t1 = _load_type(args.left)
    t2 = _load_type(args.right)
    report = check_compliance(t1, t2, args.budget)
    dot = compliance_dot(report)
    if args.dot:
        Path(args.dot).write_text(dot, encoding="utf-8")
        if args.json:
            print(json.dumps(report.to_json(), indent=2))
    elif args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        sys.stdout.write(dot)
    return 0 if report.compliant else 1


def cmd_replay(args) -> int:
    trace_json = json.loads(_read(args.trace))
    program = _load_program(args.program) if args.program else None
    report = replay(trace_json, mode=args.error_mode, program=program)
    payload = {"ok": report.ok, "divergence": report.divergence}
    lines = (["replay ok"] if report.ok
             else [f"replay diverged: {report.divergence}"])
    _emit(args, payload, lines)
    return 0 if report.ok else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cherrypi",
        description="Checkpointed session calculus: inference, compliance "
                    "checking, execution, and exploration.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, budget=False, mode=False):
        p.add_argument("--json", action="store_true",
                       help="machine readable output")
        if budget:
            p.add_argument("--budget", type=int, default=None,
                           help="state budget (default CHERRY_BUDGET or "
                                "1000000)")
        if mode:
            p.add_argument("--error-mode", choices=("plain", "detect"),
                           default="plain", help="communication safety "
                           "checking during execution")

    p = sub.add_parser("infer", help="session types of a program")
    p.add_argument("file")
    common(p)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("check", help="rollback safety of a program")
    p.add_argument("file")
    common(p, budget=True)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("comply", help="compliance of a type pair")
    p.add_argument("left")
    p.add_argument("right")
    common(p, budget=True)
    p.set_defaults(fn=cmd_comply)

    p = sub.add_parser("run", help="run a program to completion")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=None,
                   help="seeded random decisions")
    p.add_argument("--script", default=None,
                   help="JSON file scripting decision outcomes")
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--trace", default=None, metavar="PATH",
                   help="record the run as a replayable trace file")
    common(p, mode=True)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("explore",
                       help="exhaustive bounded exploration of a program")
    p.add_argument("file")
    p.add_argument("--depth", type=int, default=30)
    p.add_argument("--dot", default=None, metavar="PATH",
                   help="write the explored graph as Graphviz text")
    common(p, budget=True, mode=True)
    p.set_defaults(fn=cmd_explore)

    p = sub.add_parser("graph",
                       help="reachable configuration graph of a type pair")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--dot", default=None, metavar="PATH",
                   help="write Graphviz text here instead of stdout")
    common(p, budget=True)
    p.set_defaults(fn=cmd_graph)

    p = sub.add_parser("replay", help="re-run a recorded trace")
    p.add_argument("trace")
    p.add_argument("program", nargs="?", default=None,
                   help="program file (defaults to the one embedded in "
                        "the trace)")
    common(p, mode=True)
    # no explicit flag: let the recorded labels pick the mode
    p.set_defaults(fn=cmd_replay, error_mode=None)

    return ap


def main(argv: list | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except BudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (TypingError, OracleExhausted, ExploreError, MalformedTerm) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
