"""Core term syntax: expressions, processes, collaborations, canonical forms.

Terms are immutable (frozen dataclasses), so they hash and can be shared
freely; every operation that "changes" a term builds a new one.  Collaboration
terms cover both the surface language (request/accept/parallel) and the
runtime-only constructs (sessions, logs, error states) produced by reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

SORTS = ("bool", "int", "str")

# builtin operator -> (argument sorts, result sort); 'eq' is sort-polymorphic
# (both arguments must share a sort) and is special-cased where it matters.
BUILTIN_SIGS = {
    "add": (("int", "int"), "int"),
    "and": (("bool", "bool"), "bool"),
    "or": (("bool", "bool"), "bool"),
    "not": (("bool",), "bool"),
    "eq": (None, "bool"),
    "lt": (("int", "int"), "bool"),
    "concat": (("str", "str"), "str"),
}


class MalformedTerm(Exception):
    """An operation met a term outside its contract (unguarded recursion,
    unbound variable, substitution kind mismatch, ...)."""


# ---------------------------------------------------------------------------
# session identifiers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChanVar:
    """A session variable as written in source (`x` in `request a(x).P`)."""
    name: str


@dataclass(frozen=True)
class Endpoint:
    """A binary session endpoint; `plus` marks the requester's side."""
    session: str
    plus: bool


@dataclass(frozen=True)
class MEndpoint:
    """A multiparty session endpoint, owned by one role of the session."""
    session: str
    role: int


SessionId = Union[ChanVar, Endpoint, MEndpoint]


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: object  # bool | int | str

    def sort(self) -> str:
        if isinstance(self.value, bool):
            return "bool"
        if isinstance(self.value, int):
            return "int"
        if isinstance(self.value, str):
            return "str"
        raise MalformedTerm(f"literal of unknown sort: {self.value!r}")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    """Application of one of the fixed builtin operators."""
    op: str
    args: tuple  # tuple[Expression, ...]


@dataclass(frozen=True)
class Ufun:
    """Uninterpreted function call.

    The node carries its declared signature (folded in from the program's
    declarations) so the collaboration term is self-contained: typing reads
    `result_sort`, evaluation draws a decision of that sort, and exploration
    branches over `domain` when one was declared.
    """
    name: str
    args: tuple  # tuple[Expression, ...]
    arg_sorts: tuple  # tuple[str, ...]
    result_sort: str
    domain: tuple | None = None  # declared finite outcome domain (literals)


Expression = Union[Lit, Var, Call, Ufun]


# ---------------------------------------------------------------------------
# processes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Send:
    chan: SessionId
    expr: Expression
    cont: "Process"
    to_role: int | None = None  # partner role (multiparty only)


@dataclass(frozen=True)
class Recv:
    chan: SessionId
    var: str
    sort: str
    cont: "Process"
    from_role: int | None = None


@dataclass(frozen=True)
class Select:
    chan: SessionId
    label: str
    cont: "Process"
    to_role: int | None = None


@dataclass(frozen=True)
class Branch:
    chan: SessionId
    arms: tuple  # tuple[tuple[str, Process], ...]  (order preserved)
    from_role: int | None = None


@dataclass(frozen=True)
class If:
    cond: Expression
    then: "Process"
    orelse: "Process"


@dataclass(frozen=True)
class Rec:
    var: str
    body: "Process"


@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class Inact:
    pass


@dataclass(frozen=True)
class Commit:
    cont: "Process"


@dataclass(frozen=True)
class Roll:
    pass


@dataclass(frozen=True)
class Abort:
    pass


Process = Union[Send, Recv, Select, Branch, If, Rec, PVar, Inact, Commit,
                Roll, Abort]


# ---------------------------------------------------------------------------
# collaborations (surface + runtime)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Request:
    chan: str
    var: str
    body: Process
    role: int | None = None  # multiparty: the requester's role == arity n


@dataclass(frozen=True)
class Accept:
    chan: str
    var: str
    body: Process
    role: int | None = None


@dataclass(frozen=True)
class Par:
    parts: tuple  # tuple[Collaboration, ...], len >= 2, pre-flattened


@dataclass(frozen=True)
class CheckpointProcess:
    """A log's saved process; `imposed` marks a checkpoint written by the
    partner's commit rather than by the owner's own."""
    process: Process
    imposed: bool = False


@dataclass(frozen=True)
class Log:
    endpoint: Endpoint | MEndpoint
    ckpt: CheckpointProcess
    current: Process


@dataclass(frozen=True)
class Session:
    """Running session: `saved` is the collaboration that initiated it and is
    restored wholesale by an abort; `body` holds the logs."""
    name: str
    saved: "Collaboration"
    body: "Collaboration"


@dataclass(frozen=True)
class RollError:
    pass


@dataclass(frozen=True)
class ComError:
    pass


Collaboration = Union[Request, Accept, Par, Session, Log, RollError, ComError]


def par(*parts) -> Collaboration:
    """Smart parallel constructor: flattens nested Par, drops nothing."""
    flat: list = []
    for p in parts:
        if isinstance(p, Par):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        raise MalformedTerm("empty parallel composition")
    if len(flat) == 1:
        return flat[0]
    return Par(tuple(flat))


def par_parts(c: Collaboration) -> tuple:
    return c.parts if isinstance(c, Par) else (c,)


# ---------------------------------------------------------------------------
# action labels (the auxiliary labelled relation's alphabet)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AOut:
    chan: SessionId
    value: object
    role: int | None = None


@dataclass(frozen=True)
class AIn:
    chan: SessionId
    var: str
    role: int | None = None


@dataclass(frozen=True)
class ASel:
    chan: SessionId
    label: str
    role: int | None = None


@dataclass(frozen=True)
class ABrn:
    chan: SessionId
    label: str
    role: int | None = None


@dataclass(frozen=True)
class ACmt:
    pass


@dataclass(frozen=True)
class ARoll:
    pass


@dataclass(frozen=True)
class AAbt:
    pass


@dataclass(frozen=True)
class ATau:
    branch: str | None = None  # "then" | "else" when produced by a conditional


ActionLabel = Union[AOut, AIn, ASel, ABrn, ACmt, ARoll, AAbt, ATau]


# ---------------------------------------------------------------------------
# free names
# ---------------------------------------------------------------------------

def free_names(term) -> tuple[frozenset, frozenset, frozenset]:
    """Free (value vars, process vars, session vars) of a process or
    collaboration."""
    vs: set = set()
    xs: set = set()
    cs: set = set()

    def expr(e, bound_v):
        match e:
            case Var(name):
                if name not in bound_v:
                    vs.add(name)
            case Call(_, args) | Ufun(_, args):
                for a in args:
                    expr(a, bound_v)
            case _:
                pass

    def chan(r, bound_c):
        if isinstance(r, ChanVar) and r.name not in bound_c:
            cs.add(r.name)

    def proc(p, bound_v, bound_x, bound_c):
        match p:
            case Send(ch, e, cont):
                chan(ch, bound_c)
                expr(e, bound_v)
                proc(cont, bound_v, bound_x, bound_c)
            case Recv(ch, y, _, cont):
                chan(ch, bound_c)
                proc(cont, bound_v | {y}, bound_x, bound_c)
            case Select(ch, _, cont):
                chan(ch, bound_c)
                proc(cont, bound_v, bound_x, bound_c)
            case Branch(ch, arms):
                chan(ch, bound_c)
                for _, arm in arms:
                    proc(arm, bound_v, bound_x, bound_c)
            case If(cond, then, orelse):
                expr(cond, bound_v)
                proc(then, bound_v, bound_x, bound_c)
                proc(orelse, bound_v, bound_x, bound_c)
            case Rec(x, body):
                proc(body, bound_v, bound_x | {x}, bound_c)
            case PVar(x):
                if x not in bound_x:
                    xs.add(x)
            case Commit(cont):
                proc(cont, bound_v, bound_x, bound_c)
            case Inact() | Roll() | Abort():
                pass

    def coll(c, bound_c):
        match c:
            case Request(_, x, body) | Accept(_, x, body):
                proc(body, frozenset(), frozenset(), bound_c | {x})
            case Par(parts):
                for p in parts:
                    coll(p, bound_c)
            case Session(_, saved, body):
                coll(saved, bound_c)
                coll(body, bound_c)
            case Log(_, ckpt, current):
                proc(ckpt.process, frozenset(), frozenset(), bound_c)
                proc(current, frozenset(), frozenset(), bound_c)
            case RollError() | ComError():
                pass

    if isinstance(term, (Request, Accept, Par, Session, Log, RollError,
                         ComError)):
        coll(term, frozenset())
    else:
        proc(term, frozenset(), frozenset(), frozenset())
    return frozenset(vs), frozenset(xs), frozenset(cs)


def is_closed(term) -> bool:
    vs, xs, cs = free_names(term)
    return not vs and not xs and not cs


# ---------------------------------------------------------------------------
# substitution
# ---------------------------------------------------------------------------

def _subst_expr(e, name: str, v: Lit):
    match e:
        case Var(n) if n == name:
            return v
        case Call(op, args):
            return Call(op, tuple(_subst_expr(a, name, v) for a in args))
        case Ufun(fn, args, asorts, rsort, dom):
            return Ufun(fn, tuple(_subst_expr(a, name, v) for a in args),
                        asorts, rsort, dom)
        case _:
            return e


def _subst_value(p: Process, name: str, v: Lit) -> Process:
    match p:
        case Send(ch, e, cont, tr):
            return Send(ch, _subst_expr(e, name, v),
                        _subst_value(cont, name, v), tr)
        case Recv(ch, y, s, cont, fr):
            if y == name:  # shadowed
                return p
            return Recv(ch, y, s, _subst_value(cont, name, v), fr)
        case Select(ch, l, cont, tr):
            return Select(ch, l, _subst_value(cont, name, v), tr)
        case Branch(ch, arms, fr):
            return Branch(ch, tuple((l, _subst_value(a, name, v))
                                    for l, a in arms), fr)
        case If(cond, then, orelse):
            return If(_subst_expr(cond, name, v),
                      _subst_value(then, name, v),
                      _subst_value(orelse, name, v))
        case Rec(x, body):
            return Rec(x, _subst_value(body, name, v))
        case Commit(cont):
            return Commit(_subst_value(cont, name, v))
        case _:
            return p


def _subst_chan(p: Process, name: str, sid) -> Process:
    def ch(r):
        return sid if isinstance(r, ChanVar) and r.name == name else r

    match p:
        case Send(c, e, cont, tr):
            return Send(ch(c), e, _subst_chan(cont, name, sid), tr)
        case Recv(c, y, s, cont, fr):
            return Recv(ch(c), y, s, _subst_chan(cont, name, sid), fr)
        case Select(c, l, cont, tr):
            return Select(ch(c), l, _subst_chan(cont, name, sid), tr)
        case Branch(c, arms, fr):
            return Branch(ch(c), tuple((l, _subst_chan(a, name, sid))
                                       for l, a in arms), fr)
        case If(cond, then, orelse):
            return If(cond, _subst_chan(then, name, sid),
                      _subst_chan(orelse, name, sid))
        case Rec(x, body):
            return Rec(x, _subst_chan(body, name, sid))
        case Commit(cont):
            return Commit(_subst_chan(cont, name, sid))
        case _:
            return p


def _fresh(base: str, used: set) -> str:
    if base not in used:
        return base
    i = 1
    while f"{base}_{i}" in used:
        i += 1
    return f"{base}_{i}"


def _subst_proc(p: Process, name: str, q: Process) -> Process:
    _, q_free, _ = free_names(q)

    def go(p):
        match p:
            case PVar(x):
                return q if x == name else p
            case Rec(x, body):
                if x == name:  # shadowed
                    return p
                if x in q_free:  # capture: rename the binder first
                    _, body_free, _ = free_names(body)
                    x2 = _fresh(x, set(q_free) | set(body_free) | {name})
                    body = _subst_proc(body, x, PVar(x2))
                    return Rec(x2, go(body))
                return Rec(x, go(body))
            case Send(ch, e, cont, tr):
                return Send(ch, e, go(cont), tr)
            case Recv(ch, y, s, cont, fr):
                return Recv(ch, y, s, go(cont), fr)
            case Select(ch, l, cont, tr):
                return Select(ch, l, go(cont), tr)
            case Branch(ch, arms, fr):
                return Branch(ch, tuple((l, go(a)) for l, a in arms), fr)
            case If(cond, then, orelse):
                return If(cond, go(then), go(orelse))
            case Commit(cont):
                return Commit(go(cont))
            case _:
                return p

    return go(p)


def substitute(term: Process, name: str, replacement) -> Process:
    """Capture-avoiding substitution of `replacement` for `name` in `term`.

    The replacement's kind selects what is substituted: a literal replaces a
    value variable, a session identifier replaces a session variable, and a
    process replaces a process variable.
    """
    if isinstance(replacement, Lit):
        return _subst_value(term, name, replacement)
    if isinstance(replacement, (ChanVar, Endpoint, MEndpoint)):
        return _subst_chan(term, name, replacement)
    if isinstance(replacement, (Send, Recv, Select, Branch, If, Rec, PVar,
                                Inact, Commit, Roll, Abort)):
        return _subst_proc(term, name, replacement)
    raise MalformedTerm(
        f"substitution replacement of unsupported kind: {replacement!r}")


def unfold_recursion(p: Process) -> Process:
    """One unfolding of a recursive process: rec X. P  ->  P[rec X. P / X]."""
    if not isinstance(p, Rec):
        raise MalformedTerm("unfold_recursion expects a rec-headed process")
    return substitute(p.body, p.var, p)


_UNFOLD_FUEL = 512


def head_normal(p: Process) -> Process:
    """Unfold leading recursions until the head is a concrete prefix.

    Guarded recursion (enforced at parse time) makes this terminate; the fuel
    guard turns a malformed unguarded term into an error instead of a hang.
    """
    fuel = _UNFOLD_FUEL
    while isinstance(p, Rec):
        p = unfold_recursion(p)
        fuel -= 1
        if fuel == 0:
            raise MalformedTerm("unguarded recursion (unfolding diverges)")
    return p


# ---------------------------------------------------------------------------
# canonical forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CanonicalForm:
    """Opaque normal form. Equal text == equivalent terms (alpha-renaming and
    parallel reordering factored out; recursion deliberately NOT unfolded)."""
    text: str


def _canon_lit(v) -> str:
    if isinstance(v, bool):
        return "(b true)" if v else "(b false)"
    if isinstance(v, int):
        return f"(i {v})"
    return "(s {})".format(v.replace("\\", "\\\\").replace('"', '\\"'))


def _canon_expr(e, env) -> str:
    match e:
        case Lit(v):
            return _canon_lit(v)
        case Var(n):
            return env.get(("v", n), f"?v:{n}")
        case Call(op, args):
            inner = " ".join(_canon_expr(a, env) for a in args)
            return f"({op} {inner})"
        case Ufun(fn, args, asorts, rsort, dom):
            inner = " ".join(_canon_expr(a, env) for a in args)
            d = "-" if dom is None else \
                "[" + " ".join(_canon_lit(x) for x in dom) + "]"
            sig = ",".join(asorts) + "->" + rsort
            return f"(uf {fn} {sig} {d} {inner})".replace("  ", " ")
    raise MalformedTerm(f"not an expression: {e!r}")


def _canon_chan(r, env) -> str:
    match r:
        case ChanVar(n):
            return env.get(("c", n), f"?c:{n}")
        case Endpoint(s, plus):
            tag = env.get(("s", s), f"?s:{s}")
            return f"{tag}{'+' if plus else '-'}"
        case MEndpoint(s, role):
            tag = env.get(("s", s), f"?s:{s}")
            return f"{tag}@{role}"
    raise MalformedTerm(f"not a session identifier: {r!r}")


class _Counters:
    __slots__ = ("v", "x", "s")

    def __init__(self, v=0, x=0, s=0):
        self.v, self.x, self.s = v, x, s

    def copy(self):
        return _Counters(self.v, self.x, self.s)


def _canon_proc(p, env, ctr) -> str:
    match p:
        case Send(ch, e, cont, tr):
            r = "" if tr is None else f"@{tr}"
            return (f"(snd {_canon_chan(ch, env)}{r} {_canon_expr(e, env)} "
                    f"{_canon_proc(cont, env, ctr)})")
        case Recv(ch, y, s, cont, fr):
            r = "" if fr is None else f"@{fr}"
            env2 = dict(env)
            env2[("v", y)] = f"v{ctr.v}"
            c2 = ctr.copy()
            c2.v += 1
            return (f"(rcv {_canon_chan(ch, env)}{r} {s} v{ctr.v} "
                    f"{_canon_proc(cont, env2, c2)})")
        case Select(ch, l, cont, tr):
            r = "" if tr is None else f"@{tr}"
            return (f"(sel {_canon_chan(ch, env)}{r} {l} "
                    f"{_canon_proc(cont, env, ctr)})")
        case Branch(ch, arms, fr):
            r = "" if fr is None else f"@{fr}"
            inner = " ".join(
                f"[{l} {_canon_proc(a, env, ctr)}]" for l, a in arms)
            return f"(brn {_canon_chan(ch, env)}{r} {inner})"
        case If(cond, then, orelse):
            return (f"(if {_canon_expr(cond, env)} "
                    f"{_canon_proc(then, env, ctr)} "
                    f"{_canon_proc(orelse, env, ctr)})")
        case Rec(x, body):
            env2 = dict(env)
            env2[("x", x)] = f"X{ctr.x}"
            c2 = ctr.copy()
            c2.x += 1
            return f"(rec X{ctr.x} {_canon_proc(body, env2, c2)})"
        case PVar(x):
            return env.get(("x", x), f"?x:{x}")
        case Inact():
            return "(end)"
        case Commit(cont):
            return f"(cmt {_canon_proc(cont, env, ctr)})"
        case Roll():
            return "(roll)"
        case Abort():
            return "(abt)"
    raise MalformedTerm(f"not a process: {p!r}")


def _canon_coll(c, env, ctr) -> str:
    match c:
        case Request(a, x, body, role):
            env2 = dict(env)
            env2[("c", x)] = "c0"
            rr = "" if role is None else f"[{role}]"
            return (f"(req {a}{rr} "
                    f"{_canon_proc(body, env2, ctr.copy())})")
        case Accept(a, x, body, role):
            env2 = dict(env)
            env2[("c", x)] = "c0"
            rr = "" if role is None else f"[{role}]"
            return (f"(acc {a}{rr} "
                    f"{_canon_proc(body, env2, ctr.copy())})")
        case Par(parts):
            rendered = sorted(_canon_coll(p, dict(env), ctr.copy())
                              for p in parts)
            return "(par " + " ".join(rendered) + ")"
        case Session(s, saved, body):
            env2 = dict(env)
            env2[("s", s)] = f"s{ctr.s}"
            c2 = ctr.copy()
            c2.s += 1
            return (f"(ses s{ctr.s} {_canon_coll(saved, dict(env), ctr.copy())} "
                    f"{_canon_coll(body, env2, c2)})")
        case Log(ep, ckpt, current):
            flag = "imp" if ckpt.imposed else "own"
            return (f"(log {_canon_chan(ep, env)} {flag} "
                    f"{_canon_proc(ckpt.process, env, ctr.copy())} "
                    f"{_canon_proc(current, env, ctr.copy())})")
        case RollError():
            return "(roll_error)"
        case ComError():
            return "(com_error)"
    raise MalformedTerm(f"not a collaboration: {c!r}")


def canonicalize(c) -> CanonicalForm:
    """Canonical form of a collaboration (or a bare process).

    Bound names are numbered by traversal position, parallel components are
    flattened and sorted, and recursion is left folded, so two terms get the
    same form exactly when they differ only by alpha-renaming and parallel
    reordering.
    """
    env: dict = {}
    ctr = _Counters()
    if isinstance(c, (Request, Accept, Par, Session, Log, RollError,
                      ComError)):
        return CanonicalForm(_canon_coll(c, env, ctr))
    return CanonicalForm(_canon_proc(c, env, ctr))


def process_canonical(p: Process) -> str:
    """Canonical text of a bare process (used for checkpoint comparisons)."""
    return _canon_proc(p, {}, _Counters())


def equivalent(c1, c2) -> bool:
    return canonicalize(c1).text == canonicalize(c2).text
