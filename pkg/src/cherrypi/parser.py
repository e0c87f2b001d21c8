"""Concrete syntax: tokenizer, program and type parsers, renderers.

Program files (.chpi) hold uninterpreted-function declarations followed by a
collaboration; type files (.chty) hold a single session type.  Both share one
tokenizer.  `render_program`/`render_type` emit source that parses back to an
equivalent term.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (Abort, Accept, Branch, Call, ChanVar, Collaboration,
                     Commit, Endpoint, If, Inact, Lit, MEndpoint, Par, PVar,
                     Process, Rec, Recv, Request, Roll, Select, Send, Session,
                     Log, RollError, ComError, Ufun, Var, free_names, par,
                     SORTS, BUILTIN_SIGS, MalformedTerm)
from . import sessiontypes as st

KEYWORDS = {"request", "accept", "if", "then", "else", "rec", "commit",
            "roll", "abort", "true", "false", "fun", "in", "bool", "int",
            "str", "sel", "brn", "mu", "end", "err", "cmt", "abt"}

_SYMBOLS = ["<+", ">+", "++", "&&", "||", "==",
            "!", "?", "<", ">", "(", ")", "{", "}", "[", "]",
            ":", ".", ",", "|", "@", ";", "+"]


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "int" | "string" | "kw" | symbol text | "eof"
    text: str
    start: int  # byte offset
    end: int


@dataclass(frozen=True)
class ParseDiagnostic:
    message: str
    start: int
    end: int
    line: int
    col: int


class ParseError(Exception):
    def __init__(self, diagnostic: ParseDiagnostic):
        super().__init__(f"{diagnostic.line}:{diagnostic.col}: "
                         f"{diagnostic.message}")
        self.diagnostic = diagnostic


def _diag(src: str, start: int, end: int, message: str) -> ParseError:
    line = src.count("\n", 0, start) + 1
    col = start - (src.rfind("\n", 0, start) + 1) + 1
    return ParseError(ParseDiagnostic(message, start, end, line, col))


def tokenize(src: str) -> list:
    toks: list = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c in " \t\r\n":
            i += 1
            continue
        if src.startswith("//", i):
            j = src.find("\n", i)
            i = n if j < 0 else j + 1
            continue
        if src.startswith("/*", i):
            j = src.find("*/", i + 2)
            if j < 0:
                raise _diag(src, i, n, "unterminated block comment")
            i = j + 2
            continue
        if c == '"':
            j, out = i + 1, []
            while j < n and src[j] != '"':
                if src[j] == "\\":
                    if j + 1 >= n:
                        break
                    esc = src[j + 1]
                    if esc == "n":
                        out.append("\n")
                    elif esc in ('"', "\\"):
                        out.append(esc)
                    else:
                        raise _diag(src, j, j + 2,
                                    f"unknown escape \\{esc} in string")
                    j += 2
                else:
                    out.append(src[j])
                    j += 1
            if j >= n:
                raise _diag(src, i, n, "unterminated string literal")
            toks.append(Token("string", "".join(out), i, j + 1))
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("int", src[i:j], i, j))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[i:j]
            toks.append(Token("kw" if word in KEYWORDS else "ident",
                              word, i, j))
            i = j
            continue
        for sym in _SYMBOLS:
            if src.startswith(sym, i):
                toks.append(Token(sym, sym, i, i + len(sym)))
                i += len(sym)
                break
        else:
            raise _diag(src, i, i + 1, f"unexpected character {c!r}")
    toks.append(Token("eof", "", n, n))
    return toks


@dataclass(frozen=True)
class FunDecl:
    name: str
    arg_sorts: tuple  # tuple[str, ...]
    result_sort: str
    domain: tuple | None  # tuple of python values, or None


@dataclass
class SourceProgram:
    decls: dict  # name -> FunDecl, declaration order
    term: Collaboration
    multiparty: bool


class _P:
    """Token-stream cursor shared by the program and type parsers."""

    def __init__(self, src: str):
        self.src = src
        self.toks = tokenize(src)
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def eat(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.next()
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if not self.at(kind, text):
            want = text or kind
            raise _diag(self.src, t.start, t.end,
                        f"expected {want!r}, found {t.text or t.kind!r}")
        return self.next()

    def fail(self, message: str, tok: Token | None = None):
        t = tok or self.peek()
        raise _diag(self.src, t.start, t.end, message)


# ---------------------------------------------------------------------------
# program parser
# ---------------------------------------------------------------------------

def _parse_sort(p: _P) -> str:
    t = p.peek()
    if t.kind == "kw" and t.text in SORTS:
        p.next()
        return t.text
    p.fail("expected a sort (bool, int, or str)")


def _lit_from_token(p: _P) -> Lit | None:
    t = p.peek()
    if t.kind == "kw" and t.text in ("true", "false"):
        p.next()
        return Lit(t.text == "true")
    if t.kind == "int":
        p.next()
        return Lit(int(t.text))
    if t.kind == "string":
        p.next()
        return Lit(t.text)
    return None


def _parse_fun_decl(p: _P) -> FunDecl:
    p.expect("kw", "fun")
    name_tok = p.expect("ident")
    p.expect("(")
    arg_sorts: list = []
    if not p.at(")"):
        arg_sorts.append(_parse_sort(p))
        while p.eat(","):
            arg_sorts.append(_parse_sort(p))
    p.expect(")")
    p.expect(":")
    result = _parse_sort(p)
    domain = None
    if p.eat("kw", "in"):
        p.expect("{")
        vals: list = []
        first = _lit_from_token(p)
        if first is None:
            p.fail("expected a literal in the outcome domain")
        vals.append(first.value)
        while p.eat(","):
            nxt = _lit_from_token(p)
            if nxt is None:
                p.fail("expected a literal in the outcome domain")
            vals.append(nxt.value)
        p.expect("}")
        for v in vals:
            if Lit(v).sort() != result:
                p.fail(f"domain value {v!r} is not of sort {result}",
                       name_tok)
        if len(set(map(repr, vals))) != len(vals):
            p.fail("duplicate value in outcome domain", name_tok)
        domain = tuple(vals)
    return FunDecl(name_tok.text, tuple(arg_sorts), result, domain)


class _ProgParser:
    def __init__(self, p: _P, decls: dict):
        self.p = p
        self.decls = decls

    # -- expressions --------------------------------------------------------
    # precedence: || < && < (== | <) < (+ | ++) < ! < atom

    def expr(self):
        return self._or()

    def _or(self):
        e = self._and()
        while self.p.eat("||"):
            e = Call("or", (e, self._and()))
        return e

    def _and(self):
        e = self._cmp()
        while self.p.eat("&&"):
            e = Call("and", (e, self._cmp()))
        return e

    def _cmp(self):
        e = self._add()
        if self.p.eat("=="):
            return Call("eq", (e, self._add()))
        if self.p.eat("<"):
            return Call("lt", (e, self._add()))
        return e

    def _add(self):
        e = self._unary()
        while True:
            if self.p.eat("+"):
                e = Call("add", (e, self._unary()))
            elif self.p.eat("++"):
                e = Call("concat", (e, self._unary()))
            else:
                return e

    def _unary(self):
        if self.p.eat("!"):
            return Call("not", (self._unary(),))
        return self._atom()

    def _atom(self):
        p = self.p
        lit = _lit_from_token(p)
        if lit is not None:
            return lit
        if p.eat("("):
            e = self.expr()
            p.expect(")")
            return e
        if p.at("ident"):
            tok = p.next()
            if p.eat("("):
                args: list = []
                if not p.at(")"):
                    args.append(self.expr())
                    while p.eat(","):
                        args.append(self.expr())
                close = p.expect(")")
                decl = self.decls.get(tok.text)
                if decl is None:
                    raise _diag(p.src, tok.start, close.end,
                                f"call of undeclared function {tok.text!r}")
                if len(args) != len(decl.arg_sorts):
                    raise _diag(
                        p.src, tok.start, close.end,
                        f"{tok.text!r} takes {len(decl.arg_sorts)} "
                        f"argument(s), got {len(args)}")
                dom = None if decl.domain is None else \
                    tuple(decl.domain)
                return Ufun(tok.text, tuple(args), decl.arg_sorts,
                            decl.result_sort, dom)
            return Var(tok.text)
        p.fail("expected an expression")

    # -- processes ----------------------------------------------------------

    def process(self) -> Process:
        p = self.p
        t = p.peek()
        if t.kind == "kw":
            if t.text == "if":
                p.next()
                cond = self.expr()
                p.expect("kw", "then")
                then = self.process()
                p.expect("kw", "else")
                return If(cond, then, self.process())
            if t.text == "rec":
                p.next()
                x = p.expect("ident").text
                p.expect(".")
                return Rec(x, self.process())
            if t.text == "commit":
                p.next()
                p.expect(".")
                return Commit(self.process())
            if t.text == "roll":
                p.next()
                return Roll()
            if t.text == "abort":
                p.next()
                return Abort()
            p.fail(f"unexpected keyword {t.text!r} in process")
        if t.kind == "int":
            if t.text == "0":
                p.next()
                return Inact()
            p.fail("expected a process (a bare number is not one)")
        if p.eat("("):
            body = self.process()
            p.expect(")")
            return body
        if t.kind == "ident":
            nxt = p.peek(1).kind
            if nxt in ("!", "?", "<+", ">+"):
                return self._prefixed(ChanVar(p.next().text))
            p.next()
            return PVar(t.text)
        p.fail("expected a process")

    def _role_suffix(self) -> int | None:
        if self.p.eat("@"):
            return int(self.p.expect("int").text)
        return None

    def _prefixed(self, ch) -> Process:
        p = self.p
        if p.eat("!"):
            p.expect("<")
            e = self.expr()
            p.expect(">")
            role = self._role_suffix()
            p.expect(".")
            return Send(ch, e, self.process(), role)
        if p.eat("?"):
            p.expect("(")
            y = p.expect("ident").text
            p.expect(":")
            sort = _parse_sort(p)
            p.expect(")")
            role = self._role_suffix()
            p.expect(".")
            return Recv(ch, y, sort, self.process(), role)
        if p.eat("<+"):
            lab = p.expect("ident").text
            role = self._role_suffix()
            p.expect(".")
            return Select(ch, lab, self.process(), role)
        if p.eat(">+"):
            role = self._role_suffix()  # role tag before the arm block ...
            p.expect("{")
            arms: list = []
            seen: set = set()
            while True:
                lab_tok = p.expect("ident")
                if lab_tok.text in seen:
                    raise _diag(p.src, lab_tok.start, lab_tok.end,
                                f"duplicate branch label {lab_tok.text!r}")
                seen.add(lab_tok.text)
                p.expect(":")
                arms.append((lab_tok.text, self.process()))
                if not p.eat(","):
                    break
            p.expect("}")
            if role is None:  # ... or after it
                role = self._role_suffix()
            return Branch(ch, tuple(arms), role)
        p.fail("expected !, ?, <+ or >+ after a session variable")

    # -- collaborations -----------------------------------------------------

    def collaboration(self) -> Collaboration:
        parts = [self._coll_atom()]
        while self.p.eat("|"):
            parts.append(self._coll_atom())
        return par(*parts)

    def _coll_atom(self) -> Collaboration:
        p = self.p
        if p.eat("("):
            c = self.collaboration()
            p.expect(")")
            return c
        t = p.peek()
        if t.kind == "kw" and t.text in ("request", "accept"):
            p.next()
            name = p.expect("ident").text
            role = None
            if p.eat("["):
                role = int(p.expect("int").text)
                p.expect("]")
            p.expect("(")
            x = p.expect("ident").text
            p.expect(")")
            p.expect(".")
            body = self.process()
            if t.text == "request":
                return Request(name, x, body, role)
            return Accept(name, x, body, role)
        p.fail("expected 'request', 'accept', or a parenthesised "
               "collaboration")


# -- static well-formedness checks ------------------------------------------

def _check_contractive(p: _P, body: Process, where: Token):
    def go(t: Process, pending: frozenset):
        match t:
            case PVar(x):
                if x in pending:
                    raise _diag(p.src, where.start, where.end,
                                f"unguarded recursion on {x!r}")
            case Rec(x, b):
                go(b, pending | {x})
            case Send(_, _, c) | Select(_, _, c) | Recv(_, _, _, c) | \
                    Commit(c):
                go(c, frozenset())
            case Branch(_, arms):
                for _, a in arms:
                    go(a, frozenset())
            case If(_, thn, els):
                go(thn, pending)
                go(els, pending)
            case _:
                pass

    go(body, frozenset())


def _check_rebinding(p: _P, body: Process, session_var: str, where: Token):
    """Reject shadowing: rebinding a value/process variable inside its own
    scope keeps substitution and trace reading unambiguous."""

    def go(t: Process, vals: frozenset, procs: frozenset):
        match t:
            case Recv(_, y, _, c):
                if y in vals or y == session_var:
                    raise _diag(p.src, where.start, where.end,
                                f"variable {y!r} rebound inside its own "
                                f"scope")
                go(c, vals | {y}, procs)
            case Rec(x, b):
                if x in procs:
                    raise _diag(p.src, where.start, where.end,
                                f"recursion variable {x!r} rebound inside "
                                f"its own scope")
                go(b, vals, procs | {x})
            case Send(_, _, c) | Select(_, _, c) | Commit(c):
                go(c, vals, procs)
            case Branch(_, arms):
                for _, a in arms:
                    go(a, vals, procs)
            case If(_, thn, els):
                go(thn, vals, procs)
                go(els, vals, procs)
            case _:
                pass

    go(body, frozenset(), frozenset())


def _check_closed_body(p: _P, body: Process, session_var: str, where: Token):
    vs, xs, cs = free_names(body)
    if vs:
        raise _diag(p.src, where.start, where.end,
                    f"unbound variable {sorted(vs)[0]!r}")
    if xs:
        raise _diag(p.src, where.start, where.end,
                    f"unbound recursion variable {sorted(xs)[0]!r}")
    extra = cs - {session_var}
    if extra:
        raise _diag(p.src, where.start, where.end,
                    f"unbound session variable {sorted(extra)[0]!r}")


def parse_program(src: str) -> SourceProgram:
    p = _P(src)
    decls: dict = {}
    while p.at("kw", "fun"):
        start = p.peek()
        d = _parse_fun_decl(p)
        if d.name in decls:
            raise _diag(p.src, start.start, start.end,
                        f"function {d.name!r} declared twice")
        decls[d.name] = d
    pp = _ProgParser(p, decls)
    first = p.peek()
    term = pp.collaboration()
    p.expect("eof")

    multiparty = False
    for part in (term.parts if isinstance(term, Par) else (term,)):
        tok = first  # spans are coarse here; endpoint bodies recheck below
        if part.role is not None:
            multiparty = True
        _check_contractive(p, part.body, tok)
        _check_rebinding(p, part.body, part.var, tok)
        _check_closed_body(p, part.body, part.var, tok)
    if multiparty:
        for part in (term.parts if isinstance(term, Par) else (term,)):
            if part.role is None:
                raise _diag(p.src, first.start, first.end,
                            "mixed multiparty and binary endpoints")
    return SourceProgram(decls, term, multiparty)


def parse_process_text(src: str, decls: dict | None = None) -> Process:
    """Parse a bare process (test helper)."""
    p = _P(src)
    pp = _ProgParser(p, decls or {})
    body = pp.process()
    p.expect("eof")
    return body


def parse_expression_text(src: str, decls: dict | None = None):
    p = _P(src)
    pp = _ProgParser(p, decls or {})
    e = pp.expr()
    p.expect("eof")
    return e


# ---------------------------------------------------------------------------
# type parser
# ---------------------------------------------------------------------------

def _parse_role_pair(p: _P) -> tuple:
    """Parses `p,q]` after an already-consumed `[`, each side `_` or an
    integer."""

    def side():
        if p.at("ident", "_"):
            p.next()
            return None
        return int(p.expect("int").text)

    a = side()
    p.expect(",")
    b = side()
    p.expect("]")
    return a, b


def _type_roles_or_label(p: _P):
    """After sel/brn: `[…]` holds either a role pair or arm content.  Look
    ahead: a role pair starts with `_` or an integer."""
    if p.at("[") and (p.peek(1).kind == "int" or
                      (p.peek(1).kind == "ident" and p.peek(1).text == "_")):
        p.expect("[")
        return _parse_role_pair(p)
    return (None, None)


class _TypeParser:
    def __init__(self, p: _P):
        self.p = p

    def type_(self) -> st.SessionTypeT:
        t = self._prefix()
        while (self.p.at("(") and self.p.peek(1).kind == "+"
               and self.p.peek(2).kind == ")"):
            self.p.next()
            self.p.next()
            self.p.next()
            t = st.TPlus(t, self._prefix())
        return t

    def _prefix(self) -> st.SessionTypeT:
        p = self.p
        t = p.peek()
        if p.eat("!"):
            src_dst = (None, None)
            p.expect("[")
            if p.peek().kind == "int" or p.at("ident", "_"):
                src_dst = _parse_role_pair(p)
                p.expect("[")
            sort = _parse_sort(p)
            p.expect("]")
            p.expect(".")
            return st.TOut(sort, self.type_(), *src_dst)
        if p.eat("?"):
            src_dst = (None, None)
            p.expect("[")
            if p.peek().kind == "int" or p.at("ident", "_"):
                src_dst = _parse_role_pair(p)
                p.expect("[")
            sort = _parse_sort(p)
            p.expect("]")
            p.expect(".")
            return st.TIn(sort, self.type_(), *src_dst)
        if t.kind == "kw":
            if t.text == "sel":
                p.next()
                src, dst = _type_roles_or_label(p)
                p.expect("[")
                lab = p.expect("ident").text
                p.expect("]")
                p.expect(".")
                return st.TSel(lab, self.type_(), src, dst)
            if t.text == "brn":
                p.next()
                src, dst = _type_roles_or_label(p)
                p.expect("[")
                arms: list = []
                seen: set = set()
                while True:
                    lab_tok = p.expect("ident")
                    if lab_tok.text in seen:
                        raise _diag(p.src, lab_tok.start, lab_tok.end,
                                    f"duplicate branch label "
                                    f"{lab_tok.text!r}")
                    seen.add(lab_tok.text)
                    p.expect(":")
                    arms.append((lab_tok.text, self.type_()))
                    if not p.eat(";"):
                        break
                p.expect("]")
                return st.TBrn(tuple(arms), src, dst)
            if t.text == "mu":
                p.next()
                v = p.expect("ident").text
                p.expect(".")
                return st.TMu(v, self.type_())
            if t.text == "end":
                p.next()
                return st.TEnd()
            if t.text == "err":
                p.next()
                return st.TErr()
            if t.text == "cmt":
                p.next()
                p.expect(".")
                return st.TCmt(self.type_())
            if t.text == "roll":
                p.next()
                return st.TRollT()
            if t.text == "abt":
                p.next()
                return st.TAbtT()
            p.fail(f"unexpected keyword {t.text!r} in type")
        if p.eat("("):
            inner = self.type_()
            p.expect(")")
            while (p.at("(") and p.peek(1).kind == "+"
                   and p.peek(2).kind == ")"):
                p.next()
                p.next()
                p.next()
                inner = st.TPlus(inner, self._prefix())
            return inner
        if t.kind == "ident":
            p.next()
            return st.TVarT(t.text)
        p.fail("expected a session type")


def _check_type_contractive(p: _P, t: st.SessionTypeT):
    def go(t, pending: frozenset):
        match t:
            case st.TVarT(n):
                if n in pending:
                    raise _diag(p.src, 0, 0,
                                f"unguarded recursive type on {n!r}")
            case st.TMu(v, body):
                go(body, pending | {v})
            case st.TOut(_, c) | st.TIn(_, c) | st.TSel(_, c) | st.TCmt(c):
                go(c, frozenset())
            case st.TBrn(arms):
                for _, a in arms:
                    go(a, frozenset())
            case st.TPlus(l, r):
                go(l, frozenset())
                go(r, frozenset())
            case _:
                pass

    go(t, frozenset())


def parse_type(src: str) -> st.SessionTypeT:
    p = _P(src)
    tp = _TypeParser(p)
    t = tp.type_()
    p.expect("eof")
    _check_type_contractive(p, t)
    free = st.free_type_vars(t)
    if free:
        raise _diag(p.src, 0, len(src),
                    f"unbound type variable {sorted(free)[0]!r}")
    return t


# ---------------------------------------------------------------------------
# rendering (source emission) and showing (runtime pretty-printing)
# ---------------------------------------------------------------------------

_OP_SYMBOL = {"or": ("||", 1), "and": ("&&", 2), "eq": ("==", 3),
              "lt": ("<", 3), "add": ("+", 4), "concat": ("++", 4)}


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') \
        .replace("\n", "\\n") + '"'


def render_expr(e, parent: int = 0) -> str:
    match e:
        case Lit(v):
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, int):
                return str(v)
            return _quote(v)
        case Var(n):
            return n
        case Call("not", (a,)):
            return f"!{render_expr(a, 5)}"
        case Call(op, (a, b)):
            sym, prec = _OP_SYMBOL[op]
            inner = f"{render_expr(a, prec)} {sym} {render_expr(b, prec + 1)}"
            return f"({inner})" if prec < parent else inner
        case Ufun(fn, args):
            return f"{fn}(" + ", ".join(render_expr(a) for a in args) + ")"
    raise MalformedTerm(f"not an expression: {e!r}")


def show_chan(r) -> str:
    match r:
        case ChanVar(n):
            return n
        case Endpoint(s, plus):
            return f"~{s}" if plus else s
        case MEndpoint(s, role):
            return f"{s}[{role}]"
    raise MalformedTerm(f"not a session identifier: {r!r}")


def _at(role) -> str:
    return "" if role is None else f"@{role}"


def render_process(pr: Process) -> str:
    match pr:
        case Send(ch, e, cont, tr):
            return (f"{show_chan(ch)}!<{render_expr(e)}>{_at(tr)}. "
                    f"{render_process(cont)}")
        case Recv(ch, y, s, cont, fr):
            return (f"{show_chan(ch)}?({y}: {s}){_at(fr)}. "
                    f"{render_process(cont)}")
        case Select(ch, l, cont, tr):
            return f"{show_chan(ch)}<+ {l}{_at(tr)}. {render_process(cont)}"
        case Branch(ch, arms, fr):
            inner = ", ".join(f"{l}: {render_process(a)}" for l, a in arms)
            return f"{show_chan(ch)}>+{{ {inner} }}{_at(fr)}"
        case If(c, t, e):
            return (f"if {render_expr(c)} then {render_process(t)} "
                    f"else {render_process(e)}")
        case Rec(x, body):
            return f"rec {x}. {render_process(body)}"
        case PVar(x):
            return x
        case Inact():
            return "0"
        case Commit(cont):
            return f"commit. {render_process(cont)}"
        case Roll():
            return "roll"
        case Abort():
            return "abort"
    raise MalformedTerm(f"not a process: {pr!r}")


def show_collaboration(c: Collaboration) -> str:
    """Pretty form covering runtime constructs; not re-parsable once sessions
    or logs appear."""
    match c:
        case Request(a, x, body, role):
            rr = "" if role is None else f"[{role}]"
            return f"request {a}{rr}({x}). {render_process(body)}"
        case Accept(a, x, body, role):
            rr = "" if role is None else f"[{role}]"
            return f"accept {a}{rr}({x}). {render_process(body)}"
        case Par(parts):
            return " | ".join(
                f"({show_collaboration(p)})" if isinstance(p, Par)
                else show_collaboration(p) for p in parts)
        case Session(s, saved, body):
            return (f"<{s}: {show_collaboration(saved)}>"
                    f"({show_collaboration(body)})")
        case Log(ep, ckpt, cur):
            tag = "^imp" if ckpt.imposed else ""
            return (f"{show_chan(ep)}:<{render_process(ckpt.process)}>{tag} "
                    f"{render_process(cur)}")
        case RollError():
            return "roll_error"
        case ComError():
            return "com_error"
    raise MalformedTerm(f"not a collaboration: {c!r}")


def _collect_ufuns(term, into: dict):
    def expr(e):
        match e:
            case Ufun(fn, args, asorts, rsort, dom):
                into.setdefault(fn, FunDecl(fn, asorts, rsort, dom))
                for a in args:
                    expr(a)
            case Call(_, args):
                for a in args:
                    expr(a)
            case _:
                pass

    def proc(t):
        match t:
            case Send(_, e, c):
                expr(e)
                proc(c)
            case Recv(_, _, _, c) | Select(_, _, c) | Commit(c):
                proc(c)
            case Branch(_, arms):
                for _, a in arms:
                    proc(a)
            case If(cond, a, b):
                expr(cond)
                proc(a)
                proc(b)
            case Rec(_, b):
                proc(b)
            case _:
                pass

    for part in (term.parts if isinstance(term, Par) else (term,)):
        proc(part.body)


def render_fun_decl(d: FunDecl) -> str:
    head = f"fun {d.name}({', '.join(d.arg_sorts)}): {d.result_sort}"
    if d.domain is not None:
        vals = ", ".join(render_expr(Lit(v)) for v in d.domain)
        head += f" in {{ {vals} }}"
    return head


def render_program(prog: SourceProgram) -> str:
    """Emit source for a program; the declaration block is reconstructed so
    that parsing the output yields an equivalent program."""
    decls = dict(prog.decls)
    _collect_ufuns(prog.term, decls)
    lines = [render_fun_decl(d) for d in decls.values()]
    if lines:
        lines.append("")
    parts = (prog.term.parts if isinstance(prog.term, Par)
             else (prog.term,))
    lines.append("\n| ".join(show_collaboration(p) for p in parts))
    return "\n".join(lines) + "\n"


render_type = st.render_type
