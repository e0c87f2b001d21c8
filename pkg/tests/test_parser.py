import random

import pytest
from hypothesis import given, settings, strategies as st

from genprog import random_program, random_type
from conftest import ALL_PROGRAMS
from cherrypi.parser import (ParseError, parse_expression_text,
                             parse_process_text, parse_program, parse_type,
                             render_program, render_type)
from cherrypi.sessiontypes import TBrn, TIn, TMu, TOut, canonical_type
from cherrypi.syntax import Call, Lit, Recv, Send, Ufun, canonicalize


# -- programs ---------------------------------------------------------------

def test_corpus_programs_round_trip(corpus):
    for name in ALL_PROGRAMS:
        src = (corpus / f"{name}.chpi").read_text()
        prog = parse_program(src)
        again = parse_program(render_program(prog))
        assert canonicalize(again.term).text == canonicalize(prog.term).text
        assert again.decls == prog.decls
        assert again.multiparty == prog.multiparty


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_generated_programs_round_trip(seed):
    prog = random_program(random.Random(seed), safe=(seed % 3 != 0))
    again = parse_program(render_program(prog))
    assert canonicalize(again.term).text == canonicalize(prog.term).text
    assert again.decls == prog.decls


def test_comments_and_whitespace_are_ignored():
    prog = parse_program("""
        // a comment line
        request a(x). x!<1>. 0   // trailing note
        | accept a(y). y?(v: int). 0
    """)
    assert not prog.multiparty
    assert prog.decls == {}


def test_operators_parse_to_builtins():
    e = parse_expression_text('1 + 2 == 3 && !("a" < "b")')
    assert isinstance(e, Call) and e.op == "and"


def test_string_escapes():
    e = parse_expression_text(r'"a\"b\\c"')
    assert e == Lit('a"b\\c')


def test_parse_error_reports_line_and_column():
    with pytest.raises(ParseError) as ei:
        parse_program("request a(x). x!<1>\n| accept a(y). 0")
    msg = str(ei.value)
    assert msg.startswith("1:") or msg.startswith("2:")


def test_undeclared_function_is_rejected():
    with pytest.raises(ParseError, match="undeclared function"):
        parse_process_text("if f() then 0 else 0")


def test_unguarded_recursion_is_rejected():
    with pytest.raises(ParseError, match="unguarded recursion"):
        parse_program("request a(x). rec X. X | accept a(y). 0")


def test_conditional_does_not_guard_recursion():
    with pytest.raises(ParseError, match="unguarded recursion"):
        parse_program("fun f(): bool\n"
                      "request a(x). rec X. if f() then X else 0"
                      " | accept a(y). 0")


def test_commit_guards_recursion():
    prog = parse_program("request a(x). rec X. commit. X | accept a(y). 0")
    assert prog.decls == {}


def test_rebinding_value_variable_is_rejected():
    with pytest.raises(ParseError):
        parse_program(
            "request a(x). x?(v: int). x?(v: str). 0"
            " | accept a(y). y!<1>. y!<\"s\">. 0")


def test_body_must_only_use_its_session_variable():
    with pytest.raises(ParseError):
        parse_program("request a(x). z!<1>. 0 | accept a(y). 0")


def test_mixed_multiparty_and_binary_roles_rejected():
    with pytest.raises(ParseError, match="mixed"):
        parse_program("request a[3](x). 0 | accept a(y). 0")


# -- types ------------------------------------------------------------------

def test_corpus_types_round_trip(types):
    for name, t in types.items():
        assert canonical_type(parse_type(render_type(t))) \
            == canonical_type(t), name


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_generated_types_round_trip(seed):
    t = random_type(random.Random(seed))
    assert canonical_type(parse_type(render_type(t))) == canonical_type(t)


def test_plus_under_prefix_needs_no_parens():
    t = parse_type("![int]. end (+) roll")
    assert isinstance(t, TOut)  # the (+) binds inside the continuation


def test_parenthesised_left_operand_closes_the_prefix():
    t = parse_type("(![int]. end) (+) roll")
    assert not isinstance(t, TOut)


def test_role_pairs_parse_and_render():
    t = parse_type("![_,2][int]. ?[3,_][str]. end")
    assert isinstance(t, TOut) and (t.src, t.dst) == (None, 2)
    assert isinstance(t.cont, TIn) and (t.cont.src, t.cont.dst) == (3, None)
    assert canonical_type(parse_type(render_type(t))) == canonical_type(t)


def test_unguarded_recursive_type_is_rejected():
    with pytest.raises(ParseError, match="unguarded recursive type"):
        parse_type("mu t. mu u. t")


def test_unbound_type_variable_is_rejected():
    with pytest.raises(ParseError, match="unbound type variable"):
        parse_type("![int]. t")


def test_branch_type_arms_use_semicolons():
    t = parse_type("brn[l: end; r: cmt. end]")
    assert isinstance(t, TBrn) and [l for l, _ in t.arms] == ["l", "r"]


def test_mu_scopes_over_full_body():
    t = parse_type("mu t. ![int]. t")
    assert isinstance(t, TMu) and isinstance(t.body, TOut)


# -- declarations -----------------------------------------------------------

def test_fun_decl_with_domain():
    prog = parse_program(
        'fun f(): str in {"a", "b"}\n'
        "request a(x). x!<f()>. 0 | accept a(y). y?(v: str). 0")
    assert prog.decls["f"].domain == ("a", "b")
    body = prog.term.parts[0].body
    assert isinstance(body, Send) and isinstance(body.expr, Ufun)
    assert body.expr.domain == ("a", "b")


def test_fun_arity_checked_at_call_site():
    with pytest.raises(ParseError):
        parse_program("fun f(int): bool\n"
                      "request a(x). if f() then 0 else 0 | accept a(y). 0")
