"""SMT-LIB text output for terms, declarations, and whole problems.

The printer round-trips with the parser on the supported AST and never
evaluates anything: `(+ 0 1)` stays `(+ 0 1)`.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .terms import (App, Conjunct, Const, FunctionDecl, InputProblem, Quant,
                    Sort, Term, Var, BOOL, INT, REAL)

_SIMPLE_EXTRA = set("~!@$%^&*_-+=<>.?/")


def symbol(name: str) -> str:
    """Quote a symbol with |...| unless it is a simple SMT-LIB symbol."""
    if not name:
        return "||"
    simple = all(c.isalnum() or c in _SIMPLE_EXTRA for c in name)
    if simple and not name[0].isdigit():
        return name
    return f"|{name}|"


def print_sort(s: Sort) -> str:
    return symbol(s.name)


def print_const(value, sort: Sort) -> str:
    if sort == BOOL:
        return "true" if value else "false"
    if sort == INT:
        return str(value) if value >= 0 else f"(- {-value})"
    frac = Fraction(value)
    sign = frac < 0
    frac = -frac if sign else frac
    if frac.denominator == 1:
        text = f"{frac.numerator}.0"
    else:
        text = f"(/ {frac.numerator}.0 {frac.denominator}.0)"
    return f"(- {text})" if sign else text


def print_term(t: Term) -> str:
    if isinstance(t, Const):
        return print_const(t.value, t.sort)
    if isinstance(t, Var):
        return symbol(t.name)
    if isinstance(t, App):
        if not t.args:
            return symbol(t.fn.name)
        inner = " ".join(print_term(a) for a in t.args)
        return f"({symbol(t.fn.name)} {inner})"
    return _print_quant(t)


def _print_quant(q: Quant) -> str:
    binders = " ".join(f"({symbol(v.name)} {print_sort(v.sort)})" for v in q.binders)
    body = print_term(q.body)
    attrs = ""
    for pat in q.patterns:
        attrs += " :pattern (" + " ".join(print_term(p) for p in pat) + ")"
    if q.named:
        attrs += f" :named {symbol(q.named)}"
    if attrs:
        body = f"(! {body}{attrs})"
    return f"({q.kind} ({binders}) {body})"


def print_declaration(fn: FunctionDecl) -> str:
    params = " ".join(print_sort(s) for s in (fn.param_sorts or ()))
    return f"(declare-fun {symbol(fn.name)} ({params}) {print_sort(fn.return_sort)})"


def print_sort_declaration(s: Sort) -> str:
    return f"(declare-sort {symbol(s.name)} 0)"


def print_assert(t: Term, named: str | None = None) -> str:
    body = print_term(t)
    if named:
        body = f"(! {body} :named {symbol(named)})"
    return f"(assert {body})"


def print_conjunct(c: Conjunct) -> str:
    return print_assert(c.term())


def declaration_lines(problem: InputProblem) -> list[str]:
    lines = [print_sort_declaration(s) for s in problem.sorts.values()]
    lines += [print_declaration(f) for f in problem.uninterpreted_functions()]
    return lines


def problem_script(problem: InputProblem, extra: Iterable[str] = ()) -> str:
    lines = declaration_lines(problem)
    lines += [print_conjunct(c) for c in problem.conjuncts]
    lines += list(extra)
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"
