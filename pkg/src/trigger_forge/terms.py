"""Core first-order term model: sorts, function declarations, terms, conjuncts.

Everything here is immutable after construction and safe to share across
threads. Formulas are Bool-sorted terms; the grammar restricted form used by
the rest of the pipeline lives in `Conjunct` (binder + patterns + disjuncts).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Union


class SortMismatch(Exception):
    """A term was built or substituted with an incompatible sort."""


@dataclass(frozen=True)
class Sort:
    name: str

    @property
    def is_uninterpreted(self) -> bool:
        return self.name not in ("Bool", "Int", "Real")

    def __str__(self) -> str:
        return self.name


BOOL = Sort("Bool")
INT = Sort("Int")
REAL = Sort("Real")

_NUMERIC = (INT, REAL)


@dataclass(frozen=True)
class FunctionDecl:
    """A function symbol. `param_sorts` is None for variadic interpreted ops."""

    name: str
    param_sorts: Optional[tuple[Sort, ...]]
    return_sort: Optional[Sort]
    interpreted: bool = False

    @property
    def arity(self) -> Optional[int]:
        return None if self.param_sorts is None else len(self.param_sorts)

    def __str__(self) -> str:
        return self.name


# Interpreted core. Comparison/equality and arithmetic are polymorphic over
# Int/Real, so their signatures stay open (param_sorts=None) and App infers
# the result sort.
AND = FunctionDecl("and", None, BOOL, interpreted=True)
OR = FunctionDecl("or", None, BOOL, interpreted=True)
NOT = FunctionDecl("not", (BOOL,), BOOL, interpreted=True)
IMPLIES = FunctionDecl("=>", None, BOOL, interpreted=True)
EQ = FunctionDecl("=", None, BOOL, interpreted=True)
DISTINCT = FunctionDecl("distinct", None, BOOL, interpreted=True)
ITE = FunctionDecl("ite", None, None, interpreted=True)
LT = FunctionDecl("<", None, BOOL, interpreted=True)
LE = FunctionDecl("<=", None, BOOL, interpreted=True)
GT = FunctionDecl(">", None, BOOL, interpreted=True)
GE = FunctionDecl(">=", None, BOOL, interpreted=True)
ADD = FunctionDecl("+", None, None, interpreted=True)
SUB = FunctionDecl("-", None, None, interpreted=True)
MUL = FunctionDecl("*", None, None, interpreted=True)
RDIV = FunctionDecl("/", None, REAL, interpreted=True)
IDIV = FunctionDecl("div", None, INT, interpreted=True)
MOD = FunctionDecl("mod", None, INT, interpreted=True)
ABS = FunctionDecl("abs", (INT,), INT, interpreted=True)
XOR = FunctionDecl("xor", None, BOOL, interpreted=True)
TO_REAL = FunctionDecl("to_real", (INT,), REAL, interpreted=True)
TO_INT = FunctionDecl("to_int", (REAL,), INT, interpreted=True)

INTERPRETED_FUNCTIONS = {
    f.name: f
    for f in (AND, OR, NOT, IMPLIES, EQ, DISTINCT, ITE, LT, LE, GT, GE,
              ADD, SUB, MUL, RDIV, IDIV, MOD, ABS, XOR, TO_REAL, TO_INT)
}

_BOOL_CONNECTIVES = {"and", "or", "not", "=>", "xor"}


@dataclass(frozen=True)
class Const:
    value: Union[bool, int, Fraction]
    sort: Sort

    def __post_init__(self) -> None:
        if self.sort == BOOL and not isinstance(self.value, bool):
            raise SortMismatch(f"Bool constant with value {self.value!r}")
        if self.sort == INT and not isinstance(self.value, int):
            raise SortMismatch(f"Int constant with value {self.value!r}")

    def __str__(self) -> str:
        from .printing import print_term
        return print_term(self)


@dataclass(frozen=True)
class Var:
    name: str
    sort: Sort

    def __str__(self) -> str:
        return self.name


def _numeric_result(fn: FunctionDecl, args: tuple["Term", ...]) -> Sort:
    if fn.name == "/":
        return REAL
    return REAL if any(a.sort == REAL for a in args) else INT


@dataclass(frozen=True)
class App:
    fn: FunctionDecl
    args: tuple["Term", ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))
        if self.fn.interpreted:
            self._check_interpreted()
        else:
            self._check_uninterpreted()

    def _check_uninterpreted(self) -> None:
        expected = self.fn.param_sorts or ()
        if len(expected) != len(self.args):
            raise SortMismatch(
                f"{self.fn.name} expects {len(expected)} args, got {len(self.args)}")
        for want, arg in zip(expected, self.args):
            if arg.sort != want:
                raise SortMismatch(
                    f"{self.fn.name}: argument {arg} has sort {arg.sort}, expected {want}")

    def _check_interpreted(self) -> None:
        name = self.fn.name
        if name in _BOOL_CONNECTIVES:
            for arg in self.args:
                if arg.sort != BOOL:
                    raise SortMismatch(f"{name} over non-Bool argument {arg}")
        elif name in ("=", "distinct"):
            sorts = {a.sort for a in self.args}
            if len(sorts) > 1 and not sorts <= set(_NUMERIC):
                raise SortMismatch(f"{name} over mixed sorts {sorts}")
        elif name in ("<", "<=", ">", ">=", "+", "-", "*", "/", "div", "mod"):
            for arg in self.args:
                if arg.sort not in _NUMERIC:
                    raise SortMismatch(f"{name} over non-numeric argument {arg}")

    @property
    def sort(self) -> Sort:
        fn = self.fn
        if not fn.interpreted:
            return fn.return_sort
        if fn.name == "ite":
            return self.args[1].sort
        if fn.return_sort is not None:
            return fn.return_sort
        return _numeric_result(fn, self.args)

    def __str__(self) -> str:
        from .printing import print_term
        return print_term(self)


@dataclass(frozen=True)
class Quant:
    """Quantified formula node; `patterns` is a tuple of pattern-term tuples
    (several tuples = alternative patterns, several terms in one tuple = a
    multi-pattern)."""

    kind: str  # "forall" or "exists"
    binders: tuple[Var, ...]
    patterns: tuple[tuple["Term", ...], ...]
    body: "Term"
    named: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in ("forall", "exists"):
            raise ValueError(f"bad quantifier kind {self.kind!r}")
        if not self.binders:
            raise ValueError("quantifier with empty binder")

    @property
    def sort(self) -> Sort:
        return BOOL

    def __str__(self) -> str:
        from .printing import print_term
        return print_term(self)


Term = Union[Const, Var, App, Quant]

TRUE = Const(True, BOOL)
FALSE = Const(False, BOOL)


def mk_and(parts: Iterable[Term]) -> Term:
    parts = [p for p in parts if p != TRUE]
    if not parts:
        return TRUE
    if len(parts) == 1:
        return parts[0]
    return App(AND, tuple(parts))


def mk_or(parts: Iterable[Term]) -> Term:
    parts = [p for p in parts if p != FALSE]
    if not parts:
        return FALSE
    if len(parts) == 1:
        return parts[0]
    return App(OR, tuple(parts))


def mk_not(t: Term) -> Term:
    return App(NOT, (t,))


def mk_eq(a: Term, b: Term) -> Term:
    return App(EQ, (a, b))


def walk(t: Term) -> Iterator[Term]:
    """Preorder traversal over a term, descending into quantifier bodies and
    pattern annotations."""
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, App):
            stack.extend(reversed(node.args))
        elif isinstance(node, Quant):
            for pat in reversed(node.patterns):
                stack.extend(reversed(pat))
            stack.append(node.body)


def free_vars(t: Term) -> set[Var]:
    if isinstance(t, Var):
        return {t}
    if isinstance(t, Const):
        return set()
    if isinstance(t, App):
        out: set[Var] = set()
        for a in t.args:
            out |= free_vars(a)
        return out
    bound = set(t.binders)
    out = free_vars(t.body) - bound
    for pat in t.patterns:
        for pt in pat:
            out |= free_vars(pt) - bound
    return out


def substitute(t: Term, binding: dict[Var, Term]) -> Term:
    """Simultaneous capture-free substitution of variables by terms.

    Replacement sorts must match the variables' sorts. Variables absent from
    `binding` are left unchanged; binders shadow outer bindings.
    """
    for var, repl in binding.items():
        if repl.sort != var.sort:
            raise SortMismatch(
                f"substituting {var.name}:{var.sort} by term of sort {repl.sort}")
    return _subst(t, binding)


def _subst(t: Term, binding: dict[Var, Term]) -> Term:
    if not binding:
        return t
    if isinstance(t, Var):
        return binding.get(t, t)
    if isinstance(t, Const):
        return t
    if isinstance(t, App):
        new_args = tuple(_subst(a, binding) for a in t.args)
        if new_args == t.args:
            return t
        return App(t.fn, new_args)
    inner = {v: r for v, r in binding.items() if v not in t.binders}
    if not inner:
        return t
    new_body = _subst(t.body, inner)
    new_patterns = tuple(tuple(_subst(pt, inner) for pt in pat) for pat in t.patterns)
    if new_body == t.body and new_patterns == t.patterns:
        return t
    return Quant(t.kind, t.binders, new_patterns, new_body, t.named)


def fresh_symbol(base: str, taken: Iterable[str]) -> str:
    """First identifier among base, base!1, base!2, ... not in `taken`."""
    taken = set(taken)
    if base not in taken:
        return base
    i = 1
    while f"{base}!{i}" in taken:
        i += 1
    return f"{base}!{i}"


@dataclass(frozen=True)
class Pattern:
    """One pattern of a quantifier; more than one term makes a multi-pattern."""

    terms: tuple[Term, ...]

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("empty pattern")

    def variables(self) -> set[Var]:
        out: set[Var] = set()
        for t in self.terms:
            out |= free_vars(t)
        return out


def pattern_is_admissible(pat: Pattern, binder: Iterable[Var]) -> bool:
    """A usable pattern has uninterpreted heads and mentions every binder
    variable across its terms (equality and other interpreted heads are
    rejected)."""
    for t in pat.terms:
        if not isinstance(t, App) or t.fn.interpreted or not t.args:
            return False
    return set(binder) <= pat.variables()


@dataclass(frozen=True)
class Origin:
    """Provenance of a conjunct: source assert index and optional :named label."""

    assert_index: int
    named: Optional[str] = None
    note: str = ""


@dataclass(frozen=True)
class Conjunct:
    """One top-level formula of the normalized input (Fig-4-style grammar):
    an optional universal binder with patterns, over a list of disjuncts.
    Quantifier-free conjuncts have an empty binder and no patterns."""

    id: int
    binder: tuple[Var, ...]
    patterns: tuple[Pattern, ...]
    disjuncts: tuple[Term, ...]
    origin: Origin = Origin(-1)
    untriggerable: bool = False

    @property
    def is_quantified(self) -> bool:
        return bool(self.binder)

    def body(self) -> Term:
        return mk_or(self.disjuncts)

    def quantified_vars(self) -> tuple[Var, ...]:
        """Binder variables plus the binders of any nested quantifiers."""
        out = list(self.binder)
        seen = set(out)
        for d in self.disjuncts:
            for node in walk(d):
                if isinstance(node, Quant):
                    for v in node.binders:
                        if v not in seen:
                            seen.add(v)
                            out.append(v)
        return tuple(out)

    def all_pattern_terms(self) -> tuple[Term, ...]:
        """Every pattern term of the conjunct, including nested quantifiers'."""
        out: list[Term] = []
        for pat in self.patterns:
            out.extend(pat.terms)
        for d in self.disjuncts:
            for node in walk(d):
                if isinstance(node, Quant):
                    for pat in node.patterns:
                        out.extend(pat)
        return tuple(out)

    def term(self) -> Term:
        """The conjunct as a closed formula term."""
        body = self.body()
        if not self.binder:
            return body
        return Quant("forall", self.binder,
                     tuple(p.terms for p in self.patterns), body,
                     self.origin.named)


@dataclass
class InputProblem:
    """Declarations plus conjuncts. Before preprocessing the conjuncts are raw
    assert bodies wrapped trivially; `normalize` rebuilds them into grammar
    form with globally unique variable names."""

    sorts: dict[str, Sort] = field(default_factory=dict)
    functions: dict[str, FunctionDecl] = field(default_factory=dict)
    conjuncts: list[Conjunct] = field(default_factory=list)
    source_name: str = "<input>"
    normalized: bool = False

    def uninterpreted_functions(self) -> list[FunctionDecl]:
        return [f for f in self.functions.values() if not f.interpreted]

    def constants(self) -> list[FunctionDecl]:
        return [f for f in self.functions.values()
                if not f.interpreted and not f.param_sorts]

    def taken_symbols(self) -> set[str]:
        out = set(self.functions) | set(self.sorts)
        for c in self.conjuncts:
            for v in c.quantified_vars():
                out.add(v.name)
        return out

    def declare_function(self, fn: FunctionDecl) -> FunctionDecl:
        self.functions[fn.name] = fn
        return fn

    def copy_shell(self) -> "InputProblem":
        """New problem sharing declarations, with an empty conjunct list."""
        return InputProblem(dict(self.sorts), dict(self.functions), [],
                            self.source_name, self.normalized)


def replace_conjunct(c: Conjunct, **kw) -> Conjunct:
    return replace(c, **kw)
