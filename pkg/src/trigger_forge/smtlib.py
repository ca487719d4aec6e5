"""SMT-LIB 2 front end: tokenizer, s-expression reader, and the script/problem
parser for the supported subset (Bool/Int/Real/uninterpreted sorts, forall and
exists, let, :pattern and :named annotations).

`define-fun` is macro-expanded while reading, `let` bindings are inlined, and
parsing never evaluates arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union

from .errors import ParseError, UnsupportedFeature
from .terms import (App, BOOL, Conjunct, Const, FunctionDecl, INT,
                    INTERPRETED_FUNCTIONS, InputProblem, Origin, Quant, REAL,
                    Sort, Term, Var)
from . import printing


# ---------------------------------------------------------------------------
# Tokenizer and generic s-expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # "(" ")" "symbol" "keyword" "numeral" "decimal" "string"
    value: str
    line: int
    column: int


_SIMPLE_EXTRA = set("~!@$%^&*_-+=<>.?/")


def tokenize(text: str) -> Iterator[Token]:
    line, col, i, n = 1, 1, 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c in "()":
            yield Token(c, c, start_line, start_col)
            i += 1
            col += 1
            continue
        if c == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise ParseError("unterminated quoted symbol", start_line, start_col)
            yield Token("symbol", text[i + 1:j], start_line, start_col)
            col += j - i + 1
            i = j + 1
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        buf.append('"')
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            else:
                raise ParseError("unterminated string", start_line, start_col)
            yield Token("string", "".join(buf), start_line, start_col)
            col += j - i + 1
            i = j + 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in "();":
            j += 1
        word = text[i:j]
        col += j - i
        i = j
        if word.startswith(":"):
            yield Token("keyword", word, start_line, start_col)
        elif word[0].isdigit() or (word[0] == "-" and len(word) > 1 and word[1].isdigit()):
            if "." in word:
                yield Token("decimal", word, start_line, start_col)
            else:
                yield Token("numeral", word, start_line, start_col)
        else:
            yield Token("symbol", word, start_line, start_col)


SExpr = Union[Token, list]


def read_sexprs(text: str) -> list[SExpr]:
    """Parse text into generic s-expressions (lists of tokens)."""
    stack: list[list] = [[]]
    for tok in tokenize(text):
        if tok.kind == "(":
            stack.append([])
        elif tok.kind == ")":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", tok.line, tok.column)
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ParseError("unbalanced '(' at end of input")
    return stack[0]


def _head(sx: SExpr) -> Optional[str]:
    if isinstance(sx, list) and sx and isinstance(sx[0], Token):
        return sx[0].value
    return None


def _pos(sx: SExpr) -> tuple[int, int]:
    while isinstance(sx, list) and sx:
        sx = sx[0]
    if isinstance(sx, Token):
        return sx.line, sx.column
    return 0, 0


# ---------------------------------------------------------------------------
# Script model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Command:
    kind: str
    payload: tuple = ()


@dataclass
class Script:
    commands: list[Command] = field(default_factory=list)

    def print(self) -> str:
        return "\n".join(print_command(c) for c in self.commands) + "\n"


def print_command(c: Command) -> str:
    if c.kind == "declare-sort":
        return printing.print_sort_declaration(c.payload[0])
    if c.kind == "declare-fun":
        return printing.print_declaration(c.payload[0])
    if c.kind == "declare-const":
        fn = c.payload[0]
        return (f"(declare-const {printing.symbol(fn.name)} "
                f"{printing.print_sort(fn.return_sort)})")
    if c.kind == "define-fun":
        name, params, ret, body = c.payload
        ps = " ".join(f"({printing.symbol(v.name)} {printing.print_sort(v.sort)})"
                      for v in params)
        return (f"(define-fun {printing.symbol(name)} ({ps}) "
                f"{printing.print_sort(ret)} {printing.print_term(body)})")
    if c.kind == "assert":
        term, named = c.payload
        return printing.print_assert(term, named)
    if c.kind == "set-option":
        key, value = c.payload
        return f"(set-option {key} {value})"
    if c.kind == "set-logic":
        return f"(set-logic {c.payload[0]})"
    if c.kind == "set-info":
        key, value = c.payload
        return f"(set-info {key} {value})"
    if c.kind in ("check-sat", "get-model", "push", "pop", "exit"):
        return f"({c.kind})"
    raise UnsupportedFeature(f"cannot print command {c.kind}")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_SUPPORTED_SORTLESS = {"check-sat", "get-model", "push", "pop", "exit",
                       "get-info", "get-value", "echo", "reset"}


@dataclass
class _Macro:
    params: tuple[Var, ...]
    body: Term


class Parser:
    def __init__(self, source_name: str = "<input>"):
        self.problem = InputProblem(source_name=source_name)
        self.script = Script()
        self.macros: dict[str, _Macro] = {}

    # -- sorts and declarations ------------------------------------------

    def _sort(self, sx: SExpr) -> Sort:
        if isinstance(sx, Token) and sx.kind == "symbol":
            name = sx.value
            if name == "Bool":
                return BOOL
            if name == "Int":
                return INT
            if name == "Real":
                return REAL
            if name in self.problem.sorts:
                return self.problem.sorts[name]
            raise ParseError(f"unknown sort {name}", sx.line, sx.column)
        if isinstance(sx, list):
            head = _head(sx)
            raise UnsupportedFeature(f"parametric sort ({head} ...) is not supported")
        raise ParseError("expected a sort", *_pos(sx))

    def _declare_sort(self, sx: list) -> None:
        if len(sx) not in (2, 3):
            raise ParseError("malformed declare-sort", *_pos(sx))
        name = sx[1].value
        arity = sx[2].value if len(sx) == 3 else "0"
        if arity != "0":
            raise UnsupportedFeature("declare-sort with nonzero arity")
        if name in ("Bool", "Int", "Real"):
            raise ParseError(f"cannot redeclare builtin sort {name}", *_pos(sx))
        sort = Sort(name)
        self.problem.sorts[name] = sort
        self.script.commands.append(Command("declare-sort", (sort,)))

    def _declare_fun(self, sx: list, const: bool) -> None:
        if const:
            if len(sx) != 3:
                raise ParseError("malformed declare-const", *_pos(sx))
            name, params, ret = sx[1].value, (), self._sort(sx[2])
        else:
            if len(sx) != 4 or not isinstance(sx[2], list):
                raise ParseError("malformed declare-fun", *_pos(sx))
            name = sx[1].value
            params = tuple(self._sort(p) for p in sx[2])
            ret = self._sort(sx[3])
        if name in self.problem.functions:
            raise ParseError(f"redeclaration of {name}", *_pos(sx))
        fn = FunctionDecl(name, params, ret, interpreted=False)
        self.problem.functions[name] = fn
        self.script.commands.append(
            Command("declare-const" if const else "declare-fun", (fn,)))

    def _define_fun(self, sx: list) -> None:
        if len(sx) != 5 or not isinstance(sx[2], list):
            raise ParseError("malformed define-fun", *_pos(sx))
        name = sx[1].value
        params = []
        for p in sx[2]:
            if not (isinstance(p, list) and len(p) == 2):
                raise ParseError("malformed define-fun parameter", *_pos(sx))
            params.append(Var(p[0].value, self._sort(p[1])))
        ret = self._sort(sx[3])
        env = {v.name: v for v in params}
        body = self._term(sx[4], env)
        if body.sort != ret:
            raise ParseError(f"define-fun {name} body sort {body.sort} != {ret}",
                             *_pos(sx))
        self.macros[name] = _Macro(tuple(params), body)
        self.script.commands.append(Command("define-fun", (name, tuple(params), ret, body)))

    # -- terms ------------------------------------------------------------

    def _term(self, sx: SExpr, env: dict[str, Term]) -> Term:
        if isinstance(sx, Token):
            return self._atom(sx, env)
        if not sx:
            raise ParseError("empty application")
        head = sx[0]
        if isinstance(head, list):
            raise UnsupportedFeature("higher-order application")
        name = head.value
        if name == "let":
            return self._let(sx, env)
        if name in ("forall", "exists"):
            return self._quant(sx, env)
        if name == "!":
            return self._annotated(sx, env)
        if name == "_":
            raise UnsupportedFeature(f"indexed identifier (_ ...)")
        args = tuple(self._term(a, env) for a in sx[1:])
        return self._apply(name, args, head)

    def _atom(self, tok: Token, env: dict[str, Term]) -> Term:
        if tok.kind == "numeral":
            return Const(int(tok.value), INT)
        if tok.kind == "decimal":
            return Const(Fraction(tok.value), REAL)
        if tok.kind == "string":
            raise UnsupportedFeature("string literals")
        name = tok.value
        if name == "true":
            return Const(True, BOOL)
        if name == "false":
            return Const(False, BOOL)
        if name in env:
            return env[name]
        return self._apply(name, (), tok)

    def _apply(self, name: str, args: tuple[Term, ...], where: Token) -> Term:
        if name == "-" and len(args) == 1 and isinstance(args[0], Const) \
                and args[0].sort in (INT, REAL):
            v = args[0].value
            return Const(-v, args[0].sort)
        if name in INTERPRETED_FUNCTIONS:
            fn = INTERPRETED_FUNCTIONS[name]
            if name == "ite" and len(args) != 3:
                raise ParseError("ite needs 3 arguments", where.line, where.column)
            return App(fn, args)
        if name in self.macros:
            macro = self.macros[name]
            if len(macro.params) != len(args):
                raise ParseError(f"macro {name} arity mismatch", where.line, where.column)
            from .terms import substitute
            return substitute(macro.body, dict(zip(macro.params, args)))
        if name in self.problem.functions:
            return App(self.problem.functions[name], args)
        raise ParseError(f"unknown symbol {name}", where.line, where.column)

    def _let(self, sx: list, env: dict[str, Term]) -> Term:
        if len(sx) != 3 or not isinstance(sx[1], list):
            raise ParseError("malformed let", *_pos(sx))
        new_env = dict(env)
        for b in sx[1]:
            if not (isinstance(b, list) and len(b) == 2 and isinstance(b[0], Token)):
                raise ParseError("malformed let binding", *_pos(sx))
            new_env[b[0].value] = self._term(b[1], env)  # parallel let
        return self._term(sx[2], new_env)

    def _quant(self, sx: list, env: dict[str, Term]) -> Term:
        if len(sx) != 3 or not isinstance(sx[1], list) or not sx[1]:
            raise ParseError("malformed quantifier", *_pos(sx))
        kind = sx[0].value
        binders = []
        new_env = dict(env)
        for b in sx[1]:
            if not (isinstance(b, list) and len(b) == 2 and isinstance(b[0], Token)):
                raise ParseError("malformed binder", *_pos(sx))
            var = Var(b[0].value, self._sort(b[1]))
            binders.append(var)
            new_env[var.name] = var
        body = sx[2]
        patterns: tuple[tuple[Term, ...], ...] = ()
        named = None
        if _head(body) == "!":
            inner, attrs = self._split_annotation(body)
            pats = []
            for key, value in attrs:
                if key == ":pattern":
                    if not isinstance(value, list):
                        raise ParseError(":pattern expects a term list", *_pos(body))
                    pats.append(tuple(self._term(t, new_env) for t in value))
                elif key == ":named" and isinstance(value, Token):
                    named = value.value
            patterns = tuple(pats)
            body_term = self._term(inner, new_env)
        else:
            body_term = self._term(body, new_env)
        if body_term.sort != BOOL:
            raise ParseError("quantifier body must be Bool", *_pos(sx))
        return Quant(kind, tuple(binders), patterns, body_term, named)

    def _split_annotation(self, sx: list) -> tuple[SExpr, list[tuple[str, SExpr]]]:
        """Split (! term :attr value ...) into the term and attribute pairs."""
        inner = sx[1]
        attrs: list[tuple[str, SExpr]] = []
        i = 2
        while i < len(sx):
            item = sx[i]
            if not (isinstance(item, Token) and item.kind == "keyword"):
                raise ParseError("expected attribute keyword", *_pos(item))
            value: SExpr = None
            if i + 1 < len(sx) and not (isinstance(sx[i + 1], Token)
                                        and sx[i + 1].kind == "keyword"):
                value = sx[i + 1]
                i += 1
            attrs.append((item.value, value))
            i += 1
        return inner, attrs

    def _annotated(self, sx: list, env: dict[str, Term]) -> Term:
        inner, _attrs = self._split_annotation(sx)
        return self._term(inner, env)

    # -- commands ----------------------------------------------------------

    def _assert(self, sx: list) -> None:
        if len(sx) != 2:
            raise ParseError("malformed assert", *_pos(sx))
        body = sx[1]
        named = None
        if _head(body) == "!":
            inner, attrs = self._split_annotation(body)
            for key, value in attrs:
                if key == ":named" and isinstance(value, Token):
                    named = value.value
            term = self._term(inner, {})
        else:
            term = self._term(body, {})
        if term.sort != BOOL:
            raise ParseError("assert of a non-Bool term", *_pos(sx))
        index = len(self.problem.conjuncts)
        self.problem.conjuncts.append(
            Conjunct(index, (), (), (term,), Origin(index, named)))
        self.script.commands.append(Command("assert", (term, named)))

    def feed(self, sx: SExpr) -> None:
        head = _head(sx)
        if head is None:
            raise ParseError("top-level atom in script", *_pos(sx))
        if head == "declare-sort":
            self._declare_sort(sx)
        elif head == "declare-fun":
            self._declare_fun(sx, const=False)
        elif head == "declare-const":
            self._declare_fun(sx, const=True)
        elif head == "define-fun":
            self._define_fun(sx)
        elif head == "assert":
            self._assert(sx)
        elif head in ("set-option", "set-info"):
            parts = [t.value if isinstance(t, Token) else "(...)" for t in sx[1:]]
            key = parts[0] if parts else ""
            value = " ".join(parts[1:])
            self.script.commands.append(Command(head, (key, value)))
        elif head == "set-logic":
            self.script.commands.append(Command("set-logic", (sx[1].value,)))
        elif head in _SUPPORTED_SORTLESS:
            if head in ("check-sat", "get-model", "push", "pop", "exit"):
                self.script.commands.append(Command(head))
        elif head in ("declare-datatype", "declare-datatypes"):
            raise UnsupportedFeature("datatypes")
        elif head in ("define-fun-rec", "define-funs-rec"):
            raise UnsupportedFeature("recursive definitions")
        else:
            raise UnsupportedFeature(f"command {head}")


def parse_script(text: str, source_name: str = "<input>") -> tuple[Script, InputProblem]:
    parser = Parser(source_name)
    for sx in read_sexprs(text):
        parser.feed(sx)
    return parser.script, parser.problem


def parse_problem(text: str, source_name: str = "<input>") -> InputProblem:
    """Parse SMT-LIB text into a raw (not yet normalized) InputProblem."""
    _script, problem = parse_script(text, source_name)
    return problem
