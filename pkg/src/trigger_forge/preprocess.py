"""Normalization into the restricted conjunct grammar.

Pipeline per assert: expand derived connectives (=>, iff, xor, Bool ite,
distinct), push negations to literals (NNF), Skolemize existentials, split
top-level conjunctions and distribute disjunction over conjunction at the top
level only, then rename every bound variable to a globally unique name.
Conjunctions survive only inside nested quantifier bodies.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NoPatternFound
from .terms import (App, BOOL, Conjunct, Const, FunctionDecl, InputProblem,
                    Origin, Pattern, Quant, Term, Var, fresh_symbol, free_vars,
                    mk_and, mk_not, mk_or, pattern_is_admissible, substitute,
                    walk, FALSE, TRUE, AND, OR, NOT, EQ, ITE, DISTINCT,
                    IMPLIES, XOR)


@dataclass(frozen=True)
class SkolemRecord:
    function: FunctionDecl
    replaced_variable: str
    captured_outer_vars: tuple[Var, ...]


# ---------------------------------------------------------------------------
# Propositional expansion
# ---------------------------------------------------------------------------

def expand_propositional(t: Term) -> Term:
    if isinstance(t, (Const, Var)):
        return t
    if isinstance(t, Quant):
        return Quant(t.kind, t.binders,
                     tuple(tuple(expand_propositional(p) for p in pat)
                           for pat in t.patterns),
                     expand_propositional(t.body), t.named)
    args = tuple(expand_propositional(a) for a in t.args)
    name = t.fn.name
    if name == "=>":
        parts = [mk_not(a) for a in args[:-1]] + [args[-1]]
        return mk_or(parts)
    if name == "=" and len(args) >= 2 and args[0].sort == BOOL:
        pairs = [_iff(args[i], args[i + 1]) for i in range(len(args) - 1)]
        return mk_and(pairs)
    if name == "xor":
        out = args[0]
        for a in args[1:]:
            out = mk_and([mk_or([out, a]), mk_or([mk_not(out), mk_not(a)])])
        return out
    if name == "ite" and args[1].sort == BOOL:
        c, then, other = args
        return mk_and([mk_or([mk_not(c), then]), mk_or([c, other])])
    if name == "distinct" and args[0].sort == BOOL:
        if len(args) > 2:
            return FALSE  # three pairwise-distinct booleans cannot exist
        return mk_not(_iff(args[0], args[1]))
    if name == "distinct":
        pairs = [mk_not(App(EQ, (args[i], args[j])))
                 for i in range(len(args)) for j in range(i + 1, len(args))]
        return mk_and(pairs)
    return App(t.fn, args)


def _iff(a: Term, b: Term) -> Term:
    return mk_and([mk_or([mk_not(a), b]), mk_or([mk_not(b), a])])


# ---------------------------------------------------------------------------
# Negation normal form
# ---------------------------------------------------------------------------

def nnf(t: Term, positive: bool = True) -> Term:
    if isinstance(t, Const):
        if positive:
            return t
        return FALSE if t.value else TRUE
    if isinstance(t, Var):
        return t if positive else mk_not(t)
    if isinstance(t, Quant):
        kind = t.kind
        if not positive:
            kind = "exists" if kind == "forall" else "forall"
        return Quant(kind, t.binders, t.patterns, nnf(t.body, positive), t.named)
    name = t.fn.name
    if name == "not":
        return nnf(t.args[0], not positive)
    if name == "and":
        parts = [nnf(a, positive) for a in t.args]
        return mk_and(parts) if positive else mk_or(parts)
    if name == "or":
        parts = [nnf(a, positive) for a in t.args]
        return mk_or(parts) if positive else mk_and(parts)
    return t if positive else mk_not(t)


def negate_nnf(t: Term) -> Term:
    """NNF negation of an already-NNF formula."""
    return nnf(t, positive=False)


# ---------------------------------------------------------------------------
# Skolemization
# ---------------------------------------------------------------------------

class _Skolemizer:
    def __init__(self, problem: InputProblem, taken: set[str]):
        self.problem = problem
        self.taken = taken
        self.records: list[SkolemRecord] = []
        self.counter = 0

    def run(self, t: Term, outer: tuple[Var, ...] = ()) -> Term:
        if isinstance(t, (Const, Var)):
            return t
        if isinstance(t, App):
            if t.fn.name in ("and", "or", "not"):
                return App(t.fn, tuple(self.run(a, outer) for a in t.args))
            return t
        if t.kind == "forall":
            body = self.run(t.body, outer + t.binders)
            return Quant("forall", t.binders, t.patterns, body, t.named)
        binding: dict[Var, Term] = {}
        for var in t.binders:
            name = fresh_symbol(f"sk{self.counter}", self.taken)
            self.counter += 1
            self.taken.add(name)
            fn = FunctionDecl(name, tuple(v.sort for v in outer), var.sort)
            self.problem.declare_function(fn)
            self.records.append(SkolemRecord(fn, var.name, outer))
            binding[var] = App(fn, tuple(outer))
        return self.run(substitute(t.body, binding), outer)


# ---------------------------------------------------------------------------
# Top-level conjunction splitting and disjunction distribution
# ---------------------------------------------------------------------------

def _flat_and(t: Term) -> list[Term]:
    if isinstance(t, App) and t.fn.name == "and":
        out: list[Term] = []
        for a in t.args:
            out.extend(_flat_and(a))
        return out
    return [t]


def _flat_or(t: Term) -> list[Term]:
    if isinstance(t, App) and t.fn.name == "or":
        out: list[Term] = []
        for a in t.args:
            out.extend(_flat_or(a))
        return out
    return [t]


def split_units(body: Term) -> list[tuple[Term, ...]]:
    """Split an NNF body into disjunct tuples; distributes disjunction over
    conjunction along the top-level or-spine only (nested quantifier bodies
    are left untouched)."""
    units: list[tuple[Term, ...]] = []
    pending = _flat_and(body)
    while pending:
        item = pending.pop(0)
        disjuncts = _flat_or(item)
        and_index = next((i for i, d in enumerate(disjuncts)
                          if isinstance(d, App) and d.fn.name == "and"), None)
        if and_index is None:
            units.append(tuple(disjuncts))
            continue
        conj = _flat_and(disjuncts[and_index])
        rest = disjuncts[:and_index] + disjuncts[and_index + 1:]
        for piece in conj:
            pending.append(mk_or(rest + [piece]))
    return units


# ---------------------------------------------------------------------------
# Renaming to global uniqueness
# ---------------------------------------------------------------------------

def _rename_term(t: Term, taken: set[str]) -> Term:
    if isinstance(t, (Const, Var)):
        return t
    if isinstance(t, App):
        return App(t.fn, tuple(_rename_term(a, taken) for a in t.args))
    binding: dict[Var, Term] = {}
    new_binders = []
    for var in t.binders:
        name = fresh_symbol(var.name, taken)
        taken.add(name)
        new = Var(name, var.sort)
        new_binders.append(new)
        if new != var:
            binding[var] = new
    body = substitute(t.body, binding) if binding else t.body
    patterns = tuple(tuple(substitute(p, binding) if binding else p for p in pat)
                     for pat in t.patterns)
    body = _rename_term(body, taken)
    patterns = tuple(tuple(_rename_term(p, taken) for p in pat) for pat in patterns)
    return Quant(t.kind, tuple(new_binders), patterns, body, t.named)


# ---------------------------------------------------------------------------
# normalize
# ---------------------------------------------------------------------------

def normalize(raw: InputProblem) -> tuple[InputProblem, list[SkolemRecord]]:
    """Rebuild a parsed problem into grammar form. Satisfiability is
    preserved; pattern annotations are carried through unchanged."""
    problem = raw.copy_shell()
    taken = set(problem.functions) | set(problem.sorts)
    skolemizer = _Skolemizer(problem, taken)

    units: list[tuple[Term, Origin]] = []
    for conjunct in raw.conjuncts:
        term = conjunct.term()
        term = expand_propositional(term)
        term = nnf(term)
        term = skolemizer.run(term)
        for piece in _flat_and(term):
            units.append((piece, conjunct.origin))

    conjuncts: list[Conjunct] = []
    for term, origin in units:
        if isinstance(term, Quant) and term.kind == "forall":
            named = term.named or origin.named
            for disjuncts in split_units(term.body):
                conjuncts.append(Conjunct(
                    0, term.binders, tuple(Pattern(p) for p in term.patterns),
                    disjuncts, Origin(origin.assert_index, named)))
        else:
            for disjuncts in split_units(term):
                conjuncts.append(Conjunct(0, (), (), disjuncts, origin))

    renamed: list[Conjunct] = []
    for index, c in enumerate(conjuncts):
        rebuilt = _rename_term(c.term(), taken) if c.binder else \
            mk_or(tuple(_rename_term(d, taken) for d in c.disjuncts))
        if isinstance(rebuilt, Quant):
            renamed.append(Conjunct(index, rebuilt.binders,
                                    tuple(Pattern(p) for p in rebuilt.patterns),
                                    tuple(_flat_or(rebuilt.body)), c.origin))
        else:
            renamed.append(Conjunct(index, (), (), tuple(_flat_or(rebuilt)), c.origin))

    problem.conjuncts = renamed
    problem.normalized = True
    return problem, skolemizer.records


# ---------------------------------------------------------------------------
# Pattern inference
# ---------------------------------------------------------------------------

def _term_size(t: Term) -> int:
    return sum(1 for _ in walk(t))


def _pattern_candidates(body: Term, binder: set[Var]) -> list[Term]:
    """Uninterpreted-headed subterms of `body` whose variables stay within
    the conjunct's scope, smallest first."""
    seen: set[str] = set()
    out: list[Term] = []
    for node in walk(body):
        if isinstance(node, App) and not node.fn.interpreted and node.args:
            key = str(node)
            if key in seen:
                continue
            seen.add(key)
            fv = free_vars(node)
            if fv and fv <= binder:
                out.append(node)
    out.sort(key=lambda t: (_term_size(t), str(t)))
    return out


def infer_patterns(body: Term, binder: tuple[Var, ...],
                   scope: tuple[Var, ...] = ()) -> tuple[Pattern, ...]:
    """Smallest uninterpreted-headed covering subterms: a single-term pattern
    when one exists, otherwise a greedy minimal multi-pattern.

    Raises NoPatternFound when the body offers no admissible cover (e.g. the
    only candidate heads are interpreted, as with a bare equality).
    """
    need = set(binder)
    candidates = _pattern_candidates(body, need | set(scope))
    for cand in candidates:
        if need <= free_vars(cand):
            return (Pattern((cand,)),)
    chosen: list[Term] = []
    remaining = set(need)
    while remaining:
        best = None
        best_gain = 0
        for cand in candidates:
            gain = len(free_vars(cand) & remaining)
            if gain > best_gain:
                best, best_gain = cand, gain
        if best is None:
            raise NoPatternFound(
                f"no uninterpreted subterm covers variables {sorted(v.name for v in remaining)}")
        chosen.append(best)
        remaining -= free_vars(best)
    return (Pattern(tuple(chosen)),)


def _ensure_nested(t: Term, scope: tuple[Var, ...]) -> Term:
    if isinstance(t, (Const, Var)):
        return t
    if isinstance(t, App):
        return App(t.fn, tuple(_ensure_nested(a, scope) for a in t.args))
    inner_scope = scope + t.binders
    body = _ensure_nested(t.body, inner_scope)
    patterns = tuple(Pattern(pat) for pat in t.patterns
                     if pat and pattern_is_admissible(Pattern(pat), t.binders))
    if not patterns:
        patterns = infer_patterns(body, t.binders, scope)
    return Quant(t.kind, t.binders, tuple(p.terms for p in patterns), body, t.named)


def ensure_patterns(problem: InputProblem, session=None) -> InputProblem:
    """Guarantee every quantified conjunct (and nested quantifier) carries at
    least one admissible pattern, inferring one from the body when the input
    provides none. Conjuncts with no inferable pattern are marked
    untriggerable and skipped by synthesis.

    `session` is accepted for solvers that expose their inferred patterns;
    the bundled backends do not, so the local heuristic is authoritative.
    """
    out = problem.copy_shell()
    for c in problem.conjuncts:
        if not c.is_quantified:
            out.conjuncts.append(c)
            continue
        try:
            disjuncts = tuple(_ensure_nested(d, c.binder) for d in c.disjuncts)
        except NoPatternFound:
            out.conjuncts.append(Conjunct(c.id, c.binder, (), c.disjuncts,
                                          c.origin, untriggerable=True))
            continue
        patterns = tuple(p for p in c.patterns
                         if pattern_is_admissible(p, c.binder))
        if not patterns:
            try:
                patterns = infer_patterns(mk_or(disjuncts), c.binder)
            except NoPatternFound:
                out.conjuncts.append(Conjunct(c.id, c.binder, (), disjuncts,
                                              c.origin, untriggerable=True))
                continue
        out.conjuncts.append(Conjunct(c.id, c.binder, patterns, disjuncts, c.origin))
    out.normalized = True
    return out


def dump_normalized(problem: InputProblem) -> str:
    from .printing import problem_script
    return problem_script(problem)
