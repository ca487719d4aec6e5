"""Quantifier-free G formulas from a pivot's negation plus disjunct-covering
member instantiations and rewritings, the bounded model loop with diversity
constraints, and candidate triggering-term construction.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import IncompleteModel
from .preprocess import negate_nnf
from . import printing
from .printing import print_term
from .solver import Model, ModelValue, SAT, SolverSession, UNKNOWN, UNSAT
from .terms import (App, BOOL, Conjunct, Const, EQ, FunctionDecl, INT,
                    InputProblem, Quant, REAL, Sort, Term, Var, free_vars,
                    fresh_symbol, mk_and, mk_or, substitute, walk)
from .unification import ClusterCase


# ---------------------------------------------------------------------------
# Instantiation of nested quantifiers and disjunct coverage
# ---------------------------------------------------------------------------

def instantiate_nested(t: Term) -> Term:
    """Drop nested quantifier binders, leaving their variables free."""
    if isinstance(t, (Const, Var)):
        return t
    if isinstance(t, App):
        return App(t.fn, tuple(instantiate_nested(a) for a in t.args))
    return instantiate_nested(t.body)


def coverage_instantiations(f: Conjunct) -> list[Term]:
    """The n+1 disjunct-covering formulas (⋀_{j<k} ¬Dj) ∧ Dk of a member,
    with nested quantifiers instantiated before negation."""
    ds = [instantiate_nested(d) for d in f.disjuncts]
    out = []
    for k in range(len(ds)):
        parts = [negate_nnf(d) for d in ds[:k]] + [ds[k]]
        out.append(mk_and(parts))
    return out


def pivot_negation(f: Conjunct, taken: frozenset[str] = frozenset()) -> list[Term]:
    """¬F' as a list of quantifier-free conjunction parts. Nested universals
    flip to existentials and are Skolemized: their binders are renamed to
    fresh G-local variables, so the original names stay absent from the model
    and the pattern pool keeps referring to the unrenamed variables."""
    neg = negate_nnf(f.body())
    renames: dict[Var, Term] = {}
    used = set(taken)

    def collect(t: Term) -> None:
        if isinstance(t, App):
            for a in t.args:
                collect(a)
        elif isinstance(t, Quant):
            for v in t.binders:
                if t.kind == "exists" and v not in renames:
                    name = fresh_symbol(f"{v.name}!sk", used)
                    used.add(name)
                    renames[v] = Var(name, v.sort)
            collect(t.body)

    collect(neg)
    neg = instantiate_nested(neg)
    if renames:
        neg = substitute(neg, renames)
    return _flat_and(neg)


def _flat_and(t: Term) -> list[Term]:
    if isinstance(t, App) and t.fn.name == "and":
        out: list[Term] = []
        for a in t.args:
            out.extend(_flat_and(a))
        return out
    return [t]


# ---------------------------------------------------------------------------
# G formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GFormula:
    pivot_id: int
    case: ClusterCase
    choice: tuple[int, ...]
    parts: tuple[Term, ...]

    def variables(self) -> list[Var]:
        out: dict[str, Var] = {}
        for p in self.parts:
            for v in sorted(free_vars(p), key=lambda v: v.name):
                out.setdefault(v.name, v)
        return [out[k] for k in sorted(out)]

    def part_keys(self) -> frozenset[str]:
        return frozenset(print_term(p) for p in self.parts)

    def render(self) -> str:
        return " & ".join(print_term(p) for p in self.parts)


def _assert_quantifier_free(parts: tuple[Term, ...]) -> None:
    for p in parts:
        for node in walk(p):
            if isinstance(node, Quant):
                raise AssertionError(f"quantifier survived in G part: {p}")


def _literal_key(t: Term) -> Optional[tuple[str, bool]]:
    if isinstance(t, App) and t.fn.name == "not":
        inner = t.args[0]
        return (print_term(inner), False)
    if isinstance(t, (App, Var, Const)) and t.sort == BOOL:
        return (print_term(t), True)
    return None


def trivially_conflicting(parts: list[Term]) -> bool:
    """Detects ¬D ∧ D clashes among top-level conjunct literals."""
    seen: dict[str, bool] = {}
    for part in parts:
        for lit in _flat_and(part):
            key = _literal_key(lit)
            if key is None:
                continue
            text, polarity = key
            if seen.get(text, polarity) != polarity:
                return True
            seen[text] = polarity
    return False


def build_g(pivot: Conjunct, case: ClusterCase, choice: tuple[int, ...],
            taken: frozenset[str] = frozenset()) -> Optional[GFormula]:
    """One G for a fixed coverage choice; None when trivially conflicting."""
    insts = [coverage_instantiations(m) for m in case.members]
    return _build(pivot, case, choice, insts, taken)


def _build(pivot: Conjunct, case: ClusterCase, choice: tuple[int, ...],
           insts: list[list[Term]], taken: frozenset[str] = frozenset()) -> Optional[GFormula]:
    parts = list(pivot_negation(pivot, taken))
    for inst, k in zip(insts, choice):
        parts.append(inst[k])
    for r in case.rewritings:
        parts.append(App(EQ, (r.lhs, r.rhs)))
    if trivially_conflicting(parts):
        return None
    g = GFormula(pivot.id, case, choice, tuple(parts))
    _assert_quantifier_free(g.parts)
    return g


def enumerate_g(pivot: Conjunct, case: ClusterCase,
                taken: frozenset[str] = frozenset()) -> Iterator[GFormula]:
    """Lazy Cartesian product over the members' coverage choices, pruning
    trivial conflicts; visits choices in lexicographic order."""
    insts = [coverage_instantiations(m) for m in case.members]
    for choice in itertools.product(*[range(len(i)) for i in insts]):
        g = _build(pivot, case, choice, insts, taken)
        if g is not None:
            yield g


# ---------------------------------------------------------------------------
# Diversity constraints and the model loop
# ---------------------------------------------------------------------------

def _value_text(value: ModelValue) -> Optional[str]:
    from .printing import print_const
    if value.kind == "int":
        return print_const(value.value, INT)
    if value.kind == "real":
        return print_const(value.value, REAL)
    if value.kind == "bool":
        return print_const(value.value, BOOL)
    return None


def diversity_constraints(model: Model, var_names: list[str]) -> list[str]:
    """Per-variable difference constraints plus equivalence-class splitting,
    each returned separately so the solver may drop some of them."""
    out: list[str] = []
    names = [n for n in var_names if n in model.values]
    for name in names:
        text = _value_text(model.values[name])
        if text is not None:
            out.append(f"(distinct {name} {text})")
    classes = model.equivalence_classes()
    for _key, members in sorted(classes.items()):
        group = [n for n in members if n in names]
        for a, b in itertools.combinations(sorted(group), 2):
            out.append(f"(distinct {a} {b})")
    return out


@dataclass
class ModelLoopResult:
    first_status: str = ""
    models: list[Model] = field(default_factory=list)
    checks: int = 0


def exact_model_exclusion(model: Model,
                          var_names: list[str]) -> Optional[tuple[str, frozenset]]:
    """A hard constraint ruling out exactly this assignment pattern (the
    representable values plus the equalities of each equivalence class),
    together with the variable names it mentions."""
    parts: list[str] = []
    used: set[str] = set()
    names = [n for n in var_names if n in model.values]
    for name in names:
        text = _value_text(model.values[name])
        if text is not None:
            parts.append(f"(= {name} {text})")
            used.add(name)
    for _key, members in sorted(model.equivalence_classes().items()):
        group = sorted(n for n in members if n in names)
        for a, b in zip(group, group[1:]):
            parts.append(f"(= {a} {b})")
            used.update((a, b))
    if not parts:
        return None
    if len(parts) == 1:
        return f"(not {parts[0]})", frozenset(used)
    return "(not (and " + " ".join(parts) + "))", frozenset(used)


def model_loop(session: SolverSession, g: GFormula, mu: int, timeout_s: float,
               prior_exclusions: list[tuple[str, frozenset]] | None = None,
               extra_value_names: list[str] | None = None) -> ModelLoopResult:
    """Run up to `mu` model queries for G inside one push scope, excluding
    each model softly before asking for the next. Models already seen for the
    same pattern pool are excluded up front with hard constraints. Stops early
    on a non-sat answer or when the solver repeats a model regardless."""
    result = ModelLoopResult()
    var_names = [v.name for v in g.variables()]
    value_names = sorted(set(var_names) | set(extra_value_names or []))
    session.push()
    try:
        for v in g.variables():
            session.declare_raw(
                f"(declare-const {printing.symbol(v.name)} {printing.print_sort(v.sort)})")
        for part in g.parts:
            session.assert_term(part)
        if session.supports_soft_assert:
            # Bias the search toward the simplest counterexample values; the
            # diversity constraints below carry twice the weight so exclusion
            # always dominates staying at zero.
            for v in g.variables():
                if v.sort in (INT, REAL):
                    zero = "0" if v.sort == INT else "0.0"
                    session.assert_diversity(f"(= {printing.symbol(v.name)} {zero})",
                                             soft=True, weight=1)
        scope = set(var_names)
        for text, needed in (prior_exclusions or []):
            if needed <= scope:
                session.assert_text(text)
        seen: set[tuple] = set()
        deadline = 2 * timeout_s + 5.0
        for _m in range(mu):
            res = session.check_sat(timeout_s, want_model=False)
            result.checks += 1
            if not result.first_status:
                result.first_status = res.status
            if res.status not in (SAT, UNKNOWN):
                break
            model = session.get_values(value_names, deadline)
            if model is None:
                break
            model.partial = res.status != SAT
            key = model.restriction_key(var_names)
            if key in seen:
                break
            seen.add(key)
            result.models.append(model)
            for text in diversity_constraints(model, var_names):
                session.assert_diversity(text, soft=True, weight=2)
            hard = exact_model_exclusion(model, var_names)
            if hard is not None:
                session.assert_text(hard[0])
    finally:
        session.pop()
    return result


# ---------------------------------------------------------------------------
# Candidate construction
# ---------------------------------------------------------------------------

@dataclass
class Candidate:
    args: tuple[Term, ...]
    fresh_decls: tuple[FunctionDecl, ...]
    pivot_id: int
    depth: int
    case: ClusterCase
    choice: tuple[int, ...]
    model_snapshot: dict[str, str]
    model_iteration: int
    speculative: bool = False
    status: str = "untried"

    def render(self) -> str:
        return "dummy(" + ", ".join(print_term(a) for a in self.args) + ")"

    def arg_texts(self) -> tuple[str, ...]:
        return tuple(print_term(a) for a in self.args)


def _fresh_base(name: str, sort: Sort) -> str:
    base = re.sub(r"[0-9!#]+$", "", name)
    return base if base else sort.name[:1].lower()


def candidate_term(pivot: Conjunct, case: ClusterCase, model: Model,
                   problem: InputProblem, taken: set[str],
                   depth: int = 0, model_iteration: int = 0,
                   choice: tuple[int, ...] = (),
                   fresh_registry: Optional[dict[str, str]] = None) -> Candidate:
    """Instantiate the cluster's pattern pool: apply rewritings in ascending
    lhs-name order (propagating into the remaining rewritings), then replace
    the surviving variables by model values (constants for interpreted sorts;
    for uninterpreted sorts a declared constant sharing the model value, or
    else a fresh unconstrained symbol per equivalence class)."""
    pool: list[Term] = list(pivot.all_pattern_terms())
    for member in case.members:
        pool.extend(member.all_pattern_terms())

    pending = sorted(case.rewritings, key=lambda r: r.lhs.name)
    while pending:
        r = pending.pop(0)
        binding = {r.lhs: r.rhs}
        pool = [substitute(t, binding) for t in pool]
        pending = [type(r)(p.lhs, substitute(p.rhs, binding), p.source)
                   for p in pending]

    remaining: dict[str, Var] = {}
    for t in pool:
        for v in free_vars(t):
            remaining.setdefault(v.name, v)

    const_by_value: dict[tuple, str] = {}
    for fn in sorted(problem.constants(), key=lambda f: f.name):
        if fn.return_sort.is_uninterpreted and fn.name in model.values:
            const_by_value.setdefault(model.values[fn.name].key(), fn.name)

    speculative = model.partial
    fresh_by_class: dict[tuple, Term] = {}
    used_here: set[str] = set()
    fresh_decls: list[FunctionDecl] = []
    binding: dict[Var, Term] = {}
    for name in sorted(remaining):
        var = remaining[name]
        value = model.values.get(name)
        if not var.sort.is_uninterpreted:
            if value is None:
                speculative = True
                binding[var] = _zero(var.sort)
            else:
                binding[var] = _const_of(value, var.sort)
            continue
        key = value.key() if value is not None else ("missing", name)
        if value is None:
            speculative = True
        if key in const_by_value:
            decl = problem.functions[const_by_value[key]]
            binding[var] = App(decl, ())
            continue
        if key not in fresh_by_class:
            fresh_name = _allocate_fresh(_fresh_base(name, var.sort), var.sort,
                                         taken, fresh_registry, used_here)
            decl = FunctionDecl(fresh_name, (), var.sort)
            fresh_decls.append(decl)
            fresh_by_class[key] = App(decl, ())
        binding[var] = fresh_by_class[key]

    pool = [substitute(t, binding) for t in pool]
    args: list[Term] = []
    seen: set[str] = set()
    for t in pool:
        text = print_term(t)
        if text not in seen:
            seen.add(text)
            args.append(t)
    for t in args:
        for node in walk(t):
            if isinstance(node, Var):
                raise IncompleteModel(f"unsubstituted variable {node.name} in candidate")

    snapshot = {n: str(v.value) for n, v in sorted(model.values.items())
                if n in remaining}
    return Candidate(tuple(args), tuple(fresh_decls), pivot.id, depth, case,
                     choice, snapshot, model_iteration, speculative)


def _allocate_fresh(base: str, sort: Sort, taken: set[str],
                    registry: Optional[dict[str, str]],
                    used_here: set[str]) -> str:
    """Pick a readable fresh-constant name. Names are shared across candidates
    only for the same sort (the constants are unconstrained either way); a
    name never collides with problem symbols or a different sort."""
    if registry is None:
        registry = {}
    candidate = base
    i = 0
    while True:
        clash = candidate in taken or candidate in used_here \
            or registry.get(candidate, sort.name) != sort.name
        if not clash:
            registry[candidate] = sort.name
            used_here.add(candidate)
            return candidate
        i += 1
        candidate = f"{base}!{i}"


def _zero(sort: Sort) -> Term:
    if sort == BOOL:
        return Const(False, BOOL)
    if sort == REAL:
        from fractions import Fraction
        return Const(Fraction(0), REAL)
    return Const(0, INT)


def _const_of(value: ModelValue, sort: Sort) -> Term:
    from fractions import Fraction
    if sort == BOOL:
        return Const(bool(value.value), BOOL)
    if sort == REAL:
        return Const(Fraction(value.value), REAL)
    if value.kind == "real":
        # Solver may answer with a real literal for an Int variable.
        return Const(int(Fraction(value.value)), INT)
    return Const(int(value.value), INT)
