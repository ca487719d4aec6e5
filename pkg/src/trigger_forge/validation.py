"""Candidate validation against the full input, batch bisection to a minimal
proving subset, and argument-level minimization of proven terms.

A candidate set is Proven only when the solver answers unsat on the input
conjoined with the dummy-wrapped terms; the dummy predicates are fresh, so
conjoining them can never flip a satisfiable input to unsat.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .printing import print_term, symbol, print_sort
from .solver import SAT, SolverSession, TIMEOUT, UNKNOWN, UNSAT
from .synthesis import Candidate
from .terms import (App, FunctionDecl, InputProblem, Term, fresh_symbol, walk)

PROVEN = "proven"
REJECTED = "rejected"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class TermGroup:
    """Ground terms wrapped together as one dummy application."""

    terms: tuple[Term, ...]
    fresh_decls: tuple[FunctionDecl, ...] = ()

    @staticmethod
    def of(candidate: Candidate) -> "TermGroup":
        return TermGroup(candidate.args, candidate.fresh_decls)


@dataclass
class ValidationOutcome:
    candidates: list[Candidate]
    status: str
    solver_time_s: float = 0.0
    proven_subset: list[Candidate] = field(default_factory=list)


class Validator:
    """Holds one solver session with the problem asserted once; each check
    runs inside a push/pop scope. The session is single-owner."""

    def __init__(self, problem: InputProblem, command=None,
                 seeds: Optional[dict] = None, log_path: str = ""):
        self.problem = problem
        self.command = command
        self.seeds = seeds
        self.log_path = log_path
        self.session = self._fresh_session()
        self.checks = 0

    def _fresh_session(self) -> SolverSession:
        session = SolverSession(self.command, seeds=self.seeds,
                                log_path=self.log_path, name="validate")
        from .printing import declaration_lines, print_conjunct
        for line in declaration_lines(self.problem):
            session.declare_raw(line)
        for conjunct in self.problem.conjuncts:
            session.command_ok(print_conjunct(conjunct))
        return session

    def close(self) -> None:
        self.session.close()

    # -- core check ---------------------------------------------------------

    def check_groups(self, groups: Sequence[TermGroup], timeout_s: float,
                     session: Optional[SolverSession] = None) -> str:
        """Unsat/sat/unknown/timeout for the input plus the given term groups."""
        using_shared = session is None
        session = session or self.session
        session.push()
        try:
            declared: set[str] = set()
            taken = set(self.problem.taken_symbols())
            dummy_by_sig: dict[tuple, str] = {}
            for group in groups:
                for decl in group.fresh_decls:
                    if decl.name not in declared:
                        declared.add(decl.name)
                        session.declare_raw(
                            f"(declare-const {symbol(decl.name)} "
                            f"{print_sort(decl.return_sort)})")
                        taken.add(decl.name)
            for group in groups:
                if not group.terms:
                    continue
                sig = tuple(t.sort.name for t in group.terms)
                name = dummy_by_sig.get(sig)
                if name is None:
                    name = fresh_symbol("dummy", taken)
                    taken.add(name)
                    dummy_by_sig[sig] = name
                    params = " ".join(symbol(s) for s in sig)
                    session.declare_raw(f"(declare-fun {symbol(name)} ({params}) Bool)")
                args = " ".join(print_term(t) for t in group.terms)
                session.assert_text(f"({symbol(name)} {args})")
            result = session.check_sat(timeout_s)
            self.checks += 1
            return result.status
        finally:
            if not session.dead:
                session.pop()
            elif using_shared:
                self.session = self._fresh_session()

    def revalidate_fresh(self, groups: Sequence[TermGroup], timeout_s: float) -> str:
        """Re-run a check in a brand-new solver process."""
        session = self._fresh_session()
        try:
            return self.check_groups(groups, timeout_s, session=session)
        finally:
            session.close()


# ---------------------------------------------------------------------------
# validate / batch_validate / minimize
# ---------------------------------------------------------------------------

def validate(validator: Validator, candidates: Sequence[Candidate],
             timeout_s: float) -> ValidationOutcome:
    """One conjoined check of all the given candidates."""
    start = time.monotonic()
    status = validator.check_groups([TermGroup.of(c) for c in candidates], timeout_s)
    elapsed = time.monotonic() - start
    if status == UNSAT:
        return ValidationOutcome(list(candidates), PROVEN, elapsed, list(candidates))
    if status == SAT:
        return ValidationOutcome(list(candidates), REJECTED, elapsed)
    return ValidationOutcome(list(candidates), INCONCLUSIVE, elapsed)


def _ddmin(validator: Validator, items: list[Candidate],
           timeout_s: float) -> list[Candidate]:
    """1-minimal subset still proving unsat, by delta debugging."""
    def proves(subset: list[Candidate]) -> bool:
        return validator.check_groups([TermGroup.of(c) for c in subset],
                                      timeout_s) == UNSAT

    n = 2
    while len(items) >= 2:
        chunk = max(1, len(items) // n)
        reduced = False
        start = (len(items) // chunk) * chunk
        while start >= 0:
            complement = items[:start] + items[start + chunk:]
            if complement and len(complement) < len(items) and proves(complement):
                items = complement
                n = max(n - 1, 2)
                reduced = True
                break
            start -= chunk
        if not reduced:
            if n >= len(items):
                break
            n = min(n * 2, len(items))
    return items


def batch_validate(validator: Validator, candidates: Sequence[Candidate],
                   beta: int, timeout_s: float) -> list[ValidationOutcome]:
    """Validate candidates in batches of at most beta, conjoined per batch.
    A proven batch is bisected down to a minimal proving subset; beta = 1
    degenerates to one check per candidate."""
    outcomes: list[ValidationOutcome] = []
    for i in range(0, len(candidates), max(1, beta)):
        batch = list(candidates[i:i + beta])
        outcome = validate(validator, batch, timeout_s)
        if outcome.status == PROVEN and len(batch) > 1:
            outcome.proven_subset = _ddmin(validator, list(batch), timeout_s)
        outcomes.append(outcome)
    return outcomes


@dataclass
class MinimizedSet:
    terms: tuple[Term, ...]
    fresh_decls: tuple[FunctionDecl, ...]
    dropped: int = 0
    shrunk: int = 0

    def render(self) -> str:
        return "dummy(" + ", ".join(print_term(t) for t in self.terms) + ")"


def _proper_uninterpreted_subterms(t: Term) -> list[Term]:
    out, seen = [], {print_term(t)}
    for node in walk(t):
        if node is t:
            continue
        if isinstance(node, App) and not node.fn.interpreted and node.args:
            key = print_term(node)
            if key not in seen:
                seen.add(key)
                out.append(node)
    return out


def _used_decls(terms: Sequence[Term],
                decls: Sequence[FunctionDecl]) -> tuple[FunctionDecl, ...]:
    names = {n.fn.name for t in terms for n in walk(t) if isinstance(n, App)}
    return tuple(d for d in decls if d.name in names)


def minimize(validator: Validator, proven: Sequence[Candidate],
             timeout_s: float) -> MinimizedSet:
    """Greedy argument minimization of a proven candidate set: drop arguments
    last-to-first while unsat is preserved, then try replacing each survivor
    by one of its uninterpreted-headed proper subterms. Timeouts roll back to
    the last proven set."""
    args: list[Term] = []
    seen: set[str] = set()
    decls: list[FunctionDecl] = []
    for c in proven:
        for t in c.args:
            key = print_term(t)
            if key not in seen:
                seen.add(key)
                args.append(t)
        decls.extend(c.fresh_decls)

    def proves(terms: list[Term]) -> Optional[bool]:
        group = TermGroup(tuple(terms), _used_decls(terms, decls))
        status = validator.check_groups([group], timeout_s)
        if status == UNSAT:
            return True
        if status == TIMEOUT:
            return None  # give up and keep the last proven set
        return False  # sat, or unknown from incomplete quantifier reasoning

    dropped = 0
    i = len(args) - 1
    while i >= 0 and len(args) > 1:
        trial = args[:i] + args[i + 1:]
        verdict = proves(trial)
        if verdict is None:
            return MinimizedSet(tuple(args), _used_decls(args, decls), dropped, 0)
        if verdict:
            args = trial
            dropped += 1
        i -= 1

    shrunk = 0
    i = 0
    while i < len(args):
        replaced = False
        for sub in _proper_uninterpreted_subterms(args[i]):
            trial = args[:i] + [sub] + args[i + 1:]
            texts = [print_term(t) for t in trial]
            if len(set(texts)) != len(texts):
                trial = [t for j, t in enumerate(trial)
                         if texts.index(texts[j]) == j]
            verdict = proves(trial)
            if verdict is None:
                return MinimizedSet(tuple(args), _used_decls(args, decls),
                                    dropped, shrunk)
            if verdict:
                args = trial
                shrunk += 1
                replaced = True
                break
        if not replaced:
            i += 1

    final = proves(args)
    if final is False:
        raise AssertionError("minimized set failed to re-validate")
    return MinimizedSet(tuple(args), _used_decls(args, decls), dropped, shrunk)
