"""Directed rewritings via restricted syntactic unification, and assembly of
cluster cases (member subsets plus consistent rewriting choices).

Base unification matches applications of the same uninterpreted function where
both occurrences are maximal (not nested inside another uninterpreted
application). The sub-term extension also matches nested occurrences; the
type-based extension proposes same-sorted constants and uninterpreted terms
from a partner's body as rewriting targets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .clustering import SimilarityIndex
from .terms import (App, Conjunct, Const, Quant, Term, Var, free_vars,
                    substitute)

SOURCE_RANK = {"base": 0, "type_based": 1, "subterm": 2}


@dataclass(frozen=True)
class Rewriting:
    lhs: Var
    rhs: Term
    source: str = "base"

    def __post_init__(self) -> None:
        if self.lhs in free_vars(self.rhs):
            raise ValueError(f"cyclic rewriting {self.lhs.name} = {self.rhs}")

    def render(self) -> str:
        from .printing import print_term
        return f"{self.lhs.name} = {print_term(self.rhs)}"

    def sort_key(self) -> tuple:
        return (SOURCE_RANK.get(self.source, 9), self.lhs.name, self.render())


@dataclass(frozen=True)
class ClusterCase:
    members: tuple[Conjunct, ...]
    rewritings: tuple[Rewriting, ...]

    def key(self) -> tuple:
        return (tuple(_member_key(m) for m in self.members),
                tuple(r.render() for r in self.rewritings))

    def render(self) -> str:
        ms = ",".join(str(m.id) for m in self.members)
        rs = "; ".join(r.render() for r in self.rewritings)
        return f"C={{{ms}}} R={{{rs}}}"


def _member_key(c: Conjunct) -> tuple:
    return (c.id, c.origin.note)


# ---------------------------------------------------------------------------
# Application collection
# ---------------------------------------------------------------------------

def _collect_apps(term: Term, maximal_only: bool, out: list[App],
                  seen: set[str], under_uninterpreted: bool = False) -> None:
    if isinstance(term, (Const, Var)):
        return
    if isinstance(term, Quant):
        for pat in term.patterns:
            for p in pat:
                _collect_apps(p, maximal_only, out, seen, under_uninterpreted)
        _collect_apps(term.body, maximal_only, out, seen, under_uninterpreted)
        return
    is_target = not term.fn.interpreted and bool(term.args)
    if is_target and (not maximal_only or not under_uninterpreted):
        key = str(term)
        if key not in seen:
            seen.add(key)
            out.append(term)
    below = under_uninterpreted or is_target
    for arg in term.args:
        _collect_apps(arg, maximal_only, out, seen, below)


def conjunct_apps(c: Conjunct, maximal_only: bool = True) -> list[App]:
    out: list[App] = []
    seen: set[str] = set()
    for pat in c.patterns:
        for p in pat.terms:
            _collect_apps(p, maximal_only, out, seen)
    for d in c.disjuncts:
        _collect_apps(d, maximal_only, out, seen)
    return out


def _body_terms(c: Conjunct) -> Iterator[Term]:
    for d in c.disjuncts:
        yield d


# ---------------------------------------------------------------------------
# Restricted most-general-unifier
# ---------------------------------------------------------------------------

def _mgu(a: Term, b: Term, bindable: set[str],
         skolem_names: frozenset[str]) -> Optional[dict[Var, Term]]:
    """Robinson unification over variable-disjoint terms. Only variables in
    `bindable` may be bound. Argument positions blocked by a Skolem
    application that cannot match are skipped (never bound on either side)."""
    subst: dict[Var, Term] = {}

    def apply(t: Term) -> Term:
        return substitute(t, subst) if subst else t

    def unify(x: Term, y: Term) -> bool:
        x, y = apply(x), apply(y)
        if x == y:
            return True
        if isinstance(x, Var) or isinstance(y, Var):
            if isinstance(y, Var) and not isinstance(x, Var):
                x, y = y, x
            if not isinstance(x, Var):
                return False
            if x.name not in bindable:
                x, y = (y, x) if isinstance(y, Var) and y.name in bindable else (x, y)
                if not (isinstance(x, Var) and x.name in bindable):
                    return False
            if x in free_vars(y):
                return False
            if y.sort != x.sort:
                return False
            for var in list(subst):
                subst[var] = substitute(subst[var], {x: y})
            subst[x] = y
            return True
        if isinstance(x, App) and isinstance(y, App):
            if x.fn.name != y.fn.name or len(x.args) != len(y.args):
                return _skolem_skip(x, y)
            for xa, ya in zip(x.args, y.args):
                if not unify(xa, ya):
                    return False
            return True
        return _skolem_skip(x, y)

    def _skolem_skip(x: Term, y: Term) -> bool:
        for t in (x, y):
            if isinstance(t, App) and t.fn.name in skolem_names:
                return True
        return False

    return subst if unify(a, b) else None


def unify(fi: Conjunct, fj: Conjunct, type_based: bool = False,
          subterm: bool = False, prefer_lhs: frozenset[str] = frozenset(),
          skolem_names: frozenset[str] = frozenset()) -> list[Rewriting]:
    """All directed rewritings between two variable-disjoint conjuncts.

    Variable-to-variable bindings are emitted once, oriented so a variable in
    `prefer_lhs` (the pivot's) becomes the left-hand side when possible,
    otherwise the variable of the lower-id conjunct.
    """
    vars_i = {v.name: fi for v in fi.quantified_vars()}
    vars_j = {v.name: fj for v in fj.quantified_vars()}
    bindable = set(vars_i) | set(vars_j)
    out: dict[tuple[str, str], Rewriting] = {}

    def orient(lhs: Var, rhs: Term, source: str) -> Optional[Rewriting]:
        if isinstance(rhs, Var):
            swap = False
            if rhs.name in prefer_lhs and lhs.name not in prefer_lhs:
                swap = True
            elif (rhs.name in prefer_lhs) == (lhs.name in prefer_lhs):
                owner_l = vars_i.get(lhs.name) or vars_j.get(lhs.name)
                owner_r = vars_i.get(rhs.name) or vars_j.get(rhs.name)
                if owner_l and owner_r and owner_r.id < owner_l.id:
                    swap = True
            if swap:
                lhs, rhs = rhs, lhs
        if lhs.name in skolem_names:
            return None
        try:
            return Rewriting(lhs, rhs, source)
        except ValueError:
            return None

    def emit(bindings: dict[Var, Term], source: str) -> None:
        for var, term in bindings.items():
            rw = orient(var, term, source)
            if rw is None:
                continue
            out.setdefault((rw.lhs.name, rw.render()), rw)

    maximal_i = conjunct_apps(fi, maximal_only=True)
    maximal_j = conjunct_apps(fj, maximal_only=True)
    for a in maximal_i:
        for b in maximal_j:
            if a.fn.name != b.fn.name:
                continue
            bindings = _mgu(a, b, bindable, skolem_names)
            if bindings:
                emit(bindings, "base")

    if subterm:
        all_i = conjunct_apps(fi, maximal_only=False)
        all_j = conjunct_apps(fj, maximal_only=False)
        max_i_keys = {str(t) for t in maximal_i}
        max_j_keys = {str(t) for t in maximal_j}
        for a in all_i:
            for b in all_j:
                if a.fn.name != b.fn.name:
                    continue
                if str(a) in max_i_keys and str(b) in max_j_keys:
                    continue
                bindings = _mgu(a, b, bindable, skolem_names)
                if bindings:
                    emit(bindings, "subterm")

    if type_based:
        for src, dst in ((fi, fj), (fj, fi)):
            targets = _type_targets(dst)
            for var in src.quantified_vars():
                if var.name in skolem_names:
                    continue
                for t in targets.get(var.sort.name, ()):
                    if var in free_vars(t):
                        continue
                    rw = Rewriting(var, t, "type_based")
                    out.setdefault((rw.lhs.name, rw.render()), rw)

    return sorted(out.values(), key=lambda r: r.sort_key())


def _type_targets(c: Conjunct) -> dict[str, list[Term]]:
    """Constants and uninterpreted applications in a conjunct's body, keyed by
    result sort name."""
    targets: dict[str, list[Term]] = {}
    seen: set[str] = set()
    for d in _body_terms(c):
        for node in _walk_terms(d):
            if isinstance(node, App) and not node.fn.interpreted:
                key = str(node)
                if key in seen:
                    continue
                seen.add(key)
                targets.setdefault(node.sort.name, []).append(node)
    for terms in targets.values():
        terms.sort(key=str)
    return targets


def _walk_terms(t: Term) -> Iterator[Term]:
    from .terms import walk
    return walk(t)


# ---------------------------------------------------------------------------
# Cluster-case assembly
# ---------------------------------------------------------------------------

@dataclass
class CaseOptions:
    sigma: float = 0.3
    type_based: bool = False
    subterm: bool = False
    phi: int = 1
    skolem_names: frozenset[str] = frozenset()


def _phi_copies(conjuncts: Sequence[Conjunct], phi: int,
                taken: set[str]) -> list[Conjunct]:
    """Renamed duplicates of quantified conjuncts, for bounded repetition."""
    copies: list[Conjunct] = []
    from .terms import Pattern, replace_conjunct, Origin
    for c in conjuncts:
        if not c.is_quantified:
            continue
        for k in range(1, phi):
            binding = {}
            new_binder = []
            for v in c.quantified_vars():
                new = Var(f"{v.name}#{k}", v.sort)
                binding[v] = new
                if v in c.binder:
                    new_binder.append(new)
            disjuncts = tuple(substitute(d, binding) for d in c.disjuncts)
            patterns = tuple(Pattern(tuple(substitute(t, binding) for t in p.terms))
                             for p in c.patterns)
            copies.append(Conjunct(c.id, tuple(new_binder), patterns, disjuncts,
                                   Origin(c.origin.assert_index, c.origin.named,
                                          note=f"phi-copy-{k}")))
    return copies


def _has_cycle(rewritings: Sequence[Rewriting]) -> bool:
    edges: dict[str, set[str]] = {}
    for r in rewritings:
        edges.setdefault(r.lhs.name, set()).update(v.name for v in free_vars(r.rhs))
    state: dict[str, int] = {}

    def visit(node: str) -> bool:
        state[node] = 1
        for succ in edges.get(node, ()):
            mark = state.get(succ, 0)
            if mark == 1:
                return True
            if mark == 0 and visit(succ):
                return True
        state[node] = 2
        return False

    return any(state.get(n, 0) == 0 and visit(n) for n in edges)


def cluster_cases(problem, pivot: Conjunct, similar: Sequence[Conjunct],
                  opts: CaseOptions,
                  index: SimilarityIndex | None = None) -> Iterator[ClusterCase]:
    """Lazily enumerate (members, rewritings) cases for a pivot, smallest
    member sets first; alternative rewritings for one variable yield distinct
    cases. The empty case comes first (the pivot tested alone)."""
    if index is None:
        index = SimilarityIndex(problem)

    members = list(similar)
    if opts.phi > 1:
        taken = problem.taken_symbols()
        members += _phi_copies([pivot] + list(similar), opts.phi, taken)

    yield ClusterCase((), ())

    if not members:
        return

    prefer = frozenset(v.name for v in pivot.quantified_vars())
    nodes = [pivot] + members
    link_rewritings: dict[tuple[int, int], list[Rewriting]] = {}
    for i, j in itertools.combinations(range(len(nodes)), 2):
        a, b = nodes[i], nodes[j]
        if index.similarity(a, b) < opts.sigma and opts.sigma > 0:
            continue
        rws = unify(a, b, type_based=opts.type_based, subterm=opts.subterm,
                    prefer_lhs=prefer, skolem_names=opts.skolem_names)
        if rws:
            link_rewritings[(i, j)] = rws

    member_has_rewriting = [False] * len(nodes)
    for (i, j) in link_rewritings:
        member_has_rewriting[i] = True
        member_has_rewriting[j] = True

    usable: list[int] = []
    for idx in range(1, len(nodes)):
        if nodes[idx].is_quantified and not member_has_rewriting[idx]:
            continue  # quantified member that unifies with nothing
        usable.append(idx)

    seen_keys: set[tuple] = set()
    for size in range(1, len(usable) + 1):
        group: list[ClusterCase] = []
        for combo in itertools.combinations(usable, size):
            chosen = set(combo) | {0}
            var_names = {v.name for k in chosen for v in nodes[k].quantified_vars()}
            pool: dict[str, list[Rewriting]] = {}
            for (i, j), rws in link_rewritings.items():
                if i in chosen and j in chosen:
                    for r in rws:
                        if not free_vars(r.rhs) <= {v for k in chosen
                                                    for v in nodes[k].quantified_vars()}:
                            continue
                        if r.lhs.name not in var_names:
                            continue
                        bucket = pool.setdefault(r.lhs.name, [])
                        if all(x.render() != r.render() for x in bucket):
                            bucket.append(r)
            for bucket in pool.values():
                bucket.sort(key=lambda r: r.sort_key())
            case_members = tuple(nodes[k] for k in sorted(combo))
            if not pool:
                if any(not nodes[k].is_quantified for k in combo):
                    case = ClusterCase(case_members, ())
                    if case.key() not in seen_keys:
                        seen_keys.add(case.key())
                        group.append(case)
                continue
            names = sorted(pool)
            for choice in itertools.product(*(pool[n] for n in names)):
                if _has_cycle(choice):
                    continue
                rewritings = tuple(sorted(choice, key=lambda r: r.lhs.name))
                case = ClusterCase(case_members, rewritings)
                if case.key() in seen_keys:
                    continue
                seen_keys.add(case.key())
                group.append(case)
        group.sort(key=lambda c: (len(c.rewritings), c.key()))
        yield from group
