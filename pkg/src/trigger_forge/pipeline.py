"""End-to-end orchestration: parse, normalize, per-depth pivot loop, cluster
cases, G model search, batched validation, minimization, report.

The search follows the depth loop outermost: depth 0 tests each quantified
pivot alone, and each later depth re-enumerates the (now larger) case space.
Re-visited cases make progress because models already seen for a pattern pool
are excluded up front, and G formulas subsuming a recorded unsatisfiable one
are pruned without a solver call.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

from .clustering import SimilarityIndex, similar_formulas
from .config import Config
from .errors import ProtocolError, SolverCrashed, TriggerForgeError
from .preprocess import SkolemRecord, ensure_patterns, normalize
from .printing import print_term
from .smtlib import parse_problem
from .solver import SolverSession, UNSAT, default_solver_command
from .synthesis import (Candidate, GFormula, candidate_term, enumerate_g,
                        exact_model_exclusion, model_loop)
from .terms import Conjunct, InputProblem
from .unification import CaseOptions, ClusterCase, cluster_cases
from .validation import (INCONCLUSIVE, PROVEN, MinimizedSet, TermGroup,
                         Validator, batch_validate, minimize)

FOUND = "found"
NONE_FOUND = "none"
INCONCLUSIVE_RUN = "inconclusive"
ERROR = "error"

_EXIT_CODES = {FOUND: 0, NONE_FOUND: 1, INCONCLUSIVE_RUN: 2, ERROR: 3}


@dataclass
class FoundTerm:
    terms: list[str]
    dummy: str
    pivot_id: int
    pivot_assert_index: int
    pivot_named: Optional[str]
    depth: int
    members: list[int]
    rewritings: list[str]
    coverage_choice: list[int]
    model: dict[str, str]
    model_iteration: int
    minimized_from: list[str]
    proven_set_size: int
    speculative: bool
    revalidated: bool
    solver_time_s: float


@dataclass
class Statistics:
    conjuncts_pre_split: int = 0
    conjuncts: int = 0
    quantified_conjuncts: int = 0
    untriggerable_conjuncts: int = 0
    skolem_functions: int = 0
    cluster_cases: int = 0
    g_formulas: int = 0
    g_pruned: int = 0
    models_requested: int = 0
    candidates_built: int = 0
    validation_checks: int = 0
    wall_time_s: float = 0.0


@dataclass
class Report:
    status: str
    found: list[FoundTerm] = field(default_factory=list)
    alternative_terms: list[FoundTerm] = field(default_factory=list)
    statistics: Statistics = field(default_factory=Statistics)
    config: dict = field(default_factory=dict)
    error: str = ""
    source: str = ""

    @property
    def exit_code(self) -> int:
        return _EXIT_CODES[self.status]

    def to_json(self) -> str:
        payload = {
            "status": self.status,
            "source": self.source,
            "found": [asdict(f) for f in self.found],
            "alternative_terms": [asdict(f) for f in self.alternative_terms],
            "statistics": asdict(self.statistics),
            "config": self.config,
            "error": self.error,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def human_text(self) -> str:
        lines = [f"status: {self.status}"]
        if self.error:
            lines.append(f"error: {self.error}")
        for f in self.found:
            lines.append(f"triggering term: {f.dummy}")
            lines.append(f"  pivot conjunct #{f.pivot_id} "
                         f"(assert {f.pivot_assert_index}"
                         + (f", :named {f.pivot_named}" if f.pivot_named else "") + ")")
            lines.append(f"  depth {f.depth}, cluster members {f.members or '[]'}")
            if f.rewritings:
                lines.append(f"  rewritings: {'; '.join(f.rewritings)}")
            if f.model:
                pairs = ", ".join(f"{k}={v}" for k, v in f.model.items())
                lines.append(f"  model: {pairs}")
            if f.speculative:
                lines.append("  (speculative: built from a partial model)")
        for f in self.alternative_terms:
            lines.append(f"alternative term: {f.dummy}")
        s = self.statistics
        lines.append(
            f"stats: {s.conjuncts} conjuncts ({s.conjuncts_pre_split} before "
            f"splitting), {s.quantified_conjuncts} quantified, "
            f"{s.g_formulas} G formulas ({s.g_pruned} pruned), "
            f"{s.models_requested} model queries, {s.candidates_built} candidates, "
            f"{s.validation_checks} validation checks, "
            f"{s.wall_time_s:.2f}s wall time")
        return "\n".join(lines)


class _Deadline(Exception):
    pass


class _PivotState:
    def __init__(self) -> None:
        self.budget_used = 0
        self.pool_pairs: list[tuple[int, Candidate]] = []
        self.seen_candidates: set[str] = set()
        self.memo: dict[frozenset, list[tuple[str, frozenset]]] = {}
        self.unsat_g: list[frozenset] = []
        self.model_counter = 0


class _Search:
    def __init__(self, config: Config, problem: InputProblem,
                 skolems: list[SkolemRecord], source: str):
        self.config = config
        self.problem = problem
        self.source = source
        self.skolem_names = frozenset(r.function.name for r in skolems)
        self.index = SimilarityIndex(problem, use_lsh=config.use_lsh)
        self.stats = Statistics()
        self.found: list[FoundTerm] = []
        self.deadline = time.monotonic() + config.global_timeout_s
        self.command = list(config.solver_cmd) or default_solver_command()
        self.seeds = config.seeds()
        self.states: dict[int, _PivotState] = {}
        self.taken = problem.taken_symbols()
        self.frozen_taken = frozenset(self.taken)
        self.fresh_registry: dict[str, str] = {}
        self.constant_names = sorted(f.name for f in problem.constants())
        self.candidate_seq = 0
        self.timed_out = False

    # -- helpers -------------------------------------------------------------

    def _check_deadline(self) -> None:
        if time.monotonic() > self.deadline:
            raise _Deadline()

    def _pivots(self) -> list[Conjunct]:
        return [c for c in self.problem.conjuncts
                if c.is_quantified and not c.untriggerable]

    def _case_options(self) -> CaseOptions:
        return CaseOptions(sigma=self.config.sigma,
                           type_based=self.config.enable_type_based,
                           subterm=self.config.enable_subterm,
                           phi=self.config.phi,
                           skolem_names=self.skolem_names)

    def _pool_key(self, pivot: Conjunct, case: ClusterCase) -> frozenset:
        texts = [print_term(t) for t in pivot.all_pattern_terms()]
        for m in case.members:
            texts.extend(print_term(t) for t in m.all_pattern_terms())
        return frozenset(texts)

    # -- pivot processing ------------------------------------------------------

    def run_pivot(self, pivot: Conjunct, depth: int, session_factory,
                  validator: Validator) -> Optional[FoundTerm]:
        state = self.states.setdefault(pivot.id, _PivotState())
        if state.budget_used >= self.config.g_budget:
            return None
        similar = [] if depth == 0 else similar_formulas(
            self.problem, pivot, self.config.sigma, depth, self.index)
        fresh: list[tuple[int, Candidate]] = []

        def flush() -> Optional[FoundTerm]:
            nonlocal fresh
            if not fresh:
                return None
            batch = sorted(state.pool_pairs + fresh, key=lambda p: p[0])
            fresh = []
            candidates = [c for _seq, c in batch]
            outcome = self._validate_batch(validator, candidates, pivot, depth)
            if outcome is not None:
                return outcome
            state.pool_pairs = batch
            return None

        for case in cluster_cases(self.problem, pivot, similar,
                                  self._case_options(), self.index):
            self.stats.cluster_cases += 1
            produced = False
            for g in enumerate_g(pivot, case, self.frozen_taken):
                self._check_deadline()
                if state.budget_used >= self.config.g_budget:
                    break
                keys = g.part_keys()
                if any(dead <= keys for dead in state.unsat_g):
                    self.stats.g_pruned += 1
                    continue
                state.budget_used += 1
                self.stats.g_formulas += 1
                pool_key = self._pool_key(pivot, case)
                exclusions = state.memo.get(pool_key, [])
                loop = None
                for attempt in (0, 1):
                    session = session_factory(attempt > 0)
                    try:
                        loop = model_loop(session, g, self.config.mu,
                                          self.config.model_timeout_s, exclusions,
                                          self.constant_names)
                        break
                    except (SolverCrashed, ProtocolError):
                        if attempt:
                            raise
                if loop is None:
                    continue
                self.stats.models_requested += loop.checks
                if loop.first_status == UNSAT:
                    state.unsat_g.append(keys)
                var_names = [v.name for v in g.variables()]
                for model in loop.models:
                    state.model_counter += 1
                    hard = exact_model_exclusion(model, var_names)
                    if hard is not None:
                        state.memo.setdefault(pool_key, []).append(hard)
                    cand = candidate_term(pivot, case, model, self.problem,
                                          self.taken, depth,
                                          state.model_counter, g.choice,
                                          self.fresh_registry)
                    if cand.render() in state.seen_candidates:
                        continue
                    state.seen_candidates.add(cand.render())
                    self.stats.candidates_built += 1
                    self.candidate_seq += 1
                    fresh.append((self.candidate_seq, cand))
                    produced = True
            if fresh:
                result = flush()
                if result is not None:
                    return result
            if state.budget_used >= self.config.g_budget:
                break
        result = flush()
        return result

    def _validate_batch(self, validator: Validator, candidates: list[Candidate],
                        pivot: Conjunct, depth: int) -> Optional[FoundTerm]:
        before = validator.checks
        try:
            return self._validate_batch_inner(validator, candidates, pivot, depth)
        finally:
            self.stats.validation_checks += validator.checks - before

    def _validate_batch_inner(self, validator: Validator,
                              candidates: list[Candidate], pivot: Conjunct,
                              depth: int) -> Optional[FoundTerm]:
        outcomes = batch_validate(validator, candidates, self.config.beta,
                                  self.config.validate_timeout_s)
        for outcome in outcomes:
            if outcome.status != PROVEN:
                for c in outcome.candidates:
                    c.status = "failed" if outcome.status != INCONCLUSIVE \
                        else "inconclusive"
                continue
            subset = outcome.proven_subset or outcome.candidates
            minimized = minimize(validator, subset, self.config.validate_timeout_s)
            confirm = validator.revalidate_fresh(
                [TermGroup(minimized.terms, minimized.fresh_decls)],
                self.config.validate_timeout_s)
            head = subset[0]
            return FoundTerm(
                terms=[print_term(t) for t in minimized.terms],
                dummy=minimized.render(),
                pivot_id=pivot.id,
                pivot_assert_index=pivot.origin.assert_index,
                pivot_named=pivot.origin.named,
                depth=depth,
                members=[m.id for m in head.case.members],
                rewritings=[r.render() for r in head.case.rewritings],
                coverage_choice=list(head.choice),
                model=dict(head.model_snapshot),
                model_iteration=head.model_iteration,
                minimized_from=sorted({t for c in subset for t in c.arg_texts()}),
                proven_set_size=len(subset),
                speculative=any(c.speculative for c in subset),
                revalidated=confirm == UNSAT,
                solver_time_s=outcome.solver_time_s)
        return None

    # -- depth loop -------------------------------------------------------------

    def run(self) -> None:
        pivots = self._pivots()
        sessions: dict[int, SolverSession] = {}
        validators: list[Validator] = []

        def model_session(pivot: Conjunct):
            def factory(recreate: bool = False) -> SolverSession:
                if recreate and pivot.id in sessions:
                    sessions.pop(pivot.id).close()
                if pivot.id not in sessions:
                    session = SolverSession(self.command, seeds=self.seeds,
                                            log_path=self.config.solver_log,
                                            name=f"models-p{pivot.id}")
                    from .printing import declaration_lines
                    for line in declaration_lines(self.problem):
                        session.declare_raw(line)
                    sessions[pivot.id] = session
                return sessions[pivot.id]
            return factory

        shared_validator = Validator(self.problem, self.command, self.seeds,
                                     self.config.solver_log)
        validators.append(shared_validator)
        try:
            for depth in range(0, self.config.delta + 1):
                if self.config.jobs > 1:
                    finished = self._run_depth_parallel(pivots, depth, validators)
                else:
                    finished = self._run_depth_serial(pivots, depth,
                                                      shared_validator,
                                                      model_session)
                if finished:
                    return
        except _Deadline:
            self.timed_out = True
        finally:
            for s in sessions.values():
                s.close()
            for v in validators:
                v.close()

    def _run_depth_serial(self, pivots, depth, validator, model_session) -> bool:
        for pivot in pivots:
            result = self.run_pivot(pivot, depth, model_session(pivot), validator)
            if result is not None:
                self.found.append(result)
                if not self.config.all_terms:
                    return True
        return False

    def _run_depth_parallel(self, pivots, depth, validators) -> bool:
        results: dict[int, FoundTerm] = {}

        def work(pivot: Conjunct) -> None:
            local: list[SolverSession] = []

            def factory(recreate: bool = False) -> SolverSession:
                if recreate and local:
                    local.pop().close()
                if not local:
                    session = SolverSession(self.command, seeds=self.seeds,
                                            name=f"models-p{pivot.id}")
                    from .printing import declaration_lines
                    for line in declaration_lines(self.problem):
                        session.declare_raw(line)
                    local.append(session)
                return local[0]

            validator = Validator(self.problem, self.command, self.seeds)
            validators.append(validator)
            try:
                result = self.run_pivot(pivot, depth, factory, validator)
                if result is not None:
                    results[pivot.id] = result
            finally:
                for s in local:
                    s.close()
        with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
            list(pool.map(work, pivots))
        for pid in sorted(results):
            self.found.append(results[pid])
            if not self.config.all_terms:
                return True
        return False


def _config_snapshot(config: Config) -> dict:
    snap = asdict(config)
    snap["solver_cmd"] = list(config.solver_cmd)
    return snap


def run(config: Config, text: str, source_name: str = "<input>") -> Report:
    """Parse, preprocess, and search; returns the full report."""
    start = time.monotonic()
    report = Report(status=NONE_FOUND, config=_config_snapshot(config),
                    source=source_name)
    try:
        raw = parse_problem(text, source_name)
        report.statistics.conjuncts_pre_split = len(raw.conjuncts)
        problem, skolems = normalize(raw)
        problem = ensure_patterns(problem)
    except TriggerForgeError as exc:
        report.status = ERROR
        report.error = f"{type(exc).__name__}: {exc}"
        report.statistics.wall_time_s = time.monotonic() - start
        return report

    report.statistics.conjuncts = len(problem.conjuncts)
    report.statistics.quantified_conjuncts = sum(
        1 for c in problem.conjuncts if c.is_quantified)
    report.statistics.untriggerable_conjuncts = sum(
        1 for c in problem.conjuncts if c.untriggerable)
    report.statistics.skolem_functions = len(skolems)

    try:
        search = _Search(config, problem, skolems, source_name)
    except TriggerForgeError as exc:
        report.status = ERROR
        report.error = f"{type(exc).__name__}: {exc}"
        report.statistics.wall_time_s = time.monotonic() - start
        return report

    search.stats = report.statistics
    try:
        search.run()
    except TriggerForgeError as exc:
        if not search.found:
            report.status = ERROR
            report.error = f"{type(exc).__name__}: {exc}"
            report.statistics.wall_time_s = time.monotonic() - start
            return report

    if search.found:
        report.status = FOUND
        report.found = search.found[:1]
        report.alternative_terms = search.found[1:]
    elif search.timed_out:
        report.status = INCONCLUSIVE_RUN
    else:
        report.status = NONE_FOUND
    report.statistics.wall_time_s = time.monotonic() - start
    return report


def run_file(config: Config, path: str) -> Report:
    with open(path, "r", encoding="utf-8") as f:
        return run(config, f.read(), path)
