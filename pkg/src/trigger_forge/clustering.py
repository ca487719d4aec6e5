"""Symbol profiles, Jaccard similarity, and transitive similarity clusters.

Profiles collect the uninterpreted function symbols of arity >= 1 from a
conjunct's disjuncts (including nested quantifier bodies) and its patterns.
Nullary constants are deliberately excluded: they would drown the overlap
signal of quantifier-free facts like `seq.nth(empty, 0) = -1`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction

from .terms import App, Conjunct, InputProblem, walk


@dataclass(frozen=True)
class SymbolProfile:
    conjunct_id: int
    symbols: frozenset[str]


def profile(conjunct: Conjunct) -> SymbolProfile:
    symbols: set[str] = set()
    roots = list(conjunct.disjuncts)
    for pat in conjunct.patterns:
        roots.extend(pat.terms)
    for root in roots:
        for node in walk(root):
            if isinstance(node, App) and not node.fn.interpreted and node.args:
                symbols.add(node.fn.name)
    return SymbolProfile(conjunct.id, frozenset(symbols))


def jaccard(a: SymbolProfile, b: SymbolProfile) -> Fraction:
    union = a.symbols | b.symbols
    if not union:
        return Fraction(0)
    return Fraction(len(a.symbols & b.symbols), len(union))


class SimilarityIndex:
    """Precomputed profiles plus pairwise similarity queries for one problem.

    With `use_lsh`, a MinHash/banding prefilter narrows the candidate pairs
    before the exact Jaccard check; candidates are always re-checked exactly,
    so enabling it never changes which pairs are reported similar on inputs
    where the sketch retains all qualifying pairs.
    """

    def __init__(self, problem: InputProblem, use_lsh: bool = False):
        self.problem = problem
        self.profiles = {c.id: profile(c) for c in problem.conjuncts}
        self._members = [c for c in problem.conjuncts if not c.untriggerable]
        self._lsh_buckets = self._build_lsh() if use_lsh else None

    def eligible_members(self) -> list[Conjunct]:
        return list(self._members)

    def similarity(self, a: Conjunct, b: Conjunct) -> Fraction:
        return jaccard(self.profiles[a.id], self.profiles[b.id])

    def similar(self, a: Conjunct, b: Conjunct, sigma: float) -> bool:
        return self.similarity(a, b) >= sigma

    # -- MinHash prefilter -------------------------------------------------

    _PERMS = 64
    _BANDS = 16

    def _build_lsh(self) -> dict[tuple[int, tuple[int, ...]], list[int]]:
        rows = self._PERMS // self._BANDS
        buckets: dict[tuple[int, tuple[int, ...]], list[int]] = {}
        for c in self._members:
            sig = self._signature(self.profiles[c.id].symbols)
            for band in range(self._BANDS):
                key = (band, tuple(sig[band * rows:(band + 1) * rows]))
                buckets.setdefault(key, []).append(c.id)
        return buckets

    @staticmethod
    def _signature(symbols: frozenset[str]) -> list[int]:
        if not symbols:
            return [0] * SimilarityIndex._PERMS
        sig = []
        for perm in range(SimilarityIndex._PERMS):
            best = None
            for sym in symbols:
                digest = hashlib.md5(f"{perm}|{sym}".encode()).digest()
                value = int.from_bytes(digest[:8], "big")
                best = value if best is None else min(best, value)
            sig.append(best)
        return sig

    def _lsh_candidates(self, c: Conjunct) -> set[int]:
        out: set[int] = set()
        sig = self._signature(self.profiles[c.id].symbols)
        rows = self._PERMS // self._BANDS
        for band in range(self._BANDS):
            key = (band, tuple(sig[band * rows:(band + 1) * rows]))
            out.update(self._lsh_buckets.get(key, ()))
        out.discard(c.id)
        return out

    def directly_similar(self, c: Conjunct, sigma: float) -> list[Conjunct]:
        if self._lsh_buckets is not None and sigma > 0:
            ids = self._lsh_candidates(c)
            pool = [m for m in self._members if m.id in ids]
        else:
            pool = self._members
        return [m for m in pool if m.id != c.id and self.similar(c, m, sigma)]


def similar_formulas(problem: InputProblem, pivot: Conjunct, sigma: float,
                     depth: int, index: SimilarityIndex | None = None) -> list[Conjunct]:
    """Conjuncts transitively similar to `pivot` within `depth` hops, by
    ascending conjunct id. Depth 1 is direct Jaccard similarity; each further
    level adds conjuncts directly similar to a member of the previous level,
    never routing through the pivot itself.
    """
    if depth < 1:
        return []
    if index is None:
        index = SimilarityIndex(problem)
    found: dict[int, Conjunct] = {}
    frontier = index.directly_similar(pivot, sigma)
    for c in frontier:
        found[c.id] = c
    for _ in range(depth - 1):
        next_frontier = []
        for member in frontier:
            for c in index.directly_similar(member, sigma):
                if c.id != pivot.id and c.id not in found:
                    found[c.id] = c
                    next_frontier.append(c)
        frontier = next_frontier
        if not frontier:
            break
    return [found[i] for i in sorted(found)]
