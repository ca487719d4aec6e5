"""Run configuration and the C0-C4 presets."""

from __future__ import annotations

from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class Config:
    sigma: float = 0.3            # similarity threshold for clustering
    delta: int = 2                # maximum transitive clustering depth
    mu: int = 4                   # models per G formula
    beta: int = 64                # candidates validated together
    phi: int = 1                  # max occurrences of one conjunct per cluster
    g_budget: int = 100           # G formulas built per pivot
    global_timeout_s: float = 600.0
    model_timeout_s: float = 1.0
    validate_timeout_s: float = 1.0
    enable_type_based: bool = False
    enable_subterm: bool = False
    enable_multi_candidate: bool = True
    all_terms: bool = False
    use_lsh: bool = False
    jobs: int = 1
    solver_cmd: tuple[str, ...] = ()   # empty = auto-detect
    solver_log: str = ""
    seed_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.sigma <= 1.0):
            raise ValueError("sigma must be in [0,1]")
        for name in ("delta", "mu", "beta", "phi", "g_budget", "jobs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")

    def seeds(self) -> dict[str, int]:
        base = {"sat.random_seed": 488, "smt.random_seed": 599, "nlsat.seed": 611}
        base.update(self.seed_overrides)
        return base


PRESETS = {
    "C0": {},
    "C1": {"sigma": 0.1},
    "C2": {"beta": 1},
    "C3": {"enable_type_based": True},
    "C4": {"sigma": 0.1, "enable_subterm": True},
}


def preset(name: str, **overrides) -> Config:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    kw = dict(PRESETS[name])
    kw.update(overrides)
    return Config(**kw)


def with_overrides(cfg: Config, **kw) -> Config:
    return replace(cfg, **kw)
