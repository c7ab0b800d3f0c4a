"""Structural profit maximization over nested mechanism classes.

Each level of a :class:`Hierarchy` is a mechanism class containing the
previous one.  Selection maximizes the empirical profit minus a level-specific
generalization penalty whose confidence budget is ``delta * weight(level)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .complexity import BoundInputs, compute_U, generalization_epsilon
from .erm import ObjectiveSpec, objective_values, run_erm
from .errors import DomainError
from .mechanisms import MechanismClass
from .valuations import CostFunction, DistributionSpec, expected_profit, sample_profiles, split_seeds

HIERARCHY_KINDS = ("group_pricing", "menu_length", "q_boosted")


def geometric_weights(T: int) -> tuple[float, ...]:
    z = 1.0 - 2.0 ** -T
    return tuple(2.0 ** -i / z for i in range(1, T + 1))


def uniform_weights(T: int) -> tuple[float, ...]:
    return (1.0 / T,) * T


@dataclass(frozen=True)
class Hierarchy:
    """Nested classes ``levels[0] ⊆ levels[1] ⊆ ...``; level numbers start at 1."""

    kind: str
    levels: tuple[MechanismClass, ...]
    dt: tuple[tuple[int, int], ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in HIERARCHY_KINDS:
            raise DomainError(f"unknown hierarchy kind {self.kind!r}")
        if not self.levels:
            raise DomainError("hierarchy needs at least one level")
        if len(self.weights) != len(self.levels) or len(self.dt) != len(self.levels):
            raise DomainError("need one weight and one (d, t) pair per level")
        if any(w < 0 for w in self.weights) or sum(self.weights) > 1 + 1e-12:
            raise DomainError("weights must be non-negative and sum to at most 1")
        for lo, hi in zip(self.levels, self.levels[1:]):
            _check_nested(self.kind, lo, hi)

    @property
    def T(self) -> int:
        return len(self.levels)

    def weight(self, level: int) -> float:
        return self.weights[level - 1]

    def with_weights(self, weights) -> "Hierarchy":
        return Hierarchy(self.kind, self.levels, self.dt, tuple(float(w) for w in weights))

    @classmethod
    def group_pricing(cls, partitions: Sequence[Sequence[int]], m: int = 1,
                      cost: CostFunction | None = None, order=None, weights="geometric"):
        """Item pricing where level k charges one price vector per group of its partition.

        ``partitions[k]`` gives the group id of every buyer and must refine the
        previous level's partition.
        """
        cost = cost or CostFunction.zero(m)
        levels, dt = [], []
        for groups in partitions:
            groups = tuple(int(g) for g in groups)
            n, k = len(groups), max(groups) + 1
            levels.append(MechanismClass("item_pricing", n=n, m=m, anonymity="grouped",
                                         groups=groups, order=order, cost=cost))
            dt.append((k * m, n * m))
        return cls("group_pricing", tuple(levels), tuple(dt), _weights(weights, len(levels)))

    @classmethod
    def menu_length(cls, L: int, kappa: int, n: int = 1, cost: CostFunction | None = None,
                    weights="geometric"):
        cost = cost or CostFunction.zero(1)
        levels = tuple(MechanismClass("two_part_tariff_menu", n=n, m=1, ell=ell, caps=(kappa,), cost=cost)
                       for ell in range(1, L + 1))
        dt = tuple((2 * ell, n * (kappa * ell) ** 2) for ell in range(1, L + 1))
        return cls("menu_length", levels, dt, _weights(weights, L))

    @classmethod
    def q_boosted(cls, chain: Sequence[Sequence[Sequence[int]]], n: int, m: int,
                  cost: CostFunction | None = None, weights="geometric"):
        """Lambda-auctions whose boostable allocation sets grow along ``chain``."""
        cost = cost or CostFunction.zero(m)
        levels = tuple(MechanismClass("lambda_auction", n=n, m=m, boosted=tuple(map(tuple, Q)), cost=cost)
                       for Q in chain)
        dt = tuple((len(Q), (n + 1) * (len(Q) + 1) ** 2) for Q in chain)
        return cls("q_boosted", levels, dt, _weights(weights, len(levels)))


def _weights(spec, T: int) -> tuple[float, ...]:
    if spec == "geometric":
        return geometric_weights(T)
    if spec == "uniform":
        return uniform_weights(T)
    return tuple(float(w) for w in spec)


def _check_nested(kind: str, lo: MechanismClass, hi: MechanismClass):
    if kind == "group_pricing":
        coarse = {}
        for g_hi, g_lo in zip(hi.groups, lo.groups):
            if coarse.setdefault(g_hi, g_lo) != g_lo:
                raise DomainError("each level's partition must refine the previous one")
    elif kind == "menu_length":
        if hi.ell < lo.ell:
            raise DomainError("menu lengths must not shrink")
    elif not set(lo.boosted) <= set(hi.boosted):
        raise DomainError("boosted allocation sets must grow")


def embed(h: Hierarchy, level: int, params) -> np.ndarray:
    """Map level ``level`` parameters to level ``level + 1`` with identical behavior."""
    lo, hi = h.levels[level - 1], h.levels[level]
    p = np.asarray(params, dtype=float)
    if h.kind == "group_pricing":
        m = lo.m
        out = np.zeros(hi.dim)
        for j, g in enumerate(hi.groups):
            src = lo.groups[j]
            out[g * m : (g + 1) * m] = p[src * m : (src + 1) * m]
        return out
    if h.kind == "menu_length":
        entries = p.reshape(-1, 2)
        # repeated copies of the first entry are never strictly preferred
        pad = np.repeat(entries[:1], hi.ell - lo.ell, axis=0)
        return np.concatenate([entries, pad]).ravel()
    index = {q: b for b, q in enumerate(lo.boosted)}
    return np.array([p[index[q]] if q in index else 0.0 for q in hi.boosted])


def level_epsilon(h: Hierarchy, level: int, U: float, N: int, delta: float,
                  constant: float = 1.0) -> float:
    w = h.weight(level)
    if w <= 0:
        raise DomainError(f"level {level} has zero weight")
    d, t = h.dt[level - 1]
    return generalization_epsilon(BoundInputs(U, d, t, N, delta * w, constant))


def level_epsilon_direct(h: Hierarchy, level: int, U: float, N: int, delta: float,
                         constant: float = 1.0) -> float:
    """Penalty with ``d log2 t`` in place of the pseudo-dimension bound."""
    w = h.weight(level)
    if w <= 0:
        raise DomainError(f"level {level} has zero weight")
    d, t = h.dt[level - 1]
    return constant * (U * math.sqrt(d * math.log2(max(t, 1)) / N)
                       + U * math.sqrt(math.log(1.0 / (delta * w)) / N))


@dataclass(frozen=True)
class LevelRow:
    level: int
    d: int
    t: int
    weight: float
    empirical_max: float
    epsilon: float
    epsilon_direct: float
    lower_bound: float
    params: tuple[float, ...] = field(compare=False)


@dataclass(frozen=True)
class SpmResult:
    levels: tuple[LevelRow, ...]
    selected_level: int
    selected_params: tuple[float, ...]
    U: float


def level_maximizers(h: Hierarchy, obj: ObjectiveSpec, sup_method: str = "exact", seed: int = 0,
                     **erm_kw) -> list[tuple[np.ndarray, float]]:
    """Per-level empirical maximizers, each at least as good as the previous level's."""
    out = []
    prev = None
    for k, mc in enumerate(h.levels, start=1):
        res = run_erm(mc, obj, sup_method, seed=seed + k, **erm_kw)
        best, val = res.best_params, res.best_value
        if prev is not None:
            carried = embed(h, k - 1, prev)
            cv = float(objective_values(mc, obj, carried)[0])
            if cv >= val:
                best, val = carried, cv
        out.append((best, val))
        prev = best
    return out


def spm_select(h: Hierarchy, samples, dist_or_U, delta: float, sup_method: str = "exact",
               seed: int = 0, constant: float = 1.0, **erm_kw) -> SpmResult:
    profiles = list(getattr(samples, "profiles", samples))
    U = compute_U(h.levels[-1], dist_or_U) if isinstance(dist_or_U, DistributionSpec) else float(dist_or_U)
    obj = ObjectiveSpec.build(profiles)
    N = len(profiles)
    rows = []
    for k, (params, val) in enumerate(level_maximizers(h, obj, sup_method, seed, **erm_kw), start=1):
        eps = level_epsilon(h, k, U, N, delta, constant)
        d, t = h.dt[k - 1]
        rows.append(LevelRow(k, d, t, h.weight(k), val, eps,
                             level_epsilon_direct(h, k, U, N, delta, constant),
                             val - eps, tuple(float(x) for x in params)))
    lbs = np.array([r.lower_bound for r in rows])
    pick = int(np.argmax(lbs))
    return SpmResult(tuple(rows), pick + 1, rows[pick].params, U)


@dataclass
class UnionBoundReport:
    rows: list[dict]
    violation_rate: dict[float, float]
    smallest_safe_constant: float
    lower_bound_hold_rate: float


def union_bound_check(h: Hierarchy, dist: DistributionSpec, N: int, trials: int, delta: float,
                      seed: int, sup_method: str = "exact",
                      constants: Sequence[float] = (0.25, 0.5, 1.0, 2.0), **erm_kw) -> UnionBoundReport:
    """How often some level's empirical profit strays from its true profit by more than its penalty."""
    U = compute_U(h.levels[-1], dist)
    eps1 = [level_epsilon(h, k, U, N, delta) for k in range(1, h.T + 1)]
    rows = []
    worst_ratio = 0.0
    holds = 0
    for trial, s in enumerate(split_seeds(seed, trials)):
        obj = ObjectiveSpec.build(sample_profiles(dist, N, s))
        for k, (params, val) in enumerate(level_maximizers(h, obj, sup_method, s, **erm_kw), start=1):
            true = expected_profit(dist, h.levels[k - 1].with_params(params))
            gap = abs(val - true)
            ratio = gap / eps1[k - 1] if eps1[k - 1] > 0 else (math.inf if gap > 0 else 0.0)
            worst_ratio = max(worst_ratio, ratio)
            holds += val - eps1[k - 1] <= true + 1e-12
            rows.append({"trial": trial, "seed": s, "level": k, "empirical": val, "true": true,
                         "gap": gap, "epsilon": eps1[k - 1]})
    by_trial: dict[int, float] = {}
    for r in rows:
        q = r["gap"] / r["epsilon"] if r["epsilon"] > 0 else (math.inf if r["gap"] > 0 else 0.0)
        by_trial[r["trial"]] = max(by_trial.get(r["trial"], 0.0), q)
    rates = {c: float(np.mean([q > c for q in by_trial.values()])) for c in constants}
    return UnionBoundReport(rows, rates, worst_ratio, holds / len(rows))


def two_group_instance(high: float = 10.0, low: float = 4.0, p_high: float = 0.5):
    """Four buyers, one item: buyers 0-1 value it at ``high`` or 0 together, buyers 2-3 at ``low``.

    Pricing the two groups separately earns ``p_high * high + (1 - p_high) * low``;
    a single price earns at most ``max(p_high * high, low)``.
    """
    from .valuations import Valuation, ValuationProfile

    def prof(a):
        return ValuationProfile(tuple(Valuation.additive([x]) for x in (a, a, low, low)))

    dist = DistributionSpec(((prof(high), p_high), (prof(0.0), 1.0 - p_high)))
    partitions = [(0, 0, 0, 0), (0, 0, 1, 1), (0, 0, 1, 2), (0, 1, 2, 3)]
    return dist, Hierarchy.group_pricing(partitions, m=1)
