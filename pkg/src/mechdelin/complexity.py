"""Generalization bounds, empirical Rademacher complexity and shattering checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .erm import ObjectiveSpec, erm_exact_lowdim, run_erm
from .errors import DomainError, ResourceError
from .mechanisms import (
    TIE_TOL,
    MechanismClass,
    evaluate_batch,
    max_profit_MP,
    mp_kind_for,
)
from .partition import class_t, pdim_upper_bound
from .valuations import (
    DistributionSpec,
    ValuationProfile,
    expected_profit,
    sample_profiles,
    split_seeds,
)


@dataclass(frozen=True)
class BoundInputs:
    U: float
    d: int
    t: int
    N: int
    delta: float
    constant: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.N < 1:
            raise DomainError("N must be at least 1")
        if self.U < 0:
            raise DomainError("U must be non-negative")


@dataclass(frozen=True)
class OutlierInputs:
    a: float
    b: float
    bound: BoundInputs
    log_base: float = 2.0

    def __post_init__(self):
        if not 0 <= self.b <= 1:
            raise DomainError("b must lie in [0, 1]")
        if self.a > self.bound.U + 1e-12:
            raise DomainError("a cannot exceed U")


@dataclass(frozen=True)
class RademacherEstimate:
    mean: float
    stderr: float
    draws: int
    sup_method: str
    sups: tuple[float, ...] = ()


def generalization_epsilon(inp: BoundInputs) -> float:
    pdim = pdim_upper_bound(inp.d, inp.t)
    return inp.constant * (inp.U * math.sqrt(pdim / inp.N)
                           + inp.U * math.sqrt(math.log(1.0 / inp.delta) / inp.N))


def pdim2erad_bound(U: float, d: int, t: int, N: int, constant: float = 1.0) -> float:
    return constant * U * math.sqrt(pdim_upper_bound(d, t) / N)


def decomposable_bound(parts: Sequence[tuple[float, int, int]], N: int, constant: float = 1.0) -> float:
    """Sum of per-part Rademacher bounds for a class whose profit splits into parts."""
    if not parts:
        raise DomainError("need at least one part")
    return constant * sum(U * math.sqrt(pdim_upper_bound(d, t) / N) for U, d, t in parts)


def outlier_bound(inp: OutlierInputs) -> float:
    b = inp.bound
    pdim = pdim_upper_bound(b.d, b.t)
    tail = math.log(1.0 / b.delta, inp.log_base) / b.N ** 3
    return b.constant * math.sqrt(pdim / b.N * (inp.a ** 2 + b.U ** 2 * (inp.b + math.sqrt(tail))))


def quantile_a(mp_values: Sequence[float], b: float, from_top: bool = True) -> float:
    """Outlier threshold: the ``floor(b N)``-th largest value.

    With ``from_top=False`` the index counts from the smallest value instead.
    """
    if not 0 < b <= 1:
        raise DomainError("b must lie in (0, 1)")
    vals = sorted(float(x) for x in mp_values)
    i = math.floor(b * len(vals))
    if i < 1:
        raise DomainError(f"b={b} is too small for N={len(vals)} (floor(bN) = 0)")
    return vals[-i] if from_top else vals[i - 1]


def _single_profile_max(mclass: MechanismClass, profile: ValuationProfile, seed: int = 0) -> float:
    obj = ObjectiveSpec.build([profile])
    try:
        return erm_exact_lowdim(mclass, obj).best_value
    except (DomainError, ResourceError):
        return run_erm(mclass, obj, "random", seed=seed, draws=4000).best_value


def mp_value(mclass: MechanismClass, profile: ValuationProfile) -> float:
    """Closed-form ceiling when one applies, else the single-profile empirical maximum."""
    kind = mp_kind_for(mclass)
    if kind is not None:
        try:
            return max_profit_MP(kind, profile, mclass.cost, mclass.kappa)
        except DomainError:
            pass
    return _single_profile_max(mclass, profile)


def compute_U(mclass: MechanismClass, dist: DistributionSpec) -> float:
    return max(mp_value(mclass, prof) for prof in dist.profiles)


def empirical_rademacher(mclass: MechanismClass, samples, sigma_draws: int, seed: int,
                         sup_oracle: str = "exact", **erm_kw) -> RademacherEstimate:
    """Average over sign draws of the best signed empirical profit."""
    profiles = list(getattr(samples, "profiles", samples))
    N = len(profiles)
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(sigma_draws, N))
    sups = []
    for sigma in signs:
        obj = ObjectiveSpec.build(profiles, sigma / N)
        sups.append(run_erm(mclass, obj, sup_oracle, seed=seed, **erm_kw).best_value)
    sups = np.array(sups)
    se = float(sups.std(ddof=1) / math.sqrt(len(sups))) if len(sups) > 1 else 0.0
    return RademacherEstimate(float(sups.mean()), se, sigma_draws, sup_oracle, tuple(sups))


# ---------------------------------------------------------------------------
# decomposition over items

DECOMPOSABLE = ("item_pricing", "second_price_reserves", "item_lottery_menu")


def _candidate_params(mclass: MechanismClass, item_values: list[set[float]]) -> np.ndarray:
    """Per-coordinate candidates: support values for prices, {0, 1} for probabilities."""
    axes = []
    for k in range(mclass.dim):
        if mclass.kind == "item_lottery_menu":
            item = k // (2 * mclass.ell)
            axes.append([0.0, 1.0] if k % 2 == 0 else sorted(item_values[item] | {0.0}))
        else:
            axes.append(sorted(item_values[k % mclass.m] | {0.0}))
    size = math.prod(len(a) for a in axes)
    if size > 2_000_000:
        raise ResourceError(f"{size} candidate parameter vectors exceed the brute-force limit")
    return np.array(list(itertools.product(*axes)))


def _brute_sup(mclass: MechanismClass, profiles: list[ValuationProfile], values) -> float:
    P = _candidate_params(mclass, values)
    return max(float(evaluate_batch(mclass, prof, P).profit.max()) for prof in profiles)


@dataclass(frozen=True)
class DecompositionCheck:
    U: float
    sum_Ui: float
    per_item: tuple[float, ...]
    equal: bool


def verify_sup_decomposition(mclass: MechanismClass, dist: DistributionSpec) -> DecompositionCheck:
    """Compare the best profit over the product support with the sum of per-item bests."""
    if mclass.kind not in DECOMPOSABLE:
        raise DomainError(f"{mclass.kind} does not decompose over items")
    if mclass.cost.kind == "general":
        raise DomainError("decomposition needs zero or additive cost")
    if not dist.item_independent:
        raise DomainError("decomposition needs an item-independent distribution")
    margs = dist.marginals
    values = [{x for vals, _ in mg for x in vals} for mg in margs]
    U = _brute_sup(mclass, dist.profiles, values)
    per_item = []
    for i, mg in enumerate(margs):
        sub = mclass.with_(m=1, cost=mclass.cost.restrict(i), caps=None, boosted=())
        sub_dist = DistributionSpec.product([mg])
        per_item.append(_brute_sup(sub, sub_dist.profiles, [values[i]]))
    total = float(sum(per_item))
    return DecompositionCheck(U, total, tuple(per_item), abs(U - total) <= 1e-9)


# ---------------------------------------------------------------------------
# shattering


@dataclass(frozen=True)
class ShatterResult:
    shattered: bool
    realized_labelings: int
    total_labelings: int
    realizing_params: dict = field(default_factory=dict, compare=False)


def labeling_of(mclass: MechanismClass, profiles, witnesses, params) -> tuple[bool, ...]:
    """In-set iff profit reaches the sample's witness."""
    return tuple(float(evaluate_batch(mclass, prof, np.asarray(params)[None, :]).profit[0])
                 >= z - TIE_TOL for prof, z in zip(profiles, witnesses))


def shattering_check(mclass: MechanismClass, profiles: Sequence[ValuationProfile],
                     witnesses: Sequence[float], params_list=None, sup_method: str = "random",
                     seed: int = 0, **erm_kw) -> ShatterResult:
    """Count the labelings of the samples realized by the class.

    With ``params_list`` only those parameter vectors are tried; otherwise each
    labeling gets its own search maximizing profit on the in-set samples minus
    profit on the rest.
    """
    N = len(profiles)
    if N > 20:
        raise ResourceError("shattering checks enumerate 2^N labelings; N must be at most 20")
    if len(witnesses) != N:
        raise DomainError("need one witness per sample")
    total = 2 ** N
    if N == 0:
        return ShatterResult(True, 1, 1)
    found: dict[tuple[bool, ...], tuple[float, ...]] = {}
    if params_list is not None:
        P = np.atleast_2d(np.asarray(params_list, dtype=float))
        profits = np.stack([evaluate_batch(mclass, prof, P).profit for prof in profiles], axis=1)
        labels = profits >= np.asarray(witnesses)[None, :] - TIE_TOL
        for row, lab in zip(P, labels):
            found.setdefault(tuple(bool(x) for x in lab), tuple(row))
    else:
        for target in itertools.product((True, False), repeat=N):
            if target in found:
                continue
            w = [1.0 if x else -1.0 for x in target]
            res = run_erm(mclass, ObjectiveSpec.build(profiles, w), sup_method, seed=seed, **erm_kw)
            lab = labeling_of(mclass, profiles, witnesses, res.best_params)
            found.setdefault(lab, tuple(res.best_params))
    return ShatterResult(len(found) == total, len(found), total, found)


# ---------------------------------------------------------------------------
# generalization gap experiments


@dataclass
class GapReport:
    rows: list[dict]
    max_gap: float
    mean_gap: float
    epsilon: dict[float, float]
    frac_within: dict[float, float]
    U: float
    d: int
    t: int


def gap_experiment(mclass: MechanismClass, dist: DistributionSpec, N: int, trials: int, seed: int,
                   sup_method: str = "exact", delta: float = 0.05,
                   constants: Sequence[float] = (0.25, 0.5, 1.0), **erm_kw) -> GapReport:
    """Empirical-vs-true profit gap of the empirical maximizer across independent samples."""
    U = compute_U(mclass, dist)
    d = mclass.dim
    t = max(class_t(mclass, prof) for prof in dist.profiles)
    eps = {c: generalization_epsilon(BoundInputs(U, d, t, N, delta, c)) for c in constants}
    rows = []
    for trial, s in enumerate(split_seeds(seed, trials)):
        sample = sample_profiles(dist, N, s)
        obj = ObjectiveSpec.build(sample)
        res = run_erm(mclass, obj, sup_method, seed=s, **erm_kw)
        mech = mclass.with_params(res.best_params)
        true = expected_profit(dist, mech)
        rows.append({"trial": trial, "seed": s, "N": N, "empirical": res.best_value,
                     "true": true, "gap": abs(res.best_value - true)})
    gaps = np.array([r["gap"] for r in rows])
    frac = {c: float(np.mean(gaps <= e)) for c, e in eps.items()}
    return GapReport(rows, float(gaps.max()), float(gaps.mean()), eps, frac, U, d, t)

