"""Instance generators and the reproducible checks behind every acceptance criterion.

Each ``check_*`` function returns a :class:`CheckResult` with a pass flag,
summary numbers and per-instance rows; the CLI's ``run`` command and the
acceptance tests call the same functions.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .complexity import (
    BoundInputs,
    compute_U,
    gap_experiment,
    generalization_epsilon,
    quantile_a,
    shattering_check,
    verify_sup_decomposition,
)
from .erm import ObjectiveSpec, erm_exact_lowdim, erm_grid, erm_random
from .mechanisms import (
    MechanismClass,
    evaluate_batch,
    max_profit_MP,
    profit,
    relaxed_expectation,
    relaxed_profit_draws,
    vcg,
)
from .partition import (
    Arrangement,
    Hyperplane,
    buck_cell_bound,
    class_t,
    default_box,
    demand_signature,
    enumerate_cells_2d,
    hyperplanes_for,
    overlay,
    polygon_cells,
    sample_cells,
    verify_affine_in_cell,
)
from .spm import Hierarchy, spm_select, two_group_instance, union_bound_check
from .valuations import (
    CostFunction,
    DistributionSpec,
    Valuation,
    ValuationProfile,
    random_monotone_table,
    random_profile,
    random_unit_curve,
    sample_profiles,
    split_seeds,
    value,
)


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    summary: dict
    rows: list[dict] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        bits = ", ".join(f"{k}={_short(v)}" for k, v in self.summary.items())
        flag = f" [flags: {'; '.join(self.flags)}]" if self.flags else ""
        return f"{status} {self.key}: {self.title} ({bits}; {self.seconds:.1f}s){flag}"


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _timed(fn):
    def wrapper(*args, **kw):
        start = time.perf_counter()
        res = fn(*args, **kw)
        res.seconds = time.perf_counter() - start
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------------------
# instances


def tariff_example_profile() -> ValuationProfile:
    return ValuationProfile((Valuation.from_units([6, 9, 11, 12]),))


def tariff_class(kappa: int, ell: int = 1, n: int = 1, anonymity="anonymous", cost=None):
    return MechanismClass("two_part_tariff_menu", n=n, m=1, ell=ell, caps=(kappa,),
                          anonymity=anonymity, cost=cost or CostFunction.zero(1))


def random_tariff_profiles(rng, kappa: int, count: int, scale: float = 3.0, n: int = 1):
    return [ValuationProfile(tuple(random_unit_curve(rng, kappa, scale) for _ in range(n)))
            for _ in range(count)]


def _general_cost(rng, caps, scale=1.0):
    return CostFunction.general(random_monotone_table(rng, caps, scale), caps)


def delineability_instance(name: str, rng):
    """One random small instance per supported class; returns (class, profile, z)."""
    if name == "tariff":
        k = int(rng.integers(1, 5))
        return tariff_class(k), random_tariff_profiles(rng, k, 1, 10.0)[0], None
    if name == "tariff_menu":
        return tariff_class(2, ell=2), random_tariff_profiles(rng, 2, 1, 10.0)[0], None
    if name == "tariff_non_anonymous":
        cost = _general_cost(rng, (2,), 2.0)
        return tariff_class(2, n=2, anonymity="non_anonymous", cost=cost), \
            random_tariff_profiles(rng, 2, 1, 10.0, n=2)[0], None
    if name == "item_additive_anonymous":
        cost = CostFunction.additive(rng.uniform(0, 2, 2).round(3))
        return MechanismClass("item_pricing", n=2, m=2, cost=cost), random_profile(rng, 2, 2), None
    if name == "item_additive_non_anonymous":
        cost = _general_cost(rng, (1, 1), 3.0)
        return MechanismClass("item_pricing", n=2, m=2, anonymity="non_anonymous", cost=cost), \
            random_profile(rng, 2, 2), None
    if name == "item_unit_demand_grouped":
        return MechanismClass("item_pricing", n=3, m=2, anonymity="grouped", groups=(0, 0, 1),
                              order=(2, 0, 1), cost=CostFunction.zero(2)), \
            random_profile(rng, 3, 2, "unit_demand"), None
    if name == "item_general":
        return MechanismClass("item_pricing", n=2, m=2, cost=CostFunction.zero(2)), \
            random_profile(rng, 2, 2, "general", caps=(1, 1)), None
    if name == "nonlinear":
        cost = _general_cost(rng, (1, 1), 3.0)
        return MechanismClass("nonlinear_pricing", n=2, m=2, caps=(1, 1), cost=cost), \
            random_profile(rng, 2, 2, "general", caps=(1, 1)), None
    if name == "nonlinear_decomposable":
        return MechanismClass("nonlinear_pricing_decomposable", n=1, m=2, caps=(2, 1),
                              cost=CostFunction.zero(2)), \
            random_profile(rng, 1, 2, "general", caps=(2, 1)), None
    if name == "second_price":
        cost = CostFunction.additive(rng.uniform(0, 2, 2).round(3))
        return MechanismClass("second_price_reserves", n=3, m=2, anonymity="non_anonymous", cost=cost), \
            random_profile(rng, 3, 2), None
    if name == "lottery_additive_cost":
        cost = CostFunction.additive(rng.uniform(0, 2, 2).round(3))
        return MechanismClass("lottery_menu", m=2, ell=1, cost=cost), random_profile(rng, 1, 2), None
    if name == "lottery_unit_demand":
        cost = CostFunction.additive(rng.uniform(0, 2, 2).round(3))
        return MechanismClass("lottery_menu", m=2, ell=2, cost=cost), \
            random_profile(rng, 1, 2, "unit_demand"), None
    if name == "lottery_general_cost":
        cost = _general_cost(rng, (1, 1), 3.0)
        return MechanismClass("lottery_menu", m=2, ell=2, cost=cost), random_profile(rng, 1, 2), \
            rng.uniform(size=2)
    if name == "item_lottery":
        cost = CostFunction.additive(rng.uniform(0, 2, 2).round(3))
        return MechanismClass("item_lottery_menu", m=2, ell=2, cost=cost), random_profile(rng, 1, 2), None
    if name == "lambda_auction":
        cost = CostFunction.additive(rng.uniform(0, 2, 2).round(3))
        return MechanismClass("lambda_auction", n=2, m=2, boosted=((0, 0), (1, 2), (2, 2)), cost=cost), \
            random_profile(rng, 2, 2), None
    if name == "mbarp":
        return MechanismClass("mbarp", n=2, m=2, cost=CostFunction.zero(2)), \
            random_profile(rng, 2, 2, "general", caps=(1, 1)), None
    raise KeyError(name)


DELINEABILITY_CLASSES = (
    "tariff", "tariff_menu", "tariff_non_anonymous", "item_additive_anonymous",
    "item_additive_non_anonymous", "item_unit_demand_grouped", "item_general", "nonlinear",
    "nonlinear_decomposable", "second_price", "lottery_additive_cost", "lottery_unit_demand",
    "lottery_general_cost", "item_lottery", "lambda_auction", "mbarp",
)


def cells_for(arr: Arrangement, probes: int, seed: int):
    if arr.d == 2:
        return enumerate_cells_2d(arr), "exact_2d"
    return sample_cells(arr, probes, seed), "sampled"


# ---------------------------------------------------------------------------
# acceptance checks


@_timed
def check_tariff_regions() -> CheckResult:
    """Single-tariff arrangement for v = (6, 9, 11, 12), four units."""
    mc, prof = tariff_class(4), tariff_example_profile()
    raw = hyperplanes_for(mc, prof)
    arr = Arrangement(raw, [0, 0], [12, 12])
    cells = enumerate_cells_2d(arr)
    rows, sigs, agree = [], set(), True
    for c in cells:
        t = demand_signature(mc, prof, c.witness)[0][0]
        fee, unit = c.witness
        # independent oracle: strict argmax of utility over units at an interior point
        utils = [0.0] + [value(prof.buyers[0], (q,)) - fee - unit * q for q in range(1, 5)]
        agree &= int(np.argmax(utils)) == t
        sigs.add(t)
        rows.append({"witness": c.witness, "sign_vector": "".join("+" if s > 0 else "-" for s in c.sign_vector),
                     "units": t, "margin": c.margin})
    ok = len(raw) == 10 and sigs == {0, 1, 2, 3, 4} and agree
    return CheckResult("1", "single-tariff regions for v = (6, 9, 11, 12)", ok,
                       {"hyperplanes": len(raw), "distinct_planes": arr.k, "cells": len(cells),
                        "demands": sorted(sigs), "oracle_agrees": agree}, rows)


@_timed
def check_delineability(instances: int = 20, seed: int = 0, probes: int = 200,
                        trials: int = 16) -> CheckResult:
    """Profit is affine on every found cell, for every class."""
    rows, ok = [], True
    seeds = split_seeds(seed, len(DELINEABILITY_CLASSES))
    for name, s in zip(DELINEABILITY_CLASSES, seeds):
        rng = np.random.default_rng(s)
        for inst in range(instances):
            mc, prof, z = delineability_instance(name, rng)
            lo, hi = default_box(mc, [prof])
            raw = hyperplanes_for(mc, prof, z)
            arr = Arrangement(raw, lo, hi)
            cells, how = cells_for(arr, probes, s + inst)
            worst, bad = 0.0, 0
            for ci, c in enumerate(cells):
                chk = verify_affine_in_cell(mc, prof, c, arr, trials, seed=ci, z=z)
                worst = max(worst, chk.max_residual)
                bad += not chk.affine
            t = class_t(mc, prof)
            if z is not None:
                t += mc.blocks * mc.ell * mc.m
            within_t = arr.k <= t
            ok &= bad == 0 and within_t
            rows.append({"class": name, "instance": inst, "d": mc.dim, "planes": arr.k, "t": t,
                         "cells": len(cells), "method": how, "non_affine": bad, "max_residual": worst})
    return CheckResult("2", "delineability: affine profit on every cell", ok,
                       {"classes": len(DELINEABILITY_CLASSES), "instances": len(rows),
                        "cells": sum(r["cells"] for r in rows),
                        "max_residual": max(r["max_residual"] for r in rows)}, rows)


@_timed
def check_lottery_expectation(seed: int = 0, draws: int = 100_000, per_m: int = 5) -> CheckResult:
    """Closed-form lottery profit vs the exact and sampled mean of the relaxed profit."""
    rows, ok = [], True
    rng = np.random.default_rng(seed)
    for m in (1, 2, 3, 4):
        for inst in range(per_m):
            caps = (1,) * m
            cost = CostFunction.general(random_monotone_table(rng, caps, 2.0), caps)
            kind = "unit_demand" if inst % 3 == 2 else "additive"
            prof = random_profile(rng, 1, m, kind, scale=3.0)
            ell = int(rng.integers(1, 4))
            params = []
            for _ in range(ell):
                phi = rng.uniform(0, 1, m)
                if kind == "unit_demand":
                    phi /= max(1.0, phi.sum() * 1.05)
                price = float(phi @ np.array(prof.buyers[0].item_values)) * rng.uniform(0.3, 1.0)
                params += list(phi) + [price]
            mech = MechanismClass("lottery_menu", m=m, ell=ell, cost=cost).with_params(params)
            closed = profit(mech, prof).profit
            exact = relaxed_expectation(mech, prof)
            Z = np.random.default_rng(seed * 1000 + 10 * m + inst).uniform(size=(draws, m))
            sim = relaxed_profit_draws(mech, prof, Z)
            mean, se = float(sim.mean()), float(sim.std(ddof=1) / math.sqrt(draws))
            exact_ok = abs(closed - exact) <= 1e-9
            mc_ok = abs(mean - closed) <= 4 * se if se > 0 else abs(mean - closed) <= 1e-12
            ok &= exact_ok and mc_ok
            rows.append({"m": m, "instance": inst, "buyer": kind, "ell": ell, "closed_form": closed,
                         "exact_sum": exact, "mc_mean": mean, "mc_stderr": se,
                         "exact_ok": exact_ok, "mc_ok": mc_ok})
    return CheckResult("3", "lottery profit equals the mean relaxed profit", ok,
                       {"instances": len(rows),
                        "max_exact_diff": max(abs(r["closed_form"] - r["exact_sum"]) for r in rows),
                        "max_z": max(abs(r["mc_mean"] - r["closed_form"]) / r["mc_stderr"]
                                     for r in rows if r["mc_stderr"] > 0)}, rows)


def anonymous_lower_bound(m: int):
    """Samples where the single buyer values only item i (at 3), with prices in {0, 2}."""
    profiles = [ValuationProfile((Valuation.additive([3.0 if k == i else 0.0 for k in range(m)]),))
                for i in range(m)]
    params = [[2.0 if bit else 0.0 for bit in T] for T in itertools.product((0, 1), repeat=m)]
    return MechanismClass("item_pricing", m=m, cost=CostFunction.zero(m)), profiles, params


def non_anonymous_lower_bound(n: int, m: int):
    """Samples where buyer j alone values item i (at 3); per-buyer prices in {0, 2}."""
    pairs = [(i, j) for i in range(m) for j in range(n)]
    profiles = [ValuationProfile(tuple(Valuation.additive([3.0 if (k == i and b == j) else 0.0
                                                            for k in range(m)]) for b in range(n)))
                for i, j in pairs]
    params = []
    for T in itertools.product((0, 1), repeat=len(pairs)):
        p = np.zeros(n * m)
        for bit, (i, j) in zip(T, pairs):
            p[j * m + i] = 2.0 if bit else 0.0
        params.append(p)
    mc = MechanismClass("item_pricing", n=n, m=m, anonymity="non_anonymous", cost=CostFunction.zero(m))
    return mc, profiles, params


@_timed
def check_lower_bound() -> CheckResult:
    rows, ok = [], True
    cases = [("anonymous", m, anonymous_lower_bound(m)) for m in (2, 3, 4, 5)]
    cases += [("non_anonymous", (n, m), non_anonymous_lower_bound(n, m)) for n, m in ((2, 2), (2, 3))]
    for label, size, (mc, profiles, params) in cases:
        res = shattering_check(mc, profiles, [1.0] * len(profiles), params)
        ok &= res.shattered
        rows.append({"pricing": label, "size": size, "samples": len(profiles),
                     "realized": res.realized_labelings, "total": res.total_labelings,
                     "shattered": res.shattered})
    return CheckResult("4", "lower-bound sample sets are shattered", ok,
                       {"cases": len(rows), "all_shattered": ok}, rows)


@_timed
def check_erm_exactness(instances: int = 50, seed: int = 0, resolution: float = 0.01,
                        draws: int = 10_000) -> CheckResult:
    rows, ok = [], True
    for inst, s in enumerate(split_seeds(seed, instances)):
        rng = np.random.default_rng(s)
        kappa = int(rng.integers(2, 4))
        N = int(rng.integers(1, 21))
        mc = tariff_class(kappa)
        obj = ObjectiveSpec.build(random_tariff_profiles(rng, kappa, N, 3.0))
        lo, hi = default_box(mc, obj.profiles)
        ex = erm_exact_lowdim(mc, obj, lo, hi)
        gr = erm_grid(mc, obj, resolution, lo, hi)
        rd = erm_random(mc, obj, draws, s, lo, hi)
        good = ex.best_value >= gr.best_value - 1e-9 and ex.best_value >= rd.best_value - 1e-9
        ok &= good
        rows.append({"instance": inst, "kappa": kappa, "N": N, "cells": ex.cells_examined,
                     "exact": ex.best_value, "grid": gr.best_value, "random": rd.best_value, "ok": good})
    return CheckResult("5", "exact 2D ERM dominates grid and random search", ok,
                       {"instances": len(rows),
                        "min_exact_minus_grid": min(r["exact"] - r["grid"] for r in rows),
                        "min_exact_minus_random": min(r["exact"] - r["random"] for r in rows)}, rows)


def generic_lines(k: int, rng, radius: float = 0.01) -> list[Hyperplane]:
    """Lines tangent to a small circle at the box centre: every pair meets inside the box."""
    angles = np.sort(rng.uniform(0, math.pi - 0.2, k))
    return [Hyperplane((math.cos(a), math.sin(a)), radius, f"line {i}") for i, a in enumerate(angles)]


@_timed
def check_overlay_counting(seed: int = 0, instances: int = 30) -> CheckResult:
    rows, ok = [], True
    rng = np.random.default_rng(seed)
    for inst in range(instances):
        kappa = int(rng.integers(1, 5))
        N = int(rng.integers(1, 11))
        mc = tariff_class(kappa)
        profs = random_tariff_profiles(rng, kappa, N, 3.0)
        arr = overlay(mc, profs)
        cells = {c.sign_vector for c in enumerate_cells_2d(arr, keep_thin=True)}
        t = math.comb(kappa + 1, 2)
        bound = buck_cell_bound(2, N * t)
        ok &= len(cells) <= bound
        rows.append({"case": "overlay", "N": N, "t": t, "planes": arr.k, "cells": len(cells),
                     "bound": bound, "ok": len(cells) <= bound})
    for k in range(0, 9):
        arr = Arrangement(generic_lines(k, rng), [-1, -1], [1, 1])
        count = len(polygon_cells(arr))
        expect = 1 + k + math.comb(k, 2)
        ok &= count == expect
        rows.append({"case": "generic", "N": 0, "t": k, "planes": arr.k, "cells": count,
                     "bound": expect, "ok": count == expect})
    return CheckResult("6", "overlay cell counts within d(Nt)^d; generic lines exact", ok,
                       {"overlays": instances, "generic_cases": 9,
                        "max_fill": max(r["cells"] / r["bound"] for r in rows if r["case"] == "overlay")}, rows)


def gap_distribution(seed: int = 0, atoms: int = 6, kappa: int = 3):
    rng = np.random.default_rng(seed)
    profs = random_tariff_profiles(rng, kappa, atoms, 3.0)
    probs = rng.dirichlet(np.ones(atoms))
    probs /= probs.sum()
    return tariff_class(kappa), DistributionSpec(tuple(zip(profs, probs)))


@_timed
def check_gap_envelope(trials: int = 100, seed: int = 0, Ns=(25, 100, 400), delta: float = 0.05) -> CheckResult:
    mc, dist = gap_distribution(seed)
    rows, summary, ok, flags = [], {}, True, []
    means = []
    for N in Ns:
        rep = gap_experiment(mc, dist, N, trials, seed + N, "exact", delta)
        frac = rep.frac_within[1.0]
        ok &= frac >= 0.95
        means.append(rep.mean_gap)
        summary[f"within_eps_N{N}"] = frac
        summary[f"mean_gap_N{N}"] = rep.mean_gap
        for r in rep.rows:
            rows.append({**r, "epsilon": rep.epsilon[1.0]})
    for (a, b), (ma, mb) in zip(zip(Ns, Ns[1:]), zip(means, means[1:])):
        ratio = ma / mb if mb > 0 else math.inf
        summary[f"ratio_{a}_{b}"] = ratio
        if not 1.5 <= ratio <= 2.7:
            flags.append(f"mean-gap ratio {a}->{b} = {ratio:.3g} outside [1.5, 2.7]")
    return CheckResult("7", "generalization gaps within the bound", ok, summary, rows, flags)


def decomposition_instance(k: int, rng):
    kinds = [("item_pricing", "anonymous"), ("item_pricing", "non_anonymous"),
             ("second_price_reserves", "anonymous"), ("second_price_reserves", "non_anonymous"),
             ("item_lottery_menu", "anonymous")]
    kind, anon = kinds[k % len(kinds)]
    m = int(rng.integers(1, 3)) if kind == "item_lottery_menu" else int(rng.integers(1, 4))
    n = 1 if kind == "item_lottery_menu" else int(rng.integers(1, 3))
    if anon == "non_anonymous" and n == 1:
        n = 2
    ell = int(rng.integers(1, 3)) if kind == "item_lottery_menu" else 1
    cost = CostFunction.additive(rng.uniform(0, 1.5, m).round(2))
    mc = MechanismClass(kind, n=n, m=m, ell=ell, anonymity=anon, cost=cost)
    margs = []
    for _ in range(m):
        size = int(rng.integers(2, 4))
        probs = rng.dirichlet(np.ones(size))
        probs /= probs.sum()
        margs.append([(tuple(rng.uniform(0, 5, n).round(2)), float(p)) for p in probs])
    return mc, DistributionSpec.product(margs)


@_timed
def check_product_decomposition(instances: int = 20, seed: int = 0) -> CheckResult:
    rows, ok = [], True
    rng = np.random.default_rng(seed)
    for k in range(instances):
        mc, dist = decomposition_instance(k, rng)
        res = verify_sup_decomposition(mc, dist)
        ok &= res.equal
        rows.append({"instance": k, "kind": mc.kind, "anonymity": mc.anonymity, "n": mc.n, "m": mc.m,
                     "U": res.U, "sum_Ui": res.sum_Ui, "equal": res.equal})
    return CheckResult("8", "best profit splits over independent items", ok,
                       {"instances": len(rows), "max_diff": max(abs(r["U"] - r["sum_Ui"]) for r in rows)}, rows)


def outlier_distribution(seed: int = 0, atoms: int = 40):
    rng = np.random.default_rng(seed)
    profs = random_tariff_profiles(rng, 3, atoms, 3.0)
    # a few rare, very high-value buyers
    for k in range(3):
        profs[k] = ValuationProfile((random_unit_curve(rng, 3, 60.0),))
    probs = rng.dirichlet(np.ones(atoms))
    probs[:3] = 0.004
    probs /= probs.sum()
    mp = np.array([max_profit_MP("two_part_tariff", p, caps=(3,)) for p in profs])
    return DistributionSpec(tuple(zip(profs, probs))), mp


@_timed
def check_outlier_quantile(resamples: int = 200, N: int = 500, seed: int = 0, delta: float = 0.05,
                           bs=(0.05, 0.2)) -> CheckResult:
    dist, mp = outlier_distribution(seed)
    probs = dist.probs
    slack = 5 * math.sqrt(math.log2(1 / delta) / N)
    rows, ok, summary = [], True, {}
    rng = np.random.default_rng(seed)
    for b in bs:
        worst = 0.0
        literal = []
        for r in range(resamples):
            idx = rng.choice(len(probs), size=N, p=probs)
            a = quantile_a(mp[idx], b)
            exceed = float(probs[mp > a].sum())
            lit = float(probs[mp > quantile_a(mp[idx], b, from_top=False)].sum())
            worst = max(worst, exceed)
            literal.append(lit)
            rows.append({"b": b, "resample": r, "a": a, "exceedance": exceed, "ascending_exceedance": lit})
        ok &= worst < b + slack
        summary[f"max_exceedance_b{b}"] = worst
        summary[f"ascending_mean_exceedance_b{b}"] = float(np.mean(literal))
    summary["allowed_excess"] = slack
    return CheckResult("9", "outlier threshold exceedance below b + slack", ok, summary, rows)


def _independent_levels(h: Hierarchy, profiles, U, delta):
    """Per-level lower bounds computed from scratch, without the carried-over maximizers."""
    obj = ObjectiveSpec.build(profiles)
    N = len(profiles)
    best_so_far, out = -math.inf, []
    for k, mc in enumerate(h.levels, start=1):
        best_so_far = max(best_so_far, erm_exact_lowdim(mc, obj).best_value)
        d, t = h.dt[k - 1]
        out.append(best_so_far - generalization_epsilon(BoundInputs(U, d, t, N, delta * h.weight(k))))
    return out


@_timed
def check_spm(seed: int = 0, delta: float = 0.05, trials: int = 100) -> CheckResult:
    rows, ok, summary = [], True, {}
    rng = np.random.default_rng(seed)
    two_dist, two_h = two_group_instance()
    cases = []
    for N in (50, 500, 2000):
        cases.append((f"two_group_N{N}", two_h, two_dist, N, "exact", True))
    mc_t, tariff_dist = gap_distribution(seed + 1, atoms=5, kappa=2)
    cases.append(("menu_length", Hierarchy.menu_length(3, 2), tariff_dist, 200, "auto", False))
    auc_profiles = [random_profile(rng, 2, 1, scale=5.0) for _ in range(4)]
    auc_dist = DistributionSpec.uniform(auc_profiles)
    cases.append(("q_boosted", Hierarchy.q_boosted([[(0,)], [(0,), (1,)]], n=2, m=1), auc_dist, 100, "exact", True))
    for name, h, dist, N, method, independent in cases:
        sample = sample_profiles(dist, N, seed + N)
        res = spm_select(h, sample, dist, delta, method, seed=seed)
        lbs = [r.lower_bound for r in res.levels]
        emp = [r.empirical_max for r in res.levels]
        posthoc = int(np.argmax(lbs)) + 1 == res.selected_level
        monotone = all(b >= a for a, b in zip(emp, emp[1:]))
        indep = True
        if independent:
            ind = _independent_levels(h, sample.profiles, res.U, delta)
            indep = int(np.argmax(np.round(ind, 9))) + 1 == res.selected_level
        ok &= posthoc and monotone and indep
        for r in res.levels:
            rows.append({"hierarchy": name, "level": r.level, "d": r.d, "t": r.t, "weight": r.weight,
                         "empirical_max": r.empirical_max, "epsilon": r.epsilon,
                         "lower_bound": r.lower_bound, "selected": r.level == res.selected_level})
        summary[f"{name}_selected"] = res.selected_level
    rep = union_bound_check(two_h, two_dist, 200, trials, delta, seed)
    summary["violation_rate_c1"] = rep.violation_rate[1.0]
    summary["smallest_safe_constant"] = rep.smallest_safe_constant
    ok &= rep.violation_rate[1.0] <= delta
    return CheckResult("10", "structural profit maximization", ok, summary, rows)


@_timed
def check_reductions(bids: int = 1000, seed: int = 0) -> CheckResult:
    rows, ok = [], True
    rng = np.random.default_rng(seed)
    worst_pay, vvca_same = 0.0, True
    for k in range(bids):
        n = int(rng.integers(2, 5))
        vals = rng.uniform(0, 10, n).round(int(rng.integers(0, 3)))
        prof = ValuationProfile(tuple(Valuation.additive([v]) for v in vals))
        ama = MechanismClass("ama", n=n, m=1)
        a = profit(ama.with_params(np.concatenate([np.ones(n), np.zeros(ama.n_allocations)])), prof)
        v = vcg(prof)
        sp = profit(MechanismClass("second_price_reserves", n=n, m=1).with_params([0.0]), prof)
        diff = max(max(abs(x - y), abs(x - z)) for x, y, z in zip(a.payments, v.payments, sp.payments))
        # with every bid at zero, handing the item out at price 0 is welfare-neutral
        same_alloc = a.allocation == v.allocation and (vals.max() == 0 or a.allocation == sp.allocation)
        worst_pay = max(worst_pay, diff)
        ok &= diff <= 1e-12 and same_alloc
        # VVCA with zero bundle boosts against the unboosted AMA, random weights, one or two items
        m = int(rng.integers(1, 3))
        prof2 = random_profile(rng, n, m, "general", caps=(1,) * m)
        w = rng.uniform(0.5, 2.0, n)
        ama2 = MechanismClass("ama", n=n, m=m, cost=CostFunction.zero(m))
        vv = MechanismClass("vvca", n=n, m=m, cost=CostFunction.zero(m))
        o1 = profit(ama2.with_params(np.concatenate([w, np.zeros(ama2.n_allocations)])), prof2)
        o2 = profit(vv.with_params(np.concatenate([w, np.zeros(n * 2 ** m)])), prof2)
        same = o1.allocation == o2.allocation and max(abs(x - y) for x, y in zip(o1.payments, o2.payments)) <= 1e-12
        vvca_same &= same
        ok &= same
        if k < 50:
            rows.append({"case": k, "n": n, "bids": vals, "ama_payments": a.payments,
                         "vcg_payments": v.payments, "second_price_payments": sp.payments,
                         "vvca_matches": same})
    return CheckResult("11", "AMA = VCG = second price; zero-boost VVCA = AMA", ok,
                       {"cases": bids, "max_payment_diff": worst_pay, "vvca_matches": vvca_same}, rows)


CHECKS = {
    "tariff_regions": check_tariff_regions,
    "delineability": check_delineability,
    "lottery_expectation": check_lottery_expectation,
    "lower_bound": check_lower_bound,
    "erm_exactness": check_erm_exactness,
    "overlay_counting": check_overlay_counting,
    "gap_envelope": check_gap_envelope,
    "product_decomposition": check_product_decomposition,
    "outlier_quantile": check_outlier_quantile,
    "spm": check_spm,
    "reductions": check_reductions,
}
