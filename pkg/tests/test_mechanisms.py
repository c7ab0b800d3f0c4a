import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mechdelin import (
    CostFunction,
    DomainError,
    MechanismClass,
    ResourceError,
    Valuation,
    ValuationProfile,
    cost,
    evaluate_batch,
    profit,
    value,
    vcg,
)
from mechdelin.mechanisms import (
    max_profit_MP,
    mp_kind_for,
    profit_lottery_relaxed,
    relaxed_expectation,
    relaxed_profit_draws,
)
from mechdelin.valuations import random_monotone_table, random_profile, random_unit_curve

ZERO1 = CostFunction.zero(1)
TARIFF_V = ValuationProfile((Valuation.from_units([6, 9, 11, 12]),))


def additive(*rows):
    return ValuationProfile(tuple(Valuation.additive(r) for r in rows))


def tariff(kappa=4, ell=1, cost=None):
    return MechanismClass("two_part_tariff_menu", caps=(kappa,), ell=ell, cost=cost or ZERO1)


# ---------------------------------------------------------------------------
# independent oracle: affine maximizer by enumeration over winner-index allocations


def ama_oracle(profile, weights, boost, cost_fn, m):
    """``boost(a)`` adds to allocation ``a`` (tuple of winner ids, 0 = unsold)."""
    n = profile.n
    allocs = list(itertools.product(range(n + 1), repeat=m))

    def bundles(a):
        return [tuple(int(w == j + 1) for w in a) for j in range(n)]

    def welfare(a, skip=None):
        qs = bundles(a)
        return (sum(weights[j] * value(profile.buyers[j], q) for j, q in enumerate(qs) if j != skip)
                + boost(a) - sum(cost_fn.of(q) for q in qs))

    best = max(welfare(a) for a in allocs)
    star = next(a for a in allocs if welfare(a) >= best - 1e-9)
    pays = [(max(welfare(a, j) for a in allocs) - welfare(star, j)) / weights[j] for j in range(n)]
    return star, pays, sum(cost_fn.of(q) for q in bundles(star))


class TestTwoPartTariff:
    def test_buys_two_units(self):
        out = profit(tariff().with_params([3, 2.5]), TARIFF_V)
        assert out.allocation == ((2,),)
        assert out.profit == 8

    def test_prohibitive_prices(self):
        out = profit(tariff().with_params([20, 20]), TARIFF_V)
        assert out.allocation == ((0,),) and out.profit == 0

    def test_free_units(self):
        out = profit(tariff().with_params([0, 0]), TARIFF_V)
        assert out.allocation == ((4,),) and out.profit == 0

    def test_menu_picks_best_entry(self):
        # entry 2 leaves more surplus for the 1-unit buyer
        v = ValuationProfile((Valuation.from_units([5, 6]),))
        out = profit(tariff(2, ell=2).with_params([4, 0.5, 0, 3]), v)
        assert out.allocation == ((1,),) and out.profit == pytest.approx(3)

    def test_wrong_dimension(self):
        with pytest.raises(DomainError):
            tariff().with_params([1, 2, 3])


class TestItemPricing:
    def test_additive_buyer_buys_items_priced_below_value(self):
        mc = MechanismClass("item_pricing", m=3, cost=CostFunction.zero(3))
        out = profit(mc.with_params([2, 0, 2]), additive([3, 3, 3]))
        assert out.allocation == ((1, 1, 1),)
        assert out.payments == (4,) and out.profit == 4

    def test_prices_above_values(self):
        mc = MechanismClass("item_pricing", m=3, cost=CostFunction.zero(3))
        assert profit(mc.with_params([9, 9, 9]), additive([3, 3, 3])).profit == 0

    def test_unit_demand_sequential(self):
        prof = ValuationProfile((Valuation.unit_demand([5, 1]), Valuation.unit_demand([4, 3])))
        mc = MechanismClass("item_pricing", n=2, m=2, order=(0, 1), cost=CostFunction.zero(2))
        out = profit(mc.with_params([3, 2]), prof)
        assert out.allocation == ((1, 0), (0, 1))
        assert out.profit == 5


class TestNonlinear:
    caps = (1, 1)

    def _buyer(self, rng):
        return Valuation.general(random_monotone_table(rng, self.caps, 5.0), self.caps)

    def test_free_bundles_cost_only(self, rng):
        c = CostFunction.general(random_monotone_table(rng, self.caps, 2.0), self.caps)
        prof = ValuationProfile((self._buyer(rng), self._buyer(rng)))
        mc = MechanismClass("nonlinear_pricing", n=2, m=2, caps=self.caps, cost=c)
        out = profit(mc.with_params(np.zeros(mc.dim)), prof)
        assert out.allocation == ((1, 1), (1, 1))
        assert out.profit == pytest.approx(-2 * c.of((1, 1)))

    def test_full_surplus_extraction(self, rng):
        v = self._buyer(rng)
        mc = MechanismClass("nonlinear_pricing", m=2, caps=self.caps, cost=CostFunction.zero(2))
        lattice = [(0, 0), (0, 1), (1, 0), (1, 1)]
        out = profit(mc.with_params([value(v, q) for q in lattice]), ValuationProfile((v,)))
        assert out.profit == pytest.approx(max(value(v, q) for q in lattice))

    def test_decomposable_identity(self, rng):
        caps = (2, 1)
        v = Valuation.general(random_monotone_table(rng, caps, 6.0), caps)
        prof = ValuationProfile((v,))
        dec = MechanismClass("nonlinear_pricing_decomposable", m=2, caps=caps, cost=CostFunction.zero(2))
        full = MechanismClass("nonlinear_pricing", m=2, caps=caps, cost=CostFunction.zero(2))
        lattice = list(itertools.product(range(3), range(2)))
        a = profit(dec.with_params([0, 1, 2, 0, 1]), prof)
        b = profit(full.with_params([sum(q) for q in lattice]), prof)
        assert a == b


class TestSecondPrice:
    mc = MechanismClass("second_price_reserves", n=2, m=1)

    @pytest.mark.parametrize("reserve, paid", [(4, 4), (6, 0), (2, 3)])
    def test_reserve_cases(self, reserve, paid):
        out = profit(self.mc.with_params([reserve]), additive([5], [3]))
        assert out.profit == paid
        assert out.allocation == (((1,), (0,)) if paid else ((0,), (0,)))

    def test_needs_additive_buyers(self):
        prof = ValuationProfile((Valuation.unit_demand([5]), Valuation.unit_demand([3])))
        with pytest.raises(DomainError):
            profit(self.mc.with_params([1]), prof)


class TestLottery:
    mc = MechanismClass("lottery_menu", m=2, cost=CostFunction.zero(2))

    @pytest.mark.parametrize("price, earned", [(2.9, 2.9), (3.1, 0.0), (3.0, 3.0)])
    def test_single_lottery(self, price, earned):
        out = profit(self.mc.with_params([0.5, 0.5, price]), additive([4, 2]))
        assert out.profit == pytest.approx(earned)

    def test_probability_range(self):
        with pytest.raises(DomainError):
            self.mc.with_params([1.5, 0.5, 1.0])

    def test_relaxed_all_ones(self):
        mech = MechanismClass("lottery_menu", m=2, cost=CostFunction.additive([1, 1])).with_params([0.5, 0.5, 2])
        assert profit_lottery_relaxed(mech, additive([4, 2]), [1, 1]) == 2

    def test_relaxed_one_item_drawn(self):
        mech = MechanismClass("lottery_menu", m=2, cost=CostFunction.additive([1, 1])).with_params([0.5, 0.5, 2])
        assert profit_lottery_relaxed(mech, additive([4, 2]), [0.2, 0.9]) == pytest.approx(2 - 1)

    def test_grid_average_matches_closed_form(self, rng):
        c = CostFunction.general(random_monotone_table(rng, (1, 1), 2.0), (1, 1))
        mech = MechanismClass("lottery_menu", m=2, cost=c).with_params([0.5, 0.25, 1.0])
        prof = additive([4, 2])
        K = 400
        g = (np.arange(K) + 0.5) / K
        Z = np.array(list(itertools.product(g, g)))
        assert relaxed_profit_draws(mech, prof, Z).mean() == pytest.approx(profit(mech, prof).profit, abs=1e-6)


class TestAuctions:
    def test_unit_weights_zero_boost_is_second_price(self):
        mc = MechanismClass("ama", n=2, m=1)
        out = profit(mc.with_params([1, 1, 0, 0, 0]), additive([5], [3]))
        assert out.allocation == ((1,), (0,))
        assert out.payments == (3, 0) and out.profit == 3

    def test_boosting_empty_allocation(self):
        mc = MechanismClass("lambda_auction", n=2, m=1, boosted=((0,),))
        out = profit(mc.with_params([100]), additive([5], [3]))
        assert out.allocation == ((0,), (0,))
        assert out.payments == (0, 0) and out.profit == 0

    def test_vvca_zero_boosts_is_ama(self, rng):
        prof = random_profile(rng, 3, 2, "general", caps=(1, 1))
        w = rng.uniform(0.5, 2, 3)
        ama = MechanismClass("ama", n=3, m=2, cost=CostFunction.zero(2))
        vv = MechanismClass("vvca", n=3, m=2, cost=CostFunction.zero(2))
        a = profit(ama.with_params(np.concatenate([w, np.zeros(ama.n_allocations)])), prof)
        b = profit(vv.with_params(np.concatenate([w, np.zeros(3 * 4)])), prof)
        assert a.allocation == b.allocation
        np.testing.assert_allclose(a.payments, b.payments, atol=1e-12)

    def test_mbarp_reserve_matches_second_price(self):
        out = profit(MechanismClass("mbarp", n=2, m=1).with_params([4, 0]), additive([5], [3]))
        assert out.allocation == ((1,), (0,)) and out.profit == 4

    def test_mbarp_large_bundle_boost(self):
        prof = additive([3, 2])
        r, gamma = [1.0, 1.5], 50.0
        out = profit(MechanismClass("mbarp", n=1, m=2, cost=CostFunction.zero(2)).with_params(r + [gamma]), prof)
        star, pays, _ = ama_oracle(prof, [1.0], lambda a: sum(r[i] for i, w in enumerate(a) if w == 0)
                                   + gamma * (a == (1, 1)), CostFunction.zero(2), 2)
        assert out.allocation == ((1, 1),) and star == (1, 1)
        assert out.payments == pytest.approx(pays)

    def test_mbarp_zero_reserves_is_vcg(self, rng):
        prof = random_profile(rng, 2, 2, "general", caps=(1, 1))
        out = profit(MechanismClass("mbarp", n=2, m=2, cost=CostFunction.zero(2)).with_params([0, 0, 0]), prof)
        ref = vcg(prof)
        assert out.allocation == ref.allocation
        assert out.payments == pytest.approx(ref.payments, abs=1e-12)

    def test_enumeration_limit(self):
        mc = MechanismClass("ama", n=3, m=3, cost=CostFunction.zero(3), enum_limit=10)
        with pytest.raises(ResourceError):
            evaluate_batch(mc, additive([1, 1, 1], [1, 1, 1], [1, 1, 1]), mc.null_params())

    def test_weights_positive(self):
        with pytest.raises(DomainError):
            MechanismClass("ama", n=2, m=1).with_params([0, 1, 0, 0, 0])


class TestMaxProfit:
    def test_tariff(self):
        assert max_profit_MP("two_part_tariff", TARIFF_V, caps=(4,)) == 12

    def test_lottery_additive_cost(self):
        assert max_profit_MP("lottery_menu_additive_cost", additive([4, 2]), CostFunction.additive([5, 1])) == 2

    def test_zero_values(self):
        assert max_profit_MP("item_pricing_non_anonymous_additive", additive([0, 0], [0, 0])) == 0

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            max_profit_MP("mystery", TARIFF_V)


# ---------------------------------------------------------------------------
# properties


@given(st.integers(0, 2**31))
def test_profit_is_payments_minus_cost(seed):
    rng = np.random.default_rng(seed)
    caps = (1, 1)
    c = CostFunction.general(random_monotone_table(rng, caps, 2.0), caps)
    prof = random_profile(rng, 2, 2, "general", caps=caps)
    for mc in (MechanismClass("item_pricing", n=2, m=2, anonymity="non_anonymous", cost=c),
               MechanismClass("nonlinear_pricing", n=2, m=2, caps=caps, cost=c),
               MechanismClass("mbarp", n=2, m=2, cost=c)):
        out = profit(mc.with_params(rng.uniform(0, 6, mc.dim)), prof)
        assert out.cost == pytest.approx(cost(c, out.allocation))
        assert out.profit == pytest.approx(sum(out.payments) - cost(c, out.allocation))


@given(st.integers(0, 2**31), st.sampled_from(["additive", "unit_demand", "general"]))
def test_item_pricing_buyers_are_rational(seed, kind):
    rng = np.random.default_rng(seed)
    n, m = 3, 2
    prof = random_profile(rng, n, m, kind, caps=(1, 1))
    order = tuple(int(j) for j in rng.permutation(n))
    mc = MechanismClass("item_pricing", n=n, m=m, anonymity="non_anonymous", order=order,
                        cost=CostFunction.zero(m))
    prices = rng.uniform(0, 8, mc.dim)
    out = profit(mc.with_params(prices), prof)
    left = [1] * m
    for j in order:
        p = prices[j * m:(j + 1) * m]
        got = out.allocation[j]
        u = value(prof.buyers[j], got) - float(np.dot(p, got))
        assert u >= -1e-9
        for q in itertools.product(*[range(k + 1) for k in left]):
            assert u >= value(prof.buyers[j], q) - float(np.dot(p, q)) - 1e-9
        left = [a - b for a, b in zip(left, got)]


@given(st.integers(0, 2**31))
def test_tariff_and_lottery_buyers_are_rational(seed):
    rng = np.random.default_rng(seed)
    v = random_unit_curve(rng, 3, 6.0)
    P = rng.uniform(0, 4, 4)
    out = profit(tariff(3, ell=2).with_params(P), ValuationProfile((v,)))
    t = out.allocation[0][0]
    options = [0.0] + [value(v, (k,)) - P[2 * e] - P[2 * e + 1] * k for k in (1, 2, 3) for e in (0, 1)]
    got = 0.0 if t == 0 else value(v, (t,)) - out.payments[0]
    assert got >= max(options) - 1e-9

    vals = rng.uniform(0, 5, 3)
    menu = np.column_stack([rng.uniform(0, 1, (3, 3)), rng.uniform(0, 4, 3)])
    mc = MechanismClass("lottery_menu", m=3, ell=3, cost=CostFunction.zero(3))
    out = profit(mc.with_params(menu.ravel()), additive(vals))
    chosen = np.array(out.allocation[0])
    got = float(chosen @ vals) - out.payments[0]
    assert got >= max([0.0] + [float(row[:3] @ vals - row[3]) for row in menu]) - 1e-9


@given(st.integers(0, 2**31))
def test_seller_favorable_ties_are_limits(seed):
    rng = np.random.default_rng(seed)
    v = random_unit_curve(rng, 3, 6.0)
    unit = float(rng.uniform(0, 1))
    t = int(rng.integers(1, 4))
    fee = value(v, (t,)) - unit * t  # buyer indifferent between t units and nothing at this fee
    if fee < 0:
        return
    mc = tariff(3)
    prof = ValuationProfile((v,))
    at = profit(mc.with_params([fee, unit]), prof).profit
    eps = 1e-7
    below = profit(mc.with_params([fee - eps, unit]), prof).profit
    assert abs(at - below) <= 10 * eps


@given(st.integers(0, 2**31), st.integers(1, 4))
def test_lottery_closed_form_equals_relaxed_expectation(seed, m):
    rng = np.random.default_rng(seed)
    caps = (1,) * m
    c = CostFunction.general(random_monotone_table(rng, caps, 2.0), caps)
    kind = "unit_demand" if seed % 2 else "additive"
    prof = random_profile(rng, 1, m, kind, scale=4.0)
    phi = rng.uniform(0, 1, (2, m))
    if kind == "unit_demand":
        phi /= phi.sum(axis=1, keepdims=True) * 1.01
    menu = np.column_stack([phi, rng.uniform(0, 1.5, 2)])
    mech = MechanismClass("lottery_menu", m=m, ell=2, cost=c).with_params(menu.ravel())
    assert abs(profit(mech, prof).profit - relaxed_expectation(mech, prof)) <= 1e-9


@given(st.integers(0, 2**31), st.integers(2, 5))
def test_ama_vcg_second_price_agree(seed, n):
    rng = np.random.default_rng(seed)
    prof = additive(*[[b] for b in rng.uniform(0.1, 10, n)])
    ama = MechanismClass("ama", n=n, m=1)
    a = profit(ama.with_params(np.concatenate([np.ones(n), np.zeros(n + 1)])), prof)
    b = vcg(prof)
    c = profit(MechanismClass("second_price_reserves", n=n, m=1).with_params([0]), prof)
    assert a.allocation == b.allocation == c.allocation
    np.testing.assert_allclose(a.payments, b.payments, atol=1e-12)
    np.testing.assert_allclose(b.payments, c.payments, atol=1e-12)


@given(st.integers(0, 2**31))
def test_auctions_match_enumeration_oracle(seed):
    rng = np.random.default_rng(seed)
    n, m = 2, 2
    prof = random_profile(rng, n, m, "general", caps=(1, 1))
    c = CostFunction.additive(rng.uniform(0, 1, m))
    w = rng.uniform(0.5, 2, n)
    lam = rng.uniform(0, 3, (n + 1) ** m)
    allocs = list(itertools.product(range(n + 1), repeat=m))
    out = profit(MechanismClass("ama", n=n, m=m, cost=c).with_params(np.concatenate([w, lam])), prof)
    star, pays, spent = ama_oracle(prof, w, lambda a: lam[allocs.index(a)], c, m)
    assert out.allocation == tuple(tuple(int(x == j + 1) for x in star) for j in range(n))
    assert out.payments == pytest.approx(pays, abs=1e-9)
    assert out.cost == pytest.approx(spent)

    r, gamma = rng.uniform(0, 3, m), float(rng.uniform(0, 3))
    out = profit(MechanismClass("mbarp", n=n, m=m, cost=c).with_params(np.append(r, gamma)), prof)
    star, pays, _ = ama_oracle(
        prof, [1.0] * n,
        lambda a: sum(r[i] for i, x in enumerate(a) if x == 0) + gamma * (len(set(a)) == 1 and a[0] > 0),
        c, m)
    assert out.payments == pytest.approx(pays, abs=1e-9)


@pytest.mark.parametrize("build", [
    lambda rng: (tariff(3, ell=2), ValuationProfile((random_unit_curve(rng, 3, 5.0),)), 8.0),
    lambda rng: (MechanismClass("lottery_menu", m=2, ell=2, cost=CostFunction.additive([0.5, 1.0])),
                 random_profile(rng, 1, 2, scale=4.0), 1.0),
    lambda rng: (MechanismClass("item_pricing", n=2, m=2, anonymity="non_anonymous",
                                cost=CostFunction.additive([0.5, 1.0])), random_profile(rng, 2, 2), 10.0),
    lambda rng: (MechanismClass("second_price_reserves", n=3, m=2, anonymity="non_anonymous",
                                cost=CostFunction.additive([0.5, 1.0])), random_profile(rng, 3, 2), 10.0),
])
def test_profit_never_exceeds_ceiling(build):
    rng = np.random.default_rng(3)
    for _ in range(5):
        mc, prof, top = build(rng)
        P = rng.uniform(0, top, (10_000, mc.dim))
        if mc.kind == "lottery_menu":
            P[:, [0, 1, 3, 4]] = rng.uniform(0, 1, (10_000, 4))
            P[:, [2, 5]] *= 8
        ceiling = max_profit_MP(mp_kind_for(mc), prof, mc.cost, mc.kappa)
        assert evaluate_batch(mc, prof, P).profit.max() <= ceiling + 1e-9
