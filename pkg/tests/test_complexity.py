import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from mechdelin import (
    CostFunction,
    DistributionSpec,
    DomainError,
    MechanismClass,
    ResourceError,
    Valuation,
    ValuationProfile,
)
from mechdelin.complexity import (
    BoundInputs,
    OutlierInputs,
    compute_U,
    decomposable_bound,
    empirical_rademacher,
    gap_experiment,
    generalization_epsilon,
    outlier_bound,
    pdim2erad_bound,
    quantile_a,
    shattering_check,
    verify_sup_decomposition,
)
from mechdelin.erm import ObjectiveSpec, run_erm
from mechdelin.experiments import anonymous_lower_bound, non_anonymous_lower_bound
from mechdelin.valuations import random_unit_curve


def one(v):
    return ValuationProfile((v,))


def tariff(kappa=4):
    return MechanismClass("two_part_tariff_menu", caps=(kappa,), cost=CostFunction.zero(1))


def tariff_dist(rng, atoms=4, kappa=2):
    profs = [one(random_unit_curve(rng, kappa, 3.0)) for _ in range(atoms)]
    return DistributionSpec.uniform(profs)


class TestU:
    def test_single_atom(self):
        d = DistributionSpec.uniform([one(Valuation.from_units([6, 9, 11, 12]))])
        assert compute_U(tariff(), d) == 12

    def test_zero_support(self):
        d = DistributionSpec.uniform([one(Valuation.from_units([0, 0, 0, 0]))])
        assert compute_U(tariff(), d) == 0

    def test_max_over_atoms(self):
        d = DistributionSpec.uniform([one(Valuation.from_units([5, 5, 5, 5])),
                                      one(Valuation.from_units([6, 9, 11, 12]))])
        assert compute_U(tariff(), d) == 12


class TestEpsilon:
    def test_zero_range(self):
        assert generalization_epsilon(BoundInputs(0, 2, 10, 100, 0.05)) == 0

    def test_plug_in(self):
        pdim = 9 * 2 * math.log2(4 * 2 * 10)
        expect = math.sqrt(pdim / 1e4) + math.sqrt(math.log(1 / 0.05) / 1e4)
        got = generalization_epsilon(BoundInputs(1, 2, 10, 10_000, 0.05))
        assert got == pytest.approx(expect, rel=1e-12)
        assert got == pytest.approx(0.1240, abs=5e-5)

    def test_bad_delta(self):
        with pytest.raises(DomainError):
            BoundInputs(1, 2, 10, 100, 1.5)

    @given(st.floats(0.1, 10), st.integers(1, 5), st.integers(1, 50), st.integers(1, 10**5),
           st.floats(0.001, 0.5))
    def test_monotone(self, U, d, t, N, delta):
        base = generalization_epsilon(BoundInputs(U, d, t, N, delta))
        assert generalization_epsilon(BoundInputs(U, d, t, N + 1, delta)) < base
        assert generalization_epsilon(BoundInputs(U * 1.5, d, t, N, delta)) > base
        assert generalization_epsilon(BoundInputs(U, d + 1, t, N, delta)) > base
        assert generalization_epsilon(BoundInputs(U, d, t + 1, N, delta)) > base
        assert generalization_epsilon(BoundInputs(U, d, t, N, delta / 2)) > base


class TestRademacherBounds:
    def test_plug_in(self):
        assert pdim2erad_bound(1, 1, 1, 18) == pytest.approx(1.0)

    def test_zero_range(self):
        assert pdim2erad_bound(0, 3, 9, 10) == 0

    def test_halving_samples(self):
        assert pdim2erad_bound(2, 2, 5, 50) == pytest.approx(math.sqrt(2) * pdim2erad_bound(2, 2, 5, 100))

    def test_three_parts(self):
        got = decomposable_bound([(1, 1, 1)] * 3, 100)
        assert got == pytest.approx(3 * math.sqrt(18 / 100)) and got == pytest.approx(1.273, abs=1e-3)

    def test_single_part(self):
        assert decomposable_bound([(2, 3, 4)], 77) == pytest.approx(pdim2erad_bound(2, 3, 4, 77))

    def test_additive_over_parts(self):
        a, b = [(1, 2, 3)], [(2, 1, 5), (0.5, 2, 2)]
        assert decomposable_bound(a + b, 40) == pytest.approx(decomposable_bound(a, 40) + decomposable_bound(b, 40))


class TestEmpiricalRademacher:
    def test_single_mechanism_class(self, rng):
        # the box pins the class to one mechanism; every sample buys 2 units and pays 8
        profs = [one(Valuation.from_units([6, 9, 11, 12]))] * 5
        est = empirical_rademacher(tariff(), profs, 200, seed=3, sup_oracle="grid",
                                   resolution=1.0, lo=[3, 2.5], hi=[3, 2.5])
        signs = np.random.default_rng(3).choice(np.array([-1.0, 1.0]), size=(200, 5))
        np.testing.assert_allclose(est.sups, 8 * signs.mean(axis=1), atol=1e-12)
        assert abs(est.mean) <= 4 * est.stderr

    def test_one_sample_closed_form(self):
        prof = one(Valuation.from_units([6, 9, 11, 12]))
        best = run_erm(tariff(), ObjectiveSpec.build([prof], [1.0]), "exact").best_value
        worst = run_erm(tariff(), ObjectiveSpec.build([prof], [-1.0]), "exact").best_value
        assert worst == 0  # the null mechanism dodges a negative sign
        est = empirical_rademacher(tariff(), [prof], 400, seed=0)
        assert set(np.round(est.sups, 9)) <= {round(best, 9), 0.0}
        assert est.mean == pytest.approx(0.5 * (best + worst), abs=4 * est.stderr)

    @given(st.integers(0, 2**31), st.integers(2, 8))
    def test_below_range(self, seed, N):
        rng = np.random.default_rng(seed)
        dist = tariff_dist(rng)
        profs = [dist.profiles[k] for k in rng.integers(0, len(dist.profiles), N)]
        est = empirical_rademacher(tariff(2), profs, 20, seed)
        assert est.mean <= compute_U(tariff(2), dist) + 3 * est.stderr
        envelope = 4 * pdim2erad_bound(compute_U(tariff(2), dist), 2, 3, N)
        if est.mean > envelope:
            warnings.warn(f"Rademacher estimate {est.mean:.3g} above 4x the bound {envelope:.3g}")


class TestDecomposition:
    def item_pricing(self, m, cost=None):
        return MechanismClass("item_pricing", m=m, cost=cost or CostFunction.zero(m))

    def test_single_item(self):
        d = DistributionSpec.product([[((2.0,), 0.5), ((5.0,), 0.5)]])
        res = verify_sup_decomposition(self.item_pricing(1), d)
        assert res.equal and res.U == res.sum_Ui == 5

    def test_two_items(self):
        d = DistributionSpec.product([[((3.0,), 0.6), ((1.0,), 0.4)], [((4.0,), 0.3), ((2.0,), 0.7)]])
        res = verify_sup_decomposition(self.item_pricing(2), d)
        assert res.per_item == (3, 4) and res.U == 7 and res.equal

    def test_correlated_atoms_refused(self):
        d = DistributionSpec.uniform([one(Valuation.additive([1, 2])), one(Valuation.additive([2, 1]))])
        with pytest.raises(DomainError):
            verify_sup_decomposition(self.item_pricing(2), d)

    def test_non_decomposable_class_refused(self):
        d = DistributionSpec.product([[((3.0,), 1.0)]])
        with pytest.raises(DomainError):
            verify_sup_decomposition(tariff(1), d)

    @given(st.integers(0, 2**31), st.sampled_from(["item_pricing", "second_price_reserves", "item_lottery_menu"]))
    def test_equal_on_product_distributions(self, seed, kind):
        rng = np.random.default_rng(seed)
        m = 2
        n = 1 if kind == "item_lottery_menu" else 2
        margs = []
        for _ in range(m):
            probs = rng.dirichlet(np.ones(2))
            probs /= probs.sum()
            margs.append([(tuple(rng.uniform(0, 4, n).round(1)), float(p)) for p in probs])
        mc = MechanismClass(kind, n=n, m=m, cost=CostFunction.additive(rng.uniform(0, 1, m).round(2)))
        assert verify_sup_decomposition(mc, DistributionSpec.product(margs)).equal


class TestShattering:
    def test_three_items(self):
        mc, profs, params = anonymous_lower_bound(3)
        res = shattering_check(mc, profs, [1, 1, 1], params)
        assert res.shattered and res.realized_labelings == res.total_labelings == 8

    def test_empty_set(self):
        res = shattering_check(self.mc(), [], [])
        assert res.shattered and (res.realized_labelings, res.total_labelings) == (1, 1)

    def test_two_by_two(self):
        mc, profs, params = non_anonymous_lower_bound(2, 2)
        res = shattering_check(mc, profs, [1] * 4, params)
        assert res.shattered and res.realized_labelings == 16

    def test_search_route(self):
        mc, profs, _ = anonymous_lower_bound(2)
        assert shattering_check(mc, profs, [1, 1], sup_method="exact").shattered

    def test_too_many_samples(self):
        prof = one(Valuation.additive([1]))
        with pytest.raises(ResourceError):
            shattering_check(self.mc(1), [prof] * 21, [1] * 21)

    def test_single_price_cannot_shatter_two_identical(self):
        prof = one(Valuation.additive([3]))
        res = shattering_check(self.mc(1), [prof, prof], [1, 1], [[0.0], [2.0], [5.0]])
        assert not res.shattered and res.realized_labelings == 2

    @staticmethod
    def mc(m=2):
        return MechanismClass("item_pricing", m=m, cost=CostFunction.zero(m))


class TestOutliers:
    def test_zero_range(self):
        assert outlier_bound(OutlierInputs(0, 0.1, BoundInputs(0, 2, 10, 100, 0.05))) == 0

    def test_no_outlier_mass(self):
        inp = BoundInputs(10.0, 2, 10, 10**6, 0.5)
        got = outlier_bound(OutlierInputs(1.0, 0.0, inp))
        assert got == pytest.approx(1.0 * math.sqrt(9 * 2 * math.log2(80) / 10**6), rel=1e-6)

    def test_full_mass_dominates_plain_bound(self):
        inp = BoundInputs(3.0, 2, 10, 500, 0.05)
        assert outlier_bound(OutlierInputs(3.0, 1.0, inp)) >= pdim2erad_bound(3.0, 2, 10, 500)

    def test_threshold_cannot_exceed_range(self):
        with pytest.raises(DomainError):
            OutlierInputs(5.0, 0.1, BoundInputs(1.0, 2, 10, 100, 0.05))


class TestQuantile:
    values = list(range(1, 11))

    def test_ascending_index(self):
        assert quantile_a(self.values, 0.3, from_top=False) == 3

    def test_from_top(self):
        assert quantile_a(self.values, 0.3) == 8

    @pytest.mark.parametrize("b", [0.1, 0.5, 0.99])
    def test_all_equal(self, b):
        assert quantile_a([4.0] * 10, b) == quantile_a([4.0] * 10, b, from_top=False) == 4.0

    def test_largest_index(self):
        assert quantile_a(self.values, 1.0, from_top=False) == 10
        assert quantile_a(self.values, 0.999, from_top=False) == 9

    def test_too_small(self):
        with pytest.raises(DomainError):
            quantile_a(self.values, 0.05)

    @given(st.lists(st.floats(0, 100), min_size=5, max_size=60), st.floats(0.2, 0.9))
    def test_top_fraction(self, vals, b):
        a = quantile_a(vals, b)
        assert sum(v > a for v in vals) < math.floor(b * len(vals))


class TestGap:
    def test_single_atom(self):
        d = DistributionSpec.uniform([one(Valuation.from_units([6, 9, 11, 12]))])
        rep = gap_experiment(tariff(), d, 10, 5, seed=0)
        assert rep.max_gap == pytest.approx(0, abs=1e-9)

    def test_shrinks_with_samples(self):
        rng = np.random.default_rng(11)
        d = tariff_dist(rng, atoms=5, kappa=2)
        small = gap_experiment(tariff(2), d, 20, 50, seed=1)
        large = gap_experiment(tariff(2), d, 80, 50, seed=2)
        assert large.mean_gap <= small.mean_gap
        assert small.max_gap <= small.U and large.max_gap <= large.U

    @given(st.integers(0, 2**31))
    def test_gap_below_range(self, seed):
        rng = np.random.default_rng(seed)
        d = tariff_dist(rng, atoms=3, kappa=2)
        rep = gap_experiment(tariff(2), d, 6, 3, seed)
        assert rep.max_gap <= rep.U + 1e-9
