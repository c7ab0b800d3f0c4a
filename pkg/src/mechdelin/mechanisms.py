"""Allocation, payment and profit for every supported mechanism class.

A :class:`MechanismClass` fixes everything except the real parameter vector;
``mclass.with_params(p)`` gives a :class:`MechanismSpec`.  All evaluation goes
through :func:`evaluate_batch`, which scores a whole matrix of parameter
vectors against one profile at once; the scalar entry points are thin views of
it, so ERM, partition checks and single evaluations share one code path.

Tie-breaking is seller-favorable: among options whose utility is within
``TIE_TOL`` of the best, the buyer takes the one with the highest payment,
then a class-specific deterministic key.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DomainError, ResourceError
from .valuations import CostFunction, ValuationProfile, bundle_lattice, lattice_index, value

TIE_TOL = 1e-9

KINDS = (
    "two_part_tariff_menu",
    "item_pricing",
    "nonlinear_pricing",
    "nonlinear_pricing_decomposable",
    "second_price_reserves",
    "lottery_menu",
    "item_lottery_menu",
    "lambda_auction",
    "ama",
    "vvca",
    "mbarp",
)
AUCTION_KINDS = ("lambda_auction", "ama", "vvca", "mbarp")
ANONYMITIES = ("anonymous", "grouped", "non_anonymous")


@dataclass(frozen=True)
class MechanismClass:
    """A parameterized family of mechanisms; ``dim`` is its parameter count.

    ``caps`` are per-item supply caps (units); ``order`` is the arrival order
    for item pricing; ``boosted`` lists the allocations (tuples of winner
    indices per item, 0 = unallocated, j = buyer j) a lambda-auction may boost.
    """

    kind: str
    n: int = 1
    m: int = 1
    anonymity: str = "anonymous"
    groups: tuple[int, ...] | None = None
    ell: int = 1
    caps: tuple[int, ...] | None = None
    order: tuple[int, ...] | None = None
    boosted: tuple[tuple[int, ...], ...] = ()
    cost: CostFunction = field(default_factory=CostFunction)
    enum_limit: int = 4096

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown mechanism kind {self.kind!r}")
        if self.anonymity not in ANONYMITIES:
            raise DomainError(f"unknown anonymity {self.anonymity!r}")
        if self.n < 1 or self.m < 1 or self.ell < 1:
            raise DomainError("n, m and ell must be at least 1")
        if self.caps is not None:
            object.__setattr__(self, "caps", tuple(int(k) for k in self.caps))
            if len(self.caps) != self.m or min(self.caps) < 0:
                raise DomainError(f"caps {self.caps} do not match m={self.m}")
        if self.groups is not None:
            object.__setattr__(self, "groups", tuple(int(g) for g in self.groups))
        if self.anonymity == "grouped":
            if self.groups is None or len(self.groups) != self.n:
                raise DomainError("grouped anonymity needs one group id per buyer")
            if sorted(set(self.groups)) != list(range(max(self.groups) + 1)):
                raise DomainError("group ids must be 0..k-1 with every group non-empty")
        if self.order is not None:
            object.__setattr__(self, "order", tuple(int(j) for j in self.order))
            if sorted(self.order) != list(range(self.n)):
                raise DomainError("order must be a permutation of the buyers")
        object.__setattr__(self, "boosted", tuple(tuple(int(x) for x in q) for q in self.boosted))
        for q in self.boosted:
            if len(q) != self.m or min(q) < 0 or max(q) > self.n:
                raise DomainError(f"boosted allocation {q} is not an allocation of {self.m} items")
        if self.cost.m != self.m:
            raise DomainError(f"cost function covers {self.cost.m} items, class has {self.m}")
        if self.kind == "two_part_tariff_menu" and self.m != 1:
            raise DomainError("two-part tariffs sell units of a single item (m = 1)")
        if self.kind in ("item_lottery_menu", "lambda_auction", "ama", "vvca", "mbarp") \
                and self.anonymity != "anonymous":
            raise DomainError(f"{self.kind} has no per-buyer price variant")
        if self.kind == "lambda_auction" and not self.boosted:
            raise DomainError("a lambda-auction needs at least one boosted allocation")

    @property
    def kappa(self) -> tuple[int, ...]:
        return self.caps if self.caps is not None else (1,) * self.m

    @property
    def blocks(self) -> int:
        if self.anonymity == "anonymous":
            return 1
        if self.anonymity == "non_anonymous":
            return self.n
        return max(self.groups) + 1

    def block_of(self, j: int) -> int:
        if self.anonymity == "anonymous":
            return 0
        if self.anonymity == "non_anonymous":
            return j
        return self.groups[j]

    @property
    def buyer_order(self) -> tuple[int, ...]:
        return self.order if self.order is not None else tuple(range(self.n))

    @property
    def n_allocations(self) -> int:
        return (self.n + 1) ** self.m

    @property
    def dim(self) -> int:
        k = self.kind
        if k == "two_part_tariff_menu":
            return 2 * self.ell * self.blocks
        if k in ("item_pricing", "second_price_reserves"):
            return self.m * self.blocks
        if k == "nonlinear_pricing":
            return math.prod(c + 1 for c in self.kappa) * self.blocks
        if k == "nonlinear_pricing_decomposable":
            return sum(c + 1 for c in self.kappa) * self.blocks
        if k == "lottery_menu":
            return self.ell * (self.m + 1) * self.blocks
        if k == "item_lottery_menu":
            return 2 * self.ell * self.m
        if k == "lambda_auction":
            return len(self.boosted)
        if k == "ama":
            return self.n + self.n_allocations
        if k == "vvca":
            return self.n + self.n * 2 ** self.m
        return self.m + 1  # mbarp

    def with_params(self, params) -> "MechanismSpec":
        return MechanismSpec(self, tuple(float(x) for x in params))

    def null_params(self) -> np.ndarray:
        """A parameter vector whose mechanism never earns or spends anything."""
        p = np.zeros(self.dim)
        if self.kind in ("ama", "vvca"):
            p[: self.n] = 1.0
        return p

    def with_(self, **changes) -> "MechanismClass":
        return replace(self, **changes)


@dataclass(frozen=True)
class MechanismSpec:
    mclass: MechanismClass
    params: tuple[float, ...]

    def __post_init__(self):
        mc, p = self.mclass, np.asarray(self.params)
        if len(p) != mc.dim:
            raise DomainError(f"{mc.kind} expects {mc.dim} parameters, got {len(p)}")
        if not np.all(np.isfinite(p)):
            raise DomainError("parameters must be finite")
        if mc.kind == "lottery_menu":
            phi = p.reshape(-1, mc.m + 1)[:, : mc.m]
            if (phi < 0).any() or (phi > 1).any():
                raise DomainError("lottery probabilities must lie in [0, 1]")
        if mc.kind == "item_lottery_menu":
            phi = p.reshape(-1, 2)[:, 0]
            if (phi < 0).any() or (phi > 1).any():
                raise DomainError("lottery probabilities must lie in [0, 1]")
        if mc.kind in ("ama", "vvca") and (p[: mc.n] <= 0).any():
            raise DomainError("bidder weights must be positive")
        boosts = {"lambda_auction": p, "ama": p[mc.n:], "vvca": p[mc.n:], "mbarp": p[-1:]}
        if mc.kind in boosts and (boosts[mc.kind] < 0).any():
            raise DomainError("allocation boosts must be non-negative")

    @property
    def kind(self) -> str:
        return self.mclass.kind


@dataclass(frozen=True)
class Outcome:
    """Result of running one mechanism on one profile.

    For lotteries ``allocation`` holds each buyer's expected allocation and
    ``cost`` the expected production cost.
    """

    allocation: tuple
    payments: tuple[float, ...]
    cost: float
    profit: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "profit", float(sum(self.payments)) - float(self.cost))


@dataclass
class Batch:
    """Evaluation of B parameter vectors: payments (B, n), cost (B,), alloc (B, n, m)."""

    payments: np.ndarray
    cost: np.ndarray
    alloc: np.ndarray

    @property
    def profit(self) -> np.ndarray:
        return self.payments.sum(axis=1) - self.cost

    def outcome(self, row: int = 0, integral: bool = True) -> Outcome:
        a = self.alloc[row]
        alloc = tuple(tuple(int(round(x)) for x in q) for q in a) if integral else \
            tuple(tuple(float(x) for x in q) for q in a)
        return Outcome(alloc, tuple(float(x) for x in self.payments[row]), float(self.cost[row]))


# ---------------------------------------------------------------------------
# shared helpers


def _choose(U: np.ndarray, pay: np.ndarray) -> np.ndarray:
    """Index of the chosen option per row; options must be in priority order."""
    best = U.max(axis=1, keepdims=True)
    near = U >= best - TIE_TOL
    paym = np.where(near, pay, -np.inf)
    top = paym.max(axis=1, keepdims=True)
    return np.argmax(near & (pay >= top - TIE_TOL), axis=1)


def _bundle_cost(c: CostFunction, q) -> float:
    return c.of(q)


def _alloc_cost(c: CostFunction, alloc: np.ndarray) -> np.ndarray:
    """Vectorized ``sum_j c(q_j)`` for integral allocations of shape (B, n, m)."""
    if c.kind == "zero":
        return np.zeros(alloc.shape[0])
    if c.kind == "additive":
        return alloc.sum(axis=1) @ np.asarray(c.item_costs)
    caps = np.asarray(c.caps)
    q = np.rint(alloc).astype(np.int64)
    if (q > caps).any() or (q < 0).any():
        raise DomainError(f"allocation exceeds the cost table caps {tuple(c.caps)}")
    strides = np.ones(len(caps), dtype=np.int64)
    for i in range(len(caps) - 2, -1, -1):
        strides[i] = strides[i + 1] * (caps[i + 1] + 1)
    idx = q @ strides
    return np.asarray(c.table)[idx].sum(axis=1)


def _check_profile(mclass: MechanismClass, profile: ValuationProfile):
    if profile.n != mclass.n or profile.m != mclass.m:
        raise DomainError(
            f"profile has n={profile.n}, m={profile.m}; class expects n={mclass.n}, m={mclass.m}"
        )


def _as_matrix(mclass: MechanismClass, P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    if P.shape[1] != mclass.dim:
        raise DomainError(f"{mclass.kind} expects {mclass.dim} parameters, got {P.shape[1]}")
    return P


# ---------------------------------------------------------------------------
# per-class batch evaluators


def _two_part_tariff(mc: MechanismClass, profile, P):
    B, kappa, ell = len(P), mc.kappa[0], mc.ell
    pay_all = np.zeros((B, mc.n))
    cost = np.zeros(B)
    alloc = np.zeros((B, mc.n, 1))
    ts = np.arange(1, kappa + 1)
    for j, v in enumerate(profile.buyers):
        vals = np.array([value(v, (t,)) for t in ts])
        costs = np.array([mc.cost.of((t,)) for t in ts])
        base = mc.block_of(j) * 2 * ell
        fee = P[:, base : base + 2 * ell : 2]  # (B, ell)
        unit = P[:, base + 1 : base + 2 * ell : 2]
        # options: (t, e) for t descending, e ascending, then the null option
        t_opt = np.repeat(ts[::-1], ell)
        e_opt = np.tile(np.arange(ell), kappa)
        pay = fee[:, e_opt] + unit[:, e_opt] * t_opt
        U = vals[t_opt - 1] - pay
        pay = np.concatenate([pay, np.zeros((B, 1))], axis=1)
        U = np.concatenate([U, np.zeros((B, 1))], axis=1)
        pick = _choose(U, pay)
        rows = np.arange(B)
        pay_all[:, j] = pay[rows, pick]
        t_pick = np.append(t_opt, 0)[pick]
        alloc[:, j, 0] = t_pick
        cost += np.append(costs[::-1].repeat(ell), 0.0)[pick]
    return Batch(pay_all, cost, alloc)


def _subset_options(m: int, unit_demand: bool) -> list[tuple[int, ...]]:
    """0/1 bundles in priority order: fewer items first, then lexicographic."""
    if unit_demand:
        return [tuple(0 for _ in range(m))] + [tuple(int(k == i) for k in range(m)) for i in range(m)]
    subs = list(itertools.product((0, 1), repeat=m))
    return sorted(subs, key=lambda s: (sum(s), tuple(-x for x in s)))


def _item_pricing(mc: MechanismClass, profile, P):
    B, n, m = len(P), mc.n, mc.m
    sold = np.zeros((B, m), dtype=bool)
    pay_all = np.zeros((B, n))
    alloc = np.zeros((B, n, m))
    for j in mc.buyer_order:
        v = profile.buyers[j]
        prices = P[:, mc.block_of(j) * m : (mc.block_of(j) + 1) * m]
        if v.kind == "additive":
            vals = np.array(v.item_values)
            gap = vals - prices
            buy = ~sold & ((gap > TIE_TOL) | ((np.abs(gap) <= TIE_TOL) & (prices > TIE_TOL)))
        else:
            opts = _subset_options(m, v.kind == "unit_demand")
            S = np.array(opts, dtype=float)  # (O, m)
            vals = np.array([value(v, s) for s in opts])
            pay = prices @ S.T
            U = vals - pay
            blocked = sold.astype(float) @ S.T > 0
            U = np.where(blocked, -np.inf, U)
            pick = _choose(U, np.where(blocked, -np.inf, pay))
            buy = S[pick].astype(bool)
        pay_all[:, j] = (prices * buy).sum(axis=1)
        alloc[:, j, :] = buy
        sold |= buy
    return Batch(pay_all, _alloc_cost(mc.cost, alloc), alloc)


def _nonlinear(mc: MechanismClass, profile, P, decomposable: bool):
    B = len(P)
    lattice = bundle_lattice(mc.kappa)
    # priority: more units first, then lattice order
    order = sorted(range(len(lattice)), key=lambda k: (-sum(lattice[k]), k))
    opts = [lattice[k] for k in order]
    Q = np.array(opts, dtype=float)
    costs = np.array([mc.cost.of(q) for q in opts])
    pay_all = np.zeros((B, mc.n))
    alloc = np.zeros((B, mc.n, mc.m))
    cost = np.zeros(B)
    if decomposable:
        offsets = np.concatenate([[0], np.cumsum([c + 1 for c in mc.kappa])])
        width = int(offsets[-1])
    else:
        width = len(lattice)
    for j, v in enumerate(profile.buyers):
        base = mc.block_of(j) * width
        block = P[:, base : base + width]
        if decomposable:
            pay = np.zeros((B, len(opts)))
            for i in range(mc.m):
                qi = Q[:, i].astype(int)
                col = block[:, offsets[i] + qi]
                pay += np.where(qi > 0, col, 0.0)
        else:
            pay = block[:, order]
            pay[:, [k for k, q in enumerate(opts) if not any(q)]] = 0.0
        vals = np.array([value(v, q) for q in opts])
        pick = _choose(vals - pay, pay)
        rows = np.arange(B)
        pay_all[:, j] = pay[rows, pick]
        alloc[:, j, :] = Q[pick]
        cost += costs[pick]
    return Batch(pay_all, cost, alloc)


def _second_price(mc: MechanismClass, profile, P):
    B, n, m = len(P), mc.n, mc.m
    if any(b.kind != "additive" for b in profile.buyers):
        raise DomainError("second-price auctions need additive buyers")
    V = np.array([b.item_values for b in profile.buyers])  # (n, m)
    pay_all = np.zeros((B, n))
    alloc = np.zeros((B, n, m))
    for i in range(m):
        bids = V[:, i]
        w = int(np.argmax(bids))
        second = float(np.sort(bids)[-2]) if n > 1 else 0.0
        r = P[:, mc.block_of(w) * m + i]
        sold = bids[w] >= r - TIE_TOL
        pay_all[:, w] += np.where(sold, np.maximum(second, r), 0.0)
        alloc[:, w, i] = sold
    return Batch(pay_all, _alloc_cost(mc.cost, alloc), alloc)


def _subset_probs(phi: np.ndarray) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Probability of each 0/1 outcome when item i is drawn with prob phi[..., i]."""
    m = phi.shape[-1]
    outs = list(itertools.product((0, 1), repeat=m))
    probs = np.ones(phi.shape[:-1] + (len(outs),))
    for k, s in enumerate(outs):
        for i, bit in enumerate(s):
            probs[..., k] *= phi[..., i] if bit else 1.0 - phi[..., i]
    return probs, outs


def lottery_expected_cost(c: CostFunction, phi: np.ndarray, unit_demand: bool) -> np.ndarray:
    """Closed-form expected production cost of lottery allocations ``phi`` (..., m)."""
    phi = np.asarray(phi, dtype=float)
    m = phi.shape[-1]
    if c.kind == "zero":
        return np.zeros(phi.shape[:-1])
    if unit_demand:
        single = np.array([c.singleton(i) for i in range(m)])
        return phi @ single
    if c.kind == "additive":
        return phi @ np.asarray(c.item_costs)
    probs, outs = _subset_probs(phi)
    return probs @ np.array([c.of(s) for s in outs])


def _lottery_menu(mc: MechanismClass, profile, P, z=None):
    B, m, ell = len(P), mc.m, mc.ell
    pay_all = np.zeros((B, mc.n))
    alloc = np.zeros((B, mc.n, m))
    cost = np.zeros(B)
    for j, v in enumerate(profile.buyers):
        if v.kind == "general":
            raise DomainError("lottery menus need additive or unit-demand buyers")
        ud = v.kind == "unit_demand"
        base = mc.block_of(j) * ell * (m + 1)
        menu = P[:, base : base + ell * (m + 1)].reshape(B, ell, m + 1)
        phi, price = menu[:, :, :m], menu[:, :, m]
        if ud and (phi.sum(axis=2) > 1 + 1e-12).any():
            raise DomainError("unit-demand lottery rows must sum to at most 1")
        vals = np.array(v.item_values)
        # null lottery first so it wins exact ties at zero price
        U = np.concatenate([np.zeros((B, 1)), phi @ vals - price], axis=1)
        pay = np.concatenate([np.zeros((B, 1)), price], axis=1)
        pick = _choose(U, pay)
        rows = np.arange(B)
        chosen = np.where((pick > 0)[:, None], phi[rows, np.maximum(pick - 1, 0)], 0.0)
        pay_all[:, j] = pay[rows, pick]
        alloc[:, j, :] = chosen
        if z is None:
            cost += lottery_expected_cost(mc.cost, chosen, ud)
        else:
            cost += _relaxed_cost(mc.cost, chosen, np.asarray(z, dtype=float), ud)
    return Batch(pay_all, cost, alloc)


def _relaxed_cost(c: CostFunction, phi: np.ndarray, z: np.ndarray, unit_demand: bool):
    """``c(sum_{i : z[i] < phi[i]} e_i)``; unit-demand buyers use the scalar ``z[0]``."""
    m = phi.shape[-1]
    if unit_demand:
        hi = np.cumsum(phi, axis=-1)
        lo = hi - phi
        got = (lo <= z[0]) & (z[0] < hi)
    else:
        got = z[None, :m] < phi
    q = got.astype(float)
    if c.kind == "zero":
        return np.zeros(len(phi))
    return np.array([c.of(tuple(int(x) for x in row)) for row in q])


def _item_lottery(mc: MechanismClass, profile, P):
    B, m, ell = len(P), mc.m, mc.ell
    if mc.cost.kind == "general":
        raise DomainError("item lottery menus need zero or additive cost")
    costs = np.zeros(m) if mc.cost.kind == "zero" else np.asarray(mc.cost.item_costs)
    pay_all = np.zeros((B, mc.n))
    alloc = np.zeros((B, mc.n, m))
    for j, v in enumerate(profile.buyers):
        if v.kind != "additive":
            raise DomainError("item lottery menus need additive buyers")
        for i in range(m):
            menu = P[:, i * 2 * ell : (i + 1) * 2 * ell].reshape(B, ell, 2)
            phi, price = menu[:, :, 0], menu[:, :, 1]
            U = np.concatenate([np.zeros((B, 1)), v.item_values[i] * phi - price], axis=1)
            pay = np.concatenate([np.zeros((B, 1)), price], axis=1)
            pick = _choose(U, pay)
            rows = np.arange(B)
            got = np.where(pick > 0, phi[rows, np.maximum(pick - 1, 0)], 0.0)
            pay_all[:, j] += pay[rows, pick]
            alloc[:, j, i] = got
    return Batch(pay_all, alloc.sum(axis=1) @ costs, alloc)


@lru_cache(maxsize=64)
def allocations(n: int, m: int) -> tuple[tuple[int, ...], ...]:
    """All assignments of m unit-supply items to n buyers (0 = kept), in index order."""
    return tuple(itertools.product(range(n + 1), repeat=m))


def allocation_bundles(a: Sequence[int], n: int) -> list[tuple[int, ...]]:
    """Per-buyer 0/1 bundles of a winner-index allocation."""
    return [tuple(int(w == j + 1) for w in a) for j in range(n)]


def _auction_tables(mc: MechanismClass, profile):
    n, m = mc.n, mc.m
    if mc.n_allocations > mc.enum_limit:
        raise ResourceError(
            f"{mc.n_allocations} allocations exceed the enumeration limit {mc.enum_limit}"
        )
    allocs = allocations(n, m)
    V = np.zeros((n, len(allocs)))
    C = np.zeros(len(allocs))
    for k, a in enumerate(allocs):
        bundles = allocation_bundles(a, n)
        for j, q in enumerate(bundles):
            V[j, k] = value(profile.buyers[j], q)
        C[k] = sum(mc.cost.of(q) for q in bundles)
    return allocs, V, C


def _auction(mc: MechanismClass, profile, P):
    B, n, m = len(P), mc.n, mc.m
    allocs, V, C = _auction_tables(mc, profile)
    K = len(allocs)
    A = np.array(allocs)  # (K, m)
    extra = np.zeros((B, K))
    if mc.kind == "lambda_auction":
        W = np.ones((B, n))
        index = {a: k for k, a in enumerate(allocs)}
        for b, q in enumerate(mc.boosted):
            extra[:, index[q]] += P[:, b]
    elif mc.kind == "ama":
        W, extra = P[:, :n], P[:, n:].copy()
    elif mc.kind == "vvca":
        W = P[:, :n]
        boosts = P[:, n:].reshape(B, n, 2 ** m)
        for k, a in enumerate(allocs):
            for j, q in enumerate(allocation_bundles(a, n)):
                extra[:, k] += boosts[:, j, int("".join(map(str, q)), 2)]
    else:  # mbarp: the seller keeps unallocated items at their reserves
        W = np.ones((B, n))
        unalloc = (A == 0).astype(float)  # (K, m)
        grand = np.array([any(all(w == j for w in a) for j in range(1, n + 1)) for a in allocs])
        extra = P[:, :m] @ unalloc.T + P[:, m:m + 1] * grand[None, :]
    WV = W[:, :, None] * V[None, :, :]  # (B, n, K)
    welfare = WV.sum(axis=1) + extra - C[None, :]
    best = welfare.max(axis=1, keepdims=True)
    star = np.argmax(welfare >= best - TIE_TOL, axis=1)
    rows = np.arange(B)
    pay_all = np.zeros((B, n))
    for j in range(n):
        without = welfare - WV[:, j, :]
        gain = without.max(axis=1) - without[rows, star]
        pay_all[:, j] = gain / W[:, j]
    alloc = np.zeros((B, n, m))
    for j in range(n):
        alloc[:, j, :] = A[star] == j + 1
    return Batch(pay_all, C[star], alloc)


def evaluate_batch(mclass: MechanismClass, profile: ValuationProfile, P, z=None) -> Batch:
    """Run the class at every row of ``P`` (B, dim) on one profile.

    Parameters are not range-checked here (use :class:`MechanismSpec` for
    that).  ``z`` switches lottery menus to the relaxed profit with the given
    uniform draw vector.
    """
    _check_profile(mclass, profile)
    P = _as_matrix(mclass, P)
    k = mclass.kind
    if z is not None and k != "lottery_menu":
        raise DomainError("the relaxed profit is only defined for lottery menus")
    if k == "two_part_tariff_menu":
        return _two_part_tariff(mclass, profile, P)
    if k == "item_pricing":
        return _item_pricing(mclass, profile, P)
    if k == "nonlinear_pricing":
        return _nonlinear(mclass, profile, P, decomposable=False)
    if k == "nonlinear_pricing_decomposable":
        return _nonlinear(mclass, profile, P, decomposable=True)
    if k == "second_price_reserves":
        return _second_price(mclass, profile, P)
    if k == "lottery_menu":
        return _lottery_menu(mclass, profile, P, z)
    if k == "item_lottery_menu":
        return _item_lottery(mclass, profile, P)
    return _auction(mclass, profile, P)


def profit_batch(mclass: MechanismClass, profile: ValuationProfile, P, z=None) -> np.ndarray:
    return evaluate_batch(mclass, profile, P, z).profit


def profit(mech: MechanismSpec, profile: ValuationProfile) -> Outcome:
    batch = evaluate_batch(mech.mclass, profile, np.asarray(mech.params)[None, :])
    lottery = mech.kind in ("lottery_menu", "item_lottery_menu")
    return batch.outcome(0, integral=not lottery)


def _expect(kind: str, mech: MechanismSpec):
    if mech.kind != kind:
        raise DomainError(f"expected a {kind} mechanism, got {mech.kind}")


def profit_two_part_tariff_menu(mech, profile) -> Outcome:
    _expect("two_part_tariff_menu", mech)
    return profit(mech, profile)


def profit_item_pricing(mech, profile) -> Outcome:
    _expect("item_pricing", mech)
    return profit(mech, profile)


def profit_nonlinear_pricing(mech, profile) -> Outcome:
    if mech.kind not in ("nonlinear_pricing", "nonlinear_pricing_decomposable"):
        raise DomainError(f"expected a nonlinear pricing mechanism, got {mech.kind}")
    return profit(mech, profile)


def profit_second_price_reserves(mech, profile) -> Outcome:
    _expect("second_price_reserves", mech)
    return profit(mech, profile)


def profit_lottery_menu(mech, profile) -> Outcome:
    _expect("lottery_menu", mech)
    return profit(mech, profile)


def profit_lottery_relaxed(mech, profile, z) -> float:
    """Lottery price minus the cost of the items whose draw ``z[i]`` falls below ``phi[i]``."""
    _expect("lottery_menu", mech)
    z = np.asarray(z, dtype=float)
    if z.shape != (mech.mclass.m,) or (z < 0).any() or (z > 1).any():
        raise DomainError(f"z must be a vector in [0,1]^{mech.mclass.m}")
    return float(profit_batch(mech.mclass, profile, np.asarray(mech.params)[None, :], z=z)[0])


def relaxed_profit_draws(mech, profile, Z) -> np.ndarray:
    """Relaxed profit for every row of ``Z`` (draws, m), with the buyers' choices fixed."""
    _expect("lottery_menu", mech)
    mc = mech.mclass
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    batch = evaluate_batch(mc, profile, np.asarray(mech.params)[None, :])
    out = np.full(len(Z), float(batch.payments[0].sum()))
    for j, v in enumerate(profile.buyers):
        phi = batch.alloc[0, j]
        if v.kind == "unit_demand":
            hi = np.cumsum(phi)
            got = (hi - phi <= Z[:, :1]) & (Z[:, :1] < hi)
        else:
            got = Z < phi
        if mc.cost.kind == "zero":
            continue
        out -= _alloc_cost(mc.cost, got[:, None, :].astype(float))
    return out


def relaxed_expectation(mech, profile) -> float:
    """Exact expectation of the relaxed profit over z uniform on [0,1]^m.

    Computed by summing over which coordinates of z fall below the chosen
    lottery's probabilities, independently of the closed-form cost.
    """
    _expect("lottery_menu", mech)
    mc = mech.mclass
    batch = evaluate_batch(mc, profile, np.asarray(mech.params)[None, :])
    total = float(batch.payments[0].sum())
    for j, v in enumerate(profile.buyers):
        phi = batch.alloc[0, j]
        if v.kind == "unit_demand":
            outcomes = [(float(phi[i]), tuple(int(k == i) for k in range(mc.m))) for i in range(mc.m)]
        else:
            outcomes = []
            for s in itertools.product((0, 1), repeat=mc.m):
                pr = 1.0
                for i, bit in enumerate(s):
                    pr *= phi[i] if bit else 1.0 - phi[i]
                outcomes.append((pr, s))
        total -= sum(pr * mc.cost.of(s) for pr, s in outcomes)
    return total


def profit_lambda_auction(mech, profile) -> Outcome:
    _expect("lambda_auction", mech)
    return profit(mech, profile)


def profit_ama(mech, profile) -> Outcome:
    _expect("ama", mech)
    return profit(mech, profile)


def profit_vvca(mech, profile) -> Outcome:
    _expect("vvca", mech)
    return profit(mech, profile)


def profit_mbarp(mech, profile) -> Outcome:
    _expect("mbarp", mech)
    return profit(mech, profile)


def vcg(profile: ValuationProfile, cost: CostFunction | None = None) -> Outcome:
    """Plain VCG with Clarke payments over unit-supply items, by direct enumeration."""
    n, m = profile.n, profile.m
    cost = cost or CostFunction.zero(m)

    def welfare(a, skip=None):
        bundles = allocation_bundles(a, n)
        w = sum(value(profile.buyers[j], q) for j, q in enumerate(bundles) if j != skip)
        return w - sum(cost.of(q) for q in bundles)

    allocs = allocations(n, m)
    best = max(welfare(a) for a in allocs)
    star = next(a for a in allocs if welfare(a) >= best - TIE_TOL)
    pays = []
    for j in range(n):
        others = max(welfare(a, skip=j) for a in allocs)
        pays.append(others - welfare(star, skip=j))
    bundles = allocation_bundles(star, n)
    return Outcome(tuple(bundles), tuple(pays), sum(cost.of(q) for q in bundles))


MP_KINDS = (
    "two_part_tariff",
    "lottery_menu_additive_cost",
    "item_pricing_non_anonymous_additive",
    "second_price_non_anonymous_additive",
)


def max_profit_MP(class_kind: str, profile: ValuationProfile, cost: CostFunction | None = None,
                  caps: Sequence[int] | None = None) -> float:
    """Closed-form ceiling on the profit any mechanism of the class earns on ``profile``."""
    cost = cost or CostFunction.zero(profile.m)
    if class_kind == "two_part_tariff":
        kappa = (caps or profile.buyers[0].caps or (1,))[0]
        return float(sum(max(0.0, max(value(v, (t,)) - cost.of((t,)) for t in range(kappa + 1)))
                         for v in profile.buyers))
    if cost.kind == "general":
        raise DomainError(f"{class_kind} ceiling needs zero or additive cost")
    c = [cost.singleton(i) for i in range(profile.m)]
    if class_kind == "lottery_menu_additive_cost":
        return float(sum(sum(v.singleton(i) for i in range(profile.m) if v.singleton(i) >= c[i])
                         for v in profile.buyers))
    if class_kind in ("item_pricing_non_anonymous_additive", "second_price_non_anonymous_additive"):
        if any(b.kind != "additive" for b in profile.buyers):
            raise DomainError(f"{class_kind} ceiling needs additive buyers")
        total = 0.0
        for i in range(profile.m):
            top = max(profile.item_values(i))
            total += top if top >= c[i] else 0.0
        return total
    raise DomainError(f"no closed-form ceiling for {class_kind!r}")


def mp_kind_for(mclass: MechanismClass) -> str | None:
    """The closed-form ceiling that applies to a class, if any."""
    if mclass.kind == "two_part_tariff_menu":
        return "two_part_tariff"
    if mclass.cost.kind == "general":
        return None
    if mclass.kind == "lottery_menu":
        return "lottery_menu_additive_cost"
    if mclass.kind == "item_pricing":
        return "item_pricing_non_anonymous_additive"
    if mclass.kind == "second_price_reserves":
        return "second_price_non_anonymous_additive"
    return None
