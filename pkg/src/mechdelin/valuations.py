"""Buyer valuations, production costs and finite-support distributions.

Bundles are plain tuples of non-negative ints (units of each item).  General
valuations and cost tables are dense over the bundle lattice
``prod(range(cap + 1) for cap in caps)`` and stored as tuples in lattice order
so every object here is hashable; sample sets use that to merge repeated
profiles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError

Bundle = tuple


def bundle_lattice(caps: Sequence[int]) -> list[tuple[int, ...]]:
    """All bundles with ``0 <= q[i] <= caps[i]``, in lexicographic order."""
    return list(itertools.product(*(range(int(k) + 1) for k in caps)))


def lattice_index(q: Sequence[int], caps: Sequence[int]) -> int:
    idx = 0
    for qi, k in zip(q, caps):
        idx = idx * (int(k) + 1) + int(qi)
    return idx


def _check_bundle(q, m: int, caps) -> tuple[int, ...]:
    q = tuple(int(x) for x in q)
    if len(q) != m:
        raise DomainError(f"bundle {q} has length {len(q)}, expected {m}")
    if any(x < 0 for x in q):
        raise DomainError(f"bundle {q} has a negative quantity")
    if caps is not None and any(x > k for x, k in zip(q, caps)):
        raise DomainError(f"bundle {q} exceeds caps {tuple(caps)}")
    return q


def _dense_table(table, caps, what: str) -> tuple[float, ...]:
    lattice = bundle_lattice(caps)
    if isinstance(table, Mapping):
        entries = {tuple(int(x) for x in k): float(v) for k, v in table.items()}
        entries.setdefault(tuple(0 for _ in caps), 0.0)
        missing = [q for q in lattice if q not in entries]
        if missing:
            raise DomainError(f"{what}: missing table entry for bundle {missing[0]}")
        extra = [q for q in entries if q not in set(lattice)]
        if extra:
            raise DomainError(f"{what}: bundle {extra[0]} lies outside caps {tuple(caps)}")
        values = [entries[q] for q in lattice]
    else:
        values = [float(x) for x in table]
        if len(values) != len(lattice):
            raise DomainError(
                f"{what}: table has {len(values)} entries, lattice has {len(lattice)}"
            )
    if any(not math.isfinite(x) for x in values):
        raise DomainError(f"{what}: table values must be finite")
    return tuple(values)


@dataclass(frozen=True)
class Valuation:
    """One buyer's values over bundles.

    ``kind`` is ``"additive"``, ``"unit_demand"`` or ``"general"``.  Additive and
    unit-demand buyers are described by ``item_values``; general buyers by a
    dense ``table`` over the lattice defined by ``caps``.
    """

    kind: str
    item_values: tuple[float, ...] = ()
    table: tuple[float, ...] = ()
    caps: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("additive", "unit_demand", "general"):
            raise DomainError(f"unknown valuation kind {self.kind!r}")
        if self.kind == "general":
            if self.caps is None:
                raise DomainError("general valuations need caps")
            if self.table[0] != 0.0:
                raise DomainError("general valuation must satisfy v(0) = 0")
            if any(x < 0 for x in self.table):
                raise DomainError("valuation table entries must be non-negative")
            self._check_monotone()
        else:
            if any(x < 0 or not math.isfinite(x) for x in self.item_values):
                raise DomainError("item values must be finite and non-negative")

    def _check_monotone(self):
        caps = self.caps
        for q in bundle_lattice(caps):
            base = self.table[lattice_index(q, caps)]
            for i, k in enumerate(caps):
                if q[i] < k:
                    up = q[:i] + (q[i] + 1,) + q[i + 1 :]
                    if self.table[lattice_index(up, caps)] < base - 1e-12:
                        raise DomainError(f"valuation is not monotone at bundle {q} -> {up}")

    @classmethod
    def additive(cls, values, caps=None) -> "Valuation":
        return cls("additive", item_values=tuple(float(x) for x in values),
                   caps=None if caps is None else tuple(int(k) for k in caps))

    @classmethod
    def unit_demand(cls, values, caps=None) -> "Valuation":
        return cls("unit_demand", item_values=tuple(float(x) for x in values),
                   caps=None if caps is None else tuple(int(k) for k in caps))

    @classmethod
    def general(cls, table, caps) -> "Valuation":
        caps = tuple(int(k) for k in caps)
        return cls("general", table=_dense_table(table, caps, "valuation"), caps=caps)

    @classmethod
    def from_units(cls, unit_values) -> "Valuation":
        """Single-item valuation with ``unit_values[t-1] = v(t)``."""
        vals = [0.0] + [float(x) for x in unit_values]
        return cls.general(vals, (len(unit_values),))

    @property
    def m(self) -> int:
        return len(self.caps) if self.kind == "general" else len(self.item_values)

    def __call__(self, q) -> float:
        return value(self, q)

    def singleton(self, i: int) -> float:
        q = tuple(1 if k == i else 0 for k in range(self.m))
        return value(self, q)


def value(v: Valuation, q) -> float:
    """Evaluate ``v(q)``."""
    q = _check_bundle(q, v.m, v.caps)
    if v.kind == "additive":
        return float(sum(x * val for x, val in zip(q, v.item_values)))
    if v.kind == "unit_demand":
        held = [val for x, val in zip(q, v.item_values) if x >= 1]
        return float(max(held)) if held else 0.0
    return v.table[lattice_index(q, v.caps)]


@dataclass(frozen=True)
class ValuationProfile:
    buyers: tuple[Valuation, ...]

    def __post_init__(self):
        object.__setattr__(self, "buyers", tuple(self.buyers))
        if not self.buyers:
            raise DomainError("a profile needs at least one buyer")
        ms = {b.m for b in self.buyers}
        if len(ms) != 1:
            raise DomainError(f"buyers disagree on the item count: {sorted(ms)}")

    @property
    def n(self) -> int:
        return len(self.buyers)

    @property
    def m(self) -> int:
        return self.buyers[0].m

    def item_values(self, i: int) -> tuple[float, ...]:
        """All buyers' values for the singleton bundle of item ``i``."""
        return tuple(b.singleton(i) for b in self.buyers)


@dataclass(frozen=True)
class CostFunction:
    """Production cost of one buyer's bundle; allocations cost the sum."""

    kind: str = "zero"
    m: int = 1
    item_costs: tuple[float, ...] = ()
    table: tuple[float, ...] = ()
    caps: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "additive", "general"):
            raise DomainError(f"unknown cost kind {self.kind!r}")
        if self.kind == "additive" and len(self.item_costs) != self.m:
            raise DomainError("additive cost needs one cost per item")
        if any(x < 0 for x in self.item_costs) or any(x < 0 for x in self.table):
            raise DomainError("costs must be non-negative")
        if self.kind == "general":
            if self.caps is None:
                raise DomainError("general cost tables need caps")
            if self.table[0] != 0.0:
                raise DomainError("cost must satisfy c(0) = 0")

    @classmethod
    def zero(cls, m: int = 1, caps=None) -> "CostFunction":
        return cls("zero", m=m, caps=None if caps is None else tuple(caps))

    @classmethod
    def additive(cls, costs, caps=None) -> "CostFunction":
        costs = tuple(float(x) for x in costs)
        return cls("additive", m=len(costs), item_costs=costs,
                   caps=None if caps is None else tuple(int(k) for k in caps))

    @classmethod
    def general(cls, table, caps) -> "CostFunction":
        caps = tuple(int(k) for k in caps)
        return cls("general", m=len(caps), table=_dense_table(table, caps, "cost"), caps=caps)

    def of(self, q) -> float:
        q = _check_bundle(q, self.m, self.caps)
        if self.kind == "zero":
            return 0.0
        if self.kind == "additive":
            return float(sum(x * c for x, c in zip(q, self.item_costs)))
        return self.table[lattice_index(q, self.caps)]

    def singleton(self, i: int) -> float:
        return self.of(tuple(1 if k == i else 0 for k in range(self.m)))

    def restrict(self, i: int) -> "CostFunction":
        """Cost of item ``i`` alone, as a one-item cost function."""
        if self.kind == "zero":
            return CostFunction.zero(1)
        if self.kind == "additive":
            return CostFunction.additive([self.item_costs[i]])
        raise DomainError("only zero or additive costs can be split by item")


def cost(c: CostFunction, allocation) -> float:
    """Total production cost ``sum_j c(q_j)`` of an allocation."""
    return float(sum(c.of(q) for q in allocation))


@dataclass(frozen=True)
class DistributionSpec:
    """Finite-support distribution over valuation profiles.

    Item-independent distributions are built with :meth:`product` from per-item
    marginals; a marginal atom is the tuple of all buyers' values for that item
    (buyers are additive).
    """

    atoms: tuple[tuple[ValuationProfile, float], ...]
    item_independent: bool = False
    marginals: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((p, float(w)) for p, w in self.atoms))
        if not self.atoms:
            raise DomainError("distribution has empty support")
        probs = np.array([w for _, w in self.atoms])
        if (probs < 0).any():
            raise DomainError("atom probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise DomainError(f"atom probabilities sum to {probs.sum()!r}, not 1")
        if self.item_independent and not self.marginals:
            raise DomainError("item-independent distributions must carry their marginals")

    @classmethod
    def product(cls, marginals) -> "DistributionSpec":
        """Product of per-item marginals ``[[(values_for_all_buyers, prob), ...], ...]``."""
        margs = tuple(tuple((tuple(float(x) for x in vals), float(p)) for vals, p in mg)
                      for mg in marginals)
        for i, mg in enumerate(margs):
            if not mg:
                raise DomainError(f"marginal {i} is empty")
            if abs(sum(p for _, p in mg) - 1.0) > 1e-12:
                raise DomainError(f"marginal {i} probabilities do not sum to 1")
            if len({len(v) for v, _ in mg}) != 1:
                raise DomainError(f"marginal {i} atoms disagree on the buyer count")
        n = len(margs[0][0][0])
        atoms = []
        for combo in itertools.product(*margs):
            prob = math.prod(p for _, p in combo)
            buyers = tuple(Valuation.additive([vals[j] for vals, _ in combo], caps=[1] * len(margs))
                           for j in range(n))
            atoms.append((ValuationProfile(buyers), prob))
        # products of probabilities can drift from 1 by an ulp or two
        total = sum(p for _, p in atoms)
        atoms = [(a, p / total) for a, p in atoms]
        return cls(tuple(atoms), item_independent=True, marginals=margs)

    @classmethod
    def uniform(cls, profiles) -> "DistributionSpec":
        profiles = list(profiles)
        return cls(tuple((p, 1.0 / len(profiles)) for p in profiles))

    @property
    def probs(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    @property
    def profiles(self) -> list[ValuationProfile]:
        return [p for p, _ in self.atoms]


@dataclass(frozen=True)
class SampleSet:
    profiles: tuple[ValuationProfile, ...]
    seed: int | None = None
    atom_indices: tuple[int, ...] = field(default=(), compare=False)

    def __len__(self):
        return len(self.profiles)

    def grouped(self) -> list[tuple[ValuationProfile, int]]:
        """Distinct profiles with their multiplicities, in first-seen order."""
        counts: dict[ValuationProfile, int] = {}
        for p in self.profiles:
            counts[p] = counts.get(p, 0) + 1
        return list(counts.items())


def split_seeds(seed: int, k: int) -> list[int]:
    """``k`` independent child seeds derived from one root seed."""
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(k)]


def sample_profiles(d: DistributionSpec, N: int, seed: int) -> SampleSet:
    """Draw ``N`` i.i.d. profiles from ``d``; identical for identical ``(d, N, seed)``."""
    if N < 1:
        raise DomainError("N must be at least 1")
    rng = np.random.default_rng(seed)
    probs = d.probs
    idx = rng.choice(len(probs), size=N, p=probs / probs.sum())
    return SampleSet(tuple(d.atoms[i][0] for i in idx), seed=seed,
                     atom_indices=tuple(int(i) for i in idx))


def expected_profit(d: DistributionSpec, mech) -> float:
    """Exact expected profit of ``mech`` under ``d``."""
    from .mechanisms import profit

    return float(sum(w * profit(mech, prof).profit for prof, w in d.atoms))


# ---------------------------------------------------------------------------
# random instances (tests and experiments)


def random_monotone_table(rng: np.random.Generator, caps, scale: float = 10.0):
    """Random monotone table with v(0) = 0 over the lattice of ``caps``."""
    caps = tuple(int(k) for k in caps)
    table = {}
    for q in bundle_lattice(caps):
        if not any(q):
            table[q] = 0.0
            continue
        below = [table[q[:i] + (q[i] - 1,) + q[i + 1 :]] for i in range(len(q)) if q[i] > 0]
        table[q] = max(below) + float(rng.uniform(0, scale / max(1, sum(caps))))
    return table


def random_valuation(rng: np.random.Generator, kind: str, m: int, caps=None, scale=10.0):
    if kind == "additive":
        return Valuation.additive(rng.uniform(0, scale, m).round(6), caps=caps)
    if kind == "unit_demand":
        return Valuation.unit_demand(rng.uniform(0, scale, m).round(6), caps=caps)
    caps = tuple(caps) if caps is not None else (1,) * m
    return Valuation.general(random_monotone_table(rng, caps, scale), caps)


def random_profile(rng: np.random.Generator, n: int, m: int, kind: str = "additive",
                   caps=None, scale=10.0) -> ValuationProfile:
    return ValuationProfile(tuple(random_valuation(rng, kind, m, caps, scale) for _ in range(n)))


def random_unit_curve(rng: np.random.Generator, kappa: int, scale=10.0) -> Valuation:
    """Single-item, ``kappa``-unit valuation with decreasing marginal values."""
    marg = np.sort(rng.uniform(0, scale / kappa, kappa))[::-1]
    return Valuation.from_units(np.cumsum(marg).round(6))
