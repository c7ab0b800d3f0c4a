"""Hyperplane arrangements in parameter space and the cells they cut out.

For a fixed profile, every buyer's choice (and every auction's allocation) is
decided by a finite set of affine comparisons between options.  Each
comparison is a hyperplane in parameter space; inside a cell of the
arrangement all choices are fixed and profit is affine.  This module emits
those hyperplanes, enumerates cells (exactly in 2D, by sampling in general
dimension) and checks affinity numerically.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, GeometryError
from .mechanisms import (
    MechanismClass,
    allocation_bundles,
    allocations,
    evaluate_batch,
)
from .valuations import ValuationProfile, bundle_lattice, lattice_index, value

TAU_GEOM = 1e-10
TAU_MARGIN = 1e-8
TAU_AFFINE = 1e-7
DEDUP_TOL = 1e-11


class ThinCellWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Hyperplane:
    """The set ``normal . p = offset``; the positive side is ``normal . p > offset``."""

    normal: tuple[float, ...]
    offset: float
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(float(x) for x in self.normal))
        if not any(abs(x) > 0 for x in self.normal):
            raise DomainError(f"hyperplane {self.label!r} has a zero normal")


@dataclass(frozen=True)
class Cell:
    sign_vector: tuple[int, ...]
    witness: tuple[float, ...]
    margin: float
    vertices: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class AffineCheck:
    affine: bool
    max_residual: float
    coeffs: tuple[tuple[float, ...], float]


class Arrangement:
    """Deduplicated hyperplanes inside the box ``[lo, hi]``.

    Normals are scaled to unit length and oriented so their first non-zero
    component is positive; planes equal up to that tolerance merge their
    labels.
    """

    def __init__(self, hyperplanes: Iterable[Hyperplane], lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise DomainError("box bounds must be two vectors of equal length")
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise DomainError("box bounds must be finite")
        if (self.hi < self.lo).any():
            raise DomainError("box has hi < lo")
        self.d = len(self.lo)
        hs = list(hyperplanes)
        for h in hs:
            if len(h.normal) != self.d:
                raise DomainError(f"hyperplane {h.label!r} lives in R^{len(h.normal)}, box in R^{self.d}")
        self.hyperplanes, self.normals, self.offsets = _dedupe(hs, self.d)

    @property
    def k(self) -> int:
        return len(self.hyperplanes)

    def side(self, X: np.ndarray) -> np.ndarray:
        """Signed distances (B, k) of points to every hyperplane."""
        X = np.atleast_2d(X)
        return X @ self.normals.T - self.offsets

    def signs(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.side(X) > 0, 1, -1).astype(np.int8)

    def margin(self, x) -> float:
        x = np.asarray(x, dtype=float)
        box = float(min((x - self.lo).min(), (self.hi - x).min()))
        if self.k == 0:
            return box
        return min(box, float(np.abs(self.side(x)).min()))


def _dedupe(hs: list[Hyperplane], d: int):
    if not hs:
        return [], np.zeros((0, d)), np.zeros(0)
    A = np.array([h.normal for h in hs])
    b = np.array([h.offset for h in hs])
    norm = np.linalg.norm(A, axis=1)
    A, b = A / norm[:, None], b / norm
    first = np.argmax(np.abs(A) > 1e-12, axis=1)
    flip = A[np.arange(len(A)), first] < 0
    A[flip] *= -1
    b[flip] *= -1
    kept: list[int] = []
    labels: dict[int, list[str]] = {}
    KA = np.zeros((len(hs), d))
    Kb = np.zeros(len(hs))
    for idx in range(len(hs)):
        n = len(kept)
        if n:
            same = (np.abs(KA[:n] - A[idx]).max(axis=1) <= DEDUP_TOL) & \
                (np.abs(Kb[:n] - b[idx]) <= DEDUP_TOL * np.maximum(1.0, np.abs(b[idx])))
            hit = np.flatnonzero(same)
            if hit.size:
                labels[kept[hit[0]]].append(hs[idx].label)
                continue
        KA[n], Kb[n] = A[idx], b[idx]
        kept.append(idx)
        labels[idx] = [hs[idx].label]
    out = [Hyperplane(tuple(A[i]), float(b[i]), " | ".join(labels[i])) for i in kept]
    return out, A[kept], b[kept]


# ---------------------------------------------------------------------------
# hyperplane emission


def _pairwise(options: list[tuple[np.ndarray, float, str]], prefix: str) -> list[Hyperplane]:
    """Indifference hyperplanes between options with affine utility ``alpha . p + beta``.

    Options sharing a slope never change order, so only the best of each slope
    group takes part.
    """
    groups: dict[tuple, tuple[np.ndarray, float, str]] = {}
    for alpha, beta, name in options:
        key = tuple(np.round(alpha, 12))
        if key not in groups or beta > groups[key][1]:
            groups[key] = (alpha, beta, name)
    reps = list(groups.values())
    out = []
    for (a1, b1, n1), (a2, b2, n2) in itertools.combinations(reps, 2):
        # a1.p + b1 = a2.p + b2  <=>  (a1 - a2).p = b2 - b1
        out.append(Hyperplane(a1 - a2, b2 - b1, f"{prefix}: {n1} ~ {n2}"))
    return out


def _unit(d: int, *idx: int, scale: Sequence[float] | None = None) -> np.ndarray:
    a = np.zeros(d)
    for k, i in enumerate(idx):
        a[i] += 1.0 if scale is None else scale[k]
    return a


def hyperplanes_for(mclass: MechanismClass, profile: ValuationProfile, z=None) -> list[Hyperplane]:
    """The comparisons that decide every choice the mechanism makes on ``profile``.

    Returned raw (not deduplicated).  ``z`` adds the threshold planes of the
    relaxed lottery profit.
    """
    mc, d = mclass, mclass.dim
    if profile.n != mc.n or profile.m != mc.m:
        raise DomainError("profile does not match the class's n and m")
    k = mc.kind
    out: list[Hyperplane] = []
    if k == "two_part_tariff_menu":
        kappa = mc.kappa[0]
        for j, v in enumerate(profile.buyers):
            base = mc.block_of(j) * 2 * mc.ell
            opts = [(np.zeros(d), 0.0, "t=0")]
            for e in range(mc.ell):
                for t in range(1, kappa + 1):
                    alpha = -_unit(d, base + 2 * e) - t * _unit(d, base + 2 * e + 1)
                    opts.append((alpha, value(v, (t,)), f"entry {e} t={t}"))
            out += _pairwise(opts, f"buyer {j}")
    elif k == "item_pricing":
        out = _item_pricing_planes(mc, profile)
    elif k in ("nonlinear_pricing", "nonlinear_pricing_decomposable"):
        lattice = bundle_lattice(mc.kappa)
        dec = k == "nonlinear_pricing_decomposable"
        offsets = np.concatenate([[0], np.cumsum([c + 1 for c in mc.kappa])])
        width = int(offsets[-1]) if dec else len(lattice)
        for j, v in enumerate(profile.buyers):
            base = mc.block_of(j) * width
            opts = []
            for q in lattice:
                alpha = np.zeros(d)
                if dec:
                    for i, qi in enumerate(q):
                        if qi > 0:
                            alpha[base + offsets[i] + qi] -= 1.0
                elif any(q):
                    alpha[base + lattice_index(q, mc.kappa)] -= 1.0
                opts.append((alpha, value(v, q), f"q={q}"))
            out += _pairwise(opts, f"buyer {j}")
    elif k == "second_price_reserves":
        if any(b.kind != "additive" for b in profile.buyers):
            raise DomainError("second-price auctions need additive buyers")
        for i in range(mc.m):
            bids = profile.item_values(i)
            w = int(np.argmax(bids))
            second = sorted(bids)[-2] if mc.n > 1 else 0.0
            col = mc.block_of(w) * mc.m + i
            out.append(Hyperplane(_unit(d, col), bids[w], f"item {i}: reserve = top bid"))
            out.append(Hyperplane(_unit(d, col), second, f"item {i}: reserve = second bid"))
    elif k == "lottery_menu":
        out = _lottery_planes(mc, profile, z)
    elif k == "item_lottery_menu":
        if mc.cost.kind == "general":
            raise DomainError("item lottery menus need zero or additive cost")
        for j, v in enumerate(profile.buyers):
            for i in range(mc.m):
                opts = [(np.zeros(d), 0.0, "null")]
                for e in range(mc.ell):
                    col = i * 2 * mc.ell + 2 * e
                    alpha = _unit(d, col, col + 1, scale=(v.item_values[i], -1.0))
                    opts.append((alpha, 0.0, f"entry {e}"))
                out += _pairwise(opts, f"buyer {j} item {i}")
    elif k in ("lambda_auction", "mbarp"):
        out = _welfare_planes(mc, profile)
    else:
        raise DomainError(f"no hyperplane emission for {k} (its parameterization is not linear)")
    return out


def _item_pricing_planes(mc: MechanismClass, profile) -> list[Hyperplane]:
    d, m = mc.dim, mc.m
    out = []
    additive = all(b.kind == "additive" for b in profile.buyers)
    if additive and mc.anonymity == "anonymous" and mc.cost.kind != "general":
        for i in range(m):
            top = max(profile.item_values(i))
            out.append(Hyperplane(_unit(d, i), top, f"item {i}: price = top value"))
        return out
    for j, v in enumerate(profile.buyers):
        base = mc.block_of(j) * m
        if v.kind == "additive":
            for i in range(m):
                out.append(Hyperplane(_unit(d, base + i), v.item_values[i],
                                      f"buyer {j} item {i}: price = value"))
            continue
        if v.kind == "unit_demand":
            subsets = [tuple(0 for _ in range(m))] + [tuple(int(k == i) for k in range(m)) for i in range(m)]
        else:
            subsets = list(itertools.product((0, 1), repeat=m))
        opts = []
        for s in subsets:
            alpha = -sum((_unit(d, base + i) for i in range(m) if s[i]), np.zeros(d))
            opts.append((alpha, value(v, s), f"S={s}"))
        out += _pairwise(opts, f"buyer {j}")
    return out


def _lottery_planes(mc: MechanismClass, profile, z) -> list[Hyperplane]:
    d, m, ell = mc.dim, mc.m, mc.ell
    out = []
    width = ell * (m + 1)
    for j, v in enumerate(profile.buyers):
        if v.kind == "general":
            raise DomainError("lottery menus need additive or unit-demand buyers")
        base = mc.block_of(j) * width
        opts = [(np.zeros(d), 0.0, "null")]
        for e in range(ell):
            alpha = np.zeros(d)
            alpha[base + e * (m + 1) : base + e * (m + 1) + m] = v.item_values
            alpha[base + e * (m + 1) + m] = -1.0
            opts.append((alpha, 0.0, f"entry {e}"))
        out += _pairwise(opts, f"buyer {j}")
    if z is not None:
        z = np.asarray(z, dtype=float)
        unit_demand = any(b.kind == "unit_demand" for b in profile.buyers)
        for blk in range(mc.blocks):
            for e in range(ell):
                start = blk * width + e * (m + 1)
                for i in range(m):
                    if unit_demand:
                        alpha = _unit(d, *range(start, start + i + 1))
                        out.append(Hyperplane(alpha, z[0], f"block {blk} entry {e}: cumulative {i} = z"))
                    else:
                        out.append(Hyperplane(_unit(d, start + i), z[i], f"block {blk} entry {e} item {i}: phi = z"))
    return out


def _welfare_planes(mc: MechanismClass, profile) -> list[Hyperplane]:
    d, n, m = mc.dim, mc.n, mc.m
    allocs = allocations(n, m)
    index = {a: k for k, a in enumerate(allocs)}
    boost_of = {index[q]: b for b, q in enumerate(mc.boosted)}
    table = []
    for k, a in enumerate(allocs):
        bundles = allocation_bundles(a, n)
        vals = [value(profile.buyers[j], q) for j, q in enumerate(bundles)]
        c = sum(mc.cost.of(q) for q in bundles)
        alpha = np.zeros(d)
        if mc.kind == "lambda_auction":
            if k in boost_of:
                alpha[boost_of[k]] = 1.0
        else:
            for i, w in enumerate(a):
                if w == 0:
                    alpha[i] = 1.0
            if any(all(w == j for w in a) for j in range(1, n + 1)):
                alpha[m] = 1.0
        table.append((alpha, vals, c, a))
    out = []
    for skip in [None] + list(range(n)):
        opts = [(alpha, sum(v for j, v in enumerate(vals) if j != skip) - c, f"Q={a}")
                for alpha, vals, c, a in table]
        tag = "all bidders" if skip is None else f"without bidder {skip}"
        out += _pairwise(opts, tag)
    return out


def delineability(mclass: MechanismClass) -> tuple[int, int]:
    """The ``(d, t)`` pair the class's delineability result guarantees."""
    mc = mclass
    n, m, ell, kind = mc.n, mc.m, mc.ell, mc.kind
    K = math.prod(c + 1 for c in mc.kappa)
    if kind == "two_part_tariff_menu":
        kappa = mc.kappa[0]
        if n == 1 and ell == 1:
            return 2, math.comb(kappa + 1, 2)
        return mc.dim, n * (kappa * ell) ** 2
    if kind == "item_pricing":
        # buyer kinds are unknown here; the additive count covers additive profiles
        if mc.anonymity == "anonymous" and mc.cost.kind != "general":
            return mc.dim, m
        return mc.dim, n * m
    if kind in ("nonlinear_pricing", "nonlinear_pricing_decomposable"):
        return mc.dim, n * K ** 2
    if kind == "second_price_reserves":
        return mc.dim, 2 * m
    if kind == "lottery_menu":
        return mc.dim, n * ((ell + 1) ** 2 + m * ell)
    if kind == "item_lottery_menu":
        return mc.dim, n * m * ell ** 2
    if kind == "lambda_auction":
        q = len(mc.boosted)
        return q, (n + 1) * (q + 1) ** 2
    Ka = mc.n_allocations
    if kind == "ama":
        return 2 * n + n * (n - 1) + Ka + n * Ka, (n + 1) * Ka ** 2
    if kind == "vvca":
        Kv = n * 2 ** m
        return 2 * n + n * (n - 1) + Kv + n * Kv, (n + 1) * Ka ** 2
    return m + 1, (n + 1) * 2 ** (2 * m)


def item_pricing_t(mclass: MechanismClass, profile: ValuationProfile) -> int:
    """Hyperplane count guaranteed for item pricing given the buyers' kinds."""
    kinds = {b.kind for b in profile.buyers}
    if kinds == {"additive"}:
        return delineability(mclass)[1]
    if kinds <= {"additive", "unit_demand"}:
        return mclass.n * math.comb(mclass.m + 1, 2)
    return mclass.n * math.comb(2 ** mclass.m, 2)


def class_t(mclass: MechanismClass, profile: ValuationProfile) -> int:
    if mclass.kind == "item_pricing":
        return item_pricing_t(mclass, profile)
    return delineability(mclass)[1]


def buck_cell_bound(d: int, k: int) -> int:
    """``d * k**d`` (1 when there are no hyperplanes)."""
    if d < 1 or k < 0:
        raise DomainError("need d >= 1 and k >= 0")
    return 1 if k == 0 else d * k ** d


def pdim_upper_bound(d: int, t: int) -> float:
    if d < 1 or t < 1:
        raise DomainError("need d >= 1 and t >= 1")
    return 9.0 * d * math.log2(4.0 * d * t)


# ---------------------------------------------------------------------------
# boxes


def _max_value(profiles: Iterable[ValuationProfile]) -> float:
    best = 0.0
    for prof in profiles:
        for v in prof.buyers:
            if v.kind == "general":
                best = max(best, max(v.table))
            elif v.kind == "additive":
                caps = v.caps or (1,) * v.m
                best = max(best, sum(c * x for c, x in zip(caps, v.item_values)))
            else:
                best = max(best, max(v.item_values, default=0.0))
    return best


def default_box(mclass: MechanismClass, profiles: Iterable[ValuationProfile]):
    """``[0, 2 * max value]`` per price coordinate, ``[0, 1]`` per probability."""
    profiles = list(profiles)
    top = 2.0 * _max_value(profiles) or 1.0
    d = mclass.dim
    lo, hi = np.zeros(d), np.full(d, top)
    if mclass.kind == "lottery_menu":
        m = mclass.m
        unit = any(v.kind == "unit_demand" for p in profiles for v in p.buyers)
        for k in range(d):
            if k % (m + 1) < m:
                hi[k] = 1.0 / m if unit else 1.0
    elif mclass.kind == "item_lottery_menu":
        hi[0::2] = 1.0
    elif mclass.kind in ("ama", "vvca"):
        lo[: mclass.n] = 0.5
        hi[: mclass.n] = 2.0
    return lo, hi


def overlay(mclass: MechanismClass, profiles: Sequence[ValuationProfile], lo=None, hi=None,
            z=None) -> Arrangement:
    """Common refinement of the per-profile arrangements."""
    if lo is None or hi is None:
        lo, hi = default_box(mclass, profiles)
    hs = [h for prof in profiles for h in hyperplanes_for(mclass, prof, z)]
    return Arrangement(hs, lo, hi)


# ---------------------------------------------------------------------------
# exact 2D enumeration


def _split(poly: np.ndarray, s: np.ndarray):
    """Split a convex polygon by the sign of ``s`` (values at its vertices)."""
    pos, neg = [], []
    k = len(poly)
    for i in range(k):
        p, sp = poly[i], s[i]
        q, sq = poly[(i + 1) % k], s[(i + 1) % k]
        if sp >= -TAU_GEOM:
            pos.append(p)
        if sp <= TAU_GEOM:
            neg.append(p)
        if (sp > TAU_GEOM and sq < -TAU_GEOM) or (sp < -TAU_GEOM and sq > TAU_GEOM):
            x = p + (q - p) * (sp / (sp - sq))
            pos.append(x)
            neg.append(x)
    return np.array(pos), np.array(neg)


def polygon_cells(arr: Arrangement) -> list[np.ndarray]:
    """Convex polygons (vertex arrays, counter-clockwise) of the 2D arrangement."""
    if arr.d != 2:
        raise DomainError("exact enumeration needs d = 2")
    lo, hi = arr.lo, arr.hi
    polys = [np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])]
    bmin = np.array([lo]).copy()
    bmax = np.array([hi]).copy()
    for a, b in zip(arr.normals, arr.offsets):
        # a line misses a bbox when all four corners are on one side
        cx = np.stack([bmin[:, 0], bmax[:, 0], bmax[:, 0], bmin[:, 0]], axis=1)
        cy = np.stack([bmin[:, 1], bmin[:, 1], bmax[:, 1], bmax[:, 1]], axis=1)
        sc = a[0] * cx + a[1] * cy - b
        hit = np.flatnonzero((sc.max(axis=1) > TAU_GEOM) & (sc.min(axis=1) < -TAU_GEOM))
        new_polys, new_min, new_max = [], [], []
        for idx in hit:
            poly = polys[idx]
            s = poly @ a - b
            if s.max() <= TAU_GEOM or s.min() >= -TAU_GEOM:
                continue
            pos, neg = _split(poly, s)
            polys[idx] = pos
            bmin[idx], bmax[idx] = pos.min(axis=0), pos.max(axis=0)
            new_polys.append(neg)
            new_min.append(neg.min(axis=0))
            new_max.append(neg.max(axis=0))
        if new_polys:
            polys.extend(new_polys)
            bmin = np.vstack([bmin, new_min])
            bmax = np.vstack([bmax, new_max])
    return polys


def enumerate_cells_2d(arr: Arrangement, keep_thin: bool = False) -> list[Cell]:
    """Every full-dimensional cell of a 2D arrangement, each with a witness.

    Cells whose witness margin falls below ``TAU_MARGIN`` are dropped with a
    :class:`ThinCellWarning` unless ``keep_thin``.
    """
    cells = []
    thin = 0
    polys = polygon_cells(arr)
    if not polys:
        return cells
    cents = np.array([p.mean(axis=0) for p in polys])
    sides = arr.side(cents) if arr.k else np.zeros((len(polys), 0))
    box = np.minimum((cents - arr.lo).min(axis=1), (arr.hi - cents).min(axis=1))
    margins = np.minimum(box, np.abs(sides).min(axis=1)) if arr.k else box
    for poly, w, sd, mg in zip(polys, cents, sides, margins):
        if mg < TAU_MARGIN and not keep_thin:
            thin += 1
            continue
        sv = tuple(int(x) for x in np.where(sd > 0, 1, -1))
        cells.append(Cell(sv, tuple(w), float(mg), tuple(map(tuple, poly))))
    if thin:
        warnings.warn(f"{thin} cell(s) thinner than {TAU_MARGIN} dropped", ThinCellWarning)
    return cells


def sample_cells(arr: Arrangement, probes: int, seed: int, max_rounds: int = 50) -> list[Cell]:
    """Cells hit by ``probes`` uniform points (points too close to a plane are redrawn)."""
    if probes < 1:
        raise DomainError("probes must be at least 1")
    rng = np.random.default_rng(seed)
    found: dict[tuple, Cell] = {}
    need = probes
    for _ in range(max_rounds):
        if need <= 0:
            break
        X = rng.uniform(arr.lo, arr.hi, size=(need, arr.d))
        if arr.k:
            S = arr.side(X)
            ok = np.abs(S).min(axis=1) >= TAU_MARGIN
        else:
            S = np.zeros((len(X), 0))
            ok = np.ones(len(X), dtype=bool)
        ok &= np.minimum(X - arr.lo, arr.hi - X).min(axis=1) >= TAU_MARGIN
        X, S = X[ok], S[ok]
        need -= len(X)
        for x, s in zip(X, S):
            sv = tuple(int(v) for v in np.where(s > 0, 1, -1))
            if sv not in found:
                found[sv] = Cell(sv, tuple(x), arr.margin(x))
    return list(found.values())


# ---------------------------------------------------------------------------
# affinity check


def max_step(arr: Arrangement, x: np.ndarray, u: np.ndarray) -> float:
    """Largest ``t`` with ``x + t u`` still on the same side of every plane and in the box."""
    t = np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        if arr.k:
            s = arr.side(x)[0]
            rate = arr.normals @ u
            hit = -s / rate
            hit = hit[(rate != 0) & (hit > 0)]
            if hit.size:
                t = min(t, float(hit.min()))
        up = np.where(u > 0, (arr.hi - x) / u, np.inf)
        dn = np.where(u < 0, (arr.lo - x) / u, np.inf)
    return float(min(t, up.min(), dn.min()))


def _profit_at(mclass, profile, X, z):
    return evaluate_batch(mclass, profile, X, z=z).profit


def verify_affine_in_cell(mclass: MechanismClass, profile: ValuationProfile, cell: Cell,
                          arr: Arrangement, trials: int = 32, seed: int = 0, z=None) -> AffineCheck:
    """Fit profit as an affine function inside ``cell`` and test it at random in-cell points."""
    x0 = np.asarray(cell.witness, dtype=float)
    if cell.margin < TAU_MARGIN or arr.margin(x0) < TAU_MARGIN:
        raise GeometryError(f"cell witness margin {cell.margin:.3g} is below {TAU_MARGIN}")
    d = arr.d
    pts = [x0]
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        tp, tn = max_step(arr, x0, e), max_step(arr, x0, -e)
        step, sgn = (tp, 1.0) if tp >= tn else (tn, -1.0)
        if not np.isfinite(step) or step < TAU_MARGIN:
            raise GeometryError(f"cell is too thin along axis {k}")
        pts.append(x0 + sgn * 0.5 * step * e)
    F = np.array(pts)
    y = _profit_at(mclass, profile, F, z)
    A = np.column_stack([F, np.ones(d + 1)])
    coef = np.linalg.solve(A, y)
    rng = np.random.default_rng(seed)
    X = []
    for _ in range(trials):
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        t = max_step(arr, x0, u)
        X.append(x0 + rng.uniform(0, 0.95) * t * u)
    X = np.array(X) if X else np.zeros((0, d))
    yt = _profit_at(mclass, profile, X, z) if len(X) else np.zeros(0)
    pred = X @ coef[:d] + coef[d]
    resid = np.abs(yt - pred)
    ok = bool(np.all(resid <= TAU_AFFINE * (1 + np.abs(yt))))
    return AffineCheck(ok, float(resid.max()) if len(resid) else 0.0,
                       (tuple(float(c) for c in coef[:d]), float(coef[d])))


def demand_signature(mclass: MechanismClass, profile: ValuationProfile, x) -> tuple:
    """The allocation chosen at parameter point ``x``.

    For lottery menus the allocation moves with the parameters, so the
    signature is the index of the chosen menu entry instead (0 = nothing,
    ``e + 1`` = entry ``e``), per buyer, or per buyer and item.
    """
    x = np.asarray(x, dtype=float)
    b = evaluate_batch(mclass, profile, x[None, :])
    if mclass.kind == "lottery_menu":
        m, ell = mclass.m, mclass.ell
        sig = []
        for j in range(mclass.n):
            base = mclass.block_of(j) * ell * (m + 1)
            menu = x[base : base + ell * (m + 1)].reshape(ell, m + 1)
            sig.append((_entry(menu[:, :m], menu[:, m], b.alloc[0, j], b.payments[0, j]),))
        return tuple(sig)
    if mclass.kind == "item_lottery_menu":
        ell = mclass.ell
        sig = []
        for j in range(mclass.n):
            row = []
            for i in range(mclass.m):
                menu = x[i * 2 * ell : (i + 1) * 2 * ell].reshape(ell, 2)
                got = b.alloc[0, j, i : i + 1]
                row.append(_entry(menu[:, :1], None, got, None))
            sig.append(tuple(row))
        return tuple(sig)
    return tuple(tuple(int(round(v)) for v in q) for q in b.alloc[0])


def _entry(phi, price, got, paid) -> int:
    if not np.any(got) and (paid is None or paid == 0):
        return 0
    for e in range(len(phi)):
        if np.array_equal(phi[e], got) and (price is None or price[e] == paid):
            return e + 1
    return -1
