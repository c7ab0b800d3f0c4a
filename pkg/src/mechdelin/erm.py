"""Empirical profit maximization over a sample.

The exact route enumerates the cells of the overlay of all samples'
arrangements.  The weighted objective is affine on each cell, so its supremum
over the cell's closure sits at a vertex; since profit can jump on a boundary
we evaluate the true objective at the vertices themselves, at points pulled a
hair along each edge and into the cell, and at the centroid, then keep the
best.  Grid and random search are fallbacks (and oracles for the exact route).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConsistencyError, DomainError, ResourceError
from .mechanisms import MechanismClass, evaluate_batch
from .partition import TAU_AFFINE, default_box, overlay, polygon_cells
from .valuations import SampleSet, ValuationProfile

TAU_PULL = 1e-7
GRID_LIMIT = 2_000_000
CHUNK = 1 << 16


@dataclass(frozen=True)
class ObjectiveSpec:
    """``sum_s weights[s] * profit(profile_s)``; repeated profiles are merged."""

    profiles: tuple[ValuationProfile, ...]
    weights: tuple[float, ...]

    @classmethod
    def build(cls, samples, weights: Sequence[float] | None = None) -> "ObjectiveSpec":
        profiles = list(samples.profiles if isinstance(samples, SampleSet) else samples)
        if not profiles:
            raise DomainError("objective needs at least one sample")
        if weights is None:
            weights = [1.0 / len(profiles)] * len(profiles)
        if len(weights) != len(profiles):
            raise DomainError(f"{len(weights)} weights for {len(profiles)} samples")
        merged: dict[ValuationProfile, float] = {}
        for p, w in zip(profiles, weights):
            merged[p] = merged.get(p, 0.0) + float(w)
        return cls(tuple(merged), tuple(merged.values()))


@dataclass(frozen=True)
class ErmResult:
    best_params: np.ndarray
    best_value: float
    cells_examined: int
    method: str


def objective_values(mclass: MechanismClass, obj: ObjectiveSpec, P, z=None) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    out = np.zeros(len(P))
    for start in range(0, len(P), CHUNK):
        block = P[start : start + CHUNK]
        acc = np.zeros(len(block))
        for prof, w in zip(obj.profiles, obj.weights):
            if w != 0.0:
                acc += w * evaluate_batch(mclass, prof, block, z=z).profit
        out[start : start + CHUNK] = acc
    return out


def _box(mclass, obj, lo, hi):
    if lo is None or hi is None:
        dlo, dhi = default_box(mclass, obj.profiles)
        lo = dlo if lo is None else lo
        hi = dhi if hi is None else hi
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if lo.shape != (mclass.dim,) or hi.shape != (mclass.dim,):
        raise DomainError(f"box must have {mclass.dim} coordinates")
    return lo, hi


def _best(P: np.ndarray, vals: np.ndarray) -> tuple[np.ndarray, float]:
    k = int(np.argmax(vals))
    return P[k].copy(), float(vals[k])


def _polygon_candidates(poly: np.ndarray) -> np.ndarray:
    c = poly.mean(axis=0)
    pts = [poly, [c]]
    nxt, prv = np.roll(poly, -1, axis=0), np.roll(poly, 1, axis=0)
    for other in (nxt, prv):
        edge = other - poly
        length = np.linalg.norm(edge, axis=1, keepdims=True)
        step = np.minimum(TAU_PULL, 0.5 * length) / np.where(length > 0, length, 1.0)
        pts.append(poly + step * edge)
    toward = c - poly
    dist = np.linalg.norm(toward, axis=1, keepdims=True)
    pts.append(poly + np.minimum(TAU_PULL, 0.5 * dist) / np.where(dist > 0, dist, 1.0) * toward)
    return np.vstack(pts)


def _check_affine(polys, mclass, obj, z):
    """Fit the objective on interior points of each cell and demand exact affinity."""
    pts, owner = [], []
    for ci, poly in enumerate(polys):
        c = poly.mean(axis=0)
        inner = poly + 0.25 * (c - poly)
        if len(poly) < 3 or np.min(np.linalg.norm(inner - c, axis=1)) < 1e-6:
            continue
        pts.append(np.vstack([inner, [c]]))
        owner.append(ci)
    if not pts:
        return
    vals = objective_values(mclass, obj, np.vstack(pts), z)
    pos = 0
    for ci, X in zip(owner, pts):
        y = vals[pos : pos + len(X)]
        pos += len(X)
        A = np.column_stack([X, np.ones(len(X))])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = np.abs(A @ coef - y)
        if (resid > TAU_AFFINE * (1 + np.abs(y))).any():
            raise ConsistencyError(
                f"objective is not affine in overlay cell {ci} (residual {resid.max():.3g})"
            )


def erm_exact_lowdim(mclass: MechanismClass, obj: ObjectiveSpec, lo=None, hi=None, z=None,
                     check: bool = True) -> ErmResult:
    """Exact empirical maximum over the box, for d <= 2 or axis-aligned arrangements."""
    lo, hi = _box(mclass, obj, lo, hi)
    arr = overlay(mclass, obj.profiles, lo, hi, z)
    d = mclass.dim
    if d == 2:
        polys = polygon_cells(arr)
        if check:
            _check_affine(polys, mclass, obj, z)
        P = np.vstack([_polygon_candidates(p) for p in polys])
        vals = objective_values(mclass, obj, P, z)
        best, val = _best(P, vals)
        return ErmResult(best, val, len(polys), "exact_2d")
    axis = np.abs(arr.normals) > 1e-12
    if arr.k and (axis.sum(axis=1) != 1).any() and d != 1:
        raise DomainError("exact ERM needs d <= 2 or axis-aligned hyperplanes")
    coords = []
    for k in range(d):
        rows = axis[:, k] if arr.k else np.zeros(0, dtype=bool)
        cuts = arr.offsets[rows] / arr.normals[rows, k]
        cuts = np.unique(np.clip(np.concatenate([cuts, [lo[k], hi[k]]]), lo[k], hi[k]))
        mids = (cuts[:-1] + cuts[1:]) / 2
        near = np.concatenate([cuts - TAU_PULL, cuts + TAU_PULL])
        near = near[(near >= lo[k]) & (near <= hi[k])]
        coords.append(np.unique(np.concatenate([cuts, mids, near])))
    size = int(np.prod([len(c) for c in coords], dtype=float))
    if size > GRID_LIMIT:
        raise ResourceError(f"exact candidate grid of {size} points exceeds {GRID_LIMIT}")
    P = np.array(list(itertools.product(*coords)))
    vals = objective_values(mclass, obj, P, z)
    best, val = _best(P, vals)
    cells = int(np.prod([max(1, (len(c) - 1) // 4) for c in coords]))
    return ErmResult(best, val, cells, "exact_1d" if d == 1 else "exact_axis")


def grid_axes(lo, hi, resolution: float) -> list[np.ndarray]:
    if resolution <= 0:
        raise DomainError("resolution must be positive")
    axes = []
    for a, b in zip(lo, hi):
        n = int(np.floor((b - a) / resolution + 1e-9)) + 1
        ax = a + np.arange(n) * resolution
        if ax[-1] < b - 1e-12:
            ax = np.append(ax, b)
        axes.append(ax)
    return axes


def erm_grid(mclass: MechanismClass, obj: ObjectiveSpec, resolution: float, lo=None, hi=None,
             z=None, limit: int = GRID_LIMIT) -> ErmResult:
    """Best point of the axis grid ``lo + k * resolution`` (plus ``hi``)."""
    lo, hi = _box(mclass, obj, lo, hi)
    axes = grid_axes(lo, hi, resolution)
    size = int(np.prod([len(a) for a in axes], dtype=float))
    if size > limit:
        raise ResourceError(f"grid of {size} points exceeds the limit {limit}")
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.stack([g.ravel() for g in mesh], axis=1)
    vals = objective_values(mclass, obj, P, z)
    best, val = _best(P, vals)
    return ErmResult(best, val, size, "grid")


def erm_random(mclass: MechanismClass, obj: ObjectiveSpec, draws: int, seed: int, lo=None,
               hi=None, z=None, polish: bool = True, line_points: int = 65,
               sweeps: int = 8) -> ErmResult:
    """Uniform draws in the box, then coordinate-wise line search from the best draw."""
    if draws < 1:
        raise DomainError("draws must be at least 1")
    lo, hi = _box(mclass, obj, lo, hi)
    rng = np.random.default_rng(seed)
    P = rng.uniform(lo, hi, size=(draws, mclass.dim))
    vals = objective_values(mclass, obj, P, z)
    best, val = _best(P, vals)
    if polish:
        for _ in range(sweeps):
            improved = False
            for k in range(mclass.dim):
                line = np.repeat(best[None, :], line_points, axis=0)
                line[:, k] = np.linspace(lo[k], hi[k], line_points)
                lv = objective_values(mclass, obj, line, z)
                j = int(np.argmax(lv))
                if lv[j] > val + 1e-12:
                    best, val, improved = line[j].copy(), float(lv[j]), True
            if not improved:
                break
    return ErmResult(best, val, draws, "random")


def run_erm(mclass: MechanismClass, obj: ObjectiveSpec, method: str = "exact", *, seed: int = 0,
            resolution: float = 0.05, draws: int = 2000, lo=None, hi=None, z=None) -> ErmResult:
    if method in ("exact", "exact_2d"):
        return erm_exact_lowdim(mclass, obj, lo, hi, z)
    if method == "auto":
        try:
            return erm_exact_lowdim(mclass, obj, lo, hi, z)
        except (DomainError, ResourceError):
            return erm_random(mclass, obj, draws, seed, lo, hi, z)
    if method == "grid":
        return erm_grid(mclass, obj, resolution, lo, hi, z)
    if method == "random":
        return erm_random(mclass, obj, draws, seed, lo, hi, z)
    raise DomainError(f"unknown ERM method {method!r}")
