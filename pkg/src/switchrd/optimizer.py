"""Worst-case rate search: the largest rate-distortion value over the
attainable region, plus the no-lookahead baseline over the convex hull of the
sources.

The objective R_p(D) is not concave in p, so the search is a dense simplex
grid (small alphabets) or multistart projected ascent (larger ones); either
way the result is a certified feasible lower bound on the true maximum, exact
only up to the grid/ascent resolution. Results are deterministic for a fixed
config and seed, and merging uses value-then-lexicographic order so the
outcome does not depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .probcore import Distribution, DistortionMatrix, SourceList
from .rate_distortion import rates_at_distortion_batch
from .region import MEMBER_ATOL, RegionSpec, enumerate_constraints, is_member
from .strategy import greedy_max_rule, induced_distribution

_GRID_STEPS = {2: 0.005, 3: 0.02}
_HULL_STEPS = {1: 1.0, 2: 0.005, 3: 0.02, 4: 0.05}


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the maximizers.

    ``method`` "auto" picks a dense grid for small parameter dimension and
    multistart ascent otherwise; "grid"/"multistart" force one. ``grid_step``
    None uses the per-dimension defaults. Tolerances are passed through to the
    rate solver.
    """

    method: str = "auto"
    grid_step: float | None = None
    starts: int = 16
    seed: int = 0
    ascent_iters: int = 40
    fd_step: float = 1e-5
    distortion_tol: float = 1e-6
    ba_tol: float = 1e-9

    def __post_init__(self):
        if self.method not in ("auto", "grid", "multistart"):
            raise ValidationError(f"unknown search method {self.method!r}")
        if self.starts < 1:
            raise ValidationError("need at least one start")


@dataclass(frozen=True, eq=False)
class MaximizerResult:
    """Best point found: ``value`` = R_argmax(D) in bits. ``method`` is
    "grid" (dense enumeration plus one refinement) or "multistart" (heuristic
    lower bound). ``evaluations`` counts rate solves."""

    value: float
    argmax: Distribution
    method: str
    evaluations: int
    starts: int


def _simplex_grid(dim: int, step: float) -> np.ndarray:
    """Lattice points with coordinates that are multiples of ``step`` and sum
    to 1, in lexicographic order."""
    ticks = round(1.0 / step)
    points = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            points.append(prefix + [remaining])
            return
        for head in range(remaining + 1):
            rec(prefix + [head], remaining - head, slots - 1)

    rec([], ticks, dim)
    return np.array(points, dtype=float) / ticks


def _subset_matrix(k: int) -> np.ndarray:
    masks = np.arange(1, 1 << k)
    return ((masks[:, None] >> np.arange(k)[None, :]) & 1).astype(float)


def _better(value, vec, best_value, best_vec) -> bool:
    if value > best_value:
        return True
    return value == best_value and tuple(vec) < tuple(best_vec)


def _pick_best(values, vecs):
    best_value, best_vec = -np.inf, None
    for value, vec in zip(values, vecs):
        if best_vec is None or _better(value, vec, best_value, best_vec):
            best_value, best_vec = float(value), np.array(vec)
    return best_value, best_vec


def _ascend(x0, v0, batch_value, repair, config: SearchConfig):
    """Projected coordinate ascent with central finite differences.

    Probe and candidate points are repaired back into the feasible set, so the
    effective motion is along the feasible boundary when constraints bind.
    """
    x = np.array(x0, dtype=float)
    v = float(v0)
    k = x.size
    base_step = 0.05
    h = config.fd_step
    for _ in range(config.ascent_iters):
        probes = []
        for i in range(k):
            u = -np.full(k, 1.0 / k)
            u[i] += 1.0
            probes.append(repair(x + h * u))
            probes.append(repair(x - h * u))
        vals = batch_value(np.array(probes))
        if np.isinf(vals).any():
            hit = int(np.argmax(np.isinf(vals)))
            return probes[hit], np.inf
        slopes = (vals[0::2] - vals[1::2]) / (2.0 * h)
        direction = slopes - slopes.mean()
        norm = float(np.linalg.norm(direction))
        if norm < 1e-12:
            break
        direction /= norm
        steps = base_step * 0.5 ** np.arange(10)
        cands = np.array([repair(x + s * direction) for s in steps])
        cvals = batch_value(cands)
        best = int(np.argmax(cvals))
        if cvals[best] > v + 1e-12:
            x = cands[best]
            v = float(cvals[best])
            base_step = min(float(steps[best]) * 2.0, 0.25)
        else:
            break
    return x, v


def _region_repair(subset_mat, rhs, anchor):
    def ok(x):
        return bool(np.all(subset_mat @ x >= rhs - MEMBER_ATOL))

    def repair(y):
        y = np.clip(y, 0.0, None)
        total = y.sum()
        y = y / total if total > 0 else anchor.copy()
        if ok(y):
            return y
        lo, hi = 0.0, 1.0
        if not ok(anchor):
            return anchor.copy()
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if ok((1.0 - mid) * y + mid * anchor):
                hi = mid
            else:
                lo = mid
        return (1.0 - hi) * y + hi * anchor

    return repair, ok


def _region_candidates(spec: RegionSpec, config: SearchConfig):
    """Deterministic candidate set inside the region, the guaranteed feasible
    anchor (the greedy largest-symbol rule's output distribution) included."""
    k = spec.sources.alphabet_size
    anchor = induced_distribution(greedy_max_rule(spec.sources), spec.sources).probs
    method = config.method
    if method == "auto":
        method = "grid" if k <= 3 else "multistart"
    subset_mat = _subset_matrix(k)
    rhs = np.array([float(r) for _, r in enumerate_constraints(spec)])
    repair, ok = _region_repair(subset_mat, rhs, anchor)
    if method == "grid":
        step = config.grid_step if config.grid_step else _GRID_STEPS.get(k, 0.02)
        grid = _simplex_grid(k, step)
        feasible = grid[np.all(grid @ subset_mat.T >= rhs - MEMBER_ATOL, axis=1)]
        candidates = np.vstack([feasible, anchor[None, :]])
    else:
        rng = np.random.default_rng(config.seed)
        raw = rng.dirichlet(np.ones(k), size=config.starts)
        candidates = np.vstack([[repair(x) for x in raw], anchor[None, :]])
    return candidates, method, repair


def maximize_over_region(
    spec: RegionSpec,
    d: DistortionMatrix,
    target: float,
    config: SearchConfig | None = None,
) -> MaximizerResult:
    """Largest R_p(D) over attainable p, with the achieving distribution.

    Grid mode enumerates the feasible simplex lattice and refines the best
    cell by ascent; multistart mode ascends from every repaired random start.
    A +inf value means some attainable distribution has a distortion floor
    above the target, so no finite rate suffices.
    """
    config = config or SearchConfig()
    if target < 0:
        raise ValidationError("distortion target must be nonnegative")
    if d.num_inputs != spec.sources.alphabet_size:
        raise ValidationError("distortion and sources use different alphabets")
    candidates, method, repair = _region_candidates(spec, config)
    evaluations = 0

    def batch_value(ps):
        nonlocal evaluations
        evaluations += len(ps)
        return rates_at_distortion_batch(
            ps, d, target, tol=config.distortion_tol, ba_tol=config.ba_tol
        )

    values = batch_value(candidates)
    if np.isinf(values).any():
        inf_rows = candidates[np.isinf(values)]
        _, vec = _pick_best(np.zeros(len(inf_rows)), inf_rows)
        return MaximizerResult(np.inf, Distribution(vec), method, evaluations, 0)
    if method == "grid":
        seeds = [_pick_best(values, candidates)]
    else:
        seeds = list(zip(values.tolist(), candidates))
    best_value, best_vec = _pick_best(values, candidates)
    for v0, x0 in [(v, x) for v, x in seeds]:
        x, v = _ascend(x0, v0, batch_value, repair, config)
        if _better(v, x, best_value, best_vec):
            best_value, best_vec = v, x
    argmax = Distribution(best_vec)
    report = is_member(argmax, spec)
    if not report.satisfied:
        raise AssertionError("maximizer left the feasible region")
    return MaximizerResult(
        best_value, argmax, method, evaluations, len(seeds)
    )


def maximize_over_hull(
    sources: SourceList,
    d: DistortionMatrix,
    target: float,
    config: SearchConfig | None = None,
) -> MaximizerResult:
    """Largest R_p(D) over convex mixtures of the sources (the baseline
    attainable without lookahead). Searches mixture weights directly."""
    config = config or SearchConfig()
    if sources.is_joint:
        raise ValidationError("the hull baseline is defined for independent sources")
    if target < 0:
        raise ValidationError("distortion target must be nonnegative")
    rows = sources.as_array()
    m = rows.shape[0]
    evaluations = 0

    def batch_value(lams):
        nonlocal evaluations
        evaluations += len(lams)
        return rates_at_distortion_batch(
            lams @ rows, d, target, tol=config.distortion_tol, ba_tol=config.ba_tol
        )

    def repair(lam):
        lam = np.clip(lam, 0.0, None)
        total = lam.sum()
        return lam / total if total > 0 else np.full(m, 1.0 / m)

    if m == 1:
        value = float(batch_value(np.ones((1, 1)))[0])
        return MaximizerResult(value, Distribution(rows[0]), "grid", evaluations, 1)

    method = config.method
    if method == "auto":
        method = "grid" if m <= 4 else "multistart"
    if method == "grid":
        step = config.grid_step if config.grid_step else _HULL_STEPS.get(m, 0.05)
        lams = _simplex_grid(m, step)
    else:
        rng = np.random.default_rng(config.seed)
        lams = rng.dirichlet(np.ones(m), size=config.starts)
    values = batch_value(lams)
    if np.isinf(values).any():
        inf_rows = lams[np.isinf(values)]
        _, lam = _pick_best(np.zeros(len(inf_rows)), inf_rows)
        return MaximizerResult(np.inf, Distribution(lam @ rows), method, evaluations, 0)
    if method == "grid":
        seeds = [_pick_best(values, lams)]
    else:
        seeds = list(zip(values.tolist(), lams))
    best_value, best_lam = _pick_best(values, lams)
    for v0, lam0 in seeds:
        lam, v = _ascend(np.array(lam0), v0, batch_value, repair, config)
        if _better(v, lam, best_value, best_lam):
            best_value, best_lam = v, lam
    return MaximizerResult(
        best_value, Distribution(best_lam @ rows), method, evaluations, len(seeds)
    )


def rd_tilde_curve(
    spec: RegionSpec,
    d: DistortionMatrix,
    num_points: int,
    config: SearchConfig | None = None,
) -> list[tuple[float, MaximizerResult]]:
    """Worst-case rate over a distortion grid spanning the smallest floor and
    the largest ceiling seen across the candidate set."""
    config = config or SearchConfig()
    if num_points < 2:
        raise ValidationError("need at least two curve points")
    candidates, _, _ = _region_candidates(spec, config)
    floors = candidates @ d.values.min(axis=1)
    ceilings = (candidates @ d.values).min(axis=1)
    targets = np.linspace(float(floors.min()), float(ceilings.max()), num_points)
    return [
        (float(t), maximize_over_region(spec, d, float(t), config)) for t in targets
    ]
