"""Rate-distortion computation for a fixed discrete source.

The solver is an alternating-minimization sweep at a fixed trade-off slope
(bits of rate per unit of distortion, always <= 0) combined with bisection on
the slope to hit a target distortion. Slope 0 is the zero-rate endpoint; very
large negative slopes pin the distortion to its floor. All operations are
pure and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InfeasibleError, ValidationError
from .probcore import (
    Distribution,
    DistortionMatrix,
    TransitionMatrix,
    d_max,
    d_min,
    expected_distortion,
    mutual_information,
)

#: Default convergence tolerance on successive rate iterates.
BA_TOL = 1e-9
#: Default tolerance on |achieved distortion - target| in the slope bisection.
BISECT_TOL = 1e-6
#: Most negative slope tried before the distortion floor is declared reached.
SLOPE_FLOOR = -float(2**20)

_MAX_ITERS = 200_000
_LN2 = float(np.log(2.0))


@dataclass(frozen=True, eq=False)
class RdPoint:
    """One point of the rate-distortion curve with its achieving channel."""

    distortion: float
    rate: float
    channel: TransitionMatrix
    slope: float


@dataclass(frozen=True, eq=False)
class RdCurve:
    """Rate-distortion points of one source, sorted by distortion."""

    source: Distribution
    points: tuple[RdPoint, ...]

    def __post_init__(self):
        pts = tuple(self.points)
        for a, b in zip(pts, pts[1:]):
            if b.distortion < a.distortion - 1e-12:
                raise ValidationError("curve points must be sorted by distortion")
            if b.rate > a.rate + 1e-7:
                raise ValidationError("rates must be nonincreasing in distortion")
        object.__setattr__(self, "points", pts)

    def distortions(self) -> np.ndarray:
        return np.array([pt.distortion for pt in self.points])

    def rates(self) -> np.ndarray:
        return np.array([pt.rate for pt in self.points])


def _solve_fixed_slopes(ps, d_arr, slopes, tol, max_iters, q0=None):
    """Alternating minimization for a batch of sources at per-row slopes.

    ps: (N, X) source rows; d_arr: (X, Y); slopes: (N,) all <= 0. Returns
    (rate, dist, w, q, converged). A row is converged when the
    multiplicative-update certificate bounds its objective suboptimality by
    ``tol`` bits; the certificate makes convergence independent of the warm
    start ``q0`` (which is floored away from zero so mass can regrow). Rows
    whose slope is shallow enough that the zero-rate corner is optimal are
    recognized in closed form and skip the iteration entirely.
    """
    ps = np.asarray(ps, dtype=float)
    n, nx = ps.shape
    ny = d_arr.shape[1]
    rate = np.zeros(n)
    dist = np.zeros(n)
    w = np.zeros((n, nx, ny))
    q = np.zeros((n, ny))
    converged = np.zeros(n, dtype=bool)

    # first-order corner test: the best constant column is the global optimum
    # iff no other column has an update factor above 1 there
    best_cols = np.argmin(ps @ d_arr, axis=1)
    shifted = d_arr[None, :, :] - d_arr[:, best_cols].T[:, :, None]
    exponents = np.clip(slopes[:, None, None] * shifted, None, 1023.0)
    corner_factors = np.einsum("nx,nxy->ny", ps, np.exp2(exponents))
    corner = corner_factors.max(axis=1) <= 1.0 + 1e-12
    if corner.any():
        rows = np.nonzero(corner)[0]
        w[rows, :, best_cols[rows]] = 1.0
        q[rows, best_cols[rows]] = 1.0
        dist[rows] = (ps[rows] @ d_arr)[np.arange(rows.size), best_cols[rows]]
        converged[rows] = True

    # keep the largest exponent at zero per input row so that extreme slopes
    # cannot underflow the whole row
    gaps = d_arr - d_arr.min(axis=1, keepdims=True)
    argmin_cols = np.argmin(gaps, axis=1)
    kernel = np.exp2(slopes[:, None, None] * gaps[None, :, :])
    if q0 is None:
        q_iter = np.full((n, ny), 1.0 / ny)
    else:
        q_iter = np.maximum(np.asarray(q0, dtype=float), 1e-12)
        q_iter = q_iter / q_iter.sum(axis=1, keepdims=True)
    q[~corner] = q_iter[~corner]

    active = np.nonzero(~corner)[0]
    check_every = 1
    spent = 0
    while spent < max_iters and active.size:
        kern = kernel[active]
        q_act = q[active]
        ps_act = ps[active]
        # a burst of cheap multiplicative updates, then one convergence check;
        # bursts grow so warm starts exit fast and crawls stay cheap
        burst = min(check_every, max_iters - spent)
        check_every = min(check_every * 2, 16)
        q_prev2 = None
        for _ in range(burst - 1):
            scaled = kern * q_act[:, None, :]
            norms = scaled.sum(axis=2)
            if (norms <= 0.0).any():
                break
            q_prev2 = q_act
            q_act = np.einsum("nx,nxy->ny", ps_act, scaled / norms[:, :, None])
        scaled = kern * q_act[:, None, :]
        norms = scaled.sum(axis=2)
        dead = norms <= 0.0
        if dead.any():
            # the slope is steep enough that only the cheapest column survives
            rows, xs = np.nonzero(dead)
            scaled[rows, xs, :] = 0.0
            scaled[rows, xs, argmin_cols[xs]] = 1.0
            norms = scaled.sum(axis=2)
        w_act = scaled / norms[:, :, None]
        factors = np.einsum("nx,nxy->ny", ps_act / norms, kern)
        q_new = np.einsum("nx,nxy->ny", ps_act, w_act)
        joint = ps_act[:, :, None] * w_act
        mask = joint > 0
        ratio = np.divide(
            w_act,
            np.maximum(q_new[:, None, :], 1e-300),
            out=np.ones_like(w_act),
            where=mask,
        )
        log_ratio = np.log2(ratio, out=np.zeros_like(ratio), where=mask)
        new_rate = np.einsum("nxy,nxy->n", joint, log_ratio)
        gap = (factors.max(axis=1) - 1.0) / _LN2
        done = gap < tol
        w[active] = w_act
        q[active] = q_new
        rate[active] = new_rate
        dist[active] = np.einsum("nxy,xy->n", joint, d_arr)
        converged[active[done]] = True
        if q_prev2 is not None and not done.all():
            # geometric extrapolation from three consecutive iterates, kept
            # only where it strictly lowers the (monotone) objective; this
            # rescues the slow crawl near each row's zero-rate terminal slope
            d1 = q_act - q_prev2
            d2 = q_new - q_act
            denom = d2 - d1
            safe = np.abs(denom) > 1e-300
            ext = np.where(safe, q_new - np.divide(d2 * d2, denom, where=safe), q_new)
            ext = np.maximum(ext, 1e-20)
            ext = ext / ext.sum(axis=1, keepdims=True)
            ext_norms = np.einsum("ny,nxy->nx", ext, kern)
            new_norms = np.einsum("ny,nxy->nx", q_new, kern)
            ok = (ext_norms.min(axis=1) > 0.0) & (new_norms.min(axis=1) > 0.0)
            ext_value = -np.einsum(
                "nx,nx->n", ps_act, np.log2(np.maximum(ext_norms, 1e-300))
            )
            new_value = -np.einsum(
                "nx,nx->n", ps_act, np.log2(np.maximum(new_norms, 1e-300))
            )
            better = ok & (ext_value < new_value) & ~done
            rows = active[better]
            q[rows] = ext[better]
        active = active[~done]
        spent += burst
    return np.maximum(rate, 0.0), dist, w, q, converged


def _zero_rate_point(p: Distribution, d: DistortionMatrix) -> RdPoint:
    """The slope-0 limit: every input mapped to the best constant output."""
    col = int(np.argmin(p.probs @ d.values))
    w = np.zeros_like(d.values)
    w[:, col] = 1.0
    return RdPoint(d_max(p, d), 0.0, TransitionMatrix(w), 0.0)


def ba_fixed_slope(
    p: Distribution,
    d: DistortionMatrix,
    slope: float,
    tol: float = BA_TOL,
    max_iters: int = _MAX_ITERS,
) -> RdPoint:
    """Solve the trade-off at one fixed slope and return the resulting point.

    ``slope`` must be <= 0; slope 0 returns the zero-rate endpoint. Converged
    means a certified optimality gap below ``tol`` bits, which implies that
    successive rate iterates move by less than ``tol`` as well. Raises
    ConvergenceError (carrying the last iterate) if max_iters runs out first.
    """
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    if slope > 0:
        raise ValidationError("slope must be nonpositive")
    if p.size != d.num_inputs:
        raise ValidationError("source and distortion dimensions disagree")
    if slope == 0:
        return _zero_rate_point(p, d)
    rate, dist, w, _, converged = _solve_fixed_slopes(
        p.probs[None, :], d.values, np.array([slope]), tol, max_iters
    )
    point = RdPoint(float(dist[0]), float(rate[0]), TransitionMatrix(w[0]), slope)
    if not converged[0]:
        raise ConvergenceError(
            f"no convergence within {max_iters} iterations at slope {slope}",
            last_point=point,
        )
    return point


def _mix_channels(p, d, w_low, w_high, target, slope):
    """Land exactly on ``target`` along a flat segment by time-sharing the two
    bracketing channels; expected distortion is linear in the channel."""
    d_low = expected_distortion(p, TransitionMatrix(w_low), d)
    d_high = expected_distortion(p, TransitionMatrix(w_high), d)
    if abs(d_high - d_low) < 1e-300:
        alpha = 0.0
    else:
        alpha = (d_high - target) / (d_high - d_low)
    alpha = min(max(alpha, 0.0), 1.0)
    w = TransitionMatrix(alpha * w_low + (1.0 - alpha) * w_high)
    return RdPoint(
        expected_distortion(p, w, d), mutual_information(p, w), w, slope
    )


def _mix_fresh(p, d, lo, hi, target, ba_tol, max_iters) -> float:
    """Rate of the time-shared channel across a collapsed slope bracket, with
    both endpoint channels re-solved so neither is stale."""

    def solve(slope):
        _, _, w, _, converged = _solve_fixed_slopes(
            p.probs[None, :], d.values, np.array([slope]), ba_tol, max_iters
        )
        if not converged[0]:
            raise ConvergenceError(
                f"no convergence within {max_iters} iterations at slope {slope}"
            )
        return w[0]

    w_lo = solve(lo)
    w_hi = _zero_rate_point(p, d).channel.rows if hi == 0.0 else solve(hi)
    return _mix_channels(p, d, w_lo, w_hi, target, 0.5 * (lo + hi)).rate


def rate_at_distortion(
    p: Distribution,
    d: DistortionMatrix,
    target: float,
    tol: float = BISECT_TOL,
    *,
    ba_tol: float = BA_TOL,
    max_iters: int = _MAX_ITERS,
) -> RdPoint:
    """Rate (bits) needed to reproduce source ``p`` within distortion ``target``.

    Bisects the slope until the achieved distortion is within ``tol`` of the
    target. Targets at or above the zero-rate ceiling return rate 0; targets
    below the distortion floor raise InfeasibleError. A target equal to the
    floor is reached through the large-slope limit rather than a special case.
    """
    if target < 0:
        raise ValidationError("distortion target must be nonnegative")
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    floor = d_min(p, d)
    ceiling = d_max(p, d)
    if target < floor - 1e-12:
        raise InfeasibleError(
            f"target distortion {target} is below the floor {floor}",
            lhs=target,
            rhs=floor,
        )
    if target >= ceiling:
        return _zero_rate_point(p, d)

    def solve(slope, warm):
        rate, dist, w, q, converged = _solve_fixed_slopes(
            p.probs[None, :], d.values, np.array([slope]), ba_tol, max_iters, q0=warm
        )
        if not converged[0]:
            raise ConvergenceError(
                f"no convergence within {max_iters} iterations at slope {slope}",
                last_point=RdPoint(
                    float(dist[0]), float(rate[0]), TransitionMatrix(w[0]), slope
                ),
            )
        return float(rate[0]), float(dist[0]), w[0], q

    lo = -64.0
    r_lo, d_lo, w_lo, q_warm = solve(lo, None)
    while d_lo > target + tol and lo > SLOPE_FLOOR:
        lo = max(2.0 * lo, SLOPE_FLOOR)
        r_lo, d_lo, w_lo, q_warm = solve(lo, q_warm)
    if abs(d_lo - target) <= tol or d_lo > target:
        # target sits at the distortion floor to within working precision
        return RdPoint(d_lo, r_lo, TransitionMatrix(w_lo), lo)

    hi = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r_mid, d_mid, w_mid, q_warm = solve(mid, q_warm)
        if abs(d_mid - target) <= tol:
            return RdPoint(d_mid, r_mid, TransitionMatrix(w_mid), mid)
        if d_mid > target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-13 * max(1.0, -lo):
            break
    # the solver's distortion resolution is coarser than tol: time-share the
    # two sides of the (now tiny) bracket, re-solved fresh so neither channel
    # is stale
    _, _, w_lo, q_warm = solve(lo, q_warm)
    if hi == 0.0:
        w_hi = _zero_rate_point(p, d).channel.rows
    else:
        _, _, w_hi, q_warm = solve(hi, q_warm)
    return _mix_channels(p, d, w_lo, w_hi, target, 0.5 * (lo + hi))


def rd_curve(
    p: Distribution,
    d: DistortionMatrix,
    num_points: int,
    tol: float = BISECT_TOL,
    *,
    ba_tol: float = BA_TOL,
) -> RdCurve:
    """Rate-distortion curve sampled at ``num_points`` distortions linearly
    spaced across the interesting range [floor, ceiling]."""
    if num_points < 2:
        raise ValidationError("need at least two curve points")
    targets = np.linspace(d_min(p, d), d_max(p, d), num_points)
    points = [rate_at_distortion(p, d, float(t), tol, ba_tol=ba_tol) for t in targets]
    points.sort(key=lambda pt: pt.distortion)
    return RdCurve(p, tuple(points))


def rates_at_distortion_batch(
    ps: np.ndarray,
    d: DistortionMatrix,
    target: float,
    *,
    tol: float = BISECT_TOL,
    ba_tol: float = BA_TOL,
    max_iters: int = 50_000,
) -> np.ndarray:
    """Rates for many sources at one target distortion, solved side by side.

    Rows whose distortion floor exceeds the target get +inf (no channel can
    reach the target for them); rows whose ceiling is at or below the target
    get 0. This is the workhorse behind grid searches over sources.
    """
    ps = np.asarray(ps, dtype=float)
    n = ps.shape[0]
    d_arr = d.values
    rates = np.zeros(n)
    floors = ps @ d_arr.min(axis=1)
    ceilings = (ps @ d_arr).min(axis=1)
    rates[target < floors - 1e-12] = np.inf
    active = (target >= floors - 1e-12) & (target < ceilings)
    if not active.any():
        return rates

    idx = np.nonzero(active)[0]
    sub = ps[idx]
    m = len(idx)
    lo = np.full(m, -64.0)
    hi = np.zeros(m)
    q_warm = None

    def solve(slopes, warm):
        rate, dist, w, q, converged = _solve_fixed_slopes(
            sub, d_arr, slopes, ba_tol, max_iters, q0=warm
        )
        if not converged.all():
            bad = int(np.nonzero(~converged)[0][0])
            raise ConvergenceError(
                f"no convergence within {max_iters} iterations at slope "
                f"{slopes[bad]} for batch row {idx[bad]}"
            )
        return rate, dist, w, q

    rate_lo, dist_lo, _, q_warm = solve(lo, q_warm)
    widen = dist_lo > target + tol
    while widen.any() and lo.min() > SLOPE_FLOOR:
        lo[widen] = np.maximum(2.0 * lo[widen], SLOPE_FLOOR)
        rate_lo, dist_lo, _, q_warm = solve(lo, q_warm)
        widen = (dist_lo > target + tol) & (lo > SLOPE_FLOOR)

    done = np.zeros(m, dtype=bool)
    out = np.zeros(m)
    # rows already at the floor (or within tol of the target) are finished
    at_floor = (np.abs(dist_lo - target) <= tol) | (dist_lo > target)
    out[at_floor] = rate_lo[at_floor]
    done |= at_floor

    for _ in range(200):
        if done.all():
            break
        mid = 0.5 * (lo + hi)
        rate_mid, dist_mid, _, q_warm = solve(mid, q_warm)
        hit = (~done) & (np.abs(dist_mid - target) <= tol)
        out[hit] = rate_mid[hit]
        done |= hit
        go_hi = (~done) & (dist_mid > target)
        go_lo = (~done) & ~go_hi
        hi[go_hi] = mid[go_hi]
        lo[go_lo] = mid[go_lo]
        stuck = (~done) & (hi - lo <= 1e-13 * np.maximum(1.0, -lo))
        for r in np.nonzero(stuck)[0]:
            out[r] = _mix_fresh(
                Distribution(sub[r]), d, lo[r], hi[r], target, ba_tol, max_iters
            )
            done[r] = True
    for r in np.nonzero(~done)[0]:
        # bracket still open after the iteration cap: time-share what we have
        out[r] = _mix_fresh(
            Distribution(sub[r]), d, lo[r], hi[r], target, ba_tol, max_iters
        )
    rates[idx] = out
    return rates
