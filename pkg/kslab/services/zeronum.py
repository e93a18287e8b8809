# kslab/services/zeronum.py
from __future__ import annotations

import numpy as np

from config import get_config
from kslab.errors import IncompatibleRuns, InvalidFrame
from kslab.models import BlowupRun, MonotonicityReport, SelfSimilarProfile, ZeroCountSeries
from kslab.services.profile_ode import evaluate_profile

_cfg = get_config()

TAIL_FRACTION = 0.2


def _zero_mask(values: np.ndarray, tol: float, scale) -> np.ndarray:
    finite = np.isfinite(values)
    return (finite & (np.abs(np.where(finite, values, 0.0)) <= tol * np.asarray(scale))) | np.isnan(values)


def count_sign_changes(values, tol: float = 0.0, scale=None) -> tuple[int, int]:
    """
    Number of strict sign alternations, skipping entries with |v| <= tol * scale.
    scale defaults to max |v| over the finite entries and may be given per entry.
    """
    v = np.asarray(values, dtype=float)
    if tol < 0.0:
        raise ValueError("tol must be >= 0")
    if scale is None:
        finite = v[np.isfinite(v)]
        scale = float(np.max(np.abs(finite))) if finite.size else 0.0
    zero = _zero_mask(v, tol, scale)
    signs = np.sign(v[~zero])
    count = int(np.count_nonzero(signs[1:] != signs[:-1])) if signs.size > 1 else 0
    return count, int(np.count_nonzero(zero))


def _profile_difference(snapshot, profile: SelfSimilarProfile, T: float):
    t, w = snapshot
    tau = T - t
    if tau <= 0.0:
        raise InvalidFrame(f"snapshot at t={t:.6g} is not before T={T:.6g}")
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        rescaled = evaluate_profile(profile, w.grid.nodes / np.sqrt(tau)) / tau
        difference = w.values - rescaled
        scale = np.fmax(np.abs(w.values), np.abs(rescaled))
    return difference, scale


def _tail_one_signed(difference: np.ndarray, scale, tol: float) -> bool:
    start = int(np.floor((1.0 - TAIL_FRACTION) * difference.size))
    tail = difference[start:]
    tail_scale = np.broadcast_to(scale, difference.shape)[start:]
    kept = tail[~_zero_mask(tail, tol, tail_scale)]
    return bool(kept.size == 0 or np.all(kept > 0.0) or np.all(kept < 0.0))


def intersection_count(snapshot, profile: SelfSimilarProfile, T: float, tol: float | None = None) -> tuple[int, int]:
    """Sign changes of w(r, t) - phi(r / sqrt(T - t)) / (T - t) over the grid."""
    tol = _cfg.ZERO_COUNT_TOL if tol is None else tol
    difference, scale = _profile_difference(snapshot, profile, T)
    return count_sign_changes(difference, tol, scale)


def monotonicity_verdict(series: ZeroCountSeries, tail_one_signed=()) -> MonotonicityReport:
    counts, times = series.counts, series.times
    violations = tuple(
        (float(times[k + 1]), int(counts[k]), int(counts[k + 1]))
        for k in range(counts.size - 1)
        if counts[k + 1] > counts[k]
    )
    # nodes inside the tolerance band are where contacts can be degenerate
    tangencies = tuple(float(t) for t, a in zip(times, series.ambiguous) if a > 0)
    return MonotonicityReport(series, not violations, violations, tangencies, tuple(tail_one_signed))


def monotonicity_report(run: BlowupRun, profile: SelfSimilarProfile, T: float,
                        tol: float | None = None) -> MonotonicityReport:
    tol = _cfg.ZERO_COUNT_TOL if tol is None else tol
    times, counts, ambiguous, tails = [], [], [], []
    for snapshot in run.snapshots:
        if snapshot.t >= T:
            continue
        difference, scale = _profile_difference(snapshot, profile, T)
        c, a = count_sign_changes(difference, tol, scale)
        times.append(snapshot.t)
        counts.append(c)
        ambiguous.append(a)
        tails.append(_tail_one_signed(difference, scale, tol))
    return monotonicity_verdict(ZeroCountSeries(times, counts, ambiguous), tails)


def pair_monotonicity_report(runA: BlowupRun, runB: BlowupRun, tol: float | None = None) -> MonotonicityReport:
    """Zero number of w_A - w_B at the snapshot times both runs share."""
    tol = _cfg.ZERO_COUNT_TOL if tol is None else tol
    by_time = {s.t: s.w for s in runB.snapshots}
    times, counts, ambiguous, tails = [], [], [], []
    for t, wA in runA.snapshots:
        wB = by_time.get(t)
        if wB is None:
            continue
        if not wA.grid.same_nodes(wB.grid):
            raise IncompatibleRuns(f"snapshots at t={t:.6g} sit on different grids")
        difference = wA.values - wB.values
        scale = np.maximum(np.abs(wA.values), np.abs(wB.values))
        c, a = count_sign_changes(difference, tol, scale)
        times.append(t)
        counts.append(c)
        ambiguous.append(a)
        tails.append(_tail_one_signed(difference, scale, tol))
    if not times:
        raise IncompatibleRuns("the runs share no snapshot times")
    return monotonicity_verdict(ZeroCountSeries(times, counts, ambiguous), tails)
