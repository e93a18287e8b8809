# kslab/services/analysis.py
"""
Post-processing of blow-up runs: final-time profiles W and U, the two
estimates of alpha = lim r^2 U = (N-2) lim r^2 W, and the a-priori bound and
self-similarity diagnostics.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy.interpolate import CubicSpline

from config import get_config
from kslab.errors import InvalidConfig, InvalidWindow, NotEnoughData, TooCoarse
from kslab.extensions import logger
from kslab.models import (
    BlowupRun,
    Dimension,
    ExtrapolatedField,
    ProfileReport,
    RadialField,
    RadialGrid,
    RegularityDiagnostics,
    Termination,
)
from kslab.services.radial import interpolate_field, u_from_w

_cfg = get_config()

EXTRAPOLATION_POINTS = 3
RESIDUAL_LIMIT = 1e-3
CORRECTION_LIMIT = 0.1


def _before(run: BlowupRun, T: float):
    return [s for s in run.snapshots if s.t < T]


def extract_W(run: BlowupRun, T: float, radii, n_points: int = EXTRAPOLATION_POINTS) -> ExtrapolatedField:
    """
    Fit w(r, t_k) = W(r) + c(r) (T - t_k) through the last snapshots at each
    radius. A radius counts as converged when the fit residual and the
    correction c (T - t_last) are both small against W.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0.0) or np.any(np.diff(radii) <= 0.0):
        raise InvalidConfig("radii must be positive and strictly increasing")
    snaps = _before(run, T)
    if len(snaps) < n_points:
        raise NotEnoughData(f"need {n_points} snapshots before T={T:.6g}, have {len(snaps)}")
    if run.termination is not Termination.BLOWUP_DETECTED:
        logger.warning("[analysis] extrapolating a run that ended %s", run.termination.value)

    snaps = snaps[-n_points:]
    tau = np.array([T - s.t for s in snaps])
    samples = np.array([interpolate_field(s.w, radii) for s in snaps])
    if np.any(~np.isfinite(samples)):
        raise InvalidConfig("radii fall outside the snapshot grids")

    design = np.column_stack([np.ones_like(tau), tau])
    coef, *_ = np.linalg.lstsq(design, samples, rcond=None)
    W, slope = coef[0], coef[1]
    fitted = design @ coef
    size = np.maximum(np.max(np.abs(samples), axis=0), np.finfo(float).tiny)
    residual = np.max(np.abs(fitted - samples), axis=0) / size
    correction = np.abs(slope) * tau.min()
    converged = (residual <= RESIDUAL_LIMIT) & (correction <= CORRECTION_LIMIT * np.abs(W)) & np.isfinite(W)

    grid = RadialGrid(radii, "annulus")
    return ExtrapolatedField(RadialField(grid, W, None), residual, converged, n_points)


def extract_U(W: RadialField, dim: Dimension) -> RadialField:
    """
    U = r W_r + N W. Positive W is differentiated as log W against log r,
    which is exact for power laws; anything else uses finite differences.
    """
    if W.grid.size < 3:
        raise TooCoarse("U needs W on at least 3 radii")
    r, values = W.grid.nodes, W.values
    if r[0] > 0.0 and np.all(values > 0.0):
        slope = CubicSpline(np.log(r), np.log(values)).derivative()(np.log(r))
        return RadialField(W.grid, values * (slope + dim.N), W.time)
    return u_from_w(W, dim)


def alpha_estimates(W: RadialField, U: RadialField, dim: Dimension, window: tuple[float, float]) -> ProfileReport:
    r_lo, r_hi = float(window[0]), float(window[1])
    if not 0.0 < r_lo < r_hi or r_hi < 4.0 * r_lo:
        raise InvalidWindow(f"window ({r_lo:g}, {r_hi:g}) must satisfy r_hi >= 4 r_lo > 0")
    r = W.grid.nodes
    inside = (r >= r_lo) & (r <= r_hi)
    if not np.any(inside):
        raise InvalidWindow(f"no sampled radii inside ({r_lo:g}, {r_hi:g})")

    r2U = r[inside] ** 2 * U.values[inside]
    r2W = r[inside] ** 2 * W.values[inside]
    alpha_U = float(np.median(r2U))
    alpha_W = float((dim.N - 2) * np.median(r2W))
    low, high = float(np.min(r2U)), float(np.max(r2U))
    plateau = high / low if low > 0.0 else float("inf")
    biggest = max(abs(alpha_U), abs(alpha_W))
    mismatch = abs(alpha_U - alpha_W) / biggest if biggest > 0.0 else 0.0
    status = "Converged" if mismatch <= _cfg.ALPHA_MISMATCH_LIMIT else "Unconverged"

    return ProfileReport(
        radii=r, W_values=W.values, U_values=U.values,
        alpha_from_U=alpha_U, alpha_from_W=alpha_W,
        plateau_ratio=plateau, mismatch=mismatch, status=status,
        window=(r_lo, r_hi), r2U_min=low, r2U_max=high,
    )


def _interior_derivatives(values: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Three-point first and second derivatives at the interior nodes of a graded grid."""
    h = np.diff(r)
    hl, hr = h[:-1], h[1:]
    left, mid, right = values[:-2], values[1:-1], values[2:]
    first = (-hr / (hl * (hl + hr))) * left + ((hr - hl) / (hl * hr)) * mid + (hl / (hr * (hl + hr))) * right
    second = 2.0 * (hr * left - (hl + hr) * mid + hl * right) / (hl * hr * (hl + hr))
    return first, second


def regularity_diagnostics(run: BlowupRun, dim: Dimension) -> RegularityDiagnostics:
    """
    sup r^4 (-w_rr)_+ and sup r^3 (-u_r)_+ per snapshot and overall, with
    u_r = r w_rr + (N+1) w_r taken from w at the interior nodes.
    """
    times, c4s, c3s = [], [], []
    for t, w in run.snapshots:
        if w.grid.size < 5:
            continue
        r = w.grid.nodes[1:-1]
        w_r, w_rr = _interior_derivatives(w.values, w.grid.nodes)
        u_r = r * w_rr + (dim.N + 1) * w_r
        c4s.append(float(np.max(r ** 4 * np.maximum(0.0, -w_rr))))
        c3s.append(float(np.max(r ** 3 * np.maximum(0.0, -u_r))))
        times.append(t)
    return RegularityDiagnostics(
        c4=max(c4s, default=0.0), c3=max(c3s, default=0.0),
        times=tuple(times), c4_series=tuple(c4s), c3_series=tuple(c3s),
    )


def typeB_diagnostic(run: BlowupRun, T: float, xi_window: tuple[float, float], dim: Dimension | None = None,
                     samples: int = 64) -> float:
    """
    max |g_{k+1} - g_k| over the xi-window for the last snapshot pairs, with
    g_k(xi) = (T - t_k) u(sqrt(T - t_k) xi, t_k).
    """
    dim = dim or run.config.dim
    snaps = _before(run, T)
    if len(snaps) < 3:
        raise NotEnoughData(f"need 3 snapshots before T={T:.6g}, have {len(snaps)}")
    xi = np.linspace(float(xi_window[0]), float(xi_window[1]), samples)
    rescaled = []
    for t, w in snaps[-3:]:
        tau = T - t
        u = u_from_w(w, dim)
        values = tau * interpolate_field(u, np.sqrt(tau) * xi)
        if np.any(~np.isfinite(values)):
            raise InvalidWindow(f"xi window {xi_window} leaves the grid at t={t:.6g}")
        rescaled.append(values)
    return float(max(np.max(np.abs(b - a)) for a, b in zip(rescaled, rescaled[1:])))


def blowup_set_heuristic(run: BlowupRun, bound_ratio: float = 1e-2) -> dict:
    """
    Values of u at fixed r > 0 that stay a small fraction of the final
    sup-norm suggest single-point blow-up. Recorded, never asserted.
    """
    radii = list(run.config.snapshot_radii)
    if run.tracked_values is None or not radii:
        return {"radii": [], "tracked_max": [], "final_sup": float(run.supnorm_values[-1]), "single_point": None}
    final_sup = float(run.supnorm_values[-1])
    tracked_max = np.max(run.tracked_values, axis=0)
    positive = np.array(radii) > 0.0
    bounded = tracked_max[positive] <= bound_ratio * final_sup
    return {
        "radii": radii,
        "tracked_max": tracked_max.tolist(),
        "final_sup": final_sup,
        "single_point": bool(np.all(bounded)) if bounded.size else None,
    }


def default_window(run: BlowupRun) -> tuple[float, float]:
    grid = run.snapshots[-1].w.grid
    lo = max(4.0 * grid.h_min, grid.r_min) if grid.r_min > 0.0 else 4.0 * grid.h_min
    return lo, 0.1 * grid.r_max


def build_report(
    run: BlowupRun,
    T: float,
    window: tuple[float, float] | None = None,
    typeB_window: tuple[float, float] | None = None,
    samples: int = 81,
) -> tuple[ProfileReport, ExtrapolatedField]:
    dim = run.config.dim
    window = window or default_window(run)
    if window[1] < 4.0 * window[0]:
        raise InvalidWindow(f"window {window} is narrower than a factor 4")
    radii = np.geomspace(window[0], window[1], samples)
    W = extract_W(run, T, radii)
    U = extract_U(W.field, dim)
    report = alpha_estimates(W.field, U, dim, window)

    typeB = None
    if typeB_window is not None:
        typeB = typeB_diagnostic(run, T, typeB_window, dim)

    unconverged = int(np.count_nonzero(~W.converged))
    if unconverged:
        logger.warning("[analysis] %d of %d radii did not settle under extrapolation", unconverged, radii.size)
    logger.info("[analysis] alpha_U=%.6g alpha_W=%.6g plateau=%.4g status=%s",
                report.alpha_from_U, report.alpha_from_W, report.plateau_ratio, report.status)

    return replace(report, regularity=regularity_diagnostics(run, dim), typeB_cauchy=typeB,
                   single_point=blowup_set_heuristic(run)), W
