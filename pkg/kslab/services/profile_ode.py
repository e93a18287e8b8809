# kslab/services/profile_ode.py
"""
Backward self-similar profiles phi_m.

Pipeline: the first-order V-equation near s = 1/xi = 0 (solve_V_ivp), then
the phi-equation itself integrated inward from a large xi seeded by V
(phi_from_V), then continuation down toward xi = 0 until one of the three
alternatives for the left endpoint ell is decisive (continue_phi).

The phi-equation is integrated in eta = ln(xi) with psi = xi * phi':

    phi_eta = psi
    psi_eta = -N psi + (xi^2 / 2) psi + xi^2 phi (1 - psi - N phi)
"""
from __future__ import annotations

from dataclasses import replace
from math import inf

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp
from scipy.interpolate import CubicSpline, make_interp_spline

from config import get_config
from kslab.errors import SingularDenominator, TooCoarse
from kslab.extensions import logger
from kslab.models import (
    Classification,
    Dimension,
    SelfSimilarProfile,
    TailCoefficient,
    VSolution,
    VTermination,
    as_tail,
)

_cfg = get_config()

DENOMINATOR_FLOOR = 1e-12
V_CAP = 1e8
XI_SEED = 200.0
SAMPLES = 2000
REGULAR_SLOPE_TOL = 1e-6
# samples next to ell left out of the stored residual
NEAR_ELL_SAMPLES = 50


def _denominator(V, s, N):
    return 0.5 + (5 - N) * s ** 2 - V * s ** 2


def F_rhs(V: float, s: float, dim: Dimension) -> float:
    N = dim.N
    den = _denominator(V, s, N)
    if abs(den) <= DENOMINATOR_FLOOR:
        raise SingularDenominator(s, V)
    return (N - 2) * (2.0 * V * s - V * V * s) / den


def _F_unchecked(V, s, N):
    return (N - 2) * (2.0 * V * s - V * V * s) / _denominator(V, s, N)


def solve_V_ivp(
    m: float | TailCoefficient,
    dim: Dimension,
    s_max: float | None = None,
    tol: float | None = None,
) -> VSolution:
    m = as_tail(m)
    N = dim.N
    s_max = float(_cfg.PROFILE_S_MAX if s_max is None else s_max)
    tol = float(_cfg.PROFILE_TOL if tol is None else tol)
    s_start = 1e-4 * s_max

    if m.degenerate:
        # V = 2 solves the V-equation identically
        s = np.linspace(0.0, s_max, 201)
        return VSolution(m, dim, s, np.full_like(s, 2.0), VTermination.REACHED_SMAX, s_start,
                         monotone=True, dense=lambda x: np.full(np.shape(x), 2.0))

    curvature = 2.0 * (N - 2) * m.m * (2.0 - m.m)
    V_start = m.m + 0.5 * curvature * s_start ** 2

    def singular(s, y):
        return _denominator(y[0], s, N) - 1e3 * DENOMINATOR_FLOOR
    singular.terminal = True

    def diverged(s, y):
        return V_CAP - abs(y[0])
    diverged.terminal = True

    sol = solve_ivp(
        lambda s, y: [_F_unchecked(y[0], s, N)],
        (s_start, s_max),
        [V_start],
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-2,
        dense_output=True,
        events=(singular, diverged),
    )

    if sol.status == 1 and sol.t_events[0].size:
        reason = VTermination.DENOMINATOR_SINGULAR
    elif sol.status == 1:
        reason = VTermination.DIVERGED
    elif sol.status == 0:
        reason = VTermination.REACHED_SMAX
    else:
        # step-size underflow: only a vanishing denominator makes F this steep
        last_den = _denominator(sol.y[0, -1], sol.t[-1], N)
        reason = VTermination.DENOMINATOR_SINGULAR if abs(last_den) < 1e-3 else VTermination.DIVERGED
        logger.warning("[profile] V integration stopped at s=%.6g: %s", sol.t[-1], sol.message)

    head = np.linspace(0.0, s_start, 5)[:-1]
    s_samples = np.concatenate([head, sol.t])
    V_values = np.concatenate([m.m + 0.5 * curvature * head ** 2, sol.y[0]])

    steps = np.diff(V_values)
    slack = 10.0 * tol * max(1.0, m.m)
    monotone = bool(np.all(steps >= -slack)) if m.m < 2.0 else bool(np.all(steps <= slack))
    if not monotone:
        logger.warning("[profile] V lost monotonicity for m=%g N=%d", m.m, N)

    dense = sol.sol
    return VSolution(m, dim, s_samples, V_values, reason, s_start, monotone=monotone,
                     dense=lambda x: dense(x)[0])


# ---------------------------------------------------------------------------
# phi-equation in eta = ln(xi)
# ---------------------------------------------------------------------------

def _phi_rhs(N: int):
    def rhs(eta, y):
        phi, psi = y
        xi2 = np.exp(2.0 * eta)
        return [psi, -N * psi + 0.5 * xi2 * psi + xi2 * phi * (1.0 - psi - N * phi)]

    return rhs


def _phi_events(phi_cap: float, zero_tol: float):
    def cap(eta, y):
        return y[0] - phi_cap
    cap.terminal = True

    def zero(eta, y):
        return y[0] - zero_tol
    zero.terminal = True

    return cap, zero


def _samples_from(sol, eta_from: float, count: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Log-spaced samples of (xi, phi, phi') along a dense eta solution, in integration order."""
    eta_to = float(sol.t[-1])
    eta = np.linspace(eta_from, eta_to, count)
    phi, psi = sol.sol(eta)
    xi = np.exp(eta)
    return xi, phi, psi / xi


def phi_from_V(
    v: VSolution,
    phi_cap: float | None = None,
    zero_tol: float | None = None,
    samples: int = SAMPLES,
) -> SelfSimilarProfile:
    """
    Large-xi part of the profile. phi and phi' are seeded from V at xi = 200
    and the phi-equation is integrated inward to xi = 1/s_end.
    """
    phi_cap = float(_cfg.PHI_CAP if phi_cap is None else phi_cap)
    zero_tol = float(_cfg.ZERO_TOL if zero_tol is None else zero_tol)
    m, dim, N = v.m, v.dim, v.dim.N
    xi_lo = 1.0 / v.s_end
    xi_hi = max(XI_SEED, 2.0 * xi_lo)
    diagnostics: dict = {"stage": "partial", "xi_lo": xi_lo, "xi_seed": xi_hi,
                         "v_termination": v.terminal_reason.value}

    if m.degenerate:
        xi = np.geomspace(xi_hi, xi_lo, samples)
        return SelfSimilarProfile(m, dim, 0.0, Classification.INDETERMINATE, xi, 2.0 / xi ** 2,
                                  inf, dphi_values=-4.0 / xi ** 3, diagnostics=diagnostics)

    s = 1.0 / xi_hi
    V = float(v.at(s))
    V_s = _F_unchecked(V, s, N)
    phi0 = V * s ** 2
    dphi0 = -s ** 2 * (2.0 * s * V + s ** 2 * V_s)

    sol = solve_ivp(
        _phi_rhs(N), (np.log(xi_hi), np.log(xi_lo)), [phi0, xi_hi * dphi0],
        method="DOP853", rtol=1e-12, atol=1e-18, dense_output=True,
        events=_phi_events(phi_cap, zero_tol),
    )
    if sol.status == 1:
        which = "cap" if sol.t_events[0].size else "zero"
        diagnostics.update(event=which, xi_event=float(np.exp(sol.t[-1])))
    elif sol.status < 0:
        diagnostics.update(event="failed", reason=sol.message)

    xi, phi, dphi = _samples_from(sol, np.log(xi_hi), samples)
    return SelfSimilarProfile(m, dim, 0.0, Classification.INDETERMINATE, xi, phi, inf,
                              dphi_values=dphi, diagnostics=diagnostics)


def _unbounded_ell(xi: float, phi: float, dphi: float, N: int) -> tuple[float, float]:
    """
    Fit phi ~ C (xi - ell)^(-p) at the last state: q = phi'^2 / (phi phi'')
    equals p / (p + 1) for a power law.
    """
    ddphi = -((N + 1) / xi - xi / 2.0 + xi * phi) * dphi + phi * (1.0 - N * phi)
    q = dphi * dphi / (phi * ddphi) if phi * ddphi != 0.0 else 0.0
    if not 0.0 < q < 1.0 or dphi == 0.0:
        return 0.0, float("nan")
    p = q / (1.0 - q)
    ell = xi + p * phi / dphi
    return float(min(max(ell, 0.0), xi)), float(p)


def continue_phi(
    partial: SelfSimilarProfile,
    xi_floor: float | None = None,
    phi_cap: float | None = None,
    zero_tol: float | None = None,
    rtol: float | None = None,
    samples: int = SAMPLES,
) -> SelfSimilarProfile:
    xi_floor = float(_cfg.XI_FLOOR if xi_floor is None else xi_floor)
    phi_cap = float(_cfg.PHI_CAP if phi_cap is None else phi_cap)
    zero_tol = float(_cfg.ZERO_TOL if zero_tol is None else zero_tol)
    rtol = float(_cfg.PROFILE_TOL if rtol is None else rtol)
    N = partial.dim.N
    diagnostics = dict(partial.diagnostics, stage="continued", xi_floor=xi_floor)

    if partial.dphi_values is None:
        raise TooCoarse("continuation needs phi' at the last sample")
    xi0 = float(partial.xi_samples[-1])
    phi0 = float(partial.phi_values[-1])
    dphi0 = float(partial.dphi_values[-1])
    event = partial.diagnostics.get("event")

    if event in ("cap", "zero", "failed") or xi0 <= xi_floor:
        xi, phi, dphi = partial.xi_samples, partial.phi_values, partial.dphi_values
        status = {"cap": "cap", "zero": "zero", "failed": "failed"}.get(event, "floor")
        message = partial.diagnostics.get("reason", "")
    else:
        sol = solve_ivp(
            _phi_rhs(N), (np.log(xi0), np.log(xi_floor)), [phi0, xi0 * dphi0],
            method="DOP853", rtol=rtol, atol=rtol * 1e-6,
            dense_output=True, events=_phi_events(phi_cap, zero_tol),
        )
        tail_xi, tail_phi, tail_dphi = _samples_from(sol, np.log(xi0), samples)
        xi = np.concatenate([partial.xi_samples, tail_xi[1:]])
        phi = np.concatenate([partial.phi_values, tail_phi[1:]])
        dphi = np.concatenate([partial.dphi_values, tail_dphi[1:]])
        message = sol.message
        if sol.status == 1:
            status = "cap" if sol.t_events[0].size else "zero"
        elif sol.status == 0:
            status = "floor"
        else:
            status = "failed"

    xi_end, phi_end, dphi_end = float(xi[-1]), float(phi[-1]), float(dphi[-1])
    diagnostics["terminal"] = status

    if status == "cap":
        ell, power = _unbounded_ell(xi_end, phi_end, dphi_end, N)
        diagnostics["power"] = power
        classification, extension = Classification.UNBOUNDED, inf
    elif status == "zero":
        ell, classification, extension = xi_end, Classification.TOUCHES_ZERO, 0.0
    elif status == "floor":
        psi_end = xi_end * dphi_end
        slopes = np.abs(dphi[-min(10, dphi.size):])
        settling = bool(np.all(np.diff(slopes) <= 0.0))
        if abs(psi_end) <= REGULAR_SLOPE_TOL * max(1.0, abs(phi_end)) and settling:
            ell, classification, extension = 0.0, Classification.REGULAR, phi_end
        else:
            ell, classification, extension = 0.0, Classification.INDETERMINATE, phi_end
            diagnostics["reason"] = f"reached xi={xi_end:.3g} with xi*phi'={psi_end:.3g} still moving"
    else:
        ell, classification, extension = 0.0, Classification.INDETERMINATE, phi_end
        diagnostics["reason"] = f"integration failed at xi={xi_end:.3g}: {message}"

    profile = SelfSimilarProfile(partial.m, partial.dim, ell, classification, xi, phi, extension,
                                 dphi_values=dphi, diagnostics=diagnostics)
    logger.debug("[profile] m=%g N=%d -> %s ell=%.6g", partial.m.m, N, classification.value, ell)
    return profile


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def _ascending(p: SelfSimilarProfile, window: tuple[float, float] | None, with_slope: bool = False):
    xi, phi = p.xi_samples, p.phi_values
    order = np.argsort(xi)
    xi, phi = xi[order], phi[order]
    keep = np.concatenate([[True], np.diff(xi) > 0.0]) & (xi > 0.0)
    if window is not None:
        keep &= (xi >= window[0]) & (xi <= window[1])
    if not with_slope:
        return xi[keep], phi[keep]
    dphi = None if p.dphi_values is None else p.dphi_values[order][keep]
    return xi[keep], phi[keep], dphi


def residual_phi(
    p: SelfSimilarProfile,
    dim: Dimension | None = None,
    window: tuple[float, float] | None = None,
    skip: int = 0,
) -> float:
    """
    Max |phi'' + ((N+1)/xi - xi/2) phi' - phi + phi (xi phi' + N phi)| over the
    interior samples, leaving out `skip` samples at the small-xi end.

    Derivatives come from a quintic spline in eta = ln xi. When the profile
    carries phi', psi = xi phi' is splined instead and phi'' is taken as
    (psi_eta - psi) / xi^2, one spline derivative instead of two.
    """
    N = (dim or p.dim).N
    xi, phi, dphi = _ascending(p, window, with_slope=True)
    if xi.size < 5:
        raise TooCoarse("residual needs at least 5 samples")
    eta = np.log(xi)
    k = min(5, xi.size - 1)
    if dphi is None:
        spline = make_interp_spline(eta, phi, k=k)
        phi_e = spline.derivative(1)(eta)
        phi_ee = spline.derivative(2)(eta)
    else:
        phi_e = xi * dphi
        phi_ee = make_interp_spline(eta, phi_e, k=k).derivative(1)(eta)

    xi2 = xi * xi
    residual = (
        (phi_ee - phi_e) / xi2
        + ((N + 1) - 0.5 * xi2) * phi_e / xi2
        - phi
        + phi * (phi_e + N * phi)
    )
    edge = 3 if xi.size > 8 else 1
    interior = residual[edge + max(int(skip), 0):-edge]
    if interior.size == 0:
        raise TooCoarse(f"no samples left after skipping {skip} next to ell")
    return float(np.max(np.abs(interior)))


def weighted_flux_check(p: SelfSimilarProfile, dim: Dimension | None = None,
                        window: tuple[float, float] | None = None) -> float:
    """
    Relative mismatch between the change of the flux xi^(N+1) a phi' and the
    integral of xi^(N+1) a phi (1 - N phi), a = exp(-xi^2/4 + int rho phi).
    """
    N = (dim or p.dim).N
    xi, phi = _ascending(p, window)
    if xi.size < 5:
        raise TooCoarse("flux check needs at least 5 samples")
    eta = np.log(xi)
    dphi = make_interp_spline(eta, phi, k=min(5, xi.size - 1)).derivative(1)(eta) / xi

    log_a = -0.25 * xi * xi + cumulative_trapezoid(xi * xi * phi, eta, initial=0.0)
    log_weight = (N + 1) * np.log(xi) + log_a
    weight = np.exp(log_weight - np.max(log_weight))

    flux = weight * dphi
    rhs = cumulative_trapezoid(weight * phi * (1.0 - N * phi) * xi, eta, initial=0.0)
    lhs = flux - flux[0]
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    # both sides at round-off: the flux is constant
    if scale <= 1e-12 * max(1.0, float(np.max(np.abs(flux)))):
        return 0.0
    return float(np.max(np.abs(lhs - rhs)) / scale)


def evaluate_profile(p: SelfSimilarProfile, xi) -> np.ndarray:
    """
    phi on [0, inf): extension_value on [0, ell], samples inside, and the
    algebraic tail xi_max^2 phi(xi_max) / xi^2 beyond the last sample.
    """
    xi = np.asarray(xi, dtype=float)
    xs, ps = _ascending(p, None)
    out = np.empty(xi.shape)

    if np.all(ps > 0.0):
        spline = CubicSpline(np.log(xs), np.log(ps))
        inside = lambda x: np.exp(spline(np.log(x)))
    else:
        inside = lambda x: np.interp(x, xs, ps)

    lo, hi = float(xs[0]), float(xs[-1])
    tail = xi > hi
    mid = (xi >= lo) & ~tail
    below = xi < lo
    out[tail] = hi * hi * ps[-1] / xi[tail] ** 2
    out[mid] = inside(xi[mid])

    if np.any(below):
        gap = below & (xi > p.ell)
        out[below & ~gap] = p.extension_value
        power = p.diagnostics.get("power")
        if p.classification is Classification.UNBOUNDED and power and np.isfinite(power) and lo > p.ell:
            out[gap] = ps[0] * ((lo - p.ell) / (xi[gap] - p.ell)) ** power
        else:
            out[gap] = ps[0]
    return out


def build_profile(
    m: float | TailCoefficient,
    dim: Dimension,
    s_max: float | None = None,
    tol: float | None = None,
    xi_floor: float | None = None,
    phi_cap: float | None = None,
    zero_tol: float | None = None,
) -> SelfSimilarProfile:
    """Full profile, computed at tol and tol/2; disagreeing classifications come back Indeterminate."""
    m = as_tail(m)
    tol = float(_cfg.PROFILE_TOL if tol is None else tol)

    def once(t: float) -> SelfSimilarProfile:
        v = solve_V_ivp(m, dim, s_max, t)
        partial = phi_from_V(v, phi_cap, zero_tol)
        return continue_phi(partial, xi_floor, phi_cap, zero_tol, rtol=t)

    coarse, fine = once(tol), once(0.5 * tol)
    diagnostics = dict(fine.diagnostics)
    diagnostics["coarse_classification"] = coarse.classification.value
    diagnostics["ell_shift"] = abs(coarse.ell - fine.ell)

    partial_window = (float(diagnostics["xi_lo"]), float(diagnostics["xi_seed"]))
    near_ell = fine.classification in (Classification.TOUCHES_ZERO, Classification.UNBOUNDED)
    skip = NEAR_ELL_SAMPLES if near_ell else 0
    diagnostics["residual_skipped"] = skip
    try:
        diagnostics["residual"] = residual_phi(fine, skip=skip)
        diagnostics["flux_mismatch"] = weighted_flux_check(fine, window=partial_window)
    except TooCoarse:
        diagnostics["residual"] = diagnostics["flux_mismatch"] = None

    if coarse.classification is not fine.classification:
        logger.warning("[profile] m=%g N=%d: %s at tol, %s at tol/2", m.m, dim.N,
                       coarse.classification.value, fine.classification.value)
        diagnostics["reason"] = "classification changed under tolerance halving"
        return replace(fine, classification=Classification.INDETERMINATE, diagnostics=diagnostics)
    return replace(fine, diagnostics=diagnostics)
