# kslab/services/relaxation.py
"""
Relaxation oracle for the V-profile: march

    h_t = h_ss + s^-3 L h,
    L h = h_s ((5-N) s^2 + 1/2 - h s^2) - 2(N-2) h s + (N-2) h^2 s,

on [eps, Lm] from h(s, 0) = V(s) with V held at both ends, until h stops
moving. The IVP solution V solves L V = 0 only, so the steady state sits
about (1/2) V_ss(0) (Lm^4 - s^4) away from V.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded

from kslab.errors import DegenerateTail, InvalidConfig, NotConverged
from kslab.extensions import logger
from kslab.models import Dimension, RadialField, RadialGrid, RelaxationResult, TailCoefficient, as_tail
from kslab.services.profile_ode import solve_V_ivp

NODES = 4001
DT0 = 1e-5
DT_GROWTH = 1.5
DT_MAX = 0.05
STEADY_TOL = 1e-8
NEWTON_TOL = 1e-14
NEWTON_ITERS = 25


def _operator(h: np.ndarray, s: np.ndarray, ds: float, N: int):
    """Interior values of h_ss + s^-3 L h and the three bands of its Jacobian."""
    si = s[1:-1]
    hi = h[1:-1]
    d1 = (h[2:] - h[:-2]) / (2.0 * ds)
    d2 = (h[2:] - 2.0 * hi + h[:-2]) / ds ** 2
    B = (5 - N) * si ** 2 + 0.5 - hi * si ** 2
    inv3 = si ** -3
    L = d1 * B - 2.0 * (N - 2) * hi * si + (N - 2) * hi ** 2 * si
    value = d2 + inv3 * L

    lower = 1.0 / ds ** 2 - inv3 * B / (2.0 * ds)
    upper = 1.0 / ds ** 2 + inv3 * B / (2.0 * ds)
    diag = -2.0 / ds ** 2 + inv3 * (-d1 * si ** 2 - 2.0 * (N - 2) * si + 2.0 * (N - 2) * hi * si)
    return value, lower, diag, upper, L


def _implicit_step(h: np.ndarray, s: np.ndarray, ds: float, N: int, dt: float) -> np.ndarray | None:
    new = h.copy()
    previous = np.inf
    for _ in range(NEWTON_ITERS):
        value, lower, diag, upper, _ = _operator(new, s, ds, N)
        G = new[1:-1] - h[1:-1] - dt * value
        ab = np.zeros((3, G.size))
        ab[0, 1:] = -dt * upper[:-1]
        ab[1, :] = 1.0 - dt * diag
        ab[2, :-1] = -dt * lower[1:]
        try:
            delta = solve_banded((1, 1), ab, -G)
        except (np.linalg.LinAlgError, ValueError):
            return None
        new[1:-1] += delta
        if not np.all(np.isfinite(new)):
            return None
        size = float(np.max(np.abs(delta)))
        scale = max(1.0, float(np.max(np.abs(new))))
        if size <= NEWTON_TOL * scale:
            return new
        # stagnation at round-off level
        if size <= 1e3 * NEWTON_TOL * scale and size >= 0.5 * previous:
            return new
        previous = size
    return None


def h_relaxation_oracle(
    m: float | TailCoefficient,
    dim: Dimension,
    eps: float,
    Lm: float,
    t_end: float = 5.0,
    nodes: int = NODES,
    steady_tol: float = STEADY_TOL,
) -> RelaxationResult:
    m = as_tail(m)
    N = dim.N
    if m.degenerate:
        raise DegenerateTail("m = 2 is a fixed point; there is nothing to relax")
    if not 0.0 < eps < Lm:
        raise InvalidConfig(f"need 0 < eps < Lm, got eps={eps:g}, Lm={Lm:g}")

    v = solve_V_ivp(m, dim, s_max=max(1.0, 2.0 * Lm))
    if v.s_end < Lm:
        v.raise_for_status()
        raise InvalidConfig(f"Lm={Lm:g} lies beyond the V solution (s_end={v.s_end:.6g})")

    s = np.linspace(eps, Lm, nodes)
    ds = float(s[1] - s[0])
    V = np.asarray(v.at(s), dtype=float)
    grid = RadialGrid(s, "annulus")
    sign = 1.0 if m.m < 2.0 else -1.0

    _, _, _, _, L0 = _operator(V, s, ds, N)
    initial_residual = float(np.max(np.abs(L0)))

    h = V.copy()
    t, dt, steps = 0.0, DT0, 0
    min_ht = np.inf
    min_hs = float(np.min(sign * np.diff(h) / ds))
    converged = False

    while t < t_end:
        dt = min(dt, t_end - t)
        new = _implicit_step(h, s, ds, N, dt)
        if new is None:
            dt *= 0.5
            if dt < 1e-14:
                raise NotConverged(f"relaxation Newton failed at t={t:.6g}")
            continue
        rate = (new - h) / dt
        min_ht = min(min_ht, float(np.min(sign * rate)))
        min_hs = min(min_hs, float(np.min(sign * np.diff(new) / ds)))
        h, t, steps = new, t + dt, steps + 1
        if float(np.max(np.abs(rate))) <= steady_tol:
            converged = True
            break
        dt = min(dt * DT_GROWTH, DT_MAX)

    if not converged:
        raise NotConverged(f"relaxation still moving at t_end={t_end:g} after {steps} steps")

    value, _, _, _, _ = _operator(h, s, ds, N)
    relative = float(np.max(np.abs(h - V) / np.abs(V)))
    logger.info("[relax] m=%g N=%d eps=%g Lm=%g steady at t=%.4g (%d steps), max rel diff %.3g",
                m.m, N, eps, Lm, t, steps, relative)
    return RelaxationResult(
        field=RadialField(grid, h, t),
        ivp_field=RadialField(grid, V, None),
        t_reached=t,
        steps=steps,
        min_signed_ht=min_ht,
        min_signed_hs=min_hs,
        ivp_relative_difference=relative,
        steady_residual=float(np.max(np.abs(value))),
        initial_first_order_residual=initial_residual,
    )


def epsilon_ordering_check(
    m: float | TailCoefficient,
    dim: Dimension,
    eps_values,
    Lm: float,
    t_end: float = 5.0,
    nodes: int = NODES,
    tol: float = 1e-8,
) -> dict:
    """
    Steady states for several eps, compared on their common interval: for
    m < 2 a smaller eps gives the larger h, for m > 2 the smaller one.
    """
    m = as_tail(m)
    eps_values = sorted(float(e) for e in eps_values)
    results = {e: h_relaxation_oracle(m, dim, e, Lm, t_end, nodes) for e in eps_values}
    sign = 1.0 if m.m < 2.0 else -1.0

    pairs = []
    worst = np.inf
    for i, e1 in enumerate(eps_values):
        for e2 in eps_values[i + 1:]:
            small, large = results[e1].field, results[e2].field
            on_large = PchipInterpolator(small.r, small.values)(large.r)
            gap = float(np.min(sign * (on_large - large.values)))
            worst = min(worst, gap)
            pairs.append({"eps_small": e1, "eps_large": e2, "min_signed_gap": gap})

    return {"m": m.m, "N": dim.N, "Lm": Lm, "pairs": pairs, "passed": bool(worst >= -tol)}
