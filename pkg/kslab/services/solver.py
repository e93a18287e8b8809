# kslab/services/solver.py
"""
Time stepping for the radial mass-function equation

    w_t = w_rr + (N+1)/r w_r + u w,    u = r w_r + N w.

Diffusion is a finite-volume discretization of r^-(N+1) (r^(N+1) w_r)_r,
with zero flux at r = 0. The product u w is taken as N w^n w^{n+1} +
r w^n w_r^{n+1}, so each step is one tridiagonal solve. The matrix
I - dt A has nonnegative inverse while dt N max(w) < 1, so nonnegative data
stay nonnegative and ordered data stay ordered when two runs share their
step sequence.
"""
from __future__ import annotations

import warnings
from dataclasses import replace
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded

from kslab.errors import (
    EstimateUnreliable,
    IncompatibleRuns,
    InvalidConfig,
    InvalidFrame,
    PositivityWarning,
    StepFailed,
)
from kslab.extensions import logger
from kslab.models import (
    BlowupEstimate,
    BlowupRun,
    Dimension,
    InitialData,
    RadialField,
    RadialGrid,
    SelfSimilarFrameField,
    Snapshot,
    SolverConfig,
    Termination,
)
from kslab.services.initial_data import build_initial, inner_mass
from kslab.services.radial import sphere_area, w_from_u

CLAMP_WARN_FRACTION = 1e-3


@lru_cache(maxsize=16)
def _geometry(grid: RadialGrid, N: int):
    r = grid.nodes
    h = np.diff(r)
    faces = 0.5 * (r[:-1] + r[1:])
    edges = np.concatenate([[r[0]], faces, [r[-1]]])
    volumes = (edges[1:] ** (N + 2) - edges[:-1] ** (N + 2)) / (N + 2)
    conductance = faces ** (N + 1) / h
    return r, h, faces, volumes, conductance


def _operator_bands(w: np.ndarray, cfg: SolverConfig):
    """Bands (lower, diag, upper) of the linearized right-hand side A(w^n) w."""
    N = cfg.dim.N
    r, h, _, volumes, conductance = _geometry(cfg.grid, N)
    M = r.size
    lower = np.zeros(M)
    upper = np.zeros(M)
    diag = np.zeros(M)

    # diffusion
    lower[1:] = conductance / volumes[1:]
    upper[:-1] = conductance / volumes[:-1]
    diag -= lower + upper
    if cfg.outer_bc == "zero_density":
        diag[-1] -= N * r[-1] ** N / volumes[-1]

    # r w^n w_r: central where the bands stay nonnegative, forward otherwise
    a = r[1:-1] * w[1:-1]
    hl, hr = h[:-1], h[1:]
    c_lower = -hr / (hl * (hl + hr))
    c_diag = (hr - hl) / (hl * hr)
    c_upper = hl / (hr * (hl + hr))
    central = lower[1:-1] + a * c_lower >= 0.0
    lower[1:-1] += np.where(central, a * c_lower, 0.0)
    diag[1:-1] += np.where(central, a * c_diag, -a / hr)
    upper[1:-1] += np.where(central, a * c_upper, a / hr)

    # N w^n w^{n+1}; u = 0 at the outer node under zero_density
    reaction = N * w
    if cfg.outer_bc == "zero_density":
        reaction[-1] = 0.0
    diag += reaction
    return lower, diag, upper


def step(state: RadialField, dt: float, cfg: SolverConfig) -> RadialField:
    w = state.values
    N = cfg.dim.N
    if dt <= 0.0:
        raise StepFailed(f"non-positive time step {dt!r}")
    if dt * N * float(np.max(w, initial=0.0)) >= 1.0:
        raise StepFailed(f"dt={dt:.3g} breaks dt * N * max(w) < 1")

    lower, diag, upper = _operator_bands(w, cfg)
    M = w.size
    ab = np.zeros((3, M))
    ab[0, 1:] = -dt * upper[:-1]
    ab[1, :] = 1.0 - dt * diag
    ab[2, :-1] = -dt * lower[1:]
    rhs = w.copy()

    fixed = []
    if cfg.inner_bc == "dirichlet":
        fixed.append(0)
    if cfg.outer_bc == "dirichlet":
        fixed.append(M - 1)
    for i in fixed:
        ab[1, i] = 1.0
        if i + 1 < M:
            ab[0, i + 1] = 0.0
        if i - 1 >= 0:
            ab[2, i - 1] = 0.0

    try:
        new = solve_banded((1, 1), ab, rhs)
    except (np.linalg.LinAlgError, ValueError) as ex:
        raise StepFailed(f"banded solve failed at t={state.time}: {ex}") from ex
    if not np.all(np.isfinite(new)):
        raise StepFailed(f"non-finite values after step at t={state.time}")

    negative = new < 0.0
    clamped = int(np.count_nonzero(negative))
    if clamped:
        new[negative] = 0.0
        if clamped > CLAMP_WARN_FRACTION * M:
            warnings.warn(f"clamped {clamped} of {M} nodes to zero", PositivityWarning, stacklevel=2)
    return RadialField(state.grid, new, (state.time or 0.0) + dt)


def _u_values(w: np.ndarray, grid: RadialGrid, N: int) -> np.ndarray:
    r = grid.nodes
    return r * np.gradient(w, r, edge_order=2) + N * w


def _regridded(cfg: SolverConfig, w: np.ndarray, factor: float) -> tuple[SolverConfig, np.ndarray]:
    grid = cfg.grid
    ratio = grid.h_min / np.sqrt(factor) / grid.r_max
    fine = RadialGrid.logarithmic(grid.r_max, grid.cells, h_min_ratio=ratio)
    values = PchipInterpolator(grid.nodes, w)(fine.nodes)
    return replace(cfg, grid=fine), np.maximum(values, 0.0)


def run(cfg: SolverConfig, w0: RadialField) -> BlowupRun:
    N = cfg.dim.N
    if not w0.grid.same_nodes(cfg.grid):
        raise InvalidConfig("initial field is not on the configured grid")
    if np.any(w0.values < 0.0):
        raise InvalidConfig("w0 must be nonnegative")

    w = np.array(w0.values)
    t = 0.0
    tracked_radii = np.asarray(cfg.snapshot_radii, dtype=float)
    schedule = list(cfg.snapshot_schedule.times)
    growth = cfg.snapshot_schedule.growth_factor

    u = _u_values(w, cfg.grid, N)
    sup0 = float(np.max(np.abs(u)))
    if sup0 >= cfg.blowup_threshold:
        raise InvalidConfig(f"initial sup-norm {sup0:.3g} already exceeds blowup_threshold")

    times, sups, masses, tracked_rows = [], [], [], []
    sigma = sphere_area(cfg.dim)
    snapshots: list[Snapshot] = []

    def record(field_w: np.ndarray, field_u: np.ndarray, at: float):
        times.append(at)
        sups.append(float(np.max(np.abs(field_u))))
        masses.append(sigma * cfg.grid.r_max ** N * float(field_w[-1]))
        if tracked_radii.size:
            tracked_rows.append(np.interp(tracked_radii, cfg.grid.nodes, field_u))

    def snap(field_w: np.ndarray, at: float):
        if not snapshots or at > snapshots[-1].t:
            snapshots.append(Snapshot(at, RadialField(cfg.grid, field_w, at)))

    record(w, u, t)
    snap(w, t)
    last_snap_sup = sup0
    regridded = False
    termination = Termination.TIME_CAP
    aborted, message = False, ""

    logger.info("[run] start N=%d nodes=%d sup=%.6g cap=%.6g", N, cfg.grid.size, sup0, cfg.time_cap)
    for _ in range(cfg.max_steps):
        sup_u = sups[-1]
        if t >= cfg.time_cap * (1.0 - 1e-14):
            termination = Termination.TIME_CAP
            break
        while schedule and schedule[0] <= t * (1.0 + 1e-14):
            schedule.pop(0)

        rate = max(sup_u, N * float(np.max(w, initial=0.0)))
        dt = cfg.dt_max if rate == 0.0 else min(cfg.dt_max, cfg.dt_safety / rate)
        dt = min(dt, cfg.time_cap - t)
        hit_schedule = bool(schedule) and schedule[0] - t <= dt
        if hit_schedule:
            dt = schedule[0] - t

        try:
            new = step(RadialField(cfg.grid, w, t), dt, cfg).values
        except StepFailed as ex:
            logger.exception("[run] step failed at t=%.6g", t)
            aborted, message = True, str(ex)
            break

        change = float(np.max(np.abs(new - w))) / dt
        t = schedule.pop(0) if hit_schedule else t + dt
        w = new
        u = _u_values(w, cfg.grid, N)
        record(w, u, t)
        sup_u = sups[-1]

        take = hit_schedule
        if growth and sup_u >= growth * last_snap_sup:
            take, last_snap_sup = True, sup_u
        if take:
            snap(w, t)

        if sup_u >= cfg.blowup_threshold:
            termination = Termination.BLOWUP_DETECTED
            break
        if change <= cfg.steady_tol * max(1.0, float(np.max(w, initial=0.0))):
            termination = Termination.STEADY_STATE
            break

        if (cfg.regrid_factor and not regridded and cfg.grid.grading != "annulus"
                and sup_u >= cfg.regrid_factor * max(sup0, np.finfo(float).tiny) and sup0 > 0.0):
            cfg, w = _regridded(cfg, w, cfg.regrid_factor)
            regridded = True
            logger.info("[run] regrid t=%.8g h_min=%.3g", t, cfg.grid.h_min)
    else:
        aborted, message = True, f"step budget of {cfg.max_steps} exhausted"
        logger.warning("[run] %s at t=%.6g", message, t)

    snap(w, t)
    logger.info("[run] done %s t=%.8g sup=%.6g snapshots=%d", termination.value, t, sups[-1], len(snapshots))
    return BlowupRun(
        config=cfg,
        snapshots=tuple(snapshots),
        supnorm_times=np.array(times),
        supnorm_values=np.array(sups),
        mass_values=np.array(masses),
        termination=termination,
        tracked_values=np.array(tracked_rows) if tracked_rows else None,
        aborted=aborted,
        message=message,
    )


def _history_arrays(history) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(history, BlowupRun):
        return np.asarray(history.supnorm_times), np.asarray(history.supnorm_values)
    pairs = np.asarray(list(history), dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise EstimateUnreliable("history must be a sequence of (t, supnorm) pairs")
    return pairs[:, 0], pairs[:, 1]


def estimate_blowup_time(history) -> BlowupEstimate:
    """
    Least-squares line through 1/||u|| against t over the last decade of
    growth; the blow-up time is its root.
    """
    t, sup = _history_arrays(history)
    if t.size < 10:
        raise EstimateUnreliable(f"need at least 10 samples, got {t.size}")
    if sup[0] <= 0.0 or sup[-1] < 10.0 * np.min(sup):
        raise EstimateUnreliable("sup-norm grew less than 10x")

    tail = sup >= sup[-1] / 10.0
    first = int(np.argmax(tail))
    tt, ss = t[first:], sup[first:]
    if tt.size < 3:
        raise EstimateUnreliable("too few samples in the last decade")
    if np.any(np.diff(ss) <= 0.0):
        raise EstimateUnreliable("sup-norm is not increasing over the last decade")

    y = 1.0 / ss
    slope, intercept = np.polyfit(tt, y, 1)
    if slope >= 0.0:
        raise EstimateUnreliable("1/||u|| is not decreasing")
    T = -intercept / slope
    if not np.isfinite(T) or T <= tt[-1]:
        raise EstimateUnreliable(f"estimated T={T:.6g} does not exceed the last sample time")
    residual = float(np.sqrt(np.mean((y - (slope * tt + intercept)) ** 2)) / np.max(y))
    return BlowupEstimate(T_est=float(T), fit_residual=residual, rate_constant=float(slope),
                          n_points=int(tt.size))


def rescale_to_selfsimilar(snapshot, T: float) -> SelfSimilarFrameField:
    t, w = snapshot
    tau = T - t
    if tau <= 0.0:
        raise InvalidFrame(f"snapshot at t={t:.6g} is not before T={T:.6g}")
    return SelfSimilarFrameField(w.grid.nodes / np.sqrt(tau), tau * w.values, -np.log(tau))


def comparison_check(runA: BlowupRun, runB: BlowupRun, tol: float = 0.0) -> bool:
    """True iff w_A <= w_B + tol at every snapshot time both runs recorded."""
    if not runA.config.grid.same_nodes(runB.config.grid):
        raise IncompatibleRuns("runs were computed on different grids")
    by_time = {s.t: s.w for s in runB.snapshots}
    shared = 0
    for t, wA in runA.snapshots:
        wB = by_time.get(t)
        if wB is None:
            continue
        if not wA.grid.same_nodes(wB.grid):
            raise IncompatibleRuns(f"snapshots at t={t:.6g} sit on different grids")
        shared += 1
        if np.any(wA.values > wB.values + tol):
            return False
    if shared == 0:
        raise IncompatibleRuns("the runs share no snapshot times")
    return True


def initial_w(data: InitialData, grid: RadialGrid, dim: Dimension) -> RadialField:
    """w0 = w_from_u(u0), seeding annulus grids with the analytic inner integral."""
    u0 = build_initial(data, grid, dim)
    seed = inner_mass(data, grid.r_min, dim) if grid.grading == "annulus" else None
    return w_from_u(u0, dim, seed)


def find_blowup_amplitude(
    dim: Dimension,
    grid: RadialGrid,
    sigma: float = 1.0,
    time_cap: float = 1.0,
    A_lo: float = 1.0,
    A_hi: float = 50.0,
    iterations: int = 12,
    blowup_threshold: float = 1e5,
    **solver_kwargs,
) -> tuple[float, float]:
    """
    Bisect the gaussian amplitude between bounded and blowing-up runs.
    Returns (A_bounded, A_blowup), the final bracket.
    """
    def blows_up(A: float) -> bool:
        cfg = SolverConfig(dim, grid, time_cap=time_cap, blowup_threshold=blowup_threshold,
                           regrid_factor=None, **solver_kwargs)
        result = run(cfg, initial_w(InitialData.gaussian(A, sigma), grid, dim))
        logger.info("[bisect] A=%.6g -> %s", A, result.termination.value)
        return result.termination is Termination.BLOWUP_DETECTED

    if blows_up(A_lo):
        raise InvalidConfig(f"A_lo={A_lo:g} already blows up before t={time_cap:g}")
    for _ in range(8):
        if blows_up(A_hi):
            break
        A_lo, A_hi = A_hi, 2.0 * A_hi
    else:
        raise InvalidConfig(f"no blow-up before t={time_cap:g} up to A={A_hi:g}")

    for _ in range(iterations):
        mid = 0.5 * (A_lo + A_hi)
        if blows_up(mid):
            A_hi = mid
        else:
            A_lo = mid
    return A_lo, A_hi
