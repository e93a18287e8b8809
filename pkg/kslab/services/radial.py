# kslab/services/radial.py
"""
Radial transforms between the density u and its ball average w, plus the
basic functionals on radial fields.
"""
from __future__ import annotations

from math import gamma, pi

import numpy as np
from scipy.interpolate import PchipInterpolator

from kslab.errors import MissingInnerMass, TooCoarse
from kslab.models import Dimension, RadialField, RadialGrid


def sphere_area(dim: Dimension) -> float:
    """Surface area of the unit sphere in R^N."""
    N = dim.N
    return 2.0 * pi ** (N / 2.0) / gamma(N / 2.0)


def cell_moments(grid: RadialGrid, values: np.ndarray, dim: Dimension) -> np.ndarray:
    """
    Integral of s^(N-1) times the piecewise-linear interpolant of `values`
    over each cell. Gauss-Legendre with N//2 + 1 points is exact for the
    degree-N integrand.
    """
    N = dim.N
    x, wts = np.polynomial.legendre.leggauss(N // 2 + 1)
    a, b = grid.nodes[:-1], grid.nodes[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    theta = 0.5 * (x + 1.0)  # position inside the cell, in [0, 1]
    s = mid[:, None] + half[:, None] * x[None, :]
    lin = values[:-1, None] * (1.0 - theta[None, :]) + values[1:, None] * theta[None, :]
    return half * np.sum(wts[None, :] * s ** (N - 1) * lin, axis=1)


def w_from_u(u: RadialField, dim: Dimension, inner_mass: float | None = None) -> RadialField:
    grid = u.grid
    N = dim.N
    if grid.grading == "annulus" and inner_mass is None:
        raise MissingInnerMass(
            f"annulus grid starting at r={grid.r_min:g} needs the integral of s^(N-1) u over [0, r_min]"
        )
    base = 0.0 if inner_mass is None else float(inner_mass)
    if grid.size == 1:
        value = u.values[0] / N if grid.r_min == 0.0 else base / grid.r_min ** N
        return RadialField(grid, [value], u.time)

    cumulative = base + np.concatenate([[0.0], np.cumsum(cell_moments(grid, u.values, dim))])
    r = grid.nodes
    w = np.empty_like(cumulative)
    positive = r > 0.0
    w[positive] = cumulative[positive] / r[positive] ** N
    w[~positive] = u.values[~positive] / N
    return RadialField(grid, w, u.time)


def u_from_w(w: RadialField, dim: Dimension) -> RadialField:
    if w.grid.size < 3:
        raise TooCoarse("u = r w_r + N w needs at least 3 nodes")
    r = w.grid.nodes
    w_r = np.gradient(w.values, r, edge_order=2)
    return RadialField(w.grid, r * w_r + dim.N * w.values, w.time)


def mass(u: RadialField, dim: Dimension, inner_mass: float = 0.0) -> float:
    if u.grid.size < 2:
        return 0.0
    return sphere_area(dim) * (inner_mass + float(np.sum(cell_moments(u.grid, u.values, dim))))


def mass_from_w(w: RadialField, dim: Dimension) -> float:
    """Total mass inside r_max read off the ball average: sigma * R^N * w(R)."""
    return sphere_area(dim) * w.grid.r_max ** dim.N * float(w.values[-1])


def check_radially_nonincreasing(f: RadialField, tol: float = 0.0) -> bool:
    if f.values.size < 2:
        return True
    scale = max(1.0, f.sup())
    return bool(np.all(np.diff(f.values) <= tol * scale))


def tail_coefficient(w0: RadialField, outer_fraction: float = 0.2) -> float:
    """Median of r^2 w0 over the outer part of the grid, the sampled stand-in for lim r^2 w0."""
    r = w0.grid.nodes
    start = int(np.floor((1.0 - outer_fraction) * (r.size - 1)))
    tail = slice(max(start, 0), None)
    rr = r[tail]
    keep = rr > 0.0
    if not np.any(keep):
        return 0.0
    return float(np.median(rr[keep] ** 2 * w0.values[tail][keep]))


def interpolate_field(f: RadialField, radii) -> np.ndarray:
    """Shape-preserving interpolation of a field onto arbitrary radii inside its grid."""
    radii = np.asarray(radii, dtype=float)
    if f.grid.size == 1:
        return np.full(radii.shape, f.values[0])
    return PchipInterpolator(f.grid.nodes, f.values, extrapolate=False)(radii)
