# kslab/services/initial_data.py
from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma, gammainc

from kslab.errors import InvalidInitialData
from kslab.extensions import logger
from kslab.models import Dimension, InitialData, RadialField, RadialGrid
from kslab.services.radial import check_radially_nonincreasing

# amplitude-like parameters may be zero; shape parameters must be positive
_NONNEGATIVE = {"A", "tail_height"}


def _check_params(data: InitialData) -> None:
    for name, value in data.params.items():
        value = float(value)
        if not np.isfinite(value):
            raise InvalidInitialData(f"{data.family}: parameter {name} is not finite")
        if name in _NONNEGATIVE:
            if value < 0.0:
                raise InvalidInitialData(f"{data.family}: {name} must be >= 0, got {value:g}")
        elif value <= 0.0:
            raise InvalidInitialData(f"{data.family}: {name} must be > 0, got {value:g}")


def _smoothstep(x: np.ndarray) -> np.ndarray:
    """C^2 step from 1 at x <= 0 to 0 at x >= 1."""
    x = np.clip(x, 0.0, 1.0)
    return 1.0 - x ** 3 * (10.0 - 15.0 * x + 6.0 * x ** 2)


def remark39_bridge(tail_rate: float, tail_height: float) -> np.ndarray:
    """
    Coefficients (a, b, c) of the bridge x^3 (a + b x + c x^2), x = r - 1, on
    (1, 2). The x^3 factor matches the zero value, slope and curvature of
    k r^2 (r-1)^4 at r = 1; the linear solve matches H exp(-rate (r-2)) at r = 2.
    """
    H, lam = tail_height, tail_rate
    lhs = np.array([[1.0, 1.0, 1.0], [3.0, 4.0, 5.0], [6.0, 12.0, 20.0]])
    rhs = np.array([H, -lam * H, lam * lam * H])
    return np.linalg.solve(lhs, rhs)


def profile_function(data: InitialData, dim: Dimension) -> Callable[[np.ndarray], np.ndarray]:
    _check_params(data)
    p = data.params
    N = dim.N

    if data.family == "gaussian":
        A, sigma = float(p["A"]), float(p.get("sigma", 1.0))
        return lambda r: A * np.exp(-(r / sigma) ** 2)

    if data.family == "plateau":
        A, R0, width = float(p["A"]), float(p["R0"]), float(p["width"])
        return lambda r: A * _smoothstep((r - R0) / width)

    if data.family == "constant":
        A = float(p["A"])
        return lambda r: np.full(np.shape(r), A)

    if data.family == "singular":
        def singular(r):
            r = np.asarray(r, dtype=float)
            with np.errstate(divide="ignore"):
                return 2.0 * (N - 2) / r ** 2
        return singular

    # remark39
    k = float(p["k"])
    rate, height = float(p.get("tail_rate", 1.0)), float(p.get("tail_height", 1.0))
    a, b, c = remark39_bridge(rate, height)

    def remark39(r):
        r = np.asarray(r, dtype=float)
        x = r - 1.0
        inner = k * r ** 2 * x ** 4
        bridge = x ** 3 * (a + b * x + c * x ** 2)
        tail = height * np.exp(-rate * (r - 2.0))
        return np.where(r <= 1.0, inner, np.where(r < 2.0, bridge, tail))

    return remark39


def build_initial(data: InitialData, grid: RadialGrid, dim: Dimension) -> RadialField:
    """Sample the initial density u0 on the grid."""
    if data.family == "singular" and grid.r_min == 0.0:
        raise InvalidInitialData("the singular state 2(N-2)/r^2 needs an annulus grid")
    u = profile_function(data, dim)(grid.nodes)
    if np.any(~np.isfinite(u)):
        raise InvalidInitialData(f"{data.family}: initial data is not bounded on the grid")
    if np.any(u < 0.0):
        worst = float(grid.nodes[int(np.argmin(u))])
        raise InvalidInitialData(f"{data.family}: parameters give negative values (min at r={worst:g})")
    field = RadialField(grid, u, 0.0)
    if data.require_nonincreasing and not check_radially_nonincreasing(field, 1e-12):
        raise InvalidInitialData(f"{data.family}: initial data is not radially nonincreasing")
    logger.debug("[initial] %s %s on %d nodes, sup=%.6g", data.family, dict(data.params), grid.size, field.sup())
    return field


def inner_mass(data: InitialData, r_min: float, dim: Dimension) -> float:
    """Integral of s^(N-1) u0(s) over [0, r_min], used to seed w on annulus grids."""
    N = dim.N
    p = data.params
    if r_min <= 0.0:
        return 0.0
    if data.family == "constant":
        return float(p["A"]) * r_min ** N / N
    if data.family == "singular":
        return 2.0 * r_min ** (N - 2)
    if data.family == "gaussian":
        A, sigma = float(p["A"]), float(p.get("sigma", 1.0))
        return 0.5 * A * sigma ** N * gamma(N / 2.0) * gammainc(N / 2.0, (r_min / sigma) ** 2)
    if data.family == "plateau" and r_min <= float(p["R0"]):
        return float(p["A"]) * r_min ** N / N

    f = profile_function(data, dim)
    if data.family == "remark39":
        edges = (1.0, 2.0)
    elif data.family == "plateau":
        edges = (float(p["R0"]), float(p["R0"]) + float(p["width"]))
    else:
        edges = ()
    breaks = [x for x in edges if 0.0 < x < r_min]
    value, _ = quad(lambda s: s ** (N - 1) * float(f(s)), 0.0, r_min, points=breaks or None, limit=200)
    return float(value)
