# kslab/models.py
"""
Domain types. Everything here is immutable after construction: arrays are
copied and marked read-only, so values can be shared between threads and
sent to worker processes freely.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping, NamedTuple

import numpy as np
from scipy.optimize import brentq

from kslab.errors import (
    DivergedError,
    InvalidConfig,
    InvalidDimension,
    NotConverged,
    SingularDenominator,
    TooCoarse,
)

MIN_CELLS = 16
GRADINGS = ("uniform", "logarithmic", "annulus")


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class Classification(str, Enum):
    UNBOUNDED = "Unbounded"
    TOUCHES_ZERO = "TouchesZero"
    REGULAR = "Regular"
    INDETERMINATE = "Indeterminate"


class VTermination(str, Enum):
    REACHED_SMAX = "ReachedSmax"
    DENOMINATOR_SINGULAR = "DenominatorSingular"
    DIVERGED = "Diverged"


class Termination(str, Enum):
    BLOWUP_DETECTED = "BlowupDetected"
    TIME_CAP = "TimeCap"
    STEADY_STATE = "SteadyState"


# ---------------------------------------------------------------------------
# radial-core
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dimension:
    N: int

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 3:
            raise InvalidDimension(f"dimension must be an integer >= 3, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    def __int__(self) -> int:
        return self.N


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    grading: str = "uniform"

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if self.grading not in GRADINGS:
            raise InvalidConfig(f"unknown grading {self.grading!r}")
        if nodes.ndim != 1 or nodes.size < 1:
            raise TooCoarse("grid needs at least one node")
        if nodes.size > 1 and np.any(np.diff(nodes) <= 0.0):
            raise InvalidConfig("grid nodes must be strictly increasing")
        if self.grading == "annulus":
            if nodes[0] <= 0.0:
                raise InvalidConfig("annulus grids start at r_min > 0")
        elif nodes[0] != 0.0:
            raise InvalidConfig(f"{self.grading} grids start at r = 0")

    # --- constructors ---
    @classmethod
    def uniform(cls, r_max: float, cells: int) -> "RadialGrid":
        _check_cells(cells)
        return cls(np.linspace(0.0, float(r_max), cells + 1), "uniform")

    @classmethod
    def logarithmic(cls, r_max: float, cells: int, h_min_ratio: float = 1e-4) -> "RadialGrid":
        """
        Geometrically stretched cells starting from h_min = h_min_ratio * r_max
        at the origin. Falls back to a uniform grid when uniform cells are
        already finer than h_min.
        """
        _check_cells(cells)
        r_max = float(r_max)
        h_min = float(h_min_ratio) * r_max
        if r_max / cells <= h_min:
            return cls(np.linspace(0.0, r_max, cells + 1), "logarithmic")

        def excess(q: float) -> float:
            return h_min * (q ** cells - 1.0) / (q - 1.0) - r_max

        q_hi = 2.0
        while excess(q_hi) < 0.0:
            q_hi *= 2.0
        q = brentq(excess, 1.0 + 1e-12, q_hi, xtol=1e-15, rtol=1e-14)
        widths = h_min * q ** np.arange(cells)
        nodes = np.concatenate([[0.0], np.cumsum(widths)])
        nodes[-1] = r_max
        return cls(nodes, "logarithmic")

    @classmethod
    def annulus(cls, r_min: float, r_max: float, cells: int, geometric: bool = False) -> "RadialGrid":
        _check_cells(cells)
        if not 0.0 < r_min < r_max:
            raise InvalidConfig("annulus needs 0 < r_min < r_max")
        if geometric:
            nodes = np.geomspace(r_min, r_max, cells + 1)
        else:
            nodes = np.linspace(r_min, r_max, cells + 1)
        return cls(nodes, "annulus")

    @classmethod
    def from_nodes(cls, nodes) -> "RadialGrid":
        """Infer the grading of a stored node list."""
        nodes = np.asarray(nodes, dtype=float)
        if nodes[0] > 0.0:
            return cls(nodes, "annulus")
        widths = np.diff(nodes)
        if widths.size and np.allclose(widths, widths[0], rtol=1e-9, atol=0.0):
            return cls(nodes, "uniform")
        return cls(nodes, "logarithmic")

    # --- accessors ---
    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def h_min(self) -> float:
        return float(np.min(np.diff(self.nodes)))

    @property
    def cells(self) -> int:
        return self.size - 1

    def same_nodes(self, other: "RadialGrid") -> bool:
        return self.size == other.size and bool(np.array_equal(self.nodes, other.nodes))


def _check_cells(cells: int) -> None:
    if int(cells) < MIN_CELLS:
        raise TooCoarse(f"grids need at least {MIN_CELLS} cells, got {cells}")


@dataclass(frozen=True, eq=False)
class RadialField:
    grid: RadialGrid
    values: np.ndarray
    time: float | None = None

    def __post_init__(self):
        values = _frozen(self.values)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.nodes.shape:
            raise InvalidConfig(
                f"field has {values.size} values for {self.grid.size} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidConfig("field values must be finite")
        if self.time is not None:
            object.__setattr__(self, "time", float(self.time))

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def with_values(self, values, time: float | None = None) -> "RadialField":
        return RadialField(self.grid, values, self.time if time is None else time)


@dataclass(frozen=True)
class InitialData:
    family: str
    params: Mapping[str, float] = field(default_factory=dict)
    require_nonincreasing: bool = False

    FAMILIES = ("gaussian", "plateau", "remark39", "constant", "singular")

    def __post_init__(self):
        if self.family not in self.FAMILIES:
            raise InvalidConfig(f"unknown initial-data family {self.family!r}")
        object.__setattr__(self, "params", dict(self.params))

    @classmethod
    def gaussian(cls, A: float, sigma: float = 1.0, require_nonincreasing: bool = True):
        return cls("gaussian", {"A": A, "sigma": sigma}, require_nonincreasing)

    @classmethod
    def plateau(cls, A: float, R0: float, width: float, require_nonincreasing: bool = True):
        return cls("plateau", {"A": A, "R0": R0, "width": width}, require_nonincreasing)

    @classmethod
    def remark39(cls, k: float, tail_rate: float = 1.0, tail_height: float = 1.0):
        return cls("remark39", {"k": k, "tail_rate": tail_rate, "tail_height": tail_height}, False)

    @classmethod
    def constant(cls, A: float):
        return cls("constant", {"A": A}, True)

    @classmethod
    def singular(cls):
        return cls("singular", {}, True)


# ---------------------------------------------------------------------------
# profile-ode
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailCoefficient:
    m: float

    def __post_init__(self):
        m = float(self.m)
        if not np.isfinite(m) or m <= 0.0:
            raise InvalidConfig(f"tail coefficient must be positive, got {self.m!r}")
        object.__setattr__(self, "m", m)

    @property
    def degenerate(self) -> bool:
        return self.m == 2.0

    def __float__(self) -> float:
        return self.m


def as_tail(m: "float | TailCoefficient") -> TailCoefficient:
    return m if isinstance(m, TailCoefficient) else TailCoefficient(m)


@dataclass(frozen=True, eq=False)
class VSolution:
    m: TailCoefficient
    dim: Dimension
    s_samples: np.ndarray
    V_values: np.ndarray
    terminal_reason: VTermination
    s_start: float
    monotone: bool = True
    dense: Callable[[Any], Any] | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "s_samples", _frozen(self.s_samples))
        object.__setattr__(self, "V_values", _frozen(self.V_values))

    @property
    def s_end(self) -> float:
        return float(self.s_samples[-1])

    def at(self, s) -> np.ndarray:
        """Evaluate V on [0, s_end]: Taylor branch below s_start, dense output above."""
        s = np.asarray(s, dtype=float)
        m, N = self.m.m, self.dim.N
        taylor = m + (N - 2) * m * (2.0 - m) * s ** 2
        if self.dense is None:
            inner = np.interp(s, self.s_samples, self.V_values)
        else:
            inner = np.asarray(self.dense(np.clip(s, self.s_start, self.s_end)))
            inner = inner.reshape(s.shape) if inner.ndim else inner
        return np.where(s <= self.s_start, taylor, inner)

    def raise_for_status(self) -> None:
        if self.terminal_reason is VTermination.DENOMINATOR_SINGULAR:
            raise SingularDenominator(self.s_end, float(self.V_values[-1]))
        if self.terminal_reason is VTermination.DIVERGED:
            raise DivergedError(self.s_end, float(self.V_values[-1]))


@dataclass(frozen=True, eq=False)
class SelfSimilarProfile:
    m: TailCoefficient
    dim: Dimension
    ell: float
    classification: Classification
    xi_samples: np.ndarray
    phi_values: np.ndarray
    extension_value: float
    dphi_values: np.ndarray | None = None
    diagnostics: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "xi_samples", _frozen(self.xi_samples))
        object.__setattr__(self, "phi_values", _frozen(self.phi_values))
        if self.dphi_values is not None:
            object.__setattr__(self, "dphi_values", _frozen(self.dphi_values))
        object.__setattr__(self, "diagnostics", dict(self.diagnostics))
        if self.xi_samples.shape != self.phi_values.shape:
            raise InvalidConfig("profile needs one phi value per xi sample")

    @property
    def xi_max(self) -> float:
        return float(np.max(self.xi_samples))

    @property
    def tail_error(self) -> float:
        i = int(np.argmax(self.xi_samples))
        return abs(self.xi_samples[i] ** 2 * self.phi_values[i] - self.m.m)

    def raise_for_status(self) -> None:
        if self.classification is Classification.INDETERMINATE:
            reason = self.diagnostics.get("reason", "no conclusive alternative")
            raise NotConverged(f"profile m={self.m.m:g} is Indeterminate: {reason}")


@dataclass(frozen=True, eq=False)
class RelaxationResult:
    field: RadialField
    ivp_field: RadialField
    t_reached: float
    steps: int
    min_signed_ht: float
    min_signed_hs: float
    ivp_relative_difference: float
    steady_residual: float
    initial_first_order_residual: float


# ---------------------------------------------------------------------------
# pde-solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SnapshotSchedule:
    """Snapshots at fixed times, and/or whenever the sup-norm grows by growth_factor."""
    times: tuple[float, ...] = ()
    growth_factor: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(sorted(float(t) for t in self.times)))
        if self.growth_factor is not None and self.growth_factor <= 1.0:
            raise InvalidConfig("snapshot growth_factor must exceed 1")


INNER_BCS = ("symmetry", "dirichlet")
OUTER_BCS = ("zero_density", "neumann", "dirichlet")


@dataclass(frozen=True, eq=False)
class SolverConfig:
    dim: Dimension
    grid: RadialGrid
    dt_safety: float = 0.1
    blowup_threshold: float = 1e8
    time_cap: float = 1.0
    snapshot_radii: tuple[float, ...] = ()
    snapshot_schedule: SnapshotSchedule = field(default_factory=SnapshotSchedule)
    dt_max: float = 1e-3
    inner_bc: str = "symmetry"
    outer_bc: str = "zero_density"
    steady_tol: float = 1e-10
    regrid_factor: float | None = 1e3
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not 0.0 < self.dt_safety <= 1.0:
            raise InvalidConfig("dt_safety must lie in (0, 1]")
        if self.time_cap <= 0.0 or self.dt_max <= 0.0:
            raise InvalidConfig("time_cap and dt_max must be positive")
        if self.inner_bc not in INNER_BCS or self.outer_bc not in OUTER_BCS:
            raise InvalidConfig(f"unknown boundary condition {self.inner_bc!r}/{self.outer_bc!r}")
        annulus = self.grid.grading == "annulus"
        if annulus != (self.inner_bc == "dirichlet"):
            raise InvalidConfig("annulus grids take a dirichlet inner boundary, full grids the symmetry one")
        object.__setattr__(self, "snapshot_radii", tuple(float(r) for r in self.snapshot_radii))


class Snapshot(NamedTuple):
    t: float
    w: RadialField


@dataclass(frozen=True, eq=False)
class BlowupRun:
    config: SolverConfig
    snapshots: tuple[Snapshot, ...]
    supnorm_times: np.ndarray
    supnorm_values: np.ndarray
    mass_values: np.ndarray
    termination: Termination
    tracked_values: np.ndarray | None = None
    aborted: bool = False
    message: str = ""

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(Snapshot(float(t), w) for t, w in self.snapshots))
        object.__setattr__(self, "supnorm_times", _frozen(self.supnorm_times))
        object.__setattr__(self, "supnorm_values", _frozen(self.supnorm_values))
        object.__setattr__(self, "mass_values", _frozen(self.mass_values))
        if self.tracked_values is not None:
            object.__setattr__(self, "tracked_values", _frozen(self.tracked_values))
        times = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidConfig("snapshot times must be strictly increasing")

    @property
    def supnorm_history(self) -> list[tuple[float, float]]:
        return list(zip(self.supnorm_times.tolist(), self.supnorm_values.tolist()))

    @property
    def initial_sup(self) -> float:
        return float(self.supnorm_values[0]) if self.supnorm_values.size else 0.0

    def mass_drift(self, growth_limit: float = 100.0) -> float:
        """Relative mass change while the sup-norm stays below growth_limit x initial."""
        if self.mass_values.size == 0 or self.mass_values[0] == 0.0:
            return 0.0
        limit = growth_limit * max(self.initial_sup, np.finfo(float).tiny)
        keep = self.supnorm_values <= limit
        drift = np.abs(self.mass_values[keep] - self.mass_values[0]) / abs(self.mass_values[0])
        return float(np.max(drift)) if drift.size else 0.0


@dataclass(frozen=True)
class BlowupEstimate:
    T_est: float
    fit_residual: float
    rate_constant: float
    n_points: int


@dataclass(frozen=True, eq=False)
class SelfSimilarFrameField:
    xi_samples: np.ndarray
    v_values: np.ndarray
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "xi_samples", _frozen(self.xi_samples))
        object.__setattr__(self, "v_values", _frozen(self.v_values))


# ---------------------------------------------------------------------------
# zeronum
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ZeroCountSeries:
    times: np.ndarray
    counts: np.ndarray
    ambiguous: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "counts", _frozen(self.counts, dtype=int))
        object.__setattr__(self, "ambiguous", _frozen(self.ambiguous, dtype=int))
        if np.any(np.diff(self.times) < 0.0):
            raise InvalidConfig("zero-count entries must be time-ordered")

    @property
    def entries(self) -> list[tuple[float, int, int]]:
        return list(zip(self.times.tolist(), self.counts.tolist(), self.ambiguous.tolist()))


@dataclass(frozen=True)
class MonotonicityReport:
    series: ZeroCountSeries
    passed: bool
    violations: tuple[tuple[float, int, int], ...] = ()
    tangency_candidates: tuple[float, ...] = ()
    tail_one_signed: tuple[bool, ...] = ()


# ---------------------------------------------------------------------------
# blowup-analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExtrapolatedField:
    field: RadialField
    residual: np.ndarray
    converged: np.ndarray
    n_points: int


@dataclass(frozen=True)
class RegularityDiagnostics:
    c4: float
    c3: float
    times: tuple[float, ...] = ()
    c4_series: tuple[float, ...] = ()
    c3_series: tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class ProfileReport:
    radii: np.ndarray
    W_values: np.ndarray
    U_values: np.ndarray
    alpha_from_U: float
    alpha_from_W: float
    plateau_ratio: float
    mismatch: float
    status: str
    window: tuple[float, float]
    r2U_min: float
    r2U_max: float
    regularity: RegularityDiagnostics | None = None
    typeB_cauchy: float | None = None
    single_point: Mapping[str, Any] | None = None
