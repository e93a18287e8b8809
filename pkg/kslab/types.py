# kslab/types.py
from typing import Optional, TypedDict


class GridDoc(TypedDict):
    nodes: list[float]
    grading: str


class ProfileSidecar(TypedDict):
    m: float
    N: int
    ell: float
    classification: str
    tail_error: float
    extension_value: float
    residual: Optional[float]
    flux_mismatch: Optional[float]


class RunSummary(TypedDict):
    termination: str
    T_est: Optional[float]
    fit_residual: Optional[float]
    mass_drift: float
    aborted: bool
    message: str
    N: int
    final_time: float
    snapshots: int
    blowup_set: Optional[dict]


class IntersectSummary(TypedDict):
    m: float
    T: float
    passed: bool
    violations: list[list[float]]
    tangency_candidates: list[float]
    tail_one_signed: list[bool]
    tail_coefficient: Optional[float]


class ReportDoc(TypedDict):
    status: str
    alpha_from_U: float
    alpha_from_W: float
    plateau_ratio: float
    mismatch: float
    window: list[float]
    r2U_min: float
    r2U_max: float
    regularity: Optional[dict]
    typeB_cauchy: Optional[float]
    T: float


class SweepRow(TypedDict):
    name: str
    exit_code: int
    output: str
    message: str
