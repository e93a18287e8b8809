# scripts/plateau_experiment.py
"""
End to end: bracket the blow-up amplitude of gaussian data, run above the
threshold, then extract the final-time profile and read off alpha.

    KSLAB_DIM=3 KSLAB_OUTPUT_DIR=runs python scripts/plateau_experiment.py
"""
import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from config import get_config  # noqa: E402
from kslab.models import Dimension, InitialData, RadialGrid, SnapshotSchedule, SolverConfig, Termination  # noqa: E402
from kslab.services.analysis import blowup_set_heuristic, build_report  # noqa: E402
from kslab.services.solver import estimate_blowup_time, find_blowup_amplitude, initial_w, run  # noqa: E402
from kslab.services.storage import save_report, save_run  # noqa: E402


# one decade inside the gaussian scale, outside the blow-up core
WINDOW = (0.01, 0.1)


def main(dim: int | None = None, out_dir: str | None = None, cells: int = 400, margin: float = 1.5,
         window: tuple[float, float] = WINDOW):
    dim = Dimension(dim or int(os.environ.get("KSLAB_DIM", "3")))
    out = Path(out_dir or get_config().OUTPUT_DIR) / f"plateau_N{dim.N}"

    bracket_grid = RadialGrid.uniform(8.0, 128)
    A_bounded, A_blowup = find_blowup_amplitude(dim, bracket_grid, sigma=1.0, time_cap=0.5, iterations=6)
    print(f"Threshold bracket: A in ({A_bounded:.4g}, {A_blowup:.4g})")

    grid = RadialGrid.logarithmic(8.0, cells, h_min_ratio=1e-5)
    cfg = SolverConfig(
        dim,
        grid,
        time_cap=0.5,
        snapshot_radii=(0.25, 0.5, 1.0),
        snapshot_schedule=SnapshotSchedule(growth_factor=1.25),
    )
    A = margin * A_blowup
    result = run(cfg, initial_w(InitialData.gaussian(A, 1.0), grid, dim))
    if result.termination is not Termination.BLOWUP_DETECTED:
        print(f"A={A:.4g} ended {result.termination.value}; nothing to report", file=sys.stderr)
        return None

    estimate = estimate_blowup_time(result)
    save_run(result, out, {"name": out.name, "dim": dim.N, "A": A}, estimate, blowup_set_heuristic(result))
    report, W = build_report(result, estimate.T_est, window=window)
    save_report(report, W, out, estimate.T_est)

    print(f"T_est={estimate.T_est:.8g}  alpha_U={report.alpha_from_U:.6g}  "
          f"alpha_W={report.alpha_from_W:.6g}  2(N-2)={2 * (dim.N - 2)}  status={report.status}")
    print(f"r^2 U in [{report.r2U_min:.4g}, {report.r2U_max:.4g}] over r in {report.window}")
    print(f"plateau ratio={report.plateau_ratio:.4g}  mismatch={report.mismatch:.4g}")
    return report


if __name__ == "__main__":
    main()
