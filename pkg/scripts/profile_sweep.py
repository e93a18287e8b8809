# scripts/profile_sweep.py
"""
Classification table for a list of tail coefficients.

    PROFILE_M="0.5,1,1.5,2,2.5,3" KSLAB_DIM=3 python scripts/profile_sweep.py
"""
import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from config import get_config  # noqa: E402
from kslab.models import Dimension  # noqa: E402
from kslab.services.profile_ode import build_profile  # noqa: E402
from kslab.services.storage import write_columns, write_json  # noqa: E402

DEFAULT_M = "0.5,1,1.5,2,2.5,3,4"


def main(ms=None, dim: int | None = None, out_dir: str | None = None) -> list[dict]:
    ms = ms or [float(x) for x in os.environ.get("PROFILE_M", DEFAULT_M).split(",") if x.strip()]
    dim = Dimension(dim or int(os.environ.get("KSLAB_DIM", "3")))
    out = Path(out_dir or get_config().OUTPUT_DIR)

    rows = []
    for m in ms:
        p = build_profile(m, dim)
        rows.append({
            "m": m,
            "classification": p.classification.value,
            "ell": p.ell,
            "extension_value": p.extension_value,
            "tail_error": p.tail_error,
        })
        print(f"m={m:<6g} {p.classification.value:<14} ell={p.ell:.6g}")

    write_json(out / f"profile_sweep_N{dim.N}.json", {"N": dim.N, "rows": rows})
    write_columns(out / f"profile_sweep_N{dim.N}.csv", ["m", "ell"],
                  [[r["m"] for r in rows], [r["ell"] for r in rows]])
    return rows


if __name__ == "__main__":
    main()
