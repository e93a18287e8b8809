# kslab/commands/profile.py
from __future__ import annotations

from pathlib import Path

import click

from config import get_config
from kslab.commands import guarded
from kslab.errors import EX_INCONCLUSIVE, EX_OK
from kslab.extensions import logger
from kslab.models import Classification, Dimension
from kslab.services.profile_ode import build_profile
from kslab.services.storage import save_profile


def profile_stem(m: float, dim: int) -> str:
    return f"profile_m{m:g}_N{dim}"


@click.command("profile")
@click.option("--m", "m", type=click.FloatRange(min=0, min_open=True), required=True,
              help="Tail coefficient m = lim xi^2 phi(xi).")
@click.option("--dim", type=click.IntRange(min=3), default=3, show_default=True)
@click.option("--s-max", type=click.FloatRange(min=0, min_open=True), default=None)
@click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=None,
              help="Integrator tolerance; the profile is recomputed at tol/2 to confirm the classification.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@guarded("profile")
def profile_cmd(m: float, dim: int, s_max: float | None, tol: float | None, out_dir: str | None) -> int:
    """Build and classify the self-similar profile with tail coefficient m."""
    out = Path(out_dir or get_config().OUTPUT_DIR)
    profile = build_profile(m, Dimension(dim), s_max=s_max, tol=tol)
    csv_path, _ = save_profile(profile, out, profile_stem(m, dim))
    logger.info("[profile] m=%g N=%d %s ell=%.6g -> %s",
                m, dim, profile.classification.value, profile.ell, csv_path)
    if profile.classification is Classification.INDETERMINATE:
        return EX_INCONCLUSIVE
    return EX_OK
