"""
Step-refinement audit for one configured pulse: final fidelity at successively
halved fixed substeps, the change per halving, and the observed convergence order.
"""
import logging
import math
import os
import sys

import click
import numpy as np
import pandas as pd

if os.getcwd() not in sys.path:
    sys.path.append(os.getcwd())

from spiraldrive.engine.spin_core import SpinState, evolve_fixed, shortest_period
from spiraldrive.engine.waveforms import OffsetSinePulse
from spiraldrive.schemas.base import load_run_config

logging.basicConfig(level=logging.ERROR)
log = logging.getLogger("audit_convergence")


def refinement_table(config_path, levels: int) -> pd.DataFrame:
    cfg, _ = load_run_config(config_path)
    system = cfg.system.build()
    spec = cfg.pulse.build(system)
    pulse = OffsetSinePulse(spec, system.omega0)
    natural = cfg.propagator.base_step * shortest_period(system)
    steps = max(1, math.ceil(spec.duration_tpi / natural))

    rows = []
    for level in range(levels):
        psi = evolve_fixed(system, pulse, SpinState.up(), steps << level)
        rows.append({"substeps": steps << level, "fidelity": float(abs(psi[1]) ** 2),
                     "norm_drift": float(abs(np.vdot(psi, psi).real - 1.0))})
    table = pd.DataFrame(rows)
    table["delta"] = table["fidelity"].diff().abs()
    table["order"] = np.log2(table["delta"].shift(1) / table["delta"])
    return table


@click.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--levels", type=click.IntRange(min=2), default=6, show_default=True)
def main(config_path, levels):
    table = refinement_table(config_path, levels)
    click.echo(table.to_string(index=False, float_format=lambda v: f"{v:.3e}"))
    drift = table["norm_drift"].max()
    if drift > 1e-12:
        log.error(f"❌ norm drift {drift:.3e} exceeds 1e-12")
    else:
        click.echo(f"✅ max norm drift {drift:.3e}")


if __name__ == "__main__":
    main()
