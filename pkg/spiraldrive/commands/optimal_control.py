import logging
import math
from pathlib import Path
from typing import List

import click
import pandas as pd

from spiraldrive.engine.artifacts import write_waveform_csv
from spiraldrive.engine.oct_engine import compare_suite, suite_table
from spiraldrive.services.context import RunContext
from spiraldrive.services.runner import run_command

log = logging.getLogger(__name__)


def cmd_oct(ctx: RunContext) -> List[Path]:
    """OCT vs fitted vs optimized offset-sine for each amplitude; failed rows stay in the table."""
    cfg = ctx.config
    section = cfg.oct
    base = cfg.system.build()
    amplitudes = [fraction * base.omega0 for fraction in section.amplitudes]
    ctx.logger.info(f"oct: {len(amplitudes)} amplitude(s), theta_d={cfg.system.theta_d_deg:g} deg, "
                    f"autotune={section.autotune}, max_iters={section.max_iters}")

    rows = compare_suite(amplitudes, base, cutoff_factors=section.factors(),
                         energy_weight=section.energy_weight, autotune=section.autotune,
                         max_iters=section.max_iters, phase_n=section.phase_n, offset_n=section.offset_n,
                         tol=section.tol, workers=ctx.threads)

    table = suite_table(rows)
    outputs = [
        ctx.write_csv("oct_suite.csv", table),
        ctx.write_json("oct_suite.json", {"rows": table.to_dict(orient="records")}),
    ]
    for row in rows:
        tag = f"wd{row.omega_d / base.omega0:.6g}"
        for name, waveform in (("oct", row.oct_waveform), ("fit", row.fit_waveform), ("opt", row.opt_waveform)):
            if waveform is not None:
                outputs.append(write_waveform_csv(ctx.path(f"waveform_{tag}_{name}.csv"), waveform, ctx.provenance()))
        if section.history and row.oct_history:
            outputs.append(ctx.write_csv(f"oct_history_{tag}.csv", pd.DataFrame(row.oct_history)))
        if row.status != "ok":
            ctx.logger.warn(f"{tag}: {row.errors}")
        else:
            ctx.logger.info(f"{tag}: 1-F oct={row.oct_infidelity:.3e}, fit={row.oct_fit_infidelity:.3e}, "
                            f"offset-sine={row.offset_sine_infidelity:.3e}, peak={row.oct_peak:.3f}")

    failed = sum(row.status != "ok" for row in rows)
    if failed == len(rows):
        ctx.logger.error("oct: every suite row failed")
    elif failed:
        ctx.logger.warn(f"oct: {failed} of {len(rows)} row(s) flagged")
    best = [row.offset_sine_infidelity for row in rows if not math.isnan(row.offset_sine_infidelity)]
    if best:
        ctx.logger.info(f"oct: worst optimized offset-sine 1-F = {max(best):.3e}")
    return outputs


@click.command("oct")
@click.pass_obj
def oct_command(options):
    """Optimal-control suite compared against offset-sine pulses."""
    run_command("oct", cmd_oct, options)
