import logging
from pathlib import Path
from typing import List

import click
import pandas as pd

from spiraldrive.engine.artifacts import trajectory_frame, write_gnuplot_matrix, write_landscape_csv
from spiraldrive.engine.pulse_engine import evolution_family, landscape, refine_optimum, tilt_comparison
from spiraldrive.engine.spin_core import DriveSystem
from spiraldrive.services.context import RunContext, describe
from spiraldrive.services.runner import run_command

log = logging.getLogger(__name__)


def _tag(fraction: float) -> str:
    return f"wd{fraction:.6g}"


def cmd_landscape(ctx: RunContext) -> List[Path]:
    """
    One landscape (and refined optimum) per configured drive amplitude.
    Amplitudes are fractions of omega0; without a list the [system] amplitude is used.
    """
    cfg = ctx.config
    section = cfg.landscape
    cell_config = cfg.propagator.model_copy(update={"output_samples": 2})
    amplitudes = section.amplitudes if section.amplitudes is not None else [None]
    ctx.logger.info(f"landscape: {describe(cfg)}, {len(amplitudes)} amplitude(s), "
                    f"{section.offset_n} offsets x {section.phase_n} phases")

    outputs: List[Path] = []
    summary_rows = []
    for fraction in amplitudes:
        system = cfg.system.build(fraction)
        tag = _tag(system.omega_d / system.omega0)
        grid = landscape(system, section.phase_n, section.offset_n, cell_config,
                         rise_time=cfg.pulse.rise_time, envelope=cfg.pulse.envelope,
                         duration=cfg.pulse.duration_for(system), workers=ctx.threads)
        outputs.append(write_landscape_csv(ctx.path(f"landscape_{tag}.csv"), grid, ctx.provenance()))
        if section.gnuplot:
            outputs.append(write_gnuplot_matrix(ctx.path(f"landscape_{tag}.gnuplot"), grid, ctx.provenance()))

        report = refine_optimum(grid, section.tol)
        outputs.append(ctx.write_json(f"optimum_{tag}.json", {
            "system": system.model_dump(),
            "pulse_template": grid.spec_template.model_dump(),
            "report": report.model_dump(),
        }))
        summary_rows.append({"omega_d": system.omega_d, **report.model_dump()})
        ctx.logger.info(f"{tag}: joint 1-F = {1.0 - report.best_fidelity:.3e}, "
                        f"a=0 best F = {report.zero_offset_best_fidelity:.4f}, "
                        f"worst F = {report.zero_offset_worst_fidelity:.4f}")

        if section.trajectories:
            for name, traj in evolution_family(grid, report, cfg.propagator).items():
                outputs.append(ctx.write_csv(f"evolution_{tag}_{name}.csv", trajectory_frame(traj)))

        if section.compare_flat:
            flat = DriveSystem(omega0=system.omega0, omega_d=system.omega_d, theta_d=0.0)
            tilted_report, flat_report = tilt_comparison(system, flat, cell_config, section.phase_n,
                                                         section.offset_n, section.tol, workers=ctx.threads)
            outputs.append(ctx.write_json(f"tilt_comparison_{tag}.json", {
                "tilted": tilted_report.model_dump(),
                "flat": flat_report.model_dump(),
            }))

    outputs.append(ctx.write_csv("landscape_summary.csv", pd.DataFrame(summary_rows)))
    return outputs


@click.command("landscape")
@click.pass_obj
def landscape_command(options):
    """Fidelity landscapes over (phase, offset) and their refined optima."""
    run_command("landscape", cmd_landscape, options)
