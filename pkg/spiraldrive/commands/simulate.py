import logging
from pathlib import Path
from typing import List

import click
import pandas as pd

from spiraldrive.engine.artifacts import trajectory_frame, write_waveform_csv
from spiraldrive.engine.pulse_engine import simulate_pulse
from spiraldrive.engine.spin_core import bloch_vectors, rwa_reference
from spiraldrive.engine.waveforms import dc_component, offset_sine
from spiraldrive.services.context import RunContext, describe
from spiraldrive.services.runner import run_command

log = logging.getLogger(__name__)


def cmd_simulate(ctx: RunContext) -> List[Path]:
    """Trajectory of |up> under the configured offset-sine pulse, plus a summary."""
    cfg = ctx.config
    system = cfg.system.build()
    spec = cfg.pulse.build(system)
    ctx.logger.info(f"simulate: {describe(cfg)}, a={spec.offset_a:g}, phi={spec.phase_phi:.6g}, "
                    f"T={spec.duration_tpi:.6g}, envelope={spec.envelope_kind}")

    traj = simulate_pulse(system, spec, cfg.propagator)
    waveform = offset_sine(spec, system)
    bloch = bloch_vectors(traj)

    summary = {
        "system": system.model_dump(),
        "pulse": spec.model_dump(),
        "final_fidelity": traj.final_fidelity,
        "infidelity": 1.0 - traj.final_fidelity,
        "substeps": traj.substeps,
        "refinement_delta": traj.refinement_delta,
        "dc_component": dc_component(waveform),
    }
    if system.omega_d > 0.0:
        summary["rwa_fidelity"] = rwa_reference(system, spec.phase_phi, spec.duration_tpi).final_fidelity

    outputs = [
        ctx.write_csv("trajectory.csv", trajectory_frame(traj)),
        ctx.write_csv("bloch.csv", pd.DataFrame({"t": traj.times, "x": bloch[:, 0], "y": bloch[:, 1], "z": bloch[:, 2]})),
        write_waveform_csv(ctx.path("waveform.csv"), waveform, ctx.provenance()),
        ctx.write_json("summary.json", summary),
    ]
    ctx.logger.success(f"simulate: F = {traj.final_fidelity:.12f} (1 - F = {1.0 - traj.final_fidelity:.3e})")
    return outputs


@click.command("simulate")
@click.pass_obj
def simulate(options):
    """Propagate one offset-sine pulse and write the trajectory."""
    run_command("simulate", cmd_simulate, options)
