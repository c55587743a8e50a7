import logging
import math
from pathlib import Path
from typing import List

import click
import pandas as pd

from spiraldrive.engine.analysis.odmr_engine import fit_odmr_series
from spiraldrive.engine.analysis.rabi_engine import fit_decaying_sine, rabi_vs_current
from spiraldrive.engine.analysis.units import (
    drive_to_splitting_ratio,
    larmor_frequency,
    rabi_to_field,
    transverse_field_ratio,
)
from spiraldrive.engine.artifacts import read_odmr_csv, read_rabi_csv
from spiraldrive.engine.errors import ContractError
from spiraldrive.services.context import RunContext
from spiraldrive.services.runner import run_command

log = logging.getLogger(__name__)


def _odmr_report(ctx: RunContext) -> Path:
    section = ctx.config.fit
    data = read_odmr_csv(ctx.resolve_input(section.odmr_csv))
    ctx.logger.info(f"fit: {len(data)} ODMR points from {section.odmr_csv}")
    fit = fit_odmr_series(data, section.init_model())
    payload = fit.model_dump(exclude={"model"})
    payload["field_dir"] = list(fit.model.field_dir)
    payload["zero_field_splitting_D"] = fit.model.zero_field_splitting_D
    payload["transverse_G_per_A"] = transverse_field_ratio(fit.field_per_current, math.radians(fit.tilt_deg))
    ctx.logger.success(f"ODMR: B/I = {fit.field_per_current:.2f} +- {fit.field_per_current_stderr:.2f} G/A, "
                       f"tilt = {fit.tilt_deg:.2f} +- {fit.tilt_deg_stderr:.2f} deg")
    return ctx.write_json("odmr_fit.json", payload)


def _rabi_reports(ctx: RunContext) -> List[Path]:
    section = ctx.config.fit
    fits = []
    rows = []
    for name in section.rabi_csvs:
        trace = read_rabi_csv(ctx.resolve_input(name))
        fit = fit_decaying_sine(trace)
        fits.append((trace.current, fit))
        rows.append({"file": name, "current_A": trace.current, **fit.model_dump()})
        ctx.logger.info(f"{name}: {fit.rabi_frequency:.3f} +- {fit.frequency_stderr:.3f} kHz at {trace.current:g} A")

    payload = {"fits": rows}
    currents = {current for current, _ in fits}
    if len(currents) >= 2:
        line = rabi_vs_current(fits)
        payload["line"] = line.model_dump()
        payload["b1_per_current_G_per_A"] = rabi_to_field(line.slope, section.species, section.gamma)
        ctx.logger.success(f"Rabi line: {line.slope:.2f} kHz/A -> B1/I = {payload['b1_per_current_G_per_A']:.2f} G/A")
    else:
        ctx.logger.info("fit: fewer than two distinct currents, no frequency-vs-current line")
    if section.b0_gauss is not None:
        larmor = larmor_frequency(section.b0_gauss, section.species, section.gamma)
        payload["larmor_MHz"] = larmor
        payload["drive_to_splitting"] = drive_to_splitting_ratio(max(f.rabi_frequency for _, f in fits), larmor)

    return [ctx.write_csv("rabi_fits.csv", pd.DataFrame(rows)), ctx.write_json("rabi_fit.json", payload)]


def cmd_fit(ctx: RunContext) -> List[Path]:
    """ODMR series and/or Rabi traces named in [fit]."""
    section = ctx.config.fit
    if not section.odmr_csv and not section.rabi_csvs:
        raise ContractError("[fit] names no input: set odmr_csv and/or rabi_csvs")
    outputs: List[Path] = []
    if section.odmr_csv:
        outputs.append(_odmr_report(ctx))
    if section.rabi_csvs:
        outputs.extend(_rabi_reports(ctx))
    return outputs


@click.command("fit")
@click.pass_obj
def fit(options):
    """Fit measured ODMR series and Rabi traces."""
    run_command("fit", cmd_fit, options)
