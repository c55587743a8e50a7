"""
Writes seeded synthetic measurement files for the `fit` subcommand:
Rabi traces at several currents on a straight frequency-vs-current line,
an ODMR series from a tilted-field NV model, and a matching fit config.
"""
import logging
import math
import os
import sys
from pathlib import Path

import click
import numpy as np

if os.getcwd() not in sys.path:
    sys.path.append(os.getcwd())

from spiraldrive.engine.analysis.odmr_engine import NVModel
from spiraldrive.engine.analysis.synthetic import synthetic_odmr_series, synthetic_rabi_trace
from spiraldrive.engine.artifacts import write_odmr_csv, write_rabi_csv
from spiraldrive.engine.utils import provenance

logging.basicConfig(level=logging.INFO)
log = logging.getLogger("make_synthetic_data")


@click.command()
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="synthetic", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--slope", type=float, default=463.0, show_default=True, help="Rabi frequency per ampere, kHz/A.")
@click.option("--rabi-noise", type=float, default=0.0, show_default=True, help="Signal noise, fraction of amplitude.")
@click.option("--field-per-current", type=float, default=113.0, show_default=True, help="G/A")
@click.option("--tilt-deg", type=float, default=36.5, show_default=True)
@click.option("--strain", type=float, default=4.0, show_default=True, help="E in MHz")
@click.option("--odmr-noise", type=float, default=0.0, show_default=True, help="MHz")
def main(out_dir, seed, slope, rabi_noise, field_per_current, tilt_deg, strain, odmr_noise):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    header = provenance({"slope": slope, "field_per_current": field_per_current, "tilt_deg": tilt_deg,
                         "strain": strain, "rabi_noise": rabi_noise, "odmr_noise": odmr_noise}, seed=seed)

    rabi_files = []
    for current in (0.4, 0.6, 0.8, 1.0, 1.145):
        trace = synthetic_rabi_trace(slope * current, current=current, rng=rng, noise=rabi_noise)
        name = f"rabi_{current:g}A.csv"
        write_rabi_csv(out / name, trace, header)
        rabi_files.append(name)

    model = NVModel.tilted(field_per_current, math.radians(tilt_deg), strain)
    currents = np.linspace(-0.4, 0.4, 9)
    write_odmr_csv(out / "odmr.csv", synthetic_odmr_series(model, currents, rng, odmr_noise), header)

    config = "\n".join([
        "[fit]",
        'odmr_csv = "odmr.csv"',
        "rabi_csvs = [" + ", ".join(f'"{name}"' for name in rabi_files) + "]",
        "b0_gauss = 652.0",
        "",
    ])
    (out / "fit.toml").write_text(config, encoding="utf-8")
    log.info(f"✅ Wrote {len(rabi_files)} Rabi traces, odmr.csv and fit.toml to {out}")


if __name__ == "__main__":
    main()
