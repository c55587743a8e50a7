import logging
from pathlib import Path
from typing import List

import click

from spiraldrive.engine.antenna_engine import (
    aperture_uniformity,
    biot_savart,
    field_map,
    layer_field,
    loop_axis_field,
    project_to_nv,
)
from spiraldrive.engine.artifacts import field_map_frame
from spiraldrive.engine.analysis.units import transverse_field_ratio
from spiraldrive.services.context import RunContext
from spiraldrive.services.runner import run_command

log = logging.getLogger(__name__)


def cmd_spiral(ctx: RunContext) -> List[Path]:
    """Field per ampere at the sample point, its NV-frame projection, and an optional cross-section map."""
    section = ctx.config.spiral
    geom = section.geometry()
    point = geom.sample_point
    ctx.logger.info(f"spiral: {geom.turns} turns x {geom.layers} layer(s), pitch {geom.turn_pitch:g} um, "
                    f"sample {geom.sample_height:g} um above the top layer")

    sample = biot_savart(geom, point, section.segments_per_turn)
    projection = project_to_nv(sample, section.frame())
    layers = [layer_field(geom, point, k, section.segments_per_turn) for k in range(geom.layers)]

    report = {
        "geometry": geom.model_dump(),
        "sample_point_um": list(point),
        "b_per_current_G_per_A": list(sample.b_per_current),
        "magnitude_G_per_A": sample.magnitude,
        "tilt_from_normal_deg": sample.tilt_deg,
        "layer_magnitudes_G_per_A": [s.magnitude for s in layers],
        "aperture_uniformity": aperture_uniformity(geom, segments_per_turn=section.segments_per_turn),
        "nv": {
            "axis": list(section.frame().nv_axis),
            "b_parallel_G_per_A": projection.b_parallel,
            "b_transverse_G_per_A": projection.b_transverse,
            "theta_d_deg": projection.theta_d_deg,
            "at_boundary": projection.at_boundary,
            "drive_field_G_per_A": transverse_field_ratio(sample.magnitude, projection.theta_d),
        },
    }
    if geom.turns == 1 and geom.layers == 1:
        report["loop_closed_form_G_per_A"] = loop_axis_field(float(geom.radii[0]), geom.sample_height)

    outputs = [ctx.write_json("spiral_report.json", report)]
    if section.field_map:
        samples = field_map(geom, None, section.resolution, section.map_segments, workers=ctx.threads)
        outputs.append(ctx.write_csv("field_map.csv", field_map_frame(samples)))
    ctx.logger.success(f"spiral: |B|/I = {sample.magnitude:.2f} G/A, tilt {sample.tilt_deg:.2f} deg, "
                       f"theta_d = {projection.theta_d_deg:.2f} deg")
    return outputs


@click.command("spiral")
@click.pass_obj
def spiral(options):
    """Biot-Savart field of the planar spiral and its NV-frame projection."""
    run_command("spiral", cmd_spiral, options)
