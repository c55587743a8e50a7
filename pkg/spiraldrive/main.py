import logging
import os
import sys

import click

# Allow "spiraldrive.x" imports when run as a script from inside the package folder
current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
if parent_dir not in sys.path:
    sys.path.append(parent_dir)

from spiraldrive import __version__
from spiraldrive.services.context import Settings


@click.group()
@click.version_option(__version__, prog_name="spiraldrive")
@click.option("--config", "config", type=click.Path(dir_okay=False), default=None, help="TOML (or JSON) run config.")
@click.option("--out", "out", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--seed", type=int, default=None, help="Seed recorded in provenance headers.")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads for grids and suites.")
@click.pass_context
def cli(ctx, config, out, seed, threads):
    """Strong tilted-drive pulse simulation, optimal control, spiral antenna fields and data fits."""
    level = Settings().log_level.upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config": config, "out": out, "seed": seed, "threads": threads}


# Commands
from spiraldrive.commands import fit, landscape, optimal_control, simulate, spiral
cli.add_command(simulate.simulate)
cli.add_command(landscape.landscape_command)
cli.add_command(optimal_control.oct_command)
cli.add_command(spiral.spiral)
cli.add_command(fit.fit)


def main():
    cli()


if __name__ == "__main__":
    main()
