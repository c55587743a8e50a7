import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import click
from pydantic import ValidationError

from spiraldrive.engine.errors import SpiralDriveError
from spiraldrive.services.context import RunContext

log = logging.getLogger(__name__)

Handler = Callable[[RunContext], List[Path]]


def _validation_message(exc: ValidationError) -> str:
    """Field-level messages, one per line: `section.field: problem`."""
    lines = []
    for err in exc.errors():
        where = ".".join(str(part) for part in err["loc"]) or "config"
        lines.append(f"{where}: {err['msg']}")
    return "invalid config\n  " + "\n  ".join(lines)


def run_command(command: str, handler: Handler, options: Dict[str, Any]) -> None:
    """
    Builds the RunContext, runs one subcommand and maps failures to exit codes:
    1 validation, 2 input parse or file I/O, 3 numerical failure.
    """
    ctx: Optional[RunContext] = None

    def fail(message: str, code: int) -> None:
        if ctx is not None:
            ctx.logger.error(message)
        else:
            click.echo(f"❌ {message}", err=True)
        raise SystemExit(code)

    try:
        ctx = RunContext(command, options.get("config"), options.get("out"),
                         options.get("seed"), options.get("threads"))
        ctx.logger.info(f"{command}: config={ctx.config_path or '<defaults>'}, out={ctx.out_dir}, "
                        f"seed={ctx.seed}, threads={ctx.threads}")
        outputs = handler(ctx)
    except SpiralDriveError as exc:
        log.debug(f"{command} failed", exc_info=True)
        fail(f"{type(exc).__name__}: {exc}", exc.exit_code)
    except ValidationError as exc:
        fail(_validation_message(exc), 1)
    except OSError as exc:
        # run log may itself be unwritable
        log.debug(f"{command} failed", exc_info=True)
        ctx = None
        fail(f"I/O error: {exc}", 2)

    ctx.logger.success(f"{command}: wrote {len(outputs)} file(s) to {ctx.out_dir}")
