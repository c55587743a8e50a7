import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv

# Load .env BEFORE the settings are read so SPIRALDRIVE_* overrides apply
load_dotenv()

from pydantic_settings import BaseSettings, SettingsConfigDict

from spiraldrive.engine.artifacts import write_csv, write_json
from spiraldrive.engine.utils import provenance
from spiraldrive.schemas.base import RunConfig, load_run_config
from spiraldrive.services.logger import RunLogger

log = logging.getLogger(__name__)


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="SPIRALDRIVE_", extra="ignore")

    out_dir: Optional[str] = None
    threads: Optional[int] = None
    log_level: str = "WARNING"


class RunContext:
    """
    Everything one CLI invocation needs: validated config, resolved output
    directory, seed, thread count and the run logger.
    Precedence for out_dir / threads / seed: CLI flag > environment > config file > default.
    """
    def __init__(self, command: str, config_path: Optional[Union[str, Path]] = None,
                 out_dir: Optional[Union[str, Path]] = None, seed: Optional[int] = None,
                 threads: Optional[int] = None, settings: Optional[Settings] = None, echo: bool = True):
        self.settings = settings or Settings()
        self.command = command
        self.config_path = Path(config_path) if config_path is not None else None
        self.config, self.raw_config = load_run_config(self.config_path)
        run = self.config.run

        self.out_dir = Path(out_dir or self.settings.out_dir or run.out_dir)
        self.seed = seed if seed is not None else run.seed
        self.threads = threads or self.settings.threads or run.threads
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.logger = RunLogger(task_id=command, log_path=self.out_dir / "run_log.jsonl", echo=echo)

    @property
    def base_dir(self) -> Path:
        """Directory that relative input paths in the config resolve against."""
        return self.config_path.parent if self.config_path is not None else Path.cwd()

    def resolve_input(self, name: str) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.base_dir / path

    def provenance(self, **extra: Any) -> Dict[str, Any]:
        return provenance(self.raw_config, seed=self.seed, command=self.command, **extra)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write_json(self, name: str, payload: Dict[str, Any], **extra: Any) -> Path:
        target = write_json(self.path(name), payload, self.provenance(**extra))
        log.info(f"✅ Wrote {target}")
        return target

    def write_csv(self, name: str, frame, metadata: Optional[Dict[str, Any]] = None, index: bool = False) -> Path:
        target = write_csv(self.path(name), frame, self.provenance(), metadata, index=index)
        log.info(f"✅ Wrote {target}")
        return target


def describe(config: RunConfig) -> str:
    """One-line summary of the control-system section for run logs."""
    s = config.system
    return f"w0={s.omega0:g}, Wd={s.omega_d}, theta_d={s.theta_d_deg:g} deg"
