import json
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

import click

ICONS = {"INFO": "🔵", "WARNING": "⚠️", "ERROR": "❌", "SUCCESS": "✅"}


class RunLogger:
    """
    Run-level logger: every message becomes a JSON line in <out>/run_log.jsonl
    and an icon-prefixed line on stderr.
    """
    def __init__(self, task_id: str = "run", log_path: Optional[Path] = None, echo: bool = True):
        self.task_id = task_id
        self.log_path = Path(log_path) if log_path is not None else None
        self.echo = echo
        self.log_messages: List[str] = []
        if self.log_path is not None:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)

    def log(self, message: str, level: str = "INFO"):
        level = level.upper()
        icon = ICONS.get(level, ICONS["INFO"])
        record = {
            "task_id": self.task_id,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "level": level,
            "icon": icon,
            "message": message,
        }
        line = json.dumps(record, ensure_ascii=False)
        self.log_messages.append(line)

        if self.log_path is not None:
            with self.log_path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
        if self.echo:
            click.echo(f"{icon} {message}", err=True)

    def info(self, message: str): self.log(message, "INFO")
    def warn(self, message: str): self.log(message, "WARNING")
    def error(self, message: str): self.log(message, "ERROR")
    def success(self, message: str): self.log(message, "SUCCESS")
