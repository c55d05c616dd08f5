"""Run records written next to each experiment's artifacts."""

from __future__ import annotations

import json
import logging
import re
from datetime import datetime, timezone
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field

from .. import __version__
from ..errors import OutputError

logger = logging.getLogger(__name__)

_RUN_FILE = re.compile(r"^run-(\d{4,})\.json$")


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


class RunRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    run_id: str = Field(pattern=r"^run-\d{4,}$")
    kind: str
    seed: int
    config_hash: str
    started_at: datetime
    finished_at: datetime | None = None
    artifacts: list[str] = Field(default_factory=list)
    version: str = __version__

    def finish(self, artifacts: list[Path], out_dir: Path) -> RunRecord:
        """Copy with the end timestamp set and artifact paths relative to ``out_dir``."""
        relative = [str(Path(p).relative_to(out_dir)) if Path(p).is_relative_to(out_dir) else str(p) for p in artifacts]
        return self.model_copy(update={"finished_at": utc_now(), "artifacts": relative})


def next_run_id(out_dir: Path) -> str:
    """First ``run-NNNN`` id above every record already in ``out_dir``."""
    numbers = [int(m.group(1)) for p in out_dir.glob("run-*.json") if (m := _RUN_FILE.match(p.name))]
    return f"run-{max(numbers, default=0) + 1:04d}"


def write_run_record(record: RunRecord, out_dir: Path) -> Path:
    """
    Write ``<run_id>.json`` into ``out_dir``; an existing record is never overwritten.

    Raises:
        OutputError: If the record exists already or cannot be written.
    """
    path = out_dir / f"{record.run_id}.json"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with path.open("x", encoding="utf-8") as fh:
            fh.write(json.dumps(record.model_dump(mode="json"), indent=2) + "\n")
    except FileExistsError as exc:
        raise OutputError(path, "run record already exists") from exc
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    logger.info("Run record %s written to %s", record.run_id, path)
    return path


def read_run_record(path: Path) -> RunRecord:
    return RunRecord.model_validate_json(path.read_text(encoding="utf-8"))
