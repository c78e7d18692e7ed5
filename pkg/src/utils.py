"""Shared output helpers: hashing, CSV/JSON writers and the metadata sidecar."""

from __future__ import annotations

import csv
import hashlib
import logging
import re
from collections.abc import Iterable, Sequence
from datetime import UTC, datetime
from pathlib import Path

from pydantic import BaseModel

from src import __version__
from src.models.reports import RunMetadata

logger = logging.getLogger(__name__)

type Cell = str | int | float | bool | None


def compute_file_hash(file_path: Path) -> str:
    """Compute SHA256 hash of a file.

    Args:
        file_path: Path to the file to hash

    Returns:
        Hex digest of SHA256 hash
    """
    sha256 = hashlib.sha256()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(8192), b""):
            sha256.update(chunk)
    return sha256.hexdigest()


def derive_output_name(config_path: Path | None) -> str:
    """Stem for output files: the sanitized config file name, or 'run'."""
    stem = config_path.stem if config_path is not None else "run"
    stem = re.sub(r"_+", "_", re.sub(r"[^0-9A-Za-z_-]", "_", stem)).strip("_")
    return stem or "run"


def _cell(value: Cell) -> str:
    # repr of a plain float round-trips exactly
    if isinstance(value, float):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Cell]],
    comment: str | None = None,
) -> int:
    """Write an RFC-4180 CSV with an optional leading ``#`` comment line; returns the row count."""
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="") as f:
        if comment:
            _ = f.write(f"# {comment}\n")
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
            count += 1
    logger.info("Wrote %d rows to %s", count, path)
    return count


def write_json(path: Path, report: BaseModel) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    _ = path.write_text(report.model_dump_json(indent=2) + "\n")
    logger.info("Wrote %s", path)


def write_metadata(
    primary: Path,
    command: str,
    seed: int,
    threads: int,
    outputs: Sequence[Path],
    config_path: Path | None = None,
) -> Path:
    """Write ``<primary>.meta.json`` next to a primary output.

    Timestamps and host details live only here, so primary outputs stay byte-identical
    between reruns.
    """
    meta = RunMetadata(
        command=command,
        version=__version__,
        created_at=datetime.now(UTC).isoformat(),
        config_sha256=compute_file_hash(config_path) if config_path is not None else None,
        threads=threads,
        seed=seed,
        outputs=[p.name for p in outputs],
    )
    sidecar = primary.with_name(primary.name + ".meta.json")
    write_json(sidecar, meta)
    return sidecar
