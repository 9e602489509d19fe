"""
Output writers for genedup experiments.

This module contains the functions that put results on disk: CSV tables
with 9-significant-digit floats, a key-sorted ``summary.json`` and the
run manifest. The manifest is written last and atomically, so an output
directory without one marks an interrupted run. A plain-text table
renderer is provided for console reports such as ``verify``.
"""

import csv
import hashlib
import json
import logging
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .numerics import fmt_sig
from .schemas import RunManifest

logger = logging.getLogger(__name__)

TOOL_NAME = "genedup"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def file_digest(path: Path) -> str:
    """sha256 hex digest of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, int, float, np.bool_, np.integer, np.floating)):
        return fmt_sig(value)
    return str(value)


def json_safe(value: Any) -> Any:
    """Make summary values JSON-safe, rounding floats to 9 significant digits."""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [json_safe(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return float(fmt_sig(value)) if np.isfinite(value) else None
    return value


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a header row and data rows with locale-free formatting.

    Args:
        path: Destination file.
        header: Column names.
        rows: Row sequences, each as long as the header.

    Returns:
        The path written.
    """
    path = Path(path)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row {count} has {len(row)} cells, header has {len(header)}")
            writer.writerow([_cell(v) for v in row])
            count += 1
    logger.debug("wrote %d rows to %s", count, path)
    return path


def write_summary(path: Path, summary: Dict[str, Any]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(json_safe(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_manifest(
    out_dir: Path,
    config: Dict[str, Any],
    seed: int,
    started_at: str,
    outputs: Sequence[str],
) -> RunManifest:
    """Digest every output and write ``manifest.json`` by atomic rename."""
    out_dir = Path(out_dir)
    manifest = RunManifest(
        tool=TOOL_NAME,
        version=__version__,
        config=config,
        seed=seed,
        started_at=started_at,
        finished_at=utc_now(),
        outputs={name: file_digest(out_dir / name) for name in sorted(outputs)},
    )
    fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".manifest.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(manifest.model_dump(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, out_dir / "manifest.json")
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info("manifest written to %s", out_dir / "manifest.json")
    return manifest


class ReportWriter:
    """Collects the files of one run and seals them with a manifest."""

    def __init__(self, out_dir: Path, config: Dict[str, Any], seed: int):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.seed = seed
        self.started_at = utc_now()
        self.outputs: List[str] = []

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = write_csv(self.out_dir / name, header, rows)
        self.outputs.append(name)
        return path

    def summary(self, summary: Dict[str, Any]) -> Path:
        path = write_summary(self.out_dir / "summary.json", summary)
        self.outputs.append("summary.json")
        return path

    def finish(self) -> RunManifest:
        return write_manifest(self.out_dir, self.config, self.seed, self.started_at, self.outputs)


def render_table(header: Sequence[str], rows: Sequence[Sequence[Any]], title: Optional[str] = None) -> str:
    """Plain-text table with columns padded to their widest cell."""
    cells = [[str(h) for h in header]] + [[_cell(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    if title:
        lines.append(title)
    for n, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
