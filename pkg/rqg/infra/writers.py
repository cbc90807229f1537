"""
Deterministic writers for run outputs.

Numbers are written with 12 significant digits so identical runs give
byte-identical files on one platform.
"""

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from .exceptions import RQGError

SIGNIFICANT_DIGITS = 12

TRAJECTORY_FILE = "trajectory.tsv"
SUMMARY_FILE = "summary.json"
DENSITY_FILE = "density_matrix.tsv"
DENSITY_REFERENCE_FILE = "density_matrix_{}.tsv"
MANIFEST_FILE = "manifest.json"


def format_number(value: float) -> str:
    """Format a float with 12 significant digits, without a negative zero."""
    text = f"{value:.{SIGNIFICANT_DIGITS}g}"
    return "0" if text in ("-0", "0") else text


def round_floats(data: Any) -> Any:
    """Recursively round floats to 12 significant digits; non-finite values become strings."""
    if isinstance(data, bool) or data is None:
        return data
    if isinstance(data, float):
        if not math.isfinite(data):
            return str(data)
        return float(format_number(data))
    if isinstance(data, dict):
        return {str(k): round_floats(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [round_floats(v) for v in data]
    return data


def _write_text(path: Path, text: str) -> Path:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise RQGError(f"Failed to write {path}: {e}")
    return path


def write_table(path: Path, columns: List[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """Tab-separated table with a header line."""
    lines = ["\t".join(columns)]
    for row in rows:
        cells = []
        for column in columns:
            value = row[column]
            cells.append(format_number(value) if isinstance(value, float) else str(value))
        lines.append("\t".join(cells))
    return _write_text(path, "\n".join(lines) + "\n")


def write_json(path: Path, data: Dict[str, Any]) -> Path:
    return _write_text(path, json.dumps(round_floats(data), sort_keys=True, indent=2) + "\n")


def file_digest(path: Path) -> str:
    """
    SHA-256 of a file's content.

    Raises:
        RQGError: If the file cannot be read.
    """
    try:
        sha256_hash = hashlib.sha256()
        with open(path, "rb") as f:
            for byte_block in iter(lambda: f.read(4096), b""):
                sha256_hash.update(byte_block)
        return sha256_hash.hexdigest()
    except OSError as e:
        raise RQGError(f"Failed to hash {path}: {e}")


class OutputWriter:
    """Writes the files of one run into an output directory."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)

    def write(self, summary: Dict[str, Any], trajectory_rows: Optional[List[Dict[str, Any]]] = None,
              trajectory_columns: Optional[List[str]] = None,
              density_rows: Optional[List[Dict[str, Any]]] = None,
              reference_rows: Optional[Dict[str, List[Dict[str, Any]]]] = None) -> List[Path]:
        """
        Write the summary plus whichever tables the run produced.

        Returns:
            Paths of the written files, manifest excluded.
        """
        self.out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        if trajectory_rows is not None:
            columns = trajectory_columns or (list(trajectory_rows[0]) if trajectory_rows else ["time_ns"])
            written.append(write_table(self.out_dir / TRAJECTORY_FILE, columns, trajectory_rows))
        written.append(write_json(self.out_dir / SUMMARY_FILE, summary))
        if density_rows is not None:
            written.append(write_table(self.out_dir / DENSITY_FILE, ["row", "col", "real", "imag"],
                                       density_rows))
        for name, rows in sorted((reference_rows or {}).items()):
            written.append(write_table(self.out_dir / DENSITY_REFERENCE_FILE.format(name),
                                       ["row", "col", "real", "imag"], rows))
        return written

    def write_manifest(self, config: Dict[str, Any], version: str, files: List[Path],
                       wall_clock_seconds: float) -> Path:
        """Manifest echoing the resolved config with a digest of every written file."""
        manifest = {
            "config": config,
            "version": version,
            "wall_clock_seconds": wall_clock_seconds,
            "files": {path.name: file_digest(path) for path in files},
        }
        return write_json(self.out_dir / MANIFEST_FILE, manifest)
