# meander_nfc/export.py
"""
Flat-file writers shared by every pipeline.

CSV files start with ``#``-prefixed provenance lines. The timestamp has its
own line so two runs of the same config differ only there.
"""
import csv
import json
import logging
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

logger = logging.getLogger(__name__)


def provenance(config_hash=None, seed=None, **extra):
    header = {"version": __version__}
    if config_hash is not None:
        header["config_hash"] = config_hash
    if seed is not None:
        header["seed"] = seed
    header.update(extra)
    return header


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return int(value)
    if value is None:
        return ""
    return value


def write_csv(path, columns, rows, header=None, timestamp=True):
    """Write ``rows`` (sequences matching ``columns``) with a provenance header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for key, value in (header or {}).items():
            fh.write(f"# {key}: {value}\n")
        if timestamp:
            fh.write(f"# generated: {datetime.now(timezone.utc).isoformat()}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.info("Wrote %s", path)
    return path


def read_csv(path):
    """Return (header dict, column names, rows as lists of strings)."""
    header, lines = {}, []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(": ")
                header[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader)
    return header, columns, list(reader)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")
    logger.info("Wrote %s", path)
    return path


def sidecar_path(path):
    path = Path(path)
    return path.with_suffix(path.suffix + ".json")


def write_table(path, columns, rows, header=None, fmt="csv"):
    """CSV with provenance lines, or JSON ``{"header", "columns", "rows"}``."""
    path = Path(path)
    if fmt == "json":
        rows = [[_jsonable_cell(v) for v in row] for row in rows]
        return write_json(path.with_suffix(".json"), {"header": header or {}, "columns": list(columns), "rows": rows})
    return write_csv(path.with_suffix(".csv"), columns, rows, header)


def _jsonable_cell(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value
