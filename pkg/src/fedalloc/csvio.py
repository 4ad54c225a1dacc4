"""Fixed-header CSV writers/readers for run outputs."""

from __future__ import annotations

import csv
from pathlib import Path

from .errors import FedAllocError

HEADERS = {
    "rounds": ["point", "trial", "round", "method", "kse", "subchannels", "selected",
               "t_comp_s", "initial_t_comp_s", "iterations", "moves"],
    "summary": ["axis", "value", "method", "kse", "subchannels", "rounds", "trials",
                "mean_total_s", "std_total_s"],
    "trajectory": ["kse", "seed", "round", "distance", "global_loss"],
    "assignments": ["point", "trial", "method", "round", "device", "subchannel"],
    "bound": ["kse", "r_min", "u1", "u2", "u3"],
    "fl_summary": ["kse", "seeds", "median_rounds_to_accuracy", "reached",
                   "median_final_distance"],
}

_INT_FIELDS = {"point", "trial", "round", "kse", "subchannels", "rounds", "trials",
               "iterations", "moves", "seed", "device", "subchannel", "seeds", "reached"}
_STR_FIELDS = {"method", "axis", "selected"}


class CsvWriteError(FedAllocError, OSError):
    exit_code = 7


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.9g}"
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    return str(v)


def emit_csv(kind: str, rows, path) -> Path:
    """Write ``rows`` (sequences in header order, or dicts) under the header for ``kind``."""
    header = HEADERS[kind]
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                if isinstance(row, dict):
                    row = [row[h] for h in header]
                w.writerow([fmt(v) for v in row])
    except OSError as e:
        raise CsvWriteError(f"cannot write {path}: {e}") from e
    return path


def _parse(name: str, text: str):
    if text == "":
        return None
    if name in _STR_FIELDS:
        return text
    if name in _INT_FIELDS:
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [{k: _parse(k, v) for k, v in row.items()} for row in csv.DictReader(fh)]
