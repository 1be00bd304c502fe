"""Deterministic JSON and CSV emission.

Floats are written with 17 significant digits, keys are sorted and line
endings are LF, so identical results give byte-identical files.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os

import numpy as np

FLOAT_FMT = "%.17g"


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return FLOAT_FMT % x


def to_plain(obj):
    """Recursively convert numpy scalars/arrays and dataclasses to builtins."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_plain(obj.to_dict())
        return to_plain({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}{_encode(k, indent, level + 1)}: {_encode(obj[k], indent, level + 1)}'
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) \
            + "\n" + end + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    # strings: reuse the stdlib escaper
    return json.dumps(obj, ensure_ascii=False)


def dumps_json(obj, indent: int = 2) -> str:
    """Serialize with sorted keys and ``%.17g`` floats."""
    return _encode(to_plain(obj), indent, 0) + "\n"


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj))


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt_float(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    """Comma-separated, header row, LF line endings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def series_rows(series):
    """``(header, rows)`` for a DecaySeries: columns n, value, stderr."""
    return ["n", "value", "stderr"], [(int(n) if float(n).is_integer() else float(n), v, s)
                                      for n, v, s in zip(series.n, series.values, series.stderr)]


def emit_report(results: dict, out_dir, fmt: str = "both") -> list:
    """Write ``summary.json`` and one CSV per table in ``results["tables"]``.

    ``results`` holds a ``summary`` mapping and a ``tables`` mapping from
    file stem to ``(header, rows)``.  Returns the written paths in order.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        p = os.path.join(out_dir, "summary.json")
        write_json(p, results.get("summary", {}))
        written.append(p)
    if fmt in ("csv", "both"):
        for stem in sorted(results.get("tables", {})):
            header, rows = results["tables"][stem]
            p = os.path.join(out_dir, f"{stem}.csv")
            write_csv(p, header, rows)
            written.append(p)
    return written
