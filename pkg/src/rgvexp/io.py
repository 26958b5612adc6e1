"""CSV and JSON artifacts written by the command-line tools."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

__all__ = ["format_value", "dumps_csv", "write_csv", "read_csv", "dumps_json", "write_json"]


def format_value(v) -> str:
    """12 significant digits for floats; ``inf``/``-inf``/``nan`` spelled out."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.12g" % v
    if v is None:
        return ""
    try:
        return "%.12g" % float(v)
    except (TypeError, ValueError):
        return str(v)


def dumps_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def _write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        import sys

        sys.stdout.write(text)
        sys.stdout.flush()
        return
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_csv(path, header, rows) -> None:
    _write_text(path, dumps_csv(header, rows))


def _parse(cell: str):
    if cell == "":
        return None
    try:
        if cell.lstrip("-").isdigit():
            return int(cell)
        return float(cell)
    except ValueError:
        return cell


def read_csv(source) -> tuple[list[str], list[dict]]:
    """Parse a CSV written by :func:`write_csv` back into typed rows."""
    if isinstance(source, (str, Path)) and Path(source).exists():
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [dict(zip(header, (_parse(c) for c in r))) for r in reader if r]
    return header, rows


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def dumps_json(doc) -> str:
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"


def write_json(path, doc) -> None:
    _write_text(path, dumps_json(doc))
