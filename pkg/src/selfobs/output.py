"""CSV/JSON writers with round-trip float formatting and atomic replacement."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path


def fmt(x) -> str:
    """17 significant digits, enough for an exact float round trip."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def json_text(header, rows) -> str:
    cols = {name: [] for name in header}
    for row in rows:
        for name, v in zip(header, row):
            v = float(v)
            cols[name].append(None if math.isnan(v) else float(fmt(v)))
    return json.dumps(cols, indent=1) + "\n"


def table_text(header, rows, output_format: str) -> str:
    if output_format == "json":
        return json_text(header, rows)
    return csv_text(header, rows)


def atomic_write(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_of(texts) -> str:
    digest = hashlib.sha256()
    for t in texts:
        digest.update(t.encode("utf-8"))
    return digest.hexdigest()
