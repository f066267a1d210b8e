"""CSV/JSON output with atomic file replacement."""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["fmt", "atomic_write_text", "write_csv", "csv_text", "trace_rows", "dump_json", "versions"]


def fmt(value) -> str:
    """17 significant digits, '.' decimal separator."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def atomic_write_text(path, text: str) -> Path:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(fh, header, rows) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    write_csv(buf, header, rows)
    return buf.getvalue()


def trace_rows(records, candidates, linf=None, l2=None, include_timing: bool = True):
    """Header and rows of the per-iteration trace.

    ``linf``/``l2`` are error curves indexed by iteration count (entry 0 is
    the empty interpolant); they are omitted when not given.
    """
    dim = candidates.dim
    coords = ["x", "y", "z"][:dim] if dim <= 3 else [f"x{i}" for i in range(dim)]
    header = ["n", "functional_id", "domain", "op", *coords, "eta", "power", "residual"]
    if linf is not None:
        header += ["linf_error", "l2_error"]
    if include_timing:
        header.append("ms")
    rows = []
    for rec in records:
        f = candidates[rec.functional_id]
        row = [rec.n, rec.functional_id, f.domain, f.op.label, *f.point, rec.eta, rec.power, rec.residual]
        if linf is not None:
            row += [linf[rec.n], l2[rec.n]]
        if include_timing:
            row.append(rec.ms)
        rows.append(row)
    return header, rows


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, default=_default, allow_nan=True) + "\n"


def versions() -> dict:
    import scipy

    from . import __version__

    return {
        "pdegreedy": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
