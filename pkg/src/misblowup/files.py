"""CSV and certificate files.  Floats are written in their shortest
round-trip decimal form (Python's repr)."""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .certifier import Certificate

FLOWLINE_COLUMNS = ("tau", "rho", "n", "Pi", "e", "bound_Pi", "F")
SNAPSHOT_COLUMNS = ("rho", "n", "Pi", "u", "cs2", "e")


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """(header, rows of floats)."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row] for row in r]
    return header, rows


def write_certificate(path, cert: Certificate) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(cert.dumps())
    return path


def read_certificate(path) -> Certificate:
    return Certificate.loads(Path(path).read_text())


def certificates_agree(a: Certificate, b: Certificate, rtol: float = 1e-9) -> list:
    """Names of fields on which two certificates differ."""
    out = []
    for name, va in vars(a).items():
        vb = getattr(b, name)
        if name == "reasons":
            continue
        if isinstance(va, bool) or isinstance(vb, bool):
            if bool(va) != bool(vb):
                out.append(name)
        elif not (math.isnan(va) and math.isnan(vb)) and not math.isclose(va, vb, rel_tol=rtol, abs_tol=1e-300):
            out.append(name)
    return out
