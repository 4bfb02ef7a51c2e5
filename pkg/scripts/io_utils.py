#!/usr/bin/env python3
"""
Deterministic CSV output shared by the CLI and the experiment runner
"""

import csv
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np


def format_value(value) -> str:
    """Round-trip float formatting; empty cell for None"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_rows(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path
