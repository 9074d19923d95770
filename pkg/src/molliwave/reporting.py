"""CSV artifact writing with reproducible formatting.

All numeric output is printed with 17 significant digits so identical runs
produce byte-identical files; writers use a single thread and newline-only
line endings.
"""

from __future__ import annotations

import os

__all__ = ["fmt17", "write_csv", "ensure_dir"]


def fmt17(value) -> str:
    """Format a number with 17 significant digits (round-trippable)."""
    if isinstance(value, int):
        return str(value)
    return "%.17g" % float(value)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_csv(path: str, header, rows, footer_lines=()) -> str:
    """Write one CSV artifact: header line, data rows, optional footer lines.

    Footer lines start with '#' and carry summary payloads (documented per
    artifact type); rows are sequences formatted via fmt17.
    """
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt17(v) for v in row) + "\n")
        for line in footer_lines:
            if not line.startswith("#"):
                line = "# " + line
            fh.write(line + "\n")
    return path
