"""Shared helpers for the experiment scripts."""
import argparse
import os
from pathlib import Path

from superradiance.cli import OUT_ENV, write_table


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default=os.environ.get(OUT_ENV, "results"), help="output directory")
    return p


def save(out: str, name: str, header, rows) -> Path:
    path = Path(out) / f"{name}.csv"
    write_table(path, header, rows)
    return path


def show(header, rows) -> None:
    widths = [max(len(str(h)), *(len(_fmt(r[i])) for r in rows)) for i, h in enumerate(header)]
    print("  ".join(str(h).rjust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(_fmt(v).rjust(w) for v, w in zip(r, widths)))


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)
