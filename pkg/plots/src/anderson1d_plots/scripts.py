"""One command-line script per figure kind; all share --csv and --out."""

from __future__ import annotations

import argparse
import sys

from .render import RENDERERS


def _run(kind: str, argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog=f"anderson1d-plot-{kind}",
        description=f"Render the {kind} figure from a simulation CSV.",
    )
    parser.add_argument("--csv", required=True, help="input CSV path")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        RENDERERS[kind](args.csv, args.out)
    except Exception as exc:  # noqa: BLE001 - report and signal failure
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{kind}: {args.csv} -> {args.out}")
    return 0


def main_fig1() -> None:
    sys.exit(_run("fig1"))


def main_fig2() -> None:
    sys.exit(_run("fig2"))


def main_dos_overlay() -> None:
    sys.exit(_run("dos-overlay"))


def main_temperature_step() -> None:
    sys.exit(_run("temperature-step"))


def main_tail_ensemble() -> None:
    sys.exit(_run("tail-ensemble"))
