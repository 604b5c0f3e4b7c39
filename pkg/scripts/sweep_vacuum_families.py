#!/usr/bin/env python3
"""Sweep the two spherically symmetric example metrics over a rho grid and
compare the curvature invariant against their closed forms.

Usage: python scripts/sweep_vacuum_families.py [outfile.csv]
"""

import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kappa.cli import builtin_manifest_path
from kappa.curvature import kappa_report
from kappa.manifest import load_manifest
from kappa.report import csv_line


def closed_first(rho, m=1.0):
    return 2.0 * m * m / rho**6


def closed_second(rho, m=1.0):
    return closed_first(rho, m) * math.exp(4.0 * m / rho) * math.sqrt(
        (1.0 + m / (2.0 * rho)) * (1.0 + m / rho)
    )


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else None
    rows = []
    for name, closed in (
        ("schwarzschild.toml", closed_first),
        ("schwarzschild-isotropic.toml", closed_second),
    ):
        chart = load_manifest(builtin_manifest_path(name)).chart()
        worst = 0.0
        for rho in np.linspace(3.0, 10.0, 15):
            rep = kappa_report(chart, [rho, 1.2, 0.7, 0.0])
            want = closed(rho)
            dev = abs(abs(rep.kappa) - want) / want
            worst = max(worst, dev)
            rows.append([name, rho, abs(rep.kappa), want, dev])
        print(f"{name}: max relative deviation {worst:.3e}")
    if out:
        with open(out, "w", newline="") as fh:
            fh.write("family,rho,kappa,closed_form,rel_dev\n")
            for row in rows:
                fh.write(row[0] + "," + csv_line(row[1:]).lstrip(","))
        print(f"wrote {out}")


if __name__ == "__main__":
    main()
