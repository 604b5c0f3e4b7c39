#!/usr/bin/env python3
"""Print principal curvature spectra for a few classic immersions and the
line-of-curvature check for curves on a torus.

Usage: python scripts/principal_spectra_demo.py
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kappa.expr import parse
from kappa.geometry import ImmersionChart, NestedChart
from kappa.subspaces import ambient_shape, principal_spectrum, subspace_residual


def immersion(coords, sources, params=None):
    names = tuple((params or {}).keys())
    comps = tuple(parse(s, coords=coords, params=names) for s in sources)
    return ImmersionChart(tuple(coords), comps, dict(params or {}))


TORUS = immersion(
    ["u", "v"],
    ["(R + r*cos(u))*cos(v)", "(R + r*cos(u))*sin(v)", "r*sin(u)"],
    {"R": 2.0, "r": 0.7},
)

CASES = [
    (
        "sphere a=1.3",
        immersion(
            ["theta", "phi"],
            ["a*sin(theta)*cos(phi)", "a*sin(theta)*sin(phi)", "a*cos(theta)"],
            {"a": 1.3},
        ),
        [0.9, 0.4],
    ),
    (
        "cylinder a=1.0",
        immersion(["phi", "z"], ["a*cos(phi)", "a*sin(phi)", "z"], {"a": 1.0}),
        [0.5, 0.0],
    ),
    ("torus R=2 r=0.7", TORUS, [0.6, 0.9]),
]


def main():
    for label, chart, pt in CASES:
        rep = principal_spectrum(ambient_shape(chart, pt))
        print(f"{label}:")
        print(f"  eigenvalues     {[f'{v:.6g}' for v in rep.eigenvalues]}")
        print(f"  multiplicities  {rep.multiplicities}")
        print(f"  k^2             {rep.k_sq:.6g}")
        print(f"  mixed product   {rep.mixed_product}")

    meridian = NestedChart(
        inner=immersion(["t"], ["t", "0.9"], {"R": 2.0, "r": 0.7}),
        outer=TORUS,
    )
    helix = NestedChart(
        inner=immersion(["t"], ["t", "t"], {"R": 2.0, "r": 0.7}),
        outer=TORUS,
    )
    for label, nested in (("torus meridian", meridian), ("torus diagonal curve", helix)):
        cond = subspace_residual(nested, [0.6])
        print(
            f"{label}: kappa_hat^2 = {cond.kappa_hat_sq:.6g}, "
            f"residual = {cond.residual:.3e}, line of curvature: {cond.satisfied}"
        )


if __name__ == "__main__":
    main()
