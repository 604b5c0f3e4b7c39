"""Command-line front end.

Subcommands: tensors, kappa, principal, sweep, verify-example, chio-det.
Exit codes: 0 success, 1 usage, 2 manifest problems, 3 numeric/engine
failures (with the offending point attached).  KAPPA_THREADS caps sweep
parallelism; sweep output order is the deterministic grid order regardless.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import curvature, geometry, linalg, report, subspaces
from .expr import ExprError
from .manifest import ManifestError, load_manifest, resolve_grid, resolve_points

_ENGINE_ERRORS = (
    ExprError,
    geometry.GeometryError,
    linalg.LinalgError,
    curvature.CurvatureError,
    subspaces.SubspaceError,
)


class _UsageError(Exception):
    pass


class PointError(RuntimeError):
    """Engine failure annotated with the evaluation point."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def builtin_manifest_path(name):
    return Path(__file__).parent / "manifests" / name


def _parse_at(text):
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        if "=" not in item:
            raise _UsageError(f"--at expects name=value pairs, got {item!r}")
        name, _, val = item.partition("=")
        try:
            out[name.strip()] = float(val)
        except ValueError:
            raise _UsageError(f"--at {name}: {val!r} is not a number") from None
    return out


def _parse_grid(text):
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        if "=" not in item:
            raise _UsageError(f"--grid expects name=lo:hi:n, got {item!r}")
        name, _, spec = item.partition("=")
        parts = spec.split(":")
        if len(parts) != 3:
            raise _UsageError(f"--grid {name}: expected lo:hi:n, got {spec!r}")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise _UsageError(f"--grid {name}: bad numbers in {spec!r}") from None
        if n < 1:
            raise _UsageError(f"--grid {name}: count must be >= 1")
        out[name.strip()] = (lo, hi, n)
    return out


def _parse_pivot(text):
    if text == "auto":
        return "auto"
    parts = text.split(",")
    if len(parts) != 2:
        raise _UsageError(f"--pivot expects auto or p,q (1-based), got {text!r}")
    try:
        p, q = int(parts[0]), int(parts[1])
    except ValueError:
        raise _UsageError(f"--pivot: bad indices {text!r}") from None
    if p == q or p < 1 or q < 1:
        raise _UsageError("--pivot indices must be distinct and 1-based")
    return (p - 1, q - 1)


def _emit(args, text):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _threads():
    raw = os.environ.get("KAPPA_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            raise _UsageError(f"KAPPA_THREADS is not an integer: {raw!r}") from None
    return min(8, os.cpu_count() or 1)


def _at_point(chart, point, fn):
    try:
        return fn()
    except _ENGINE_ERRORS as exc:
        coords = {name: float(v) for name, v in zip(chart.coords, point)}
        raise PointError(f"{exc} [at {coords}]") from exc


def _text_block(record, indent=""):
    lines = []
    for key, val in record.items():
        if isinstance(val, dict):
            lines.append(f"{indent}{key}:")
            lines.append(_text_block(val, indent + "  "))
        elif isinstance(val, list) and val and isinstance(val[0], (dict, list)):
            lines.append(f"{indent}{key}:")
            for item in val:
                if isinstance(item, dict):
                    lines.append(_text_block(item, indent + "  ").rstrip() )
                    lines.append(indent + "  --")
                else:
                    lines.append(f"{indent}  {item}")
        else:
            if isinstance(val, float):
                val = report.fmt_float(val)
            lines.append(f"{indent}{key}: {val}")
    return "\n".join(line for line in lines if line) + ("\n" if not indent else "")


def _render(args, payload):
    if args.format == "json":
        return report.to_json_text(payload) + "\n"
    return _text_block(payload)


# -- subcommands -------------------------------------------------------------


def cmd_tensors(args):
    man = load_manifest(args.manifest)
    chart = man.chart()
    points = resolve_points(man, _parse_at(args.at))
    names = chart.coords
    records = []
    for pt in points:
        tensors = _at_point(chart, pt, lambda: geometry.curvature_tensors(chart, pt))
        rec = report.tensors_record(chart, names, pt, tensors)
        flat = float(np.max(np.abs(tensors.riemann))) < curvature.FLAT_TOL * (
            1.0 + tensors.gamma_scale
        )
        rec["flags"] = ["flat"] if flat else []
        records.append(rec)
    payload = {"provenance": report.provenance(man, args.pivot), "points": records}
    _emit(args, _render(args, payload))
    return 0


def cmd_kappa(args):
    man = load_manifest(args.manifest)
    chart = man.chart()
    pivot = _parse_pivot(args.pivot)
    points = resolve_points(man, _parse_at(args.at))
    names = chart.coords
    records = []
    for pt in points:
        rep = _at_point(chart, pt, lambda: curvature.kappa_report(chart, pt, pivot=pivot))
        rec = {"coords": {n: float(v) for n, v in zip(names, pt)}}
        rec.update(report.kappa_record(rep))
        if isinstance(chart, geometry.NestedChart):
            split = _at_point(chart, pt, lambda: geometry.nested_split(chart, pt))
            rec["kappa_n"] = split.kappa_n
            rec["kappa_g"] = split.kappa_g
            rec["split_residual"] = split.split_residual
            if split.geodesic:
                rec["flags"] = rec["flags"] + ["geodesic-subspace"]
        records.append(rec)
    payload = {"provenance": report.provenance(man, args.pivot), "points": records}
    _emit(args, _render(args, payload))
    return 0


def cmd_principal(args):
    man = load_manifest(args.manifest)
    chart = man.chart()
    if isinstance(chart, geometry.MetricChart):
        raise ManifestError(man.path, "principal needs an immersion or nested manifest")
    points = resolve_points(man, _parse_at(args.at))
    names = chart.coords
    records = []
    for pt in points:
        if isinstance(chart, geometry.NestedChart):
            ambient_chart = chart.outer
            apt = _at_point(chart, pt, lambda: chart.ambient_point(pt))
        else:
            ambient_chart = chart
            apt = pt
        ag = _at_point(chart, pt, lambda: subspaces.ambient_shape(ambient_chart, apt))
        rep = _at_point(chart, pt, lambda: subspaces.principal_spectrum(ag))
        rec = {"coords": {n: float(v) for n, v in zip(names, pt)}}
        rec["principal"] = report.principal_record(rep)
        if isinstance(chart, geometry.NestedChart):
            cond = _at_point(chart, pt, lambda: subspaces.subspace_residual(chart, pt))
            rec["subspace_condition"] = {
                "kappa_hat_sq": cond.kappa_hat_sq,
                "residual": cond.residual,
                "satisfied": cond.satisfied,
            }
            split = _at_point(chart, pt, lambda: geometry.nested_split(chart, pt))
            rec["kappa_n"] = split.kappa_n
            rec["kappa_g"] = split.kappa_g
        records.append(rec)
    payload = {"provenance": report.provenance(man, args.pivot), "points": records}
    _emit(args, _render(args, payload))
    return 0


def _sweep_row(chart, pivot, is_nested, pt):
    rep = curvature.kappa_report(chart, pt, pivot=pivot)
    kappa_n = kappa_g = None
    if is_nested:
        split = geometry.nested_split(chart, pt)
        kappa_n, kappa_g = split.kappa_n, split.kappa_g
    headline = (
        rep.kappa_sq_intrinsic
        if rep.kappa_sq_intrinsic is not None
        else rep.kappa_sq_extrinsic
    )
    return list(pt) + [headline, rep.kappa, kappa_n, kappa_g, "|".join(rep.flags)]


def cmd_sweep(args):
    man = load_manifest(args.manifest)
    chart = man.chart()
    pivot = _parse_pivot(args.pivot)
    grid, fixed = resolve_grid(man, _parse_grid(args.grid), _parse_at(args.at))
    names = list(chart.coords)
    axes = []
    for name in names:
        if name in grid:
            lo, hi, n = grid[name]
            axes.append(np.linspace(lo, hi, n))
        else:
            axes.append(np.array([fixed[name]]))
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)

    is_nested = isinstance(chart, geometry.NestedChart)

    def worker(pt):
        return _sweep_row(chart, pivot, is_nested, list(pt))

    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(worker, points))
    else:
        rows = [worker(pt) for pt in points]

    if args.format == "json":
        recs = []
        for row in rows:
            recs.append(
                {
                    "coords": {n: row[i] for i, n in enumerate(names)},
                    "kappa_sq": row[len(names)],
                    "kappa": row[len(names) + 1],
                    "kappa_n": row[len(names) + 2],
                    "kappa_g": row[len(names) + 3],
                    "flags": row[len(names) + 4].split("|") if row[len(names) + 4] else [],
                }
            )
        payload = {"provenance": report.provenance(man, args.pivot), "points": recs}
        _emit(args, report.to_json_text(payload) + "\n")
        return 0
    header = ",".join(names + ["kappa2", "kappa", "kappa_n", "kappa_g", "flags"]) + "\n"
    body = "".join(report.csv_line(row) for row in rows)
    _emit(args, header + body)
    return 0


def cmd_verify_example(args):
    """Reproduce the two spherically symmetric worked examples on a fixed
    grid and compare against their closed-form curvatures."""
    grid_rho = np.linspace(3.0, 10.0, 5)
    grid_theta = np.linspace(0.3, math.pi - 0.3, 5)
    m = 1.0

    def closed_first(rho):
        return 2.0 * m * m / rho**6

    def closed_second(rho):
        return (
            2.0 * m * m / rho**6
            * math.exp(4.0 * m / rho)
            * math.sqrt((1.0 + m / (2.0 * rho)) * (1.0 + m / rho))
        )

    results = []
    for label, manifest_name, closed in (
        ("kappa", "schwarzschild.toml", closed_first),
        ("kappa-bar", "schwarzschild-isotropic.toml", closed_second),
    ):
        man = load_manifest(builtin_manifest_path(manifest_name))
        chart = man.chart()
        worst = 0.0
        for rho in grid_rho:
            for theta in grid_theta:
                pt = [rho, theta, 0.7, 0.0]
                rep = curvature.kappa_report(chart, pt)
                expect = closed(rho)
                worst = max(worst, abs(abs(rep.kappa) - expect) / expect)
        results.append((label, worst))

    ok = True
    lines = []
    for label, worst in results:
        passed = worst < 1e-8
        ok = ok and passed
        lines.append(
            f"{label} family: max relative deviation {report.fmt_float(worst)} "
            f"[{'PASS' if passed else 'FAIL'}]"
        )
    lines.append("verify-example: " + ("PASS" if ok else "FAIL"))
    _emit(args, "\n".join(lines) + "\n")
    return 0 if ok else 3


def cmd_chio_det(args):
    try:
        matrix = np.loadtxt(args.matrix, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ManifestError(args.matrix, str(exc)) from exc
    except ValueError as exc:
        raise ManifestError(args.matrix, f"bad CSV matrix: {exc}") from exc
    det_c = linalg.det_chio(matrix)
    det_l = linalg.det_lu(matrix)
    scale = max(abs(det_c), abs(det_l))
    rel = abs(det_c - det_l) / scale if scale > 0 else 0.0
    _emit(
        args,
        f"chio: {report.fmt_float(det_c)}\n"
        f"lu:   {report.fmt_float(det_l)}\n"
        f"relative difference: {report.fmt_float(rel)}\n",
    )
    return 0


# -- argument wiring ----------------------------------------------------------


def _add_common(sub, manifest_required=True):
    if manifest_required:
        sub.add_argument("--manifest", required=True, help="chart manifest path")
    sub.add_argument("--at", default="", help="name=value,... evaluation point")
    sub.add_argument("--pivot", default="auto", help="auto or p,q (1-based)")
    sub.add_argument("--format", choices=("json", "csv", "text"), default="text")
    sub.add_argument("--out", default="", help="write output to a file")


def build_parser():
    parser = _Parser(prog="kappa", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("tensors", help="metric, connection and curvature at points")
    _add_common(s)
    s.set_defaults(func=cmd_tensors)

    s = subs.add_parser("kappa", help="curvature invariant by both routes")
    _add_common(s)
    s.set_defaults(func=cmd_kappa)

    s = subs.add_parser("principal", help="principal curvature spectrum")
    _add_common(s)
    s.set_defaults(func=cmd_principal)

    s = subs.add_parser("sweep", help="CSV sweep over a coordinate grid")
    _add_common(s)
    s.add_argument("--grid", default="", help="name=lo:hi:n,...")
    s.set_defaults(func=cmd_sweep, format="csv")

    s = subs.add_parser("verify-example", help="reproduce the worked examples")
    s.add_argument("--out", default="")
    s.set_defaults(func=cmd_verify_example)

    s = subs.add_parser("chio-det", help="determinant of a CSV matrix, both ways")
    s.add_argument("matrix", help="CSV file with one matrix row per line")
    s.add_argument("--out", default="")
    s.set_defaults(func=cmd_chio_det)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return 2
    except (PointError, *_ENGINE_ERRORS) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
