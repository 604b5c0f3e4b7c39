"""Report records and deterministic serialization.

JSON output keeps insertion order and prints every float with 17
significant digits, so identical inputs give byte-identical bytes.  CSV
uses %.17g, comma separators and LF line endings.
"""

from __future__ import annotations

import numpy as np

from . import __version__, curvature, geometry, subspaces

NONZERO_FRACTION = 1e-12  # listing threshold relative to max |R|


def fmt_float(x):
    return format(float(x), ".17g")


def to_json_text(obj, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            f'{pad}  "{k}": {to_json_text(v, indent + 1)}' for k, v in obj.items()
        )
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        flat = all(not isinstance(v, (dict, list, tuple)) for v in obj)
        if flat:
            return "[" + ", ".join(to_json_text(v) for v in obj) + "]"
        inner = ",\n".join(f"{pad}  {to_json_text(v, indent + 1)}" for v in obj)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    return '"' + str(obj).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _matrix(a):
    return [[float(v) for v in row] for row in np.asarray(a)]


def _rank3(a):
    return [_matrix(s) for s in np.asarray(a)]


def nonzero_riemann(riemann):
    """Entries above the listing threshold, 1-based indices, fixed order."""
    riemann = np.asarray(riemann)
    scale = float(np.max(np.abs(riemann)))
    cut = NONZERO_FRACTION * scale
    out = []
    m = riemann.shape[0]
    for i in range(m):
        for j in range(m):
            for k in range(m):
                for l in range(m):
                    v = float(riemann[i, j, k, l])
                    if abs(v) > cut:
                        out.append({"indices": [i + 1, j + 1, k + 1, l + 1], "value": v})
    return out


def provenance(man, pivot_policy):
    return {
        "manifest_sha256": man.sha256,
        "engine_version": __version__,
        "pivot_policy": pivot_policy if isinstance(pivot_policy, str)
        else f"{pivot_policy[0] + 1},{pivot_policy[1] + 1}",
    }


def kappa_record(report: curvature.KappaReport):
    rec = {
        "kappa_sq_extrinsic": report.kappa_sq_extrinsic,
        "kappa_sq_intrinsic": report.kappa_sq_intrinsic,
        "kappa": report.kappa,
        "pivot": None if report.pivot is None else [report.pivot[0] + 1, report.pivot[1] + 1],
        "gauss_residual": report.gauss_residual,
        "identity_residuals": None
        if report.identity_residuals is None
        else list(report.identity_residuals),
        "flags": list(report.flags),
    }
    return rec


def tensors_record(chart, coords, point, tensors: geometry.CurvatureTensors):
    return {
        "coords": {name: float(v) for name, v in zip(coords, point)},
        "g": _matrix(tensors.g),
        "g_inverse": _matrix(tensors.g_inv),
        "det_g": tensors.det_g,
        "gamma_first": _rank3(tensors.gamma_first),
        "gamma_second": _rank3(tensors.gamma_second),
        "riemann_nonzero": nonzero_riemann(tensors.riemann),
        "scalar_curvature": tensors.scalar,
    }


def principal_record(rep: subspaces.PrincipalReport):
    return {
        "eigenvalues": [float(v) for v in rep.eigenvalues],
        "distinct_eigenvalues": [float(v) for v in rep.distinct_values],
        "multiplicities": [int(v) for v in rep.multiplicities],
        "k_sq": rep.k_sq,
        "mixed_product": rep.mixed_product,
        "all_simple": rep.all_simple,
        "directions": _matrix(rep.directions),
    }


def csv_line(values):
    cells = []
    for v in values:
        if v is None:
            cells.append("")
        elif isinstance(v, str):
            cells.append(v)
        else:
            cells.append(fmt_float(v))
    return ",".join(cells) + "\n"
