"""Chart manifests: TOML files with a fixed section layout.

    [chart]                  kind = "metric" | "immersion" | "nested"
                             coords = ["rho", ...]
                             ambient_coords = [...]      (nested only)
    [params]                 name = number
    [metric]                 g11 = "expr", g12 = "expr", ...   (upper triangle,
                             all M(M+1)/2 keys required, 1-based indices)
    [immersion]              x1 = "expr", ..., xN = "expr"
    [inner] / [outer]        y1..yN over coords / x1..xK over ambient_coords
    [evaluate]               at = {name = value, ...}
                             points = [[...], ...]        (coords order)
    [evaluate.grid]          name = [lo, hi, count]

Expressions parse eagerly against the declared coordinate and parameter
names; any malformed or unknown key fails the load.
"""

from __future__ import annotations

import hashlib
import re
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .expr import ExprError, parse
from .geometry import ImmersionChart, MetricChart, NestedChart

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")


class ManifestError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class EvaluationSpec:
    at: dict = field(default_factory=dict)
    points: list = field(default_factory=list)  # rows aligned with coords
    grid: dict = field(default_factory=dict)  # name -> (lo, hi, count)


@dataclass
class Manifest:
    path: str
    kind: str
    coords: tuple
    ambient_coords: tuple
    params: dict
    expressions: dict  # section name -> {key: source string}
    evaluate: EvaluationSpec
    sha256: str
    _chart: object = None

    def chart(self):
        if self._chart is None:
            self._chart = _build_chart(self)
        return self._chart


def _names(path, raw, key, required=True):
    if key not in raw:
        if required:
            raise ManifestError(path, f"[chart] is missing {key!r}")
        return ()
    val = raw[key]
    if not isinstance(val, list) or not val or not all(
        isinstance(s, str) and _NAME_RE.match(s) for s in val
    ):
        raise ManifestError(path, f"[chart] {key} must be a list of identifiers")
    if len(set(val)) != len(val):
        raise ManifestError(path, f"[chart] {key} has duplicate names")
    return tuple(val)


def _expr_section(path, data, section, expected_keys):
    if section not in data:
        raise ManifestError(path, f"missing [{section}] section")
    raw = data[section]
    got = set(raw)
    want = set(expected_keys)
    if got != want:
        missing = sorted(want - got)
        extra = sorted(got - want)
        detail = []
        if len(got) != len(want):
            detail.append(f"expected {len(want)} component expressions, found {len(got)}")
        if missing:
            detail.append(f"missing {missing}")
        if extra:
            detail.append(f"unknown keys {extra}")
        raise ManifestError(path, f"[{section}] dimension mismatch: " + "; ".join(detail))
    out = {}
    for key in expected_keys:
        if not isinstance(raw[key], str):
            raise ManifestError(path, f"[{section}] {key} must be an expression string")
        out[key] = raw[key]
    return out


def _contiguous_keys(path, data, section, prefix):
    if section not in data:
        raise ManifestError(path, f"missing [{section}] section")
    raw = data[section]
    count = len(raw)
    if count == 0:
        raise ManifestError(path, f"[{section}] is empty")
    expected = [f"{prefix}{i}" for i in range(1, count + 1)]
    return _expr_section(path, data, section, expected)


def _metric_keys(m):
    return [f"g{a}{b}" for a in range(1, m + 1) for b in range(a, m + 1)]


def _parse_all(path, section, raw_exprs, coords, params):
    parsed = {}
    for key, src in raw_exprs.items():
        try:
            parsed[key] = parse(src, coords=coords, params=params)
        except ExprError as exc:
            raise ManifestError(path, f"[{section}] {key}: {exc}") from exc
    return parsed


def _evaluation(path, data, coords):
    spec = EvaluationSpec()
    if "evaluate" not in data:
        return spec
    raw = dict(data["evaluate"])
    known = {"at", "points", "grid"}
    extra = set(raw) - known
    if extra:
        raise ManifestError(path, f"[evaluate] unknown keys {sorted(extra)}")
    if "at" in raw:
        at = raw["at"]
        if not isinstance(at, dict):
            raise ManifestError(path, "[evaluate] at must be a table of name = value")
        for k, v in at.items():
            if k not in coords:
                raise ManifestError(path, f"[evaluate] at references unknown coordinate {k!r}")
            spec.at[k] = float(v)
    if "points" in raw:
        pts = raw["points"]
        if not isinstance(pts, list):
            raise ManifestError(path, "[evaluate] points must be a list of rows")
        for row in pts:
            if not isinstance(row, list) or len(row) != len(coords):
                raise ManifestError(
                    path, f"[evaluate] each point needs {len(coords)} values"
                )
            spec.points.append([float(v) for v in row])
    if "grid" in raw:
        for k, v in raw["grid"].items():
            if k not in coords:
                raise ManifestError(path, f"[evaluate.grid] unknown coordinate {k!r}")
            if not isinstance(v, list) or len(v) != 3:
                raise ManifestError(path, f"[evaluate.grid] {k} must be [lo, hi, count]")
            lo, hi, n = float(v[0]), float(v[1]), int(v[2])
            if n < 1:
                raise ManifestError(path, f"[evaluate.grid] {k}: count must be >= 1")
            spec.grid[k] = (lo, hi, n)
    return spec


def load_manifest(path) -> Manifest:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ManifestError(path, str(exc)) from exc
    try:
        data = tomllib.loads(blob.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ManifestError(path, f"not UTF-8: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ManifestError(path, f"parse error: {exc}") from exc

    known_sections = {"chart", "params", "metric", "immersion", "inner", "outer", "evaluate"}
    extra = set(data) - known_sections
    if extra:
        raise ManifestError(path, f"unknown sections {sorted(extra)}")
    if "chart" not in data:
        raise ManifestError(path, "missing [chart] section")
    chart_raw = data["chart"]
    extra = set(chart_raw) - {"kind", "coords", "ambient_coords"}
    if extra:
        raise ManifestError(path, f"[chart] unknown keys {sorted(extra)}")
    kind = chart_raw.get("kind")
    if kind not in ("metric", "immersion", "nested"):
        raise ManifestError(path, f"[chart] kind must be metric|immersion|nested, got {kind!r}")
    coords = _names(path, chart_raw, "coords")
    ambient = _names(path, chart_raw, "ambient_coords", required=(kind == "nested"))
    if kind != "nested" and ambient:
        raise ManifestError(path, "[chart] ambient_coords only applies to nested charts")

    params = {}
    for k, v in data.get("params", {}).items():
        if not _NAME_RE.match(k):
            raise ManifestError(path, f"[params] bad name {k!r}")
        params[k] = float(v)
    param_names = tuple(params)

    expressions = {}
    m = len(coords)
    if kind == "metric":
        expressions["metric"] = _expr_section(path, data, "metric", _metric_keys(m))
        for sec in ("immersion", "inner", "outer"):
            if sec in data:
                raise ManifestError(path, f"[{sec}] does not apply to metric charts")
        _parse_all(path, "metric", expressions["metric"], coords, param_names)
    elif kind == "immersion":
        expressions["immersion"] = _contiguous_keys(path, data, "immersion", "x")
        if len(expressions["immersion"]) < m:
            raise ManifestError(
                path, f"[immersion] needs at least {m} components for M={m}"
            )
        for sec in ("metric", "inner", "outer"):
            if sec in data:
                raise ManifestError(path, f"[{sec}] does not apply to immersion charts")
        _parse_all(path, "immersion", expressions["immersion"], coords, param_names)
    else:
        inner_keys = [f"y{i}" for i in range(1, len(ambient) + 1)]
        expressions["inner"] = _expr_section(path, data, "inner", inner_keys)
        expressions["outer"] = _contiguous_keys(path, data, "outer", "x")
        if len(expressions["outer"]) < len(ambient):
            raise ManifestError(
                path, f"[outer] needs at least {len(ambient)} components"
            )
        for sec in ("metric", "immersion"):
            if sec in data:
                raise ManifestError(path, f"[{sec}] does not apply to nested charts")
        _parse_all(path, "inner", expressions["inner"], coords, param_names)
        _parse_all(path, "outer", expressions["outer"], ambient, param_names)

    evaluate = _evaluation(path, data, coords)
    return Manifest(
        path=str(path),
        kind=kind,
        coords=coords,
        ambient_coords=ambient,
        params=params,
        expressions=expressions,
        evaluate=evaluate,
        sha256=hashlib.sha256(blob).hexdigest(),
    )


def _build_chart(man: Manifest):
    names = tuple(man.params)
    if man.kind == "metric":
        upper = [
            parse(man.expressions["metric"][key], man.coords, names)
            for key in _metric_keys(len(man.coords))
        ]
        return MetricChart.from_upper(man.coords, upper, man.params)
    if man.kind == "immersion":
        keys = sorted(man.expressions["immersion"], key=lambda k: int(k[1:]))
        comps = tuple(
            parse(man.expressions["immersion"][k], man.coords, names) for k in keys
        )
        return ImmersionChart(man.coords, comps, dict(man.params))
    inner_keys = sorted(man.expressions["inner"], key=lambda k: int(k[1:]))
    outer_keys = sorted(man.expressions["outer"], key=lambda k: int(k[1:]))
    inner = ImmersionChart(
        man.coords,
        tuple(parse(man.expressions["inner"][k], man.coords, names) for k in inner_keys),
        dict(man.params),
    )
    outer = ImmersionChart(
        man.ambient_coords,
        tuple(
            parse(man.expressions["outer"][k], man.ambient_coords, names)
            for k in outer_keys
        ),
        dict(man.params),
    )
    return NestedChart(inner=inner, outer=outer)


def resolve_points(man: Manifest, at_override=None):
    """Points implied by the manifest (and an --at override), coords order."""
    at = dict(man.evaluate.at)
    if at_override:
        at.update(at_override)
    pts = [list(row) for row in man.evaluate.points]
    if at or not pts:
        missing = [c for c in man.coords if c not in at]
        if missing:
            if pts:
                return pts
            raise ManifestError(
                man.path, f"no evaluation point: coordinates {missing} unbound"
            )
        pts.insert(0, [at[c] for c in man.coords])
    return pts


def resolve_grid(man: Manifest, grid_override=None, at_override=None):
    """Grid axes plus fixed values for the remaining coordinates."""
    grid = dict(man.evaluate.grid)
    if grid_override:
        grid.update(grid_override)
    if not grid:
        raise ManifestError(man.path, "no grid: pass --grid or add [evaluate.grid]")
    at = dict(man.evaluate.at)
    if at_override:
        at.update(at_override)
    fixed = {}
    for c in man.coords:
        if c not in grid:
            if c not in at:
                raise ManifestError(man.path, f"grid leaves coordinate {c!r} unbound")
            fixed[c] = at[c]
    return grid, fixed
