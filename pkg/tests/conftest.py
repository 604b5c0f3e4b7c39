"""Shared chart builders, random corpora and independent numeric oracles.

Oracles here deliberately avoid the jet machinery: finite differences for
derivatives, cofactor expansion for determinants, explicit classical
formulas for spheres/cylinders/circles.
"""

import math

import numpy as np
import pytest

from kappa import geometry
from kappa.expr import evaluate, parse


# -- chart builders ----------------------------------------------------------


def immersion(coords, sources, params=None):
    names = tuple((params or {}).keys())
    comps = tuple(parse(s, coords=coords, params=names) for s in sources)
    return geometry.ImmersionChart(tuple(coords), comps, dict(params or {}))


def metric(coords, upper_sources, params=None):
    names = tuple((params or {}).keys())
    upper = [parse(s, coords=coords, params=names) for s in upper_sources]
    return geometry.MetricChart.from_upper(tuple(coords), upper, dict(params or {}))


def sphere_chart(a=1.0):
    return immersion(
        ["theta", "phi"],
        ["a*sin(theta)*cos(phi)", "a*sin(theta)*sin(phi)", "a*cos(theta)"],
        {"a": a},
    )


def sphere3_chart(a=1.0):
    return immersion(
        ["chi", "theta", "phi"],
        [
            "a*cos(chi)",
            "a*sin(chi)*cos(theta)",
            "a*sin(chi)*sin(theta)*cos(phi)",
            "a*sin(chi)*sin(theta)*sin(phi)",
        ],
        {"a": a},
    )


def cylinder_chart(a=1.0):
    return immersion(["phi", "z"], ["a*cos(phi)", "a*sin(phi)", "z"], {"a": a})


def plane_chart():
    return immersion(["u", "v"], ["u", "v", "0"])


def clifford_chart(a=1.0):
    return immersion(
        ["u", "v"],
        [
            "a/sqrt(2)*cos(u)",
            "a/sqrt(2)*sin(u)",
            "a/sqrt(2)*cos(v)",
            "a/sqrt(2)*sin(v)",
        ],
        {"a": a},
    )


def flat_cylinder_e4_chart(a=1.0):
    # intrinsically flat, tau != 0, singular K.K (an honest kappa_ext = 0 case)
    return immersion(["u", "v"], ["a*cos(u)", "a*sin(u)", "v", "0"], {"a": a})


def schwarzschild_chart(m=1.0):
    return metric(
        ["rho", "theta", "phi", "tau"],
        [
            "1/(1 - 2*m/rho)", "0", "0", "0",
            "rho^2", "0", "0",
            "rho^2*sin(theta)^2", "0",
            "1 - 2*m/rho",
        ],
        {"m": m},
    )


def isotropic_chart(m=1.0):
    return metric(
        ["rho", "theta", "phi", "tau"],
        [
            "exp(-2*m/rho)", "0", "0", "0",
            "exp(-2*m/rho)*rho^2", "0", "0",
            "exp(-2*m/rho)*rho^2*sin(theta)^2", "0",
            "exp(-2*m/rho)",
        ],
        {"m": m},
    )


def polar2_chart():
    return metric(["r", "phi"], ["1", "0", "r^2"])


def polar3_chart():
    return metric(["r", "theta", "phi"], ["1", "0", "0", "r^2", "0", "r^2*sin(theta)^2"])


def latitude_chart(a=1.0, theta0=math.pi / 3):
    inner = immersion(["t"], ["theta0", "t"], {"a": a, "theta0": theta0})
    outer = sphere_chart(a)
    outer.params.update({"theta0": theta0})
    return geometry.NestedChart(inner=inner, outer=outer)


def great_circle_chart(a=1.0):
    inner = immersion(["t"], ["1.5707963267948966", "t"], {"a": a})
    return geometry.NestedChart(inner=inner, outer=sphere_chart(a))


# -- polynomial immersion corpora -------------------------------------------


def _poly_source(coefs, coords):
    """Polynomial source string from {exponent tuple: coefficient}."""
    terms = []
    for expo, c in coefs.items():
        if c == 0.0:
            continue
        factors = [repr(float(c))]
        for name, p in zip(coords, expo):
            for _ in range(p):
                factors.append(name)
        terms.append("*".join(factors))
    return " + ".join(terms) if terms else "0"


def _quad_coefs(h, m):
    out = {}
    for a in range(m):
        for b in range(a, m):
            e = [0] * m
            e[a] += 1
            e[b] += 1
            c = h[a, b] if a == b else 2.0 * h[a, b]
            out[tuple(e)] = 0.5 * c
    return out


def _cubic_coefs(rng, m, scale=0.25):
    out = {}
    for a in range(m):
        for b in range(a, m):
            for c in range(b, m):
                e = [0] * m
                e[a] += 1
                e[b] += 1
                e[c] += 1
                out[tuple(e)] = scale * rng.uniform(-1.0, 1.0)
    return out


def _merge(*coef_dicts):
    out = {}
    for d in coef_dicts:
        for k, v in d.items():
            out[k] = out.get(k, 0.0) + v
    return out


def _linear_coefs(row, m):
    out = {}
    for a in range(m):
        e = [0] * m
        e[a] = 1
        out[tuple(e)] = row[a]
    return out


def _rotate_components(rng, comp_coefs, n):
    """Random orthogonal mix plus shift of the component polynomials."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    shift = rng.uniform(-0.5, 0.5, size=n)
    mixed = []
    for i in range(n):
        acc = {}
        for j in range(n):
            for e, c in comp_coefs[j].items():
                acc[e] = acc.get(e, 0.0) + q[i, j] * c
        zero = tuple([0] * len(next(iter(acc))))
        acc[zero] = acc.get(zero, 0.0) + shift[i]
        mixed.append(acc)
    return mixed


def adapted_immersion(rng, m=3, n=4):
    """Random polynomial immersion on which both curvature routes agree:
    one effective normal direction with a diagonal quadratic part at the
    origin (arbitrary cubics, linear mixing, rotation and shift)."""
    coords = [f"q{i+1}" for i in range(m)]
    lin = rng.normal(size=(m, m)) * 0.4 + np.eye(m)
    d = rng.uniform(0.5, 1.5, size=m) * rng.choice([-1.0, 1.0], size=m)
    c = rng.uniform(0.4, 1.2, size=n - m) * rng.choice([-1.0, 1.0], size=n - m)
    comp_coefs = []
    for j in range(m):
        comp_coefs.append(_linear_coefs(lin[j], m))
    for p in range(n - m):
        quad = _quad_coefs(c[p] * np.diag(d), m)
        comp_coefs.append(_merge(quad, _cubic_coefs(rng, m)))
    mixed = _rotate_components(rng, comp_coefs, n)
    return immersion(coords, [_poly_source(cf, coords) for cf in mixed])


def generic_immersion(rng, m=3, n=5):
    """Random polynomial immersion with full random quadratic/cubic parts
    (for Gauss-relation and frame tests; the routes need not agree)."""
    coords = [f"q{i+1}" for i in range(m)]
    lin = rng.normal(size=(m, m)) * 0.4 + np.eye(m)
    comp_coefs = [_linear_coefs(lin[j], m) for j in range(m)]
    for _ in range(n - m):
        h = rng.uniform(-1.0, 1.0, size=(m, m))
        h = 0.5 * (h + h.T)
        comp_coefs.append(_merge(_quad_coefs(h, m), _cubic_coefs(rng, m)))
    mixed = _rotate_components(rng, comp_coefs, n)
    return immersion(coords, [_poly_source(cf, coords) for cf in mixed])


# -- finite-difference oracles ----------------------------------------------


def fd_step(x, size=1e-5):
    return size * (1.0 + abs(x))


def fd_grad(f, x, h=None):
    x = np.asarray(x, dtype=float)
    out = np.zeros(len(x))
    for i in range(len(x)):
        hi = h if h is not None else fd_step(x[i])
        xp, xm = x.copy(), x.copy()
        xp[i] += hi
        xm[i] -= hi
        out[i] = (f(xp) - f(xm)) / (2.0 * hi)
    return out


def fd_hess(f, x, h=None):
    # second-difference stencils need a wider step than first differences:
    # at 1e-5 the subtractive roundoff alone is ~4 eps/h^2 ~ 1e-6 |f|
    x = np.asarray(x, dtype=float)
    n = len(x)
    out = np.zeros((n, n))
    for i in range(n):
        hi = h if h is not None else fd_step(x[i], 1e-4)
        for j in range(i, n):
            hj = h if h is not None else fd_step(x[j], 1e-4)
            if i == j:
                xp, xm = x.copy(), x.copy()
                xp[i] += hi
                xm[i] -= hi
                out[i, i] = (f(xp) - 2.0 * f(x) + f(xm)) / (hi * hi)
            else:
                xpp, xpm, xmp, xmm = x.copy(), x.copy(), x.copy(), x.copy()
                xpp[i] += hi
                xpp[j] += hj
                xpm[i] += hi
                xpm[j] -= hj
                xmp[i] -= hi
                xmp[j] += hj
                xmm[i] -= hi
                xmm[j] -= hj
                out[i, j] = out[j, i] = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (
                    4.0 * hi * hj
                )
    return out


def chart_position(chart, pt):
    imm = geometry.flat_immersion(chart)
    return np.array([evaluate(c, list(pt), imm.params) for c in imm.components])


def fd_metric(chart, pt, h=1e-6):
    """g = J^T J with a finite-difference Jacobian (no jets)."""
    pt = np.asarray(pt, dtype=float)
    m = len(pt)
    jac = np.stack(
        [
            (chart_position(chart, pt + h * e) - chart_position(chart, pt - h * e))
            / (2.0 * h)
            for e in np.eye(m)
        ],
        axis=1,
    )
    return jac.T @ jac


def fd_metric_pipeline(gfun, pt, h=1e-4):
    """Gamma_first, curvature tensor and scalar from a metric callable by
    central finite differences only."""
    pt = np.asarray(pt, dtype=float)
    m = len(pt)

    def gamma(x):
        dg = np.stack(
            [(gfun(x + h * e) - gfun(x - h * e)) / (2.0 * h) for e in np.eye(m)]
        )
        out = np.empty((m, m, m))
        for a in range(m):
            for b in range(m):
                for c in range(m):
                    out[a, b, c] = 0.5 * (dg[a, b, c] + dg[b, a, c] - dg[c, a, b])
        return out

    g = gfun(pt)
    g_inv = np.linalg.inv(g)
    gam = gamma(pt)
    dgam = np.stack(
        [(gamma(pt + h * e) - gamma(pt - h * e)) / (2.0 * h) for e in np.eye(m)]
    )
    r1 = dgam.transpose(3, 1, 0, 2)
    r2 = dgam.transpose(3, 1, 2, 0)
    t1 = np.einsum("ps,jkp,ils->ijkl", g_inv, gam, gam)
    t2 = np.einsum("ps,jlp,iks->ijkl", g_inv, gam, gam)
    riem = r1 - r2 + t1 - t2
    scalar = float(np.einsum("ig,jd,idjg->", g_inv, g_inv, riem))
    return g, gam, riem, scalar


def fd_curve_frame(xfun, t, h=1e-5):
    """Unit tangent and arc-length curvature vector of a curve by finite
    differences: kappa_vec = d(tangent)/ds."""

    def tangent(s):
        v = (xfun(s + h) - xfun(s - h)) / (2.0 * h)
        return v / np.linalg.norm(v)

    speed = np.linalg.norm((xfun(t + h) - xfun(t - h)) / (2.0 * h))
    dtan = (tangent(t + h) - tangent(t - h)) / (2.0 * h)
    return tangent(t), dtan / speed


def cofactor_det(a):
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(a, 0, axis=0), j, axis=1)
        total += ((-1.0) ** j) * a[0, j] * cofactor_det(minor)
    return total


def random_expression(rng, coords, params, depth=3):
    """Random DSL source that is safe to evaluate near the sample points
    returned by :func:`random_point` (positivity-guarded ln/sqrt/div)."""
    leaves = list(coords) + list(params) + [repr(round(rng.uniform(0.2, 2.5), 3))]

    def positive(d):
        # strictly positive subexpression
        inner = build(d - 1)
        return f"({inner})^2 + {repr(round(rng.uniform(0.3, 1.5), 3))}"

    def build(d):
        if d <= 0:
            return rng.choice(leaves)
        kind = rng.integers(0, 8)
        if kind == 0:
            return f"({build(d-1)}) + ({build(d-1)})"
        if kind == 1:
            return f"({build(d-1)}) - ({build(d-1)})"
        if kind == 2:
            return f"({build(d-1)}) * ({build(d-1)})"
        if kind == 3:
            return f"({build(d-1)}) / ({positive(d-1)})"
        if kind == 4:
            return f"sin({build(d-1)})" if rng.integers(0, 2) else f"cos({build(d-1)})"
        if kind == 5:
            return f"exp(({build(d-1)})/4)"
        if kind == 6:
            return f"ln({positive(d-1)})" if rng.integers(0, 2) else f"sqrt({positive(d-1)})"
        return f"({build(d-1)})^{rng.integers(2, 4)}"

    return build(depth)


def random_point(rng, n):
    return rng.uniform(-1.2, 1.2, size=n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
