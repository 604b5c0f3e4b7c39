"""Core tensor pipeline at a point.

Charts come in three kinds: a metric chart (component expressions of a
symmetric metric), an immersion chart (component expressions of a map into
a flat Cartesian space), and a nested chart (a map into the coordinates of
an ambient immersion, composed with it).  All derivative data flows through
jet evaluation of the component expressions, so Christoffel symbols, the
curvature tensor and frame derivatives are exact to rounding.

Index conventions (pinned by the worked reproductions in the test suite):

    Gamma_first[a, b, c]   = (d_a g_bc + d_b g_ac - d_c g_ab) / 2
    Gamma_second[a, b, c]  = g^{cs} Gamma_first[a, b, s]
    riemann[i, j, k, l]    = d_k Gamma_first[j, l, i] - d_l Gamma_first[j, k, i]
                             + g^{ps} (Gamma[j,k,p] Gamma[i,l,s]
                                       - Gamma[j,l,p] Gamma[i,k,s])
    scalar                 = g^{ig} g^{jd} riemann[i, d, j, g]

riemann is antisymmetric in (i,j) and in (k,l) and symmetric under swapping
the pairs; with a flat ambient it satisfies

    riemann[r, a, d, b] = sum_F tau[F,a,b] tau[F,d,r] - tau[F,a,d] tau[F,b,r].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .expr import evaluate, eval_jet, substitute
from .jets import Jet, jsqrt

_DET_GUARD = 1e-12


class GeometryError(ValueError):
    pass


class DegeneratePointError(GeometryError):
    """Jacobian rank-deficient or |g| below the coordinate-singularity guard."""


class ZeroVelocityError(GeometryError):
    pass


# -- charts ----------------------------------------------------------------


@dataclass(eq=False)
class MetricChart:
    coords: tuple
    components: tuple  # full M x M tuple-of-tuples of Expr, symmetric
    params: dict = field(default_factory=dict)

    @property
    def M(self):
        return len(self.coords)

    @classmethod
    def from_upper(cls, coords, upper, params=None):
        """Build from the M(M+1)/2 upper-triangle expressions, row major."""
        m = len(coords)
        if len(upper) != m * (m + 1) // 2:
            raise GeometryError(
                f"metric chart needs {m * (m + 1) // 2} components for M={m}, got {len(upper)}"
            )
        grid = [[None] * m for _ in range(m)]
        it = iter(upper)
        for a in range(m):
            for b in range(a, m):
                e = next(it)
                grid[a][b] = e
                grid[b][a] = e
        return cls(tuple(coords), tuple(tuple(row) for row in grid), dict(params or {}))


@dataclass(eq=False)
class ImmersionChart:
    """Map q -> x(q); the target is flat Cartesian unless used as the inner
    half of a NestedChart."""

    coords: tuple
    components: tuple  # N expressions in the coords
    params: dict = field(default_factory=dict)

    @property
    def M(self):
        return len(self.coords)

    @property
    def N(self):
        return len(self.components)


@dataclass(eq=False)
class NestedChart:
    inner: ImmersionChart  # subspace coords -> ambient coords
    outer: ImmersionChart  # ambient coords -> flat coords

    def __post_init__(self):
        if self.inner.N != self.outer.M:
            raise GeometryError(
                f"inner map targets {self.inner.N} ambient coordinates, "
                f"outer chart declares {self.outer.M}"
            )
        for key, val in self.inner.params.items():
            if key in self.outer.params and self.outer.params[key] != val:
                raise GeometryError(f"parameter {key!r} bound inconsistently")

    @property
    def coords(self):
        return self.inner.coords

    @property
    def M(self):
        return self.inner.M

    @property
    def N(self):
        return self.outer.M

    @property
    def K(self):
        return self.outer.N

    @property
    def params(self):
        merged = dict(self.outer.params)
        merged.update(self.inner.params)
        return merged

    def composite(self) -> ImmersionChart:
        """The flat-target immersion obtained by substituting the inner map
        into the outer component expressions."""
        mapping = {
            name: comp for name, comp in zip(self.outer.coords, self.inner.components)
        }
        comps = tuple(substitute(c, mapping) for c in self.outer.components)
        return ImmersionChart(self.inner.coords, comps, self.params)

    def ambient_point(self, point):
        return np.array(
            [evaluate(c, point, self.inner.params) for c in self.inner.components]
        )


def flat_immersion(chart):
    """The chart's map into flat space (identity for immersions)."""
    if isinstance(chart, NestedChart):
        return chart.composite()
    if isinstance(chart, ImmersionChart):
        return chart
    raise GeometryError(f"chart kind {type(chart).__name__} has no flat immersion")


# -- induced metric and curvature tensors ----------------------------------


def _component_jets(chart: ImmersionChart, point, order):
    return [eval_jet(c, point, chart.params, order) for c in chart.components]


def _metric_jets_from_immersion(xjets, m):
    """g_ab as order-(p-1) jets from order-p component jets."""
    partials = [[xj.partial(a) for a in range(m)] for xj in xjets]
    g = [[None] * m for _ in range(m)]
    for a in range(m):
        for b in range(a, m):
            acc = partials[0][a] * partials[0][b]
            for i in range(1, len(xjets)):
                acc = acc + partials[i][a] * partials[i][b]
            g[a][b] = acc
            g[b][a] = acc
    return g


def induced_metric(chart, point, order=2):
    """Metric component jets at a point (order-2: value, dg, d2g).

    Metric charts evaluate their component expressions directly; immersion
    and nested charts build g = J^T J from order-(order+1) jets of the flat
    immersion.
    """
    point = [float(v) for v in point]
    if isinstance(chart, MetricChart):
        m = chart.M
        g = [[None] * m for _ in range(m)]
        for a in range(m):
            for b in range(a, m):
                j = eval_jet(chart.components[a][b], point, chart.params, order)
                g[a][b] = j
                g[b][a] = j
        return g
    imm = flat_immersion(chart)
    xjets = _component_jets(imm, point, order + 1)
    return _metric_jets_from_immersion(xjets, imm.M)


def _metric_arrays(gjets, m):
    g = np.empty((m, m))
    dg = np.empty((m, m, m))  # dg[c, a, b] = d_c g_ab
    d2g = np.empty((m, m, m, m))  # d2g[c, d, a, b] = d_c d_d g_ab
    for a in range(m):
        for b in range(m):
            j = gjets[a][b]
            g[a, b] = j.value
            dg[:, a, b] = j.grad
            d2g[:, :, a, b] = j.hess
    return g, dg, d2g


def _check_metric(g, point):
    m = g.shape[0]
    scale = max(1.0, float(np.max(np.abs(g))))
    det = linalg.det_lu(g)
    if abs(det) <= _DET_GUARD * scale**m:
        raise DegeneratePointError(
            f"|g| = {det:.3e} at point {list(point)}; coordinate singularity"
        )
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise DegeneratePointError(
            f"metric is not positive definite at point {list(point)}"
        ) from None
    return det


@dataclass
class CurvatureTensors:
    point: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    det_g: float
    gamma_first: np.ndarray  # [a, b, c] = Gamma_{ab,c}
    gamma_second: np.ndarray  # [a, b, c] = Gamma^c_{ab}
    dgamma_first: np.ndarray  # [d, a, b, c] = d_d Gamma_{ab,c}
    riemann: np.ndarray  # [i, j, k, l]
    scalar: float

    @property
    def M(self):
        return self.g.shape[0]

    @property
    def gamma_scale(self):
        return float(np.max(np.abs(self.dgamma_first)))


def curvature_tensors(chart, point) -> CurvatureTensors:
    """g, Christoffel symbols (both kinds), curvature tensor and scalar."""
    point = np.asarray(point, dtype=float)
    m = chart.M
    gjets = induced_metric(chart, point, order=2)
    g, dg, d2g = _metric_arrays(gjets, m)
    _check_metric(g, point)
    g_inv = linalg.invert(g)
    det_g = linalg.det_lu(g)

    gamma_first = np.empty((m, m, m))
    dgamma_first = np.empty((m, m, m, m))
    for a in range(m):
        for b in range(m):
            for c in range(m):
                gamma_first[a, b, c] = 0.5 * (dg[a, b, c] + dg[b, a, c] - dg[c, a, b])
                dgamma_first[:, a, b, c] = 0.5 * (
                    d2g[:, a, b, c] + d2g[:, b, a, c] - d2g[:, c, a, b]
                )
    gamma_second = np.einsum("abs,cs->abc", gamma_first, g_inv)

    r1 = dgamma_first.transpose(3, 1, 0, 2)  # [i,j,k,l] = dG[k, j, l, i]
    r2 = dgamma_first.transpose(3, 1, 2, 0)  # [i,j,k,l] = dG[l, j, k, i]
    t1 = np.einsum("ps,jkp,ils->ijkl", g_inv, gamma_first, gamma_first)
    t2 = np.einsum("ps,jlp,iks->ijkl", g_inv, gamma_first, gamma_first)
    riemann = r1 - r2 + t1 - t2
    scalar = float(np.einsum("ig,jd,idjg->", g_inv, g_inv, riemann))

    return CurvatureTensors(
        point=point,
        g=g,
        g_inv=g_inv,
        det_g=det_g,
        gamma_first=gamma_first,
        gamma_second=gamma_second,
        dgamma_first=dgamma_first,
        riemann=riemann,
        scalar=scalar,
    )


# -- frames ----------------------------------------------------------------


@dataclass
class FrameBundle:
    point: np.ndarray
    tangents: np.ndarray  # (dim, M) columns d_a x
    normals: np.ndarray  # (dim, F) orthonormal, orthogonal to the tangents
    normal_jets: Optional[list] = None  # list of columns; each a list of Jet
    ambient_tangents: Optional[np.ndarray] = None  # nested charts: (K, N)
    ambient_normals: Optional[np.ndarray] = None  # nested charts: (K, C)


def _jet_columns(xjets, m):
    """Tangent columns as lists of order-(p-1) jets."""
    return [[xj.partial(a) for xj in xjets] for a in range(m)]


def _jet_gram_schmidt(tangent_cols, candidate_cols, order_indices):
    """Replay pivoted Gram-Schmidt in jet arithmetic with a fixed pivot order."""

    def dot(u, v):
        acc = u[0] * v[0]
        for x, y in zip(u[1:], v[1:]):
            acc = acc + x * y
        return acc

    def normalize(v):
        nrm = jsqrt(dot(v, v))
        return [x / nrm for x in v]

    basis = []
    for col in tangent_cols:
        v = list(col)
        for b in basis:
            c = dot(b, v)
            v = [x - c * y for x, y in zip(v, b)]
        basis.append(normalize(v))
    out = []
    for idx in order_indices:
        v = list(candidate_cols[idx])
        for b in basis:
            c = dot(b, v)
            v = [x - c * y for x, y in zip(v, b)]
        v = normalize(v)
        basis.append(v)
        out.append(v)
    return out


def frame_bundle(chart, point, with_jets=True) -> FrameBundle:
    """Tangent columns and a deterministic orthonormal normal frame.

    For plain immersions the frame is differentiated by replaying the same
    pivoted orthonormalization in jet arithmetic (order-1 jets of each
    normal).  For nested charts the ambient tangent/normal frames are
    attached and the in-ambient subspace normals are drawn from the ambient
    tangent columns instead of identity candidates.
    """
    point = np.asarray(point, dtype=float)
    imm = flat_immersion(chart)
    m = imm.M
    order = 2 if with_jets else 1
    xjets = _component_jets(imm, list(point), order)
    tangents = np.array([[xj.grad[a] for a in range(m)] for xj in xjets])

    if isinstance(chart, NestedChart):
        apoint = chart.ambient_point(point)
        outer_jets = _component_jets(chart.outer, list(apoint), 1)
        ambient_tangents = np.array(
            [[oj.grad[i] for i in range(chart.outer.M)] for oj in outer_jets]
        )
        try:
            ambient_normals = linalg.orthonormal_complement(ambient_tangents)
        except linalg.RankDeficientError as exc:
            raise DegeneratePointError(str(exc)) from exc
        try:
            normals, _ = linalg.complement_with_order(
                tangents, candidates=ambient_tangents, count=chart.N - chart.M
            )
        except linalg.RankDeficientError as exc:
            raise DegeneratePointError(str(exc)) from exc
        return FrameBundle(
            point=point,
            tangents=tangents,
            normals=normals,
            normal_jets=None,
            ambient_tangents=ambient_tangents,
            ambient_normals=ambient_normals,
        )

    try:
        normals, order_idx = linalg.complement_with_order(tangents)
    except linalg.RankDeficientError as exc:
        raise DegeneratePointError(str(exc)) from exc

    normal_jets = None
    if with_jets:
        tangent_cols = _jet_columns(xjets, m)
        dim = imm.N
        candidate_cols = [
            [Jet.constant(1.0 if i == j else 0.0, m, 1) for i in range(dim)]
            for j in range(dim)
        ]
        normal_jets = _jet_gram_schmidt(tangent_cols, candidate_cols, order_idx)
    return FrameBundle(point=point, tangents=tangents, normals=normals, normal_jets=normal_jets)


# -- second fundamental form ------------------------------------------------


@dataclass
class SecondFundamentalForm:
    """Symmetric slabs of hessian-normal contractions.

    ``tau`` holds one M x M slab per frame normal.  For nested charts these
    are the slabs against the in-ambient normals (the geodesic part) and
    ``varkappa`` holds the slabs against the ambient normals (the normal
    part); the flat-space form is their concatenation.
    """

    tau: np.ndarray  # (F, M, M)
    varkappa: Optional[np.ndarray] = None  # (C, M, M) for nested charts

    @property
    def full(self):
        if self.varkappa is None:
            return self.tau
        return np.concatenate([self.tau, self.varkappa], axis=0)


def _hessian_block(xjets, m):
    """H[i, a, b] = d_a d_b x_i as plain values."""
    return np.array([xj.hess[:m, :m] for xj in xjets])


def second_fundamental(chart, point, frame=None) -> SecondFundamentalForm:
    point = np.asarray(point, dtype=float)
    if frame is None:
        frame = frame_bundle(chart, point, with_jets=False)
    imm = flat_immersion(chart)
    xjets = _component_jets(imm, list(point), 2)
    hess = _hessian_block(xjets, imm.M)  # (K, M, M)
    tau = np.einsum("if,iab->fab", frame.normals, hess)
    tau = 0.5 * (tau + tau.transpose(0, 2, 1))
    if isinstance(chart, NestedChart):
        vk = np.einsum("ip,iab->pab", frame.ambient_normals, hess)
        vk = 0.5 * (vk + vk.transpose(0, 2, 1))
        return SecondFundamentalForm(tau=tau, varkappa=vk)
    return SecondFundamentalForm(tau=tau)


# -- curvature of curves and nested splits ----------------------------------


def _det_ratio(slabs, g_inv, det_g):
    """det(sum_F tau_F g^{-1} tau_F) / det g, the squared-invariant kernel."""
    if slabs.shape[0] == 0:
        return 0.0
    kk = np.einsum("fab,bd,fcd->ac", slabs, g_inv, slabs)
    return linalg.det_lu(kk) / det_g


def _signed_sqrt(x):
    return float(np.sign(x) * np.sqrt(abs(x)))


@dataclass
class NestedSplit:
    kappa_sq: float
    kappa_n_sq: float
    kappa_g_sq: float
    split_residual: float
    geodesic: bool
    tau: np.ndarray
    varkappa: np.ndarray
    frame: FrameBundle

    @property
    def kappa(self):
        return _signed_sqrt(self.kappa_sq)

    @property
    def kappa_n(self):
        return _signed_sqrt(self.kappa_n_sq)

    @property
    def kappa_g(self):
        return _signed_sqrt(self.kappa_g_sq)


def nested_split(chart: NestedChart, point) -> NestedSplit:
    """Split the flat-space curvature of a nested chart into the part normal
    to the ambient (kappa_n) and the part tangent to it (kappa_g).

    Each squared curvature is the determinant ratio of the corresponding
    slab block over |g|.  The Pythagorean identity kappa^2 = kappa_n^2 +
    kappa_g^2 is exact for curves (M=1, where the determinants are sums of
    squares); for M >= 2 the residual is reported rather than assumed.
    """
    point = np.asarray(point, dtype=float)
    frame = frame_bundle(chart, point, with_jets=False)
    sff = second_fundamental(chart, point, frame)
    gjets = induced_metric(chart, point, order=1)
    m = chart.M
    g = np.array([[gjets[a][b].value for b in range(m)] for a in range(m)])
    det_g = _check_metric(g, point)
    g_inv = linalg.invert(g)

    kappa_g_sq = _det_ratio(sff.tau, g_inv, det_g)
    kappa_n_sq = _det_ratio(sff.varkappa, g_inv, det_g)
    kappa_sq = _det_ratio(sff.full, g_inv, det_g)
    residual = abs(kappa_sq - kappa_n_sq - kappa_g_sq)
    scale = max(1.0, abs(kappa_sq))
    return NestedSplit(
        kappa_sq=kappa_sq,
        kappa_n_sq=kappa_n_sq,
        kappa_g_sq=kappa_g_sq,
        split_residual=residual,
        geodesic=abs(kappa_g_sq) <= 1e-12 * scale,
        tau=sff.tau,
        varkappa=sff.varkappa,
        frame=frame,
    )


@dataclass
class CurveCurvature:
    vector: np.ndarray  # curvature vector in the flat target space
    kappa: float
    kappa_n: Optional[float] = None
    kappa_g: Optional[float] = None


def curve_curvature(chart, point) -> CurveCurvature:
    """Curvature of a one-dimensional chart; nested charts also get the
    normal/geodesic split."""
    if chart.M != 1:
        raise GeometryError("curve_curvature needs a one-dimensional chart")
    point = np.asarray(point, dtype=float)
    imm = flat_immersion(chart)
    velocity = np.array(
        [xj.grad[0] for xj in _component_jets(imm, list(point), 1)]
    )
    speed_sq = float(velocity @ velocity)
    if speed_sq <= 1e-20:
        raise ZeroVelocityError(f"zero velocity at point {list(point)}")
    frame = frame_bundle(chart, point, with_jets=False)
    sff = second_fundamental(chart, point, frame)
    full = sff.full  # (F, 1, 1)
    coeffs = full[:, 0, 0]
    if isinstance(chart, NestedChart):
        frames = np.concatenate([frame.normals, frame.ambient_normals], axis=1)
    else:
        frames = frame.normals
    vector = frames @ coeffs / speed_sq
    kappa = float(np.sqrt(np.sum(coeffs**2)) / speed_sq)
    if isinstance(chart, NestedChart):
        split = nested_split(chart, point)
        return CurveCurvature(
            vector=vector, kappa=kappa, kappa_n=split.kappa_n, kappa_g=split.kappa_g
        )
    return CurveCurvature(vector=vector, kappa=kappa)
