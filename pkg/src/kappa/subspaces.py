"""Principal curvature sub-spaces of a concretely immersed ambient chart.

The ambient chart is an immersion of an N-dimensional space into a flat
K-dimensional space (class C = K - N).  Its shape-square operator

    S[i, j] = sum_P (t_P e^{-1} t_P)[i, j]

(with t_P the ambient second-fundamental-form slabs and e the ambient
metric) drives a generalized symmetric eigenproblem S v = kh^2 e v whose
spectrum classifies principal curvature directions and sub-spaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import geometry, linalg


class SubspaceError(ValueError):
    pass


class NotIsotropicError(SubspaceError):
    pass


@dataclass
class AmbientGeometry:
    chart: geometry.ImmersionChart
    point: np.ndarray
    e: np.ndarray  # ambient induced metric (N, N)
    e_inv: np.ndarray
    t_slabs: np.ndarray  # (C, N, N) second fundamental form of the ambient
    shape_square: np.ndarray  # (N, N)
    frame: geometry.FrameBundle


def ambient_shape(chart: geometry.ImmersionChart, point) -> AmbientGeometry:
    """Ambient metric, second fundamental form and shape-square at a point."""
    point = np.asarray(point, dtype=float)
    frame = geometry.frame_bundle(chart, point, with_jets=False)
    sff = geometry.second_fundamental(chart, point, frame)
    gjets = geometry.induced_metric(chart, point, order=1)
    n = chart.M
    e = np.array([[gjets[a][b].value for b in range(n)] for a in range(n)])
    e_inv = linalg.invert(e)
    t = sff.tau  # slabs against the deterministic orthonormal normals
    shape_sq = np.einsum("pij,jk,pkl->il", t, e_inv, t)
    shape_sq = 0.5 * (shape_sq + shape_sq.T)
    return AmbientGeometry(
        chart=chart, point=point, e=e, e_inv=e_inv, t_slabs=t,
        shape_square=shape_sq, frame=frame,
    )


@dataclass
class PrincipalReport:
    spectrum: linalg.Spectrum
    k_sq: float  # det(S)/det(e) = product of the eigenvalues
    mixed_product: Optional[float]  # kt^mult * prod of remaining roots
    all_simple: bool  # N one-dimensional principal directions

    @property
    def eigenvalues(self):
        return self.spectrum.values

    @property
    def multiplicities(self):
        return self.spectrum.multiplicities

    @property
    def directions(self):
        return self.spectrum.vectors

    @property
    def distinct_values(self):
        return self.spectrum.distinct_values


def principal_spectrum(ag: AmbientGeometry) -> PrincipalReport:
    """Generalized spectrum of (S, e) with multiplicity bookkeeping.

    ``mixed_product`` is reported when some eigenvalue has multiplicity
    above one: the root of that eigenvalue raised to its multiplicity times
    the roots of the remaining ones (the grouped form of the eigenvalue
    product).  Eigenvalues sit at or above zero up to rounding since S is a
    sum of squares against e.
    """
    spec = linalg.sym_gen_eig(ag.shape_square, ag.e)
    det_e = linalg.det_lu(ag.e)
    k_sq = float(linalg.det_lu(ag.shape_square) / det_e)
    mults = spec.multiplicities
    mixed = None
    if any(mult > 1 for mult in mults):
        gi = int(np.argmax(mults))
        lam = spec.distinct_values[gi]
        mixed = float(np.sign(lam) * abs(lam) ** 0.5) ** mults[gi]
        for gj, lam_j in enumerate(spec.distinct_values):
            if gj == gi:
                continue
            root = float(np.sign(lam_j) * abs(lam_j) ** 0.5)
            mixed *= root ** mults[gj]
    return PrincipalReport(
        spectrum=spec,
        k_sq=k_sq,
        mixed_product=mixed,
        all_simple=all(mult == 1 for mult in mults),
    )


@dataclass
class SubspaceCondition:
    kappa_hat_sq: float  # least-squares fit of the proportionality constant
    residual: float  # max-norm residual of the defining condition
    satisfied: bool


def subspace_residual(nested: geometry.NestedChart, point, tol=1e-8) -> SubspaceCondition:
    """Test whether a nested chart is a sub-space of curvature of its ambient.

    The condition contracts the chart's ambient-normal curvature slabs with
    the ambient shape data and demands proportionality to the tangent
    pullback of the ambient metric; kh^2 is fit by least squares over all
    components before the max-norm residual is taken.  For curves this is
    the classical line-of-curvature test.
    """
    point = np.asarray(point, dtype=float)
    ag = ambient_shape(nested.outer, nested.ambient_point(point))
    split = geometry.nested_split(nested, point)
    m = nested.M
    gjets = geometry.induced_metric(nested, point, order=1)
    g = np.array([[gjets[a][b].value for b in range(m)] for a in range(m)])
    g_inv = linalg.invert(g)
    inner_jets = [
        # order-1 jets of the inner map give the columns d_a y^j
        j for j in geometry._component_jets(nested.inner, list(point), 1)
    ]
    jac_inner = np.array([[ij.grad[a] for a in range(m)] for ij in inner_jets])  # (N, M)
    lhs = np.einsum("pab,ad,pij,jd->ib", split.varkappa, g_inv, ag.t_slabs, jac_inner)
    rhs0 = np.einsum("ij,jb->ib", ag.e, jac_inner)
    denom = float(np.sum(rhs0 * rhs0))
    kh_sq = float(np.sum(lhs * rhs0) / denom) if denom > 0.0 else 0.0
    residual = float(np.max(np.abs(lhs - kh_sq * rhs0)))
    scale = max(1.0, float(np.max(np.abs(lhs))), float(np.max(np.abs(kh_sq * rhs0))))
    return SubspaceCondition(
        kappa_hat_sq=kh_sq, residual=residual, satisfied=residual <= tol * scale
    )


@dataclass
class IsotropicRelation:
    kappa_hat_sq: float
    sectional: float  # common ratio R[a,d,b,c] / (g_ab g_cd - g_ac g_bd)
    rhs: float  # -scalar / (M (M-1))
    residual: float  # | |kappa_hat_sq| - |rhs| |
    sign_agrees: bool  # empirical sign of the curvature-scalar relation


def isotropic_relation(tensors: geometry.CurvatureTensors, kappa_hat_sq, tol=1e-6):
    """Check kh^2 against the scalar curvature of an isotropic space.

    Requires every sectional ratio to agree within ``tol`` (isotropy); the
    magnitude comparison is |kh^2| vs |scalar| / (M (M-1)) and the sign of
    the -scalar/(M(M-1)) convention is recorded, not assumed.
    """
    g = tensors.g
    riem = tensors.riemann
    m = tensors.M
    if m < 2:
        raise SubspaceError("isotropy needs M >= 2")
    scale_g = max(1.0, float(np.max(np.abs(g)))) ** 2
    ratios = []
    for a in range(m):
        for d in range(m):
            for b in range(m):
                for c in range(m):
                    denom = g[a, b] * g[c, d] - g[a, c] * g[b, d]
                    if abs(denom) > 1e-9 * scale_g:
                        ratios.append(riem[a, d, b, c] / denom)
    if not ratios:
        raise NotIsotropicError("no nondegenerate sectional pairs at this point")
    ratios = np.array(ratios)
    mean = float(np.mean(ratios))
    spread = float(np.max(ratios) - np.min(ratios))
    if spread > tol * max(1.0, abs(mean)):
        raise NotIsotropicError(
            f"sectional ratios disagree (spread {spread:.3e} about {mean:.3e})"
        )
    rhs = -tensors.scalar / (m * (m - 1))
    residual = abs(abs(kappa_hat_sq) - abs(rhs))
    sign_agrees = np.sign(rhs) == np.sign(kappa_hat_sq) or kappa_hat_sq == rhs == 0.0
    return IsotropicRelation(
        kappa_hat_sq=float(kappa_hat_sq),
        sectional=mean,
        rhs=float(rhs),
        residual=float(residual),
        sign_agrees=bool(sign_agrees),
    )
