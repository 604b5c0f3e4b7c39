import math

import numpy as np
import pytest

import conftest as cf
from kappa import geometry, linalg
from kappa.curvature import (
    GaussianReductionError,
    PivotDegenerateError,
    condensed_blocks,
    gauss_residual,
    identity_check,
    kappa_extrinsic,
    kappa_intrinsic,
    kappa_report,
)
from kappa.geometry import curvature_tensors, frame_bundle, second_fundamental


def slabs_and_tensors(chart, pt):
    fb = frame_bundle(chart, pt, with_jets=False)
    sff = second_fundamental(chart, pt, fb)
    t = curvature_tensors(chart, pt)
    return sff.full, t


# -- extrinsic route -----------------------------------------------------------


def test_sphere_extrinsic_is_gaussian_squared():
    a = 1.6
    chart = cf.sphere_chart(a)
    tau, t = slabs_and_tensors(chart, [0.8, 0.3])
    assert kappa_extrinsic(tau, t.g) == pytest.approx(1.0 / a**4, rel=1e-10)


def test_plane_extrinsic_zero():
    tau, t = slabs_and_tensors(cf.plane_chart(), [0.2, 0.5])
    assert kappa_extrinsic(tau, t.g) == pytest.approx(0.0, abs=1e-14)


def test_flat_cylinder_e4_extrinsic_zero_with_nonzero_tau():
    chart = cf.flat_cylinder_e4_chart(1.2)
    tau, t = slabs_and_tensors(chart, [0.4, 0.9])
    assert np.max(np.abs(tau)) > 0.5  # extrinsically curved
    # brute-force determinant of the K.K matrix as the oracle
    kk = np.einsum("fab,bd,fcd->ac", tau, np.linalg.inv(t.g), tau)
    assert cf.cofactor_det(kk) == pytest.approx(0.0, abs=1e-12)
    assert kappa_extrinsic(tau, t.g) == pytest.approx(0.0, abs=1e-12)


def test_clifford_torus_extrinsic_nonzero_but_flat():
    """The genuinely flat torus in 4-space: tau is nonzero, the curvature
    tensor vanishes, and the two routes honestly disagree."""
    a = 1.0
    chart = cf.clifford_chart(a)
    tau, t = slabs_and_tensors(chart, [0.3, 1.0])
    assert np.max(np.abs(t.riemann)) < 1e-10  # intrinsically flat
    kk = np.einsum("fab,bd,fcd->ac", tau, np.linalg.inv(t.g), tau)
    want = cf.cofactor_det(kk) / cf.cofactor_det(t.g)
    got = kappa_extrinsic(tau, t.g)
    assert got == pytest.approx(want, rel=1e-10)
    assert got == pytest.approx(4.0 / a**4, rel=1e-10)  # not zero
    rep = kappa_report(chart, [0.3, 1.0])
    assert "routes-disagree" in rep.flags and "flat" in rep.flags


def test_extrinsic_gram_argument_matches_identity_frame():
    chart = cf.sphere3_chart(1.2)
    pt = [1.0, 0.8, 0.4]
    tau, t = slabs_and_tensors(chart, pt)
    assert kappa_extrinsic(tau, t.g, gram=np.eye(tau.shape[0])) == pytest.approx(
        kappa_extrinsic(tau, t.g), rel=1e-14
    )


# -- condensed blocks -----------------------------------------------------------


def test_blocks_require_m_above_two():
    with pytest.raises(GaussianReductionError):
        condensed_blocks(np.zeros((2, 2, 2, 2)), (0, 1))


def test_blocks_s3_structure():
    t = curvature_tensors(cf.sphere3_chart(1.0), [1.1, 0.9, 0.4])
    b = condensed_blocks(t.riemann, (0, 1))
    r = t.riemann
    # round metric: off-diagonal entries of block A vanish
    want_a = r[0, 1, 0, 1] * r[0, 2, 0, 2]
    assert b.delta_a == pytest.approx(want_a, rel=1e-9)
    direct = linalg.det_lu(
        np.array(
            [[r[0, 1, 0, 1], r[0, 1, 0, 2]], [r[0, 2, 0, 1], r[0, 2, 0, 2]]]
        )
    )
    assert b.delta_a == pytest.approx(direct, rel=1e-12)


def test_blocks_schwarzschild_diagonal_product():
    t = curvature_tensors(cf.schwarzschild_chart(), [4.0, np.pi / 2, 0.3, 0.0])
    b = condensed_blocks(t.riemann, (0, 1))
    r = t.riemann
    want = r[0, 1, 0, 1] * r[0, 2, 0, 2] * r[0, 3, 0, 3]
    assert b.delta_a == pytest.approx(want, rel=1e-9)
    # dense determinant oracle over the same index sets
    rows = [1, 2, 3]
    dense = cf.cofactor_det(np.array([[r[0, i, 0, j] for j in rows] for i in rows]))
    assert b.delta_a == pytest.approx(dense, rel=1e-12)


def test_blocks_zero_tensor():
    b = condensed_blocks(np.zeros((4, 4, 4, 4)), (0, 1))
    assert b.delta_a == b.delta_b == b.delta_c == b.delta_d == 0.0


# -- intrinsic route -------------------------------------------------------------


def test_schwarzschild_kappa_value():
    t = curvature_tensors(cf.schwarzschild_chart(), [3.0, np.pi / 2, 0.3, 0.0])
    out = kappa_intrinsic(t.riemann, t.g, gamma_scale=t.gamma_scale)
    assert out.kappa == pytest.approx(2.0 / 729.0, rel=1e-10)
    assert out.kappa == pytest.approx(2.74348e-3, rel=1e-5)
    assert out.pivot == (0, 1)


def test_isotropic_kappa_value_at_rho_2():
    t = curvature_tensors(cf.isotropic_chart(), [2.0, 1.2, 0.4, 0.0])
    out = kappa_intrinsic(t.riemann, t.g, gamma_scale=t.gamma_scale)
    m, rho = 1.0, 2.0
    want = 2 * m * m / rho**6 * math.exp(4 * m / rho) * math.sqrt(
        (1 + m / (2 * rho)) * (1 + m / rho)
    )
    assert abs(out.kappa) == pytest.approx(want, rel=1e-10)
    # closed form evaluates to 0.3161838...; the quoted 0.316188 is a loose round
    assert abs(out.kappa) == pytest.approx(0.316188, rel=2e-5)


def test_flat_3d_polar_flagged():
    t = curvature_tensors(cf.polar3_chart(), [1.5, 0.9, 0.2])
    out = kappa_intrinsic(t.riemann, t.g, gamma_scale=t.gamma_scale)
    assert out.kappa_sq == 0.0
    assert "flat" in out.flags


def test_fixed_pivot_matches_auto_on_sphere3():
    t = curvature_tensors(cf.sphere3_chart(1.0), [1.0, 0.7, 0.2])
    auto = kappa_intrinsic(t.riemann, t.g)
    for pivot in [(0, 1), (0, 2), (1, 2)]:
        fixed = kappa_intrinsic(t.riemann, t.g, pivot=pivot)
        assert fixed.kappa_sq == pytest.approx(auto.kappa_sq, rel=1e-9)


def test_pivot_degenerate_error():
    r = np.zeros((3, 3, 3, 3))
    # curvature with all paired components zero but another entry nonzero
    r[0, 1, 0, 2] = r[0, 2, 0, 1] = 1.0
    r[1, 0, 2, 0] = r[2, 0, 1, 0] = 1.0
    r[0, 1, 2, 0] = r[0, 2, 1, 0] = -1.0
    r[1, 0, 0, 2] = r[2, 0, 0, 1] = -1.0
    with pytest.raises(PivotDegenerateError):
        kappa_intrinsic(r, np.eye(3))


def test_m2_reduction_signed_gaussian():
    t = curvature_tensors(cf.sphere_chart(1.5), [0.7, 0.2])
    out = kappa_intrinsic(t.riemann, t.g)
    want = t.riemann[0, 1, 0, 1] / t.det_g
    assert out.kappa == pytest.approx(want, rel=1e-12)
    assert out.kappa_sq == pytest.approx(want * want, rel=1e-12)
    assert out.kappa == pytest.approx(1.0 / 1.5**2, rel=1e-10)


# -- Gauss relation ---------------------------------------------------------------


def test_gauss_residual_sphere():
    chart = cf.sphere_chart(1.0)
    tau, t = slabs_and_tensors(chart, [0.9, 0.5])
    assert gauss_residual(t.riemann, tau) < 1e-9


def test_gauss_residual_plane_zero():
    tau, t = slabs_and_tensors(cf.plane_chart(), [0.1, 0.2])
    assert gauss_residual(t.riemann, tau) == pytest.approx(0.0, abs=1e-15)


def test_gauss_residual_random_quadratic_m3(rng):
    for _ in range(4):
        chart = cf.generic_immersion(rng, m=3, n=5)
        pt = [0.0, 0.0, 0.0]
        tau, t = slabs_and_tensors(chart, pt)
        scale = max(1e-300, np.max(np.abs(t.riemann)))
        assert gauss_residual(t.riemann, tau) < 1e-7 * scale


# -- condensation identities -------------------------------------------------------


def test_identities_round_s3():
    chart = cf.sphere3_chart(1.0)
    pt = [1.1, 0.8, 0.3]
    tau, t = slabs_and_tensors(chart, pt)
    r1, r2 = identity_check(tau, t.g, t.riemann, (0, 1))
    assert r1 < 1e-8
    assert r2 < 1e-8


def test_identities_need_m_above_two():
    chart = cf.flat_cylinder_e4_chart(1.0)
    pt = [0.5, 0.2]
    tau, t = slabs_and_tensors(chart, pt)
    with pytest.raises(GaussianReductionError):
        identity_check(tau, t.g, t.riemann, (0, 1))


def test_identities_flat_immersion_both_sides_zero():
    # flat 3-chart in 4-space with nonzero tau: every identity term vanishes
    chart = cf.immersion(["u", "v", "w"], ["cos(u)", "sin(u)", "v", "w"])
    pt = [0.4, 0.1, -0.2]
    tau, t = slabs_and_tensors(chart, pt)
    assert np.max(np.abs(tau)) > 0.5
    r1, r2 = identity_check(tau, t.g, t.riemann, (0, 1))
    assert r1 < 1e-12
    assert r2 < 1e-12


def test_identities_adapted_random_m3(rng):
    for _ in range(4):
        chart = cf.adapted_immersion(rng, m=3, n=int(rng.integers(4, 7)))
        pt = [0.0, 0.0, 0.0]
        tau, t = slabs_and_tensors(chart, pt)
        r1, r2 = identity_check(tau, t.g, t.riemann, (0, 1))
        assert r1 < 1e-6
        assert r2 < 1e-6


# -- route agreement ----------------------------------------------------------------


def test_route_agreement_s3_and_adapted_corpus(rng):
    charts = [(cf.sphere3_chart(1.0), [1.1, 0.8, 0.3])]
    for _ in range(6):
        n = int(rng.integers(4, 7))
        charts.append((cf.adapted_immersion(rng, m=3, n=n), [0.0, 0.0, 0.0]))
    for chart, pt in charts:
        rep = kappa_report(chart, pt)
        assert rep.kappa_sq_extrinsic is not None
        assert rep.kappa_sq_intrinsic is not None
        assert rep.kappa_sq_intrinsic == pytest.approx(
            rep.kappa_sq_extrinsic, rel=1e-6, abs=1e-12
        )
        assert "routes-disagree" not in rep.flags


def test_pivot_independence_adapted(rng):
    chart = cf.adapted_immersion(rng, m=3, n=5)
    pt = [0.0, 0.0, 0.0]
    t = curvature_tensors(chart, pt)
    values = []
    for pivot in [(0, 1), (0, 2), (1, 2)]:
        if abs(t.riemann[pivot[0], pivot[1], pivot[0], pivot[1]]) > 1e-6 * np.max(
            np.abs(t.riemann)
        ):
            values.append(kappa_intrinsic(t.riemann, t.g, pivot=pivot).kappa_sq)
    assert len(values) >= 2
    for v in values[1:]:
        assert v == pytest.approx(values[0], rel=1e-6)


def test_m2_both_routes_match_gaussian_squared():
    for a in (0.5, 1.0, 2.0):
        chart = cf.sphere_chart(a)
        rep = kappa_report(chart, [0.85, 0.4])
        want = (1.0 / a**2) ** 2
        assert rep.kappa_sq_intrinsic == pytest.approx(want, rel=1e-8)
        assert rep.kappa_sq_extrinsic == pytest.approx(want, rel=1e-8)


# -- report assembly ------------------------------------------------------------------


def test_metric_chart_report_has_no_extrinsic():
    rep = kappa_report(cf.schwarzschild_chart(), [4.0, 1.0, 0.2, 0.0])
    assert rep.kappa_sq_extrinsic is None
    assert rep.gauss_residual is None
    assert rep.kappa == pytest.approx(2.0 / 4096.0, rel=1e-10)


def test_report_invariant_on_agreement_corpus(rng):
    chart = cf.adapted_immersion(rng, m=3, n=4)
    rep = kappa_report(chart, [0.0, 0.0, 0.0])
    assert rep.route_residual <= 1e-6 * max(1.0, abs(rep.kappa_sq_extrinsic))
    assert rep.identity_residuals is not None
    assert max(rep.identity_residuals) < 1e-6
