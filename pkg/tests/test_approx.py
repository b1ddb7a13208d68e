import math

import numpy as np
import pytest

from heisgeom.approx import (
    ApproxError,
    TangentMapH,
    conjugated_jets,
    diffeo_expansion_check,
    horizontal_quadratic,
    rate_fit,
    tangent_map_H,
)
from heisgeom.fields import pushforward_field, pushforward_preserves_H
from heisgeom.group import TangentGroup, bilinear_mul
from heisgeom.jets import Jet, PolyMap, jet_space
from heisgeom.rates import RateError, RateReport, fit_report
from heisgeom.coords import heisenberg_map

from conftest import heisenberg_frame, left_translation, vertical_shear_diffeo

H3 = heisenberg_frame(half=8.0)
DARBOUX_Q = {(0, 1, 1): 1.0, (0, 3, 0): 0.4}


# ---- rate fitting ----------------------------------------------------------


def test_rate_fit_linear():
    ts = 2.0 ** -np.arange(2, 9)
    assert rate_fit(ts, 3.7 * ts) == pytest.approx(1.0, abs=1e-6)


def test_rate_fit_quadratic():
    ts = 2.0 ** -np.arange(2, 9)
    assert rate_fit(ts, 0.2 * ts**2) == pytest.approx(2.0, abs=1e-6)


def test_rate_fit_constant_fails_verdict():
    ts = 2.0 ** -np.arange(2, 9)
    rep = fit_report(ts, np.full(len(ts), 0.3), slope_min=0.85)
    assert rep.slope == pytest.approx(0.0, abs=1e-9)
    assert not rep.passed


def test_rate_fit_exact_short_circuit():
    ts = 2.0 ** -np.arange(2, 9)
    assert math.isinf(rate_fit(ts, np.zeros(len(ts))))


def test_rate_fit_too_few_points():
    with pytest.raises(RateError):
        rate_fit([0.5, 0.25, 0.125], [1.0, 0.5, 0.25])


def test_rate_report_requires_decreasing_grid():
    with pytest.raises(RateError):
        RateReport((0.25, 0.5), (1.0, 1.0), 1.0, 0.85)


# ---- tangent maps ----------------------------------------------------------


def test_tangent_map_identity():
    T = tangent_map_H(PolyMap.identity(3, 3), H3, H3, np.array([0.2, -0.1, 0.4]))
    assert T.a00 == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(T.A_par, np.eye(2), atol=1e-12)
    assert T.upper_residual < 1e-12


def test_tangent_map_dilation():
    s = 0.5
    delta = PolyMap.affine(np.diag([s**2, s, s]), np.zeros(3), 3)
    T = tangent_map_H(delta, H3, H3, np.zeros(3))
    assert T.a00 == pytest.approx(s**2, abs=1e-12)
    np.testing.assert_allclose(T.A_par, s * np.eye(2), atol=1e-12)


def test_tangent_map_left_translation_trivial():
    fwd, _ = left_translation([0.0, 1.0, 0.0])
    T = tangent_map_H(fwd, H3, H3, np.array([0.3, 0.2, -0.5]))
    assert T.a00 == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(T.A_par, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(T.off_col, 0.0, atol=1e-12)


def test_tangent_map_rejects_non_preserving():
    swap = PolyMap.affine(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]), np.zeros(3), 3)
    with pytest.raises(ApproxError):
        tangent_map_H(swap, H3, H3, np.array([0.1, 0.2, 0.3]))


def test_tangent_map_functoriality():
    fwd, _ = left_translation([0.2, -0.4, 0.7])
    s = 0.5
    delta = PolyMap.affine(np.diag([s**2, s, s]), np.zeros(3), 3)
    composite = fwd.compose(delta, exact=True)
    m = np.array([0.4, 0.6, -0.2])
    T_delta = tangent_map_H(delta, H3, H3, m)
    T_fwd = tangent_map_H(fwd, H3, H3, delta.eval(m))
    T_comp = tangent_map_H(composite, H3, H3, m)
    np.testing.assert_allclose(T_comp.matrix(), T_fwd.matrix() @ T_delta.matrix(), atol=1e-11)


def test_tangent_map_is_group_homomorphism():
    fwd, inv, pushed = vertical_shear_diffeo(DARBOUX_Q)
    m = np.array([0.1, -0.3, 0.4])
    T = tangent_map_H(fwd, heisenberg_frame(), pushed, m)
    L_src = heisenberg_map(heisenberg_frame(), m).levi
    L_dst = heisenberg_map(pushed, fwd.eval(m)).levi
    G1, G2 = TangentGroup.from_matrix(L_src), TangentGroup.from_matrix(L_dst)
    rng = np.random.default_rng(21)
    for _ in range(50):
        x, y = rng.uniform(-2, 2, (2, 3))
        np.testing.assert_allclose(T.apply(G1.mul(x, y)), G2.mul(T.apply(x), T.apply(y)), atol=1e-10)


def test_tangent_map_a00_zero_rejected():
    with pytest.raises(ApproxError):
        TangentMapH(0.0, np.eye(2), np.zeros(2), 0.0)


# ---- expansion checks ------------------------------------------------------


def test_expansion_identity_exact():
    rep = diffeo_expansion_check(PolyMap.identity(3, 3), H3, H3, np.zeros(3))
    assert rep.quad_max == 0.0
    assert rep.rate.exact and rep.passed


def test_expansion_left_translation_exact():
    fwd, _ = left_translation([0.0, 1.0, 0.0])
    rep = diffeo_expansion_check(fwd, H3, H3, np.array([0.2, 0.1, -0.3]), sample_half=0.5)
    assert rep.quad_max < 1e-12
    assert rep.rate.exact and rep.passed


def test_expansion_rotation_exact():
    th = 0.7
    R = np.array(
        [[1.0, 0.0, 0.0], [0.0, np.cos(th), -np.sin(th)], [0.0, np.sin(th), np.cos(th)]]
    )
    rot = PolyMap.affine(R, np.zeros(3), 3)
    rep = diffeo_expansion_check(rot, H3, H3, np.array([0.1, 0.4, 0.2]), sample_half=0.5)
    assert rep.quad_max < 1e-12
    assert rep.rate.exact
    np.testing.assert_allclose(rep.tangent.A_par, R[1:, 1:], atol=1e-12)


def test_darboux_shear_pushforward_closed_form():
    # pushed frame has X_1' = d_1 + (2 x_2 + 1.2 x_1^2) d_0 and X_2' = d_2
    _, _, pushed = vertical_shear_diffeo(DARBOUX_Q)
    comp0 = pushed[1].components.components[0] if isinstance(pushed, tuple) else None
    f1 = pushed.fields[1].components.components
    assert f1[0].terms() == pytest.approx({(0, 0, 1): 2.0, (0, 2, 0): 1.2})
    assert f1[1].terms() == {(0, 0, 0): 1.0}
    f2 = pushed.fields[2].components.components
    assert f2[0].terms() == {}
    assert f2[2].terms() == {(0, 0, 0): 1.0}


def test_darboux_shear_is_heisenberg_map():
    fwd, inv, pushed = vertical_shear_diffeo(DARBOUX_Q)
    src = heisenberg_frame()
    rep = pushforward_preserves_H(fwd, src, pushed, src.domain.shrunk(0.2).grid(3))
    assert rep.max_residual < 1e-10


def test_expansion_darboux_quadratic_vanishes_and_slope_one():
    fwd, inv, pushed = vertical_shear_diffeo(DARBOUX_Q)
    src = heisenberg_frame()
    for m in [np.zeros(3), np.array([0.3, 0.25, -0.2]), np.array([-0.2, -0.4, 0.35])]:
        rep = diffeo_expansion_check(fwd, src, pushed, m, sample_half=0.6)
        assert rep.quad_max < 1e-10
        assert not rep.rate.exact
        assert 0.85 <= rep.rate.slope <= 1.35
        assert rep.passed


def test_expansion_uniformity_across_base_points():
    fwd, inv, pushed = vertical_shear_diffeo(DARBOUX_Q)
    src = heisenberg_frame()
    slopes = []
    for m in [np.array([0.0, 0.2, 0.1]), np.array([0.1, -0.3, 0.2]), np.array([-0.2, 0.4, -0.1]), np.array([0.25, 0.1, 0.3])]:
        rep = diffeo_expansion_check(fwd, src, pushed, m, sample_half=0.6)
        slopes.append(rep.rate.slope)
    assert max(slopes) - min(slopes) < 0.1


def test_expansion_negative_control_fails_quadratic():
    s = jet_space(3, 3)
    comp0 = Jet.coordinate(s, 0) + Jet.from_terms(s, {(0, 1, 1): 1.0})
    bad = PolyMap((comp0, Jet.coordinate(s, 1), Jet.coordinate(s, 2)))
    rep_pres = pushforward_preserves_H(bad, H3, H3, H3.domain.shrunk(0.1).grid(3))
    assert rep_pres.max_residual > 1e-3  # genuinely not H-preserving
    rep = diffeo_expansion_check(bad, H3, H3, np.zeros(3))
    assert rep.quad_max > 0.5
    assert not rep.quad_ok


def test_conjugated_jets_constant_vanishes():
    fwd, inv, pushed = vertical_shear_diffeo(DARBOUX_Q)
    conj = conjugated_jets(fwd, heisenberg_frame(), pushed, np.array([0.2, -0.1, 0.3]))
    np.testing.assert_allclose(conj.constant(), 0.0, atol=1e-12)


def test_horizontal_quadratic_extraction():
    s = jet_space(3, 3)
    comp0 = Jet.from_terms(s, {(1, 0, 0): 1.0, (0, 2, 0): 1.5, (0, 1, 1): -0.5})
    pm = PolyMap((comp0, Jet.coordinate(s, 1), Jet.coordinate(s, 2)))
    c = horizontal_quadratic(pm)
    np.testing.assert_allclose(c, [[3.0, -0.5], [-0.5, 0.0]], atol=1e-14)


def test_privileged_coordinates_not_group_morphism():
    # diagnostic for the privileged-vs-Heisenberg remark: with a nonzero
    # symmetric part the plain b-law differs from the tangent-group law, so
    # the identity is a Lie-algebra but not a group identification
    b = np.array([[1.0]])
    L = b.T - b
    G = TangentGroup.from_matrix(L)
    x, y = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    diff = np.max(np.abs(bilinear_mul(b, x, y) - G.mul(x, y)))
    assert diff > 0.5
