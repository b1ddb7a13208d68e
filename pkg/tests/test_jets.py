import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heisgeom.jets import (
    Jet,
    JetError,
    PolyMap,
    jet_compose,
    jet_invert,
    jet_mul,
    jet_space,
)


def brute_mul(a: dict, b: dict, order: int) -> dict:
    """Dense convolution oracle: multiply exponent->coeff tables, drop deg > order."""
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            if sum(e) > order:
                continue
            out[e] = out.get(e, 0.0) + ca * cb
    return {e: c for e, c in out.items() if c != 0.0}


def random_jet(rng, space, base=None, density=0.7):
    coeffs = rng.uniform(-2, 2, space.size) * (rng.uniform(0, 1, space.size) < density)
    return Jet(space, coeffs, base if base is not None else np.zeros(space.dim))


def test_space_graded_lex_order():
    s = jet_space(2, 2)
    assert [tuple(e) for e in s.exponents] == [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]
    assert s.size == 6


def test_mul_difference_of_squares():
    s = jet_space(2, 2)
    one_plus = Jet.from_terms(s, {(0, 0): 1.0, (1, 0): 1.0})
    one_minus = Jet.from_terms(s, {(0, 0): 1.0, (1, 0): -1.0})
    prod = jet_mul(one_plus, one_minus)
    assert prod.terms() == {(0, 0): 1.0, (2, 0): -1.0}


def test_mul_truncates_at_order():
    s = jet_space(2, 1)
    x1 = Jet.from_terms(s, {(1, 0): 1.0})
    x2 = Jet.from_terms(s, {(0, 1): 1.0})
    assert jet_mul(x1, x2).terms() == {}


def test_square_of_linear_sum():
    # (1 + x_0 + x_1)^2 at K=2, expanded by the convolution oracle
    s = jet_space(2, 2)
    f = Jet.from_terms(s, {(0, 0): 1.0, (1, 0): 1.0, (0, 1): 1.0})
    expected = brute_mul(f.terms(), f.terms(), 2)
    assert expected == {(0, 0): 1.0, (1, 0): 2.0, (0, 1): 2.0, (2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0}
    assert jet_mul(f, f).terms() == pytest.approx(expected)


@pytest.mark.parametrize("dim,order", [(d, k) for d in (1, 2, 3) for k in (1, 2, 3, 4)])
def test_mul_matches_brute_force(dim, order):
    rng = np.random.default_rng(1000 * dim + order)
    s = jet_space(dim, order)
    for _ in range(5):
        a, b = random_jet(rng, s), random_jet(rng, s)
        got = jet_mul(a, b).terms()
        want = brute_mul(a.terms(), b.terms(), order)
        keys = set(got) | set(want)
        for e in keys:
            assert got.get(e, 0.0) == pytest.approx(want.get(e, 0.0), abs=1e-12)


def test_mismatch_errors():
    a = Jet.constant(jet_space(2, 2), 1.0)
    with pytest.raises(JetError):
        jet_mul(a, Jet.constant(jet_space(3, 2), 1.0))
    with pytest.raises(JetError):
        jet_mul(a, Jet.constant(jet_space(2, 3), 1.0))
    with pytest.raises(JetError):
        jet_mul(a, Jet.constant(jet_space(2, 2), 1.0, base=np.array([1.0, 0.0])))


def test_nonfinite_rejected():
    s = jet_space(2, 2)
    bad = np.zeros(s.size)
    bad[1] = np.nan
    with pytest.raises(JetError):
        Jet(s, bad, np.zeros(2))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_ring_properties(seed):
    rng = np.random.default_rng(seed)
    s = jet_space(2, 3)
    a, b, c = (random_jet(rng, s) for _ in range(3))
    lhs = jet_mul(a + b, c)
    rhs = jet_mul(a, c) + jet_mul(b, c)
    np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-12)
    np.testing.assert_allclose(jet_mul(a, b).coeffs, jet_mul(b, a).coeffs, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_partials_commute(seed):
    rng = np.random.default_rng(seed)
    s = jet_space(3, 3)
    a = random_jet(rng, s)
    d01 = a.partial(0).partial(1)
    d10 = a.partial(1).partial(0)
    np.testing.assert_array_equal(d01.coeffs, d10.coeffs)


def test_partial_values():
    s = jet_space(2, 3)
    f = Jet.from_terms(s, {(2, 1): 4.0})  # 4 x0^2 x1
    assert f.partial(0).terms() == {(1, 1): 8.0}
    assert f.partial(1).terms() == {(2, 0): 4.0}


def test_eval_against_numpy_polyval():
    s = jet_space(2, 3)
    rng = np.random.default_rng(7)
    f = random_jet(rng, s, base=np.array([0.5, -0.25]))
    pts = rng.uniform(-1, 1, (8, 2))
    vals = f.eval_many(pts)
    for p, v in zip(pts, vals):
        direct = sum(c * np.prod((p - f.base) ** np.array(e)) for e, c in f.terms().items())
        assert v == pytest.approx(direct, abs=1e-12)


def test_compose_linear_substitution():
    # outer = x_0^2, inner x_0 -> x_0 + x_1 gives x_0^2 + 2 x_0 x_1 + x_1^2
    s1 = jet_space(1, 2)
    outer = Jet.from_terms(s1, {(2,): 1.0})
    s2 = jet_space(2, 2)
    inner = PolyMap((Jet.from_terms(s2, {(1, 0): 1.0, (0, 1): 1.0}),))
    got = jet_compose(outer, inner)
    assert got.terms() == {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0}


def test_compose_with_graded_dilation():
    # outer = x_0 composed with (t^2 x_0, t x_1, t x_2) gives t^2 x_0
    t = 0.5
    s = jet_space(3, 3)
    outer = Jet.from_terms(s, {(1, 0, 0): 1.0})
    inner = PolyMap.affine(np.diag([t**2, t, t]), np.zeros(3), 3)
    got = jet_compose(outer, inner)
    assert got.terms() == {(1, 0, 0): t**2}


def test_compose_identity_fixes_random_jet():
    rng = np.random.default_rng(42)
    s = jet_space(3, 3)
    f = random_jet(rng, s)
    ident = PolyMap.identity(3, 3)
    np.testing.assert_allclose(jet_compose(f, ident).coeffs, f.coeffs, atol=1e-13)


def test_compose_base_guard():
    s = jet_space(2, 2)
    outer = Jet.from_terms(s, {(1, 0): 1.0})
    shifted = PolyMap.affine(np.eye(2), np.array([1.0, 0.0]), 2)
    with pytest.raises(JetError):
        jet_compose(outer, shifted)
    assert jet_compose(outer, shifted, exact=True).terms() == {(0, 0): 1.0, (1, 0): 1.0}


def test_invert_affine():
    A = np.array([[2.0, 1.0], [0.0, -1.0]])
    f = PolyMap.affine(A, np.zeros(2), 3)
    g = jet_invert(f)
    np.testing.assert_allclose(g.linear(), np.linalg.inv(A), atol=1e-12)


def test_invert_shear():
    s = jet_space(2, 2)
    f = PolyMap((Jet.from_terms(s, {(1, 0): 1.0, (0, 2): 1.0}), Jet.from_terms(s, {(0, 1): 1.0})))
    g = jet_invert(f)
    assert g.components[0].terms() == pytest.approx({(1, 0): 1.0, (0, 2): -1.0})
    assert g.components[1].terms() == {(0, 1): 1.0}
    roundtrip = f.compose(g)
    ident = PolyMap.identity(2, 2)
    for got, want in zip(roundtrip.components, ident.components):
        np.testing.assert_allclose(got.coeffs, want.coeffs, atol=1e-10)


def test_invert_singular_rejected():
    f = PolyMap.affine(np.array([[1.0, 1.0], [1.0, 1.0]]), np.zeros(2), 2)
    with pytest.raises(JetError):
        jet_invert(f)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_invert_roundtrip_random(seed):
    rng = np.random.default_rng(seed)
    dim, order = 3, 3
    s = jet_space(dim, order)
    A = rng.uniform(-1, 1, (dim, dim)) + 2 * np.eye(dim)
    comps = []
    for i in range(dim):
        jet = PolyMap.affine(A, np.zeros(dim), order).components[i]
        high = random_jet(rng, s, density=0.4)
        mask = s.degrees >= 2
        jet = jet + Jet(s, high.coeffs * mask * 0.3, np.zeros(dim))
        comps.append(jet)
    f = PolyMap(tuple(comps))
    g = jet_invert(f)
    roundtrip = f.compose(g)
    ident = PolyMap.identity(dim, order)
    for got, want in zip(roundtrip.components, ident.components):
        np.testing.assert_allclose(got.coeffs, want.coeffs, atol=1e-10)


def test_rebase_roundtrip():
    rng = np.random.default_rng(3)
    s = jet_space(2, 3)
    f = random_jet(rng, s)
    g = f.rebased(np.array([0.3, -0.7]))
    pts = rng.uniform(-1, 1, (6, 2))
    np.testing.assert_allclose(g.eval_many(pts), f.eval_many(pts), atol=1e-12)
    back = g.rebased(np.zeros(2))
    np.testing.assert_allclose(back.coeffs, f.coeffs, atol=1e-12)


def test_with_order_embed_truncate():
    s = jet_space(2, 2)
    f = Jet.from_terms(s, {(0, 0): 1.0, (1, 1): 2.0})
    up = f.with_order(4)
    assert up.terms() == f.terms()
    down = up.with_order(1)
    assert down.terms() == {(0, 0): 1.0}


def test_kernel_implementations_agree():
    from heisgeom import _jetcore_py

    try:
        from heisgeom import _jetcore_cy
    except ImportError:
        pytest.skip("compiled kernel not built")
    rng = np.random.default_rng(11)
    s = jet_space(3, 3)
    a, b = rng.standard_normal(s.size), rng.standard_normal(s.size)
    got_py = _jetcore_py.mul(a, b, s.coo_a, s.coo_b, s.coo_out, s.size)
    got_cy = _jetcore_cy.mul(a, b, s.coo_a, s.coo_b, s.coo_out, s.size)
    np.testing.assert_allclose(got_cy, got_py, rtol=0, atol=1e-14)


def test_terms_roundtrip_sparse_view():
    s = jet_space(3, 2)
    terms = {(0, 0, 0): 2.0, (1, 0, 1): -1.5}
    assert Jet.from_terms(s, terms).terms() == terms
