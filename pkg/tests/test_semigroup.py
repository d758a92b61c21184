import numpy as np
import pytest

from dilatox import semigroup as sg
from dilatox.core import DilatationMap
from dilatox.errors import DomainViolation, NotLinearModel
from dilatox.menelaos import euclidean_center_closed_form


def test_apply_identity(euclid1):
    z = np.array([0.7])
    np.testing.assert_array_equal(sg.apply_canonical(euclid1, sg.Identity(), z), z)


def test_apply_translation_euclidean(euclid1):
    out = sg.apply_canonical(euclid1, sg.LeftTranslation((-0.5,)), [2.0])
    np.testing.assert_array_equal(out, [1.5])


def test_apply_dilatation_heisenberg(heis):
    # graded dilation at the identity center
    e = sg.Dilatation((0.0, 0.0, 0.0), 0.5)
    out = sg.apply_canonical(heis, e, [2.0, 0.0, 4.0])
    np.testing.assert_array_equal(out, heis.model.dilation(0.5, [2.0, 0.0, 4.0]))


def test_collapse_rules(euclid1, heis):
    assert sg.dilatation_element([0.3], 1.0) == sg.Identity()
    assert sg.translation_element(heis, np.zeros(3)) == sg.Identity()
    assert isinstance(sg.dilatation_element([0.3], 0.5), sg.Dilatation)


def test_translation_from_pair_euclidean_value(euclid1):
    # by hand: z -> 0.5*(1 + 2*(z-1)) = z - 0.5, so g = (1-eps)(x-y) = -0.5
    t = sg.translation_from_pair(euclid1, [0.0], [1.0], 0.5)
    assert t == sg.LeftTranslation((-0.5,))


def test_translation_from_pair_same_center_is_identity(heis, rng):
    x = heis.sample(rng, 1, 0.3)[0]
    assert sg.translation_from_pair(heis, x, x, 0.5) == sg.Identity()


def test_translation_from_pair_unit_coefficient_is_identity(heis, rng):
    x = heis.sample(rng, 1, 0.3)[0]
    y = heis.sample_near(rng, x[None], 0.3)[0]
    assert sg.translation_from_pair(heis, x, y, 1.0) == sg.Identity()


def test_translation_from_pair_matches_composition_pointwise(group_structures, rng):
    for name, S in group_structures.items():
        x = S.sample(rng, 1, 0.3)[0]
        y = S.sample_near(rng, x[None], 0.3)[0]
        eps = 0.5
        t = sg.translation_from_pair(S, x, y, eps)
        zs = S.sample_near(rng, np.broadcast_to(x, (50, S.dimension)).copy(), 0.3)
        want = S.dilate(x, eps, S.dilate(y, 1.0 / eps, zs))
        got = sg.apply_canonical(S, t, zs)
        assert float(np.max(S.coord_dist(got, want))) <= 1e-12, name


def test_compose_dilatations_closed_form_center(euclid1):
    a = sg.dilatation_element([0.0], 0.5)
    b = sg.dilatation_element([1.0], 0.5)
    c = sg.compose_canonical(euclid1, a, b)
    assert isinstance(c, sg.Dilatation)
    assert c.coeff == 0.25
    w = euclidean_center_closed_form([0.0], [1.0], 0.5, 0.5)
    assert c.center[0] == pytest.approx(w[0], abs=1e-11)
    assert c.center[0] == pytest.approx(1.0 / 3.0, abs=1e-11)


def test_compose_exact_inverse_pair_same_center(heis, rng):
    x = heis.sample(rng, 1, 0.3)[0]
    a = sg.dilatation_element(x, 0.5)
    b = sg.dilatation_element(x, 2.0)
    assert sg.compose_canonical(heis, a, b) == sg.Identity()


def test_compose_translations_group_product(heis, rng):
    M = heis.model
    g = M.sample_element(rng, 1, 0.2)[0]
    h = M.sample_element(rng, 1, 0.2)[0]
    a = sg.translation_element(heis, g)
    b = sg.translation_element(heis, h)
    c = sg.compose_canonical(heis, a, b)
    assert isinstance(c, sg.LeftTranslation)
    np.testing.assert_allclose(c.g, M.mul(g, h), atol=1e-15)


def _step2_mixed_center_oracle(M, h, x, eps, translation_first):
    """Closed form for the fixed point of a translation-dilatation mix on a
    two-layer group: solve dilation(eps, m) = k*m (or m = dilation(eps, k m))
    layer by layer, using that the bracket of a vector with itself vanishes."""
    d1 = getattr(M, "dim1", 2)  # the Heisenberg first layer is the plane part
    if translation_first:
        # map z -> dilate(x, eps, h*z); fixed point c = x*m with
        # m = dilation(eps, k)*dilation(eps, m), k = inv(x) h x
        k = M.mul(M.mul(M.inv(x), h), x)
        ke = M.dilation(eps, k)
        m = np.empty_like(k)
        m[:d1] = ke[:d1] / (1.0 - eps)
        m[d1:] = ke[d1:] / (1.0 - eps**2)
    else:
        # map z -> h*dilate(x, eps, z); fixed point c = x*m with
        # dilation(eps, m)*inv(m) = k, k = inv(x) inv(h) x
        k = M.mul(M.mul(M.inv(x), M.inv(h)), x)
        m = np.empty_like(k)
        m[:d1] = k[:d1] / (eps - 1.0)
        m[d1:] = k[d1:] / (eps**2 - 1.0)
    return M.mul(x, m)


@pytest.mark.parametrize("translation_first", [True, False])
def test_mixed_composition_center_matches_closed_form(heis, step2, rng, translation_first):
    for S in (heis, step2):
        M = S.model
        x = S.sample(rng, 1, 0.25)[0]
        h = M.sample_element(rng, 1, 0.1)[0]
        eps = 0.5
        dil = sg.dilatation_element(x, eps)
        trans = sg.translation_element(S, h)
        if translation_first:
            composed = sg.compose_canonical(S, dil, trans)
        else:
            composed = sg.compose_canonical(S, trans, dil)
        assert isinstance(composed, sg.Dilatation)
        assert composed.coeff == eps
        oracle = _step2_mixed_center_oracle(M, h, x, eps, translation_first)
        assert float(np.linalg.norm(np.asarray(composed.center) - oracle)) <= 1e-10


def test_compose_requires_linear_model(sphere):
    with pytest.raises(NotLinearModel):
        sg.compose_canonical(sphere, sg.Identity(), sg.Identity())


def test_normalize_singleton(euclid1):
    w = sg.Word((DilatationMap((0.7,), 0.5),))
    assert sg.normalize_word(euclid1, w) == sg.Dilatation((0.7,), 0.5)


def test_normalize_word_contracting_pair(euclid1):
    # first factor applied first: z -> dilate(0, 0.5, dilate(1, 0.5, z))
    w = sg.Word((DilatationMap((1.0,), 0.5), DilatationMap((0.0,), 0.5)))
    e = sg.normalize_word(euclid1, w)
    assert isinstance(e, sg.Dilatation)
    assert e.coeff == 0.25
    assert e.center[0] == pytest.approx(1.0 / 3.0, abs=1e-11)


def test_normalize_word_unit_product_pair(euclid1):
    # z -> dilate(0, 0.5, dilate(1, 2, z)) = z - 0.5
    w = sg.Word((DilatationMap((1.0,), 2.0), DilatationMap((0.0,), 0.5)))
    assert sg.normalize_word(euclid1, w) == sg.LeftTranslation((-0.5,))


def test_normalize_word_verifies_pointwise(group_structures, rng):
    for name, S in group_structures.items():
        box = 0.15 * S.domain.closeness
        centers = S.sample(rng, 5, box)
        coeffs = [0.5, 2.0, 0.7, 0.25, 4.0]
        w = sg.Word(tuple(DilatationMap(tuple(c), k) for c, k in zip(centers, coeffs)))
        e = sg.normalize_word(S, w)
        assert isinstance(e, sg.Dilatation)
        assert e.coeff == pytest.approx(np.prod(coeffs), rel=1e-12)
        zs = S.sample_near(rng, np.broadcast_to(centers[0], (100, S.dimension)).copy(), box)
        rep = sg.verify_normal_form(S, w, e, zs)
        assert rep.passed, f"{name}: residual {rep.max_residual:.3e}"


def test_word_inverse_law(heis, rng):
    # x x^{-1} x = x at the level of the canonical maps
    box = 0.15
    centers = heis.sample(rng, 4, box)
    coeffs = [0.5, 4.0, 0.5, 0.5]  # dyadic, so the product cancels exactly
    w = sg.Word(tuple(DilatationMap(tuple(c), k) for c, k in zip(centers, coeffs)))
    e = sg.normalize_word(heis, w)
    e_inv = sg.normalize_word(heis, w.inverse())
    back = sg.compose_canonical(heis, e, sg.compose_canonical(heis, e_inv, e))
    zs = heis.sample_near(rng, np.broadcast_to(centers[0], (50, 3)).copy(), box)
    got = sg.apply_canonical(heis, back, zs)
    want = sg.apply_canonical(heis, e, zs)
    assert float(np.max(heis.coord_dist(got, want))) <= 1e-8


def test_word_validation(euclid1, heis):
    with pytest.raises(DomainViolation):
        sg.Word(())
    far = sg.Word((DilatationMap((0.0, 0.0, 0.0), 0.5), DilatationMap((5.0, 0.0, 0.0), 0.5)))
    with pytest.raises(DomainViolation):
        sg.normalize_word(heis, far)
    wrong_dim = sg.Word((DilatationMap((0.0, 0.0), 0.5),))
    with pytest.raises(DomainViolation):
        sg.normalize_word(euclid1, wrong_dim)


def test_canonical_text_roundtrip(heis):
    elements = [
        sg.Identity(),
        sg.Dilatation((0.25, -0.5, 1.0), 0.75),
        sg.LeftTranslation((0.1, 0.2, -0.3)),
    ]
    for e in elements:
        text = sg.canonical_to_text(e)
        assert sg.canonical_from_text(text, 3) == e


def test_word_text_roundtrip():
    w = sg.Word((DilatationMap((1.0,), 2.0), DilatationMap((0.0,), 0.5)))
    assert sg.word_from_text(sg.word_to_text(w), 1) == w
    assert sg.word_to_text(w) == "D(1.0;2.0) D(0.0;0.5)"


def test_text_parse_errors():
    with pytest.raises(DomainViolation):
        sg.canonical_from_text("D(1.0)", 2)
    with pytest.raises(DomainViolation):
        sg.canonical_from_text("Q(1.0;2.0)", 1)
    with pytest.raises(DomainViolation):
        sg.word_from_text("D(1.0;abc)", 1)
    with pytest.raises(DomainViolation):
        sg.word_from_text("", 1)
