import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dilatox.core import ModelDomain
from dilatox.errors import (
    ChartViolation,
    DimensionMismatch,
    DomainViolation,
    InvalidModel,
    NotLinearModel,
)
from dilatox.models import (
    EuclideanModel,
    HeisenbergModel,
    SphereModel,
    Step2CarnotModel,
    heisenberg_bracket,
    make_dilatation_structure,
    model_from_descriptor,
    random_step2,
)

coord3 = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))


# -- Heisenberg ---------------------------------------------------------------

def test_heisenberg_product_hand_value():
    # 2*Im(conj(1) * i) = 2
    M = HeisenbergModel()
    np.testing.assert_array_equal(M.mul([1, 0, 0], [0, 1, 0]), [1.0, 1.0, 2.0])


def test_heisenberg_inverse_hand_value():
    M = HeisenbergModel()
    np.testing.assert_array_equal(M.inv([1, 1, 2]), [-1.0, -1.0, -2.0])
    g = np.array([0.4, -0.3, 0.7])
    np.testing.assert_array_equal(M.mul(g, M.inv(g)), M.identity())
    np.testing.assert_array_equal(M.inv(M.inv(g)), g)
    np.testing.assert_array_equal(M.inv(M.identity()), M.identity())


def test_heisenberg_identity_laws(rng):
    M = HeisenbergModel()
    g = M.sample_element(rng, 32, 1.0)
    np.testing.assert_array_equal(M.mul(g, M.identity()), g)
    np.testing.assert_array_equal(M.mul(M.identity(), g), g)


def test_heisenberg_graded_dilation_hand_value():
    M = HeisenbergModel()
    np.testing.assert_array_equal(M.dilation(0.5, [2, 0, 4]), [1.0, 0.0, 1.0])
    g = np.array([0.3, -0.4, 0.2])
    np.testing.assert_array_equal(M.dilation(1.0, g), g)


def test_heisenberg_gauge_on_center():
    M = HeisenbergModel()
    assert M.norm([0.0, 0.0, 2.25]) == pytest.approx(1.5, rel=1e-15)
    assert M.norm(M.identity()) == 0.0


@given(g=coord3, h=coord3, k=coord3)
def test_heisenberg_associativity(g, h, k):
    M = HeisenbergModel()
    g, h, k = np.array(g), np.array(h), np.array(k)
    lhs = M.mul(M.mul(g, h), k)
    rhs = M.mul(g, M.mul(h, k))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


@given(g=coord3, h=coord3, eps=st.floats(0.05, 1.0))
def test_heisenberg_dilation_is_morphism(g, h, eps):
    M = HeisenbergModel()
    g, h = np.array(g), np.array(h)
    lhs = M.dilation(eps, M.mul(g, h))
    rhs = M.mul(M.dilation(eps, g), M.dilation(eps, h))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


@given(g=coord3, h=coord3)
def test_heisenberg_gauge_subadditive(g, h):
    M = HeisenbergModel()
    g, h = np.array(g), np.array(h)
    assert M.norm(M.mul(g, h)) <= M.norm(g) + M.norm(h) + 1e-12


def test_heisenberg_left_diff_matches_product_form(rng):
    M = HeisenbergModel()
    p = M.sample_element(rng, 64, 1.0)
    q = M.sample_element(rng, 64, 1.0)
    np.testing.assert_allclose(M.left_diff(p, q), M.mul(M.inv(p), q), atol=1e-14)


# -- step-2 models ------------------------------------------------------------

def test_step2_requires_antisymmetric_bracket():
    B = np.zeros((2, 2, 1))
    B[0, 1, 0] = 1.0  # missing the mirrored entry
    with pytest.raises(InvalidModel):
        Step2CarnotModel(2, 1, B)


def test_step2_matches_heisenberg_law(rng):
    M = HeisenbergModel()
    M2 = Step2CarnotModel(2, 1, heisenberg_bracket())
    g = M.sample_element(rng, 32, 1.0)
    h = M.sample_element(rng, 32, 1.0)
    np.testing.assert_array_equal(M2.mul(g, h), M.mul(g, h))
    np.testing.assert_array_equal(M2.dilation(0.35, g), M.dilation(0.35, g))


def test_step2_group_laws_sampled(rng):
    M = random_step2(3, 2, seed=7)
    g = M.sample_element(rng, 1000, 1.5)
    h = M.sample_element(rng, 1000, 1.5)
    k = M.sample_element(rng, 1000, 1.5)
    assoc = np.abs(M.mul(M.mul(g, h), k) - M.mul(g, M.mul(h, k)))
    assert np.max(assoc) <= 1e-12
    np.testing.assert_array_equal(M.mul(g, M.inv(g)), np.zeros_like(g))


def test_step2_gauge_calibration_is_subadditive(rng):
    M = random_step2(3, 2, seed=7)
    assert 0.0 < M.gauge_c <= 1.0
    g = M.sample_element(rng, 10000, 2.0)
    h = M.sample_element(rng, 10000, 2.0)
    defect = M.norm(M.mul(g, h)) - M.norm(g) - M.norm(h)
    assert np.max(defect) <= 1e-12


def test_step2_gauge_homogeneous(rng):
    M = random_step2(3, 2, seed=7)
    g = M.sample_element(rng, 200, 1.5)
    for k in range(1, 8):
        eps = 2.0**-k
        np.testing.assert_allclose(M.norm(M.dilation(eps, g)), eps * M.norm(g), rtol=1e-12)


def test_step2_descriptor_roundtrip():
    M = random_step2(3, 2, seed=11)
    M2 = model_from_descriptor(M.descriptor())
    assert M2.gauge_c == pytest.approx(M.gauge_c)
    np.testing.assert_array_equal(M2.bracket, M.bracket)


# -- Euclidean ----------------------------------------------------------------

@pytest.mark.parametrize("p", [1.0, 2.0, np.inf])
def test_euclidean_norm_variants(p):
    M = EuclideanModel(2, p)
    v = np.array([3.0, -4.0])
    expected = {1.0: 7.0, 2.0: 5.0, np.inf: 4.0}[p]
    assert M.norm(v) == pytest.approx(expected)


def test_euclidean_rejects_bad_parameters():
    with pytest.raises(InvalidModel):
        EuclideanModel(0)
    with pytest.raises(InvalidModel):
        EuclideanModel(2, 0.5)


def test_euclidean_structure_recovers_affine_formula(euclid2, rng):
    x = euclid2.sample(rng, 16, 1.0)
    y = euclid2.sample_near(rng, x, 1.0)
    for eps in (0.25, 0.8):
        np.testing.assert_allclose(
            euclid2.dilate(x, eps, y), x + eps * (y - x), atol=1e-15
        )


# -- distances ----------------------------------------------------------------

def test_group_distance_left_invariant(heis, rng):
    M = heis.model
    x = heis.sample(rng, 64, 0.5)
    y = heis.sample_near(rng, x, 0.5)
    g = M.sample_element(rng, 64, 0.5)
    moved = heis.dist(M.mul(g, x), M.mul(g, y))
    np.testing.assert_allclose(moved, heis.dist(x, y), rtol=1e-10)


def test_metric_axioms_sampled(group_structures, sphere, rng):
    for S in list(group_structures.values()) + [sphere]:
        x = S.sample(rng, 50, 0.4)
        y = S.sample_near(rng, x, 0.4)
        z = S.sample_near(rng, x, 0.4)
        np.testing.assert_allclose(S.dist(x, y), S.dist(y, x), rtol=1e-11, atol=1e-13)
        assert np.max(S.dist(x, x)) == 0.0
        triangle = S.dist(x, z) - (S.dist(x, y) + S.dist(y, z))
        assert np.max(triangle) <= 1e-12


# -- sphere -------------------------------------------------------------------

def _slerp(x, y, t):
    # independent interpolation oracle on the unit sphere
    dot = np.clip(np.dot(x, y), -1.0, 1.0)
    theta = np.arccos(dot)
    return (np.sin((1 - t) * theta) * x + np.sin(t * theta) * y) / np.sin(theta)


def test_sphere_dilate_matches_slerp(sphere, rng):
    x = sphere.sample(rng, 12, 0.4)
    y = sphere.sample_near(rng, x, 0.4)
    for t in (0.25, 0.5, 0.75):
        got = sphere.dilate(x, t, y)
        want = np.stack([_slerp(a, b, t) for a, b in zip(x, y)])
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_sphere_exp_log_roundtrip(sphere, rng):
    M = sphere.model
    x = sphere.sample(rng, 20, 0.5)
    y = sphere.sample_near(rng, x, 0.5)
    np.testing.assert_allclose(M.exp(x, M.log(x, y)), y, atol=1e-12)
    assert np.max(np.abs(np.linalg.norm(M.log(x, y), axis=-1) - M.distance(x, y))) <= 1e-12


def test_sphere_rejects_off_sphere_and_out_of_chart_points(sphere):
    with pytest.raises(DomainViolation):
        sphere.as_point([0.0, 0.0, 0.5])
    with pytest.raises(ChartViolation):
        sphere.as_point([0.0, 0.0, -1.0])


def test_sphere_dilating_toward_antipode_fails(sphere):
    x = np.array([0.0, 0.0, 1.0])
    with pytest.raises(ChartViolation):
        sphere.dilate(x, 0.5, -x)


def test_sphere_expansion_can_leave_chart(sphere):
    x = np.array([0.0, 0.0, 1.0])
    y = np.array([np.sin(1.2), 0.0, np.cos(1.2)])
    with pytest.raises(ChartViolation):
        sphere.dilate(x, 2.0, y)


def test_sphere_has_no_group(sphere):
    with pytest.raises(NotLinearModel):
        sphere.require_group()


def test_sphere_invalid_parameters():
    with pytest.raises(InvalidModel):
        SphereModel(radius=-1.0)
    with pytest.raises(InvalidModel):
        SphereModel(base=(0.0, 0.0, 0.0))


# -- factory + descriptors ----------------------------------------------------

def test_make_structure_dispatch():
    assert make_dilatation_structure(EuclideanModel(2)).linearity_flag == "exact"
    assert make_dilatation_structure(SphereModel()).linearity_flag == "none"
    with pytest.raises(InvalidModel):
        make_dilatation_structure(object())


def test_model_from_descriptor_variants():
    assert isinstance(model_from_descriptor({"kind": "heisenberg"}), HeisenbergModel)
    m = model_from_descriptor({"kind": "euclidean", "dim": 3, "p": 1})
    assert (m.dim, m.p) == (3, 1.0)
    assert isinstance(model_from_descriptor({"kind": "sphere", "radius": 2.0}), SphereModel)
    with pytest.raises(InvalidModel):
        model_from_descriptor({"kind": "torus"})
    with pytest.raises(InvalidModel):
        model_from_descriptor({})


def test_dimension_checks(heis):
    with pytest.raises(DimensionMismatch):
        heis.model.mul([1.0, 2.0], [0.0, 0.0])
