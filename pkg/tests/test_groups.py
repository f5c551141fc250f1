import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carnot_liouville.errors import ConfigError
from carnot_liouville.groups import (Region, custom_group, custom_norm, dilate, euclidean_group,
                                     gauge_norm, heisenberg_group, norm_equivalence_constant,
                                     sampled_grad_sup)

coord = st.floats(-5, 5, allow_nan=False)
scale = st.floats(0.05, 20)


def test_heisenberg_dimensions():
    for n in (1, 2, 3):
        G = heisenberg_group(n)
        assert G.hom_dim == 2 * n + 2
        assert G.ambient_dim == 2 * n + 1
        assert G.layer_dims == (2 * n, 1)


def test_heisenberg_law_examples():
    H = heisenberg_group(1)
    np.testing.assert_array_equal(H.compose([0, 0, 0], [1.5, -2, 3]), [1.5, -2, 3])
    np.testing.assert_array_equal(H.compose([1, 0, 0], [0, 1, 0]), [1, 1, -2])


def test_heisenberg_frame_rows():
    H = heisenberg_group(1)
    M = H.frame_matrix(np.array([0.3, -0.7, 2.0]))
    np.testing.assert_allclose(M, [[1, 0, 2 * -0.7], [0, 1, -2 * 0.3]])


def test_euclidean_basics():
    G = euclidean_group(3)
    assert G.hom_dim == 3 and G.step == 1
    np.testing.assert_array_equal(dilate(G, 2, [1, 1, 1]), [2, 2, 2])
    x = np.array([0.2, -1.0, 4.0])
    np.testing.assert_array_equal(G.compose(x, -x), np.zeros(3))


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_bad_dimensions_rejected(bad):
    with pytest.raises(ConfigError):
        heisenberg_group(bad)
    with pytest.raises(ConfigError):
        euclidean_group(bad)


def test_dilate_examples():
    H = heisenberg_group(1)
    np.testing.assert_array_equal(dilate(H, 3, [1, 1, 1]), [3, 3, 9])
    x = np.array([0.4, -2.0, 1.1])
    np.testing.assert_array_equal(dilate(H, 1, x), x)
    with pytest.raises(ConfigError):
        dilate(H, 0, x)


def test_gauge_values():
    H = heisenberg_group(1)
    S = gauge_norm(H)
    assert S([1, 0, 0]) == pytest.approx(1.0)
    assert S([0, 0, 1]) == pytest.approx(1.0)
    for R in (0.5, 2.0, 7.0):
        assert S(dilate(H, R, [1, 0, 0])) == pytest.approx(R)


@given(st.lists(coord, min_size=3, max_size=3), st.lists(coord, min_size=3, max_size=3), scale)
def test_dilation_is_automorphism_h1(x, y, R):
    H = heisenberg_group(1)
    lhs = dilate(H, R, H.compose(x, y))
    rhs = H.compose(dilate(H, R, x), dilate(H, R, y))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(lhs).max()))


@given(st.lists(coord, min_size=5, max_size=5), st.lists(coord, min_size=5, max_size=5), scale)
def test_dilation_is_automorphism_h2(x, y, R):
    H = heisenberg_group(2)
    lhs = dilate(H, R, H.compose(x, y))
    rhs = H.compose(dilate(H, R, x), dilate(H, R, y))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(lhs).max()))


@given(st.lists(coord, min_size=3, max_size=3))
def test_inverse_and_identity(x):
    H = heisenberg_group(1)
    np.testing.assert_allclose(H.compose(x, H.inverse(x)), np.zeros(3), atol=1e-12)
    np.testing.assert_allclose(H.compose(H.identity(), x), x)


@given(st.lists(coord, min_size=3, max_size=3).filter(lambda v: max(map(abs, v)) > 1e-3), scale)
def test_gauge_homogeneous_and_symmetric(x, R):
    H = heisenberg_group(1)
    S = gauge_norm(H)
    s = float(S(x))
    assert float(S(dilate(H, R, x))) == pytest.approx(R * s, rel=1e-12)
    assert float(S(H.inverse(x))) == pytest.approx(s, rel=1e-12)
    assert s > 0


def test_gauge_zero_only_at_origin():
    S = gauge_norm(heisenberg_group(1))
    assert S([0, 0, 0]) == 0.0
    assert S([0, 0, 1e-8]) > 0


def test_gradient_bound_matches_formula():
    # |grad_H S| = |z|/S on H^1, maximal (=1) on t = 0
    H = heisenberg_group(1)
    S = gauge_norm(H)
    rng = np.random.default_rng(3)
    x = rng.normal(size=(500, 3))
    g = np.linalg.norm(S.horizontal_gradient(x), axis=-1)
    np.testing.assert_allclose(g, np.linalg.norm(x[:, :2], axis=-1) / S(x), rtol=1e-12)
    assert S.grad_sup_bound == 1.0
    assert sampled_grad_sup(H, S) == pytest.approx(1.1, rel=1e-3)


def test_norm_equivalence_finite():
    for G in (euclidean_group(3), heisenberg_group(1)):
        C = norm_equivalence_constant(G, gauge_norm(G))
        assert math.isfinite(C) and C >= 1.0


def _engel_like():
    # free step-2 group on R^3 written as H^1 with a rescaled center: t' = t / 2
    def law(a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        t = a[..., 2] + b[..., 2] + (b[..., 0] * a[..., 1] - a[..., 0] * b[..., 1])
        return np.stack([a[..., 0] + b[..., 0], a[..., 1] + b[..., 1], t], axis=-1)

    def frame(x):
        x = np.asarray(x, float)
        M = np.zeros(x.shape[:-1] + (2, 3))
        M[..., 0, 0] = 1
        M[..., 0, 2] = x[..., 1]
        M[..., 1, 1] = 1
        M[..., 1, 2] = -x[..., 0]
        return M

    return custom_group("H1-half", (2, 1), law, lambda x: -np.asarray(x, float), frame)


def test_custom_group_and_factorial_norm():
    G = _engel_like()
    assert G.hom_dim == 4 and G.kind == "custom"
    S = gauge_norm(G)
    assert S.name == "factorial-exponent"
    x = np.array([0.3, -0.2, 0.5])
    assert float(S(dilate(G, 2.5, x))) == pytest.approx(2.5 * float(S(x)), rel=1e-12)
    assert S.grad_bound_source.startswith("sampled")


def test_custom_norm_wraps_sampled_data():
    G = euclidean_group(2)
    S = custom_norm(G, "linf", lambda x: np.max(np.abs(np.asarray(x)), axis=-1))
    assert np.all(S.unit_box >= 1.0)
    assert S.grad_sup_bound >= 1.0


def test_region_membership_and_volume_factor():
    B, A = Region.ball(2.0), Region.annulus(2.0)
    np.testing.assert_array_equal(B.contains([1.0, 2.0, 3.0]), [True, False, False])
    np.testing.assert_array_equal(A.contains([2.0, 3.0, 4.0]), [False, True, False])
    assert A.volume_factor(4) == pytest.approx(15 * 16)
    with pytest.raises(ConfigError):
        Region("cube", 1.0)
    with pytest.raises(ConfigError):
        Region.ball(0.0)
