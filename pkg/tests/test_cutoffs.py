import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carnot_liouville.cutoffs import Cutoff, make_cutoff, scaled_test_function
from carnot_liouville.errors import ConfigError
from carnot_liouville.groups import Region, euclidean_group, gauge_norm, heisenberg_group
from carnot_liouville.quadrature import QuadratureBudget, sample_cloud


def test_profile_constant_p2():
    assert make_cutoff(2.0, 2.0).c_profile == 4.0


def test_plateau_and_support():
    c = make_cutoff(2.0)
    assert c(0.5) == 1.0 and c(3.0) == 0.0


def test_p3_scan_bounded_by_27():
    c = make_cutoff(3.0, 3.0)
    t = np.linspace(1.0 + 1e-9, 2.0 - 1e-9, 100_001)
    r = c.ratio(t)
    assert r.max() <= 27.0
    assert r.max() == pytest.approx(27.0, rel=1e-6)


def test_kappa_below_p_rejected():
    with pytest.raises(ConfigError):
        Cutoff(3.0, 2.0)


@given(st.floats(1.05, 6.0), st.floats(0.0, 3.0), st.floats(-3.0, 3.0))
def test_profile_properties(p, extra, t):
    c = make_cutoff(p, p + extra)
    v = float(c(t))
    assert 0.0 <= v <= 1.0
    if abs(t) < 1:
        assert v == 1.0
    if abs(t) > 2:
        assert v == 0.0
    assert float(c.ratio(t)) <= c.c_profile * (1 + 1e-12)


def test_default_kappa():
    assert make_cutoff(1.5).kappa == 2.0
    assert make_cutoff(3.5).kappa == 3.5


@pytest.mark.parametrize("G", [euclidean_group(3), heisenberg_group(1)])
def test_scaled_test_function(G):
    S = gauge_norm(G)
    R = 2.0
    phi = scaled_test_function(G, S, make_cutoff(2.0, 2.0), R)
    x = np.random.default_rng(0).normal(size=(5, G.ambient_dim))
    x = x * np.power(1 / S(x)[:, None], G.degrees)  # unit sphere
    half = x * np.power(R / 2, G.degrees)
    far = x * np.power(3 * R, G.degrees)
    np.testing.assert_array_equal(phi(half), 1.0)
    np.testing.assert_array_equal(phi(far), 0.0)
    assert phi.support_radius == 4.0
    with pytest.raises(ConfigError):
        scaled_test_function(G, S, make_cutoff(2.0), 0.0)


@pytest.mark.parametrize("G", [euclidean_group(3), heisenberg_group(1)])
def test_ratio_bound_on_annulus_samples(G):
    S = gauge_norm(G)
    for p in (2.0, 3.0):
        phi = scaled_test_function(G, S, make_cutoff(p), 1.0)
        cloud = sample_cloud(G, S, 2.0, QuadratureBudget(50_000, 1))
        pts = cloud.points[cloud.mask(Region.annulus(1.0))]
        g = np.linalg.norm(phi.gradient(pts), axis=-1)
        v = phi(pts)
        ok = v > 1e-12
        ratio = g[ok] ** p / v[ok] ** (p - 1)
        assert ratio.max() <= 1.05 * phi.ratio_bound()
        np.testing.assert_allclose(phi.ratio(pts[ok]), ratio, rtol=1e-8, atol=1e-12)


def test_euclidean_fd_scan_p2():
    G = euclidean_group(3)
    S = gauge_norm(G)
    phi = scaled_test_function(G, S, make_cutoff(2.0, 2.0), 1.0)
    from carnot_liouville.calculus import horizontal_gradient

    cloud = sample_cloud(G, S, 2.0, QuadratureBudget(20_000, 2))
    pts = cloud.points[cloud.mask(Region.annulus(1.0))]
    pts = pts[(S(pts) > 1.01) & (S(pts) < 1.99)]
    g = horizontal_gradient(G, phi, pts, use_closed_form=False)
    ratio = np.sum(g ** 2, axis=-1) / phi(pts)
    assert ratio.max() <= 4.0 * 1.05
