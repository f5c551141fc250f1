import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from carnot_liouville.calculus import (FDScheme, OperatorSpec, ScalarField, ambient_gradient,
                                       apply_operator, coercivity_check, constant_field,
                                       horizontal_gradient, p_laplace_operator, p_sublaplacian,
                                       power_flux)
from carnot_liouville.errors import ConfigError, DegenerateGradientError, EvaluationError
from carnot_liouville.groups import euclidean_group, gauge_norm, heisenberg_group


def sq_norm(N=None):
    return ScalarField(lambda x: np.sum(np.asarray(x) ** 2, axis=-1), name="|x|^2")


def test_euclidean_gradient_of_square():
    G = euclidean_group(4)
    g = horizontal_gradient(G, sq_norm(), np.eye(4)[0])
    np.testing.assert_allclose(g, [2, 0, 0, 0], atol=1e-8)


def test_heisenberg_gradient_of_t():
    H = heisenberg_group(1)
    t = ScalarField(lambda x: np.asarray(x)[..., 2], name="t")
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 3))
    g = horizontal_gradient(H, t, x)
    np.testing.assert_allclose(g, np.stack([2 * x[:, 1], -2 * x[:, 0]], axis=-1), atol=1e-8)


def test_gauge_gradient_norm_is_one_at_unit_point():
    H = heisenberg_group(1)
    S = gauge_norm(H)
    u = ScalarField(S, None, name="S")
    g = horizontal_gradient(H, u, np.array([1.0, 0.0, 0.0]))
    assert np.linalg.norm(g) == pytest.approx(1.0, rel=1e-7)


def test_gauge_gradient_against_symbolic_frame():
    x, y, t = sp.symbols("x y t", real=True)
    S = ((x ** 2 + y ** 2) ** 2 + t ** 2) ** sp.Rational(1, 4)
    X = sp.diff(S, x) + 2 * y * sp.diff(S, t)
    Y = sp.diff(S, y) - 2 * x * sp.diff(S, t)
    fX, fY = sp.lambdify((x, y, t), X, "numpy"), sp.lambdify((x, y, t), Y, "numpy")
    H = heisenberg_group(1)
    rng = np.random.default_rng(1)
    pts = rng.uniform(0.3, 1.5, (200, 3)) * rng.choice([-1, 1], (200, 3))
    ref = np.stack([fX(*pts.T), fY(*pts.T)], axis=-1)
    closed = gauge_norm(H).horizontal_gradient(pts)
    fd = horizontal_gradient(H, ScalarField(gauge_norm(H), None), pts)
    np.testing.assert_allclose(closed, ref, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(fd, ref, rtol=1e-6, atol=1e-9)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nan_is_hard_error():
    G = euclidean_group(2)
    bad = ScalarField(lambda x: np.log(np.asarray(x)[..., 0]), name="log x")
    with pytest.raises(EvaluationError) as e:
        horizontal_gradient(G, bad, np.array([[-1.0, 0.0]]))
    assert e.value.point is not None


@pytest.mark.parametrize("N", [2, 3, 5])
def test_laplacian_of_square(N):
    G = euclidean_group(N)
    x = np.random.default_rng(N).normal(size=(20, N))
    np.testing.assert_allclose(p_sublaplacian(G, sq_norm(), x, 2.0), 2 * N, rtol=1e-6)


@pytest.mark.parametrize("N,p", [(3, 2.0), (3, 1.5), (4, 3.0), (5, 2.5)])
def test_p_fundamental_solution(N, p):
    G = euclidean_group(N)
    k = (p - N) / (p - 1)
    u = ScalarField(lambda x: np.linalg.norm(x, axis=-1) ** k, name="fund")
    x = np.random.default_rng(7).normal(size=(30, N))
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    x *= np.random.default_rng(8).uniform(0.8, 1.5, (30, 1))
    vals = p_sublaplacian(G, u, x, p)
    # scale: the individual divergence terms are O(1) on this shell
    assert np.max(np.abs(vals)) < 1e-4


def test_heisenberg_fundamental_solution():
    H = heisenberg_group(1)
    S = gauge_norm(H)
    u = ScalarField(lambda x: S(x) ** -2.0, name="S^-2")
    assert abs(p_sublaplacian(H, u, np.array([1.0, 0.0, 0.0]), 2.0)) < 1e-4
    # the symbolic sub-Laplacian of S^-2 vanishes identically off the origin
    x, y, t = sp.symbols("x y t", real=True)
    f = ((x ** 2 + y ** 2) ** 2 + t ** 2) ** sp.Rational(-1, 2)
    Xop = lambda g: sp.diff(g, x) + 2 * y * sp.diff(g, t)
    Yop = lambda g: sp.diff(g, y) - 2 * x * sp.diff(g, t)
    assert sp.simplify(Xop(Xop(f)) + Yop(Yop(f))) == 0


def test_apply_operator_matches_p_sublaplacian():
    H = heisenberg_group(1)
    S = gauge_norm(H)
    u = ScalarField(lambda x: (1 + S(x) ** 2) ** -0.5, name="u")
    x = np.random.default_rng(2).uniform(-1, 1, (100, 3))
    for p in (2.0, 3.0):
        a = apply_operator(H, p_laplace_operator(H, p), u, x)
        b = p_sublaplacian(H, u, x, p)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_identity_flux_is_laplacian():
    G = euclidean_group(3)
    A = OperatorSpec(2.0, lambda x, t, xi: xi, ambient_dim=3, horizontal_dim=3)
    x = np.random.default_rng(4).normal(size=(10, 3))
    np.testing.assert_allclose(apply_operator(G, A, sq_norm(), x), 6.0, rtol=1e-6)


def test_anisotropic_flux():
    G = euclidean_group(3)
    D = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 3.0]])
    A = OperatorSpec(2.0, lambda x, t, xi: xi @ D.T, ambient_dim=3, horizontal_dim=3)
    x = np.random.default_rng(5).normal(size=(10, 3))
    # div(D grad |x|^2) = 2 tr D
    np.testing.assert_allclose(apply_operator(G, A, sq_norm(), x), 2 * np.trace(D), rtol=1e-6)


def test_anisotropic_flux_heisenberg_symbolic():
    x, y, t = sp.symbols("x y t", real=True)
    D = sp.Matrix([[2, sp.Rational(1, 2)], [sp.Rational(1, 2), 1]])
    u = x ** 2 + y ** 2 + t ** 2
    Xop = lambda g: sp.diff(g, x) + 2 * y * sp.diff(g, t)
    Yop = lambda g: sp.diff(g, y) - 2 * x * sp.diff(g, t)
    grad = sp.Matrix([Xop(u), Yop(u)])
    F = D * grad
    ref = sp.lambdify((x, y, t), Xop(F[0]) + Yop(F[1]), "numpy")
    H = heisenberg_group(1)
    Dn = np.array(D.tolist(), dtype=float)
    A = OperatorSpec(2.0, lambda xx, tt, xi: xi @ Dn.T, ambient_dim=3, horizontal_dim=2)
    pts = np.random.default_rng(6).uniform(-1, 1, (20, 3))
    uf = ScalarField(lambda p: np.sum(np.asarray(p) ** 2, axis=-1))
    np.testing.assert_allclose(apply_operator(H, A, uf, pts), ref(*pts.T), rtol=1e-6)


def test_degenerate_gradient_rejected_for_small_p():
    G = euclidean_group(2)
    with pytest.raises(DegenerateGradientError):
        p_sublaplacian(G, constant_field(1.0, G), np.zeros((1, 2)), 1.5)


def test_fd_scheme_validation():
    with pytest.raises(ConfigError):
        FDScheme(step=0)
    with pytest.raises(ConfigError):
        FDScheme(eps_grad=-1)
    with pytest.raises(ConfigError):
        FDScheme(order=4)


def test_order_two_convergence():
    f = lambda x: np.sin(np.asarray(x)[..., 0]) * np.exp(np.asarray(x)[..., 1])
    x = np.array([[0.3, 0.2]])
    exact = np.cos(0.3) * np.exp(0.2)
    e1 = abs(ambient_gradient(f, x, 1e-2)[0, 0] - exact)
    e2 = abs(ambient_gradient(f, x, 5e-3)[0, 0] - exact)
    assert 3.5 <= e1 / e2 <= 4.5


def test_euclidean_frame_is_plain_gradient():
    G = euclidean_group(3)
    u = ScalarField(lambda x: np.sin(np.asarray(x)).sum(axis=-1))
    x = np.random.default_rng(9).normal(size=(5, 3))
    np.testing.assert_array_equal(horizontal_gradient(G, u, x), ambient_gradient(u, x, 1e-4))


@given(st.floats(1.1, 6.0))
def test_power_flux_is_spc_with_equality(p):
    A = OperatorSpec(p, power_flux(p), ambient_dim=3, horizontal_dim=2)
    r = coercivity_check(A, samples=300)
    assert r.classification == "S-p-C"
    assert abs(r.strong_lower) < 1e-9 and abs(r.strong_upper) < 1e-9


def test_zero_flux_is_weak_only():
    A = OperatorSpec(2.0, lambda x, t, xi: np.zeros_like(xi), ambient_dim=3, horizontal_dim=2)
    r = coercivity_check(A, samples=200)
    assert r.classification == "W-p-C"
    assert r.strong_lower == pytest.approx(-1.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_doubled_flux_constants(p):
    pc = p / (p - 1)
    flux = lambda x, t, xi: 2 * np.linalg.norm(xi, axis=-1, keepdims=True) ** (p - 2) * xi
    A = OperatorSpec(p, flux, h=2.0, k=2.0 ** (1 - pc), ambient_dim=3, horizontal_dim=2)
    r = coercivity_check(A, samples=300)
    assert r.classification == "S-p-C"
    assert abs(r.strong_lower) < 1e-9 and abs(r.strong_upper) < 1e-9


def test_operator_spec_validation():
    with pytest.raises(ConfigError):
        OperatorSpec(1.0, power_flux(2.0))
    with pytest.raises(ConfigError):
        OperatorSpec(2.0, power_flux(2.0), coercivity_class="X")
    with pytest.raises(ConfigError):
        coercivity_check(OperatorSpec(2.0, power_flux(2.0)), samples=0)
