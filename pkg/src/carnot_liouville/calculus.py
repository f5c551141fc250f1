"""Horizontal gradients, divergence-form operators and p-sub-Laplacians.

Everything is central finite differences on top of the frame matrix ``mu``:
``grad_L u = mu grad u`` and ``div_L h = div(mu^T h)``.  Fields and fluxes are
vectorized: they take ``(M, N)`` point arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DegenerateGradientError, require_finite
from .groups import CarnotGroup


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A real function on group points.

    ``gradient`` is an optional closed-form horizontal gradient returning
    ``(M, l)``; when present it is preferred over finite differences.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smoothness: int = 2
    name: str = "field"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.evaluate(x), dtype=float)

    def checked(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return require_finite(self(x), x, self.name)


def constant_field(c: float, G: CarnotGroup) -> ScalarField:
    l = G.horizontal_dim
    return ScalarField(lambda x: np.full(np.shape(x)[:-1], float(c)),
                       lambda x: np.zeros(np.shape(x)[:-1] + (l,)),
                       smoothness=10, name=f"constant({c})")


@dataclass(frozen=True)
class FDScheme:
    """Central-difference settings.

    ``step`` is used for first derivatives, ``nested_step`` for the outer
    and inner differences of divergence evaluations.  ``eps_grad=None`` means
    the floor ``1e-12 * (1 + |grad_L u|)``, applied only when p < 2.
    """

    step: float = 1e-4
    nested_step: float = 1e-3
    eps_grad: Optional[float] = None
    order: int = 2

    def __post_init__(self):
        if not (self.step > 0 and self.nested_step > 0):
            raise ConfigError("finite-difference steps must be positive")
        if self.eps_grad is not None and self.eps_grad < 0:
            raise ConfigError("eps_grad must be nonnegative")
        if self.order != 2:
            raise ConfigError("only second-order central differences are implemented")

    def floor(self, norm):
        if self.eps_grad is not None:
            return np.full_like(norm, self.eps_grad)
        return 1e-12 * (1.0 + norm)


def ambient_gradient(func, x, h: float) -> np.ndarray:
    """Central-difference gradient of ``func`` at ``x`` of shape ``(M, N)``.

    ``func`` may be vector valued with trailing shape ``(K,)``; the result
    then has shape ``(M, K, N)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    M, N = x.shape
    shifts = h * np.eye(N)
    stencil = np.concatenate([x[None] + shifts[:, None], x[None] - shifts[:, None]])
    flat = stencil.reshape(-1, N)
    vals = np.asarray(func(flat), dtype=float)
    require_finite(vals, flat, "stencil")
    vals = vals.reshape((2 * N, M) + vals.shape[1:])
    diff = (vals[:N] - vals[N:]) / (2.0 * h)
    return np.moveaxis(diff, 0, -1)


def horizontal_gradient(G: CarnotGroup, u: ScalarField, x, scheme: FDScheme = FDScheme(),
                        use_closed_form: bool = True, step: Optional[float] = None) -> np.ndarray:
    """``grad_L u(x)`` with shape ``(M, l)`` (or ``(l,)`` for a single point)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if use_closed_form and u.gradient is not None:
        out = np.asarray(u.gradient(pts), dtype=float)
        require_finite(out, pts, f"gradient of {u.name}")
    else:
        grad = ambient_gradient(u, pts, scheme.step if step is None else step)
        out = np.einsum("mij,mj->mi", G.frame_matrix(pts), grad)
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """A divergence-form flux ``A(x, t, xi)`` with its coercivity data.

    ``flux`` takes ``x (M, N)``, ``t (M,)``, ``xi (M, l)`` and returns
    ``(M, l)``.  ``uses_t`` records whether the flux depends on ``t``
    (the ``A(x, xi)`` signature sets it False).
    """

    p: float
    flux: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    coercivity_class: str = "S-p-C"
    h: float = 1.0
    k: float = 1.0
    ambient_dim: int = 3
    horizontal_dim: int = 3
    uses_t: bool = False
    name: str = "operator"

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigError(f"operator exponent must exceed 1, got {self.p}")
        if self.coercivity_class not in ("S-p-C", "W-p-C"):
            raise ConfigError(f"unknown coercivity class {self.coercivity_class!r}")
        if not (self.h > 0 and self.k > 0):
            raise ConfigError("coercivity constants h, k must be positive")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)


def power_flux(p: float, floor=None):
    """``|xi|^(p-2) xi``, with ``|xi|`` floored by ``floor(|xi|)`` when p < 2."""

    def flux(x, t, xi):
        norm = np.linalg.norm(xi, axis=-1, keepdims=True)
        if p == 2.0:
            return np.array(xi, dtype=float)
        if p < 2.0:
            f = floor if floor is not None else FDScheme().floor
            norm = np.maximum(norm, f(norm))
        return norm ** (p - 2.0) * xi

    return flux


def p_laplace_operator(G: CarnotGroup, p: float, scheme: FDScheme = FDScheme()) -> OperatorSpec:
    return OperatorSpec(p=p, flux=power_flux(p, scheme.floor), ambient_dim=G.ambient_dim,
                        horizontal_dim=G.horizontal_dim, name=f"p-sub-Laplacian(p={p})")


def _check_degenerate(G, u, x, p, scheme):
    if p >= 2.0:
        return
    g = horizontal_gradient(G, u, x, scheme, step=scheme.nested_step)
    norm = np.linalg.norm(g, axis=-1)
    bad = norm <= scheme.floor(norm)
    if np.any(bad):
        raise DegenerateGradientError(
            f"|grad_L u| below floor with p={p} < 2", np.atleast_2d(x)[np.argmax(bad)])


def divergence_terms(G: CarnotGroup, A: OperatorSpec, u: ScalarField, x,
                     scheme: FDScheme = FDScheme()) -> np.ndarray:
    """Per-coordinate terms ``d_j (mu^T A)_j`` of ``div_L A(x, u, grad_L u)``.

    Returns shape ``(M, N)``; their sum is the divergence and the sum of their
    absolute values is a natural scale for relative residuals.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _check_degenerate(G, u, x, A.p, scheme)
    h = scheme.nested_step

    def lifted_flux(y):
        xi = horizontal_gradient(G, u, y, scheme, step=h)
        t = u.checked(y)
        F = np.asarray(A.flux(y, t, xi), dtype=float)
        require_finite(F, y, "flux")
        return np.einsum("mij,mi->mj", G.frame_matrix(y), F)

    jac = ambient_gradient(lifted_flux, x, h)  # (M, N, N): d_k V_j
    return np.einsum("mjj->mj", jac)


def apply_operator(G: CarnotGroup, A: OperatorSpec, u: ScalarField, x,
                   scheme: FDScheme = FDScheme()) -> np.ndarray:
    """``div_L A(x, u, grad_L u)`` by nested central differences."""
    single = np.asarray(x).ndim == 1
    out = divergence_terms(G, A, u, x, scheme).sum(axis=-1)
    return out[0] if single else out


def p_sublaplacian(G: CarnotGroup, u: ScalarField, x, p: float,
                   scheme: FDScheme = FDScheme()) -> np.ndarray:
    """``Delta_{G,p} u = div_L(|grad_L u|^(p-2) grad_L u)``."""
    return apply_operator(G, p_laplace_operator(G, p, scheme), u, x, scheme)


@dataclass(frozen=True)
class CoercivityReport:
    """Worst normalized margins over the sampled ``(x, t, xi)`` triples.

    ``strong_lower`` is for ``A.xi >= h|xi|^p``, ``strong_upper`` for
    ``h|xi|^p >= k|A|^p'`` and ``weak`` for ``A.xi >= k|A|^p'``.  Each margin
    is divided by the larger side, so equality gives 0 and a vanishing flux
    against nonzero ``xi`` gives -1.
    """

    strong_lower: float
    strong_upper: float
    weak: float
    classification: str
    samples: int
    uses_t: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _normalized(lhs, rhs):
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.where(scale > 0, (lhs - rhs) / scale, 0.0)
    return float(np.min(m))


def coercivity_check(A: OperatorSpec, samples: int = 1000, seed: int = 0,
                     tol: float = 1e-12) -> CoercivityReport:
    """Sample triples and classify ``A`` as S-p-C, W-p-C or neither."""
    if samples < 1:
        raise ConfigError("coercivity_check needs at least one sample")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (samples, A.ambient_dim))
    t = rng.uniform(-2, 2, samples)
    xi = rng.standard_normal((samples, A.horizontal_dim))
    xi *= np.exp(rng.uniform(np.log(1e-3), np.log(1e3), samples))[:, None]
    F = np.asarray(A.flux(x, t, xi), dtype=float)
    dot = np.sum(F * xi, axis=-1)
    xip = np.linalg.norm(xi, axis=-1) ** A.p
    Fp = np.linalg.norm(F, axis=-1) ** A.p_conj
    lower = _normalized(dot, A.h * xip)
    upper = _normalized(A.h * xip, A.k * Fp)
    weak = _normalized(dot, A.k * Fp)
    if lower >= -tol and upper >= -tol:
        cls = "S-p-C"
    elif weak >= -tol:
        cls = "W-p-C"
    else:
        cls = "none"
    return CoercivityReport(lower, upper, weak, cls, samples, A.uses_t)
