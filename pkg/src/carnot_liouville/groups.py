"""Homogeneous Carnot groups on R^N: group law, dilations, frames and norms.

Points are dense coordinate arrays of shape ``(N,)`` or ``(M, N)``; every map
here is vectorized over the leading axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError

ArrayMap = Callable[[np.ndarray], np.ndarray]


def _as_points(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class CarnotGroup:
    """A homogeneous Carnot group ``(R^N, law, dilations)``.

    ``frame(x)`` returns the horizontal frame matrix with shape ``(..., l, N)``
    where ``l = layer_dims[0]``; row ``i`` holds the coefficients of ``X_i``
    in the ambient basis.
    """

    name: str
    layer_dims: tuple[int, ...]
    law: Callable[[np.ndarray, np.ndarray], np.ndarray]
    inverse_map: ArrayMap
    frame: ArrayMap
    kind: str = "custom"

    def __post_init__(self):
        if not self.layer_dims or any(int(n) < 1 for n in self.layer_dims):
            raise ConfigError(f"layer dims must be positive integers, got {self.layer_dims}")

    @property
    def ambient_dim(self) -> int:
        return int(sum(self.layer_dims))

    @property
    def step(self) -> int:
        return len(self.layer_dims)

    @property
    def horizontal_dim(self) -> int:
        return int(self.layer_dims[0])

    @property
    def hom_dim(self) -> int:
        return int(sum((i + 1) * n for i, n in enumerate(self.layer_dims)))

    @property
    def degrees(self) -> np.ndarray:
        """Homogeneity degree of each ambient coordinate."""
        return np.repeat(np.arange(1, self.step + 1), self.layer_dims).astype(float)

    def layers(self, x) -> list[np.ndarray]:
        x = _as_points(x)
        bounds = np.cumsum((0,) + tuple(self.layer_dims))
        return [x[..., bounds[i]:bounds[i + 1]] for i in range(self.step)]

    def compose(self, x, y) -> np.ndarray:
        return self.law(_as_points(x), _as_points(y))

    def inverse(self, x) -> np.ndarray:
        return self.inverse_map(_as_points(x))

    def identity(self) -> np.ndarray:
        return np.zeros(self.ambient_dim)

    def dilate(self, R: float, x) -> np.ndarray:
        return dilate(self, R, x)

    def frame_matrix(self, x) -> np.ndarray:
        return self.frame(_as_points(x))

    def describe(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "N": self.ambient_dim,
            "step": self.step,
            "layer_dims": list(self.layer_dims),
            "Q": self.hom_dim,
        }


def dilate(G: CarnotGroup, R: float, x) -> np.ndarray:
    """Apply ``delta_R``: layer ``i`` is scaled by ``R**i``."""
    if not R > 0:
        raise ConfigError(f"dilation factor must be positive, got {R}")
    return _as_points(x) * np.power(float(R), G.degrees)


def euclidean_group(N: int) -> CarnotGroup:
    if int(N) != N or N < 1:
        raise ConfigError(f"Euclidean dimension must be a positive integer, got {N}")
    N = int(N)

    def frame(x):
        x = _as_points(x)
        return np.broadcast_to(np.eye(N), x.shape[:-1] + (N, N))

    return CarnotGroup(
        name=f"R^{N}",
        layer_dims=(N,),
        law=lambda x, y: x + y,
        inverse_map=lambda x: -x,
        frame=frame,
        kind="euclidean",
    )


def heisenberg_group(n: int) -> CarnotGroup:
    """H^n on R^{2n+1} with coordinates (x_1..x_n, y_1..y_n, t).

    X_i = d/dx_i + 2 y_i d/dt,  Y_i = d/dy_i - 2 x_i d/dt.
    """
    if int(n) != n or n < 1:
        raise ConfigError(f"Heisenberg index must be a positive integer, got {n}")
    n = int(n)

    def law(a, b):
        xa, ya, ta = a[..., :n], a[..., n:2 * n], a[..., 2 * n]
        xb, yb, tb = b[..., :n], b[..., n:2 * n], b[..., 2 * n]
        t = ta + tb + 2.0 * np.sum(xb * ya - xa * yb, axis=-1)
        return np.concatenate([xa + xb, ya + yb, t[..., None]], axis=-1)

    def frame(p):
        p = _as_points(p)
        out = np.zeros(p.shape[:-1] + (2 * n, 2 * n + 1))
        idx = np.arange(n)
        out[..., idx, idx] = 1.0
        out[..., n + idx, n + idx] = 1.0
        out[..., idx, 2 * n] = 2.0 * p[..., n:2 * n]
        out[..., n + idx, 2 * n] = -2.0 * p[..., :n]
        return out

    return CarnotGroup(
        name=f"H^{n}",
        layer_dims=(2 * n, 1),
        law=law,
        inverse_map=lambda x: -x,
        frame=frame,
        kind="heisenberg",
    )


def custom_group(name: str, layer_dims, law, inverse, frame) -> CarnotGroup:
    """Wrap a user-supplied law/frame (the group law is not derived here)."""
    return CarnotGroup(name=name, layer_dims=tuple(int(n) for n in layer_dims),
                       law=law, inverse_map=inverse, frame=frame, kind="custom")


@dataclass(frozen=True, eq=False)
class HomogeneousNorm:
    """A homogeneous norm ``S`` with the data quadrature needs.

    ``unit_box`` holds coordinate half-widths of a Euclidean box containing
    ``B_1``; the box around ``B_R`` is obtained by dilation.
    ``grad_sup_bound`` bounds ``|grad_L S|`` from above; ``grad_bound_source``
    records whether it is exact or sampled.
    """

    name: str
    evaluate: ArrayMap
    grad_sup_bound: float
    unit_box: np.ndarray
    horizontal_gradient: Optional[ArrayMap] = None
    grad_bound_source: str = "exact"
    notes: tuple[str, ...] = field(default_factory=tuple)

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(_as_points(x))

    def box(self, G: CarnotGroup, R: float) -> np.ndarray:
        return self.unit_box * np.power(float(R), G.degrees)

    def describe(self) -> dict:
        return {"name": self.name, "grad_sup_bound": self.grad_sup_bound,
                "grad_bound_source": self.grad_bound_source}


def _factorial_norm(G: CarnotGroup) -> ArrayMap:
    r = G.step
    e = 2 * math.factorial(r)

    def S(x):
        total = 0.0
        for i, layer in enumerate(G.layers(x), start=1):
            sq = np.sum(layer * layer, axis=-1)
            total = total + sq ** (e / (2 * i))
        return total ** (1.0 / e)

    return S


def gauge_norm(G: CarnotGroup) -> HomogeneousNorm:
    """Canonical norm of ``G``.

    Euclidean groups get ``|x|``, H^n gets ``((|x|^2+|y|^2)^2 + t^2)^(1/4)``,
    anything else ``(sum_i |xi^(i)|^(2 r!/i))^(1/(2 r!))``.  For all of these
    every layer block has Euclidean length at most 1 on ``B_1``.
    """
    N = G.ambient_dim
    ones = np.ones(N)
    if G.kind == "euclidean":
        def grad(x):
            x = _as_points(x)
            return x / np.linalg.norm(x, axis=-1, keepdims=True)

        return HomogeneousNorm("euclidean", lambda x: np.linalg.norm(_as_points(x), axis=-1),
                               1.0, ones, grad)
    if G.kind == "heisenberg":
        n = G.horizontal_dim // 2

        def S(x):
            x = _as_points(x)
            z2 = np.sum(x[..., :2 * n] ** 2, axis=-1)
            return (z2 * z2 + x[..., 2 * n] ** 2) ** 0.25

        def grad(x):
            x = _as_points(x)
            xs, ys, t = x[..., :n], x[..., n:2 * n], x[..., 2 * n:2 * n + 1]
            z2 = np.sum(x[..., :2 * n] ** 2, axis=-1, keepdims=True)
            s3 = (z2 * z2 + t * t) ** 0.75
            return np.concatenate([(z2 * xs + t * ys) / s3, (z2 * ys - t * xs) / s3], axis=-1)

        # |grad_H S| = |z| / S <= 1
        return HomogeneousNorm("heisenberg-gauge", S, 1.0, ones, grad)
    S = _factorial_norm(G)
    bound = sampled_grad_sup(G, S)
    return HomogeneousNorm("factorial-exponent", S, bound, ones, None,
                           grad_bound_source="sampled (+10%)")


def unit_sphere_points(G: CarnotGroup, S: ArrayMap, n: int, rng) -> np.ndarray:
    """Random points with ``S = 1``, obtained by dilating Gaussian draws."""
    z = rng.standard_normal((n, G.ambient_dim))
    s = S(z)
    z = z[s > 0]
    s = s[s > 0]
    return z * np.power(1.0 / s[:, None], G.degrees)


def sampled_grad_sup(G: CarnotGroup, S: ArrayMap, n: int = 4000, seed: int = 0,
                     h: float = 1e-6) -> float:
    """Estimate ``sup |grad_L S|`` on the unit sphere, inflated by 10%.

    ``|grad_L S|`` is homogeneous of degree 0, so the unit sphere suffices.
    """
    rng = np.random.default_rng(seed)
    pts = unit_sphere_points(G, S, n, rng)
    N = G.ambient_dim
    grad = np.empty_like(pts)
    for j in range(N):
        e = np.zeros(N)
        e[j] = h
        grad[:, j] = (S(pts + e) - S(pts - e)) / (2 * h)
    hg = np.einsum("mij,mj->mi", G.frame_matrix(pts), grad)
    vals = np.linalg.norm(hg, axis=-1)
    vals = vals[np.isfinite(vals)]
    return float(1.1 * vals.max())


def custom_norm(G: CarnotGroup, name: str, evaluate: ArrayMap, samples: int = 4000,
                seed: int = 0, horizontal_gradient: Optional[ArrayMap] = None) -> HomogeneousNorm:
    """Wrap a user norm; the bounding box and gradient bound are sampled."""
    rng = np.random.default_rng(seed)
    pts = unit_sphere_points(G, evaluate, samples, rng)
    box = 1.1 * np.max(np.abs(pts), axis=0)
    bound = sampled_grad_sup(G, evaluate, samples, seed)
    return HomogeneousNorm(name, evaluate, bound, box, horizontal_gradient,
                           grad_bound_source="sampled (+10%)",
                           notes=("bounding box sampled on the unit sphere (+10%)",))


def norm_equivalence_constant(G: CarnotGroup, S: HomogeneousNorm, n: int = 2000,
                              seed: int = 0) -> float:
    """Empirical ``C`` with ``|x|/C <= S(x) <= C |x|^(1/r)`` over ``S(x) <= 1``."""
    rng = np.random.default_rng(seed)
    pts = unit_sphere_points(G, S, n, rng)
    radii = rng.uniform(1e-3, 1.0, size=len(pts))
    pts = pts * np.power(radii[:, None], G.degrees)
    s = S(pts)
    e = np.linalg.norm(pts, axis=-1)
    upper = np.max(s / e ** (1.0 / G.step))
    lower = np.max(e / s)
    return float(max(upper, lower))


@dataclass(frozen=True)
class Region:
    """``B_R = {S < R}`` or ``A_R = B_2R minus closure(B_R)``."""

    kind: str
    radius: float

    def __post_init__(self):
        if self.kind not in ("ball", "annulus"):
            raise ConfigError(f"region kind must be 'ball' or 'annulus', got {self.kind!r}")
        if not self.radius > 0:
            raise ConfigError(f"region radius must be positive, got {self.radius}")

    @classmethod
    def ball(cls, R: float) -> "Region":
        return cls("ball", float(R))

    @classmethod
    def annulus(cls, R: float) -> "Region":
        return cls("annulus", float(R))

    @property
    def outer_radius(self) -> float:
        return self.radius if self.kind == "ball" else 2.0 * self.radius

    def contains(self, s) -> np.ndarray:
        """Membership given norm values ``s = S(x)``."""
        s = np.asarray(s)
        if self.kind == "ball":
            return s < self.radius
        return (s > self.radius) & (s < 2.0 * self.radius)

    def volume_factor(self, Q: int) -> float:
        """``|region| / w_S``."""
        if self.kind == "ball":
            return self.radius ** Q
        return (2.0 ** Q - 1.0) * self.radius ** Q
