"""Named candidate fields and source terms used by the checks and the config registry.

Closed-form horizontal gradients are attached where cheap; divergence terms
are always taken by finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .calculus import FDScheme, ScalarField, constant_field, p_sublaplacian
from .cutoffs import norm_gradient
from .errors import ConfigError
from .groups import CarnotGroup, HomogeneousNorm


def euclidean_bubble(G: CarnotGroup, amplitude: float = 1.0, scale: float = 1.0) -> ScalarField:
    """``A (1 + |x/L|^2)^(-(N-2)/2)``; for ``A = L = 1``, ``-Delta u = N(N-2) u^((N+2)/(N-2))``."""
    if G.kind != "euclidean" or G.ambient_dim < 3:
        raise ConfigError("the Euclidean bubble needs R^N with N >= 3")
    N = G.ambient_dim
    k = (N - 2) / 2.0

    def u(x):
        r2 = np.sum((x / scale) ** 2, axis=-1)
        return amplitude * (1.0 + r2) ** (-k)

    def grad(x):
        r2 = np.sum((x / scale) ** 2, axis=-1, keepdims=True)
        return amplitude * (-2.0 * k) * (1.0 + r2) ** (-k - 1.0) * x / scale ** 2

    return ScalarField(u, grad, smoothness=10, name=f"euclidean_bubble(A={amplitude:g},L={scale:g})")


def heisenberg_bubble(G: CarnotGroup, amplitude: float = 1.0) -> ScalarField:
    """``A ((1 + |z|^2)^2 + t^2)^(-n/2)`` on H^n; on H^1, ``-Delta_H u = 4 u^3`` for ``A = 1``."""
    if G.kind != "heisenberg":
        raise ConfigError("the CR bubble lives on a Heisenberg group")
    n = G.horizontal_dim // 2

    def parts(x):
        z2 = np.sum(x[..., :2 * n] ** 2, axis=-1, keepdims=True)
        t = x[..., 2 * n:2 * n + 1]
        D = (1.0 + z2) ** 2 + t * t
        return z2, t, D

    def u(x):
        _, _, D = parts(x)
        return amplitude * D[..., 0] ** (-n / 2.0)

    def grad(x):
        z2, t, D = parts(x)
        xs, ys = x[..., :n], x[..., n:2 * n]
        XD = 4.0 * ((1.0 + z2) * xs + t * ys)
        YD = 4.0 * ((1.0 + z2) * ys - t * xs)
        fac = amplitude * (-n / 2.0) * D ** (-n / 2.0 - 1.0)
        return np.concatenate([fac * XD, fac * YD], axis=-1)

    return ScalarField(u, grad, smoothness=10, name=f"heisenberg_bubble(A={amplitude:g})")


def bubble(G: CarnotGroup, S: HomogeneousNorm, amplitude: float = 1.0, scale: float = 1.0) -> ScalarField:
    if G.kind == "euclidean":
        return euclidean_bubble(G, amplitude, scale)
    if G.kind == "heisenberg":
        return heisenberg_bubble(G, amplitude)
    raise ConfigError(f"no built-in bubble for group kind {G.kind!r}")


def power_decay(G: CarnotGroup, S: HomogeneousNorm, s: float, amplitude: float = 1.0,
                power: float = 2.0, scale: float = 1.0) -> ScalarField:
    """``A (1 + (S/L)^power)^(-s)``."""

    def u(x):
        return amplitude * (1.0 + (S(x) / scale) ** power) ** (-s)

    def grad(x):
        x = np.atleast_2d(x)
        sv = S(x)[:, None] / scale
        with np.errstate(invalid="ignore", divide="ignore"):
            fac = amplitude * (-s) * (1.0 + sv ** power) ** (-s - 1.0) * power * sv ** (power - 1.0) / scale
        return fac * norm_gradient(G, S, x)

    return ScalarField(u, grad if S.horizontal_gradient is not None else None, smoothness=2,
                       name=f"power_decay(s={s:g},power={power:g})")


def inverse_norm_power(S: HomogeneousNorm, k: float = 1.0) -> ScalarField:
    """``S^(-k)``, singular at the origin."""
    return ScalarField(lambda x: S(x) ** (-k), None, smoothness=2, name=f"S^-{k:g}")


def min_fundamental(G: CarnotGroup, S: HomogeneousNorm) -> ScalarField:
    """``min(1, S^(2-Q))``: a minimum of two supersolutions of the sub-Laplacian."""
    Q = G.hom_dim
    return ScalarField(lambda x: np.minimum(1.0, S(x) ** (2.0 - Q)), None, smoothness=0,
                       name="min(1,S^(2-Q))")


def rational_decay(S: HomogeneousNorm) -> ScalarField:
    """``(1 + S^2)^(-1)``."""
    return ScalarField(lambda x: 1.0 / (1.0 + S(x) ** 2), None, smoothness=2, name="(1+S^2)^-1")


@dataclass(frozen=True, eq=False)
class Source:
    """A nonnegative source ``f(x, u, v)``.

    ``scalar`` is the one-variable form when the source depends on a single
    argument (``argument`` names it), which the liminf scans use.
    """

    func: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    name: str = "source"
    scalar: Optional[Callable[[np.ndarray], np.ndarray]] = None
    argument: str = "x,u,v"

    def __call__(self, x, u, v) -> np.ndarray:
        return np.asarray(self.func(x, u, v), dtype=float)


def zero_source() -> Source:
    return Source(lambda x, u, v: np.zeros(len(np.atleast_2d(x))), "zero",
                  lambda t: np.zeros_like(np.asarray(t, dtype=float)), "none")


def power_source(exponent: float, argument: str = "v", coeff: float = 1.0) -> Source:
    """``coeff * w^exponent`` where ``w`` is the named argument (``u`` or ``v``)."""
    if argument not in ("u", "v"):
        raise ConfigError("power source argument must be 'u' or 'v'")

    def scalar(t):
        return coeff * np.asarray(t, dtype=float) ** exponent

    def func(x, u, v):
        return scalar(v if argument == "v" else u)

    return Source(func, f"{coeff:g}*{argument}^{exponent:g}", scalar, argument)


def manufactured_source(G: CarnotGroup, field: ScalarField, p: float,
                        scheme: FDScheme = FDScheme()) -> Source:
    """``max(0, -Delta_{G,p} field)`` evaluated by nested finite differences."""

    def func(x, u, v):
        return np.maximum(0.0, -p_sublaplacian(G, field, np.atleast_2d(x), p, scheme))

    return Source(func, f"-Delta_{{G,{p:g}}}[{field.name}]", None, "x")


FIELD_FACTORIES = {
    "constant": lambda G, S, value=1.0: constant_field(value, G),
    "bubble": lambda G, S, amplitude=1.0, scale=1.0: bubble(G, S, amplitude, scale),
    "power_decay": lambda G, S, s, amplitude=1.0, power=2.0, scale=1.0:
        power_decay(G, S, s, amplitude, power, scale),
    "inverse_norm": lambda G, S, k=1.0: inverse_norm_power(S, k),
    "min_fundamental": lambda G, S: min_fundamental(G, S),
    "rational_decay": lambda G, S: rational_decay(S),
}
