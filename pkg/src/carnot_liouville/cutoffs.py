"""Cutoff profiles phi_0 = psi^kappa and the scaled test functions phi_0(S(x)/R)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .calculus import FDScheme, ScalarField, ambient_gradient
from .errors import ConfigError
from .groups import CarnotGroup, HomogeneousNorm


def ramp(t):
    """``psi(t) = min(1, max(0, 2 - |t|))``."""
    return np.clip(2.0 - np.abs(t), 0.0, 1.0)


def ramp_derivative(t):
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    return np.where((a > 1.0) & (a < 2.0), -np.sign(t), 0.0)


@dataclass(frozen=True)
class Cutoff:
    """``phi_0 = psi^kappa`` with ``c_profile = sup |phi_0'|^p / phi_0^(p-1) = kappa^p``."""

    p: float
    kappa: float

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigError(f"cutoff exponent p must exceed 1, got {self.p}")
        if self.kappa < self.p:
            raise ConfigError(f"kappa={self.kappa} < p={self.p}: the profile ratio would be unbounded")

    @property
    def c_profile(self) -> float:
        return float(self.kappa ** self.p)

    def __call__(self, t):
        return ramp(t) ** self.kappa

    def derivative(self, t):
        psi = ramp(t)
        return self.kappa * psi ** (self.kappa - 1.0) * ramp_derivative(t)

    def ratio(self, t, p: Optional[float] = None):
        """``|phi_0'|^p / phi_0^(p-1)`` in closed form, 0 off the transition zone.

        ``p`` defaults to the cutoff's own exponent; any ``p <= kappa`` is fine.
        """
        p = self.p if p is None else p
        psi = ramp(t)
        dpsi = np.abs(ramp_derivative(t))
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.kappa ** p * psi ** (self.kappa - p) * dpsi ** p
        return np.where((psi > 0) & (dpsi > 0), val, 0.0)

    def for_exponent(self, p: float) -> "Cutoff":
        return Cutoff(p, self.kappa)


def norm_gradient(G: CarnotGroup, S: HomogeneousNorm, x) -> np.ndarray:
    """``grad_L S`` (closed form if the norm has one, else central differences)."""
    x = np.atleast_2d(x)
    if S.horizontal_gradient is not None:
        return S.horizontal_gradient(x)
    g = ambient_gradient(S, x, FDScheme().step)
    return np.einsum("mij,mj->mi", G.frame_matrix(x), g)


def make_cutoff(p: float, kappa: Optional[float] = None) -> Cutoff:
    """Default ``kappa = max(p, 2)``."""
    return Cutoff(float(p), float(max(p, 2.0) if kappa is None else kappa))


@dataclass(frozen=True, eq=False)
class TestFunction(ScalarField):
    """``phi_1(x) = phi_0(S(delta_{1/R} x)) = phi_0(S(x)/R)``, supported in ``B_2R``."""

    __test__ = False

    radius: float = 1.0
    cutoff: Optional[Cutoff] = None
    norm: Optional[HomogeneousNorm] = None
    group: Optional[CarnotGroup] = None

    @property
    def support_radius(self) -> float:
        return 2.0 * self.radius

    def ratio(self, x, p: Optional[float] = None) -> np.ndarray:
        """``|grad_L phi_1|^p / phi_1^(p-1)`` computed from the profile."""
        p = self.cutoff.p if p is None else p
        x = np.atleast_2d(x)
        s = self.norm(x) / self.radius
        prof = self.cutoff.ratio(s, p)
        out = np.zeros(len(x))
        active = prof > 0
        if np.any(active):
            gs = np.linalg.norm(norm_gradient(self.group, self.norm, x[active]), axis=-1)
            out[active] = prof[active] * gs ** p * self.radius ** (-p)
        return out

    def ratio_bound(self, p: Optional[float] = None) -> float:
        """``c_profile * ||grad_L S||_inf^p * R^(-p)``."""
        p = self.cutoff.p if p is None else p
        return self.cutoff.kappa ** p * self.norm.grad_sup_bound ** p * self.radius ** (-p)


def scaled_test_function(G: CarnotGroup, S: HomogeneousNorm, cutoff: Cutoff,
                         R: float) -> TestFunction:
    if not R > 0:
        raise ConfigError(f"test-function radius must be positive, got {R}")
    R = float(R)

    def evaluate(x):
        return cutoff(S(x) / R)

    def gradient(x):
        x = np.atleast_2d(x)
        s = S(x) / R
        d = cutoff.derivative(s)
        out = np.zeros((len(x), G.horizontal_dim))
        active = d != 0
        if np.any(active):
            out[active] = (d[active] / R)[:, None] * norm_gradient(G, S, x[active])
        return out

    return TestFunction(evaluate, gradient, smoothness=1, name=f"phi1(R={R:g})",
                        radius=R, cutoff=cutoff, norm=S, group=G)
