"""Integrals over gauge balls and annuli with respect to Lebesgue measure.

Monte-Carlo draws are uniform in the Euclidean box around ``B_outer`` (the
box is the dilation of the norm's unit box) and rejected outside the ball.
Chunks of draws use child seeds spawned from one ``SeedSequence`` and are
reduced in chunk order, so equal ``(seed, samples, method)`` gives bitwise
equal results.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import ConfigError, EmptyRegionError, require_finite
from .groups import CarnotGroup, HomogeneousNorm, Region

CHUNK = 1 << 16


@dataclass(frozen=True)
class QuadratureBudget:
    """Sampling budget.

    ``samples`` counts box draws (Monte-Carlo) or grid cells (tensor grid).
    Points within ``exclusion_radius`` (Euclidean) of a singular point are
    dropped; ``singular_points=None`` means the origin.
    """

    samples: int = 100_000
    seed: int = 0
    method: str = "monte_carlo"
    exclusion_radius: float = 0.0
    singular_points: Optional[tuple[tuple[float, ...], ...]] = None

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigError("samples must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be an unsigned integer")
        if self.method not in ("monte_carlo", "tensor_grid"):
            raise ConfigError(f"unknown quadrature method {self.method!r}")
        if self.exclusion_radius < 0:
            raise ConfigError("exclusion_radius must be nonnegative")

    def derive(self, *tags) -> "QuadratureBudget":
        """Same budget with a seed derived deterministically from ``tags``."""
        key = "/".join(str(t) for t in tags).encode()
        ss = np.random.SeedSequence([self.seed, zlib.crc32(key)])
        return QuadratureBudget(self.samples, int(ss.generate_state(1)[0]), self.method,
                                self.exclusion_radius, self.singular_points)

    def with_samples(self, samples: int) -> "QuadratureBudget":
        return QuadratureBudget(samples, self.seed, self.method, self.exclusion_radius,
                                self.singular_points)

    def to_dict(self) -> dict:
        return {"samples": self.samples, "seed": self.seed, "method": self.method,
                "exclusion_radius": self.exclusion_radius}


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    std_error: float
    samples_used: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(eq=False)
class SampleCloud:
    """Accepted points of ``B_outer`` together with the draw bookkeeping.

    Any integral over a subregion is ``box_volume * sum(values) / n_draws``
    with values set to zero outside the subregion.
    """

    points: np.ndarray
    norms: np.ndarray
    n_draws: int
    box_volume: float
    outer_radius: float
    excluded: int
    method: str
    budget: QuadratureBudget
    norm: Optional[HomogeneousNorm] = None

    @property
    def excluded_measure(self) -> float:
        return self.box_volume * self.excluded / self.n_draws

    def mask(self, region: Region) -> np.ndarray:
        return region.contains(self.norms)

    def integral(self, values) -> IntegralEstimate:
        values = np.asarray(values, dtype=float)
        n = self.n_draws
        mean = float(np.sum(values)) / n
        second = float(np.sum(values * values)) / n
        var = max(second - mean * mean, 0.0) * n / max(n - 1, 1)
        se = self.box_volume * math.sqrt(var / n)
        return IntegralEstimate(self.box_volume * mean, se, int(np.count_nonzero(values)))

    def integrals(self, columns) -> tuple[np.ndarray, np.ndarray]:
        """Integrals of several integrands and the covariance of the estimates."""
        V = np.asarray(columns, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        n = self.n_draws
        mean = V.sum(axis=0) / n
        second = V.T @ V / n
        cov = (second - np.outer(mean, mean)) * (n / max(n - 1, 1)) / n
        return self.box_volume * mean, self.box_volume ** 2 * cov


def _draw_chunks(box: np.ndarray, samples: int, seed: int):
    N = len(box)
    n_chunks = (samples + CHUNK - 1) // CHUNK
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for k, child in enumerate(children):
        size = min(CHUNK, samples - k * CHUNK)
        rng = np.random.default_rng(child)
        yield rng.uniform(-1.0, 1.0, (size, N)) * box


def _tensor_grid(box: np.ndarray, samples: int):
    N = len(box)
    k = max(int(round(samples ** (1.0 / N))), 1)
    axes = [(-1.0 + (2 * np.arange(k) + 1) / k) * b for b in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1), k ** N


def sample_cloud(G: CarnotGroup, S: HomogeneousNorm, outer_radius: float,
                 budget: QuadratureBudget) -> SampleCloud:
    """Draw the accepted sample set of ``B_outer`` (minus exclusion masks)."""
    box = S.box(G, outer_radius)
    box_volume = float(np.prod(2.0 * box))
    sing = None
    if budget.exclusion_radius > 0:
        sp = budget.singular_points or (tuple([0.0] * G.ambient_dim),)
        sing = np.asarray(sp, dtype=float)

    def accept(pts):
        s = S(pts)
        keep = s < outer_radius
        drop = np.zeros(len(pts), dtype=bool)
        if sing is not None:
            for c in sing:
                drop |= np.linalg.norm(pts - c, axis=-1) < budget.exclusion_radius
        return pts[keep & ~drop], s[keep & ~drop], int(np.count_nonzero(keep & drop))

    if budget.method == "tensor_grid":
        pts, n = _tensor_grid(box, budget.samples)
        p, s, ex = accept(pts)
        return SampleCloud(p, s, n, box_volume, outer_radius, ex, "tensor_grid", budget, S)

    kept, norms, excluded = [], [], 0
    for chunk in _draw_chunks(box, budget.samples, budget.seed):
        p, s, ex = accept(chunk)
        kept.append(p)
        norms.append(s)
        excluded += ex
    return SampleCloud(np.concatenate(kept), np.concatenate(norms), budget.samples,
                       box_volume, outer_radius, excluded, "monte_carlo", budget, S)


def _region_values(cloud: SampleCloud, region: Region, w) -> tuple[np.ndarray, np.ndarray]:
    inside = cloud.mask(region)
    if not np.any(inside):
        raise EmptyRegionError(f"no samples in {region.kind} of radius {region.radius}")
    vals = np.zeros(len(cloud.points))
    vals[inside] = require_finite(w(cloud.points[inside]), cloud.points[inside], "integrand")
    return inside, vals


def integrate(G: CarnotGroup, S: HomogeneousNorm, region: Region, w,
              budget: QuadratureBudget) -> IntegralEstimate:
    """``int_region w dx``.

    For tensor grids the reported error is ``|I_k - I_(k/2)|`` with ``k``
    cells per axis, a discretization proxy rather than a standard error.
    """
    cloud = sample_cloud(G, S, region.outer_radius, budget)
    inside, vals = _region_values(cloud, region, w)
    est = cloud.integral(vals)
    if budget.method == "tensor_grid":
        coarse = budget.with_samples(max(budget.samples // 2 ** G.ambient_dim, 1))
        c2 = sample_cloud(G, S, region.outer_radius, coarse)
        _, v2 = _region_values(c2, region, w)
        err = abs(est.value - c2.integral(v2).value)
        est = IntegralEstimate(est.value, err, est.samples_used)
    return IntegralEstimate(est.value, est.std_error, int(np.count_nonzero(inside)))


def measure(G, S, region: Region, budget: QuadratureBudget) -> IntegralEstimate:
    return integrate(G, S, region, lambda x: np.ones(len(x)), budget)


def ratio_on_cloud(cloud: SampleCloud, inside: np.ndarray, vals: np.ndarray) -> IntegralEstimate:
    """Ratio estimator ``sum(w 1_region) / sum(1_region)`` with delta-method error."""
    ind = inside.astype(float)
    I, C = cloud.integrals(np.stack([vals, ind], axis=-1))
    r = I[0] / I[1]
    g = np.array([1.0 / I[1], -I[0] / I[1] ** 2])
    se = math.sqrt(max(float(g @ C @ g), 0.0))
    return IntegralEstimate(float(np.sum(vals) / np.count_nonzero(inside)), se,
                            int(np.count_nonzero(inside)))


def average(G: CarnotGroup, S: HomogeneousNorm, region: Region, w,
            budget: QuadratureBudget) -> IntegralEstimate:
    """Mean of ``w`` over ``region``, measure estimated from the same draws."""
    cloud = sample_cloud(G, S, region.outer_radius, budget)
    inside, vals = _region_values(cloud, region, w)
    return ratio_on_cloud(cloud, inside, vals)


def ess_inf_on_cloud(cloud: SampleCloud, region: Region, w, refine: int = 10,
                     exclusion: Optional[Callable] = None) -> float:
    """Sample minimum refined by Nelder-Mead from the best ``refine`` points.

    The result is an upper-bound estimator of the essential infimum: it is the
    value of ``w`` at an actual point of the region.
    """
    inside = cloud.mask(region)
    if not np.any(inside):
        raise EmptyRegionError(f"no samples in {region.kind} of radius {region.radius}")
    pts = cloud.points[inside]
    vals = require_finite(w(pts), pts, "integrand")
    best = float(vals.min())
    if refine <= 0:
        return best
    S = cloud.norm
    budget = cloud.budget

    def objective(y):
        y2 = y[None]
        if S is not None and not region.contains(S(y2))[0]:
            return np.inf
        if budget.exclusion_radius > 0:
            sp = budget.singular_points or (tuple([0.0] * len(y)),)
            if any(np.linalg.norm(y - np.asarray(c)) < budget.exclusion_radius for c in sp):
                return np.inf
        v = float(w(y2)[0])
        return v if np.isfinite(v) else np.inf

    if S is None:
        return best
    order = np.argsort(vals, kind="stable")[:refine]
    scale = np.maximum(np.abs(pts).max(axis=0), 1e-12) * 0.05
    for i in order:
        x0 = pts[i]
        simplex = np.vstack([x0, x0 + np.diag(scale)])
        res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"initial_simplex": simplex, "maxiter": 200 * len(x0),
                                         "xatol": 1e-10, "fatol": 1e-14})
        if np.isfinite(res.fun):
            best = min(best, float(res.fun))
    return best


def ess_inf(G: CarnotGroup, S: HomogeneousNorm, region: Region, w,
            budget: QuadratureBudget, refine: int = 10) -> float:
    cloud = sample_cloud(G, S, region.outer_radius, budget)
    return ess_inf_on_cloud(cloud, region, w, refine)


def sublevel_fraction(G: CarnotGroup, S: HomogeneousNorm, region: Region, w, eps: float,
                      budget: QuadratureBudget) -> float:
    """Fraction of region samples with ``w < eps``."""
    if not eps > 0:
        raise ConfigError("sublevel threshold must be positive")
    cloud = sample_cloud(G, S, region.outer_radius, budget)
    inside = cloud.mask(region)
    if not np.any(inside):
        raise EmptyRegionError(f"no samples in {region.kind} of radius {region.radius}")
    vals = w(cloud.points[inside])
    return float(np.count_nonzero(vals < eps) / len(vals))


def delta_method(cloud: SampleCloud, columns: Sequence[np.ndarray],
                 func: Callable[[np.ndarray], float]) -> tuple[float, float]:
    """Value and standard error of ``func(integrals)`` by first-order propagation."""
    I, C = cloud.integrals(np.stack(list(columns), axis=-1))
    value = float(func(I))
    g = np.zeros(len(I))
    for j in range(len(I)):
        h = 1e-6 * max(abs(I[j]), 1e-300)
        up, dn = I.copy(), I.copy()
        up[j] += h
        dn[j] -= h
        g[j] = (func(up) - func(dn)) / (2 * h)
    var = float(g @ C @ g)
    return value, math.sqrt(max(var, 0.0)) if np.isfinite(var) else float("inf")
