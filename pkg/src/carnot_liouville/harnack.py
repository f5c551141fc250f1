"""Empirical weak Harnack ratios and sublevel density fractions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .calculus import ScalarField
from .errors import ConfigError, EvaluationError, PreconditionError
from .groups import CarnotGroup, HomogeneousNorm, Region
from .quadrature import QuadratureBudget, delta_method, ess_inf_on_cloud, sample_cloud

ANCHOR_WH = "Lemma 2.2 (WH)"
ANCHOR_DENSITY = "Lemma 2.4"
ANCHOR_PARABOLIC = "Th 2.5 parabolic"


def critical_sigma(Q: float, p: float) -> float:
    """Upper end ``Q(p-1)/(Q-p)`` of the admissible exponent interval."""
    if p >= Q:
        raise PreconditionError(f"p={p} >= Q={Q}: every nonnegative supersolution is constant "
                                f"({ANCHOR_PARABOLIC}); no Harnack exponent is needed")
    return Q * (p - 1.0) / (Q - p)


def default_sigma(Q: float, p: float) -> float:
    return 0.5 * critical_sigma(Q, p)


def check_sigma(Q: float, p: float, sigma: float) -> float:
    crit = critical_sigma(Q, p)
    if not 0.0 < sigma < crit:
        raise ConfigError(f"sigma={sigma} outside the admissible interval (0, {crit:.6g})")
    return float(sigma)


@dataclass
class HarnackScan:
    """Ratios ``(avg_{B_R} u^sigma)^(1/sigma) / essinf_{B_(R/2)} u`` along a radius grid.

    The scan measures; it certifies nothing.  A clean scan means no violation
    of a bounded ratio was seen up to sampling error.
    """

    sigma: float
    p: float
    Q: float
    radii: list
    ratios: list
    std_errors: list
    samples: list
    seeds: list
    field_name: str = "u"
    notes: list = field(default_factory=list)

    @property
    def empirical_cH(self) -> float:
        return float(max(self.ratios))

    def running_cH(self) -> np.ndarray:
        """Empirical ``c_H`` using only the radii up to each grid point."""
        return np.maximum.accumulate(np.asarray(self.ratios, dtype=float))

    def octave_drift(self) -> float:
        """Largest relative growth of the running ``c_H`` between consecutive radii."""
        c = self.running_cH()
        if len(c) < 2:
            return 0.0
        return float(np.max(c[1:] / c[:-1] - 1.0))

    def ratio_drift(self, from_radius: float = 0.0) -> float:
        """Largest relative change of the raw ratio between consecutive radii ``>= from_radius``."""
        r = np.asarray([c for R, c in zip(self.radii, self.ratios) if R >= from_radius])
        if len(r) < 2:
            return 0.0
        return float(np.max(np.abs(r[1:] / r[:-1] - 1.0)))

    def cH_up_to(self, R: float) -> float:
        vals = [c for rr, c in zip(self.radii, self.ratios) if rr <= R * (1 + 1e-12)]
        if not vals:
            raise ConfigError(f"no scan radius at or below {R}")
        return float(max(vals))

    def rows(self) -> list[dict]:
        return [{"R": R, "ratio": c, "stderr": se, "sigma": self.sigma, "samples": n, "seed": s}
                for R, c, se, n, s in zip(self.radii, self.ratios, self.std_errors,
                                          self.samples, self.seeds)]

    def to_dict(self) -> dict:
        return {"anchor": ANCHOR_WH, "field": self.field_name, "sigma": self.sigma, "p": self.p,
                "Q": self.Q, "empirical_cH": self.empirical_cH, "octave_drift": self.octave_drift(),
                "ratio_drift": self.ratio_drift(),
                "rows": self.rows(), "notes": list(self.notes),
                "statement": "no violation found up to sampling error"}


def _positive_values(u: ScalarField, pts: np.ndarray) -> np.ndarray:
    vals = u.checked(pts)
    if np.any(vals <= 0):
        i = int(np.argmin(vals))
        raise EvaluationError(f"{u.name} is not positive on the ball (value {vals[i]:.3g}); "
                              "a nonnegative supersolution is either identically zero or positive",
                              pts[i])
    return vals


def _ratio_on_cloud(cloud, u: ScalarField, sigma: float, R: float, refine: int):
    inside = cloud.mask(Region.ball(R))
    uv = _positive_values(u, cloud.points[inside])
    inner = Region.ball(R / 2.0)
    m = ess_inf_on_cloud(cloud, inner, u, refine)
    if not m > 0:
        raise EvaluationError(f"essential infimum of {u.name} on B_(R/2) is not positive")
    if uv.min() == uv.max():
        # constant sample: the sigma-mean is that constant, no rounding detour
        return float(uv[0] / m), 0.0
    vals = np.zeros(len(cloud.points))
    vals[inside] = uv ** sigma

    def ratio(I):
        return (I[0] / I[1]) ** (1.0 / sigma) / m

    return delta_method(cloud, [vals, inside.astype(float)], ratio)


def harnack_ratio(G: CarnotGroup, S: HomogeneousNorm, u: ScalarField, sigma: float, R: float,
                  budget: QuadratureBudget, p: float = 2.0, refine: int = 10) -> float:
    """One ratio at radius ``R``; ``p`` only gates the admissible ``sigma``."""
    check_sigma(G.hom_dim, p, sigma)
    if not R > 0:
        raise ConfigError("radius must be positive")
    cloud = sample_cloud(G, S, R, budget)
    return _ratio_on_cloud(cloud, u, sigma, R, refine)[0]


def harnack_scan(G: CarnotGroup, S: HomogeneousNorm, u: ScalarField, p: float,
                 radii: Sequence[float], budget: QuadratureBudget,
                 sigma: Optional[float] = None, refine: int = 10) -> HarnackScan:
    """Ratios over ``radii``; each radius draws from a seed derived from the radius."""
    Q = G.hom_dim
    sigma = default_sigma(Q, p) if sigma is None else check_sigma(Q, p, sigma)
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or sorted(radii) != radii:
        raise ConfigError("radii must be a nonempty increasing list of positive reals")
    ratios, ses, ns, seeds = [], [], [], []
    for R in radii:
        b = budget.derive("harnack", u.name, repr(R))
        cloud = sample_cloud(G, S, R, b)
        val, se = _ratio_on_cloud(cloud, u, sigma, R, refine)
        ratios.append(val)
        ses.append(se)
        ns.append(b.samples)
        seeds.append(b.seed)
    return HarnackScan(sigma, p, Q, radii, ratios, ses, ns, seeds, u.name)


@dataclass
class DensityScan:
    """Fractions ``|A_(R/2) ∩ T| / |A_(R/2)|`` and ``|B_R ∩ T| / |B_R|`` with ``T = {u < eps}``."""

    eps: float
    radii: list
    annulus: list
    ball: list
    samples: list
    seeds: list
    justification: str = ""

    def rows(self) -> list[dict]:
        return [{"R": R, "annulus_fraction": a, "ball_fraction": b, "eps": self.eps,
                 "samples": n, "seed": s}
                for R, a, b, n, s in zip(self.radii, self.annulus, self.ball, self.samples, self.seeds)]

    def to_dict(self) -> dict:
        return {"anchor": ANCHOR_DENSITY, "eps": self.eps, "justification": self.justification,
                "rows": self.rows()}


def density_limit(G: CarnotGroup, S: HomogeneousNorm, u: ScalarField, eps: float,
                  radii: Sequence[float], budget: QuadratureBudget,
                  justification: str = "") -> DensityScan:
    """Sublevel fractions on ``A_(R/2)`` and ``B_R``, both read off one ``B_R`` cloud.

    The caller asserts that the global essential infimum of ``u`` is zero;
    ``justification`` records why.
    """
    if not eps > 0:
        raise ConfigError("eps must be positive")
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii):
        raise ConfigError("radii must be positive")
    ann, ball, ns, seeds = [], [], [], []
    for R in radii:
        b = budget.derive("density", u.name, repr(R), repr(eps))
        cloud = sample_cloud(G, S, R, b)
        inB = cloud.mask(Region.ball(R))
        inA = cloud.mask(Region.annulus(R / 2.0))
        below = np.zeros(len(cloud.points), dtype=bool)
        below[inB] = u.checked(cloud.points[inB]) < eps
        ball.append(float(np.count_nonzero(below & inB) / max(np.count_nonzero(inB), 1)))
        ann.append(float(np.count_nonzero(below & inA) / max(np.count_nonzero(inA), 1)))
        ns.append(b.samples)
        seeds.append(b.seed)
    return DensityScan(float(eps), radii, ann, ball, ns, seeds, justification)


def harnack_exponent_for_chain(Q: float, p: float) -> float:
    """Midpoint of ``(p-1, Q(p-1)/(Q-p))``: admissible for the Harnack step and above ``p-1``."""
    return 0.5 * ((p - 1.0) + critical_sigma(Q, p))
