"""Explicit positive solutions of the system when the exponent condition fails.

Profiles are ``u = C_u (1 + (S/L)^p')^(-s)`` and ``v = C_v (1 + (S/L)^q')^(-t)``.
The decay pair ``(s, t)`` starts from the scaling exponents and moves up
until both sources decay at least as fast as the operator images; the
amplitudes then come from a 2x2 log-linear system that leaves a factor 2 of
slack at the worst sampled point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .calculus import FDScheme, ScalarField, p_sublaplacian
from .errors import ConfigError, PreconditionError
from .fields import power_decay, power_source
from .groups import CarnotGroup, HomogeneousNorm, euclidean_group, gauge_norm, unit_sphere_points
from .liouville import hyp_condition
from .quadrature import QuadratureBudget

TOL = 1e-6


def scaling_exponents(p: float, q: float, a: float, b: float) -> tuple[float, float]:
    """``(theta1, theta2)`` with ``u -> lam^theta1 u(delta_lam x)`` preserving the system."""
    D = a * b - (p - 1.0) * (q - 1.0)
    if not D > 0:
        raise PreconditionError("ab <= (p-1)(q-1): no scaling pair, and the condition holds")
    return (p * (q - 1.0) + a * q) / D, (q * (p - 1.0) + b * p) / D


@dataclass(frozen=True)
class RadialAnsatz:
    C_u: float
    C_v: float
    s: float
    t: float
    p: float
    q: float
    a: float
    b: float
    L: float = 1.0

    def __post_init__(self):
        if not (self.C_u > 0 and self.C_v > 0 and self.s > 0 and self.t > 0 and self.L > 0):
            raise ConfigError("ansatz parameters must be positive")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def q_conj(self) -> float:
        return self.q / (self.q - 1.0)

    def fields(self, G: CarnotGroup, S: HomogeneousNorm) -> tuple[ScalarField, ScalarField]:
        u = power_decay(G, S, self.s, self.C_u, self.p_conj, self.L)
        v = power_decay(G, S, self.t, self.C_v, self.q_conj, self.L)
        return u, v

    def rescaled(self, lam: float) -> "RadialAnsatz":
        """``(lam^theta1 u(delta_lam x), lam^theta2 v(delta_lam x))``."""
        if not lam > 0:
            raise ConfigError("scaling factor must be positive")
        th1, th2 = scaling_exponents(self.p, self.q, self.a, self.b)
        return RadialAnsatz(self.C_u * lam ** th1, self.C_v * lam ** th2, self.s, self.t,
                            self.p, self.q, self.a, self.b, self.L / lam)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def radial_cloud(G: CarnotGroup, S: HomogeneousNorm, n: int, seed: int, L: float = 1.0,
                 lo: float = 1e-2, hi: float = 1e2) -> np.ndarray:
    """Points with ``S`` log-uniform in ``[lo L, hi L]`` and random directions."""
    rng = np.random.default_rng(seed)
    dirs = unit_sphere_points(G, S, 2 * n + 16, rng)[:n]
    if len(dirs) < n:
        raise ConfigError("could not draw enough sphere points")
    r = L * np.exp(rng.uniform(math.log(lo), math.log(hi), n))
    return dirs * np.power(r[:, None], G.degrees)


def axis_probes(G: CarnotGroup, S: HomogeneousNorm, L: float = 1.0, per_axis: int = 33,
                lo: float = 1e-2, hi: float = 1e2) -> np.ndarray:
    """Points on every coordinate axis at log-spaced norms.

    Random directions almost never land where the gradient of the norm
    degenerates (the vertical axis of a Heisenberg group, say), which is
    exactly where a radial profile is most likely to fail.
    """
    N = G.ambient_dim
    r = L * np.geomspace(lo, hi, per_axis)
    out = []
    for k in range(N):
        for sign in (1.0, -1.0):
            e = np.zeros((1, N))
            e[0, k] = sign
            e = e * np.power(1.0 / S(e)[:, None], G.degrees)
            out.append(e * np.power(r[:, None], G.degrees))
    return np.concatenate(out, axis=0)


def _operator_images(G, S, ans: RadialAnsatz, x, scheme):
    u, v = ans.fields(G, S)
    Lu = -p_sublaplacian(G, u, x, ans.p, scheme)
    Lv = -p_sublaplacian(G, v, x, ans.q, scheme)
    return u(x), v(x), Lu, Lv


@dataclass
class ResidualStats:
    line: str
    min_relative: float
    median_relative: float
    min_absolute: float
    points: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def residuals(G: CarnotGroup, S: HomogeneousNorm, ans: RadialAnsatz, x,
              scheme: FDScheme = FDScheme()) -> list[ResidualStats]:
    """``r1 = -Delta_p u - v^a`` and ``r2 = -Delta_q v - u^b`` relative to the larger term."""
    uu, vv, Lu, Lv = _operator_images(G, S, ans, x, scheme)
    out = []
    for nm, Lw, src in (("r1", Lu, vv ** ans.a), ("r2", Lv, uu ** ans.b)):
        r = Lw - src
        scale = np.maximum(np.abs(Lw), np.abs(src))
        rel = np.where(scale > 0, r / np.where(scale > 0, scale, 1.0), 0.0)
        out.append(ResidualStats(nm, float(rel.min()), float(np.median(rel)), float(r.min()), len(rel)))
    return out


@dataclass
class SearchResult:
    found: bool
    ansatz: Optional[RadialAnsatz]
    residuals: list = field(default_factory=list)
    tried: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"found": self.found, "inputs": self.inputs,
                "ansatz": self.ansatz.to_dict() if self.ansatz else None,
                "residuals": [r.to_dict() for r in self.residuals],
                "tried": self.tried, "notes": self.notes}


def _decay_compatible(p, q, a, b, s, t) -> bool:
    """Sources decay no slower than the operator images of the profiles."""
    pc, qc = p / (p - 1.0), q / (q - 1.0)
    return a * qc * t >= pc * s * (p - 1.0) + p and b * pc * s >= qc * t * (q - 1.0) + q


def default_candidates(p, q, a, b, Q) -> list[tuple[float, float]]:
    th1, th2 = scaling_exponents(p, q, a, b)
    s0, t0 = th1 * (p - 1.0) / p, th2 * (q - 1.0) / q
    smax = (Q - p) / p  # slowest decay still compatible with a positive operator image
    tmax = (Q - q) / q
    out = []
    for m in (2.0, 3.0, 4.0, 1.5, 6.0, 1.25, 8.0, 12.0):
        s, t = m * s0, m * t0
        if s < smax and t < tmax and _decay_compatible(p, q, a, b, s, t):
            out.append((s, t))
    return out


def _amplitudes(p, q, a, b, A, B) -> tuple[float, float]:
    """Solve ``aY - (p-1)X = log(A/2)`` and ``bX - (q-1)Y = log(B/2)`` for ``X, Y = log C``."""
    M = np.array([[-(p - 1.0), a], [b, -(q - 1.0)]])
    X, Y = np.linalg.solve(M, np.array([math.log(A / 2.0), math.log(B / 2.0)]))
    return math.exp(X), math.exp(Y)


def search_counterexample(Q, p, q, a, b, group: Optional[CarnotGroup] = None,
                          norm: Optional[HomogeneousNorm] = None,
                          budget: QuadratureBudget = QuadratureBudget(samples=2000),
                          candidates: Optional[Sequence[tuple[float, float]]] = None,
                          certify_points: int = 10_000,
                          scheme: FDScheme = FDScheme()) -> SearchResult:
    """Look for an ansatz with nonnegative pointwise residuals.

    ``budget.samples`` points fit the amplitudes; ``certify_points`` fresh
    points from an independent seed then decide acceptance at tolerance
    ``-1e-6`` relative.
    """
    verdict = hyp_condition(Q, p, q, a, b)
    if verdict.condition_holds is None:
        raise PreconditionError(f"max(p, q) >= Q: {verdict.notes[0]}")
    if verdict.condition_holds:
        raise PreconditionError("the exponent condition holds: no solution with zero infimum exists")
    Q, p, q, a, b = (float(x) for x in (Q, p, q, a, b))
    if group is None:
        if Q != int(Q):
            raise ConfigError("a non-integer Q needs an explicit group")
        group = euclidean_group(int(Q))
    if group.hom_dim != Q:
        raise ConfigError(f"group has Q={group.hom_dim}, expected {Q}")
    S = gauge_norm(group) if norm is None else norm
    res = SearchResult(False, None, inputs={"Q": Q, "p": p, "q": q, "a": a, "b": b,
                                            "group": group.name, "norm": S.name})
    fit = radial_cloud(group, S, budget.samples, budget.derive("fit").seed)
    check = np.concatenate([radial_cloud(group, S, certify_points, budget.derive("certify").seed),
                            axis_probes(group, S)])
    cands = default_candidates(p, q, a, b, Q) if candidates is None else list(candidates)
    if not cands:
        res.notes.append("no decay pair passes the compatibility filter")
    for s, t in cands:
        unit = RadialAnsatz(1.0, 1.0, s, t, p, q, a, b)
        uu, vv, Lu, Lv = _operator_images(group, S, unit, fit, scheme)
        A = float(np.min(Lu / vv ** a))
        B = float(np.min(Lv / uu ** b))
        entry = {"s": s, "t": t, "A": A, "B": B}
        res.tried.append(entry)
        if not (A > 0 and B > 0):
            entry["status"] = "operator image not positive on the fit cloud"
            continue
        Cu, Cv = _amplitudes(p, q, a, b, A, B)
        ans = RadialAnsatz(Cu, Cv, s, t, p, q, a, b)
        stats = residuals(group, S, ans, check, scheme)
        entry["min_relative"] = min(r.min_relative for r in stats)
        if all(r.min_relative >= -TOL for r in stats):
            entry["status"] = "certified"
            res.found, res.ansatz, res.residuals = True, ans, stats
            return res
        entry["status"] = "negative residual on the certification cloud"
    res.notes.append("not found within the candidate budget")
    if group.kind != "euclidean":
        res.notes.append("radial profiles in the gauge have a vanishing operator image where the "
                         "horizontal gradient of the norm vanishes, so they cannot dominate a "
                         "positive source there")
    return res


@dataclass
class Certification:
    passed: bool
    residuals: list
    weak_form: Optional[dict]
    points: int
    seed: int
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "points": self.points, "seed": self.seed,
                "residuals": [r.to_dict() for r in self.residuals],
                "weak_form": self.weak_form, "notes": self.notes}


def pair_instance(ans: RadialAnsatz, G: CarnotGroup, S: HomogeneousNorm,
                  radii=(1.0, 2.0, 4.0), budget: QuadratureBudget = QuadratureBudget(),
                  name: str = "sharpness_pair"):
    from .estimates import SystemInstance

    u, v = ans.fields(G, S)
    return SystemInstance(G, S, ans.p, ans.q, u, v, power_source(ans.a, "v"),
                          power_source(ans.b, "u"), a=ans.a, b=ans.b, radii=tuple(radii),
                          budget=budget, inf_u_zero=True, inf_v_zero=True, name=name)


def certify(ans: RadialAnsatz, G: CarnotGroup, S: Optional[HomogeneousNorm] = None,
            points: int = 100_000, seed: int = 1, weak_budget: Optional[QuadratureBudget] = None,
            radii=(1.0, 2.0, 4.0), scheme: FDScheme = FDScheme()) -> Certification:
    """Pointwise residuals on a fresh cloud plus the integrated inequalities on a test battery.

    Nonnegative pointwise residuals of smooth positive profiles imply the
    integrated inequalities by integration by parts; the battery check is an
    independent confirmation of that step.
    """
    from .estimates import check_weak_solution

    S = gauge_norm(G) if S is None else S
    x = np.concatenate([radial_cloud(G, S, points, seed, ans.L), axis_probes(G, S, ans.L)])
    stats = residuals(G, S, ans, x, scheme)
    ok = all(r.min_relative >= -TOL for r in stats)
    weak = None
    if weak_budget is not None:
        inst = pair_instance(ans, G, S, radii, weak_budget)
        rep = check_weak_solution(inst)
        weak = rep.to_dict()
        ok = ok and rep.verdict == "pass"
    notes = [f"pointwise check covers S in [1e-2 L, 1e2 L] with L={ans.L:g}; "
             "beyond it the residual signs follow from the decay filter"]
    return Certification(ok, stats, weak, points, seed, notes)
