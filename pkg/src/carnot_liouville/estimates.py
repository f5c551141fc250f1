"""Quadrature checks of the weak-solution inequalities and the a priori estimate chain.

Every check at radius ``R`` reads one shared sample cloud of ``B_2R``; the
cloud, field values, gradients and sources are computed once per
``(instance, R, budget)`` and cached.  Margins are ``rhs - lhs`` and a
violation is only declared below ``-3`` standard errors.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .calculus import FDScheme, ScalarField, horizontal_gradient
from .cutoffs import make_cutoff, scaled_test_function
from .errors import ConfigError, PreconditionError, require_finite
from .fields import Source, bubble, manufactured_source, power_source
from .groups import CarnotGroup, HomogeneousNorm, Region
from .harnack import HarnackScan, critical_sigma, harnack_exponent_for_chain, harnack_scan
from .quadrature import QuadratureBudget, SampleCloud, ess_inf_on_cloud, sample_cloud

ANCHORS = {
    "ws": "Def 2.1 (ws1)/(ws2)",
    "eq19": "Thm 3.1 Eq. (19)",
    "eq22": "Thm 3.1 Eq. (22)",
    "eq23": "Thm 3.1 Eq. (23)",
    "eq25": "Thm 3.1 Eq. (25)",
    "eq27": "Thm 3.1 Eq. (27)",
    "th45": "Thm 4.5 Eqs. (eq:i)-(eq:v)",
}

# relative floor below which a negative margin is treated as rounding
ROUNDING = 1e-12


@dataclass(frozen=True, eq=False)
class SystemInstance:
    """A candidate pair ``(u, v)`` for ``-Delta_p u >= f``, ``-Delta_q v >= g``.

    ``inf_u_zero`` / ``inf_v_zero`` are caller declarations that the global
    essential infimum vanishes (they gate the large-radius estimates).
    """

    group: CarnotGroup
    norm: HomogeneousNorm
    p: float
    q: float
    u: ScalarField
    v: ScalarField
    f: Source
    g: Source
    a: Optional[float] = None
    b: Optional[float] = None
    radii: tuple = (1.0, 2.0, 4.0, 8.0)
    budget: QuadratureBudget = QuadratureBudget()
    scheme: FDScheme = FDScheme()
    inf_u_zero: bool = False
    inf_v_zero: bool = False
    kappa: Optional[float] = None
    name: str = "instance"

    def __post_init__(self):
        if not (self.p > 1 and self.q > 1):
            raise ConfigError(f"exponents must exceed 1, got p={self.p}, q={self.q}")
        if not self.radii or any(r <= 0 for r in self.radii):
            raise ConfigError("radius grid must be nonempty and positive")
        for nm, val in (("a", self.a), ("b", self.b)):
            if val is not None and not val > 0:
                raise ConfigError(f"{nm} must be positive")
        if self.kappa is not None and self.kappa < max(self.p, self.q):
            raise ConfigError(f"kappa={self.kappa} must be at least max(p, q)")

    @property
    def Q(self) -> int:
        return self.group.hom_dim

    @property
    def cutoff_kappa(self) -> float:
        return float(self.kappa if self.kappa is not None else max(self.p, self.q, 2.0))

    def exponent(self, line: int) -> float:
        return self.p if line == 1 else self.q

    def describe(self) -> dict:
        return {"name": self.name, "group": self.group.name, "norm": self.norm.name,
                "p": self.p, "q": self.q, "a": self.a, "b": self.b, "u": self.u.name,
                "v": self.v.name, "f": self.f.name, "g": self.g.name, "radii": list(self.radii),
                "kappa": self.cutoff_kappa, "budget": self.budget.to_dict(),
                "inf_u_zero": self.inf_u_zero, "inf_v_zero": self.inf_v_zero}


@dataclass(frozen=True)
class EstimateConstants:
    """Young, Hölder and cutoff constants of the chain, one set per line.

    ``eta`` / ``mu_y`` set to None follow the half rule
    ``eta = (|alpha| p'/2)^(1/p')``, which makes ``c1 = |alpha|/2``.
    ``mu_y`` is the Young constant of the second line (``mu`` is taken by
    the frame matrix).
    """

    p: float
    q: float
    Q: float
    alpha: float = -1.0
    beta: float = -1.0
    ell: Optional[float] = None
    eta: Optional[float] = None
    mu_y: Optional[float] = None
    kappa: float = 2.0
    grad_sup: float = 1.0

    def __post_init__(self):
        if not (self.alpha < 0 and self.beta < 0):
            raise ConfigError("alpha and beta must be negative")
        if self.ell is not None and self.ell < 0:
            raise ConfigError("ell must be nonnegative")
        for nm, val in (("eta", self.eta), ("mu_y", self.mu_y)):
            if val is not None and not val > 0:
                raise ConfigError(f"{nm} must be positive")
        if self.kappa < max(self.p, self.q):
            raise ConfigError("kappa must be at least max(p, q)")

    @staticmethod
    def conj(p: float) -> float:
        return p / (p - 1.0)

    @staticmethod
    def half_rule(expo: float, p: float) -> float:
        pc = p / (p - 1.0)
        return (abs(expo) * pc / 2.0) ** (1.0 / pc)

    def young(self, line: int) -> float:
        if line == 1:
            return self.half_rule(self.alpha, self.p) if self.eta is None else self.eta
        return self.half_rule(self.beta, self.q) if self.mu_y is None else self.mu_y

    def _pe(self, line):
        return (self.p, self.alpha) if line == 1 else (self.q, self.beta)

    def c1(self, line: int = 1) -> float:
        p, e = self._pe(line)
        pc = self.conj(p)
        return abs(e) - self.young(line) ** pc / pc

    def c2(self, line: int = 1) -> float:
        p, _ = self._pe(line)
        return self.young(line) ** (-p) / p

    def c3(self, line: int = 1) -> float:
        p, _ = self._pe(line)
        c1 = self.c1(line)
        if not c1 > 0:
            raise PreconditionError(f"c1 = {c1:.6g} <= 0 on line {line}: the Young constant is too large")
        return (self.c2(line) / c1) ** (1.0 / self.conj(p))

    def c4(self, line: int = 1) -> float:
        """``c3 (2^Q - 1) kappa^p ||grad_L S||^p``."""
        p, _ = self._pe(line)
        return self.c3(line) * (2.0 ** self.Q - 1.0) * self.kappa ** p * self.grad_sup ** p

    def c5(self, sigma: float, cH: float, line: int = 1) -> float:
        p, _ = self._pe(line)
        return self.c4(line) * (1.0 - 2.0 ** (-self.Q)) ** ((1.0 - p) / sigma) * cH ** (p - 1.0)

    def ell_for(self, exponents: Sequence[float]) -> float:
        """Explicit ``ell``, else 0 when no exponent of ``u_ell`` is negative and 0.1 otherwise."""
        if self.ell is not None:
            return float(self.ell)
        return 0.0 if all(e >= 0 for e in exponents) else 0.1

    def require_positive(self):
        for line in (1, 2):
            c1 = self.c1(line)
            if not c1 > 0:
                nm = "eta" if line == 1 else "mu_y"
                raise PreconditionError(
                    f"c1 = {c1:.6g} <= 0 on line {line}: {nm} = {self.young(line):.6g} is too large "
                    f"(need {nm}^p'/p' < |exponent|)")

    def with_exponents(self, alpha: Optional[float] = None, beta: Optional[float] = None) -> "EstimateConstants":
        return replace(self, alpha=self.alpha if alpha is None else alpha,
                       beta=self.beta if beta is None else beta)

    def to_dict(self) -> dict:
        out = {"alpha": self.alpha, "beta": self.beta, "ell": self.ell, "eta": self.young(1),
               "mu_y": self.young(2), "kappa": self.kappa, "grad_sup": self.grad_sup,
               "c1": self.c1(1), "c2": self.c2(1), "c1_tilde": self.c1(2), "c2_tilde": self.c2(2)}
        if out["c1"] > 0 and out["c1_tilde"] > 0:
            out.update(c3=self.c3(1), c4=self.c4(1), c3_tilde=self.c3(2), c4_tilde=self.c4(2))
        return out


def make_constants(inst: SystemInstance, **overrides) -> EstimateConstants:
    kw = dict(p=inst.p, q=inst.q, Q=inst.Q, kappa=inst.cutoff_kappa,
              grad_sup=inst.norm.grad_sup_bound)
    kw.update(overrides)
    return EstimateConstants(**kw)


def chain_alpha(p: float, sigma: float) -> float:
    """Exponent making both averaged powers in the product bound dominated by the ``sigma`` mean.

    ``1 - sigma/(p-1)`` when that is at least ``1 - p``; otherwise ``1 - p``,
    whose first power is 0 and is dominated trivially.
    """
    if not sigma > p - 1:
        raise ConfigError(f"sigma={sigma} must exceed p-1={p - 1}")
    return max(1.0 - sigma / (p - 1.0), 1.0 - p)


def chain_exponents(inst: SystemInstance) -> tuple[float, float]:
    """Default ``(sigma, delta)``: midpoints of ``(p-1, Q(p-1)/(Q-p))`` and the q analogue."""
    return (harnack_exponent_for_chain(inst.Q, inst.p), harnack_exponent_for_chain(inst.Q, inst.q))


@dataclass(frozen=True)
class RadiusRecord:
    check_id: str
    line: str
    R: float
    lhs: float
    rhs: float
    margin: float
    stderr: float
    samples: int
    seed: int
    note: Optional[str] = None

    @property
    def violated(self) -> bool:
        if not math.isfinite(self.margin):
            return False
        floor = ROUNDING * (abs(self.lhs) + abs(self.rhs))
        return self.margin < -3.0 * self.stderr - floor

    def to_row(self) -> dict:
        return {"check_id": f"{self.check_id}:{self.line}", "R": self.R, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, "stderr": self.stderr, "samples": self.samples,
                "seed": self.seed}

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["verdict"] = "violation" if self.violated else ("inconclusive" if self.note and
                                                          not math.isfinite(self.margin) else "pass")
        return d


@dataclass
class EstimateReport:
    check_id: str
    anchor: str
    records: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if any(r.violated for r in self.records):
            return "violation"
        if not self.records or any(not math.isfinite(r.margin) for r in self.records):
            return "inconclusive"
        return "pass"

    def rows(self) -> list[dict]:
        return [r.to_row() for r in self.records]

    def to_dict(self) -> dict:
        return {"check_id": self.check_id, "anchor": self.anchor, "verdict": self.verdict,
                "records": [r.to_dict() for r in self.records], "notes": list(self.notes),
                "params": dict(self.params)}


# ---------------------------------------------------------------- radius data

@dataclass(eq=False)
class RadiusData:
    """Fields, gradients and sources on the accepted samples of ``B_2R``."""

    R: float
    cloud: SampleCloud
    u: np.ndarray
    v: np.ndarray
    grad_u: np.ndarray
    grad_v: np.ndarray
    f: np.ndarray
    g: np.ndarray
    phi: np.ndarray
    ratio: dict
    inst: SystemInstance
    _inf: dict = field(default_factory=dict)

    @property
    def budget(self) -> QuadratureBudget:
        return self.cloud.budget

    def ball(self, R: Optional[float] = None) -> np.ndarray:
        return self.cloud.mask(Region.ball(self.R if R is None else R))

    def annulus(self, R: Optional[float] = None) -> np.ndarray:
        return self.cloud.mask(Region.annulus(self.R if R is None else R))

    def line(self, k: int):
        """``(w, |grad_L w|, source, p)`` for line ``k``."""
        if k == 1:
            return self.u, np.linalg.norm(self.grad_u, axis=-1), self.f, self.inst.p
        return self.v, np.linalg.norm(self.grad_v, axis=-1), self.g, self.inst.q

    def ess_inf(self, which: str, R: float) -> float:
        key = (which, R)
        if key not in self._inf:
            w = self.inst.u if which == "u" else self.inst.v
            self._inf[key] = ess_inf_on_cloud(self.cloud, Region.ball(R), w)
        return self._inf[key]


_CACHE: dict = {}
_LOCKS: dict = {}
_GUARD = threading.Lock()


def _compute_radius_data(inst: SystemInstance, R: float, budget: QuadratureBudget) -> RadiusData:
    G, S = inst.group, inst.norm
    cloud = sample_cloud(G, S, 2.0 * R, budget)
    x = cloud.points
    if len(x) == 0:
        raise ConfigError(f"no accepted samples in B_{2 * R:g}; raise the sample budget")
    u = inst.u.checked(x)
    v = inst.v.checked(x)
    if np.any(u < 0) or np.any(v < 0):
        raise PreconditionError("candidate fields must be nonnegative")
    gu = horizontal_gradient(G, inst.u, x, inst.scheme)
    gv = horizontal_gradient(G, inst.v, x, inst.scheme)
    f = require_finite(inst.f(x, u, v), x, f"source {inst.f.name}")
    g = require_finite(inst.g(x, u, v), x, f"source {inst.g.name}")
    if np.any(f < 0) or np.any(g < 0):
        raise PreconditionError("sources must be nonnegative")
    phi = scaled_test_function(G, S, make_cutoff(inst.p, inst.cutoff_kappa), R)
    ratio = {1: phi.ratio(x, inst.p), 2: phi.ratio(x, inst.q)}
    return RadiusData(float(R), cloud, u, v, gu, gv, f, g, phi(x), ratio, inst)


def radius_data(inst: SystemInstance, R: float, budget: Optional[QuadratureBudget] = None) -> RadiusData:
    """Cached per ``(instance, R, budget)``; the seed is derived from the instance name and ``R``."""
    base = inst.budget if budget is None else budget
    b = base.derive("estimates", inst.name, repr(float(R)))
    key = (id(inst), float(R), b)
    with _GUARD:
        if key in _CACHE:
            return _CACHE[key][1]
        lock = _LOCKS.setdefault(key, threading.Lock())
    with lock:
        with _GUARD:
            if key in _CACHE:
                return _CACHE[key][1]
        data = _compute_radius_data(inst, float(R), b)
        with _GUARD:
            # keep the instance alive so its id cannot be reused while cached
            _CACHE[key] = (inst, data)
            if len(_CACHE) > 64:
                _CACHE.pop(next(iter(_CACHE)))
    return data


def clear_cache():
    with _GUARD:
        _CACHE.clear()
        _LOCKS.clear()


# ---------------------------------------------------------------- helpers

def _pow(base, e):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.power(base, e)


def _unbounded(base: np.ndarray, exps: Sequence[float], weight: np.ndarray) -> bool:
    """Zero base under a negative exponent where the weight is active."""
    if min(exps) >= 0:
        return False
    return bool(np.any((base <= 0) & (weight > 0)))


def _stats(cloud: SampleCloud, columns, lhs_fn: Callable, rhs_fn: Callable):
    """``lhs``, ``rhs`` and the delta-method standard error of ``rhs - lhs``."""
    V = np.stack(list(columns), axis=-1)
    I, C = cloud.integrals(V)
    lhs, rhs = float(lhs_fn(I)), float(rhs_fn(I))
    g = np.zeros(len(I))
    for j in range(len(I)):
        h = 1e-6 * max(abs(I[j]), 1e-300)
        up, dn = I.copy(), I.copy()
        up[j] += h
        dn[j] -= h
        g[j] = ((rhs_fn(up) - lhs_fn(up)) - (rhs_fn(dn) - lhs_fn(dn))) / (2 * h)
    var = float(g @ C @ g)
    se = math.sqrt(var) if np.isfinite(var) and var > 0 else 0.0
    return lhs, rhs, se


def _record(check_id, line, R, lhs, rhs, se, budget, note=None) -> RadiusRecord:
    return RadiusRecord(check_id, line, float(R), float(lhs), float(rhs), float(rhs - lhs),
                        float(se), int(budget.samples), int(budget.seed), note)


def _inconclusive(check_id, line, R, budget, note) -> RadiusRecord:
    nan = float("nan")
    return RadiusRecord(check_id, line, float(R), nan, nan, nan, nan, int(budget.samples),
                        int(budget.seed), note)


def _radii(inst, radii):
    return tuple(float(r) for r in (inst.radii if radii is None else radii))


LINES = ((1, "u"), (2, "v"))


# ---------------------------------------------------------------- checks

def check_weak_solution(inst: SystemInstance, battery: Optional[Sequence] = None,
                        budget: Optional[QuadratureBudget] = None) -> EstimateReport:
    """Integrated flux against each test function minus the integrated source, both lines."""
    if battery is None:
        cutoff = make_cutoff(inst.p, inst.cutoff_kappa)
        battery = [scaled_test_function(inst.group, inst.norm, cutoff, R) for R in inst.radii]
    if not battery:
        raise ConfigError("the test-function battery is empty")
    rep = EstimateReport("ws", ANCHORS["ws"], params={"battery": [phi.name for phi in battery]})
    for phi in battery:
        R = getattr(phi, "radius", None)
        if R is None:
            raise ConfigError(f"test function {phi.name} has no support radius")
        d = radius_data(inst, R, budget)
        x = d.cloud.points
        phv = phi(x)
        gphi = horizontal_gradient(inst.group, phi, x, inst.scheme)
        for k, nm in LINES:
            w, gn, src, p = d.line(k)
            grad = d.grad_u if k == 1 else d.grad_v
            with np.errstate(divide="ignore", invalid="ignore"):
                wt = np.where(gn > 0, _pow(gn, p - 2.0), 0.0)
            flux = wt * np.einsum("mi,mi->m", grad, gphi)
            lhs, rhs, se = _stats(d.cloud, [src * phv, flux], lambda I: I[0], lambda I: I[1])
            rep.records.append(_record("ws", f"{nm}:{phi.name}", R, lhs, rhs, se, d.budget))
    return rep


def check_caccioppoli(inst: SystemInstance, consts: Optional[EstimateConstants] = None,
                      radii=None, budget: Optional[QuadratureBudget] = None) -> EstimateReport:
    """The energy bound with ``u_ell^alpha`` weights, on the scaled test function of each radius."""
    consts = make_constants(inst) if consts is None else consts
    consts.require_positive()
    rep = EstimateReport("eq19", ANCHORS["eq19"], params=consts.to_dict())
    for R in _radii(inst, radii):
        d = radius_data(inst, R, budget)
        for k, nm in LINES:
            w, gn, src, p = d.line(k)
            e = consts.alpha if k == 1 else consts.beta
            exps = (e, e - 1.0, e - 1.0 + p)
            ell = consts.ell_for(exps)
            wl = w + ell
            if ell == 0 and _unbounded(wl, exps, d.phi):
                rep.records.append(_inconclusive("eq19", nm, R, d.budget,
                                                 f"{nm}_ell vanishes where a negative power is integrated"))
                continue
            c1, c2 = consts.c1(k), consts.c2(k)
            lhs_col = src * _pow(wl, e) * d.phi + c1 * _pow(gn, p) * _pow(wl, e - 1.0) * d.phi
            rhs_col = c2 * _pow(wl, e - 1.0 + p) * d.ratio[k]
            lhs, rhs, se = _stats(d.cloud, [lhs_col, rhs_col], lambda I: I[0], lambda I: I[1])
            rep.records.append(_record("eq19", nm, R, lhs, rhs, se, d.budget))
            rep.params[f"ell_{nm}"] = ell
    return rep


def check_eq22(inst: SystemInstance, consts: Optional[EstimateConstants] = None,
               radii=None, budget: Optional[QuadratureBudget] = None) -> EstimateReport:
    """Source against the test function versus the Hölder product of two cutoff-weighted powers."""
    consts = make_constants(inst) if consts is None else consts
    consts.require_positive()
    rep = EstimateReport("eq22", ANCHORS["eq22"], params=consts.to_dict())
    for R in _radii(inst, radii):
        d = radius_data(inst, R, budget)
        for k, nm in LINES:
            w, _, src, p = d.line(k)
            e = consts.alpha if k == 1 else consts.beta
            e1, e2 = e - 1.0 + p, (1.0 - e) * (p - 1.0)
            ell = consts.ell_for((e, e - 1.0, e1, e2))
            wl = w + ell
            if ell == 0 and _unbounded(wl, (e1, e2), d.ratio[k]):
                rep.records.append(_inconclusive("eq22", nm, R, d.budget,
                                                 f"{nm}_ell vanishes where a negative power is integrated"))
                continue
            c3, pc = consts.c3(k), p / (p - 1.0)
            cols = [src * d.phi, _pow(wl, e1) * d.ratio[k], _pow(wl, e2) * d.ratio[k]]
            lhs, rhs, se = _stats(d.cloud, cols, lambda I: I[0],
                                  lambda I: c3 * max(I[1], 0.0) ** (1 / pc) * max(I[2], 0.0) ** (1 / p))
            rep.records.append(_record("eq22", nm, R, lhs, rhs, se, d.budget))
            rep.params[f"ell_{nm}"] = ell
    return rep


def _ball_average_cols(d: RadiusData, src):
    inB = d.ball().astype(float)
    return [src * inB, inB]


def check_eq23(inst: SystemInstance, consts: Optional[EstimateConstants] = None,
               radii=None, budget: Optional[QuadratureBudget] = None) -> EstimateReport:
    """Ball average of the source against ``R^-p`` times annulus power means."""
    consts = make_constants(inst) if consts is None else consts
    consts.require_positive()
    rep = EstimateReport("eq23", ANCHORS["eq23"], params=consts.to_dict())
    for R in _radii(inst, radii):
        d = radius_data(inst, R, budget)
        inA = d.annulus()
        for k, nm in LINES:
            w, _, src, p = d.line(k)
            e = consts.alpha if k == 1 else consts.beta
            e1, e2 = e - 1.0 + p, (1.0 - e) * (p - 1.0)
            if _unbounded(w, (e1, e2), inA.astype(float)):
                rep.records.append(_inconclusive("eq23", nm, R, d.budget,
                                                 f"{nm} vanishes on the annulus under a negative power"))
                continue
            c4, pc = consts.c4(k), p / (p - 1.0)
            A = inA.astype(float)
            cols = _ball_average_cols(d, src) + [_pow(w, e1) * A, _pow(w, e2) * A, A]
            lhs, rhs, se = _stats(
                d.cloud, cols, lambda I: I[0] / I[1],
                lambda I: c4 * R ** (-p) * (I[2] / I[4]) ** (1 / pc) * (I[3] / I[4]) ** (1 / p))
            rep.records.append(_record("eq23", nm, R, lhs, rhs, se, d.budget))
    return rep


def check_eq25(inst: SystemInstance, sigma: Optional[float] = None, delta: Optional[float] = None,
               consts: Optional[EstimateConstants] = None, radii=None,
               budget: Optional[QuadratureBudget] = None) -> EstimateReport:
    """Ball average of the source against one annulus ``sigma``-mean.

    The product bound is used with the exponent from :func:`chain_alpha`, so
    both of its power means are dominated by the ``sigma``-mean.
    """
    ds, dd = chain_exponents(inst) if (sigma is None or delta is None) else (None, None)
    sigma = ds if sigma is None else float(sigma)
    delta = dd if delta is None else float(delta)
    base = make_constants(inst) if consts is None else consts
    consts = base.with_exponents(chain_alpha(inst.p, sigma), chain_alpha(inst.q, delta))
    consts.require_positive()
    rep = EstimateReport("eq25", ANCHORS["eq25"],
                         params=dict(consts.to_dict(), sigma=sigma, delta=delta))
    for R in _radii(inst, radii):
        d = radius_data(inst, R, budget)
        A = d.annulus().astype(float)
        for k, nm in LINES:
            w, _, src, p = d.line(k)
            s = sigma if k == 1 else delta
            c4 = consts.c4(k)
            cols = _ball_average_cols(d, src) + [_pow(w, s) * A, A]
            lhs, rhs, se = _stats(d.cloud, cols, lambda I: I[0] / I[1],
                                  lambda I: c4 * R ** (-p) * (I[2] / I[3]) ** ((p - 1.0) / s))
            rep.records.append(_record("eq25", nm, R, lhs, rhs, se, d.budget))
    return rep


def harnack_scans_for(inst: SystemInstance, radii, sigma: float, delta: float,
                      budget: Optional[QuadratureBudget] = None) -> tuple[HarnackScan, HarnackScan]:
    """Scans of ``u`` (exponent ``sigma``) and ``v`` (``delta``) at the doubled radii."""
    base = inst.budget if budget is None else budget
    doubled = sorted({2.0 * r for r in radii})
    G, S = inst.group, inst.norm
    su = harnack_scan(G, S, inst.u, inst.p, doubled, base.derive("wh", inst.name, "u"), sigma)
    sv = harnack_scan(G, S, inst.v, inst.q, doubled, base.derive("wh", inst.name, "v"), delta)
    return su, sv


def _scan_constant(scan: HarnackScan, R: float, notes: list) -> float:
    if not any(abs(r - 2.0 * R) <= 1e-12 * R for r in scan.radii):
        notes.append(f"scan of {scan.field_name} has no radius 2R={2 * R:g}; using its overall maximum")
    return scan.empirical_cH


def check_eq27(inst: SystemInstance, scan_u: Optional[HarnackScan] = None,
               scan_v: Optional[HarnackScan] = None, consts: Optional[EstimateConstants] = None,
               radii=None, budget: Optional[QuadratureBudget] = None) -> EstimateReport:
    """Ball average of the source against ``c5 R^-p (essinf_{B_R} u)^(p-1)``.

    The infimum is a sample minimum refined by local descent, an upper
    estimate of the true value.
    """
    radii = _radii(inst, radii)
    for pp in (inst.p, inst.q):
        critical_sigma(inst.Q, pp)  # raises the parabolic diagnosis when pp >= Q
    if scan_u is None or scan_v is None:
        sigma, delta = chain_exponents(inst)
        su, sv = harnack_scans_for(inst, radii, sigma if scan_u is None else scan_u.sigma,
                                   delta if scan_v is None else scan_v.sigma, budget)
        scan_u = su if scan_u is None else scan_u
        scan_v = sv if scan_v is None else scan_v
    sigma, delta = scan_u.sigma, scan_v.sigma
    base = make_constants(inst) if consts is None else consts
    consts = base.with_exponents(chain_alpha(inst.p, sigma), chain_alpha(inst.q, delta))
    consts.require_positive()
    rep = EstimateReport("eq27", ANCHORS["eq27"],
                         params=dict(consts.to_dict(), sigma=sigma, delta=delta,
                                     cH_u=scan_u.empirical_cH, cH_v=scan_v.empirical_cH,
                                     infimum_estimator="upper"))
    for R in radii:
        d = radius_data(inst, R, budget)
        for (k, nm), scan, s in zip(LINES, (scan_u, scan_v), (sigma, delta)):
            _, _, src, p = d.line(k)
            c5 = consts.c5(s, _scan_constant(scan, R, rep.notes), k)
            m = d.ess_inf(nm, R)
            lhs, rhs, se = _stats(d.cloud, _ball_average_cols(d, src), lambda I: I[0] / I[1],
                                  lambda I: c5 * R ** (-p) * m ** (p - 1.0))
            rep.records.append(_record("eq27", nm, R, lhs, rhs, se, d.budget))
    return rep


# ---------------------------------------------------------------- liminf scans

@dataclass(frozen=True)
class LiminfCertificate:
    """Constants with ``h(t) >= c t^exponent`` on ``0 < t < eps`` read off a log grid."""

    exponent: float
    c: float
    eps: float
    plateau_min: float
    exact_power: bool
    grid: tuple

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "c": self.c,
                "eps": self.eps if math.isfinite(self.eps) else "inf",
                "plateau_min": self.plateau_min, "exact_power": self.exact_power,
                "grid": list(self.grid)}


def liminf_scan(h: Callable, exponent: float, lo: float = 1e-8, hi: float = 1.0, n: int = 161,
                plateau_hi: float = 1e-4) -> LiminfCertificate:
    """Scan ``h(t)/t^exponent`` near 0.

    ``c`` is half the plateau minimum and ``eps`` the largest grid point up to
    which the ratio stays above ``c``.  An exact power (constant ratio) gives
    ``c`` equal to that constant and ``eps = inf``.  A liminf that looks like
    zero (nonpositive plateau, or a ratio still decaying polynomially as
    ``t -> 0``) raises :class:`PreconditionError`.
    """
    if not exponent > 0:
        raise ConfigError("liminf exponent must be positive")
    t = np.logspace(math.log10(lo), math.log10(hi), n)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.asarray(h(t), dtype=float) / t ** exponent
    if np.any(np.isnan(ratio)):
        raise PreconditionError("the source is undefined on the scan grid")
    plateau = ratio[t <= plateau_hi]
    pmin = float(np.min(plateau))
    if not pmin > 0:
        raise PreconditionError(f"liminf of h(t)/t^{exponent:g} looks like 0 (plateau minimum {pmin:.3g})")
    finite = np.isfinite(plateau)
    if np.count_nonzero(finite) >= 2:
        lt, lr = np.log(t[t <= plateau_hi][finite]), np.log(plateau[finite])
        slope = float(np.polyfit(lt, lr, 1)[0])
        if slope > 0.05:
            raise PreconditionError(
                f"h(t)/t^{exponent:g} decays like t^{slope:.3g} as t -> 0: the liminf is 0")
    grid = (lo, hi, n)
    if np.all(np.isfinite(ratio)) and np.ptp(ratio) <= 1e-12 * abs(ratio[0]):
        return LiminfCertificate(exponent, float(ratio[0]), math.inf, pmin, True, grid)
    c = 0.5 * pmin if math.isfinite(pmin) else 1.0
    ok = ratio >= c
    bad = np.flatnonzero(~ok)
    eps = float(t[-1]) if len(bad) == 0 else float(t[bad[0] - 1]) if bad[0] > 0 else float(t[0])
    return LiminfCertificate(exponent, c, eps, pmin, False, grid)


# ---------------------------------------------------------------- coupled large-radius bounds

def _source_scalar(src: Source, arg: str, role: str):
    if src.scalar is None or src.argument != arg:
        raise PreconditionError(f"{role} must be declared as a function of {arg} alone")
    return src.scalar


def check_th45(inst: SystemInstance, radii=None, budget: Optional[QuadratureBudget] = None,
               scans: Optional[tuple] = None, consts: Optional[EstimateConstants] = None) -> EstimateReport:
    """Large-radius bounds for ``f = f(v)`` and, with ``g = g(u)``, the coupled decay bounds.

    Constants are explicit: they are built from the measured ``c5``, the
    liminf certificates and the sampled sublevel fractions, so each line is
    a consequence of the measured first-order bound at the same radius.
    """
    if inst.a is None:
        raise ConfigError("exponent a is required")
    f1 = _source_scalar(inst.f, "v", "f")
    if not inst.inf_v_zero:
        raise PreconditionError("essinf v = 0 is not declared; the large-radius bounds need it")
    radii = _radii(inst, radii)
    cert_f = liminf_scan(f1, inst.a)
    part2 = inst.inf_u_zero and inst.b is not None and inst.g.argument == "u" and inst.g.scalar is not None
    cert_g = liminf_scan(inst.g.scalar, inst.b) if part2 else None

    if scans is None:
        sigma, delta = chain_exponents(inst)
        scans = harnack_scans_for(inst, radii, sigma, delta, budget)
    scan_u, scan_v = scans
    sigma, delta = scan_u.sigma, scan_v.sigma
    base = make_constants(inst) if consts is None else consts
    consts = base.with_exponents(chain_alpha(inst.p, sigma), chain_alpha(inst.q, delta))
    consts.require_positive()
    p, q, a, b, Q = inst.p, inst.q, inst.a, inst.b, inst.Q
    rep = EstimateReport("th45", ANCHORS["th45"], params={
        "f0": cert_f.to_dict(), "g0": cert_g.to_dict() if cert_g else None,
        "sigma": sigma, "delta": delta, "cH_u": scan_u.empirical_cH, "cH_v": scan_v.empirical_cH,
        "part2": part2})
    if not part2:
        rep.notes.append("coupled decay bounds skipped: need essinf u = 0 declared and g = g(u) with exponent b")

    for R in radii:
        d = radius_data(inst, R, budget)
        v_all = d.v[d.ball()]
        if np.ptp(v_all) == 0 and v_all[0] > 0 and R == radii[-1]:
            raise PreconditionError("v is a positive constant on the samples: essinf v = 0 cannot hold")
        c5 = consts.c5(sigma, _scan_constant(scan_u, R, rep.notes), 1)
        c5t = consts.c5(delta, _scan_constant(scan_v, R, rep.notes), 2)
        inB, inAh = d.ball(), d.annulus(R / 2.0)
        Tv = d.v < cert_f.eps
        fracB_v = np.count_nonzero(inB & Tv) / max(np.count_nonzero(inB), 1)
        fracA_v = np.count_nonzero(inAh & Tv) / max(np.count_nonzero(inAh), 1)
        fracs = [fracB_v, fracA_v]
        if part2:
            Tu = d.u < cert_g.eps
            fracB_u = np.count_nonzero(inB & Tu) / max(np.count_nonzero(inB), 1)
            fracA_u = np.count_nonzero(inAh & Tu) / max(np.count_nonzero(inAh), 1)
            fracs += [fracB_u, fracA_u]
        if min(fracs) <= 0:
            rep.notes.append(f"R={R:g} below the large-radius regime (empty sublevel set)")
            continue
        mu, mv = d.ess_inf("u", R), d.ess_inf("v", R)
        B, Ah = inB.astype(float), inAh.astype(float)
        wS = d.cloud.integral(B).value / R ** Q
        cf = cert_f.c
        ci = (c5 / (cf * fracB_v)) ** (1.0 / a)
        rep.records.append(_record("th45", "i", R, mv, ci * R ** (-p / a) * mu ** ((p - 1.0) / a),
                                   0.0, d.budget))
        cii = wS * c5t * ci ** (q - 1.0)
        lhs, rhs, se = _stats(d.cloud, [d.g * B], lambda I: I[0],
                              lambda I: cii * R ** (Q - q - (q - 1.0) * p / a)
                              * mu ** ((p - 1.0) * (q - 1.0) / a))
        rep.records.append(_record("th45", "ii", R, lhs, rhs, se, d.budget))
        ciii = wS * c5t * (fracA_v * wS * (2.0 ** Q - 1.0) * 2.0 ** (-Q) * cf) ** (-(q - 1.0) / a)
        ex3 = Q - q - Q * (q - 1.0) / a
        lhs, rhs, se = _stats(d.cloud, [d.g * B, d.f * Ah], lambda I: I[0],
                              lambda I: ciii * R ** ex3 * max(I[1], 0.0) ** ((q - 1.0) / a))
        rep.records.append(_record("th45", "iii", R, lhs, rhs, se, d.budget))
        rep.params.setdefault("constants", {})[repr(R)] = {"c_i": ci, "c_ii": cii, "c_iii": ciii,
                                                           "w_S": wS, "frac_B_v": fracB_v,
                                                           "frac_A_v": fracA_v}
        if not part2:
            continue
        cg = cert_g.c
        cu = (c5t / (cg * fracB_u)) ** (1.0 / b)
        gap = a * b - (p - 1.0) * (q - 1.0)
        civ_u = (cu * ci ** ((q - 1.0) / b)) ** (a * b)
        civ_v = (ci * cu ** ((p - 1.0) / a)) ** (a * b)
        rep.records.append(_record("th45", "iv_u", R, mu ** gap,
                                   civ_u * R ** (-a * q - p * (q - 1.0)), 0.0, d.budget))
        rep.records.append(_record("th45", "iv_v", R, mv ** gap,
                                   civ_v * R ** (-b * p - q * (p - 1.0)), 0.0, d.budget))
        ciii_sw = wS * c5 * (fracA_u * wS * (2.0 ** Q - 1.0) * 2.0 ** (-Q) * cg) ** (-(p - 1.0) / b)
        cv = ciii_sw * ciii ** ((p - 1.0) / b)
        ex5 = Q - p - (p - 1.0) * q / b - Q * (p - 1.0) * (q - 1.0) / (a * b)
        lhs, rhs, se = _stats(d.cloud, [d.f * B, d.f * Ah], lambda I: I[0],
                              lambda I: cv * R ** ex5 * max(I[1], 0.0) ** ((p - 1.0) * (q - 1.0) / (a * b)))
        rep.records.append(_record("th45", "v", R, lhs, rhs, se, d.budget))
        rep.params["constants"][repr(R)].update(c_iv_u=civ_u, c_iv_v=civ_v, c_v=cv)
    if not rep.records:
        rep.notes.append("no radius of the grid reached the large-radius regime")
    return rep


# ---------------------------------------------------------------- instance builders

def manufactured_instance(G: CarnotGroup, S: HomogeneousNorm, u: ScalarField, v: ScalarField,
                          p: float = 2.0, q: float = 2.0, name: str = "manufactured",
                          **kw) -> SystemInstance:
    """Sources defined as the clamped operator images of ``u`` and ``v``."""
    scheme = kw.pop("scheme", FDScheme())
    return SystemInstance(G, S, p, q, u, v, manufactured_source(G, u, p, scheme),
                          manufactured_source(G, v, q, scheme), scheme=scheme, name=name, **kw)


def bubble_pair_instance(G: CarnotGroup, S: HomogeneousNorm, name: str = "bubble_pair",
                         **kw) -> SystemInstance:
    """``(U, k U)`` from the critical bubble ``-Delta U = c U^m``: ``f = v^m``, ``g = c k u^m``.

    With ``k = c^(1/m)``, ``-Delta U = c U^m = (k U)^m``; both fields decay to 0.
    """
    U = bubble(G, S)
    if G.kind == "euclidean":
        N = G.ambient_dim
        c, m = float(N * (N - 2)), (N + 2.0) / (N - 2.0)
    elif G.kind == "heisenberg" and G.horizontal_dim == 2:
        c, m = 4.0, 3.0
    else:
        raise ConfigError("bubble pairs are available on R^N (N >= 3) and H^1")
    k = c ** (1.0 / m)
    V = ScalarField(lambda x: k * U(x), lambda x: k * U.gradient(x), U.smoothness, f"{k:.6g}*{U.name}")
    kw.setdefault("inf_u_zero", True)
    kw.setdefault("inf_v_zero", True)
    return SystemInstance(G, S, 2.0, 2.0, U, V, power_source(m, "v", 1.0),
                          power_source(m, "u", c * k), a=m, b=m, name=name, **kw)
