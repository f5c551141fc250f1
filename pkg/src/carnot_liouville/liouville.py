"""Exponent conditions for nonexistence and a rule-based classifier for source shapes.

Scalar entry points use exact ``Fraction`` arithmetic whenever every input is
an int, a ``Fraction`` or a decimal/fraction string; otherwise they work in
floating point and flag results within a relative band of ``1e-9`` of the
boundary.  The ``*_vec`` functions are the vectorized float forms used for
parameter sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError

BAND = 1e-9

TH_POSITIVE = "Th 4.1"
TH_ZERO = "Th 4.3"
COR_INF = "Cor 4.4"
TH_HYP = "Th 4.6"
TH_GENERAL = "Th 5.6"
TH_PARABOLIC = "Th 2.5 parabolic"


def _as_number(x, exact: bool):
    if exact:
        return Fraction(x) if not isinstance(x, str) else Fraction(x.strip())
    return float(x)


def _is_exact(values) -> bool:
    for x in values:
        if isinstance(x, bool):
            return False
        if isinstance(x, str):
            try:
                Fraction(x.strip())
            except (ValueError, ZeroDivisionError):
                raise ConfigError(f"cannot parse {x!r} as a number") from None
            continue
        if not isinstance(x, Rational):
            return False
    return True


def _numbers(Q, p, q, a, b):
    vals = (Q, p, q, a, b)
    exact = _is_exact(vals)
    Q, p, q, a, b = (_as_number(x, exact) for x in vals)
    for nm, x in (("Q", Q), ("a", a), ("b", b)):
        if not x > 0 or (not exact and not math.isfinite(x)):
            raise ConfigError(f"{nm} must be a positive finite number, got {x}")
    for nm, x in (("p", p), ("q", q)):
        if not x > 1 or (not exact and not math.isfinite(x)):
            raise ConfigError(f"{nm} must exceed 1, got {x}")
    return exact, Q, p, q, a, b


def _out(x):
    return str(x) if isinstance(x, Fraction) and x.denominator != 1 else (
        int(x) if isinstance(x, Fraction) else float(x))


@dataclass(frozen=True)
class LiouvilleVerdict:
    """Outcome of a condition evaluation or of a classification.

    ``condition_holds`` is None when no exponent condition was evaluated
    (parabolic gate, or a classification settled by another route).
    """

    inputs: dict
    form: str
    lhs_terms: tuple
    rhs: object
    condition_holds: Optional[bool]
    applicable_theorem: str
    exact: bool = True
    margin: Optional[float] = None
    boundary: bool = False
    conclusion: str = ""
    route: tuple = ()
    checklist: dict = field(default_factory=dict)
    missing: tuple = ()
    notes: tuple = ()

    @property
    def nonexistence(self) -> bool:
        return self.conclusion.startswith("no ")

    def to_dict(self) -> dict:
        return {"inputs": {k: _out(v) if isinstance(v, (Fraction, float, int)) else v
                           for k, v in self.inputs.items()},
                "form": self.form, "lhs_terms": [_out(t) for t in self.lhs_terms],
                "rhs": None if self.rhs is None else _out(self.rhs),
                "condition_holds": self.condition_holds,
                "applicable_theorem": self.applicable_theorem, "exact": self.exact,
                "margin": self.margin, "boundary": self.boundary, "conclusion": self.conclusion,
                "route": list(self.route), "checklist": dict(self.checklist),
                "missing": list(self.missing), "notes": list(self.notes)}


def _parabolic(inputs, form, p, q, Q, exact) -> LiouvilleVerdict:
    return LiouvilleVerdict(
        inputs, form, (), None, None, TH_PARABOLIC, exact,
        conclusion="every nonnegative supersolution is constant",
        notes=(f"max(p, q) = {_out(max(p, q))} >= Q = {_out(Q)}: the exponent condition is not evaluated",))


def _decide(terms, rhs, exact, sense: str):
    """``sense='min<='``: min(terms) <= rhs; ``'max>='``: max(terms) >= rhs."""
    if sense == "min<=":
        key = min(terms)
        diff = rhs - key
    else:
        key = max(terms)
        diff = key - rhs
    holds = diff >= 0
    scale = max(1.0, *(abs(float(t)) for t in terms), abs(float(rhs)))
    margin = float(diff) / scale
    boundary = (not exact) and abs(margin) < BAND
    return bool(holds), margin, boundary


def _conclusion(holds: Optional[bool]) -> str:
    if holds:
        return "no weak solution with essinf u = essinf v = 0"
    return "condition fails: nonexistence is not implied"


def _verdict(form, inputs, terms, rhs, exact, sense, tag) -> LiouvilleVerdict:
    holds, margin, boundary = _decide(terms, rhs, exact, sense)
    notes = ("within the floating-point boundary band",) if boundary else ()
    return LiouvilleVerdict(inputs, form, tuple(terms), rhs, holds, tag, exact, margin, boundary,
                            _conclusion(holds), notes=notes)


def _tag(general: bool) -> str:
    return TH_GENERAL if general else TH_HYP


def hyp_condition(Q, p, q, a, b, general: bool = False) -> LiouvilleVerdict:
    """``min{Q-p-(p-1)q/b, Q-q-(q-1)p/a} <= Q(p-1)(q-1)/(ab)``.

    ``general=True`` tags the verdict for two general operators with
    exponents ``p = p1`` and ``q = p2``.
    """
    exact, Q, p, q, a, b = _numbers(Q, p, q, a, b)
    inputs = {"Q": Q, "p": p, "q": q, "a": a, "b": b}
    if p >= Q or q >= Q:
        return _parabolic(inputs, "hyp", p, q, Q, exact)
    terms = (Q - p - (p - 1) * q / b, Q - q - (q - 1) * p / a)
    rhs = Q * (p - 1) * (q - 1) / (a * b)
    return _verdict("hyp", inputs, terms, rhs, exact, "min<=", _tag(general))


def hyp2_condition(Q, p, q, a, b, general: bool = False) -> LiouvilleVerdict:
    """``max{abp + aq(p-1), abq + bp(q-1)} >= Q(ab - (p-1)(q-1))``."""
    exact, Q, p, q, a, b = _numbers(Q, p, q, a, b)
    inputs = {"Q": Q, "p": p, "q": q, "a": a, "b": b}
    if p >= Q or q >= Q:
        return _parabolic(inputs, "hyp2", p, q, Q, exact)
    terms = (a * b * p + a * q * (p - 1), a * b * q + b * p * (q - 1))
    rhs = Q * (a * b - (p - 1) * (q - 1))
    return _verdict("hyp2", inputs, terms, rhs, exact, "max>=", _tag(general))


def hypp_condition(Q, p, a, b) -> LiouvilleVerdict:
    """Equal exponents: ``max{a+p-1, b+p-1} >= (Q-p)/(p(p-1)) (ab - (p-1)^2)``."""
    exact, Q, p, _, a, b = _numbers(Q, p, p, a, b)
    inputs = {"Q": Q, "p": p, "q": p, "a": a, "b": b}
    if p >= Q:
        return _parabolic(inputs, "hypp", p, p, Q, exact)
    terms = (a + p - 1, b + p - 1)
    rhs = (Q - p) / (p * (p - 1)) * (a * b - (p - 1) ** 2)
    return _verdict("hypp", inputs, terms, rhs, exact, "max>=", TH_HYP)


def hypp2_condition(Q, a, b) -> LiouvilleVerdict:
    """``p = q = 2``: ``max{a+1, b+1} >= (Q-2)/2 (ab - 1)``."""
    exact, Q, _, _, a, b = _numbers(Q, 2, 2, a, b)
    inputs = {"Q": Q, "p": 2, "q": 2, "a": a, "b": b}
    if Q <= 2:
        return _parabolic(inputs, "hypp=2", 2, 2, Q, exact)
    terms = (a + 1, b + 1)
    rhs = (Q - 2) / 2 * (a * b - 1)
    return _verdict("hypp=2", inputs, terms, rhs, exact, "max>=", TH_HYP)


# ---------------------------------------------------------------- vectorized

def _arrays(*xs):
    return np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in xs))


def hyp_terms_vec(Q, p, q, a, b):
    Q, p, q, a, b = _arrays(Q, p, q, a, b)
    t1 = Q - p - (p - 1) * q / b
    t2 = Q - q - (q - 1) * p / a
    return np.minimum(t1, t2), Q * (p - 1) * (q - 1) / (a * b), np.stack([t1, t2])


def hyp_vec(Q, p, q, a, b):
    """Boolean array and a boundary mask (relative band)."""
    key, rhs, terms = hyp_terms_vec(Q, p, q, a, b)
    scale = np.maximum(1.0, np.maximum(np.abs(terms).max(axis=0), np.abs(rhs)))
    return key <= rhs, np.abs(rhs - key) < BAND * scale


def hyp2_vec(Q, p, q, a, b):
    Q, p, q, a, b = _arrays(Q, p, q, a, b)
    t1 = a * b * p + a * q * (p - 1)
    t2 = a * b * q + b * p * (q - 1)
    key, rhs = np.maximum(t1, t2), Q * (a * b - (p - 1) * (q - 1))
    scale = np.maximum(1.0, np.maximum(np.maximum(np.abs(t1), np.abs(t2)), np.abs(rhs)))
    return key >= rhs, np.abs(key - rhs) < BAND * scale


def hypp_vec(Q, p, a, b):
    Q, p, a, b = _arrays(Q, p, a, b)
    key = np.maximum(a + p - 1, b + p - 1)
    rhs = (Q - p) / (p * (p - 1)) * (a * b - (p - 1) ** 2)
    scale = np.maximum(1.0, np.maximum(np.abs(key), np.abs(rhs)))
    return key >= rhs, np.abs(key - rhs) < BAND * scale


def hypp2_vec(Q, a, b):
    Q, a, b = _arrays(Q, a, b)
    key = np.maximum(a + 1, b + 1)
    rhs = (Q - 2) / 2 * (a * b - 1)
    scale = np.maximum(1.0, np.maximum(np.abs(key), np.abs(rhs)))
    return key >= rhs, np.abs(key - rhs) < BAND * scale


# ---------------------------------------------------------------- classification

_AT_ZERO = ("positive", "zero", "infinite", "unknown")


@dataclass(frozen=True)
class SourceShape:
    """What is known about one source term.

    ``argument`` names the variables it depends on (``"u"``, ``"v"`` or
    anything else for mixed dependence).  ``positive`` asserts strict
    positivity on ``(0, inf)`` away from the listed ``zeros``; ``at_zero``
    describes the value at ``t = 0``.  Each zero carries the local exponent
    ``gamma`` with ``liminf h(z + t)/t^gamma > 0`` as ``t -> 0+``;
    ``liminf_exponent`` plays that role at ``t = 0``.  ``periodic_zeros``
    marks a zero set invariant under the translations it generates.
    ``floor(var, z)`` returns a lower bound of the source on ``{var >= z}``
    (0 when nothing is known).
    """

    argument: str
    positive: bool = True
    at_zero: str = "positive"
    zeros: tuple = ()
    zero_exponents: tuple = ()
    liminf_exponent: Optional[float] = None
    periodic_zeros: bool = False
    floor: Optional[Callable[[str, float], float]] = None
    continuous: bool = True
    name: str = ""

    def __post_init__(self):
        if self.at_zero not in _AT_ZERO:
            raise ConfigError(f"at_zero must be one of {_AT_ZERO}")
        if any(not z > 0 for z in self.zeros):
            raise ConfigError("listed zeros must be positive; describe t = 0 through at_zero")
        if self.zero_exponents and len(self.zero_exponents) != len(self.zeros):
            raise ConfigError("zero_exponents must align with zeros")

    def lower_bound(self, var: str, z: float) -> float:
        return float(self.floor(var, z)) if self.floor is not None else 0.0

    @property
    def bounded_below_near_zero(self) -> bool:
        return self.at_zero in ("positive", "infinite")

    def candidate_infima(self):
        """Possible values of the essential infimum of the argument, each with its exponent."""
        out = []
        if self.at_zero == "zero":
            out.append((0.0, self.liminf_exponent))
        exps = self.zero_exponents or (None,) * len(self.zeros)
        out.extend(zip(self.zeros, exps))
        return out


def _positive_route(h: SourceShape, var: str) -> bool:
    return (h.argument == var and h.continuous and h.positive and not h.zeros
            and h.bounded_below_near_zero)


def classify_system(f: SourceShape, g: SourceShape, Q, p, q) -> LiouvilleVerdict:
    """Strongest nonexistence statement reachable from the declared shapes.

    Routes tried in order: the parabolic gate; a strictly positive source of
    one unknown; a single isolated zero removed by translation followed by a
    positive constant source; the exponent condition at every admissible
    infimum.  Anything else is inconclusive with the missing hypotheses.
    """
    exact = _is_exact((Q, p, q))
    Q, p, q = (_as_number(x, exact) for x in (Q, p, q))
    if not (p > 1 and q > 1 and Q > 0):
        raise ConfigError("need p, q > 1 and Q > 0")
    inputs = {"Q": Q, "p": p, "q": q}
    base = dict(inputs=inputs, form="classify", lhs_terms=(), rhs=None, exact=exact)
    if p >= Q or q >= Q:
        return LiouvilleVerdict(condition_holds=None, applicable_theorem=TH_PARABOLIC,
                                conclusion="only constant supersolutions",
                                route=(TH_PARABOLIC,), **base)

    for h, var, line in ((f, "v", "first"), (g, "u", "second")):
        if _positive_route(h, var):
            note = () if h.at_zero == "positive" else (
                "blow-up at 0 replaced by the positive continuous minorant min(h, 1)",)
            return LiouvilleVerdict(
                condition_holds=None, applicable_theorem=TH_POSITIVE,
                conclusion="no weak solutions",
                route=(f"{TH_POSITIVE} on the {line} inequality",),
                checklist={f"{line} source depends on {var} only": True,
                           "continuous": True, "strictly positive on [0, inf)": True},
                notes=note, **base)

    for h, var, other, other_var, line in ((f, "v", g, "u", "second"), (g, "u", f, "v", "first")):
        if (h.argument == var and h.positive and len(h.zeros) == 1 and not h.periodic_zeros
                and h.bounded_below_near_zero):
            z = h.zeros[0]
            c = other.lower_bound(var, z)
            if c > 0:
                return LiouvilleVerdict(
                    condition_holds=None, applicable_theorem=TH_POSITIVE,
                    conclusion="no weak solutions",
                    route=(f"{TH_ZERO}: essinf {var} = {z:g}",
                           f"translation {var}1 = {var} - {z:g}",
                           f"{TH_POSITIVE} on the {line} inequality with source >= {c:g} > 0"),
                    checklist={f"single zero of the {var}-source": True,
                               f"{line} source bounded below on {{{var} >= {z:g}}}": True},
                    **base)

    missing = []
    if f.argument != "v":
        missing.append("f must depend on v only")
    if g.argument != "u":
        missing.append("g must depend on u only")
    inf_f, inf_g = f.candidate_infima(), g.candidate_infima()
    if not inf_f:
        missing.append("f has no zero and is not covered by the positive route")
    if not inf_g:
        missing.append("g has no zero and is not covered by the positive route")
    for nm, cands in (("f", inf_f), ("g", inf_g)):
        if any(e is None for _, e in cands):
            missing.append(f"liminf exponent of {nm} at a candidate infimum")
    if missing:
        return LiouvilleVerdict(condition_holds=None, applicable_theorem="none",
                                conclusion="inconclusive", missing=tuple(missing), **base)

    route = [f"{COR_INF}: essinf v is a zero of f and essinf u is a zero of g"]
    if any(z > 0 for z, _ in inf_f + inf_g):
        route.append("translation of the infimum to 0")
    checks, all_hold, worst = [], True, None
    for (zf, a) in inf_f:
        for (zg, b) in inf_g:
            vd = hyp_condition(Q, p, q, a, b)
            checks.append((zf, zg, vd))
            all_hold &= bool(vd.condition_holds)
            if worst is None or vd.margin < worst.margin:
                worst = vd
    route.append(f"{TH_HYP} with (a, b) at every candidate infimum")
    checklist = {f"(f0) a={_out(vd.inputs['a'])} at essinf v={zf:g}, "
                 f"(g0) b={_out(vd.inputs['b'])} at essinf u={zg:g}": vd.condition_holds
                 for zf, zg, vd in checks}
    common = dict(inputs=dict(inputs, a=worst.inputs["a"], b=worst.inputs["b"]), form="classify",
                  lhs_terms=worst.lhs_terms, rhs=worst.rhs, exact=worst.exact,
                  margin=worst.margin, boundary=worst.boundary)
    if all_hold:
        return LiouvilleVerdict(condition_holds=True, applicable_theorem=TH_HYP,
                                conclusion="no nonconstant solutions (Th 4.6 route)",
                                route=tuple(route), checklist=checklist, **common)
    return LiouvilleVerdict(condition_holds=False, applicable_theorem=TH_HYP,
                            conclusion="inconclusive: the exponent condition fails",
                            route=tuple(route), checklist=checklist,
                            missing=("exponent condition",), **common)

