import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from carnot_liouville.calculus import constant_field
from carnot_liouville.errors import ConfigError, PreconditionError
from carnot_liouville.estimates import (EstimateConstants, SystemInstance, bubble_pair_instance,
                                        chain_alpha, check_caccioppoli, check_eq22, check_eq23,
                                        check_eq25, check_eq27, check_th45, check_weak_solution,
                                        liminf_scan, make_constants, manufactured_instance)
from carnot_liouville.fields import Source, bubble, power_source, rational_decay, zero_source
from carnot_liouville.groups import euclidean_group, gauge_norm, heisenberg_group
from carnot_liouville.quadrature import QuadratureBudget

R3 = euclidean_group(3)
S3 = gauge_norm(R3)
SMALL = QuadratureBudget(20_000, 11)


@pytest.fixture(scope="module")
def manufactured():
    return manufactured_instance(R3, S3, bubble(R3, S3), rational_decay(S3), radii=(1.0, 2.0),
                                 budget=SMALL, name="test_manufactured")


def test_half_rule_gives_half_exponent():
    c = EstimateConstants(p=2.5, q=3.0, Q=5, alpha=-0.7, beta=-1.3, kappa=3.0)
    assert c.c1(1) == pytest.approx(0.35, rel=1e-12)
    assert c.c1(2) == pytest.approx(0.65, rel=1e-12)
    assert c.c3(1) == pytest.approx((c.c2(1) / 0.35) ** (1 / c.conj(2.5)), rel=1e-12)


def test_c4_closed_form():
    c = EstimateConstants(p=2, q=2, Q=3, kappa=2.0, grad_sup=1.0)
    # eta = 1 under the half rule with alpha = -1, p = 2
    assert c.young(1) == pytest.approx(1.0)
    assert c.c2(1) == pytest.approx(0.5)
    assert c.c3(1) == pytest.approx(1.0)
    assert c.c4(1) == pytest.approx(7 * 4)


def test_large_young_constant_rejected():
    c = EstimateConstants(p=2, q=2, Q=3, eta=10.0)
    assert c.c1(1) < 0
    with pytest.raises(PreconditionError, match="too large"):
        c.require_positive()
    with pytest.raises(PreconditionError):
        c.c3(1)


@pytest.mark.parametrize("kw", [dict(alpha=0.5), dict(beta=0.0), dict(eta=-1.0), dict(kappa=1.5),
                                dict(ell=-0.1)])
def test_constant_validation(kw):
    with pytest.raises(ConfigError):
        EstimateConstants(**dict(dict(p=2, q=2, Q=3), **kw))


def test_chain_alpha_branches():
    assert chain_alpha(2.0, 1.5) == pytest.approx(-0.5)
    assert chain_alpha(2.0, 5.0) == pytest.approx(-1.0)
    with pytest.raises(ConfigError):
        chain_alpha(2.0, 1.0)


@given(arrays(float, 30, elements=st.floats(0.05, 20.0)),
       st.floats(1.2, 4.0), st.floats(0.01, 6.0))
def test_product_bound_dominated_by_sigma_mean(w, p, extra):
    # with the chain exponent both power means sit below the sigma mean
    sigma = (p - 1) + extra
    a = chain_alpha(p, sigma)
    e1, e2 = a - 1 + p, (1 - a) * (p - 1)
    prod = np.mean(w ** e1) ** ((p - 1) / p) * np.mean(w ** e2) ** (1 / p)
    assert prod <= np.mean(w ** sigma) ** ((p - 1) / sigma) * (1 + 1e-9)


@pytest.mark.parametrize("G", [euclidean_group(3), heisenberg_group(1)])
def test_constant_fields_pass_trivially(G):
    S = gauge_norm(G)
    inst = SystemInstance(G, S, 2.0, 2.0, constant_field(1.5, G), constant_field(0.5, G),
                          zero_source(), zero_source(), radii=(1.0,), budget=QuadratureBudget(4000, 0),
                          name=f"const_{G.name}")
    for chk in (check_weak_solution, check_caccioppoli, check_eq22, check_eq23, check_eq25):
        rep = chk(inst)
        assert rep.verdict == "pass", rep.to_dict()
        assert all(r.lhs == 0.0 for r in rep.records)


def test_manufactured_chain_passes(manufactured):
    for chk in (check_weak_solution, check_caccioppoli, check_eq22, check_eq23, check_eq25, check_eq27):
        rep = chk(manufactured)
        assert rep.verdict == "pass", (rep.check_id, [r.to_dict() for r in rep.records])


def test_inflated_source_is_flagged():
    u, v = bubble(R3, S3), rational_decay(S3)
    base = manufactured_instance(R3, S3, u, v, radii=(1.0,), budget=SMALL, name="base")
    big = Source(lambda x, a, b: 10 * base.f(x, a, b), "10*f")
    inst = SystemInstance(R3, S3, 2.0, 2.0, u, v, big, base.g, radii=(1.0,), budget=SMALL,
                          name="inflated")
    rep = check_weak_solution(inst)
    assert rep.verdict == "violation"
    assert any(r.violated and r.line.startswith("u:") for r in rep.records)


def test_rows_carry_line(manufactured):
    rows = check_caccioppoli(manufactured).rows()
    assert {r["check_id"] for r in rows} == {"eq19:u", "eq19:v"}
    assert set(rows[0]) == {"check_id", "R", "lhs", "rhs", "margin", "stderr", "samples", "seed"}


def test_eq23_margin_below_eq25(manufactured):
    # the sigma-mean right side dominates the product right side at every radius
    sig = 1.5
    consts = make_constants(manufactured).with_exponents(chain_alpha(2, sig), chain_alpha(2, sig))
    r23 = check_eq23(manufactured, consts=consts)
    r25 = check_eq25(manufactured, sigma=sig, delta=sig)
    for a, b in zip(r23.records, r25.records):
        assert a.lhs == pytest.approx(b.lhs)
        assert a.rhs <= b.rhs * (1 + 1e-12)


def test_liminf_exact_power():
    cert = liminf_scan(lambda t: t ** 3, 3.0)
    assert cert.exact_power and cert.c == pytest.approx(1.0) and cert.eps == math.inf
    assert cert.to_dict()["eps"] == "inf"


def test_liminf_perturbed_power():
    cert = liminf_scan(lambda t: 2 * t ** 2 - 3 * t ** 3, 2.0)
    assert not cert.exact_power
    assert cert.c == pytest.approx(1.0, rel=1e-3)
    # 2 - 3t >= 1 up to t = 1/3
    assert 0.25 < cert.eps <= 1 / 3


@pytest.mark.parametrize("h", [lambda t: t ** 4, lambda t: -t ** 2, lambda t: 0 * t])
def test_liminf_zero_rejected(h):
    with pytest.raises(PreconditionError):
        liminf_scan(h, 2.0)


def test_th45_refuses_constant_v():
    G = R3
    inst = SystemInstance(G, S3, 2.0, 2.0, bubble(G, S3), constant_field(1.0, G), power_source(2.0, "v"),
                          zero_source(), a=2.0, radii=(1.0,), budget=QuadratureBudget(5000, 0),
                          inf_v_zero=True, name="const_v")
    with pytest.raises(PreconditionError, match="constant"):
        check_th45(inst)


def test_th45_needs_declarations():
    inst = bubble_pair_instance(R3, S3, inf_v_zero=False, radii=(1.0,), budget=SMALL)
    with pytest.raises(PreconditionError, match="essinf v"):
        check_th45(inst)
    inst2 = SystemInstance(R3, S3, 2.0, 2.0, bubble(R3, S3), bubble(R3, S3), zero_source(),
                           zero_source(), a=2.0, inf_v_zero=True)
    with pytest.raises(PreconditionError, match="function of v"):
        check_th45(inst2)


def test_parabolic_chain_refused():
    G = euclidean_group(2)
    S = gauge_norm(G)
    inst = SystemInstance(G, S, 2.0, 2.0, constant_field(1.0, G), constant_field(1.0, G),
                          zero_source(), zero_source(), radii=(1.0,), budget=QuadratureBudget(2000, 0))
    with pytest.raises(PreconditionError):
        check_eq27(inst)


def test_instance_validation():
    u = constant_field(1.0, R3)
    with pytest.raises(ConfigError):
        SystemInstance(R3, S3, 1.0, 2.0, u, u, zero_source(), zero_source())
    with pytest.raises(ConfigError):
        SystemInstance(R3, S3, 2.0, 2.0, u, u, zero_source(), zero_source(), radii=(0.0,))
    with pytest.raises(ConfigError):
        SystemInstance(R3, S3, 2.0, 3.0, u, u, zero_source(), zero_source(), kappa=2.5)
