"""Acceptance criteria, one test each.

Every test carries a ``criterion`` marker; ``conftest.py`` prints one
PASS/FAIL line per criterion at the end of the session.  Run alone with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from carnot_liouville.calculus import FDScheme, ScalarField, constant_field, horizontal_gradient, p_sublaplacian
from carnot_liouville.config import RunConfig, build_group, build_norm
from carnot_liouville.estimates import (chain_alpha, check_eq23, check_eq25, clear_cache, make_constants)
from carnot_liouville.fields import bubble, inverse_norm_power, min_fundamental
from carnot_liouville.groups import euclidean_group, gauge_norm, heisenberg_group
from carnot_liouville.harnack import density_limit, harnack_scan
from carnot_liouville.liouville import (TH_HYP, TH_POSITIVE, SourceShape, classify_system, hyp2_vec,
                                        hyp_vec, hypp2_vec, hypp_vec)
from carnot_liouville.quadrature import QuadratureBudget
from carnot_liouville.runner import run
from carnot_liouville.sharpness import TOL, certify, search_counterexample

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
OCTAVES = [1, 2, 4, 8, 16, 32, 64]


def _half_open(rng, lo, hi, n):
    """Uniform on ``(lo, hi]``."""
    return hi - (hi - lo) * rng.uniform(0.0, 1.0, n)


def _tuples(rng, n, same=False, two=False):
    p = np.full(n, 2.0) if two else _half_open(rng, 1.0, 10.0, n)
    q = p if (same or two) else _half_open(rng, 1.0, 10.0, n)
    Q = _half_open(rng, 0.0, 1.0, n) * (50.0 - np.maximum(p, q)) + np.maximum(p, q)
    return Q, p, q, _half_open(rng, 0.0, 20.0, n), _half_open(rng, 0.0, 20.0, n)


@pytest.mark.criterion(1, "exponent condition equals its rewritten form on 1e5 tuples")
def test_c01_formula_equivalence():
    t0 = time.perf_counter()
    Q, p, q, a, b = _tuples(np.random.default_rng(20240101), 100_000)
    h1, band1 = hyp_vec(Q, p, q, a, b)
    h2, band2 = hyp2_vec(Q, p, q, a, b)
    outside = ~(band1 | band2)
    assert np.count_nonzero(h1[outside] != h2[outside]) == 0
    assert np.count_nonzero(outside) > 99_000
    assert 0 < np.count_nonzero(h1) < len(h1)
    assert time.perf_counter() - t0 < 5.0


@pytest.mark.criterion(2, "equal-exponent and p=q=2 reductions on 1e4 tuples each")
def test_c02_reductions():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240102)
    Q, p, _, a, b = _tuples(rng, 10_000, same=True)
    assert np.array_equal(hyp2_vec(Q, p, p, a, b)[0], hypp_vec(Q, p, a, b)[0])
    Q, _, _, a, b = _tuples(rng, 10_000, two=True)
    assert np.array_equal(hyp2_vec(Q, 2.0, 2.0, a, b)[0], hypp2_vec(Q, a, b)[0])
    assert time.perf_counter() - t0 < 2.0


@pytest.mark.criterion(3, "ab <= (p-1)(q-1) forces the condition on 1e4 tuples")
def test_c03_small_product():
    rng = np.random.default_rng(20240103)
    Q, p, q, _, _ = _tuples(rng, 10_000)
    prod = (p - 1) * (q - 1)
    a = prod * rng.uniform(1e-6, 1.0, 10_000) ** 0.5
    b = prod * rng.uniform(1e-6, 1.0, 10_000) / a
    assert np.all(a * b <= prod)
    holds, _ = hyp_vec(Q, p, q, a, b)
    assert np.count_nonzero(~holds) == 0


@pytest.mark.criterion(4, "R^3 pair with b=2 satisfies the condition for every sampled a")
def test_c04_example_family():
    a = _half_open(np.random.default_rng(20240104), 0.0, 100.0, 1000)
    holds, band = hyp_vec(3.0, 2.0, 2.0, a, 2.0)
    assert holds.all() and not band.any()
    assert np.all(np.maximum(a + 1, 3) >= a - 0.5)
    f = SourceShape("v", at_zero="zero", liminf_exponent=3)
    g = SourceShape("u", at_zero="zero", liminf_exponent=2, zeros=(2 * math.pi,), zero_exponents=(2,),
                    periodic_zeros=True)
    vd = classify_system(f, g, 3, 2, 2)
    assert vd.applicable_theorem == TH_HYP and vd.condition_holds
    rep = run(RunConfig.load(CONFIGS / "periodic_zero_r3.yaml"))
    res = {r.check_id: r for r in rep.results}
    assert res["classify"].payload["result"]["conclusion"] == "no nonconstant solutions (Th 4.6 route)"


@pytest.mark.criterion(5, "positive-source and translated-zero classifications give nonexistence")
def test_c05_positive_routes():
    anyg = SourceShape("u,v")
    for f in (SourceShape("v", at_zero="infinite"), SourceShape("v", at_zero="positive")):
        vd = classify_system(f, anyg, 3, 2, 2)
        assert vd.nonexistence and vd.applicable_theorem == TH_POSITIVE
        assert not any("translation" in r for r in vd.route)
    f = SourceShape("v", zeros=(1.0,), zero_exponents=(2.0,))
    g = SourceShape("u,v", floor=lambda var, z: z ** 3 if var == "v" else 0.0)
    vd = classify_system(f, g, 3, 2, 2)
    assert vd.nonexistence and vd.applicable_theorem == TH_POSITIVE
    assert vd.route[1] == "translation v1 = v - 1"


@pytest.mark.criterion(6, "H^1 horizontal gradient and sub-Laplacian of the fundamental solution")
def test_c06_group_calculus():
    H = heisenberg_group(1)
    S = gauge_norm(H)
    rng = np.random.default_rng(20240106)
    x = rng.uniform(-2.0, 2.0, (1000, 3))
    x = x[S(x) > 0.2][:1000]
    x = np.concatenate([x, rng.uniform(0.5, 2.0, (1000 - len(x), 3))])
    assert len(x) == 1000

    def f(pts):
        z2 = pts[..., 0] ** 2 + pts[..., 1] ** 2
        return np.sin(pts[..., 0]) * np.exp(0.3 * pts[..., 2]) + z2 * pts[..., 2]

    def frame(pts):
        X, Y, T = pts[..., 0], pts[..., 1], pts[..., 2]
        fx = np.cos(X) * np.exp(0.3 * T) + 2 * X * T
        fy = 2 * Y * T
        ft = 0.3 * np.sin(X) * np.exp(0.3 * T) + X ** 2 + Y ** 2
        return np.stack([fx + 2 * Y * ft, fy - 2 * X * ft], axis=-1)

    fd = horizontal_gradient(H, ScalarField(f, name="probe"), x, FDScheme(step=1e-4))
    ref = frame(x)
    rel = np.linalg.norm(fd - ref, axis=-1) / np.linalg.norm(ref, axis=-1)
    assert rel.max() <= 1e-6

    Q = H.hom_dim
    w = ScalarField(lambda y: S(y) ** (2.0 - Q), name="S^(2-Q)")
    lap = p_sublaplacian(H, w, x, 2.0)
    scale = w(x) / S(x) ** 2  # size of the individual second derivatives
    assert np.max(np.abs(lap) / scale) <= 1e-3


def _volume_cfg(group):
    return RunConfig.from_mapping({"name": f"volume_{group['kind']}", "seed": 5, "group": group,
                                   "checks": ["volume"], "radii": [1, 2, 4],
                                   "budget": {"samples": 1_000_000}})


@pytest.mark.criterion(7, "annulus ratio 2^Q-1 and ball constant on R^3 and H^1 at 1e6 samples")
def test_c07_volume_laws():
    t0 = time.perf_counter()
    for group, Q in (({"kind": "euclidean", "dim": 3}, 3), ({"kind": "heisenberg", "n": 1}, 4)):
        rep = run(_volume_cfg(group))
        vol = rep.results[0]
        assert vol.verdict == "pass", vol.payload
        assert vol.payload["target_ratio"] == 2 ** Q - 1
        recs = vol.payload["records"]
        assert len(recs) == 6
        for r in recs:
            assert r["margin"] >= -3 * r["stderr"]
            assert r["samples"] == 1_000_000
    assert time.perf_counter() - t0 < 60.0


CHAIN = ("ws", "eq19", "eq22", "eq23", "eq25", "eq27")


@pytest.mark.parametrize("name", ["manufactured_r3", "manufactured_h1"])
@pytest.mark.criterion(8, "estimate chain on manufactured R^3 and H^1 pairs, R in {1,2,4,8}, 1e5 samples")
def test_c08_estimate_chain(name):
    t0 = time.perf_counter()
    cfg = RunConfig.load(CONFIGS / f"{name}.yaml")
    assert cfg.radii == (1.0, 2.0, 4.0, 8.0) and cfg.samples == 100_000
    rep = run(cfg, jobs=4)
    res = {r.check_id: r for r in rep.results}
    assert set(CHAIN) <= set(res)
    for cid in CHAIN:
        assert res[cid].verdict == "pass", (cid, res[cid].payload)
        for row in res[cid].rows:
            assert row["margin"] >= -3 * row["stderr"], row
    assert rep.exit_status == 0

    # implication on the battery: wherever the product bound passes, the sigma-mean bound passes
    r23 = {(r["check_id"], r["R"]): r for r in res["eq23"].rows}
    r25 = {(r["check_id"].replace("eq25", "eq23"), r["R"]): r for r in res["eq25"].rows}
    for key, row in r23.items():
        if row["margin"] >= -3 * row["stderr"]:
            other = r25[key]
            assert other["margin"] >= -3 * other["stderr"]

    # and with the chain exponent the sigma-mean side dominates the product side outright
    G = build_group(cfg.group_spec)
    S = build_norm(cfg.norm_spec, G)
    inst = cfg.build_instance(G, S)
    sig = 0.5 * (1 + G.hom_dim / (G.hom_dim - 2))  # midpoint of (1, Q/(Q-2))
    consts = make_constants(inst).with_exponents(chain_alpha(2, sig), chain_alpha(2, sig))
    a, b = check_eq23(inst, consts=consts), check_eq25(inst, sig, sig)
    for x, y in zip(a.records, b.records):
        assert x.lhs == pytest.approx(y.lhs, rel=1e-12)
        assert x.rhs <= y.rhs * (1 + 1e-12)
    assert time.perf_counter() - t0 < 300.0


@pytest.mark.criterion(9, "Harnack ratios over R in [1, 64] and sublevel densities")
def test_c09_harnack():
    b = QuadratureBudget(200_000, 20240109)
    for G in (euclidean_group(3), heisenberg_group(1)):
        S = gauge_norm(G)
        const = harnack_scan(G, S, constant_field(3.0, G), 2.0, OCTAVES, b.derive("const"))
        assert const.ratios == [1.0] * len(OCTAVES)
        for nm, w in (("bubble", bubble(G, S)), ("min_fundamental", min_fundamental(G, S))):
            scan = harnack_scan(G, S, w, 2.0, OCTAVES, b.derive(nm))
            assert all(math.isfinite(r) and r > 0 for r in scan.ratios)
            assert scan.octave_drift() <= 0.10, (G.name, nm, scan.ratios)
        for nm, w in (("inverse_norm", inverse_norm_power(S)), ("bubble", bubble(G, S))):
            d = density_limit(G, S, w, 0.1, [16, 64, 256], b.derive("density", nm), "decays to 0")
            assert d.ball[-1] >= 0.99 and d.annulus[-1] >= 0.99, (G.name, nm, d.ball, d.annulus)


@pytest.mark.criterion(10, "Q=10, p=q=2, a=b=5: certified explicit pair that passes the weak form")
def test_c10_sharpness():
    t0 = time.perf_counter()
    res = search_counterexample(10, 2, 2, 5, 5, certify_points=10_000)
    assert res.found
    assert all(r.min_relative >= -TOL for r in res.residuals)
    assert all(r.points >= 10_000 for r in res.residuals)
    cert = certify(res.ansatz, euclidean_group(10), points=10_000, seed=20240110,
                   weak_budget=QuadratureBudget(2_000_000, 20240110))
    assert cert.passed
    assert cert.weak_form["verdict"] == "pass"
    assert time.perf_counter() - t0 < 300.0


@pytest.mark.criterion(11, "bitwise reproducibility of every shipped config")
def test_c11_determinism():
    for path in sorted(CONFIGS.glob("*.yaml")):
        outs = []
        for jobs in (1, 4):
            clear_cache()
            rep = run(RunConfig.load(path), jobs=jobs)
            outs.append((rep.to_json(), rep.to_csv(), rep.exit_status))
        assert outs[0] == outs[1], path.name


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
