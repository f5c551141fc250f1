"""Run orchestration and report emission.

Checks run in two waves: everything without a dependency first, then the
checks that consume Harnack scans.  Each check draws from seeds derived from
the config seed and its own tags, so the numbers do not depend on the order
or the thread a check ran on.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import RunConfig, build_field, build_group, build_norm, build_shape
from .errors import ConfigError, ToolkitError
from .groups import Region
from .harnack import ANCHOR_DENSITY, ANCHOR_WH, density_limit, harnack_scan
from .liouville import classify_system, hyp2_condition, hyp_condition
from .quadrature import sample_cloud

EXIT_PASS, EXIT_VIOLATION, EXIT_ERROR, EXIT_CONDITION_FAILS = 0, 1, 2, 3
CSV_COLUMNS = ("check_id", "R", "lhs", "rhs", "margin", "stderr", "samples", "seed")


@dataclass
class CheckResult:
    check_id: str
    anchor: str
    verdict: str  # pass | violation | inconclusive | informational | error
    payload: dict
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"check_id": self.check_id, "anchor": self.anchor, "verdict": self.verdict,
                **self.payload}


@dataclass
class RunReport:
    config: dict
    version: str
    results: list
    exit_status: int
    errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"toolkit_version": self.version, "config": self.config,
                "exit_status": self.exit_status, "errors": list(self.errors),
                "checks": [r.to_dict() for r in self.results]}

    def rows(self) -> list[dict]:
        return [row for r in self.results for row in r.rows]

    def to_json(self) -> str:
        return json.dumps(_finite(self.to_dict()), indent=2) + "\n"

    def to_csv(self) -> str:
        return rows_to_csv(self.rows())

    def write(self, out_dir, formats=("json",), stem: str = "report") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        if "json" in formats:
            written.append(out / f"{stem}.json")
            written[-1].write_text(self.to_json())
        if "csv" in formats:
            written.append(out / f"{stem}.csv")
            written[-1].write_text(self.to_csv())
        return written


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _finite(x):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python."""
    if isinstance(x, dict):
        return {str(k): _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    if isinstance(x, np.ndarray):
        return _finite(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return _finite(x.item())
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _estimate(rep) -> CheckResult:
    d = rep.to_dict()
    return CheckResult(rep.check_id, rep.anchor, rep.verdict,
                       {k: v for k, v in d.items() if k not in ("check_id", "anchor", "verdict")},
                       rep.rows())


def _scan_result(check_id: str, scans, max_drift: float) -> CheckResult:
    payload = {"scans": [s.to_dict() for s in scans], "max_drift": max_drift}
    ok = all(math.isfinite(s.empirical_cH) and s.octave_drift() <= max_drift for s in scans)
    rows = [{"check_id": f"{check_id}:{s.field_name}", "R": r["R"], "lhs": r["ratio"],
             "rhs": s.empirical_cH, "margin": s.empirical_cH - r["ratio"], "stderr": r["stderr"],
             "samples": r["samples"], "seed": r["seed"]} for s in scans for r in s.rows()]
    return CheckResult(check_id, ANCHOR_WH, "pass" if ok else "inconclusive", payload, rows)


def _volume(cfg: RunConfig, G, S) -> CheckResult:
    from .estimates import RadiusRecord

    Q = G.hom_dim
    target = 2.0 ** Q - 1.0
    recs, consts = [], []
    for R in cfg.radii:
        b = cfg.budget.derive("volume", repr(R))
        cloud = sample_cloud(G, S, 2.0 * R, b)
        A = cloud.mask(Region.annulus(R)).astype(float)
        B = cloud.mask(Region.ball(R)).astype(float)
        I, C = cloud.integrals(np.stack([A, B], axis=-1))
        ratio = I[0] / I[1]
        grad = np.array([1.0 / I[1], -I[0] / I[1] ** 2])
        se = math.sqrt(max(float(grad @ C @ grad), 0.0))
        recs.append(RadiusRecord("volume:annulus_ratio", "A/B", R, float(ratio), target,
                                 -abs(float(ratio) - target), se, b.samples, b.seed))
        consts.append((R, I[1] / R ** Q, math.sqrt(max(C[1, 1], 0.0)) / R ** Q, b))
    w = np.array([1.0 / se ** 2 if se > 0 else 1.0 for _, _, se, _ in consts])
    vals = np.array([c for _, c, _, _ in consts])
    mean = float(np.sum(w * vals) / np.sum(w))
    mean_se = math.sqrt(1.0 / float(np.sum(w)))
    for R, c, se, b in consts:
        recs.append(RadiusRecord("volume:ball_constant", "B/R^Q", R, float(c), mean,
                                 -abs(float(c) - mean), math.sqrt(se ** 2 + mean_se ** 2),
                                 b.samples, b.seed))
    bad = any(r.violated for r in recs)
    payload = {"Q": Q, "target_ratio": target, "ball_constant_mean": mean,
               "records": [r.to_dict() for r in recs]}
    return CheckResult("volume", "Appendix volume law |B_R| = R^Q |B_1|",
                       "violation" if bad else "pass", payload, [r.to_row() for r in recs])


def _liouville(cfg: RunConfig) -> CheckResult:
    L = cfg.liouville
    general = "p1" in L or "p2" in L
    p = L.get("p1", L.get("p"))
    q = L.get("p2", L.get("q"))
    if p is None or q is None:
        raise ConfigError("liouville needs p and q (or p1 and p2)")
    v1 = hyp_condition(L["Q"], p, q, L["a"], L["b"], general=general)
    v2 = hyp2_condition(L["Q"], p, q, L["a"], L["b"], general=general)
    return CheckResult("liouville", v1.applicable_theorem, "informational",
                       {"hyp": v1.to_dict(), "hyp2": v2.to_dict()})


def _classify(cfg: RunConfig) -> CheckResult:
    c = cfg.classify
    v = classify_system(build_shape(c["f"]), build_shape(c["g"]), c["Q"], c["p"], c["q"])
    return CheckResult("classify", v.applicable_theorem, "informational", {"result": v.to_dict()})


def _sharpness(cfg: RunConfig) -> CheckResult:
    from .groups import euclidean_group, gauge_norm
    from .quadrature import QuadratureBudget
    from .sharpness import certify, search_counterexample

    sh = cfg.sharpness
    G = build_group(sh["group"]) if "group" in sh else None
    S = build_norm(sh.get("norm"), G) if G is not None else None
    fit = QuadratureBudget(int(sh.get("fit_points", 2000)), cfg.seed).derive("sharpness")
    res = search_counterexample(sh["Q"], sh["p"], sh["q"], sh["a"], sh["b"], group=G, norm=S,
                                budget=fit, certify_points=int(sh.get("certify_points", 10_000)))
    payload = {"search": res.to_dict()}
    verdict = "inconclusive"
    rows = []
    if res.found:
        G = G or euclidean_group(int(float(sh["Q"])))
        S = S or gauge_norm(G)
        weak = int(sh.get("weak_samples", 0))
        wb = QuadratureBudget(weak, cfg.seed).derive("sharpness", "weak") if weak else None
        cert = certify(res.ansatz, G, S, points=int(sh.get("certify_points", 10_000)),
                       seed=fit.derive("certify").seed, weak_budget=wb)
        payload["certification"] = cert.to_dict()
        verdict = "pass" if cert.passed else "violation"
        if cert.weak_form:
            rows = [{k: rec[k] for k in CSV_COLUMNS} for rec in cert.weak_form["records"]]
    return CheckResult("sharpness", "sharpness of the exponent condition", verdict, payload, rows)


def _density(cfg: RunConfig, G, S, inst) -> CheckResult:
    d = cfg.density
    u = build_field(d["field"], G, S) if "field" in d else (inst.u if inst else None)
    if u is None:
        raise ConfigError("density needs a field (or a system to take u from)")
    radii = tuple(float(r) for r in d.get("radii", cfg.radii))
    scan = density_limit(G, S, u, float(d["eps"]), radii, cfg.budget.derive("density"),
                         str(d.get("justification", "")))
    thr = float(d.get("threshold", 0.99))
    final = scan.ball[-1]
    rows = [{"check_id": "density", "R": r["R"], "lhs": r["ball_fraction"], "rhs": thr,
             "margin": r["ball_fraction"] - thr, "stderr": 0.0, "samples": r["samples"],
             "seed": r["seed"]} for r in scan.rows()]
    return CheckResult("density", ANCHOR_DENSITY, "pass" if final >= thr else "inconclusive",
                       dict(scan.to_dict(), threshold=thr, final_ball_fraction=final), rows)


def _preflight(cfg: RunConfig, inst):
    """Constant preconditions that would otherwise fail inside a worker thread."""
    from .estimates import chain_alpha, make_constants

    kw = cfg.estimate_constants_kwargs()
    consts = make_constants(inst, **kw)
    if any(c in cfg.checks for c in ("eq19", "eq22", "eq23")):
        consts.require_positive()
    if any(c in cfg.checks for c in ("eq25", "eq27", "th45", "wh")):
        sigma, delta = _sigmas(cfg, inst)
        consts.with_exponents(chain_alpha(inst.p, sigma), chain_alpha(inst.q, delta)).require_positive()
    return consts


def _sigmas(cfg: RunConfig, inst):
    from .estimates import chain_exponents

    s, d = chain_exponents(inst)
    h = cfg.harnack
    return (float(h["sigma"]) if h.get("sigma") is not None else s,
            float(h["delta"]) if h.get("delta") is not None else d)


def run(cfg: RunConfig, jobs: int = 1) -> RunReport:
    """Execute the configured checks; never raises on toolkit errors (they set exit 2)."""
    from . import estimates as E

    results: dict[str, CheckResult] = {}
    errors: list[str] = []
    G = S = inst = consts = None
    try:
        if cfg.needs_group():
            G = build_group(cfg.group_spec)
            S = build_norm(cfg.norm_spec, G)
        if cfg.needs_system() or ("wh" in cfg.checks and cfg.system):
            inst = cfg.build_instance(G, S)
            consts = _preflight(cfg, inst)
    except ToolkitError as exc:
        return RunReport(cfg.echo(), __version__, [], EXIT_ERROR, [f"{type(exc).__name__}: {exc}"])

    def wrap(cid, fn):
        try:
            return fn()
        except ToolkitError as exc:
            return CheckResult(cid, "", "error", {"error": f"{type(exc).__name__}: {exc}"})

    wave1 = {
        "ws": lambda: _estimate(E.check_weak_solution(inst)),
        "eq19": lambda: _estimate(E.check_caccioppoli(inst, consts)),
        "eq22": lambda: _estimate(E.check_eq22(inst, consts)),
        "eq23": lambda: _estimate(E.check_eq23(inst, consts)),
        "eq25": lambda: _estimate(E.check_eq25(inst, *_sigmas(cfg, inst), consts)),
        "density": lambda: _density(cfg, G, S, inst),
        "liouville": lambda: _liouville(cfg),
        "classify": lambda: _classify(cfg),
        "sharpness": lambda: _sharpness(cfg),
        "volume": lambda: _volume(cfg, G, S),
    }
    scans: dict = {}

    def do_scans():
        h = cfg.harnack
        if inst is not None:
            sigma, delta = _sigmas(cfg, inst)
            scans["pair"] = E.harnack_scans_for(inst, inst.radii, sigma, delta)
            out = list(scans["pair"])
        else:
            u = build_field(h["field"], G, S)
            out = [harnack_scan(G, S, u, float(h.get("p", 2.0)), h.get("radii", cfg.radii),
                                cfg.budget.derive("wh"), h.get("sigma"))]
        if h.get("radii") is not None and inst is not None:
            sigma, delta = _sigmas(cfg, inst)
            out = [harnack_scan(G, S, w, pp, h["radii"], cfg.budget.derive("wh", "grid", nm), s)
                   for w, pp, s, nm in ((inst.u, inst.p, sigma, "u"), (inst.v, inst.q, delta, "v"))]
        return _scan_result("wh", out, float(h.get("max_drift", 0.10)))

    need_scans = any(c in cfg.checks for c in ("wh", "eq27", "th45"))
    with ThreadPoolExecutor(max_workers=max(1, int(jobs))) as pool:
        fut = {c: pool.submit(wrap, c, wave1[c]) for c in cfg.checks if c in wave1}
        if need_scans:
            fut["wh"] = pool.submit(wrap, "wh", do_scans)
        for c, f in fut.items():
            results[c] = f.result()
        wave2 = {}
        if "pair" in scans:
            su, sv = scans["pair"]
            wave2 = {"eq27": lambda: _estimate(E.check_eq27(inst, su, sv, consts)),
                     "th45": lambda: _estimate(E.check_th45(inst, scans=(su, sv), consts=consts))}
        elif any(c in cfg.checks for c in ("eq27", "th45")):
            errors.append("eq27/th45 need a system for the Harnack scans")
        fut = {c: pool.submit(wrap, c, wave2[c]) for c in cfg.checks if c in wave2}
        for c, f in fut.items():
            results[c] = f.result()

    ordered = [results[c] for c in cfg.checks if c in results]
    if any(r.verdict == "error" for r in ordered) or errors:
        status = EXIT_ERROR
    elif any(r.verdict == "violation" for r in ordered):
        status = EXIT_VIOLATION
    else:
        status = EXIT_PASS
    return RunReport(cfg.echo(), __version__, ordered, status, errors)
