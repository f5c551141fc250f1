"""Search explicit radial pairs on a list of Euclidean tuples where the condition fails."""

from __future__ import annotations

import argparse
import json
from dataclasses import dataclass, field
from pathlib import Path

from carnot_liouville.errors import PreconditionError
from carnot_liouville.groups import euclidean_group
from carnot_liouville.liouville import hyp_condition
from carnot_liouville.quadrature import QuadratureBudget
from carnot_liouville.sharpness import certify, search_counterexample

ROOT = Path(__file__).resolve().parents[1]


@dataclass
class SharpnessSearch:
    tuples: list = field(default_factory=lambda: [(10, 2, 2, 5, 5), (8, 2, 2, 4, 6), (12, 2, 2, 3, 9),
                                                  (6, 2, 2, 3, 3), (5, 2, 2, 2, 2)])
    certify_points: int = 10_000
    recertify_points: int = 100_000
    weak_samples: int = 0
    out: Path = ROOT / "results" / "sharpness_search.json"


def main(opts: SharpnessSearch):
    report = []
    for Q, p, q, a, b in opts.tuples:
        entry = {"Q": Q, "p": p, "q": q, "a": a, "b": b,
                 "condition_holds": hyp_condition(Q, p, q, a, b).condition_holds}
        try:
            res = search_counterexample(Q, p, q, a, b, certify_points=opts.certify_points)
        except PreconditionError as exc:
            entry["status"] = f"skipped: {exc}"
            report.append(entry)
            print(f"{(Q, p, q, a, b)}: {entry['status']}")
            continue
        entry["search"] = res.to_dict()
        if res.found:
            wb = QuadratureBudget(opts.weak_samples, 1) if opts.weak_samples else None
            cert = certify(res.ansatz, euclidean_group(Q), points=opts.recertify_points, seed=7,
                           weak_budget=wb)
            entry["recertification"] = cert.to_dict()
            entry["status"] = "certified" if cert.passed else "recertification failed"
        else:
            entry["status"] = "not found"
        report.append(entry)
        print(f"{(Q, p, q, a, b)}: {entry['status']}")
    opts.out.parent.mkdir(parents=True, exist_ok=True)
    opts.out.write_text(json.dumps(report, indent=2))
    print(f"wrote {opts.out}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--weak-samples", type=int, default=0)
    ap.add_argument("--out", type=Path, default=SharpnessSearch.out)
    a = ap.parse_args()
    main(SharpnessSearch(weak_samples=a.weak_samples, out=a.out))
