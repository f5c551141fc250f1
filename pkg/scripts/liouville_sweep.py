"""Map the region of (a, b) where the exponent condition holds, for a few (Q, p, q).

The CSV has one row per grid point and is ready for a heat map.
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from carnot_liouville.liouville import hyp_terms_vec, hyp_vec

ROOT = Path(__file__).resolve().parents[1]


@dataclass
class LiouvilleSweep:
    cases: list = field(default_factory=lambda: [(3, 2, 2), (4, 2, 2), (10, 2, 2), (10, 3, 1.5)])
    a_max: float = 20.0
    b_max: float = 20.0
    points: int = 200
    out: Path = ROOT / "results" / "liouville_sweep.csv"


def main(opts: LiouvilleSweep):
    a = np.linspace(opts.a_max / opts.points, opts.a_max, opts.points)
    b = np.linspace(opts.b_max / opts.points, opts.b_max, opts.points)
    A, B = np.meshgrid(a, b, indexing="ij")
    opts.out.parent.mkdir(parents=True, exist_ok=True)
    with open(opts.out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["Q", "p", "q", "a", "b", "min_term", "rhs", "holds", "boundary"])
        for Q, p, q in opts.cases:
            holds, band = hyp_vec(Q, p, q, A, B)
            key, rhs, _ = hyp_terms_vec(Q, p, q, A, B)
            print(f"Q={Q} p={p} q={q}: condition holds on {holds.mean():.1%} of the grid")
            for i, j in np.ndindex(A.shape):
                wr.writerow([Q, p, q, A[i, j], B[i, j], key[i, j], rhs[i, j], bool(holds[i, j]),
                             bool(band[i, j])])
    print(f"wrote {opts.out}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=LiouvilleSweep.points)
    ap.add_argument("--out", type=Path, default=LiouvilleSweep.out)
    a = ap.parse_args()
    main(LiouvilleSweep(points=a.points, out=a.out))
