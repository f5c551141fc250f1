"""Run every YAML config under configs/ and write JSON and CSV reports."""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass
from pathlib import Path

from carnot_liouville.config import RunConfig
from carnot_liouville.runner import run

ROOT = Path(__file__).resolve().parents[1]


@dataclass
class PresetRun:
    config_dir: Path = ROOT / "configs"
    out_dir: Path = ROOT / "results" / "presets"
    jobs: int = 4
    skip: tuple = ("tampered_c1",)


def main(opts: PresetRun) -> int:
    worst = 0
    for path in sorted(opts.config_dir.glob("*.yaml")):
        if path.stem in opts.skip:
            continue
        t0 = time.perf_counter()
        cfg = RunConfig.load(path)
        rep = run(cfg, jobs=opts.jobs)
        rep.write(opts.out_dir, ("json", "csv"), stem=cfg.name)
        verdicts = ", ".join(f"{r.check_id}={r.verdict}" for r in rep.results)
        print(f"{cfg.name:<18} exit={rep.exit_status} {time.perf_counter() - t0:6.1f}s  {verdicts}")
        worst = max(worst, rep.exit_status)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=PresetRun.out_dir)
    ap.add_argument("--jobs", type=int, default=PresetRun.jobs)
    a = ap.parse_args()
    raise SystemExit(main(PresetRun(out_dir=a.out, jobs=a.jobs)))
