"""mPEHE of plug-in learners against the number of treatment levels (hazard design).

Usage: python scripts/hazard_k_sweep.py [--K 5 10 15 20] [--seeds 10] [--n 10000]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from mvcate.harness import ExperimentResult, emit_plot, emit_table, parse_config, run, write_results

TEMPLATE = """
[experiment]
name = hazard-k-sweep
scenario = estimated
learners = {learners}
base_learners = boosting
gps = boosting
seeds = 0-{last}

[dgp]
model = hazard
design = preferential
n = {n}
K = {K}
sigma = 0.1
"""


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--K", type=int, nargs="+", default=[5, 10, 15, 20])
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--n", type=int, default=10_000)
    parser.add_argument("--learners", default="T, S")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", default="results/hazard_k_sweep")
    args = parser.parse_args(argv)

    cfg = parse_config(TEMPLATE.format(
        learners=args.learners, last=args.seeds - 1, n=args.n, K=", ".join(map(str, args.K)),
    ))
    result: ExperimentResult = run(cfg, workers=args.workers)
    out = Path(args.out)
    write_results(result, cfg, out)
    (out / "k_sweep.svg").write_text(emit_plot(result))
    table = emit_table(result, group_by="K", column="learner")
    (out / "table.md").write_text(table)
    print(table)


if __name__ == "__main__":
    main()
