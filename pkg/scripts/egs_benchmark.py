"""Well benchmark: every learner on the surrogate fracture table.

Runs the exact-nuisance scenario and the estimated one, each with a
linear and a boosted base learner.

Usage: python scripts/egs_benchmark.py [--seeds 3] [--table my_fractures.csv] [--efficiency eff.csv]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from mvcate.harness import emit_table, parse_config, run, write_results

TEMPLATE = """
[experiment]
name = egs-{scenario}
scenario = {scenario}
learners = all
base_learners = {bases}
gps = logistic
seeds = 0-{last}

[dgp]
source = egs
design = preferential
n = {n}
sigma = 0.05
fracture_table = {table}
efficiency = {efficiency}

[base.boosting]
n_rounds = {rounds}
"""


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--n", type=int, default=10_000)
    parser.add_argument("--table", default="surrogate", help="fracture CSV or 'surrogate'")
    parser.add_argument("--efficiency", default="default", help="efficiency CSV or 'default'")
    parser.add_argument("--rounds", type=int, default=100, help="boosting rounds")
    parser.add_argument("--out", default="results/egs")
    args = parser.parse_args(argv)

    for scenario, bases in (("exact", "linear"), ("estimated", "linear, boosting")):
        cfg = parse_config(TEMPLATE.format(
            scenario=scenario, bases=bases, last=args.seeds - 1, n=args.n,
            table=args.table, efficiency=args.efficiency, rounds=args.rounds,
        ))
        result = run(cfg)
        out = Path(args.out) / scenario
        write_results(result, cfg, out)
        table = emit_table(result)
        (out / "table.md").write_text(table)
        print(f"## {scenario}\n\n{table}")


if __name__ == "__main__":
    main()
