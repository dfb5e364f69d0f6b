"""Exact-nuisance learners on the linear design: writes results, a table and a chart.

Usage: python scripts/run_linear_exact.py [--seeds 10] [--out results/linear_exact]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from mvcate.harness import emit_table, parse_config, run, write_results

TEMPLATE = """
[experiment]
name = linear-exact-{design}
scenario = exact
learners = all
base_learners = linear
seeds = 0-{last}

[dgp]
model = linear
design = {design}
n = {n}
K = 9
sigma = {sigma}
"""


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--sigma", type=float, default=0.1)
    parser.add_argument("--out", default="results/linear_exact")
    args = parser.parse_args(argv)

    out = Path(args.out)
    for design in ("rct", "preferential"):
        cfg = parse_config(TEMPLATE.format(design=design, last=args.seeds - 1, n=args.n, sigma=args.sigma))
        result = run(cfg)
        write_results(result, cfg, out / design)
        table = emit_table(result)
        (out / design / "table.md").write_text(table)
        print(f"## {design} (config {cfg.config_hash})\n\n{table}")


if __name__ == "__main__":
    main()
