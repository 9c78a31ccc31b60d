"""Train QRM with and without the causal PRM on the packaged case studies.

Writes learning curves under --out/<case>/ and prints, per case, the median number of
steps at which a seed first reaches 90% of the optimal greedy reward per step.

    python3 scripts/run_case_studies.py --out runs --workers 4
"""

import argparse
import json
import logging
from pathlib import Path

from causalprm.harness import CASE_STUDIES, case_config, load_experiment, run_experiment
from causalprm.learn import median_steps_to_fraction, optimal_reward_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", nargs="+", choices=CASE_STUDIES, default=list(CASE_STUDIES))
    ap.add_argument("--out", default="runs")
    ap.add_argument("--total-steps", type=int)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    summary = {}
    for case in args.cases:
        overrides = {"out": Path(args.out) / case}
        if args.total_steps:
            overrides["total_steps"] = args.total_steps
        cfg = case_config(case, **overrides)
        results = run_experiment(cfg, workers=args.workers)
        exp = load_experiment(cfg)
        ref = optimal_reward_rate(exp.task("plain"), cfg.gamma, cfg.max_episode_steps)
        med = {v: median_steps_to_fraction(r, ref, cfg.window) for v, r in results.items()}
        summary[case] = {"optimal_rate": ref, "median_steps_to_90": med}
        print(f"{case:12s} optimal {ref:.5f}/step  causal {med['causal']:>8g}  plain {med['plain']:>8g}")
    path = Path(args.out) / "summary.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
