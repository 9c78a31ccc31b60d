"""Add a sink-free counter TL-CD on top of each case study's causal DFA and compare.

The counter multiplies the causal PRM's state count without pruning anything, so the
optimal value should not move and learning speed should barely change.
"""

import argparse

from causalprm.harness import CASE_STUDIES, case_config, load_experiment, redundant_tlcd
from causalprm.learn import exact_solve, median_steps_to_fraction, optimal_reward_rate, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", nargs="+", choices=CASE_STUDIES, default=list(CASE_STUDIES))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    print(f"{'case':12s} {'states':>13s} {'value gap':>10s} {'median steps':>20s}")
    for case in args.cases:
        base = load_experiment(case_config(case))
        red = load_experiment(case_config(case, redundant_tlcds=(redundant_tlcd(case),)))
        cfg = base.config
        ref = optimal_reward_rate(base.task("plain"), cfg.gamma, cfg.max_episode_steps)
        row = []
        for exp in (base, red):
            task = exp.task("causal")
            value = exact_solve(task, cfg.gamma).initial_value(task)
            result = train(task, cfg.settings, cfg.seeds, args.workers)
            row.append((task.n_states, value, median_steps_to_fraction(result, ref, cfg.window)))
        (n0, v0, m0), (n1, v1, m1) = row
        print(f"{case:12s} {n0:>5d} -> {n1:<5d} {abs(v1 - v0):10.1e} {m0:>9g} -> {m1:<9g}")


if __name__ == "__main__":
    main()
