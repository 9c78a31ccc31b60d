"""Command line: compile TL-CDs, build causal PRMs, train, solve exactly, check maps."""

import argparse
import logging
import sys

from .automata import compose_parallel, dump_dfa, minimize, to_dot
from .envs import load_map, tlcd_holds
from .harness import ExperimentConfig, VARIANTS, read_text, run_experiment
from .learn import Task, exact_solve, optimal_reward_rate, policy_value, project_policy
from .ltlf import StateExplosionError, compile_tlcd, parse_tlcd
from .machines import build_causal_prm, dump_prm, load_prm

log = logging.getLogger("causalprm")


def _seed_list(text):
    return tuple(int(s) for s in text.split(",") if s.strip())


def _compile_all(paths, max_states):
    cds = [parse_tlcd(read_text(p)) for p in paths]
    return cds, [compile_tlcd(cd, max_states=max_states) for cd in cds]


def cmd_compile(args):
    _, dfas = _compile_all(args.tlcd, args.max_states)
    d = minimize(compose_parallel(*dfas))
    if args.dot:
        print(to_dot(d), end="")
        return 0
    print(dump_dfa(d), end="")
    sinks = " ".join(map(str, sorted(d.rejecting_sinks))) or "none"
    print(f"# {d.n_states} states, rejecting sinks: {sinks}")
    return 0


def cmd_product(args):
    prm = load_prm(read_text(args.prm))
    cds, dfas = _compile_all(args.tlcd, args.max_states)
    if args.map:
        g = load_map(read_text(args.map))
        for path, cd in zip(args.tlcd, cds):
            res = tlcd_holds(g, cd, args.max_len)
            if not res:
                word = " ".join("{" + ",".join(sorted(l)) + "}" for l in res.counterexample)
                log.warning("%s does not hold on the map; counterexample: %s", path, word)
    causal = build_causal_prm(prm, dfas, args.gamma)
    b = causal.product
    lines = [dump_prm(b.prm).rstrip("\n"),
             f"# product of {prm.n_states} machine states with {len(dfas)} causal DFA(s): "
             f"{b.n_states} states, m = {b.minimal_reward!r}",
             "# state  provenance  v1  v2  note"]
    for x in range(b.n_states):
        note = []
        if x in b.added_terminals:
            note.append("added terminal")
        elif x in b.prm.terminals:
            note.append("terminal")
        if x in b.sink_component:
            note.append("causal sink")
        lines.append(f"# {b.prm.names[x]}  {b.components[x]}  {causal.v1[x]:.6g}  "
                     f"{causal.v2[x]:.6g}  {', '.join(note)}".rstrip())
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return 0


def cmd_train(args):
    cfg = ExperimentConfig.load(args.config)
    overrides = {}
    if args.seed_list:
        overrides["seeds"] = _seed_list(args.seed_list)
    if args.out:
        overrides["out"] = args.out
    if args.gamma is not None:
        overrides["gamma"] = args.gamma
    if args.total_steps is not None:
        overrides["total_steps"] = args.total_steps
    if overrides:
        cfg = ExperimentConfig(**{**cfg.__dict__, **overrides})
    variants = VARIANTS if args.variant == "both" else (args.variant,)
    results = run_experiment(cfg, variants, args.workers)
    for variant, res in results.items():
        print(f"{variant}: final mean reward per step {res.mean.values[-1]:.6g}")
    print(f"wrote {cfg.out}")
    return 0


def cmd_eval(args):
    g = load_map(read_text(args.map))
    prm = load_prm(read_text(args.prm))
    task_a = Task(g, prm)
    sol_a = exact_solve(task_a, args.gamma)
    v_a = sol_a.initial_value(task_a)
    print(f"original PRM: {task_a.n_cells} cells x {prm.n_states} states")
    print(f"  optimal initial value {v_a:.10g}")
    print(f"  greedy reward per step {optimal_reward_rate(task_a, args.gamma, args.max_steps):.6g}")
    print(f"  first action {'NSEW'[sol_a.policy[task_a.start, prm.initial]]}")
    if args.tlcd:
        _, dfas = _compile_all(args.tlcd, args.max_states)
        b = build_causal_prm(prm, dfas, args.gamma).product
        task_b = Task(g, b.prm)
        sol_b = exact_solve(task_b, args.gamma)
        v_b = sol_b.initial_value(task_b)
        pol = project_policy(sol_b, task_b, b, prm.n_states)
        v_proj = policy_value(task_a, pol, args.gamma)[task_a.start, prm.initial]
        print(f"causal PRM: {b.n_states} states ({len(b.added_terminals)} added terminals)")
        print(f"  optimal initial value {v_b:.10g}")
        print(f"  projected policy on the original PRM {v_proj:.10g}")
        gap = max(abs(v_a - v_b), abs(v_a - v_proj))
        print(f"  largest gap {gap:.3g}")
        if gap > 1e-6:
            return 1
    return 0


def cmd_check(args):
    g = load_map(read_text(args.map))
    status = 0
    for path in args.tlcd:
        res = tlcd_holds(g, parse_tlcd(read_text(path)), args.max_len, args.semantics)
        if res:
            print(f"{path}: holds up to length {args.max_len}")
        else:
            word = " ".join("{" + ",".join(sorted(l)) + "}" for l in res.counterexample)
            print(f"{path}: violated by {word or '(empty word)'}")
            status = 1
    return status


def build_parser():
    p = argparse.ArgumentParser(prog="causalprm", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def tlcd_args(sp):
        sp.add_argument("--max-states", type=int, default=10_000,
                        help="abort DFA compilation beyond this many states")

    c = sub.add_parser("compile", help="compile TL-CDs into one minimal causal DFA")
    c.add_argument("tlcd", nargs="+")
    c.add_argument("--dot", action="store_true", help="print graphviz instead of the text format")
    tlcd_args(c)
    c.set_defaults(func=cmd_compile)

    pr = sub.add_parser("product", help="build the causal PRM and report added terminals")
    pr.add_argument("prm")
    pr.add_argument("tlcd", nargs="+")
    pr.add_argument("--gamma", type=float, default=0.9)
    pr.add_argument("--map", help="warn if a TL-CD fails the bounded check on this map")
    pr.add_argument("--max-len", type=int, default=10)
    pr.add_argument("--out")
    tlcd_args(pr)
    pr.set_defaults(func=cmd_product)

    t = sub.add_parser("train", help="run QRM over the seeds of an experiment config")
    t.add_argument("config")
    t.add_argument("--variant", choices=("both",) + VARIANTS, default="both")
    t.add_argument("--seed-list", help="comma-separated seeds, overriding the config")
    t.add_argument("--out", help="output directory, overriding the config")
    t.add_argument("--gamma", type=float)
    t.add_argument("--total-steps", type=int)
    t.add_argument("--workers", type=int, default=1)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="exact optimal values with and without the causal PRM")
    e.add_argument("map")
    e.add_argument("prm")
    e.add_argument("tlcd", nargs="*")
    e.add_argument("--gamma", type=float, default=0.9)
    e.add_argument("--max-steps", type=int, default=400, help="episode cap for the reward rate")
    tlcd_args(e)
    e.set_defaults(func=cmd_eval)

    k = sub.add_parser("check", help="bounded check that TL-CDs hold on a map")
    k.add_argument("map")
    k.add_argument("tlcd", nargs="+")
    k.add_argument("--max-len", type=int, default=10)
    k.add_argument("--semantics", choices=("prefix", "word"), default="prefix")
    k.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except StateExplosionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
