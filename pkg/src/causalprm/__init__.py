"""Causal diagrams in temporal logic, compiled to DFAs and fused with probabilistic reward machines."""

from .automata import CausalDfa, compose_parallel, language_equiv, minimize
from .envs import LabeledGridworld, load_map, tlcd_holds
from .harness import ExperimentConfig, case_config, load_experiment, run_experiment
from .learn import QrmSettings, Task, exact_solve, train
from .ltlf import compile_to_dfa, compile_tlcd, evaluate, parse_formula, parse_tlcd
from .machines import Prm, build_causal_prm, compute_product, load_prm, value_iteration

__all__ = [
    "CausalDfa", "ExperimentConfig", "LabeledGridworld", "Prm", "QrmSettings", "Task", "build_causal_prm",
    "compile_tlcd", "compile_to_dfa", "compose_parallel", "compute_product", "evaluate",
    "exact_solve", "language_equiv", "load_map", "load_prm", "minimize", "parse_formula",
    "parse_tlcd", "tlcd_holds", "train", "value_iteration", "case_config", "load_experiment",
    "run_experiment",
]
