"""Experiment configs, packaged case studies and CSV output for learning curves."""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import yaml

from .envs import LabeledGridworld, load_map
from .learn import QrmSettings, Task, TrainResult, train
from .ltlf import TlCd, compile_tlcd, parse_tlcd
from .machines import CausalPrm, Prm, build_causal_prm, load_prm

log = logging.getLogger(__name__)

CASE_DIR = Path(__file__).parent / "casestudies"
CASE_STUDIES = ("coffee_soda", "two_doors", "four_doors", "office")
VARIANTS = ("causal", "plain")


def resolve(path) -> Path:
    """`@name/file` points into the packaged case studies; anything else is an ordinary path."""
    text = str(path)
    if text.startswith("@"):
        return CASE_DIR / text[1:]
    return Path(path)


def read_text(path) -> str:
    return resolve(path).read_text()


@dataclass(frozen=True)
class ExperimentConfig:
    map: Path
    prm: Path
    tlcd: Optional[Path] = None
    redundant_tlcds: Tuple[Path, ...] = ()
    gamma: float = 0.9
    alpha: float = 0.1
    epsilon: float = 0.1
    max_episode_steps: int = 400
    total_steps: int = 200_000
    window: int = 1000
    sample_interval: int = 100
    seeds: Tuple[int, ...] = tuple(range(20))
    out: Path = Path("runs")
    expected_update: bool = True

    def __post_init__(self):
        object.__setattr__(self, "out", Path(self.out))
        object.__setattr__(self, "seeds", tuple(int(x) for x in self.seeds))
        object.__setattr__(self, "redundant_tlcds", tuple(Path(p) for p in self.redundant_tlcds))
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be non-empty and distinct")
        if self.redundant_tlcds and self.tlcd is None:
            raise ValueError("redundant TL-CDs need a primary tlcd")
        self.settings  # validates the learning hyperparameters

    @property
    def settings(self) -> QrmSettings:
        return QrmSettings(self.gamma, self.alpha, self.epsilon, self.max_episode_steps,
                           self.total_steps, self.window, self.sample_interval, self.expected_update)

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "ExperimentConfig":
        """Input paths are taken relative to `base`; `out` is left as written."""
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("map", "prm"):
            if key not in data:
                raise ValueError(f"config needs a {key!r} entry")

        def where(p):
            return resolve(p) if str(p).startswith("@") else base / p

        data["map"], data["prm"] = where(data["map"]), where(data["prm"])
        if data.get("tlcd") is not None:
            data["tlcd"] = where(data["tlcd"])
        data["redundant_tlcds"] = tuple(where(p) for p in data.get("redundant_tlcds") or ())
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = resolve(path)
        return cls.from_dict(yaml.safe_load(path.read_text()) or {}, path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("map", "prm", "tlcd", "out"):
            d[key] = None if d[key] is None else str(d[key])
        d["redundant_tlcds"] = [str(p) for p in self.redundant_tlcds]
        d["seeds"] = list(self.seeds)
        return d


@dataclass(frozen=True, eq=False)
class Experiment:
    """Loaded inputs of a config: the map, the original PRM and the causal PRM (if any)."""

    config: ExperimentConfig
    env: LabeledGridworld
    prm: Prm
    tlcds: Tuple[TlCd, ...]
    causal: Optional[CausalPrm]

    def task(self, variant: str) -> Task:
        if variant == "plain":
            return Task(self.env, self.prm)
        if variant == "causal":
            if self.causal is None:
                raise ValueError("the causal variant needs a tlcd in the config")
            return Task(self.env, self.causal.product.prm)
        raise ValueError(f"unknown variant {variant!r}")


def load_experiment(cfg: ExperimentConfig, max_states: int = 10_000) -> Experiment:
    env = load_map(read_text(cfg.map))
    prm = load_prm(read_text(cfg.prm))
    paths = ([cfg.tlcd] if cfg.tlcd is not None else []) + list(cfg.redundant_tlcds)
    tlcds = tuple(parse_tlcd(read_text(p)) for p in paths)
    causal = None
    if tlcds:
        dfas = [compile_tlcd(cd, max_states=max_states) for cd in tlcds]
        causal = build_causal_prm(prm, dfas, cfg.gamma)
    return Experiment(cfg, env, prm, tlcds, causal)


def case_config(name: str, **overrides) -> ExperimentConfig:
    if name not in CASE_STUDIES:
        raise KeyError(f"unknown case study {name!r}; known: {', '.join(CASE_STUDIES)}")
    cfg = ExperimentConfig.load(CASE_DIR / name / "config.yaml")
    if "redundant_tlcds" in overrides:
        overrides["redundant_tlcds"] = tuple(resolve(p) for p in overrides["redundant_tlcds"])
    data = {**cfg.__dict__, **overrides}
    return ExperimentConfig(**data)


def redundant_tlcd(name: str) -> Path:
    return CASE_DIR / name / "redundant.txt"


# ---------------------------------------------------------------- CSV output

def format_curve(steps, values) -> str:
    """`Step,Value` table with shortest round-trip floats."""
    lines = ["Step,Value"]
    lines += [f"{int(s)},{float(v)!r}" for s, v in zip(steps, values)]
    return "\n".join(lines) + "\n"


def read_curve(path) -> Tuple[list, list]:
    rows = Path(path).read_text().splitlines()
    if not rows or rows[0] != "Step,Value":
        raise ValueError(f"{path}: missing 'Step,Value' header")
    steps, values = [], []
    for row in rows[1:]:
        s, v = row.split(",")
        steps.append(int(s))
        values.append(float(v))
    return steps, values


def write_results(out: Path, variant: str, result: TrainResult) -> Dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    files = {"mean": out / f"{variant}.csv"}
    files["mean"].write_text(format_curve(result.steps, result.mean.values))
    for i, seed in enumerate(result.seeds):
        path = out / f"{variant}_seed{seed}.csv"
        path.write_text(format_curve(result.steps, result.per_seed[i]))
        files[f"seed{seed}"] = path
    return files


def run_experiment(cfg: ExperimentConfig, variants: Sequence[str] = VARIANTS,
                   workers: int = 1) -> Dict[str, TrainResult]:
    """Train each variant over every seed, then write the CSVs and a metadata file to cfg.out."""
    exp = load_experiment(cfg)
    results = {}
    for variant in variants:
        task = exp.task(variant)
        log.info("training %s: %d cells x %d machine states, %d seeds",
                 variant, task.n_cells, task.n_states, len(cfg.seeds))
        results[variant] = train(task, cfg.settings, cfg.seeds, workers)
    meta = {"config": cfg.to_dict(), "variants": {}}
    for variant, result in results.items():
        write_results(cfg.out, variant, result)
        meta["variants"][variant] = {"machine_states": exp.task(variant).n_states,
                                     "final_mean": float(result.mean.values[-1])}
    if exp.causal is not None:
        meta["added_terminals"] = len(exp.causal.product.added_terminals)
    (cfg.out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return results
