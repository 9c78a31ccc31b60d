"""Probabilistic reward machines, their Bellman values, and products with causal DFAs."""

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .automata import CausalDfa
from .labels import Alphabet, fmt_label
from .ltlf import holds_now, parse_formula

PROB_TOL = 1e-9


class PrmError(ValueError):
    pass


class Outcome(NamedTuple):
    state: int
    prob: float
    reward: float


@dataclass(frozen=True)
class Prm:
    """table[u][label index] lists the outcomes of reading that label in u; terminal rows are empty."""

    alphabet: Alphabet
    table: Tuple[Tuple[Tuple[Outcome, ...], ...], ...]
    initial: int
    terminals: FrozenSet[int]
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        n, k = len(self.table), len(self.alphabet)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"u{i}" for i in range(n)))
        if not 0 <= self.initial < n:
            raise PrmError(f"initial state {self.initial} out of range")
        for u, row in enumerate(self.table):
            name = self.names[u]
            if u in self.terminals:
                if any(row):
                    raise PrmError(f"terminal state {name} has outgoing transitions")
                continue
            if len(row) != k:
                raise PrmError(f"state {name} defines {len(row)} labels, expected {k}")
            for i, outs in enumerate(row):
                if not outs:
                    raise PrmError(f"state {name}: no transition for label {fmt_label(self.alphabet.label(i))}")
                if any(not 0 <= o.prob <= 1 or not 0 <= o.state < n for o in outs):
                    raise PrmError(f"state {name}: bad outcome in {outs}")
                total = sum(o.prob for o in outs)
                if abs(total - 1) > PROB_TOL:
                    raise PrmError(f"state {name}, label {fmt_label(self.alphabet.label(i))}: "
                                   f"probabilities sum to {total}")

    @property
    def ap(self) -> Tuple[str, ...]:
        return self.alphabet.props

    @property
    def n_states(self) -> int:
        return len(self.table)

    def __len__(self):
        return len(self.table)

    @cached_property
    def rewards(self) -> FrozenSet[float]:
        """The output alphabet: every reward on some transition."""
        return frozenset(o.reward for row in self.table for outs in row for o in outs)

    def outcomes(self, u: int, label: Iterable[str]) -> Tuple[Outcome, ...]:
        """Outcomes of reading `label` in u; propositions outside the alphabet are ignored."""
        if u in self.terminals:
            return ()
        return self.table[u][self.alphabet.index(label, strict=False)]

    @cached_property
    def arrays(self):
        """Dense padded (next, prob, reward) arrays of shape (states, labels, max outcomes)."""
        n, k = self.n_states, len(self.alphabet)
        width = max((len(outs) for row in self.table for outs in row), default=1)
        nxt = np.tile(np.arange(n)[:, None, None], (1, k, width))
        prob = np.zeros((n, k, width))
        rew = np.zeros((n, k, width))
        for u, row in enumerate(self.table):
            for i, outs in enumerate(row):
                for j, o in enumerate(outs):
                    nxt[u, i, j], prob[u, i, j], rew[u, i, j] = o
        for a in (nxt, prob, rew):
            a.flags.writeable = False
        return nxt, prob, rew

    @cached_property
    def terminal_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_states, dtype=bool)
        mask[list(self.terminals)] = True
        return mask


def prm_from_records(ap, states, initial, terminals, records) -> Prm:
    """Build a PRM from guard-level records (from, guard, to, prob, reward).

    For each non-terminal state and label exactly one distinct guard may hold; all records
    sharing that guard form the outcome distribution."""
    alphabet = Alphabet(ap)
    states = list(states)
    ids = {s: i for i, s in enumerate(states)}
    term = frozenset(ids[t] for t in terminals)
    by_state = {i: {} for i in range(len(states))}
    for src, guard, dst, prob, reward in records:
        if isinstance(guard, str):
            guard = parse_formula(guard, alphabet.props)
        if guard.temporal:
            raise PrmError(f"guard {guard} uses temporal operators")
        if src not in ids or dst not in ids:
            raise PrmError(f"transition {src} -> {dst} names an undeclared state")
        if ids[src] in term:
            raise PrmError(f"terminal state {src} has outgoing transitions")
        by_state[ids[src]].setdefault(guard, []).append(Outcome(ids[dst], float(prob), float(reward)))
    table = []
    for u in range(len(states)):
        if u in term:
            table.append(())
            continue
        row = []
        for label in alphabet:
            hits = [g for g in by_state[u] if holds_now(g, label)]
            if len(hits) != 1:
                what = "no guard" if not hits else f"guards {', '.join(map(str, hits))}"
                raise PrmError(f"state {states[u]}: {what} for label {fmt_label(label)}")
            row.append(tuple(by_state[u][hits[0]]))
        table.append(tuple(row))
    return Prm(alphabet, tuple(table), ids[initial], term, tuple(str(s) for s in states))


def load_prm(text: str) -> Prm:
    doc = yaml.safe_load(text)
    try:
        records = [(t["from"], str(t["guard"]), t["to"], str(t.get("prob", "1")), str(t.get("reward", "0")))
                   for t in doc.get("transitions") or []]
        states = [str(s) for s in doc["states"]]
        records = [(str(a), g, str(b), p, r) for a, g, b, p, r in records]
        return prm_from_records(doc.get("ap") or [], states, str(doc["initial"]),
                                [str(t) for t in doc.get("terminals") or []], records)
    except KeyError as e:
        raise PrmError(f"PRM file is missing field {e}") from None


def prm_records(p: Prm):
    """Guard-level records equivalent to p's table, one guard per distinct outcome list."""
    from .automata import guard_formula

    out = []
    for u, row in enumerate(p.table):
        groups = {}
        for i, outs in enumerate(row):
            groups.setdefault(outs, []).append(p.alphabet.label(i))
        for outs, labels in groups.items():
            guard = guard_formula(labels, p.ap)
            for o in outs:
                out.append((p.names[u], guard, p.names[o.state], o.prob, o.reward))
    return out


def dump_prm(p: Prm) -> str:
    doc = {
        "ap": list(p.ap),
        "states": list(p.names),
        "initial": p.names[p.initial],
        "terminals": [p.names[t] for t in sorted(p.terminals)],
        "transitions": [{"from": a, "guard": g, "to": b, "prob": repr(pr), "reward": repr(r)}
                        for a, g, b, pr, r in prm_records(p)],
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=120)


def prm_step(p: Prm, u: int, label: Iterable[str], rng) -> Tuple[int, float]:
    outs = p.outcomes(u, label)
    if not outs:
        raise PrmError(f"no transition from state {p.names[u]} on {fmt_label(label)}")
    draw = rng.random()
    acc = 0.0
    for o in outs:
        acc += o.prob
        if draw < acc:
            return o.state, o.reward
    return outs[-1].state, outs[-1].reward


def run_prm(p: Prm, word: Sequence[Iterable[str]], rng) -> Tuple[List[int], List[float]]:
    """Sample a run on `word`, stopping early if a terminal state is reached."""
    u, states, rewards = p.initial, [p.initial], []
    for label in word:
        if u in p.terminals:
            break
        u, r = prm_step(p, u, label, rng)
        states.append(u)
        rewards.append(r)
    return states, rewards


def negate(p: Prm) -> Prm:
    table = tuple(tuple(tuple(Outcome(o.state, o.prob, 0.0 - o.reward) for o in outs) for outs in row)
                  for row in p.table)
    return replace(p, table=table)


# ---------------------------------------------------------------- values

@dataclass(frozen=True)
class ValueTable:
    values: np.ndarray
    gamma: float
    tol: float
    iterations: int = 0

    def __getitem__(self, u):
        return self.values[u]

    def __len__(self):
        return len(self.values)


def label_values(p: Prm, v: np.ndarray, gamma: float) -> np.ndarray:
    """Expected one-step return of each (state, label) given successor values v."""
    nxt, prob, rew = p.arrays
    return (prob * (rew + gamma * v[nxt])).sum(axis=-1)


def value_iteration(p: Prm, gamma: float, tol: float = 1e-12, max_iter: int = 100_000) -> ValueTable:
    """Synchronous Bellman iteration v(u) = max_l sum_u' tau (sigma + gamma v(u'))."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    v = np.zeros(p.n_states)
    term = p.terminal_mask
    for it in range(1, max_iter + 1):
        new = label_values(p, v, gamma).max(axis=1)
        new[term] = 0.0
        delta = np.max(np.abs(new - v), initial=0.0)
        v = new
        if delta < tol:
            break
    return ValueTable(v, gamma, tol, it)


def minimal_reward(p: Prm, gamma: float, values: Optional[ValueTable] = None) -> float:
    v = values if values is not None else value_iteration(p, gamma)
    max_abs_reward = max((abs(r) for r in p.rewards), default=0.0)
    return -1.0 - max_abs_reward - float(np.max(v.values, initial=0.0))


# ---------------------------------------------------------------- products

@dataclass(frozen=True)
class ProductPrm:
    prm: Prm
    components: Tuple[Tuple[int, ...], ...]  # product state -> (prm state, dfa state, ...)
    sink_component: FrozenSet[int]
    minimal_reward: float
    added_terminals: FrozenSet[int] = field(default_factory=frozenset)

    @property
    def n_states(self):
        return self.prm.n_states

    def state_of(self, *components) -> int:
        return self.components.index(tuple(components))


def compute_product(p: Union[Prm, ProductPrm], d: CausalDfa, m: float) -> ProductPrm:
    """Product of a PRM with a causal DFA; entering a rejecting sink pays m instead."""
    if isinstance(p, ProductPrm):
        base, comps, prior_sinks = p.prm, p.components, p.sink_component
    else:
        base, comps, prior_sinks = p, tuple((u,) for u in range(p.n_states)), frozenset()
    alphabet = base.alphabet.union(d.alphabet)
    proj_p, proj_d = alphabet.projection(base.alphabet), alphabet.projection(d.alphabet)
    nq = d.n_states
    sinks = d.rejecting_sinks
    table, names, components, sink_component = [], [], [], set()
    for u in range(base.n_states):
        for q in range(nq):
            x = u * nq + q
            components.append(comps[u] + (q,))
            inner = base.names[u][1:-1] if comps[u][1:] else base.names[u]
            names.append(f"({inner}, {q})")
            if u in prior_sinks or q in sinks:
                sink_component.add(x)
            if u in base.terminals:
                table.append(())
                continue
            row = []
            for i in range(len(alphabet)):
                q2 = d.delta[q][proj_d[i]]
                outs = base.table[u][proj_p[i]]
                if q2 in sinks:
                    row.append(tuple(Outcome(o.state * nq + q2, o.prob, m) for o in outs))
                else:
                    row.append(tuple(Outcome(o.state * nq + q2, o.prob, o.reward) for o in outs))
            table.append(tuple(row))
    terminals = frozenset(u * nq + q for u in base.terminals for q in range(nq))
    prm = Prm(alphabet, tuple(table), base.initial * nq + d.initial, terminals, tuple(names))
    return ProductPrm(prm, tuple(components), frozenset(sink_component), m)


def with_terminals(p: Prm, extra: Iterable[int]) -> Prm:
    extra = frozenset(extra)
    table = tuple(() if u in extra else row for u, row in enumerate(p.table))
    return replace(p, table=table, terminals=p.terminals | extra)


class CausalPrm(NamedTuple):
    product: ProductPrm
    v1: ValueTable
    v2: ValueTable


def build_causal_prm(p: Prm, dfas: Union[CausalDfa, Sequence[CausalDfa]], gamma: float,
                     tol: float = 1e-8, vi_tol: float = 1e-12) -> CausalPrm:
    """Product with each causal DFA in turn, then mark states with zero upper and lower value terminal."""
    if isinstance(dfas, CausalDfa):
        dfas = [dfas]
    m = minimal_reward(p, gamma)
    b1, b2 = p, negate(p)
    for d in dfas:
        b1, b2 = compute_product(b1, d, m), compute_product(b2, d, m)
    if isinstance(b1, Prm):  # no DFA given: the product is A itself
        b1 = ProductPrm(p, tuple((u,) for u in range(p.n_states)), frozenset(), m)
        b2 = ProductPrm(b2, b1.components, frozenset(), m)
    v1 = value_iteration(b1.prm, gamma, vi_tol)
    v2 = value_iteration(b2.prm, gamma, vi_tol)
    zero = (np.abs(v1.values) < tol) & (np.abs(v2.values) < tol)
    added = frozenset(int(x) for x in np.flatnonzero(zero)) - b1.prm.terminals
    b = replace(b1, prm=with_terminals(b1.prm, added), added_terminals=added)
    return CausalPrm(b, v1, v2)
