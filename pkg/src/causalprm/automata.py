"""Complete DFAs over 2^AP with a dense transition table."""

from collections import deque
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .labels import Alphabet, Label, fmt_label


@dataclass(frozen=True)
class CausalDfa:
    alphabet: Alphabet
    delta: Tuple[Tuple[int, ...], ...]  # delta[q][label index]
    initial: int
    accepting: FrozenSet[int]
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        n, k = len(self.delta), len(self.alphabet)
        if not 0 <= self.initial < n:
            raise ValueError(f"initial state {self.initial} out of range")
        for q, row in enumerate(self.delta):
            if len(row) != k:
                raise ValueError(f"state {q} has {len(row)} transitions, expected {k}")
            if any(not 0 <= t < n for t in row):
                raise ValueError(f"state {q} has a transition out of range")
        if not self.accepting <= set(range(n)):
            raise ValueError("accepting set out of range")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"q{i}" for i in range(n)))

    @property
    def ap(self) -> Tuple[str, ...]:
        return self.alphabet.props

    @property
    def n_states(self) -> int:
        return len(self.delta)

    def __len__(self):
        return len(self.delta)

    @cached_property
    def rejecting_sinks(self) -> FrozenSet[int]:
        return frozenset(q for q, row in enumerate(self.delta)
                         if q not in self.accepting and all(t == q for t in row))

    @cached_property
    def dead_states(self) -> FrozenSet[int]:
        """States from which no accepting state is reachable (backward search)."""
        preds = [set() for _ in self.delta]
        for q, row in enumerate(self.delta):
            for t in row:
                preds[t].add(q)
        alive, todo = set(self.accepting), list(self.accepting)
        while todo:
            for p in preds[todo.pop()]:
                if p not in alive:
                    alive.add(p)
                    todo.append(p)
        return frozenset(range(self.n_states)) - alive

    def step(self, q: int, label: Iterable[str]) -> int:
        return self.delta[q][self.alphabet.index(label)]

    def run(self, word: Sequence[Iterable[str]]) -> List[int]:
        q = self.initial
        states = [q]
        for label in word:
            q = self.step(q, label)
            states.append(q)
        return states

    def accepts(self, word: Sequence[Iterable[str]]) -> bool:
        return self.run(word)[-1] in self.accepting

    def relabel(self, alphabet: Alphabet) -> "CausalDfa":
        """Same language read through the projection of a larger alphabet."""
        proj = alphabet.projection(self.alphabet)
        delta = tuple(tuple(row[j] for j in proj) for row in self.delta)
        return CausalDfa(alphabet, delta, self.initial, self.accepting, self.names)


def trivial_dfa(ap: Iterable[str] = ()) -> CausalDfa:
    """The one-state DFA accepting every word."""
    alphabet = Alphabet(ap)
    return CausalDfa(alphabet, ((0,) * len(alphabet),), 0, frozenset({0}), ("true",))


def _bfs_order(delta, initial):
    order, seen = [initial], {initial}
    for q in order:
        for t in delta[q]:
            if t not in seen:
                seen.add(t)
                order.append(t)
    return order


def minimize(d: CausalDfa) -> CausalDfa:
    """Moore partition refinement on the reachable part; states renumbered in BFS order."""
    reach = _bfs_order(d.delta, d.initial)
    block = {q: int(q in d.accepting) for q in reach}
    n_blocks = len(set(block.values()))
    while True:
        sigs = {q: (block[q],) + tuple(block[t] for t in d.delta[q]) for q in reach}
        ids = {s: i for i, s in enumerate(sorted(set(sigs.values())))}
        block = {q: ids[sigs[q]] for q in reach}
        if len(ids) == n_blocks:
            break
        n_blocks = len(ids)
    rep = {}
    for q in reach:
        rep.setdefault(block[q], q)
    coarse = {b: tuple(block[t] for t in d.delta[q]) for b, q in rep.items()}
    order = _bfs_order(coarse, block[d.initial])
    new_id = {b: i for i, b in enumerate(order)}
    delta = tuple(tuple(new_id[t] for t in coarse[b]) for b in order)
    accepting = frozenset(new_id[block[q]] for q in reach if q in d.accepting)
    names = tuple(d.names[rep[b]] for b in order)
    return CausalDfa(d.alphabet, delta, 0, accepting, names)


def compose_parallel(*dfas: CausalDfa) -> CausalDfa:
    """Synchronous product over the union alphabet; accepts iff every factor accepts."""
    return reduce(_compose2, dfas)


def _compose2(d1: CausalDfa, d2: CausalDfa) -> CausalDfa:
    alphabet = d1.alphabet.union(d2.alphabet)
    p1, p2 = alphabet.projection(d1.alphabet), alphabet.projection(d2.alphabet)
    n2 = d2.n_states
    delta, names, accepting = [], [], set()
    for q1 in range(d1.n_states):
        for q2 in range(n2):
            delta.append(tuple(d1.delta[q1][i] * n2 + d2.delta[q2][j] for i, j in zip(p1, p2)))
            names.append(f"({d1.names[q1]}, {d2.names[q2]})")
            if q1 in d1.accepting and q2 in d2.accepting:
                accepting.add(q1 * n2 + q2)
    return CausalDfa(alphabet, tuple(delta), d1.initial * n2 + d2.initial,
                     frozenset(accepting), tuple(names))


def counterexample(d1: CausalDfa, d2: CausalDfa) -> Optional[Tuple[Label, ...]]:
    """A shortest word accepted by exactly one of the two DFAs, or None."""
    alphabet = d1.alphabet.union(d2.alphabet)
    p1, p2 = alphabet.projection(d1.alphabet), alphabet.projection(d2.alphabet)
    start = (d1.initial, d2.initial)
    parent = {start: None}
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        q1, q2 = pair
        if (q1 in d1.accepting) != (q2 in d2.accepting):
            word = []
            while parent[pair] is not None:
                pair, i = parent[pair]
                word.append(alphabet.label(i))
            return tuple(reversed(word))
        for i in range(len(alphabet)):
            nxt = (d1.delta[q1][p1[i]], d2.delta[q2][p2[i]])
            if nxt not in parent:
                parent[nxt] = (pair, i)
                queue.append(nxt)
    return None


def language_equiv(d1: CausalDfa, d2: CausalDfa) -> bool:
    return counterexample(d1, d2) is None


# ---------------------------------------------------------------- text and dot formats

def guard_formula(labels: Iterable[Label], ap: Sequence[str]) -> str:
    """A small sum-of-products guard in the formula grammar covering exactly `labels`."""
    from sympy import Symbol
    from sympy.logic import SOPform
    from sympy.logic.boolalg import And as SAnd, Not as SNot, Or as SOr

    labels = [frozenset(l) for l in labels]
    if not labels:
        return "false"
    if len(labels) == 1 << len(ap):
        return "true"
    syms = [Symbol(p) for p in ap]
    minterms = [[int(p in l) for p in ap] for l in labels]
    expr = SOPform(syms, minterms)

    def show(e):
        # sum of products: & binds tighter than |, so no parentheses are needed
        if isinstance(e, Symbol):
            return e.name
        if isinstance(e, SNot):
            return "!" + show(e.args[0])
        if isinstance(e, (SAnd, SOr)):
            sep = " & " if isinstance(e, SAnd) else " | "
            return sep.join(sorted(show(a) for a in e.args))
        return str(e).lower()

    return show(expr)


def dump_dfa(d: CausalDfa) -> str:
    lines = ["ap: " + " ".join(d.ap)]
    for q in range(d.n_states):
        flags = [w for w, on in (("accepting", q in d.accepting), ("initial", q == d.initial)) if on]
        lines.append(" ".join(["state", str(q)] + flags))
    for q, row in enumerate(d.delta):
        targets = {}
        for i, t in enumerate(row):
            targets.setdefault(t, []).append(d.alphabet.label(i))
        for t, labels in sorted(targets.items()):
            lines.append(f'edge {q} "{guard_formula(labels, d.ap)}" {t}')
    return "\n".join(lines) + "\n"


def load_dfa(text: str) -> CausalDfa:
    """Parse the line format written by dump_dfa; guards must be deterministic and complete."""
    from .ltlf import holds_now, parse_formula

    ap, states, initial, accepting, edges = None, [], None, set(), []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        if head == "ap:":
            ap = rest.split()
        elif head == "state":
            parts = rest.split()
            q = int(parts[0])
            states.append(q)
            if "accepting" in parts[1:]:
                accepting.add(q)
            if "initial" in parts[1:]:
                initial = q
        elif head == "edge":
            src, _, tail = rest.partition(" ")
            guard, _, dst = tail.rpartition(" ")
            edges.append((int(src), parse_formula(guard.strip().strip('"'), ap), int(dst), lineno))
        else:
            raise ValueError(f"line {lineno}: unrecognized directive {head!r}")
    if ap is None or initial is None:
        raise ValueError("DFA text needs an 'ap:' line and an initial state")
    if sorted(states) != list(range(len(states))):
        raise ValueError("state ids must be 0..n-1")
    alphabet = Alphabet(ap)
    delta = []
    for q in range(len(states)):
        row = []
        for label in alphabet:
            hits = [t for s, g, t, _ in edges if s == q and holds_now(g, label)]
            if len(hits) != 1:
                kind = "no edge" if not hits else "several edges"
                raise ValueError(f"state {q}: {kind} for label {fmt_label(label)}")
            row.append(hits[0])
        delta.append(tuple(row))
    return CausalDfa(alphabet, tuple(delta), initial, frozenset(accepting))


def to_dot(d: CausalDfa) -> str:
    lines = ["digraph dfa {", "  rankdir=LR;", '  init [shape=point];']
    for q in range(d.n_states):
        shape = "doublecircle" if q in d.accepting else "circle"
        lines.append(f'  {q} [shape={shape}, label="{q}"];')
    lines.append(f"  init -> {d.initial};")
    for q, row in enumerate(d.delta):
        targets = {}
        for i, t in enumerate(row):
            targets.setdefault(t, []).append(d.alphabet.label(i))
        for t, labels in sorted(targets.items()):
            lines.append(f'  {q} -> {t} [label="{guard_formula(labels, d.ap)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
