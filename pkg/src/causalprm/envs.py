"""Labeled gridworld MDPs loaded from ASCII maps."""

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Set, Tuple

from .labels import Label, Word

Cell = Tuple[int, int]  # (x, y), x the column and y the row counted from the top

ACTIONS = ("N", "S", "E", "W")
MOVES = {"N": (0, -1), "S": (0, 1), "E": (1, 0), "W": (-1, 0)}
OPPOSITE = {"N": "S", "S": "N", "E": "W", "W": "E"}
EMPTY_LABEL: Label = frozenset()
MAX_WORD_LEN = 12


class MapError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledGridworld:
    width: int
    height: int
    walls: FrozenSet[Cell]
    cell_labels: Dict[Cell, Label]
    start: Cell
    sinks: FrozenSet[Cell] = frozenset()
    oneway: FrozenSet[Tuple[Cell, str]] = frozenset()  # edge (c, c+dir) passable only towards dir
    forced: Dict[Cell, str] = field(default_factory=dict)  # conveyor cells override the action
    stochastic: Dict[str, Tuple[Tuple[str, float], ...]] = field(default_factory=dict)

    @cached_property
    def cells(self) -> Tuple[Cell, ...]:
        return tuple((x, y) for y in range(self.height) for x in range(self.width)
                     if (x, y) not in self.walls)

    @cached_property
    def index(self) -> Dict[Cell, int]:
        return {c: i for i, c in enumerate(self.cells)}

    @cached_property
    def props(self) -> FrozenSet[str]:
        return frozenset().union(*self.cell_labels.values())

    def cells_with(self, prop: str) -> List[Cell]:
        return [c for c in self.cells if prop in self.cell_labels.get(c, EMPTY_LABEL)]

    def label_of(self, cell: Cell) -> Label:
        return self.cell_labels.get(cell, EMPTY_LABEL)

    def move(self, s: Cell, direction: str) -> Cell:
        """Deterministic displacement: walls, borders and one-way doors leave the agent in place."""
        dx, dy = MOVES[direction]
        t = (s[0] + dx, s[1] + dy)
        if not (0 <= t[0] < self.width and 0 <= t[1] < self.height) or t in self.walls:
            return s
        if (t, OPPOSITE[direction]) in self.oneway:
            return s
        return t

    def outcomes(self, s: Cell, a: str) -> Tuple[Tuple[Cell, float], ...]:
        if s in self.sinks:
            return ((s, 1.0),)
        t = self.move(s, self.forced.get(s, a))
        if t != s:
            for prop in sorted(self.label_of(t)):
                event = self.stochastic.get(prop)
                if event:
                    return tuple((self._target(q), p) for q, p in event if p > 0)
        return ((t, 1.0),)

    def _target(self, prop: str) -> Cell:
        cells = self.cells_with(prop)
        if len(cells) != 1:
            raise MapError(f"stochastic target {prop!r} must label exactly one cell")
        return cells[0]

    def __str__(self):
        inverse = {}
        for c, lab in self.cell_labels.items():
            inverse[c] = sorted(lab)[0][0] if lab else "."
        rows = []
        for y in range(self.height):
            rows.append("".join("#" if (x, y) in self.walls else inverse.get((x, y), ".")
                                for x in range(self.width)))
        return "\n".join(rows)


_STOCHASTIC = re.compile(r"enter\s+(\w+)\s*->\s*\{(.*)\}\s*$")
_ENTRY = re.compile(r"\s*(\w+)\s*:\s*([0-9.eE+-]+)\s*")


def _cell(text: str) -> Cell:
    x, y = text.split(",")
    return int(x), int(y)


def load_map(text: str) -> LabeledGridworld:
    """Header lines `key: value` (legend, start, sink, oneway, force, stochastic) then the grid.

    Grid characters: `#` wall, `.` floor, anything else a legend entry. Lines starting with
    `# ` (hash and space) are comments; grid rows never contain spaces."""
    legend, start, sink_props = {}, None, set()
    oneway, forced, stochastic, grid = set(), {}, {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("# "):
            continue
        key, sep, value = line.partition(":")
        if sep and key.isalpha() and " " not in key and not grid:
            value = value.strip()
            if key == "legend":
                for item in value.split():
                    ch, _, prop = item.partition("=")
                    if len(ch) != 1 or not prop:
                        raise MapError(f"line {lineno}: bad legend entry {item!r}")
                    legend[ch] = prop
            elif key == "start":
                start = _cell(value)
            elif key == "sink":
                sink_props.update(value.split())
            elif key == "oneway" or key == "force":
                for item in value.split(";"):
                    pos, direction = item.split()
                    if direction not in MOVES:
                        raise MapError(f"line {lineno}: unknown direction {direction!r}")
                    if key == "oneway":
                        oneway.add((_cell(pos), direction))
                    else:
                        forced[_cell(pos)] = direction
            elif key == "stochastic":
                m = _STOCHASTIC.match(value)
                if not m:
                    raise MapError(f"line {lineno}: expected 'enter p -> {{p:prob, ...}}'")
                dist = tuple((k, float(v)) for k, v in
                             (_ENTRY.fullmatch(e).groups() for e in m.group(2).split(",")))
                if abs(sum(p for _, p in dist) - 1) > 1e-9:
                    raise MapError(f"line {lineno}: stochastic outcome probabilities must sum to 1")
                stochastic[m.group(1)] = dist
            else:
                raise MapError(f"line {lineno}: unknown header {key!r}")
            continue
        grid.append((lineno, line))
    if not grid:
        raise MapError("map has no grid")
    width = len(grid[0][1])
    walls, labels = set(), {}
    for y, (lineno, row) in enumerate(grid):
        if len(row) != width:
            raise MapError(f"line {lineno}: ragged row (width {len(row)}, expected {width})")
        for x, ch in enumerate(row):
            if ch == "#":
                walls.add((x, y))
            elif ch != ".":
                if ch not in legend:
                    raise MapError(f"line {lineno}: unknown cell character {ch!r}")
                labels[(x, y)] = frozenset((legend[ch],))
    height = len(grid)
    if start is None:
        raise MapError("map has no start cell")
    if not (0 <= start[0] < width and 0 <= start[1] < height) or start in walls:
        raise MapError(f"start cell {start} is not a floor cell")
    props = frozenset(legend.values())
    for p in sink_props | set(stochastic) | {q for d in stochastic.values() for q, _ in d}:
        if p not in props:
            raise MapError(f"proposition {p!r} is not in the legend")
    sinks = frozenset(c for c, lab in labels.items() if lab & sink_props)
    g = LabeledGridworld(width, height, frozenset(walls), labels, start, sinks,
                         frozenset(oneway), forced, stochastic)
    for d in stochastic.values():
        for q, _ in d:
            g._target(q)
    return g


def env_step(g: LabeledGridworld, s: Cell, a: str, rng) -> Cell:
    outs = g.outcomes(s, a)
    if len(outs) == 1:
        return outs[0][0]
    draw, acc = rng.random(), 0.0
    for t, p in outs:
        acc += p
        if draw < acc:
            return t
    return outs[-1][0]


def label(g: LabeledGridworld, s: Cell, a: str, s2: Cell) -> Label:
    """Labels fire on the destination cell."""
    return g.label_of(s2)


class Trajectory(NamedTuple):
    states: Tuple[Cell, ...]
    actions: Tuple[str, ...]

    def word(self, g: LabeledGridworld) -> Word:
        return tuple(label(g, s, a, t) for s, a, t in zip(self.states, self.actions, self.states[1:]))


def _successors(g: LabeledGridworld, s: Cell) -> Set[Cell]:
    return {t for a in ACTIONS for t, p in g.outcomes(s, a) if p > 0}


def attainable_words(g: LabeledGridworld, max_len: int) -> Set[Word]:
    """Every label word of length <= max_len produced by some positive-probability trajectory."""
    if max_len > MAX_WORD_LEN:
        raise ValueError(f"max_len is capped at {MAX_WORD_LEN}")
    succ = {c: _successors(g, c) for c in g.cells}
    frontier = {((), g.start)}
    words = {()}
    for _ in range(max_len):
        frontier = {(w + (g.label_of(t),), t) for w, s in frontier for t in succ[s]}
        words.update(w for w, _ in frontier)
    return words


class CheckResult(NamedTuple):
    holds: bool
    counterexample: Optional[Word]

    def __bool__(self):
        return self.holds


def tlcd_holds(g: LabeledGridworld, cd, max_len: int = 10, semantics: str = "prefix") -> CheckResult:
    """Bounded check that the TL-CD holds on the map.

    semantics="prefix": no attainable word of length <= max_len drives the causal DFA into a
    dead state (the word is not a prefix of any satisfying trace). semantics="word": every
    attainable word of length <= max_len itself satisfies the formula."""
    from .ltlf import compile_tlcd, evaluate, tlcd_to_formula

    if semantics not in ("prefix", "word"):
        raise ValueError(f"unknown semantics {semantics!r}")
    d = compile_tlcd(cd)
    bad = d.dead_states if semantics == "prefix" else frozenset(range(d.n_states)) - d.accepting
    alphabet = d.alphabet
    lab = {c: alphabet.index(g.label_of(c), strict=False) for c in g.cells}
    succ = {c: sorted(_successors(g, c)) for c in g.cells}
    start = (g.start, d.initial)
    parent = {start: None}
    layer = [start]
    for depth in range(max_len + 1):
        for node in layer:
            if node[1] in bad:
                word = []
                while parent[node] is not None:
                    node, t = parent[node]
                    word.append(g.label_of(t))
                word = tuple(reversed(word))
                if semantics == "word":
                    assert not evaluate(tlcd_to_formula(cd), word)
                return CheckResult(False, word)
        if depth == max_len:
            break
        nxt = []
        for node in layer:
            s, q = node
            for t in succ[s]:
                child = (t, d.delta[q][lab[t]])
                if child not in parent:
                    parent[child] = (node, t)
                    nxt.append(child)
        layer = nxt
    return CheckResult(True, None)
