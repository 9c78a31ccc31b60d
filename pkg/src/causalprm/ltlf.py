"""LTLf over finite label traces: syntax, parser, semantics, progression, DFA compilation."""

import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple

from .labels import Alphabet, Label


class Op(Enum):
    TRUE = "true"
    FALSE = "false"
    ATOM = "atom"
    NOT = "!"
    AND = "&"
    OR = "|"
    IMPLIES = "->"
    NEXT = "X"
    WEAK_NEXT = "WX"  # internal dual of X, produced only by to_nnf
    GLOBALLY = "G"
    UNTIL = "U"
    WEAK_UNTIL = "W"


_BINDING = {
    Op.IMPLIES: 1, Op.OR: 2, Op.AND: 3, Op.UNTIL: 4, Op.WEAK_UNTIL: 4,
    Op.NOT: 5, Op.NEXT: 5, Op.WEAK_NEXT: 5, Op.GLOBALLY: 5,
    Op.TRUE: 6, Op.FALSE: 6, Op.ATOM: 6,
}


@dataclass(frozen=True, eq=False, repr=False)
class Formula:
    op: Op
    args: Tuple["Formula", ...] = ()
    name: Optional[str] = None

    def __post_init__(self):
        key = (self.op, self.name, self.args)
        object.__setattr__(self, "_key", key)
        object.__setattr__(self, "_hash", hash(key))

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Formula) or self._hash != other._hash:
            return False
        return self._key == other._key

    def __hash__(self):
        return self._hash

    def __str__(self):
        return self.text

    def __repr__(self):
        return f"Formula({self.text!r})"

    @cached_property
    def text(self) -> str:
        return _print(self)

    @cached_property
    def atoms(self) -> FrozenSet[str]:
        if self.op is Op.ATOM:
            return frozenset((self.name,))
        return frozenset().union(*(a.atoms for a in self.args))

    @cached_property
    def temporal(self) -> bool:
        if self.op in (Op.NEXT, Op.WEAK_NEXT, Op.GLOBALLY, Op.UNTIL, Op.WEAK_UNTIL):
            return True
        return any(a.temporal for a in self.args)


TRUE = Formula(Op.TRUE)
FALSE = Formula(Op.FALSE)


def Atom(name: str) -> Formula:
    return Formula(Op.ATOM, (), name)


def Not(f):
    return Formula(Op.NOT, (f,))


def And(*fs):
    return Formula(Op.AND, tuple(fs))


def Or(*fs):
    return Formula(Op.OR, tuple(fs))


def Implies(a, b):
    return Formula(Op.IMPLIES, (a, b))


def Next(f):
    return Formula(Op.NEXT, (f,))


def WeakNext(f):
    return Formula(Op.WEAK_NEXT, (f,))


def Globally(f):
    return Formula(Op.GLOBALLY, (f,))


def Until(a, b):
    return Formula(Op.UNTIL, (a, b))


def WeakUntil(a, b):
    return Formula(Op.WEAK_UNTIL, (a, b))


# ---------------------------------------------------------------- printing

def _print(f: Formula) -> str:
    op = f.op
    if op is Op.TRUE or op is Op.FALSE:
        return op.value
    if op is Op.ATOM:
        return f.name
    prec = _BINDING[op]

    def wrap(child, tight):
        s = child.text
        cp = _BINDING[child.op]
        return f"({s})" if cp < prec or (tight and cp == prec) else s

    if op is Op.NOT:
        return "!" + wrap(f.args[0], False)
    if op is Op.NEXT or op is Op.GLOBALLY:
        inner = wrap(f.args[0], False)
        return op.value + (inner if inner.startswith("(") else " " + inner)
    if op is Op.WEAK_NEXT:
        # no surface syntax for weak next: print its dual !X!
        return "!X " + wrap(Not(f.args[0]), False)
    if op is Op.AND or op is Op.OR:
        return f" {op.value} ".join(wrap(a, True) for a in f.args)
    # right-associative binaries
    left, right = f.args
    return f"{wrap(left, True)} {op.value} {wrap(right, False)}"


# ---------------------------------------------------------------- parsing

class FormulaSyntaxError(ValueError):
    def __init__(self, message, text, pos):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.pos = pos


class UnknownAtomError(ValueError):
    def __init__(self, name):
        super().__init__(f"unknown atomic proposition {name!r}")
        self.name = name


_TOKEN = re.compile(r"\s*(?:(->)|([!&|()XGUW])|(true|false)(?![a-z0-9_])|([a-z][a-z0-9_]*))")


def _tokenize(text):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            bad = len(text) - len(text[pos:].lstrip())
            raise FormulaSyntaxError("unexpected character", text, bad)
        start = m.start(m.lastindex)
        out.append((m.group(m.lastindex), m.lastindex, start))
        pos = m.end()
    out.append(("", 0, len(text)))
    return out


class _Parser:
    def __init__(self, text, ap):
        self.text = text
        self.ap = None if ap is None else frozenset(ap)
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i][0]

    def take(self, expected=None):
        tok, _, pos = self.toks[self.i]
        if expected is not None and tok != expected:
            want = expected or "end of input"
            raise FormulaSyntaxError(f"expected {want!r}, found {tok or 'end of input'!r}", self.text, pos)
        self.i += 1
        return tok

    def parse(self):
        f = self.implies()
        self.take("")
        return f

    def implies(self):
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def _chain(self, sym, sub, ctor):
        parts = [sub()]
        while self.peek() == sym:
            self.take()
            parts.append(sub())
        return parts[0] if len(parts) == 1 else ctor(*parts)

    def disjunction(self):
        return self._chain("|", self.conjunction, Or)

    def conjunction(self):
        return self._chain("&", self.binary_temporal, And)

    def binary_temporal(self):
        left = self.unary()
        tok = self.peek()
        if tok == "U":
            self.take()
            return Until(left, self.binary_temporal())
        if tok == "W":
            self.take()
            return WeakUntil(left, self.binary_temporal())
        return left

    def unary(self):
        tok = self.peek()
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok == "X":
            self.take()
            return Next(self.unary())
        if tok == "G":
            self.take()
            return Globally(self.unary())
        return self.primary()

    def primary(self):
        tok, kind, pos = self.toks[self.i]
        if tok == "(":
            self.take()
            f = self.implies()
            self.take(")")
            return f
        if kind == 3:
            self.take()
            return TRUE if tok == "true" else FALSE
        if kind == 4:
            self.take()
            if self.ap is not None and tok not in self.ap:
                raise UnknownAtomError(tok)
            return Atom(tok)
        raise FormulaSyntaxError(f"unexpected {tok or 'end of input'!r}", self.text, pos)


def parse_formula(text: str, ap: Optional[Iterable[str]] = None) -> Formula:
    """Parse `text`; when `ap` is given every identifier must belong to it."""
    return _Parser(text, ap).parse()


# ---------------------------------------------------------------- TL-CDs

@dataclass(frozen=True)
class TlCd:
    ap: FrozenSet[str]
    edges: Tuple[Tuple[Formula, Formula], ...] = ()

    def __post_init__(self):
        for cause, effect in self.edges:
            extra = (cause.atoms | effect.atoms) - self.ap
            if extra:
                raise UnknownAtomError(sorted(extra)[0])


def parse_tlcd(text: str) -> TlCd:
    ap, edges = None, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("ap:"):
            ap = frozenset(line[3:].split())
            continue
        if ap is None:
            raise ValueError(f"line {lineno}: TL-CD edges before the 'ap:' header")
        if "~>" not in line:
            raise ValueError(f"line {lineno}: expected 'cause ~> effect', got {line!r}")
        lhs, rhs = line.split("~>", 1)
        edges.append((parse_formula(lhs, ap), parse_formula(rhs, ap)))
    if ap is None:
        raise ValueError("TL-CD is missing its 'ap:' header")
    return TlCd(ap, tuple(edges))


def dump_tlcd(cd: TlCd) -> str:
    lines = ["ap: " + " ".join(sorted(cd.ap))]
    lines += [f"{c} ~> {e}" for c, e in cd.edges]
    return "\n".join(lines) + "\n"


def tlcd_to_formula(cd: TlCd) -> Formula:
    parts = [Globally(Implies(c, e)) for c, e in cd.edges]
    if not parts:
        return TRUE
    return parts[0] if len(parts) == 1 else And(*parts)


# ---------------------------------------------------------------- semantics

def holds_now(f: Formula, label: Label) -> bool:
    """Truth of a propositional (temporal-free) formula under one label."""
    op = f.op
    if op is Op.ATOM:
        return f.name in label
    if op is Op.TRUE:
        return True
    if op is Op.FALSE:
        return False
    if op is Op.NOT:
        return not holds_now(f.args[0], label)
    if op is Op.AND:
        return all(holds_now(a, label) for a in f.args)
    if op is Op.OR:
        return any(holds_now(a, label) for a in f.args)
    if op is Op.IMPLIES:
        return not holds_now(f.args[0], label) or holds_now(f.args[1], label)
    raise ValueError(f"temporal operator in a propositional guard: {f}")


def _on_empty(f: Formula, positive: bool) -> bool:
    """Truth of f (or of !f when positive is False) on the empty trace."""
    op = f.op
    if op is Op.TRUE:
        return positive
    if op is Op.FALSE:
        return not positive
    if op is Op.ATOM:
        return False  # literals fail in both polarities
    if op is Op.NOT:
        return _on_empty(f.args[0], not positive)
    if op is Op.AND or op is Op.OR:
        conj = (op is Op.AND) == positive
        vals = (_on_empty(a, positive) for a in f.args)
        return all(vals) if conj else any(vals)
    if op is Op.IMPLIES:
        a, b = f.args
        if positive:
            return _on_empty(a, False) or _on_empty(b, True)
        return _on_empty(a, True) and _on_empty(b, False)
    # temporal: G, W, WX are weak (hold); X, U are strong (fail); negation swaps via duals
    weak = op in (Op.GLOBALLY, Op.WEAK_UNTIL, Op.WEAK_NEXT)
    return weak if positive else not weak


def empty_accepts(f: Formula) -> bool:
    return _on_empty(f, True)


def evaluate(f: Formula, trace: Sequence[Label]) -> bool:
    """Recursive finite-trace semantics; positions past the end use the empty-trace table."""
    trace = tuple(frozenset(x) for x in trace)
    n = len(trace)

    @lru_cache(maxsize=None)
    def sat(g: Formula, i: int) -> bool:
        if i == n:
            return _on_empty(g, True)
        op = g.op
        if op is Op.TRUE:
            return True
        if op is Op.FALSE:
            return False
        if op is Op.ATOM:
            return g.name in trace[i]
        if op is Op.NOT:
            return not sat(g.args[0], i)
        if op is Op.AND:
            return all(sat(a, i) for a in g.args)
        if op is Op.OR:
            return any(sat(a, i) for a in g.args)
        if op is Op.IMPLIES:
            return not sat(g.args[0], i) or sat(g.args[1], i)
        if op is Op.NEXT:
            return i + 1 < n and sat(g.args[0], i + 1)
        if op is Op.WEAK_NEXT:
            return i + 1 >= n or sat(g.args[0], i + 1)
        if op is Op.GLOBALLY:
            return all(sat(g.args[0], j) for j in range(i, n))
        a, b = g.args
        for j in range(i, n):
            if sat(b, j):
                return True
            if not sat(a, j):
                return False
        return op is Op.WEAK_UNTIL

    return sat(f, 0)


# ---------------------------------------------------------------- canonical constructors

def _key(f: Formula) -> str:
    return f.text


def _is_negated(a: Formula, b: Formula) -> bool:
    return (a.op is Op.NOT and a.args[0] == b) or (b.op is Op.NOT and b.args[0] == a)


def _clauses(f: Formula) -> FrozenSet[FrozenSet[Formula]]:
    """f as a set of conjunctive clauses over non-junction units (disjunctive normal form)."""
    if f.op is Op.TRUE:
        return frozenset((frozenset(),))
    if f.op is Op.FALSE:
        return frozenset()
    if f.op is Op.OR:
        return frozenset().union(*(_clauses(a) for a in f.args))
    if f.op is Op.AND:
        out = frozenset((frozenset(),))
        for a in f.args:
            out = frozenset(c | d for c in out for d in _clauses(a))
        return out
    return frozenset((frozenset((f,)),))


def _from_clauses(clauses) -> Formula:
    # l & !l is unsatisfiable on any trace; l | !l is not valid on the empty one, so it stays
    kept = {c for c in clauses
            if not any(u.op is Op.NOT and u.args[0] in c for u in c)}
    # absorption: a clause implied by a strictly smaller one is redundant
    kept = [c for c in kept if not any(d < c for d in kept)]
    if not kept:
        return FALSE
    terms = []
    for c in kept:
        units = sorted(c, key=_key)
        if not units:
            return TRUE
        terms.append(units[0] if len(units) == 1 else Formula(Op.AND, tuple(units)))
    terms.sort(key=_key)
    return terms[0] if len(terms) == 1 else Formula(Op.OR, tuple(terms))


def _junction(op: Op, args: Iterable[Formula]) -> Formula:
    """Canonical conjunction/disjunction: disjunctive normal form over non-junction units,
    deduplicated, sorted by text, with literal clashes and subsumed clauses removed. Keeping
    every state in this form is what makes the progression closure finite."""
    parts = [_clauses(a) for a in args]
    if op is Op.OR:
        return _from_clauses(frozenset().union(*parts))
    out = frozenset((frozenset(),))
    for p in parts:
        out = frozenset(c | d for c in out for d in p)
    return _from_clauses(out)


def mk_and(*args):
    return _junction(Op.AND, args)


def mk_or(*args):
    return _junction(Op.OR, args)


def mk_not_atom(a: Formula) -> Formula:
    return Formula(Op.NOT, (a,))


def mk_next(f):
    return FALSE if f == FALSE else Formula(Op.NEXT, (f,))


def mk_weak_next(f):
    return TRUE if f == TRUE else Formula(Op.WEAK_NEXT, (f,))


def mk_globally(f):
    if f == TRUE:
        return TRUE
    if f.op is Op.GLOBALLY:
        return f
    return Formula(Op.GLOBALLY, (f,))


def mk_until(a, b):
    if b == FALSE:
        return FALSE
    if a == FALSE:
        # false U b needs a position where b holds, i.e. now
        return mk_and(b, NONEMPTY) if empty_accepts(b) else b
    return Formula(Op.UNTIL, (a, b))


def mk_weak_until(a, b):
    if b == TRUE or a == TRUE:
        return TRUE
    if a == FALSE:
        return b if empty_accepts(b) else mk_or(b, EMPTY)
    if b == FALSE:
        return mk_globally(a)
    return Formula(Op.WEAK_UNTIL, (a, b))


NONEMPTY = Formula(Op.UNTIL, (TRUE, TRUE))  # holds exactly on non-empty traces
EMPTY = Formula(Op.GLOBALLY, (FALSE,))      # holds exactly on the empty trace


def to_nnf(f: Formula, negate: bool = False) -> Formula:
    """Negation normal form in canonical shape; implications are desugared."""
    op = f.op
    if op is Op.TRUE:
        return FALSE if negate else TRUE
    if op is Op.FALSE:
        return TRUE if negate else FALSE
    if op is Op.ATOM:
        return mk_not_atom(f) if negate else f
    if op is Op.NOT:
        return to_nnf(f.args[0], not negate)
    if op is Op.AND or op is Op.OR:
        conj = (op is Op.AND) != negate
        parts = [to_nnf(a, negate) for a in f.args]
        return mk_and(*parts) if conj else mk_or(*parts)
    if op is Op.IMPLIES:
        a, b = f.args
        if negate:
            return mk_and(to_nnf(a), to_nnf(b, True))
        return mk_or(to_nnf(a, True), to_nnf(b))
    if op is Op.NEXT:
        inner = to_nnf(f.args[0], negate)
        return mk_weak_next(inner) if negate else mk_next(inner)
    if op is Op.WEAK_NEXT:
        inner = to_nnf(f.args[0], negate)
        return mk_next(inner) if negate else mk_weak_next(inner)
    if op is Op.GLOBALLY:
        inner = to_nnf(f.args[0], negate)
        return mk_until(TRUE, inner) if negate else mk_globally(inner)
    a, b = f.args
    if not negate:
        ctor = mk_until if op is Op.UNTIL else mk_weak_until
        return ctor(to_nnf(a), to_nnf(b))
    # !(a U b) = !b W (!a & !b);  !(a W b) = !b U (!a & !b)
    na, nb = to_nnf(a, True), to_nnf(b, True)
    ctor = mk_weak_until if op is Op.UNTIL else mk_until
    return ctor(nb, mk_and(na, nb))


# ---------------------------------------------------------------- progression

def progress(f: Formula, label: Label) -> Formula:
    """One-step progression of an NNF formula: f holds on label.t iff the result holds on t."""
    op = f.op
    if op is Op.TRUE or op is Op.FALSE:
        return f
    if op is Op.ATOM:
        return TRUE if f.name in label else FALSE
    if op is Op.NOT:
        return FALSE if f.args[0].name in label else TRUE
    if op is Op.AND:
        return mk_and(*(progress(a, label) for a in f.args))
    if op is Op.OR:
        return mk_or(*(progress(a, label) for a in f.args))
    if op is Op.NEXT:
        # X a needs a next position; if a already holds on the empty suffix, say so explicitly
        a = f.args[0]
        return mk_and(a, NONEMPTY) if empty_accepts(a) else a
    if op is Op.WEAK_NEXT:
        a = f.args[0]
        return a if empty_accepts(a) else mk_or(a, EMPTY)
    if op is Op.GLOBALLY:
        return mk_and(progress(f.args[0], label), f)
    a, b = f.args
    if op is Op.UNTIL or op is Op.WEAK_UNTIL:
        return mk_or(progress(b, label), mk_and(progress(a, label), f))
    raise ValueError(f"progress expects NNF, got {f}")


# ---------------------------------------------------------------- compilation

class StateExplosionError(RuntimeError):
    pass


def compile_to_dfa(f: Formula, ap: Iterable[str], max_states: int = 10_000, minimal: bool = True):
    """Causal DFA for f over 2^ap via the progression closure, minimized by default."""
    from .automata import CausalDfa, minimize

    alphabet = ap if isinstance(ap, Alphabet) else Alphabet(ap)
    missing = f.atoms - set(alphabet.props)
    if missing:
        raise UnknownAtomError(sorted(missing)[0])
    start = to_nnf(f)
    states, index, rows = [start], {start: 0}, []
    labels = list(alphabet)
    while len(rows) < len(states):
        g = states[len(rows)]
        # progress once per distinct projection onto the formula's own atoms
        memo, row = {}, []
        for label in labels:
            proj = label & g.atoms
            h = memo.get(proj)
            if h is None:
                h = memo[proj] = progress(g, proj)
            q = index.get(h)
            if q is None:
                if len(states) >= max_states:
                    raise StateExplosionError(
                        f"progression closure of {f} exceeds {max_states} states")
                q = index[h] = len(states)
                states.append(h)
            row.append(q)
        rows.append(tuple(row))
    dfa = CausalDfa(
        alphabet=alphabet,
        delta=tuple(rows),
        initial=0,
        accepting=frozenset(i for i, g in enumerate(states) if empty_accepts(g)),
        names=tuple(g.text for g in states),
    )
    return minimize(dfa) if minimal else dfa


def compile_tlcd(cd: TlCd, ap: Optional[Iterable[str]] = None, **kw):
    return compile_to_dfa(tlcd_to_formula(cd), cd.ap if ap is None else ap, **kw)
