from hypothesis import strategies as st

from causalprm.ltlf import (FALSE, TRUE, And, Atom, Globally, Implies, Next, Not, Or, Until,
                            WeakUntil)

AP = ("a", "b", "c")

atoms = st.sampled_from([Atom(p) for p in AP])
leaves = st.one_of(atoms, st.sampled_from([TRUE, FALSE]))


def _extend(children):
    return st.one_of(
        st.builds(Not, children),
        st.builds(Next, children),
        st.builds(Globally, children),
        st.builds(And, children, children),
        st.builds(Or, children, children),
        st.builds(Implies, children, children),
        st.builds(Until, children, children),
        st.builds(WeakUntil, children, children),
    )


formulas = st.recursive(leaves, _extend, max_leaves=8)
labels = st.frozensets(st.sampled_from(AP))
traces = st.lists(labels, max_size=6).map(tuple)


@st.composite
def prms(draw, max_states=4, ap=("a", "b"), rewards=(-1.0, 0.0, 0.5, 1.0)):
    """Random complete PRMs with one or two outcomes per (state, label)."""
    from causalprm.labels import Alphabet
    from causalprm.machines import Outcome, Prm

    n = draw(st.integers(1, max_states))
    alphabet = Alphabet(ap)
    terminals = frozenset(draw(st.sets(st.integers(1, n - 1)))) if n > 1 else frozenset()
    table = []
    for u in range(n):
        if u in terminals:
            table.append(())
            continue
        row = []
        for _ in range(len(alphabet)):
            t1 = draw(st.integers(0, n - 1))
            r1 = draw(st.sampled_from(rewards))
            if draw(st.booleans()):
                p = draw(st.sampled_from([0.1, 0.25, 0.5, 0.9]))
                t2 = draw(st.integers(0, n - 1))
                r2 = draw(st.sampled_from(rewards))
                row.append((Outcome(t1, p, r1), Outcome(t2, 1 - p, r2)))
            else:
                row.append((Outcome(t1, 1.0, r1),))
        table.append(tuple(row))
    return Prm(alphabet, tuple(table), 0, terminals)
