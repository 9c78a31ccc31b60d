import numpy as np
import pytest

from causalprm.envs import (MAX_WORD_LEN, MapError, Trajectory, attainable_words, env_step,
                            label, load_map, tlcd_holds)
from causalprm.harness import CASE_DIR, CASE_STUDIES
from causalprm.ltlf import parse_tlcd

SMALL = """legend: a=a b=b
start: 0,1
sink: b
oneway: 1,1 E
a..
..b
"""


@pytest.fixture(scope="module")
def small():
    return load_map(SMALL)


def L(*props):
    return frozenset(props)


def test_load_small(small):
    assert (small.width, small.height) == (3, 2)
    assert small.start == (0, 1)
    assert small.label_of((0, 0)) == L("a")
    assert small.sinks == {(2, 1)}
    assert small.props == {"a", "b"}
    assert len(small.cells) == 6 and small.index[(1, 1)] == 4


def test_walls_and_borders_block():
    g = load_map("start: 0,0\n.#\n..\n")
    assert g.move((0, 0), "E") == (0, 0)
    assert g.move((0, 0), "N") == (0, 0)
    assert g.move((0, 0), "S") == (0, 1)


def test_oneway_door(small):
    # (1,1) -> (2,1) is allowed; coming back west through it is not
    assert small.move((1, 1), "E") == (2, 1)
    assert small.move((2, 1), "W") == (2, 1)


def test_sink_self_loops(small):
    for a in "NSEW":
        assert small.outcomes((2, 1), a) == (((2, 1), 1.0),)


def test_forced_cells_override_the_action():
    g = load_map("start: 0,0\nforce: 1,0 E\n...\n")
    assert g.outcomes((1, 0), "W") == (((2, 0), 1.0),)


def test_stochastic_entry():
    g = load_map((CASE_DIR / "four_doors" / "map.txt").read_text())
    b, d = g.cells_with("b")[0], g.cells_with("d")[0]
    above_b = (b[0], b[1] - 1)
    assert dict(g.outcomes(above_b, "S")) == {b: 0.9, d: 0.1}
    # staying on b does not re-trigger the event
    assert g.outcomes(b, "S") == ((b, 1.0),)


def test_env_step_frequencies():
    g = load_map((CASE_DIR / "four_doors" / "map.txt").read_text())
    b = g.cells_with("b")[0]
    rng = np.random.default_rng(1)
    n = 10_000
    hits = sum(env_step(g, (b[0], b[1] - 1), "S", rng) == b for _ in range(n))
    assert abs(hits - 0.9 * n) < 5 * np.sqrt(n * 0.09)


@pytest.mark.parametrize("text, match", [
    ("start: 0,0\n..\n...\n", "ragged"),
    ("start: 0,0\n.x\n", "unknown cell"),
    ("..\n", "no start"),
    ("start: 1,0\n.#\n", "not a floor"),
    ("start: 0,0\nlegend: a=a\nsink: z\na.\n", "legend"),
    ("start: 0,0\noneway: 0,0 Q\n..\n", "direction"),
    ("start: 0,0\nlegend: a=a b=b\nstochastic: enter a -> {a:0.5, b:0.4}\nab\n", "sum to 1"),
    ("start: 0,0\nlegend: a=a b=b\nstochastic: enter a -> {a:0.5, b:0.5}\nabb\n", "exactly one"),
    ("start: 0,0\ncolour: red\n..\n", "unknown header"),
    ("start: 0,0\n", "no grid"),
])
def test_map_errors(text, match):
    with pytest.raises(MapError, match=match):
        load_map(text)


def test_labels_fire_on_the_destination(small):
    traj = Trajectory(((0, 1), (0, 0), (1, 0)), ("N", "E"))
    assert traj.word(small) == (L("a"), L())
    assert label(small, (0, 1), "N", (0, 0)) == L("a")


def test_attainable_words(small):
    words = attainable_words(small, 2)
    assert () in words
    assert (L("a"),) in words and (L("b"),) not in words
    assert (L(), L("b")) in words
    with pytest.raises(ValueError):
        attainable_words(small, MAX_WORD_LEN + 1)


def test_attainable_words_by_brute_force(small):
    # every action sequence of length <= 3 from the start, no stochasticity in this map
    words = {()}
    frontier = [((), small.start)]
    for _ in range(3):
        nxt = []
        for w, s in frontier:
            for a in "NSEW":
                t = small.outcomes(s, a)[0][0]
                nxt.append((w + (small.label_of(t),), t))
        words.update(w for w, _ in nxt)
        frontier = nxt
    assert attainable_words(small, 3) == words


@pytest.mark.parametrize("name", CASE_STUDIES)
def test_case_study_tlcds_hold(name):
    g = load_map((CASE_DIR / name / "map.txt").read_text())
    for fname in ("tlcd.txt", "redundant.txt"):
        cd = parse_tlcd((CASE_DIR / name / fname).read_text())
        assert tlcd_holds(g, cd, max_len=10)


def test_violated_tlcd_yields_a_counterexample(small):
    res = tlcd_holds(small, parse_tlcd("ap: a\na ~> G !a"), max_len=6)
    assert not res
    # G !a covers the current position too, so the first visit to a already violates it
    assert res.counterexample == (L("a"),)


def test_prefix_check_agrees_with_attainable_words(small):
    from causalprm.ltlf import compile_tlcd
    cd = parse_tlcd("ap: a b\nb ~> G !a")
    d = compile_tlcd(cd)
    bad = [w for w in attainable_words(small, 5) if d.run(w)[-1] in d.dead_states]
    assert bool(tlcd_holds(small, cd, max_len=5)) == (not bad)


def test_word_semantics_is_stricter():
    g = load_map((CASE_DIR / "office" / "map.txt").read_text())
    cd = parse_tlcd((CASE_DIR / "office" / "tlcd.txt").read_text())
    assert tlcd_holds(g, cd, max_len=10)
    res = tlcd_holds(g, cd, max_len=10, semantics="word")
    assert not res and res.counterexample[-1] == L("c")


def test_unknown_semantics(small):
    with pytest.raises(ValueError):
        tlcd_holds(small, parse_tlcd("ap: a\n"), semantics="strong")


def test_str_round_trips_the_grid(small):
    assert str(small) == "a..\n..b"
