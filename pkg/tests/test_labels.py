import pytest
from hypothesis import given, strategies as st

from causalprm.labels import Alphabet, UnknownPropositionError, fmt_label

props = st.sets(st.sampled_from("abcdefg"), max_size=5)


def test_alphabet_sorts_and_counts():
    a = Alphabet(["s", "o", "f"])
    assert a.props == ("f", "o", "s")
    assert len(a) == 8
    assert a.index({"f"}) == 1 and a.index({"s"}) == 4
    assert list(a)[0] == frozenset()


def test_unknown_proposition():
    a = Alphabet("ab")
    with pytest.raises(UnknownPropositionError):
        a.index({"z"})
    assert a.index({"a", "z"}, strict=False) == a.index({"a"})


def test_fmt_label():
    assert fmt_label({"o", "c"}) == "{c,o}"
    assert fmt_label(()) == "{}"


@given(props)
def test_index_label_bijection(ps):
    a = Alphabet(ps)
    assert [a.index(a.label(i)) for i in range(len(a))] == list(range(len(a)))
    assert len(set(a)) == len(a) == 2 ** len(ps)


@given(props, props)
def test_projection_drops_foreign_props(ps, qs):
    big, small = Alphabet(ps | qs), Alphabet(qs)
    proj = big.projection(small)
    for i, lab in enumerate(big):
        assert small.label(proj[i]) == lab & set(qs)
