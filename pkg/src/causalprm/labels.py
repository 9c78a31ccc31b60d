"""Label alphabets 2^AP, with labels indexed as bitmasks over the sorted propositions."""

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Iterator, Tuple

Label = FrozenSet[str]
Word = Tuple[Label, ...]


class UnknownPropositionError(ValueError):
    pass


@dataclass(frozen=True)
class Alphabet:
    props: Tuple[str, ...]
    _bits: dict = field(init=False, repr=False, compare=False)

    def __init__(self, props: Iterable[str]):
        props = tuple(sorted(set(props)))
        object.__setattr__(self, "props", props)
        object.__setattr__(self, "_bits", {p: 1 << i for i, p in enumerate(props)})

    def __len__(self) -> int:
        return 1 << len(self.props)

    def __iter__(self) -> Iterator[Label]:
        return (self.label(i) for i in range(len(self)))

    def __contains__(self, prop) -> bool:
        return prop in self._bits

    def index(self, label: Iterable[str], strict: bool = True) -> int:
        """Bitmask of `label`. Propositions outside the alphabet raise unless strict is False,
        in which case they are dropped (projection)."""
        i = 0
        for p in label:
            bit = self._bits.get(p)
            if bit is None:
                if strict:
                    raise UnknownPropositionError(f"proposition {p!r} not in {self.props}")
                continue
            i |= bit
        return i

    def label(self, i: int) -> Label:
        return frozenset(p for p, b in self._bits.items() if i & b)

    def union(self, other: "Alphabet") -> "Alphabet":
        return Alphabet(self.props + other.props)

    def projection(self, sub: "Alphabet") -> Tuple[int, ...]:
        """For each label index here, the index of its projection onto `sub`."""
        return tuple(sub.index(self.label(i), strict=False) for i in range(len(self)))


def fmt_label(label: Iterable[str]) -> str:
    return "{" + ",".join(sorted(label)) + "}"
