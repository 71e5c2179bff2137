"""Word arithmetic in the free product of copies of Z_2^m, times a central Z_2.

An element is stored in normal form: an alternating sequence of blocks
``(question index, bitmask)`` with nonzero masks and no two adjacent blocks on
the same question, plus a bit for the central involution J.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import BudgetExceeded, ParamsMismatch

_LABEL_RE = re.compile(r"^[A-Za-z0-9_]+$")


@dataclass(frozen=True)
class GroupParams:
    questions: tuple[str, ...]
    answer_width: int

    def __post_init__(self):
        if not self.questions:
            raise ValueError("need at least one question")
        if self.answer_width < 1:
            raise ValueError("answer width must be positive")
        if len(set(self.questions)) != len(self.questions):
            raise ValueError("duplicate question labels")
        for q in self.questions:
            if not _LABEL_RE.match(q) or q in ("e", "J"):
                raise ValueError(f"bad question label {q!r}")

    @property
    def m(self) -> int:
        return self.answer_width

    def index(self, label: str) -> int:
        return self.questions.index(label)

    def generators(self) -> list["Word"]:
        gens = [
            Word(self, ((x, 1 << i),), 0)
            for x in range(len(self.questions))
            for i in range(self.answer_width)
        ]
        gens.append(Word(self, (), 1))
        return gens

    def identity(self) -> "Word":
        return Word(self, (), 0)

    def J(self) -> "Word":
        return Word(self, (), 1)

    def u(self, question, bit: int = 1) -> "Word":
        """The generator u_{x,bit}; ``bit`` counts from 1."""
        x = question if isinstance(question, int) else self.index(question)
        if not 1 <= bit <= self.answer_width:
            raise ValueError("bit index out of range")
        return Word(self, ((x, 1 << (bit - 1)),), 0)

    def block(self, question, subset: Iterable[int]) -> "Word":
        """U_x^s for a subset s of {1..m} (empty subset gives the identity)."""
        x = question if isinstance(question, int) else self.index(question)
        mask = 0
        for i in subset:
            if not 1 <= i <= self.answer_width:
                raise ValueError("bit index out of range")
            mask ^= 1 << (i - 1)
        return Word(self, ((x, mask),) if mask else (), 0)


@dataclass(frozen=True, slots=True)
class Word:
    params: GroupParams = field(compare=False, repr=False)
    blocks: tuple[tuple[int, int], ...]
    j: int = 0

    def __len__(self):
        return sum(bin(mask).count("1") for _, mask in self.blocks) + self.j

    def __mul__(self, other: "Word") -> "Word":
        return multiply(self, other)

    def is_identity(self) -> bool:
        return not self.blocks and not self.j

    def sort_key(self):
        return (len(self), self.blocks, self.j)

    def __lt__(self, other: "Word") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self):
        return format_word(self)


def _check(w1: Word, w2: Word):
    if w1.params is not w2.params and w1.params != w2.params:
        raise ParamsMismatch("words belong to different groups")


def multiply(w1: Word, w2: Word) -> Word:
    _check(w1, w2)
    out = list(w1.blocks)
    for q, mask in w2.blocks:
        if out and out[-1][0] == q:
            merged = out.pop()[1] ^ mask
            if merged:
                out.append((q, merged))
        else:
            out.append((q, mask))
    return Word(w1.params, tuple(out), w1.j ^ w2.j)


def inverse(w: Word) -> Word:
    return Word(w.params, tuple(reversed(w.blocks)), w.j)


def conjugate(w: Word, g: Word) -> Word:
    """g w g^-1."""
    return multiply(multiply(g, w), inverse(g))


def format_word(w: Word) -> str:
    labels = w.params.questions
    parts = []
    for q, mask in w.blocks:
        bits = [str(i + 1) for i in range(w.params.answer_width) if mask >> i & 1]
        parts.append(f"{labels[q]}{{{','.join(bits)}}}")
    body = ".".join(parts)
    if w.j:
        return f"{body}*J" if body else "J"
    return body or "e"


_TOKEN_RE = re.compile(r"^([A-Za-z0-9_]+)\{([0-9,]*)\}$")


def parse_word(params: GroupParams, text: str) -> Word:
    """Inverse of :func:`format_word`; also accepts ``e*J`` and ``*J``."""
    text = text.strip()
    j = 0
    if text == "J":
        return params.J()
    if text.endswith("*J"):
        j = 1
        text = text[:-2]
    if text in ("", "e"):
        return Word(params, (), j)
    w = params.identity()
    for tok in text.split("."):
        m = _TOKEN_RE.match(tok)
        if not m:
            raise ValueError(f"bad word token {tok!r}")
        subset = [int(s) for s in m.group(2).split(",") if s]
        if not subset:
            raise ValueError(f"empty block in {tok!r}")
        w = multiply(w, params.block(m.group(1), subset))
    return Word(params, w.blocks, j)


@dataclass(frozen=True)
class WordSet:
    """A finite, inverse-closed set of words containing the identity.

    Elements are kept in the deterministic enumeration order (length, then
    blocks lexicographically, then the J bit).
    """

    params: GroupParams
    elements: tuple[Word, ...]
    _members: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_members", frozenset(self.elements))

    @classmethod
    def from_words(cls, params: GroupParams, words: Iterable[Word]) -> "WordSet":
        out = {params.identity()}
        for w in words:
            out.add(w)
            out.add(inverse(w))
        return cls(params, tuple(sorted(out, key=Word.sort_key)))

    def __contains__(self, w) -> bool:
        return w in self._members

    def __iter__(self) -> Iterator[Word]:
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    def __or__(self, other: "WordSet") -> "WordSet":
        return WordSet.from_words(self.params, self.elements + other.elements)

    def issubset(self, other: "WordSet") -> bool:
        return self._members <= other._members

    def is_symmetric(self) -> bool:
        return all(inverse(w) in self._members for w in self.elements)


def ball(params: GroupParams, radius: int) -> WordSet:
    """All elements of word length at most ``radius`` (generators u_{x,i} and J)."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    gens = params.generators()
    seen = {params.identity()}
    frontier = [params.identity()]
    for _ in range(radius):
        nxt = []
        for w in frontier:
            for g in gens:
                v = multiply(w, g)
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return WordSet(params, tuple(sorted(seen, key=Word.sort_key)))


def product_closure(B: WordSet, depth: int, max_size: int = 100_000) -> WordSet:
    """Normal forms of all products of at most ``depth`` elements of B."""
    if depth < 1:
        raise ValueError("depth must be positive")
    seen = set(B.elements)
    frontier = set(B.elements)
    for _ in range(depth - 1):
        nxt = set()
        for a in frontier:
            for b in B.elements:
                v = multiply(a, b)
                if v not in seen:
                    seen.add(v)
                    nxt.add(v)
                    if len(seen) > max_size:
                        raise BudgetExceeded(
                            f"product closure exceeds {max_size} words at depth {depth}"
                        )
        if not nxt:
            break
        frontier = nxt
    return WordSet(B.params, tuple(sorted(seen, key=Word.sort_key)))
