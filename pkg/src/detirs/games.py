"""Synchronous non-local games and their word-level value functionals."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .algebra import Element, Functional, add, format_rational, mul, scale
from .errors import BudgetExceeded
from .group import GroupParams, Word, WordSet


def bits_to_mask(bits: str) -> int:
    """Little-endian bit string: first character is answer bit 1."""
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"bad bit string {bits!r}")
    return sum(1 << i for i, ch in enumerate(bits) if ch == "1")


def mask_to_bits(mask: int, m: int) -> str:
    return "".join("1" if mask >> i & 1 else "0" for i in range(m))


@dataclass(frozen=True)
class GameSpec:
    """Question distribution over index pairs plus the set of accepted tuples.

    ``accept`` holds tuples ``(a, b, x, y)`` with answers as bitmasks and
    questions as indices into ``params.questions``.
    """

    params: GroupParams
    q_dist: Mapping[tuple[int, int], Fraction]
    accept: frozenset

    def __post_init__(self):
        nq = len(self.params.questions)
        total = Fraction(0)
        for (x, y), p in self.q_dist.items():
            if not (0 <= x < nq and 0 <= y < nq):
                raise ValueError("question index out of range")
            if p < 0:
                raise ValueError("negative question probability")
            total += p
        if total != 1:
            raise ValueError(f"question distribution sums to {total}, not 1")
        top = 1 << self.params.m
        for a, b, x, y in self.accept:
            if not (0 <= a < top and 0 <= b < top and 0 <= x < nq and 0 <= y < nq):
                raise ValueError("accepted tuple out of range")

    def q(self, x: int, y: int) -> Fraction:
        return Fraction(self.q_dist.get((x, y), 0))

    def decider(self, a: int, b: int, x: int, y: int) -> int:
        return int((a, b, x, y) in self.accept)

    def pairs(self):
        return sorted(xy for xy, p in self.q_dist.items() if p)


def make_game(params: GroupParams, q_dist, decider) -> GameSpec:
    """Build a game from a callable decider(a, b, x, y) -> bool over index data."""
    nq, top = len(params.questions), 1 << params.m
    accept = frozenset(
        (a, b, x, y)
        for x in range(nq) for y in range(nq)
        for a in range(top) for b in range(top)
        if decider(a, b, x, y)
    )
    return GameSpec(params, {k: Fraction(v) for k, v in q_dist.items() if v}, accept)


def uniform_pairs(nq: int) -> dict:
    p = Fraction(1, nq * nq)
    return {(x, y): p for x in range(nq) for y in range(nq)}


def all_accepting(params: GroupParams) -> GameSpec:
    return make_game(params, uniform_pairs(len(params.questions)), lambda a, b, x, y: True)


def all_rejecting(params: GroupParams) -> GameSpec:
    return make_game(params, uniform_pairs(len(params.questions)), lambda a, b, x, y: False)


def coloring_game(nq: int) -> GameSpec:
    """Two-colouring of the complete graph on ``nq`` vertices, uniform question pairs.

    Equal questions demand equal answers, distinct questions distinct answers.
    ``nq = 2`` is the consistency game, ``nq = 3`` the triangle game.
    """
    params = GroupParams(tuple(str(i) for i in range(nq)) if nq > 2 else ("x", "y")[:nq], 1)
    return make_game(params, uniform_pairs(nq), lambda a, b, x, y: (a == b) == (x == y))


def expand_projection(params: GroupParams, x: int, a: int) -> Element:
    """e_x^a = prod_i (1 + (-1)^{a_i} u_{x,i}) / 2, expanded over subsets."""
    m = params.m
    coeff = Fraction(1, 1 << m)
    terms = {}
    for s in range(1 << m):
        sign = -1 if bin(a & s).count("1") % 2 else 1
        w = Word(params, ((x, s),), 0) if s else params.identity()
        terms[w] = sign * coeff
    return Element(params, terms)


def correlation(params: GroupParams, a: int, b: int, x: int, y: int) -> Element:
    """(1 - J) e_x^a e_y^b, whose trace is p(a, b | x, y)."""
    one_minus_j = Element(params, {params.identity(): 1, params.J(): -1})
    return mul(one_minus_j, mul(expand_projection(params, x, a), expand_projection(params, y, b)))


def strategy_functional(G: GameSpec) -> Functional:
    params = G.params
    top = 1 << params.m
    total = Element.zero(params)
    for x, y in G.pairs():
        acc = Element.zero(params)
        for a in range(top):
            for b in range(top):
                if G.decider(a, b, x, y):
                    acc = add(acc, mul(expand_projection(params, x, a), expand_projection(params, y, b)))
        total = add(total, scale(acc, G.q(x, y)))
    one_minus_j = Element(params, {params.identity(): 1, params.J(): -1})
    return Functional(mul(one_minus_j, total).terms)


def support_set(G: GameSpec) -> WordSet:
    return WordSet.from_words(G.params, strategy_functional(G).support())


def value(G: GameSpec, tau: Mapping[Word, object], functional: Functional | None = None) -> Fraction:
    """Val(G, tau) for a trace given on (at least) the support set."""
    f = functional if functional is not None else strategy_functional(G)
    return f.pair(tau)


def classical_value_bruteforce(G: GameSpec, max_assignments: int = 1 << 20) -> Fraction:
    """Best deterministic strategy f: Q -> {0,1}^m."""
    nq, top = len(G.params.questions), 1 << G.params.m
    if top ** nq > max_assignments:
        raise BudgetExceeded(f"{top ** nq} deterministic strategies exceed budget")
    pairs = [(x, y, G.q(x, y)) for x, y in G.pairs()]
    best = Fraction(0)
    for f in itertools.product(range(top), repeat=nq):
        v = sum((p for x, y, p in pairs if G.decider(f[x], f[y], x, y)), Fraction(0))
        best = max(best, v)
    return best


def format_game(G: GameSpec) -> str:
    labels = G.params.questions
    m = G.params.m
    lines = [f"questions: {' '.join(labels)}", f"bits: {m}"]
    for x, y in G.pairs():
        lines.append(f"q: {labels[x]} {labels[y]} {format_rational(G.q(x, y))}")
    for a, b, x, y in sorted(G.accept, key=lambda t: (t[2], t[3], t[0], t[1])):
        lines.append(f"accept: {labels[x]} {labels[y]} {mask_to_bits(a, m)} {mask_to_bits(b, m)}")
    return "\n".join(lines) + "\n"


def parse_game(text: str) -> GameSpec:
    questions = bits = None
    q_lines, acc_lines = [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(":")
        key, fields = key.strip(), rest.split()
        if key == "questions":
            questions = tuple(fields)
        elif key == "bits":
            bits = int(fields[0])
        elif key == "q":
            q_lines.append(fields)
        elif key == "accept":
            acc_lines.append(fields)
        else:
            raise ValueError(f"unknown game line {raw!r}")
    if questions is None or bits is None:
        raise ValueError("game file needs 'questions:' and 'bits:' headers")
    params = GroupParams(questions, bits)
    q_dist: dict[tuple[int, int], Fraction] = {}
    for x, y, p in q_lines:
        key = (params.index(x), params.index(y))
        q_dist[key] = q_dist.get(key, Fraction(0)) + Fraction(p)
    accept = set()
    for x, y, a, b in acc_lines:
        if len(a) != bits or len(b) != bits:
            raise ValueError("answer bit string has wrong length")
        accept.add((bits_to_mask(a), bits_to_mask(b), params.index(x), params.index(y)))
    return GameSpec(params, {k: v for k, v in q_dist.items() if v}, frozenset(accept))
