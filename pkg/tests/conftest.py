import random

import pytest
from hypothesis import strategies as st

from detirs.games import all_accepting, all_rejecting, coloring_game
from detirs.group import GroupParams, Word

XY = GroupParams(("x", "y"), 1)
XY2 = GroupParams(("x", "y"), 2)
ABC = GroupParams(("a", "b", "c"), 2)


def corpus():
    return {
        "all_accepting": all_accepting(XY),
        "all_rejecting": all_rejecting(XY),
        "consistency": coloring_game(2),
        "triangle": coloring_game(3),
    }


@pytest.fixture(scope="session")
def games():
    return corpus()


def random_word(params, rng: random.Random, max_blocks=5) -> Word:
    w = params.identity()
    for _ in range(rng.randint(0, max_blocks)):
        x = rng.randrange(len(params.questions))
        mask = rng.randrange(1, 1 << params.m)
        w = w * Word(params, ((x, mask),), 0)
    if rng.random() < 0.5:
        w = w * params.J()
    return w


def words(params, max_blocks=5):
    return st.integers(0, 2 ** 32).map(lambda s: random_word(params, random.Random(s), max_blocks))


def random_lp(rng: random.Random, nvars=None, nrows=None):
    """Bounded LP with a known feasible point, mixing all three relations."""
    from fractions import Fraction
    from detirs.lp import EQ, GE, LE, LinearProgram

    n = nvars or rng.randint(2, 4)
    names = [f"x{i}" for i in range(n)]
    point = {v: Fraction(rng.randint(0, 6), rng.randint(1, 3)) for v in names}
    lp = LinearProgram(names, {v: rng.randint(-5, 5) for v in names},
                       bounds={v: (0, rng.randint(6, 9)) for v in names})
    for i in range(nrows or rng.randint(1, 4)):
        coeffs = {v: rng.randint(-4, 4) for v in names}
        lhs = sum(c * point[v] for v, c in coeffs.items())
        rel = rng.choice([LE, LE, GE, EQ])
        slack = Fraction(rng.randint(0, 5), 2)
        rhs = lhs if rel == EQ else (lhs + slack if rel == LE else lhs - slack)
        lp.add(coeffs, rel, rhs, name=f"r{i}")
    return lp, point
