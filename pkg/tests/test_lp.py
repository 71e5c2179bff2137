import random
from fractions import Fraction

import pytest

from conftest import random_lp
from detirs.lp import (EQ, GE, LE, Constraint, LinearProgram, dual_program, format_lp, parse_lp,
                       solve, verify, vertex_enumeration_optimum)


def test_textbook_lp():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
    lp = LinearProgram(["x", "y"], {"x": 3, "y": 5})
    lp.add({"x": 1}, LE, 4)
    lp.add({"y": 2}, LE, 12)
    lp.add({"x": 3, "y": 2}, LE, 18)
    for rule in ("bland", "dantzig"):
        out = solve(lp, rule)
        assert out.status == "optimal"
        assert out.optimum == 36
        assert out.witness == {"x": 2, "y": 6}
        assert verify(lp, out.witness, 36)


def test_fractional_optimum_with_equality_and_free_variable():
    lp = LinearProgram(["a", "b"], {"a": 1, "b": 1}, bounds={"a": (None, None), "b": (0, 1)})
    lp.add({"a": 3, "b": 1}, EQ, 1)
    out = solve(lp)
    assert out.status == "optimal"
    assert out.witness == {"a": 0, "b": 1}
    lp.objective = {"a": Fraction(-1), "b": Fraction(1, 4)}
    out = solve(lp)
    assert out.optimum == Fraction(1, 4)


def test_infeasible_and_unbounded():
    lp = LinearProgram(["x"], {"x": 1})
    lp.add({"x": 1}, GE, 2)
    lp.add({"x": 1}, LE, 1)
    assert solve(lp).status == "infeasible"
    lp = LinearProgram(["x", "y"], {"x": 1})
    lp.add({"x": 1, "y": -1}, LE, 1)
    assert solve(lp).status == "unbounded"


def test_redundant_equalities():
    lp = LinearProgram(["x", "y"], {"x": 1, "y": 2})
    lp.add({"x": 1, "y": 1}, EQ, 1)
    lp.add({"x": 2, "y": 2}, EQ, 2)
    out = solve(lp)
    assert out.status == "optimal" and out.optimum == 2


def test_degenerate_cycling_example():
    # Beale's example cycles under naive largest-coefficient pricing
    lp = LinearProgram(["x1", "x2", "x3", "x4"],
                       {"x1": Fraction(3, 4), "x2": -150, "x3": Fraction(1, 50), "x4": -6})
    lp.add({"x1": Fraction(1, 4), "x2": -60, "x3": Fraction(-1, 25), "x4": 9}, LE, 0)
    lp.add({"x1": Fraction(1, 2), "x2": -90, "x3": Fraction(-1, 50), "x4": 3}, LE, 0)
    lp.add({"x3": 1}, LE, 1)
    for rule in ("bland", "dantzig"):
        out = solve(lp, rule)
        assert out.optimum == Fraction(1, 20)


def test_verify_rejects_bad_witness():
    lp = LinearProgram(["x"], {"x": 1}, bounds={"x": (0, 1)})
    assert verify(lp, {"x": Fraction(1)}, 1)
    assert not verify(lp, {"x": Fraction(2)})
    assert not verify(lp, {"x": Fraction(1)}, Fraction(1, 2))
    assert not verify(lp, {})


def test_bad_inputs():
    with pytest.raises(ValueError):
        Constraint({"x": 1}, "<", 0)
    with pytest.raises(ValueError):
        LinearProgram(["x", "x"], {})
    with pytest.raises(ValueError):
        solve(LinearProgram(["x"], {}), rule="steepest")


@pytest.mark.parametrize("seed", range(40))
def test_random_lp_matches_oracle(seed):
    lp, point = random_lp(random.Random(seed))
    assert verify(lp, point)
    out = solve(lp, "bland" if seed % 2 else "dantzig")
    ref = vertex_enumeration_optimum(lp)
    assert out.status == ref.status == "optimal"
    assert out.optimum == ref.optimum
    assert verify(lp, out.witness, out.optimum)
    assert out.optimum >= lp.objective_value(point)


@pytest.mark.parametrize("seed", range(25))
def test_strong_duality(seed):
    rng = random.Random(1000 + seed)
    names = [f"x{i}" for i in range(3)]
    lp = LinearProgram(names, {v: rng.randint(-3, 5) for v in names})
    for i in range(3):
        rel = rng.choice([LE, GE, EQ])
        coeffs = {v: rng.randint(0, 4) for v in names}
        coeffs[names[i]] += 1
        rhs = rng.randint(1, 8) if rel != GE else rng.randint(0, 2)
        lp.add(coeffs, rel, rhs)
    lp.add({v: 1 for v in names}, LE, 10)
    primal = solve(lp)
    dual = solve(dual_program(lp))
    if primal.status == "optimal":
        assert dual.status == "optimal"
        assert primal.optimum == -dual.optimum
    else:
        assert primal.status == "infeasible"
        assert dual.status in ("unbounded", "infeasible")


@pytest.mark.parametrize("seed", range(10))
def test_format_roundtrip(seed):
    lp, _ = random_lp(random.Random(seed))
    lp.bounds["x0"] = (None, Fraction(7, 3))
    text = format_lp(lp)
    again = parse_lp(text)
    assert format_lp(again) == text
    assert solve(again).optimum == solve(lp).optimum


def test_dual_requires_plain_variables():
    lp = LinearProgram(["x"], {"x": 1}, bounds={"x": (0, 1)})
    with pytest.raises(ValueError):
        dual_program(lp)
