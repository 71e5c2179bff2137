import itertools
from fractions import Fraction

import pytest

from conftest import XY
from detirs.algebra import Element, Matrix, trace_functional, poly_apply, mat_mul, adjoint
from detirs.errors import VerificationFailed
from detirs.games import coloring_game, strategy_functional
from detirs.group import WordSet, ball, inverse, multiply, parse_word
from detirs.hierarchy import (Event, HierarchyOptions, LocalDistribution, alpha, closure,
                              det_constraints, det_matrices, format_witness, game_words, hierarchy,
                              irs_local_constraints, is_partial_subgroup, partial_subgroups,
                              restrict, strategy_constraints, trace_constraints)
from detirs.hierarchy import induced_trace as local_trace
from detirs.lnplus import g_poly
from detirs.lp import EQ, GE
from detirs.permstrat import enumerate_actions, local_data, perm_value


@pytest.fixture(scope="session")
def levels(games):
    return {name: hierarchy(G, 2) for name, G in games.items()}


def W(text, params=XY):
    return parse_word(params, text)


def test_partial_subgroups_match_bruteforce():
    dom = ball(XY, 2)
    assert len(dom) == 8
    words = list(dom)
    brute = set()
    for bits in range(1 << len(words)):
        S = frozenset(w for i, w in enumerate(words) if bits >> i & 1)
        if XY.identity() not in S or any(inverse(w) not in S for w in S):
            continue
        if all(multiply(a, b) in S for a in S for b in S if multiply(a, b) in dom):
            brute.add(S)
    found = partial_subgroups(dom)
    assert set(found) == brute
    assert len(found) == len(set(found))
    assert all(is_partial_subgroup(S, dom) for S in found)


def test_closure_examples():
    dom = ball(XY, 2)
    e = XY.identity()
    assert closure((), dom) == {e}
    c = closure({W("x{1}"), W("y{1}")}, dom)
    assert W("x{1}.y{1}") in c and W("y{1}.x{1}") in c
    assert W("x{1}.y{1}.x{1}") not in c  # length 3 is outside the domain


def test_local_distribution_validation():
    dom = ball(XY, 1)
    e = XY.identity()
    with pytest.raises(ValueError):
        LocalDistribution(dom, {frozenset({e}): Fraction(1, 2)})
    with pytest.raises(ValueError):
        LocalDistribution(dom, {frozenset(): 1})  # identity missing
    pi = LocalDistribution(dom, {frozenset({e}): Fraction(1, 3), frozenset(dom): Fraction(2, 3)})
    assert pi.prob(W("x{1}")) == Fraction(2, 3)
    assert pi.prob(e) == 1
    assert pi.prob(Event(frozenset({W("J")}), frozenset())) == Fraction(1, 3)
    with pytest.raises(KeyError):
        pi.prob(W("x{1}.y{1}"))


def test_restrict_and_trace():
    dom = ball(XY, 2)
    e, x, y, J = W("e"), W("x{1}"), W("y{1}"), W("J")
    big = closure({x, y}, dom)
    pi = LocalDistribution(dom, {big: Fraction(1, 2), closure({J}, dom): Fraction(1, 2)})
    small = restrict(pi, ball(XY, 1))
    assert small.weights == {frozenset({e, x, y}): Fraction(1, 2), frozenset({e, J}): Fraction(1, 2)}
    tau = local_trace(small)
    assert tau == {e: 1, x: Fraction(1, 2), y: Fraction(1, 2), J: Fraction(1, 2)}
    with pytest.raises(ValueError):
        restrict(small, dom)


def test_irs_constraints_small_domains():
    e = XY.identity()
    only_e = WordSet.from_words(XY, [])
    cons = irs_local_constraints(only_e)
    assert [c.tag for c in cons] == ["normalization"]
    # J is central so {e, J} produces no conjugation equalities either
    with_J = WordSet.from_words(XY, [W("J")])
    cons = irs_local_constraints(with_J)
    assert [c.tag for c in cons] == ["normalization"]
    assert partial_subgroups(with_J) == [frozenset({e}), frozenset({e, W("J")})]


def test_conjugation_constraints_hold_for_actions():
    # at radius 2 every conjugate pair is also an inverse pair, so go to 3
    dom = ball(XY, 3)
    cons = irs_local_constraints(dom)
    assert any(c.tag == "conjugation" for c in cons)
    for a in itertools.islice(enumerate_actions(XY, 4), 30):
        pi = local_data(a, dom)
        assert all(c.holds(pi.prob) for c in cons)


def test_trace_constraints_hold_for_actions():
    dom = ball(XY, 3)
    cons = trace_constraints(dom, ball(XY, 1))
    tags = {c.tag for c in cons}
    assert tags == {"normalization", "inverse", "conjugation", "superadditive"}
    for a in itertools.islice(enumerate_actions(XY, 4), 30):
        pi = local_data(a, dom)
        assert all(c.holds(pi.prob) for c in cons)


def test_game_words_cover_support():
    for nq in (2, 3):
        G = coloring_game(nq)
        gw = game_words(G)
        assert all(w in gw for w in strategy_functional(G).support())
        assert W("J", G.params) in gw


def test_strategy_constraints_reject_point_mass_on_everything():
    G = coloring_game(2)
    dom = game_words(G)
    cons = strategy_constraints(G, dom)
    assert cons[0].rhs == 0 and cons[0].rel == EQ
    assert sum(c.rel == GE for c in cons) == 4 * 4
    full = LocalDistribution(dom, {closure(dom, dom): 1})
    assert not all(c.holds(full.prob) for c in cons)
    with pytest.raises(ValueError):
        strategy_constraints(G, ball(G.params, 1))


def test_det_constraint_for_e_plus_u():
    # A = [e + u]: A*A = 2e + u + u^{-1}, and tr g(A*A) gives the listed coefficients
    P = XY
    u = W("x{1}")
    A = Matrix(P, [[Element(P, {P.identity(): 1, u: 1})]])
    g = g_poly(2, 64)
    f = trace_functional(poly_apply(g.poly, mat_mul(adjoint(A), A)))
    # u is an involution, so A*A = 2(e + u) with eigenvalues 0 and 4
    assert f.coeffs == {P.identity(): g.poly(4) / 2, u: g.poly(4) / 2}


def test_det_matrices_shapes_and_constant_drop():
    B = ball(XY, 1)
    mats = list(itertools.islice(det_matrices(B, 2), 500))
    assert all(len(M.rows) <= 2 for M in mats)
    for M in mats:
        for row in M.rows:
            for entry in row:
                assert sum(abs(c) for c in entry.terms.values()) <= 1
    assert list(det_matrices(B, 1)) == []
    dets = det_constraints(2, B, g_poly(2, 64), budget=8)
    assert 0 < len(dets) <= 8
    # constant A*A (single unit entries) never makes it into the list
    for d in dets:
        assert set(d.constraint.coeffs) != {XY.identity()}


def test_trivial_games(levels):
    for lv in levels["all_accepting"]:
        assert lv.alpha == 1
    for lv in levels["all_rejecting"]:
        assert lv.alpha == 0


def test_corpus_values(levels):
    assert [lv.alpha for lv in levels["consistency"]] == [1, 1]
    assert [lv.alpha for lv in levels["triangle"]] == [Fraction(7, 9), Fraction(7, 9)]


def test_monotone_and_nested(levels):
    for name, lvls in levels.items():
        assert lvls[0].alpha >= lvls[1].alpha
        assert lvls[0].B_tilde.issubset(lvls[1].B_tilde)
        assert lvls[0].B.issubset(lvls[1].B)


def test_witness_properties(levels):
    for lvls in levels.values():
        for lv in lvls:
            pi = lv.certificate
            assert isinstance(pi, LocalDistribution)
            assert all(c.holds(pi.prob) for c in lv.constraints)
            text = format_witness(lv)
            assert text.startswith(f"alpha_{lv.n} = ")


def test_soundness_bridge_degree_two(levels, games):
    for name, lvls in levels.items():
        G = games[name]
        for lv in lvls:
            for a in enumerate_actions(G.params, 2):
                x = lv.assignment_from_local(local_data(a, lv.B_tilde))
                assert lv.feasible(x)
                assert lv.lp.objective_value(x) == perm_value(G, a) <= lv.alpha


def test_trace_mode_triangle():
    G = coloring_game(3)
    lvls = hierarchy(G, 2, HierarchyOptions(mode="trace"))
    assert lvls[0].alpha >= lvls[1].alpha >= Fraction(7, 9)
    assert lvls[1].alpha == Fraction(5, 6)
    tau = lvls[1].certificate
    assert tau[G.params.identity()] == 1 and tau[G.params.J()] == 0
    for a in enumerate_actions(G.params, 2):
        x = lvls[1].assignment_from_local(local_data(a, lvls[1].B_tilde))
        assert lvls[1].feasible(x)


def test_no_det_is_looser_or_equal(games):
    G = games["consistency"]
    plain = alpha(G, 1, HierarchyOptions(det=False))
    assert plain.det == [] and plain.alpha == 1


def test_non_cumulative_levels(games):
    lv = hierarchy(games["all_rejecting"], 2, HierarchyOptions(cumulative=False))
    assert [x.alpha for x in lv] == [0, 0]


def test_bad_options():
    with pytest.raises(ValueError):
        HierarchyOptions(mode="sdp")
    with pytest.raises(ValueError):
        hierarchy(coloring_game(2), 0)


def test_assignment_rejects_inconsistent_trace_classes():
    G = coloring_game(2)
    lv = alpha(G, 1, HierarchyOptions(mode="trace", det=False, ball_radius_start=3))
    dom = lv.B_tilde
    by_var = {}
    for w, lin in lv.key_vars.items():
        by_var.setdefault(next(iter(lin)), []).append(w)
    for cls in by_var.values():
        for a, b in itertools.combinations(cls, 2):
            S = closure({a}, dom)
            if b not in S:
                with pytest.raises(VerificationFailed):
                    lv.assignment_from_local(LocalDistribution(dom, {S: 1}))
                return
    raise AssertionError("no splittable class found")
