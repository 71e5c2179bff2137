from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detirs.algebra import Polynomial
from detirs.lnplus import (CertificationFailed, DegreeCapError, bernstein_polynomial,
                           bernstein_upper, check_domination, default_grid, f_clipped_eval,
                           g_family, g_poly, ln_enclosure)

mpmath.mp.dps = 50


def mp_ln(q: Fraction):
    return mpmath.log(mpmath.mpf(q.numerator) / q.denominator)


def inside(enc, x):
    return mpmath.mpf(enc.lower.numerator) / enc.lower.denominator <= x <= \
        mpmath.mpf(enc.upper.numerator) / enc.upper.denominator


def test_ln_one_exact():
    enc = ln_enclosure(1, Fraction(1, 10))
    assert enc.lower == enc.upper == 0


def test_ln_four():
    enc = ln_enclosure(4, Fraction(1, 1000))
    assert enc.width <= Fraction(1, 1000)
    assert inside(enc, 2 * mpmath.log(2))


def test_ln_half_mirrors_two():
    a = ln_enclosure(Fraction(1, 2), Fraction(1, 10 ** 9))
    b = ln_enclosure(2, Fraction(1, 10 ** 9))
    assert inside(a, -mpmath.log(2)) and inside(b, mpmath.log(2))
    assert abs(a.lower + b.upper) <= Fraction(2, 10 ** 9)


@settings(max_examples=200)
@given(st.integers(1, 10 ** 6), st.integers(1, 10 ** 6), st.integers(3, 40))
def test_ln_enclosure_against_mpmath(p, q, digits):
    x = Fraction(p, q)
    tol = Fraction(1, 10 ** digits)
    enc = ln_enclosure(x, tol)
    assert enc.width <= tol
    assert inside(enc, mp_ln(x))


def test_ln_rejects_nonpositive():
    with pytest.raises(ValueError):
        ln_enclosure(0, Fraction(1, 2))


def test_f_clipped_values():
    enc = f_clipped_eval(3, 0)
    assert enc.lower == enc.upper == -3
    half = f_clipped_eval(1, 1)
    assert half.lower == half.upper == Fraction(1, 2)
    t = Fraction(271828182845904523536, 10 ** 20)
    enc = f_clipped_eval(2, t)
    exact = mp_ln(t) / (mpmath.mpf(t.numerator) / t.denominator) + mpmath.mpf(1) / 4
    assert inside(enc, exact)
    assert abs(float(enc.lower) - (1 / mpmath.e + 0.25)) < 1e-6
    # deep in the clip
    assert f_clipped_eval(2, Fraction(1, 100)).upper == -2


def test_bernstein_reproduces_affine():
    for d in (1, 3, 7):
        assert bernstein_polynomial([Fraction(5, 3)] * (d + 1), 4) == Polynomial([Fraction(5, 3)])
        N = Fraction(9, 2)
        vals = [N * Fraction(k, d) for k in range(d + 1)]
        assert bernstein_polynomial(vals, N) == Polynomial([0, 1])


def test_bernstein_upper_value_at_one():
    f = bernstein_upper(1, 4, 16)
    p1 = f.poly(1)
    assert Fraction(1, 8) <= p1 <= Fraction(3, 8)
    assert f.bernstein_degree == 16


def test_strict_cap_reports_degree():
    with pytest.raises(DegreeCapError) as info:
        bernstein_upper(1, 4, 16, strict=True)
    assert info.value.needed > 16
    assert "316530" in str(info.value) or info.value.needed > 1000


@pytest.mark.parametrize("n,N", [(1, 4), (2, 4), (1, 16), (2, 16), (1, 1), (2, 64)])
def test_g_poly_certified(n, N):
    g = g_poly(n, N, 8)
    assert g(0) == 0
    assert g.certificate.passed
    assert g.certificate.worst_margin > 0
    assert g(1) >= 0
    # independent spot check of domination with mpmath
    for t in default_grid(N, 16):
        assert mpmath.mpf(g(t).numerator) / g(t).denominator >= mp_ln(t)


def test_check_domination_examples():
    const = Polynomial([2])  # 2 >= ln 4
    assert check_domination(const, 64, 4).passed
    bad = check_domination(Polynomial([-1, 1]), 64, 4)
    assert not bad.passed and bad.violating_node == 0 and bad.value_at_zero == -1
    tight = check_domination(Polynomial([Fraction(13, 10)]), 64, 4)  # 1.3 < ln 4
    assert not tight.passed and tight.violating_node > 3
    assert check_domination(g_poly(1, 4), 64).passed


def test_report_lines():
    lines = g_poly(1, 4).certificate.lines()
    assert lines[0].startswith("node 0")
    assert lines[-1].endswith("PASS")
    assert len(lines) == 64 + 2


@pytest.mark.parametrize("N", [4, 16])
def test_family_monotone(N):
    fam = g_family([1, 2, 3], N)
    for t in default_grid(N, 64):
        assert fam[1](t) >= fam[2](t) >= fam[3](t)


def test_floor_requires_matching_shape():
    f = bernstein_upper(2, 4, 8)
    with pytest.raises(ValueError):
        bernstein_upper(1, 4, 12, floor=f)


def test_soundness_chain_at_nodes():
    # off the clip, f_2n >= ln t / t + 2^-2n, so any p within 2^-2n-1 of f_2n dominates ln t / t
    for t in default_grid(4, 32):
        enc = f_clipped_eval(2, t)
        ln = ln_enclosure(t)
        if enc.lower > -2:
            assert enc.lower >= ln.lower / t + Fraction(1, 4) - Fraction(1, 2 ** 38)


def test_certification_failed_is_runtime_error():
    assert issubclass(CertificationFailed, RuntimeError)
