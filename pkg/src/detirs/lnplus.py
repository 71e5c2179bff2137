"""Certified rational polynomial upper approximations of ln_+ on [0, N].

The construction follows the Bernstein route: approximate the clipped function
f_n(t) = max(-n, ln(t)/t + 2^-n) by a Bernstein polynomial p (built from
rounded-up node values), shift p up until t*p(t) >= ln(t) is certified on a
rational grid, and return g(t) = t*p(t). Because g(0) = 0 = ln_+(0), g dominates
ln_+ on the whole interval.

Certification per grid cell [a, b] uses certified ln enclosures at the ends and
an enclosure of h'(t) = g'(t) - 1/t (Taylor expansion of g' at a, and 1/t in
[1/b, 1/a]); the first cell (0, t_1] uses ln(t) <= ln(t_1) there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .algebra import Polynomial

DEFAULT_LN_TOL = Fraction(1, 1 << 40)
NODE_BITS = 30


class DegreeCapError(ValueError):
    def __init__(self, needed: int, cap: int):
        super().__init__(
            f"degree cap {cap} too small for the requested accuracy; "
            f"estimated minimal Bernstein degree is {needed}"
        )
        self.needed = needed
        self.cap = cap


class CertificationFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class LnEnclosure:
    lower: Fraction
    upper: Fraction

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    def contains(self, x: float) -> bool:
        return float(self.lower) <= x <= float(self.upper)


def _floor_dyadic(x: Fraction, bits: int) -> Fraction:
    return Fraction(math.floor(x * (1 << bits)), 1 << bits)


def _ceil_dyadic(x: Fraction, bits: int) -> Fraction:
    return Fraction(math.ceil(x * (1 << bits)), 1 << bits)


def _atanh_enclosure(s: Fraction, width: Fraction) -> tuple[Fraction, Fraction]:
    """2*atanh(s) for 0 <= s < 1 via its positive series with a geometric tail bound."""
    if s == 0:
        return Fraction(0), Fraction(0)
    s2 = s * s
    term = s
    total = Fraction(0)
    k = 0
    while True:
        total += term / (2 * k + 1)
        term *= s2
        k += 1
        tail = term / ((2 * k + 1) * (1 - s2))
        if 2 * tail <= width:
            return 2 * total, 2 * (total + tail)


@lru_cache(maxsize=64)
def _ln2(width: Fraction) -> tuple[Fraction, Fraction]:
    return _atanh_enclosure(Fraction(1, 3), width)


def ln_enclosure(q, tol=DEFAULT_LN_TOL) -> LnEnclosure:
    """Interval of width <= tol containing ln(q), for rational q > 0."""
    q = Fraction(q)
    tol = Fraction(tol)
    if q <= 0 or tol <= 0:
        raise ValueError("ln_enclosure needs q > 0 and tol > 0")
    if q == 1:
        return LnEnclosure(Fraction(0), Fraction(0))
    k = q.numerator.bit_length() - q.denominator.bit_length()
    r = q / Fraction(2) ** k
    if r < 1:
        k -= 1
        r *= 2
    elif r >= 2:
        k += 1
        r /= 2
    bits = max(8, (8 / tol).__ceil__().bit_length())
    budget = tol / 4
    lr_lo, lr_hi = _atanh_enclosure((r - 1) / (r + 1), budget)
    if k:
        a2, b2 = _ln2(_floor_dyadic(budget / abs(k), bits + abs(k).bit_length()) or Fraction(1, 1 << (bits + 8)))
        kl, kh = (k * a2, k * b2) if k > 0 else (k * b2, k * a2)
    else:
        kl = kh = Fraction(0)
    return LnEnclosure(_floor_dyadic(kl + lr_lo, bits), _ceil_dyadic(kh + lr_hi, bits))


def f_clipped_eval(n: int, t, tol=DEFAULT_LN_TOL) -> LnEnclosure:
    """Enclosure of f_n(t) = max(-n, ln(t)/t + 2^-n); f_n(0) = -n."""
    t = Fraction(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return LnEnclosure(Fraction(-n), Fraction(-n))
    enc = ln_enclosure(t, tol * t if t < 1 else tol)
    shift = Fraction(1, 1 << n)
    lo, hi = enc.lower / t + shift, enc.upper / t + shift
    return LnEnclosure(max(Fraction(-n), lo), max(Fraction(-n), hi))


def bernstein_polynomial(values, N) -> Polynomial:
    """Monomial coefficients of sum_k v_k C(d,k) (t/N)^k (1 - t/N)^(d-k)."""
    N = Fraction(N)
    d = len(values) - 1
    coeffs = []
    for j in range(d + 1):
        acc = Fraction(0)
        for k in range(j + 1):
            v = values[k]
            if v:
                sign = -1 if (j - k) % 2 else 1
                acc += sign * v * math.comb(d, k) * math.comb(d - k, j - k)
        coeffs.append(acc / N ** j)
    return Polynomial(coeffs)


def _clip_point(level: int) -> float:
    """Where ln(t)/t + 2^-level meets -level (float estimate)."""
    lo, hi = 1e-12, 1.0
    target = -level - 2.0 ** -level
    for _ in range(200):
        mid = (lo + hi) / 2
        if math.log(mid) / mid < target:
            lo = mid
        else:
            hi = mid
    return hi


def required_degree(n: int, N) -> int:
    """A-priori Bernstein degree giving |B_d f_2n - f_2n| <= 2^(-2n-1) on [0, N].

    Uses ||B_d f - f|| <= (3/2) omega(f, N/sqrt(d)) with the Lipschitz constant of
    f_2n, attained at the clip point.
    """
    level = 2 * n
    tc = _clip_point(level)
    lip = max((1 - math.log(tc)) / tc ** 2, 1.0)
    eps = 2.0 ** (-2 * n - 1)
    return math.ceil((1.5 * lip * float(N) / eps) ** 2)


def default_grid(N, size: int) -> list[Fraction]:
    """Quadratically spaced nodes N*(i/size)^2, i = 1..size."""
    N = Fraction(N)
    return [N * Fraction(i * i, size * size) for i in range(1, size + 1)]


@dataclass(frozen=True)
class CellMargin:
    left: Fraction
    right: Fraction
    margin: Fraction  # certified lower bound of g(t) - ln(t) on the cell


@dataclass(frozen=True)
class DominationReport:
    passed: bool
    value_at_zero: Fraction
    cells: tuple[CellMargin, ...]
    worst_margin: Fraction
    violating_node: Fraction | None

    def lines(self) -> list[str]:
        out = [f"node 0: g(0) = {self.value_at_zero} {'pass' if self.value_at_zero >= 0 else 'FAIL'}"]
        for c in self.cells:
            status = "pass" if c.margin > 0 else "FAIL"
            out.append(f"cell [{float(c.left):.6g}, {float(c.right):.6g}]: margin {float(c.margin):.6g} {status}")
        out.append(f"worst margin {float(self.worst_margin):.6g}: {'PASS' if self.passed else 'FAIL'}")
        return out


def _two_line_bound(ha, hb, lo, hi, w) -> Fraction:
    if lo >= 0:
        return ha
    if hi <= 0:
        return hb
    s = (ha - hb + hi * w) / (hi - lo)
    s = min(max(s, Fraction(0)), w)
    return max(ha + lo * s, hb - hi * (w - s))


def cell_margins(g: Polynomial, nodes, ln_tol=DEFAULT_LN_TOL) -> list[CellMargin]:
    """Certified lower bounds of g(t) - ln(t) on (0, t_1] and each [t_i, t_i+1]."""
    dg = g.derivative()
    h = [g(t) - ln_enclosure(t, ln_tol).upper for t in nodes]
    out = []
    t1 = nodes[0]
    gmin, _ = g.range_on(0, t1)
    first = gmin - ln_enclosure(t1, ln_tol).upper
    dlo, dhi = dg.range_on(0, t1)
    if dhi * t1 < 1:  # h' < 0 on (0, t1], so h >= h(t1)
        first = max(first, h[0])
    out.append(CellMargin(Fraction(0), t1, first))
    for i in range(len(nodes) - 1):
        a, b = nodes[i], nodes[i + 1]
        lo, hi = dg.range_on(a, b)
        out.append(CellMargin(a, b, _two_line_bound(h[i], h[i + 1], lo - 1 / a, hi - 1 / b, b - a)))
    return out


def check_domination(g, grid_size: int = 64, interval_end=None, ln_tol=DEFAULT_LN_TOL) -> DominationReport:
    """Certify g >= ln_+ on [0, N] on a ``grid_size``-node rational grid."""
    if isinstance(g, CertifiedUpperPoly):
        poly, N = g.poly, g.interval_end
    else:
        poly, N = g, interval_end
    if N is None:
        raise ValueError("interval end required for a bare polynomial")
    nodes = default_grid(N, grid_size)
    cells = cell_margins(poly, nodes, ln_tol)
    g0 = poly(0)
    worst = min(c.margin for c in cells)
    violating = None
    if g0 < 0:
        violating = Fraction(0)
    else:
        bad = next((c for c in cells if c.margin <= 0), None)
        if bad is not None:
            violating = bad.right if bad.left == 0 else bad.left
    return DominationReport(violating is None, g0, tuple(cells), worst, violating)


@dataclass(frozen=True)
class UpperFactor:
    """p approximating f_2n on [0, N] with t*p(t) >= ln(t) certified."""

    poly: Polynomial
    level: int
    interval_end: Fraction
    bernstein_degree: int
    node_values: tuple[Fraction, ...]
    shift: Fraction
    accuracy_target: Fraction
    max_node_deviation: Fraction
    required_degree: int

    @property
    def accuracy_met(self) -> bool:
        return self.max_node_deviation <= self.accuracy_target


@dataclass(frozen=True)
class CertifiedUpperPoly:
    poly: Polynomial
    interval_end: Fraction
    level: int
    factor: UpperFactor = field(repr=False)
    certificate: DominationReport = field(repr=False)

    @property
    def degree(self) -> int:
        return self.poly.degree

    def __call__(self, t):
        return self.poly(t)


def _round_up_coeffs(p: Polynomial, N: Fraction, bits: int) -> Polynomial:
    # Rounding each coefficient up never decreases p on t >= 0, and moves it
    # by at most (deg + 1) * 2^-bits on [0, N].
    scale = math.ceil(N)
    out = []
    for j, c in enumerate(p.coeffs):
        den = (1 << bits) * scale ** j
        out.append(Fraction(math.ceil(c * den), den))
    return Polynomial(out)


def bernstein_upper(n: int, N, degree_cap: int = 16, strict: bool = False,
                    grid_size: int = 64, ln_tol=DEFAULT_LN_TOL,
                    floor: UpperFactor | None = None) -> UpperFactor:
    """Bernstein approximation of f_2n on [0, N], shifted to certify t*p >= ln t.

    With ``strict`` the degree cap must allow the full accuracy 2^(-2n-1);
    otherwise the cap is used and only the accuracy target is relaxed.
    ``floor`` (same N and degree) forces the result to lie above that factor
    everywhere on [0, N] by raising node values; Bernstein basis functions are
    nonnegative there, so node-wise order gives pointwise order.
    """
    if n < 1:
        raise ValueError("level must be positive")
    N = Fraction(N)
    if N <= 0:
        raise ValueError("interval end must be positive")
    need = required_degree(n, N)
    if strict and need > degree_cap:
        raise DegreeCapError(need, degree_cap)
    d = max(1, min(degree_cap, need))
    if floor is not None and (floor.interval_end != N or floor.bernstein_degree != d):
        raise ValueError("floor factor must share the interval and degree")
    level = 2 * n
    values = [
        _ceil_dyadic(f_clipped_eval(level, N * Fraction(k, d), ln_tol).upper, NODE_BITS)
        for k in range(d + 1)
    ]
    p0 = bernstein_polynomial(values, N)
    margin_target = Fraction(1, 1 << (2 * n + 2))
    nodes = default_grid(N, grid_size)
    cells = cell_margins(p0.times_t(), nodes, ln_tol)
    if cells[0].margin <= 0:
        raise CertificationFailed("cannot certify the cell next to 0")
    shift = Fraction(0)
    for c in cells[1:]:
        shift = max(shift, (margin_target * c.left - c.margin) / c.left)
    shift = _ceil_dyadic(shift, NODE_BITS)
    values = [v + shift for v in values]
    if floor is not None:
        slack = Fraction(d + 2, 1 << NODE_BITS)
        values = [max(v, w + slack) for v, w in zip(values, floor.node_values)]
    p = _round_up_coeffs(bernstein_polynomial(values, N), N, NODE_BITS)
    deviation = Fraction(0)
    for t in nodes:
        enc = f_clipped_eval(level, t, ln_tol)
        pt = p(t)
        deviation = max(deviation, pt - enc.lower, enc.upper - pt)
    return UpperFactor(p, n, N, d, tuple(values), shift,
                       Fraction(1, 1 << (2 * n + 1)), deviation, need)


def _certify(factor: UpperFactor, grid_size: int, ln_tol) -> CertifiedUpperPoly:
    g = factor.poly.times_t()
    cert = check_domination(g, grid_size, factor.interval_end, ln_tol)
    if not cert.passed:
        raise CertificationFailed(f"domination check failed near t = {cert.violating_node}")
    return CertifiedUpperPoly(g, factor.interval_end, factor.level, factor, cert)


def g_poly(n: int, N, degree_cap: int = 16, strict: bool = False,
           grid_size: int = 64, ln_tol=DEFAULT_LN_TOL) -> CertifiedUpperPoly:
    """g(t) = t * p(t) with a domination certificate on [0, N]."""
    return _certify(bernstein_upper(n, N, degree_cap, strict, grid_size, ln_tol), grid_size, ln_tol)


def g_family(levels, N, degree_cap: int = 16, grid_size: int = 64,
             ln_tol=DEFAULT_LN_TOL) -> dict[int, CertifiedUpperPoly]:
    """Certified g_n for several levels on one interval, decreasing in n pointwise.

    Built from the top level down; each level is floored at the next one.
    """
    out: dict[int, CertifiedUpperPoly] = {}
    below = None
    for n in sorted(set(levels), reverse=True):
        factor = bernstein_upper(n, N, degree_cap, False, grid_size, ln_tol, floor=below)
        out[n] = _certify(factor, grid_size, ln_tol)
        below = factor
    return dict(sorted(out.items()))


def lnplus_float(t: float) -> float:
    return 0.0 if t == 0 else math.log(t)
