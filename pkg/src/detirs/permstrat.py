"""Finite permutation actions of the game group: traces, strategies, determinants.

Permutations are tuples of 0-based images; the text format is 1-based cycle
notation. A word acts as the composition of its letters' permutations
(leftmost letter applied last), which is a homomorphism when the action is
valid.
"""
from __future__ import annotations

import itertools
import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

from .algebra import Element, Matrix
from .errors import VerificationFailed
from .games import GameSpec, strategy_functional, value
from .group import GroupParams, Word, WordSet
from .hierarchy import LocalDistribution

Perm = tuple


def identity_perm(d: int) -> Perm:
    return tuple(range(d))


def compose(p: Perm, q: Perm) -> Perm:
    """p ∘ q (apply q first)."""
    return tuple(p[i] for i in q)


def fixed_points(p: Perm) -> int:
    return sum(1 for i, v in enumerate(p) if i == v)


def is_involution(p: Perm) -> bool:
    return all(p[p[i]] == i for i in range(len(p)))


def format_cycles(p: Perm) -> str:
    seen, out = set(), []
    for i in range(len(p)):
        if i in seen or p[i] == i:
            continue
        cyc, j = [i], p[i]
        seen.add(i)
        while j != i:
            seen.add(j)
            cyc.append(j)
            j = p[j]
        out.append("(" + " ".join(str(c + 1) for c in cyc) + ")")
    return "".join(out) or "()"


def parse_cycles(text: str, d: int) -> Perm:
    img = list(range(d))
    for body in re.findall(r"\(([^)]*)\)", text):
        pts = [int(t) - 1 for t in body.split()]
        if any(not 0 <= v < d for v in pts):
            raise ValueError(f"point out of range in {text!r}")
        for a, b in zip(pts, pts[1:] + pts[:1]):
            img[a] = b
    if sorted(img) != list(range(d)):
        raise ValueError(f"not a permutation: {text!r}")
    return tuple(img)


@dataclass(frozen=True)
class PermutationAction:
    """Images of u_{x,i} (indexed [x][i-1]) and of J on {0..d-1}."""

    params: GroupParams
    degree: int
    u: tuple
    J: Perm

    def image(self, w: Word) -> Perm:
        p = identity_perm(self.degree)
        for x, mask in w.blocks:
            for i in range(self.params.m):
                if mask >> i & 1:
                    p = compose(p, self.u[x][i])
        if w.j:
            p = compose(p, self.J)
        return p


def validate_action(a: PermutationAction) -> str | None:
    """First violated relation, or None when the action is valid."""
    params, d = a.params, a.degree
    labels = params.questions
    if len(a.J) != d or sorted(a.J) != list(range(d)):
        return "J image is not a permutation"
    for x, row in enumerate(a.u):
        for i, p in enumerate(row):
            if len(p) != d or sorted(p) != list(range(d)):
                return f"{labels[x]}.{i + 1} image is not a permutation"
    if not is_involution(a.J):
        return "not involution: J"
    for x, row in enumerate(a.u):
        for i, p in enumerate(row):
            if not is_involution(p):
                return f"not involution: {labels[x]}.{i + 1}"
    for x, row in enumerate(a.u):
        for i, j in itertools.combinations(range(len(row)), 2):
            if compose(row[i], row[j]) != compose(row[j], row[i]):
                return f"same-question images do not commute: {labels[x]}.{i + 1}, {labels[x]}.{j + 1}"
    for x, row in enumerate(a.u):
        for i, p in enumerate(row):
            if compose(p, a.J) != compose(a.J, p):
                return f"J does not commute with {labels[x]}.{i + 1}"
    return None


def make_action(params: GroupParams, degree: int, u, J) -> PermutationAction:
    a = PermutationAction(params, degree, tuple(tuple(tuple(p) for p in row) for row in u), tuple(J))
    if len(a.u) != len(params.questions) or any(len(row) != params.m for row in a.u):
        raise ValueError("wrong number of generator images")
    problem = validate_action(a)
    if problem:
        raise ValueError(problem)
    return a


def trivial_action(params: GroupParams, degree: int = 1) -> PermutationAction:
    e = identity_perm(degree)
    return make_action(params, degree, [[e] * params.m for _ in params.questions], e)


def format_action(a: PermutationAction) -> str:
    lines = [f"degree {a.degree}"]
    for x, row in enumerate(a.u):
        for i, p in enumerate(row):
            lines.append(f"{a.params.questions[x]}.{i + 1}: {format_cycles(p)}")
    lines.append(f"J: {format_cycles(a.J)}")
    return "\n".join(lines) + "\n"


def parse_action(params: GroupParams, text: str) -> PermutationAction:
    degree = None
    images = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("degree"):
            degree = int(line.split()[1])
            continue
        head, _, body = line.partition(":")
        images[head.strip()] = body.strip()
    if degree is None:
        raise ValueError("action file needs a 'degree d' line")
    u = [[parse_cycles(images.pop(f"{q}.{i + 1}", "()"), degree) for i in range(params.m)]
         for q in params.questions]
    J = parse_cycles(images.pop("J", "()"), degree)
    if images:
        raise ValueError(f"unknown generators: {sorted(images)}")
    return make_action(params, degree, u, J)


# -- traces and strategies ----------------------------------------------------

def induced_trace(a: PermutationAction, ws) -> dict[Word, Fraction]:
    return {w: Fraction(fixed_points(a.image(w)), a.degree) for w in ws}


def local_data(a: PermutationAction, domain: WordSet) -> LocalDistribution:
    """Distribution of stab(i) ∩ domain for a uniform point i."""
    imgs = [(w, a.image(w)) for w in domain]
    weights: dict[frozenset, Fraction] = {}
    for i in range(a.degree):
        S = frozenset(w for w, p in imgs if p[i] == i)
        weights[S] = weights.get(S, Fraction(0)) + Fraction(1, a.degree)
    return LocalDistribution(domain, weights)


def _require_free_J(a: PermutationAction):
    if fixed_points(a.J):
        raise ValueError("J has fixed points; the strategy is not normalized")


def perm_value(G: GameSpec, a: PermutationAction, functional=None) -> Fraction:
    _require_free_J(a)
    f = functional if functional is not None else strategy_functional(G)
    return value(G, induced_trace(a, f.support()), f)


def _perm_matrix(p: Perm) -> list[list[Fraction]]:
    d = len(p)
    M = [[Fraction(0)] * d for _ in range(d)]
    for col, row in enumerate(p):
        M[row][col] = Fraction(1)
    return M


def _mm(A, B):
    n, k, m = len(A), len(B), len(B[0])
    return [[sum((A[i][t] * B[t][j] for t in range(k) if A[i][t]), Fraction(0)) for j in range(m)]
            for i in range(n)]


def _projection(a: PermutationAction, x: int, ans: int):
    d = a.degree
    E = [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]
    for i in range(a.params.m):
        P = _perm_matrix(a.u[x][i])
        s = -1 if ans >> i & 1 else 1
        F = [[(Fraction(int(r == c)) + s * P[r][c]) / 2 for c in range(d)] for r in range(d)]
        E = _mm(E, F)
    return E


def correlation_direct(a: PermutationAction, ans_a: int, ans_b: int, x: int, y: int) -> Fraction:
    """tr((1 - P_J) E_x^a E_y^b) / d with explicit rational matrices."""
    d = a.degree
    PJ = _perm_matrix(a.J)
    M = _mm(_projection(a, x, ans_a), _projection(a, y, ans_b))
    tr = sum((M[i][i] for i in range(d)), Fraction(0))
    tr -= sum((PJ[i][t] * M[t][i] for i in range(d) for t in range(d) if PJ[i][t]), Fraction(0))
    return tr / d


def perm_value_direct(G: GameSpec, a: PermutationAction) -> Fraction:
    _require_free_J(a)
    top = 1 << G.params.m
    total = Fraction(0)
    for x, y in G.pairs():
        for ans_a in range(top):
            for ans_b in range(top):
                if G.decider(ans_a, ans_b, x, y):
                    total += G.q(x, y) * correlation_direct(a, ans_a, ans_b, x, y)
    return total


# -- enumeration and search -----------------------------------------------

def canonical_free_involution(d: int) -> Perm:
    if d % 2:
        raise ValueError("a fixed-point-free involution needs even degree")
    return tuple(i ^ 1 for i in range(d))


@lru_cache(maxsize=64)
def centralizer(J: Perm) -> tuple[Perm, ...]:
    d = len(J)
    return tuple(p for p in itertools.permutations(range(d)) if compose(p, J) == compose(J, p))


@lru_cache(maxsize=64)
def _central_involutions(J: Perm) -> tuple[Perm, ...]:
    return tuple(p for p in centralizer(J) if is_involution(p))


@lru_cache(maxsize=256)
def _question_options(J: Perm, m: int) -> tuple[tuple[Perm, ...], ...]:
    """m-tuples of pairwise commuting involutions commuting with J."""
    invs = _central_involutions(J)
    out = []
    for combo in itertools.product(invs, repeat=m):
        if all(compose(p, q) == compose(q, p) for p, q in itertools.combinations(combo, 2)):
            out.append(combo)
    return tuple(out)


def enumerate_actions(params: GroupParams, degree: int) -> Iterator[PermutationAction]:
    """Valid actions with J the canonical fixed-point-free involution.

    Every action with fixed-point-free J is conjugate to one of these, and
    conjugate actions induce the same trace.
    """
    J = canonical_free_involution(degree)
    opts = _question_options(J, params.m)
    for choice in itertools.product(opts, repeat=len(params.questions)):
        yield PermutationAction(params, degree, tuple(choice), J)


def random_action(params: GroupParams, degree: int, rng: random.Random,
                  free_J: bool = False) -> PermutationAction:
    """A random valid action; J is a random involution (fixed-point-free if asked)."""
    pts = list(range(degree))
    rng.shuffle(pts)
    J = list(range(degree))
    pairs = degree // 2 if free_J else rng.randint(0, degree // 2)
    if free_J and degree % 2:
        raise ValueError("a fixed-point-free involution needs even degree")
    for t in range(pairs):
        a, b = pts[2 * t], pts[2 * t + 1]
        J[a], J[b] = b, a
    J = tuple(J)
    invs = _central_involutions(J)
    u = []
    for _ in params.questions:
        row: list[Perm] = []
        for _ in range(params.m):
            ok = [p for p in invs if all(compose(p, q) == compose(q, p) for q in row)]
            row.append(rng.choice(ok))
        u.append(tuple(row))
    return make_action(params, degree, u, J)


@dataclass
class BetaResult:
    value: Fraction
    action: PermutationAction | None
    evaluations: int
    exhausted: bool  # budget ran out before the candidate stream ended
    history: list = field(default_factory=list, repr=False)  # (evaluation index, value) improvements


def _local_moves(a: PermutationAction, rng: random.Random) -> PermutationAction:
    J = a.J
    x = rng.randrange(len(a.u))
    row = list(a.u[x])
    if rng.random() < 0.5:
        c = rng.choice(centralizer(J))
        cinv = tuple(sorted(range(len(c)), key=lambda i: c[i]))
        row = [compose(compose(c, p), cinv) for p in row]
    else:
        i = rng.randrange(len(row))
        others = row[:i] + row[i + 1:]
        ok = [p for p in _central_involutions(J) if all(compose(p, q) == compose(q, p) for q in others)]
        row[i] = rng.choice(ok)
    u = list(a.u)
    u[x] = tuple(row)
    return PermutationAction(a.params, a.degree, tuple(u), J)


def _candidates(params: GroupParams, max_degree: int, seed: int, best_ref: list) -> Iterator[PermutationAction]:
    for d in range(2, max_degree + 1, 2):
        yield from enumerate_actions(params, d)
    # Random walk at the top degree with occasional restarts from the best so far;
    # best_ref only reflects already evaluated candidates, so the stream is fixed.
    top = max_degree - max_degree % 2
    rng = random.Random(seed)
    current = None
    while True:
        best = best_ref[0]
        if current is None or (best is not None and best.degree == top and rng.random() < 0.1):
            current = best if best is not None and best.degree == top else next(enumerate_actions(params, top))
        current = _local_moves(current, rng)
        yield current


def search_beta(G: GameSpec, max_degree: int = 2, budget: int = 2_000, seed: int = 0,
                stop_at=None) -> BetaResult:
    """Best permutation-strategy value over a deterministic candidate stream.

    Exhaustive over degrees 2, 4, ... <= max_degree, then seeded local search
    at the largest even degree. The stream does not depend on ``budget``, so a
    larger budget never gives a smaller value.
    """
    if max_degree < 2:
        raise ValueError("degree must be at least 2 for a fixed-point-free J")
    f = strategy_functional(G)
    words = f.support()
    best, best_action = Fraction(-1), None
    best_ref = [None]
    history = []
    evals = 0
    stream = _candidates(G.params, max_degree, seed, best_ref)
    exhausted = True
    for a in stream:
        if evals >= budget:
            break
        evals += 1
        v = value(G, induced_trace(a, words), f)
        if v > best:
            best, best_action = v, a
            best_ref[0] = a
            history.append((evals, v))
            if stop_at is not None and v >= stop_at:
                exhausted = False
                break
    return BetaResult(best, best_action, evals, exhausted, history)


# -- Fuglede-Kadison determinants -------------------------------------------

def integer_image(a: PermutationAction, A: Matrix) -> list[list[int]]:
    """(alpha ⊗ id)(A) as a kd x kd integer matrix; P(s)[s(p)][p] = 1."""
    if not A.is_integral():
        raise ValueError("matrix has non-integer coefficients")
    k, d = A.k, a.degree
    M = [[0] * (k * d) for _ in range(k * d)]
    for r in range(k):
        for c in range(k):
            for w, coef in A.rows[r][c].terms.items():
                p = a.image(w)
                ci = int(coef)
                for col in range(d):
                    M[r * d + p[col]][c * d + col] += ci
    return M


def charpoly(M: list[list[int]]) -> list[int]:
    """Coefficients c_0..c_n of det(lambda I - M), division free (Berkowitz)."""
    n = len(M)
    C = [1]
    for k in range(n):
        R = M[k][:k]
        S = [M[i][k] for i in range(k)]
        col = [1, -M[k][k]]
        v = S
        for _ in range(k):
            col.append(-sum(r * s for r, s in zip(R, v)))
            v = [sum(M[i][j] * v[j] for j in range(k)) for i in range(k)]
        C = [sum(col[i - j] * C[j] for j in range(len(C)) if 0 <= i - j < len(col))
             for i in range(len(C) + 1)]
    return C[::-1]


@dataclass(frozen=True)
class FkResult:
    nullity: int
    coeff: int  # lowest nonzero coefficient of the characteristic polynomial of M^T M
    size: int
    charpoly: tuple[int, ...]

    @property
    def abs_coeff(self) -> int:
        return abs(self.coeff)

    @property
    def logdet(self) -> float:
        """ln|c| / size, the normalised log of the modified determinant."""
        return math.log(self.abs_coeff) / self.size if self.size else 0.0

    def render(self) -> str:
        return "\n".join([
            f"size {self.size}",
            f"nullity {self.nullity}",
            f"coefficient {self.coeff}",
            f"logdet ln({self.abs_coeff})/{self.size} = {self.logdet:.12g}",
            "charpoly " + " ".join(str(c) for c in self.charpoly),
        ]) + "\n"


def fk_logdet(a: PermutationAction, A: Matrix) -> FkResult:
    M = integer_image(a, A)
    n = len(M)
    G = [[sum(M[t][i] * M[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
    cp = charpoly(G)
    r = next(i for i, c in enumerate(cp) if c)
    res = FkResult(r, cp[r], n, tuple(cp))
    if res.abs_coeff < 1:
        raise VerificationFailed("lowest nonzero characteristic coefficient below 1")
    return res


def random_integer_matrix(params: GroupParams, rng: random.Random, k_max: int = 3,
                          radius: int = 2, coeff_max: int = 2, max_terms: int = 3) -> Matrix:
    from .group import ball
    words = list(ball(params, radius))
    k = rng.randint(1, k_max)
    rows = []
    for _ in range(k):
        row = []
        for _ in range(k):
            terms = {}
            for _ in range(rng.randint(0, max_terms)):
                terms[rng.choice(words)] = rng.randint(-coeff_max, coeff_max)
            row.append(Element(params, terms))
        rows.append(row)
    return Matrix(params, rows)


@dataclass
class DetSuiteReport:
    samples: int
    skipped: int
    min_abs_coeff: int | None
    min_logdet: float | None
    passed: bool


def det_check_suite(a: PermutationAction, samples: int = 100, seed: int = 0, k_max: int = 3,
                    radius: int = 2, coeff_max: int = 2) -> DetSuiteReport:
    rng = random.Random(seed)
    skipped, cmin, lmin, ok = 0, None, None, True
    for _ in range(samples):
        A = random_integer_matrix(a.params, rng, k_max, radius, coeff_max)
        if not A.words():
            skipped += 1
            continue
        try:
            res = fk_logdet(a, A)
        except VerificationFailed:
            ok = False
            continue
        cmin = res.abs_coeff if cmin is None else min(cmin, res.abs_coeff)
        lmin = res.logdet if lmin is None else min(lmin, res.logdet)
    return DetSuiteReport(samples, skipped, cmin, lmin, ok)
