"""Linear-programming upper bounds alpha_n on determinant-IRS game values.

Constraints are stored over *keys* that are either a word w (meaning tau(w),
the probability that w lies in the random subgroup) or an ``Event``
(window W, pattern P) meaning the probability that S ∩ W = P. Subset mode
turns keys into sums of support weights; trace mode uses one variable per
class of words identified by inverse/conjugation equalities and accepts word
keys only.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

from .algebra import Element, Matrix, adjoint, format_matrix, mat_mul, poly_apply, trace_functional
from .errors import BudgetExceeded, VerificationFailed
from .games import GameSpec, correlation, strategy_functional
from .group import Word, WordSet, ball, conjugate, inverse, multiply
from .lnplus import CertifiedUpperPoly, g_poly
from .lp import EQ, GE, LE, Constraint, LinearProgram, LpOutcome, solve, verify


@dataclass(frozen=True)
class Event:
    window: frozenset
    pattern: frozenset

    def sort_key(self):
        return (tuple(sorted(w.sort_key() for w in self.window)), tuple(sorted(w.sort_key() for w in self.pattern)))


def _key_order(k):
    return (0, k.sort_key()) if isinstance(k, Word) else (1, k.sort_key())


@dataclass
class WordConstraint:
    coeffs: dict  # Word | Event -> Fraction
    rel: str
    rhs: Fraction
    tag: str
    name: str = ""

    def canonical(self):
        items = tuple(sorted(((_key_order(k), c) for k, c in self.coeffs.items())))
        return (items, self.rel, self.rhs)

    def lhs(self, prob) -> Fraction:
        return sum((c * prob(k) for k, c in self.coeffs.items()), Fraction(0))

    def holds(self, prob) -> bool:
        v = self.lhs(prob)
        return v <= self.rhs if self.rel == LE else v >= self.rhs if self.rel == GE else v == self.rhs


def _dedupe(cons) -> list[WordConstraint]:
    seen, out = set(), []
    for c in cons:
        key = c.canonical()
        if key not in seen:
            seen.add(key)
            out.append(c)
    return out


# -- local distributions ---------------------------------------------------

def closure(S, domain: WordSet) -> frozenset:
    """Smallest partial subgroup of ``domain`` containing S."""
    out = {domain.params.identity()} | set(S)
    out |= {inverse(w) for w in out}
    changed = True
    while changed:
        changed = False
        for a in list(out):
            for b in list(out):
                c = multiply(a, b)
                if c in domain and c not in out:
                    out.add(c)
                    out.add(inverse(c))
                    changed = True
    return frozenset(out)


def is_partial_subgroup(S, domain: WordSet) -> bool:
    S = frozenset(S)
    return S <= set(domain) and closure(S, domain) == S


def partial_subgroups(domain: WordSet, budget: int = 20_000) -> list[frozenset]:
    """All partial subgroups of ``domain``, deterministically ordered."""
    start = closure((), domain)
    seen = {start}
    stack = [start]
    while stack:
        C = stack.pop()
        for w in domain:
            if w in C:
                continue
            D = closure(C | {w}, domain)
            if D not in seen:
                seen.add(D)
                if len(seen) > budget:
                    raise BudgetExceeded(f"more than {budget} admissible supports on {len(domain)} words")
                stack.append(D)
    return sorted(seen, key=lambda S: (len(S), sorted(w.sort_key() for w in S)))


@dataclass
class LocalDistribution:
    domain: WordSet
    weights: dict  # frozenset -> Fraction

    def __post_init__(self):
        self.weights = {S: Fraction(p) for S, p in self.weights.items() if p}
        if any(p < 0 for p in self.weights.values()):
            raise ValueError("negative weight")
        if sum(self.weights.values(), Fraction(0)) != 1:
            raise ValueError("weights must sum to 1")
        for S in self.weights:
            if not is_partial_subgroup(S, self.domain):
                raise ValueError("support is not a partial subgroup of the domain")

    @property
    def supports(self) -> list[frozenset]:
        return sorted(self.weights, key=lambda S: (len(S), sorted(w.sort_key() for w in S)))

    def prob(self, key) -> Fraction:
        if isinstance(key, Word):
            if key not in self.domain:
                raise KeyError(f"{key} outside the domain")
            return sum((p for S, p in self.weights.items() if key in S), Fraction(0))
        return sum((p for S, p in self.weights.items() if S & key.window == key.pattern), Fraction(0))


def restrict(pi: LocalDistribution, B: WordSet) -> LocalDistribution:
    if not B.issubset(pi.domain):
        raise ValueError("restriction target is not contained in the domain")
    members = frozenset(B)
    out: dict[frozenset, Fraction] = {}
    for S, p in pi.weights.items():
        T = S & members
        out[T] = out.get(T, Fraction(0)) + p
    return LocalDistribution(B, out)


def induced_trace(pi: LocalDistribution) -> dict[Word, Fraction]:
    return {w: pi.prob(w) for w in pi.domain}


# -- constraint families ---------------------------------------------------

def irs_local_constraints(domain: WordSet, supports=None) -> list[WordConstraint]:
    """Normalisation and windowed conjugation-marginal equalities (subset mode)."""
    params = domain.params
    if supports is None:
        supports = partial_subgroups(domain)
    cons = [WordConstraint({Event(frozenset(), frozenset()): Fraction(1)}, EQ, Fraction(1), "normalization")]
    for g in params.generators()[:-1]:  # J is central
        window = frozenset(w for w in domain if conjugate(w, g) in domain)
        phi = {w: conjugate(w, g) for w in window}
        patterns = set()
        for S in supports:
            P = S & window
            patterns.add(P)
            patterns.add(frozenset(phi[w] for w in P))
        done = set()
        for P in sorted(patterns, key=lambda P: sorted(w.sort_key() for w in P)):
            Q = frozenset(phi[w] for w in P)
            if P == Q or (Q, P) in done:
                continue
            done.add((P, Q))
            cons.append(WordConstraint(
                {Event(window, P): Fraction(1), Event(window, Q): Fraction(-1)},
                EQ, Fraction(0), "conjugation"))
    return cons


def trace_constraints(domain: WordSet, B: WordSet) -> list[WordConstraint]:
    """Trace-level relaxation: tau(e) = 1, inverse and conjugation equalities,
    superadditivity tau(gh) >= tau(g) + tau(h) - 1 for g, h in B."""
    params = domain.params
    e = params.identity()
    cons = [WordConstraint({e: Fraction(1)}, EQ, Fraction(1), "normalization")]
    for w in domain:
        v = inverse(w)
        if v != w and w < v:
            cons.append(WordConstraint({w: Fraction(1), v: Fraction(-1)}, EQ, Fraction(0), "inverse"))
    for g in params.generators()[:-1]:
        for w in domain:
            v = conjugate(w, g)
            if v in domain and w < v:
                cons.append(WordConstraint({w: Fraction(1), v: Fraction(-1)}, EQ, Fraction(0), "conjugation"))
    for g in B:
        for h in B:
            if g == e or h == e:
                continue
            gh = multiply(g, h)
            if gh not in domain or gh in (g, h):
                continue
            co: dict = {}
            for w, c in ((g, 1), (h, 1), (gh, -1)):
                co[w] = co.get(w, 0) + Fraction(c)
            co = {w: c for w, c in co.items() if c}
            cons.append(WordConstraint(co, LE, Fraction(1), "superadditive"))
    return _dedupe(cons)


def game_words(G: GameSpec) -> WordSet:
    """Words of every correlation (1-J) e_x^a e_y^b for asked pairs, plus e and J."""
    params = G.params
    top = 1 << params.m
    words = {params.J()}
    for x, y in G.pairs():
        for a in range(top):
            for b in range(top):
                words |= correlation(params, a, b, x, y).support()
    return WordSet.from_words(params, words)


def strategy_constraints(G: GameSpec, domain: WordSet) -> list[WordConstraint]:
    """p(a,b|x,y) >= 0 for tuples whose words lie in the domain, and tau(J) = 0."""
    params = G.params
    if params.J() not in domain:
        raise ValueError("domain must contain J")
    missing = [w for w in strategy_functional(G).support() if w not in domain]
    if missing:
        raise ValueError(f"game support not contained in the domain: {missing[0]}")
    top = 1 << params.m
    cons = [WordConstraint({params.J(): Fraction(1)}, EQ, Fraction(0), "strategy")]
    for x, y in G.pairs():
        for a in range(top):
            for b in range(top):
                el = correlation(params, a, b, x, y)
                if all(w in domain for w in el.support()):
                    cons.append(WordConstraint(dict(el.terms), GE, Fraction(0), "strategy",
                                               f"p({a},{b}|{x},{y})"))
    return cons


def _entries(B: WordSet, max_l1: int) -> list[Element]:
    """Nonzero integer combinations of words of B with l1 norm <= max_l1."""
    params = B.params
    words = list(B)
    out = []
    for total in range(1, max_l1 + 1):
        for combo in itertools.combinations_with_replacement(range(len(words)), total):
            counts: dict[int, int] = {}
            for i in combo:
                counts[i] = counts.get(i, 0) + 1
            idx = sorted(counts)
            for signs in itertools.product((1, -1), repeat=len(idx)):
                out.append(Element(params, {words[i]: s * counts[i] for i, s in zip(idx, signs)}))
    return out


def _normalized_rows(entries: list[Element], k: int, params) -> Iterator[tuple]:
    zero = Element.zero(params)
    one = Element.scalar(params, 1)
    for lead in range(k):
        firsts = [one] + [x for x in entries if len(x.terms) > 1 or sum(abs(c) for c in x.terms.values()) > 1]
        firsts = [x for x in firsts if min(x.terms.items(), key=lambda t: t[0].sort_key())[1] > 0]
        for first in firsts:
            for rest in itertools.product([zero] + entries, repeat=k - lead - 1):
                yield (zero,) * lead + (first,) + rest


def det_matrices(B: WordSet, n: int, max_rows: int = 2_000) -> Iterator[Matrix]:
    """Integer matrices A in M_k(Z[B]), k <= n, entries with l1 norm < n.

    Left multiplication of a row by a unit +-w and row permutations leave A*A
    unchanged, so rows start with +e when their first nonzero entry is a
    single word, and rows are taken in nondecreasing order. Only the first
    ``max_rows`` normalized rows are used for each k.
    """
    params = B.params
    if n < 2:
        return
    entries = _entries(B, n - 1)
    for k in range(1, n + 1):
        rows = list(itertools.islice(_normalized_rows(entries, k, params), max_rows))
        for combo in itertools.combinations_with_replacement(range(len(rows)), k):
            yield Matrix(params, [rows[i] for i in combo])


@dataclass
class DetConstraint:
    matrix: Matrix
    constraint: WordConstraint


def det_constraints(n: int, B: WordSet, g: CertifiedUpperPoly, budget: int = 16,
                    max_candidates: int = 200_000) -> list[DetConstraint]:
    """(tau ⊗ tr_k)(g(A*A)) >= 0 for the first ``budget`` distinct nonconstant A*A."""
    out: list[DetConstraint] = []
    seen = set()
    for count, A in enumerate(det_matrices(B, n)):
        if len(out) >= budget or count >= max_candidates:
            break
        AA = mat_mul(adjoint(A), A)
        key = format_matrix(AA)
        if key in seen:
            continue
        seen.add(key)
        f = trace_functional(poly_apply(g.poly, AA))
        support = f.support()
        e = B.params.identity()
        if support <= {e}:
            if f.coeffs.get(e, 0) < 0:
                raise VerificationFailed("constant determinant constraint is negative")
            continue
        out.append(DetConstraint(A, WordConstraint(dict(f.coeffs), GE, Fraction(0), "det",
                                                   f"det{len(out)}")))
    return out


# -- the LP -----------------------------------------------------------------

@dataclass(frozen=True)
class HierarchyOptions:
    mode: str = "subset"  # subset | trace
    cumulative: bool = True
    det: bool = True
    deg_cap: int = 4
    matrix_budget: int = 16
    ball_radius_start: int = 0
    tight_N: bool = False
    subset_budget: int = 2_000
    rule: str = "bland"

    def __post_init__(self):
        if self.mode not in ("trace", "subset"):
            raise ValueError("mode must be 'trace' or 'subset'")


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


@dataclass
class HierarchyLevel:
    n: int
    B: WordSet
    g: CertifiedUpperPoly
    B_tilde: WordSet
    constraints: list[WordConstraint]
    det: list[DetConstraint]
    lp: LinearProgram
    outcome: LpOutcome
    mode: str
    key_vars: dict = field(repr=False)  # key -> {var: coeff}, const
    supports: list = field(default_factory=list, repr=False)

    @property
    def alpha(self) -> Fraction:
        return self.outcome.optimum

    def tau(self, x: Mapping[str, Fraction]) -> dict[Word, Fraction]:
        return {w: self._eval_key(w, x) for w in self.B_tilde}

    def _eval_key(self, key, x) -> Fraction:
        lin = self.key_vars[key] if key in self.key_vars else _expand_key(self, key)
        return sum((c * x[v] for v, c in lin.items()), Fraction(0))

    @property
    def certificate(self):
        """Witness as local data (subset mode) or as a trace on B_tilde (trace mode)."""
        x = self.outcome.witness
        if self.mode == "subset":
            return LocalDistribution(self.B_tilde, {S: x[f"s{i}"] for i, S in enumerate(self.supports)})
        return self.tau(x)

    def assignment_from_local(self, pi: LocalDistribution) -> dict[str, Fraction]:
        """LP point corresponding to genuine local data on B_tilde."""
        if self.mode == "subset":
            index = {S: i for i, S in enumerate(self.supports)}
            x = {v: Fraction(0) for v in self.lp.variables}
            for S, p in pi.weights.items():
                x[f"s{index[S]}"] += p
            return x
        x: dict[str, Fraction] = {}
        for key, lin in self.key_vars.items():
            (v, _), = lin.items()
            p = pi.prob(key)
            if x.setdefault(v, p) != p:
                raise VerificationFailed(f"local data differs inside the class of {key}")
        return x

    def feasible(self, x: Mapping[str, Fraction]) -> bool:
        for v in self.lp.variables:
            lo, hi = self.lp.bound(v)
            if (lo is not None and x[v] < lo) or (hi is not None and x[v] > hi):
                return False
        return all(c.holds(x) for c in self.lp.constraints)


def _expand_key(level: HierarchyLevel, key) -> dict[str, Fraction]:
    # subset mode: sum of support weights selected by the key
    out = {}
    for i, S in enumerate(level.supports):
        hit = key in S if isinstance(key, Word) else S & key.window == key.pattern
        if hit:
            out[f"s{i}"] = Fraction(1)
    return out


def _build_lp(objective, cons: list[WordConstraint], domain: WordSet, mode: str, supports):
    if mode == "subset":
        names = [f"s{i}" for i in range(len(supports))]
        cache: dict = {}

        def expand(key):
            if key not in cache:
                out = {}
                for i, S in enumerate(supports):
                    hit = key in S if isinstance(key, Word) else S & key.window == key.pattern
                    if hit:
                        out[names[i]] = Fraction(1)
                cache[key] = out
            return cache[key]
        bounds = {v: (Fraction(0), None) for v in names}
        key_vars = {}
    else:
        uf = _UnionFind(list(domain))
        rest = []
        for c in cons:
            items = list(c.coeffs.items())
            if c.rel == EQ and c.rhs == 0 and len(items) == 2 and items[0][1] == -items[1][1]:
                uf.union(items[0][0], items[1][0])
            else:
                rest.append(c)
        cons = rest
        reps = sorted({uf.find(w) for w in domain}, key=Word.sort_key)
        var_of = {r: f"t{i}" for i, r in enumerate(reps)}
        names = [var_of[r] for r in reps]
        key_vars = {w: {var_of[uf.find(w)]: Fraction(1)} for w in domain}

        def expand(key):
            if not isinstance(key, Word):
                raise ValueError("trace mode accepts word keys only")
            return key_vars[key]
        bounds = {v: (Fraction(0), Fraction(1)) for v in names}

    def linear(coeffs):
        out: dict[str, Fraction] = {}
        for k, c in coeffs.items():
            for v, a in expand(k).items():
                out[v] = out.get(v, 0) + a * c
        return {v: a for v, a in out.items() if a}

    lp = LinearProgram(names, linear(objective), [], bounds)
    for i, c in enumerate(cons):
        lin = linear(c.coeffs)
        if not lin:
            ok = (0 <= c.rhs) if c.rel == LE else (0 >= c.rhs) if c.rel == GE else c.rhs == 0
            if not ok:
                raise VerificationFailed(f"constraint {c.name or c.tag} is identically violated")
            continue
        lp.constraints.append(Constraint(lin, c.rel, c.rhs, f"{c.tag}{i}"))
    return lp, key_vars


def level_sets(G: GameSpec, n: int, opts: HierarchyOptions) -> WordSet:
    """B_n: game words together with the ball of radius r0 + n - 1."""
    return game_words(G) | ball(G.params, opts.ball_radius_start + n - 1)


def interval_end(n: int, tight: bool = False) -> int:
    """Spectral bound for A*A: n^6 by default, (n(n-1))^2 when tight."""
    if tight:
        return max(1, (n * (n - 1)) ** 2)
    return n ** 6


def iter_levels(G: GameSpec, opts: HierarchyOptions | None = None) -> Iterator[HierarchyLevel]:
    """Levels 1, 2, ...; level n includes earlier constraints in cumulative mode."""
    opts = opts or HierarchyOptions()
    objective = dict(strategy_functional(G).coeffs)
    carried: list[WordConstraint] = []
    prev_domain: WordSet | None = None
    n = 0
    while True:
        n += 1
        B = level_sets(G, n, opts)
        g = g_poly(n, interval_end(n, opts.tight_N), opts.deg_cap)
        dets = det_constraints(n, B, g, opts.matrix_budget) if opts.det else []
        extra = set()
        for d in dets:
            extra |= set(d.constraint.coeffs)
        domain = B | WordSet.from_words(G.params, extra)
        if opts.cumulative and prev_domain is not None:
            domain = domain | prev_domain
        supports = partial_subgroups(domain, opts.subset_budget) if opts.mode == "subset" else []
        if opts.mode == "subset":
            base = irs_local_constraints(domain, supports)
        else:
            base = trace_constraints(domain, B)
        own = _dedupe(base + strategy_constraints(G, domain) + [d.constraint for d in dets])
        cons = _dedupe(carried + own) if opts.cumulative else own
        lp, key_vars = _build_lp(objective, cons, domain, opts.mode, supports)
        outcome = solve(lp, opts.rule)
        level = HierarchyLevel(n, B, g, domain, cons, dets, lp, outcome, opts.mode, key_vars, supports)
        if outcome.status != "optimal":
            raise VerificationFailed(f"level {n} LP is {outcome.status}")
        _post_verify(level)
        yield level
        carried = cons
        prev_domain = domain


def hierarchy(G: GameSpec, n_max: int, opts: HierarchyOptions | None = None) -> list[HierarchyLevel]:
    if n_max < 1:
        raise ValueError("level must be at least 1")
    return list(itertools.islice(iter_levels(G, opts), n_max))


def alpha(G: GameSpec, n: int, opts: HierarchyOptions | None = None) -> HierarchyLevel:
    return hierarchy(G, n, opts)[-1]


def _post_verify(level: HierarchyLevel):
    x = level.outcome.witness
    if not verify(level.lp, x, level.outcome.optimum):
        raise VerificationFailed(f"level {level.n} witness fails lp.verify")
    tau = level.tau(x)
    e = level.B_tilde.params.identity()
    if tau[e] != 1 or any(not 0 <= v <= 1 for v in tau.values()):
        raise VerificationFailed("witness trace out of range")
    if any(tau[w] != tau[inverse(w)] for w in level.B_tilde):
        raise VerificationFailed("witness trace not inverse-symmetric")
    for d in level.det:
        if d.constraint.lhs(lambda w: tau[w]) < 0:
            raise VerificationFailed(f"determinant constraint {d.constraint.name} violated")


def format_witness(level: HierarchyLevel) -> str:
    lines = [f"alpha_{level.n} = {level.alpha}"]
    if level.mode == "subset":
        pi = level.certificate
        for S in pi.supports:
            body = " ".join(str(w) for w in sorted(S, key=Word.sort_key))
            lines.append(f"{pi.weights[S]} : {{{body}}}")
    else:
        for w, v in level.certificate.items():
            lines.append(f"tau({w}) = {v}")
    return "\n".join(lines) + "\n"
