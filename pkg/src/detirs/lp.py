"""Exact rational linear programming.

Two-phase simplex on a sparse dictionary tableau over ``Fraction``. The
default pivoting rule is Bland's lowest-index rule, which cannot cycle.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .algebra import format_rational

LE, EQ, GE = "<=", "=", ">="


@dataclass
class Constraint:
    coeffs: dict[str, Fraction]
    rel: str
    rhs: Fraction
    name: str = ""

    def __post_init__(self):
        if self.rel not in (LE, EQ, GE):
            raise ValueError(f"bad relation {self.rel!r}")
        self.coeffs = {v: Fraction(c) for v, c in self.coeffs.items() if c}
        self.rhs = Fraction(self.rhs)

    def lhs(self, x: Mapping[str, Fraction]) -> Fraction:
        return sum((c * x[v] for v, c in self.coeffs.items()), Fraction(0))

    def holds(self, x: Mapping[str, Fraction]) -> bool:
        v = self.lhs(x)
        if self.rel == LE:
            return v <= self.rhs
        if self.rel == GE:
            return v >= self.rhs
        return v == self.rhs


@dataclass
class LinearProgram:
    """maximize objective . x subject to constraints and per-variable bounds.

    Variables without an explicit bound are nonnegative; ``None`` marks an
    infinite end.
    """

    variables: list[str]
    objective: dict[str, Fraction]
    constraints: list[Constraint] = field(default_factory=list)
    bounds: dict[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate variable labels")
        known = set(self.variables)
        self.objective = {v: Fraction(c) for v, c in self.objective.items() if c}
        for v in self.objective:
            if v not in known:
                raise ValueError(f"objective uses unknown variable {v}")
        for con in self.constraints:
            for v in con.coeffs:
                if v not in known:
                    raise ValueError(f"constraint {con.name} uses unknown variable {v}")

    def bound(self, v: str) -> tuple:
        lo, hi = self.bounds.get(v, (0, None))
        return (None if lo is None else Fraction(lo), None if hi is None else Fraction(hi))

    def objective_value(self, x: Mapping[str, Fraction]) -> Fraction:
        return sum((c * x[v] for v, c in self.objective.items()), Fraction(0))

    def add(self, coeffs, rel, rhs, name=""):
        self.constraints.append(Constraint(dict(coeffs), rel, rhs, name))


@dataclass
class LpOutcome:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    optimum: Fraction | None = None
    witness: dict[str, Fraction] | None = None
    iterations: int = 0


class _Tableau:
    def __init__(self, rows, rhs, basis, ncols):
        self.rows = rows
        self.rhs = rhs
        self.basis = basis
        self.ncols = ncols
        self.d: dict[int, Fraction] = {}
        self.value = Fraction(0)
        self.iterations = 0

    def set_costs(self, cost: dict[int, Fraction], constant=Fraction(0)):
        d = dict(cost)
        value = constant
        for r, b in enumerate(self.basis):
            cb = cost.get(b, 0)
            if cb:
                value += cb * self.rhs[r]
                for j, a in self.rows[r].items():
                    d[j] = d.get(j, 0) - cb * a
        self.d = {j: c for j, c in d.items() if c}
        self.value = value

    def pivot(self, r: int, c: int):
        row = self.rows[r]
        piv = row[c]
        if piv != 1:
            inv = 1 / piv
            for j in row:
                row[j] *= inv
            self.rhs[r] *= inv
        rr = self.rhs[r]
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            f = other.get(c)
            if f:
                for j, a in row.items():
                    v = other.get(j, 0) - f * a
                    if v:
                        other[j] = v
                    else:
                        other.pop(j, None)
                self.rhs[i] -= f * rr
        f = self.d.get(c)
        if f:
            for j, a in row.items():
                v = self.d.get(j, 0) - f * a
                if v:
                    self.d[j] = v
                else:
                    self.d.pop(j, None)
            self.value += f * rr
        self.basis[r] = c
        self.iterations += 1

    def run(self, allowed, rule: str, max_iter: int) -> str:
        stall = 0
        while True:
            if self.iterations >= max_iter:
                return "iteration_limit"
            cands = [j for j, v in self.d.items() if v > 0 and j in allowed]
            if not cands:
                return "optimal"
            if rule == "bland" or stall > 0:
                c = min(cands)
            else:
                c = max(cands, key=lambda j: (self.d[j], -j))
            best = None
            for i, row in enumerate(self.rows):
                a = row.get(c)
                if a is not None and a > 0:
                    ratio = self.rhs[i] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return "unbounded"
            before = self.value
            self.pivot(best[1], c)
            # Dantzig pricing falls back to Bland while pivots are degenerate.
            stall = stall + 1 if self.value == before else 0


def solve(lp: LinearProgram, rule: str = "bland", max_iter: int = 1_000_000) -> LpOutcome:
    """Exact optimum of ``lp`` (maximisation) with a basic optimal witness."""
    if rule not in ("bland", "dantzig"):
        raise ValueError("rule must be 'bland' or 'dantzig'")
    # Substitute x = offset + sum(sign * column) with all columns nonnegative.
    subst: dict[str, tuple[Fraction, list[tuple[int, int]]]] = {}
    ncols = 0
    extra_rows: list[tuple[dict[int, Fraction], str, Fraction]] = []
    for v in lp.variables:
        lo, hi = lp.bound(v)
        if lo is not None and hi is not None and lo > hi:
            return LpOutcome("infeasible")
        if lo is not None:
            subst[v] = (lo, [(ncols, 1)])
            if hi is not None:
                extra_rows.append(({ncols: Fraction(1)}, LE, hi - lo))
            ncols += 1
        elif hi is not None:
            subst[v] = (hi, [(ncols, -1)])
            ncols += 1
        else:
            subst[v] = (Fraction(0), [(ncols, 1), (ncols + 1, -1)])
            ncols += 2

    raw_rows = list(extra_rows)
    for con in lp.constraints:
        row: dict[int, Fraction] = {}
        rhs = con.rhs
        for v, a in con.coeffs.items():
            off, cols = subst[v]
            rhs -= a * off
            for j, s in cols:
                row[j] = row.get(j, 0) + s * a
        raw_rows.append(({j: a for j, a in row.items() if a}, con.rel, rhs))

    rows, rhs, basis, artificials = [], [], [], set()
    for row, rel, b in raw_rows:
        if b < 0:
            row = {j: -a for j, a in row.items()}
            b = -b
            rel = {LE: GE, GE: LE, EQ: EQ}[rel]
        row = dict(row)
        if rel == LE:
            row[ncols] = Fraction(1)
            basis.append(ncols)
            ncols += 1
        else:
            if rel == GE:
                row[ncols] = Fraction(-1)
                ncols += 1
            row[ncols] = Fraction(1)
            basis.append(ncols)
            artificials.add(ncols)
            ncols += 1
        rows.append(row)
        rhs.append(b)

    tab = _Tableau(rows, rhs, basis, ncols)
    everything = set(range(ncols))
    if artificials:
        tab.set_costs({j: Fraction(-1) for j in artificials})
        status = tab.run(everything, rule, max_iter)
        if status == "iteration_limit":
            return LpOutcome(status, iterations=tab.iterations)
        if tab.value < 0:
            return LpOutcome("infeasible", iterations=tab.iterations)
        # Drive zero-level artificials out of the basis; drop redundant rows.
        r = 0
        while r < len(tab.rows):
            if tab.basis[r] in artificials:
                col = next((j for j in sorted(tab.rows[r]) if j not in artificials), None)
                if col is None:
                    del tab.rows[r], tab.rhs[r], tab.basis[r]
                    continue
                tab.pivot(r, col)
            r += 1
        for row in tab.rows:
            for j in artificials:
                row.pop(j, None)

    cost: dict[int, Fraction] = {}
    constant = Fraction(0)
    for v, c in lp.objective.items():
        off, cols = subst[v]
        constant += c * off
        for j, s in cols:
            cost[j] = cost.get(j, 0) + s * c
    tab.set_costs({j: c for j, c in cost.items() if c}, constant)
    status = tab.run(everything - artificials, rule, max_iter)
    if status != "optimal":
        return LpOutcome(status, iterations=tab.iterations)

    colval = [Fraction(0)] * ncols
    for r, b in enumerate(tab.basis):
        colval[b] = tab.rhs[r]
    witness = {}
    for v in lp.variables:
        off, cols = subst[v]
        witness[v] = off + sum((s * colval[j] for j, s in cols), Fraction(0))
    return LpOutcome("optimal", lp.objective_value(witness), witness, tab.iterations)


def verify(lp: LinearProgram, witness: Mapping[str, Fraction], optimum=None) -> bool:
    """Exact re-check of bounds, constraints and (optionally) the objective value."""
    try:
        for v in lp.variables:
            x = witness[v]
            lo, hi = lp.bound(v)
            if (lo is not None and x < lo) or (hi is not None and x > hi):
                return False
        if not all(con.holds(witness) for con in lp.constraints):
            return False
    except KeyError:
        return False
    return optimum is None or lp.objective_value(witness) == optimum


def _solve_square(rows: list[list[Fraction]], rhs: list[Fraction]):
    n = len(rows)
    a = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col]), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def vertex_enumeration_optimum(lp: LinearProgram, screen_tol: float = 1e-7) -> LpOutcome:
    """Brute-force oracle: best feasible vertex over all n-subsets of tight rows.

    Only meaningful for LPs whose feasible region is bounded (a polytope), which
    is how the randomized tests build them. Every subset is solved in floating
    point in one batch to discard singular or clearly infeasible ones; the
    survivors are re-solved and re-checked exactly.
    """
    import numpy as np

    names = lp.variables
    n = len(names)
    planes = []
    for con in lp.constraints:
        planes.append(([con.coeffs.get(v, Fraction(0)) for v in names], con.rhs))
    for i, v in enumerate(names):
        lo, hi = lp.bound(v)
        unit = [Fraction(int(k == i)) for k in range(n)]
        if lo is not None:
            planes.append((unit, lo))
        if hi is not None:
            planes.append((unit, hi))
    combos = list(itertools.combinations(range(len(planes)), n))
    if not combos:
        return LpOutcome("infeasible")
    A = np.array([[float(c) for c in row] for row, _ in planes])
    b = np.array([float(r) for _, r in planes])
    idx = np.array(combos)
    mats, rhs = A[idx], b[idx]
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-9
    best = None
    if ok.any():
        sols = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
        rels = [con.rel for con in lp.constraints]
        lhs = sols @ A[: len(lp.constraints)].T if lp.constraints else np.zeros((len(sols), 0))
        scale = 1 + np.abs(b[: len(lp.constraints)])
        feas = np.ones(len(sols), dtype=bool)
        for k, rel in enumerate(rels):
            gap = (lhs[:, k] - b[k]) / scale[k]
            if rel == LE:
                feas &= gap <= screen_tol
            elif rel == GE:
                feas &= gap >= -screen_tol
            else:
                feas &= np.abs(gap) <= screen_tol
        for i, v in enumerate(names):
            lo, hi = lp.bound(v)
            if lo is not None:
                feas &= sols[:, i] >= float(lo) - screen_tol * (1 + abs(float(lo)))
            if hi is not None:
                feas &= sols[:, i] <= float(hi) + screen_tol * (1 + abs(float(hi)))
        for combo in idx[ok][feas]:
            sol = _solve_square([planes[k][0] for k in combo], [planes[k][1] for k in combo])
            if sol is None:
                continue
            x = dict(zip(names, sol))
            if verify(lp, x):
                val = lp.objective_value(x)
                if best is None or val > best[0]:
                    best = (val, x)
    if best is None:
        return LpOutcome("infeasible")
    return LpOutcome("optimal", best[0], best[1])


def dual_program(lp: LinearProgram) -> LinearProgram:
    """Mechanical dual of max c.x, rows (<=, =, >=), x >= 0, posed as a maximisation.

    The returned program maximises -b.y, so its optimum is minus the dual minimum.
    """
    for v in lp.variables:
        if lp.bound(v) != (0, None):
            raise ValueError("dual_program expects plain nonnegative variables")
    ys = [f"y{i}" for i in range(len(lp.constraints))]
    bounds = {}
    for y, con in zip(ys, lp.constraints):
        bounds[y] = {LE: (0, None), GE: (None, 0), EQ: (None, None)}[con.rel]
    dual = LinearProgram(ys, {y: -con.rhs for y, con in zip(ys, lp.constraints)}, bounds=bounds)
    for v in lp.variables:
        coeffs = {y: con.coeffs.get(v, 0) for y, con in zip(ys, lp.constraints)}
        dual.add(coeffs, GE, lp.objective.get(v, 0), name=f"col_{v}")
    return dual


def _fmt_bound(b):
    return "inf" if b is None else format_rational(b)


def _fmt_linear(coeffs: Mapping[str, Fraction], order) -> str:
    terms = [f"{format_rational(coeffs[v])} {v}" for v in order if v in coeffs]
    return " + ".join(terms) if terms else "0"


def format_lp(lp: LinearProgram) -> str:
    """Text dump: one line per variable bound and per constraint, rationals as p/q."""
    out = [f"vars: {' '.join(lp.variables)}",
           f"maximize: {_fmt_linear(lp.objective, lp.variables)}"]
    for v in lp.variables:
        lo, hi = lp.bound(v)
        out.append(f"bound {v}: {'-inf' if lo is None else format_rational(lo)} {_fmt_bound(hi)}")
    for i, con in enumerate(lp.constraints):
        name = con.name or f"c{i}"
        out.append(f"{name}: {_fmt_linear(con.coeffs, lp.variables)} {con.rel} {format_rational(con.rhs)}")
    return "\n".join(out) + "\n"


def _parse_linear(text: str) -> dict[str, Fraction]:
    text = text.strip()
    if text == "0":
        return {}
    out = {}
    for term in text.split(" + "):
        c, v = term.split()
        out[v] = out.get(v, 0) + Fraction(c)
    return out


def parse_lp(text: str) -> LinearProgram:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    variables = lines[0].partition(":")[2].split()
    objective = _parse_linear(lines[1].partition(":")[2])
    bounds, constraints = {}, []
    for ln in lines[2:]:
        head, _, body = ln.partition(": ")
        if head.startswith("bound "):
            lo, hi = body.split()
            bounds[head[6:]] = (None if lo == "-inf" else Fraction(lo),
                                None if hi == "inf" else Fraction(hi))
            continue
        for rel in (LE, GE, EQ):
            left, sep, right = body.rpartition(f" {rel} ")
            if sep:
                constraints.append(Constraint(_parse_linear(left), rel, Fraction(right), head))
                break
        else:
            raise ValueError(f"bad constraint line {ln!r}")
    return LinearProgram(variables, objective, constraints, bounds)
