"""Command-line entry point.

Exit codes: 0 success or accept, 2 reject, 3 budget exhausted, 4 failed
re-verification, 1 any other error. Files are written under $DETIRS_OUT
(default ./detirs_out).
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .algebra import format_polynomial, parse_matrix
from .errors import BudgetExceeded, VerificationFailed
from .games import GameSpec, classical_value_bruteforce, parse_game
from .group import GroupParams, ball, format_word
from .hierarchy import HierarchyOptions, alpha, format_witness
from .lnplus import DegreeCapError, g_poly
from .lp import format_lp, verify
from .permstrat import fk_logdet, format_action, parse_action, perm_value, perm_value_direct, search_beta

EXIT_OK, EXIT_ERROR, EXIT_REJECT, EXIT_BUDGET, EXIT_VERIFY = 0, 1, 2, 3, 4
OUT_ENV = "DETIRS_OUT"


def out_dir() -> Path:
    p = Path(os.environ.get(OUT_ENV, "detirs_out"))
    p.mkdir(parents=True, exist_ok=True)
    return p


def show(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator} ({float(q):.6f})"


def load_game(path: str) -> GameSpec:
    return parse_game(Path(path).read_text())


def action_params(text: str, questions: str | None = None) -> GroupParams:
    """Question labels and answer width read off the generator lines of an action file."""
    labels, width = [], 1
    for raw in text.splitlines():
        head = raw.split("#", 1)[0].partition(":")[0].strip()
        if "." in head:
            q, _, bit = head.rpartition(".")
            if q not in labels:
                labels.append(q)
            width = max(width, int(bit))
    if questions:
        labels = questions.split(",")
    return GroupParams(tuple(labels), width)


def hierarchy_options(args) -> HierarchyOptions:
    return HierarchyOptions(
        mode=args.mode, cumulative=not args.no_cumulative, det=not args.no_det,
        deg_cap=args.deg_cap, matrix_budget=args.matrix_budget,
        ball_radius_start=args.ball_radius_start, tight_N=args.tight_N)


# -- commands -----------------------------------------------------------------

def cmd_ball(args) -> int:
    params = GroupParams(tuple(args.questions.split(",")), args.bits)
    B = ball(params, args.radius)
    print(f"|ball({args.radius})| = {len(B)}")
    for w in B:
        print(format_word(w))
    return EXIT_OK


def cmd_alpha(args) -> int:
    G = load_game(args.game)
    level = alpha(G, args.n, hierarchy_options(args))
    if not verify(level.lp, level.outcome.witness, level.alpha):
        return EXIT_VERIFY
    print(f"alpha_{args.n} = {level.alpha.numerator}/{level.alpha.denominator}")
    print(f"decimal {float(level.alpha):.6f}; |B~| = {len(level.B_tilde)}; "
          f"{len(level.lp.variables)} variables, {len(level.lp.constraints)} constraints")
    out = out_dir()
    (out / f"alpha_{args.n}.lp").write_text(format_lp(level.lp))
    (out / f"alpha_{args.n}.witness").write_text(format_witness(level))
    with open(out / "alpha.log", "a") as fh:
        fh.write(f"alpha {args.n} {level.alpha}\n")
    return EXIT_OK


def cmd_beta(args) -> int:
    G = load_game(args.game)
    res = search_beta(G, args.max_degree, args.budget, args.seed)
    if res.action is None:
        print("no candidate evaluated")
        return EXIT_BUDGET
    if perm_value_direct(G, res.action) != res.value:
        return EXIT_VERIFY
    print(f"beta = {res.value.numerator}/{res.value.denominator}")
    print(f"decimal {float(res.value):.6f}; degree {res.action.degree}; {res.evaluations} evaluations")
    out = out_dir()
    (out / "beta.action").write_text(format_action(res.action))
    with open(out / "beta.log", "a") as fh:
        fh.write(f"beta {args.max_degree} {res.value}\n")
    return EXIT_OK


def cmd_value(args) -> int:
    G = load_game(args.game)
    a = parse_action(G.params, Path(args.action).read_text())
    v = perm_value(G, a)
    if v != perm_value_direct(G, a):
        return EXIT_VERIFY
    print(f"value = {show(v)}")
    if args.classical:
        print(f"classical = {show(classical_value_bruteforce(G))}")
    return EXIT_OK


def cmd_fkdet(args) -> int:
    text = Path(args.action).read_text()
    params = action_params(text, args.questions)
    a = parse_action(params, text)
    A = parse_matrix(params, Path(args.matrix).read_text())
    print(fk_logdet(a, A).render(), end="")
    return EXIT_OK


def cmd_lnpoly(args) -> int:
    try:
        g = g_poly(args.n, Fraction(args.N), args.deg_cap, strict=args.strict, grid_size=args.grid)
    except DegreeCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"minimal degree estimate {exc.needed}")
        return EXIT_ERROR
    f = g.factor
    print(f"g_{args.n}^{args.N}: degree {g.degree}, g(0) = {g(0)}")
    print(f"Bernstein degree {f.bernstein_degree} (estimate for full accuracy {f.required_degree}), "
          f"shift {float(f.shift):.6g}, node deviation {float(f.max_node_deviation):.6g} "
          f"target {f.accuracy_target} {'met' if f.accuracy_met else 'relaxed'}")
    report = g.certificate.lines()
    for line in report:
        print(line)
    out = out_dir()
    (out / f"g_{args.n}_{args.N}.poly").write_text(format_polynomial(g.poly) + "\n")
    (out / f"g_{args.n}_{args.N}.cert").write_text("\n".join(report) + "\n")
    return EXIT_OK


def cmd_validate(args) -> int:
    text = Path(args.path).read_text()
    if text.lstrip().startswith("degree"):
        params = action_params(text, args.questions)
        try:
            parse_action(params, text)
        except ValueError as exc:
            print(f"invalid action: {exc}")
            return EXIT_ERROR
        print("action ok")
        return EXIT_OK
    try:
        G = parse_game(text)
    except ValueError as exc:
        print(f"invalid game: {exc}")
        return EXIT_ERROR
    print(f"game ok: {len(G.params.questions)} questions, {G.params.m} answer bits, "
          f"{len(G.accept)} accepted tuples")
    return EXIT_OK


# -- dovetailing ------------------------------------------------------------

@dataclass
class DovetailConfig:
    game_text: str
    rounds: int = 2
    beta_budget: int = 500
    theta_accept: Fraction = Fraction(1, 2)
    theta_reject: Fraction = Fraction(1)
    seed: int = 0
    options: HierarchyOptions = field(default_factory=HierarchyOptions)

    def __post_init__(self):
        if not 0 < self.theta_accept <= self.theta_reject <= 1:
            raise ValueError("thresholds must satisfy 0 < accept <= reject <= 1")


def decide(alphas: dict, betas: dict, theta_accept, theta_reject, rounds: int) -> tuple[str, int | None]:
    """Verdict from per-round bounds; accept is checked before reject."""
    for r in range(1, rounds + 1):
        if r in betas and betas[r] >= theta_accept:
            return "accept", r
        if r in alphas and alphas[r] < theta_reject:
            return "reject", r
    return "budget-exhausted", None


def _alpha_task(game_text: str, n: int, options: HierarchyOptions):
    try:
        return str(alpha(parse_game(game_text), n, options).alpha)
    except BudgetExceeded as exc:
        return f"budget {exc}"


def _beta_task(game_text: str, degree: int, budget: int, seed: int):
    res = search_beta(parse_game(game_text), degree, budget, seed)
    return str(res.value), res.evaluations


def dovetail(cfg: DovetailConfig, workers: int = 1) -> tuple[str, list[str]]:
    """Round r computes alpha_r and beta over degrees <= 2r; stops at the first verdict."""
    lines = [f"config rounds={cfg.rounds} beta_budget={cfg.beta_budget} "
             f"theta_accept={cfg.theta_accept} theta_reject={cfg.theta_reject} seed={cfg.seed} "
             f"mode={cfg.options.mode}"]
    alphas: dict[int, Fraction] = {}
    betas: dict[int, Fraction] = {}
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for r in range(1, cfg.rounds + 1):
            jobs = [(_alpha_task, (cfg.game_text, r, cfg.options)),
                    (_beta_task, (cfg.game_text, 2 * r, cfg.beta_budget * r, cfg.seed))]
            if pool is None:
                a_res, b_res = [fn(*xs) for fn, xs in jobs]
            else:
                futs = [pool.submit(fn, *xs) for fn, xs in jobs]
                a_res, b_res = [f.result() for f in futs]
            if a_res.startswith("budget"):
                lines.append(f"round {r} alpha unavailable ({a_res})")
            else:
                alphas[r] = Fraction(a_res)
                lines.append(f"round {r} alpha {a_res}")
            betas[r] = Fraction(b_res[0])
            lines.append(f"round {r} beta {b_res[0]} degree<={2 * r} evaluations {b_res[1]}")
            verdict, at = decide(alphas, betas, cfg.theta_accept, cfg.theta_reject, r)
            if verdict != "budget-exhausted":
                lines.append(f"verdict {verdict} round {at}")
                return verdict, lines
    finally:
        if pool is not None:
            pool.shutdown()
    lines.append("verdict budget-exhausted")
    return "budget-exhausted", lines


def replay(transcript: str) -> str:
    """Re-derive the verdict line from a persisted transcript."""
    alphas, betas, params = {}, {}, {}
    rounds = 0
    for line in transcript.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "config":
            params = dict(p.split("=", 1) for p in parts[1:])
        elif parts[0] == "round":
            r = int(parts[1])
            rounds = max(rounds, r)
            if parts[2] == "alpha" and parts[3] != "unavailable":
                alphas[r] = Fraction(parts[3])
            elif parts[2] == "beta":
                betas[r] = Fraction(parts[3])
    verdict, at = decide(alphas, betas, Fraction(params["theta_accept"]),
                         Fraction(params["theta_reject"]), rounds)
    return f"verdict {verdict} round {at}" if at else f"verdict {verdict}"


VERDICT_EXIT = {"accept": EXIT_OK, "reject": EXIT_REJECT, "budget-exhausted": EXIT_BUDGET}


def cmd_dovetail(args) -> int:
    out = out_dir()
    if args.replay:
        line = replay(Path(args.replay).read_text())
        print(line)
        return VERDICT_EXIT[line.split()[1]]
    cfg = DovetailConfig(Path(args.game).read_text(), args.rounds, args.beta_budget,
                         Fraction(args.theta_accept), Fraction(args.theta_reject), args.seed,
                         hierarchy_options(args))
    verdict, lines = dovetail(cfg, args.workers)
    text = "\n".join(lines) + "\n"
    (out / "dovetail.transcript").write_text(text)
    print(text, end="")
    return VERDICT_EXIT[verdict]


# -- argument parsing -----------------------------------------------------------

def _hierarchy_flags(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=["subset", "trace"], default="subset")
    p.add_argument("--no-cumulative", action="store_true", help="drop constraints of lower levels")
    p.add_argument("--no-det", action="store_true", help="omit determinant constraints")
    p.add_argument("--deg-cap", type=int, default=4)
    p.add_argument("--matrix-budget", type=int, default=16)
    p.add_argument("--ball-radius-start", type=int, default=0)
    p.add_argument("--tight-N", action="store_true", help="use (n(n-1))^2 instead of n^6")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="detirs", description="Determinant-IRS bounds for synchronous games")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ball", help="list the word ball of a radius")
    p.add_argument("--questions", default="x,y")
    p.add_argument("--bits", type=int, default=1)
    p.add_argument("--radius", type=int, default=2)
    p.set_defaults(func=cmd_ball)

    p = sub.add_parser("alpha", help="LP upper bound alpha_n")
    p.add_argument("game")
    p.add_argument("-n", type=int, default=1)
    _hierarchy_flags(p)
    p.set_defaults(func=cmd_alpha)

    p = sub.add_parser("beta", help="permutation-strategy lower bound")
    p.add_argument("game")
    p.add_argument("--max-degree", type=int, default=2)
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_beta)

    p = sub.add_parser("value", help="value of a permutation strategy")
    p.add_argument("game")
    p.add_argument("action")
    p.add_argument("--classical", action="store_true")
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("fkdet", help="integer determinant check for one matrix")
    p.add_argument("action")
    p.add_argument("matrix")
    p.add_argument("--questions", help="comma-separated labels (default: from the action file)")
    p.set_defaults(func=cmd_fkdet)

    p = sub.add_parser("lnpoly", help="certified polynomial upper bound of ln_+")
    p.add_argument("-n", type=int, default=1)
    p.add_argument("-N", default="4")
    p.add_argument("--deg-cap", type=int, default=16)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--strict", action="store_true", help="fail unless full accuracy fits the cap")
    p.set_defaults(func=cmd_lnpoly)

    p = sub.add_parser("dovetail", help="interleave alpha and beta until a threshold is crossed")
    p.add_argument("game", nargs="?")
    p.add_argument("--rounds", type=int, default=2)
    p.add_argument("--beta-budget", type=int, default=500)
    p.add_argument("--theta-accept", default="1/2")
    p.add_argument("--theta-reject", default="1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--replay", help="re-derive the verdict of a saved transcript")
    _hierarchy_flags(p)
    p.set_defaults(func=cmd_dovetail)

    p = sub.add_parser("validate", help="check a game or action file")
    p.add_argument("path")
    p.add_argument("--questions")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "dovetail" and not args.game and not args.replay:
        print("error: dovetail needs a game file or --replay", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
