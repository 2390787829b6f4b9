"""``qlmm`` command line: optimize, run, search, tradeoff.

Exit codes: 0 ok, 2 infeasible, 3 config error, 4 margin violation at run
time, 5 no feasible candidate for the search.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .bitfloat import MarginError
from .lmm import integrate
from .optimizer import (
    BudgetExceeded,
    Infeasible,
    Objective,
    Solution,
    check_feasible,
    pick_best,
    solve_all,
)
from .oraclesim import NoFeasibleCandidate, OraclePredicate, durr_hoyer
from .scenarios import critical_damping
from .stepper import Scheme, run, write_csv

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG, EXIT_MARGIN, EXIT_NO_CANDIDATE = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")


def _load_scheme(path) -> Scheme:
    try:
        return Scheme.from_dict(json.loads(Path(path).read_text()))
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"{path}: cannot read scheme: {exc.strerror}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, f"{path}: malformed scheme file: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- optimize -----------------------------------------------------------------------------

def _objective_rows(results: dict) -> list[list]:
    rows = []
    for k, res in results.items():
        if isinstance(res, Solution):
            s = res.scheme
            rows.append([k, "feasible", res.qubits, res.depth, res.objective, repr(s.h), s.n_steps])
        else:
            status = "budget_exceeded" if isinstance(res, BudgetExceeded) else "infeasible"
            rows.append([k, status, "", "", "", "", ""])
    return rows


def cmd_optimize(args) -> int:
    cfg = cfgmod.load(args.config)
    problem = cfg.problem()
    results = solve_all(problem)
    out = _out_dir(args)
    with open(out / "objectives.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "status", "qubits", "depth", "objective", "h", "N"])
        w.writerows(_objective_rows(results))
    try:
        k, sol = pick_best(results)
    except Infeasible as exc:
        raise CliError(EXIT_INFEASIBLE, str(exc)) from exc
    _write_json(out / "scheme.json", sol.scheme.to_dict())
    report = check_feasible(sol.scheme, problem)
    _write_json(out / "report.json", report.to_dict())
    print(f"k* = {k}: qubits {sol.qubits}, depth {sol.depth}, h {sol.scheme.h!r}, N {sol.scheme.n_steps}")
    print(f"wrote {out / 'scheme.json'}, {out / 'report.json'}, {out / 'objectives.csv'}")
    return EXIT_OK


# --- run ------------------------------------------------------------------------------------

def _quantiles(err: np.ndarray) -> dict:
    q = np.quantile(err, [0.0, 0.25, 0.5, 0.75, 1.0])
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(x) for x in q)))


_WORKER_SCENARIOS: dict = {}


def _run_one(task):
    """Worker: rebuild the scenario from plain data so it pickles across processes."""
    config_path, scheme_dict, index = task
    if config_path not in _WORKER_SCENARIOS:
        _WORKER_SCENARIOS[config_path] = cfgmod.load(config_path).build_ivp()
    ivp, candidates = _WORKER_SCENARIOS[config_path]
    return run(Scheme.from_dict(scheme_dict), ivp, candidates[index])


def _run_all(args, scheme: Scheme, ivp, candidates) -> list:
    jobs = max(1, int(getattr(args, "jobs", 1) or 1))
    if jobs == 1:
        return [run(scheme, ivp, p) for p in candidates]
    tasks = [(str(args.config), scheme.to_dict(), i) for i in range(len(candidates))]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves candidate order, so the collector writes deterministically
        return list(pool.map(_run_one, tasks))


def _records(args, cfg, scheme, ivp, candidates):
    if cfg.epsilon is not None:
        report = check_feasible(scheme, cfg.problem(ivp, candidates))
        if not report.feasible:
            print(f"warning: scheme fails {', '.join(report.failed())} under this config",
                  file=sys.stderr)
    try:
        return _run_all(args, scheme, ivp, candidates)
    except MarginError as exc:
        step = getattr(exc, "step", None)
        raise CliError(EXIT_MARGIN, f"margin violated at step {step}: {exc}") from exc


def cmd_run(args) -> int:
    cfg = cfgmod.load(args.config)
    scheme = _load_scheme(args.scheme)
    ivp, candidates = cfg.build_ivp()
    records = _records(args, cfg, scheme, ivp, candidates)
    out = _out_dir(args)
    stats = []
    for i, (p, rec) in enumerate(zip(candidates, records)):
        write_csv(out / f"trajectory_{i:02d}.csv", [rec], [i])
        entry = {"candidate": i, "params": p, "ancillas_consumed": rec.ledger.consumed,
                 "modeled_depth": rec.modeled_depth}
        if ivp.exact is not None:
            exact = ivp.exact(rec.times, p)
            lmm = integrate(ivp, p, scheme.coeffs, scheme.h, scheme.n_steps)
            entry["qlmm"] = {f"dim{d}": _quantiles(np.abs(rec.decoded[:, d] - exact[:, d]))
                             for d in range(ivp.dimension)}
            entry["lmm"] = {f"dim{d}": _quantiles(np.abs(lmm[:, d] - exact[:, d]))
                            for d in range(ivp.dimension)}
        stats.append(entry)
    _write_json(out / "error_stats.json", {"scheme": scheme.to_dict(), "candidates": stats})
    print(f"wrote {len(records)} trajectories and error_stats.json to {out}")
    return EXIT_OK


# --- search ---------------------------------------------------------------------------------

def _analytic_optimum(cfg, candidates):
    if cfg.ivp == "spring_mass_damper":
        p = candidates[0]
        return "p_c", critical_damping(p["p_m"], p["p_k"])
    if cfg.ivp == "ballistic":
        return "theta_deg", 45.0
    return None, None


def cmd_search(args) -> int:
    cfg = cfgmod.load(args.config)
    scheme = _load_scheme(args.scheme)
    ivp, candidates = cfg.build_ivp()
    mode = args.mode or cfg.search_mode
    if mode == "all-steps":
        if not ivp.time_independent:
            raise CliError(EXIT_CONFIG, "all-steps mode needs a time-independent derivative")
        predicate = OraclePredicate.all_steps(cfg.search_dim, cfg.height_dim, cfg.maximize)
    else:
        predicate = OraclePredicate.final_time(cfg.search_dim, cfg.maximize)
    records = _records(args, cfg, scheme, ivp, candidates)
    seed = cfg.seed if args.seed is None else args.seed
    try:
        result = durr_hoyer(records, predicate, seed)
    except NoFeasibleCandidate as exc:
        raise CliError(EXIT_NO_CANDIDATE, str(exc)) from exc
    data = result.to_dict()
    data["winner_params"] = candidates[result.winner]
    name, analytic = _analytic_optimum(cfg, candidates)
    if analytic is not None:
        data["analytic_optimum"] = {name: analytic}
    text = json.dumps(data, indent=2)
    print(text)
    if name is not None:
        print(f"winner {name} = {candidates[result.winner][name]:g}, analytic optimum {analytic:.2f}",
              file=sys.stderr)
    if args.out:
        (_out_dir(args) / "search.json").write_text(text + "\n")
    return EXIT_OK


# --- tradeoff -------------------------------------------------------------------------------

def cmd_tradeoff(args) -> int:
    cfg = cfgmod.load(args.config)
    ivp, candidates = cfg.build_ivp()
    variants = [Objective("min_qubits"), Objective("min_depth")]
    variants += [Objective("min_depth_under_qubit_cap", c) for c in cfg.caps]
    rows = []
    for obj in variants:
        cfg.objective = obj
        problem = cfg.problem(ivp, candidates)
        try:
            k, sol = pick_best(solve_all(problem))
        except Infeasible:
            rows.append([str(obj), "infeasible", "", "", "", "", ""])
            continue
        rows.append([str(obj), "feasible", k, sol.qubits, sol.depth, repr(sol.scheme.h),
                     sol.scheme.n_steps])
    header = ["objective", "status", "k", "qubits", "depth", "h", "N"]
    if args.out:
        path = _out_dir(args) / "tradeoff.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        print(f"wrote {path}")
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return EXIT_OK


# --- entry point ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlmm",
        description="Synthesize, simulate and search with bit-exact multistep schemes.",
        epilog="Exit codes: 0 ok, 2 infeasible, 3 config error, 4 margin error, "
               "5 no feasible candidate.  Bundled configs: "
               f"{cfgmod.bundled('spring_mass')}, {cfgmod.bundled('ballistic')}.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scheme=False, out_default=None):
        p.add_argument("--config", required=True, help="scenario TOML file")
        if scheme:
            p.add_argument("--scheme", required=True, help="scheme JSON written by optimize")
        p.add_argument("--out", default=out_default,
                       help="output directory" + (f" (default {out_default})" if out_default else ""))
        p.add_argument("--jobs", type=int, default=1, help="worker processes for candidate runs (default 1)")

    p = sub.add_parser("optimize", help="pick the cheapest feasible scheme over k_range")
    common(p, out_default="out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("run", help="simulate a scheme over every candidate")
    common(p, scheme=True, out_default="out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("search", help="emulate the oracle-driven minimum search")
    common(p, scheme=True)
    p.add_argument("--mode", choices=cfgmod.SEARCH_MODES, default=None,
                   help="final-time or all-steps predicate (default from config)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default from config)")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("tradeoff", help="qubits vs depth over the objective variants")
    common(p)
    p.set_defaults(func=cmd_tradeoff)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
