"""Scenario-driven command line front end.

Subcommands reproduce the standard study artifacts as CSV files: an SNR
outage sweep with optional Monte Carlo columns, the interference-iteration
trace, the transport-capacity optimization table, and the invariant
validation suite.  Scenarios are YAML documents with a strict schema;
unknown keys are rejected.

Exit codes: 0 success, 1 validation failure, 2 usage / scenario error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np
import yaml

from .channel import ChannelParams, LineTopology, db_to_linear
from .interference import CascadeScenario, fixed_point
from .markov import analyze
from .montecarlo import simulate_cbr
from .optimizer import optimize
from .validate import run_all

_SCHEMA = {
    "topology": {"n_relays", "length", "positions"},
    "channel": {"gamma_db", "alpha", "beta_db", "rate", "min_distance"},
    "cci": {"enabled", "offset_factors"},
    "fixed_point": {"xi", "max_iters"},
    "simulation": {"trials", "seed", "mode"},
    "sweep": {"gamma_db_start", "gamma_db_stop", "gamma_db_step", "beta_db_list", "with_mc"},
    "iterate": {"gamma_db_list", "alpha_list"},
    "optimization": {
        "gamma_db_list", "cci_list", "r_bounds", "n_bounds", "d_bounds",
        "seed", "restarts", "min_distance", "r_tol", "d_tol",
    },
    "output": {"dir"},
    "model": {"halt_on_success"},
}


class ScenarioError(ValueError):
    pass


def load_scenario(path: Path) -> dict:
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a mapping")
    for section, content in raw.items():
        if section not in _SCHEMA:
            raise ScenarioError(f"unknown scenario section {section!r}")
        if content is None:
            continue
        if not isinstance(content, dict):
            raise ScenarioError(f"section {section!r} must be a mapping")
        for key in content:
            if key not in _SCHEMA[section]:
                raise ScenarioError(f"unknown key {section}.{key}")
    return raw


def _topology(cfg: dict) -> LineTopology:
    topo = cfg.get("topology", {}) or {}
    n = int(topo.get("n_relays", 2))
    length = float(topo.get("length", 1.0))
    positions = topo.get("positions", "equally_spaced")
    if positions == "equally_spaced":
        return LineTopology.equally_spaced(n, length)
    pos = tuple(float(x) for x in positions)
    if len(pos) != n + 2:
        raise ScenarioError("explicit positions must list source, relays, destination")
    return LineTopology(pos)


def _params(cfg: dict, gamma_db=None, alpha=None, beta_db=None) -> ChannelParams:
    ch = cfg.get("channel", {}) or {}
    if gamma_db is None:
        gamma_db = float(ch.get("gamma_db", 10.0))
    if alpha is None:
        alpha = float(ch.get("alpha", 3.5))
    if beta_db is None:
        if "beta_db" in ch:
            beta = db_to_linear(float(ch["beta_db"]))
        elif "rate" in ch:
            beta = 2.0 ** float(ch["rate"]) - 1.0
        else:
            beta = db_to_linear(6.0)
    else:
        beta = db_to_linear(beta_db)
    return ChannelParams(
        gamma=db_to_linear(gamma_db),
        alpha=alpha,
        beta=beta,
        min_distance=float(ch.get("min_distance", 1.0)),
    )


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _cci_scenario(cfg, topology, params) -> CascadeScenario:
    cci = cfg.get("cci", {}) or {}
    factors = cci.get("offset_factors")
    offsets = None
    if factors is not None:
        offsets = tuple(float(f) * topology.length for f in factors)
    return CascadeScenario(topology, params, offsets=offsets)


def cmd_outage_sweep(cfg: dict, args) -> int:
    sweep = cfg.get("sweep", {}) or {}
    start = float(sweep.get("gamma_db_start", 0.0))
    stop = float(sweep.get("gamma_db_stop", 20.0))
    step = float(sweep.get("gamma_db_step", 2.0))
    betas = [float(b) for b in sweep.get("beta_db_list", [0.0, 3.0, 6.0])]
    with_mc = bool(sweep.get("with_mc", False))
    sim = cfg.get("simulation", {}) or {}
    trials = int(args.trials or sim.get("trials", 10**6))
    seed = int(args.seed if args.seed is not None else sim.get("seed", 0))
    mode = str(sim.get("mode", "sinr_level"))
    cci_on = bool((cfg.get("cci", {}) or {}).get("enabled", False))
    halt = bool((cfg.get("model", {}) or {}).get("halt_on_success", False))
    topology = _topology(cfg)

    gammas = []
    g = start
    while g <= stop + 1e-9:
        gammas.append(round(g, 9))
        g += step
    rows = []
    for beta_db in betas:
        for gamma_db in gammas:
            params = _params(cfg, gamma_db=gamma_db, beta_db=beta_db)
            if cci_on:
                report = fixed_point(
                    _cci_scenario(cfg, topology, params), halt_on_success=halt
                )
                eps = report.epsilon_cbr
            else:
                eps, _, _ = analyze(
                    topology, params, halt_on_success=halt, want_schedule=False
                )
            row = [gamma_db, beta_db, eps]
            if with_mc:
                scenario = (
                    _cci_scenario(cfg, topology, params) if cci_on else topology
                )
                est = simulate_cbr(
                    scenario, params=params, trials=trials, seed=seed, mode=mode
                )
                row += [est.epsilon_hat, est.stderr, trials, seed]
            else:
                row += ["", "", "", ""]
            rows.append(row)
    header = [
        "gamma_db", "beta_db", "epsilon_analytic",
        "epsilon_mc", "mc_stderr", "trials", "seed",
    ]
    _write_csv(Path(args.out) / "outage_sweep.csv", header, rows)
    if not args.quiet:
        print(f"wrote {len(rows)} sweep points")
    return 0


def cmd_iterate(cfg: dict, args) -> int:
    it = cfg.get("iterate", {}) or {}
    gammas = [float(g) for g in it.get("gamma_db_list", [0.0, 10.0])]
    alphas = [float(a) for a in it.get("alpha_list", [3.0, 3.5, 4.0])]
    fp = cfg.get("fixed_point", {}) or {}
    xi = float(fp.get("xi", 1e-6))
    max_iters = int(fp.get("max_iters", 50))
    halt = bool((cfg.get("model", {}) or {}).get("halt_on_success", False))
    topology = _topology(cfg)
    rows = []
    all_converged = True
    for gamma_db in gammas:
        for alpha in alphas:
            params = _params(cfg, gamma_db=gamma_db, alpha=alpha)
            scenario = _cci_scenario(cfg, topology, params)
            report = fixed_point(scenario, xi=xi, max_iters=max_iters, halt_on_success=halt)
            all_converged &= report.converged
            for i, eps in enumerate(report.trace):
                rows.append([
                    gamma_db, alpha, i, eps,
                    int(report.converged), report.iterations_used,
                ])
    header = ["gamma_db", "alpha", "iteration", "epsilon_cbr", "converged", "iterations_used"]
    _write_csv(Path(args.out) / "iterations.csv", header, rows)
    if not args.quiet:
        print(f"wrote {len(rows)} iteration rows")
    return 0 if all_converged else 1


def cmd_optimize(cfg: dict, args) -> int:
    opt = cfg.get("optimization", {}) or {}
    gammas = [float(g) for g in opt.get("gamma_db_list", [0.0, 5.0, 10.0])]
    ccis = [bool(c) for c in opt.get("cci_list", [False, True])]
    seed = int(args.seed if args.seed is not None else opt.get("seed", 0))
    restarts = int(opt.get("restarts", 3))
    ch = cfg.get("channel", {}) or {}
    alpha = float(ch.get("alpha", 3.5))
    kwargs = {}
    if "r_bounds" in opt:
        kwargs["r_bounds"] = tuple(float(x) for x in opt["r_bounds"])
    if "n_bounds" in opt:
        kwargs["n_bounds"] = tuple(int(x) for x in opt["n_bounds"])
    if "d_bounds" in opt:
        kwargs["d_bounds"] = tuple(float(x) for x in opt["d_bounds"])
    if "min_distance" in opt:
        kwargs["min_distance"] = float(opt["min_distance"])
    if "r_tol" in opt:
        kwargs["r_tol"] = float(opt["r_tol"])
    if "d_tol" in opt:
        kwargs["d_tol"] = float(opt["d_tol"])
    rows = []
    trace_rows = []
    for gamma_db in gammas:
        for cci in ccis:
            params = ChannelParams(
                gamma=db_to_linear(gamma_db), alpha=alpha, beta=1.0, min_distance=1.0
            )
            result = optimize(params, cci=cci, seed=seed, restarts=restarts, **kwargs)
            best = result.best
            rows.append([
                gamma_db, int(cci), best.rate, best.n_relays, best.length,
                ";".join(f"{x:.6g}" for x in best.relay_positions),
                result.upsilon, result.epsilon_cbr, result.evaluations,
            ])
            for count, upsilon in result.trace:
                trace_rows.append([gamma_db, int(cci), count, upsilon])
            if not args.quiet:
                print(
                    f"gamma={gamma_db:g} dB cci={int(cci)}: "
                    f"N={best.n_relays} d={best.length:.3g} R={best.rate:.4g} "
                    f"upsilon={result.upsilon:.4g}"
                )
    header = [
        "gamma_db", "cci", "rate", "n_relays", "length",
        "relay_positions", "upsilon", "epsilon_cbr", "evaluations",
    ]
    _write_csv(Path(args.out) / "optimization.csv", header, rows)
    _write_csv(
        Path(args.out) / "optimization_trace.csv",
        ["gamma_db", "cci", "evaluation", "best_upsilon"],
        trace_rows,
    )
    return 0


def cmd_validate(cfg: dict, args) -> int:
    ok = run_all(verbose=not args.quiet)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brn",
        description="Barrage relay network outage analysis and optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in [
        ("outage-sweep", cmd_outage_sweep),
        ("iterate", cmd_iterate),
        ("optimize", cmd_optimize),
        ("validate", cmd_validate),
    ]:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=(name != "validate"), type=Path)
        p.add_argument("--out", default="out")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--quiet", action="store_true")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = load_scenario(args.scenario) if args.scenario else {}
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(cfg, args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
