"""Self-contained invariant checks runnable from the command line.

Each check returns (name, passed, detail).  The set mirrors the structural
guarantees the analysis relies on: stochastic rows, normalized absorbing
probabilities, vanishing interferers, zero-threshold outage, the
single-transmitter reduction, mutation statistics, and dominance of the
optimizer over a coarse exhaustive grid.
"""
from __future__ import annotations

import math

import numpy as np

from .channel import ChannelParams, LineTopology, LinkSet, outage_probability
from .markov import absorption, build_transition_matrix, enumerate_states
from .optimizer import (
    CandidateConfig,
    evaluate,
    initial_placement,
    mutate_placement,
    optimize,
)


def check_row_stochastic() -> tuple[str, bool, str]:
    worst = 0.0
    for n, gamma_db, beta_db in [(0, 5.0, 3.0), (1, 0.0, 6.0), (2, 10.0, 6.0), (3, 10.0, 0.0)]:
        params = ChannelParams.from_db(gamma_db, 3.5, beta_db)
        topo = LineTopology.equally_spaced(n, n + 1.0)
        space = enumerate_states(n)
        for P in build_transition_matrix(topo, params, space=space):
            worst = max(worst, float(np.abs(P.sum(axis=1) - 1.0).max()))
    return ("row_stochasticity", worst <= 1e-9, f"max row deviation {worst:.3e}")


def check_absorption_rows() -> tuple[str, bool, str]:
    worst = 0.0
    for n in range(4):
        params = ChannelParams.from_db(8.0, 3.5, 6.0)
        topo = LineTopology.equally_spaced(n, n + 1.0)
        space = enumerate_states(n)
        res = absorption(build_transition_matrix(topo, params, space=space)[0], space)
        worst = max(worst, float(np.abs(res.B.sum(axis=1) - 1.0).max()))
    return ("absorption_row_sums", worst <= 1e-9, f"max deviation {worst:.3e}")


def check_interferer_vanishing() -> tuple[str, bool, str]:
    params = ChannelParams.from_db(10.0, 3.5, 6.0)
    base = LinkSet(barraging_gains=(1.0, 0.2))
    with_null = LinkSet(
        barraging_gains=(1.0, 0.2), interferers=((0.4, 0.0), (0.0, 0.7))
    )
    a = outage_probability(base, params).epsilon
    b = outage_probability(with_null, params).epsilon
    return ("interferer_vanishing", a == b, f"|diff| = {abs(a - b):.3e}")


def check_zero_threshold() -> tuple[str, bool, str]:
    params = ChannelParams(gamma=2.0, alpha=3.5, beta=0.0)
    links = LinkSet(barraging_gains=(1.0, 0.3), interferers=((0.2, 0.5),))
    eps = outage_probability(links, params).epsilon
    return ("zero_threshold_outage", eps == 0.0, f"epsilon = {eps}")


def check_single_transmitter() -> tuple[str, bool, str]:
    worst = 0.0
    for gamma, beta, omega in [(1.0, 1.0, 1.0), (10.0, 4.0, 0.09), (0.5, 2.0, 3.0)]:
        params = ChannelParams(gamma=gamma, alpha=3.5, beta=beta)
        eps = outage_probability(LinkSet(barraging_gains=(omega,)), params).epsilon
        ref = 1.0 - math.exp(-beta / (omega * gamma))
        worst = max(worst, abs(eps - ref))
    return ("single_transmitter_reduction", worst <= 1e-14, f"max |diff| {worst:.3e}")


def check_mutation_statistics() -> tuple[str, bool, str]:
    rng = np.random.default_rng(np.random.SeedSequence(12345))
    n, d = 3, 1.5
    ref = initial_placement(n, d)
    trials = 10_000
    moved = np.zeros(n)
    for _ in range(trials):
        out = mutate_placement(ref, d, n, 4, rng)
        moved += [a != b for a, b in zip(out, ref)]
    freq = moved / trials
    sigma = math.sqrt(0.25 / trials)
    worst = float(np.abs(freq - 0.5).max())
    return ("mutation_keep_frequency", worst <= 3.0 * sigma, f"max |freq-0.5| {worst:.4f}")


def check_grid_dominance() -> tuple[str, bool, str]:
    params = ChannelParams.from_db(10.0, 3.5, 6.0)
    grid_best = float("-inf")
    for n in (0, 1, 2):
        for d in np.linspace(0.15, 2.0, 16):
            placement = initial_placement(n, float(d))
            for rate in np.linspace(2.0, 7.0, 16):
                config = CandidateConfig(
                    relay_positions=placement,
                    rate=float(rate),
                    n_relays=n,
                    length=float(d),
                )
                grid_best = max(
                    grid_best, evaluate(config, params, cci=False, min_distance=0.1)
                )
    result = optimize(params, cci=False, seed=3, restarts=1)
    ok = result.upsilon >= grid_best * 0.99
    return (
        "grid_oracle_dominance",
        ok,
        f"optimizer {result.upsilon:.4f} vs grid {grid_best:.4f}",
    )


ALL_CHECKS = [
    check_row_stochastic,
    check_absorption_rows,
    check_interferer_vanishing,
    check_zero_threshold,
    check_single_transmitter,
    check_mutation_statistics,
    check_grid_dominance,
]


def run_all(verbose: bool = True) -> bool:
    ok = True
    for check in ALL_CHECKS:
        name, passed, detail = check()
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return ok
