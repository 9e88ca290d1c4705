"""Stochastic oracles for the analytic pipeline.

Two levels of randomness are supported.  ``sinr_level`` draws unit-mean
exponential fades and Bernoulli interferer indicators and evaluates the
SINR directly, so it is fully independent of the closed-form outage
expression.  ``transition_level`` walks the region chain drawing each
state transition from the analytically computed probabilities, which is
the cheaper cross-check of the chain machinery itself.

Trials are split into fixed-size shards with independent substreams
derived from (seed, shard index) through ``numpy``'s ``SeedSequence``
spawning, so results are reproducible bit for bit and shard merges are
order-independent integer sums.  ``BRN_THREADS`` may parallelize shards.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .channel import ChannelParams, LineTopology, LinkSet
from .interference import CascadeScenario, fixed_point, interference_view
from .markov import _structures, analyze, _check_interference, _EpsEvaluator

_SHARD = 1 << 16


@dataclass(frozen=True)
class SimEstimate:
    """A binomial estimate plus, for frame simulations, transmit counts."""

    epsilon_hat: float
    stderr: float
    trials: int
    transmit_freq: np.ndarray | None = None  # (n_nodes, frame_slots)

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon_hat <= 1.0:
            raise ValueError("estimate must lie in [0, 1]")


def _shards(trials: int, n_nodes: int = 2):
    size = _SHARD if n_nodes <= 8 else _SHARD // 8
    out = []
    done = 0
    idx = 0
    while done < trials:
        m = min(size, trials - done)
        out.append((idx, m))
        done += m
        idx += 1
    return out


def _rng(seed: int, shard: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(shard,)))


def _run_shards(shards, worker):
    threads = int(os.environ.get("BRN_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, shards))
    return [worker(s) for s in shards]


def _estimate(count: int, trials: int, freq=None) -> SimEstimate:
    eps = count / trials
    return SimEstimate(
        epsilon_hat=eps,
        stderr=math.sqrt(eps * (1.0 - eps) / trials),
        trials=trials,
        transmit_freq=freq,
    )


def simulate_outage(links: LinkSet, params: ChannelParams, trials: int, seed: int) -> SimEstimate:
    """Direct SINR-level estimate of one link's outage probability."""
    if trials < 1:
        raise ValueError("need at least one trial")
    gains = np.asarray(links.barraging_gains)
    igains = np.asarray([o for o, _ in links.interferers])
    ip = np.asarray([p for _, p in links.interferers])
    inv_gamma = 1.0 / params.gamma

    def worker(shard):
        idx, m = shard
        rng = _rng(seed, idx)
        g = rng.exponential(size=(m, gains.size))
        signal = g @ gains
        noise = inv_gamma
        if igains.size:
            gi = rng.exponential(size=(m, igains.size))
            active = rng.random(size=(m, igains.size)) < ip
            noise = inv_gamma + (gi * active) @ igains
        sinr = signal / noise
        return int((sinr <= params.beta).sum())

    counts = _run_shards(_shards(trials), worker)
    return _estimate(sum(counts), trials)


def _sinr_standalone(topology, params, trials, seed):
    pos = np.asarray(topology.positions)
    n = len(pos)
    frame_slots = n - 1
    dist = np.abs(pos[:, None] - pos[None, :])
    off = ~np.eye(n, dtype=bool)
    omega = np.where(off, np.maximum(dist, 1e-300), 1.0) ** (-params.alpha)
    omega[~off] = 0.0

    def worker(shard):
        idx, m = shard
        rng = _rng(seed, idx)
        states = np.zeros((m, n), dtype=np.int8)
        states[:, 0] = 1
        freq = np.zeros((n, frame_slots))
        can_tx = np.ones(n, dtype=bool)
        can_tx[-1] = False  # destination buffers never relay
        for t in range(frame_slots):
            tx = (states == 1) & can_tx
            freq[:, t] = tx.sum(axis=0)
            g = rng.exponential(size=(m, n, n))
            signal = np.einsum("fi,fij,ij->fj", tx.astype(float), g, omega)
            decode = (states == 0) & (signal * params.gamma > params.beta)
            states[tx] = 2
            states[decode] = 1
        return int((states[:, -1] == 0).sum()), freq

    results = _run_shards(_shards(trials, n), worker)
    count = sum(c for c, _ in results)
    freq = sum(f for _, f in results) / trials
    return count, freq


def _sinr_cascade(scenario, trials, seed):
    """Three synchronized copies with periodic interference geometry.

    Each copy sees the other two at translations of +/- twice the zone
    length, so all three are statistically typical; the first copy is
    measured.  Transmissions of the neighbors are simulated, not drawn
    from an analytic schedule.
    """
    topo = scenario.topology
    params = scenario.params
    pos = np.asarray(topo.positions)
    n = len(pos)
    d = topo.length
    frame_slots = n - 1
    copies = 3
    ntot = copies * n
    omega = np.zeros((ntot, ntot))
    same = np.zeros((ntot, ntot), dtype=bool)
    for ct in range(copies):
        for cr in range(copies):
            delta = (ct - cr) % copies
            offset = 0.0 if delta == 0 else (2.0 * d if delta == 1 else -2.0 * d)
            dist = np.abs((pos[:, None] + offset) - pos[None, :])
            block = np.where(dist > 0.0, np.maximum(dist, 1e-300), 1.0) ** (-params.alpha)
            block[dist == 0.0] = 0.0
            omega[ct * n : (ct + 1) * n, cr * n : (cr + 1) * n] = block
            if ct == cr:
                same[ct * n : (ct + 1) * n, cr * n : (cr + 1) * n] = True
    omega_sig = np.where(same, omega, 0.0)
    omega_int = np.where(same, 0.0, omega)
    # destination buffers never relay, so they do not interfere either
    can_tx = np.ones(ntot, dtype=bool)
    for c in range(copies):
        can_tx[c * n + n - 1] = False
    inv_gamma = 1.0 / params.gamma

    def worker(shard):
        idx, m = shard
        rng = _rng(seed, idx)
        states = np.zeros((m, ntot), dtype=np.int8)
        states[:, 0 :: n] = 0
        for c in range(copies):
            states[:, c * n] = 1
        freq = np.zeros((n, frame_slots))
        for t in range(frame_slots):
            tx = (states == 1) & can_tx
            freq[:, t] = tx[:, :n].sum(axis=0)
            g = rng.exponential(size=(m, ntot, ntot))
            txf = tx.astype(float)
            signal = np.einsum("fi,fij,ij->fj", txf, g, omega_sig)
            interf = np.einsum("fi,fij,ij->fj", txf, g, omega_int)
            decode = (states == 0) & (signal / (inv_gamma + interf) > params.beta)
            states[states == 1] = 2
            states[decode] = 1
        return int((states[:, n - 1] == 0).sum()), freq

    results = _run_shards(_shards(trials, ntot), worker)
    count = sum(c for c, _ in results)
    freq = sum(f for _, f in results) / trials
    return count, freq


def _transition_walk(topology, params, ext, trials, seed, halt_on_success=False):
    """Walk the uncollapsed chain drawing every transition at random."""
    structures = _structures(topology.n_relays)
    chain = structures.halted if halt_on_success else structures.full
    frame_slots = topology.n_relays + 1
    ext = _check_interference(ext, frame_slots, topology.n_relays + 2)
    ev = _EpsEvaluator(structures.pairs, topology, params)
    cum_rows = []
    cols = []
    for ext_t in ext:
        probs = chain.transition_probs(ev.slot(ext_t))
        P = sp.csr_matrix(
            (probs, (chain.t_src, chain.t_dst)),
            shape=(chain.n_states, chain.n_states),
        )
        cum = []
        col = []
        for s in range(chain.n_states):
            row = P.data[P.indptr[s] : P.indptr[s + 1]]
            idxs = P.indices[P.indptr[s] : P.indptr[s + 1]]
            cum.append(np.cumsum(row))
            col.append(idxs)
        cum_rows.append(cum)
        cols.append(col)
    transmitting = chain.state_mat == 1
    transmitting[:, chain.dest_col] = False
    dest_zero = chain.state_mat[:, chain.dest_col] == 0

    def worker(shard):
        idx, m = shard
        rng = _rng(seed, idx)
        cur = np.zeros(m, dtype=np.int64)
        freq = np.zeros((chain.n_nodes, frame_slots))
        for t in range(frame_slots):
            freq[:, t] += transmitting[cur].sum(axis=0)
            u = rng.random(m)
            nxt = np.empty_like(cur)
            for s in np.unique(cur):
                sel = cur == s
                pick = np.searchsorted(cum_rows[t][s], u[sel], side="right")
                pick = np.minimum(pick, len(cols[t][s]) - 1)
                nxt[sel] = cols[t][s][pick]
            cur = nxt
        return int(dest_zero[cur].sum()), freq

    results = _run_shards(_shards(trials), worker)
    count = sum(c for c, _ in results)
    freq = sum(f for _, f in results) / trials
    return count, freq


def simulate_cbr(
    scenario,
    params: ChannelParams | None = None,
    trials: int = 10**6,
    seed: int = 0,
    mode: str = "sinr_level",
    xi: float = 1e-6,
    max_iters: int = 50,
) -> SimEstimate:
    """Monte Carlo estimate of the region outage probability.

    ``scenario`` is either a bare LineTopology (standalone region, no
    co-channel interference; ``params`` required) or a CascadeScenario.
    In cascade ``transition_level`` mode the neighbors follow the analytic
    fixed-point schedule (hybrid oracle); in ``sinr_level`` mode their
    transmissions are simulated outright.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if mode not in ("sinr_level", "transition_level"):
        raise ValueError(f"unknown mode {mode!r}")
    if isinstance(scenario, CascadeScenario):
        topo = scenario.topology
        sc_params = scenario.params
        if mode == "sinr_level":
            count, freq = _sinr_cascade(scenario, trials, seed)
        else:
            report = fixed_point(scenario, xi=xi, max_iters=max_iters)
            ext = interference_view(scenario, report.schedule)
            count, freq = _transition_walk(topo, sc_params, ext, trials, seed)
    else:
        topo = scenario
        if params is None:
            raise ValueError("standalone simulation needs channel parameters")
        if mode == "sinr_level":
            count, freq = _sinr_standalone(topo, params, trials, seed)
        else:
            count, freq = _transition_walk(topo, params, None, trials, seed)
    return _estimate(count, trials, freq)
