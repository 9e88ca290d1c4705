"""Transport-capacity maximization over relay count, placement, rate, size.

The objective for a typical region of length d with N relays is

    upsilon = d * (1 - epsilon_cbr) / (2 * (N + 1)) * log2(1 + beta)

with the code rate tied to the threshold by R = log2(1 + beta) and the
factor 2 accounting for half-duplex buffers (alternating active and silent
zones).  The search combines golden-section line searches on the
continuous parameters (R, d), exhaustion of the integer relay-count
lattice, and a stochastic mutation search over relay placements, with a
per-count reference placement that the best mutant replaces.

Reported optimal region sizes go well below one reference distance, so the
far-field guard is relaxed here to a configurable minimum (default 0.1)
and the power law is evaluated as-is below unit distance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelParams, FarFieldError, LineTopology
from .interference import CascadeScenario, fixed_point
from .markov import analyze

MIN_DISTANCE_DEFAULT = 0.1
R_BOUNDS_DEFAULT = (0.5, 8.0)
N_BOUNDS_DEFAULT = (0, 8)
D_BOUNDS_DEFAULT = (0.1, 6.0)
N_DELTA_START = 2
N_DELTA_CAP_DEFAULT = 8
# Relay positions are clamped inside this fraction of the region.
_EDGE_FRACTION = 0.05


@dataclass(frozen=True)
class CandidateConfig:
    """One point of the search space."""

    relay_positions: tuple[float, ...]
    rate: float
    n_relays: int
    length: float

    def __post_init__(self) -> None:
        pos = tuple(float(x) for x in self.relay_positions)
        object.__setattr__(self, "relay_positions", pos)
        if len(pos) != self.n_relays:
            raise ValueError("placement size must match the relay count")
        if any(not 0.0 < x < self.length for x in pos):
            raise ValueError("relays must lie strictly inside the region")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("relay positions must be strictly increasing")
        if self.rate <= 0.0:
            raise ValueError("rate must be positive")
        if self.length <= 0.0:
            raise ValueError("region length must be positive")

    @property
    def beta(self) -> float:
        return 2.0 ** self.rate - 1.0


@dataclass(frozen=True)
class OptResult:
    best: CandidateConfig
    upsilon: float
    epsilon_cbr: float
    evaluations: int
    trace: tuple[tuple[int, float], ...]
    boundary_hits: tuple[str, ...]


def transport_capacity(epsilon_cbr: float, n_relays: int, length: float, beta: float) -> float:
    """Distance-weighted throughput of a typical region."""
    return length * (1.0 - epsilon_cbr) / (2.0 * (n_relays + 1)) * math.log2(1.0 + beta)


def _evaluate_detail(
    config: CandidateConfig,
    params: ChannelParams,
    cci: bool,
    xi: float = 1e-6,
    max_iters: int = 50,
    min_distance: float | None = None,
):
    """(upsilon, epsilon_cbr) for one candidate; -inf flags infeasibility."""
    beta = config.beta
    mind = params.min_distance if min_distance is None else min_distance
    run_params = replace(params, beta=beta, min_distance=mind)
    try:
        topo = LineTopology((0.0, *config.relay_positions, config.length))
        if cci:
            scenario = CascadeScenario(topo, run_params)
            report = fixed_point(scenario, xi=xi, max_iters=max_iters)
            eps = report.epsilon_cbr
        else:
            eps, _, _ = analyze(topo, run_params, want_schedule=False)
    except (FarFieldError, ValueError):
        return float("-inf"), 1.0
    return transport_capacity(eps, config.n_relays, config.length, beta), eps


def evaluate(
    config: CandidateConfig,
    params: ChannelParams,
    cci: bool,
    xi: float = 1e-6,
    max_iters: int = 50,
    min_distance: float | None = None,
) -> float:
    """Transport capacity achieved by one candidate configuration.

    The threshold is recovered from the rate; with interference on, the
    region is embedded in the standard two-neighbor cascade and the fixed
    point is run to convergence before the objective is formed.
    """
    upsilon, _ = _evaluate_detail(config, params, cci, xi, max_iters, min_distance)
    return upsilon


def initial_placement(n_relays: int, length: float) -> tuple[float, ...]:
    """Uniform interior placement; spacing d/(N+1) satisfies d/(3N)."""
    if n_relays == 0:
        return ()
    step = length / (n_relays + 1)
    return tuple(step * (i + 1) for i in range(n_relays))


def mutate_placement(
    x_ref,
    length: float,
    n_relays: int,
    n_delta: int,
    rng: np.random.Generator,
) -> tuple[float, ...]:
    """Randomly nudge a reference placement.

    Each relay independently stays put with probability one half, else it
    moves left or right (equally likely) by d / (n_delta * N).  Moves are
    clamped inside the region and overlaps resolved by minimal shifts that
    preserve the ordering.
    """
    if n_relays == 0:
        return ()
    delta = length / (n_delta * n_relays)
    lo = _EDGE_FRACTION * length
    hi = (1.0 - _EDGE_FRACTION) * length
    out = []
    for x in x_ref:
        if rng.random() < 0.5:
            out.append(x)
            continue
        step = delta if rng.random() < 0.5 else -delta
        out.append(min(max(x + step, lo), hi))
    out.sort()
    gap = 1e-9 * length
    for i in range(1, len(out)):
        if out[i] - out[i - 1] < gap:
            out[i] = out[i - 1] + gap
    if out[-1] > hi:
        for i in range(len(out) - 1, -1, -1):
            bound = hi - (len(out) - 1 - i) * gap
            if out[i] > bound:
                out[i] = bound
    return tuple(out)


class _Search:
    """Shared bookkeeping across restarts: cache, counters, trace."""

    def __init__(self, params, cci, xi, max_iters, min_distance):
        self.params = params
        self.cci = cci
        self.xi = xi
        self.max_iters = max_iters
        self.min_distance = min_distance
        self.cache: dict = {}
        self.evaluations = 0
        self.trace: list[tuple[int, float]] = []
        self.best_key = None
        self.best_record = None
        self.best_upsilon = float("-inf")
        self.best_eps = 1.0
        # per relay count: (upsilon, eps, (rate, n, d, placement))
        self.by_n: dict[int, tuple] = {}

    def score(self, rate: float, n: int, d: float, placement: tuple[float, ...]) -> float:
        key = (rate, n, d, placement)
        hit = self.cache.get(key)
        if hit is None:
            config = CandidateConfig(
                relay_positions=placement, rate=rate, n_relays=n, length=d
            )
            hit = _evaluate_detail(
                config, self.params, self.cci, self.xi, self.max_iters, self.min_distance
            )
            self.cache[key] = hit
            self.evaluations += 1
        upsilon, eps = hit
        # deterministic tie-breaking: smaller N, then d, then positions
        cand = (-upsilon, n, d, placement, rate)
        if self.best_key is None or cand < self.best_key:
            self.best_key = cand
            self.best_upsilon = upsilon
            self.best_eps = eps
            self.best_record = (rate, n, d, placement)
            self.trace.append((self.evaluations, upsilon))
        held = self.by_n.get(n)
        if held is None or (-upsilon, d, placement, rate) < (
            -held[0], held[2][2], held[2][3], held[2][0]
        ):
            self.by_n[n] = (upsilon, eps, (rate, n, d, placement))
        return upsilon


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class _SubSearch:
    """Alternating line searches over (R, d) at a fixed relay count.

    Each cycle runs a full-range golden-section search over R at the
    current d, then over d at the new R.  Relay placements are carried as
    fractions of the region length, so the incumbent placement survives
    probes at different d; after each pair of line searches a batch of
    placement mutants is tried at the incumbent (R, d) and the winner
    becomes the new reference.
    """

    def __init__(self, search, n, r_bounds, d_bounds, rng):
        self.search = search
        self.n = n
        self.r_bounds = r_bounds
        self.d_bounds = d_bounds
        self.r_cur = 0.5 * (r_bounds[0] + r_bounds[1])
        self.d_cur = 0.5 * (d_bounds[0] + d_bounds[1])
        self.r_win = r_bounds[1] - r_bounds[0]
        self.d_win = d_bounds[1] - d_bounds[0]
        self.rng = rng
        self.fracs = tuple((i + 1) / (n + 1) for i in range(n))
        self.n_delta = N_DELTA_START
        self.best = float("-inf")
        self.done = False
        self.frozen = False
        self.cycles = 0

    def jitter_start(self):
        r_lo, r_hi = self.r_bounds
        d_lo, d_hi = self.d_bounds
        self.r_cur = r_lo + (0.1 + 0.8 * self.rng.random()) * (r_hi - r_lo)
        self.d_cur = d_lo + (0.1 + 0.8 * self.rng.random()) * (d_hi - d_lo)

    def warm_start(self, record):
        """Restart near a previous per-count optimum with narrowed windows.

        A jitter of a few percent of the range keeps restarts from merely
        replaying the first pass, while the quarter-range windows make the
        re-localization several times cheaper than a cold start.
        """
        rate, _, d, placement = record
        r_lo, r_hi = self.r_bounds
        d_lo, d_hi = self.d_bounds
        r = rate + (self.rng.random() - 0.5) * 0.1 * (r_hi - r_lo)
        dd = d + (self.rng.random() - 0.5) * 0.1 * (d_hi - d_lo)
        self.r_cur = min(max(r, r_lo), r_hi)
        self.d_cur = min(max(dd, d_lo), d_hi)
        if self.n > 0 and placement:
            self.fracs = tuple(x / d for x in placement)
        self.r_win = 0.25 * (r_hi - r_lo)
        self.d_win = 0.25 * (d_hi - d_lo)

    def _point(self, rate: float, d: float) -> float:
        return self.search.score(rate, self.n, d, tuple(f * d for f in self.fracs))

    def polish_placement(self, trials: int) -> float:
        """Mutation trials at the incumbent (R, d); keeps the best mutant."""
        n = self.n
        if n == 0:
            return float("-inf")
        d = self.d_cur
        ref = tuple(f * d for f in self.fracs)
        best = self.search.score(self.r_cur, n, d, ref)
        best_x = ref
        for _ in range(trials):
            x = mutate_placement(ref, d, n, self.n_delta, self.rng)
            u = self.search.score(self.r_cur, n, d, x)
            if u > best:
                best, best_x = u, x
        self.fracs = tuple(x / d for x in best_x)
        return best

    def _line(self, func, lo, hi, tol) -> tuple[float, float]:
        """Golden-section maximization of ``func`` on [lo, hi]."""
        a, b = lo, hi
        x1 = b - _INV_PHI * (b - a)
        x2 = a + _INV_PHI * (b - a)
        f1, f2 = func(x1), func(x2)
        while b - a > tol:
            if f1 >= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - _INV_PHI * (b - a)
                f1 = func(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + _INV_PHI * (b - a)
                f2 = func(x2)
        return (x1, f1) if f1 >= f2 else (x2, f2)

    def cycle(self, r_tol: float, d_tol: float, n_delta_cap: int) -> float:
        """One pass over both continuous coordinates; returns the best seen.

        The search bracket around the current point halves every cycle
        (down to a floor of a few tolerances) so early cycles scan the full
        range while later cycles polish locally; the per-cycle section
        tolerance tracks the bracket so every cycle costs roughly the same
        number of probes.
        """
        r_lo = max(self.r_bounds[0], self.r_cur - self.r_win)
        r_hi = min(self.r_bounds[1], self.r_cur + self.r_win)
        self.r_cur, best_r = self._line(
            lambda r: self._point(r, self.d_cur),
            r_lo, r_hi, max(r_tol, (r_hi - r_lo) / 24.0),
        )
        d_lo = max(self.d_bounds[0], self.d_cur - self.d_win)
        d_hi = min(self.d_bounds[1], self.d_cur + self.d_win)
        self.d_cur, best_d = self._line(
            lambda d: self._point(self.r_cur, d),
            d_lo, d_hi, max(d_tol, (d_hi - d_lo) / 24.0),
        )
        best_m = self.polish_placement(trials=4)
        self.r_win = max(0.5 * self.r_win, 4.0 * r_tol)
        self.d_win = max(0.5 * self.d_win, 4.0 * d_tol)
        best = max(best_r, best_d, best_m)
        improved = best > self.best + 1e-5 * max(1.0, abs(best))
        self.best = max(self.best, best)
        if not improved and self.n_delta < n_delta_cap:
            self.n_delta += 1
        self.cycles += 1
        at_floor = self.r_win <= 4.0 * r_tol and self.d_win <= 4.0 * d_tol
        if at_floor and self.n_delta >= n_delta_cap and not improved:
            self.done = True
        return self.best


def optimize(
    params: ChannelParams,
    cci: bool,
    r_bounds: tuple[float, float] = R_BOUNDS_DEFAULT,
    n_bounds: tuple[int, int] = N_BOUNDS_DEFAULT,
    d_bounds: tuple[float, float] = D_BOUNDS_DEFAULT,
    seed: int = 0,
    restarts: int = 3,
    r_tol: float = 1e-2,
    d_tol: float = 1e-2,
    n_delta_cap: int = N_DELTA_CAP_DEFAULT,
    xi: float = 1e-6,
    max_iters: int = 50,
    min_distance: float = MIN_DISTANCE_DEFAULT,
    max_cycles: int = 40,
    prune_margin: float = 0.2,
    prune_after: int = 4,
    n_margin: float = 0.005,
) -> OptResult:
    """Maximize transport capacity over (placements, R, N, d).

    Every relay count in ``n_bounds`` runs its own alternating line search
    over (R, d) with the mutation search over placements; counts that fall
    more than
    ``prune_margin`` behind the incumbent after ``prune_after`` cycles are
    frozen.  Restarts reseed the mutation stream and jitter the starting
    midpoints; the caches are shared, so repeat visits are free.

    ``n_margin`` breaks the near-degeneracy of the capacity surface in the
    relay count: the reported optimum is the smallest N whose best sits
    within that relative margin of the overall best, since extra relays
    that buy a fraction of a percent of capacity are not worth deploying.
    """
    if r_bounds[0] <= 0.0 or r_bounds[1] <= r_bounds[0]:
        raise ValueError("bad rate bounds")
    if d_bounds[0] <= 0.0 or d_bounds[1] <= d_bounds[0]:
        raise ValueError("bad length bounds")
    if n_bounds[0] < 0 or n_bounds[1] < n_bounds[0]:
        raise ValueError("bad relay-count bounds")
    search = _Search(params, cci, xi, max_iters, min_distance)
    lattice = list(range(n_bounds[0], n_bounds[1] + 1))
    best_by_n: dict[int, float] = {}
    for restart in range(restarts):
        subs = []
        for n in lattice:
            if restart > 0:
                # counts that already proved uncompetitive stay retired
                seen = best_by_n.get(n, float("-inf"))
                floor = max(best_by_n.values()) * (1.0 - prune_margin)
                if math.isfinite(seen) and seen < floor:
                    continue
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(restart, n))
            )
            sub = _SubSearch(search, n, r_bounds, d_bounds, rng)
            if restart > 0:
                held = search.by_n.get(n)
                if held is not None and math.isfinite(held[0]):
                    sub.warm_start(held[2])
                else:
                    sub.jitter_start()
            subs.append(sub)
        active = list(subs)
        while active:
            overall = max(s.best for s in subs)
            for sub in list(active):
                sub.cycle(r_tol, d_tol, n_delta_cap)
                if sub.done or sub.cycles >= max_cycles:
                    active.remove(sub)
                    continue
                if (
                    sub.cycles >= prune_after
                    and math.isfinite(overall)
                    and sub.best < overall * (1.0 - prune_margin)
                ):
                    sub.frozen = True
                    active.remove(sub)
        for sub in subs:
            prev = best_by_n.get(sub.n, float("-inf"))
            best_by_n[sub.n] = max(prev, sub.best)
        if restart == 0 and not any(n > 0 for n in lattice):
            break  # no randomness without relays; restarts are identical

    if search.best_key is None or not math.isfinite(search.best_upsilon):
        raise ValueError("no feasible candidate inside the given bounds")
    # the capacity surface is nearly flat in N around the optimum; prefer
    # the smallest relay count whose best sits within the parsimony margin
    u_max = search.best_upsilon
    u_best, eps_best = u_max, search.best_eps
    rate_best, n_best, d_best, x_best = search.best_record
    for n in sorted(search.by_n):
        u_n, eps_n, rec_n = search.by_n[n]
        if math.isfinite(u_n) and u_n >= u_max * (1.0 - n_margin):
            u_best, eps_best = u_n, eps_n
            rate_best, n_best, d_best, x_best = rec_n
            break
    best = CandidateConfig(
        relay_positions=x_best, rate=rate_best, n_relays=n_best, length=d_best
    )
    hits = []
    if abs(rate_best - r_bounds[0]) <= r_tol or abs(rate_best - r_bounds[1]) <= r_tol:
        hits.append("rate")
    if abs(d_best - d_bounds[0]) <= d_tol or abs(d_best - d_bounds[1]) <= d_tol:
        hits.append("length")
    if n_best in (n_bounds[0], n_bounds[1]) and n_bounds[0] != n_bounds[1]:
        if n_best != 0:
            hits.append("relay_count")
    return OptResult(
        best=best,
        upsilon=u_best,
        epsilon_cbr=eps_best,
        evaluations=search.evaluations,
        trace=tuple(search.trace),
        boundary_hits=tuple(hits),
    )
