"""Path-loss geometry and closed-form Rayleigh outage for cooperative links.

All positions and distances are expressed in multiples of the reference
distance, so a unit separation carries unit path gain.  The outage
expression covers an arbitrary set of barraging (cooperating) transmitters
whose powers combine at the receiver, plus co-channel interferers that are
each active with some per-slot probability.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

# Two barraging gains closer than this (relative) tolerance are treated as a
# tie; the partial-fraction form is singular at exact equality.
TIE_RTOL = 1e-9
# Deterministic relative nudge applied to the later-indexed gain of a tie.
TIE_NUDGE = 1e-6
# Clamping beyond this deviation from [0, 1] is logged.
CLAMP_TOL = 1e-9


class FarFieldError(ValueError):
    """A transmitter-receiver separation fell below the modeled minimum."""


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0.0:
        raise ValueError("dB conversion requires a positive value")
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class ChannelParams:
    """Link-budget constants shared by every transmission in a scenario.

    gamma: SNR of an unfaded unit-distance transmission (linear).
    alpha: path-loss exponent, must exceed 2.
    beta: SINR decoding threshold (linear).
    d0: reference distance; positions are multiples of it.
    min_distance: smallest separation the power law is evaluated at, in
        units of d0.  1.0 is the strict far-field guard; optimization
        studies relax it (see the optimizer module).
    """

    gamma: float
    alpha: float
    beta: float
    d0: float = 1.0
    min_distance: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not (math.isfinite(self.alpha) and self.alpha > 2.0):
            raise ValueError(f"alpha must exceed 2, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta >= 0.0):
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not (math.isfinite(self.d0) and self.d0 > 0.0):
            raise ValueError(f"d0 must be positive, got {self.d0}")
        if not (math.isfinite(self.min_distance) and self.min_distance > 0.0):
            raise ValueError("min_distance must be positive")

    @classmethod
    def from_db(cls, gamma_db: float, alpha: float, beta_db: float, **kwargs) -> "ChannelParams":
        return cls(gamma=db_to_linear(gamma_db), alpha=alpha, beta=db_to_linear(beta_db), **kwargs)


@dataclass(frozen=True)
class LineTopology:
    """Ordered 1-D node positions: source, interior relays, destination."""

    positions: tuple[float, ...]

    def __post_init__(self) -> None:
        pos = tuple(float(x) for x in self.positions)
        object.__setattr__(self, "positions", pos)
        if len(pos) < 2:
            raise ValueError("a topology needs at least a source and a destination")
        if any(not math.isfinite(x) for x in pos):
            raise ValueError("positions must be finite")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("positions must be strictly increasing")

    @classmethod
    def equally_spaced(cls, n_relays: int, length: float, start: float = 0.0) -> "LineTopology":
        if n_relays < 0:
            raise ValueError("relay count must be nonnegative")
        step = length / (n_relays + 1)
        return cls(tuple(start + i * step for i in range(n_relays + 2)))

    @property
    def n_relays(self) -> int:
        return len(self.positions) - 2

    @property
    def length(self) -> float:
        return self.positions[-1] - self.positions[0]

    @property
    def source(self) -> float:
        return self.positions[0]

    @property
    def destination(self) -> float:
        return self.positions[-1]

    def translated(self, offset: float) -> tuple[float, ...]:
        return tuple(x + offset for x in self.positions)


@dataclass(frozen=True)
class LinkSet:
    """One receiver's view of a slot: cooperating gains plus interferers.

    barraging_gains: relative path gains of the nodes transmitting the
        wanted packet.
    interferers: (gain, transmit probability) pairs for every other node
        that may transmit; silent nodes (p = 0) may simply be omitted.
    """

    barraging_gains: tuple[float, ...]
    interferers: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        gains = tuple(float(g) for g in self.barraging_gains)
        inter = tuple((float(o), float(p)) for o, p in self.interferers)
        object.__setattr__(self, "barraging_gains", gains)
        object.__setattr__(self, "interferers", inter)
        if not gains:
            raise ValueError("barraging set must not be empty")
        if any(not math.isfinite(g) or g <= 0.0 for g in gains):
            raise ValueError("barraging gains must be finite and strictly positive")
        for omega, p in inter:
            if not math.isfinite(omega) or omega < 0.0:
                raise ValueError("interferer gains must be finite and nonnegative")
            if not math.isfinite(p) or not 0.0 <= p <= 1.0:
                raise ValueError("interferer transmit probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class OutageValue:
    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("outage probability must lie in [0, 1]")


def path_loss(dist: float, alpha: float, min_distance: float = 1.0) -> float:
    """Power-law attenuation dist**(-alpha) for dist >= min_distance."""
    if not math.isfinite(dist) or dist < min_distance:
        raise FarFieldError(f"distance {dist} below modeled minimum {min_distance}")
    return dist ** (-alpha)


def relative_gains(
    receiver_pos: float,
    transmitter_positions,
    alpha: float,
    min_distance: float = 1.0,
) -> list[float]:
    """Relative path gains from each transmitter to the receiver, order-preserving."""
    gains = []
    for x in transmitter_positions:
        dist = abs(x - receiver_pos)
        if dist == 0.0:
            raise FarFieldError("transmitter co-located with receiver")
        gains.append(path_loss(dist, alpha, min_distance))
    return gains


def _separate_ties(gains: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Nudge later-indexed barraging gains off exact (or near) ties.

    Symmetric line topologies produce exact ties, where the partial-fraction
    coefficients blow up.  The perturbation is deterministic so results are
    reproducible; its effect is far below Monte Carlo validation noise.
    """
    g = gains.copy()
    kmax = g.shape[1]
    for m in range(1, kmax):
        for _ in range(kmax + 1):
            gm = g[:, m : m + 1]
            earlier = g[:, :m]
            tie = np.abs(gm - earlier) < TIE_RTOL * np.maximum(gm, earlier)
            tie &= mask[:, m : m + 1] & mask[:, :m]
            rows = tie.any(axis=1)
            if not rows.any():
                break
            g[rows, m] *= 1.0 + TIE_NUDGE
    return g


def outage_batch(
    gains: np.ndarray,
    gains_mask: np.ndarray,
    int_gains: np.ndarray,
    int_p: np.ndarray,
    beta: float,
    gamma: float,
) -> np.ndarray:
    """Closed-form conditional outage for many link sets at once.

    gains: (n, kmax) barraging path gains, padded; gains_mask marks real
        entries.  int_gains / int_p: (n, imax) interferer gains and transmit
        probabilities, padded with zero gain (a zero-gain interferer
        contributes a unit factor).
    """
    n = gains.shape[0]
    if n == 0:
        return np.zeros(0)
    if beta == 0.0:
        # Any positive fade meets a zero threshold; the partial-fraction
        # coefficients sum to one identically.
        return np.zeros(n)

    g = np.where(gains_mask, gains, 1.0)
    g = _separate_ties(g, gains_mask)

    expterm = np.exp(-beta / (g * gamma))

    gk = g[:, :, None]
    gs = g[:, None, :]
    kmax = g.shape[1]
    off_diag = ~np.eye(kmax, dtype=bool)
    valid = gains_mask[:, :, None] & gains_mask[:, None, :] & off_diag
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(valid, gk / (gk - gs), 1.0)
    prod_pairs = ratio.prod(axis=2)

    if int_gains.size:
        oi = int_gains[:, None, :]
        pi = int_p[:, None, :]
        factor = (gk + beta * (1.0 - pi) * oi) / (gk + beta * oi)
        prod_int = factor.prod(axis=2)
    else:
        prod_int = np.ones_like(g)

    total = np.where(gains_mask, expterm * prod_pairs * prod_int, 0.0).sum(axis=1)
    eps = 1.0 - total
    deviation = np.maximum(-eps, eps - 1.0).max(initial=0.0)
    if deviation > CLAMP_TOL:
        log.warning("outage clamped by %.3e beyond [0, 1]", deviation)
    return np.clip(eps, 0.0, 1.0)


def pack_link_sets(link_sets) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Pad a sequence of (gains, interferers) into the batch-call layout."""
    kmax = max(len(g) for g, _ in link_sets)
    imax = max((len(i) for _, i in link_sets), default=0)
    n = len(link_sets)
    gains = np.zeros((n, kmax))
    mask = np.zeros((n, kmax), dtype=bool)
    igains = np.zeros((n, max(imax, 0)))
    ip = np.zeros((n, max(imax, 0)))
    for r, (g, inter) in enumerate(link_sets):
        gains[r, : len(g)] = g
        mask[r, : len(g)] = True
        for c, (omega, p) in enumerate(inter):
            igains[r, c] = omega
            ip[r, c] = p
    return gains, mask, igains, ip


def outage_probability(links: LinkSet, params: ChannelParams) -> OutageValue:
    """Conditional outage of one receiver under Rayleigh fading.

    Reduces to 1 - exp(-beta / (gain * gamma)) for a single barraging
    transmitter and no interferers.
    """
    gains, mask, igains, ip = pack_link_sets(
        [(links.barraging_gains, links.interferers)]
    )
    eps = outage_batch(gains, mask, igains, ip, params.beta, params.gamma)
    return OutageValue(float(eps[0]))
