"""Coupling between a region's outage and its neighbors' transmissions.

In an infinite cascade of identically configured regions, alternating
active and silent zones, every active zone behaves like one *typical*
region.  Its transition probabilities depend on the transmit probabilities
of the neighboring active zones, which are translated copies of itself, so
the two quantities are resolved jointly by a fixed-point iteration seeded
with the interference-free solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, FarFieldError, LineTopology
from .markov import TransmitSchedule, analyze, _structures

XI_DEFAULT = 1e-6
MAX_ITERS_DEFAULT = 50

# FixedPointReport carries dense collapsed matrices only below this size.
_REPORT_MATRIX_LIMIT = 1500


@dataclass(frozen=True)
class CascadeScenario:
    """A typical region plus the translated copies that interfere with it.

    Offsets default to one active zone on each side (+/- twice the zone
    length); farther zones are normally neglected, but extra offsets can be
    supplied for sensitivity studies.  Every offset must be a nonzero even
    multiple of the zone length, since active zones alternate with silent
    ones.
    """

    topology: LineTopology
    params: ChannelParams
    offsets: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        d = self.topology.length
        if d <= 0.0:
            raise ValueError("zone length must be positive")
        if self.offsets is not None:
            offs = tuple(float(o) for o in self.offsets)
            object.__setattr__(self, "offsets", offs)
            for o in offs:
                ratio = o / (2.0 * d)
                if abs(ratio - round(ratio)) > 1e-9 or round(ratio) == 0:
                    raise ValueError(
                        "offsets must be nonzero multiples of twice the zone length"
                    )

    @property
    def zone_length(self) -> float:
        return self.topology.length

    def resolved_offsets(self) -> tuple[float, ...]:
        if self.offsets is not None:
            return self.offsets
        d = self.topology.length
        return (-2.0 * d, 2.0 * d)


@dataclass(frozen=True)
class FixedPointReport:
    """Outcome of the interference iteration on the typical region."""

    iterations_used: int
    trace: tuple[float, ...]
    schedule: TransmitSchedule
    converged: bool
    matrices: tuple[np.ndarray, ...] | None

    @property
    def epsilon_cbr(self) -> float:
        return self.trace[-1]


def interference_view(scenario: CascadeScenario, schedule: TransmitSchedule):
    """Per-slot, per-receiver interferer lists seen by the typical region.

    Adjacent active zones run the same frame format, so their slot-t
    transmit probabilities apply to the typical region's slot t.  Nodes
    with zero transmit probability are omitted.
    """
    topo = scenario.topology
    params = scenario.params
    frame_slots = topo.n_relays + 1
    if schedule.frame_slots != frame_slots:
        raise ValueError("schedule does not cover the frame")
    positions = topo.positions
    n = len(positions)
    out = []
    for t in range(frame_slots):
        per_node = [[] for _ in range(n)]
        for offset in scenario.resolved_offsets():
            shifted = topo.translated(offset)
            for i, xi in enumerate(shifted):
                p = schedule.probs[i, t]
                if p == 0.0:
                    continue
                for j, xj in enumerate(positions):
                    dist = abs(xj - xi)
                    if dist < params.min_distance:
                        raise FarFieldError(
                            "interfering node within the minimum modeled distance"
                        )
                    per_node[j].append((dist ** (-params.alpha), float(p)))
        out.append(per_node)
    return out


def fixed_point(
    scenario: CascadeScenario,
    xi: float = XI_DEFAULT,
    max_iters: int = MAX_ITERS_DEFAULT,
    halt_on_success: bool = False,
) -> FixedPointReport:
    """Resolve the outage / interference coupling of the typical region.

    Iteration 0 neglects interference entirely.  Each subsequent iteration
    rebuilds the per-slot matrices from the previous iteration's transmit
    schedule and stops once the largest per-slot Frobenius distance between
    successive matrices drops below ``xi``.  Non-convergence within
    ``max_iters`` is reported, not raised.
    """
    if xi <= 0.0:
        raise ValueError("tolerance must be positive")
    if max_iters < 1:
        raise ValueError("need at least one iteration")
    topo = scenario.topology
    params = scenario.params
    trace: list[float] = []
    prev_datas = None
    schedule = None
    converged = False
    ext = None
    iterations = 0
    while iterations <= max_iters:
        eps, schedule, datas = analyze(
            topo, params, ext, halt_on_success=halt_on_success, want_schedule=True
        )
        trace.append(eps)
        iterations += 1
        if prev_datas is not None:
            delta = max(
                math.sqrt(float(((a - b) ** 2).sum()))
                for a, b in zip(datas, prev_datas)
            )
            if delta < xi:
                converged = True
                break
        prev_datas = datas
        if iterations > max_iters:
            break
        ext = interference_view(scenario, schedule)

    matrices = None
    structures = _structures(topo.n_relays)
    if structures.tau <= _REPORT_MATRIX_LIMIT:
        from .markov import build_transition_matrix

        matrices = tuple(build_transition_matrix(topo, params, ext))
    return FixedPointReport(
        iterations_used=len(trace),
        trace=tuple(trace),
        schedule=schedule,
        converged=converged,
        matrices=matrices,
    )
