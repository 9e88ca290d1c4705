"""Absorbing-chain model of packet flooding inside one relay region.

A region state is a vector over {0, 1, 2} for [source, relays...,
destination]: 0 = has not decoded, 1 = decoded last slot and transmits
next slot, 2 = already transmitted and is done with the packet.

Two layers of the chain are kept:

* a collapsed chain in the canonical absorbing form (all outage region
  states merged into one absorbing state, all success states into the
  other), used for outage accounting;
* the full uncollapsed chain, used to account per-node transmit
  probabilities.  By default relays that decoded keep rebroadcasting even
  after the destination has decoded, since nodes cannot observe the
  destination's success; ``halt_on_success=True`` freezes the region at
  the first success instead.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .channel import (
    ChannelParams,
    FarFieldError,
    LineTopology,
    outage_batch,
)

N_MAX_DEFAULT = 8

# Dense collapsed matrices are only materialized below this transient count.
_DENSE_LIMIT = 2500


@dataclass(frozen=True)
class StateSpace:
    """Reachable region states split into transient and absorbing parts.

    ``transient`` is ordered by (slot index, lexicographic state); the
    start state [1, 0, ..., 0] comes first.  The two absorbing aggregates
    follow the transients: outage first, then success.  ``slot_index``
    holds each transient state's earliest reachable slot.
    """

    n_relays: int
    transient: tuple[tuple[int, ...], ...]
    slot_index: tuple[int, ...]
    outage_members: tuple[tuple[int, ...], ...]
    success_members: tuple[tuple[int, ...], ...]

    @property
    def n_transient(self) -> int:
        return len(self.transient)

    @property
    def n_states(self) -> int:
        return self.n_transient + 2

    @property
    def outage_index(self) -> int:
        return self.n_transient

    @property
    def success_index(self) -> int:
        return self.n_transient + 1

    @property
    def frame_slots(self) -> int:
        return self.n_relays + 1


@dataclass(frozen=True)
class AbsorptionResult:
    """Absorbing probabilities; row 0 is the start state."""

    B: np.ndarray

    @property
    def epsilon_cbr(self) -> float:
        return float(self.B[0, 0])

    @property
    def success(self) -> float:
        return float(self.B[0, 1])


@dataclass(frozen=True)
class TransmitSchedule:
    """Per-node, per-slot transmit probabilities; slots are 1-based."""

    probs: np.ndarray  # shape (n_nodes, frame_slots)

    def p(self, node: int, slot: int) -> float:
        return float(self.probs[node, slot - 1])

    @property
    def frame_slots(self) -> int:
        return self.probs.shape[1]


class _Chain:
    """Reachability closure plus transition incidence for one relay count.

    Transition probabilities are products over the receiving nodes of
    decode / fail probabilities; the incidence matrices pick the right
    (barraging set, receiver) outage entries for each transition so a
    whole slot matrix is a couple of sparse products away.
    """

    def __init__(self, n_relays: int, halt_on_success: bool, pair_index: dict | None = None):
        n = n_relays + 2
        dest = n - 1
        self.n_relays = n_relays
        self.n_nodes = n
        self.halt_on_success = halt_on_success
        start = (1,) + (0,) * (n - 1)
        index = {start: 0}
        states = [start]
        depth = [1]
        self.pair_index = {} if pair_index is None else pair_index
        pairs = self.pair_index
        t_src: list[int] = []
        t_dst: list[int] = []
        t_dec: list[list[int]] = []
        t_fail: list[list[int]] = []
        qi = 0
        while qi < len(states):
            s = states[qi]
            si = qi
            qi += 1
            txs = tuple(i for i, v in enumerate(s) if v == 1)
            if not txs or (halt_on_success and s[dest] != 0):
                # Frozen: either absorbed or halted at success.
                t_src.append(si)
                t_dst.append(si)
                t_dec.append([])
                t_fail.append([])
                continue
            zeros = tuple(j for j, v in enumerate(s) if v == 0)
            base = tuple(2 if v == 1 else v for v in s)
            pids = []
            for j in zeros:
                key = (txs, j)
                pid = pairs.get(key)
                if pid is None:
                    pid = len(pairs)
                    pairs[key] = pid
                pids.append(pid)
            for bits in itertools.product((0, 1), repeat=len(zeros)):
                nxt = list(base)
                dec: list[int] = []
                fail: list[int] = []
                for j, b, pid in zip(zeros, bits, pids):
                    if b:
                        nxt[j] = 1
                        dec.append(pid)
                    else:
                        fail.append(pid)
                key_state = tuple(nxt)
                ni = index.get(key_state)
                if ni is None:
                    # queue order is BFS, so first-discovery depth is minimal
                    ni = len(states)
                    index[key_state] = ni
                    states.append(key_state)
                    depth.append(depth[si] + 1)
                t_src.append(si)
                t_dst.append(ni)
                t_dec.append(dec)
                t_fail.append(fail)

        self.states = states
        self.index = index
        self.depth = depth
        self.state_mat = np.array(states, dtype=np.int8)
        self.dest_col = dest
        n_states = len(states)
        n_trans = len(t_src)
        self.t_src = np.asarray(t_src)
        self.t_dst = np.asarray(t_dst)

        def incidence(rows: list[list[int]]) -> sp.csr_matrix:
            ind = np.fromiter(
                (pid for row in rows for pid in row), dtype=np.int32,
                count=sum(len(row) for row in rows),
            )
            ptr = np.zeros(n_trans + 1, dtype=np.int64)
            ptr[1:] = np.cumsum([len(row) for row in rows])
            data = np.ones(len(ind))
            return sp.csr_matrix((data, ind, ptr), shape=(n_trans, max(len(pairs), 1)))

        self.m_dec = incidence(t_dec)
        self.m_fail = incidence(t_fail)

        # csr template of the transposed slot matrix; only data changes
        # between slots, so occupancy propagation reuses the structure.
        coo = sp.coo_matrix(
            (np.arange(1, n_trans + 1, dtype=np.float64), (self.t_dst, self.t_src)),
            shape=(n_states, n_states),
        )
        csr = coo.tocsr()
        self.pt_indptr = csr.indptr
        self.pt_indices = csr.indices
        self.pt_perm = csr.data.astype(np.int64) - 1
        self.n_states = n_states
        self.n_trans = n_trans

    def pair_list(self) -> list[tuple[tuple[int, ...], int]]:
        out = [None] * len(self.pair_index)
        for key, pid in self.pair_index.items():
            out[pid] = key
        return out

    def transition_probs(self, eps: np.ndarray) -> np.ndarray:
        """Per-transition probability given outage values per pair id."""
        with np.errstate(divide="ignore"):
            l_dec = np.log1p(-np.minimum(eps, 1.0))
            l_fail = np.log(eps)
        logp = self.m_dec @ l_dec + self.m_fail @ l_fail
        return np.exp(logp)

    def propagate(self, eps_per_slot: list[np.ndarray]):
        """Forward-propagate occupancy slot by slot.

        Returns (per-slot occupancy rows including the initial one, final
        occupancy, per-slot transition data arrays).
        """
        occ = np.zeros(self.n_states)
        occ[0] = 1.0
        history = [occ]
        datas = []
        for eps in eps_per_slot:
            probs = self.transition_probs(eps)
            datas.append(probs)
            pt = sp.csr_matrix(
                (probs[self.pt_perm], self.pt_indices, self.pt_indptr),
                shape=(self.n_states, self.n_states),
            )
            occ = pt @ occ
            history.append(occ)
        return history, occ, datas


class _Structures:
    """Full and halted chains for one relay count, sharing one pair table."""

    def __init__(self, n_relays: int):
        self.full = _Chain(n_relays, halt_on_success=False)
        self.halted = _Chain(n_relays, halt_on_success=True, pair_index=self.full.pair_index)
        self.pairs = self.full.pair_list()
        halted = self.halted
        dest = halted.dest_col
        transient = []
        outage = []
        success = []
        for si, s in enumerate(halted.states):
            if s[dest] != 0:
                success.append(si)
            elif 1 in s:
                transient.append(si)
            else:
                outage.append(si)
        transient.sort(key=lambda si: (halted.depth[si], halted.states[si]))
        self.transient_chain_idx = transient
        self.outage_chain_idx = outage
        self.success_chain_idx = success
        col_of = {}
        for col, si in enumerate(transient):
            col_of[si] = col
        tau = len(transient)
        for si in outage:
            col_of[si] = tau
        for si in success:
            col_of[si] = tau + 1
        self.tau = tau
        # transitions out of transient states, in collapsed coordinates
        keep = np.fromiter(
            (si in col_of and col_of[si] < tau for si in halted.t_src),
            dtype=bool, count=halted.n_trans,
        )
        self.c_trans_sel = np.flatnonzero(keep)
        self.c_rows = np.array([col_of[si] for si in halted.t_src[keep]], dtype=np.int64)
        self.c_cols = np.array([col_of[si] for si in halted.t_dst[keep]], dtype=np.int64)

        self.space = StateSpace(
            n_relays=n_relays,
            transient=tuple(halted.states[si] for si in transient),
            slot_index=tuple(halted.depth[si] for si in transient),
            outage_members=tuple(halted.states[si] for si in outage),
            success_members=tuple(halted.states[si] for si in success),
        )

    def collapsed_matrix(self, eps: np.ndarray) -> np.ndarray:
        probs = self.halted.transition_probs(eps)[self.c_trans_sel]
        n = self.tau + 2
        P = np.zeros((n, n))
        np.add.at(P, (self.c_rows, self.c_cols), probs)
        P[self.tau, self.tau] = 1.0
        P[self.tau + 1, self.tau + 1] = 1.0
        return P


@lru_cache(maxsize=32)
def _structures(n_relays: int) -> _Structures:
    return _Structures(n_relays)


def enumerate_states(n_relays: int, n_max: int = N_MAX_DEFAULT) -> StateSpace:
    """All region states reachable from [1, 0, ..., 0], partitioned.

    State-1 nodes become 2; state-0 nodes become 1 on a successful decode
    and stay 0 otherwise.  Success states (destination decoded) and outage
    states (nothing left transmitting, destination empty-handed) are
    reported as the two absorbing aggregates' member lists.
    """
    if n_relays < 0 or n_relays > n_max:
        raise ValueError(f"relay count must lie in [0, {n_max}], got {n_relays}")
    return _structures(n_relays).space


class _EpsEvaluator:
    """Outage values for every (barraging set, receiver) pair of a chain."""

    def __init__(self, pairs, topology: LineTopology, params: ChannelParams):
        self.params = params
        pos = np.asarray(topology.positions)
        dist = np.abs(pos[:, None] - pos[None, :])
        off = ~np.eye(len(pos), dtype=bool)
        if dist[off].min() < params.min_distance:
            raise FarFieldError(
                "node separation below the modeled minimum distance"
            )
        with np.errstate(divide="ignore"):
            omega = np.where(off, dist, 1.0) ** (-params.alpha)
        self.n_nodes = len(pos)
        n_pairs = len(pairs)
        kmax = max((len(b) for b, _ in pairs), default=1)
        self.gains = np.zeros((n_pairs, kmax))
        self.mask = np.zeros((n_pairs, kmax), dtype=bool)
        self.receiver = np.array([j for _, j in pairs], dtype=np.int64)
        for r, (bset, j) in enumerate(pairs):
            self.gains[r, : len(bset)] = omega[list(bset), j]
            self.mask[r, : len(bset)] = True

    def slot(self, ext_t) -> np.ndarray:
        """Outage per pair for one slot's external interferer lists.

        ext_t maps node index -> iterable of (gain, transmit probability);
        None means no co-channel interference.
        """
        n_pairs = self.gains.shape[0]
        if ext_t is None:
            igains = np.zeros((n_pairs, 0))
            ip = np.zeros((n_pairs, 0))
        else:
            per_node = [list(ext_t[j]) for j in range(self.n_nodes)]
            imax = max((len(v) for v in per_node), default=0)
            node_g = np.zeros((self.n_nodes, imax))
            node_p = np.zeros((self.n_nodes, imax))
            for j, entries in enumerate(per_node):
                for c, (omega, p) in enumerate(entries):
                    if omega < 0.0 or not 0.0 <= p <= 1.0:
                        raise ValueError("malformed interference entry")
                    node_g[j, c] = omega
                    node_p[j, c] = p
            igains = node_g[self.receiver]
            ip = node_p[self.receiver]
        return outage_batch(
            self.gains, self.mask, igains, ip, self.params.beta, self.params.gamma
        )


def _check_interference(external_interference, frame_slots: int, n_nodes: int):
    if external_interference is None:
        return [None] * frame_slots
    ext = list(external_interference)
    if len(ext) != frame_slots:
        raise ValueError(
            f"interference schedule must cover {frame_slots} slots, got {len(ext)}"
        )
    for ext_t in ext:
        if ext_t is not None and len(ext_t) != n_nodes:
            raise ValueError("interference lists must cover every node")
    return ext


def build_transition_matrix(
    topology: LineTopology,
    params: ChannelParams,
    external_interference=None,
    space: StateSpace | None = None,
) -> list[np.ndarray]:
    """Per-slot canonical transition matrices [[Q, R_abs], [0, I]].

    One matrix per slot is produced; they coincide when the external
    interference does not vary across slots (in particular when there is
    none).  Each state-0 node decodes independently, so a transition's
    probability is the product of its per-node decode / fail terms;
    transitions into an absorbing aggregate sum over its member states.
    """
    structures = _structures(topology.n_relays)
    if space is not None and space.n_relays != topology.n_relays:
        raise ValueError("state space does not match the topology")
    if structures.tau > _DENSE_LIMIT:
        raise ValueError(
            "dense transition matrices are limited to small relay counts; "
            "use the analysis pipeline instead"
        )
    frame_slots = topology.n_relays + 1
    ext = _check_interference(external_interference, frame_slots, topology.n_relays + 2)
    ev = _EpsEvaluator(structures.pairs, topology, params)
    return [structures.collapsed_matrix(ev.slot(ext_t)) for ext_t in ext]


def absorption(matrix, space: StateSpace) -> AbsorptionResult:
    """Absorbing probabilities for the canonical chain.

    A single matrix is treated as time-homogeneous and solved through the
    fundamental matrix (a dense linear solve, never an explicit inverse).
    A per-slot sequence is forward-propagated; the two agree whenever all
    slot matrices are equal.
    """
    tau = space.n_transient
    if isinstance(matrix, np.ndarray):
        P = matrix
        _check_canonical(P, tau)
        Q = P[:tau, :tau]
        R_abs = P[:tau, tau:]
        try:
            B = np.linalg.solve(np.eye(tau) - Q, R_abs)
        except np.linalg.LinAlgError as exc:
            raise ValueError("singular fundamental system") from exc
        return AbsorptionResult(B=B)
    matrices = list(matrix)
    if len(matrices) != space.frame_slots:
        raise ValueError("expected one matrix per frame slot")
    for P in matrices:
        _check_canonical(P, tau)
    prod = np.eye(tau + 2)
    for P in matrices:
        prod = prod @ P
    return AbsorptionResult(B=prod[:tau, tau:])


def _check_canonical(P: np.ndarray, tau: int) -> None:
    if P.shape != (tau + 2, tau + 2):
        raise ValueError("matrix shape does not match the state space")
    if np.abs(P.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("transition matrix rows must be stochastic")
    if (P < -1e-12).any() or (P > 1.0 + 1e-12).any():
        raise ValueError("transition probabilities must lie in [0, 1]")
    if np.any(P[tau:, :tau] != 0.0) or not np.allclose(P[tau:, tau:], np.eye(2)):
        raise ValueError("absorbing block must be the identity")


def analyze(
    topology: LineTopology,
    params: ChannelParams,
    external_interference=None,
    halt_on_success: bool = False,
    want_schedule: bool = True,
):
    """Outage, transmit schedule, and raw per-slot transition data.

    Runs the uncollapsed chain forward for one frame.  Returns
    (epsilon_cbr, TransmitSchedule or None, per-slot data arrays); the data
    arrays parameterize the slot matrices on a fixed sparsity template and
    exist so iterative callers can measure matrix-to-matrix distances.
    """
    structures = _structures(topology.n_relays)
    chain = structures.halted if halt_on_success else structures.full
    frame_slots = topology.n_relays + 1
    ext = _check_interference(external_interference, frame_slots, topology.n_relays + 2)
    ev = _EpsEvaluator(structures.pairs, topology, params)
    eps_slots = [ev.slot(ext_t) for ext_t in ext]
    history, final, datas = chain.propagate(eps_slots)
    decoded = chain.state_mat[:, chain.dest_col] != 0
    epsilon = float(final[~decoded].sum())
    epsilon = min(max(epsilon, 0.0), 1.0)
    schedule = None
    if want_schedule:
        transmitting = chain.state_mat == 1
        probs = np.zeros((chain.n_nodes, frame_slots))
        for t in range(frame_slots):
            probs[:, t] = history[t] @ transmitting
        probs[chain.dest_col, :] = 0.0  # the destination buffer never relays
        np.clip(probs, 0.0, 1.0, out=probs)
        schedule = TransmitSchedule(probs=probs)
    return epsilon, schedule, datas


def transmit_probabilities(
    topology: LineTopology,
    params: ChannelParams,
    external_interference=None,
    space: StateSpace | None = None,
    halt_on_success: bool = False,
) -> TransmitSchedule:
    """Per-node, per-slot transmit probabilities of the region.

    Computed on the uncollapsed chain: a node's probability of transmitting
    in slot t is the total occupancy of states where it sits in state 1 at
    that slot boundary.  The source transmits in slot 1 only; the
    destination, being a buffer, never relays.
    """
    _, schedule, _ = analyze(
        topology,
        params,
        external_interference,
        halt_on_success=halt_on_success,
        want_schedule=True,
    )
    return schedule
