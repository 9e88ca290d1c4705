"""Tests for transport-capacity evaluation and the configuration search."""
from __future__ import annotations

import math

import numpy as np
import pytest

from barrage import (
    CandidateConfig,
    ChannelParams,
    evaluate,
    mutate_placement,
    optimize,
    transport_capacity,
)
from barrage.optimizer import initial_placement


class TestTransportCapacity:
    def test_known_value(self):
        # d=2, N=1, eps=0.5, beta=3 -> 2 * 0.5 / 4 * 2 = 0.5
        assert transport_capacity(0.5, 1, 2.0, 3.0) == pytest.approx(0.5)

    def test_zero_outage_upper_bound(self):
        u = transport_capacity(0.0, 0, 1.0, 1.0)
        assert u == pytest.approx(0.5)

    def test_certain_outage_is_worthless(self):
        assert transport_capacity(1.0, 3, 2.0, 7.0) == 0.0


class TestEvaluate:
    def test_relayless_matches_closed_form(self):
        """A relayless region is one Rayleigh link, so capacity reduces to
        d * exp(-beta * d^alpha / gamma) * R / 2."""
        params = ChannelParams(gamma=3.0, alpha=3.5, beta=1.0, min_distance=0.1)
        rate, d = 3.0, 0.8
        beta = 2.0 ** rate - 1.0
        cfg = CandidateConfig((), rate, 0, d)
        expected = d * math.exp(-beta * d ** params.alpha / params.gamma) * rate / 2.0
        assert evaluate(cfg, params, cci=False, min_distance=0.1) == pytest.approx(
            expected, rel=1e-12
        )

    def test_interference_reduces_capacity(self):
        params = ChannelParams(gamma=10.0, alpha=3.5, beta=1.0, min_distance=0.1)
        cfg = CandidateConfig(initial_placement(2, 3.0), 4.0, 2, 3.0)
        clean = evaluate(cfg, params, cci=False, min_distance=0.1)
        noisy = evaluate(cfg, params, cci=True, min_distance=0.1)
        assert noisy < clean

    def test_infeasible_geometry_is_minus_infinity(self):
        params = ChannelParams(gamma=1.0, alpha=3.5, beta=1.0, min_distance=0.5)
        cfg = CandidateConfig((0.1, 0.2, 0.3), 2.0, 3, 0.4)
        assert evaluate(cfg, params, cci=False, min_distance=0.5) == float("-inf")

    def test_config_validation(self):
        with pytest.raises(ValueError):
            CandidateConfig((0.5,), 2.0, 2, 1.0)  # count mismatch
        with pytest.raises(ValueError):
            CandidateConfig((0.9, 0.4), 2.0, 2, 1.0)  # not increasing
        with pytest.raises(ValueError):
            CandidateConfig((), -1.0, 0, 1.0)  # bad rate


class TestMutation:
    def test_empty_placement_stays_empty(self):
        rng = np.random.default_rng(0)
        assert mutate_placement((), 1.0, 0, 2, rng) == ()

    def test_moves_keep_ordering_and_bounds(self):
        rng = np.random.default_rng(1)
        ref = initial_placement(4, 2.0)
        for _ in range(200):
            out = mutate_placement(ref, 2.0, 4, 3, rng)
            assert len(out) == 4
            assert all(0.0 < x < 2.0 for x in out)
            assert all(b > a for a, b in zip(out, out[1:]))

    def test_keep_probability_is_one_half(self):
        rng = np.random.default_rng(12)
        ref = initial_placement(3, 3.0)
        trials = 10_000
        kept = 0
        for _ in range(trials):
            out = mutate_placement(ref, 3.0, 3, 2, rng)
            kept += sum(1 for a, b in zip(ref, out) if a == b)
        total = trials * 3
        p_hat = kept / total
        sigma = math.sqrt(0.25 / total)
        assert abs(p_hat - 0.5) <= 4.0 * sigma

    def test_step_size_follows_spread_parameter(self):
        rng = np.random.default_rng(5)
        ref = initial_placement(2, 2.0)
        moved = set()
        for _ in range(50):
            out = mutate_placement(ref, 2.0, 2, 4, rng)
            for a, b in zip(ref, out):
                if a != b:
                    moved.add(round(abs(b - a), 12))
        # interior moves are exactly d / (n_delta * N) = 0.25
        assert moved == {0.25}


class TestOptimize:
    PARAMS = ChannelParams(gamma=10.0, alpha=3.5, beta=1.0, min_distance=0.1)

    def test_relayless_line_network_recovers_analytic_optimum(self):
        """With N pinned to zero the capacity has a closed-form maximizer."""
        res = optimize(
            self.PARAMS, cci=False, n_bounds=(0, 0), seed=1, restarts=1
        )
        alpha, gamma = 3.5, 10.0
        # stationarity of d*exp(-beta d^alpha/gamma) in d at fixed rate
        beta = res.best.beta
        d_expected = (gamma / (alpha * beta)) ** (1.0 / alpha)
        assert res.best.length == pytest.approx(d_expected, rel=0.05)
        assert res.upsilon > 0.9

    def test_determinism(self):
        a = optimize(self.PARAMS, cci=False, n_bounds=(0, 1), seed=7, restarts=1)
        b = optimize(self.PARAMS, cci=False, n_bounds=(0, 1), seed=7, restarts=1)
        assert a.best == b.best
        assert a.upsilon == b.upsilon

    def test_trace_is_monotone(self):
        res = optimize(self.PARAMS, cci=False, n_bounds=(0, 1), seed=3, restarts=1)
        values = [u for _, u in res.trace]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_reported_upsilon_matches_reevaluation(self):
        res = optimize(self.PARAMS, cci=False, n_bounds=(0, 2), seed=2, restarts=1)
        again = evaluate(res.best, self.PARAMS, cci=False, min_distance=0.1)
        assert again == pytest.approx(res.upsilon, rel=1e-12)
        assert res.epsilon_cbr == pytest.approx(
            1.0
            - res.upsilon
            * 2.0
            * (res.best.n_relays + 1)
            / (res.best.length * res.best.rate),
            abs=1e-9,
        )

    def test_bad_bounds_rejected(self):
        with pytest.raises(ValueError):
            optimize(self.PARAMS, cci=False, r_bounds=(2.0, 1.0))
        with pytest.raises(ValueError):
            optimize(self.PARAMS, cci=False, n_bounds=(-1, 2))
        with pytest.raises(ValueError):
            optimize(self.PARAMS, cci=False, d_bounds=(0.0, 1.0))
