"""Tests for the simulation estimators and their seeding discipline."""
from __future__ import annotations

import math
import os

import numpy as np
import pytest

from barrage import (
    CascadeScenario,
    ChannelParams,
    LineTopology,
    LinkSet,
    simulate_cbr,
    simulate_outage,
)
from barrage.markov import analyze

PARAMS = ChannelParams.from_db(10.0, 3.5, 6.0)
LINKS = LinkSet(barraging_gains=(1.0, 2.0 ** -3.5), interferers=((3.0 ** -3.5, 0.5),))
TOPO = LineTopology.equally_spaced(2, 3.0)


class TestReproducibility:
    def test_same_seed_same_estimate(self):
        a = simulate_outage(LINKS, PARAMS, trials=200_000, seed=5)
        b = simulate_outage(LINKS, PARAMS, trials=200_000, seed=5)
        assert a.epsilon_hat == b.epsilon_hat
        assert a.trials == b.trials

    def test_different_seed_different_estimate(self):
        a = simulate_outage(LINKS, PARAMS, trials=200_000, seed=5)
        b = simulate_outage(LINKS, PARAMS, trials=200_000, seed=6)
        assert a.epsilon_hat != b.epsilon_hat

    def test_thread_count_does_not_change_counts(self):
        old = os.environ.get("BRN_THREADS")
        try:
            os.environ["BRN_THREADS"] = "1"
            a = simulate_outage(LINKS, PARAMS, trials=300_000, seed=9)
            os.environ["BRN_THREADS"] = "4"
            b = simulate_outage(LINKS, PARAMS, trials=300_000, seed=9)
        finally:
            if old is None:
                os.environ.pop("BRN_THREADS", None)
            else:
                os.environ["BRN_THREADS"] = old
        assert a.epsilon_hat == b.epsilon_hat

    def test_cbr_simulation_reproducible(self):
        a = simulate_cbr(TOPO, params=PARAMS, trials=100_000, seed=3)
        b = simulate_cbr(TOPO, params=PARAMS, trials=100_000, seed=3)
        assert a.epsilon_hat == b.epsilon_hat
        assert np.array_equal(a.transmit_freq, b.transmit_freq)


class TestAgainstClosedForm:
    def test_link_outage_within_three_sigma(self):
        from barrage import outage_probability

        analytic = outage_probability(LINKS, PARAMS).epsilon
        est = simulate_outage(LINKS, PARAMS, trials=10 ** 6, seed=17)
        assert abs(est.epsilon_hat - analytic) <= 3.0 * est.stderr

    def test_zero_threshold_never_fails(self):
        params = ChannelParams(gamma=1.0, alpha=3.5, beta=0.0)
        est = simulate_outage(LINKS, params, trials=100_000, seed=1)
        assert est.epsilon_hat == 0.0

    def test_stderr_scales_with_trials(self):
        small = simulate_outage(LINKS, PARAMS, trials=100_000, seed=2)
        large = simulate_outage(LINKS, PARAMS, trials=400_000, seed=2)
        assert large.stderr == pytest.approx(small.stderr / 2.0, rel=0.15)


class TestRegionSimulation:
    def test_sinr_mode_matches_chain(self):
        analytic, _, _ = analyze(TOPO, PARAMS)
        est = simulate_cbr(TOPO, params=PARAMS, trials=10 ** 6, seed=7)
        assert abs(est.epsilon_hat - analytic) <= 3.0 * est.stderr

    def test_transition_mode_matches_chain(self):
        analytic, _, _ = analyze(TOPO, PARAMS)
        est = simulate_cbr(
            TOPO, params=PARAMS, trials=10 ** 6, seed=8, mode="transition_level"
        )
        assert abs(est.epsilon_hat - analytic) <= 3.0 * est.stderr

    def test_modes_agree_with_each_other(self):
        a = simulate_cbr(TOPO, params=PARAMS, trials=400_000, seed=21)
        b = simulate_cbr(
            TOPO, params=PARAMS, trials=400_000, seed=22, mode="transition_level"
        )
        bound = 3.0 * math.hypot(a.stderr, b.stderr)
        assert abs(a.epsilon_hat - b.epsilon_hat) <= bound

    def test_transmit_frequencies_track_schedule(self):
        _, sched, _ = analyze(TOPO, PARAMS)
        est = simulate_cbr(TOPO, params=PARAMS, trials=10 ** 6, seed=7)
        freq = np.asarray(est.transmit_freq)
        probs = np.asarray(sched.probs)
        assert freq.shape == probs.shape
        # binomial three-sigma envelope per entry
        sigma = np.sqrt(np.maximum(probs * (1.0 - probs), 1e-12) / est.trials)
        assert (np.abs(freq - probs) <= 3.0 * sigma + 1e-9).all()

    def test_destination_never_transmits(self):
        est = simulate_cbr(TOPO, params=PARAMS, trials=50_000, seed=4)
        assert (np.asarray(est.transmit_freq)[-1] == 0.0).all()

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            simulate_cbr(TOPO, params=PARAMS, trials=1000, seed=0, mode="nope")


class TestCascadeSimulation:
    def test_sinr_cascade_matches_fixed_point(self):
        from barrage import fixed_point

        scen = CascadeScenario(TOPO, PARAMS)
        report = fixed_point(scen)
        est = simulate_cbr(scen, trials=10 ** 6, seed=11)
        assert abs(est.epsilon_hat - report.epsilon_cbr) <= 3.0 * est.stderr

    def test_transition_cascade_matches_fixed_point(self):
        from barrage import fixed_point

        scen = CascadeScenario(TOPO, PARAMS)
        report = fixed_point(scen)
        est = simulate_cbr(scen, trials=10 ** 6, seed=12, mode="transition_level")
        assert abs(est.epsilon_hat - report.epsilon_cbr) <= 3.0 * est.stderr

    def test_interference_visible_in_simulation(self):
        iso = simulate_cbr(TOPO, params=PARAMS, trials=400_000, seed=13)
        cas = simulate_cbr(
            CascadeScenario(TOPO, PARAMS), trials=400_000, seed=13
        )
        assert cas.epsilon_hat > iso.epsilon_hat
