"""
Tests for arrival probabilities, measurement utilities and the admission threshold.
"""

import itertools
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from selective_oosm.core.model import LinearGaussianModel, LinearSensor
from selective_oosm.errors import ConfigError, WindowError
from selective_oosm.filters.particle import GaussianSummary
from selective_oosm.filters.selection import (
    CandidateUtility,
    LinearCost,
    SelectionConfig,
    UnitCost,
    arrival_prob_combo,
    arrival_prob_single,
    calc_gamma,
    combo_mask,
    combo_members,
    combo_utility,
    cost_model_from_dict,
    enumerate_candidates,
)
from selective_oosm.filters.smoother import rts_smooth
from selective_oosm.filters.window import WindowStore

SENSORS = [1, 2, 3]


@pytest.fixture
def window():
    store = WindowStore(5)
    for t in range(11):
        store.record(t, GaussianSummary([0.0], [[1.0]]))
    return store


def random_window(rng, state_dim=3, n_sensors=3, steps=6, max_delay=4):
    A = rng.normal(scale=0.5, size=(state_dim, state_dim)) + np.eye(state_dim)
    V = np.eye(state_dim) * 0.2
    model = LinearGaussianModel(A, V)
    sensors = {
        i: LinearSensor(i, rng.normal(size=(1, state_dim)), [[rng.uniform(0.1, 1.0)]])
        for i in range(1, n_sensors + 1)
    }
    store = WindowStore(max_delay)
    for t in range(steps):
        L = rng.normal(size=(state_dim, state_dim))
        store.record(t, GaussianSummary(rng.normal(size=state_dim), L @ L.T + np.eye(state_dim)))
    return store, rts_smooth(store, model, sensors)


class TestArrivalProbability:

    def test_single_sensor_values(self, window):
        assert arrival_prob_single(9, 10, 1, window, 0.7, 5) == pytest.approx(0.14)
        assert arrival_prob_single(5, 10, 1, window, 0.7, 5) == pytest.approx(0.7)

    def test_arrived_measurement_has_zero_probability(self, window):
        window.mark_arrived(2, 9)
        assert arrival_prob_single(9, 10, 2, window, 0.7, 5) == 0.0
        assert arrival_prob_single(9, 10, 1, window, 0.7, 5) == pytest.approx(0.14)

    def test_outside_delay_range(self, window):
        with pytest.raises(WindowError):
            arrival_prob_single(10, 10, 1, window, 0.7, 5)
        with pytest.raises(WindowError):
            arrival_prob_single(4, 10, 1, window, 0.7, 5)

    def test_combination_values(self, window):
        everything = combo_mask(SENSORS, SENSORS)
        assert arrival_prob_combo(9, 10, everything, SENSORS, window, 0.7, 5) == pytest.approx(0.14 ** 3)
        only_first = combo_mask([1], SENSORS)
        assert arrival_prob_combo(9, 10, only_first, SENSORS, window, 0.7, 5) == pytest.approx(0.14 * 0.86 ** 2)

    @pytest.mark.parametrize("tau", [5, 7, 9])
    def test_combinations_sum_to_one(self, window, tau):
        window.mark_arrived(3, tau)
        total = sum(arrival_prob_combo(tau, 10, combo, SENSORS, window, 0.7, 5) for combo in range(8))
        assert total == pytest.approx(1.0)

    def test_combo_with_arrived_member_is_impossible(self, window):
        window.mark_arrived(1, 8)
        assert arrival_prob_combo(8, 10, combo_mask([1, 2], SENSORS), SENSORS, window, 0.7, 5) == 0.0


class TestCombinations:

    def test_mask_round_trip(self):
        ids = [2, 5, 9]
        assert combo_mask([9, 2], ids) == 0b101
        assert combo_members(0b101, ids) == [2, 9]
        assert combo_members(0, ids) == []


class TestUtility:

    def test_scalar_example(self):
        store = WindowStore(0)
        store.record(0, GaussianSummary([0.0], [[2.0]]))
        sw = rts_smooth(store, LinearGaussianModel([[1.0]], [[1.0]]), {1: LinearSensor(1, [[1.0]], [[3.0]])})
        assert combo_utility(sw, 0, [1]) == pytest.approx(0.8)

    def test_blind_sensor_has_zero_utility(self):
        store = WindowStore(0)
        store.record(0, GaussianSummary([0.0, 0.0], np.eye(2)))
        sw = rts_smooth(store, LinearGaussianModel(np.eye(2), np.eye(2)),
                        {1: LinearSensor(1, [[0.0, 0.0]], [[1.0]])})
        assert combo_utility(sw, 0, [1]) == pytest.approx(0.0)

    def test_monotone_in_sensor_subsets(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            store, sw = random_window(rng)
            for tau in store.measurable_steps():
                values = {
                    subset: combo_utility(sw, tau, list(subset))
                    for r in range(1, 4)
                    for subset in itertools.combinations(SENSORS, r)
                }
                for small, big in itertools.product(values, values):
                    if set(small) < set(big):
                        assert values[small] <= values[big] + 1e-9

    @staticmethod
    def steady_random_walk(max_delay=4):
        # x_t = x_{t−1} + w, y_t = x_t + v, unit variances, at the steady-state Kalman variance
        P = (math.sqrt(5.0) - 1.0) / 2.0
        store = WindowStore(max_delay)
        for t in range(max_delay + 2):
            store.record(t, GaussianSummary([0.0], [[P]]))
        return store, rts_smooth(store, LinearGaussianModel([[1.0]], [[1.0]]), {1: LinearSensor(1, [[1.0]], [[1.0]])})

    def test_conditional_utility_decays_with_lag(self):
        store, sw = self.steady_random_walk()
        k = store.current_step
        values = [combo_utility(sw, tau, [1]) for tau in range(k - 4, k + 1)]
        assert all(a < b for a, b in zip(values, values[1:]))
        # at lag one: (G·P)² / (R̃ + 1) with G = P / (P + 1)
        P = (math.sqrt(5.0) - 1.0) / 2.0
        G = P / (P + 1.0)
        assert values[-2] == pytest.approx((G * P) ** 2 / (sw.covs[k - 1][0, 0] + 1.0))

    def test_forms_agree_at_current_step(self):
        store, sw = self.steady_random_walk()
        k = store.current_step
        assert combo_utility(sw, k, [1], "conditional") == pytest.approx(combo_utility(sw, k, [1], "propagated"))

    def test_enumeration_follows_cross_form(self):
        rng = np.random.default_rng(5)
        store, sw = random_window(rng, steps=8, max_delay=4)
        config = SelectionConfig(max_delay=4, cross_form="propagated")
        for c in enumerate_candidates(sw, store, config, SENSORS):
            members = combo_members(c.combo, SENSORS)
            assert c.utility == pytest.approx(combo_utility(sw, c.step, members, "propagated"))

    def test_enumeration_covers_all_candidates(self):
        rng = np.random.default_rng(4)
        store, sw = random_window(rng, steps=8, max_delay=4)
        config = SelectionConfig(max_delay=4)
        candidates = enumerate_candidates(sw, store, config, SENSORS)
        assert len(candidates) == len(store.measurable_steps()) * 7
        assert {c.step for c in candidates} == set(store.measurable_steps())
        assert all(c.utility >= 0 for c in candidates)
        for c in candidates:
            assert c.utility == pytest.approx(combo_utility(sw, c.step, combo_members(c.combo, SENSORS)))


class TestCalcGamma:

    def test_hand_example(self):
        candidates = [
            CandidateUtility(1, 1, 5.0, 0.3),
            CandidateUtility(1, 2, 3.0, 0.2),
            CandidateUtility(2, 1, 1.0, 0.4),
        ]
        gamma, admitted = calc_gamma(candidates, 0.6)
        assert gamma == 3.0
        assert [c.utility for c in admitted] == [5.0, 3.0]

    def test_everything_fits(self):
        candidates = [CandidateUtility(1, c, float(c), 0.1) for c in range(1, 4)]
        gamma, admitted = calc_gamma(candidates, 10.0)
        assert gamma == 1.0
        assert len(admitted) == 3

    def test_zero_budget_admits_nothing(self):
        candidates = [CandidateUtility(1, c, float(c), 0.1) for c in range(1, 4)]
        gamma, admitted = calc_gamma(candidates, 0.0)
        assert gamma == math.inf
        assert admitted == []

    def test_no_candidates(self):
        assert calc_gamma([], 0.6) == (math.inf, [])

    def test_ties_move_together(self):
        candidates = [
            CandidateUtility(1, 1, 2.0, 0.25),
            CandidateUtility(1, 2, 1.0, 0.25),
            CandidateUtility(2, 1, 1.0, 0.25),
        ]
        # admitting one of the tied pair would fit, admitting both does not
        gamma, admitted = calc_gamma(candidates, 0.5)
        assert gamma == 2.0
        assert len(admitted) == 1

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            n = int(rng.integers(1, 21))
            # dyadic probabilities keep the cost sums exact
            candidates = [
                CandidateUtility(
                    step=int(rng.integers(1, 6)),
                    combo=int(rng.integers(1, 8)),
                    utility=float(rng.integers(0, 8)) / 2.0,
                    arrival_prob=float(rng.integers(0, 65)) / 64.0,
                    cost=float(rng.integers(1, 3)),
                )
                for _ in range(n)
            ]
            c_ave = float(rng.integers(0, 512)) / 128.0 + 1.0 / 256.0

            feasible = [
                t for t in sorted({c.diminished for c in candidates})
                if sum(c.arrival_prob * c.cost for c in candidates if c.diminished >= t) <= c_ave
            ]
            expected = feasible[0] if feasible else math.inf

            gamma, admitted = calc_gamma(candidates, c_ave)
            assert gamma == expected
            assert sum(c.arrival_prob * c.cost for c in admitted) <= c_ave
            assert len(admitted) == sum(1 for c in candidates if c.diminished >= gamma)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(6)
        candidates = [
            CandidateUtility(1, i + 1, float(u), float(p))
            for i, (u, p) in enumerate(zip(rng.uniform(0, 5, 12), rng.uniform(0, 0.3, 12)))
        ]
        gamma, _ = calc_gamma(candidates, 0.9)
        scaled = [CandidateUtility(c.step, c.combo, 4.0 * c.utility, c.arrival_prob) for c in candidates]
        scaled_gamma, _ = calc_gamma(scaled, 0.9)
        assert scaled_gamma == pytest.approx(4.0 * gamma)

    def test_cost_divides_utility(self):
        candidates = [
            CandidateUtility(1, 1, 4.0, 0.5, cost=4.0),
            CandidateUtility(1, 2, 2.0, 0.5, cost=1.0),
        ]
        gamma, admitted = calc_gamma(candidates, 1.0)
        assert gamma == 2.0
        assert [c.combo for c in admitted] == [2]


class TestConfig:

    def test_defaults(self):
        config = SelectionConfig()
        assert config.c_ave == 0.6
        assert config.nu == pytest.approx(1 / 40)
        assert isinstance(config.cost_model, UnitCost)

    @pytest.mark.parametrize("kwargs", [
        {"c_ave": -0.1},
        {"nu": 1.5},
        {"p_osm": -0.2},
        {"max_delay": -1},
        {"cross_form": "joint"},
    ])
    def test_invalid_values(self, kwargs):
        with pytest.raises(ConfigError):
            SelectionConfig(**kwargs)

    def test_infinite_budget_allowed(self):
        assert SelectionConfig(c_ave=math.inf).c_ave == math.inf

    def test_cost_models(self):
        assert cost_model_from_dict({"kind": "unit"}).cost(3) == 1.0
        linear = cost_model_from_dict({"kind": "linear", "base": 0.5, "per_sensor": 0.25})
        assert linear.cost(2) == 1.0
        assert linear == LinearCost(0.5, 0.25)
        with pytest.raises(ConfigError):
            cost_model_from_dict({"kind": "quadratic"})
        with pytest.raises(ConfigError):
            LinearCost(0.0, 0.0)

    def test_negative_utility_clamped(self):
        assert CandidateUtility(1, 1, -1e-12, 0.5).utility == 0.0
        with pytest.raises(ValueError):
            CandidateUtility(1, 0, 1.0, 0.5)
