import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featprog.errors import CapacityError, ParameterError
from featprog.spin import (SpinGasParams, SpinHistory, build_joint, check_node_conditionals,
                           configurations, endpoint_distribution, load_params, local_field,
                           path_probability, random_params, simulate_panel, spin_conditional,
                           spin_probabilities, step_sample, transition_matrix)


def brute_path_probability(params, start, end, L, prev, prev2):
    """Sum over every intermediate path with explicit per-spin loops."""
    n = params.n
    total = 0.0
    for mids in itertools.product(itertools.product((-1.0, 1.0), repeat=n), repeat=L - 1):
        path = [np.array(m) for m in mids] + [np.asarray(end, float)]
        hist = SpinHistory(np.asarray(start, float), np.asarray(prev, float),
                           np.asarray(prev2, float))
        w = 1.0
        for nxt in path:
            g = local_field(params, hist)
            for i in range(n):
                w *= math.exp(nxt[i] * g[i]) / (2 * math.cosh(g[i]))
            hist = hist.advance(nxt)
        total += w
    return total


class TestParams:
    def test_asymmetric_coupling_rejected(self):
        with pytest.raises(ParameterError):
            SpinGasParams(2, [[0, 1], [0.5, 0]], None, None, None)

    def test_self_coupling_rejected(self):
        with pytest.raises(ParameterError):
            SpinGasParams(2, [[1, 0], [0, 0]], None, None, None)

    def test_flags(self):
        assert SpinGasParams.zeros(3).field_only
        p = random_params(np.random.default_rng(0), 3, gas=False)
        assert p.gas_free and not p.field_only
        assert not random_params(np.random.default_rng(0), 3).gas_free


class TestLocalField:
    def test_explicit_terms(self):
        J = [[0, 0.5], [0.5, 0]]
        p = SpinGasParams(2, J, [0.1, -0.2], np.eye(2), 2 * np.eye(2), c=1.0, dt=1.0)
        hist = SpinHistory(np.array([1.0, -1.0]), np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        # momentum p = s_t - s_prev = (2, 0); previous momentum (-2, -2); acceleration (4, 2)
        want = [0.5 * -1 + 0.1 + 2 + 2 * 4, 0.5 * 1 - 0.2 + 0 + 2 * 2]
        assert local_field(p, hist).tolist() == pytest.approx(want)

    def test_third_order_terms(self):
        rng = np.random.default_rng(3)
        G3 = rng.normal(size=(2, 2, 2))
        p = SpinGasParams(2, None, None, None, None, c=0.5, G1_3=G3)
        hist = SpinHistory(np.array([1.0, 1.0]), np.array([-1.0, 1.0]), np.ones(2))
        mom = [1.0, 0.0]
        want = [sum(G3[i, m, k] * mom[m] * mom[k] for m in range(2) for k in range(2))
                for i in range(2)]
        assert local_field(p, hist).tolist() == pytest.approx(want)

    def test_constant_history_has_no_gas_force(self):
        p = random_params(np.random.default_rng(1), 3)
        s = np.array([1.0, -1.0, 1.0])
        g = local_field(p, SpinHistory(s, s, s))
        assert g == pytest.approx(p.J @ s + p.h)


class TestGlauber:
    @pytest.mark.parametrize("gamma", [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 30.0, -30.0])
    def test_closed_form(self, gamma):
        up, down = spin_probabilities(gamma)
        assert float(up) == pytest.approx(math.exp(gamma) / (2 * math.cosh(gamma)), rel=1e-14)
        assert float(down) == pytest.approx(math.exp(-gamma) / (2 * math.cosh(gamma)), rel=1e-14)

    def test_reference_value(self):
        assert float(spin_probabilities(1.0)[0]) == pytest.approx(0.8807970779778823, abs=1e-15)

    @given(st.floats(-800, 800, allow_nan=False))
    def test_pair_sums_to_one_exactly(self, gamma):
        up, down = spin_probabilities(gamma)
        assert float(up) + float(down) == 1.0

    def test_extreme_fields_do_not_overflow(self):
        up, _ = spin_probabilities(np.array([-1e6, 1e6]))
        assert up.tolist() == [0.0, 1.0]

    def test_conditional_picks_side(self):
        assert spin_conditional([1, -1], [0.3, 0.3]).tolist() == pytest.approx(
            [float(spin_probabilities(0.3)[0]), float(spin_probabilities(0.3)[1])])


class TestSimulate:
    def test_seeded_determinism(self):
        p = random_params(np.random.default_rng(0), 4)
        a = simulate_panel(np.random.default_rng(9), p, np.zeros(4), 50)
        b = simulate_panel(np.random.default_rng(9), p, np.zeros(4), 50)
        assert a.equals(b) and a.length == 51

    def test_zero_increment_is_constant(self):
        p = SpinGasParams.zeros(3, c=0.0)
        panel = simulate_panel(np.random.default_rng(0), p, [1.0, 2.0, 3.0], 20)
        assert np.all(panel.values == np.array([[1.0], [2.0], [3.0]]))

    def test_strong_field_walks_up(self):
        p = SpinGasParams(2, None, [20.0, 20.0], None, None, c=0.5)
        panel = simulate_panel(np.random.default_rng(0), p, [0.0, 1.0], 10)
        assert panel.values[:, -1].tolist() == [5.0, 6.0]
        assert np.all(np.diff(panel.values, axis=1) == 0.5)

    def test_free_spins_have_zero_mean_increment(self):
        # 10 independent spins x 10^4 steps = 10^5 increments of +-1
        p = SpinGasParams.zeros(10, c=1.0)
        panel = simulate_panel(np.random.default_rng(2), p, np.zeros(10), 10_000)
        inc = np.diff(panel.values, axis=1)
        assert abs(inc.mean()) < 4 / math.sqrt(inc.size)

    def test_schedule_switches_field(self):
        up = {"h": np.full(2, 20.0)}
        down = {"h": np.full(2, -20.0)}
        p = SpinGasParams.zeros(2, c=1.0)
        panel = simulate_panel(np.random.default_rng(0), p, [0.0, 0.0], 6, schedule=[up, up, down])
        assert panel.values[0].tolist() == [0, 1, 2, 1, 0, -1, -2]

    def test_bad_x0(self):
        with pytest.raises(ParameterError):
            simulate_panel(np.random.default_rng(0), SpinGasParams.zeros(2), [0.0], 3)


class TestPathIntegral:
    def test_single_step_is_product(self):
        p = random_params(np.random.default_rng(4), 2)
        start, end = np.array([1.0, -1.0]), np.array([-1.0, -1.0])
        g = local_field(p, SpinHistory(start, np.ones(2), np.ones(2)))
        want = np.prod(spin_conditional(end, g))
        assert path_probability(p, start, end, 1) == pytest.approx(want, rel=1e-14)

    def test_free_spin_two_steps(self):
        assert path_probability(SpinGasParams.zeros(1), [1], [-1], 2) == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n, L = 2, 3
        p = random_params(rng, n, scale=0.8, c=0.7)
        start, end = rng.choice([-1.0, 1.0], (2, n))
        prev, prev2 = rng.choice([-1.0, 1.0], (2, n))
        got = path_probability(p, start, end, L, prev, prev2)
        assert got == pytest.approx(brute_path_probability(p, start, end, L, prev, prev2),
                                    rel=1e-12)

    @pytest.mark.parametrize("n, L", [(1, 4), (2, 3), (3, 2), (3, 4)])
    def test_normalized(self, n, L):
        rng = np.random.default_rng(n * 10 + L)
        p = random_params(rng, n, c=0.5)
        dist = endpoint_distribution(p, rng.choice([-1.0, 1.0], n), L,
                                     rng.choice([-1.0, 1.0], n), rng.choice([-1.0, 1.0], n))
        assert abs(dist.sum() - 1) < 1e-12 and np.all(dist >= 0)

    @pytest.mark.parametrize("n, L", [(1, 3), (2, 2), (2, 4), (3, 3)])
    def test_chapman_kolmogorov(self, n, L):
        p = random_params(np.random.default_rng(L), n, gas=False)
        power = np.linalg.matrix_power(transition_matrix(p), L)
        for k, start in enumerate(configurations(n)):
            assert np.abs(power[k] - endpoint_distribution(p, start, L)).max() < 1e-12

    def test_transition_matrix_needs_gas_free(self):
        with pytest.raises(ParameterError):
            transition_matrix(random_params(np.random.default_rng(0), 2))

    def test_capacity(self):
        with pytest.raises(CapacityError):
            endpoint_distribution(SpinGasParams.zeros(3), [1, 1, 1], 8)

    def test_monte_carlo_agrees(self):
        rng = np.random.default_rng(11)
        p = random_params(rng, 2, scale=0.8, c=0.8)
        start = SpinHistory(np.array([1.0, -1.0]), np.array([-1.0, -1.0]), np.ones(2))
        trials, L = 100_000, 2
        counts = np.zeros(4)
        for _ in range(trials):
            hist = start
            for _ in range(L):
                hist = hist.advance(step_sample(rng, p, hist))
            counts[int((hist.sigma_t > 0) @ [1, 2])] += 1
        exact = endpoint_distribution(p, start.sigma_t, L, start.sigma_prev, start.sigma_prev2)
        se = np.sqrt(exact * (1 - exact) / trials)
        assert np.all(np.abs(counts / trials - exact) < 4 * se)


class TestJoint:
    def test_zero_couplings_uniform(self):
        joint = build_joint(SpinGasParams.zeros(2))
        assert joint.log_partition == pytest.approx(4 * math.log(2), abs=1e-14)
        assert np.allclose(joint.table, 1 / 16, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_conditionals(self, seed):
        rng = np.random.default_rng(seed)
        n = 2 + seed % 2
        p = random_params(rng, n, c=0.6)
        joint = build_joint(p, rng.choice([-1.0, 1.0], n), rng.choice([-1.0, 1.0], n))
        report = check_node_conditionals(joint)
        assert report.max_dev_next < 1e-12
        assert report.normalization_error < 1e-12
        assert not report.field_only and report.passed

    def test_field_only_current_slice(self):
        p = SpinGasParams(3, None, [0.3, -1.2, 0.7], None, None)
        report = check_node_conditionals(build_joint(p))
        assert report.field_only and report.max_dev_current < 1e-12

    def test_next_slice_factorizes(self):
        rng = np.random.default_rng(5)
        p = random_params(rng, 2, c=0.9)
        prev, prev2 = np.array([1.0, -1.0]), np.array([-1.0, -1.0])
        joint = build_joint(p, prev, prev2)
        cond = joint.next_given_current()
        for k, cur in enumerate(configurations(2)):
            g = local_field(p, SpinHistory(cur, prev, prev2))
            for m, nxt in enumerate(configurations(2)):
                assert cond[k, m] == pytest.approx(np.prod(spin_conditional(nxt, g)), rel=1e-12)

    def test_marginals_consistent(self):
        p = random_params(np.random.default_rng(8), 3)
        joint = build_joint(p)
        n = p.n
        grid = joint.table.reshape(2 ** n, 2 ** n)    # [next, current]
        current = grid.sum(axis=0)
        # marginal of the current slice must match the pairwise Ising weight exactly
        confs = configurations(n)
        energy = 0.5 * np.einsum("ki,ij,kj->k", confs, p.J, confs) + confs @ p.h
        gamma = np.array([local_field(p, SpinHistory(s, np.ones(n), np.ones(n))) for s in confs])
        weight = np.exp(energy) * np.prod(2 * np.cosh(gamma), axis=1)
        assert current == pytest.approx(weight / weight.sum(), rel=1e-12)

    def test_stats_hold_value_momentum_acceleration(self):
        p = SpinGasParams.zeros(2, c=0.5)
        joint = build_joint(p, prev=[1.0, -1.0], prev2=[1.0, 1.0])
        row = joint.stats[0]            # current slice (-1, -1)
        assert row[:, 0].tolist() == [-1.0, -1.0]
        assert row[:, 1].tolist() == [-1.0, 0.0]
        assert row[:, 2].tolist() == [-1.0, 1.0]

    def test_capacity(self):
        with pytest.raises(CapacityError):
            build_joint(SpinGasParams.zeros(7))


class TestParamsFile:
    def test_full_document(self):
        doc = {"n": 2, "J": [[0, 0.1], [0.1, 0]], "h": [0.2, 0], "c": 0.5, "seed": 4,
               "history": {"current": [1, -1], "prev": [1, 1], "prev2": [-1, 1]},
               "schedule": [{"h": [1, 1]}]}
        cfg = load_params(json.dumps(doc))
        assert cfg.seed == 4 and cfg.params.c == 0.5
        assert cfg.history.sigma_t.tolist() == [1, -1]
        assert cfg.schedule[0]["h"].tolist() == [1, 1]
        assert cfg.params.G1.tolist() == [[0, 0], [0, 0]]

    @pytest.mark.parametrize("text", ['{"J": []}', "[1]", "{not json",
                                      '{"n": 1, "schedule": [{"c": 2}]}',
                                      '{"n": 2, "h": [1]}'])
    def test_rejected(self, text):
        with pytest.raises(ParameterError):
            load_params(text)
