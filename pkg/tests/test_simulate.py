import math

import numpy as np

from di_toolkit import simulate as sim
from di_toolkit.eat import BlockSpec, expected_block_length, round_count_tail


def device(omega=0.81, q=0.05):
    return sim.HonestDevice(omega_exp=omega, q=q)


class TestRunProtocol:
    def test_transcript_invariant(self):
        tr = sim.run_protocol(1000, 0.3, 0.81, 0.02, device(), seed=1)
        assert np.all((tr.w == sim.W_BOT) == (tr.t == 0))
        gen = tr.t == 0
        assert np.all(tr.x[gen] == 0)
        assert np.all(tr.y[gen] == 2)

    def test_perfect_device_never_aborts(self):
        for seed in range(5):
            tr = sim.run_protocol(500, 1.0, 1.0, 0.01, device(omega=1.0),
                                  seed=seed)
            assert not tr.aborted
            assert tr.win_count == 500

    def test_broken_device_always_aborts(self):
        for seed in range(5):
            tr = sim.run_protocol(500, 1.0, 1.0, 0.01, device(omega=0.0),
                                  seed=seed)
            assert tr.aborted
            assert tr.win_count == 0

    def test_win_rate_statistics(self):
        n, gamma, omega = 10**5, 0.2, 0.81
        tr = sim.run_protocol(n, gamma, omega, 0.02, device(omega=omega),
                              seed=5)
        expected = gamma * omega
        sigma = math.sqrt(expected * (1 - expected) / n)
        assert abs(tr.win_count / n - expected) <= 3 * sigma

    def test_generation_disagreement_rate(self):
        n = 10**5
        tr = sim.run_protocol(n, 0.1, 0.81, 0.02, device(q=0.05), seed=9)
        gen = tr.t == 0
        rate = float((tr.a[gen] != tr.b[gen]).mean())
        sigma = math.sqrt(0.05 * 0.95 / gen.sum())
        assert abs(rate - 0.05) <= 3 * sigma

    def test_test_round_chsh_consistency(self):
        # on test rounds, the recorded (a, b, x, y) reproduce the drawn W
        tr = sim.run_protocol(2000, 0.5, 0.81, 0.02, device(), seed=13)
        test = tr.t == 1
        chsh_win = (tr.a[test] ^ tr.b[test]) == (tr.x[test] & tr.y[test])
        assert np.array_equal(chsh_win, tr.w[test] == 1)

    def test_bit_identical_reruns(self):
        a = sim.run_protocol(5000, 0.3, 0.81, 0.02, device(), seed=42)
        b = sim.run_protocol(5000, 0.3, 0.81, 0.02, device(), seed=42)
        for field in ("t", "x", "y", "a", "b", "w"):
            assert np.array_equal(getattr(a, field), getattr(b, field))
        c = sim.run_protocol(5000, 0.3, 0.81, 0.02, device(), seed=43)
        assert any(not np.array_equal(getattr(a, f), getattr(c, f))
                   for f in ("t", "a", "b"))


class TestRunProtocolBlocks:
    def test_smax_one_matches_per_round_shape(self):
        block = BlockSpec(0.4, 1)
        tr = sim.run_protocol_blocks(300, block, 0.81, 0.02, device(), seed=3)
        assert len(tr.t) == 300  # every block is exactly one round

    def test_gamma_one_all_length_one(self):
        block = BlockSpec(1.0, 7)
        tr = sim.run_protocol_blocks(200, block, 0.81, 0.02, device(), seed=4)
        assert len(tr.t) == 200
        assert np.all(tr.t == 1)

    def test_mean_block_length(self):
        block = BlockSpec(0.1, 10)
        m = 5000
        tr = sim.run_protocol_blocks(m, block, 0.81, 0.02, device(), seed=6)
        lengths = sim.block_lengths(tr, block.s_max)
        assert len(lengths) == m
        sbar = expected_block_length(block)
        # block length variance is at most s_max^2 / 4
        assert abs(lengths.mean() - sbar) <= 3 * block.s_max / (2 *
                                                                math.sqrt(m))

    def test_bot_probability(self):
        block = BlockSpec(0.1, 10)
        m = 5000
        tr = sim.run_protocol_blocks(m, block, 0.81, 0.02, device(), seed=8)
        bots = m - np.count_nonzero(tr.t)
        expected = (1 - 0.1)**10
        sigma = math.sqrt(expected * (1 - expected) / m)
        assert abs(bots / m - expected) <= 3 * sigma

    def test_reproducible(self):
        block = BlockSpec(0.2, 5)
        a = sim.run_protocol_blocks(100, block, 0.81, 0.02, device(), seed=1)
        b = sim.run_protocol_blocks(100, block, 0.81, 0.02, device(), seed=1)
        assert np.array_equal(a.t, b.t) and np.array_equal(a.b, b.b)


class TestAbortProbability:
    def test_impossible_to_miss(self):
        cfg = sim.SimulationConfig(n=200, gamma=1.0, omega_exp=0.5,
                                   delta_est=0.6, device=device(omega=0.9))
        freq, _ = sim.estimate_abort_probability(cfg, 50, 3)
        assert freq == 0.0

    def test_hoeffding_envelope(self):
        cfg = sim.SimulationConfig(n=10**4, gamma=0.5, omega_exp=0.81,
                                   delta_est=0.02, device=device(omega=0.81))
        trials = 500
        freq, ci = sim.estimate_abort_probability(cfg, trials, 7)
        bound = math.exp(-2 * cfg.n * cfg.delta_est**2)
        sigma = math.sqrt(max(bound * (1 - bound), 0.25 / trials) / trials)
        assert freq <= bound + 3 * sigma
        assert ci[0] <= freq <= ci[1]

    def test_deterministic(self):
        cfg = sim.SimulationConfig(n=1000, gamma=0.5, omega_exp=0.81,
                                   delta_est=0.005, device=device())
        assert sim.estimate_abort_probability(cfg, 100, 11) == \
            sim.estimate_abort_probability(cfg, 100, 11)


class TestWilson:
    def test_contains_proportion(self):
        lo, hi = sim.wilson_interval(50, 100)
        assert lo < 0.5 < hi

    def test_zero_successes(self):
        lo, hi = sim.wilson_interval(0, 100)
        assert lo == 0.0
        assert hi < 0.05


class TestRoundCountStatistics:
    def test_gamma_one_never_exceeds(self):
        block = BlockSpec(1.0, 3)
        frac = sim.round_count_statistics(100, block, device(), 20, 5,
                                          tail_t=1.0)
        assert frac == 0.0

    def test_tail_bound_holds(self):
        block = BlockSpec(0.05, 20)
        m = 2000
        eps_t = 0.05
        t = round_count_tail(m, block.gamma, eps_t)
        trials = 60
        frac = sim.round_count_statistics(m, block, device(), trials, 17,
                                          tail_t=t)
        sigma = math.sqrt(max(eps_t * (1 - eps_t), 0.25 / trials) / trials)
        assert frac <= eps_t + 3 * sigma

    def test_loose_bound_trivial(self):
        block = BlockSpec(0.5, 2)
        frac = sim.round_count_statistics(200, block, device(), 20, 19,
                                          tail_t=round_count_tail(
                                              200, 0.5, 0.5))
        assert frac <= 1.0
