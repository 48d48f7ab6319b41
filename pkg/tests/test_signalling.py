import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from di_toolkit import signalling as sig
from di_toolkit.boxes import ObservedData, l1_distance
from conftest import (BINARY, bob_echoes_x_box, pr_box, random_box,
                      random_classical_box, sample_iid_data, uniform_q)


class TestSigMeasure:
    def test_zero_on_nonsignalling(self, rng):
        q = uniform_q()
        for box in (pr_box(), random_classical_box(rng)):
            for target in sig.all_sig_targets(BINARY):
                assert abs(sig.sig_measure(box, q, target)) <= 1e-12

    def test_bob_echoes_x_value(self):
        target = sig.SigTarget(sig.A_TO_B, x=0, y=0, outcome=0)
        value = sig.sig_measure(bob_echoes_x_box(), uniform_q(), target)
        assert value == pytest.approx(1.0 / 8.0)

    def test_continuity_bound(self, rng):
        q = uniform_q()
        targets = sig.all_sig_targets(BINARY)
        for _ in range(200):
            b1, b2 = random_box(rng), random_box(rng)
            dist = l1_distance(b1, b2, q)
            for target in targets:
                gap = abs(sig.sig_measure(b1, q, target)
                          - sig.sig_measure(b2, q, target))
                assert gap <= 2.0 * dist + 1e-12

    def test_zero_mass_conditioning(self):
        # Bob never outputs 1: targets conditioned on b=1 give 0
        import itertools

        from di_toolkit.boxes import SingleRoundBox

        p = np.zeros((2, 2, 2, 2))
        for x, y, a in itertools.product(range(2), repeat=3):
            p[x, y, a, 0] = 0.5
        box = SingleRoundBox(BINARY, p)
        target = sig.SigTarget(sig.A_TO_B, x=0, y=0, outcome=1)
        assert sig.sig_measure(box, uniform_q(), target) == 0.0


class TestSanov:
    def test_reference_value(self):
        assert sig.sanov_delta(10**4, 0.1, 4) == pytest.approx(1.93e-10,
                                                               rel=0.05)

    def test_trivial_for_small_eps(self):
        assert sig.sanov_delta(100, 1e-9, 4) >= 1.0

    def test_halved_n_matches_use_site(self):
        n, eps, cells = 2000, 0.01, 16
        direct = (n / 2 + 1.0)**(cells - 1) * math.exp(-n * eps**2 / 4)
        assert sig.sanov_delta(n // 2, eps, cells) == pytest.approx(direct)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10**6), st.floats(1e-4, 1.0), st.integers(1, 20))
def test_sanov_delta_monotone_in_eps(n, eps, cells):
    assert sig.sanov_delta(n, eps, cells) >= sig.sanov_delta(n, min(eps * 2,
                                                                    1.0),
                                                             cells)


class TestTestParams:
    def test_zeta_floor(self):
        with pytest.raises(ValueError):
            sig.TestParams(zeta=0.05, eps=0.01, n=100)

    def test_odd_n_rejected(self):
        with pytest.raises(ValueError):
            sig.TestParams(zeta=0.07, eps=0.01, n=101)


class TestSignallingTest:
    def test_missing_pairs_reject(self):
        params = sig.TestParams(zeta=0.07, eps=0.01, n=2)
        data = ObservedData(2, np.zeros(2, int), np.zeros(2, int),
                            np.zeros(2, int), np.zeros(2, int), BINARY)
        target = sig.SigTarget(sig.A_TO_B, 0, 0, 0)
        assert sig.run_signalling_test(data, uniform_q(), params, target) is False

    def test_monte_carlo_reliability(self, rng):
        """Detection on a signalling box and rejection on a non-signalling
        box, each with high probability over 500 trials at n = 2000.

        The formal Sanov-plus-3-sigma envelope is also computed; at these
        sizes it exceeds 1, so the sharp content is the directional check.
        """
        n, trials = 2000, 500
        params = sig.TestParams(zeta=0.06, eps=0.008, n=n)
        target = sig.SigTarget(sig.A_TO_B, 0, 0, 0)
        q = uniform_q()
        cells = 16

        false_pass = 0
        ns_box = random_classical_box(rng)
        for trial in range(trials):
            xs, ys, a, b = sample_iid_data(ns_box, q, n, rng)
            data = ObservedData(n, a, b, xs, ys, BINARY)
            false_pass += sig.run_signalling_test(data, q, params, target)

        false_fail = 0
        sig_box = bob_echoes_x_box()  # Sig = 1/8 >= zeta for this target
        for trial in range(trials):
            xs, ys, a, b = sample_iid_data(sig_box, q, n, rng)
            data = ObservedData(n, a, b, xs, ys, BINARY)
            false_fail += not sig.run_signalling_test(data, q, params, target)

        delta = min(sig.sanov_delta(n // 2, params.eps, cells), 1.0)
        for count in (false_pass, false_fail):
            rate = count / trials
            slack = 3.0 * math.sqrt(max(delta * (1 - delta), 0.25) / trials)
            assert rate <= delta + slack
        assert false_pass / trials <= 0.1
        assert false_fail / trials <= 0.1


class TestGuessing:
    def test_uniform(self):
        assert sig.guessing_value(uniform_q(), 0, 0) == pytest.approx(0.5)

    def test_concentrated(self):
        from di_toolkit.boxes import InputDistribution

        q = InputDistribution(np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert sig.guessing_value(q, 0, 0) == pytest.approx(1.0)

    def test_third(self):
        from di_toolkit.boxes import InputDistribution

        q = InputDistribution(np.array([[1 / 6, 1 / 6], [2 / 6, 2 / 6]]) )
        # Q(x=0|y=0) = (1/6) / (1/6 + 2/6) = 1/3
        assert sig.guessing_value(q, 0, 0) == pytest.approx(1 / 3)

    def test_zero_marginal_rejected(self):
        from di_toolkit.boxes import InputDistribution

        q = InputDistribution(np.array([[0.5, 0.0], [0.5, 0.0]]))
        with pytest.raises(ValueError):
            sig.guessing_value(q, 0, 1)


class TestBoostedGuessing:
    def test_no_failure_term(self):
        assert sig.boosted_guessing_bound(0.5, 0.1, 0.25, 0.0) == \
            pytest.approx(0.1 / 0.25 + 0.5)

    def test_no_signalling_advantage(self):
        assert sig.boosted_guessing_bound(0.5, 0.0, 0.25, 0.04) == \
            pytest.approx((1 - 0.2) * 0.5)

    def test_beats_baseline_when_nu_large_enough(self):
        w_ns, o_by, cdelta = 0.5, 0.25, 1e-4
        root = math.sqrt(cdelta)
        nu_crit = root / (1 - root) * w_ns * o_by
        assert sig.boosted_guessing_bound(w_ns, nu_crit * 1.01, o_by,
                                          cdelta) > w_ns
        assert sig.boosted_guessing_bound(w_ns, nu_crit * 0.99, o_by,
                                          cdelta) < w_ns


class TestThresholdBound:
    def test_precondition_examples(self):
        # CHSH-sized alphabets at eps = 0.01
        assert not sig.threshold_precondition(10**6, 0.01, 2, 2, 2, 2)
        assert sig.threshold_precondition(10**10, 0.01, 2, 2, 2, 2)
        assert not sig.threshold_precondition(2, 0.01, 2, 2, 2, 2)

    def test_bound_formula(self, chsh):
        d = 16
        beta = 0.25
        n = _big_enough_n(beta, d)
        bound = sig.threshold_bound(chsh, n, beta)
        assert bound == pytest.approx(math.exp(-n * beta**2 / (30 * d)**2))

    def test_beta_zero_trivial(self, chsh):
        assert sig.threshold_bound(chsh, 100, 0.0) == 1.0

    def test_bound_at_most_one(self, chsh):
        for beta in (0.1, 0.5, 1.0):
            n = _big_enough_n(beta, 16)
            assert sig.threshold_bound(chsh, n, beta) <= 1.0

    def test_small_n_error_carries_requirement(self, chsh):
        with pytest.raises(sig.ThresholdPreconditionError) as exc:
            sig.threshold_bound(chsh, 100, 0.25)
        required = exc.value.required_n
        eps = 0.25 / 160
        assert sig.threshold_precondition(required, eps, 2, 2, 2, 2)
        assert not sig.threshold_precondition(required // 2, eps, 2, 2, 2, 2)


def _big_enough_n(beta, d):
    eps = beta / (10 * d)
    return sig._minimal_n(eps, 2, 2, 2, 2) + 1


class TestIidThreshold:
    def test_certain_winner(self, chsh):
        exact, _ = sig.iid_threshold_probability(pr_box(), chsh, 50, 0.0)
        assert exact == pytest.approx(1.0)

    def test_classical_optimum_all_wins(self, chsh):
        from conftest import deterministic_box

        box = deterministic_box([0, 0], [0, 0])  # omega = 0.75
        exact, bound = sig.iid_threshold_probability(box, chsh, 10, 0.25)
        assert exact == pytest.approx(0.75**10, rel=1e-9)
        assert bound == pytest.approx(math.exp(-2 * 10 * 0.25**2))

    def test_exact_below_hoeffding_sweep(self, chsh, rng):
        boxes = [pr_box(), random_classical_box(rng),
                 random_classical_box(rng)]
        for box in boxes:
            for n in (10, 100, 1000):
                for beta in (0.01, 0.05, 0.1, 0.2):
                    exact, bound = sig.iid_threshold_probability(
                        box, chsh, n, beta)
                    assert exact <= bound + 1e-12

    def test_binomial_tail_against_bruteforce(self, rng):
        # independent oracle: enumerate outcomes for small n
        import itertools

        for n in (1, 4, 7):
            p = float(rng.uniform(0.2, 0.9))
            for k0 in range(n + 2):
                brute = sum(
                    math.prod(p if o else 1 - p for o in outcome)
                    for outcome in itertools.product((0, 1), repeat=n)
                    if sum(outcome) >= k0)
                assert sig._binomial_upper_tail(n, p, k0) == pytest.approx(
                    brute, abs=1e-12)
