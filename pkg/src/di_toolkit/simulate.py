r"""Monte Carlo simulation of the entropy-accumulation protocol with an
honest IID device.

The honest device is sampled analytically: test rounds win independently
with probability omega_exp, generation rounds agree except with probability
Q.  These marginals are all the completeness analysis uses, so no state
simulator is needed.

Randomness is a counter-based Philox generator keyed by
(master_seed, trial_index); draws inside a trial happen in a fixed
vectorized order (round tags, inputs, wins, agreements), so transcripts are
bit-identical for identical configuration and seed, and trials can run in
any order or in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eat import BlockSpec

GEN_INPUTS = (0, 2)  # (x, y) used in generation rounds

W_BOT = -1  # encodes the "no test" symbol in integer arrays


@dataclass(frozen=True)
class HonestDevice:
    """Honest IID device marginals: test-round winning probability and QBER."""

    omega_exp: float
    q: float

    def __post_init__(self):
        if not 0 <= self.omega_exp <= 1:
            raise ValueError("omega_exp must be in [0,1]")
        if not 0 <= self.q <= 0.5:
            raise ValueError("q must be in [0, 1/2]")


@dataclass(frozen=True)
class Transcript:
    """Per-round protocol records; W is -1 on generation rounds."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    w: np.ndarray
    aborted: bool
    win_count: int

    def __post_init__(self):
        if np.any((self.w == W_BOT) != (self.t == 0)):
            raise ValueError("W must be bottom exactly on generation rounds")


def _trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    key = np.array([master_seed & 0xFFFFFFFFFFFFFFFF, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def run_protocol(n: int, gamma: float, omega_exp: float, delta_est: float,
                 device: HonestDevice, seed: int, trial: int = 0) -> Transcript:
    """One run of the per-round protocol; aborts iff the number of winning
    test rounds falls below (omega_exp * gamma - delta_est) * n.

    ``omega_exp`` and ``delta_est`` are the protocol's acceptance
    parameters; the device may have a different actual winning probability.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _trial_rng(seed, trial)
    t = (rng.random(n) < gamma).astype(np.int8)
    test = t == 1
    x = np.full(n, GEN_INPUTS[0], dtype=np.int8)
    y = np.full(n, GEN_INPUTS[1], dtype=np.int8)
    x[test] = rng.integers(0, 2, size=int(test.sum()), dtype=np.int8)
    y[test] = rng.integers(0, 2, size=int(test.sum()), dtype=np.int8)
    a = rng.integers(0, 2, size=n, dtype=np.int8)
    wins = rng.random(n) < device.omega_exp
    agree = rng.random(n) >= device.q
    b = np.where(agree, a, 1 - a).astype(np.int8)
    # test rounds: set b so that the CHSH predicate equals the win draw
    chsh_b = (a ^ (x & y)) ^ (~wins).astype(np.int8)
    b[test] = chsh_b[test]
    w = np.where(test, wins.astype(np.int8), np.int8(W_BOT)).astype(np.int8)
    win_count = int((w == 1).sum())
    aborted = win_count < (omega_exp * gamma - delta_est) * n
    return Transcript(t=t, x=x, y=y, a=a, b=b, w=w, aborted=bool(aborted),
                      win_count=win_count)


def run_protocol_blocks(m_blocks: int, block: BlockSpec, omega_exp: float,
                        delta_est: float, device: HonestDevice, seed: int,
                        trial: int = 0) -> Transcript:
    """One run of the block protocol: each block ends at its first test
    round or after s_max rounds; the block result is the last round's game
    outcome, or bottom if no test happened.

    Aborts iff the number of winning blocks falls below
    (omega_exp * (1 - (1-gamma)^s_max) - delta_est) * m_blocks.
    The transcript is per-round; block boundaries follow from t.
    """
    if m_blocks < 1:
        raise ValueError("m_blocks must be >= 1")
    rng = _trial_rng(seed, trial)
    ts, xs, ys, was, wbs, ws = [], [], [], [], [], []
    block_wins = 0
    block_bots = 0
    for _ in range(m_blocks):
        block_result = W_BOT
        for _ in range(block.s_max):
            tested = bool(rng.random() < block.gamma)
            ts.append(1 if tested else 0)
            a = int(rng.integers(0, 2))
            if tested:
                x = int(rng.integers(0, 2))
                y = int(rng.integers(0, 2))
                win = bool(rng.random() < device.omega_exp)
                b = (a ^ (x & y)) ^ (0 if win else 1)
                block_result = 1 if win else 0
                ws.append(block_result)
            else:
                x, y = GEN_INPUTS
                b = a if rng.random() >= device.q else 1 - a
                ws.append(W_BOT)
            xs.append(x)
            ys.append(y)
            was.append(a)
            wbs.append(b)
            if tested:
                break
        if block_result == 1:
            block_wins += 1
        elif block_result == W_BOT:
            block_bots += 1
    aborted = block_wins < (omega_exp * block.test_mass - delta_est) * m_blocks
    return Transcript(t=np.array(ts, dtype=np.int8),
                      x=np.array(xs, dtype=np.int8),
                      y=np.array(ys, dtype=np.int8),
                      a=np.array(was, dtype=np.int8),
                      b=np.array(wbs, dtype=np.int8),
                      w=np.array(ws, dtype=np.int8),
                      aborted=bool(aborted), win_count=block_wins)


def block_lengths(transcript: Transcript, s_max: int) -> np.ndarray:
    """Recover the block lengths from a block-protocol transcript."""
    lengths = []
    run = 0
    for ti in transcript.t:
        run += 1
        if ti == 1 or run == s_max:
            lengths.append(run)
            run = 0
    if run:
        lengths.append(run)
    return np.array(lengths)


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials
                         + z * z / (4 * trials * trials)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


@dataclass(frozen=True)
class SimulationConfig:
    """Per-round protocol configuration for abort-probability estimation."""

    n: int
    gamma: float
    omega_exp: float
    delta_est: float
    device: HonestDevice


def estimate_abort_probability(config: SimulationConfig, trials: int,
                               master_seed: int) -> tuple:
    """(frequency, (lo, hi)) empirical abort probability with a 95% Wilson
    interval; deterministic given the master seed."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    aborts = 0
    for trial in range(trials):
        tr = run_protocol(config.n, config.gamma, config.omega_exp,
                          config.delta_est, config.device, master_seed,
                          trial=trial)
        aborts += tr.aborted
    return aborts / trials, wilson_interval(aborts, trials)


def round_count_statistics(m_blocks: int, block: BlockSpec,
                           device: HonestDevice, trials: int, seed: int,
                           tail_t: float) -> float:
    """Empirical Pr[N >= m*s_bar + tail_t] over full block-protocol runs."""
    from .eat import expected_block_length

    nbar = m_blocks * expected_block_length(block)
    exceed = 0
    for trial in range(trials):
        tr = run_protocol_blocks(m_blocks, block, device.omega_exp, 0.5,
                                 device, seed, trial=trial)
        if len(tr.t) >= nbar + tail_t:
            exceed += 1
    return exceed / trials
