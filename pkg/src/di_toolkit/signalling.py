r"""Signalling measure, the L1 signalling test, Sanov bound, guessing-game
values, and the non-signalling threshold-theorem bound.

The signalling measure quantifies how much observing one party's output
shifts the posterior over the other party's input relative to the prior; it
vanishes exactly on non-signalling boxes.  The test estimates it from the
second half of observed data and fires when it exceeds zeta - 2*eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boxes import (Alphabets, Game, InputDistribution, ObservedData,
                    SingleRoundBox, frequency_box, winning_probability)

A_TO_B = "AtoB"
B_TO_A = "BtoA"


@dataclass(frozen=True)
class SigTarget:
    """One signalling test target: direction, input pair, receiving output."""

    direction: str
    x: int
    y: int
    outcome: int  # b for AtoB, a for BtoA

    def __post_init__(self):
        if self.direction not in (A_TO_B, B_TO_A):
            raise ValueError("direction must be AtoB or BtoA")
        if min(self.x, self.y, self.outcome) < 0:
            raise ValueError("indices must be non-negative")


@dataclass(frozen=True)
class TestParams:
    """Signalling-test thresholds; requires zeta >= 7*eps > 0 and even n."""

    zeta: float
    eps: float
    n: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.zeta < 7 * self.eps:
            raise ValueError("zeta must be at least 7*eps")
        if self.n % 2 != 0 or self.n < 2:
            raise ValueError("n must be even and >= 2")


def sig_measure(box: SingleRoundBox, q: InputDistribution,
                target: SigTarget) -> float:
    """O_BY(b,y) * [O_{X|BY}(x|b,y) - Q_{X|Y}(x|y)] (mirrored for BtoA).

    O is the joint distribution Q(x,y) * P(a,b|x,y).  Zero-mass
    conditioning O_BY(b,y) = 0 yields 0: the measure is a product with that
    mass.
    """
    if not q.complete_support:
        raise ValueError("q must have complete support")
    joint = q.q[:, :, None, None] * box.p  # (x, y, a, b)
    if target.direction == A_TO_B:
        x, y, b = target.x, target.y, target.outcome
        o_bxy = joint.sum(axis=2)  # (x, y, b)
        o_by = o_bxy.sum(axis=0)  # (y, b)
        mass = o_by[y, b]
        if mass == 0.0:
            return 0.0
        qx_given_y = q.x_given_y()
        return float(o_bxy[x, y, b] - qx_given_y[x, y] * mass)
    x, y, a = target.x, target.y, target.outcome
    o_axy = joint.sum(axis=3)  # (x, y, a)
    o_ax = o_axy.sum(axis=1)  # (x, a)
    mass = o_ax[x, a]
    if mass == 0.0:
        return 0.0
    qy_given_x = q.y_given_x()
    return float(o_axy[x, y, a] - qy_given_x[x, y] * mass)


def all_sig_targets(alphabets: Alphabets) -> list:
    targets = []
    for x in range(alphabets.x_size):
        for y in range(alphabets.y_size):
            for b in range(alphabets.b_size):
                targets.append(SigTarget(A_TO_B, x, y, b))
            for a in range(alphabets.a_size):
                targets.append(SigTarget(B_TO_A, x, y, a))
    return targets


def max_sig(box: SingleRoundBox, q: InputDistribution) -> float:
    return max(sig_measure(box, q, t) for t in all_sig_targets(box.alphabets))


def sanov_delta(n: int, eps: float, cells: int) -> float:
    """(n+1)^(cells-1) * exp(-n*eps^2/2): Sanov bound on the probability
    that the empirical conditional distribution of n samples is more than
    eps away in (input-averaged) L1."""
    if n < 1 or eps <= 0 or cells < 1:
        raise ValueError("need n >= 1, eps > 0, cells >= 1")
    return (n + 1.0) ** (cells - 1) * math.exp(-n * eps * eps / 2.0)


def split_halves(data: ObservedData) -> tuple:
    """First-half / second-half split of observed data (n must be even)."""
    if data.n % 2 != 0:
        raise ValueError("n must be even")
    h = data.n // 2
    first = ObservedData(h, data.a[:h], data.b[:h], data.x[:h], data.y[:h],
                         data.alphabets)
    second = ObservedData(h, data.a[h:], data.b[h:], data.x[h:], data.y[h:],
                          data.alphabets)
    return first, second


def _all_pairs_present(data: ObservedData, q: InputDistribution) -> bool:
    seen = np.zeros((q.x_size, q.y_size), dtype=bool)
    seen[data.x, data.y] = True
    return bool(seen.all())


def run_signalling_test(data: ObservedData, q: InputDistribution,
                        params: TestParams, target: SigTarget) -> bool:
    """True iff the second-half frequency box shows signalling >= zeta-2*eps.

    If any input pair is missing from either half the test rejects by
    definition (the frequency boxes are not defined for all inputs).
    """
    if data.n != params.n:
        raise ValueError("data length does not match test parameters")
    first, second = split_halves(data)
    if not (_all_pairs_present(first, q) and _all_pairs_present(second, q)):
        return False
    freq2 = frequency_box(second, q)
    return sig_measure(freq2, q, target) >= params.zeta - 2 * params.eps


def guessing_value(q: InputDistribution, x: int, y: int) -> float:
    """Optimal non-signalling success probability of guessing Alice's input:
    the prior Q(x|y)."""
    qy = q.marginal_y()[y]
    if qy <= 0:
        raise ValueError("q(y) must be positive")
    return float(q.q[x, y] / qy)


def boosted_guessing_bound(w_ns: float, nu: float, o_by: float,
                           cdelta: float) -> float:
    """(1 - sqrt(cdelta)) * (nu / o_by + w_ns): guessing success achievable
    by selecting a copy where the signalling test fired."""
    for name, v in (("w_ns", w_ns), ("nu", nu), ("cdelta", cdelta)):
        if v < 0:
            raise ValueError(f"{name} must be >= 0")
    if o_by <= 0:
        raise ValueError("o_by must be positive")
    return (1.0 - math.sqrt(cdelta)) * (nu / o_by + w_ns)


def threshold_precondition(n: int, eps: float, a_size: int, b_size: int,
                           x_size: int, y_size: int) -> bool:
    """n / ln(n) > 20 |X||Y||A||B| ln(2/eps) / eps^2."""
    if n < 2 or eps <= 0:
        return False
    lhs = n / math.log(n)
    rhs = 20.0 * a_size * b_size * x_size * y_size * math.log(2.0 / eps) / eps**2
    return lhs > rhs


class ThresholdPreconditionError(ValueError):
    """Raised when n is too small for the threshold bound; carries the
    minimal sufficient n."""

    def __init__(self, required_n: int):
        self.required_n = required_n
        super().__init__(f"threshold bound needs n >= {required_n}")


def _minimal_n(eps: float, a_size, b_size, x_size, y_size) -> int:
    rhs = 20.0 * a_size * b_size * x_size * y_size * math.log(2.0 / eps) / eps**2
    # solve n/ln(n) > rhs by fixed-point iteration on n = rhs*ln(n)
    n = max(rhs * math.log(max(rhs, 3.0)), 4.0)
    for _ in range(100):
        n = rhs * math.log(n) + 1
    n = int(math.ceil(n))
    while not threshold_precondition(n, eps, a_size, b_size, x_size, y_size):
        n = int(n * 1.01) + 1
    return n


def threshold_bound(game: Game, n: int, beta: float) -> float:
    """exp(-n beta^2 / (30 d)^2): probability bound on non-signalling
    players winning a fraction beta above the optimal single-game value in n
    parallel games.

    Valid once n satisfies the repetition precondition at eps = beta/(10 d)
    and every question pair has probability above beta/(10 d).
    """
    if not 0 <= beta <= 1:
        raise ValueError("beta must be in [0,1]")
    al = game.alphabets
    d = al.num_signalling_constraints
    if beta == 0.0:
        return 1.0
    eps = beta / (10.0 * d)
    if float(np.min(game.q.q)) <= eps:
        raise ValueError("question distribution too unbalanced: "
                         f"min entry must exceed {eps}")
    if not threshold_precondition(n, eps, al.a_size, al.b_size,
                                  al.x_size, al.y_size):
        raise ThresholdPreconditionError(
            _minimal_n(eps, al.a_size, al.b_size, al.x_size, al.y_size))
    return math.exp(-n * beta * beta / (30.0 * d) ** 2)


def iid_threshold_probability(single: SingleRoundBox, game: Game, n: int,
                              beta: float, exact_cap: int = 200000) -> tuple:
    """(exact, hoeffding) probabilities that an IID strategy wins at least a
    fraction (omega + beta) of n games, where omega is its own single-game
    winning probability.

    The exact value is the binomial upper tail; the bound is exp(-2 n beta^2).
    """
    if n < 1 or n > exact_cap:
        raise ValueError(f"n must be in [1, {exact_cap}]")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    omega = winning_probability(single, game)
    threshold = (omega + beta) * n
    k0 = math.ceil(threshold - 1e-12)
    exact = _binomial_upper_tail(n, omega, k0)
    return exact, math.exp(-2.0 * n * beta * beta)


def _binomial_upper_tail(n: int, p: float, k0: int) -> float:
    """Pr[Bin(n,p) >= k0], summed from the top in log space for stability."""
    if k0 <= 0:
        return 1.0
    if k0 > n:
        return 0.0
    if p <= 0.0:
        return 0.0 if k0 > 0 else 1.0
    if p >= 1.0:
        return 1.0
    logp, log1p = math.log(p), math.log1p(-p)
    total = 0.0
    for k in range(k0, n + 1):
        total += math.exp(math.lgamma(n + 1) - math.lgamma(k + 1)
                          - math.lgamma(n - k + 1) + k * logp + (n - k) * log1p)
    return min(total, 1.0)
