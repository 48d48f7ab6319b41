r"""Min-tradeoff functions and finite-size entropy rates.

The per-round min-tradeoff function is the CHSH secrecy bound expressed in
the test-statistic variable p(1) (probability of a winning test round),
"cut and glued" to an affine continuation above a cut point so that its
slope stays bounded.  The accumulated-entropy rate mu subtracts a
second-order penalty proportional to (log2(1 + 2*d_O) + slope)/sqrt(n);
mu_opt tunes the cut to balance lost first-order entropy against that
penalty.

The block variant groups rounds into blocks that end at the first test
round or after s_max rounds, which improves how the penalty scales with the
test probability gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .entropy import OMEGA_CLASSICAL, OMEGA_QUANTUM, secrecy_bound, secrecy_bound_slope

# per-round output dimension |AB| with B in {0,1,bot}: log2(1 + 2*6)
LOG2_13 = math.log2(13.0)
# output dimension of B alone, {0,1,bot}: log2(1 + 2*3)
LOG2_7 = math.log2(7.0)

CUT_EDGE_SHRINK = 1e-9
GRID_POINTS = 256
GOLDEN_TOL = 1e-12


@dataclass(frozen=True)
class TradeoffSpec:
    """Test probability and cut point (as a value of p(1))."""

    gamma: float
    p_cut1: float

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0,1]")
        ratio = self.p_cut1 / self.gamma
        if not OMEGA_CLASSICAL < ratio < OMEGA_QUANTUM:
            raise ValueError("p_cut1/gamma must lie strictly inside the "
                             "quantum CHSH regime")


@dataclass(frozen=True)
class EatEpsilons:
    """Smoothing and event-probability epsilons of the accumulation bound."""

    eps_s: float
    eps_e: float

    def __post_init__(self):
        if not (0 < self.eps_s < 1 and 0 < self.eps_e < 1):
            raise ValueError("epsilons must be in (0,1)")


@dataclass(frozen=True)
class BlockSpec:
    """Test probability and maximal block length."""

    gamma: float
    s_max: int

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0,1]")
        if self.s_max < 1:
            raise ValueError("s_max must be >= 1")

    @property
    def test_mass(self) -> float:
        """1 - (1-gamma)^s_max: probability that a block contains a test."""
        return 1.0 - (1.0 - self.gamma) ** self.s_max


def g(p1: float, gamma: float) -> float:
    """Secrecy bound in the test statistic: secrecy_bound(p1/gamma), flat 1
    above the quantum optimum."""
    if not 0 < gamma <= 1:
        raise ValueError("gamma must be in (0,1]")
    ratio = p1 / gamma
    if ratio < OMEGA_CLASSICAL - 1e-12 or ratio > 1.0 + 1e-12:
        raise ValueError(f"p1/gamma = {ratio} outside [3/4, 1]")
    return secrecy_bound(ratio)


def g_slope(p_cut1: float, gamma: float) -> float:
    """d g / d p(1) at the cut; infinite at the upper edge, hence rejected
    there."""
    ratio = p_cut1 / gamma
    if not OMEGA_CLASSICAL < ratio < OMEGA_QUANTUM:
        raise ValueError("cut must lie strictly inside the quantum regime")
    return secrecy_bound_slope(ratio) / gamma


def f_min(p1: float, spec: TradeoffSpec) -> float:
    """The glued min-tradeoff function: g below the cut, its tangent above."""
    ratio = p1 / spec.gamma
    if ratio < OMEGA_CLASSICAL - 1e-12 or ratio > 1.0 + 1e-12:
        raise ValueError(f"p1/gamma = {ratio} outside [3/4, 1]")
    if p1 <= spec.p_cut1:
        return g(p1, spec.gamma)
    a = g_slope(spec.p_cut1, spec.gamma)
    b = g(spec.p_cut1, spec.gamma) - a * spec.p_cut1
    return a * p1 + b


def _second_order(slope: float, eps: EatEpsilons, n: float,
                  log2_do: float = LOG2_13) -> float:
    return (2.0 / math.sqrt(n)) * (log2_do + slope) * math.sqrt(
        1.0 - 2.0 * math.log2(eps.eps_s * eps.eps_e))


def mu(p1: float, spec: TradeoffSpec, eps: EatEpsilons, n: float) -> float:
    """Finite-size entropy rate:
    f_min(p1) - (2/sqrt(n)) (log2(13) + slope(cut)) sqrt(1 - 2 log2(es*ee))."""
    if n <= 0:
        raise ValueError("n must be positive")
    slope = g_slope(spec.p_cut1, spec.gamma)
    return f_min(p1, spec) - _second_order(slope, eps, n)


def _golden_max(fn, lo: float, hi: float, tol: float):
    """Golden-section maximization; ties resolve toward the smaller point."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    x = a if fn(a) >= fn(b) else b
    return x, fn(x)


def _grid_then_golden(fn, lo: float, hi: float):
    """256-point grid scan followed by golden-section refinement around the
    best grid cell; deterministic, ties toward the smaller argument."""
    step = (hi - lo) / (GRID_POINTS - 1)
    best_i, best_v = 0, -math.inf
    for i in range(GRID_POINTS):
        v = fn(lo + i * step)
        if v > best_v + 1e-15:
            best_v, best_i = v, i
    a = lo + max(best_i - 1, 0) * step
    b = lo + min(best_i + 1, GRID_POINTS - 1) * step
    return _golden_max(fn, a, b, GOLDEN_TOL * max(abs(hi), 1.0))


def cut_interval(gamma: float) -> tuple:
    """Open cut interval, shrunk away from the infinite-slope upper edge."""
    lo = gamma * OMEGA_CLASSICAL + CUT_EDGE_SHRINK * gamma
    hi = gamma * OMEGA_QUANTUM - CUT_EDGE_SHRINK * gamma
    return lo, hi


@lru_cache(maxsize=65536)
def mu_opt(omega_exp: float, delta_est: float, gamma: float, n: float,
           eps: EatEpsilons) -> tuple:
    """Maximize mu at p1 = omega_exp*gamma - delta_est over the cut point.

    Returns (value, best_cut).  Pure, hence memoized.
    """
    p1 = omega_exp * gamma - delta_est
    ratio = p1 / gamma
    if not OMEGA_CLASSICAL <= ratio <= 1.0:
        raise ValueError("omega_exp*gamma - delta_est outside the domain")
    lo, hi = cut_interval(gamma)
    if lo >= hi:
        raise ValueError("empty cut interval")

    def objective(cut):
        return mu(p1, TradeoffSpec(gamma, cut), eps, n)

    cut, value = _grid_then_golden(objective, lo, hi)
    return value, cut


def entropy_lower_bound(n: float, mu_opt_value: float) -> float:
    """Total accumulated smooth min-entropy: n * mu_opt."""
    return n * mu_opt_value


def max_entropy_upper(n: float, gamma: float, eps_s: float, eps_ea: float,
                      eps_ec: float) -> float:
    """gamma*n + sqrt(n) * 2 log2(7) * sqrt(1 - 2 log2((eps_s/4)(eps_ea+eps_ec)))

    Upper bound on the smooth max-entropy of Bob's test outputs, used when
    converting accumulated entropy into key length.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    return gamma * n + math.sqrt(n) * 2.0 * LOG2_7 * math.sqrt(
        1.0 - 2.0 * math.log2((eps_s / 4.0) * (eps_ea + eps_ec)))


# ---------------------------------------------------------------------------
# block variant


def expected_block_length(block: BlockSpec) -> float:
    """s_bar = (1 - (1-gamma)^s_max) / gamma."""
    return block.test_mass / block.gamma


@lru_cache(maxsize=None)
def _log2_block_dim(s_max: int) -> float:
    """log2(1 + 2 * 2^s_max * 3^s_max), computed exactly for large s_max."""
    return math.log2(1 + 2 * (2**s_max) * (3**s_max))


def f_min_block(p1_tilde: float, block: BlockSpec, cut: float) -> float:
    """Per-block min-tradeoff function: s_bar times the per-round bound in
    the normalized statistic p~(1) / (1 - (1-gamma)^s_max), glued at ``cut``
    (also on the p~(1) scale)."""
    mass = block.test_mass
    ratio = p1_tilde / mass
    if ratio < OMEGA_CLASSICAL - 1e-12 or ratio > 1.0 + 1e-12:
        raise ValueError(f"normalized statistic {ratio} outside [3/4, 1]")
    cut_ratio = cut / mass
    if not OMEGA_CLASSICAL < cut_ratio < OMEGA_QUANTUM:
        raise ValueError("cut outside the open quantum regime")
    sbar = expected_block_length(block)
    if p1_tilde <= cut:
        return sbar * secrecy_bound(ratio)
    slope = sbar * secrecy_bound_slope(cut_ratio) / mass
    value_at_cut = sbar * secrecy_bound(cut_ratio)
    return value_at_cut + slope * (p1_tilde - cut)


def f_min_block_slope(block: BlockSpec, cut: float) -> float:
    """Max gradient of the glued per-block function: its slope at the cut."""
    mass = block.test_mass
    sbar = expected_block_length(block)
    return sbar * secrecy_bound_slope(cut / mass) / mass


def mu_block(p1_tilde: float, block: BlockSpec, cut: float,
             eps: EatEpsilons, m_blocks: float) -> float:
    """Per-block entropy rate with dimension term log2(1 + 2*2^s*3^s)."""
    if m_blocks <= 0:
        raise ValueError("m_blocks must be positive")
    slope = f_min_block_slope(block, cut)
    return f_min_block(p1_tilde, block, cut) - _second_order(
        slope, eps, m_blocks, log2_do=_log2_block_dim(block.s_max))


@lru_cache(maxsize=65536)
def mu_block_opt(omega_exp: float, delta_est: float, block: BlockSpec,
                 m_blocks: float, eps: EatEpsilons) -> tuple:
    """Maximize mu_block at p~1 = omega_exp * test_mass - delta_est over the
    cut.  Returns (value, best_cut) with the cut on the p~(1) scale.  Pure,
    hence memoized."""
    mass = block.test_mass
    p1 = omega_exp * mass - delta_est
    ratio = p1 / mass
    if not OMEGA_CLASSICAL <= ratio <= 1.0:
        raise ValueError("test statistic outside the domain")
    lo = mass * (OMEGA_CLASSICAL + CUT_EDGE_SHRINK)
    hi = mass * (OMEGA_QUANTUM - CUT_EDGE_SHRINK)

    def objective(cut):
        return mu_block(p1, block, cut, eps, m_blocks)

    cut, value = _grid_then_golden(objective, lo, hi)
    return value, cut


def round_count_tail(m_blocks: float, gamma: float, eps_t: float) -> float:
    """Deviation t with Pr[N >= m*s_bar + t] <= eps_t for the total round
    count N of m blocks: t = sqrt(-m (1-gamma)^2 ln(eps_t) / (2 gamma^2))."""
    if not 0 < eps_t < 1:
        raise ValueError("eps_t must be in (0,1)")
    if gamma >= 1.0:
        return 0.0
    return math.sqrt(-m_blocks * (1.0 - gamma) ** 2 * math.log(eps_t)
                     / (2.0 * gamma * gamma))
