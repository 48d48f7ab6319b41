r"""Finite-size device-independent QKD key length and rate curves.

The extractable key length combines the accumulated-entropy lower bound with
the error-correction leakage of the honest implementation and the remaining
finite-size corrections:

    l = n * mu_opt(eps_s/4, eps_ea + eps_ec)
        - leak_ec
        - 3 log2(1 - sqrt(1 - (eps_s/4)^2))
        - gamma n
        - sqrt(n) 2 log2(7) sqrt(1 - 2 log2(eps_s/4 (eps_ea + eps_ec)))
        - 2 log2(1/eps_pa).

The block mode replaces the per-round accumulation with the block variant
(better scaling in the test probability gamma), works with the expected
round count n_bar, and charges a tail correction t for the random total
round count.

Negative key lengths are reported as-is so that the zero crossings of rate
curves can be located; callers clamp for presentation.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

from . import eat
from .eat import BlockSpec, EatEpsilons
from .entropy import OMEGA_CLASSICAL, OMEGA_QUANTUM, binary_entropy

LOG2_2SQRT2_PLUS_1 = math.log2(2.0 * math.sqrt(2.0) + 1.0)

PER_ROUND = "per-round"
BLOCK = "block"


@dataclass(frozen=True)
class ProtocolParams:
    """Rounds (expected rounds in block mode), test probability, expected
    winning probability, estimation confidence width, and QBER."""

    n: float
    gamma: float
    omega_exp: float
    delta_est: float
    q: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0,1]")
        if not 0 < self.delta_est < 1:
            raise ValueError("delta_est must be in (0,1)")
        if not OMEGA_CLASSICAL <= self.omega_exp <= OMEGA_QUANTUM + 1e-12:
            raise ValueError("omega_exp must lie in the quantum CHSH regime")
        if not 0 <= self.q <= 0.5:
            raise ValueError("q must be in [0, 1/2]")


@dataclass(frozen=True)
class EpsilonBudget:
    """Error terms of the protocol; eps_t only matters in block mode."""

    eps_ec: float
    eps_ec_complete: float
    eps_s: float
    eps_ea: float
    eps_pa: float
    eps_t: float = 0.0

    def __post_init__(self):
        for name in ("eps_ec", "eps_ec_complete", "eps_s", "eps_ea", "eps_pa"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must be in (0,1)")
        if self.eps_ec_complete <= self.eps_ec:
            raise ValueError("eps_ec_complete must exceed eps_ec")

    @property
    def eps_ec_prime(self) -> float:
        return self.eps_ec_complete - self.eps_ec

    @property
    def soundness_error(self) -> float:
        return 2.0 * self.eps_ec + self.eps_pa + self.eps_s + self.eps_ea


@dataclass(frozen=True)
class RateReport:
    """Key length with its full term breakdown and the error accounting."""

    key_length: float
    rate: float
    entropy_term: float
    leak_ec: float
    log_correction: float
    max_entropy_term: float
    pa_term: float
    soundness_error: float
    completeness_error: float
    best_cut: float
    params: ProtocolParams
    budget: EpsilonBudget
    mode: str = PER_ROUND
    s_max: int = 1
    extras: dict = field(default_factory=dict)

    def breakdown_sum(self) -> float:
        return (self.entropy_term - self.leak_ec - self.log_correction
                - self.max_entropy_term - self.pa_term)

    def to_json_dict(self) -> dict:
        return {
            "key_length": self.key_length,
            "rate": self.rate,
            "entropy_term": self.entropy_term,
            "leak_ec": self.leak_ec,
            "log_correction": self.log_correction,
            "max_entropy_term": self.max_entropy_term,
            "pa_term": self.pa_term,
            "soundness_error": self.soundness_error,
            "completeness_error": self.completeness_error,
            "best_cut": self.best_cut,
            "mode": self.mode,
            "s_max": self.s_max,
            "n": self.params.n,
            "gamma": self.params.gamma,
            "omega_exp": self.params.omega_exp,
            "delta_est": self.params.delta_est,
            "qber": self.params.q,
            "eps": {
                "eps_ec": self.budget.eps_ec,
                "eps_ec_complete": self.budget.eps_ec_complete,
                "eps_s": self.budget.eps_s,
                "eps_ea": self.budget.eps_ea,
                "eps_pa": self.budget.eps_pa,
                "eps_t": self.budget.eps_t,
            },
        }


def honest_werner(nu: float) -> tuple:
    """Expected winning probability and QBER of the depolarized singlet:
    omega = (2 + sqrt(2)(1-nu))/4, Q = nu/2."""
    if not 0 <= nu <= 1:
        raise ValueError("nu must be in [0,1]")
    return (2.0 + math.sqrt(2.0) * (1.0 - nu)) / 4.0, nu / 2.0


def leak_ec(n_eff: float, params: ProtocolParams, eps_ec_prime: float,
            eps_ec: float, eps_t: float = 0.0) -> float:
    """Error-correction leakage of the honest IID implementation.

    First order n_eff * [(1-gamma) h(Q) + gamma h(omega_exp)]; the sqrt
    term's smoothing parameter is shifted to eps_ec_prime - 2*sqrt(eps_t)
    when the round count is itself random (block mode).
    """
    if not 0 < eps_ec_prime < 1:
        raise ValueError("eps_ec_prime must be in (0,1)")
    eps_sqrt_term = eps_ec_prime - 2.0 * math.sqrt(eps_t)
    if eps_sqrt_term <= 0:
        raise ValueError("eps_t too large: eps_ec_prime - 2 sqrt(eps_t) <= 0")
    first = n_eff * ((1.0 - params.gamma) * binary_entropy(params.q)
                     + params.gamma * binary_entropy(params.omega_exp))
    second = math.sqrt(n_eff) * 4.0 * LOG2_2SQRT2_PLUS_1 * math.sqrt(
        2.0 * math.log2(8.0 / eps_sqrt_term**2))
    third = math.log2(8.0 / eps_ec_prime**2 + 2.0 / (2.0 - eps_ec_prime))
    return first + second + third + math.log2(1.0 / eps_ec)


def completeness_error(params: ProtocolParams, budget: EpsilonBudget) -> float:
    """eps_ec_complete + eps_ec + exp(-2 n delta_est^2), with n the (expected)
    round count of the protocol."""
    return (budget.eps_ec_complete + budget.eps_ec
            + math.exp(-2.0 * params.n * params.delta_est**2))


def _log_correction(eps_s: float) -> float:
    return 3.0 * math.log2(1.0 - math.sqrt(1.0 - (eps_s / 4.0) ** 2))


def key_length(params: ProtocolParams, budget: EpsilonBudget) -> RateReport:
    """Per-round-mode key length for a fixed round count n."""
    eps = EatEpsilons(budget.eps_s / 4.0, budget.eps_ea + budget.eps_ec)
    mu_value, cut = eat.mu_opt(params.omega_exp, params.delta_est,
                               params.gamma, params.n, eps)
    entropy_term = params.n * mu_value
    leak = leak_ec(params.n, params, budget.eps_ec_prime, budget.eps_ec)
    log_corr = _log_correction(budget.eps_s)
    max_ent = eat.max_entropy_upper(params.n, params.gamma, budget.eps_s,
                                    budget.eps_ea, budget.eps_ec)
    pa = 2.0 * math.log2(1.0 / budget.eps_pa)
    ell = entropy_term - leak - log_corr - max_ent - pa
    return RateReport(
        key_length=ell, rate=ell / params.n, entropy_term=entropy_term,
        leak_ec=leak, log_correction=log_corr, max_entropy_term=max_ent,
        pa_term=pa, soundness_error=budget.soundness_error,
        completeness_error=completeness_error(params, budget),
        best_cut=cut, params=params, budget=budget, mode=PER_ROUND)


def key_length_block(params: ProtocolParams, budget: EpsilonBudget,
                     s_max: int) -> RateReport:
    """Block-mode key length for an expected round count n_bar = params.n.

    Uses m = n_bar / s_bar blocks, the block entropy rate, and the round
    count tail t: n_bar + t effective rounds enter the leakage and
    max-entropy terms, whose smoothing parameters shift by sqrt(eps_t).
    """
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    if math.sqrt(budget.eps_t) >= budget.eps_s / 4.0:
        raise ValueError("eps_t too large: sqrt(eps_t) >= eps_s/4")
    eps_s_shifted = budget.eps_s / 4.0 - math.sqrt(budget.eps_t)
    eps = EatEpsilons(budget.eps_s / 4.0, budget.eps_ea + budget.eps_ec)
    if s_max == 1:
        # one-round blocks: deterministic length, no tail; share the
        # per-round mu path so the reduction to key_length is exact
        sbar, m, t = 1.0, params.n, 0.0
        mu_value, cut = eat.mu_opt(params.omega_exp, params.delta_est,
                                   params.gamma, m, eps)
    else:
        block = BlockSpec(params.gamma, s_max)
        sbar = eat.expected_block_length(block)
        m = params.n / sbar
        t = eat.round_count_tail(m, params.gamma, budget.eps_t)
        mu_value, cut = eat.mu_block_opt(params.omega_exp, params.delta_est,
                                         block, m, eps)
    entropy_term = m * mu_value
    n_eff = params.n + t
    leak = leak_ec(n_eff, params, budget.eps_ec_prime, budget.eps_ec,
                   eps_t=budget.eps_t if s_max > 1 else 0.0)
    log_corr = _log_correction(budget.eps_s)
    max_ent = (params.gamma * n_eff
               + math.sqrt(n_eff) * 2.0 * eat.LOG2_7 * math.sqrt(
                   1.0 - 2.0 * math.log2(
                       eps_s_shifted * (budget.eps_ea + budget.eps_ec))))
    pa = 2.0 * math.log2(1.0 / budget.eps_pa)
    ell = entropy_term - leak - log_corr - max_ent - pa
    return RateReport(
        key_length=ell, rate=ell / params.n, entropy_term=entropy_term,
        leak_ec=leak, log_correction=log_corr, max_entropy_term=max_ent,
        pa_term=pa, soundness_error=budget.soundness_error,
        completeness_error=completeness_error(params, budget),
        best_cut=cut, params=params, budget=budget, mode=BLOCK, s_max=s_max,
        extras={"m_blocks": m, "tail_t": t, "s_bar": sbar})


# ---------------------------------------------------------------------------
# optimization over the free protocol parameters


@dataclass(frozen=True)
class RateTarget:
    """What to reproduce: round count (expected, in block mode) and QBER."""

    n: float
    q: float


@dataclass(frozen=True)
class RateCaps:
    """Fixed error-term caps under which the rate is optimized."""

    soundness: float
    completeness: float
    eps_ec: float

    def __post_init__(self):
        if self.soundness <= 2.0 * self.eps_ec:
            raise ValueError("soundness cap must exceed 2*eps_ec")
        if self.completeness <= self.eps_ec:
            raise ValueError("completeness cap must exceed eps_ec")


def _log_grid(lo: float, hi: float, per_decade: int) -> list:
    decades = math.log10(hi / lo)
    count = max(int(round(decades * per_decade)) + 1, 2)
    step = decades / (count - 1)
    return [lo * 10.0 ** (i * step) for i in range(count)]

GAMMA_GRID_PER_DECADE = 8
DELTA_GRID_PER_DECADE = 8
SPLIT_GRID_PER_DECADE = 3
EPS_T_CANDIDATE_DECADES = 14


def _budget_for(caps: RateCaps, params: ProtocolParams,
                shares: tuple, eps_t: float) -> EpsilonBudget | None:
    """Assemble a budget meeting both caps, or None if infeasible.

    The soundness budget S - 2 eps_ec is divided among (eps_s, eps_ea,
    eps_pa) according to ``shares``; the completeness slack left after the
    estimation Hoeffding term goes to eps_ec_complete (larger is better: it
    lowers the leakage).
    """
    s_free = caps.soundness - 2.0 * caps.eps_ec
    w = sum(shares)
    eps_s = s_free * shares[0] / w
    eps_ea = s_free * shares[1] / w
    eps_pa = s_free * shares[2] / w
    hoeffding = math.exp(-2.0 * params.n * params.delta_est**2)
    eps_ec_complete = caps.completeness - caps.eps_ec - hoeffding
    if eps_ec_complete <= caps.eps_ec:
        return None
    try:
        return EpsilonBudget(eps_ec=caps.eps_ec,
                             eps_ec_complete=min(eps_ec_complete, 1.0 - 1e-12),
                             eps_s=eps_s, eps_ea=eps_ea, eps_pa=eps_pa,
                             eps_t=eps_t)
    except ValueError:
        return None


def _eval_point(target: RateTarget, caps: RateCaps, mode: str, gamma: float,
                delta_est: float, shares: tuple) -> RateReport | None:
    """Best report at fixed (gamma, delta_est, shares); block mode sweeps
    eps_t."""
    omega_exp, _ = honest_werner(2.0 * target.q)
    try:
        params = ProtocolParams(target.n, gamma, omega_exp, delta_est, target.q)
    except ValueError:
        return None
    if mode == PER_ROUND:
        budget = _budget_for(caps, params, shares, 0.0)
        if budget is None:
            return None
        try:
            return key_length(params, budget)
        except ValueError:
            return None
    # guard the ceiling against float noise (1/0.1 = 10.000000000000002)
    s_max = max(int(math.ceil(1.0 / gamma - 1e-9)), 1)
    base = _budget_for(caps, params, shares, 0.0)
    if base is None:
        return None
    best = None
    cap_t = (base.eps_s / 4.0) ** 2
    candidates = [cap_t * 10.0 ** (-k) for k in range(1, EPS_T_CANDIDATE_DECADES)]
    for eps_t in candidates:
        budget = replace(base, eps_t=eps_t)
        try:
            report = key_length_block(params, budget, s_max)
        except ValueError:
            continue
        if best is None or report.key_length > best.key_length:
            best = report
    return best


_DEFAULT_SHARES = (1.0, 1.0, 1.0)


def _share_grid() -> list:
    """Candidate (eps_s, eps_ea, eps_pa) proportions around the equal split,
    3 log-spaced points per decade over two decades each way."""
    ratios = [10.0 ** (k / SPLIT_GRID_PER_DECADE) for k in range(-6, 7)]
    out = [(1.0, 1.0, 1.0)]
    for rs in ratios:
        for re in ratios:
            out.append((rs, re, 1.0))
    return out


def optimize_rate(target: RateTarget, caps: RateCaps,
                  mode: str = BLOCK) -> RateReport:
    """Deterministic nested search for the best rate under the caps.

    Stage 1 scans log grids over gamma and delta_est at the equal epsilon
    split; stage 2 golden-refines gamma and delta_est; stage 3 refines the
    epsilon split on a log grid and re-refines gamma and delta_est.

    In block mode s_max = ceil(1/gamma) jumps at reciprocal gammas, so the
    gamma refinement runs separately inside each bracket
    [1/s, 1/(s-1)) around the coarse optimum and keeps the best bracket.
    """
    if mode not in (PER_ROUND, BLOCK):
        raise ValueError("mode must be 'per-round' or 'block'")

    def evaluate(gamma, delta, shares):
        r = _eval_point(target, caps, mode, gamma, delta, shares)
        return -math.inf if r is None else r.key_length

    gammas = sorted(set(_log_grid(1e-4, 1.0, GAMMA_GRID_PER_DECADE))
                    | {1.0 / k for k in range(1, 41)})
    deltas = _log_grid(1e-4, 1e-1, DELTA_GRID_PER_DECADE)
    best = (-math.inf, gammas[0], deltas[0])
    for gm in gammas:
        for dl in deltas:
            v = evaluate(gm, dl, _DEFAULT_SHARES)
            if v > best[0]:
                best = (v, gm, dl)
    if not math.isfinite(best[0]):
        raise ValueError("no feasible parameter point under the caps")
    _, gamma0, delta0 = best

    def refine_delta(gamma, delta, shares):
        dlo, dhi = max(delta / 2.4, 1e-7), min(delta * 2.4, 0.5)
        return eat._golden_max(
            lambda d_: evaluate(gamma, d_, shares), dlo, dhi, 1e-4 * delta)[0]

    def gamma_brackets(gamma):
        """Smooth-gamma search intervals around a candidate point."""
        if mode == PER_ROUND:
            return [(max(gamma / 2.4, 1e-6), min(gamma * 2.4, 1.0))]
        s_star = max(int(math.ceil(1.0 / gamma)), 1)
        out = []
        for s in range(max(s_star - 2, 1), s_star + 3):
            lo = 1.0 / s
            hi = 1.0 if s == 1 else min(1.0 / (s - 1) * (1 - 1e-12), 1.0)
            if s == 1:
                out.append((1.0, 1.0))
            elif lo < hi:
                out.append((lo, hi))
        return out

    def refine(gamma, delta, shares):
        for _ in range(2):
            cand = (-math.inf, gamma, delta)
            for glo, ghi in gamma_brackets(gamma):
                if glo == ghi:
                    gm, val = glo, evaluate(glo, delta, shares)
                else:
                    gm, val = eat._golden_max(
                        lambda g_: evaluate(g_, delta, shares), glo, ghi,
                        1e-5 * glo)
                if val > cand[0]:
                    cand = (val, gm, delta)
            gamma = cand[1]
            delta = refine_delta(gamma, delta, shares)
        return gamma, delta

    gamma1, delta1 = refine(gamma0, delta0, _DEFAULT_SHARES)

    best_shares = _DEFAULT_SHARES
    best_v = evaluate(gamma1, delta1, best_shares)
    for shares in _share_grid():
        v = evaluate(gamma1, delta1, shares)
        if v > best_v + 1e-12:
            best_v, best_shares = v, shares
    gamma2, delta2 = refine(gamma1, delta1, best_shares)

    report = _eval_point(target, caps, mode, gamma2, delta2, best_shares)
    if report is None:
        raise ValueError("optimization collapsed to an infeasible point")
    return report


def rate_curve(axis: str, grid: list, fixed: dict, caps: RateCaps,
               mode: str = BLOCK) -> list:
    """Sweep optimize_rate along ``axis`` ('q' or 'n').

    ``fixed`` supplies the non-swept target field.  Grid points run
    independently (optionally in parallel, capped by DI_TOOLKIT_THREADS);
    results are ordered by grid index.
    """
    if axis not in ("q", "n"):
        raise ValueError("axis must be 'q' or 'n'")
    jobs = []
    for value in grid:
        if axis == "q":
            jobs.append(RateTarget(n=fixed["n"], q=value))
        else:
            jobs.append(RateTarget(n=value, q=fixed["q"]))
    threads = int(os.environ.get("DI_TOOLKIT_THREADS", "1"))
    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(_curve_worker,
                                    [(t, caps, mode) for t in jobs]))
    else:
        reports = [optimize_rate(t, caps, mode) for t in jobs]
    return reports


def _curve_worker(job):
    target, caps, mode = job
    return optimize_rate(target, caps, mode)
