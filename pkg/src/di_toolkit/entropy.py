r"""Scalar entropy functions and single-round entropy bounds for CHSH.

All logarithms are base 2.  The quantum CHSH regime is
omega in [3/4, (2+sqrt(2))/4].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

OMEGA_CLASSICAL = 0.75
OMEGA_QUANTUM = (2.0 + math.sqrt(2.0)) / 4.0

_CLAMP = 1e-12


@dataclass(frozen=True)
class WinningProbability:
    """A CHSH winning probability with its regime predicate."""

    omega: float

    def __post_init__(self):
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError("omega must be in [0,1]")

    @property
    def in_quantum_regime(self) -> bool:
        return OMEGA_CLASSICAL <= self.omega <= OMEGA_QUANTUM


def binary_entropy(p: float) -> float:
    """h(p) = -p log2 p - (1-p) log2(1-p), with h(0) = h(1) = 0."""
    if p < -_CLAMP or p > 1.0 + _CLAMP:
        raise ValueError(f"binary_entropy argument {p} outside [0,1]")
    p = min(max(p, 0.0), 1.0)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def secrecy_bound(omega: float, strict: bool = False) -> float:
    """Lower bound on the adversary-conditioned von Neumann entropy of
    Alice's output, as a function of the CHSH winning probability:

        1 - h(1/2 + 1/2 sqrt(16 w (w-1) + 3)).

    Outside the quantum regime the bound extends flat (0 below the classical
    value, 1 above the quantum optimum) unless ``strict`` is set.
    """
    if omega < OMEGA_CLASSICAL - _CLAMP or omega > OMEGA_QUANTUM + _CLAMP:
        if strict:
            raise ValueError(f"omega {omega} outside the quantum CHSH regime")
        if omega < OMEGA_CLASSICAL:
            return 0.0
        if omega > OMEGA_QUANTUM:
            return 1.0
    omega = min(max(omega, OMEGA_CLASSICAL), OMEGA_QUANTUM)
    radicand = 16.0 * omega * (omega - 1.0) + 3.0
    radicand = max(radicand, 0.0)
    return 1.0 - binary_entropy(0.5 + 0.5 * math.sqrt(radicand))


def secrecy_bound_slope(omega: float) -> float:
    """d/dw of secrecy_bound on the open quantum regime."""
    if not OMEGA_CLASSICAL < omega < OMEGA_QUANTUM:
        raise ValueError("slope defined on the open quantum regime only")
    radicand = 16.0 * omega * (omega - 1.0) + 3.0
    root = math.sqrt(radicand)
    u = 0.5 + 0.5 * root
    # dh/du = log2((1-u)/u); du/dw = 4(2w-1)/root
    return math.log2(u / (1.0 - u)) * 4.0 * (2.0 * omega - 1.0) / root


def bell_diag_bound(omega: float) -> float:
    """Upper bound 2 h(1/2 - (2w-1)/sqrt(2)) - 1 on H(Q_A|Q_B) of any
    Bell-diagonal two-qubit state with CHSH winning probability w."""
    if omega < OMEGA_CLASSICAL - _CLAMP or omega > OMEGA_QUANTUM + _CLAMP:
        raise ValueError(f"omega {omega} outside the quantum CHSH regime")
    omega = min(max(omega, OMEGA_CLASSICAL), OMEGA_QUANTUM)
    arg = 0.5 - (2.0 * omega - 1.0) / math.sqrt(2.0)
    return 2.0 * binary_entropy(arg) - 1.0


def bell_opt_eigenvalues(beta: float) -> tuple:
    """Eigenvalues of the entropy-maximizing Bell-diagonal state at CHSH
    value beta in [2, 2*sqrt(2)], ordered (phi+, psi+, phi-, psi-)."""
    if beta < 2.0 - _CLAMP or beta > 2.0 * math.sqrt(2.0) + _CLAMP:
        raise ValueError(f"beta {beta} outside [2, 2*sqrt(2)]")
    beta = min(max(beta, 2.0), 2.0 * math.sqrt(2.0))
    lo = 0.5 - beta / (4.0 * math.sqrt(2.0))
    hi = 0.5 + beta / (4.0 * math.sqrt(2.0))
    return (lo * lo, hi * hi, lo * hi, lo * hi)


def shannon_entropy(dist) -> float:
    """Base-2 Shannon entropy of a probability vector."""
    total = 0.0
    for p in dist:
        if p < -_CLAMP:
            raise ValueError("negative probability")
        if p > _CLAMP:
            total -= p * math.log2(p)
    return total


def aep_nu(hmax_single: float) -> float:
    """nu = 2 sqrt(2^hmax) + 1, the dimension surrogate in the AEP terms."""
    return 2.0 * math.sqrt(2.0**hmax_single) + 1.0


def aep_delta(eps: float, nu: float) -> float:
    """delta(eps, nu) = 4 log2(nu) sqrt(log2(2/eps^2))."""
    if not 0 < eps < math.sqrt(2.0):
        raise ValueError("eps must be in (0, sqrt(2))")
    return 4.0 * math.log2(nu) * math.sqrt(math.log2(2.0 / (eps * eps)))


@dataclass(frozen=True)
class AepParams:
    """Round count, smoothing parameter, and per-round max-entropy bound."""

    n: int
    eps: float
    hmax_single: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.eps < 1:
            raise ValueError("eps must be in (0,1)")


def aep_min_lower(params: AepParams, h_single: float) -> float:
    """Smooth min-entropy lower bound for n IID copies:
    n*h - sqrt(n)*delta(eps, nu)."""
    return (params.n * h_single
            - math.sqrt(params.n) * aep_delta(params.eps, aep_nu(params.hmax_single)))


def aep_max_upper(params: AepParams, h_single: float) -> float:
    """Smooth max-entropy upper bound for n IID copies:
    n*h + sqrt(n)*delta(eps, nu)."""
    return (params.n * h_single
            + math.sqrt(params.n) * aep_delta(params.eps, aep_nu(params.hmax_single)))


def dw_rate(h_ae: float, h_ab: float) -> float:
    """Asymptotic one-way key rate H(A|E) - H(A|B)."""
    return h_ae - h_ab
