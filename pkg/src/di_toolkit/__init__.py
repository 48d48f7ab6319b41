"""Device-independent toolkit: non-signalling box algebra, de Finetti
reductions, signalling tests, entropy accumulation rates, and finite-size
DIQKD key lengths."""

__version__ = "0.1.0"

from . import boxes, definetti, eat, entropy, keyrates, nslp, signalling, simulate

__all__ = [
    "boxes",
    "definetti",
    "eat",
    "entropy",
    "keyrates",
    "nslp",
    "signalling",
    "simulate",
]
