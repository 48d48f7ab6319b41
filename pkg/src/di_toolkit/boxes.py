r"""Bipartite boxes: conditional distributions P(a,b|x,y) and their algebra.

A *box* is the input-output behaviour of an untrusted two-component device,
stored as a dense table P(a,b|x,y).  Multi-round boxes carry the joint
behaviour over n rounds, with input/output strings flattened to single
indices (mixed radix, round 1 least significant).

Index conventions, fixed throughout the package:

* single-round tables are indexed ``p[x][y][a][b]``,
* game predicates are indexed ``win[a][b][x][y]``,
* string flattening is little-endian: round i contributes ``digit * size**(i-1)``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

NORMALIZATION_TOL = 1e-9

# classical_value refuses to enumerate more deterministic strategy pairs
STRATEGY_ENUMERATION_CAP = 10**6

# symmetrize / is_permutation_invariant refuse above this many
# (permutation, table entry) pairs
PERMUTATION_WORK_CAP = 5 * 10**8


class AlphabetMismatchError(ValueError):
    """Two objects with incompatible alphabets were combined."""


class EnumerationLimitError(ValueError):
    """A brute-force enumeration would exceed its configured cap."""


@dataclass(frozen=True)
class Alphabets:
    """Sizes of the output sets (a, b) and input sets (x, y) of a box."""

    a_size: int
    b_size: int
    x_size: int
    y_size: int

    def __post_init__(self):
        for name in ("a_size", "b_size", "x_size", "y_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def num_signalling_constraints(self) -> int:
        """d = |X||Y|(|A|+|B|), one constraint per signalling target."""
        return self.x_size * self.y_size * (self.a_size + self.b_size)


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(arr, dtype=float))
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SingleRoundBox:
    """A conditional distribution P(a,b|x,y) over finite alphabets.

    ``p`` has shape ``(x_size, y_size, a_size, b_size)``.  By default the
    constructor requires entries in [0,1] and per-(x,y) normalization within
    ``tol``; frequency-derived tables (which may be unnormalized) are built
    with ``require_normalized=False``.
    """

    alphabets: Alphabets
    p: np.ndarray
    require_normalized: bool = True
    tol: float = NORMALIZATION_TOL
    renormalize: bool = False

    def __post_init__(self):
        expected = (
            self.alphabets.x_size,
            self.alphabets.y_size,
            self.alphabets.a_size,
            self.alphabets.b_size,
        )
        p = np.asarray(self.p, dtype=float)
        if p.shape != expected:
            raise ValueError(f"table shape {p.shape} != {expected}")
        if np.any(p < -self.tol):
            raise ValueError("negative probability entry")
        p = np.clip(p, 0.0, None)
        if self.require_normalized:
            sums = p.sum(axis=(2, 3))
            if np.any(np.abs(sums - 1.0) > self.tol):
                raise ValueError("per-input normalization violated")
            if np.any(p > 1.0 + self.tol):
                raise ValueError("entry above 1")
            if self.renormalize:
                p = p / sums[:, :, None, None]
        object.__setattr__(self, "p", _frozen(p))

    def is_normalized(self, tol: float = NORMALIZATION_TOL) -> bool:
        return bool(np.all(np.abs(self.p.sum(axis=(2, 3)) - 1.0) <= tol))

    def to_json_dict(self) -> dict:
        al = self.alphabets
        return {
            "a_size": al.a_size,
            "b_size": al.b_size,
            "x_size": al.x_size,
            "y_size": al.y_size,
            "p": self.p.tolist(),
        }

    @staticmethod
    def from_json_dict(d: dict, renormalize: bool = False) -> "SingleRoundBox":
        al = Alphabets(d["a_size"], d["b_size"], d["x_size"], d["y_size"])
        return SingleRoundBox(al, np.array(d["p"], dtype=float), renormalize=renormalize)


@dataclass(frozen=True)
class InputDistribution:
    """A distribution Q(x,y) over the question pairs of a game."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 2:
            raise ValueError("q must be a 2-index table")
        if np.any(q < 0):
            raise ValueError("negative input probability")
        if abs(q.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError("input distribution must sum to 1")
        object.__setattr__(self, "q", _frozen(q))

    @property
    def complete_support(self) -> bool:
        return bool(np.all(self.q > 0))

    @property
    def x_size(self) -> int:
        return self.q.shape[0]

    @property
    def y_size(self) -> int:
        return self.q.shape[1]

    def marginal_y(self) -> np.ndarray:
        return self.q.sum(axis=0)

    def marginal_x(self) -> np.ndarray:
        return self.q.sum(axis=1)

    def x_given_y(self) -> np.ndarray:
        """Q(x|y), defined where Q(y) > 0 (0 elsewhere)."""
        qy = self.marginal_y()
        out = np.zeros_like(self.q)
        nz = qy > 0
        out[:, nz] = self.q[:, nz] / qy[nz]
        return out

    def y_given_x(self) -> np.ndarray:
        qx = self.marginal_x()
        out = np.zeros_like(self.q)
        nz = qx > 0
        out[nz, :] = self.q[nz, :] / qx[nz, None]
        return out


@dataclass(frozen=True)
class Game:
    """A two-player game: question distribution plus winning predicate.

    ``win`` is a boolean table indexed ``[a][b][x][y]``.
    """

    alphabets: Alphabets
    q: InputDistribution
    win: np.ndarray

    def __post_init__(self):
        al = self.alphabets
        w = np.asarray(self.win, dtype=bool)
        expected = (al.a_size, al.b_size, al.x_size, al.y_size)
        if w.shape != expected:
            raise ValueError(f"win table shape {w.shape} != {expected}")
        if self.q.q.shape != (al.x_size, al.y_size):
            raise AlphabetMismatchError("input distribution shape mismatch")
        w = np.ascontiguousarray(w)
        w.flags.writeable = False
        object.__setattr__(self, "win", w)

    def to_json_dict(self) -> dict:
        al = self.alphabets
        return {
            "a_size": al.a_size,
            "b_size": al.b_size,
            "x_size": al.x_size,
            "y_size": al.y_size,
            "q": self.q.q.tolist(),
            "win": self.win.astype(int).tolist(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "Game":
        al = Alphabets(d["a_size"], d["b_size"], d["x_size"], d["y_size"])
        return Game(al, InputDistribution(np.array(d["q"], dtype=float)),
                    np.array(d["win"], dtype=bool))


def load_game(path: str) -> Game:
    with open(path) as fh:
        return Game.from_json_dict(json.load(fh))


def load_box(path: str) -> SingleRoundBox:
    with open(path) as fh:
        return SingleRoundBox.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class MultiRoundBox:
    """An n-round box P(a⃗,b⃗|x⃗,y⃗) with strings flattened to indices.

    ``p`` has shape ``(x_size**n, y_size**n, a_size**n, b_size**n)``; digit i
    of a flattened index (base ``size``, least significant first) is the
    symbol of round i.
    """

    n: int
    alphabets: Alphabets
    p: np.ndarray
    tol: float = NORMALIZATION_TOL

    def __post_init__(self):
        al = self.alphabets
        expected = (al.x_size**self.n, al.y_size**self.n,
                    al.a_size**self.n, al.b_size**self.n)
        p = np.asarray(self.p, dtype=float)
        if p.shape != expected:
            raise ValueError(f"table shape {p.shape} != {expected}")
        if np.any(p < -self.tol):
            raise ValueError("negative probability entry")
        sums = p.sum(axis=(2, 3))
        if np.any(np.abs(sums - 1.0) > self.tol):
            raise ValueError("per-input-string normalization violated")
        object.__setattr__(self, "p", _frozen(np.clip(p, 0.0, None)))

    def as_single_round(self) -> SingleRoundBox:
        """View the n-round box as a single-round box over product alphabets."""
        al = self.alphabets
        prod = Alphabets(al.a_size**self.n, al.b_size**self.n,
                         al.x_size**self.n, al.y_size**self.n)
        return SingleRoundBox(prod, self.p, tol=max(self.tol, 1e-9))

    def to_json_dict(self) -> dict:
        al = self.alphabets
        return {
            "n": self.n,
            "a_size": al.a_size,
            "b_size": al.b_size,
            "x_size": al.x_size,
            "y_size": al.y_size,
            "p": self.p.tolist(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "MultiRoundBox":
        al = Alphabets(d["a_size"], d["b_size"], d["x_size"], d["y_size"])
        return MultiRoundBox(d["n"], al, np.array(d["p"], dtype=float))


@dataclass(frozen=True)
class ObservedData:
    """Raw per-round records (a⃗, b⃗, x⃗, y⃗) of n played rounds."""

    n: int
    a: np.ndarray
    b: np.ndarray
    x: np.ndarray
    y: np.ndarray
    alphabets: Alphabets | None = field(default=None)

    def __post_init__(self):
        arrays = {}
        for name in ("a", "b", "x", "y"):
            v = np.asarray(getattr(self, name), dtype=int)
            if v.shape != (self.n,):
                raise ValueError(f"{name} must have length n={self.n}")
            if np.any(v < 0):
                raise ValueError(f"negative entry in {name}")
            arrays[name] = v
        if self.alphabets is not None:
            al = self.alphabets
            limits = {"a": al.a_size, "b": al.b_size, "x": al.x_size, "y": al.y_size}
            for name, v in arrays.items():
                if np.any(v >= limits[name]):
                    raise ValueError(f"{name} entry out of range")
        for name, v in arrays.items():
            v.flags.writeable = False
            object.__setattr__(self, name, v)


# ---------------------------------------------------------------------------
# single-round operations


def is_nonsignalling(box: SingleRoundBox, tol: float = 1e-9) -> bool:
    """True iff Alice's marginal is independent of y and Bob's of x.

    Checks, entrywise within ``tol``,
    sum_b P(a,b|x,y) == sum_b P(a,b|x,y') and
    sum_a P(a,b|x,y) == sum_a P(a,b|x',y).
    """
    pa = box.p.sum(axis=3)  # (x, y, a)
    pb = box.p.sum(axis=2)  # (x, y, b)
    alice_ok = np.all(np.abs(pa - pa[:, :1, :]) <= tol)
    bob_ok = np.all(np.abs(pb - pb[:1, :, :]) <= tol)
    return bool(alice_ok and bob_ok)


def winning_probability(box: SingleRoundBox, game: Game) -> float:
    """sum_{abxy} Q(x,y) P(a,b|x,y) R(a,b,x,y)."""
    if box.alphabets != game.alphabets:
        raise AlphabetMismatchError("box and game alphabets differ")
    # win is [a][b][x][y]; reorder to [x][y][a][b]
    w = np.transpose(game.win, (2, 3, 0, 1)).astype(float)
    return float(np.einsum("xy,xyab,xyab->", game.q.q, box.p, w))


def chsh_game() -> Game:
    """CHSH: binary questions/answers, uniform inputs, win iff a xor b == x*y."""
    al = Alphabets(2, 2, 2, 2)
    q = InputDistribution(np.full((2, 2), 0.25))
    win = np.zeros((2, 2, 2, 2), dtype=bool)
    for a, b, x, y in itertools.product(range(2), repeat=4):
        win[a, b, x, y] = (a ^ b) == (x * y)
    return Game(al, q, win)


def extended_chsh_game() -> Game:
    """CHSH variant used for key distribution: Bob gains a third input y=2.

    Inputs are uniform over the six pairs.  For x,y in {0,1} the CHSH
    condition applies; (x,y)=(0,2) wins iff a==b; (x,y)=(1,2) always wins.
    """
    al = Alphabets(2, 2, 2, 3)
    q = InputDistribution(np.full((2, 3), 1.0 / 6.0))
    win = np.zeros((2, 2, 2, 3), dtype=bool)
    for a, b, x in itertools.product(range(2), range(2), range(2)):
        for y in range(2):
            win[a, b, x, y] = (a ^ b) == (x * y)
        win[a, b, x, 2] = (a == b) if x == 0 else True
    return Game(al, q, win)


def classical_value(game: Game) -> float:
    """Optimal winning probability over all classical (shared-randomness) boxes.

    Enumerates deterministic strategy pairs f: X -> A, g: Y -> B; shared
    randomness cannot beat the best deterministic pair for a linear
    objective.
    """
    al = game.alphabets
    n_f = al.a_size**al.x_size
    n_g = al.b_size**al.y_size
    if n_f * n_g > STRATEGY_ENUMERATION_CAP:
        raise EnumerationLimitError(
            f"{n_f * n_g} strategy pairs exceed cap {STRATEGY_ENUMERATION_CAP}")
    w = np.transpose(game.win, (2, 3, 0, 1)).astype(float)  # [x][y][a][b]
    qw = game.q.q[:, :, None, None] * w
    best = 0.0
    g_choices = list(itertools.product(range(al.b_size), repeat=al.y_size))
    for f in itertools.product(range(al.a_size), repeat=al.x_size):
        # t[y][b] = sum_x Q(x,y) R(f(x),b,x,y)
        t = np.zeros((al.y_size, al.b_size))
        for x in range(al.x_size):
            t += qw[x, :, f[x], :]
        for g in g_choices:
            val = sum(t[y, g[y]] for y in range(al.y_size))
            if val > best:
                best = val
    return float(best)


def frequency_box(data: ObservedData, q: InputDistribution) -> SingleRoundBox:
    """Single-round box estimated from observed data: freq(a,b,x,y) / Q(x,y).

    Divides by the declared input distribution, not the empirical input
    frequencies, so entries may exceed 1 and per-(x,y) normalization holds
    only when the empirical input frequencies match Q; it is not asserted.
    """
    if not q.complete_support:
        raise ValueError("input distribution must have complete support")
    x_size, y_size = q.x_size, q.y_size
    a_size = int(data.a.max()) + 1 if data.alphabets is None else data.alphabets.a_size
    b_size = int(data.b.max()) + 1 if data.alphabets is None else data.alphabets.b_size
    if data.alphabets is not None:
        if (data.alphabets.x_size, data.alphabets.y_size) != (x_size, y_size):
            raise AlphabetMismatchError("data and q input alphabets differ")
    counts = np.zeros((x_size, y_size, a_size, b_size))
    np.add.at(counts, (data.x, data.y, data.a, data.b), 1.0)
    seen = counts.sum(axis=(2, 3)) > 0
    if not np.all(seen):
        missing = np.argwhere(~seen)
        raise ValueError(f"input pairs missing from data: {missing.tolist()}")
    freq = counts / data.n
    table = freq / q.q[:, :, None, None]
    al = Alphabets(a_size, b_size, x_size, y_size)
    return SingleRoundBox(al, table, require_normalized=False)


def l1_distance(b1: SingleRoundBox, b2: SingleRoundBox,
                q: InputDistribution) -> float:
    """E_{(x,y)~Q} sum_{a,b} |P1(a,b|x,y) - P2(a,b|x,y)|."""
    if b1.alphabets != b2.alphabets:
        raise AlphabetMismatchError("box alphabets differ")
    diff = np.abs(b1.p - b2.p).sum(axis=(2, 3))
    return float(np.sum(q.q * diff))


def threshold_win_fraction(data: ObservedData, game: Game) -> float:
    """Fraction of rounds whose record satisfies the winning predicate."""
    wins = game.win[data.a, data.b, data.x, data.y]
    return float(np.mean(wins))


# ---------------------------------------------------------------------------
# multi-round operations


def _digits(index: int, base: int, n: int) -> tuple:
    out = []
    for _ in range(n):
        out.append(index % base)
        index //= base
    return tuple(out)


def _string_permutation(base: int, n: int, perm: np.ndarray) -> np.ndarray:
    """Index mapping s -> s' with digit i of s' = digit perm^{-1}(i) of s.

    ``perm`` maps positions: round i of the permuted string is round
    perm^{-1}(i) of the original, matching composition of a box with a
    permutation of the rounds.
    """
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    size = base**n
    powers = base ** np.arange(n)
    idx = np.arange(size)
    digs = (idx[:, None] // powers[None, :]) % base
    new = digs[:, inv]
    return (new * powers[None, :]).sum(axis=1)


def permute(box: MultiRoundBox, perm) -> MultiRoundBox:
    """Compose a multi-round box with a permutation of the rounds.

    Entry (a⃗,b⃗|x⃗,y⃗) of the result is the input box's entry at
    (π(a⃗),π(b⃗)|π(x⃗),π(y⃗)).
    """
    perm = np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(box.n)):
        raise ValueError("not a permutation of range(n)")
    al = box.alphabets
    mx = _string_permutation(al.x_size, box.n, perm)
    my = _string_permutation(al.y_size, box.n, perm)
    ma = _string_permutation(al.a_size, box.n, perm)
    mb = _string_permutation(al.b_size, box.n, perm)
    table = box.p[np.ix_(mx, my, ma, mb)]
    return MultiRoundBox(box.n, al, table)


def _check_permutation_work(box: MultiRoundBox):
    if box.n > 6:
        raise EnumerationLimitError("permutation enumeration capped at n=6")
    work = math.factorial(box.n) * box.p.size
    if work > PERMUTATION_WORK_CAP:
        raise EnumerationLimitError(
            f"permutation sweep of {work} entry visits exceeds cap")


def symmetrize(box: MultiRoundBox) -> MultiRoundBox:
    """Average the box over all n! round permutations."""
    _check_permutation_work(box)
    acc = np.zeros_like(box.p)
    count = 0
    for perm in itertools.permutations(range(box.n)):
        acc += permute(box, np.array(perm)).p
        count += 1
    return MultiRoundBox(box.n, box.alphabets, acc / count)


def is_permutation_invariant(box: MultiRoundBox, tol: float = 1e-9) -> bool:
    """True iff the box equals itself composed with every round permutation."""
    _check_permutation_work(box)
    for perm in itertools.permutations(range(box.n)):
        if np.any(np.abs(permute(box, np.array(perm)).p - box.p) > tol):
            return False
    return True


def iid_box(single: SingleRoundBox, n: int) -> MultiRoundBox:
    """Product box: n independent identical copies of a single-round box."""
    if n < 1:
        raise ValueError("n must be >= 1")
    al = single.alphabets
    cell = al.x_size * al.y_size * al.a_size * al.b_size
    if cell**n > 10**8:
        raise EnumerationLimitError("iid table too large")
    table = single.p.copy()
    # identical factors, so which kron operand carries the low digit is
    # immaterial; the result is symmetric under any digit relabeling
    for _ in range(n - 1):
        table = np.kron(table, single.p)
    return MultiRoundBox(n, al, table)
