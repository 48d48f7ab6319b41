r"""The explicit de Finetti box tau and the reduction inequality.

tau is a fixed convex mixture of IID boxes (over a sequential "stick
breaking" measure on single-round tables) whose entries depend only on the
type counts of the strings: how often each input pair j occurs (n_j) and how
often each (input pair, output pair) combination (j,k) occurs (n_{j,k}).
Every permutation-invariant n-round box P satisfies, entrywise,

    P <= (n+1)^{l(m-1)} * tau,     l = |X||Y|,  m = |A||B|,

which is what lets tests on arbitrary permutation-invariant boxes be reduced
to tests on IID boxes at polynomial cost.

All bounds here are computed in exact rational arithmetic: the inequalities
are the whole point, so rounding must not be able to fake a violation.
Floats appear only when exporting tables.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .boxes import Alphabets, EnumerationLimitError, MultiRoundBox


@dataclass(frozen=True)
class TypeCounts:
    """Per input-pair occurrence counts of an n-round index tuple.

    ``n_j[j]`` counts rounds with input pair j; ``n_jk[j][k]`` additionally
    fixes the output pair k.  Flattening is canonical: j = x*y_size + y,
    k = a*b_size + b.
    """

    l: int
    m: int
    n_j: tuple
    n_jk: tuple  # tuple of tuples, shape (l, m)

    def __post_init__(self):
        if len(self.n_j) != self.l or len(self.n_jk) != self.l:
            raise ValueError("count tables must have length l")
        for j in range(self.l):
            row = self.n_jk[j]
            if len(row) != self.m:
                raise ValueError("output count rows must have length m")
            if any(c < 0 for c in row) or self.n_j[j] < 0:
                raise ValueError("counts must be non-negative")
            if sum(row) != self.n_j[j]:
                raise ValueError("output counts must sum to the input count")

    @property
    def n(self) -> int:
        return sum(self.n_j)


def counts_of_strings(xs, ys, out_a, out_b, alphabets: Alphabets) -> TypeCounts:
    """Type counts of explicit round-by-round strings."""
    l = alphabets.x_size * alphabets.y_size
    m = alphabets.a_size * alphabets.b_size
    n_jk = [[0] * m for _ in range(l)]
    for x, y, a, b in zip(xs, ys, out_a, out_b):
        j = x * alphabets.y_size + y
        k = a * alphabets.b_size + b
        n_jk[j][k] += 1
    n_j = tuple(sum(row) for row in n_jk)
    return TypeCounts(l, m, n_j, tuple(tuple(r) for r in n_jk))


def tau_entry_exact(counts: TypeCounts) -> Fraction:
    """Exact entry of the de Finetti box for the given type counts.

    Per input pair j the nested stick-breaking integral telescopes into a
    product over k = 1..m-1: with running remainder r = n_j - sum of the
    earlier output counts, each step contributes 1 / (binom(r, n_jk) * (r+1)).
    """
    value = Fraction(1)
    for j in range(counts.l):
        r = counts.n_j[j]
        for k in range(counts.m - 1):
            value /= math.comb(r, counts.n_jk[j][k]) * (r + 1)
            r -= counts.n_jk[j][k]
    return value


def _multinomial(n: int, parts) -> int:
    out = 1
    rest = n
    for c in parts:
        out *= math.comb(rest, c)
        rest -= c
    return out


def tau_lower_bound(counts: TypeCounts) -> Fraction:
    """Product over j of 1 / (multinomial(n_j; n_jk) * (n_j+1)^(m-1))."""
    value = Fraction(1)
    for j in range(counts.l):
        value /= _multinomial(counts.n_j[j], counts.n_jk[j])
        value /= (counts.n_j[j] + 1) ** (counts.m - 1)
    return value


def perm_upper_bound(counts: TypeCounts) -> Fraction:
    """Entry bound for permutation-invariant boxes: inverse orbit size.

    Permutations fixing the input strings permute rounds within each input
    pair, producing multinomial(n_j; n_jk) distinct output strings of equal
    probability.
    """
    value = Fraction(1)
    for j in range(counts.l):
        value /= _multinomial(counts.n_j[j], counts.n_jk[j])
    return value


def reduction_factor(n: int, l: int, m: int) -> int:
    """(n+1)^(l(m-1)), the polynomial cost of the reduction."""
    if n < 0 or l < 1 or m < 1:
        raise ValueError("need n >= 0, l >= 1, m >= 1")
    return (n + 1) ** (l * (m - 1))


# ---------------------------------------------------------------------------
# full tables


def _string_tuples(base: int, n: int):
    """All length-n strings as tuples, ordered by their little-endian index."""
    out = []
    for idx in range(base**n):
        digs = []
        v = idx
        for _ in range(n):
            digs.append(v % base)
            v //= base
        out.append(tuple(digs))
    return out


def _check_table_size(n: int, alphabets: Alphabets, limit: int = 10**7):
    size = (alphabets.x_size * alphabets.y_size
            * alphabets.a_size * alphabets.b_size) ** n
    if size > limit:
        raise EnumerationLimitError(f"table of {size} entries exceeds limit")


def tau_table_exact(n: int, alphabets: Alphabets) -> np.ndarray:
    """Exact de Finetti table, object array of Fractions, indexed like
    MultiRoundBox.p."""
    _check_table_size(n, alphabets)
    al = alphabets
    xs = _string_tuples(al.x_size, n)
    ys = _string_tuples(al.y_size, n)
    as_ = _string_tuples(al.a_size, n)
    bs = _string_tuples(al.b_size, n)
    table = np.empty((len(xs), len(ys), len(as_), len(bs)), dtype=object)
    cache = {}
    for ix, x in enumerate(xs):
        for iy, y in enumerate(ys):
            for ia, a in enumerate(as_):
                for ib, b in enumerate(bs):
                    c = counts_of_strings(x, y, a, b, al)
                    key = c.n_jk
                    if key not in cache:
                        cache[key] = tau_entry_exact(c)
                    table[ix, iy, ia, ib] = cache[key]
    return table


def tau_box(n: int, alphabets: Alphabets) -> MultiRoundBox:
    """The de Finetti box as a float table."""
    exact = tau_table_exact(n, alphabets)
    table = np.vectorize(float)(exact)
    return MultiRoundBox(n, alphabets, table)


def verify_reduction_exact(table, n: int, alphabets: Alphabets,
                           tau_exact=None) -> Fraction:
    """Max entrywise ratio P/tau for an exact rational table.

    ``table`` is an object array of Fractions shaped like MultiRoundBox.p;
    it must be permutation invariant (not checked here).  The returned ratio
    is exact; the reduction asserts it is at most reduction_factor(n, l, m).
    """
    if tau_exact is None:
        tau_exact = tau_table_exact(n, alphabets)
    best = Fraction(0)
    flat_p = table.reshape(-1)
    flat_t = tau_exact.reshape(-1)
    for p, t in zip(flat_p, flat_t):
        if p == 0:
            continue
        ratio = p / t
        if ratio > best:
            best = ratio
    return best


def verify_reduction(box: MultiRoundBox, tol: float = 1e-9) -> float:
    """Max entrywise ratio P/tau of a permutation-invariant float box."""
    from .boxes import is_permutation_invariant

    if not is_permutation_invariant(box, tol=max(tol, 1e-7)):
        raise ValueError("box is not permutation invariant")
    tau = tau_box(box.n, box.alphabets)
    mask = box.p > 0
    return float(np.max(box.p[mask] / tau.p[mask]))


def partition_feasible(weight: float, element: MultiRoundBox,
                       parent: MultiRoundBox, tol: float = 1e-12) -> bool:
    """True iff weight * element <= parent entrywise (within tol).

    This is the condition for (weight, element) to be one branch of a convex
    decomposition of the parent box, i.e. for the element to be
    post-selectable from a non-signalling extension of the parent.
    """
    if not 0.0 <= weight <= 1.0:
        raise ValueError("weight must be in [0,1]")
    if element.p.shape != parent.p.shape or element.n != parent.n:
        raise ValueError("boxes must share shape")
    return bool(np.all(weight * element.p <= parent.p + tol))


# ---------------------------------------------------------------------------
# exact random permutation-invariant boxes (for reduction checks)


def random_symmetrized_table(n: int, alphabets: Alphabets, rng,
                             denominator: int = 720720) -> np.ndarray:
    """A random permutation-invariant box as an exact Fraction table.

    Draws integer-valued tables (common denominator), normalizes each input
    string exactly, and averages over all n! round permutations.  The result
    is rational, so reduction checks on it are exact.
    """
    _check_table_size(n, alphabets)
    al = alphabets
    shape = (al.x_size**n, al.y_size**n, al.a_size**n, al.b_size**n)
    raw = rng.integers(1, denominator, size=shape)
    sums = raw.sum(axis=(2, 3))
    table = np.empty(shape, dtype=object)
    for ix in range(shape[0]):
        for iy in range(shape[1]):
            s = int(sums[ix, iy])
            block = raw[ix, iy]
            for ia in range(shape[2]):
                for ib in range(shape[3]):
                    table[ix, iy, ia, ib] = Fraction(int(block[ia, ib]), s)
    return symmetrize_exact(table, n, alphabets)


def symmetrize_exact(table: np.ndarray, n: int,
                     alphabets: Alphabets) -> np.ndarray:
    """Exact average of a Fraction table over all n! round permutations."""
    from .boxes import _string_permutation

    al = alphabets
    perms = list(itertools.permutations(range(n)))
    acc = np.zeros(table.shape, dtype=object)
    acc[...] = Fraction(0)
    for perm in perms:
        perm = np.asarray(perm)
        mx = _string_permutation(al.x_size, n, perm)
        my = _string_permutation(al.y_size, n, perm)
        ma = _string_permutation(al.a_size, n, perm)
        mb = _string_permutation(al.b_size, n, perm)
        acc = acc + table[np.ix_(mx, my, ma, mb)]
    k = Fraction(1, len(perms))
    return acc * k


# ---------------------------------------------------------------------------
# integer fast path: bulk exact reduction checks


def random_symmetrized_int_table(n: int, alphabets: Alphabets, rng,
                                 total: int = 1009) -> tuple:
    """Random permutation-invariant box as integer numerators over a common
    denominator.

    Each input-string block is a multinomial(total) draw (so it normalizes
    exactly), then the table is summed over all n! round permutations.
    Returns (numerators, denominator) with denominator = total * n!.
    """
    from .boxes import _string_permutation

    _check_table_size(n, alphabets)
    al = alphabets
    shape = (al.x_size**n, al.y_size**n, al.a_size**n, al.b_size**n)
    outs = shape[2] * shape[3]
    blocks = rng.multinomial(total, np.full(outs, 1.0 / outs),
                             size=shape[0] * shape[1])
    raw = blocks.reshape(shape).astype(np.int64)
    acc = np.zeros(shape, dtype=np.int64)
    count = 0
    for perm in itertools.permutations(range(n)):
        perm = np.asarray(perm)
        mx = _string_permutation(al.x_size, n, perm)
        my = _string_permutation(al.y_size, n, perm)
        ma = _string_permutation(al.a_size, n, perm)
        mb = _string_permutation(al.b_size, n, perm)
        acc += raw[np.ix_(mx, my, ma, mb)]
        count += 1
    return acc, total * count


def reduction_numerator_thresholds(n: int, alphabets: Alphabets, denom: int,
                                   tau_exact=None) -> np.ndarray:
    """Largest integer numerators compatible with the reduction.

    A table P = nums/denom satisfies P <= factor * tau entrywise iff
    nums[i] <= thresholds[i] for all i (floor of the exact rational bound,
    valid because numerators are integers).
    """
    if tau_exact is None:
        tau_exact = tau_table_exact(n, alphabets)
    factor = reduction_factor(n, alphabets.x_size * alphabets.y_size,
                              alphabets.a_size * alphabets.b_size)
    flat = tau_exact.reshape(-1)
    values = [(factor * f.numerator * denom) // f.denominator for f in flat]
    if max(values) > np.iinfo(np.int64).max:
        raise OverflowError("threshold exceeds int64; use the Fraction path")
    return np.array(values, dtype=np.int64).reshape(tau_exact.shape)
