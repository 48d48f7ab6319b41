import itertools

import numpy as np
import pytest

from di_toolkit.boxes import (Alphabets, Game, InputDistribution,
                              SingleRoundBox, chsh_game, extended_chsh_game)

BINARY = Alphabets(2, 2, 2, 2)


def uniform_q(x_size=2, y_size=2):
    return InputDistribution(np.full((x_size, y_size), 1.0 / (x_size * y_size)))


def pr_box():
    """a xor b = x*y with uniform marginals; wins CHSH with certainty."""
    p = np.zeros((2, 2, 2, 2))
    for x, y, a, b in itertools.product(range(2), repeat=4):
        if (a ^ b) == (x & y):
            p[x, y, a, b] = 0.5
    return SingleRoundBox(BINARY, p)


def product_box(pa, pb):
    """P(a|x) * P(b|y) from tables pa[x][a], pb[y][b]."""
    pa, pb = np.asarray(pa), np.asarray(pb)
    p = np.einsum("xa,yb->xyab", pa, pb)
    al = Alphabets(pa.shape[1], pb.shape[1], pa.shape[0], pb.shape[0])
    return SingleRoundBox(al, p)


def deterministic_box(f, g, alphabets=BINARY):
    """a = f(x), b = g(y): the classical deterministic strategies."""
    p = np.zeros((alphabets.x_size, alphabets.y_size,
                  alphabets.a_size, alphabets.b_size))
    for x in range(alphabets.x_size):
        for y in range(alphabets.y_size):
            p[x, y, f[x], g[y]] = 1.0
    return SingleRoundBox(alphabets, p)


def bob_echoes_x_box():
    """b = x, a uniform: signalling from Alice to Bob."""
    p = np.zeros((2, 2, 2, 2))
    for x, y, a in itertools.product(range(2), repeat=3):
        p[x, y, a, x] = 0.5
    return SingleRoundBox(BINARY, p)


def random_box(rng, alphabets=BINARY):
    """Arbitrary (possibly signalling) normalized box."""
    shape = (alphabets.x_size, alphabets.y_size,
             alphabets.a_size, alphabets.b_size)
    raw = rng.random(shape) + 1e-3
    raw /= raw.sum(axis=(2, 3), keepdims=True)
    return SingleRoundBox(alphabets, raw)


def random_classical_box(rng, alphabets=BINARY, strategies=6):
    """Random mixture of deterministic local strategies: non-signalling."""
    p = np.zeros((alphabets.x_size, alphabets.y_size,
                  alphabets.a_size, alphabets.b_size))
    weights = rng.dirichlet(np.ones(strategies))
    for w in weights:
        f = rng.integers(0, alphabets.a_size, size=alphabets.x_size)
        g = rng.integers(0, alphabets.b_size, size=alphabets.y_size)
        p += w * deterministic_box(f, g, alphabets).p
    return SingleRoundBox(alphabets, p)


def random_game(rng, max_inputs=3, max_outputs=2):
    a = int(rng.integers(2, max_outputs + 1))
    b = int(rng.integers(2, max_outputs + 1))
    x = int(rng.integers(2, max_inputs + 1))
    y = int(rng.integers(2, max_inputs + 1))
    al = Alphabets(a, b, x, y)
    q = rng.dirichlet(np.ones(x * y)).reshape(x, y)
    q = 0.9 * q + 0.1 / (x * y)  # keep complete support well away from 0
    win = rng.random((a, b, x, y)) < 0.5
    return Game(al, InputDistribution(q), win)


def sample_iid_data(box, q, n, rng):
    """Draw n rounds of (x, y) ~ q and (a, b) ~ box."""
    al = box.alphabets
    cells = al.x_size * al.y_size
    flat_q = q.q.reshape(-1)
    cell = rng.choice(cells, size=n, p=flat_q)
    xs, ys = cell // al.y_size, cell % al.y_size
    outs = al.a_size * al.b_size
    cdf = box.p.reshape(al.x_size, al.y_size, outs).cumsum(axis=2)
    u = rng.random(n)
    out = np.empty(n, dtype=int)
    for (x, y) in itertools.product(range(al.x_size), range(al.y_size)):
        mask = (xs == x) & (ys == y)
        out[mask] = np.searchsorted(cdf[x, y], u[mask], side="right")
    out = np.clip(out, 0, outs - 1)
    return xs, ys, out // al.b_size, out % al.b_size


@pytest.fixture
def chsh():
    return chsh_game()


@pytest.fixture
def chsh_qkd():
    return extended_chsh_game()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
