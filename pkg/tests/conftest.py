"""Brute-force reference computations shared by the test modules.

These loop over every ordered sample or sign vector in plain Python and
share no code with the library beyond the data they are given.
"""

import itertools
import math

import numpy as np
import pytest


def all_samples(probs, n):
    """Yield (weight, counts) for every ordered sample of size n."""
    m = len(probs)
    for seq in itertools.product(range(m), repeat=n):
        w = math.prod(probs[i] for i in seq)
        counts = [0] * m
        for i in seq:
            counts[i] += 1
        yield w, counts


def brute_xi_explicit(members, probs, n, grid, band=0.05):
    """E sup (Pf - P_n f) over {f : |Pf - r| <= band*r}, empty levels count as 0."""
    members = [list(map(float, f)) for f in members]
    pf = [sum(p * v for p, v in zip(probs, f)) for f in members]
    out = [0.0] * len(grid)
    for w, counts in all_samples(probs, n):
        emp = [sum(c * v for c, v in zip(counts, f)) / n for f in members]
        for j, r in enumerate(grid):
            vals = [pf[i] - emp[i] for i in range(len(members)) if abs(pf[i] - r) <= band * r + 1e-12]
            if vals:
                out[j] += w * max(vals)
    return out


def brute_xi_hull(members, probs, n, grid):
    """E sup over the exact level {a f : a in [0,1], a Pf = r} of the star hull."""
    members = [list(map(float, f)) for f in members]
    pf = [sum(p * v for p, v in zip(probs, f)) for f in members]
    out = [0.0] * len(grid)
    for w, counts in all_samples(probs, n):
        emp = [sum(c * v for c, v in zip(counts, f)) / n for f in members]
        for j, r in enumerate(grid):
            vals = []
            for i in range(len(members)):
                if pf[i] > 0 and pf[i] >= r * (1 - 1e-12):
                    a = r / pf[i]
                    vals.append(a * pf[i] - a * emp[i])
            if vals:
                out[j] += w * max(vals)
    return out


def brute_rademacher(members, points):
    """E_sigma sup_f (1/n) sum sigma_i f(X_i) by looping over all 2^n signs."""
    n = len(points)
    total = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=n):
        total += max(sum(s * f[x] for s, x in zip(signs, points)) / n for f in members)
    return total / 2 ** n


@pytest.fixture
def small_class():
    probs = [0.1, 0.2, 0.3, 0.4]
    members = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.5, 0.5, 0.5, 0.0],
        [0.0, 0.0, 1.0, 0.5],
    ]
    return probs, members
