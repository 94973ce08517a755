"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's own machinery: they
enumerate joint outcomes with ``itertools.product`` and recurse on frozensets
with arbitrary (off-grid) outside options.
"""

from __future__ import annotations

import itertools
from fractions import Fraction as F
from functools import lru_cache

import pytest
from hypothesis import strategies as st

from pandora.model import BoxSpec, DiscreteDistribution, Instance, parse_instance, random_instance

EXAMPLE_JSON = (
    '{"boxes":[{"cost":"1/10","values":[["0","1/2"],["2","1/2"]]},'
    '{"cost":"1/2","values":[["0","9/10"],["10","1/10"]]}]}'
)
POINT_JSON = '{"boxes":[{"cost":"2","values":[["10","1"]]}]}'

A, B = 0, 1


@pytest.fixture
def example() -> Instance:
    return parse_instance(EXAMPLE_JSON)


@pytest.fixture
def point() -> Instance:
    return parse_instance(POINT_JSON)


def suite(count: int, n_lo: int = 2, n_hi: int = 5, atoms: int = 3, base: int = 0):
    """Deterministic random instances, cycling the box count."""
    span = n_hi - n_lo + 1
    return [random_instance(n_lo + k % span, atoms, base + k) for k in range(count)]


# ---------------------------------------------------------------------------
# oracles


def oracle_sigma_ok(box: BoxSpec, sigma: F) -> bool:
    lhs = sum((p * max(v - sigma, 0) for v, p in box.dist.atoms), F(0))
    return lhs == box.cost


def oracle_weitz(inst: Instance, boxes, alpha) -> F:
    """E[max(max kappa, alpha)] by enumerating every joint outcome."""
    from pandora.weitzman import reservation_value

    boxes = list(boxes)
    if not boxes:
        return F(alpha)
    caps = [reservation_value(inst.boxes[i]) for i in boxes]
    total = F(0)
    for combo in itertools.product(*(inst.dist(i).atoms for i in boxes)):
        prob = F(1)
        best = F(alpha)
        for (v, p), s in zip(combo, caps):
            prob *= p
            best = max(best, min(v, s))
        total += prob * best
    return total


def oracle_opt(inst: Instance):
    """``OPT(U, alpha)`` by plain recursion; ``alpha`` may be any rational."""

    @lru_cache(maxsize=None)
    def go(U: frozenset, alpha: F) -> F:
        best = alpha
        for i in sorted(U):
            best = max(best, inst.mean(i))
            rest = U - {i}
            val = -inst.cost(i) + sum(
                (p * go(rest, max(alpha, v)) for v, p in inst.dist(i).atoms), F(0)
            )
            best = max(best, val)
        return best

    return lambda mask, alpha: go(frozenset(i for i in range(inst.n) if mask >> i & 1), F(alpha))


def oracle_emax(*dists) -> F:
    total = F(0)
    for combo in itertools.product(*(d.atoms for d in dists)):
        prob = F(1)
        for _, p in combo:
            prob *= p
        total += prob * max(v for v, _ in combo)
    return total


# ---------------------------------------------------------------------------
# hypothesis strategies

small_rat = st.builds(F, st.integers(0, 40), st.integers(1, 8))


@st.composite
def distributions(draw, max_atoms: int = 3, max_value: int = 20):
    k = draw(st.integers(1, max_atoms))
    vals = draw(st.lists(st.integers(0, max_value), min_size=k, max_size=k, unique=True))
    w = draw(st.lists(st.integers(1, 6), min_size=k, max_size=k))
    tot = sum(w)
    return DiscreteDistribution.from_pairs((v, F(x, tot)) for v, x in zip(vals, w))


@st.composite
def boxes(draw, max_atoms: int = 3):
    d = draw(distributions(max_atoms))
    cost = draw(st.builds(F, st.integers(0, 30), st.integers(1, 4)))
    return BoxSpec(d, cost)


@st.composite
def instances(draw, min_n: int = 1, max_n: int = 4, max_atoms: int = 3):
    n = draw(st.integers(min_n, max_n))
    return Instance(tuple(draw(boxes(max_atoms)) for _ in range(n)))
