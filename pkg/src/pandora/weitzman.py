"""Reservation values, capped values and the Weitz function.

For a box with prize ``v`` and cost ``c`` the reservation value ``sigma``
solves ``E[(v - sigma)^+] = c``.  The capped value ``kappa = min(v, sigma)``
drives everything else: ``Weitz_U(alpha) = E[max(max_{w in U} kappa_w, alpha)]``
is the optimal utility when every box in ``U`` must be opened before it is
claimed and ``alpha`` is available for free.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .model import (
    STOP,
    Action,
    BoxSpec,
    BudgetExceeded,
    DiscreteDistribution,
    Instance,
    Open,
    State,
    members,
    popcount,
)

__all__ = [
    "ReservationIndex",
    "reservation_value",
    "kappa_distribution",
    "reservation_index",
    "sigmas",
    "max_distribution",
    "max_kappa_distribution",
    "expected_max_with",
    "weitz_value",
    "weitz_inverse",
    "weitzman_action",
    "obligatory_opt",
    "OBLIGATORY_LIMIT",
]

OBLIGATORY_LIMIT = 20


@dataclass(frozen=True)
class ReservationIndex:
    sigma: Fraction
    kappa: DiscreteDistribution


def reservation_value(box: BoxSpec) -> Fraction:
    """Exact root of ``E[(v - s)^+] = c``.

    Walks the atoms from the top: on the segment below the ``k`` largest
    atoms the left-hand side is linear in ``s``.  Zero cost returns the
    maximum support value.
    """
    c = box.cost
    atoms = box.dist.atoms
    if c == 0:
        return atoms[-1][0]
    mass = Fraction(0)
    moment = Fraction(0)
    for k in range(len(atoms) - 1, -1, -1):
        v, p = atoms[k]
        mass += p
        moment += p * v
        s = (moment - c) / mass
        if k == 0 or s >= atoms[k - 1][0]:
            return s
    raise AssertionError("unreachable")


def kappa_distribution(box: BoxSpec, sigma: Fraction | None = None) -> DiscreteDistribution:
    if sigma is None:
        sigma = reservation_value(box)
    return box.dist.map(lambda v: min(v, sigma))


@lru_cache(maxsize=4096)
def reservation_index(box: BoxSpec) -> ReservationIndex:
    s = reservation_value(box)
    return ReservationIndex(s, kappa_distribution(box, s))


def sigmas(inst: Instance) -> tuple[Fraction, ...]:
    return tuple(reservation_index(b).sigma for b in inst.boxes)


def max_distribution(dists: Iterable[DiscreteDistribution]) -> DiscreteDistribution | None:
    """Distribution of the maximum of independent variables, ``None`` if empty.

    Uses ``P(max <= y) = prod F(y)`` on the merged support.
    """
    dists = list(dists)
    if not dists:
        return None
    if len(dists) == 1:
        return dists[0]
    points = sorted({v for d in dists for v in d.values})
    cdfs = []
    for d in dists:
        acc = Fraction(0)
        cdf = {}
        it = iter(d.atoms)
        nxt = next(it, None)
        for y in points:
            while nxt is not None and nxt[0] <= y:
                acc += nxt[1]
                nxt = next(it, None)
            cdf[y] = acc
        cdfs.append(cdf)
    out = []
    prev = Fraction(0)
    for y in points:
        g = Fraction(1)
        for cdf in cdfs:
            g *= cdf[y]
        if g != prev:
            out.append((y, g - prev))
        prev = g
    return DiscreteDistribution(tuple(out))


@lru_cache(maxsize=1 << 14)
def max_kappa_distribution(inst: Instance, mask: int) -> DiscreteDistribution | None:
    return max_distribution(reservation_index(inst.boxes[i]).kappa for i in members(mask))


def expected_max_with(d: DiscreteDistribution | None, alpha: Fraction) -> Fraction:
    """``E[max(X, alpha)]`` for ``X ~ d`` (``alpha`` when ``d`` is None)."""
    if d is None:
        return Fraction(alpha)
    return sum((max(v, alpha) * p for v, p in d.atoms), Fraction(0))


@lru_cache(maxsize=1 << 16)
def weitz_value(inst: Instance, mask: int, alpha: Fraction) -> Fraction:
    return expected_max_with(max_kappa_distribution(inst, mask), alpha)


def weitz_inverse(d: DiscreteDistribution | None, target: Fraction) -> Fraction | None:
    """Largest ``alpha >= 0`` with ``E[max(X, alpha)] <= target``.

    The map is continuous, nondecreasing and piecewise linear with slope
    ``P(X <= alpha)``, so the feasible set is an interval ``[0, tau]``.
    Returns ``None`` when even ``alpha = 0`` overshoots the target.
    """
    if expected_max_with(d, Fraction(0)) > target:
        return None
    if d is None:
        return target
    prev = Fraction(0)
    prev_val = expected_max_with(d, prev)
    below = d.prob_le(prev)
    for y in (v for v in d.values if v > 0):
        val = expected_max_with(d, y)
        if val > target:
            # below > 0 here since the function rises on this segment
            return prev + (target - prev_val) / below
        prev, prev_val = y, val
        below = d.prob_le(y)
    # past the top atom the map is the identity
    return target


def weitzman_action(inst: Instance, s: State) -> Action:
    best = None
    best_sigma = None
    for i in members(s.uninspected):
        sg = reservation_index(inst.boxes[i]).sigma
        if best_sigma is None or sg > best_sigma:
            best, best_sigma = i, sg
    if best is not None and best_sigma > s.outside:
        return Open(best)
    return STOP


def obligatory_opt(inst: Instance, mask: int, alpha: Fraction) -> Fraction:
    """Brute-force optimum when a box must be opened to be claimed."""
    if popcount(mask) > OBLIGATORY_LIMIT:
        raise BudgetExceeded(f"|U| = {popcount(mask)} exceeds {OBLIGATORY_LIMIT}")

    @lru_cache(maxsize=None)
    def go(u: int, a: Fraction) -> Fraction:
        best = a
        for i in members(u):
            b = inst.boxes[i]
            rest = u & ~(1 << i)
            val = -b.cost + sum((p * go(rest, max(a, v)) for v, p in b.dist.atoms), Fraction(0))
            if val > best:
                best = val
        return best

    return go(mask, Fraction(alpha))

