"""Discretized reduction of two-phase search to a stochastic dynamic program.

Fix the reserved box ``i*``.  A policy is then an :class:`IndexThresholdSequence`
and its utility can be written without costs (``eval_TP``).  Rounding capped
values down to a grid of step ``eps^2 * opt`` and prizes up to a small
support ``W`` gives ``eval_DTP``, which is also the value of a dynamic
program whose state is a single number ``V`` (0 while no threshold has been
crossed, otherwise the best rounded value so far).  That program has few
actions per box, so it can be searched exhaustively at desk scale.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

from .committing import best_committing
from .exact import NEG, exceeds, solve
from .model import BudgetExceeded, DiscreteDistribution, Instance, mask_of, members
from .twophase import (
    IndexThresholdSequence,
    TwoPhasePolicy,
    eval_two_phase,
    ordered_subsets,
)
from .weitzman import (
    expected_max_with,
    max_distribution,
    reservation_index,
    sigmas,
    weitz_value,
)

__all__ = [
    "INF",
    "DiscretizationScheme",
    "Bucket",
    "threshold_grid",
    "value_upper",
    "bucket_partition",
    "build_scheme",
    "identity_scheme",
    "scheme_from_support",
    "enumerate_supports",
    "round_kappa",
    "round_value",
    "round_threshold",
    "eval_TP",
    "eval_DTP",
    "StochasticDynamicProgram",
    "build_ST",
    "eval_ST",
    "solve_ST_exhaustive",
    "PtasResult",
    "run_ptas",
    "ptas_pipeline",
    "SUPPORT_BUDGET",
    "ST_LIMIT",
]

INF = math.inf
SUPPORT_BUDGET = 100_000
ST_LIMIT = 12


def _pos(x) -> Fraction:
    return x if x > 0 else Fraction(0)


def _check_eps(epsilon: Fraction) -> None:
    # 1/4 is admitted: it is the coarsest value for which the greedy
    # support construction still makes progress
    if not 0 < epsilon <= Fraction(1, 4):
        raise ValueError(f"epsilon must lie in (0, 1/4], got {epsilon}")


@dataclass(frozen=True)
class Bucket:
    first: int
    last: int
    support: tuple[Fraction, ...] = ()


@dataclass(frozen=True)
class DiscretizationScheme:
    epsilon: Fraction
    opt_ref: Fraction
    threshold_grid: tuple[Fraction, ...]
    value_support: tuple[Fraction, ...]  # finite part, sorted; INF is implicit
    v_upper: Fraction
    unit: Fraction
    buckets: tuple[Bucket, ...] = field(default=(), compare=False)

    @property
    def support_with_inf(self) -> tuple:
        return self.value_support + (INF,)


def threshold_grid(epsilon: Fraction, opt_ref: Fraction) -> tuple[Fraction, ...]:
    step = epsilon * opt_ref
    return tuple(m * step for m in range(math.floor(1 / epsilon) + 1))


@lru_cache(maxsize=1024)
def _expected_max_value(inst: Instance) -> Fraction:
    return max_distribution(b.dist for b in inst.boxes).mean()


def value_upper(inst: Instance, epsilon: Fraction) -> Fraction:
    return _expected_max_value(inst) / epsilon


def round_kappa(x, scheme: DiscretizationScheme) -> Fraction:
    u = scheme.unit
    return math.floor(x / u) * u


def round_value(x, scheme: DiscretizationScheme):
    if x > scheme.v_upper:
        return INF
    w = scheme.value_support
    k = bisect.bisect_left(w, x)
    return w[k] if k < len(w) else INF


def round_threshold(t, scheme: DiscretizationScheme):
    """Largest grid threshold at or below ``t`` (NEG passes through)."""
    if t is NEG:
        return NEG
    grid = scheme.threshold_grid
    k = bisect.bisect_right(grid, t)
    return grid[max(k - 1, 0)]


def _positions(inst: Instance, order: tuple[int, ...]) -> list[int]:
    """Closed-box masks before each step ``1..k`` and after the last."""
    return [inst.full_mask & ~mask_of(order[:r]) for r in range(len(order) + 1)]


def bucket_partition(
    inst: Instance, order: tuple[int, ...], epsilon: Fraction, opt_ref: Fraction
) -> list[tuple[int, int]]:
    """Greedy maximal runs of positions over which expected Weitz drops by at most one unit."""
    unit = epsilon * epsilon * opt_ref
    masks = _positions(inst, order)
    zero = Fraction(0)
    out = []
    f = 0
    while f < len(masks):
        top = weitz_value(inst, masks[f], zero)
        l = f
        while l + 1 < len(masks) and top - weitz_value(inst, masks[l + 1], zero) <= unit:
            l += 1
        out.append((f + 1, l + 1))
        f = l + 1
    return out


def _bucket_support(inst: Instance, mask: int, unit: Fraction, top: Fraction, gap: Fraction):
    def d(m: int) -> Fraction:
        w = m * unit
        return weitz_value(inst, mask, w) - w

    m_hi = math.floor(top / unit)
    pts = [m_hi]
    while m_hi > 0:
        d_hi = d(m_hi)
        lo, hi = 0, m_hi - 1
        # smallest m with d(m) - d(m_hi) <= gap; d is nonincreasing
        while lo < hi:
            mid = (lo + hi) // 2
            if d(mid) - d_hi <= gap:
                hi = mid
            else:
                lo = mid + 1
        m_hi = lo
        pts.append(m_hi)
    return tuple(m * unit for m in reversed(pts))


def build_scheme(
    inst: Instance,
    backup: int,
    ord_hint: IndexThresholdSequence | tuple[int, ...],
    epsilon,
    opt_ref,
) -> DiscretizationScheme:
    epsilon, opt_ref = Fraction(epsilon), Fraction(opt_ref)
    _check_eps(epsilon)
    if opt_ref <= 0:
        raise ValueError("opt_ref must be positive")
    order = ord_hint.order if isinstance(ord_hint, IndexThresholdSequence) else tuple(ord_hint)
    if backup in order:
        raise ValueError("backup box cannot appear in the order")
    unit = epsilon * epsilon * opt_ref
    gap = epsilon * (1 - 3 * epsilon) * opt_ref
    v_upper = value_upper(inst, epsilon)
    masks = _positions(inst, order)
    buckets = []
    values = set(threshold_grid(epsilon, opt_ref))
    for f, l in bucket_partition(inst, order, epsilon, opt_ref):
        sup = _bucket_support(inst, masks[f - 1], unit, v_upper, gap)
        buckets.append(Bucket(f, l, sup))
        values.update(sup)
    return DiscretizationScheme(
        epsilon,
        opt_ref,
        threshold_grid(epsilon, opt_ref),
        tuple(sorted(values)),
        v_upper,
        unit,
        tuple(buckets),
    )


def scheme_from_support(
    inst: Instance, support, epsilon, opt_ref
) -> DiscretizationScheme:
    epsilon, opt_ref = Fraction(epsilon), Fraction(opt_ref)
    return DiscretizationScheme(
        epsilon,
        opt_ref,
        threshold_grid(epsilon, opt_ref),
        tuple(sorted(support)),
        value_upper(inst, epsilon),
        epsilon * epsilon * opt_ref,
    )


def _rational_gcd(xs) -> Fraction:
    xs = [Fraction(x) for x in xs if x != 0]
    if not xs:
        return Fraction(1)
    den = math.lcm(*(x.denominator for x in xs))
    num = math.gcd(*(int(x * den) for x in xs))
    return Fraction(num, den)


def identity_scheme(inst: Instance, epsilon, opt_ref) -> DiscretizationScheme:
    """A scheme under which every rounding step is exact.

    The unit divides every capped value, the support holds every prize and
    the threshold grid holds every prize up to ``opt_ref``, which is all a
    threshold can distinguish.
    """
    epsilon, opt_ref = Fraction(epsilon), Fraction(opt_ref)
    kappas = [v for b in inst.boxes for v in reservation_index(b).kappa.values]
    theta = inst.support
    return DiscretizationScheme(
        epsilon,
        opt_ref,
        tuple(sorted({Fraction(0), *(t for t in theta if t <= opt_ref)})),
        tuple(sorted({Fraction(0), *theta})),
        max(theta),
        _rational_gcd(kappas),
    )


def _size_bound(epsilon: Fraction) -> int:
    per_bucket = 2 * math.ceil(1 / (epsilon * (1 - 3 * epsilon))) + 2
    return (math.floor(1 / epsilon**2) + 1) * per_bucket + math.floor(1 / epsilon) + 2


def enumerate_supports(
    inst: Instance,
    epsilon,
    opt_ref,
    prune: bool = True,
    budget: int = SUPPORT_BUDGET,
) -> list[tuple[Fraction, ...]]:
    """Candidate finite supports ``W`` (INF implicit).

    With ``prune`` the candidates are the outputs of :func:`build_scheme`
    for every ordered subset of boxes, the last entry taken as the reserved
    box.  Without it, every subset of the unit grid below ``V_U`` up to the
    size bound, each with 0 added, is a candidate; this is only feasible for
    tiny grids and raises :class:`BudgetExceeded` otherwise.
    """
    epsilon, opt_ref = Fraction(epsilon), Fraction(opt_ref)
    _check_eps(epsilon)
    if prune:
        seen: dict[tuple[Fraction, ...], None] = {}
        for order in ordered_subsets(inst.n):
            sch = build_scheme(inst, order[-1], order[:-1], epsilon, opt_ref)
            seen.setdefault(sch.value_support, None)
        return list(seen)
    unit = epsilon * epsilon * opt_ref
    grid_n = math.floor(value_upper(inst, epsilon) / unit)  # nonzero multiples
    bound = _size_bound(epsilon)
    take = min(bound - 2, grid_n)
    count = 0
    c = 1
    for s in range(take + 1):
        count += c
        c = c * (grid_n - s) // (s + 1)
    if count > budget:
        raise BudgetExceeded(f"{count} support candidates exceed the budget of {budget}")
    pts = [m * unit for m in range(1, grid_n + 1)]
    out = []
    for s in range(take + 1):
        for sub in combinations(pts, s):
            out.append((Fraction(0),) + sub)
    return out


# ---------------------------------------------------------------------------
# evaluators


def _check_ord(inst: Instance, ord_: IndexThresholdSequence) -> None:
    for i in ord_.order + (ord_.backup,):
        if not 0 <= i < inst.n:
            raise ValueError(f"box index {i} out of range")
    sg = sigmas(inst)
    for j, (i, t) in enumerate(zip(ord_.order, ord_.thresholds), start=1):
        if t is not NEG and t > sg[i]:
            raise ValueError(f"threshold {t} exceeds sigma {sg[i]} at step {j}")


def eval_TP(inst: Instance, ord_: IndexThresholdSequence) -> Fraction:
    _check_ord(inst, ord_)
    order = ord_.order
    u = inst.mean(ord_.backup)
    for j in range(len(order), 0, -1):
        i = order[j - 1]
        tau = ord_.thresholds[j - 1]
        sg = reservation_index(inst.boxes[i]).sigma
        rest = inst.full_mask & ~mask_of(order[:j])
        nxt = Fraction(0)
        for v, p in inst.dist(i).atoms:
            if exceeds(v, tau):
                kap = min(v, sg)
                nxt += p * (kap + weitz_value(inst, rest, v) - v)
            else:
                nxt += p * u
        u = nxt
    return u


@lru_cache(maxsize=1 << 14)
def _rounded_kappa_dist(inst: Instance, i: int, unit: Fraction) -> DiscreteDistribution:
    return reservation_index(inst.boxes[i]).kappa.map(lambda x: math.floor(x / unit) * unit)


@lru_cache(maxsize=1 << 14)
def _rounded_max(inst: Instance, mask: int, unit: Fraction) -> DiscreteDistribution | None:
    return max_distribution(_rounded_kappa_dist(inst, i, unit) for i in members(mask))


def _gap_above(d: DiscreteDistribution | None, w) -> Fraction:
    """``E[(X - w)^+]``, zero when ``w`` is INF."""
    if w == INF:
        return Fraction(0)
    return expected_max_with(d, w) - w


def eval_DTP(inst: Instance, ord_: IndexThresholdSequence, scheme: DiscretizationScheme) -> Fraction:
    _check_ord(inst, ord_)
    grid = set(scheme.threshold_grid)
    for j, t in enumerate(ord_.thresholds, start=1):
        if t is not NEG and t not in grid:
            raise ValueError(f"threshold {t} at step {j} is not on the grid")
    order = ord_.order
    u = inst.mean(ord_.backup)
    for j in range(len(order), 0, -1):
        i = order[j - 1]
        tau = ord_.thresholds[j - 1]
        sg = reservation_index(inst.boxes[i]).sigma
        rest = _rounded_max(inst, inst.full_mask & ~mask_of(order[:j]), scheme.unit)
        nxt = Fraction(0)
        for v, p in inst.dist(i).atoms:
            if exceeds(v, tau):
                kap = round_kappa(min(v, sg), scheme)
                nxt += p * (kap + _gap_above(rest, round_value(v, scheme)))
            else:
                nxt += p * u
        u = nxt
    return u


# ---------------------------------------------------------------------------
# the stochastic dynamic program


@dataclass(frozen=True)
class StochasticDynamicProgram:
    """Transition ``f``, reward ``g`` and final reward ``h`` for a fixed ``i*``.

    The state ``V`` is 0 before any threshold is crossed.  Box ``i`` with
    threshold ``tau`` moves 0 to the rounded prize when the prize exceeds
    ``tau``; once ``V > 0`` every opened box pays its rounded capped value
    above ``V`` and raises ``V`` to it.  The reserved box has one action and
    does nothing while ``V = 0``.
    """

    inst: Instance
    backup: int
    scheme: DiscretizationScheme
    actions: tuple[tuple[Fraction, ...], ...]

    def f(self, V, box: int, tau, v):
        if V == 0:
            if self._stays(box, tau, v):
                return Fraction(0)
            return round_value(v, self.scheme)
        return max(V, self._kappa(box, v))

    def g(self, V, box: int, tau, v) -> Fraction:
        if V == 0:
            if self._stays(box, tau, v):
                return Fraction(0)
            return self._kappa(box, v)
        if V == INF:
            return Fraction(0)
        return _pos(self._kappa(box, v) - V)

    def h(self, V) -> Fraction:
        return self.inst.mean(self.backup) if V == 0 else Fraction(0)

    def _stays(self, box: int, tau, v) -> bool:
        return box == self.backup or tau is None or not v > tau

    def _kappa(self, box: int, v) -> Fraction:
        return round_kappa(min(v, reservation_index(self.inst.boxes[box]).sigma), self.scheme)


def build_ST(inst: Instance, backup: int, scheme: DiscretizationScheme) -> StochasticDynamicProgram:
    sg = sigmas(inst)
    acts = tuple(
        () if i == backup else tuple(t for t in scheme.threshold_grid if t <= sg[i])
        for i in range(inst.n)
    )
    return StochasticDynamicProgram(inst, backup, scheme, acts)


def _step(prog: StochasticDynamicProgram, dist: dict, box: int, tau) -> tuple[dict, Fraction]:
    """Push a distribution over ``V`` through one open; return it and the expected reward."""
    out: dict = {}
    reward = Fraction(0)
    for V, q in dist.items():
        for v, p in prog.inst.dist(box).atoms:
            w = q * p
            reward += w * prog.g(V, box, tau, v)
            nv = prog.f(V, box, tau, v)
            out[nv] = out.get(nv, Fraction(0)) + w
    return out, reward


def eval_ST(prog: StochasticDynamicProgram, ord_: IndexThresholdSequence) -> Fraction:
    """Expected total reward when ``ord_`` runs first and every other box follows."""
    if ord_.backup != prog.backup:
        raise ValueError("sequence is for a different reserved box")
    dist: dict = {Fraction(0): Fraction(1)}
    total = Fraction(0)
    for box, tau in zip(ord_.order, ord_.thresholds):
        if tau not in prog.actions[box]:
            raise ValueError(f"threshold {tau} is not an action of box {box}")
        dist, r = _step(prog, dist, box, tau)
        total += r
    # no crossing: the reserved box is claimed as is
    still = dist.pop(Fraction(0), Fraction(0))
    total += still * prog.h(Fraction(0))
    for box in range(prog.inst.n):
        if box not in ord_.order:
            dist, r = _step(prog, dist, box, None)
            total += r
    return total + sum((q * prog.h(V) for V, q in dist.items()), Fraction(0))


def solve_ST_exhaustive(
    prog: StochasticDynamicProgram,
    inst: Instance | None = None,
    backup: int | None = None,
    scheme: DiscretizationScheme | None = None,
) -> tuple[IndexThresholdSequence, Fraction]:
    """Best sequence for the program, by dynamic programming over unopened sets.

    Once a threshold is crossed every remaining box is opened, so a
    phase-one state is just the set of boxes not yet tried.  Ties go to
    stopping first, then the lowest box, then the lowest threshold.
    """
    inst = prog.inst
    if inst.n > ST_LIMIT:
        raise BudgetExceeded(f"n = {inst.n} exceeds {ST_LIMIT}")
    b = prog.backup
    others = [i for i in range(inst.n) if i != b]

    @lru_cache(maxsize=None)
    def tail(closed: int, V) -> Fraction:
        # reward from opening every box in ``closed`` starting at V > 0
        dist = {V: Fraction(1)}
        total = Fraction(0)
        for box in members(closed):
            dist, r = _step(prog, dist, box, None)
            total += r
        return total

    @lru_cache(maxsize=None)
    def best(avail: int) -> tuple[Fraction, tuple]:
        top = (prog.h(Fraction(0)), ())
        for i in members(avail):
            rem = avail & ~(1 << i)
            cont = best(rem)
            closed = rem | (1 << b)
            for tau in prog.actions[i]:
                val = Fraction(0)
                for v, p in inst.dist(i).atoms:
                    nv = prog.f(Fraction(0), i, tau, v)
                    if nv == 0:
                        val += p * cont[0]
                    else:
                        val += p * (prog.g(Fraction(0), i, tau, v) + tail(closed, nv))
                if val > top[0]:
                    top = (val, ((i, tau),) + cont[1])
        return top

    val, steps = best(mask_of(others))
    ord_ = IndexThresholdSequence(b, tuple(s[0] for s in steps), tuple(s[1] for s in steps))
    return ord_, val


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class PtasResult:
    policy: TwoPhasePolicy
    utility: Fraction
    opt_ref: Fraction
    epsilon: Fraction
    candidates_tried: int

    def report(self) -> dict:
        from .model import format_rat

        return {
            "opt_ref": format_rat(self.opt_ref),
            "epsilon": format_rat(self.epsilon),
            "candidates_tried": self.candidates_tried,
            "best_policy": self.policy.to_dict(),
            "utility": format_rat(self.utility),
        }


def run_ptas(
    inst: Instance,
    epsilon,
    opt_ref=None,
    *,
    use_oracle: bool = True,
    fine: bool = False,
    prune: bool = True,
) -> PtasResult:
    epsilon = Fraction(epsilon)
    _check_eps(epsilon)
    if opt_ref is None:
        opt_ref = solve(inst).opt if use_oracle else best_committing(inst)[1]
    opt_ref = Fraction(opt_ref)
    if opt_ref <= 0:
        # every policy is worth 0; nothing to discretize against
        pol = TwoPhasePolicy.weitzman()
        return PtasResult(pol, eval_two_phase(inst, pol), opt_ref, epsilon, 0)
    if fine:
        schemes = [identity_scheme(inst, epsilon, opt_ref)]
    else:
        schemes = [
            scheme_from_support(inst, w, epsilon, opt_ref)
            for w in enumerate_supports(inst, epsilon, opt_ref, prune=prune)
        ]
    best = TwoPhasePolicy.weitzman()
    best_u = eval_two_phase(inst, best)
    tried = 0
    for backup in range(inst.n):
        for sch in schemes:
            tried += 1
            ord_, _ = solve_ST_exhaustive(build_ST(inst, backup, sch))
            pol = ord_.to_policy()
            u = eval_two_phase(inst, pol)
            if u > best_u:
                best, best_u = pol, u
    return PtasResult(best, best_u, opt_ref, epsilon, tried)


def ptas_pipeline(inst: Instance, epsilon, **kw) -> tuple[TwoPhasePolicy, Fraction]:
    r = run_ptas(inst, epsilon, **kw)
    return r.policy, r.utility
