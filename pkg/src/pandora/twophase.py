"""Two-phase policies: a fixed opening order with thresholds, then Weitzman.

Phase one opens ``order[0], order[1], ...`` in turn.  As soon as an opened
value strictly exceeds its threshold the policy switches for good to
Weitzman's rule on whatever is still closed.  If phase one reaches the last
box of the order, that box is claimed without being opened.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations

from .exact import NEG, ValueTable, exceeds, solve, threshold_of_set
from .model import (
    Action,
    BudgetExceeded,
    Close,
    Instance,
    Open,
    State,
    format_rat,
    mask_of,
    parse_rat,
)
from .weitzman import reservation_index, weitz_value, weitzman_action

__all__ = [
    "TwoPhasePolicy",
    "IndexThresholdSequence",
    "compute_thresholds",
    "eval_two_phase",
    "eval_two_phase_running_max",
    "two_phase_action",
    "stage_non_exposed_utility",
    "best_two_phase",
    "ordered_subsets",
    "BEST_TWO_PHASE_LIMIT",
]

BEST_TWO_PHASE_LIMIT = 8


def _fmt_tau(t) -> str:
    return "NEG" if t is NEG else format_rat(t)


def _parse_tau(s):
    return NEG if s == "NEG" else parse_rat(s)


@dataclass(frozen=True)
class TwoPhasePolicy:
    order: tuple[int, ...] = ()
    thresholds: tuple = ()
    pure_weitzman: bool = False

    def __post_init__(self) -> None:
        if self.pure_weitzman:
            if self.order or self.thresholds:
                raise ValueError("pure Weitzman policy carries no order")
            return
        if not self.order:
            raise ValueError("empty order; use pure_weitzman")
        if len(set(self.order)) != len(self.order):
            raise ValueError(f"duplicate indices in order {list(self.order)}")
        if len(self.thresholds) != len(self.order) - 1:
            raise ValueError("need exactly one threshold per phase-one box")

    @classmethod
    def weitzman(cls) -> TwoPhasePolicy:
        return cls(pure_weitzman=True)

    @property
    def backup(self) -> int | None:
        return None if self.pure_weitzman else self.order[-1]

    def to_dict(self) -> dict:
        return {
            "pure_weitzman": self.pure_weitzman,
            "order": list(self.order),
            "thresholds": [_fmt_tau(t) for t in self.thresholds],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> TwoPhasePolicy:
        return cls(
            order=tuple(int(i) for i in obj.get("order", [])),
            thresholds=tuple(_parse_tau(t) for t in obj.get("thresholds", [])),
            pure_weitzman=bool(obj.get("pure_weitzman", False)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> TwoPhasePolicy:
        return cls.from_dict(json.loads(text))

    def validate(self, inst: Instance) -> None:
        for i in self.order:
            if not 0 <= i < inst.n:
                raise ValueError(f"box index {i} out of range")

    def as_policy(self, inst: Instance):
        """Adapter to the simulator's ``(state, history) -> Action`` interface."""
        self.validate(inst)

        def act(state: State, history: Sequence[tuple[int, Fraction]]) -> Action:
            return two_phase_action(inst, self, state, self.crossed(history))

        return act

    def crossed(self, history: Sequence[tuple[int, Fraction]]) -> bool:
        """Whether phase one has already ended given the opened boxes so far."""
        if self.pure_weitzman:
            return True
        for t, (box, v) in enumerate(history):
            if t >= len(self.thresholds) or box != self.order[t]:
                return True
            if exceeds(v, self.thresholds[t]):
                return True
        return False


@dataclass(frozen=True)
class IndexThresholdSequence:
    """Phase-one boxes and thresholds, with the reserved box kept apart."""

    backup: int
    order: tuple[int, ...] = ()
    thresholds: tuple = ()

    def __post_init__(self) -> None:
        if len(self.order) != len(self.thresholds):
            raise ValueError("order and thresholds differ in length")
        if self.backup in self.order or len(set(self.order)) != len(self.order):
            raise ValueError("indices must be distinct and exclude the backup box")

    def to_policy(self) -> TwoPhasePolicy:
        return TwoPhasePolicy(self.order + (self.backup,), self.thresholds)

    @classmethod
    def from_policy(cls, pol: TwoPhasePolicy) -> IndexThresholdSequence:
        if pol.pure_weitzman:
            raise ValueError("pure Weitzman has no backup box")
        return cls(pol.order[-1], pol.order[:-1], pol.thresholds)


def _after(inst: Instance, order: Sequence[int], j: int) -> int:
    """Boxes still closed once ``order[:j]`` has been opened."""
    return inst.full_mask & ~mask_of(order[:j])


def compute_thresholds(
    inst: Instance,
    table: ValueTable,
    order: Sequence[int],
    _cache: dict | None = None,
) -> TwoPhasePolicy:
    order = tuple(order)
    if len(set(order)) != len(order):
        raise ValueError(f"duplicate indices in order {list(order)}")
    taus = []
    for j in range(1, len(order)):
        m = _after(inst, order, j)
        if _cache is not None:
            if m not in _cache:
                _cache[m] = threshold_of_set(inst, table, m)
            taus.append(_cache[m])
        else:
            taus.append(threshold_of_set(inst, table, m))
    return TwoPhasePolicy(order, tuple(taus))


def eval_two_phase(inst: Instance, pol: TwoPhasePolicy) -> Fraction:
    """Exact utility; phase two starts from the value that crossed."""
    zero = Fraction(0)
    if pol.pure_weitzman:
        return weitz_value(inst, inst.full_mask, zero)
    order = pol.order
    u = inst.mean(order[-1])
    for j in range(len(order) - 1, 0, -1):
        box = inst.boxes[order[j - 1]]
        tau = pol.thresholds[j - 1]
        rest = _after(inst, order, j)
        nxt = -box.cost
        for v, p in box.dist.atoms:
            nxt += p * (weitz_value(inst, rest, v) if exceeds(v, tau) else u)
        u = nxt
    return u


def eval_two_phase_running_max(inst: Instance, pol: TwoPhasePolicy) -> Fraction:
    """Exact utility of executing the policy with the true outside option.

    Differs from :func:`eval_two_phase` only in that phase two starts from
    the best prize seen so far rather than from the value that crossed.
    This is the value the simulator estimates.
    """
    zero = Fraction(0)
    if pol.pure_weitzman:
        return weitz_value(inst, inst.full_mask, zero)
    order = pol.order
    k = len(order)
    memo: dict[tuple[int, Fraction], Fraction] = {}

    def go(j: int, alpha: Fraction) -> Fraction:
        if j == k - 1:
            return inst.mean(order[-1])
        key = (j, alpha)
        if key in memo:
            return memo[key]
        box = inst.boxes[order[j]]
        tau = pol.thresholds[j]
        rest = _after(inst, order, j + 1)
        val = -box.cost
        for v, p in box.dist.atoms:
            a = max(alpha, v)
            val += p * (weitz_value(inst, rest, a) if exceeds(v, tau) else go(j + 1, a))
        memo[key] = val
        return val

    return go(0, zero)


def two_phase_action(inst: Instance, pol: TwoPhasePolicy, s: State, crossed: bool) -> Action:
    if pol.pure_weitzman or crossed:
        return weitzman_action(inst, s)
    for j, box in enumerate(pol.order):
        if s.uninspected >> box & 1:
            return Open(box) if j < len(pol.order) - 1 else Close(box)
    raise ValueError("phase one already exhausted the order")


def stage_non_exposed_utility(inst: Instance, ord_: IndexThresholdSequence) -> Fraction:
    """Cost-free forward form, valid when every threshold is at most sigma.

    Each step contributes, on the event that it is the first crossing,
    the capped value of the crossing box plus the expected improvement of
    the remaining capped values over it.  Costs never appear.
    """
    survive = Fraction(1)
    total = Fraction(0)
    for j, (i, tau) in enumerate(zip(ord_.order, ord_.thresholds), start=1):
        sg = reservation_index(inst.boxes[i]).sigma
        if tau is not NEG and tau > sg:
            raise ValueError(f"threshold {tau} exceeds sigma {sg} at step {j}")
        rest = _after(inst, ord_.order, j)
        step = Fraction(0)
        stay = Fraction(0)
        for v, p in inst.dist(i).atoms:
            if exceeds(v, tau):
                gain = weitz_value(inst, rest, v) - v
                step += p * (min(v, sg) + gain)
            else:
                stay += p
        total += survive * step
        survive *= stay
    return total + survive * inst.mean(ord_.backup)


def ordered_subsets(n: int):
    """All nonempty ordered subsets of ``range(n)`` in lexicographic order."""
    out = []
    for k in range(1, n + 1):
        out.extend(permutations(range(n), k))
    out.sort()
    return out


def best_two_phase(
    inst: Instance, table: ValueTable | None = None
) -> tuple[TwoPhasePolicy, Fraction]:
    if inst.n > BEST_TWO_PHASE_LIMIT:
        raise BudgetExceeded(f"n = {inst.n} exceeds {BEST_TWO_PHASE_LIMIT}")
    if table is None:
        table = solve(inst)
    best = TwoPhasePolicy.weitzman()
    best_u = eval_two_phase(inst, best)
    cache: dict = {}
    for order in ordered_subsets(inst.n):
        pol = compute_thresholds(inst, table, order, cache)
        u = eval_two_phase(inst, pol)
        if u > best_u:
            best, best_u = pol, u
    return best, best_u
