"""Committing policies: plain Weitzman, or Weitzman with one box held back.

Holding back box ``i`` means it is never opened; its expected prize acts as
a free outside option for the search over the remaining boxes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .model import STOP, Action, Close, Instance, State
from .weitzman import weitz_value, weitzman_action

__all__ = [
    "CommittingChoice",
    "WEITZMAN",
    "Backup",
    "eval_committing",
    "all_committing",
    "best_committing",
    "committing_action",
]


@dataclass(frozen=True)
class CommittingChoice:
    backup: int | None = None

    def __repr__(self) -> str:
        return "Weitzman" if self.backup is None else f"Backup({self.backup})"


WEITZMAN = CommittingChoice()


def Backup(i: int) -> CommittingChoice:
    return CommittingChoice(i)


def eval_committing(inst: Instance, choice: CommittingChoice) -> Fraction:
    if choice.backup is None:
        return weitz_value(inst, inst.full_mask, Fraction(0))
    i = choice.backup
    return weitz_value(inst, inst.full_mask & ~(1 << i), inst.mean(i))


def all_committing(inst: Instance) -> list[tuple[CommittingChoice, Fraction]]:
    choices = [WEITZMAN] + [Backup(i) for i in range(inst.n)]
    return [(c, eval_committing(inst, c)) for c in choices]


def best_committing(inst: Instance) -> tuple[CommittingChoice, Fraction]:
    best = None
    for c, u in all_committing(inst):
        if best is None or u > best[1]:
            best = (c, u)
    return best


def committing_action(inst: Instance, choice: CommittingChoice, s: State) -> Action:
    """Weitzman over the other boxes with the held-back box as a fallback."""
    i = choice.backup
    if i is None or not s.uninspected >> i & 1:
        return weitzman_action(inst, s)
    fallback = inst.mean(i)
    act = weitzman_action(inst, State(s.uninspected & ~(1 << i), max(s.outside, fallback)))
    if act.kind == "open":
        return act
    return Close(i) if fallback > s.outside else STOP
