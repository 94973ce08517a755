"""Brute-force optimal policies by dynamic programming over (U, alpha).

The outside option only ever takes values in ``{0} ∪ Θ`` (it is the best
prize seen so far), so tabulating ``OPT(U, alpha)`` on that grid is exact.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .model import (
    STOP,
    Action,
    BudgetExceeded,
    Close,
    Instance,
    Open,
    State,
    mask_of,
    members,
)
from .weitzman import max_kappa_distribution, weitz_inverse, weitz_value

__all__ = [
    "NEG",
    "Threshold",
    "exceeds",
    "ValueTable",
    "solve",
    "optimal_action",
    "threshold_of_set",
    "verify_certificate",
    "grid_threshold",
    "optimal_traces",
    "SOLVE_LIMIT",
]

SOLVE_LIMIT = 20


class _Neg:
    """Threshold marker: no optimal policy keeps a box in reserve."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "NEG"

    def __reduce__(self):
        return (_Neg, ())


NEG = _Neg()
Threshold = Union[Fraction, _Neg]


def exceeds(v, tau) -> bool:
    """``v > tau`` with NEG below every value."""
    return tau is NEG or v > tau


@dataclass(frozen=True)
class _Cell:
    value: Fraction
    action: Action
    uses_backup: bool
    backup_possible: bool


class ValueTable:
    """``OPT(U, alpha)`` for every subset ``U`` and grid outside option.

    Besides the value and the canonical action, each cell records two
    flags.  ``uses_backup`` follows the canonical policy: it is true when
    that policy claims a box closed with positive probability from here.
    ``backup_possible`` asks whether *some* optimal policy does.
    """

    def __init__(self, inst: Instance, grid: tuple[Fraction, ...], cells: list[list[_Cell]]):
        self.inst = inst
        self.grid = grid
        self._pos = {a: k for k, a in enumerate(grid)}
        self._cells = cells

    def _cell(self, mask: int, alpha) -> _Cell:
        try:
            k = self._pos[alpha]
        except KeyError:
            raise ValueError(f"outside option {alpha} is not on the grid") from None
        return self._cells[mask][k]

    def value(self, mask: int, alpha) -> Fraction:
        return self._cell(mask, alpha).value

    def action(self, mask: int, alpha) -> Action:
        return self._cell(mask, alpha).action

    def uses_backup(self, mask: int, alpha) -> bool:
        return self._cell(mask, alpha).uses_backup

    def backup_possible(self, mask: int, alpha) -> bool:
        return self._cell(mask, alpha).backup_possible

    @property
    def opt(self) -> Fraction:
        return self.value(self.inst.full_mask, Fraction(0))

    def on_grid(self, alpha) -> bool:
        return alpha in self._pos


def solve(inst: Instance) -> ValueTable:
    if inst.n > SOLVE_LIMIT:
        raise BudgetExceeded(f"n = {inst.n} exceeds {SOLVE_LIMIT}")
    grid = inst.grid()
    pos = {a: k for k, a in enumerate(grid)}
    boxes = inst.boxes
    means = [b.dist.mean() for b in boxes]
    # successor grid positions per (box, alpha position, atom)
    succ = [
        [[pos[max(a, v)] for v, _ in b.dist.atoms] for a in grid]
        for b in boxes
    ]
    cells: list[list[_Cell]] = [[] for _ in range(1 << inst.n)]
    cells[0] = [_Cell(a, STOP, False, False) for a in grid]

    for mask in range(1, 1 << inst.n):
        row = []
        idx = list(members(mask))
        for ka, a in enumerate(grid):
            # candidate branches in tie-break order
            cands: list[tuple[Fraction, Action, bool, bool]] = [(a, STOP, False, False)]
            for i in idx:
                cands.append((means[i], Close(i), True, True))
            for i in idx:
                b = boxes[i]
                rest = cells[mask & ~(1 << i)]
                val = -b.cost
                ub = bp = False
                for (v, p), k in zip(b.dist.atoms, succ[i][ka]):
                    c = rest[k]
                    val += p * c.value
                    ub = ub or c.uses_backup
                    bp = bp or c.backup_possible
                cands.append((val, Open(i), ub, bp))
            best = cands[0]
            for cand in cands[1:]:
                if cand[0] > best[0]:
                    best = cand
            possible = any(c[3] for c in cands if c[0] == best[0])
            row.append(_Cell(best[0], best[1], best[2], possible))
        cells[mask] = row
    return ValueTable(inst, grid, cells)


def optimal_action(table: ValueTable, s: State) -> Action:
    return table.action(s.uninspected, s.outside)


def threshold_of_set(inst: Instance, table: ValueTable, mask: int):
    """Largest outside option at which ``OPT(U, .)`` is still flat.

    NEG when no optimal policy for ``(U, 0)`` ever claims a box closed.
    Otherwise the exact crossing point of the Weitz function with
    ``OPT(U, 0)``, which may lie off the grid.
    """
    zero = Fraction(0)
    if mask == 0 or not table.backup_possible(mask, zero):
        return NEG
    tau = weitz_inverse(max_kappa_distribution(inst, mask), table.value(mask, zero))
    assert tau is not None
    return tau


def grid_threshold(inst: Instance, mask: int, target: Fraction):
    """Smallest grid point where Weitz on ``mask`` reaches ``target``; inf if none."""
    for theta in inst.grid():
        if weitz_value(inst, mask, theta) >= target:
            return theta
    return float("inf")


def _cutoff_value(inst: Instance, order: Sequence[int]) -> Fraction:
    """Backward recursion for a fixed order whose last entry is claimed closed."""
    k = len(order)
    val = inst.mean(order[-1])
    for j in range(k - 1, 0, -1):
        box = order[j - 1]
        rest = inst.full_mask & ~mask_of(order[:j])
        tau = grid_threshold(inst, rest, val)
        b = inst.boxes[box]
        nxt = -b.cost
        for theta, p in b.dist.atoms:
            nxt += p * (weitz_value(inst, rest, theta) if theta >= tau else val)
        val = nxt
    return val


def verify_certificate(inst: Instance, order: Sequence[int], target) -> tuple[Fraction, bool]:
    """Best utility over all cutoffs of ``order``, and whether it reaches ``target``.

    Cutoff ``k`` runs the first ``k - 1`` boxes with grid thresholds and
    claims box ``order[k-1]`` closed if no threshold was crossed; cutoff 0
    is plain Weitzman.
    """
    order = list(order)
    if len(set(order)) != len(order):
        raise ValueError(f"duplicate indices in order {order}")
    for i in order:
        if not 0 <= i < inst.n:
            raise ValueError(f"box index {i} out of range")
    best = weitz_value(inst, inst.full_mask, Fraction(0))
    for k in range(1, len(order) + 1):
        best = max(best, _cutoff_value(inst, order[:k]))
    return best, best >= target


def optimal_traces(table: ValueTable) -> Iterator[list[State]]:
    """Every state sequence the canonical optimal policy visits with positive probability."""
    inst = table.inst

    def walk(state: State, path: list[State]) -> Iterator[list[State]]:
        path = path + [state]
        act = table.action(state.uninspected, state.outside)
        if act.kind != "open":
            yield path
            return
        rest = state.uninspected & ~(1 << act.box)
        for v, _ in inst.dist(act.box).atoms:
            yield from walk(State(rest, max(state.outside, v)), path)

    yield from walk(State(inst.full_mask, Fraction(0)), [])
