"""Seeded Monte Carlo execution of search policies.

Prize draws come from a Philox counter-based stream: sample ``s`` always
reads the same counter block, so splitting the run across workers never
changes which prizes are drawn.  Identical prize vectors are grouped and the
policy is executed once per distinct vector in exact arithmetic, which makes
every reported statistic independent of the worker count.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .committing import CommittingChoice, committing_action
from .exact import ValueTable
from .model import Action, Instance, State
from .twophase import TwoPhasePolicy
from .weitzman import reservation_index, weitzman_action

__all__ = ["SimStats", "PolicyError", "simulate", "action_fn", "draw_indices", "run_episode"]

ActionFn = Callable[[State, Sequence[tuple[int, Fraction]]], Action]

CHUNK = 1 << 16


class PolicyError(ValueError):
    """The policy asked for an action that is not available."""


@dataclass(frozen=True)
class SimStats:
    samples: int
    mean: float
    std_error: float
    selected_freq: tuple[float, ...]
    inspected_freq: tuple[float, ...]
    closed_freq: tuple[float, ...]
    # per box: E[A v - I c] - E[A kappa], zero for policies that never leave
    # an opened box above sigma unselected
    kappa_gap_mean: tuple[float, ...]
    kappa_gap_se: tuple[float, ...]
    # per box: E[I (1 - A) (v - sigma)^+], value left unclaimed in opened boxes
    exposure_mean: tuple[float, ...]
    exposure_se: tuple[float, ...]

    def to_dict(self) -> dict:
        return asdict(self)


def action_fn(inst: Instance, policy) -> ActionFn:
    """Turn a table, two-phase policy, committing choice or callable into an action function."""
    if isinstance(policy, ValueTable):
        return lambda s, h: policy.action(s.uninspected, s.outside)
    if isinstance(policy, TwoPhasePolicy):
        return policy.as_policy(inst)
    if isinstance(policy, CommittingChoice):
        return lambda s, h: committing_action(inst, policy, s)
    if policy == "weitzman":
        return lambda s, h: weitzman_action(inst, s)
    if callable(policy):
        return policy
    raise TypeError(f"cannot execute {policy!r}")


def draw_indices(inst: Instance, seed: int, start: int, stop: int) -> np.ndarray:
    """Atom indices for samples ``start..stop-1``, one column per box."""
    n = inst.n
    block = -(-n // 4)
    count = stop - start
    gen = np.random.Philox(key=seed & (2**64 - 1), counter=start * block)
    raw = gen.random_raw(count * block * 4).reshape(count, block * 4)[:, :n]
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
    out = np.empty((count, n), dtype=np.int64)
    for i, b in enumerate(inst.boxes):
        edges = np.cumsum([float(p) for p in b.dist.probs])[:-1]
        out[:, i] = np.searchsorted(edges, u[:, i], side="right")
    return out


def _count_rows(inst: Instance, seed: int, start: int, stop: int) -> Counter:
    c: Counter = Counter()
    for lo in range(start, stop, CHUNK):
        rows, counts = np.unique(
            draw_indices(inst, seed, lo, min(stop, lo + CHUNK)), axis=0, return_counts=True
        )
        for r, k in zip(map(tuple, rows.tolist()), counts.tolist()):
            c[r] += k
    return c


@dataclass
class _Episode:
    utility: Fraction
    selected: list[bool]
    inspected: list[bool]


def run_episode(inst: Instance, act: ActionFn, values: Sequence[Fraction]) -> _Episode:
    n = inst.n
    closed = inst.full_mask
    alpha = Fraction(0)
    history: list[tuple[int, Fraction]] = []
    sel = [False] * n
    ins = [False] * n
    util = Fraction(0)
    for _ in range(n + 1):
        a = act(State(closed, alpha), history)
        if a.kind == "open":
            i = a.box
            if i is None or not closed >> i & 1:
                raise PolicyError(f"cannot open box {i}")
            closed &= ~(1 << i)
            ins[i] = True
            util -= inst.cost(i)
            history.append((i, values[i]))
            alpha = max(alpha, values[i])
        elif a.kind == "close":
            i = a.box
            if i is None or not closed >> i & 1:
                raise PolicyError(f"cannot claim box {i} closed")
            sel[i] = True
            return _Episode(util + values[i], sel, ins)
        elif a.kind == "stop":
            if history:
                best = max(history, key=lambda hv: (hv[1], -hv[0]))
                if best[1] > 0:
                    sel[best[0]] = True
                    util += best[1]
            return _Episode(util, sel, ins)
        else:
            raise PolicyError(f"unknown action {a!r}")
    raise PolicyError("policy did not terminate")


def _mean_se(s1: Fraction, s2: Fraction, n: int) -> tuple[float, float]:
    mean = s1 / n
    if n < 2:
        return float(mean), 0.0
    var = (s2 - n * mean * mean) / (n - 1)
    return float(mean), math.sqrt(float(var) / n)


def simulate(inst: Instance, policy, n_samples: int, seed: int, jobs: int = 1) -> SimStats:
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    act = action_fn(inst, policy)
    jobs = max(1, int(jobs))
    cuts = [n_samples * k // jobs for k in range(jobs + 1)]
    spans = [(a, b) for a, b in zip(cuts, cuts[1:]) if b > a]
    if len(spans) == 1:
        parts = [_count_rows(inst, seed, *spans[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as ex:
            parts = list(ex.map(lambda ab: _count_rows(inst, seed, *ab), spans))
    rows: Counter = Counter()
    for p in parts:
        rows.update(p)

    n = inst.n
    sig = [reservation_index(b).sigma for b in inst.boxes]
    z = Fraction(0)
    u1 = u2 = z
    sel = [0] * n
    ins = [0] * n
    clo = [0] * n
    g1 = [z] * n
    g2 = [z] * n
    e1 = [z] * n
    e2 = [z] * n
    for row in sorted(rows):
        k = rows[row]
        vals = [inst.dist(i).atoms[j][0] for i, j in enumerate(row)]
        ep = run_episode(inst, act, vals)
        u1 += k * ep.utility
        u2 += k * ep.utility * ep.utility
        for i in range(n):
            a, o = ep.selected[i], ep.inspected[i]
            sel[i] += k * a
            ins[i] += k * o
            clo[i] += k * (a and not o)
            gap = (vals[i] - min(vals[i], sig[i])) * a - inst.cost(i) * o
            g1[i] += k * gap
            g2[i] += k * gap * gap
            ex = (o and not a) * max(vals[i] - sig[i], z)
            e1[i] += k * ex
            e2[i] += k * ex * ex
    mean, se = _mean_se(u1, u2, n_samples)
    gm = [_mean_se(g1[i], g2[i], n_samples) for i in range(n)]
    em = [_mean_se(e1[i], e2[i], n_samples) for i in range(n)]
    return SimStats(
        samples=n_samples,
        mean=mean,
        std_error=se,
        selected_freq=tuple(s / n_samples for s in sel),
        inspected_freq=tuple(s / n_samples for s in ins),
        closed_freq=tuple(s / n_samples for s in clo),
        kappa_gap_mean=tuple(m for m, _ in gm),
        kappa_gap_se=tuple(s for _, s in gm),
        exposure_mean=tuple(m for m, _ in em),
        exposure_se=tuple(s for _, s in em),
    )
