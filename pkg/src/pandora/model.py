"""Exact-arithmetic domain types for Pandora's box instances.

All scalar quantities (prize values, probabilities, costs, outside options,
thresholds) are :class:`fractions.Fraction` values.  Floating point is never
used here.
"""

from __future__ import annotations

import json
import random
import re
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

__all__ = [
    "Rat",
    "InstanceError",
    "BudgetExceeded",
    "DiscreteDistribution",
    "BoxSpec",
    "Instance",
    "State",
    "Action",
    "Open",
    "Close",
    "STOP",
    "MAX_BOXES",
    "parse_rat",
    "format_rat",
    "expected_value",
    "parse_instance",
    "serialize_instance",
    "instance_from_dict",
    "instance_to_dict",
    "random_instance",
    "mask_of",
    "members",
    "popcount",
]

Rat = Fraction
RatLike = Union[Fraction, int, str]

MAX_BOXES = 63

_RAT_RE = re.compile(r"^\s*(-?\d+)(?:\s*/\s*(\d+))?\s*$")


class InstanceError(ValueError):
    """Raised for malformed or invalid instance input."""


class BudgetExceeded(RuntimeError):
    """Raised when an exhaustive computation would exceed its size limit."""


def parse_rat(text: RatLike) -> Fraction:
    """Parse ``"p"`` or ``"p/q"`` (decimal integers) into a Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int) and not isinstance(text, bool):
        return Fraction(text)
    if not isinstance(text, str):
        raise InstanceError(f"expected a rational string, got {text!r}")
    m = _RAT_RE.match(text)
    if m is None:
        raise InstanceError(f"malformed rational {text!r}")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) is not None else 1
    if den == 0:
        raise InstanceError(f"zero denominator in {text!r}")
    return Fraction(num, den)


def format_rat(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# box subsets as bitmasks


def mask_of(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << i
    return mask


def members(mask: int) -> Iterator[int]:
    """Yield set bits of ``mask`` in increasing order."""
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


def popcount(mask: int) -> int:
    return bin(mask).count("1")


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite distribution: atoms sorted strictly increasing by value.

    Probabilities are positive and sum exactly to one.  Values may be any
    rational; the nonnegativity of prizes is enforced by :class:`BoxSpec`.
    """

    atoms: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise InstanceError("distribution has no atoms")
        prev = None
        total = Fraction(0)
        for v, p in self.atoms:
            if p <= 0:
                raise InstanceError(f"nonpositive probability {p} at value {v}")
            if prev is not None and v <= prev:
                raise InstanceError("atoms must be strictly increasing")
            prev = v
            total += p
        if total != 1:
            raise InstanceError(f"probabilities sum to {format_rat(total)} ≠ 1")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[RatLike, RatLike]]) -> DiscreteDistribution:
        """Build a canonical distribution, merging duplicate values.

        Zero-probability atoms are dropped.
        """
        merged: dict[Fraction, Fraction] = {}
        for v, p in pairs:
            v, p = parse_rat(v), parse_rat(p)
            merged[v] = merged.get(v, Fraction(0)) + p
        return cls(tuple((v, p) for v, p in sorted(merged.items()) if p != 0))

    @classmethod
    def point(cls, value: RatLike) -> DiscreteDistribution:
        return cls(((parse_rat(value), Fraction(1)),))

    @property
    def values(self) -> tuple[Fraction, ...]:
        return tuple(v for v, _ in self.atoms)

    @property
    def probs(self) -> tuple[Fraction, ...]:
        return tuple(p for _, p in self.atoms)

    @property
    def min(self) -> Fraction:
        return self.atoms[0][0]

    @property
    def max(self) -> Fraction:
        return self.atoms[-1][0]

    def __iter__(self) -> Iterator[tuple[Fraction, Fraction]]:
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def mean(self) -> Fraction:
        return sum((v * p for v, p in self.atoms), Fraction(0))

    def expect(self, f: Callable[[Fraction], Fraction]) -> Fraction:
        return sum((f(v) * p for v, p in self.atoms), Fraction(0))

    def prob_le(self, x) -> Fraction:
        return sum((p for v, p in self.atoms if v <= x), Fraction(0))

    def prob_gt(self, x) -> Fraction:
        return sum((p for v, p in self.atoms if v > x), Fraction(0))

    def map(self, f: Callable[[Fraction], Fraction]) -> DiscreteDistribution:
        """Pushforward of the distribution under ``f``."""
        return DiscreteDistribution.from_pairs((f(v), p) for v, p in self.atoms)


def expected_value(d: DiscreteDistribution) -> Fraction:
    return d.mean()


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class BoxSpec:
    dist: DiscreteDistribution
    cost: Fraction

    def __post_init__(self) -> None:
        if self.cost < 0:
            raise InstanceError(f"negative cost {self.cost}")
        if self.dist.min < 0:
            raise InstanceError(f"negative prize value {self.dist.min}")


@dataclass(frozen=True)
class Instance:
    """A set of boxes indexed ``0..n-1``."""

    boxes: tuple[BoxSpec, ...]

    def __post_init__(self) -> None:
        n = len(self.boxes)
        if n == 0:
            raise InstanceError("instance has no boxes")
        if n > MAX_BOXES:
            raise InstanceError(f"{n} boxes exceeds the limit of {MAX_BOXES}")

    def __hash__(self) -> int:
        # the generated hash rehashes every Fraction on each call
        try:
            return self.__dict__["_hash"]
        except KeyError:
            h = hash(self.boxes)
            object.__setattr__(self, "_hash", h)
            return h

    @property
    def n(self) -> int:
        return len(self.boxes)

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    @property
    def support(self) -> tuple[Fraction, ...]:
        """Global support: union of all box supports, sorted."""
        return tuple(sorted({v for b in self.boxes for v in b.dist.values}))

    def grid(self) -> tuple[Fraction, ...]:
        """Outside-option grid ``{0} ∪ support``."""
        return tuple(sorted({Fraction(0), *self.support}))

    def dist(self, i: int) -> DiscreteDistribution:
        return self.boxes[i].dist

    def cost(self, i: int) -> Fraction:
        return self.boxes[i].cost

    def mean(self, i: int) -> Fraction:
        return self.boxes[i].dist.mean()


@dataclass(frozen=True)
class State:
    uninspected: int
    outside: Fraction


@dataclass(frozen=True)
class Action:
    """``kind`` is one of ``"open"``, ``"close"``, ``"stop"``."""

    kind: str
    box: int | None = None

    def __repr__(self) -> str:
        if self.kind == "stop":
            return "Stop"
        return f"{self.kind.capitalize()}({self.box})"

    @property
    def is_terminal(self) -> bool:
        return self.kind != "open"


def Open(i: int) -> Action:
    return Action("open", i)


def Close(i: int) -> Action:
    return Action("close", i)


STOP = Action("stop")


# ---------------------------------------------------------------------------
# JSON


def instance_from_dict(obj) -> Instance:
    if not isinstance(obj, dict) or "boxes" not in obj:
        raise InstanceError('expected an object with a "boxes" list')
    raw = obj["boxes"]
    if not isinstance(raw, list):
        raise InstanceError('"boxes" must be a list')
    if len(raw) == 0:
        raise InstanceError("instance has no boxes")
    if len(raw) > MAX_BOXES:
        raise InstanceError(f"{len(raw)} boxes exceeds the limit of {MAX_BOXES}")
    boxes = []
    for idx, b in enumerate(raw):
        try:
            boxes.append(_box_from_dict(b))
        except InstanceError as exc:
            raise InstanceError(f"{exc} in box {idx}") from None
    return Instance(tuple(boxes))


def _box_from_dict(b) -> BoxSpec:
    if not isinstance(b, dict) or "cost" not in b or "values" not in b:
        raise InstanceError('box needs "cost" and "values"')
    cost = parse_rat(b["cost"])
    if cost < 0:
        raise InstanceError(f"negative cost {format_rat(cost)}")
    pairs = []
    for atom in b["values"]:
        if not isinstance(atom, (list, tuple)) or len(atom) != 2:
            raise InstanceError(f"atom {atom!r} is not a [value, probability] pair")
        v, p = parse_rat(atom[0]), parse_rat(atom[1])
        if v < 0:
            raise InstanceError(f"negative value {format_rat(v)}")
        if p < 0:
            raise InstanceError(f"negative probability {format_rat(p)}")
        pairs.append((v, p))
    total = sum((p for _, p in pairs), Fraction(0))
    if total != 1:
        raise InstanceError(f"probabilities sum to {format_rat(total)} ≠ 1")
    return BoxSpec(DiscreteDistribution.from_pairs(pairs), cost)


def parse_instance(text: str) -> Instance:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed JSON: {exc}") from None
    return instance_from_dict(obj)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "boxes": [
            {
                "cost": format_rat(b.cost),
                "values": [[format_rat(v), format_rat(p)] for v, p in b.dist.atoms],
            }
            for b in inst.boxes
        ]
    }


def serialize_instance(inst: Instance, indent: int | None = None) -> str:
    return json.dumps(instance_to_dict(inst), indent=indent)


def random_instance(
    n: int,
    atoms: int,
    seed: int,
    max_value: int = 20,
    max_weight: int = 6,
) -> Instance:
    """Random instance with small integer prizes and rational probabilities.

    Probabilities come from integer weights in ``1..max_weight``; the cost is
    ``k/8`` of the box mean for ``k`` in ``0..6`` so that inspecting is
    sometimes, but not always, worthwhile.
    """
    rng = random.Random(seed)
    boxes = []
    for _ in range(n):
        k = rng.randint(1, atoms)
        vals = rng.sample(range(0, max_value + 1), k)
        if max(vals) == 0:
            vals = [rng.randint(1, max_value)]
        weights = [rng.randint(1, max_weight) for _ in vals]
        total = sum(weights)
        dist = DiscreteDistribution.from_pairs(
            (v, Fraction(w, total)) for v, w in zip(vals, weights)
        )
        cost = dist.mean() * Fraction(rng.randint(0, 6), 8)
        boxes.append(BoxSpec(dist, cost))
    return Instance(tuple(boxes))
