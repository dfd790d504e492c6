"""Exact data model for fair-division instances, bundles, and allocations.

Valuations are non-negative integers and every fractional threshold is
compared by cross-multiplication, so all verdicts downstream are exact.
Normalizing totals to 1 is deliberately avoided: a claim like
"agent i gets at least k/n of her total" is always evaluated as
``n * value >= k * total_i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator


class InputError(ValueError):
    """Input data violates a documented precondition."""


class ResourceBudgetError(RuntimeError):
    """An exhaustive operation would exceed its enumeration budget."""


class UnsupportedSizeError(InputError):
    """The constructive solver was asked for more residual agents than it supports."""


class InvariantViolationError(RuntimeError):
    """An internal invariant failed. This signals a bug, not bad input."""


DEFAULT_BUDGET = 10_000_000
BUDGET_ENV_VAR = "PROPM_BUDGET"


def resolve_budget(budget: int | None) -> int:
    """Pick the enumeration budget: explicit arg, else $PROPM_BUDGET, else the default."""
    import os

    if budget is not None:
        if budget < 1:
            raise InputError(f"budget must be positive, got {budget}")
        return budget
    env = os.environ.get(BUDGET_ENV_VAR, "").strip()
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise InputError(f"{BUDGET_ENV_VAR} must be an integer, got {env!r}") from exc
        if value < 1:
            raise InputError(f"{BUDGET_ENV_VAR} must be positive, got {value}")
        return value
    return DEFAULT_BUDGET


@dataclass(frozen=True)
class Bundle:
    """A set of item indices, stored as a strictly increasing tuple."""

    items: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        prev = -1
        for j in self.items:
            if not isinstance(j, int) or isinstance(j, bool):
                raise InputError(f"item index must be an int, got {j!r}")
            if j <= prev:
                raise InputError(f"item indices must be strictly increasing, got {self.items}")
            prev = j
        if self.items and self.items[0] < 0:
            raise InputError(f"item indices must be non-negative, got {self.items}")

    @classmethod
    def of(cls, items: Iterable[int]) -> "Bundle":
        return cls(tuple(sorted(set(items))))

    def validate_for(self, m: int) -> None:
        if self.items and self.items[-1] >= m:
            raise InputError(f"item index {self.items[-1]} out of range for m={m}")

    def union(self, other: "Bundle") -> "Bundle":
        return Bundle.of(self.items + other.items)

    def difference(self, other: "Bundle") -> "Bundle":
        drop = set(other.items)
        return Bundle(tuple(j for j in self.items if j not in drop))

    def __or__(self, other: "Bundle") -> "Bundle":
        return self.union(other)

    def __sub__(self, other: "Bundle") -> "Bundle":
        return self.difference(other)

    def __contains__(self, item: int) -> bool:
        return item in self.items

    def __iter__(self) -> Iterator[int]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __bool__(self) -> bool:
        return bool(self.items)


@dataclass(frozen=True)
class Allocation:
    """A complete partition of the items into one bundle per agent (bundles may be empty)."""

    bundles: tuple[Bundle, ...]

    @classmethod
    def of(cls, bundles: Iterable[Iterable[int]]) -> "Allocation":
        return cls(tuple(Bundle.of(b) for b in bundles))

    @property
    def n(self) -> int:
        return len(self.bundles)

    def bundle_of(self, agent: int) -> Bundle:
        return self.bundles[agent]

    def owners(self, m: int) -> tuple[int, ...]:
        """Item index -> owning agent. Raises if the allocation is not a partition of 0..m-1."""
        owner = [-1] * m
        for i, bundle in enumerate(self.bundles):
            for j in bundle:
                if j >= m:
                    raise InputError(f"item index {j} out of range for m={m}")
                if owner[j] != -1:
                    raise InputError(f"item {j} appears in two bundles")
                owner[j] = i
        missing = [j for j, o in enumerate(owner) if o == -1]
        if missing:
            raise InputError(f"items {missing} are not allocated")
        return tuple(owner)

    def validate_for(self, inst: "Instance") -> None:
        if len(self.bundles) != inst.n:
            raise InputError(f"allocation has {len(self.bundles)} bundles for n={inst.n} agents")
        self.owners(inst.m)

    def to_json_dict(self) -> dict:
        return {"bundles": [list(b.items) for b in self.bundles]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "Allocation":
        if not isinstance(data, dict) or "bundles" not in data:
            raise InputError("allocation JSON must be an object with a 'bundles' key")
        bundles = data["bundles"]
        if not isinstance(bundles, list):
            raise InputError("'bundles' must be a list of item-index lists")
        return cls.of(bundles)


@dataclass(frozen=True)
class Share:
    """An exact rational threshold, e.g. total/n or (3/5)*total."""

    numerator: int
    denominator: int

    def __post_init__(self) -> None:
        if self.denominator <= 0:
            raise InputError(f"denominator must be positive, got {self.denominator}")

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)


def share_compare(lhs_value: int, rhs: Share) -> int:
    """Exact sign of lhs_value - rhs, by cross-multiplication: -1, 0 or +1.

    Python integers are unbounded, so intermediates never overflow.
    """
    diff = lhs_value * rhs.denominator - rhs.numerator
    return (diff > 0) - (diff < 0)


@dataclass(frozen=True)
class Instance:
    """n agents, m items, and an n-by-m table of non-negative integer valuations."""

    values: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise InputError("instance needs at least one agent")
        width = len(self.values[0])
        for row in self.values:
            if len(row) != width:
                raise InputError("valuation rows must all have the same length")
            for v in row:
                if not isinstance(v, int) or isinstance(v, bool):
                    raise InputError(f"valuations must be integers, got {v!r}")
                if v < 0:
                    raise InputError(f"valuations must be non-negative, got {v}")

    @classmethod
    def of(cls, rows: Iterable[Iterable[int]]) -> "Instance":
        return cls(tuple(tuple(int(v) for v in row) for row in rows))

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def m(self) -> int:
        return len(self.values[0])

    @cached_property
    def totals(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.values)

    def total(self, agent: int) -> int:
        return self.totals[agent]

    def all_items(self) -> Bundle:
        return Bundle(tuple(range(self.m)))

    def to_json_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "values": [list(row) for row in self.values]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "Instance":
        if not isinstance(data, dict):
            raise InputError("instance JSON must be an object")
        for key in ("n", "m", "values"):
            if key not in data:
                raise InputError(f"instance JSON missing key {key!r}")
        inst = cls.of(data["values"])
        if inst.n != data["n"] or inst.m != data["m"]:
            raise InputError(
                f"instance JSON shape mismatch: header says {data['n']}x{data['m']}, "
                f"table is {inst.n}x{inst.m}"
            )
        return inst


def value_of(inst: Instance, agent: int, bundle: Bundle) -> int:
    """Additive value of a bundle for an agent; the empty bundle is worth 0."""
    if not 0 <= agent < inst.n:
        raise InputError(f"agent index {agent} out of range for n={inst.n}")
    bundle.validate_for(inst.m)
    row = inst.values[agent]
    return sum(row[j] for j in bundle.items)


@dataclass(frozen=True)
class Restriction:
    """A sub-instance plus the index maps needed to lift results back.

    ``agents[k]`` / ``items[k]`` give the original index of sub-agent / sub-item k.
    """

    instance: Instance
    agents: tuple[int, ...]
    items: tuple[int, ...]

    def lift_items(self, items: Iterable[int]) -> tuple[int, ...]:
        return tuple(self.items[j] for j in items)

    def lift_bundle(self, bundle: Bundle) -> Bundle:
        return Bundle.of(self.lift_items(bundle.items))

    def lift_allocation(self, allocation: Allocation) -> tuple[tuple[int, Bundle], ...]:
        """Map a sub-allocation to (original agent, bundle of original items) pairs."""
        if allocation.n != self.instance.n:
            raise InputError("allocation shape does not match the restriction")
        return tuple(
            (self.agents[i], self.lift_bundle(allocation.bundles[i]))
            for i in range(allocation.n)
        )


def restrict(inst: Instance, agents: Iterable[int], items: Iterable[int]) -> Restriction:
    """Restrict an instance to a subset of agents and items.

    The agent subset must be non-empty; the item subset may be empty.
    """
    agent_tuple = tuple(sorted(set(agents)))
    item_tuple = tuple(sorted(set(items)))
    if not agent_tuple:
        raise InputError("restriction needs at least one agent")
    if agent_tuple[0] < 0 or agent_tuple[-1] >= inst.n:
        raise InputError(f"agent subset {agent_tuple} out of range for n={inst.n}")
    if item_tuple and (item_tuple[0] < 0 or item_tuple[-1] >= inst.m):
        raise InputError(f"item subset {item_tuple} out of range for m={inst.m}")
    sub_values = tuple(
        tuple(inst.values[i][j] for j in item_tuple) for i in agent_tuple
    )
    return Restriction(instance=Instance(sub_values), agents=agent_tuple, items=item_tuple)


def fraction_str(value: Fraction) -> str:
    """Render an exact rational as 'p/q' (always with an explicit denominator)."""
    frac = Fraction(value)
    return f"{frac.numerator}/{frac.denominator}"
