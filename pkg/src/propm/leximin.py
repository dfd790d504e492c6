"""Adjusted-valuation leximin machinery and envy-cycle trading.

The adjusted value of agent i under allocation X is
``v_i(X_i) + ((n-1)/n) * d_i(X)`` where d_i is her maximin-item bonus.
Allocations are ordered by comparing ascending-sorted adjusted profiles
lexicographically (full leximin). The envy graph has an edge i -> j exactly
when i strictly envies j even after dropping i's least-valued item from
j's bundle; trading bundles around such a cycle is a strict leximin
improvement, so the leximin maximum has an acyclic graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import permutations

import numpy as np

from . import _kernels
from .core import (
    Allocation,
    InputError,
    Instance,
    ResourceBudgetError,
    fraction_str,
    resolve_budget,
)
from .fairness import maximin_value


@dataclass(frozen=True)
class AdjustedProfile:
    values: tuple[Fraction, ...]

    @cached_property
    def ascending(self) -> tuple[Fraction, ...]:
        return tuple(sorted(self.values))

    def to_json_dict(self) -> dict:
        return {
            "values": [fraction_str(v) for v in self.values],
            "ascending": [fraction_str(v) for v in self.ascending],
        }


@dataclass(frozen=True)
class EnvyGraph:
    n: int
    edges: tuple[tuple[int, int], ...]

    def successors(self, i: int) -> tuple[int, ...]:
        return tuple(j for (a, j) in self.edges if a == i)

    def find_cycle(self) -> tuple[int, ...] | None:
        """Shortest directed cycle; ties broken by lexicographically least vertex tour.

        A cycle is canonically written starting at its smallest vertex.
        """
        edge_set = set(self.edges)
        vertices = sorted({v for e in self.edges for v in e})
        for length in range(2, len(vertices) + 1):
            best: tuple[int, ...] | None = None
            for tour in permutations(vertices, length):
                if tour[0] != min(tour):
                    continue
                ok = all(
                    (tour[t], tour[(t + 1) % length]) in edge_set for t in range(length)
                )
                if ok and (best is None or tour < best):
                    best = tour
            if best is not None:
                return best
        return None

    def has_cycle(self) -> bool:
        return self.find_cycle() is not None

    def to_json_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges]}


def adjusted_profile(inst: Instance, allocation: Allocation) -> AdjustedProfile:
    allocation.validate_for(inst)
    n = inst.n
    values = []
    for i in range(n):
        own = sum(inst.values[i][j] for j in allocation.bundles[i].items)
        d = maximin_value(inst, i, allocation)
        values.append(Fraction(own) + Fraction((n - 1) * d, n))
    return AdjustedProfile(tuple(values))


def leximin_compare(p: AdjustedProfile, q: AdjustedProfile) -> int:
    """-1, 0 or +1: lexicographic comparison of ascending-sorted profiles."""
    if len(p.values) != len(q.values):
        raise InputError(
            f"profiles have different lengths: {len(p.values)} vs {len(q.values)}"
        )
    for a, b in zip(p.ascending, q.ascending):
        if a != b:
            return 1 if a > b else -1
    return 0


def leximin_max(
    inst: Instance, budget: int | None = None
) -> tuple[Allocation, AdjustedProfile]:
    """Exhaustive leximin maximum; ties go to the smallest allocation index."""
    from .oracle import allocation_count, allocation_from_index

    total = allocation_count(inst.n, inst.m)
    limit = resolve_budget(budget)
    if total > limit:
        raise ResourceBudgetError(
            f"leximin scan needs {total} allocations, budget is {limit}"
        )
    values, totals = _kernels.instance_arrays(inst.values, inst.totals)
    best_idx = -1
    best_profile: np.ndarray | None = None
    pos = 0
    while pos < total:
        count = min(_kernels.CHUNK, total - pos)
        idx, profile = _kernels.leximin_scan(values, totals, pos, count)
        if best_profile is None or _int_profile_less(best_profile, profile):
            best_idx, best_profile = idx, profile
        pos += count
    allocation = allocation_from_index(inst.n, inst.m, best_idx)
    return allocation, adjusted_profile(inst, allocation)


def _int_profile_less(current: np.ndarray, candidate: np.ndarray) -> bool:
    for a, b in zip(current, candidate):
        if b != a:
            return b > a
    return False


def envy_graph(inst: Instance, allocation: Allocation) -> EnvyGraph:
    """Edges i -> j where i strictly envies j up to j's least item (strict EFx envy)."""
    allocation.validate_for(inst)
    n = inst.n
    edges = []
    for i in range(n):
        row = inst.values[i]
        own = sum(row[j] for j in allocation.bundles[i].items)
        for k in range(n):
            if k == i or not allocation.bundles[k]:
                continue
            vals = [row[j] for j in allocation.bundles[k].items]
            if sum(vals) - min(vals) > own:
                edges.append((i, k))
    return EnvyGraph(n=n, edges=tuple(edges))


def cycle_swap(inst: Instance, allocation: Allocation) -> Allocation | None:
    """Rotate bundles along one strict-EFx envy cycle, or None if the graph is acyclic.

    Each agent on the cycle receives the bundle of the agent she envies; the
    result strictly leximin-dominates the input.
    """
    graph = envy_graph(inst, allocation)
    cycle = graph.find_cycle()
    if cycle is None:
        return None
    new_bundles = list(allocation.bundles)
    length = len(cycle)
    for t, agent in enumerate(cycle):
        giver = cycle[(t + 1) % length]
        new_bundles[agent] = allocation.bundles[giver]
    return Allocation(tuple(new_bundles))
