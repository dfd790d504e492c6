"""Close-to-proportional (CP) bundles and the recursive ladder built from them.

A CP bundle for agent i, parameter k, base set S is the most valuable subset
B of S with k * v_i(B) <= v_i(S); ties go first to maximum cardinality and
then to the lexicographically smallest sorted index list, which makes every
construction downstream deterministic and certifiable.

Finding a CP bundle is as hard as subset sum, so computation is exact but
pseudo-polynomial: a DP over achievable value sums (with witness masks) when
the value range is moderate, and meet-in-the-middle when the range is huge
but the item count small.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import Bundle, InputError, Instance, ResourceBudgetError, value_of

# Switch to meet-in-the-middle above this DP table size.
DP_SUM_LIMIT = 2_000_000
# Meet-in-the-middle enumerates 2^(m/2) subsets per half.
MITM_ITEM_LIMIT = 34
# Witness masks must fit in a signed int64 for the kernels.
KERNEL_MASK_LIMIT = 62


@dataclass(frozen=True)
class CpLadder:
    """Recursively built bundles [S_r, S_(r-1), ..., S_1] for one divider agent.

    S_k is the CP bundle with parameter k over what remains after the higher
    rungs were removed; S_1 is the leftover. The rungs partition the base set
    they were built from.
    """

    divider: int
    rungs: tuple[Bundle, ...]

    @property
    def n_rungs(self) -> int:
        return len(self.rungs)

    def base(self) -> Bundle:
        items: tuple[int, ...] = ()
        for rung in self.rungs:
            items = items + rung.items
        return Bundle.of(items)

    def to_json_dict(self) -> dict:
        return {"divider": self.divider, "rungs": [list(r.items) for r in self.rungs]}


def _best_subset(vals: tuple[int, ...], cap: int, strategy: str | None = None):
    """(value, cardinality, reversed-bit mask) of the best subset with sum <= cap.

    Bit (len(vals)-1-p) represents position p, so among equal-cardinality
    witnesses the numerically largest mask is the lexicographically smallest
    sorted position list.
    """
    m = len(vals)
    if m == 0:
        return 0, 0, 0
    if strategy is None:
        if cap + 1 <= DP_SUM_LIMIT:
            strategy = "dp"
        elif m <= MITM_ITEM_LIMIT:
            strategy = "mitm"
        else:
            raise ResourceBudgetError(
                f"CP bundle over {m} items with value cap {cap} is out of reach "
                f"(DP limit {DP_SUM_LIMIT}, meet-in-the-middle limit {MITM_ITEM_LIMIT} items)"
            )
    if strategy == "dp":
        if m <= KERNEL_MASK_LIMIT:
            reach, card, mask = _kernels.cp_table(np.array(vals, dtype=np.int64), cap)
            best_sum = int(np.nonzero(reach)[0][-1])
            return best_sum, int(card[best_sum]), int(mask[best_sum])
        return _dp_python(vals, cap)
    if strategy == "mitm":
        return _meet_in_the_middle(vals, cap)
    raise InputError(f"unknown CP strategy {strategy!r}")


def _dp_python(vals, cap):
    # Unbounded-int masks: used only when the item count exceeds the kernels' 62-bit limit.
    m = len(vals)
    size = cap + 1
    reach = [False] * size
    card = [-1] * size
    mask = [0] * size
    reach[0] = True
    card[0] = 0
    for p, v in enumerate(vals):
        bit = 1 << (m - 1 - p)
        if v == 0:
            for s in range(size):
                if reach[s]:
                    card[s] += 1
                    mask[s] |= bit
        elif v <= cap:
            for s in range(cap, v - 1, -1):
                src = s - v
                if reach[src]:
                    cand = (card[src] + 1, mask[src] | bit)
                    if not reach[s] or cand > (card[s], mask[s]):
                        reach[s] = True
                        card[s], mask[s] = cand
    best_sum = max(s for s in range(size) if reach[s])
    return best_sum, card[best_sum], mask[best_sum]


def _enumerate_half(vals, offset, m_total):
    """All subset states (sum, cardinality, mask) for one half of the items."""
    states = [(0, 0, 0)]
    for p, v in enumerate(vals):
        bit = 1 << (m_total - 1 - (offset + p))
        states.extend([(s + v, c + 1, mk | bit) for (s, c, mk) in states])
    return states


def _meet_in_the_middle(vals, cap):
    m = len(vals)
    half = m // 2
    left = _enumerate_half(vals[:half], 0, m)
    right = _enumerate_half(vals[half:], half, m)

    # Best (cardinality, mask) per distinct right-half sum; larger sums always
    # dominate on value, so only the maximal feasible sum per query matters.
    best_by_sum: dict[int, tuple[int, int]] = {}
    for s, c, mk in right:
        cur = best_by_sum.get(s)
        if cur is None or (c, mk) > cur:
            best_by_sum[s] = (c, mk)
    sums = sorted(best_by_sum)

    best = (-1, -1, -1)  # (value, cardinality, mask)
    for ls, lc, lmask in left:
        budget = cap - ls
        if budget < 0:
            continue
        pos = bisect_right(sums, budget)
        if pos == 0:
            continue
        rs = sums[pos - 1]
        rc, rmask = best_by_sum[rs]
        cand = (ls + rs, lc + rc, lmask | rmask)
        if cand > best:
            best = cand
    return best


def cp_bundle(
    inst: Instance,
    agent: int,
    k: int,
    base: Bundle,
    strategy: str | None = None,
) -> Bundle:
    """The CP bundle for ``agent`` with parameter ``k`` over base set ``base``.

    Deterministic: value-maximal subject to k*v(B) <= v(base), then
    cardinality-maximal, then lexicographically smallest index list.
    """
    if k < 1:
        raise InputError(f"k must be at least 1, got {k}")
    base.validate_for(inst.m)
    if not 0 <= agent < inst.n:
        raise InputError(f"agent index {agent} out of range for n={inst.n}")
    items = base.items
    if not items:
        return Bundle()
    row = inst.values[agent]
    vals = tuple(row[j] for j in items)
    total = sum(vals)
    cap = total // k
    _, _, mask = _best_subset(vals, cap, strategy=strategy)
    m = len(items)
    chosen = tuple(items[p] for p in range(m) if (mask >> (m - 1 - p)) & 1)
    return Bundle(chosen)


def cp_ladder(inst: Instance, agent: int, n_rungs: int, base: Bundle) -> CpLadder:
    """Build [S_r, ..., S_1] top-down: S_k = CP(k, remaining), S_1 = leftover."""
    if n_rungs < 1:
        raise InputError(f"n_rungs must be at least 1, got {n_rungs}")
    base.validate_for(inst.m)
    rungs = []
    remaining = base
    for k in range(n_rungs, 1, -1):
        rung = cp_bundle(inst, agent, k, remaining)
        rungs.append(rung)
        remaining = remaining - rung
    rungs.append(remaining)
    return CpLadder(divider=agent, rungs=tuple(rungs))


def validate_ladder(inst: Instance, ladder: CpLadder) -> bool:
    """True iff the ladder is exactly what cp_ladder builds and its bounds hold.

    All bounds are relative to the ladder's own base set (the union of its
    rungs): with r rungs, for every k the items strictly below rung k are
    worth at least (k-1)/r of the base to the divider.
    """
    if not 0 <= ladder.divider < inst.n:
        return False
    r = ladder.n_rungs
    if r < 1:
        return False
    seen: set[int] = set()
    for rung in ladder.rungs:
        try:
            rung.validate_for(inst.m)
        except InputError:
            return False
        if seen.intersection(rung.items):
            return False
        seen.update(rung.items)
    base = ladder.base()

    remaining = base
    for pos, k in enumerate(range(r, 1, -1)):
        expected = cp_bundle(inst, ladder.divider, k, remaining)
        if ladder.rungs[pos] != expected:
            return False
        remaining = remaining - expected
    if ladder.rungs[-1] != remaining:
        return False

    base_value = value_of(inst, ladder.divider, base)
    below = value_of(inst, ladder.divider, base)
    for pos, k in enumerate(range(r, 0, -1)):
        below -= value_of(inst, ladder.divider, ladder.rungs[pos])
        # 'below' is now the divider's value for S_(k-1) + ... + S_1.
        if r * below < (k - 1) * base_value:
            return False
    return True
