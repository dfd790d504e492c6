"""Exact toolkit for fair allocation of indivisible goods.

Verifies a family of proportionality and envy relaxations with exact
integer/rational arithmetic, constructs maximin-item-proportional (PROPm)
allocations for up to five agents with a replayable certificate, decides
existence questions by exhaustive enumeration, and explores adjusted-value
leximin orderings.
"""

from .core import (
    Allocation,
    Bundle,
    InputError,
    Instance,
    InvariantViolationError,
    ResourceBudgetError,
    Restriction,
    Share,
    UnsupportedSizeError,
    restrict,
    share_compare,
    value_of,
)
from .cpsets import CpLadder, cp_bundle, cp_ladder, validate_ladder
from .fairness import (
    FairnessReport,
    Notion,
    check,
    check_aefx_companion,
    maximin_value,
    min_item,
    mms_value,
    parse_notion,
)
from .leximin import (
    AdjustedProfile,
    EnvyGraph,
    adjusted_profile,
    cycle_swap,
    envy_graph,
    leximin_compare,
    leximin_max,
)
from .oracle import (
    AuditReport,
    ExistenceResult,
    enumerate_allocations,
    exists,
    implication_audit,
    make_counterexample,
    random_instance,
)
from .solver import (
    Certificate,
    ladder_discipline_ok,
    reduce_big_items,
    replay_certificate,
    solve2,
    solve3,
    solve4,
    solve5,
    solve_propm,
    verify_certificate,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "AdjustedProfile",
    "AuditReport",
    "Bundle",
    "Certificate",
    "CpLadder",
    "EnvyGraph",
    "ExistenceResult",
    "FairnessReport",
    "InputError",
    "Instance",
    "InvariantViolationError",
    "Notion",
    "ResourceBudgetError",
    "Restriction",
    "Share",
    "UnsupportedSizeError",
    "adjusted_profile",
    "check",
    "check_aefx_companion",
    "cp_bundle",
    "cp_ladder",
    "cycle_swap",
    "enumerate_allocations",
    "envy_graph",
    "exists",
    "implication_audit",
    "ladder_discipline_ok",
    "leximin_compare",
    "leximin_max",
    "make_counterexample",
    "maximin_value",
    "min_item",
    "mms_value",
    "parse_notion",
    "random_instance",
    "reduce_big_items",
    "replay_certificate",
    "restrict",
    "share_compare",
    "solve2",
    "solve3",
    "solve4",
    "solve5",
    "solve_propm",
    "validate_ladder",
    "value_of",
    "verify_certificate",
]
