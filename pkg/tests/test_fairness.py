from fractions import Fraction

import pytest

from propm import (
    Allocation,
    Bundle,
    InputError,
    Instance,
    Notion,
    check,
    check_aefx_companion,
    maximin_value,
    min_item,
    mms_value,
    parse_notion,
)
from propm.oracle import enumerate_allocations, random_instance

EPS_SPLIT = Allocation.of([[0], [1, 2, 3], [4, 5, 6]])


def test_min_item_singleton(i_eps):
    assert min_item(i_eps, 1, Bundle.of({0})) == 94


def test_min_item_direct(i_cp):
    assert min_item(i_cp, 0, Bundle.of({1, 2, 3})) == 10


def test_min_item_empty_is_undefined(i_eps):
    assert min_item(i_eps, 0, Bundle()) is None


def test_maximin_value_eps(i_eps):
    assert maximin_value(i_eps, 1, EPS_SPLIT) == 94


def test_maximin_value_empty_rivals():
    inst = Instance.of([[5, 5], [1, 1]])
    assert maximin_value(inst, 1, Allocation.of([[], [0, 1]])) == 0


def test_maximin_value_2a(i_2a):
    assert maximin_value(i_2a, 0, Allocation.of([[1], [0]])) == 60


def test_check_propm_eps(i_eps):
    report = check(i_eps, EPS_SPLIT, Notion.PROPM)
    assert report.all_satisfied
    # agent 1: value 3, bonus 94, threshold 100/3
    assert report.per_agent[1].slack == Fraction(3 + 94) - Fraction(100, 3)


def test_check_alt_median_eps(i_eps):
    report = check(i_eps, EPS_SPLIT, Notion.ALT_MEDIAN)
    assert not report.per_agent[1].satisfied
    # lower median of {94, 1, 1, 1} is 1
    assert report.per_agent[1].slack == Fraction(4) - Fraction(100, 3)


def test_check_aefx_eps(i_eps):
    report = check(i_eps, EPS_SPLIT, Notion.AEFX)
    assert report.all_satisfied
    # agent 1: 3 + (94+1)/3 against 100/3
    assert report.per_agent[1].slack == Fraction(3) + Fraction(95, 3) - Fraction(100, 3)


def test_check_rejects_incomplete(i_eps):
    with pytest.raises(InputError):
        check(i_eps, Allocation.of([[0], [1], [2]]), Notion.PROPM)


def test_mms_value_eps(i_eps):
    # best partition: {94} | {1,1,1} | {1,1,1}
    assert mms_value(i_eps, 0) == 3


def test_mms_single_agent():
    inst = Instance.of([[7, 5, 1]])
    assert mms_value(inst, 0) == 13


def test_mms_two_items_two_agents():
    inst = Instance.of([[10, 10], [10, 10]])
    assert mms_value(inst, 0) == 10


def test_mms_fewer_items_than_agents():
    inst = Instance.of([[9], [9], [9]])
    assert mms_value(inst, 0) == 0


def test_check_mms_verdict(i_eps):
    report = check(i_eps, EPS_SPLIT, Notion.MMS)
    assert [v.satisfied for v in report.per_agent] == [True, True, True]


def test_mms_budget_error(i_eps):
    from propm import ResourceBudgetError

    with pytest.raises(ResourceBudgetError):
        mms_value(i_eps, 0, budget=5)


def test_zero_total_agent_vacuously_satisfied():
    inst = Instance.of([[0, 0], [3, 4]])
    allocation = Allocation.of([[], [0, 1]])
    for notion in Notion:
        assert check(inst, allocation, notion).per_agent[0].satisfied, notion


def test_propx_prop1_empty_rivals_bonus_zero():
    inst = Instance.of([[4, 6], [1, 1]])
    allocation = Allocation.of([[0, 1], []])
    # agent 0 holds everything: bonus pools are empty, own value carries it
    assert check(inst, allocation, Notion.PROPX).per_agent[0].satisfied
    assert check(inst, allocation, Notion.PROP1).per_agent[0].satisfied


def test_minimax_empty_rival_caps_bonus():
    # one rival empty, one rich: the empty rival pins the minimax bonus at 0
    inst = Instance.of([[50, 50], [1, 1], [1, 1]])
    allocation = Allocation.of([[], [], [0, 1]])
    report = check(inst, allocation, Notion.ALT_MINIMAX)
    assert not report.per_agent[0].satisfied
    assert report.per_agent[0].slack == Fraction(0) - Fraction(100, 3)


def test_parse_notion_round_trip():
    for notion in Notion:
        assert parse_notion(notion.value) is notion
    with pytest.raises(InputError):
        parse_notion("nope")


def test_scaling_invariance():
    base = random_instance(3, 5, 20, seed=11)
    scaled_rows = [list(base.values[0]), [7 * v for v in base.values[1]], list(base.values[2])]
    scaled = Instance.of(scaled_rows)
    for allocation in enumerate_allocations(3, 5):
        for notion in Notion:
            got = check(base, allocation, notion)
            want = check(scaled, allocation, notion)
            assert [v.satisfied for v in got.per_agent] == [
                v.satisfied for v in want.per_agent
            ], (notion, allocation)


def test_companion_aefx_is_strict():
    inst = Instance.of([[5, 5], [5, 5]])
    allocation = Allocation.of([[0], [1]])
    weak = check(inst, allocation, Notion.AEFX)
    strict = check_aefx_companion(inst, allocation)
    assert weak.all_satisfied
    # own 5 vs rival (5 - 5) = 0: strictly positive, satisfied
    assert strict.all_satisfied
    on_edge = Instance.of([[5, 5], [5, 5]])
    boundary = Allocation.of([[0, 1], []])
    # agent 1: own 0 vs rival (10 - 5)/1 = 5: strict test fails
    assert not check_aefx_companion(on_edge, boundary).per_agent[1].satisfied


def test_report_json_slacks_are_fractions(i_eps):
    data = check(i_eps, EPS_SPLIT, Notion.PROPM).to_json_dict()
    assert data["per_agent"][1]["slack"] == "191/3"
