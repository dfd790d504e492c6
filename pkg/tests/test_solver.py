import dataclasses

import pytest

from propm import (
    Allocation,
    InputError,
    Instance,
    Notion,
    check,
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
from propm.oracle import random_instance
from propm.solver import (
    BigItemReduction,
    CaseApplied,
    LadderBuilt,
    SubSplit,
    certificate_from_json_dict,
    certificate_to_json_dict,
)


def _assert_solved(inst, result):
    allocation, certificate = result
    report = check(inst, allocation, Notion.PROPM)
    assert report.all_satisfied
    assert verify_certificate(inst, allocation, certificate)
    return allocation, certificate


# ---------------------------------------------------------------------------
# reduce_big_items
# ---------------------------------------------------------------------------


def test_reduce_fires_on_over_share_item():
    inst = Instance.of([[50, 10, 20, 20], [10, 30, 30, 30], [10, 30, 30, 30]])
    red = reduce_big_items(inst)
    assert red.assignments == ((0, 0),)
    assert red.residual_agents == (1, 2)
    assert red.residual_items == (1, 2, 3)


def test_reduce_identity_when_balanced():
    inst = Instance.of([[25, 25, 25, 25], [25, 25, 25, 25]])
    red = reduce_big_items(inst)
    assert red.assignments == ()
    assert red.residual_agents == (0, 1)


def test_reduce_single_item_two_agents():
    inst = Instance.of([[7], [3]])
    red = reduce_big_items(inst)
    assert red.assignments == ((0, 0),)
    assert red.residual_agents == (1,)
    assert red.residual_items == ()


def test_reduce_thresholds_are_residual_relative():
    # after agent 0 takes item 0, item 1 becomes over-share for agent 1
    inst = Instance.of([[90, 10, 10], [10, 45, 46], [10, 45, 46]])
    red = reduce_big_items(inst)
    assert red.assignments[0] == (0, 0)
    assert len(red.assignments) >= 2


# ---------------------------------------------------------------------------
# solve2 / solve3 / solve4 / solve5
# ---------------------------------------------------------------------------


def test_solve2_cut_and_choose(i_2a):
    allocation, certificate = _assert_solved(i_2a, solve2(i_2a))
    assert [b.items for b in allocation.bundles] == [(0,), (1,)]
    case = next(s for s in certificate.steps if isinstance(s, CaseApplied))
    assert case.lemma == "n2.cut_and_choose"


def test_solve2_identical_items():
    inst = Instance.of([[50, 50], [50, 50]])
    allocation, _ = _assert_solved(inst, solve2(inst))
    assert all(len(b) == 1 for b in allocation.bundles)


def test_solve2_single_item():
    inst = Instance.of([[100], [100]])
    allocation, _ = _assert_solved(inst, solve2(inst))
    # chooser (agent 1) takes the item, divider is satisfied via the bonus
    assert allocation.bundles[1].items == (0,)
    assert allocation.bundles[0].items == ()


def test_solve2_wrong_size(i_eps):
    with pytest.raises(InputError):
        solve2(i_eps)


def test_solve3_eps_via_solve_propm(i_eps):
    allocation, certificate = _assert_solved(i_eps, solve_propm(i_eps))
    # 3*94 > 100 so the big item is split off first
    assert isinstance(certificate.steps[0], BigItemReduction)
    assert allocation.bundles[0].items == (0,)


def test_solve3_identical_three_items():
    inst = Instance.of([[10, 10, 10]] * 3)
    allocation, _ = _assert_solved(inst, solve3(inst))
    assert sorted(len(b) for b in allocation.bundles) == [1, 1, 1]


def test_solve3_randoms():
    for s in range(80):
        inst = random_instance(3, 6, 100, seed=7700 + s)
        _assert_solved(inst, solve3(inst))


def test_solve4_identical():
    inst = Instance.of([[30, 25, 20, 15, 10]] * 4)
    _assert_solved(inst, solve4(inst))


def test_solve4_four_equal_items():
    inst = Instance.of([[25, 25, 25, 25]] * 4)
    allocation, _ = _assert_solved(inst, solve4(inst))
    assert sorted(len(b) for b in allocation.bundles) == [1, 1, 1, 1]


def test_solve4_c0_leftover_branch():
    # find a seeded instance that dispatches n4.c=0b: one rival holds the
    # leftover rung, the divider takes A, the rest split B+C
    hits = 0
    for s in range(4000):
        inst = random_instance(4, 6, 100, seed=9000 + s)
        allocation, certificate = solve4(inst)
        case = next(st for st in certificate.steps if isinstance(st, CaseApplied))
        if case.lemma == "n4.c=0b":
            hits += 1
            _assert_solved(inst, (allocation, certificate))
            roles = dict(case.roles)
            assert "leftover_agent" in roles
            break
    assert hits, "no instance dispatched the c=0 leftover branch"


def test_solve5_five_equal_items():
    inst = Instance.of([[20, 20, 20, 20, 20]] * 5)
    allocation, _ = _assert_solved(inst, solve5(inst))
    assert sorted(len(b) for b in allocation.bundles) == [1, 1, 1, 1, 1]


def test_solve5_identical():
    inst = Instance.of([[35, 25, 20, 12, 8]] * 5)
    _assert_solved(inst, solve5(inst))


def test_solve5_randoms():
    for s in range(60):
        inst = random_instance(5, 9, 100, seed=5500 + s)
        _assert_solved(inst, solve5(inst))


def test_solve5_low_ae_agent_is_the_abe_agent():
    # Crafted so that among agents 1..4 exactly three clear the A+E bar,
    # exactly one clears the A+B+E bar, and they are the same agent: she
    # takes B outright, which she values strictly above a fifth.
    inst = Instance.of(
        [
            [10] * 10,
            [7, 8, 7, 8, 30, 30, 2, 2, 3, 3],
            [12, 13, 12, 13, 5, 5, 10, 10, 10, 10],
            [12, 13, 12, 13, 5, 5, 10, 10, 10, 10],
            [12, 13, 12, 13, 5, 5, 10, 10, 10, 10],
        ]
    )
    allocation, certificate = _assert_solved(inst, solve5(inst))
    case = next(s for s in certificate.steps if isinstance(s, CaseApplied))
    assert case.lemma == "n5.cAE=3.cABE=1a"
    assert allocation.bundles[1].items == (4, 5)


def test_case_dispatch_variety():
    # a moderate sweep must exercise a healthy spread of the case table
    hits = set()

    def collect(cert):
        for step in cert.steps:
            if isinstance(step, CaseApplied):
                hits.add(step.lemma)
            elif isinstance(step, SubSplit):
                collect(step.certificate)

    for s in range(250):
        _, cert = solve4(random_instance(4, 4 + s % 7, 100, seed=100000 + s))
        collect(cert)
    for s in range(250):
        _, cert = solve5(random_instance(5, 5 + s % 6, 100, seed=200000 + s))
        collect(cert)
    expected = {
        "n2.cut_and_choose",
        "n3.two_distinct",
        "n3.one_bundle",
        "n4.c=0a",
        "n4.c=0b",
        "n4.c=1",
        "n4.c=2",
        "n4.c=3a",
        "n5.cABE=2",
        "n5.cABE=3",
        "n5.cAE=0a",
        "n5.cAE=0b",
        "n5.cAE=1",
        "n5.cAE=2a",
    }
    assert expected <= hits, expected - hits


def test_solver_handles_zero_valuations():
    inst = Instance.of([[0, 0, 0], [5, 5, 5], [1, 2, 3]])
    _assert_solved(inst, solve3(inst))


def test_solve_propm_large_n_with_reductions():
    # six agents, each with one personal over-share item, reduce to nothing
    rows = []
    for i in range(6):
        row = [1] * 6
        row[i] = 100
        rows.append(row)
    inst = Instance.of(rows)
    _assert_solved(inst, solve_propm(inst))


def test_solve_propm_unsupported_size():
    inst = Instance.of([[1] * 8] * 8)
    from propm import UnsupportedSizeError

    with pytest.raises(UnsupportedSizeError):
        solve_propm(inst)


def test_solve_propm_single_agent():
    inst = Instance.of([[3, 4]])
    allocation, certificate = solve_propm(inst)
    assert allocation.bundles[0].items == (0, 1)
    assert verify_certificate(inst, allocation, certificate)


def test_solve_propm_zero_items():
    inst = Instance.of([[], [], []])
    allocation, certificate = solve_propm(inst)
    assert all(not b for b in allocation.bundles)
    assert verify_certificate(inst, allocation, certificate)


def test_metabundle_bounds_on_ladders():
    for s in range(40):
        n = 4 + s % 2
        inst = random_instance(n, 9, 100, seed=2600 + s)
        _, certificate = solve_propm(inst)
        _check_metabundles(inst, certificate)


def _check_metabundles(inst, certificate):
    for step in certificate.steps:
        if isinstance(step, LadderBuilt):
            rungs = step.rungs
            base = [j for rung in rungs for j in rung]
            divider = step.divider
            base_v = sum(inst.values[divider][j] for j in base)
            if len(rungs) == 4:
                ad = sum(inst.values[divider][j] for rung in (rungs[2], rungs[3]) for j in rung)
                assert 2 * ad >= base_v
            if len(rungs) == 5:
                ae = sum(inst.values[divider][j] for rung in (rungs[3], rungs[4]) for j in rung)
                abe = sum(
                    inst.values[divider][j]
                    for rung in (rungs[2], rungs[3], rungs[4])
                    for j in rung
                )
                assert 5 * ae >= 2 * base_v
                assert 5 * abe >= 3 * base_v
        elif isinstance(step, SubSplit):
            _check_metabundles(inst, step.certificate)


def test_ladder_discipline_holds():
    for s in range(60):
        n = 3 + s % 3
        inst = random_instance(n, 8, 100, seed=3300 + s)
        allocation, certificate = solve_propm(inst)
        assert ladder_discipline_ok(inst, certificate)


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


def test_certificate_json_round_trip(i_2a):
    _, certificate = solve2(i_2a)
    data = certificate_to_json_dict(certificate)
    assert certificate_from_json_dict(data) == certificate


def test_replay_reproduces_allocation():
    inst = random_instance(5, 9, 100, seed=123)
    allocation, certificate = solve_propm(inst)
    assert replay_certificate(inst, certificate) == allocation


def test_certificate_rejects_wrong_allocation(i_2a):
    allocation, certificate = solve2(i_2a)
    other = Allocation.of([[1], [0]])
    assert not verify_certificate(i_2a, other, certificate)


def test_certificate_rejects_flipped_comparison():
    inst = random_instance(4, 7, 100, seed=77)
    allocation, certificate = solve_propm(inst)

    def flip_first_case(cert):
        steps = list(cert.steps)
        for idx, step in enumerate(steps):
            if isinstance(step, CaseApplied) and step.comparisons:
                comp = step.comparisons[0]
                flipped = dataclasses.replace(comp, lhs=comp.lhs + 1)
                steps[idx] = dataclasses.replace(step, comparisons=(flipped,) + step.comparisons[1:])
                return dataclasses.replace(cert, steps=tuple(steps))
        raise AssertionError("expected a case with comparisons")

    assert not verify_certificate(inst, allocation, flip_first_case(certificate))


def test_certificate_rejects_mutated_subsplit():
    inst = random_instance(4, 7, 100, seed=1)
    allocation, certificate = solve_propm(inst)
    steps = list(certificate.steps)
    for idx, step in enumerate(steps):
        if isinstance(step, SubSplit):
            steps[idx] = dataclasses.replace(step, agents=step.agents[:-1])
            mutated = dataclasses.replace(certificate, steps=tuple(steps))
            assert not verify_certificate(inst, allocation, mutated)
            return
    raise AssertionError("expected at least one sub-split")


def test_certificate_shape_must_match(i_2a, i_eps):
    allocation, certificate = solve2(i_2a)
    assert not verify_certificate(i_eps, Allocation.of([[0], [1], [2, 3, 4, 5, 6]]), certificate)
