from itertools import combinations

from hypothesis import given, settings
from hypothesis import strategies as st

from propm import Bundle, Instance, cp_bundle, cp_ladder, validate_ladder, value_of
from propm.cpsets import CpLadder, _best_subset
from propm.fairness import Notion, check
from propm.oracle import enumerate_allocations, random_instance


def brute_force_cp(values, k):
    """Independent oracle: scan all subsets, tie-break exactly as documented.

    Most valuable subset with k * v(B) <= v(S); then largest; then the
    lexicographically smallest sorted index list (compared as tuples).
    """
    m = len(values)
    total = sum(values)
    best = None
    for size in range(m + 1):
        for combo in combinations(range(m), size):
            v = sum(values[j] for j in combo)
            if k * v > total:
                continue
            if best is None:
                best = (v, len(combo), combo)
            else:
                bv, bc, bcombo = best
                if (v, len(combo)) > (bv, bc) or ((v, len(combo)) == (bv, bc) and combo < bcombo):
                    best = (v, len(combo), combo)
    return best


def test_cp_bundle_tie_break(i_cp):
    # {0,3} and {1,2} both reach 50; lexicographic order prefers {0,3}
    assert cp_bundle(i_cp, 0, 2, i_cp.all_items()).items == (0, 3)


def test_cp_bundle_single_big_item():
    inst = Instance.of([[9]])
    assert cp_bundle(inst, 0, 2, inst.all_items()).items == ()


def test_cp_bundle_k1_returns_all(i_cp):
    assert cp_bundle(inst=i_cp, agent=0, k=1, base=i_cp.all_items()).items == (0, 1, 2, 3)


def test_cp_bundle_zero_values_gravitate():
    inst = Instance.of([[5, 0, 0, 5]])
    bundle = cp_bundle(inst, 0, 2, inst.all_items())
    # one of the 5s plus both zero items
    assert value_of(inst, 0, bundle) == 5
    assert {1, 2} <= set(bundle.items)


def test_cp_bundle_matches_brute_force_randoms():
    for s in range(60):
        m = 1 + s % 10
        inst = random_instance(1, m, 40, seed=200 + s)
        values = inst.values[0]
        for k in (1, 2, 3, 4, 5):
            got = cp_bundle(inst, 0, k, inst.all_items())
            v, c, combo = brute_force_cp(values, k)
            assert value_of(inst, 0, got) == v, (s, k)
            assert len(got) == c, (s, k)
            assert got.items == combo, (s, k)


def test_cp_bundle_matches_brute_force_m16():
    inst = random_instance(1, 16, 100, seed=777)
    got = cp_bundle(inst, 0, 3, inst.all_items())
    v, c, combo = brute_force_cp(inst.values[0], 3)
    assert (value_of(inst, 0, got), len(got), got.items) == (v, c, combo)


def test_cp_strategies_agree():
    for s in range(25):
        m = 2 + s % 9
        inst = random_instance(1, m, 60, seed=500 + s)
        vals = tuple(inst.values[0])
        cap = sum(vals) // (2 + s % 3)
        assert _best_subset(vals, cap, strategy="dp") == _best_subset(
            vals, cap, strategy="mitm"
        ), (s, vals, cap)


def test_cp_python_dp_handles_many_items():
    # 70 items exceeds the 62-bit kernel mask; exercises the big-int DP path
    inst = Instance.of([[1] * 70])
    bundle = cp_bundle(inst, 0, 2, inst.all_items())
    assert len(bundle) == 35
    assert bundle.items == tuple(range(35))


def test_cp_ladder_two_rungs(i_cp):
    ladder = cp_ladder(i_cp, 0, 2, i_cp.all_items())
    assert ladder.rungs[0].items == (0, 3)
    assert ladder.rungs[1].items == (1, 2)
    assert value_of(i_cp, 0, ladder.rungs[1]) == 50


def test_cp_ladder_eps_three_rungs(i_eps):
    ladder = cp_ladder(i_eps, 0, 3, i_eps.all_items())
    # cap 33 over [94,1,...,1]: only the six ones fit
    assert ladder.rungs[0].items == (1, 2, 3, 4, 5, 6)
    assert value_of(i_eps, 0, ladder.rungs[0]) == 6
    assert validate_ladder(i_eps, ladder)


def test_cp_ladder_single_rung(i_cp):
    ladder = cp_ladder(i_cp, 0, 1, i_cp.all_items())
    assert ladder.rungs == (i_cp.all_items(),)


def test_validate_ladder_accepts_constructions():
    for s in range(40):
        n_rungs = 2 + s % 4
        m = 1 + s % 9
        inst = random_instance(1, m, 30, seed=900 + s)
        ladder = cp_ladder(inst, 0, n_rungs, inst.all_items())
        assert validate_ladder(inst, ladder), (s, ladder)


def test_validate_ladder_rejects_swapped_rungs(i_cp):
    ladder = cp_ladder(i_cp, 0, 2, i_cp.all_items())
    swapped = CpLadder(divider=0, rungs=(ladder.rungs[1], ladder.rungs[0]))
    assert not validate_ladder(i_cp, swapped)


def test_validate_ladder_empty_base(i_cp):
    ladder = CpLadder(divider=0, rungs=(Bundle(), Bundle(), Bundle()))
    assert validate_ladder(i_cp, ladder)


def test_validate_ladder_on_sub_base():
    # base excludes the big item the divider loves; bounds are base-relative
    inst = Instance.of([[100, 1, 1]])
    ladder = cp_ladder(inst, 0, 2, Bundle.of({1, 2}))
    assert validate_ladder(inst, ladder)


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_ladder_bound_property(data):
    n_rungs = data.draw(st.integers(min_value=1, max_value=5))
    m = data.draw(st.integers(min_value=0, max_value=8))
    row = data.draw(st.lists(st.integers(0, 30), min_size=m, max_size=m))
    inst = Instance.of([row]) if row else Instance.of([[0]])
    base = inst.all_items() if row else Bundle()
    ladder = cp_ladder(inst, 0, n_rungs, base)
    r = ladder.n_rungs
    base_value = value_of(inst, 0, base)
    below = base_value
    for pos, k in enumerate(range(r, 0, -1)):
        below -= value_of(inst, 0, ladder.rungs[pos])
        assert r * below >= (k - 1) * base_value


def test_top_rung_guarantees_satisfaction_under_any_completion():
    # handing an agent her k=n CP bundle makes her PROPm-satisfied no matter
    # how the rest is distributed
    for s in range(10):
        inst = random_instance(3, 5, 12, seed=40 + s)
        for agent in range(3):
            top = cp_bundle(inst, agent, 3, inst.all_items())
            rest = [j for j in range(5) if j not in top.items]
            others = [k for k in range(3) if k != agent]
            for completion in enumerate_allocations(2, len(rest)):
                bundles = [[] for _ in range(3)]
                bundles[agent] = list(top.items)
                for sub_idx, owner in enumerate(completion.owners(len(rest))):
                    bundles[others[owner]].append(rest[sub_idx])
                from propm import Allocation

                report = check(inst, Allocation.of(bundles), Notion.PROPM)
                assert report.per_agent[agent].satisfied
