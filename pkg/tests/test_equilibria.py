from __future__ import annotations

import copy
import itertools
import random
from fractions import Fraction as F

import pytest

from gameval import (
    EnumerationCapExceeded,
    GameValidationError,
    Policy,
    ValueSet,
    best_response,
    build_path_tree,
    cost_J,
    enumerate_equilibria,
    is_equilibrium,
    iter_equilibria,
    one_step_equilibria,
    pareto_filter,
    set_value_bruteforce,
    set_value_dpp,
    strong_pareto_filter,
)
from gameval.dpp import random_game
from gameval.model import STATE_CLASS, SYMMETRIC_CLASS
from gameval.presets import build_pareto_spec


def pts(vs):
    return set(vs.points)


def test_table1_set_value_both_engines(table1):
    spec, tree, root = table1
    expected = {(F(0), F(1)), (F(1), F(0))}
    assert pts(set_value_bruteforce(spec, tree, root)) == expected
    assert pts(set_value_dpp(spec, tree, root)) == expected


def test_table2_set_values(table2_left, table2_right):
    for (spec, tree, root), expected in [
        (table2_left, {(F(3), F(3))}),
        (table2_right, {(F(2), F(2))}),
    ]:
        assert pts(set_value_bruteforce(spec, tree, root)) == expected


def test_table1_equilibrium_checks(table1):
    spec, tree, root = table1
    ok, slack = is_equilibrium(spec, tree, root, Policy(actions={root: (0, 0)}))
    assert ok and slack == (F(0), F(0))
    ok, slack = is_equilibrium(spec, tree, root, Policy(actions={root: (0, 1)}))
    assert not ok
    assert slack == (F(1), F(1))


def test_table1_best_response(table1):
    spec, tree, root = table1
    value, dev = best_response(spec, tree, root, Policy(actions={root: (1, 0)}), 0)
    assert value == F(0)
    assert dev.action(root)[0] == 0


def test_best_response_zero_game_picks_lowest_index():
    spec = random_game(random.Random(1))
    zero = copy.copy(spec)
    zero.running_costs = tuple(
        {k: F(0) for k in table} for table in spec.running_costs
    )
    zero.terminal_costs = tuple(
        {k: F(0) for k in table} for table in spec.terminal_costs
    )
    tree = build_path_tree(zero)
    root = tree.id_of(("r0",))
    frozen = Policy(actions={nid: (1, 1) for nid in tree.decision_nodes(root)})
    value, dev = best_response(zero, tree, root, frozen, 0)
    assert value == F(0)
    assert all(dev.action(nid)[0] == 0 for nid in tree.decision_nodes(root))


def test_best_response_matches_deviation_policy_enumeration():
    rng = random.Random(5)
    for _ in range(8):
        spec = random_game(rng, max_periods=2, allow_zero=rng.random() < 0.4)
        tree = build_path_tree(spec)
        root = tree.id_of(("r0",))
        nodes = tree.decision_nodes(root)
        frozen = Policy(
            actions={nid: (rng.randrange(2), rng.randrange(2)) for nid in nodes}
        )
        for player in range(2):
            value, _ = best_response(spec, tree, root, frozen, player)
            # oracle: enumerate every deviation policy of this player
            best = None
            for combo in itertools.product(range(2), repeat=len(nodes)):
                actions = {}
                for k, nid in enumerate(nodes):
                    joint = list(frozen.action(nid))
                    joint[player] = combo[k]
                    actions[nid] = tuple(joint)
                cand = cost_J(spec, tree, root, Policy(actions=actions))[player]
                best = cand if best is None else min(best, cand)
            assert value == best


def test_path_game_path_dependent_equilibrium(path_game):
    spec, tree, root = path_game
    actions = {nid: (0, 0) for nid in tree.decision_nodes(root)}
    actions[tree.id_of(("s0", "s11", "s2"))] = (1, 1)
    policy = Policy(actions=actions)
    ok, _ = is_equilibrium(spec, tree, root, policy)
    assert ok
    assert cost_J(spec, tree, root, policy) == (F(1, 8), F(1, 8))


def test_path_game_set_values(path_game):
    spec, tree, root = path_game
    expected = {(F(0), F(1, 4)), (F(1, 4), F(0)), (F(1, 8), F(1, 8))}
    assert pts(set_value_bruteforce(spec, tree, root)) == expected
    assert pts(set_value_dpp(spec, tree, root)) == expected
    assert pts(set_value_bruteforce(spec, tree, root, cls=STATE_CLASS)) == {
        (F(0), F(1, 4)),
        (F(1, 4), F(0)),
    }
    assert pts(set_value_bruteforce(spec, tree, root, cls=SYMMETRIC_CLASS)) == expected


def test_fast_and_general_enumeration_agree():
    rng = random.Random(9)
    for _ in range(12):
        spec = random_game(rng)
        tree = build_path_tree(spec)
        root = tree.id_of(("r0",))
        fast = set_value_bruteforce(spec, tree, root)
        slow_spec = copy.copy(spec)
        slow_spec.q_positive = False  # forces the generic enumerator
        slow = set_value_bruteforce(slow_spec, tree, root)
        assert pts(fast) == pts(slow)


def test_large_eps_accepts_everything(table1):
    spec, tree, root = table1
    vs = set_value_bruteforce(spec, tree, root, eps=F(10))
    assert len(vs) == 4
    assert vs.epsilon == F(10)


def test_eps_nesting(table1):
    spec, tree, root = table1
    small = set_value_bruteforce(spec, tree, root, eps=F(1, 2))
    large = set_value_bruteforce(spec, tree, root, eps=F(3, 2))
    for p in small.points:
        assert large.contains(p)


def test_value_set_membership_is_strict():
    vs = ValueSet.of([(F(0), F(0))], epsilon=F(1))
    assert vs.contains((F(1, 2), F(0)))
    assert not vs.contains((F(1), F(0)))  # boundary excluded
    exact = ValueSet.of([(F(0), F(0))])
    assert exact.contains((F(0), F(0)))
    assert not exact.contains((F(0), F(1, 100)))


def test_enumeration_cap_reports_required_count(path_game):
    spec, tree, root = path_game
    with pytest.raises(EnumerationCapExceeded) as err:
        set_value_bruteforce(spec, tree, root, cap=10)
    assert err.value.required == 4**5


def test_class_mismatch_rejected(path_game):
    spec, tree, root = path_game
    actions = {nid: (0, 0) for nid in tree.decision_nodes(root)}
    actions[tree.id_of(("s0", "s11", "s2"))] = (1, 1)
    policy = Policy(actions=actions, policy_class=STATE_CLASS)
    with pytest.raises(GameValidationError, match="state dependent"):
        is_equilibrium(spec, tree, root, policy, cls=STATE_CLASS)


def test_symmetric_class_needs_equal_action_sets():
    spec = random_game(random.Random(2))
    uneven = copy.copy(spec)
    uneven.actions = (("0", "1"), ("a", "b"))
    tree = build_path_tree(uneven)
    root = tree.id_of(("r0",))
    with pytest.raises(GameValidationError, match="identical action sets"):
        set_value_bruteforce(uneven, tree, root, cls=SYMMETRIC_CLASS)


# -- one-step games ---------------------------------------------------------------


def test_one_step_last_period_of_path_game(path_game):
    spec, tree, root = path_game
    nid = tree.id_of(("s0", "s10", "s2"))
    node = tree.node(nid)
    continuation = {
        child: spec.terminal_vector(tree.node(child).prefix) for child in node.children
    }
    records = one_step_equilibria(spec, tree, nid, continuation)
    values = {rec.policy.action(nid): rec.value for rec in records}
    assert values == {(0, 0): (F(0), F(1, 4)), (1, 1): (F(1, 4), F(0))}


def test_one_step_single_action_trivial():
    spec = random_game(random.Random(3), n_actions=1)
    tree = build_path_tree(spec)
    root = tree.id_of(("r0",))
    node = tree.node(root)
    continuation = {child: (F(0), F(0)) for child in node.children}
    records = one_step_equilibria(spec, tree, root, continuation)
    assert len(records) == 1
    assert records[0].policy.action(root) == (0, 0)


def test_one_step_perturbed_first_period_games():
    eps = F(1, 100)
    spec = build_pareto_spec(eps)
    tree = build_path_tree(spec)
    root = tree.id_of(("s0",))
    children = tree.node(root).children
    by_state = {tree.node(c).prefix[-1]: c for c in children}
    low = {"s10": (F(2), F(2)), "s11": (F(1), F(5)), "s12": (F(5), F(1)), "s13": (F(4), F(4))}
    high = {"s10": (F(3), F(3)), "s11": (F(6), F(6)), "s12": (F(6), F(6)), "s13": (F(7), F(7))}

    records = one_step_equilibria(
        spec, tree, root, {by_state[s]: v for s, v in low.items()}
    )
    assert len(records) == 1
    assert records[0].value == (4 - 4 * eps, 4 - 4 * eps)

    records = one_step_equilibria(
        spec, tree, root, {by_state[s]: v for s, v in high.items()}
    )
    assert len(records) == 1
    assert records[0].value == (3 + 10 * eps, 3 + 10 * eps)


# -- order filters ------------------------------------------------------------------


def test_pareto_filter_cases():
    incomparable = ValueSet.of([(F(0), F(1)), (F(1), F(0))])
    assert pts(pareto_filter(incomparable)) == pts(incomparable)
    dominated = ValueSet.of([(F(2), F(2)), (F(3), F(3))])
    assert pts(pareto_filter(dominated)) == {(F(2), F(2))}
    single = ValueSet.of([(F(1), F(1))])
    assert pts(pareto_filter(single)) == {(F(1), F(1))}
    # partial domination with equality in one coordinate still removes the point
    mixed = ValueSet.of([(F(0), F(1)), (F(0), F(2))])
    assert pts(pareto_filter(mixed)) == {(F(0), F(1))}


def test_pareto_filter_idempotent_and_nonempty():
    rng = random.Random(31)
    for _ in range(50):
        points = [
            (F(rng.randint(-4, 4), 2), F(rng.randint(-4, 4), 2))
            for _ in range(rng.randint(1, 6))
        ]
        vs = ValueSet.of(points)
        once = pareto_filter(vs)
        assert len(once) > 0
        assert pts(pareto_filter(once)) == pts(once)


def test_strong_pareto_on_comparison_games(table2_left, table2_right):
    spec, tree, root = table2_left
    records = enumerate_equilibria(spec, tree, root)
    assert pts(strong_pareto_filter(spec, tree, root, records)) == set()
    spec, tree, root = table2_right
    records = enumerate_equilibria(spec, tree, root)
    assert pts(strong_pareto_filter(spec, tree, root, records)) == {(F(2), F(2))}


def test_strong_pareto_contained_in_pareto():
    rng = random.Random(37)
    for _ in range(10):
        spec = random_game(rng, max_periods=2)
        tree = build_path_tree(spec)
        root = tree.id_of(("r0",))
        records = enumerate_equilibria(spec, tree, root)
        values = ValueSet.of(r.value for r in records)
        strong = strong_pareto_filter(spec, tree, root, records)
        assert pts(strong) <= pts(pareto_filter(values))


# -- the recursion -----------------------------------------------------------------


def test_dpp_requires_positive_kernel():
    rng = random.Random(41)
    spec = None
    while spec is None or spec.q_positive:
        spec = random_game(rng, allow_zero=True)
    tree = build_path_tree(spec)
    with pytest.raises(GameValidationError, match="q > 0"):
        set_value_dpp(spec, tree, tree.id_of(("r0",)))


def test_dpp_selection_cap(state_game):
    spec, tree, root = state_game
    with pytest.raises(EnumerationCapExceeded):
        set_value_dpp(spec, tree, root, selection_cap=1)


def test_dpp_one_period_reduces_to_static(table1):
    spec, tree, root = table1
    assert pts(set_value_dpp(spec, tree, root)) == pts(set_value_bruteforce(spec, tree, root))


def test_dpp_matches_bruteforce_on_random_specs():
    rng = random.Random(43)
    for _ in range(25):
        spec = random_game(rng)
        tree = build_path_tree(spec)
        root = tree.id_of(("r0",))
        assert pts(set_value_dpp(spec, tree, root)) == pts(
            set_value_bruteforce(spec, tree, root)
        )


def test_iter_equilibria_lazy_and_consistent(path_game):
    spec, tree, root = path_game
    lazy = {rec.value for rec in iter_equilibria(spec, tree, root, with_policies=False)}
    assert lazy == pts(set_value_bruteforce(spec, tree, root))


def test_symmetric_values_are_contained_in_the_full_set():
    rng = random.Random(47)
    for _ in range(10):
        spec = random_game(rng)
        tree = build_path_tree(spec)
        root = tree.id_of(("r0",))
        symmetric = set_value_bruteforce(spec, tree, root, cls=SYMMETRIC_CLASS)
        full = set_value_bruteforce(spec, tree, root)
        assert pts(symmetric) <= pts(full)
