"""Verification layer for the set-value dynamic programming identity.

``verify_dpp`` compares the set value at a node (lhs) against the set built
from truncated games whose terminal data are selected pointwise from later
set values (rhs), for the full, state, symmetric, and Pareto variants. The
module also houses the two analytic demonstrations: the perturbed two-period
game where the Pareto recursion fails in both directions, and the two-period
linear-quadratic game with open-loop controls where composing stagewise
equilibria does not reproduce the whole-game equilibrium value.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .equilibria import (
    DEFAULT_POLICY_CAP,
    DEFAULT_SELECTION_CAP,
    ValueSet,
    _Scope,
    iter_equilibria,
    pareto_filter,
)
from .errors import EnumerationCapExceeded, GameValidationError
from .model import (
    PATH_CLASS,
    STATE_CLASS,
    SYMMETRIC_CLASS,
    ZERO,
    GameSpec,
    PathTree,
    StoppingTime,
    Vector,
    build_path_tree,
)
from .presets import build_pareto_spec, pareto_tables

VARIANTS = ("full", "state", "symmetric", "pareto")
SELECTION_CLASSES = (PATH_CLASS, STATE_CLASS)

_VARIANT_POLICY_CLASS = {
    "full": PATH_CLASS,
    "state": STATE_CLASS,
    "symmetric": SYMMETRIC_CLASS,
    "pareto": PATH_CLASS,
}


@dataclass(frozen=True)
class DppReport:
    """Outcome of one set-value comparison."""

    lhs: ValueSet
    rhs: ValueSet
    relation: str
    lhs_only: tuple[Vector, ...]
    rhs_only: tuple[Vector, ...]
    context: dict = field(default_factory=dict, compare=False)


def compare_sets(lhs: ValueSet, rhs: ValueSet, context: dict | None = None) -> DppReport:
    left, right = set(lhs.points), set(rhs.points)
    if left == right:
        relation = "equal"
    elif left < right:
        relation = "lhs_subset"
    elif right < left:
        relation = "rhs_subset"
    else:
        relation = "incomparable"
    return DppReport(
        lhs=lhs,
        rhs=rhs,
        relation=relation,
        lhs_only=tuple(sorted(left - right)),
        rhs_only=tuple(sorted(right - left)),
        context=context or {},
    )


def _variant_set(
    spec: GameSpec, tree: PathTree, nid: int, variant: str, cap: int
) -> ValueSet:
    cls = _VARIANT_POLICY_CLASS[variant]
    values = {
        rec.value
        for rec in iter_equilibria(spec, tree, nid, cls=cls, cap=cap, with_policies=False)
    }
    vs = ValueSet.of(values)
    return pareto_filter(vs) if variant == "pareto" else vs


def _truncated_values(
    spec: GameSpec,
    tree: PathTree,
    start: int,
    frontier: dict[int, Vector],
    variant: str,
    cap: int,
) -> ValueSet:
    """Equilibrium values of the truncated game for one terminal selection."""
    cls = _VARIANT_POLICY_CLASS[variant]
    scope = _Scope(spec, tree, start, frontier=frontier)
    values = {
        rec.value
        for rec in iter_equilibria(
            spec, tree, start, cls=cls, cap=cap, scope=scope, with_policies=False
        )
    }
    vs = ValueSet.of(values)
    return pareto_filter(vs) if variant == "pareto" else vs


def verify_dpp(
    spec: GameSpec,
    tree: PathTree,
    start: int,
    stopping: StoppingTime,
    *,
    variant: str = "full",
    selection_class: str = PATH_CLASS,
    policy_cap: int = DEFAULT_POLICY_CAP,
    selection_cap: int = DEFAULT_SELECTION_CAP,
) -> DppReport:
    """Compare the set value against its truncated-game reconstruction.

    The rhs enumerates every selection of one continuation value per stopped
    prefix (grouped by (time, state) when ``selection_class`` restricts
    selections to state-dependent ones), builds the truncated game, and
    collects its variant equilibrium values.
    """
    if variant not in VARIANTS:
        raise GameValidationError(f"unknown variant {variant!r}")
    if selection_class not in SELECTION_CLASSES:
        raise GameValidationError(f"selection class must be one of {SELECTION_CLASSES}")

    lhs = _variant_set(spec, tree, start, variant, policy_cap)

    frontier_nodes = stopping.frontier(tree, start)
    node_sets = {
        nid: _variant_set(spec, tree, nid, variant, policy_cap) for nid in frontier_nodes
    }

    if selection_class == STATE_CLASS:
        groups: dict[tuple[int, str], list[int]] = {}
        for nid in frontier_nodes:
            node = tree.node(nid)
            groups.setdefault((node.t, node.state), []).append(nid)
        keys = sorted(groups)
        choice_sets = []
        for key in keys:
            members = groups[key]
            base = node_sets[members[0]]
            for other in members[1:]:
                if node_sets[other].points != base.points:
                    raise GameValidationError(
                        "state-dependent selections need equal value sets at prefixes "
                        f"sharing (time, state) {key}; the model is not state dependent there"
                    )
            choice_sets.append(base.points)
        unit_members = [groups[k] for k in keys]
    else:
        choice_sets = [node_sets[nid].points for nid in frontier_nodes]
        unit_members = [[nid] for nid in frontier_nodes]

    n_selections = 1
    for points in choice_sets:
        n_selections *= len(points)
    if n_selections > selection_cap:
        raise EnumerationCapExceeded(
            "terminal selection enumeration", n_selections, selection_cap
        )

    rhs_points: set[Vector] = set()
    if n_selections > 0:
        for chosen in itertools.product(*choice_sets):
            frontier = {}
            for members, value in zip(unit_members, chosen):
                for nid in members:
                    frontier[nid] = value
            vs = _truncated_values(spec, tree, start, frontier, variant, policy_cap)
            rhs_points.update(vs.points)
    rhs = ValueSet.of(rhs_points)

    context = {
        "variant": variant,
        "selection_class": selection_class,
        "n_selections": n_selections,
        "stopped_prefixes": [list(tree.node(nid).prefix) for nid in frontier_nodes],
    }
    return compare_sets(lhs, rhs, context)


# -- Pareto counterexample -----------------------------------------------------


def check_pareto_eps(eps: Fraction) -> GameSpec:
    """Validate the perturbation by re-deriving the one-step game structure.

    For every selection of continuation values at the four branches, the
    perturbed first-period game must have exactly the Nash profiles of its
    unperturbed limit. This re-derivation, not a hardcoded bound, decides
    whether ``eps`` is admissible.
    """
    spec = build_pareto_spec(eps)
    tree = build_path_tree(spec)
    root = tree.id_of(("s0",))
    branch_nodes = [tree.id_of(("s0", s)) for s in pareto_tables()["branches"]]
    branch_sets = [
        _variant_set(spec, tree, nid, "full", DEFAULT_POLICY_CAP) for nid in branch_nodes
    ]

    joints = spec.joint_actions

    def nash_profiles(payoff: dict) -> frozenset:
        out = []
        for joint, val in payoff.items():
            ok = True
            for i in range(2):
                for ai in range(2):
                    dev = joint[:i] + (ai,) + joint[i + 1 :]
                    if payoff[dev][i] < val[i]:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                out.append(joint)
        return frozenset(out)

    target = {
        tuple(int(x) for x in key.split(",")): s
        for key, s in pareto_tables()["kernel_target"].items()
    }
    branch_index = {s: k for k, s in enumerate(pareto_tables()["branches"])}
    scope = _Scope(spec, tree, root)
    for chosen in itertools.product(*[vs.points for vs in branch_sets]):
        frontier = dict(zip(branch_nodes, chosen))
        perturbed = {}
        for joint in joints:
            vec = spec.transition_vector(0, ("s0",), joint)
            val = [ZERO, ZERO]
            for child, p in zip(tree.node(root).children, vec):
                for i in range(2):
                    val[i] += p * frontier[child][i]
            perturbed[joint] = tuple(val)
        limit = {joint: chosen[branch_index[target[joint]]] for joint in joints}
        if nash_profiles(perturbed) != nash_profiles(limit):
            raise GameValidationError(
                f"eps={eps} changes the equilibrium structure of a first-period game"
            )
    return spec


def pareto_dpp_counterexample(
    eps: Fraction = Fraction(1, 100),
    *,
    policy_cap: int = DEFAULT_POLICY_CAP,
    selection_cap: int = DEFAULT_SELECTION_CAP,
) -> DppReport:
    """Pareto set value vs its recursion on the perturbed two-period game.

    The report's context carries the exact branch value sets and their Pareto
    selections so callers can inspect the stage structure that drives the
    two-sided failure.
    """
    eps = Fraction(eps)
    spec = check_pareto_eps(eps)
    tree = build_path_tree(spec)
    root = tree.id_of(("s0",))
    report = verify_dpp(
        spec,
        tree,
        root,
        StoppingTime.at_time(tree, 1),
        variant="pareto",
        selection_class=PATH_CLASS,
        policy_cap=policy_cap,
        selection_cap=selection_cap,
    )

    branch_info = {}
    for s in pareto_tables()["branches"]:
        nid = tree.id_of(("s0", s))
        full = _variant_set(spec, tree, nid, "full", policy_cap)
        branch_info[s] = {
            "values": [[str(x) for x in p] for p in full.points],
            "pareto": [[str(x) for x in p] for p in pareto_filter(full).points],
        }
    context = dict(report.context)
    context.update({"eps": str(eps), "branch_values": branch_info})
    return DppReport(
        lhs=report.lhs,
        rhs=report.rhs,
        relation=report.relation,
        lhs_only=report.lhs_only,
        rhs_only=report.rhs_only,
        context=context,
    )


# -- open-loop linear-quadratic two-period game --------------------------------


@dataclass(frozen=True)
class OpenLoopReport:
    """Whole-game vs composed stagewise equilibrium values.

    Controls are open loop: stage-0 actions are constants and stage-1 actions
    are affine in the first-period noise. Both equilibria are found by solving
    the linear first-order-condition systems of the quadratic costs, and the
    residuals certify stationarity.
    """

    sigma: float
    whole_game_value: tuple[float, float]
    composed_value: tuple[float, float]
    stage0_whole: tuple[float, float]
    stage0_composed: tuple[float, float]
    foc_residual_whole: float
    foc_residual_composed: float

    @property
    def gap(self) -> float:
        return max(
            abs(a - b) for a, b in zip(self.whole_game_value, self.composed_value)
        )


def open_loop_lq_demo(sigma: float = 0.0) -> OpenLoopReport:
    """Solve the two-period LQ game both ways and report the value gap.

    Cost of player i: E[ 0.5*s1_i^2 + 4*u_i^2 + 2*u_i - X2 ] with
    X1 = u_1 + u_2 + sigma*xi_1, X2 = (s1_1 + s1_2) * X1 + sigma*xi_2,
    stage-1 controls parameterized as s1_i = p_i + r_i*xi_1.
    """
    sigma = float(sigma)
    if sigma < 0:
        raise GameValidationError("sigma must be nonnegative")

    # Whole game: unknowns (u1, u2, p1, p2, r1, r2). Expected cost of player i:
    # J_i = 0.5*(p_i^2 + r_i^2) + 4*u_i^2 + 2*u_i - (p1+p2)(u1+u2) - (r1+r2)*sigma
    a = np.zeros((6, 6))
    b = np.zeros(6)
    for i in range(2):
        # d/du_i: 8*u_i + 2 - (p1 + p2) = 0
        a[i, i] = 8.0
        a[i, 2] = a[i, 3] = -1.0
        b[i] = -2.0
        # d/dp_i: p_i - (u1 + u2) = 0
        a[2 + i, 2 + i] = 1.0
        a[2 + i, 0] = a[2 + i, 1] = -1.0
        # d/dr_i: r_i - sigma = 0
        a[4 + i, 4 + i] = 1.0
        b[4 + i] = sigma
    w = np.linalg.solve(a, b)
    res_whole = float(np.max(np.abs(a @ w - b)))
    u1, u2, p1, p2, r1, r2 = map(float, w)

    def whole_cost(i: int) -> float:
        ui, pi, ri = (u1, p1, r1) if i == 0 else (u2, p2, r2)
        return (
            0.5 * (pi * pi + ri * ri)
            + 4.0 * ui * ui
            + 2.0 * ui
            - (p1 + p2) * (u1 + u2)
            - (r1 + r2) * sigma
        )

    whole_value = (whole_cost(0), whole_cost(1))

    # Second period at state x: cost_i = 0.5*c_i^2 - (c1 + c2)*x. Stationarity
    # gives c_i = k_i * x with the coefficients solving an identity system.
    k = np.linalg.solve(np.eye(2), np.ones(2))
    # terminal value of either player as a multiple of x^2
    kappa = float(0.5 * k[0] * k[0] - (k[0] + k[1]))

    # First period against that terminal: J_i = 4u_i^2 + 2u_i + kappa*((u1+u2)^2 + sigma^2)
    a1 = np.array([[8.0 + 2.0 * kappa, 2.0 * kappa], [2.0 * kappa, 8.0 + 2.0 * kappa]])
    b1 = np.array([-2.0, -2.0])
    u = np.linalg.solve(a1, b1)
    res_comp = float(np.max(np.abs(a1 @ u - b1)))
    total = float(u[0] + u[1])
    composed_value = tuple(
        float(4.0 * ui * ui + 2.0 * ui + kappa * (total * total + sigma * sigma))
        for ui in u
    )

    return OpenLoopReport(
        sigma=sigma,
        whole_game_value=whole_value,
        composed_value=composed_value,
        stage0_whole=(u1, u2),
        stage0_composed=(float(u[0]), float(u[1])),
        foc_residual_whole=res_whole,
        foc_residual_composed=res_comp,
    )


# -- randomized spec generator --------------------------------------------------


def random_game(
    rng: random.Random,
    *,
    max_periods: int = 3,
    max_states: int = 2,
    n_actions: int = 2,
    allow_zero: bool = False,
    state_dependent: bool = False,
) -> GameSpec:
    """Small random game with rational costs and simplex-grid kernels.

    Kernels come from integer weights normalized on the simplex, strictly
    positive unless ``allow_zero``; costs are quarter-integer rationals.
    """
    horizon = rng.randint(1, max_periods)
    states: list[list[str]] = [["r0"]]
    for t in range(1, horizon + 1):
        states.append([f"t{t}s{k}" for k in range(rng.randint(1, max_states))])
    actions = [[str(a) for a in range(n_actions)] for _ in range(2)]
    joints = list(itertools.product(range(n_actions), range(n_actions)))

    def kernel(width: int) -> tuple[Fraction, ...]:
        while True:
            lo = 0 if allow_zero else 1
            weights = [rng.randint(lo, 4) for _ in range(width)]
            total = sum(weights)
            if total > 0:
                return tuple(Fraction(w, total) for w in weights)

    def cost() -> Fraction:
        return Fraction(rng.randint(-8, 8), 4)

    transitions: dict = {}
    running: list[dict] = [{}, {}]
    terminal: list[dict] = [{}, {}]
    if state_dependent:
        for t in range(horizon):
            for s in states[t]:
                for joint in joints:
                    transitions[(t, s, joint)] = kernel(len(states[t + 1]))
                for i in range(2):
                    for ai in range(n_actions):
                        running[i][(t, s, ai)] = cost()
        for s in states[horizon]:
            for i in range(2):
                terminal[i][s] = cost()
    else:
        for t in range(horizon):
            for prefix in itertools.product(*states[: t + 1]):
                for joint in joints:
                    transitions[(t, prefix, joint)] = kernel(len(states[t + 1]))
                for i in range(2):
                    for ai in range(n_actions):
                        running[i][(t, prefix, ai)] = cost()
        for path in itertools.product(*states):
            for i in range(2):
                terminal[i][path] = cost()

    return GameSpec(
        horizon=horizon,
        states=states,
        actions=actions,
        transitions=transitions,
        running_costs=running,
        terminal_costs=terminal,
        state_dependent=state_dependent,
    )
