"""JSON ingestion and export.

Game specs travel as structured JSON with rationals serialized as "p/q"
strings, so a load/dump round trip is bit-exact. Result payloads (value sets,
reports, witness policies) use the same rational encoding.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from .errors import GameValidationError
from .model import GameSpec, PathTree, Policy, Prefix

KEY_SEP = "|"
PATH_SEP = "/"


def frac_from_str(text: str) -> Fraction:
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise GameValidationError(f"expected rational string, got {text!r}")
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise GameValidationError(f"bad rational {text!r}") from exc


def frac_to_str(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _prefix_to_str(prefix: Prefix) -> str:
    return PATH_SEP.join(prefix)


def _prefix_from_str(text: str) -> Prefix:
    return tuple(text.split(PATH_SEP))


def _encode_key(t: int, key, action_part: str) -> str:
    where = key if isinstance(key, str) else _prefix_to_str(key)
    return KEY_SEP.join((str(t), where, action_part))


def load_game(source: str | Path | dict) -> GameSpec:
    """Parse a game spec from a JSON file path or an already-loaded dict."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = source
    try:
        horizon = int(raw["horizon"])
        players = int(raw["players"])
        states = [list(level) for level in raw["states"]]
        actions = [list(acts) for acts in raw["actions"]]
        flags = raw.get("flags", {})
        state_dependent = bool(flags.get("state_dependent", False))
        raw_trans = raw["transitions"]
        raw_running = raw["running_costs"]
        raw_terminal = raw["terminal_costs"]
    except (KeyError, TypeError) as exc:
        raise GameValidationError(f"malformed game document: missing {exc}") from exc
    if players != len(actions):
        raise GameValidationError("players count disagrees with actions table")

    def find_action(i: int, label: str) -> int:
        try:
            return actions[i].index(label)
        except ValueError as exc:
            raise GameValidationError(f"unknown action {label!r} for player {i}") from exc

    transitions: dict = {}
    for key_text, vec in raw_trans.items():
        parts = key_text.split(KEY_SEP)
        if len(parts) != 3:
            raise GameValidationError(f"bad transition key {key_text!r}")
        t = int(parts[0])
        where: Any = parts[1] if state_dependent else _prefix_from_str(parts[1])
        labels = parts[2].split(",")
        if len(labels) != players:
            raise GameValidationError(
                f"transition key {key_text!r} must list one action per player"
            )
        joint = tuple(find_action(i, lab) for i, lab in enumerate(labels))
        if t + 1 > horizon:
            raise GameValidationError(f"transition key {key_text!r} beyond horizon")
        level = states[t + 1]
        probs = [frac_from_str(vec.get(s, "0")) for s in level]
        for s in vec:
            if s not in level:
                raise GameValidationError(f"unknown successor state {s!r} in {key_text!r}")
        transitions[(t, where, joint)] = tuple(probs)

    running: list[dict] = []
    for i, table in enumerate(raw_running):
        entry: dict = {}
        for key_text, cost in table.items():
            parts = key_text.split(KEY_SEP)
            if len(parts) != 3:
                raise GameValidationError(f"bad running-cost key {key_text!r}")
            if "," in parts[2]:
                raise GameValidationError(
                    f"running cost {key_text!r} keys a joint action; costs take only "
                    "the player's own action"
                )
            t = int(parts[0])
            where = parts[1] if state_dependent else _prefix_from_str(parts[1])
            entry[(t, where, find_action(i, parts[2]))] = frac_from_str(cost)
        running.append(entry)

    terminal: list[dict] = []
    for table in raw_terminal:
        entry = {}
        for key_text, cost in table.items():
            where = key_text if state_dependent else _prefix_from_str(key_text)
            entry[where] = frac_from_str(cost)
        terminal.append(entry)

    return GameSpec(
        horizon=horizon,
        states=states,
        actions=actions,
        transitions=transitions,
        running_costs=running,
        terminal_costs=terminal,
        state_dependent=state_dependent,
    )


def dump_game(spec: GameSpec) -> dict:
    """Serialize a spec to a JSON-ready dict; inverse of :func:`load_game`."""
    trans_out: dict[str, dict[str, str]] = {}
    for (t, where, joint), vec in sorted(
        spec.transitions.items(), key=lambda kv: (kv[0][0], str(kv[0][1]), kv[0][2])
    ):
        labels = ",".join(spec.actions[i][a] for i, a in enumerate(joint))
        trans_out[_encode_key(t, where, labels)] = {
            state: frac_to_str(p) for state, p in zip(spec.states[t + 1], vec)
        }
    running_out = []
    for i, table in enumerate(spec.running_costs):
        entry = {}
        for (t, where, ai), cost in sorted(
            table.items(), key=lambda kv: (kv[0][0], str(kv[0][1]), kv[0][2])
        ):
            entry[_encode_key(t, where, spec.actions[i][ai])] = frac_to_str(cost)
        running_out.append(entry)
    terminal_out = []
    for table in spec.terminal_costs:
        entry = {}
        for where, cost in sorted(table.items(), key=lambda kv: str(kv[0])):
            name = where if isinstance(where, str) else _prefix_to_str(where)
            entry[name] = frac_to_str(cost)
        terminal_out.append(entry)
    return {
        "horizon": spec.horizon,
        "players": spec.n_players,
        "states": [list(level) for level in spec.states],
        "actions": [list(acts) for acts in spec.actions],
        "flags": {"state_dependent": spec.state_dependent},
        "transitions": trans_out,
        "running_costs": running_out,
        "terminal_costs": terminal_out,
    }


def save_game(spec: GameSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dump_game(spec), indent=1, sort_keys=True), "utf-8")


# -- result payloads ---------------------------------------------------------


def vector_to_json(vec) -> list[str]:
    return [frac_to_str(v) if isinstance(v, Fraction) else repr(v) for v in vec]


def value_set_to_json(vs) -> dict:
    return {
        "points": [vector_to_json(p) for p in vs.points],
        "epsilon": frac_to_str(vs.epsilon) if isinstance(vs.epsilon, Fraction) else vs.epsilon,
    }


def policy_to_json(spec: GameSpec, tree: PathTree, policy: Policy) -> dict:
    actions = {}
    for nid in sorted(policy.actions):
        node = tree.node(nid)
        joint = policy.actions[nid]
        key = f"{node.t}{KEY_SEP}{_prefix_to_str(node.prefix)}"
        actions[key] = [spec.actions[i][a] for i, a in enumerate(joint)]
    return {"class": policy.policy_class, "actions": actions}


def record_to_json(spec: GameSpec, tree: PathTree, record) -> dict:
    return {
        "value": vector_to_json(record.value),
        "slack": vector_to_json(record.slack),
        "policy": policy_to_json(spec, tree, record.policy),
    }


def report_to_json(report) -> dict:
    out = {
        "relation": report.relation,
        "lhs": value_set_to_json(report.lhs),
        "rhs": value_set_to_json(report.rhs),
        "lhs_only": [vector_to_json(p) for p in report.lhs_only],
        "rhs_only": [vector_to_json(p) for p in report.rhs_only],
    }
    if report.context:
        out["context"] = report.context
    return out


def write_json(payload: dict, path: str | Path | None) -> str:
    text = json.dumps(payload, indent=1, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n", "utf-8")
    return text
