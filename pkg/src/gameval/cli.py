"""Command-line interface.

Subcommands: ``setvalue``, ``verify-dpp``, ``planner``, ``solve-pde``, and
``examples``. Results are written as JSON (stdout by default); exit codes are
0 on success, 2 for validation problems, 3 for blown enumeration caps, and 4
for numerical instability.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import dpp as dpp_mod
from . import equilibria as eq
from . import hjb, io, planner, presets
from .errors import EnumerationCapExceeded, GameValidationError, NumericInstabilityError
from .model import (
    PATH_CLASS,
    STATE_CLASS,
    SYMMETRIC_CLASS,
    GameSpec,
    StoppingTime,
    build_path_tree,
)

VARIANT_CLASSES = {
    "full": PATH_CLASS,
    "state": STATE_CLASS,
    "symmetric": SYMMETRIC_CLASS,
}

BATTERY = {
    "path": dict(example="path", stop=2, variant="full", selection="path"),
    "psistate": dict(example="psistate", stop=2, variant="full", selection="state"),
    "state": dict(example="state", stop=1, variant="state", selection="state"),
}


def _load_spec(args) -> GameSpec:
    if getattr(args, "spec", None):
        return io.load_game(args.spec)
    name = getattr(args, "example", None)
    if not name:
        raise GameValidationError("provide --spec FILE or --example NAME")
    if name == "pareto":
        return presets.build_pareto_spec(Fraction(args.pareto_eps))
    if name == "openloop":
        raise GameValidationError("the open-loop example has no discrete spec file")
    return presets.load_example(name)


def _start_node(tree, args) -> int:
    prefix = getattr(args, "prefix", None)
    if prefix:
        return tree.id_of(tuple(prefix.split("/")))
    return tree.levels[0][0]


def _emit(payload: dict, out: str | None) -> None:
    text = io.write_json(payload, out)
    if out is None:
        print(text)
    else:
        print(f"wrote {out}")


def cmd_setvalue(args) -> int:
    spec = _load_spec(args)
    tree = build_path_tree(spec)
    start = _start_node(tree, args)
    epsilon = Fraction(args.eps)
    variant = args.variant

    if variant in ("pareto", "strong-pareto") or args.engine in ("brute", "both"):
        if variant in VARIANT_CLASSES:
            brute = eq.set_value_bruteforce(
                spec, tree, start, eps=epsilon, cls=VARIANT_CLASSES[variant], cap=args.cap
            )
        else:
            records = eq.enumerate_equilibria(spec, tree, start, eps=epsilon, cap=args.cap)
            base = eq.ValueSet.of((r.value for r in records), epsilon=epsilon)
            if variant == "pareto":
                brute = eq.pareto_filter(base)
            else:
                brute = eq.strong_pareto_filter(spec, tree, start, records, cap=args.cap)
    else:
        brute = None

    recursive = None
    if args.engine in ("dpp", "both"):
        if variant != "full":
            raise GameValidationError("the recursive engine computes the full variant only")
        if epsilon != 0:
            raise GameValidationError("the recursive engine is exact (eps must be 0)")
        recursive = eq.set_value_dpp(spec, tree, start, selection_cap=args.selection_cap)

    if args.engine == "both" and brute.points != recursive.points:
        raise GameValidationError("engines disagree; this is a bug worth reporting")
    result = recursive if args.engine == "dpp" else brute

    node = tree.node(start)
    payload = {
        "command": "setvalue",
        "t": node.t,
        "prefix": "/".join(node.prefix),
        "variant": variant,
        "epsilon": io.frac_to_str(epsilon),
        "points": [io.vector_to_json(p) for p in result.points],
    }
    if args.witnesses:
        records = eq.enumerate_equilibria(spec, tree, start, eps=epsilon, cap=args.cap)
        seen = set()
        chosen = []
        for rec in records:
            if rec.value not in seen:
                seen.add(rec.value)
                chosen.append(io.record_to_json(spec, tree, rec))
        payload["witnesses"] = chosen
    _emit(payload, args.out)
    return 0


def cmd_verify_dpp(args) -> int:
    if args.example == "openloop":
        rep = dpp_mod.open_loop_lq_demo(args.sigma)
        payload = {
            "command": "verify-dpp",
            "example": "openloop",
            "sigma": rep.sigma,
            "whole_game_value": list(rep.whole_game_value),
            "composed_value": list(rep.composed_value),
            "stage0_whole": list(rep.stage0_whole),
            "stage0_composed": list(rep.stage0_composed),
            "foc_residual_whole": rep.foc_residual_whole,
            "foc_residual_composed": rep.foc_residual_composed,
            "value_gap": rep.gap,
        }
        print(
            f"whole-game value {tuple(rep.whole_game_value)} vs composed "
            f"{tuple(rep.composed_value)}"
        )
        _emit(payload, args.out)
        return 0

    if args.example == "pareto":
        rep = dpp_mod.pareto_dpp_counterexample(
            Fraction(args.pareto_eps), policy_cap=args.cap, selection_cap=args.selection_cap
        )
        payload = {"command": "verify-dpp", "example": "pareto", **io.report_to_json(rep)}
        print(f"relation: {rep.relation}")
        _emit(payload, args.out)
        return 0

    stop_time, variant, selection = args.stop_time, args.variant, args.selection_class
    if args.example in BATTERY:
        preset = BATTERY[args.example]
        stop_time = preset["stop"] if stop_time is None else stop_time
        variant = preset["variant"] if variant is None else variant
        selection = preset["selection"] if selection is None else selection
    variant = variant or "full"
    selection = selection or "path"

    spec = _load_spec(args)
    tree = build_path_tree(spec)
    start = _start_node(tree, args)
    if args.stop_at_state:
        stopping = StoppingTime.hitting_state(tree, args.stop_at_state)
    else:
        t0 = stop_time if stop_time is not None else tree.node(start).t + 1
        stopping = StoppingTime.at_time(tree, t0)
    selection_cls = STATE_CLASS if selection == "state" else PATH_CLASS
    rep = dpp_mod.verify_dpp(
        spec,
        tree,
        start,
        stopping,
        variant=variant,
        selection_class=selection_cls,
        policy_cap=args.cap,
        selection_cap=args.selection_cap,
    )
    payload = {"command": "verify-dpp", **io.report_to_json(rep)}
    if args.example:
        payload["example"] = args.example
    print(f"relation: {rep.relation}")
    _emit(payload, args.out)
    return 0


def cmd_planner(args) -> int:
    spec = _load_spec(args)
    tree = build_path_tree(spec)
    start = _start_node(tree, args)
    if args.weights:
        lam = planner.Scalarization.parse(args.weights)
    else:
        lam = planner.Scalarization.uniform(spec.n_players)
    if args.probe:
        rep = planner.time_inconsistency_probe(spec, tree, start, lam, cap=args.cap)
        payload = {
            "command": "planner",
            "weights": [io.frac_to_str(w) for w in lam.weights],
            "has_equilibrium": rep.optimum.has_equilibrium,
            "value": None if rep.optimum.value is None else io.frac_to_str(rep.optimum.value),
            "argmin": [io.vector_to_json(p) for p in rep.optimum.argmin],
            "dictatorship_value": io.frac_to_str(rep.dictatorship_value),
            "consistent": rep.consistent,
            "rows": [
                {
                    "t": row.t,
                    "prefix": "/".join(row.prefix),
                    "planner_value": None
                    if row.planner_value is None
                    else io.frac_to_str(row.planner_value),
                    "continuation_score": io.frac_to_str(row.continuation_score),
                    "continuation_value": io.vector_to_json(row.continuation_value),
                    "consistent": row.consistent,
                }
                for row in rep.rows
            ],
        }
    else:
        vs = eq.set_value_bruteforce(spec, tree, start, cap=args.cap)
        opt = planner.planner_optimum(vs, lam)
        payload = {
            "command": "planner",
            "weights": [io.frac_to_str(w) for w in lam.weights],
            "has_equilibrium": opt.has_equilibrium,
            "value": None if opt.value is None else io.frac_to_str(opt.value),
            "argmin": [io.vector_to_json(p) for p in opt.argmin],
            "dictatorship_value": io.frac_to_str(
                planner.dictatorship_value(spec, tree, start, lam)
            ),
        }
    _emit(payload, args.out)
    return 0


def _grid_with_overrides(grid: hjb.GridConfig, args) -> hjb.GridConfig:
    fields = {
        "nx": args.nx,
        "ny": args.ny,
        "nz": args.nz,
        "z_max": args.z_max,
        "t_final": args.t_final,
        "cfl_safety": args.cfl_safety,
        "ht": args.ht,
        "delta_scale": args.delta_scale,
    }
    updates = {k: v for k, v in fields.items() if v is not None}
    if not updates:
        return grid
    base = {
        "x_lo": grid.x_lo,
        "x_hi": grid.x_hi,
        "nx": grid.nx,
        "y_lo": grid.y_lo,
        "y_hi": grid.y_hi,
        "ny": grid.ny,
        "t_final": grid.t_final,
        "z_max": grid.z_max,
        "nz": grid.nz,
        "cfl_safety": grid.cfl_safety,
        "ht": grid.ht,
        "delta_scale": grid.delta_scale,
        "monotone": grid.monotone,
        "store_times": grid.store_times,
    }
    base.update(updates)
    return hjb.GridConfig(**base)


def cmd_solve_pde(args) -> int:
    name = args.preset
    grid_doc = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        name = doc.get("preset", name)
        grid_doc = doc.get("grid", {})
    if not name:
        raise GameValidationError("provide --preset NAME or --config FILE naming one")
    spec, grid = hjb.pde_preset(name)
    if grid_doc:
        base = {
            "x_lo": grid.x_lo, "x_hi": grid.x_hi, "nx": grid.nx,
            "y_lo": grid.y_lo, "y_hi": grid.y_hi, "ny": grid.ny,
            "t_final": grid.t_final, "z_max": grid.z_max, "nz": grid.nz,
            "cfl_safety": grid.cfl_safety, "ht": grid.ht,
            "delta_scale": grid.delta_scale, "monotone": grid.monotone,
            "store_times": tuple(grid.store_times),
        }
        base.update(grid_doc)
        grid = hjb.GridConfig(**base)
    grid = _grid_with_overrides(grid, args)

    field = hjb.solve_w(spec, grid)
    x0 = args.x0 if args.x0 is not None else float(grid.x_values[grid.nx // 2])
    res = hjb.nodal_set(field, 0.0, x0, delta=args.delta)
    print(
        f"preset {name}: nt={field.nt} ht={field.ht:.3e} min W={field.min_w:.3e} "
        f"clusters={len(res.clusters)} delta={res.delta:.4f}"
    )
    nodal_payload = {
        "command": "solve-pde",
        "preset": name,
        "t": 0.0,
        "x": x0,
        "delta": res.delta,
        "min_w": field.min_w,
        "points": [list(p) for p in res.points],
        "clusters": [
            {
                "centroid": list(c.centroid),
                "n_nodes": c.n_nodes,
                "diameter": c.diameter,
                "w_min": c.w_min,
            }
            for c in res.clusters
        ],
    }
    if args.out_prefix:
        out_prefix = Path(args.out_prefix)
        meta = {
            "preset": name,
            "nx": grid.nx,
            "ny": grid.ny,
            "n_players": spec.n_players,
            "hx": grid.hx,
            "hy": grid.hy,
            "ht": field.ht,
            "bounds": [grid.x_lo, grid.x_hi, grid.y_lo, grid.y_hi],
            "times": sorted(field.layers),
        }
        np.savez(
            str(out_prefix) + "_field.npz",
            meta=json.dumps(meta),
            x=grid.x_values,
            y=grid.y_values,
            **{f"W_{i}": field.layers[t] for i, t in enumerate(sorted(field.layers))},
        )
        io.write_json(nodal_payload, str(out_prefix) + "_nodal.json")
        print(f"wrote {out_prefix}_field.npz and {out_prefix}_nodal.json")
    else:
        print(io.write_json(nodal_payload, None))
    return 0


def cmd_examples(args) -> int:
    if args.action == "list":
        for name in presets.EXAMPLE_NAMES:
            print(name)
        for name in presets.PDE_PRESETS:
            print(f"{name} (pde)")
        return 0
    if args.action == "dump":
        if not args.name:
            raise GameValidationError("examples dump needs a preset name")
        if args.name == "pareto":
            spec = presets.build_pareto_spec(Fraction(args.pareto_eps))
        else:
            spec = presets.load_example(args.name)
        _emit(io.dump_game(spec), args.out)
        return 0
    raise GameValidationError(f"unknown examples action {args.action!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gameval",
        description="Set values of finite nonzero-sum stochastic games",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("GAMEVAL_THREADS", "1")),
        help="worker hint; evaluation is deterministic regardless",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_example=True):
        p.add_argument("--spec", help="game spec JSON file")
        if with_example:
            p.add_argument("--example", help="named preset")
        p.add_argument("--prefix", help="evaluation prefix like s0/s10 (default: first root)")
        p.add_argument("--cap", type=int, default=eq.DEFAULT_POLICY_CAP)
        p.add_argument("--selection-cap", type=int, default=eq.DEFAULT_SELECTION_CAP)
        p.add_argument("--pareto-eps", default="1/100")
        p.add_argument("--out", help="output JSON path (default: stdout)")

    p = sub.add_parser("setvalue", help="compute a set value")
    common(p)
    p.add_argument(
        "--variant",
        default="full",
        choices=["full", "state", "symmetric", "pareto", "strong-pareto"],
    )
    p.add_argument("--eps", default="0", help="equilibrium slack, rational")
    p.add_argument("--engine", default="brute", choices=["brute", "dpp", "both"])
    p.add_argument("--witnesses", action="store_true", help="include witness policies")
    p.set_defaults(func=cmd_setvalue)

    p = sub.add_parser("verify-dpp", help="compare a set value with its recursion")
    common(p)
    p.add_argument("--variant", choices=["full", "state", "symmetric", "pareto"])
    p.add_argument("--selection-class", choices=["path", "state"])
    p.add_argument("--stop-time", type=int, help="stop at a fixed time")
    p.add_argument("--stop-at-state", help="stop when a state label is first hit")
    p.add_argument("--sigma", type=float, default=0.0, help="noise scale (openloop)")
    p.set_defaults(func=cmd_verify_dpp)

    p = sub.add_parser("planner", help="scalarize the set value")
    common(p)
    p.add_argument("--weights", default=None, help="comma-separated rationals")
    p.add_argument("--probe", action="store_true", help="run the consistency probe")
    p.set_defaults(func=cmd_planner)

    p = sub.add_parser("solve-pde", help="solve the auxiliary PDE and extract level sets")
    p.add_argument("--preset", choices=list(presets.PDE_PRESETS))
    p.add_argument("--config", help="JSON config with preset name and grid overrides")
    for flag, typ in [
        ("--nx", int), ("--ny", int), ("--nz", int), ("--z-max", float),
        ("--t-final", float), ("--cfl-safety", float), ("--ht", float),
        ("--delta-scale", float), ("--x0", float), ("--delta", float),
    ]:
        p.add_argument(flag, type=typ, default=None)
    p.add_argument("--out-prefix", help="write <prefix>_field.npz and <prefix>_nodal.json")
    p.set_defaults(func=cmd_solve_pde)

    p = sub.add_parser("examples", help="list or dump named presets")
    p.add_argument("action", choices=["list", "dump"])
    p.add_argument("name", nargs="?")
    p.add_argument("--pareto-eps", default="1/100")
    p.add_argument("--out")
    p.set_defaults(func=cmd_examples)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (GameValidationError, EnumerationCapExceeded, NumericInstabilityError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(json.dumps({"error": "FileNotFoundError", "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
