"""Command line entry point: ``fjrec {simulate,batch,scenario,bounds,equivalence}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import analysis, controllers, harness
from .errors import FjrecError
from .plant import extract_plant, reachability_bounds


def _plant_from(args):
    scen = harness.load_scenario(args.scenario)
    net = scen.network(renormalize_rows=args.renormalize_rows)
    return scen, net, extract_plant(net, scen.rs_index)


def _emit(data, out):
    text = json.dumps(data, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    scen, _, plant = _plant_from(args)
    if args.controller == "mf":
        ctrl = controllers.ModelFreeController()
    else:
        ctrl = controllers.MpcController(plant, args.horizon, soft_terminal=args.soft_terminal)
    run = controllers.closed_loop(plant, ctrl, args.steps)
    _emit(harness.trajectory_dict(scen.name, args.controller, run), args.out)


def cmd_batch(args):
    template = harness.TrialConfig(n_users=args.n_users, steps=args.steps,
                                   horizon=args.horizon, soft_terminal=args.soft_terminal)
    templates = [replace(template, connectivity_pct=c) for c in harness.CONNECTIVITY_LEVELS]
    result = harness.run_batch(args.trials, templates, workers=args.workers,
                               master_seed=args.seed)
    if args.out:
        harness.export_csv(result.records, args.out)
    else:
        sys.stdout.write(harness.records_csv(result.records))
    json.dump(result.summary, sys.stderr, indent=2)
    sys.stderr.write("\n")


def cmd_scenario(args):
    scen = harness.radical_user_scenario()
    if args.out:
        harness.export_json(scen, args.out)
    net = scen.network()
    plant = extract_plant(net, scen.rs_index)
    rep = analysis.compare_controllers(plant, net, scen.rs_index, args.steps, args.horizon,
                                       soft_terminal=args.soft_terminal)
    summary = {
        "scenario": scen.name,
        "cost_mf_ss": rep.cost_mf,
        "cost_mb_ss": rep.cost_mb,
        "improvement_pct": rep.improvement_pct,
        "cost_mf_cum": rep.cost_mf_cum,
        "cost_mb_cum": rep.cost_mb_cum,
        "avg_shift_mf_pct": rep.shift_mf.mean,
        "avg_shift_mb_pct": rep.shift_mb.mean,
        "avg_shift_gap_pct": rep.avg_shift_gap_pct,
    }
    sys.stderr.write(json.dumps(summary, indent=2) + "\n")
    if not args.out:
        _emit(scen.to_dict(), None)


def cmd_bounds(args):
    scen, _, plant = _plant_from(args)
    b = reachability_bounds(plant)
    _emit({"scenario": scen.name, "lower": b.lower.tolist(), "upper": b.upper.tolist()}, args.out)


def cmd_equivalence(args):
    scen, _, plant = _plant_from(args)
    cert = analysis.equivalence_certificate(plant)
    _emit({
        "scenario": scen.name,
        "gap": cert.gap,
        "equivalent": cert.equivalent,
        "alpha": cert.alpha,
        "C": cert.C.tolist(),
        "D": cert.D.tolist(),
        "kernel_functional": cert.kernel_functional.tolist(),
        "x_mf": controllers.mf_equilibrium(plant).tolist(),
        "x_mb": controllers.mb_target(plant).x_star.tolist(),
    }, args.out)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--steps", type=int, default=50)
    common.add_argument("--horizon", type=int, default=50)
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--soft-terminal", type=float, default=None, metavar="WEIGHT",
                        help="replace the MPC terminal equality by a quadratic penalty")
    common.add_argument("--renormalize-rows", action="store_true",
                        help="rescale adjacency rows of scenario files to sum to one")

    parser = argparse.ArgumentParser(prog="fjrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="closed loop on a scenario file")
    p.add_argument("scenario")
    p.add_argument("--controller", choices=("mf", "mb"), default="mb")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("batch", parents=[common], help="random-network comparison study")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--n-users", type=int, default=20)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("scenario", parents=[common], help="built-in scenarios")
    p.add_argument("name", choices=("radical-user",))
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("bounds", parents=[common], help="reachable steady-state bounds")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("equivalence", parents=[common], help="MF/MB steady-state equivalence")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_equivalence)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (FjrecError, ValueError, OSError) as exc:
        sys.stderr.write(f"fjrec: error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
