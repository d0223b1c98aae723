"""
A command line interface to lqgraph.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np
import tornado.log

import lqgraph

from . import artifacts, cli_utils
from .description import load_description
from .suites import SUITES, run_suite, suite_frame
from ..config import LQGraphSettings, SynthesisOptions
from ..duality import controller_impulse_response, dual_estimator_to_controller
from ..exceptions import DescriptionParseError, InstabilityError, LQGraphError, NonConvergenceError
from ..extras import provenance_stamp
from ..graphnet import delay_matrix, star_table
from ..kalman import assemble_estimator, centralized_filter, filter_error_covariance, synthesize_all
from ..lifting import lift
from ..simkit import simulate_closed_loop, simulate_estimator, simulate_team
from ..sysmodel import ProblemKind, adjacency_of, dualize, validate
from ..team import TeamWeight, build_team_lift, team_filter_iterate
from ..util import block_slices

logger = logging.getLogger("lqgraph")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_NONCONVERGENCE = 3


def _add_option_flags(parser, fields):
    group = parser.add_argument_group("Synthesis Options (override the file's options block)")
    for field in fields:
        group.add_argument("--" + field.replace("_", "-"), default=None, **SynthesisOptions.help_info(field))


def parse_args(args=None):
    parser = argparse.ArgumentParser(description="A CLI for distributed LQ estimation and control over graphs.")
    parser.add_argument('--version', action='version', version=f"{lqgraph.__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Increase verbosity of the logger.")

    subparsers = parser.add_subparsers(dest="command")

    ### Validate subcommand
    validate_cmd = subparsers.add_parser("validate", parents=[common], help="Checks a system-description file.")
    validate_cmd.add_argument("path", nargs="?", default=None, help="The system-description file.")
    validate_cmd.add_argument("--schema",
                              action="store_true",
                              help="Display the current Schema (Pydantic) for the options block and exit.")

    ### Synthesize subcommand
    synth = subparsers.add_parser("synthesize", parents=[common], help="Synthesizes estimators or controllers.")
    synth.add_argument("path", help="The system-description file.")
    synth.add_argument("--mode", choices=["estimator", "controller", "team"], default="estimator")
    synth.add_argument("--out", required=True, help="Directory the artifacts are written to.")
    _add_option_flags(synth, ["horizon", "memory", "riccati_tol", "riccati_max_iter", "team_tol", "team_max_horizon"])

    ### Verify subcommand
    verify = subparsers.add_parser("verify", parents=[common], help="Runs an executable property suite.")
    verify.add_argument("path", help="The system-description file.")
    verify.add_argument("--suite", choices=sorted(SUITES), required=True)
    _add_option_flags(verify, ["horizon", "memory", "seed", "trials", "sim_horizon", "oracle_horizon"])

    ### Simulate subcommand
    simulate = subparsers.add_parser("simulate", parents=[common], help="Monte-Carlo runs of synthesized artifacts.")
    simulate.add_argument("path", help="The system-description file.")
    simulate.add_argument("--with", dest="artifacts", required=True, help="Artifact directory of a synthesize run.")
    simulate.add_argument("--out", default=None, help="Report directory, defaults to <artifacts>/simulation.")
    _add_option_flags(simulate, ["trials", "seed", "sim_horizon"])

    ret = vars(parser.parse_args(args))
    if ret["command"] is None:
        parser.print_help()
        parser.exit(EXIT_FAILURE)
    return ret


def _load(args):
    system, desc = load_description(args["path"])
    data = cli_utils.argparse_config_merge(args, desc.options.model_dump(), SynthesisOptions.field_names())
    return system, desc, SynthesisOptions(**data)


def _raw_description(path):
    return cli_utils.read_config_file(path)


def cmd_validate(args):
    if args["schema"]:
        print(json.dumps(SynthesisOptions.model_json_schema(), indent=2))
        return EXIT_OK
    if args["path"] is None:
        print("A system-description file is required unless --schema is given.")
        return EXIT_FAILURE

    system, desc, _ = _load(args)
    diagnostics = validate(system, desc.kind)
    if diagnostics:
        for msg in diagnostics:
            print(msg)
        return EXIT_FAILURE

    print(">>> Valid system with {} nodes (n={}, m={}, p={}).".format(system.N, system.n, system.m, system.p))
    return EXIT_OK


def _synthesize_estimator(system, options, threads, out, manifest):
    L = lift(system, options.memory)
    filters = synthesize_all(L, options.riccati_tol, options.riccati_max_iter, threads=threads)
    artifacts.write_filters(out, filters)
    artifacts.write_json(os.path.join(out, "layout.json"), L.layout_manifest())

    estimator = assemble_estimator(filters, L, options.horizon)
    artifacts.write_series(out, estimator, L.law)

    costs, floors = [], []
    central = centralized_filter(system, options.riccati_tol, options.riccati_max_iter)
    for i, (f, sl) in enumerate(zip(filters, block_slices(system.n_dims))):
        floors.append(float(np.trace(central.P[sl, sl])))
        try:
            costs.append(filter_error_covariance(f, L, i, tol=options.lyapunov_tol)[1])
        except InstabilityError:
            costs.append(float("inf"))
    artifacts.write_costs(out, {"cost": costs, "centralized": floors})

    manifest.update({
        "memory": L.memory,
        "order": [f.F.shape[0] for f in filters],
        "iterations": [f.riccati.iterations for f in filters],
        "residuals": [f.riccati.residual for f in filters],
        "stabilizing": [f.stabilizing for f in filters],
        "spectral_radius": [f.spectral_radius for f in filters],
        "converged": all(f.riccati.converged for f in filters),
    })


def _synthesize_controller(system, options, threads, out, manifest):
    dual_lift = lift(dualize(system.with_noise(None)), options.memory)
    filters = synthesize_all(dual_lift, options.riccati_tol, options.riccati_max_iter, threads=threads)
    controller = dual_estimator_to_controller(filters, dual_lift)
    artifacts.write_controller(out, controller)
    artifacts.write_json(os.path.join(out, "layout.json"), dual_lift.layout_manifest())

    artifacts.write_series(out, controller_impulse_response(controller, options.horizon), controller.law)

    costs = []
    for i, f in enumerate(filters):
        try:
            costs.append(filter_error_covariance(f, dual_lift, i, tol=options.lyapunov_tol)[1])
        except InstabilityError:
            costs.append(float("inf"))
    artifacts.write_costs(out, {"dual_cost": costs})

    manifest.update({
        "memory": controller.memory,
        "u_dims": list(controller.u_dims),
        "w_dims": list(controller.w_dims),
        "law": controller.law.entries.tolist(),
        "order": [c.F.shape[0] for c in controller.nodes],
        "iterations": [f.riccati.iterations for f in filters],
        "residuals": [f.riccati.residual for f in filters],
        "stabilizing": [f.stabilizing for f in filters],
        "converged": all(f.riccati.converged for f in filters),
    })


def _synthesize_team(system, desc, options, out, manifest, progress):
    if desc.W is None:
        raise DescriptionParseError("Team mode requires the weight W.")
    weight = TeamWeight(W=desc.W)

    L = lift(system, options.memory)
    team = build_team_lift(L, weight)
    schedule = team_filter_iterate(team,
                                   options.team_max_horizon,
                                   tol=options.team_tol,
                                   stop_when_stationary=True,
                                   rank_tol=options.rank_tol,
                                   progress=progress)
    artifacts.write_json(os.path.join(out, "layout.json"), L.layout_manifest())
    artifacts.write_gain_schedule(
        out, list(schedule.gains), {
            "stationary": schedule.stationary,
            "stationary_index": schedule.stationary_index,
            "diverged": schedule.diverged,
            "costs": list(schedule.costs),
            "residuals": list(schedule.residuals),
            "tol": schedule.tol,
        })

    manifest.update({
        "memory": L.memory,
        "W": weight.W.tolist(),
        "steps": schedule.T,
        "converged": schedule.stationary and not schedule.diverged,
        "final_cost": schedule.costs[-1],
    })


def cmd_synthesize(args):
    system, desc, options = _load(args)
    kind = ProblemKind.feedforward if args["mode"] == "controller" else ProblemKind.estimation
    diagnostics = validate(system.with_noise(None) if args["mode"] == "controller" else system, kind)
    if diagnostics:
        for msg in diagnostics:
            print(msg)
        return EXIT_FAILURE

    out = args["out"]
    os.makedirs(out, exist_ok=True)
    threads = LQGraphSettings().threads

    law = adjacency_of(system)
    artifacts.write_delays(out, delay_matrix(law))
    print(">>> Pattern of the adjacency matrix:\n{}".format(star_table(law, 1)))

    manifest = {
        "mode": args["mode"],
        "options": options.model_dump(),
        "provenance": provenance_stamp("lqgraph synthesize --mode {}".format(args["mode"])),
        "n_dims": list(system.n_dims),
        "m_dims": list(system.m_dims),
        "p_dims": list(system.p_dims),
    }
    if args["mode"] == "estimator":
        _synthesize_estimator(system, options, threads, out, manifest)
    elif args["mode"] == "controller":
        _synthesize_controller(system, options, threads, out, manifest)
    else:
        _synthesize_team(system, desc, options, out, manifest, args["verbose"])

    artifacts.write_manifest(out, manifest, _raw_description(args["path"]))
    if not manifest["converged"]:
        print(">>> Synthesis did not converge; artifacts in {} are partial.".format(out))
        return EXIT_NONCONVERGENCE

    print(">>> Wrote {} artifacts to {}.".format(args["mode"], out))
    return EXIT_OK


def cmd_verify(args):
    system, _, options = _load(args)
    rows = run_suite(args["suite"], system, options, threads=LQGraphSettings().threads)
    frame = suite_frame(rows)
    print(frame.to_string(index=False))

    if not frame["passed"].all():
        print(">>> Suite '{}' FAILED.".format(args["suite"]))
        return EXIT_FAILURE
    print(">>> Suite '{}' passed.".format(args["suite"]))
    return EXIT_OK


def cmd_simulate(args):
    system, desc, options = _load(args)
    folder = args["artifacts"]
    try:
        manifest = artifacts.read_manifest(folder)
    except FileNotFoundError as exc:
        print(str(exc))
        return EXIT_FAILURE

    if list(manifest["n_dims"]) != list(system.n_dims) or list(manifest["p_dims"]) != list(system.p_dims) \
            or list(manifest["m_dims"]) != list(system.m_dims):
        print("Artifacts in {} were synthesized for different dimensions.".format(folder))
        return EXIT_FAILURE

    memory = manifest["memory"]
    run = dict(T=options.sim_horizon, trials=options.trials, seed=options.seed, progress=args["verbose"])
    try:
        if manifest["mode"] == "estimator":
            L = lift(system, memory)
            report = simulate_estimator(L, artifacts.read_filters(folder, system.N), **run)
        elif manifest["mode"] == "controller":
            report = simulate_closed_loop(system, artifacts.read_controller(folder, manifest), **run)
        else:
            gains = artifacts.read_gain_schedule(folder)
            team = build_team_lift(lift(system, memory), TeamWeight(W=manifest["W"]))
            report = simulate_team(team, gains, **run)
    except (FileNotFoundError, ValueError) as exc:
        print(str(exc))
        return EXIT_FAILURE

    out = args["out"] or os.path.join(folder, "simulation")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.json"), "w") as handle:
        handle.write(report.model_dump_json(indent=2))
    report.to_frame().to_csv(os.path.join(out, "report.csv"))
    report.step_frame().to_csv(os.path.join(out, "steps.csv"), index=False)

    print(report.to_frame().to_string())
    if report.diverged:
        print(">>> Simulation diverged.")
        return EXIT_FAILURE
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "synthesize": cmd_synthesize,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
}


def main(args=None):

    # Grab CLI args if not present
    if not isinstance(args, dict):
        args = parse_args(args)

    tornado.log.enable_pretty_logging()
    if args.get("verbose", False):
        logger.setLevel("DEBUG")

    try:
        return COMMANDS[args["command"]](args)
    except DescriptionParseError as exc:
        print("Parse error: {}".format(exc))
        return EXIT_PARSE
    except NonConvergenceError as exc:
        print("Numerical non-convergence: {}".format(exc))
        return EXIT_NONCONVERGENCE
    except (LQGraphError, ValueError, OSError) as exc:
        print("Error: {}".format(exc))
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
