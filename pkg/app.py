import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from components.cli_options import add_config_options, cli_overrides
from components.emit import emit, write_csv, write_json
from components.summary import record_tiles, render_tiles, report_tiles
from modules.annealtime import annealing_time_prediction
from modules.errors import VCQAError
from modules.hamiltonian import ProblemInstance
from modules.harness import (
    ResultRecord,
    generate_instances,
    replay,
    run_gap_study,
    run_strategy,
    run_sweep,
    setup_for,
)
from modules.schedule import dump_schedules, ramp_equivalent_params, ramp_profile, schedules_from_params
from modules.utils import load_config, load_instances, load_records, load_trajectory

logger = logging.getLogger("vcqa")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vcqa", description="Variational coherent quantum annealing lab")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate seeded problem instances")
    add_config_options(gen)
    gen.add_argument("--out", help="Instance JSON file")

    for name, default in (("anneal", "ramp"), ("optimize", "vcqa-z")):
        run = sub.add_parser(name, help="Single run of one strategy on one instance")
        add_config_options(run)
        run.add_argument("--instances", help="Instance file from `gen`; drawn from the config when omitted")
        run.add_argument("--index", type=int, default=0, help="Instance id inside the file or ensemble")
        run.add_argument("--strategy", default=default)
        run.add_argument("--total-time", type=float, help="T in units of 1/epsilon; defaults to the last value of the T grid")
        run.add_argument("--trajectory", help="Also save the sampled trajectory (.npz) with its states")

    for name, text in (("sweep", "Ensemble sweep over N, T and strategies"), ("gap", "Ensemble gap study")):
        add_config_options(sub.add_parser(name, help=text))

    at = sub.add_parser("annealtime", help="Annealing-time report for a stored trajectory")
    add_config_options(at)
    at.add_argument("--trajectory", required=True, help=".npz written by anneal/optimize --trajectory")
    at.add_argument("--run", required=True, help="run.json written next to the trajectory")

    rp = sub.add_parser("replay", help="Re-run one record of a sweep")
    add_config_options(rp)
    rp.add_argument("--records", required=True)
    rp.add_argument("--position", type=int, default=0, help="Index into the sorted records")

    schedule = sub.add_parser("schedule", help="Schedule utilities")
    schedule_sub = schedule.add_subparsers(dest="action", required=True)
    dump = schedule_sub.add_parser("dump", help="Sample F1, F2, F3 to CSV")
    add_config_options(dump)
    dump.add_argument("--params", type=float, nargs="+", help="Flat parameter vector F1, F2, F3")
    dump.add_argument("--ramp", action="store_true", help="Exact linear ramp instead of parameters")
    dump.add_argument("--no-aux", action="store_true", help="Parameters carry no F3 block")
    dump.add_argument("--out", default="schedules.csv")
    return parser


def _instance(args, config) -> ProblemInstance:
    if args.instances:
        matches = [inst for inst in load_instances(args.instances) if inst.instance_id == args.index]
        if not matches:
            raise SystemExit(f"No instance with id {args.index} in {args.instances}")
        return matches[0]
    return generate_instances(
        config.connectivity, config.n_qubits[0], args.index + 1, config.seed, config.value_range, config.heisenberg
    )[args.index]


def cmd_gen(args, config) -> None:
    instances = [
        inst
        for n in config.n_qubits
        for inst in generate_instances(config.connectivity, n, config.ensemble_size, config.seed, config.value_range, config.heisenberg)
    ]
    out = Path(args.out or Path(config.output_dir) / f"instances_{config.connectivity}.json")
    print(write_json([json.loads(inst.to_json()) for inst in instances], out))


def cmd_run(args, config) -> None:
    instance = _instance(args, config)
    total_time = args.total_time if args.total_time is not None else config.t_grid[-1]
    record, trajectory = run_strategy(instance, args.strategy, total_time, config, keep_states=bool(args.trajectory))
    render_tiles(record_tiles(record))
    if args.trajectory:
        path = Path(args.trajectory).with_suffix(".npz")
        path.parent.mkdir(parents=True, exist_ok=True)
        trajectory.save(path)
        run_file = path.with_name(path.stem + "_run.json")
        write_json({"record": record.as_dict(), "instance": json.loads(instance.to_json())}, run_file)
        print(path)
        print(run_file)


def cmd_sweep(args, config) -> None:
    for path in emit(run_sweep(config), config):
        print(path)


def cmd_gap(args, config) -> None:
    for path in emit(run_gap_study(config), config):
        print(path)


def cmd_annealtime(args, config) -> None:
    with open(args.run) as f:
        run = json.load(f)
    record = ResultRecord.from_dict(run["record"])
    instance = ProblemInstance.from_json(run["instance"])
    setup = setup_for(instance, record.strategy, record.total_time, record.best_params, config)
    report = annealing_time_prediction(load_trajectory(args.trajectory), setup, config.boundary_tol, config.denominator_tol)
    render_tiles(report_tiles(report))
    print(write_json(report.as_dict(), Path(args.trajectory).with_suffix(".annealtime.json")))


def cmd_replay(args, config) -> None:
    record = load_records(args.records)[args.position]
    rerun = replay(record, config)
    render_tiles(record_tiles(rerun))
    render_tiles([("E% drift", f"{abs(rerun.err_pct - record.err_pct):.2e}")])


def cmd_schedule(args, config) -> None:
    if args.ramp:
        schedules = ramp_profile()
    else:
        layout = config.n_params if not args.no_aux else (config.n_params[0], config.n_params[1], 0)
        params = args.params if args.params is not None else ramp_equivalent_params(layout, config.bounds)
        schedules = schedules_from_params(np.asarray(params), layout, config.bounds)
    print(write_csv(dump_schedules(schedules, config.dump_points), args.out))


COMMANDS = {
    "gen": cmd_gen,
    "anneal": cmd_run,
    "optimize": cmd_run,
    "sweep": cmd_sweep,
    "gap": cmd_gap,
    "annealtime": cmd_annealtime,
    "replay": cmd_replay,
    "schedule": cmd_schedule,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, cli_overrides(args))
        COMMANDS[args.command](args, config)
    except VCQAError as err:
        logger.error("%s: %s", type(err).__name__, err)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
