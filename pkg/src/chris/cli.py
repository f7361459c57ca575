"""Command-line front end: synthesize traces, train the forest, profile, filter, simulate.

Every command writes its outputs plus a ``manifest.json`` into ``--out``.
The manifest records the command, its resolved inputs (with SHA-256
digests) and the seed, and holds no timestamps, so re-running a command
rewrites byte-identical files.

Exit codes: 0 success, 2 a constraint could not be met and the closest
configuration was used instead, 1 any error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from chris import __version__
from chris.difficulty import (
    Classifier,
    easy_hard_accuracy,
    load_forest,
    oracle_classifier,
    rf_train,
    save_forest,
    window_dataset,
)
from chris.energy import EnergyProfiles, load_profiles
from chris.engine import ConnectionStatus, Constraint, parse_constraint
from chris.errors import ChrisError
from chris.predictors import ModelKind, Predictor, default_predictors, load_model, tcn_predictor
from chris.signal import HR_MAX, HR_MIN, check_hr, load_trace, save_trace, synth_trace, windows
from chris.sim import LinkSchedule, run, sweep, sweep_rows
from chris.zoo import (
    ConfigTable,
    enumerate_configurations,
    load_table,
    local_front,
    pareto_filter,
    prepare,
    profile_all,
    read_configs,
    save_table,
    example_table,
    write_configs,
)

log = logging.getLogger("chris")

EXIT_OK, EXIT_ERROR, EXIT_SOFT_VIOLATION = 0, 1, 2
ORACLE = "oracle"
TABLE_FIXTURES = {"example": example_table}


class UsageError(ChrisError, ValueError):
    """Bad command-line usage."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits with 2, which we reserve
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# -- argument types ------------------------------------------------------------------


def parse_activities(text: str) -> list[int]:
    """``1..9``, ``1,3,5`` or a mix such as ``1..3,7``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = (int(x) for x in part.split("..", 1))
            if lo > hi:
                raise argparse.ArgumentTypeError(f"empty activity range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    if not out or any(not 1 <= a <= 9 for a in out):
        raise argparse.ArgumentTypeError(f"activities must be in 1..9: {text!r}")
    return out


def parse_hr(text: str) -> list[float]:
    """One heart rate, or a comma-separated list with one rate per segment."""
    try:
        rates = [check_hr(float(x)) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"heart rate must be in ({HR_MIN:g}, {HR_MAX:g}) BPM: {text!r}") from exc
    return rates


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def constraint_arg(text: str) -> Constraint:
    try:
        return parse_constraint(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


# -- helpers -------------------------------------------------------------------------


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Manifest:
    """Collects the inputs of one command and writes ``manifest.json``."""

    def __init__(self, command: str, seed: int | None) -> None:
        self.data: dict[str, Any] = {
            "command": command,
            "version": __version__,
            "seed": seed,
            "inputs": {},
            "options": {},
            "outputs": [],
        }

    def input(self, name: str, value: str | Path | None) -> None:
        if value is None:
            return
        entry: dict[str, Any] = {"ref": str(value)}
        path = Path(value)
        if path.is_file():
            entry["sha256"] = _digest(path)
        self.data["inputs"][name] = entry

    def option(self, name: str, value: Any) -> None:
        self.data["options"][name] = value

    def output(self, path: Path) -> None:
        self.data["outputs"].append(path.name)

    def write(self, out: Path) -> None:
        self.data["outputs"].sort()
        (out / "manifest.json").write_text(
            json.dumps(self.data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _require_file(path: str | None, what: str) -> Path:
    if path is None:
        raise UsageError(f"--{what} is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} file not found: {path}")
    return p


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _classifier(ref: str | None) -> Classifier:
    if ref is None:
        raise UsageError("--forest is required (a forest JSON file or 'oracle')")
    if ref == ORACLE:
        return oracle_classifier
    return load_forest(_require_file(ref, "forest"))


def _profiles(ref: str) -> EnergyProfiles:
    return load_profiles(ref)


def _predictors(args: argparse.Namespace) -> dict[ModelKind, Predictor]:
    predictors = default_predictors()
    for kind, ref in ((ModelKind.SMALL, args.small_model), (ModelKind.BIG, args.big_model)):
        if ref is not None:
            spec, weights = load_model(_require_file(ref, "model"))
            if weights is None:
                raise UsageError(f"{ref} holds no weights")
            predictors[kind] = tcn_predictor(spec, weights, kind.name.lower())
    return predictors


def _table(ref: str) -> ConfigTable:
    if ref in TABLE_FIXTURES:
        return TABLE_FIXTURES[ref]()
    return load_table(_require_file(ref, "table"))


def _trace_seed(trace_meta: dict[str, Any], fallback: int | None) -> int | None:
    seed = trace_meta.get("seed")
    return int(seed) if seed is not None else fallback


def _load_control(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    data = json.loads(_require_file(path, "control").read_text(encoding="utf-8"))
    unknown = set(data) - {"constraint", "status", "schedule"}
    if unknown:
        raise UsageError(f"unknown control keys: {sorted(unknown)}")
    return data


# -- commands ------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    rates = args.hr
    if len(rates) not in (1, len(args.activities)):
        raise UsageError("--hr takes one rate or one rate per activity segment")
    trace = synth_trace(args.activities, args.windows_per_activity,
                        rates[0] if len(rates) == 1 else rates, args.seed)
    out = _out_dir(args)
    path = out / "trace.csv"
    save_trace(trace, path)
    m = Manifest("synth", args.seed)
    m.option("activities", args.activities)
    m.option("windows_per_activity", args.windows_per_activity)
    m.option("hr", rates)
    m.output(path)
    m.output(path.with_name(path.name + ".meta.json"))
    m.write(out)
    print(f"wrote {path} ({len(trace)} rows, {len(windows(trace))} windows)")
    return EXIT_OK


def cmd_train_rf(args: argparse.Namespace) -> int:
    trace_path = _require_file(args.trace, "trace")
    trace = load_trace(trace_path)
    dataset = window_dataset(windows(trace))
    forest = rf_train(dataset, seed=args.seed)
    out = _out_dir(args)
    path = out / "forest.json"
    save_forest(forest, path)
    m = Manifest("train-rf", args.seed)
    m.input("trace", trace_path)
    m.output(path)
    m.write(out)
    accs = [easy_hard_accuracy(forest, dataset, t) for t in range(1, 9)]
    print(f"wrote {path} ({len(forest.trees)} trees, {len(dataset)} windows, "
          f"min easy/hard training accuracy {min(accs):.3f})")
    return EXIT_OK


def cmd_profile(args: argparse.Namespace) -> int:
    trace_path = _require_file(args.trace, "trace")
    trace = load_trace(trace_path)
    profiles = _profiles(args.profiles)
    data = prepare(windows(trace), _classifier(args.forest), _predictors(args),
                   dataset_id=trace_path.name)
    configs = profile_all(enumerate_configurations(tuple(ModelKind), profiles,
                                                   not args.local_only), data, profiles)
    out = _out_dir(args)
    path = out / "configs.csv"
    write_configs(configs, path)
    m = Manifest("profile", _trace_seed(trace.metadata, args.seed))
    m.input("trace", trace_path)
    m.input("forest", args.forest)
    m.input("profiles", args.profiles)
    m.input("small_model", args.small_model)
    m.input("big_model", args.big_model)
    m.option("local_only", args.local_only)
    m.output(path)
    m.write(out)
    print(f"wrote {path} ({len(configs)} configurations)")
    return EXIT_OK


def cmd_pareto(args: argparse.Namespace) -> int:
    src = _require_file(args.configs, "configs")
    configs = read_configs(src)
    table = pareto_filter(configs, dataset_id=src.name)
    if not table.is_pareto():
        raise ChrisError("filtered table is not an antichain")
    local = local_front(configs, dataset_id=src.name)
    out = _out_dir(args)
    table.metadata["seed"] = args.seed
    local.metadata["seed"] = args.seed
    front_path, local_path, plot_path = out / "pareto.csv", out / "pareto_local.csv", out / "plot.csv"
    save_table(table, front_path)
    save_table(local, local_path)
    # Every input point with its front membership, sorted by energy, for MAE-vs-energy plots.
    on_front = {c.key for c in table.rows}
    cloud = sorted((c for c in configs if c.avg_mae_bpm is not None and not math.isnan(c.avg_mae_bpm)),
                   key=lambda c: (c.avg_watch_mj, c.avg_mae_bpm, c.key))
    write_configs(cloud, plot_path, extra={
        "label": [c.label() for c in cloud],
        "pareto": [int(c.key in on_front) for c in cloud],
    })
    m = Manifest("pareto", args.seed)
    m.input("configs", src)
    for p in (front_path, local_path, plot_path):
        m.output(p)
        if p is not plot_path:
            m.output(p.with_name(p.name + ".meta.json"))
    m.write(out)
    print(f"wrote {front_path} ({len(table)} of {len(configs)} configurations on the front)")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    control = _load_control(args.control)
    constraint = args.constraint
    if constraint is None and "constraint" in control:
        constraint = parse_constraint(str(control["constraint"]))
    if constraint is None:
        raise UsageError("--constraint (or a control file with 'constraint') is required")
    schedule_ref = args.schedule or control.get("schedule")
    status_text = args.status or control.get("status")
    if schedule_ref is not None and status_text is not None:
        raise UsageError("give either a schedule or a fixed status, not both")

    trace_path = _require_file(args.trace, "trace")
    trace = load_trace(trace_path)
    n = len(windows(trace))
    if schedule_ref is not None:
        schedule = LinkSchedule.load(_require_file(schedule_ref, "schedule"))
    else:
        status = ConnectionStatus.parse(status_text) if status_text else ConnectionStatus.CONNECTED
        schedule = LinkSchedule.constant(n, status)

    table = _table(args.table)
    local = _table(args.local_table) if args.local_table else None
    report = run(trace, table, _classifier(args.forest), _profiles(args.profiles), constraint,
                 schedule, local_table=local, predictors=_predictors(args))
    seed = _trace_seed(trace.metadata, args.seed)
    report.metadata["seed"] = seed
    report.metadata["constraint"] = str(constraint)
    out = _out_dir(args)
    report.save(out)
    m = Manifest("simulate", seed)
    m.input("trace", trace_path)
    m.input("table", args.table)
    m.input("local_table", args.local_table)
    m.input("forest", args.forest)
    m.input("profiles", args.profiles)
    m.input("schedule", schedule_ref)
    m.input("control", args.control)
    m.input("small_model", args.small_model)
    m.input("big_model", args.big_model)
    m.option("constraint", str(constraint))
    m.option("status", status_text)
    for name in ("report.json", "windows.csv", "summary.csv"):
        m.output(out / name)
    m.write(out)
    s = report.summary()
    mae = "n/a" if s["mae_bpm"] is None else f"{s['mae_bpm']:.3f} BPM"
    print(f"{n} windows: MAE {mae}, watch {s['watch_mj_mean']:.4f} mJ/window, "
          f"offload {s['offload_fraction']:.3f}, faults {s['n_faults']}")
    if report.soft_violation:
        print(f"constraint {constraint} not met; closest configuration used", file=sys.stderr)
        return EXIT_SOFT_VIOLATION
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    trace_path = _require_file(args.trace, "trace")
    trace = load_trace(trace_path)
    results = sweep(trace, tuple(ModelKind), _classifier(args.forest), _profiles(args.profiles),
                    predictors=_predictors(args), include_hybrid=not args.local_only)
    out = _out_dir(args)
    path = out / "sweep.csv"
    write_configs([c for c, _ in results], path, extra=sweep_rows(results))
    m = Manifest("sweep", _trace_seed(trace.metadata, args.seed))
    m.input("trace", trace_path)
    m.input("forest", args.forest)
    m.input("profiles", args.profiles)
    m.input("small_model", args.small_model)
    m.input("big_model", args.big_model)
    m.option("local_only", args.local_only)
    m.output(path)
    m.write(out)
    print(f"wrote {path} ({len(results)} configurations)")
    return EXIT_OK


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chris", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log configuration changes")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser, *, seed_default: int | None = None) -> None:
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=seed_default,
                       help="seed recorded in the outputs (traces carry their own)")

    def inputs(p: argparse.ArgumentParser) -> None:
        p.add_argument("--trace", help="trace CSV")
        p.add_argument("--forest", help="forest JSON, or 'oracle' for the true labels")
        p.add_argument("--profiles", default="deployment",
                       help="energy profile JSON or a built-in set (deployment, summary)")
        p.add_argument("--small-model", help="TimePPG-Small model JSON with weights")
        p.add_argument("--big-model", help="TimePPG-Big model JSON with weights")

    p = sub.add_parser("synth", help="write a synthetic trace")
    p.add_argument("--activities", type=parse_activities, default=list(range(1, 10)),
                   help="segments, e.g. 1..9 or 1,4,9 (default 1..9)")
    p.add_argument("--windows-per-activity", type=positive_int, default=50)
    p.add_argument("--hr", type=parse_hr, default=[75.0],
                   help="BPM, or one comma-separated rate per segment")
    common(p, seed_default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-rf", help="train the activity forest on a labelled trace")
    p.add_argument("--trace", help="trace CSV")
    common(p, seed_default=0)
    p.set_defaults(func=cmd_train_rf)

    p = sub.add_parser("profile", help="profile every configuration on a trace")
    inputs(p)
    p.add_argument("--local-only", action="store_true", help="skip Hybrid configurations")
    common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("pareto", help="Pareto-filter profiled configurations")
    p.add_argument("--configs", help="profiled configurations CSV (profile or sweep output)")
    common(p)
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("simulate", help="run the runtime on a trace under a constraint")
    inputs(p)
    p.add_argument("--table", default="example",
                   help="configuration table CSV or a built-in fixture (example)")
    p.add_argument("--local-table", help="table used while disconnected")
    p.add_argument("--constraint", type=constraint_arg,
                   help="max-mae=<bpm> or max-energy=<mJ>")
    p.add_argument("--schedule", help="link schedule JSON")
    p.add_argument("--status", help="fixed link status (Connected or Disconnected)")
    p.add_argument("--control", help="JSON with constraint, status and/or schedule")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="simulate every configuration on a trace")
    inputs(p)
    p.add_argument("--local-only", action="store_true", help="skip Hybrid configurations")
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ChrisError, ValueError, KeyError, OSError) as exc:
        print(f"chris {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
