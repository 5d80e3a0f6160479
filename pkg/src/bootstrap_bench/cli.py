"""Command-line entry points.

Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime failure.
"""
import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import datagen, dynamics, harness, novelty
from .config import ExperimentConfig, load_config
from .errors import BenchError, ConfigError

OUT_ENV_VAR = "BOOTSTRAP_BENCH_OUT"
EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="bootstrap-bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_help="output directory"):
        p.add_argument("--config", help="experiment config file")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--env", help="override the environment")
        p.add_argument("--out", help=f"{out_help} (default: ${OUT_ENV_VAR} or the config's output_dir)")
        return p

    p = common(sub.add_parser("run", help="full grid from a config file"))
    p.add_argument("--jobs", type=int, default=1, help="max concurrent repetitions")

    p = common(sub.add_parser("gather", help="gather one cell's dataset"))
    p.add_argument("--method", required=True, choices=datagen.METHODS)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--rep", type=int, default=0)

    p = common(sub.add_parser("train", help="fit a model from a dataset file"))
    p.add_argument("--dataset", required=True)

    p = common(sub.add_parser("evaluate", help="suite errors of a trained model"))
    p.add_argument("--model", required=True)
    p.add_argument("--suite", required=True)

    common(sub.add_parser("ns", help="build the evaluation suite"))

    p = common(sub.add_parser("report", help="tables and histograms from errors.csv"))
    p.add_argument("--errors", required=True)
    return parser


def resolve_config(args):
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.env is not None:
        overrides["env"] = args.env
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    out = args.out or os.environ.get(OUT_ENV_VAR)
    if out:
        overrides["output_dir"] = out
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _out_dir(config):
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    return out


def cmd_run(args, config):
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    manifest = harness.run_experiment(config, jobs=args.jobs,
                                      log=lambda m: print(m, file=sys.stderr))
    out = Path(config.output_dir)
    print(out / "manifest.json")
    if manifest["failures"] or manifest["table_error"]:
        for f in manifest["failures"]:
            print(f"cell failed: {f}", file=sys.stderr)
        if manifest["table_error"]:
            print(f"table not written: {manifest['table_error']}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_gather(args, config):
    ds = harness.gather_cell(config, args.rep, args.method, args.budget)
    path = _out_dir(config) / f"dataset_{config.env}_{args.method}_b{args.budget}_r{args.rep}.npz"
    datagen.save_dataset(ds, path)
    print(path)
    return EXIT_OK


def cmd_train(args, config):
    ds = datagen.load_dataset(args.dataset)
    config = dataclasses.replace(config, env=ds.meta["env"])
    model = harness.train_cell(config, ds)
    m = model.meta
    path = _out_dir(config) / f"model_{m['env']}_{m['method']}_b{m['budget']}_r{m['rep']}.npz"
    dynamics.save_model(model, path)
    print(path)
    return EXIT_OK


def cmd_evaluate(args, config):
    model = dynamics.load_model(args.model)
    suite = novelty.load_archive(args.suite)
    m = model.meta
    if suite.env != m["env"]:
        raise ConfigError(f"suite is for {suite.env} but the model is for {m['env']}")
    config = dataclasses.replace(config, env=m["env"])
    rows = harness.evaluate_cell(config, model, suite)
    res = harness.CellResult(m["rep"], m["method"], m["budget"], rows)
    path = _out_dir(config) / f"errors_{m['env']}_{m['method']}_b{m['budget']}_r{m['rep']}.csv"
    path.write_text(harness.errors_csv(config, [res]), encoding="utf-8")
    print(path)
    return EXIT_OK


def cmd_ns(args, config):
    suite = harness.build_suite(config)
    path = harness.suite_path(config, _out_dir(config))
    novelty.save_archive(suite, path)
    print(path)
    return EXIT_OK


def cmd_report(args, config):
    try:
        text = Path(args.errors).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {args.errors}: {exc}") from None
    envs_seen = {row.split(",", 1)[0] for row in text.splitlines()[1:] if row}
    if len(envs_seen) > 1:
        raise ConfigError(f"errors file mixes environments: {sorted(envs_seen)}")
    if envs_seen and args.env is None:
        config = dataclasses.replace(config, env=envs_seen.pop())
    out = _out_dir(config)
    harness.write_report(text, out, config.budgets, config.resolved_horizons(), config.methods)
    harness.write_histograms(config, out)
    print(out / "table.txt")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "gather": cmd_gather, "train": cmd_train, "evaluate": cmd_evaluate,
            "ns": cmd_ns, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BenchError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
