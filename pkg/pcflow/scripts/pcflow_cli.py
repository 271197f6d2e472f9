"""Sampling, sweep, and verification commands."""

import argparse
import contextlib
import json
import logging
import sys
from collections import OrderedDict
from typing import Iterator

import numba
from prompt_toolkit import print_formatted_text
from prompt_toolkit.formatted_text import HTML

import pcflow
from pcflow import config, experiments, io, sampler
from pcflow.evaluation.report import ReportEncoder, RunReport
from pcflow.utils import TEXT_STYLE, ConfigError, NumericalError, logging_phase

EXE_NAME = "pcflow"

pcflow.scripts.configure_logging(EXE_NAME)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY_FAILED = 4


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        description="predictor-corrector samplers for the probability flow ODE"
    )
    subparsers = parser.add_subparsers(title="Commands", dest="command")
    subparsers.required = True

    source = argparse.ArgumentParser(add_help=False)
    group = source.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="Path to a JSON run configuration.")
    group.add_argument(
        "--preset",
        choices=config.available_presets(),
        help="Name of a bundled configuration.",
    )

    common = argparse.ArgumentParser(add_help=False, parents=[source])
    common.add_argument("--out", help="Output directory, overrides run.output_dir.")
    common.add_argument("--seed", type=int, help="Overrides run.seed.")
    common.add_argument(
        "--threads", type=int, help="Number of threads for the numba kernels."
    )

    sample_parser = subparsers.add_parser(
        "sample",
        parents=[common],
        help="Run the configured sampler and write a report plus ensemble snapshots.",
    )
    sample_parser.set_defaults(func=cmd_sample)

    sweep_parser = subparsers.add_parser(
        "sweep",
        parents=[common],
        help="Sweep one parameter, write the error table and the fitted log-log slope.",
    )
    sweep_parser.set_defaults(func=cmd_sweep)

    verify_parser = subparsers.add_parser(
        "verify",
        parents=[common],
        help="Run the diagnostic checks; exits nonzero if any check fails.",
    )
    verify_parser.set_defaults(func=cmd_verify)

    config_parser = subparsers.add_parser(
        "config",
        parents=[source],
        help="Print a configuration with every default filled in.",
    )
    config_parser.set_defaults(func=cmd_config)
    return parser.parse_args(argv)


def load_config(args) -> config.ConfigFile:
    """Read the configuration and apply command line overrides."""
    if args.preset is not None:
        cfg = config.load_preset(args.preset)
    else:
        try:
            cfg = config.ConfigFile.load(args.config)
        except OSError as e:
            raise ConfigError("--config", f"cannot read {args.config}: {e}") from e
    if getattr(args, "out", None) is not None:
        cfg = cfg.replace(output_dir=args.out)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_run(seed=args.seed)
    return cfg


def set_threads(threads):
    if threads is not None and threads < 1:
        raise ConfigError("--threads", f"must be at least 1, got {threads}")
    n = threads if threads is not None else pcflow.utils.EnvVarConstants.NUM_THREADS
    if n < 1:
        return
    try:
        numba.set_num_threads(n)
    except ValueError as e:
        raise ConfigError("--threads", str(e)) from e
    logging.getLogger("pcflow").debug(f"Using {n} numba threads")


@contextlib.contextmanager
def _output(cfg: config.ConfigFile) -> Iterator[io.OutputDirectory]:
    """Open the output directory, log into it, and record the resolved config."""
    out = io.OutputDirectory(cfg.output_dir)
    handler = pcflow.scripts.log_to_file(out.path("pcflow.log"), EXE_NAME)
    try:
        with out.atomic_write("config.json") as f:
            cfg.write(f)
        yield out
    finally:
        logging.getLogger("pcflow").removeHandler(handler)
        handler.close()


def _snapshot_writer(out: io.OutputDirectory, run: sampler.RunConfig):
    def write(ensemble, record):
        name = io.ensemble_filename(record.index, record.reverse_time)
        metadata = OrderedDict(
            algorithm=run.mode,
            seed=run.seed,
            index=record.index,
            stage=record.stage,
            iteration=record.iteration,
            requested_time=f"{record.requested_time:.17g}",
            reverse_time=f"{record.reverse_time:.17g}",
            n_particles=ensemble.size,
            dimension=ensemble.dimension,
        )
        with out.atomic_write(name) as f:
            io.write_ensemble_csv(f, ensemble, metadata)
        return name

    return write


def cmd_sample(args, cfg: config.ConfigFile) -> int:
    """Run the sampler, writing report.json and any requested snapshots."""
    with _output(cfg) as out:
        callback = _snapshot_writer(out, cfg.run) if cfg.run.dump_ensembles else None
        _, report = sampler.run(cfg.run, on_checkpoint=callback)
        with out.atomic_write("report.json") as f:
            report.write(f, include_runtime=cfg.record_runtime)
        logging.getLogger("pcflow").info(
            f"Wrote {len(report.checkpoints)} checkpoints to {out.root}"
        )
    return EXIT_OK


def cmd_sweep(args, cfg: config.ConfigFile) -> int:
    """Run a sweep, writing sweep.csv and report.json with the fitted slope."""
    sweep = cfg.require_sweep()
    with _output(cfg) as out:
        with logging_phase(f"sweep-{sweep.parameter}"):
            summary = experiments.run_sweep(cfg.run, sweep)
        report = RunReport(
            algorithm=cfg.run.mode,
            seed=cfg.run.seed,
            dimension=cfg.run.dimension,
            plan=sampler.RunPlan.resolve(cfg.run).serialize(),
            sweep=summary,
        )
        with out.atomic_write("sweep.csv") as f:
            summary.write_csv(f)
        with out.atomic_write("report.json") as f:
            report.write(f, include_runtime=cfg.record_runtime)
    print_formatted_text(
        HTML(
            f"<b>{TEXT_STYLE.format_check(summary.parameter)}</b> slope "
            f"{TEXT_STYLE.format_value(f'{summary.slope:.3f}')} "
            f"+/- {TEXT_STYLE.format_value(f'{summary.slope_stderr:.3f}')} "
            f"({summary.metric})"
        )
    )
    return EXIT_OK


def cmd_verify(args, cfg: config.ConfigFile) -> int:
    """Run the diagnostic checks, write verify.json, exit 4 on any failure."""
    with _output(cfg) as out:
        with logging_phase("verify"):
            results = experiments.run_verify(cfg.run, cfg.verify)
        passed = all(result.passed for result in results)
        summary = OrderedDict(
            passed=passed, checks=[result.serialize() for result in results]
        )
        with out.atomic_write("verify.json") as f:
            f.write(json.dumps(summary, indent=4, cls=ReportEncoder) + "\n")
    for result in results:
        status = (
            TEXT_STYLE.format_passed("passed")
            if result.passed
            else TEXT_STYLE.format_failed("FAILED")
        )
        print_formatted_text(
            HTML(
                f"{TEXT_STYLE.format_check(result.name)}: {status} "
                f"value={TEXT_STYLE.format_value(f'{result.value:.4g}')} "
                f"tolerance={result.tolerance:.4g}"
            )
        )
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


def cmd_config(args, cfg: config.ConfigFile) -> int:
    sys.stdout.write(cfg.dumps())
    return EXIT_OK


def main(argv=None) -> int:
    args = parse_args(argv)
    logger = logging.getLogger("pcflow")
    try:
        cfg = load_config(args)
        set_threads(getattr(args, "threads", None))
        return args.func(args, cfg)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
