import argparse
import json
import logging
import os
import sys

from relifit.comparison import ModelComparator, parse_model_list
from relifit.config import get_config, load_config, save_config
from relifit.data_processor import BugReportProcessor, Grouping, load_failure_csv, write_failure_csv
from relifit.exceptions import EXIT_FIT, EXIT_IO, EXIT_OK, EXIT_USAGE, RelifitError, UsageError
from relifit.fitter import FitOptions, ModelFitter, summary_line
from relifit.model import ModelKind, gamma_from_mu, model_from_names, mu_from_gamma
from relifit.optimizer import SwarmConfig
from relifit.reports import (mu_plot_frame, render_compare, render_mu_plot, to_json, validate_document,
                             win_rate_line, write_text)
from relifit.simulation import simulate_series

# Get logger
logger = logging.getLogger(__name__)

ALL_MODELS = ','.join(kind.value for kind in ModelKind)


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


def parse_profile(text):
    parts = text.split(':')
    if len(parts) != 3:
        raise UsageError(f"--profile-gamma expects LO:HI:STEP (got '{text}')")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise UsageError(f"--profile-gamma expects numbers (got '{text}')")


def select_series(series_list, release, path):
    """Series matching --release; 'all' (or None) keeps every release."""
    if release in (None, 'all'):
        return series_list
    chosen = [s for s in series_list if s.release_id == release]
    if not chosen:
        known = ', '.join(s.release_id for s in series_list)
        raise UsageError(f"release '{release}' not found in {path} (releases: {known})")
    return chosen


def build_fit_options(args, config):
    """FitOptions from config defaults overridden by command-line flags."""
    fitting = config['fitting']
    p = fitting['p'] if args.p is None else args.p
    r = fitting['r'] if args.r is None else args.r
    if not p > r:
        raise UsageError(f"fault removal probability p must exceed introduction probability r "
                         f"(got p={p}, r={r}; p > r is required)")

    swarm = dict(config['swarm'])
    for key, value in (('seed', args.seed), ('pop_size', args.swarm), ('max_iters', args.iters)):
        if value is not None:
            swarm[key] = value

    return FitOptions.from_config(
        config,
        p=p,
        r=r,
        gamma=args.gamma,
        mu=args.mu,
        estimate_gamma=args.estimate_gamma or None,
        profile_gamma=parse_profile(args.profile_gamma) if args.profile_gamma else None,
        swarm=SwarmConfig.from_dict(swarm),
        phi_bounds=tuple(args.phi_bounds) if args.phi_bounds else None,
        n_bounds=tuple(args.n_bounds) if args.n_bounds else None,
        gamma_bounds=tuple(args.gamma_bounds) if args.gamma_bounds else None,
        workers=args.workers,
        mission_times=tuple(getattr(args, 'mission_time', None) or ()) or None,
    )


def warn_ignored_gamma(args, kinds):
    gamma_flags = args.gamma is not None or args.mu is not None or args.estimate_gamma or args.profile_gamma
    if gamma_flags and ModelKind.PROPOSED not in kinds:
        logger.warning("Gamma flags only apply to the Proposed model; ignoring them")


def fit_model(args):
    """
    Fit one model to one release and write the FitResult JSON.

    Args:
        args: Command-line arguments
    """
    config = get_config()
    kind = ModelKind.parse(args.model)
    options = build_fit_options(args, config)
    warn_ignored_gamma(args, (kind,))

    try:
        series_list = load_failure_csv(args.data)
        if args.release is None:
            if len(series_list) != 1:
                raise UsageError(f"{args.data} holds {len(series_list)} releases; choose one with --release")
            series = series_list[0]
        else:
            series = select_series(series_list, args.release, args.data)[0]
        result = ModelFitter(options).fit(series, kind)
    except FileNotFoundError as e:
        logger.debug(f"Failure data not found: {e}")
        raise
    except Exception as e:
        logger.debug(f"Error during fit: {e!r}")
        raise

    document = result.to_dict()
    if args.validate:
        validate_document(document, 'fit')
    if args.out:
        write_text(args.out, to_json(document))
        print(summary_line(result))
    else:
        sys.stdout.write(to_json(document))
        logger.info(summary_line(result))


def compare_models(args):
    """
    Fit several models to every selected release and emit the comparison report.

    Args:
        args: Command-line arguments
    """
    config = get_config()
    kinds = parse_model_list(args.models)
    fmt = args.format or config['output']['format']
    options = build_fit_options(args, config)
    warn_ignored_gamma(args, kinds)

    try:
        series_list = select_series(load_failure_csv(args.data), args.release, args.data)
        windows = BugReportProcessor().load_windows(args.windows) if args.windows else None
        comparator = ModelComparator(ModelFitter(options), model_workers=args.model_workers)
        report = comparator.compare_releases(series_list, kinds, windows)
    except FileNotFoundError as e:
        logger.debug(f"Input file not found: {e}")
        raise
    except Exception as e:
        logger.debug(f"Error during comparison: {e!r}")
        raise

    if args.validate:
        validate_document(report.to_dict(), 'compare')

    text = render_compare(report, fmt)
    if args.out:
        write_text(args.out, text)
        for metric, rates in report.rates.items():
            print(win_rate_line(metric, rates))
    else:
        sys.stdout.write(text)


def ingest_reports(args):
    """
    Turn bug reports and release windows into a failure-interval CSV.

    Args:
        args: Command-line arguments
    """
    config = get_config()
    grouping = Grouping.parse(args.grouping or config['ingest']['grouping'])
    time_unit = args.time_unit or config['ingest']['time_unit']
    processor = BugReportProcessor(grouping, time_unit)
    try:
        result = processor.process(args.bug_reports, args.windows)
    except FileNotFoundError as e:
        logger.debug(f"Bug report input not found: {e}")
        raise
    except Exception as e:
        logger.debug(f"Error during ingestion: {e!r}")
        raise
    write_failure_csv(result.series, args.out)
    if result.skipped:
        logger.warning(f"{result.skipped} bug report(s) skipped: {result.outside_windows} outside windows, "
                       f"{result.anchors} window anchors, {result.undersized} in undersized windows")
    print(f"{result.counted} failure(s) in {len(result.series)} release(s), {result.skipped} skipped")


def simulate_failures(args):
    """
    Draw a synthetic failure series from a parameterized model.

    Args:
        args: Command-line arguments
    """
    config = get_config()
    kind = ModelKind.parse(args.model)
    p = config['fitting']['p'] if args.p is None else args.p
    r = config['fitting']['r'] if args.r is None else args.r
    gamma, mu = args.gamma, args.mu
    if kind is ModelKind.PROPOSED and gamma is None and mu is None:
        raise UsageError("simulating the Proposed model needs --gamma or --mu")
    spec = model_from_names(kind, args.phi, args.N, p, r, gamma, mu)
    seed = config['swarm']['seed'] if args.seed is None else args.seed
    series = simulate_series(spec, args.count, seed=seed, release_id=args.release)
    write_failure_csv([series], args.out)
    print(f"{args.count} failure(s) from {kind.label} written to {args.out}")


def convert_gamma(args):
    """Print the (mu, gamma) pair for one of them."""
    if args.mu is not None:
        mu, gamma = args.mu, gamma_from_mu(args.mu)
    else:
        mu, gamma = mu_from_gamma(args.gamma), args.gamma
    print(f"mu={mu:.6g} gamma={gamma:.6g}")


def export_mu_plot(args):
    """Collect (release, gamma, mu) rows from Proposed fit results."""
    frame = mu_plot_frame(args.results)
    text = render_mu_plot(frame)
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)


def add_fit_flags(parser):
    parser.add_argument("--data", type=str, required=True, help="Failure-interval CSV")
    parser.add_argument("--p", type=float, help="Fault removal probability (default from config, 0.95)")
    parser.add_argument("--r", type=float, help="Fault introduction probability (default from config, 0.03)")
    gamma_group = parser.add_mutually_exclusive_group()
    gamma_group.add_argument("--gamma", type=float, help="Fixed modulation factor (Proposed)")
    gamma_group.add_argument("--mu", type=float, help="Fixed modulation parameter in (0, 1] (Proposed)")
    gamma_group.add_argument("--estimate-gamma", action="store_true", help="Estimate gamma jointly (Proposed)")
    gamma_group.add_argument("--profile-gamma", type=str, metavar="LO:HI:STEP",
                             help="Fit phi and N on a gamma grid and keep the best (Proposed)")
    parser.add_argument("--seed", type=int, help="Optimizer seed")
    parser.add_argument("--swarm", type=int, help="Number of agents")
    parser.add_argument("--iters", type=int, help="Number of generations")
    parser.add_argument("--phi-bounds", type=float, nargs=2, metavar=("LO", "HI"), help="Search range of phi")
    parser.add_argument("--n-bounds", type=float, nargs=2, metavar=("LO", "HI"), help="Search range of N")
    parser.add_argument("--gamma-bounds", type=float, nargs=2, metavar=("LO", "HI"), help="Search range of gamma")
    parser.add_argument("--workers", type=int, help="Concurrent objective evaluations")
    parser.add_argument("--validate", action="store_true", help="Validate JSON output against the shipped schema")


def build_parser():
    parser = CliParser(prog="relifit", description="Software reliability model fitting and comparison")

    # Global arguments for all commands
    parser.add_argument("--config", type=str, help="Path to configuration file")
    parser.add_argument("--log-level", type=str, choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help="Logging level")

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    fit_parser = subparsers.add_parser("fit", help="Fit one model to one release")
    add_fit_flags(fit_parser)
    fit_parser.add_argument("--release", type=str, help="Release to fit (required when the file holds several)")
    fit_parser.add_argument("--model", type=str, required=True, help=f"One of {ALL_MODELS}")
    fit_parser.add_argument("--mission-time", type=float, action="append",
                            help="Report next-interval reliability at this time (repeatable)")
    fit_parser.add_argument("--out", type=str, help="FitResult JSON path (stdout when omitted)")

    compare_parser = subparsers.add_parser("compare", help="Compare models across releases")
    add_fit_flags(compare_parser)
    compare_parser.add_argument("--release", type=str, default="all", help="Release id or 'all'")
    compare_parser.add_argument("--models", type=str, default=ALL_MODELS, help="Comma-separated model list")
    compare_parser.add_argument("--format", type=str, choices=["md", "csv", "json"], help="Report format")
    compare_parser.add_argument("--windows", type=str, help="Release-window CSV for major/minor labels")
    compare_parser.add_argument("--model-workers", type=int, default=1, help="Models fitted concurrently")
    compare_parser.add_argument("--out", type=str, help="Report path (stdout when omitted)")

    ingest_parser = subparsers.add_parser("ingest", help="Build failure intervals from bug reports")
    ingest_parser.add_argument("--bug-reports", type=str, required=True, help="Bug-report CSV")
    ingest_parser.add_argument("--windows", type=str, required=True, help="Release-window CSV")
    ingest_parser.add_argument("--grouping", type=str, help="'per-failure' or 'fixed:<width>h'")
    ingest_parser.add_argument("--time-unit", type=str, choices=["seconds", "minutes", "hours", "days"],
                               help="Unit of the emitted intervals")
    ingest_parser.add_argument("--out", type=str, required=True, help="Failure-interval CSV path")

    sim_parser = subparsers.add_parser("simulate", help="Draw a synthetic failure series")
    sim_parser.add_argument("--model", type=str, required=True, help=f"One of {ALL_MODELS}")
    sim_parser.add_argument("--phi", type=float, required=True, help="Proportionality constant")
    sim_parser.add_argument("--N", type=float, required=True, help="Initial fault count")
    sim_gamma = sim_parser.add_mutually_exclusive_group()
    sim_gamma.add_argument("--gamma", type=float, help="Modulation factor (Proposed)")
    sim_gamma.add_argument("--mu", type=float, help="Modulation parameter (Proposed)")
    sim_parser.add_argument("--p", type=float, help="Fault removal probability")
    sim_parser.add_argument("--r", type=float, help="Fault introduction probability")
    sim_parser.add_argument("--count", type=int, required=True, help="Number of failures")
    sim_parser.add_argument("--seed", type=int, help="Random seed")
    sim_parser.add_argument("--release", type=str, default="sim", help="Release label")
    sim_parser.add_argument("--out", type=str, required=True, help="Failure-interval CSV path")

    gamma_parser = subparsers.add_parser("gamma", help="Convert between mu and gamma")
    gamma_flags = gamma_parser.add_mutually_exclusive_group(required=True)
    gamma_flags.add_argument("--mu", type=float, help="Modulation parameter in (0, 1]")
    gamma_flags.add_argument("--gamma", type=float, help="Modulation factor >= 1")

    mu_parser = subparsers.add_parser("mu-plot", help="Emit (release, gamma, mu) rows from fit results")
    mu_parser.add_argument("--results", type=str, required=True, help="Directory of FitResult JSON files")
    mu_parser.add_argument("--out", type=str, help="CSV path (stdout when omitted)")

    # Config management commands
    config_parser = subparsers.add_parser("config", help="Manage configuration")
    config_subparsers = config_parser.add_subparsers(dest="config_command")
    save_config_parser = config_subparsers.add_parser("save", help="Save current configuration to file")
    save_config_parser.add_argument("--path", type=str, default="relifit_config.json",
                                    help="Path to save the configuration file")
    config_subparsers.add_parser("view", help="View current configuration")

    return parser


COMMANDS = {
    "fit": fit_model,
    "compare": compare_models,
    "ingest": ingest_reports,
    "simulate": simulate_failures,
    "gamma": convert_gamma,
    "mu-plot": export_mu_plot,
}


def setup_logging(level):
    config = get_config()
    logging.basicConfig(stream=sys.stderr, format=config['logging']['format'])
    numeric_level = getattr(logging, str(level).upper(), None)
    if numeric_level is None:
        logger.warning(f"Unknown log level '{level}', using INFO")
        numeric_level = logging.INFO
    logging.getLogger().setLevel(numeric_level)


def run(args, parser):
    if args.config:
        load_config(args.config)
    setup_logging(args.log_level or get_config()['logging']['level'])

    if args.command in COMMANDS:
        COMMANDS[args.command](args)
    elif args.command == "config":
        if args.config_command == "save":
            save_config(args.path)
            logger.info(f"Configuration saved to {args.path}")
        elif args.config_command == "view":
            print(json.dumps(get_config(), indent=4))
        else:
            raise UsageError("config needs a subcommand: view or save")
    else:
        parser.print_help()
        raise UsageError("no command given")


def main(argv=None):
    """
    Command-line entry point.

    Returns:
        Process exit code: 0 ok, 2 usage or validation error, 3 fit failure or internal error, 4 I/O error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        run(args, parser)
    except RelifitError as e:
        logger.debug(f"Command failed: {e!r}")
        print(e.one_line(), file=sys.stderr)
        return e.exit_code
    except json.JSONDecodeError as e:
        print(f"error[E_SCHEMA]: invalid JSON: {' '.join(str(e).split())}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error[E_IO]: {' '.join(str(e).split())}", file=sys.stderr)
        return EXIT_IO
    except Exception as e:
        logger.debug("Unexpected failure", exc_info=True)
        print(f"error[E_INTERNAL]: {type(e).__name__}: {' '.join(str(e).split())}", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
