"""
Command-line interface for wak_converse.
"""

import argparse
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import yaml

from wak_converse.config import (
    ConfigValidationError,
    ExperimentConfig,
    load_config,
)
from wak_converse.serialization import SchemaError
from wak_converse.types_method import EnumerationCapError

# Exit codes.
EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_USAGE = 2
EXIT_INTERRUPTED = 130


@dataclass
class RunOptions:
    """
    Runtime options of a sweep, combining configuration and CLI arguments.

    Attributes:
        config: The loaded configuration.
        seed: Base seed.
        output: Path to the output file.
        output_format: "csv" or "json".
        threads: Blocklengths evaluated concurrently.
        verbose: Whether the run log is written.
        run_log_path: Path to the run log if verbose is enabled.
        timing: Whether wall time is written to the output.
    """

    config: ExperimentConfig
    seed: int
    output: str
    output_format: str
    threads: int
    verbose: bool = False
    run_log_path: Optional[str] = None
    timing: bool = False

    @staticmethod
    def from_config_and_args(config: ExperimentConfig, args) -> "RunOptions":
        """
        Create RunOptions from an ExperimentConfig and parsed CLI arguments.

        CLI flags override the configuration file.

        Args:
            config: Loaded configuration.
            args: Parsed command-line arguments from argparse.

        Returns:
            RunOptions instance.

        Raises:
            ValueError: If an override is out of range.
        """
        seed = config.seed if args.seed is None else args.seed
        if seed < 0:
            raise ValueError("--seed must be nonnegative")
        threads = config.threads if args.threads is None else args.threads
        if threads < 1:
            raise ValueError("--threads must be at least 1")
        output_format = args.format or config.output_format

        output = args.out or config.output_path
        if output is None:
            # Default: <config_basename>_sweep.<format> beside the config
            output = _default_output(
                args.config_path, f"_sweep.{output_format}"
            )
        elif not os.path.isabs(output) and args.out is None:
            output = os.path.join(config.base_dir, output)

        run_log_path = _run_log_path(output) if args.verbose else None
        return RunOptions(
            config=config,
            seed=seed,
            output=output,
            output_format=output_format,
            threads=threads,
            verbose=args.verbose,
            run_log_path=run_log_path,
            timing=args.timing,
        )


def _default_output(input_path: str, suffix: str) -> str:
    """<input_basename><suffix> in the input's directory."""
    if not os.path.exists(input_path) and re.search(r"[()]", input_path):
        # Named source family: sanitized name in the working directory
        name = re.sub(r"[^A-Za-z0-9.]+", "_", input_path).strip("_")
        return os.path.abspath(f"{name}{suffix}")
    input_dir = os.path.dirname(os.path.abspath(input_path))
    basename = os.path.splitext(os.path.basename(input_path))[0]
    return os.path.join(input_dir, f"{basename}{suffix}")


def _run_log_path(output: str) -> str:
    return f"{os.path.splitext(output)[0]}_run.log"


def _sibling(output: str, suffix: str) -> str:
    return f"{os.path.splitext(output)[0]}{suffix}"


def _threads(args) -> int:
    threads = 1 if args.threads is None else args.threads
    if threads < 1:
        raise ValueError("--threads must be at least 1")
    return threads


def _parse_mu_grid(text: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"invalid --mu-grid '{text}': expected comma-separated numbers"
        ) from e
    if not values or any(not v >= 0 for v in values):
        raise argparse.ArgumentTypeError(
            "--mu-grid needs at least one nonnegative value"
        )
    return values


def parse_arguments(args: List[str]):
    """
    Parse command-line arguments.

    Args:
        args: List of argument strings (typically sys.argv[1:]).

    Returns:
        Parsed arguments namespace; ``command`` names the subcommand.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--seed", type=int, default=None, help="Base seed (default: 0)"
    )
    common.add_argument(
        "--out",
        help="Path to the output file (default: derived from the input)",
        default=None,
    )
    common.add_argument(
        "--format",
        choices=("csv", "json"),
        default=None,
        help="Output format for tabular results (default: csv)",
    )
    common.add_argument(
        "--verbose",
        action="store_true",
        help="Log run events to <output_basename>_run.log",
    )
    common.add_argument(
        "--timing",
        action="store_true",
        help="Include wall time in sweep output (breaks byte-identity)",
    )

    workers = argparse.ArgumentParser(add_help=False)
    workers.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Worker threads (default: 1)",
    )

    parser = argparse.ArgumentParser(
        prog="wak_converse",
        description=(
            "Reduce WAK codes to GW codes, compute rate regions and check "
            "finite-blocklength converse bounds."
        ),
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    selftest = subparsers.add_parser(
        "selftest", parents=[common], help="Run the built-in checks"
    )
    selftest.add_argument(
        "--quick",
        action="store_true",
        help="Skip the exhaustive n=4 reduction sweep",
    )
    selftest.add_argument(
        "--inject-fault", default=None, help=argparse.SUPPRESS
    )

    sweep = subparsers.add_parser(
        "sweep",
        parents=[common, workers],
        help="Sweep blocklengths at fixed rates",
    )
    sweep.add_argument("config_path", help="Path to the YAML configuration")

    reduce = subparsers.add_parser(
        "reduce", parents=[common], help="Reduce a WAK code to a GW code"
    )
    reduce.add_argument("code_path", help="Path to the WAK code JSON")
    reduce.add_argument("type_path", help="Path to the joint type JSON")

    region = subparsers.add_parser(
        "region",
        parents=[common, workers],
        help="Supporting lines of the region",
    )
    region.add_argument(
        "source", help="Source JSON path or family such as dsbs(0.1)"
    )
    region.add_argument(
        "--mu-grid",
        type=_parse_mu_grid,
        default=None,
        help="Comma-separated slopes (default: built-in grid)",
    )
    region.add_argument(
        "--delta", type=float, default=0.0, help="Relaxation level δ"
    )
    region.add_argument(
        "--card", type=int, default=None, help="Output cardinality of W"
    )
    region.add_argument(
        "--restarts",
        type=int,
        default=32,
        help="Optimizer restarts (default: 32)",
    )

    bound = subparsers.add_parser(
        "bound",
        parents=[common, workers],
        help="Converse lower bound for a code",
    )
    bound.add_argument("code_path", help="Path to the WAK code JSON")
    bound.add_argument(
        "source", help="Source JSON path or family such as dsbs(0.1)"
    )
    bound.add_argument(
        "--mode",
        choices=("exact", "mc"),
        default="exact",
        help="Sum over all joint types or sample them (default: exact)",
    )
    bound.add_argument(
        "--trials",
        type=int,
        default=10_000,
        help="Type draws in mc mode (default: 10000)",
    )

    return parser.parse_args(args)


def _write(path: str, text: str) -> None:
    from wak_converse.serialization import write_text

    print(f"Writing {path}...")
    write_text(path, text)


def run_selftest_command(args) -> int:
    """Run the self-test and print one line per check."""
    from wak_converse.experiments import run_selftest
    from wak_converse.serialization import dumps

    print("Running self-test...")
    report = run_selftest(fault=args.inject_fault, exhaustive=not args.quick)
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"  [{status}] {check.name}: {check.detail}")
    if args.out:
        _write(
            args.out,
            dumps(
                {
                    "passed": report.passed,
                    "checks": [
                        {
                            "name": c.name,
                            "passed": c.passed,
                            "detail": c.detail,
                        }
                        for c in report.checks
                    ],
                }
            ),
        )
    if not report.passed:
        names = ", ".join(c.name for c in report.failures)
        print(f"Error: Self-test failed: {names}", file=sys.stderr)
        return EXIT_FAILED_CHECK
    print(f"All {len(report.checks)} checks passed")
    return EXIT_OK


def run_sweep_command(args) -> int:
    """Sweep blocklengths as configured and write the records."""
    from wak_converse.config import resolve_source
    from wak_converse.experiments import SweepSettings, run_sweep
    from wak_converse.optimizer import OptimizerBudget
    from wak_converse.report import render_sweep_csv, render_sweep_json
    from wak_converse.run_log import STAGE, RunLog

    config = load_config(args.config_path)
    options = RunOptions.from_config_and_args(config, args)

    print("Configuration loaded successfully.")
    print(f"  Source: {config.source}")
    print(f"  Blocklengths: {', '.join(str(n) for n in config.blocklengths)}")
    print(f"  Rates: r0={config.r0:g}, r2={config.r2:g}")
    print(f"  Output: {options.output}")
    print(f"  Threads: {options.threads}")
    if options.verbose and options.run_log_path:
        print(f"  Run log: {options.run_log_path}")
    print()

    print("Loading source...")
    pxy = resolve_source(config.source, config.base_dir)
    run_log = RunLog(options.run_log_path)
    run_log.event(STAGE, f"sweep of {len(config.blocklengths)} blocklengths")
    settings = SweepSettings(
        codes=config.codes_per_blocklength,
        helpers=tuple(config.helpers),
        trials=config.mc_trials,
        seed=options.seed,
        bound_mode=config.bound_mode,
        bound_trials=config.bound_trials,
        budget=OptimizerBudget(
            restarts=config.restarts,
            iterations=config.iterations,
            tolerance=config.tolerance,
        ),
        work_cap=config.work_cap,
        enumeration_cap=config.enumeration_cap,
        threads=options.threads,
    )

    print("Computing sweep...")
    result = run_sweep(
        pxy, config.blocklengths, config.r0, config.r2, settings, run_log
    )
    for note in result.warnings:
        print(f"  Warning: {note}")
    for record in result.records:
        bound = "off" if record.bound is None else f"{record.bound:.6f}"
        kind = "exact" if record.exact else "mc"
        print(
            f"  n={record.n}: error {record.error:.6f} ({kind}), "
            f"bound {bound}"
        )
    if result.trend is not None:
        print(f"  Spearman trend: {result.trend:+.3f}")

    if options.output_format == "json":
        text = render_sweep_json(result, timing=options.timing)
    else:
        text = render_sweep_csv(result, timing=options.timing)
    _write(options.output, text)

    violated = [
        r.n
        for r in result.records
        if r.exact and r.bound is not None and r.bound > r.error
    ]
    if violated:
        print(
            "Error: Converse bound exceeds the exact error at n = "
            f"{', '.join(str(n) for n in violated)}",
            file=sys.stderr,
        )
        return EXIT_FAILED_CHECK
    print(f"Sweep successfully written to {options.output}")
    return EXIT_OK


def run_reduce_command(args) -> int:
    """Reduce a WAK code on a joint type and write code and certificate."""
    from wak_converse.reduction import reduce_wak_code
    from wak_converse.serialization import (
        dumps,
        dumps_code,
        load_code,
        load_type,
    )

    print("Loading code and type...")
    code = load_code(args.code_path, kind="wak")
    t = load_type(args.type_path)
    output = args.out or _default_output(args.code_path, "_gw.json")
    certificate_path = _sibling(output, "_certificate.json")
    if args.out is None:
        certificate_path = _default_output(
            args.code_path, "_certificate.json"
        )

    print("Reducing...")
    result = reduce_wak_code(code, t, raise_on_failure=False)
    certificate = result.certificate
    for check in certificate.checks:
        status = "PASS" if check.passed else "FAIL"
        print(
            f"  [{status}] {check.name}: {check.lhs:.6f} <= "
            f"{check.rhs:.6f} (slack {check.slack:.6f})"
        )
    balance_ok = all(check.passed for check in result.balance_checks)

    _write(output, dumps_code(result.gw))
    _write(
        certificate_path,
        dumps(
            {
                "certificate": certificate.to_dict(),
                "balance": result.report.to_dict(),
                "balance_checks": [
                    {"name": c.name, "passed": c.passed, "detail": c.detail}
                    for c in result.balance_checks
                ],
            }
        ),
    )
    if not (certificate.valid and balance_ok):
        print("Error: Reduction certificate is invalid", file=sys.stderr)
        return EXIT_FAILED_CHECK
    print("Reduction certificate is valid")
    return EXIT_OK


def run_region_command(args) -> int:
    """Compute supporting lines for a source and write them."""
    from wak_converse.config import resolve_source
    from wak_converse.optimizer import OptimizerBudget
    from wak_converse.regions import DEFAULT_MU_GRID, RegionQuery, support_line
    from wak_converse.report import render_region_csv, render_region_json
    from wak_converse.run_log import NONCONVERGED, RunLog

    print("Loading source...")
    pxy = resolve_source(args.source, os.getcwd())
    output_format = args.format or "csv"
    output = args.out or _default_output(
        args.source, f"_region.{output_format}"
    )
    run_log = RunLog(_run_log_path(output) if args.verbose else None)
    query = RegionQuery(
        pxy,
        delta=args.delta,
        card=args.card,
        budget=OptimizerBudget(restarts=args.restarts),
        seed=0 if args.seed is None else args.seed,
    )
    grid = args.mu_grid if args.mu_grid is not None else DEFAULT_MU_GRID
    threads = _threads(args)

    print(f"Computing {len(grid)} supporting lines at delta={args.delta:g}...")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        lines = list(pool.map(lambda mu: support_line(query, mu), grid))
    for mu, line in zip(grid, lines):
        print(f"  mu={mu:g}: {line.value:.6f} ({line.method})")
        if not line.converged:
            run_log.event(NONCONVERGED, f"mu={mu:g} delta={args.delta:g}")

    if output_format == "json":
        _write(output, render_region_json(pxy, lines, args.card))
    else:
        _write(output, render_region_csv(lines))
        _write(
            _sibling(output, "_frontier.json"),
            render_region_json(pxy, lines, args.card),
        )
    print(f"Region successfully written to {output}")
    return EXIT_OK


def run_bound_command(args) -> int:
    """Evaluate the finite-blocklength converse bound of a code."""
    from wak_converse.config import resolve_source
    from wak_converse.regions import corollary1_bound
    from wak_converse.report import render_bound_json
    from wak_converse.serialization import load_code

    print("Loading code and source...")
    code = load_code(args.code_path, kind="wak")
    pxy = resolve_source(args.source, os.getcwd())
    output = args.out or _default_output(args.code_path, "_bound.json")

    print(f"Computing bound ({args.mode})...")
    result = corollary1_bound(
        code,
        pxy,
        mode=args.mode,
        trials=args.trials,
        seed=0 if args.seed is None else args.seed,
        threads=_threads(args),
    )
    q = result.quantities
    print(f"  delta_n: {q.delta_n:.6f}")
    print(f"  rates: ({q.r0_tilde:.6f}, {q.r2_tilde:.6f})")
    print(f"  bound: {result.bound:.6f}")
    _write(output, render_bound_json(result))
    return EXIT_OK


COMMANDS = {
    "selftest": run_selftest_command,
    "sweep": run_sweep_command,
    "reduce": run_reduce_command,
    "region": run_region_command,
    "bound": run_bound_command,
}


def main():
    """Entry point for the wak_converse CLI.

    Returns:
        Exit code: 0 on success, 1 when a check or certificate fails,
        2 on unusable input, 130 when interrupted.
    """
    try:
        args = parse_arguments(sys.argv[1:])

        from wak_converse.reduction import InfeasibleReductionError

        try:
            return COMMANDS[args.command](args)
        except FileNotFoundError as e:
            print(f"Error: File not found: {e.filename}", file=sys.stderr)
            return EXIT_USAGE
        except ConfigValidationError as e:
            print(
                f"Error: Configuration validation failed: {e}",
                file=sys.stderr,
            )
            return EXIT_USAGE
        except yaml.YAMLError as e:
            print(f"Error: Invalid YAML: {e}", file=sys.stderr)
            return EXIT_USAGE
        except SchemaError as e:
            print(f"Error: Invalid input [{e.code}] {e}", file=sys.stderr)
            return EXIT_USAGE
        except InfeasibleReductionError as e:
            print(f"Error: Reduction is infeasible: {e}", file=sys.stderr)
            return EXIT_USAGE
        except EnumerationCapError as e:
            print(f"Error: {e}", file=sys.stderr)
            return EXIT_USAGE
        except ValueError as e:
            print(f"Error: {e}", file=sys.stderr)
            return EXIT_USAGE

    except KeyboardInterrupt:
        print("\nOperation cancelled by user.", file=sys.stderr)
        return EXIT_INTERRUPTED
    except Exception as e:
        print(f"Error: Unexpected error: {e}", file=sys.stderr)
        import traceback

        traceback.print_exc()
        return EXIT_FAILED_CHECK


if __name__ == "__main__":
    sys.exit(main())
