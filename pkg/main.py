import sys
import argparse
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError
from rich import box
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from harness.config import Command, ExperimentConfig, OutputFormat, load_config_file, merge_parameters
from harness.records import RunRecord, format_value, render, write_output, write_report
from harness.runner import EXIT_CONFIG, run
from harness.settings import SETTINGS, configure_debug

# Status, tables and errors go to stderr; stdout carries only CSV / key=value output
CONSOLE = Console(stderr=True)

# Options shared by every command; everything else on the namespace is a parameter
GLOBAL_KEYS = {"command", "lb_command", "seed", "out", "format", "config", "report", "workers", "debug"}
# Globals that may also come from the --config file
FILE_GLOBALS = {"seed": int, "out": Path, "format": OutputFormat, "workers": int}

# ---------------------------------------------------------------------------
# Output Helpers
# ---------------------------------------------------------------------------


def render_table(title: str, rows: List[List[str]], headers: List[str]) -> None:
    table = Table(
        title=f"[bold]{title}[/bold]",
        box=box.MINIMAL_DOUBLE_HEAD,
        header_style="bold bright_cyan",
        title_style="bold magenta",
        show_lines=False,
        padding=(0, 1)
    )
    for h in headers:
        table.add_column(h, style="white", overflow="fold")
    if not rows:
        table.add_row(*(["[dim]-[/dim]"] * len(headers)))
    for row in rows:
        table.add_row(f"[bold green]{row[0]}[/bold green]", *[str(c) for c in row[1:]])
    CONSOLE.print(table)


def print_summary(record: RunRecord) -> None:
    rows = [[f"constant.{k}", format_value(v)] for k, v in record.constants.items() if not isinstance(v, list)]
    rows += [[k, format_value(v)] for k, v in record.summary.items()]
    render_table(f"{record.command.value} (seed={record.master_seed})", rows, ["Key", "Value"])


def print_error(title: str, error: object) -> None:
    CONSOLE.print(Panel(escape(str(error)), title=title, border_style="red"))


# ---------------------------------------------------------------------------
# Argument Parsing
# ---------------------------------------------------------------------------


def _add_estimator_flags(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument('--n', type=int, default=S, help='Universe size')
    p.add_argument('--lambda', dest='lambda', type=int, default=S, help='Threshold λ (default: 1)')
    p.add_argument('--alpha', type=float, default=S, help='Approximation factor α > 1')
    p.add_argument('--L', type=int, default=S, help='Promise lower bound')
    p.add_argument('--U', type=int, default=S, help='Promise upper bound')
    p.add_argument('--delta', type=float, default=S, help='Failure probability δ (default: 0.1)')
    p.add_argument('--repetitions', type=int, default=S, help='Override of the calibrated repetitions t')
    p.add_argument('--exact-fallback', dest='exact_fallback', action='store_true', default=S,
                   help='λ = 1 with L < d′: add the small-d gate and n singleton queries (desk scale)')


def _add_class_flags(p: argparse.ArgumentParser, universe: bool = True, upper: bool = True) -> None:
    S = argparse.SUPPRESS
    p.add_argument('--alpha', type=float, default=S, help='Approximation factor α > 1')
    p.add_argument('--L', type=int, default=S, help='Promise lower bound')
    if upper:
        p.add_argument('--U', type=int, default=S, help='Promise upper bound')
    if universe:
        p.add_argument('--n', type=int, default=S, help='Universe size')
        p.add_argument('--lambda', dest='lambda', type=int, default=S, help='Threshold λ (default: 1)')


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='Master seed (default: 0)')
    common.add_argument('--out', type=Path, default=None, help='Write output here instead of stdout')
    common.add_argument('--format', choices=[f.value for f in OutputFormat], default=None, help='csv (default) or keyvalue')
    common.add_argument('--config', type=Path, default=None, help='key=value file; flags override it')
    common.add_argument('--report', action='store_true', help=f'Also save a JSON report under {SETTINGS.report_dir}/')
    common.add_argument('--workers', type=int, default=None, help='Worker processes for trials and seeds (default: 1)')
    common.add_argument('--debug', action='store_true', help='Enable icecream tracing')

    parser = argparse.ArgumentParser(
        description="Threshold group testing: non-adaptive estimation and lower-bound experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py calibrate --n 10000 --alpha 4 --L 1 --U 10000
  python main.py estimate --n 10000 --alpha 4 --L 1 --U 10000 --d 64 --trials 400 --seed 7
  python main.py estimate --config sweep.env --lambda 2 --workers 4 --out results/lambda2.csv
  python main.py lb build-classes --alpha 4 --L 1 --U 512
  python main.py lb buckets --alpha 2 --L 1 --U 4096 --n 4096 --k 1,64,1024
  python main.py lb tv --alpha 2 --L 1 --U 16 --n 16 --q 3 --p 0.2 --instances 20
  python main.py lb derandomize --n 512 --alpha 4 --L 1 --U 512 --repetitions 64
  python main.py lb scaling --k-fraction 0.01 --alpha 2 --L 1 --n 1000000 --U-values 1000,100000,1000000
  python main.py tails --n-max 24
  python main.py selftest
        """
    )
    commands = parser.add_subparsers(dest='command', required=True)
    S = argparse.SUPPRESS

    p = commands.add_parser('calibrate', parents=[common], help='Print the calibrated constants')
    _add_estimator_flags(p)

    p = commands.add_parser('estimate', parents=[common], help='Run seeded estimation trials')
    _add_estimator_flags(p)
    p.add_argument('--d', type=int, default=S, help='True defect count for simulated trials')
    p.add_argument('--trials', type=int, default=S, help='Number of trials (default: 1)')
    p.add_argument('--engine', choices=['plan', 'binomial', 'counts'], default=S, help='Trial engine (default: counts)')
    p.add_argument('--defects', type=Path, default=S, help='Defect-set file; runs one literal estimate')

    lb = commands.add_parser('lb', help='Lower-bound laboratory').add_subparsers(dest='lb_command', required=True)

    p = lb.add_parser('build-classes', parents=[common], help='Size classes and their windows')
    _add_class_flags(p, universe=False)

    for name, text in (('disagreement', 'Per-level disagreement terms'), ('buckets', 'Bucket sums against their bounds')):
        p = lb.add_parser(name, parents=[common], help=text)
        _add_class_flags(p)
        p.add_argument('--k', default=S, help='Query sizes, comma separated')
        p.add_argument('--exact', type=lambda v: v.lower() in {'1', 'true', 'yes'}, default=S,
                       help='Force exact rationals (true) or floats (false)')

    p = lb.add_parser('tv', parents=[common], help='Induced TV against the coupling bound')
    _add_class_flags(p)
    p.add_argument('--q', type=int, default=S, help='Queries per random plan (default: 3)')
    p.add_argument('--p', type=float, default=S, help='Inclusion probability (default: 0.25)')
    p.add_argument('--instances', type=int, default=S, help='Random plans (default: 1)')
    p.add_argument('--mode', choices=['exact', 'mc'], default=S, help='Induced laws by enumeration or sampling')
    p.add_argument('--samples', type=int, default=S, help='Monte Carlo samples, or exact per-class budget')
    p.add_argument('--plan', type=Path, default=S, help='Plan file instead of random plans')
    p.add_argument('--pushforward-samples', type=int, default=S, help='Also run the pushforward check')

    p = lb.add_parser('derandomize', parents=[common], help='Fix the estimator seed and measure its advantage')
    _add_estimator_flags(p)
    p.add_argument('--seeds', type=int, default=S, help='Candidate seeds (default: 8)')
    p.add_argument('--trials', type=int, default=S, help='Trials per seed (default: 2000)')
    p.add_argument('--samples', type=int, default=S, help='Monte Carlo samples for the advantage (default: 10000)')

    p = lb.add_parser('scaling', parents=[common], help='m × per-query disagreement as U grows')
    _add_class_flags(p, upper=False)
    p.add_argument('--k-fraction', type=float, default=S, help='Query size as a fraction of n')
    p.add_argument('--U-values', dest='U_values', default=S, help='Upper bounds, comma separated')

    p = commands.add_parser('tails', parents=[common], help='Certify the tail bounds on a grid')
    p.add_argument('--n-max', type=int, default=S, help='Largest universe of the hypergeometric grid (default: 60)')
    p.add_argument('--c-values', default=S, help='Values of c for the e^{-1/c} gap, comma separated')
    p.add_argument('--x-max-exponent', type=int, default=S, help='x runs over 2..2^this (default: 20)')

    commands.add_parser('selftest', parents=[common], help='Run the exact small-instance suites')

    return parser.parse_args(argv)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Merge the --config file with flags into a validated ExperimentConfig.

    Raises:
        ValidationError: invalid or unknown parameters
        FileNotFoundError: missing config file
    """
    command = Command(f"lb-{args.lb_command}" if args.command == 'lb' else args.command)
    file_values = load_config_file(args.config) if args.config else {}
    globals_from_file = {k: cast(file_values.pop(k)) for k, cast in FILE_GLOBALS.items() if k in file_values}
    flags = {k: v for k, v in vars(args).items() if k not in GLOBAL_KEYS}

    def pick(key, default):
        value = getattr(args, key)
        return value if value is not None else globals_from_file.get(key, default)

    return ExperimentConfig(
        command=command,
        parameters=merge_parameters(file_values, flags),
        master_seed=pick('seed', 0),
        output_path=pick('out', None),
        format=pick('format', OutputFormat.CSV),
        workers=pick('workers', 1),
        report=args.report,
        progress=sys.stderr.isatty(),
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_arguments(argv)
    configure_debug(args.debug or SETTINGS.debug)

    try:
        config = build_config(args)
    except (ValidationError, ValueError, FileNotFoundError) as e:
        print_error("Configuration error", e)
        return EXIT_CONFIG

    outcome = run(config)
    record = outcome.record
    if record is not None:
        written = write_output(record, config.format, config.output_path)
        if written is None:
            sys.stdout.write(render(record, config.format))
            sys.stdout.flush()
        else:
            CONSOLE.print(Panel.fit(f"Output written: [bold]{written}[/bold] ({len(record.rows)} rows)", title="Output", style="green"))
        if config.report:
            report_file = write_report(record, config, SETTINGS.report_dir)
            CONSOLE.print(Panel.fit(f"Report saved: [bold]{report_file.name}[/bold]", title="Report", style="green"))
        print_summary(record)
    if outcome.error:
        print_error(f"Exit {outcome.exit_code}", outcome.error)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
