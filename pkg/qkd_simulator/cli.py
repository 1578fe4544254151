"""
Command-line entry point for the QKD simulator.

Exit codes: 0 run completed (or all identities hold), 2 run aborted,
1 usage error, 3 identity failure.
"""
import argparse
import itertools
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

from qkd_simulator.adversary import controlled_bell_attack_demo, han_attack_demo, parse_strategy
from qkd_simulator.analysis import build_report, summarize
from qkd_simulator.channels import NoiseSpec
from qkd_simulator.config import Protocol, SessionConfig, resolve_seed
from qkd_simulator.exceptions import ConfigError, GridTooLargeError, QkdSimulatorError
from qkd_simulator.logging_config import get_logger, set_level
from qkd_simulator.oracle import bell_attack_conditionals, exact_qber_oracle, is_supported
from qkd_simulator.protocols import TRACE_COLUMNS, RunResult, run_session
from qkd_simulator.quantum_core import MeasurementBasis, Prng
from qkd_simulator.reports import ReportManager
from qkd_simulator.states import verify_identities

logger = get_logger("cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ABORTED = 2
EXIT_IDENTITY_FAILURE = 3

MAX_GRID_CELLS = 10 ** 4
GRID_PARAMETERS = ("epsilon", "noise_p", "check_fraction", "attack")


class CliArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--log-level", default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help="Logging level (default: QKD_LOG_LEVEL or INFO)")
    parser.add_argument("--output", default=None, help="Output path (default: standard output)")


def _add_session_flags(parser: argparse.ArgumentParser) -> None:
    defaults = SessionConfig()
    parser.add_argument("--protocol", default="p2",
                        choices=["p1", "p2", "p3", "p3-controlled", "p3-three-party"],
                        help="Protocol to run (default: p2)")
    parser.add_argument("--mode", default="controlled", choices=["controlled", "three-party"],
                        help="Key mode for --protocol p3 (default: controlled)")
    parser.add_argument("--attack", default="none",
                        help="none, intercept-resend[:random|z|x[:remap|eigenstate]], cnot[:x|z] or bell "
                             "(default: none)")
    parser.add_argument("--rounds", type=int, default=defaults.rounds,
                        help=f"Rounds per batch (default: {defaults.rounds})")
    parser.add_argument("--check-fraction", type=float, default=defaults.check_fraction,
                        help=f"Fraction of rounds checked (default: {defaults.check_fraction})")
    parser.add_argument("--abort-threshold", type=float, default=defaults.abort_threshold,
                        help=f"Largest QBER that proceeds (default: {defaults.abort_threshold})")
    parser.add_argument("--epsilon", type=float, default=defaults.epsilon,
                        help=f"Probability Alice measures Z in Protocol 3 (default: {defaults.epsilon})")
    parser.add_argument("--noise-p", type=float, default=defaults.noise.p,
                        help="Depolarizing probability per transmitted qubit (default: 0.0)")
    parser.add_argument("--seed", type=int, default=None,
                        help="Root seed; QKD_SEED overrides it (default: 0)")
    parser.add_argument("--session-batches", type=int, default=defaults.session_batches,
                        help=f"Protocol 3 batches (default: {defaults.session_batches})")
    parser.add_argument("--hadamard-fraction", type=float, default=defaults.hadamard_fraction,
                        help=f"Protocol 1 Hadamard fraction (default: {defaults.hadamard_fraction})")
    parser.add_argument("--final-basis", default="Z", choices=["Z", "X"],
                        help="Protocol 1 measurement basis (default: Z)")
    parser.add_argument("--ec-block", type=int, default=defaults.ec_block,
                        help=f"Error correction block size (default: {defaults.ec_block})")
    parser.add_argument("--ec-passes", type=int, default=defaults.ec_passes,
                        help=f"Error correction passes (default: {defaults.ec_passes})")
    parser.add_argument("--security-param", type=int, default=defaults.security_param,
                        help=f"Privacy amplification margin in bits (default: {defaults.security_param})")
    parser.add_argument("--no-controller-permission", dest="controller_permits", action="store_false",
                        help="Protocol 3 controlled mode: Alice withholds her X results")


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(prog="qkd_simulator",
                               description="Entanglement-based QKD protocol simulator")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run one protocol session")
    _add_session_flags(run)
    _add_common(run)
    run.add_argument("--format", default="json", choices=["json", "csv-trace", "both"],
                     help="Report format (default: json)")
    run.add_argument("--extended", action="store_true",
                     help="Add an 'extended' object with the supplementary figures")

    verify = subparsers.add_parser("verify-identities", help="Check the state identities")
    _add_common(verify)
    verify.add_argument("--format", default="json", choices=["json", "table"],
                        help="Report format (default: json)")

    sweep = subparsers.add_parser("sweep", help="Run a parameter grid and summarize each cell")
    _add_session_flags(sweep)
    _add_common(sweep)
    sweep.add_argument("--grid", action="append", default=[], metavar="NAME=V1,V2,...",
                       help=f"Grid axis; NAME is one of {', '.join(GRID_PARAMETERS)}; repeatable")
    sweep.add_argument("--runs-per-cell", type=int, default=1, help="Runs per cell (default: 1)")
    sweep.add_argument("--workers", type=int, default=1, help="Worker processes (default: 1)")
    sweep.add_argument("--format", default="csv", choices=["csv", "table"],
                       help="Summary format (default: csv)")

    demo = subparsers.add_parser("demo-han", help="Bell attack on the Han state vs Protocol 3")
    _add_common(demo)
    demo.add_argument("--rounds", type=int, default=10000, help="Rounds per scheme (default: 10000)")
    demo.add_argument("--seed", type=int, default=None, help="Seed; QKD_SEED overrides it (default: 0)")
    demo.add_argument("--epsilon", type=float, default=0.5,
                      help="Probability Alice measures Z in the Protocol 3 run (default: 0.5)")
    demo.add_argument("--format", default="json", choices=["json", "table"],
                      help="Report format (default: json)")
    return parser


def _protocol(args: argparse.Namespace) -> Protocol:
    if args.protocol == "p3":
        return Protocol.P3_CONTROLLED if args.mode == "controlled" else Protocol.P3_THREE_PARTY
    return Protocol(args.protocol)


def session_config_from_args(args: argparse.Namespace) -> SessionConfig:
    """Build and validate a SessionConfig from parsed flags."""
    return SessionConfig(
        protocol=_protocol(args),
        rounds=args.rounds,
        check_fraction=args.check_fraction,
        abort_threshold=args.abort_threshold,
        attack=parse_strategy(args.attack),
        epsilon=args.epsilon,
        noise=NoiseSpec(args.noise_p),
        seed=resolve_seed(args.seed),
        session_batches=args.session_batches,
        hadamard_fraction=args.hadamard_fraction,
        final_basis=MeasurementBasis(args.final_basis),
        ec_block=args.ec_block,
        ec_passes=args.ec_passes,
        security_param=args.security_param,
        controller_permits=args.controller_permits,
    ).validate()


def oracle_qber(cfg: SessionConfig) -> Optional[float]:
    """Exact QBER for the configuration, or None when the pair is not modelled."""
    if not is_supported(cfg.protocol, cfg.attack):
        return None
    options = {"noise_p": cfg.noise.p, "hadamard_fraction": cfg.hadamard_fraction,
               "final_basis": cfg.final_basis, "epsilon": cfg.epsilon}
    return exact_qber_oracle(cfg.protocol, cfg.attack, options).overall


def trace_rows(result: RunResult) -> List[Dict[str, Any]]:
    return [trace.to_row() for trace in result.traces]


def cmd_run(args: argparse.Namespace) -> int:
    """Run one session and write its report."""
    cfg = session_config_from_args(args)
    start = time.time()
    result = run_session(cfg)
    report = build_report(result, oracle_qber(cfg))
    logger.info(f"Run finished in {time.time() - start:.2f}s: qber {report.qber:.4f}, "
                f"{'aborted' if report.aborted else 'completed'}")

    manager = ReportManager(args.output)
    both = args.format == "both"
    if args.format in ("json", "both"):
        manager.save_json(report.to_json_dict(args.extended), ".json" if both else None)
    if args.format in ("csv-trace", "both"):
        manager.save_csv(trace_rows(result), TRACE_COLUMNS, ".csv" if both else None)
    return EXIT_ABORTED if report.aborted else EXIT_OK


def cmd_verify_identities(args: argparse.Namespace) -> int:
    """Check every state identity; exit 3 naming the failures if any."""
    report = verify_identities()
    manager = ReportManager(args.output)
    if args.format == "table":
        manager.save_table([{"identity": c.name, "overlap_deficit": f"{c.overlap_deficit:.3e}",
                             "pass": c.passed, "note": c.note} for c in report.checks])
    else:
        manager.save_json(report.to_dict())
    if report.all_passed:
        return EXIT_OK
    for failed in report.failures():
        print(f"identity {failed.name} failed (deficit {failed.overlap_deficit:.3e})", file=sys.stderr)
    return EXIT_IDENTITY_FAILURE


def parse_grid(specs: Sequence[str]) -> List[Tuple[str, List[Any]]]:
    """
    Parse repeated NAME=V1,V2 flags into ordered axes.

    Raises:
        ConfigError: empty grid, unknown axis or malformed value
        GridTooLargeError: more than MAX_GRID_CELLS cells
    """
    if not specs:
        raise ConfigError("sweep needs at least one --grid axis")
    axes: List[Tuple[str, List[Any]]] = []
    for spec in specs:
        name, sep, values = spec.partition("=")
        name = name.strip().replace("-", "_")
        if not sep or name not in GRID_PARAMETERS:
            raise ConfigError(f"grid axis must be NAME=V1,V2 with NAME in {GRID_PARAMETERS}, got '{spec}'")
        items = [v.strip() for v in values.split(",") if v.strip()]
        if not items:
            raise ConfigError(f"grid axis '{name}' has no values")
        if name == "attack":
            parsed: List[Any] = [parse_strategy(v).name for v in items]
        else:
            try:
                parsed = [float(v) for v in items]
            except ValueError:
                raise ConfigError(f"grid axis '{name}' needs numbers, got '{values}'") from None
        axes.append((name, parsed))
    cells = 1
    for _, values in axes:
        cells *= len(values)
    if cells > MAX_GRID_CELLS:
        raise GridTooLargeError(f"grid has {cells} cells, limit is {MAX_GRID_CELLS}")
    return axes


def cell_config(base: SessionConfig, parameters: Dict[str, Any], seed: int) -> SessionConfig:
    changes: Dict[str, Any] = {"seed": seed}
    for name, value in parameters.items():
        if name == "attack":
            changes["attack"] = parse_strategy(value)
        elif name == "noise_p":
            changes["noise"] = NoiseSpec(value)
        else:
            changes[name] = value
    return replace(base, **changes).validate()


def run_cell(base: SessionConfig, parameters: Dict[str, Any], seeds: Sequence[int]) -> Dict[str, Any]:
    """Run one sweep cell and return its summary row."""
    reports = []
    oracle = None
    for seed in seeds:
        cfg = cell_config(base, parameters, seed)
        if oracle is None:
            oracle = oracle_qber(cfg)
        reports.append(build_report(run_session(cfg), oracle))
    row = summarize(reports, parameters).to_row()
    row["seed"] = seeds[0]
    return row


def cmd_sweep(args: argparse.Namespace) -> int:
    """Summarize every cell of a parameter grid; cell seed = base seed + cell index."""
    axes = parse_grid(args.grid)
    if args.runs_per_cell < 1 or args.workers < 1:
        raise ConfigError("--runs-per-cell and --workers must be at least 1")
    base = session_config_from_args(args)
    names = [name for name, _ in axes]
    cells = [dict(zip(names, combo)) for combo in itertools.product(*(values for _, values in axes))]
    n_cells = len(cells)
    seeds = [[base.seed + index + r * n_cells for r in range(args.runs_per_cell)]
             for index in range(n_cells)]
    logger.info(f"Sweep over {n_cells} cells x {args.runs_per_cell} runs with {args.workers} workers")

    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(run_cell, [base] * n_cells, cells, seeds))
    else:
        rows = [run_cell(base, cell, cell_seeds) for cell, cell_seeds in zip(cells, seeds)]

    manager = ReportManager(args.output)
    if args.format == "table":
        manager.save_table(rows)
    else:
        manager.save_csv(rows)
    return EXIT_OK


def cmd_demo_han(args: argparse.Namespace) -> int:
    """Contrast the Bell attack on the Han state with the same attack on Protocol 3."""
    if args.rounds < 1:
        raise ConfigError(f"--rounds must be at least 1, got {args.rounds}")
    seed = resolve_seed(args.seed)
    han = han_attack_demo(args.rounds, Prng(seed))
    controlled = controlled_bell_attack_demo(args.rounds, Prng(seed), args.epsilon)

    manager = ReportManager(args.output)
    if args.format == "table":
        rows = []
        for report in (han, controlled):
            row = {"scheme": report.scheme, "rounds": report.rounds,
                   "guess_accuracy": f"{report.guess_accuracy:.4f}",
                   "detection_events": report.detection_events,
                   "detection_rate": f"{report.detection_rate:.4f}"}
            row.update({k: f"{v:.4f}" for k, v in report.outcome_frequencies.items()})
            rows.append(row)
        manager.save_table(rows, title="Bell-measurement attack")
    else:
        manager.save_json({
            "seed": seed,
            "han": han.to_dict(),
            "controlled": controlled.to_dict(),
            "exact_conditionals": {
                "han": bell_attack_conditionals("han"),
                "controlled": bell_attack_conditionals("controlled"),
            },
        })
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "verify-identities": cmd_verify_identities,
    "sweep": cmd_sweep,
    "demo-han": cmd_demo_han,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, dispatch the subcommand and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except QkdSimulatorError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"qkd_simulator: error: {e}", file=sys.stderr)
        return EXIT_USAGE
