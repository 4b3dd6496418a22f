"""Command line interface

.. code-block:: bash

    crowlattice ensemble --config ensemble.json --seed 7 --out runs/ensemble
    crowlattice butterfly --config butterfly.json --alpha 0.25 --size 12

Exit codes: 0 on success, 1 for config or argument errors, 2 for numerical
failures (including failed transfer-matrix checks).

"""
import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from .config import ExperimentConfig, load_config
from .enums import ExperimentKind
from .exceptions import ConfigException, CrowLatticeException, LatticeSpecException
from .experiments import ExperimentRunner, loss_to_csv, sweep_to_csv
from .lattice import export_matrix_market
from .output import RunWriter

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

COMMANDS = {
    "butterfly": ExperimentKind.BUTTERFLY,
    "spectrum": ExperimentKind.SPECTRUM,
    "eigenstate": ExperimentKind.EDGE_STATES,
    "transport": ExperimentKind.TRANSPORT,
    "ensemble": ExperimentKind.TRANSPORT_ENSEMBLE,
    "sweep": ExperimentKind.SIZE_SWEEP,
    "tmatrix": ExperimentKind.TMATRIX_CHECKS,
}


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors raised as ConfigException instead of exiting"""

    def error(self, message):
        raise ConfigException("{}: {}".format(self.prog, message))


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="crowlattice", description="Coupled-resonator lattice experiments")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True
    for name, kind in COMMANDS.items():
        sub = subparsers.add_parser(name, help="run the {} experiment".format(kind.value))
        sub.add_argument("--config", required=True, help="JSON experiment config")
        sub.add_argument("--alpha", type=float, help="override lattice.alpha")
        sub.add_argument("--size", type=int, help="override nx = ny (and the CROW length)")
        sub.add_argument("--seed", type=int, help="override the seed")
        sub.add_argument("--out", default="out", help="output directory (default: out)")
        sub.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS, help="debug logging")
    return parser


# Commands


def _butterfly(runner: ExperimentRunner, writer: RunWriter):
    writer.add("butterfly", runner.run_butterfly().to_csv(writer.path("butterfly.csv")))


def _spectrum(runner: ExperimentRunner, writer: RunWriter):
    result = runner.run_spectrum()
    writer.add_all(result.write(writer.out_dir))
    writer.add("hamiltonian", export_matrix_market(result.hamiltonian, writer.path("hamiltonian.mtx")))


def _eigenstate(runner: ExperimentRunner, writer: RunWriter):
    writer.add_all(runner.run_edge_state_report().write(writer.out_dir))


def _transport(runner: ExperimentRunner, writer: RunWriter):
    writer.add("transport", runner.run_transport().to_csv(writer.path("transport.csv")))


def _ensemble(runner: ExperimentRunner, writer: RunWriter):
    for family, stats in runner.run_transport_ensemble().items():
        writer.add("ensemble-" + family, stats.to_csv(writer.path("ensemble-{}.csv".format(family))))
        writer.add("seeds-" + family, stats.seeds_to_csv(writer.path("seeds-{}.csv".format(family))))


def _sweep(runner: ExperimentRunner, writer: RunWriter):
    writer.add("sweep", sweep_to_csv(runner.run_size_sweep(), writer.path("sweep.csv")))
    writer.add("loss", loss_to_csv(runner.run_loss_attenuation(), writer.path("loss.csv")))


def _tmatrix(runner: ExperimentRunner, writer: RunWriter) -> bool:
    report = runner.run_tmatrix_checks()
    writer.add_all(report.write(writer.out_dir))
    for check in report.checks:
        print("{:<30} {:>12.3e} {:>12.3e}  {}".format(
            check.name, check.value, check.tolerance, "pass" if check.passed else "FAIL"))
    return report.passed


HANDLERS: Dict[str, Callable[[ExperimentRunner, RunWriter], Optional[bool]]] = {
    "butterfly": _butterfly,
    "spectrum": _spectrum,
    "eigenstate": _eigenstate,
    "transport": _transport,
    "ensemble": _ensemble,
    "sweep": _sweep,
    "tmatrix": _tmatrix,
}


def run(args: argparse.Namespace) -> int:
    config: ExperimentConfig = load_config(
        args.config,
        experiment=COMMANDS[args.command].value,
        alpha=args.alpha,
        size=args.size,
        seed=args.seed,
    )
    runner = ExperimentRunner(config)
    writer = RunWriter(args.out, config, args.command, runner.workers)
    log.info("%s: config %s, seed %d", args.command, config.config_hash[:12], config.seed)
    passed = HANDLERS[args.command](runner, writer)
    writer.write_manifest()
    if passed is False:
        log.error("%s: checks failed", args.command)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigException as e:
        print(e.message, file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return run(args)
    except ConfigException as e:
        for error in e.errors:
            print("config error: {}".format(error), file=sys.stderr)
        return EXIT_CONFIG
    except LatticeSpecException as e:
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG
    except CrowLatticeException as e:
        log.error("%s", e)
        print(str(e), file=sys.stderr)
        return EXIT_NUMERICAL
