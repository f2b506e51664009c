import argparse
import inspect
import sys
from typing import Callable, Sequence

from nominator import cli
from nominator.logger import create_logger
from nominator.presets import presets_help


class ArgumentParser(argparse.ArgumentParser):
    # usage errors share exit code 1 with validation errors
    def error(self, message: str):
        raise cli.UsageError(f"{self.prog}: {message}")


def int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        message = f"expected comma separated integers, got {value!r}"
        raise argparse.ArgumentTypeError(message) from None


def float_list(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        message = f"expected comma separated numbers, got {value!r}"
        raise argparse.ArgumentTypeError(message) from None


def str_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    """Options shared by every command; unset flags leave config file and preset values alone."""
    parser.add_argument("--config", help="JSON file with options (flags take precedence)")
    parser.add_argument("--preset", help="study or sampler preset, see the list below")
    parser.add_argument("--seed", type=int, help="seed for end-to-end determinism")
    parser.add_argument("--out", help="output directory (default: out)")
    parser.add_argument("--format", choices=["json", "csv"], help="summary document format")
    parser.add_argument("--one-based", action="store_true", default=None, help="1-based ids")


def add_sampler_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--burn-in", type=int, help="discarded iterations")
    parser.add_argument("--samples", type=int, help="recorded iterations")
    parser.add_argument("--check-rate", type=float, help="fraction of gamma updates re-checked")
    parser.add_argument("--alpha", type=float, help="psi hyperprior alpha (with --beta)")
    parser.add_argument("--beta", type=float, help="psi hyperprior beta (with --alpha)")
    parser.add_argument("--hyperprior", help="named psi hyperprior")


def add_model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, help="vertices")
    parser.add_argument("--m", type=int, help="red vertices")
    parser.add_argument(
        "--mprime", dest="m_prime", type=int_list, help="observed red vertices, comma separated"
    )
    parser.add_argument("--p1", type=float, help="green edge probability")
    parser.add_argument("--p2", type=float, help="red edge probability off red-red pairs")
    parser.add_argument("--q2", type=float, help="red edge probability between red vertices")


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(
        prog="nominator",
        description="Bayesian vertex nomination on attributed graphs",
        epilog=presets_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    def command(
        name: str, handler: Callable[[argparse.Namespace], None], help_text: str
    ) -> argparse.ArgumentParser:
        sub = commands.add_parser(
            name,
            help=help_text,
            description=help_text,
            epilog=presets_help(),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        sub.set_defaults(handler=handler)
        add_run_arguments(sub)
        return sub

    infer = command("infer", cli.command_infer, "posterior marginals and nominee for a graph")
    infer.add_argument("graph", help="graph file (text matrix or .json)")
    add_sampler_arguments(infer)
    infer.add_argument("--traces", action="store_true", default=None, help="moving averages")

    study = command("study", cli.command_study, "Monte Carlo correct-nomination study")
    add_sampler_arguments(study)
    add_model_arguments(study)
    study.add_argument("--trials", type=int, help="graphs per study")
    study.add_argument("--jobs", type=int, help="worker processes")
    study.add_argument("--n-boot", type=int, help="bootstrap resamples")
    study.add_argument("--level", type=float, help="confidence level")
    study.add_argument("--grid", type=float_list, help="fusion weights, comma separated")
    study.add_argument("--thresholds", type=float_list, help="conditional success thresholds")
    study.add_argument("--hyperpriors", type=str_list, help="hyperpriors to compare")

    simulate = command("simulate", cli.command_simulate, "generate graphs with truth sidecars")
    add_model_arguments(simulate)
    simulate.add_argument("--count", type=int, help="graphs to write")

    baseline = command("baseline", cli.command_baseline, "fusion statistic nomination")
    baseline.add_argument("graph", help="graph file (text matrix or .json)")
    baseline.add_argument("--lambda", dest="lam", type=float, help="fusion weight in [0, 1]")
    baseline.add_argument("--grid", type=float_list, help="fusion weights swept against truth")
    baseline.add_argument("--truth", help="ground truth file (default: the graph's sidecar)")

    combinations = command(
        "combinations", cli.command_combinations, "leave-m'-in study on a graph with known reds"
    )
    combinations.add_argument("graph", help="graph file (text matrix or .json)")
    combinations.add_argument("--truth", help="ground truth file (default: the graph's sidecar)")
    combinations.add_argument(
        "--mprime", dest="m_prime", type=int_list, help="observed reds per combination"
    )
    combinations.add_argument("--n-boot", type=int, help="bootstrap resamples")
    combinations.add_argument("--level", type=float, help="confidence level")
    add_sampler_arguments(combinations)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logger = create_logger(inspect.currentframe().f_code.co_name)  # type: ignore
    try:
        args = build_parser().parse_args(argv)
        for key in ["graph", "truth"]:
            if not hasattr(args, key):
                setattr(args, key, None)
        logger.debug(f"running {args.command}")
        args.handler(args)
    except (ValueError, OSError) as e:
        return cli.error_handler(e)
    return 0


if __name__ == "__main__":
    sys.exit(main())
