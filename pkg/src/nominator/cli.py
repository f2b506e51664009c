import argparse
import inspect
from pathlib import Path
from typing import Any

import numpy as np

from nominator.experiments import (
    comparison_column,
    format_comparison,
    hyperprior_sensitivity,
    prior_marginal_table,
    run_combination_study,
    run_study,
)
from nominator.graph import compute_stats, generate_study_graph, study_coloring
from nominator.graph.io import read_graph, read_truth, truth_path, write_graph, write_truth
from nominator.helper import derive_seed, format_float, write_json
from nominator.likelihood import InvalidConfigError
from nominator.logger import create_logger
from nominator.mcmc import run_chain
from nominator.nomination import fusion_nominate, fusion_oracle_sweep, rank, summarize
from nominator.options import RunConfig, resolve_run_config
from nominator.reports import (
    write_combinations,
    write_comparison,
    write_document,
    write_fusion,
    write_marginals,
    write_moving_averages,
    write_prior_marginals,
    write_rows,
    write_threshold_curve,
    write_trace,
    write_trials,
)

# grid for the exported prior densities
PRIOR_GRID = np.round(np.linspace(0.005, 0.995, 199), 6)


class UsageError(ValueError):
    pass


def run_config(args: argparse.Namespace) -> RunConfig:
    flags: dict[str, Any] = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "handler", "config", "graph", "truth")
    }
    return resolve_run_config(flags, args.config)


def output_dir(config: RunConfig, command: str, **provenance: Any) -> Path:
    """Creates the output directory and echoes the effective configuration into it."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", {"command": command, **provenance, **config.as_dict()})
    return out


def _id_base(config: RunConfig, file_base: int) -> int:
    return 1 if config.one_based else file_base


def _truth_for(args: argparse.Namespace) -> Path | None:
    if args.truth is not None:
        return Path(args.truth)
    sidecar = truth_path(Path(args.graph))
    return sidecar if sidecar.exists() else None


def command_infer(args: argparse.Namespace) -> None:
    logger = create_logger(inspect.currentframe().f_code.co_name)  # type: ignore
    config = run_config(args)
    graph, file_base = read_graph(args.graph)
    base = _id_base(config, file_base)

    stats = compute_stats(graph)
    prior = config.prior(graph.n, graph.m_prime)
    logger.debug(f"n={graph.n} m'={graph.m_prime} prior={prior.as_dict()}")
    trace = run_chain(graph, prior, config.sampler(), stats=stats)
    summary = summarize(trace)

    out = output_dir(config, "infer", graph=str(args.graph), prior=prior.as_dict())
    write_document(out, "summary", summary.to_dict(base), config.format)
    write_marginals(out / "marginals.csv", summary, stats, base)
    write_trace(out / "trace.csv", trace)
    write_prior_marginals(out / "prior_marginals.csv", prior_marginal_table(PRIOR_GRID, prior))
    if config.traces:
        write_moving_averages(out / "moving_averages.csv", trace, base)

    print(f"nominee {summary.nominee + base} (P(red) = {format_float(summary.nominee_prob)})")
    for vertex, probability in rank(summary):
        print(f"{vertex + base}\t{format_float(probability)}")


def _study_outputs(out: Path, config: RunConfig, results: list) -> None:
    suffix_needed = len(results) > 1
    for result in results:
        suffix = f"_mprime{result.spec.m_prime}" if suffix_needed else ""
        write_trials(out / f"trials{suffix}.csv", result)
        write_threshold_curve(out / f"thresholds{suffix}.csv", result.curve)
        write_document(out, f"study{suffix}", result.to_dict(), config.format)


def command_study(args: argparse.Namespace) -> None:
    config = run_config(args)
    specs = config.study_specs()

    results = [
        run_study(
            spec,
            jobs=config.jobs,
            thresholds=config.thresholds,
            level=config.level,
            n_boot=config.n_boot,
        )
        for spec in specs
    ]
    sensitivity = (
        hyperprior_sensitivity(
            specs[0], config.hyperpriors, jobs=config.jobs, n_boot=config.n_boot
        )
        if config.hyperpriors
        else {}
    )

    out = output_dir(config, "study")
    _study_outputs(out, config, results)
    for result in results:
        print(
            f"m'={result.spec.m_prime}: rate {format_float(result.rate)} "
            f"({format_float(result.ci.lower)}, {format_float(result.ci.upper)}), "
            f"chance {format_float(result.chance)}, "
            f"odds ratio {format_float(result.odds_ratio_vs_chance, 2)}"
        )
    if len(results) > 1:
        columns = [comparison_column(result) for result in results]
        write_comparison(out / "comparison.csv", columns)
        print(format_comparison(columns))
    if sensitivity:
        rows = [
            {
                "hyperprior": name,
                "rate": result.rate,
                "ci_lo": result.ci.lower,
                "ci_hi": result.ci.upper,
            }
            for name, result in sensitivity.items()
        ]
        write_rows(
            out / "hyperprior_sensitivity.csv", ["hyperprior", "rate", "ci_lo", "ci_hi"], rows
        )
        for row in rows:
            print(f"{row['hyperprior']}: rate {format_float(row['rate'])}")


def command_simulate(args: argparse.Namespace) -> None:
    config = run_config(args)
    n, m, m_primes = config.study_counts()
    if len(m_primes) != 1:
        raise InvalidConfigError("simulate takes a single m' value")
    params = config.params()
    study_coloring(n, m, m_primes[0])
    base = 1 if config.one_based else 0

    out = output_dir(config, "simulate")
    for k in range(config.count):
        rng = np.random.default_rng(derive_seed(config.seed, k))
        graph, coloring = generate_study_graph(n, m, m_primes[0], params, rng)
        path = write_graph(graph, out / f"graph_{k:04d}.json", index_base=base)
        write_truth(truth_path(path), coloring.red_ids, params)
        print(path)


def command_baseline(args: argparse.Namespace) -> None:
    config = run_config(args)
    truth = _truth_for(args)
    if config.grid is not None and truth is None:
        raise InvalidConfigError(
            "a fusion weight sweep needs ground truth: pass --truth or place a .truth.json "
            "sidecar beside the graph"
        )
    graph, file_base = read_graph(args.graph)
    base = _id_base(config, file_base)
    stats = compute_stats(graph)

    if config.grid is None:
        result = fusion_nominate(stats, config.lam)
        out = output_dir(config, "baseline", graph=str(args.graph))
        write_fusion(out / "fusion.csv", [result], base)
        order = sorted(zip(result.latent_ids.tolist(), result.tau.tolist()), key=lambda t: -t[1])
        print(f"nominee {result.nominee + base} (lambda = {config.lam:g})")
        for vertex, tau in order:
            print(f"{vertex + base}\t{tau:g}")
        return

    red_ids, _ = read_truth(truth)  # type: ignore
    grid = tuple(config.grid)
    sweep = fusion_oracle_sweep([(stats, red_ids)], grid)
    out = output_dir(config, "baseline", graph=str(args.graph), truth=str(truth))
    write_fusion(out / "fusion.csv", [fusion_nominate(stats, lam) for lam in grid], base)
    write_document(out, "sweep", sweep.to_dict(), config.format)
    for lam, rate in zip(sweep.grid, sweep.rates):
        print(f"lambda {lam:g}\t{'correct' if rate else 'wrong'}")
    print(f"best lambda {sweep.best_lambda:g}")


def command_combinations(args: argparse.Namespace) -> None:
    config = run_config(args)
    truth = _truth_for(args)
    if truth is None:
        raise InvalidConfigError(
            "combinations need the red set: pass --truth or place a .truth.json sidecar"
        )
    if config.m_prime is None or len(config.m_prime) != 1:
        raise InvalidConfigError("combinations take a single --mprime value")
    graph, file_base = read_graph(args.graph)
    red_ids, _ = read_truth(truth)
    base = _id_base(config, file_base)

    m_prime = config.m_prime[0]
    result = run_combination_study(
        graph,
        red_ids,
        m_prime,
        config.prior(graph.n, m_prime),
        config.sampler(),
        config.seed,
        level=config.level,
        n_boot=config.n_boot,
    )
    out = output_dir(config, "combinations", graph=str(args.graph), truth=str(truth))
    write_combinations(out / "combinations.csv", result, base)
    write_document(out, "combinations", result.to_dict(base), config.format)
    means = result.mean_params()
    print(
        f"{len(result.records)} combinations: rate {format_float(result.rate)} "
        f"({format_float(result.ci.lower)}, {format_float(result.ci.upper)}), "
        f"chance {format_float(result.chance)}"
    )
    print(f"mean p1={means.p1:.4f} p2={means.p2:.4f} q2={means.q2:.4f}")


def error_handler(error: BaseException) -> int:
    """
    :return: exit code 1 for usage and validation errors, 2 for I/O errors
    """
    log = create_logger(inspect.currentframe().f_code.co_name)  # type: ignore

    try:
        raise error
    except ValueError as e:
        log.error(str(e))
        return 1
    except OSError as e:
        message = f"{e.strerror}: {e.filename}" if e.filename else str(e)
        log.error(message)
        return 2
