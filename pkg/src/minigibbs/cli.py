"""Command-line front end.

Exit status is 0 on success, 2 for configuration errors and 3 for runtime
failures (I/O or sampler errors).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .chain_analysis import GapCheckConfig, gap_report_csv, verify_gap_bounds
from .errors import InvalidGraphError, InvalidParameterError, InvalidStateError, MiniGibbsError
from .factor_graph import format_graph
from .harness import (SAMPLER_IDS, ExperimentConfig, build_graph, build_sampler, cost_report, cost_report_csv,
                      run_experiment)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ConfigError(message)


def _add_graph_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", choices=("ising", "potts"))
    src.add_argument("--graph-file", help="graph in the line-oriented text format")
    p.add_argument("--grid", type=int, default=8, help="grid side N (n = N*N sites)")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--kernel-gamma", type=float, default=1.5)
    p.add_argument("--domain", type=int, default=10, help="Potts domain size")


def _add_batch_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda2", dest="lam2", type=float)
    p.add_argument("--batch-size", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="minigibbs", description="Minibatch Gibbs samplers for discrete factor graphs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="print total/local max energy and max degree")
    _add_graph_args(p)
    p.add_argument("--out", help="also write the graph to this file")

    p = sub.add_parser("sample", help="run one chain and report the marginal error")
    _add_graph_args(p)
    p.add_argument("--sampler", required=True, choices=SAMPLER_IDS)
    _add_batch_args(p)
    p.add_argument("--iters", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stride", type=int, default=1000)
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("verify", help="check spectral-gap inequalities on a small graph")
    _add_graph_args(p)
    p.add_argument("--lambda", dest="lam", type=float, action="append",
                   help="MGPMH batch size to test (repeatable; default L^2 and 4 L^2)")
    p.add_argument("--delta", type=float, action="append", help="two-point estimator half-width (repeatable)")
    p.add_argument("--trials", type=int, default=100_000, help="Monte Carlo trials per matrix row")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("cost", help="mean factor evaluations per iteration")
    _add_graph_args(p)
    p.add_argument("--sampler", action="append", choices=SAMPLER_IDS,
                   help="sampler to measure (repeatable; default gibbs)")
    _add_batch_args(p)
    p.add_argument("--iters", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (default: stdout)")
    return parser


def _graph_config(args, sampler: str = "gibbs") -> ExperimentConfig:
    return ExperimentConfig(sampler=sampler, model=args.model, grid=args.grid, beta=args.beta,
                            kernel_gamma=args.kernel_gamma, domain=args.domain, graph_file=args.graph_file)


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _cmd_stats(args) -> None:
    graph = build_graph(_graph_config(args))
    st = graph.stats
    print(f"n={graph.n} D={graph.domain_size} factors={graph.num_factors}")
    print(f"Psi={st.total_max_energy:.6g} L={st.local_max_energy:.6g} Delta={st.max_degree}")
    if args.out:
        Path(args.out).write_text(format_graph(graph))


def _cmd_sample(args) -> None:
    cfg = _graph_config(args, args.sampler)
    cfg.lam, cfg.lam2, cfg.batch_size = args.lam, args.lam2, args.batch_size
    cfg.iterations, cfg.seed, cfg.stride = args.iters, args.seed, args.stride
    cfg.validate()
    _emit(run_experiment(cfg).to_csv(), args.out)


def _cmd_verify(args) -> None:
    graph = build_graph(_graph_config(args))
    cfg = GapCheckConfig(trials=args.trials, seed=args.seed)
    if args.delta:
        cfg.deltas = tuple(args.delta)
    if args.lam:
        cfg.lambdas = tuple(args.lam)
    _emit(gap_report_csv(verify_gap_bounds(graph, cfg)), args.out)


def _cmd_cost(args) -> None:
    graph = build_graph(_graph_config(args))
    chosen = args.sampler or ["gibbs"]
    samplers = []
    for sid in dict.fromkeys(chosen):
        cfg = ExperimentConfig(sampler=sid, model="ising",
                               lam=args.lam if sid in ("min-gibbs", "mgpmh", "double-min") else None,
                               lam2=args.lam2 if sid == "double-min" else None,
                               batch_size=args.batch_size if sid == "local" else None)
        cfg.validate()
        samplers.append((sid, build_sampler(cfg)))
    if args.iters < 0:
        raise InvalidParameterError("iterations must be >= 0")
    _emit(cost_report_csv(cost_report(graph, samplers, args.iters, args.seed)), args.out)


_COMMANDS = {"stats": _cmd_stats, "sample": _cmd_sample, "verify": _cmd_verify, "cost": _cmd_cost}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _COMMANDS[args.command](args)
    except (InvalidParameterError, InvalidGraphError, InvalidStateError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except MiniGibbsError as exc:
        print(f"sampler error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
