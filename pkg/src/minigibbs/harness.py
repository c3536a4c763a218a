"""Experiment driver: marginal-error tracking, CSV reports and cost accounting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import InvalidParameterError
from .estimators import PoissonEstimator
from .factor_graph import FactorGraph, read_graph
from .model_zoo import GridModelConfig, make_ising, make_potts
from .samplers import (MGPMH, ChainRunner, DoubleMinGibbs, Gibbs, LocalMinibatchGibbs, MinGibbs,
                       Sampler, init_state)

SAMPLER_IDS = ("gibbs", "min-gibbs", "local", "mgpmh", "double-min")
CSV_HEADER = ("iteration", "marginal_error", "factor_evals")


class MarginalTracker:
    """Running per-variable value counts over the samples seen so far.

    Counts are kept lazily: a variable's current value is credited for the
    samples it has held only when the value changes or :attr:`counts` is
    read, so ingesting a step costs O(1) regardless of ``n``.
    """

    def __init__(self, n: int, domain_size: int, x0=None):
        self.n, self.D = n, domain_size
        self._counts = np.zeros((n, domain_size), dtype=np.int64)
        self._since = np.ones(n, dtype=np.int64)
        self._x = np.zeros(n, dtype=np.int64) if x0 is None else np.asarray(x0, dtype=np.int64).copy()
        self.iterations = 0
        self._streaming = x0 is not None

    def observe(self, x) -> None:
        """Add one full sample."""
        x = np.asarray(x, dtype=np.int64)
        self._flush()
        self._counts[np.arange(self.n), x] += 1
        self.iterations += 1
        self._since[:] = self.iterations + 1
        self._x = x.copy()
        self._streaming = False

    def ingest_trace(self, variable, value, accepted) -> None:
        """Add the samples produced by consecutive steps starting from the tracked state."""
        if not self._streaming:
            raise InvalidParameterError("tracker was not started from an initial state")
        K.accumulate_marginals(self._counts, self._since, self._x, self.iterations, variable, value, accepted)
        self.iterations += len(variable)

    def _flush(self) -> None:
        if self._streaming and self.iterations:
            K.flush_marginals(self._counts, self._since, self._x, self.iterations)

    @property
    def counts(self) -> np.ndarray:
        self._flush()
        return self._counts.copy()


def marginal_error(tracker: MarginalTracker) -> float:
    """Mean over variables of the l2 distance between the empirical marginal and uniform."""
    if tracker.iterations == 0:
        raise InvalidParameterError("marginal error needs at least one sample")
    p = tracker.counts / tracker.iterations
    return float(np.linalg.norm(p - 1.0 / tracker.D, axis=1).mean())


@dataclass
class ExperimentConfig:
    sampler: str
    model: Optional[str] = None  # "ising" | "potts"
    grid: int = 8
    beta: float = 1.0
    kernel_gamma: float = 1.5
    domain: int = 10
    graph_file: Optional[str] = None
    lam: Optional[float] = None
    lam2: Optional[float] = None
    batch_size: Optional[int] = None
    iterations: int = 1_000_000
    seed: int = 0
    stride: int = 1000
    out: Optional[str] = None

    def validate(self) -> None:
        if self.sampler not in SAMPLER_IDS:
            raise InvalidParameterError(f"unknown sampler {self.sampler!r}; choose from {', '.join(SAMPLER_IDS)}")
        if (self.model is None) == (self.graph_file is None):
            raise InvalidParameterError("give exactly one of a model or a graph file")
        if self.model is not None and self.model not in ("ising", "potts"):
            raise InvalidParameterError(f"unknown model {self.model!r}")
        needs = {
            "gibbs": set(),
            "min-gibbs": {"lam"},
            "local": {"batch_size"},
            "mgpmh": {"lam"},
            "double-min": {"lam", "lam2"},
        }[self.sampler]
        for name in ("lam", "lam2", "batch_size"):
            given = getattr(self, name) is not None
            if given and name not in needs:
                raise InvalidParameterError(f"sampler {self.sampler} does not take {_flag(name)}")
            if not given and name in needs:
                raise InvalidParameterError(f"sampler {self.sampler} requires {_flag(name)}")
        if self.iterations < 0:
            raise InvalidParameterError("iterations must be >= 0")
        if self.stride < 1:
            raise InvalidParameterError("stride must be >= 1")


def _flag(name: str) -> str:
    return {"lam": "--lambda", "lam2": "--lambda2", "batch_size": "--batch-size"}[name]


def build_graph(cfg: ExperimentConfig) -> FactorGraph:
    if cfg.graph_file is not None:
        return read_graph(cfg.graph_file)
    if cfg.model == "ising":
        return make_ising(GridModelConfig(cfg.grid, cfg.beta, cfg.kernel_gamma))
    return make_potts(GridModelConfig(cfg.grid, cfg.beta, cfg.kernel_gamma, cfg.domain))


def build_sampler(cfg: ExperimentConfig) -> Sampler:
    if cfg.sampler == "gibbs":
        return Gibbs()
    if cfg.sampler == "min-gibbs":
        return MinGibbs(PoissonEstimator(cfg.lam))
    if cfg.sampler == "local":
        return LocalMinibatchGibbs(cfg.batch_size)
    if cfg.sampler == "mgpmh":
        return MGPMH(cfg.lam)
    return DoubleMinGibbs(cfg.lam, PoissonEstimator(cfg.lam2))


@dataclass
class ExperimentResult:
    rows: list = field(default_factory=list)  # (iteration, marginal_error, cumulative factor evals)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for it, err, ev in self.rows:
            w.writerow([it, repr(float(err)), ev])
        return buf.getvalue()

    @property
    def errors(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])


def run_experiment(cfg: ExperimentConfig, graph: Optional[FactorGraph] = None) -> ExperimentResult:
    """Run one chain from the all-equal state ``x = 0`` and record the marginal error.

    A row is written every ``stride`` iterations, plus one at the final
    iteration when it is not a multiple of ``stride``.
    """
    cfg.validate()
    graph = build_graph(cfg) if graph is None else graph
    sampler = build_sampler(cfg)
    rng = np.random.default_rng(cfg.seed)
    x0 = np.zeros(graph.n, dtype=np.int64)
    state = init_state(graph, sampler, x0, rng)
    runner = ChainRunner(graph, sampler, state, rng)
    tracker = MarginalTracker(graph.n, graph.domain_size, x0)
    result = ExperimentResult()
    evals = 0
    done = 0
    while done < cfg.iterations:
        k = min(cfg.stride - done % cfg.stride, cfg.iterations - done)
        tr = runner.advance(k)
        tracker.ingest_trace(tr.variable, tr.value, tr.accepted)
        evals += int(tr.evaluations.sum())
        done += k
        if done % cfg.stride == 0 or done == cfg.iterations:
            result.rows.append((done, marginal_error(tracker), evals))
    if cfg.out is not None:
        Path(cfg.out).write_text(result.to_csv())
    return result


@dataclass
class CostRow:
    sampler: str
    iterations: int
    mean_evals: float
    std_evals: float

    @property
    def stderr(self) -> float:
        return self.std_evals / math.sqrt(self.iterations) if self.iterations else float("nan")


def cost_report(graph: FactorGraph, samplers: Sequence[tuple[str, Sampler]], iterations: int,
                seed: int = 0) -> list[CostRow]:
    """Mean factor-table evaluations per iteration for each sampler, from the all-equal start."""
    rows = []
    for k, (label, sampler) in enumerate(samplers):
        rng = np.random.default_rng([seed, k])
        state = init_state(graph, sampler, np.zeros(graph.n, dtype=np.int64), rng)
        tr = ChainRunner(graph, sampler, state, rng).advance(iterations)
        ev = tr.evaluations.astype(float)
        rows.append(CostRow(label, iterations, float(ev.mean()) if iterations else float("nan"),
                            float(ev.std(ddof=1)) if iterations > 1 else 0.0))
    return rows


def cost_report_csv(rows: Sequence[CostRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sampler", "iterations", "mean_factor_evals", "stderr"])
    for r in rows:
        w.writerow([r.sampler, r.iterations, f"{r.mean_evals:.6g}", f"{r.stderr:.3g}"])
    return buf.getvalue()
