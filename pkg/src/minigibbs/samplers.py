"""Single-site Markov chain updates: Gibbs and its minibatched variants.

Each sampler is a small frozen config object; :func:`step` advances a
:class:`ChainState` by one iteration and :func:`run_chain` drives many.
MIN-Gibbs and DoubleMIN-Gibbs run on augmented states that carry the cached
energy estimate of the current assignment.

All randomness comes from the ``numpy.random.Generator`` passed in, and
:func:`run_chain` consumes it exactly as repeated :func:`step` calls would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels as K
from .errors import InvalidParameterError, ObserverError
from .estimators import PoissonEstimator, TwoPointEstimator
from .factor_graph import FactorGraph

Estimator = Union[TwoPointEstimator, PoissonEstimator]


@dataclass(frozen=True)
class Gibbs:
    """Plain Gibbs sampling with exact local energies."""

    name = "gibbs"
    augmented = False


@dataclass(frozen=True)
class MinGibbs:
    """MIN-Gibbs: full-graph energy estimates with the current estimate cached."""

    estimator: Estimator
    name = "min-gibbs"
    augmented = True


@dataclass(frozen=True)
class LocalMinibatchGibbs:
    """Gibbs with one shared uniform minibatch of ``A[i]`` per iteration.

    Batches larger than ``|A[i]|`` are clamped to the full neighbourhood.
    """

    batch_size: int
    name = "local"
    augmented = False

    def __post_init__(self):
        if int(self.batch_size) < 1:
            raise InvalidParameterError(f"batch size must be at least 1, got {self.batch_size}")


@dataclass(frozen=True)
class MGPMH:
    """Minibatch-Gibbs proposal with a Metropolis-Hastings style correction.

    ``exact_counts`` fixes every count at its mean so the proposal is the
    exact conditional; it exists to check that the chain degenerates to Gibbs.
    """

    lam: float
    exact_counts: bool = False
    name = "mgpmh"
    augmented = False

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidParameterError(f"lambda must be positive and finite, got {self.lam}")


@dataclass(frozen=True)
class DoubleMinGibbs:
    """MGPMH proposal, accepted with a second full-graph estimate in place of exact energies."""

    lam: float
    estimator: Estimator
    exact_counts: bool = False
    name = "double-min"
    augmented = True

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidParameterError(f"lambda must be positive and finite, got {self.lam}")


Sampler = Union[Gibbs, MinGibbs, LocalMinibatchGibbs, MGPMH, DoubleMinGibbs]

_KIND = {Gibbs: K.GIBBS, MinGibbs: K.MIN_GIBBS, LocalMinibatchGibbs: K.LOCAL, MGPMH: K.MGPMH,
         DoubleMinGibbs: K.DOUBLE_MIN}


@dataclass(frozen=True)
class ChainState:
    """Current assignment ``x`` and, for augmented chains, its cached energy estimate."""

    x: np.ndarray
    cached_energy: Optional[float] = None


@dataclass(frozen=True)
class StepRecord:
    variable: int
    value: int  # proposed value (the sampled value for always-accept samplers)
    accepted: bool
    evaluations: int  # factor-table evaluations spent on this step
    batch_size: int = 0  # factors drawn into minibatches, with multiplicity (0 for exact evaluations)


def _kernel_args(graph: FactorGraph, sampler: Sampler) -> tuple:
    """Positional scalar arguments of :func:`_kernels.step` for ``sampler``."""
    st = graph.stats
    est = getattr(sampler, "estimator", None)
    return (
        _KIND[type(sampler)],
        float(getattr(sampler, "lam", 0.0)),
        int(getattr(sampler, "batch_size", 0)),
        est.kernel_kind if est is not None else 0,
        est.kernel_param if est is not None else 0.0,
        bool(getattr(sampler, "exact_counts", False)),
        st.total_max_energy,
        st.local_max_energy,
    )


def init_state(graph: FactorGraph, sampler: Sampler, x, rng: np.random.Generator) -> ChainState:
    """Wrap ``x`` as a chain state; augmented samplers draw the initial cached estimate."""
    x = graph.validate_state(x)
    if sampler.augmented:
        return ChainState(x, sampler.estimator.sample(graph, x, rng))
    return ChainState(x)


def _check_state(graph, sampler, state: ChainState) -> tuple[np.ndarray, float]:
    x = graph.validate_state(state.x)
    if sampler.augmented:
        if state.cached_energy is None:
            raise InvalidParameterError(f"{sampler.name} needs a cached energy; use init_state")
        return x, float(state.cached_energy)
    return x, 0.0


def step(graph: FactorGraph, sampler: Sampler, state: ChainState,
         rng: np.random.Generator) -> tuple[ChainState, StepRecord]:
    """One iteration of ``sampler`` from ``state``; the input state is not modified."""
    x, cache = _check_state(graph, sampler, state)
    ws = K.make_workspace(graph)
    i, v, acc, ev, cache = K.step(*_kernel_args(graph, sampler), graph.kernel_arrays(), ws, x, cache, rng)
    new = ChainState(x, cache if sampler.augmented else None)
    return new, StepRecord(int(i), int(v), bool(acc), int(ev), int(ws[9][0]))


def gibbs_step(graph, state, rng):
    return step(graph, Gibbs(), state, rng)


def min_gibbs_step(graph, state, estimator, rng):
    return step(graph, MinGibbs(estimator), state, rng)


def local_minibatch_step(graph, state, batch_size, rng):
    return step(graph, LocalMinibatchGibbs(batch_size), state, rng)


def mgpmh_step(graph, state, lam, rng, exact_counts=False):
    return step(graph, MGPMH(lam, exact_counts), state, rng)


def double_min_step(graph, state, lam, second_estimator, rng, exact_counts=False):
    return step(graph, DoubleMinGibbs(lam, second_estimator, exact_counts), state, rng)


def categorical_from_energies(energies, rng: np.random.Generator) -> int:
    """Sample ``v`` with probability ``exp(e_v) / sum_w exp(e_w)`` (0-based)."""
    e = np.asarray(energies, dtype=np.float64)
    if e.ndim != 1 or e.size == 0:
        raise InvalidParameterError("need a non-empty 1-d list of energies")
    if not np.all(np.isfinite(e)):
        raise InvalidParameterError("energies must be finite")
    return int(K.categorical(e.copy(), e.size, np.empty(e.size), rng))


@dataclass
class Trace:
    """Per-step records of a stretch of chain, as parallel arrays."""

    variable: np.ndarray
    value: np.ndarray
    accepted: np.ndarray
    evaluations: np.ndarray
    cached_energy: np.ndarray
    batch_size: np.ndarray

    def __len__(self):
        return len(self.variable)

    def record(self, t: int) -> StepRecord:
        return StepRecord(int(self.variable[t]), int(self.value[t]), bool(self.accepted[t]),
                          int(self.evaluations[t]), int(self.batch_size[t]))


class ChainRunner:
    """Holds a chain's mutable state and scratch space and advances it in chunks."""

    def __init__(self, graph: FactorGraph, sampler: Sampler, state: ChainState, rng: np.random.Generator):
        self.graph = graph
        self.sampler = sampler
        self.rng = rng
        self.x, self.cache = _check_state(graph, sampler, state)
        self._args = _kernel_args(graph, sampler)
        self._G = graph.kernel_arrays()
        self._ws = K.make_workspace(graph)

    @property
    def state(self) -> ChainState:
        return ChainState(self.x.copy(), self.cache if self.sampler.augmented else None)

    def advance(self, steps: int) -> Trace:
        tr = Trace(np.empty(steps, np.int64), np.empty(steps, np.int64), np.empty(steps, np.bool_),
                   np.empty(steps, np.int64), np.empty(steps, np.float64), np.empty(steps, np.int64))
        self.cache = K.run_steps(*self._args, self._G, self._ws, self.x, self.cache, self.rng,
                                 tr.variable, tr.value, tr.accepted, tr.evaluations, tr.cached_energy,
                                 tr.batch_size)
        return tr


Observer = Callable[[int, ChainState, StepRecord], None]


def run_chain(graph: FactorGraph, sampler: Sampler, state: ChainState, iterations: int,
              rng: np.random.Generator, observer: Optional[Observer] = None,
              chunk: int = 1 << 16) -> ChainState:
    """Apply ``iterations`` steps, calling ``observer(t, state, record)`` after each.

    ``t`` counts from 1.  The state handed to the observer shares memory with
    the running chain and must not be kept or modified.  Any exception from
    the observer aborts the run as :class:`ObserverError`.
    """
    if iterations < 0:
        raise InvalidParameterError(f"iterations must be >= 0, got {iterations}")
    runner = ChainRunner(graph, sampler, state, rng)
    if observer is None:
        done = 0
        while done < iterations:
            done += len(runner.advance(min(chunk, iterations - done)))
        return runner.state

    x = state.x.astype(np.int64).copy()
    view = x.view()
    view.setflags(write=False)
    cache = state.cached_energy
    done = 0
    while done < iterations:
        tr = runner.advance(min(chunk, iterations - done))
        for t in range(len(tr)):
            if tr.accepted[t]:
                x[tr.variable[t]] = tr.value[t]
            if sampler.augmented:
                cache = float(tr.cached_energy[t])
            try:
                observer(done + t + 1, ChainState(view, cache), tr.record(t))
            except Exception as exc:
                raise ObserverError(f"observer failed at iteration {done + t + 1}: {exc!r}") from exc
        done += len(tr)
    return runner.state
