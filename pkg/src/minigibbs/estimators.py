"""Energy estimators built from minibatches of factors.

Count sampling is kept separate from estimate evaluation: the ``sample_*``
functions draw counts or batches, and the ``*_estimate`` functions are pure
functions of the graph, the state and those counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import _kernels as K
from .errors import InvalidParameterError, InvalidStateError
from .factor_graph import FactorGraph, energy


@dataclass(frozen=True)
class PoissonMinibatchConfig:
    """Expected batch size ``lam`` for the bias-adjusted Poisson estimator."""

    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidParameterError(f"lambda must be positive and finite, got {self.lam}")


@dataclass(frozen=True)
class SparseCounts:
    """Non-zero minibatch counts: ``counts[k]`` copies of factor ``indices[k]``."""

    indices: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_dict(cls, mapping: Mapping[int, int]) -> "SparseCounts":
        items = sorted((int(k), int(v)) for k, v in mapping.items() if v != 0)
        if any(v < 0 for _, v in items):
            raise InvalidParameterError("counts must be non-negative")
        idx = np.array([k for k, _ in items], dtype=np.int64)
        cnt = np.array([v for _, v in items], dtype=np.int64)
        return cls(idx, cnt)

    @classmethod
    def empty(cls) -> "SparseCounts":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))

    def to_dict(self) -> dict[int, int]:
        return {int(k): int(c) for k, c in zip(self.indices, self.counts)}

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class BatchSizeRecommendation:
    lam: float


class PoissonVectorSampler:
    """Sampler for independent ``Poisson(rate_k)`` counts over a fixed rate list.

    The cumulative weights are computed once here, so each :meth:`sample`
    costs ``O(sum of rates)`` on average rather than ``O(len(rates))``: the
    total count ``B ~ Poisson(sum)`` is drawn first and its ``B`` trials are
    placed by inverse-CDF search.  For rate sums larger than the vector
    length each coordinate is drawn directly instead.
    """

    def __init__(self, rates: Iterable[tuple[int, float]]):
        pairs = list(rates)
        ids = np.array([int(k) for k, _ in pairs], dtype=np.int64)
        r = np.array([float(v) for _, v in pairs], dtype=np.float64)
        if r.size and (not np.all(np.isfinite(r)) or r.min() < 0):
            raise InvalidParameterError("Poisson rates must be finite and non-negative")
        self.ids = ids
        self.total_rate = float(r.sum())
        self._cum = np.cumsum(r)
        m = max(len(r), 1)
        self._scratch = np.zeros(m, dtype=np.int64)
        self._idx = np.zeros(m, dtype=np.int64)
        self._cnt = np.zeros(m, dtype=np.int64)

    def sample(self, rng: np.random.Generator) -> SparseCounts:
        nnz = K.poisson_vector(self.total_rate, self._cum, 0, len(self.ids), rng, self._scratch, self._idx, self._cnt)
        order = np.argsort(self._idx[:nnz])
        return SparseCounts(self.ids[self._idx[:nnz][order]], self._cnt[:nnz][order].copy())


def sample_poisson_counts(rates: Iterable[tuple[int, float]], rng: np.random.Generator) -> SparseCounts:
    """Draw independent Poisson counts for ``(factor index, rate)`` pairs."""
    return PoissonVectorSampler(rates).sample(rng)


def graph_poisson_rates(graph: FactorGraph, cfg: PoissonMinibatchConfig) -> list[tuple[int, float]]:
    """Rates ``lam * M_phi / Psi`` used by the bias-adjusted estimator."""
    psi = graph.stats.total_max_energy
    if psi == 0:
        return []
    return [(f, cfg.lam * m / psi) for f, m in enumerate(graph.max_energies)]


def _check_counts(graph: FactorGraph, counts: SparseCounts) -> None:
    if len(counts) and (counts.indices.min() < 0 or counts.indices.max() >= graph.num_factors):
        raise InvalidParameterError("counts reference unknown factor indices")
    if len(counts) and counts.counts.min() < 0:
        raise InvalidParameterError("counts must be non-negative")


def unbiased_energy_estimate(graph: FactorGraph, x, cfg: PoissonMinibatchConfig, counts: SparseCounts) -> float:
    """``sum_phi s_phi * log1p(Psi * phi(x) / (lam * M_phi))`` for the given counts.

    With counts drawn at rates ``lam * M_phi / Psi`` the exponential of this
    estimate is unbiased for ``exp(energy(x))``.
    """
    x = graph.validate_state(x)
    _check_counts(graph, counts)
    if len(counts) == 0:
        return 0.0
    psi = graph.stats.total_max_energy
    M = graph.max_energies[counts.indices]
    if np.any(M <= 0):
        raise InvalidParameterError("counts select a factor with zero maximum energy")
    phi = graph.factor_values(x, counts.indices)
    return float(np.sum(counts.counts * np.log1p(psi * phi / (cfg.lam * M))))


def local_minibatch_estimate(graph: FactorGraph, i: int, x, batch) -> float:
    """``(|A[i]| / |S|) * sum_{phi in S} phi(x)`` for a batch ``S`` drawn from ``A[i]``."""
    x = graph.validate_state(x)
    batch = np.asarray(batch, dtype=np.int64)
    if batch.size == 0:
        raise InvalidParameterError("minibatch must be non-empty")
    nbrs = graph.adjacency(i)
    if not np.all(np.isin(batch, nbrs)) or len(np.unique(batch)) != batch.size:
        raise InvalidParameterError(f"minibatch must be a subset of the factors adjacent to variable {i}")
    return float(len(nbrs) / batch.size * graph.factor_values(x, batch).sum())


def sample_local_batch(graph: FactorGraph, i: int, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform subset of ``A[i]`` of size ``min(batch_size, |A[i]|)``."""
    if batch_size < 1:
        raise InvalidParameterError(f"batch size must be at least 1, got {batch_size}")
    nbrs = graph.adjacency(i)
    return rng.choice(nbrs, size=min(batch_size, len(nbrs)), replace=False)


def weighted_local_estimate(graph: FactorGraph, i: int, x, counts: SparseCounts, lam: float, L: float) -> float:
    """``sum_{phi in S} s_phi * L / (lam * M_phi) * phi(x)`` over counts on ``A[i]``."""
    x = graph.validate_state(x)
    _check_counts(graph, counts)
    if len(counts) == 0:
        return 0.0
    if not np.all(np.isin(counts.indices, graph.adjacency(i))):
        raise InvalidParameterError(f"counts include factors not adjacent to variable {i}")
    M = graph.max_energies[counts.indices]
    if np.any(M <= 0):
        raise InvalidParameterError("counts select a factor with zero maximum energy")
    phi = graph.factor_values(x, counts.indices)
    return float(np.sum(counts.counts * L / (lam * M) * phi))


def local_poisson_rates(graph: FactorGraph, i: int, lam: float) -> list[tuple[int, float]]:
    """Rates ``lam * M_phi / L`` over ``A[i]``."""
    L = graph.stats.local_max_energy
    if L == 0:
        return []
    return [(int(f), lam * graph.max_energies[f] / L) for f in graph.adjacency(i)]


def recommended_batch_size(psi: float, delta: float, a: float) -> BatchSizeRecommendation:
    """Smallest expected batch size giving ``P(|eps - energy| >= delta) <= a``."""
    if not delta > 0:
        raise InvalidParameterError(f"delta must be positive, got {delta}")
    if not 0 < a < 1:
        raise InvalidParameterError(f"failure probability must lie in (0, 1), got {a}")
    if psi < 0:
        raise InvalidParameterError(f"total max energy must be non-negative, got {psi}")
    return BatchSizeRecommendation(max(8 * psi**2 / delta**2 * math.log(2 / a), 2 * psi**2 / delta))


# -- full-graph estimators for MIN-Gibbs / DoubleMIN-Gibbs -----------------------


@dataclass(frozen=True)
class TwoPointEstimator:
    """Finite-support test estimator: ``energy(x) +/- delta`` with probability 1/2 each.

    Every support point is within ``delta`` of the true energy, and
    ``delta = 0`` gives the exact energy.
    """

    delta: float

    def __post_init__(self):
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise InvalidParameterError(f"delta must be finite and >= 0, got {self.delta}")

    kernel_kind = K.TWO_POINT

    @property
    def kernel_param(self) -> float:
        return float(self.delta)

    def support(self, graph: FactorGraph, x) -> tuple[np.ndarray, np.ndarray]:
        """Support points (ascending) and their probabilities."""
        z = energy(graph, x)
        if self.delta == 0:
            return np.array([z]), np.array([1.0])
        return np.array([z - self.delta, z + self.delta]), np.array([0.5, 0.5])

    def sample(self, graph: FactorGraph, x, rng: np.random.Generator) -> float:
        x = graph.validate_state(x)
        ws = K.make_workspace(graph)
        return float(K.estimate(self.kernel_kind, self.kernel_param, graph.stats.total_max_energy,
                                x, graph.kernel_arrays(), ws, rng)[0])


BoundedTestEstimator = TwoPointEstimator


def make_two_point_estimator(delta: float) -> TwoPointEstimator:
    return TwoPointEstimator(float(delta))


@dataclass(frozen=True)
class PoissonEstimator:
    """Bias-adjusted Poisson minibatch estimator with expected batch size ``lam``."""

    lam: float

    def __post_init__(self):
        PoissonMinibatchConfig(self.lam)

    kernel_kind = K.POISSON

    @property
    def kernel_param(self) -> float:
        return float(self.lam)

    def sample(self, graph: FactorGraph, x, rng: np.random.Generator) -> float:
        x = graph.validate_state(x)
        ws = K.make_workspace(graph)
        return float(K.estimate(self.kernel_kind, self.kernel_param, graph.stats.total_max_energy,
                                x, graph.kernel_arrays(), ws, rng)[0])


def poisson_estimator_draws(graph: FactorGraph, states, lam: float, n_draws: int,
                            rng: np.random.Generator) -> np.ndarray:
    """``(n_draws, len(states))`` estimator draws; each draw shares one count vector across states."""
    PoissonMinibatchConfig(lam)
    states = np.asarray(states, dtype=np.int64)
    if states.ndim != 2 or states.shape[1] != graph.n:
        raise InvalidStateError(f"states must have shape (S, {graph.n})")
    for s in states:
        graph.validate_state(s)
    out = np.empty((int(n_draws), len(states)))
    K.poisson_estimator_draws(states, float(lam), graph.stats.total_max_energy, graph.kernel_arrays(),
                              K.make_workspace(graph), rng, out)
    return out
