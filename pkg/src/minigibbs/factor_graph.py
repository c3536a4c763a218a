"""Discrete factor graphs with dense factor tables.

Variables are indexed ``0..n-1`` and take values ``0..D-1`` inside the
Python API.  The text file format (see :func:`read_graph`) is 1-based.

A factor over scope ``(v1, ..., vk)`` stores ``D**k`` energies in row-major
order with the last scope variable varying fastest, so the table entry for a
state ``x`` sits at ``sum(x[v_j] * D**(k-1-j))``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidGraphError, InvalidStateError, StateSpaceTooLargeError

DEFAULT_STATE_CAP = 10**6


@dataclass(frozen=True)
class Factor:
    """One factor: a scope and a dense non-negative energy table.

    ``table`` has shape ``(D,) * len(scope)``.  ``max_energy`` is derived
    from the table so it is always the tight bound.
    """

    scope: tuple[int, ...]
    table: np.ndarray = field(repr=False)

    @property
    def max_energy(self) -> float:
        return float(self.table.max())

    def __call__(self, x: np.ndarray) -> float:
        return float(self.table[tuple(np.asarray(x)[list(self.scope)])])


@dataclass(frozen=True)
class GraphStats:
    total_max_energy: float  # Psi
    local_max_energy: float  # L
    max_degree: int  # Delta


class FactorGraph:
    """Immutable factor graph over ``n`` variables sharing the domain ``{0..D-1}``.

    Construct from a list of :class:`Factor` objects, or with
    :meth:`from_arrays` when every factor has the same arity (much faster for
    the dense pairwise models).
    """

    def __init__(self, n: int, domain_size: int, factors: Iterable[Factor] = ()):
        factors = list(factors)
        scopes = [tuple(int(v) for v in f.scope) for f in factors]
        tables = []
        for f, scope in zip(factors, scopes):
            t = np.asarray(f.table, dtype=np.float64)
            if t.shape != (domain_size,) * len(scope):
                raise InvalidGraphError(
                    f"factor over {scope} needs table shape {(domain_size,) * len(scope)}, got {t.shape}"
                )
            tables.append(t.ravel())
        self._build(n, domain_size, scopes, tables)

    @classmethod
    def from_arrays(cls, n: int, domain_size: int, scopes: np.ndarray, tables: np.ndarray) -> "FactorGraph":
        """Build from a ``(F, k)`` scope array and ``(F, D**k)`` flat tables."""
        scopes = np.asarray(scopes, dtype=np.int64)
        tables = np.asarray(tables, dtype=np.float64)
        if scopes.ndim != 2 or tables.ndim != 2 or scopes.shape[0] != tables.shape[0]:
            raise InvalidGraphError("scopes must be (F, k) and tables (F, D**k)")
        self = cls.__new__(cls)
        self._build(n, domain_size, scopes, tables)
        return self

    def _build(self, n, D, scopes, tables) -> None:
        if int(n) < 1:
            raise InvalidGraphError(f"need at least one variable, got n={n}")
        if int(D) < 1:
            raise InvalidGraphError(f"domain size must be positive, got D={D}")
        n, D = int(n), int(D)
        F = len(scopes)
        if isinstance(scopes, np.ndarray):
            arity = np.full(F, scopes.shape[1], dtype=np.int64)
            K = max(scopes.shape[1], 1)
        else:
            arity = np.array([len(s) for s in scopes], dtype=np.int64)
            K = int(arity.max()) if F else 1
        if F and arity.min() < 1:
            raise InvalidGraphError("factor scopes must be non-empty")

        scope = np.zeros((F, K), dtype=np.int64)
        strides = np.zeros((F, K), dtype=np.int64)
        sizes = D**arity
        if isinstance(scopes, np.ndarray):
            scope[:, : scopes.shape[1]] = scopes
            powers = D ** np.arange(K - 1, -1, -1, dtype=np.int64)
            strides[:] = powers
            flat = np.ascontiguousarray(tables).ravel()
            if tables.shape[1] != D**K:
                raise InvalidGraphError(f"tables need {D**K} entries per factor, got {tables.shape[1]}")
        else:
            for f, s in enumerate(scopes):
                k = len(s)
                scope[f, :k] = s
                strides[f, :k] = D ** np.arange(k - 1, -1, -1, dtype=np.int64)
            flat = np.concatenate(tables) if F else np.zeros(0)
            if flat.size != sizes.sum():
                raise InvalidGraphError("table sizes do not match scopes")

        if F:
            real = strides > 0
            if scope[real].min() < 0 or scope[real].max() >= n:
                raise InvalidGraphError(f"scope index outside [0, {n})")
            srt = np.sort(np.where(real, scope, -1 - np.arange(K)), axis=1)
            if np.any(srt[:, 1:] == srt[:, :-1]):
                raise InvalidGraphError("factor scopes must be duplicate-free")
        if not np.all(np.isfinite(flat)):
            raise InvalidGraphError("factor tables must be finite")
        if flat.size and flat.min() < 0:
            raise InvalidGraphError("factor energies must be non-negative")

        offsets = np.zeros(F, dtype=np.int64)
        if F:
            offsets[1:] = np.cumsum(sizes)[:-1]
            max_e = np.maximum.reduceat(flat, offsets) if flat.size else np.zeros(F)
        else:
            max_e = np.zeros(0)

        # CSR adjacency: for every (variable, factor) incidence remember the
        # variable's stride inside that factor's table.
        fac_of = np.repeat(np.arange(F, dtype=np.int64), K).reshape(F, K)
        real = strides > 0
        var_flat, fac_flat, stride_flat = scope[real], fac_of[real], strides[real]
        order = np.lexsort((fac_flat, var_flat))
        adj_fac = fac_flat[order]
        adj_stride = stride_flat[order]
        adj_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(var_flat, minlength=n), out=adj_ptr[1:])

        # Cumulative max-energy weights (global, and restarted per variable
        # segment) drive inverse-CDF sampling of Poisson count vectors.
        fac_cum = np.cumsum(max_e)
        seg_total = np.cumsum(max_e[adj_fac])
        seg_start = np.concatenate([[0.0], seg_total])[adj_ptr[:-1]]
        adj_cum = seg_total - np.repeat(seg_start, np.diff(adj_ptr))

        self._n, self._D = n, D
        self._scope, self._strides, self._offsets = scope, strides, offsets
        self._tables, self._max_energy = flat, max_e
        self._adj_ptr, self._adj_fac, self._adj_stride = adj_ptr, adj_fac, adj_stride
        self._fac_cum, self._adj_cum = fac_cum, adj_cum
        for a in (scope, strides, offsets, flat, max_e, adj_ptr, adj_fac, adj_stride, fac_cum, adj_cum):
            a.setflags(write=False)

    # -- basic properties -------------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    @property
    def domain_size(self) -> int:
        return self._D

    @property
    def num_factors(self) -> int:
        return len(self._offsets)

    @property
    def max_energies(self) -> np.ndarray:
        return self._max_energy

    def adjacency(self, i: int) -> np.ndarray:
        """Indices of the factors whose scope contains variable ``i`` (sorted)."""
        self._check_var(i)
        return self._adj_fac[self._adj_ptr[i] : self._adj_ptr[i + 1]]

    def degree(self, i: int) -> int:
        self._check_var(i)
        return int(self._adj_ptr[i + 1] - self._adj_ptr[i])

    def scope(self, f: int) -> tuple[int, ...]:
        row = self._scope[f][self._strides[f] > 0]
        return tuple(int(v) for v in row)

    def factor(self, f: int) -> Factor:
        k = len(self.scope(f))
        start = self._offsets[f]
        table = self._tables[start : start + self._D**k].reshape((self._D,) * k)
        return Factor(self.scope(f), table)

    @cached_property
    def factors(self) -> tuple[Factor, ...]:
        return tuple(self.factor(f) for f in range(self.num_factors))

    @cached_property
    def stats(self) -> GraphStats:
        return stats(self)

    def kernel_arrays(self) -> tuple:
        """Flat arrays consumed by the compiled kernels in :mod:`minigibbs._kernels`."""
        return (
            self._scope,
            self._strides,
            self._offsets,
            self._tables,
            self._max_energy,
            self._adj_ptr,
            self._adj_fac,
            self._adj_stride,
            self._fac_cum,
            self._adj_cum,
        )

    def _check_var(self, i) -> None:
        if not 0 <= int(i) < self._n:
            raise InvalidStateError(f"variable index {i} outside [0, {self._n})")

    def validate_state(self, x) -> np.ndarray:
        """Return ``x`` as an int64 array, raising :class:`InvalidStateError` if it does not fit."""
        arr = np.asarray(x)
        if arr.shape != (self._n,):
            raise InvalidStateError(f"state must have length {self._n}, got shape {arr.shape}")
        if arr.dtype.kind not in "iu":
            if not np.all(np.equal(np.mod(arr, 1), 0)):
                raise InvalidStateError("state entries must be integers")
        arr = arr.astype(np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self._D):
            raise InvalidStateError(f"state values must lie in [0, {self._D})")
        return arr

    def factor_values(self, x, factors=None) -> np.ndarray:
        """Energies ``phi(x)`` for the given factor indices (all factors by default)."""
        sel = slice(None) if factors is None else np.asarray(factors, dtype=np.int64)
        idx = self._offsets[sel] + (x[self._scope[sel]] * self._strides[sel]).sum(axis=1)
        return self._tables[idx]

    def __repr__(self) -> str:
        return f"FactorGraph(n={self._n}, domain_size={self._D}, num_factors={self.num_factors})"


def energy(graph: FactorGraph, x) -> float:
    """Total energy ``sum_phi phi(x)``."""
    x = graph.validate_state(x)
    return float(graph.factor_values(x).sum())


def energies(graph: FactorGraph, states: np.ndarray) -> np.ndarray:
    """Vectorised :func:`energy` over the rows of a ``(S, n)`` state array."""
    states = np.asarray(states, dtype=np.int64)
    scope, strides, offsets, tables = graph.kernel_arrays()[:4]
    if graph.num_factors == 0:
        return np.zeros(len(states))
    idx = offsets[None, :] + (states[:, scope] * strides[None]).sum(axis=2)
    return tables[idx].sum(axis=1)


def local_energy(graph: FactorGraph, i: int, x) -> float:
    """Energy restricted to the factors adjacent to variable ``i``."""
    x = graph.validate_state(x)
    return float(graph.factor_values(x, graph.adjacency(i)).sum())


def stats(graph: FactorGraph) -> GraphStats:
    """Compute ``Psi`` (total max energy), ``L`` (local max energy) and ``Delta`` (max degree)."""
    M = graph.max_energies
    _, _, _, _, _, adj_ptr, adj_fac, _, _, _ = graph.kernel_arrays()
    deg = np.diff(adj_ptr)
    owner = np.repeat(np.arange(graph.n), deg)
    local = np.bincount(owner, weights=M[adj_fac], minlength=graph.n)
    return GraphStats(
        total_max_energy=float(M.sum()),
        local_max_energy=float(local.max()) if local.size else 0.0,
        max_degree=int(deg.max()) if deg.size else 0,
    )


def num_states(graph: FactorGraph) -> int:
    return graph.domain_size**graph.n


def _check_cap(graph: FactorGraph, cap: int) -> None:
    if num_states(graph) > cap:
        raise StateSpaceTooLargeError(
            f"{graph.domain_size}^{graph.n} = {num_states(graph)} states exceeds cap {cap}"
        )


def enumerate_states(graph: FactorGraph, cap: int = DEFAULT_STATE_CAP) -> Iterator[np.ndarray]:
    """Yield every state once, in lexicographic order (last variable fastest)."""
    _check_cap(graph, cap)
    for tup in itertools.product(range(graph.domain_size), repeat=graph.n):
        yield np.array(tup, dtype=np.int64)


def all_states(graph: FactorGraph, cap: int = DEFAULT_STATE_CAP) -> np.ndarray:
    """All states as a ``(D**n, n)`` array in the order of :func:`enumerate_states`."""
    _check_cap(graph, cap)
    D, n = graph.domain_size, graph.n
    codes = np.arange(D**n, dtype=np.int64)
    powers = D ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (codes[:, None] // powers[None, :]) % D


def state_index(graph: FactorGraph, x) -> int:
    """Position of ``x`` in :func:`enumerate_states` order."""
    x = graph.validate_state(x)
    powers = graph.domain_size ** np.arange(graph.n - 1, -1, -1, dtype=np.int64)
    return int(x @ powers)


# -- text format ----------------------------------------------------------------


def _data_lines(text: str) -> Iterator[str]:
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            yield line


def parse_graph(text: str) -> FactorGraph:
    """Parse the line-oriented graph format (1-based variable indices)."""
    lines = _data_lines(text)
    try:
        head = next(lines).split()
        n, D = int(head[0]), int(head[1])
        F = int(next(lines).split()[0])
        scopes, tables = [], []
        for f in range(F):
            fields = [int(t) for t in next(lines).split()]
            k = fields[0]
            if len(fields) != k + 1:
                raise InvalidGraphError(f"factor {f + 1}: scope line declares {k} variables, lists {len(fields) - 1}")
            values = np.array([float(t) for t in next(lines).split()])
            if values.size != D**k:
                raise InvalidGraphError(f"factor {f + 1}: expected {D**k} table values, got {values.size}")
            scopes.append([v - 1 for v in fields[1:]])
            tables.append(values)
    except StopIteration:
        raise InvalidGraphError("unexpected end of graph file") from None
    except (IndexError, ValueError) as exc:
        if isinstance(exc, InvalidGraphError):
            raise
        raise InvalidGraphError(f"malformed graph file: {exc}") from None
    if next(lines, None) is not None:
        raise InvalidGraphError("trailing data after the last factor")
    return FactorGraph(n, D, [Factor(tuple(s), t.reshape((D,) * len(s))) for s, t in zip(scopes, tables)])


def read_graph(path: str | Path) -> FactorGraph:
    return parse_graph(Path(path).read_text())


def format_graph(graph: FactorGraph) -> str:
    out = [f"{graph.n} {graph.domain_size}", str(graph.num_factors)]
    for f in range(graph.num_factors):
        sc = graph.scope(f)
        out.append(" ".join([str(len(sc))] + [str(v + 1) for v in sc]))
        out.append(" ".join(repr(float(v)) for v in graph.factor(f).table.ravel()))
    return "\n".join(out) + "\n"


def write_graph(graph: FactorGraph, path: str | Path) -> None:
    Path(path).write_text(format_graph(graph))


def graph_from_tables(n: int, domain_size: int, factors: Sequence[tuple[Sequence[int], Sequence[float]]]) -> FactorGraph:
    """Convenience constructor from ``(scope, flat_table)`` pairs (0-based scopes)."""
    D = domain_size
    built = []
    for f, (s, t) in enumerate(factors):
        t = np.asarray(t, dtype=float)
        if t.size != D ** len(s):
            raise InvalidGraphError(f"factor {f}: expected {D ** len(s)} table values, got {t.size}")
        built.append(Factor(tuple(s), t.reshape((D,) * len(s))))
    return FactorGraph(n, D, built)
