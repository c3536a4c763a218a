"""Dense Ising and Potts models with Gaussian-kernel couplings.

Every pair of sites ``i < j`` gets one factor with interaction
``A_ij = exp(-gamma * |r_i - r_j|^2)``, where ``r`` are the site coordinates.
Ising spins are encoded as values ``0 -> +1`` and ``1 -> -1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .factor_graph import FactorGraph


@dataclass(frozen=True)
class GridModelConfig:
    N: int
    beta: float
    gamma: float = 1.5
    domain_size: int = 2

    def __post_init__(self):
        if self.N < 1:
            raise InvalidParameterError(f"grid side must be >= 1, got {self.N}")
        if self.beta < 0:
            raise InvalidParameterError(f"beta must be >= 0, got {self.beta}")
        if not self.gamma > 0:
            raise InvalidParameterError(f"kernel gamma must be > 0, got {self.gamma}")
        if self.domain_size < 2:
            raise InvalidParameterError(f"domain size must be >= 2, got {self.domain_size}")


def grid_coordinates(N: int) -> np.ndarray:
    """Row-major ``(N*N, 2)`` integer coordinates of an ``N x N`` grid."""
    r, c = np.divmod(np.arange(N * N), N)
    return np.stack([r, c], axis=1).astype(float)


def line_coordinates(n: int) -> np.ndarray:
    """Coordinates of ``n`` sites spaced one apart on a line."""
    return np.stack([np.zeros(n), np.arange(n, dtype=float)], axis=1)


def kernel_pairs(coords: np.ndarray, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """All pairs ``i < j`` and their couplings ``exp(-gamma * d_ij^2)``."""
    i, j = np.triu_indices(len(coords), k=1)
    d2 = ((coords[i] - coords[j]) ** 2).sum(axis=1)
    return np.stack([i, j], axis=1), np.exp(-gamma * d2)


def ising_from_couplings(n: int, pairs: np.ndarray, couplings: np.ndarray, beta: float) -> FactorGraph:
    """Pair factors ``beta * A_ij * (s_i s_j + 1)``: ``2 beta A_ij`` if aligned, else 0."""
    eye = np.eye(2).ravel()
    tables = 2.0 * beta * np.asarray(couplings)[:, None] * eye[None, :]
    return FactorGraph.from_arrays(n, 2, np.asarray(pairs).reshape(-1, 2), tables)


def potts_from_couplings(n: int, pairs: np.ndarray, couplings: np.ndarray, beta: float,
                         domain_size: int) -> FactorGraph:
    """Pair factors ``beta * A_ij * [x_i == x_j]``."""
    eye = np.eye(domain_size).ravel()
    tables = beta * np.asarray(couplings)[:, None] * eye[None, :]
    return FactorGraph.from_arrays(n, domain_size, np.asarray(pairs).reshape(-1, 2), tables)


def make_ising(cfg: GridModelConfig) -> FactorGraph:
    pairs, A = kernel_pairs(grid_coordinates(cfg.N), cfg.gamma)
    return ising_from_couplings(cfg.N * cfg.N, pairs, A, cfg.beta)


def make_potts(cfg: GridModelConfig) -> FactorGraph:
    pairs, A = kernel_pairs(grid_coordinates(cfg.N), cfg.gamma)
    return potts_from_couplings(cfg.N * cfg.N, pairs, A, cfg.beta, cfg.domain_size)


def make_ising_chain(n: int, beta: float, gamma: float = 1.5) -> FactorGraph:
    """Ising model on ``n`` sites in a row, with the same all-pairs kernel couplings."""
    pairs, A = kernel_pairs(line_coordinates(n), gamma)
    return ising_from_couplings(n, pairs, A, beta)


def make_potts_chain(n: int, beta: float, domain_size: int, gamma: float = 1.5) -> FactorGraph:
    pairs, A = kernel_pairs(line_coordinates(n), gamma)
    return potts_from_couplings(n, pairs, A, beta, domain_size)


def spins(x) -> np.ndarray:
    """Map Ising values ``{0, 1}`` to spins ``{+1, -1}``."""
    return 1 - 2 * np.asarray(x)
