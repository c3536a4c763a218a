"""Brute-force analysis of samplers on small, enumerable graphs.

Builds transition matrices (exact where the kernel is a finite sum, Monte
Carlo otherwise), stationary distributions, detailed-balance residuals and
spectral gaps, and checks the gap inequalities between the minibatched
chains and their exact counterparts.

State spaces are ordered as in :func:`minigibbs.factor_graph.all_states`.
Augmented states ``(x, eps)`` are listed x-major, with the estimator's
support points in ascending order within each ``x``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import InvalidParameterError, NotReversibleError, PreconditionError, StateSpaceTooLargeError
from .estimators import TwoPointEstimator
from .factor_graph import FactorGraph, all_states, energies
from .samplers import MGPMH, ChainRunner, ChainState, DoubleMinGibbs, Sampler, _kernel_args

DEFAULT_AUGMENTED_CAP = 4096


@dataclass
class TransitionMatrix:
    """Row-stochastic matrix over an ordered list of (possibly augmented) states.

    ``states`` rows are assignments; ``energies`` holds the cached estimate
    of each augmented state (``None`` for plain chains).  ``trials`` is the
    number of samples per row for Monte Carlo estimates, ``None`` if exact.
    """

    states: np.ndarray
    probs: np.ndarray
    energies: Optional[np.ndarray] = None
    trials: Optional[int] = None

    def __post_init__(self):
        p = self.probs
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] != len(self.states):
            raise InvalidParameterError("transition matrix must be square and match the state list")

    @property
    def size(self) -> int:
        return len(self.states)

    def row_sum_error(self) -> float:
        return float(np.abs(self.probs.sum(axis=1) - 1).max())


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray  # descending
    spectral_gap: float


def brute_force_pi(graph: FactorGraph, cap: int = DEFAULT_AUGMENTED_CAP) -> np.ndarray:
    """Gibbs measure ``pi(x) ~ exp(energy(x))`` over all states."""
    z = energies(graph, all_states(graph, cap))
    w = np.exp(z - z.max())
    return w / w.sum()


def _powers(graph: FactorGraph) -> np.ndarray:
    return graph.domain_size ** np.arange(graph.n - 1, -1, -1, dtype=np.int64)


def exact_gibbs_matrix(graph: FactorGraph, cap: int = DEFAULT_AUGMENTED_CAP) -> TransitionMatrix:
    """Single-step Gibbs kernel ``T(x, y) = (1/n) exp(z(y)) / sum_w exp(z(x_{i->w}))``."""
    X = all_states(graph, cap)
    z = energies(graph, X)
    n, D = graph.n, graph.domain_size
    pw = _powers(graph)
    S = len(X)
    T = np.zeros((S, S))
    rows = np.arange(S)
    for i in range(n):
        # codes of x with coordinate i set to each w
        base = rows - X[:, i] * pw[i]
        nbr = base[:, None] + np.arange(D)[None, :] * pw[i]
        e = z[nbr]
        p = np.exp(e - e.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        np.add.at(T, (np.repeat(rows, D), nbr.ravel()), p.ravel() / n)
    return TransitionMatrix(X, T)


def augmented_states(graph: FactorGraph, estimator: TwoPointEstimator,
                     cap: int = DEFAULT_AUGMENTED_CAP) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(states, cached energies, mu_x(eps))`` for every augmented state."""
    X = all_states(graph, cap)
    pts, probs = zip(*(estimator.support(graph, x) for x in X))
    k = np.array([len(p) for p in pts])
    if len(X) * k.max() > cap:
        raise StateSpaceTooLargeError(f"augmented space of {int(k.sum())} states exceeds cap {cap}")
    return np.repeat(X, k, axis=0), np.concatenate(pts), np.concatenate(probs)


def augmented_pi(graph: FactorGraph, estimator: TwoPointEstimator,
                 cap: int = DEFAULT_AUGMENTED_CAP) -> np.ndarray:
    """``pi_bar(x, eps) ~ mu_x(eps) exp(eps)`` over :func:`augmented_states`."""
    _, eps, mu = augmented_states(graph, estimator, cap)
    w = mu * np.exp(eps - eps.max())
    return w / w.sum()


def exact_min_gibbs_matrix(graph: FactorGraph, estimator, cap: int = DEFAULT_AUGMENTED_CAP) -> TransitionMatrix:
    """Exact MIN-Gibbs kernel for a finite-support estimator.

    From ``(x, eps)``: choose ``i``, keep ``eps`` for the current value, draw
    independent estimates for the other ``D - 1`` values, and move to value
    ``v`` with probability ``exp(eps_v) / sum_w exp(eps_w)``.  The expectation
    over the off-coordinate estimates is an explicit sum over their joint
    support.
    """
    if not hasattr(estimator, "support"):
        raise InvalidParameterError("exact MIN-Gibbs matrix needs a finite-support estimator")
    states, eps, _ = augmented_states(graph, estimator, cap)
    X = all_states(graph, cap)
    pw = _powers(graph)
    n, D = graph.n, graph.domain_size
    supports = [estimator.support(graph, x) for x in X]
    first = np.concatenate([[0], np.cumsum([len(s[0]) for s in supports])])  # augmented index of (x, 0)

    S = len(states)
    T = np.zeros((S, S))
    codes = states @ pw
    for r in range(S):
        x, c, e_cur = states[r], int(codes[r]), eps[r]
        for i in range(n):
            xi = x[i]
            others = [w for w in range(D) if w != xi]
            targets = [c + (w - xi) * pw[i] for w in others]
            choices = [range(len(supports[t][0])) for t in targets]
            for combo in itertools.product(*choices):
                p_combo = 1.0
                e = np.empty(D)
                e[xi] = e_cur
                for w, t, k in zip(others, targets, combo):
                    e[w] = supports[t][0][k]
                    p_combo *= supports[t][1][k]
                rho = np.exp(e - e.max())
                rho /= rho.sum()
                T[r, r] += p_combo * rho[xi] / n
                for w, t, k in zip(others, targets, combo):
                    T[r, first[t] + k] += p_combo * rho[w] / n
    return TransitionMatrix(states, T, energies=eps)


def empirical_matrix(graph: FactorGraph, sampler: Sampler, trials: int, rng: np.random.Generator,
                     cap: int = DEFAULT_AUGMENTED_CAP) -> TransitionMatrix:
    """Monte Carlo transition matrix: ``trials`` independent single steps from every state.

    Augmented samplers must use a finite-support (two-point) estimator; the
    augmented state space is then enumerated from it.
    """
    if trials < 1:
        raise InvalidParameterError("need at least one trial per row")
    pw = _powers(graph)
    if sampler.augmented:
        est = sampler.estimator
        if not isinstance(est, TwoPointEstimator):
            raise InvalidParameterError("empirical augmented matrices need a two-point estimator")
        states, eps, _ = augmented_states(graph, est, cap)
        X = all_states(graph, cap)
        z = energies(graph, X)
        per_x = 1 if est.delta == 0 else 2
    else:
        states = all_states(graph, cap)
        eps = None
    S = len(states)
    args = _kernel_args(graph, sampler)
    G = graph.kernel_arrays()
    ws = K.make_workspace(graph)
    T = np.zeros((S, S))
    code_out = np.empty(trials, dtype=np.int64)
    cache_out = np.empty(trials)
    for r in range(S):
        cache0 = float(eps[r]) if eps is not None else 0.0
        K.repeat_single_step(*args, G, ws, states[r].copy(), cache0, rng, pw, code_out, cache_out)
        if sampler.augmented:
            col = code_out * per_x
            if per_x == 2:
                col = col + (cache_out > z[code_out])
        else:
            col = code_out
        T[r] = np.bincount(col, minlength=S) / trials
    return TransitionMatrix(states, T, energies=eps, trials=trials)


def stationary_distribution(T: TransitionMatrix | np.ndarray) -> np.ndarray:
    """Left eigenvector of ``T`` for eigenvalue 1, normalised to sum to 1."""
    P = T.probs if isinstance(T, TransitionMatrix) else np.asarray(T)
    S = len(P)
    A = np.vstack([P.T - np.eye(S), np.ones((1, S))])
    b = np.zeros(S + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0, None)
    return pi / pi.sum()


def check_reversibility(T: TransitionMatrix | np.ndarray, pi) -> float:
    """Largest detailed-balance residual ``|pi(x) T(x,y) - pi(y) T(y,x)|``."""
    P = T.probs if isinstance(T, TransitionMatrix) else np.asarray(T)
    pi = np.asarray(pi)
    if P.shape != (len(pi), len(pi)):
        raise InvalidParameterError("matrix and distribution sizes differ")
    flow = pi[:, None] * P
    return float(np.abs(flow - flow.T).max())


def empirical_reversibility_tolerance(T: TransitionMatrix, pi, k: float = 3.0) -> np.ndarray:
    """Per-pair tolerance: ``k`` binomial standard errors of the flow difference."""
    P, pi = T.probs, np.asarray(pi)
    var = pi[:, None] ** 2 * P * (1 - P) / T.trials
    return k * np.sqrt(var + var.T)


def _symmetrized(P: np.ndarray, pi: np.ndarray) -> np.ndarray:
    s = np.sqrt(pi)
    A = s[:, None] * P / s[None, :]
    return (A + A.T) / 2


def spectral_gap(T: TransitionMatrix | np.ndarray, pi, tol: float | np.ndarray = 1e-9) -> SpectrumReport:
    """Eigenvalues and gap ``1 - lambda_2`` of a chain reversible w.r.t. ``pi``.

    Works on ``Diag(pi)^(1/2) T Diag(pi)^(-1/2)``, which is symmetric for a
    reversible chain; the symmetric part is taken so eigenvalues stay real.
    ``tol`` may be a scalar or a per-pair array.
    """
    P = T.probs if isinstance(T, TransitionMatrix) else np.asarray(T, dtype=float)
    pi = np.asarray(pi, dtype=float)
    flow = pi[:, None] * P
    resid = np.abs(flow - flow.T)
    if np.any(resid > tol):
        raise NotReversibleError(f"detailed balance residual {resid.max():.3g} exceeds tolerance")
    lam = np.linalg.eigvalsh(_symmetrized(P, pi))[::-1]
    gap = float(lam[0] - lam[1]) if len(lam) > 1 else 0.0
    return SpectrumReport(lam, gap)


def gap_noise(T: TransitionMatrix, pi) -> float:
    """Bound on the gap error of a Monte Carlo matrix: ``2 ||E||_F`` with ``E`` the
    entrywise binomial standard error of the symmetrised matrix (Weyl)."""
    if T.trials is None:
        return 0.0
    P, pi = T.probs, np.asarray(pi)
    var = (pi[:, None] / pi[None, :]) * P * (1 - P) / T.trials
    return 2.0 * float(np.sqrt(((var + var.T) / 4).sum()))


def mixing_time_bound(gamma: float, pi_min: float, eps: float) -> float:
    """``(1/gamma) * log(1 / (eps * pi_min))``."""
    if not gamma > 0:
        raise InvalidParameterError(f"spectral gap must be positive, got {gamma}")
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    if not 0 < pi_min <= 1:
        raise InvalidParameterError(f"pi_min must lie in (0, 1], got {pi_min}")
    return math.log(1 / (eps * pi_min)) / gamma


# -- gap inequality checks ------------------------------------------------------


@dataclass
class GapCheckConfig:
    deltas: Sequence[float] = (0.1, 0.3)
    lambdas: Optional[Sequence[float]] = None  # defaults to (L^2, 4 L^2)
    trials: int = 100_000
    sigmas: float = 3.0  # Monte Carlo slack, in noise-bound units
    seed: int = 0
    checks: Sequence[str] = ("min-gibbs", "mgpmh", "double-min")


@dataclass
class GapBoundResult:
    chain: str
    gamma_bar: float
    gamma: float
    bound_factor: float
    satisfied: bool
    slack: float = 0.0
    note: str = ""
    extra: dict = field(default_factory=dict)


def verify_gap_bounds(graph: FactorGraph, config: GapCheckConfig = GapCheckConfig()) -> list[GapBoundResult]:
    """Check the spectral-gap inequalities on ``graph``.

    * MIN-Gibbs with a two-point estimator vs. Gibbs: ``gap >= exp(-6 delta) gap_gibbs``
      (exact matrices; whether ``exp(-5 delta)`` also holds is recorded in ``extra``).
    * MGPMH vs. Gibbs: ``gap >= exp(-L^2 / lam) gap_gibbs`` for ``lam >= L``
      (Monte Carlo matrix for MGPMH).
    * DoubleMIN-Gibbs vs. MGPMH at the same ``lam``: ``gap >= exp(-4 delta) gap_mgpmh``
      (both Monte Carlo).

    Monte Carlo results count as satisfied when the inequality holds after
    allowing ``sigmas`` times the gap noise bound of each matrix involved.
    """
    rng = np.random.default_rng(config.seed)
    L = graph.stats.local_max_energy
    lambdas = list(config.lambdas) if config.lambdas is not None else [L**2, 4 * L**2]
    results: list[GapBoundResult] = []

    pi = brute_force_pi(graph)
    gamma_gibbs = spectral_gap(exact_gibbs_matrix(graph), pi).spectral_gap

    if "min-gibbs" in config.checks:
        for delta in config.deltas:
            est = TwoPointEstimator(delta)
            Tm = exact_min_gibbs_matrix(graph, est)
            gbar = spectral_gap(Tm, augmented_pi(graph, est)).spectral_gap
            factor = math.exp(-6 * delta)
            results.append(GapBoundResult(
                f"min-gibbs[delta={delta:g}]", gbar, gamma_gibbs, factor,
                gbar >= factor * gamma_gibbs - 1e-12,
                extra={"exp(-5delta)_holds": gbar >= math.exp(-5 * delta) * gamma_gibbs - 1e-12},
            ))

    mgpmh_cache = {}

    def mgpmh_gap(lam):
        if lam not in mgpmh_cache:
            Tm = empirical_matrix(graph, MGPMH(lam), config.trials, rng)
            tol = empirical_reversibility_tolerance(Tm, pi, k=max(config.sigmas, 4.0))
            mgpmh_cache[lam] = (spectral_gap(Tm, pi, tol).spectral_gap, gap_noise(Tm, pi))
        return mgpmh_cache[lam]

    if "mgpmh" in config.checks:
        for lam in lambdas:
            if lam < L:
                raise PreconditionError(f"gap bound for MGPMH needs lambda >= L ({lam:g} < {L:g})")
    for lam in lambdas if {"mgpmh", "double-min"} & set(config.checks) else []:
        if "mgpmh" in config.checks:
            gbar, noise = mgpmh_gap(lam)
            factor = math.exp(-(L**2) / lam)
            slack = config.sigmas * noise
            results.append(GapBoundResult(f"mgpmh[lambda={lam:g}]", gbar, gamma_gibbs, factor,
                                          gbar >= factor * gamma_gibbs - slack, slack))
        if "double-min" in config.checks:
            g_ref, noise_ref = mgpmh_gap(lam)
            for delta in config.deltas:
                est = TwoPointEstimator(delta)
                Td = empirical_matrix(graph, DoubleMinGibbs(lam, est), config.trials, rng)
                pib = augmented_pi(graph, est)
                tol = empirical_reversibility_tolerance(Td, pib, k=max(config.sigmas, 4.0))
                gbar = spectral_gap(Td, pib, tol).spectral_gap
                factor = math.exp(-4 * delta)
                slack = config.sigmas * (gap_noise(Td, pib) + factor * noise_ref)
                results.append(GapBoundResult(f"double-min[lambda={lam:g},delta={delta:g}]", gbar, g_ref,
                                              factor, gbar >= factor * g_ref - slack, slack))
    return results


def gap_report_csv(results: Sequence[GapBoundResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["chain", "gamma_bar", "gamma", "bound_factor", "satisfied"])
    for r in results:
        w.writerow([r.chain, f"{r.gamma_bar:.10g}", f"{r.gamma:.10g}", f"{r.bound_factor:.10g}",
                    str(r.satisfied).lower()])
    return buf.getvalue()


def long_run_distribution(graph: FactorGraph, sampler: Sampler, state: ChainState, iterations: int,
                          rng: np.random.Generator, x_only: bool = False) -> np.ndarray:
    """Visit frequencies of a single long run over the (augmented) state space.

    Uses the ordering of :func:`all_states`, or of :func:`augmented_states`
    for augmented samplers with a two-point estimator.  ``x_only`` drops the
    cached energy and returns the distribution over assignments.
    """
    pw = _powers(graph)
    runner = ChainRunner(graph, sampler, state, rng)
    x0 = runner.x.copy()
    tr = runner.advance(iterations)
    codes = np.empty(iterations, dtype=np.int64)
    K.replay_codes(x0, pw, tr.variable, tr.value, tr.accepted, codes)
    S = graph.domain_size**graph.n
    if x_only or not sampler.augmented:
        return np.bincount(codes, minlength=S) / iterations
    est = sampler.estimator
    if not isinstance(est, TwoPointEstimator):
        raise InvalidParameterError("augmented long-run distribution needs a two-point estimator")
    if est.delta == 0:
        return np.bincount(codes, minlength=S) / iterations
    z = energies(graph, all_states(graph))
    col = 2 * codes + (tr.cached_energy > z[codes])
    return np.bincount(col, minlength=2 * S) / iterations


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
