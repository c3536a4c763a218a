"""Compiled inner loops for the samplers and estimators.

Everything here works on the flat arrays returned by
``FactorGraph.kernel_arrays()`` (bundled as the tuple ``G``) and on scratch
buffers from :func:`make_workspace` (the tuple ``W``).  States are int64
arrays of 0-based values and are modified in place.  Randomness always comes
from an explicit ``numpy.random.Generator``.

Work is counted in factor-table evaluations.
"""

import numpy as np
from numba import njit

GIBBS = 0
MIN_GIBBS = 1
LOCAL = 2
MGPMH = 3
DOUBLE_MIN = 4

TWO_POINT = 0
POISSON = 1


def make_workspace(graph):
    """Scratch buffers sized for ``graph``; one workspace per running chain."""
    D = graph.domain_size
    F = graph.num_factors
    nnz = len(graph.kernel_arrays()[6])
    maxdeg = max(graph.stats.max_degree, 1)
    return (
        np.zeros(D),  # energies per candidate value
        np.zeros(D),  # softmax weights
        np.zeros(max(F, 1), dtype=np.int64),  # global count scratch
        np.zeros(max(F, 1), dtype=np.int64),  # global selected indices
        np.zeros(max(F, 1), dtype=np.int64),  # global selected counts
        np.zeros(max(nnz, 1), dtype=np.int64),  # adjacency count scratch
        np.zeros(max(nnz, 1), dtype=np.int64),  # adjacency selected positions
        np.zeros(max(nnz, 1), dtype=np.int64),  # adjacency selected counts
        np.zeros(maxdeg, dtype=np.int64),  # partial Fisher-Yates buffer
        np.zeros(1, dtype=np.int64),  # factors drawn into minibatches this step
    )


@njit(cache=True)
def factor_index(f, x, scope, strides, offsets):
    idx = offsets[f]
    for k in range(scope.shape[1]):
        s = strides[f, k]
        if s == 0:
            break
        idx += x[scope[f, k]] * s
    return idx


@njit(cache=True)
def total_energy(x, G):
    scope, strides, offsets, tables = G[0], G[1], G[2], G[3]
    z = 0.0
    for f in range(offsets.shape[0]):
        z += tables[factor_index(f, x, scope, strides, offsets)]
    return z


@njit(cache=True)
def local_energies(i, x, D, G, out):
    """Fill ``out[u]`` with the local energy of variable ``i`` set to ``u``."""
    scope, strides, offsets, tables = G[0], G[1], G[2], G[3]
    adj_ptr, adj_fac, adj_stride = G[5], G[6], G[7]
    for u in range(D):
        out[u] = 0.0
    lo, hi = adj_ptr[i], adj_ptr[i + 1]
    for p in range(lo, hi):
        s = adj_stride[p]
        base = factor_index(adj_fac[p], x, scope, strides, offsets) - x[i] * s
        for u in range(D):
            out[u] += tables[base + u * s]
    return D * (hi - lo)


@njit(cache=True)
def categorical(eps, D, w, rng):
    """Sample ``v`` with probability proportional to ``exp(eps[v])`` (max-shifted)."""
    m = eps[0]
    for u in range(1, D):
        if eps[u] > m:
            m = eps[u]
    tot = 0.0
    for u in range(D):
        w[u] = np.exp(eps[u] - m)
        tot += w[u]
    r = rng.random() * tot
    acc = 0.0
    for u in range(D):
        acc += w[u]
        if r < acc:
            return u
    # r landed on the rounding edge; fall back to the last value with mass
    for u in range(D - 1, -1, -1):
        if w[u] > 0.0:
            return u
    return D - 1


@njit(cache=True)
def poisson_vector(total_rate, cum, lo, hi, rng, scratch, out_idx, out_cnt):
    """Independent Poisson counts with rates ``total_rate * w_k / sum(w)``.

    ``cum[lo:hi]`` holds cumulative weights restarted at ``lo``.  When the
    expected total is at most the vector length, draw ``B ~ Poisson(total)``
    and place ``B`` trials by inverse-CDF search (ties go to the lower
    index); otherwise draw each coordinate directly.  Writes the non-zero
    positions and counts to ``out_idx``/``out_cnt`` and returns how many.
    """
    m = hi - lo
    if m <= 0 or total_rate <= 0.0:
        return 0
    W = cum[hi - 1]
    if W <= 0.0:
        return 0
    nnz = 0
    if total_rate <= m:
        B = rng.poisson(total_rate)
        for _ in range(B):
            t = rng.random() * W
            a, z = lo, hi - 1
            while a < z:
                mid = (a + z) // 2
                if cum[mid] > t:
                    z = mid
                else:
                    a = mid + 1
            k = a
            if cum[k] <= t:
                while k > lo and cum[k] == cum[k - 1]:
                    k -= 1
            if scratch[k] == 0:
                out_idx[nnz] = k
                nnz += 1
            scratch[k] += 1
        for j in range(nnz):
            out_cnt[j] = scratch[out_idx[j]]
            scratch[out_idx[j]] = 0
    else:
        prev = 0.0
        for k in range(lo, hi):
            wk = cum[k] - prev
            prev = cum[k]
            if wk > 0.0:
                c = rng.poisson(total_rate * wk / W)
                if c > 0:
                    out_idx[nnz] = k
                    out_cnt[nnz] = c
                    nnz += 1
    return nnz


@njit(cache=True)
def poisson_log_estimate(x, lam, psi, G, idx, cnt, nnz):
    """Bias-adjusted estimate ``sum s_phi log1p(psi phi(x) / (lam M_phi))``."""
    scope, strides, offsets, tables, max_e = G[0], G[1], G[2], G[3], G[4]
    z = 0.0
    for j in range(nnz):
        f = idx[j]
        phi = tables[factor_index(f, x, scope, strides, offsets)]
        z += cnt[j] * np.log1p(psi * phi / (lam * max_e[f]))
    return z


@njit(cache=True)
def estimate(est_kind, est_param, psi, x, G, W, rng):
    """One draw from a full-graph energy estimator; returns ``(value, evals)``."""
    if est_kind == TWO_POINT:
        z = total_energy(x, G)
        evals = G[2].shape[0]
        if est_param > 0.0:
            if rng.random() < 0.5:
                z -= est_param
            else:
                z += est_param
        return z, evals
    fac_cum = G[8]
    nnz = poisson_vector(est_param, fac_cum, 0, fac_cum.shape[0], rng, W[2], W[3], W[4])
    for j in range(nnz):
        W[9][0] += W[4][j]
    return poisson_log_estimate(x, est_param, psi, G, W[3], W[4], nnz), nnz


@njit(cache=True)
def minibatch_proposal(i, x, D, lam, L, exact_counts, G, W, rng):
    """Weighted local estimates ``eps[u]`` for MGPMH-style proposals; returns evals."""
    scope, strides, offsets, tables, max_e = G[0], G[1], G[2], G[3], G[4]
    adj_ptr, adj_fac, adj_stride, adj_cum = G[5], G[6], G[7], G[9]
    eps = W[0]
    if exact_counts:
        return local_energies(i, x, D, G, eps)
    for u in range(D):
        eps[u] = 0.0
    lo, hi = adj_ptr[i], adj_ptr[i + 1]
    if hi == lo or L <= 0.0:
        return 0
    total = lam * adj_cum[hi - 1] / L
    nnz = poisson_vector(total, adj_cum, lo, hi, rng, W[5], W[6], W[7])
    for j in range(nnz):
        W[9][0] += W[7][j]
        p = W[6][j]
        f = adj_fac[p]
        wgt = W[7][j] * L / (lam * max_e[f])
        s = adj_stride[p]
        base = factor_index(f, x, scope, strides, offsets) - x[i] * s
        for u in range(D):
            eps[u] += wgt * tables[base + u * s]
    return D * nnz


@njit(cache=True)
def local_energy_change(i, x, v, G):
    """``sum_{phi in A[i]} phi(x with x_i=v) - phi(x)``; one evaluation per factor."""
    scope, strides, offsets, tables = G[0], G[1], G[2], G[3]
    adj_ptr, adj_fac, adj_stride = G[5], G[6], G[7]
    xi = x[i]
    d = 0.0
    for p in range(adj_ptr[i], adj_ptr[i + 1]):
        s = adj_stride[p]
        base = factor_index(adj_fac[p], x, scope, strides, offsets) - xi * s
        d += tables[base + v * s] - tables[base + xi * s]
    return d


@njit(cache=True)
def step(kind, lam, batch, est_kind, est_param, exact_counts, psi, L, G, W, x, cache, rng):
    """Advance one iteration in place.

    Returns ``(variable, proposed value, accepted, evals, cache)``; the total
    minibatch count drawn during the step is left in ``W[9][0]``.
    """
    n = x.shape[0]
    W[9][0] = 0
    eps, w = W[0], W[1]
    D = eps.shape[0]
    i = rng.integers(0, n)
    xi = x[i]

    if kind == GIBBS:
        evals = local_energies(i, x, D, G, eps)
        v = categorical(eps, D, w, rng)
        x[i] = v
        return i, v, True, evals, cache

    if kind == MIN_GIBBS:
        evals = 0
        for u in range(D):
            if u == xi:
                continue
            x[i] = u
            val, e = estimate(est_kind, est_param, psi, x, G, W, rng)
            eps[u] = val
            evals += e
        eps[xi] = cache
        v = categorical(eps, D, w, rng)
        x[i] = v
        return i, v, True, evals, eps[v]

    if kind == LOCAL:
        scope, strides, offsets, tables = G[0], G[1], G[2], G[3]
        adj_ptr, adj_fac, adj_stride = G[5], G[6], G[7]
        perm = W[8]
        lo, hi = adj_ptr[i], adj_ptr[i + 1]
        deg = hi - lo
        b = min(batch, deg)
        for k in range(deg):
            perm[k] = lo + k
        for k in range(b):
            j = k + rng.integers(0, deg - k)
            t = perm[k]
            perm[k] = perm[j]
            perm[j] = t
        for u in range(D):
            eps[u] = 0.0
        for k in range(b):
            p = perm[k]
            s = adj_stride[p]
            base = factor_index(adj_fac[p], x, scope, strides, offsets) - xi * s
            for u in range(D):
                eps[u] += tables[base + u * s]
        if b > 0:
            scale = deg / b
            for u in range(D):
                eps[u] *= scale
        W[9][0] = b
        v = categorical(eps, D, w, rng)
        x[i] = v
        return i, v, True, D * b, cache

    # MGPMH and DoubleMIN share the minibatch-Gibbs proposal
    evals = minibatch_proposal(i, x, D, lam, L, exact_counts, G, W, rng)
    v = categorical(eps, D, w, rng)

    if kind == MGPMH:
        if v == xi:
            return i, v, True, evals, cache
        loga = local_energy_change(i, x, v, G) + eps[xi] - eps[v]
        evals += G[5][i + 1] - G[5][i]
        accept = loga >= 0.0 or rng.random() < np.exp(loga)
        if accept:
            x[i] = v
        return i, v, accept, evals, cache

    # DOUBLE_MIN
    x[i] = v
    xi_y, e2 = estimate(est_kind, est_param, psi, x, G, W, rng)
    x[i] = xi
    evals += e2
    loga = xi_y - cache + eps[xi] - eps[v]
    accept = loga >= 0.0 or rng.random() < np.exp(loga)
    if accept:
        x[i] = v
        return i, v, True, evals, xi_y
    return i, v, False, evals, cache


@njit(cache=True)
def run_steps(kind, lam, batch, est_kind, est_param, exact_counts, psi, L, G, W, x, cache, rng,
              rec_i, rec_v, rec_acc, rec_evals, rec_cache, rec_batch):
    """Run ``len(rec_i)`` steps, recording each step; returns the final cache."""
    for t in range(rec_i.shape[0]):
        i, v, acc, ev, cache = step(kind, lam, batch, est_kind, est_param, exact_counts, psi, L, G, W, x, cache, rng)
        rec_i[t] = i
        rec_v[t] = v
        rec_acc[t] = acc
        rec_evals[t] = ev
        rec_cache[t] = cache
        rec_batch[t] = W[9][0]
    return cache


@njit(cache=True)
def repeat_single_step(kind, lam, batch, est_kind, est_param, exact_counts, psi, L, G, W, x0, cache0, rng,
                       powers, out_code, out_cache):
    """Take ``len(out_code)`` independent single steps from ``(x0, cache0)``."""
    x = x0.copy()
    for t in range(out_code.shape[0]):
        for k in range(x.shape[0]):
            x[k] = x0[k]
        _, _, _, _, c = step(kind, lam, batch, est_kind, est_param, exact_counts, psi, L, G, W, x, cache0, rng)
        code = 0
        for k in range(x.shape[0]):
            code += x[k] * powers[k]
        out_code[t] = code
        out_cache[t] = c


@njit(cache=True)
def replay_codes(x0, powers, rec_i, rec_v, rec_acc, out_code):
    """State codes visited along a recorded trajectory."""
    code = 0
    x = x0.copy()
    for k in range(x.shape[0]):
        code += x[k] * powers[k]
    for t in range(rec_i.shape[0]):
        if rec_acc[t]:
            i = rec_i[t]
            code += (rec_v[t] - x[i]) * powers[i]
            x[i] = rec_v[t]
        out_code[t] = code


@njit(cache=True)
def accumulate_marginals(counts, since, x, t0, rec_i, rec_v, rec_acc):
    """Fold a trajectory chunk into per-variable value-occupancy counts.

    Sample ``t0 + t + 1`` is the state after step ``t`` of the chunk.
    ``since[j]`` is the first sample index at which variable ``j`` took its
    current value; counts for the current values are settled by
    :func:`flush_marginals`.
    """
    for t in range(rec_i.shape[0]):
        if rec_acc[t]:
            i = rec_i[t]
            v = rec_v[t]
            if v != x[i]:
                s = t0 + t + 1
                counts[i, x[i]] += s - since[i]
                since[i] = s
                x[i] = v


@njit(cache=True)
def flush_marginals(counts, since, x, upto):
    """Settle occupancy of current values through sample index ``upto``."""
    for j in range(x.shape[0]):
        counts[j, x[j]] += upto + 1 - since[j]
        since[j] = upto + 1


@njit(cache=True)
def poisson_estimator_draws(states, lam, psi, G, W, rng, out):
    """``out[d, s]``: estimator draw ``d`` evaluated at ``states[s]``, with one
    shared count vector per draw."""
    fac_cum = G[8]
    for d in range(out.shape[0]):
        nnz = poisson_vector(lam, fac_cum, 0, fac_cum.shape[0], rng, W[2], W[3], W[4])
        for s in range(states.shape[0]):
            out[d, s] = poisson_log_estimate(states[s], lam, psi, G, W[3], W[4], nnz)
