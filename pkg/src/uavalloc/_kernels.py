"""Hot numeric kernels for the log-domain barrier solver.

All posynomial constraints of a problem are packed into flat arrays (see
``_solver.PackedPosynomials``).  The kernels evaluate, for every constraint
c with terms k and a dense local exponent block A_c,

    F_c(y) = log sum_k exp(logc_k + A_c[k] @ y[local_vars_c]),

and optionally accumulate the gradient/Hessian of either a weighted
objective term or the log-barrier sum(-log(-F_c)).

Each kernel exists twice: a numba ``@njit`` build (default) and a pure-numpy
fallback.  Set ``UAVALLOC_DISABLE_NUMBA=1`` to select the fallback; both
paths compute the same quantities and are compared by
``benchmarks/bench_kernels.py``.
"""

import os

import numpy as np

NUMBA_DISABLED = os.environ.get("UAVALLOC_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")

MODE_OBJECTIVE = 0
MODE_BARRIER = 1


# ---------------------------------------------------------------------------
# scalar implementations (compiled with numba below)
# ---------------------------------------------------------------------------

def _values_impl(y, term_ptr, term_logc, var_ptr, var_idx, mat_ptr, a_flat, out):
    n_cons = term_ptr.shape[0] - 1
    for c in range(n_cons):
        t0 = term_ptr[c]
        t1 = term_ptr[c + 1]
        v0 = var_ptr[c]
        v1 = var_ptr[c + 1]
        k = v1 - v0
        base = mat_ptr[c]
        hi = -np.inf
        for t in range(t1 - t0):
            acc = term_logc[t0 + t]
            row = base + t * k
            for j in range(k):
                acc += a_flat[row + j] * y[var_idx[v0 + j]]
            if acc > hi:
                hi = acc
        tot = 0.0
        for t in range(t1 - t0):
            acc = term_logc[t0 + t]
            row = base + t * k
            for j in range(k):
                acc += a_flat[row + j] * y[var_idx[v0 + j]]
            tot += np.exp(acc - hi)
        out[c] = hi + np.log(tot)
    return out


def _oracle_impl(y, term_ptr, term_logc, var_ptr, var_idx, mat_ptr, a_flat,
                 mode, weight, grad, coo_data, coo_off, tvals, u, srow):
    """Accumulate value/grad/Hessian-blocks for all packed constraints.

    mode OBJECTIVE: adds weight * F_c terms (posynomial objective).
    mode BARRIER:   adds -log(-F_c) terms; requires every F_c < 0, else
                    returns +inf immediately.

    Hessian contributions are written as k*k row-major blocks into
    ``coo_data`` at ``coo_off[c]``; the matching row/col indices are
    precomputed at pack time and duplicates are summed by the sparse (or
    dense) assembler.  ``tvals``/``u``/``srow`` are scratch buffers.
    """
    n_cons = term_ptr.shape[0] - 1
    phi = 0.0
    for c in range(n_cons):
        t0 = term_ptr[c]
        t1 = term_ptr[c + 1]
        v0 = var_ptr[c]
        v1 = var_ptr[c + 1]
        k = v1 - v0
        nt = t1 - t0
        base = mat_ptr[c]
        off = coo_off[c]
        hi = -np.inf
        for t in range(nt):
            acc = term_logc[t0 + t]
            row = base + t * k
            for j in range(k):
                acc += a_flat[row + j] * y[var_idx[v0 + j]]
            tvals[t] = acc
            if acc > hi:
                hi = acc
        tot = 0.0
        for t in range(nt):
            tvals[t] = np.exp(tvals[t] - hi)
            tot += tvals[t]
        fval = hi + np.log(tot)
        for j in range(k):
            u[j] = 0.0
        for t in range(nt):
            sig = tvals[t] / tot
            tvals[t] = sig
            row = base + t * k
            for j in range(k):
                u[j] += sig * a_flat[row + j]
        for j in range(k * k):
            coo_data[off + j] = 0.0
        if mode == MODE_OBJECTIVE:
            phi += weight * fval
            for j in range(k):
                grad[var_idx[v0 + j]] += weight * u[j]
            for t in range(nt):
                sig = tvals[t] * weight
                row = base + t * k
                for j1 in range(k):
                    srow[j1] = sig * a_flat[row + j1]
                for j1 in range(k):
                    for j2 in range(k):
                        coo_data[off + j1 * k + j2] += srow[j1] * a_flat[row + j2]
            for j1 in range(k):
                wu1 = weight * u[j1]
                for j2 in range(k):
                    coo_data[off + j1 * k + j2] -= wu1 * u[j2]
        else:
            if fval >= 0.0:
                return np.inf
            s = -fval
            phi += -np.log(s)
            inv_s = 1.0 / s
            for j in range(k):
                grad[var_idx[v0 + j]] += inv_s * u[j]
            for t in range(nt):
                sig = tvals[t] * inv_s
                row = base + t * k
                for j1 in range(k):
                    srow[j1] = sig * a_flat[row + j1]
                for j1 in range(k):
                    for j2 in range(k):
                        coo_data[off + j1 * k + j2] += srow[j1] * a_flat[row + j2]
            coef = inv_s * inv_s - inv_s
            for j1 in range(k):
                cu1 = coef * u[j1]
                for j2 in range(k):
                    coo_data[off + j1 * k + j2] += cu1 * u[j2]
    return phi


# ---------------------------------------------------------------------------
# vectorized numpy fallbacks (same outputs, per-constraint numpy ops)
# ---------------------------------------------------------------------------

def _values_numpy(y, term_ptr, term_logc, var_ptr, var_idx, mat_ptr, a_flat, out):
    n_cons = term_ptr.shape[0] - 1
    for c in range(n_cons):
        t0, t1 = term_ptr[c], term_ptr[c + 1]
        v0, v1 = var_ptr[c], var_ptr[c + 1]
        k = v1 - v0
        a = a_flat[mat_ptr[c]:mat_ptr[c] + (t1 - t0) * k].reshape(t1 - t0, k)
        t = term_logc[t0:t1] + a @ y[var_idx[v0:v1]]
        hi = t.max()
        out[c] = hi + np.log(np.exp(t - hi).sum())
    return out


def _oracle_numpy(y, term_ptr, term_logc, var_ptr, var_idx, mat_ptr, a_flat,
                  mode, weight, grad, coo_data, coo_off, tvals, u, srow):
    n_cons = term_ptr.shape[0] - 1
    phi = 0.0
    for c in range(n_cons):
        t0, t1 = term_ptr[c], term_ptr[c + 1]
        v0, v1 = var_ptr[c], var_ptr[c + 1]
        k = v1 - v0
        nt = t1 - t0
        vids = var_idx[v0:v1]
        a = a_flat[mat_ptr[c]:mat_ptr[c] + nt * k].reshape(nt, k)
        t = term_logc[t0:t1] + a @ y[vids]
        hi = t.max()
        ex = np.exp(t - hi)
        tot = ex.sum()
        fval = hi + np.log(tot)
        sig = ex / tot
        uu = a.T @ sig
        m = (a.T * sig) @ a
        if mode == MODE_OBJECTIVE:
            phi += weight * fval
            grad[vids] += weight * uu
            block = weight * (m - np.outer(uu, uu))
        else:
            if fval >= 0.0:
                return np.inf
            s = -fval
            phi += -np.log(s)
            grad[vids] += uu / s
            block = m / s + (1.0 / (s * s) - 1.0 / s) * np.outer(uu, uu)
        coo_data[coo_off[c]:coo_off[c] + k * k] = block.ravel()
    return phi


values_numpy = _values_numpy
oracle_numpy = _oracle_numpy

if not NUMBA_DISABLED:
    from numba import njit

    values_numba = njit(cache=True)(_values_impl)
    oracle_numba = njit(cache=True)(_oracle_impl)

    values = values_numba
    oracle = oracle_numba
    USING_NUMBA = True
else:
    values = values_numpy
    oracle = oracle_numpy
    USING_NUMBA = False
