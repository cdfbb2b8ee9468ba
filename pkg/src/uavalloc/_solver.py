"""Log-domain convex machinery behind the GP solver.

A geometric program in log variables y = log x is a smooth convex program
whose objective and inequality constraints are log-sum-exp functions and
whose monomial equalities are affine rows.  ``PackedPosynomials`` stores a
set of such functions in flat arrays consumable by the kernels in
``_kernels``; ``barrier_solve`` runs a primal barrier method with damped
Newton steps on the packed program.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from . import _kernels

# switch the Newton system to a sparse factorization above this size; the
# barrier Hessians here stay fastest with dense Cholesky well past n=1000
SPARSE_THRESHOLD = 1400


class PackedPosynomials:
    """Flat-array form of a list of log-sum-exp functions.

    Constraint c has terms ``term_ptr[c]:term_ptr[c+1]``, local variables
    ``var_idx[var_ptr[c]:var_ptr[c+1]]`` and a dense (n_terms x n_local)
    exponent block stored row-major in ``a_flat`` at ``mat_ptr[c]``.
    """

    def __init__(self, n_vars, term_ptr, term_logc, var_ptr, var_idx, mat_ptr, a_flat):
        self.n_vars = n_vars
        self.term_ptr = term_ptr
        self.term_logc = term_logc
        self.var_ptr = var_ptr
        self.var_idx = var_idx
        self.mat_ptr = mat_ptr
        self.a_flat = a_flat
        self.n_cons = len(term_ptr) - 1
        counts = np.diff(var_ptr)
        self._coo_off = np.zeros(self.n_cons + 1, dtype=np.int64)
        np.cumsum(counts * counts, out=self._coo_off[1:])
        self._coo_data = np.zeros(self._coo_off[-1])
        rows = np.empty(self._coo_off[-1], dtype=np.int64)
        cols = np.empty(self._coo_off[-1], dtype=np.int64)
        for c in range(self.n_cons):
            vids = var_idx[var_ptr[c]:var_ptr[c + 1]]
            k = len(vids)
            off = self._coo_off[c]
            rows[off:off + k * k] = np.repeat(vids, k)
            cols[off:off + k * k] = np.tile(vids, k)
        self.coo_rows = rows
        self.coo_cols = cols
        nt_max = int(np.diff(term_ptr).max()) if self.n_cons else 1
        k_max = int(counts.max()) if self.n_cons else 1
        self._tvals = np.zeros(max(nt_max, 1))
        self._u = np.zeros(max(k_max, 1))
        self._srow = np.zeros(max(k_max, 1))
        self._vals = np.zeros(max(self.n_cons, 1))

    @classmethod
    def from_rows(cls, n_vars, rows):
        """Build from a list of (logc array, var index array, exponent matrix)."""
        if not rows:
            return cls(n_vars,
                       np.zeros(1, dtype=np.int64), np.zeros(0),
                       np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64),
                       np.zeros(1, dtype=np.int64), np.zeros(0))
        term_ptr = np.zeros(len(rows) + 1, dtype=np.int64)
        var_ptr = np.zeros(len(rows) + 1, dtype=np.int64)
        mat_ptr = np.zeros(len(rows) + 1, dtype=np.int64)
        for i, (logc, vids, a) in enumerate(rows):
            term_ptr[i + 1] = term_ptr[i] + len(logc)
            var_ptr[i + 1] = var_ptr[i] + len(vids)
            mat_ptr[i + 1] = mat_ptr[i] + a.size
        term_logc = np.concatenate([np.asarray(r[0], dtype=float) for r in rows])
        var_idx = np.concatenate([np.asarray(r[1], dtype=np.int64) for r in rows])
        a_flat = np.concatenate([np.asarray(r[2], dtype=float).ravel() for r in rows])
        return cls(n_vars, term_ptr, term_logc, var_ptr, var_idx, mat_ptr, a_flat)

    def values(self, y, out=None):
        if self.n_cons == 0:
            return np.zeros(0)
        if out is None:
            out = np.empty(self.n_cons)
        _kernels.values(y, self.term_ptr, self.term_logc, self.var_ptr,
                        self.var_idx, self.mat_ptr, self.a_flat, out)
        return out

    def oracle(self, y, mode, weight, grad):
        """Accumulate grad and COO Hessian data; returns the phi contribution."""
        if self.n_cons == 0:
            return 0.0
        return _kernels.oracle(y, self.term_ptr, self.term_logc, self.var_ptr,
                               self.var_idx, self.mat_ptr, self.a_flat,
                               mode, weight, grad, self._coo_data, self._coo_off,
                               self._tvals, self._u, self._srow)

    def grads(self, y):
        """Dense per-constraint gradients (reference path, for tests/KKT)."""
        out = np.zeros((self.n_cons, self.n_vars))
        for c in range(self.n_cons):
            t0, t1 = self.term_ptr[c], self.term_ptr[c + 1]
            v0, v1 = self.var_ptr[c], self.var_ptr[c + 1]
            k = v1 - v0
            vids = self.var_idx[v0:v1]
            a = self.a_flat[self.mat_ptr[c]:self.mat_ptr[c] + (t1 - t0) * k].reshape(t1 - t0, k)
            t = self.term_logc[t0:t1] + a @ y[vids]
            sig = np.exp(t - t.max())
            sig /= sig.sum()
            out[c, vids] = a.T @ sig
        return out


@dataclass
class LogConvexProgram:
    """Smooth convex image of a GP: LSE objective/inequalities, affine equalities."""

    n_vars: int
    objective: PackedPosynomials
    cons: PackedPosynomials
    eq_a: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    eq_b: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def objective_value(self, y):
        return float(self.objective.values(y)[0])

    def objective_grad(self, y):
        return self.objective.grads(y)[0]

    def constraint_values(self, y):
        return self.cons.values(y)

    def constraint_grads(self, y):
        return self.cons.grads(y)


@dataclass
class BarrierResult:
    status: str
    y: np.ndarray
    objective_log: float
    kkt_residual: float
    newton_steps: int
    gap: float


def _flat_index(prog):
    n = prog.n_vars
    rows = np.concatenate([prog.cons.coo_rows, prog.objective.coo_rows])
    cols = np.concatenate([prog.cons.coo_cols, prog.objective.coo_cols])
    return rows * n + cols, rows, cols


class _NewtonWork:
    """Per-program assembly state for the Newton systems."""

    def __init__(self, prog, force_dense=False):
        self.prog = prog
        n = prog.n_vars
        self.n = n
        self.n_eq = prog.eq_a.shape[0] if prog.eq_a.size else 0
        flat, rows, cols = _flat_index(prog)
        self.use_sparse = (not force_dense and n >= SPARSE_THRESHOLD and self.n_eq == 0)
        if self.use_sparse:
            # fixed CSC pattern: map each COO entry to its slot once
            order = np.lexsort((rows, cols))
            rs, cs = rows[order], cols[order]
            new = np.ones(len(rs), dtype=bool)
            if len(rs) > 1:
                new[1:] = (rs[1:] != rs[:-1]) | (cs[1:] != cs[:-1])
            slot_sorted = np.cumsum(new) - 1
            self.n_slots = int(slot_sorted[-1]) + 1 if len(rs) else 0
            self.slot = np.empty(len(rs), dtype=np.int64)
            self.slot[order] = slot_sorted
            u_rows = rs[new]
            u_cols = cs[new]
            self.csc_indices = u_rows.astype(np.int32)
            self.csc_indptr = np.zeros(n + 1, dtype=np.int32)
            np.add.at(self.csc_indptr, u_cols + 1, 1)
            np.cumsum(self.csc_indptr, out=self.csc_indptr)
            self.diag_slots = self.slot[np.nonzero(rows == cols)[0]]
            diag_mask = u_rows == u_cols
            self.diag_slot_ids = np.nonzero(diag_mask)[0]
            # ensure every diagonal entry exists for regularization
            assert len(np.unique(u_rows[diag_mask])) == n, "missing diagonal entries"
        else:
            self.flat = flat

    def assemble_and_solve(self, coo_data, grad, reg, eq_a=None):
        n = self.n
        if self.use_sparse:
            data = np.bincount(self.slot, weights=coo_data, minlength=self.n_slots)
            data[self.diag_slot_ids] += reg
            h = scipy.sparse.csc_matrix(
                (data, self.csc_indices, self.csc_indptr), shape=(n, n))
            try:
                lu = scipy.sparse.linalg.splu(h)
                return lu.solve(-grad), None
            except RuntimeError:
                return None, None
        h = np.bincount(self.flat, weights=coo_data, minlength=n * n).reshape(n, n)
        h[np.diag_indices(n)] += reg
        if self.n_eq:
            k = self.n_eq
            kkt = np.zeros((n + k, n + k))
            kkt[:n, :n] = h
            kkt[:n, n:] = eq_a.T
            kkt[n:, :n] = eq_a
            rhs = np.concatenate([-grad, np.zeros(k)])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            return sol[:n], sol[n:]
        try:
            c = scipy.linalg.cho_factor(h, check_finite=False)
            return scipy.linalg.cho_solve(c, -grad, check_finite=False), None
        except scipy.linalg.LinAlgError:
            try:
                return np.linalg.solve(h, -grad), None
            except np.linalg.LinAlgError:
                return None, None


def _phi_at(prog, y, kappa, vals_buf):
    """Barrier merit kappa*F0 + sum(-log(-F_i)); +inf when infeasible."""
    f0 = prog.objective.values(y)[0]
    if prog.cons.n_cons == 0:
        return kappa * f0
    vals = prog.cons.values(y, vals_buf)
    mx = vals.max()
    if mx >= 0.0:
        return np.inf
    return kappa * f0 - np.log(-vals).sum()


def barrier_solve(prog, y0, tol=1e-7, max_newton=200, kappa0=None,
                  mu_factor=100.0, newton_tol=1e-10, force_dense=False,
                  stop_when=None):
    """Primal barrier method on a packed log-convex program.

    ``y0`` must be strictly feasible for the inequalities and satisfy the
    equalities; use :func:`phase_one` to produce one.  ``stop_when(y)`` is
    checked after every accepted step and ends the solve early with status
    ``stopped`` (used by phase I).
    """
    n = prog.n_vars
    m = prog.cons.n_cons
    y = np.array(y0, dtype=float)
    work = _NewtonWork(prog, force_dense=force_dense)
    n_coo = len(prog.cons._coo_data) + len(prog.objective._coo_data)
    coo_data = np.empty(n_coo)
    grad = np.zeros(n)
    vals_buf = np.empty(max(m, 1))
    steps = 0
    if kappa0 is None:
        kappa0 = max(1.0, float(m))
    kappa_final = m / tol if m else 1.0
    kappa = min(kappa0, kappa_final)
    if m == 0:
        kappa = 1.0
    status = "optimal"

    def newton_stage(kappa, stage_tol):
        nonlocal y, steps, status
        for _ in range(80):
            if steps >= max_newton:
                status = "max_iter"
                return
            grad[:] = 0.0
            nc = prog.cons._coo_data.size
            phi_b = prog.cons.oracle(y, _kernels.MODE_BARRIER, 1.0, grad)
            if not np.isfinite(phi_b):
                status = "max_iter"  # lost feasibility; should not happen
                return
            phi_o = prog.objective.oracle(y, _kernels.MODE_OBJECTIVE, kappa, grad)
            coo_data[:nc] = prog.cons._coo_data
            coo_data[nc:] = prog.objective._coo_data
            phi = phi_b + phi_o
            gnorm = np.abs(grad).max() if n else 0.0
            reg = 1e-11 * max(1.0, gnorm)
            delta = None
            for _ in range(4):
                delta, _ = work.assemble_and_solve(coo_data, grad, reg,
                                                   prog.eq_a if work.n_eq else None)
                if delta is not None and np.all(np.isfinite(delta)):
                    break
                reg *= 1e4
                delta = None
            if delta is None:
                # projected first-order fallback
                delta = -grad
                if work.n_eq:
                    a = prog.eq_a
                    corr, *_ = np.linalg.lstsq(a.T, a @ delta, rcond=None)
                    delta = delta - corr
            steps += 1
            dec2 = float(-grad @ delta)
            if dec2 < 0:
                delta = -grad
                dec2 = float(grad @ grad)
            # backtracking line search on the barrier merit; huge directions
            # (rank-deficient Hessians on affine-only problems) are capped
            step_inf = np.abs(delta).max() if n else 0.0
            t = 1.0 if step_inf <= 50.0 else 50.0 / step_inf
            ok = False
            for _ in range(60):
                cand = _phi_at(prog, y + t * delta, kappa, vals_buf)
                if cand <= phi - 0.01 * t * dec2 + 1e-12 * abs(phi):
                    ok = True
                    break
                t *= 0.5
            if not ok:
                return
            y += t * delta
            if stop_when is not None and stop_when(y):
                status = "stopped"
                return
            if np.abs(y).max() > 1500.0:
                status = "unbounded"
                return
            if 0.5 * dec2 * t <= stage_tol:
                return

    newton_stage(kappa, newton_tol if kappa >= kappa_final else 1e-4)
    while status == "optimal" and m > 0 and m / kappa > tol:
        kappa = min(kappa * mu_factor, kappa_final)
        newton_stage(kappa, newton_tol if kappa >= kappa_final else 1e-4)
    if status == "max_iter" and m > 0 and m / kappa <= tol:
        status = "optimal"

    # KKT stationarity with barrier multipliers lambda_i = 1/(kappa * slack_i)
    obj_log = float(prog.objective.values(y)[0])
    grad[:] = 0.0
    prog.objective.oracle(y, _kernels.MODE_OBJECTIVE, 1.0, grad)
    r = grad.copy()
    if m:
        grad[:] = 0.0
        phi_b = prog.cons.oracle(y, _kernels.MODE_BARRIER, 1.0, grad)
        if np.isfinite(phi_b):
            r += grad / kappa
    if work.n_eq:
        nu, *_ = np.linalg.lstsq(prog.eq_a.T, -r, rcond=None)
        r += prog.eq_a.T @ nu
    kkt = float(np.abs(r).max()) if n else 0.0
    gap = m / kappa if m else 0.0
    return BarrierResult(status=status, y=y, objective_log=obj_log,
                         kkt_residual=kkt, newton_steps=steps, gap=gap)


def _extend_with_slack(prog):
    """Phase-I program: add slack variable u; constraints F_i(y) - u <= 0."""
    n = prog.n_vars
    cons = prog.cons
    rows = []
    for c in range(cons.n_cons):
        t0, t1 = cons.term_ptr[c], cons.term_ptr[c + 1]
        v0, v1 = cons.var_ptr[c], cons.var_ptr[c + 1]
        k = v1 - v0
        nt = t1 - t0
        a = cons.a_flat[cons.mat_ptr[c]:cons.mat_ptr[c] + nt * k].reshape(nt, k)
        a_ext = np.hstack([a, -np.ones((nt, 1))])
        vids = np.concatenate([cons.var_idx[v0:v1], [n]])
        rows.append((cons.term_logc[t0:t1].copy(), vids, a_ext))
    obj = PackedPosynomials.from_rows(n + 1, [(np.zeros(1), np.array([n]), np.ones((1, 1)))])
    eq_a = prog.eq_a
    if eq_a.size:
        eq_a = np.hstack([eq_a, np.zeros((eq_a.shape[0], 1))])
    return LogConvexProgram(n + 1, obj, PackedPosynomials.from_rows(n + 1, rows),
                            eq_a, prog.eq_b)


def _project_onto_eq(prog, y):
    if not prog.eq_a.size:
        return y, True
    a, b = prog.eq_a, prog.eq_b
    corr, *_ = np.linalg.lstsq(a, b - a @ y, rcond=None)
    y = y + corr
    return y, bool(np.abs(a @ y - b).max() < 1e-8)


def phase_one(prog, y_guess=None, max_newton=200):
    """Find a strictly feasible point, or None when the interior is empty."""
    n = prog.n_vars
    y = np.zeros(n) if y_guess is None else np.array(y_guess, dtype=float)
    y, eq_ok = _project_onto_eq(prog, y)
    if not eq_ok:
        return None, 0
    if prog.cons.n_cons == 0:
        return y, 0
    vals = prog.cons.values(y)
    if vals.max() < -1e-10:
        return y, 0
    ext = _extend_with_slack(prog)
    y_ext = np.concatenate([y, [vals.max() + 1.0]])
    # drive the slack below 1 (strict feasibility reached) or converge
    # without reaching it (empty interior)
    res = barrier_solve(ext, y_ext, tol=1e-9, max_newton=max(max_newton, 300),
                        stop_when=lambda yy: yy[n] < np.log(0.9))
    y_ext = res.y
    if y_ext[n] < -1e-7:
        return y_ext[:n], res.newton_steps
    return None, res.newton_steps
