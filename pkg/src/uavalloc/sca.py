"""Successive convex approximation layer for uplink power allocation.

Implements the interference-coupled max-min and max-sum spectral-efficiency
problems in frequency (per-segment powers, optionally with the single-carrier
restriction) and time (per-TTI powers) domains.  Each outer iteration
replaces the product prod_s(1 + a_is) with its best-fit monomial at the
current SINR point, solves the resulting geometric program in log domain,
and re-anchors until the power allocation stops moving.
"""

from dataclasses import dataclass

import numpy as np

from . import baseline
from ._solver import LogConvexProgram, PackedPosynomials, barrier_solve
from .channel import ChannelGainTensor
from .errors import ConfigurationError
from .gp import GpProblem, Monomial, Posynomial

GAMMA_FLOOR = 1e-6      # SINR anchor floor before condensation
A_LOWER = 1e-30         # positive-orthant floor for the auxiliary SINR variables
SHRINK = 0.04           # pull-in factor used to build strictly interior starts


def dbm_to_w(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def w_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Dimensions, band, noise and per-UE power limits of one optimization."""

    n: int
    s_blocks: int = 20
    t_ttis: int = 20
    bandwidth_hz: float = 9e6
    noise_density_dbm_hz: float = -174.0
    power_limits_w: np.ndarray | None = None   # (n, 2) [floor, max] in watts

    def __post_init__(self):
        if self.n < 1 or self.s_blocks < 1 or self.t_ttis < 1:
            raise ConfigurationError("n, s_blocks and t_ttis must be >= 1")
        if self.bandwidth_hz <= 0:
            raise ConfigurationError("bandwidth must be positive")
        if self.power_limits_w is None:
            lim = np.tile([1e-12, dbm_to_w(23.0)], (self.n, 1))
            object.__setattr__(self, "power_limits_w", lim)
        lim = np.asarray(self.power_limits_w, dtype=float)
        if lim.shape != (self.n, 2) or np.any(lim[:, 0] <= 0) or np.any(lim[:, 0] > lim[:, 1]):
            raise ConfigurationError("power_limits_w must be (n, 2) with 0 < floor <= max")

    @property
    def p_floor_w(self):
        return self.power_limits_w[:, 0]

    @property
    def p_max_w(self):
        return self.power_limits_w[:, 1]

    @property
    def noise_total_w(self):
        return dbm_to_w(self.noise_density_dbm_hz) * self.bandwidth_hz


@dataclass(frozen=True)
class QosSpec:
    """Per-UE minimum spectral efficiency in bit/s/Hz."""

    r_min: np.ndarray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.r_min, dtype=float))
        if np.any(r < 0):
            raise ConfigurationError("r_min must be non-negative")
        object.__setattr__(self, "r_min", r)

    @classmethod
    def uniform(cls, value, n):
        return cls(r_min=np.full(n, float(value)))


@dataclass(frozen=True)
class BandAllocation:
    """Per-UE contiguous interval [first, last] in reordered column positions."""

    ranges: tuple                 # (first, last) per UE
    column_order: np.ndarray      # column_order[pos] = physical segment index


@dataclass
class AllocationResult:
    """Outcome of a QoS-constrained max-sum run (with max-min fallback)."""

    feasible: bool
    powers: np.ndarray
    band: BandAllocation | None
    history: np.ndarray
    se: np.ndarray


def _gains_serving(g):
    """Accept a ChannelGainTensor or a square (n, n, s) gain array."""
    if isinstance(g, ChannelGainTensor):
        return g.g, g.serving_col
    arr = np.asarray(g, dtype=float)
    if arr.ndim != 3 or arr.shape[0] != arr.shape[1]:
        raise ConfigurationError("square gains (n, n, s) required when no tensor is given")
    return arr, np.arange(arr.shape[0])


def _effective_gains(g):
    """geff[j, i, s]: gain from transmitter j into UE i's serving cell."""
    arr, serving = _gains_serving(g)
    return arr[:, serving, :]


def sinr(p, g, cfg, mode="fd"):
    """Serving SINR per (UE, segment) in FD mode or (UE, TTI) in TD mode."""
    geff = _effective_gains(g)
    p = np.asarray(p, dtype=float)
    if mode == "fd":
        s = p.shape[1]
        noise = cfg.noise_total_w / s
        received = np.einsum("js,jis->is", p, geff)
        direct = p * np.einsum("iis->is", geff)
    elif mode == "td":
        gband = geff.mean(axis=2)
        noise = cfg.noise_total_w
        received = gband.T @ p
        direct = p * np.diag(gband)[:, None]
    else:
        raise ConfigurationError(f"unknown sinr mode {mode!r}")
    return direct / (noise + received - direct)


def spectral_efficiency(gamma, mode="per_block_avg"):
    """Per-UE Shannon SE averaged over segments (or TTIs)."""
    if mode != "per_block_avg":
        raise ConfigurationError(f"unknown SE mode {mode!r}")
    return np.log2(1.0 + np.asarray(gamma, dtype=float)).mean(axis=1)


@dataclass(frozen=True)
class CondensationPoint:
    """Monomial fit of prod_s(1 + a_is) at an anchor: exponents and coefficients."""

    anchor: np.ndarray       # (n, s) positive anchors
    weights: np.ndarray      # (n, s) exponents in (0, 1)
    log_coeffs: np.ndarray   # (n,) log of the per-UE coefficients

    @property
    def coeffs(self):
        return np.exp(self.log_coeffs)


def condense(anchor, mask=None):
    """Best-fit monomial at the anchor: matches value and gradient, never exceeds.

    Non-positive anchors are clamped to the SINR floor first.  With ``mask``
    the per-UE products run over the masked entries only.
    """
    a0 = np.maximum(np.asarray(anchor, dtype=float), GAMMA_FLOOR)
    w = a0 / (1.0 + a0)
    contrib = np.log1p(a0) - w * np.log(a0)
    if mask is not None:
        contrib = np.where(mask, contrib, 0.0)
    return CondensationPoint(anchor=a0, weights=w, log_coeffs=contrib.sum(axis=1))


# ---------------------------------------------------------------------------
# condensed GP construction
# ---------------------------------------------------------------------------

class CondensedPowerProblem:
    """One SCA problem family: objective/domain flags plus fixed scenario data.

    domain "fd": per-segment powers, sum power cap, optional single-carrier
    band (one power density per UE over a contiguous range).
    domain "td": per-TTI powers, per-TTI power cap, full-band noise/gains.
    objective "maxmin" maximizes min_i K_i * SE_i; "maxsum" maximizes the sum,
    optionally under per-UE minimum-SE constraints.
    """

    def __init__(self, g, cfg, objective="maxmin", domain="fd", qos=None,
                 band=None, k_scale=None):
        self.cfg = cfg
        self.objective = objective
        self.domain = domain
        geff = _effective_gains(g)
        n = geff.shape[0]
        if n != cfg.n:
            raise ConfigurationError("gain tensor size does not match cfg.n")
        self.n = n
        if domain == "td":
            self.s = cfg.t_ttis
            self.noise_seg = cfg.noise_total_w
            self.geff = np.repeat(geff.mean(axis=2)[:, :, None], self.s, axis=2)
            if band is not None:
                raise ConfigurationError("band allocation applies to FD problems only")
        else:
            self.s = cfg.s_blocks
            if geff.shape[2] != self.s:
                raise ConfigurationError("gain tensor blocks do not match cfg.s_blocks")
            self.noise_seg = cfg.noise_total_w / self.s
            self.geff = geff
        self.band = band
        self.k_scale = np.ones(n) if k_scale is None else np.asarray(k_scale, dtype=float)
        self.qos = qos
        if qos is not None and len(qos.r_min) != n:
            raise ConfigurationError("qos length does not match n")
        if band is not None:
            order = np.asarray(band.column_order, dtype=np.int64)
            self.segs = []           # physical segments per UE
            for first, last in band.ranges:
                self.segs.append(order[first:last + 1].copy())
            self.mask = np.zeros((n, self.s), dtype=bool)
            for i, segs in enumerate(self.segs):
                self.mask[i, segs] = True
        else:
            self.segs = [np.arange(self.s)] * n
            self.mask = np.ones((n, self.s), dtype=bool)
        # transmitters active on each physical segment
        self.on_seg = [[j for j in range(n) if self.mask[j, s]] for s in range(self.s)]
        self._layout()

    def _layout(self):
        n, s = self.n, self.s
        self.sc_mode = self.band is not None
        if self.sc_mode:
            self.n_p = n
            self.a_index = -np.ones((n, s), dtype=np.int64)
            idx = self.n_p
            for i in range(n):
                for seg in self.segs[i]:
                    self.a_index[i, seg] = idx
                    idx += 1
            self.n_a = idx - self.n_p
        else:
            self.n_p = n * s
            self.a_index = (self.n_p + np.arange(n * s)).reshape(n, s)
            self.n_a = n * s
        nv = self.n_p + self.n_a
        if self.objective == "maxmin":
            self.b_index = nv + np.arange(n)
            self.t_index = nv + n
            nv += n + 1
        self.n_vars = nv

    def _p_var(self, i, s):
        return i if self.sc_mode else i * self.s + s

    # -- SCA protocol ------------------------------------------------------

    def anchors(self, p_full):
        gam = self._sinr_full(p_full)
        return np.maximum(gam, GAMMA_FLOOR)

    def _sinr_full(self, p_full):
        received = np.einsum("js,jis->is", p_full, self.geff)
        direct = p_full * np.einsum("iis->is", self.geff)
        return direct / (self.noise_seg + received - direct)

    def true_objective(self, p_full):
        se = self.k_scale * spectral_efficiency(self._sinr_full(p_full))
        return float(se.min()) if self.objective == "maxmin" else float(se.sum())

    def achieved_se(self, p_full):
        return self.k_scale * spectral_efficiency(self._sinr_full(p_full))

    def build_rows(self, cond):
        """Constraint rows of the condensed GP, in a fixed deterministic order."""
        n, s = self.n, self.s
        w, logc = cond.weights, cond.log_coeffs
        if self.band is not None:
            logc = (np.where(self.mask, np.log1p(cond.anchor) - w * np.log(cond.anchor), 0.0)
                    ).sum(axis=1)
        rows = []
        if self.objective == "maxmin":
            for i in range(n):
                k = self.k_scale[i]
                vids = np.concatenate([[self.b_index[i]],
                                       [self.a_index[i, seg] for seg in self.segs[i]]])
                a = np.zeros((1, len(vids)))
                a[0, 0] = 1.0
                a[0, 1:] = -k * w[i, self.segs[i]]
                rows.append((np.array([-k * logc[i]]), vids.astype(np.int64), a))
            for i in range(n):
                vids = np.array([self.t_index, self.b_index[i]], dtype=np.int64)
                rows.append((np.zeros(1), vids, np.array([[1.0, -1.0]])))
        for i in range(n):
            gii = self.geff[i, i]
            for seg in self.segs[i]:
                others = [j for j in self.on_seg[seg] if j != i]
                vids = np.empty(2 + len(others), dtype=np.int64)
                vids[0] = self.a_index[i, seg]
                vids[1] = self._p_var(i, seg)
                logs = np.empty(1 + len(others))
                a = np.zeros((1 + len(others), 2 + len(others)))
                logs[0] = np.log(self.noise_seg / gii[seg])
                a[0, 0] = 1.0
                a[0, 1] = -1.0
                for t, j in enumerate(others):
                    vids[2 + t] = self._p_var(j, seg)
                    logs[1 + t] = np.log(self.geff[j, i, seg] / gii[seg])
                    a[1 + t, 0] = 1.0
                    a[1 + t, 1] = -1.0
                    a[1 + t, 2 + t] = 1.0
                rows.append((logs, vids, a))
        pmax = self.cfg.p_max_w
        if self.domain == "fd":
            if self.sc_mode:
                for i in range(n):
                    length = len(self.segs[i])
                    rows.append((np.array([np.log(length / pmax[i])]),
                                 np.array([i], dtype=np.int64), np.ones((1, 1))))
            else:
                for i in range(n):
                    vids = (i * s + np.arange(s)).astype(np.int64)
                    rows.append((np.full(s, -np.log(pmax[i])), vids, np.eye(s)))
        else:
            for i in range(n):
                for t in range(s):
                    rows.append((np.array([-np.log(pmax[i])]),
                                 np.array([self._p_var(i, t)], dtype=np.int64),
                                 np.ones((1, 1))))
        if self.qos is not None:
            for i in range(n):
                r = self.qos.r_min[i]
                if r <= 0:
                    continue
                vids = np.array([self.a_index[i, seg] for seg in self.segs[i]],
                                dtype=np.int64)
                a = -w[i, self.segs[i]].reshape(1, -1)
                rows.append((np.array([self.s * r * np.log(2.0) - logc[i]]), vids, a))
        pfloor = self.cfg.p_floor_w
        for v in range(self.n_p):
            i = v if self.sc_mode else v // s
            rows.append((np.array([np.log(pfloor[i])]),
                         np.array([v], dtype=np.int64), -np.ones((1, 1))))
        for i in range(n):
            for seg in self.segs[i]:
                rows.append((np.array([np.log(A_LOWER)]),
                             np.array([self.a_index[i, seg]], dtype=np.int64),
                             -np.ones((1, 1))))
        return rows

    def objective_row(self, cond):
        if self.objective == "maxmin":
            return (np.zeros(1), np.array([self.t_index], dtype=np.int64),
                    np.array([[-1.0]]))
        w = cond.weights
        logc = cond.log_coeffs
        if self.band is not None:
            logc = (np.where(self.mask, np.log1p(cond.anchor) - w * np.log(cond.anchor), 0.0)
                    ).sum(axis=1)
        vids = []
        exps = []
        for i in range(self.n):
            for seg in self.segs[i]:
                vids.append(self.a_index[i, seg])
                exps.append(-w[i, seg])
        return (np.array([-logc.sum()]), np.array(vids, dtype=np.int64),
                np.array(exps).reshape(1, -1))

    def build(self, cond):
        obj = PackedPosynomials.from_rows(self.n_vars, [self.objective_row(cond)])
        cons = PackedPosynomials.from_rows(self.n_vars, self.build_rows(cond))
        return LogConvexProgram(self.n_vars, obj, cons)

    def strict_point(self, p_full, cond):
        """Strictly interior log-domain start built from a feasible allocation."""
        n = self.n
        pfloor, pmax = self.cfg.p_floor_w, self.cfg.p_max_w
        y = np.zeros(self.n_vars)
        if self.sc_mode:
            dens = np.empty(n)
            for i in range(n):
                length = len(self.segs[i])
                tot = p_full[i, self.segs[i]].sum()
                dens[i] = np.clip(tot / length, pfloor[i] * (1 + SHRINK),
                                  pmax[i] / length * (1 - SHRINK))
            y[:n] = np.log(dens)
            p_eval = np.full((n, self.s), pfloor[:, None] * np.ones(self.s))
            for i in range(n):
                p_eval[i, self.segs[i]] = dens[i]
        else:
            p = np.clip(p_full, pfloor[:, None] * (1 + SHRINK), None)
            if self.domain == "fd":
                scale = np.minimum(1.0, pmax * (1 - SHRINK) / p.sum(axis=1))
                p = p * scale[:, None]
            else:
                p = np.minimum(p, pmax[:, None] * (1 - SHRINK))
            y[:self.n_p] = np.log(p).ravel()
            p_eval = p
        gam = self._sinr_full(p_eval)
        a_strict = np.maximum(gam * (1 - SHRINK), A_LOWER * 10.0)
        for i in range(n):
            for seg in self.segs[i]:
                y[self.a_index[i, seg]] = np.log(a_strict[i, seg])
        if self.objective == "maxmin":
            log_h = np.empty(n)
            w = cond.weights
            for i in range(n):
                segs = self.segs[i]
                contrib = (np.log1p(cond.anchor[i, segs])
                           - w[i, segs] * np.log(cond.anchor[i, segs])).sum()
                log_h[i] = contrib + (w[i, segs] * np.log(a_strict[i, segs])).sum()
            log_b = self.k_scale * log_h + np.log1p(-SHRINK)
            y[self.b_index] = log_b
            y[self.t_index] = log_b.min() + np.log1p(-SHRINK)
        return y

    def extract(self, y):
        """Power allocation (physical segment order) from a solver point."""
        n = self.n
        pfloor, pmax = self.cfg.p_floor_w, self.cfg.p_max_w
        if self.sc_mode:
            dens = np.exp(y[:n])
            p = np.tile(pfloor[:, None], (1, self.s)).astype(float)
            for i in range(n):
                length = len(self.segs[i])
                d = min(dens[i], pmax[i] / length)
                p[i, self.segs[i]] = max(d, pfloor[i])
        else:
            p = np.exp(y[:self.n_p]).reshape(n, self.s)
            p = np.maximum(p, pfloor[:, None])
            if self.domain == "fd":
                scale = np.minimum(1.0, pmax / p.sum(axis=1))
                p = p * scale[:, None]
            else:
                p = np.minimum(p, pmax[:, None])
        return p

    def build_gp_problem(self, cond):
        """Object-form GpProblem (same rows as the packed fast path)."""
        def row_to_posy(logs, vids, a):
            terms = []
            for t in range(len(logs)):
                exps = {int(vids[j]): float(a[t, j]) for j in range(len(vids))
                        if a[t, j] != 0.0}
                terms.append(Monomial(float(np.exp(logs[t])), exps))
            return Posynomial(tuple(terms))

        obj = row_to_posy(*self.objective_row(cond))
        cons = [row_to_posy(*r) for r in self.build_rows(cond)]
        return GpProblem(self.n_vars, obj, cons)


# factories matching the spec'd problem families --------------------------

def fd_maxmin_problem(g, cfg, band=None, k_scale=None):
    return CondensedPowerProblem(g, cfg, "maxmin", "fd", band=band, k_scale=k_scale)


def fd_maxsum_problem(g, cfg, qos=None, band=None):
    return CondensedPowerProblem(g, cfg, "maxsum", "fd", qos=qos, band=band)


def td_maxmin_problem(g, cfg):
    return CondensedPowerProblem(g, cfg, "maxmin", "td")


def td_maxsum_problem(g, cfg, qos=None):
    return CondensedPowerProblem(g, cfg, "maxsum", "td", qos=qos)


def build_fd_maxmin_gp(g, cfg, cond, band=None):
    """Condensed FD max-min GP in object form (variables p, a, b, t)."""
    return fd_maxmin_problem(g, cfg, band=band).build_gp_problem(cond)


def olpc_init(g, cfg, mode="fd", olpc=baseline.OlpcParams()):
    """OLPC powers spread uniformly: the always-feasible baseline start."""
    if isinstance(g, ChannelGainTensor):
        loss_db = g.serving_loss_db
    else:
        geff = _effective_gains(g)
        loss_db = -10.0 * np.log10(np.einsum("iis->is", geff).mean(axis=1))
    p_w = dbm_to_w(baseline.olpc_power_dbm(loss_db, olpc))
    p_w = np.clip(p_w, cfg.p_floor_w * 4.0, cfg.p_max_w)
    if mode == "fd":
        return np.tile((p_w / cfg.s_blocks)[:, None], (1, cfg.s_blocks))
    return np.tile(p_w[:, None], (1, cfg.t_ttis))


def sca_solve(problem_builder, g, cfg, init=None, eps=1e-3, max_outer=50,
              gp_tol=1e-7, max_newton=400):
    """Condense / solve / re-anchor until the power change drops below eps (dB).

    ``problem_builder`` is one of the factories above (or any callable
    returning a CondensedPowerProblem).  Returns the final allocation and
    the per-iteration true-objective history (initial point included).
    """
    problem = problem_builder(g, cfg) if callable(problem_builder) else problem_builder
    if init is None:
        init = olpc_init(g, cfg, mode=problem.domain)
    p = np.asarray(init, dtype=float)
    history = [problem.true_objective(p)]
    kappa0 = None
    for outer in range(max_outer):
        cond = condense(problem.anchors(p), mask=problem.mask)
        prog = problem.build(cond)
        y0 = problem.strict_point(p, cond)
        res = barrier_solve(prog, y0, tol=gp_tol, max_newton=max_newton,
                            kappa0=kappa0)
        if res.status == "unbounded" or not np.all(np.isfinite(res.y)):
            raise RuntimeError(f"GP solve failed at SCA iteration {outer}: {res.status}")
        p_new = problem.extract(res.y)
        history.append(problem.true_objective(p_new))
        sig = np.maximum(p_new, p) > 1e-6 * problem.cfg.p_max_w.max()
        with np.errstate(divide="ignore", invalid="ignore"):
            dp = np.abs(10.0 * np.log10(p_new / p))
        moved = dp[sig].max() if sig.any() else 0.0
        p = p_new
        if moved < eps:
            break
        # once the allocation settles the next surrogate optimum is close:
        # start the barrier ramp at a matching duality gap
        moved_log = moved * np.log(10.0) / 10.0
        kappa0 = prog.cons.n_cons / float(np.clip(4.0 * moved_log, 20.0 * gp_tol, 1.0))
    return p, np.array(history)


# ---------------------------------------------------------------------------
# single-carrier band allocation heuristic
# ---------------------------------------------------------------------------

def sc_band_allocate(gamma, eta=0.8, cell_groups=None):
    """Contiguous per-UE bands from a converged unconstrained SINR matrix.

    Columns are reordered by descending SINR of the worst UE; each UE then
    grows an interval from its best column toward whichever neighbor carries
    the larger rate until an ``eta`` fraction of its total rate is reached.
    With ``cell_groups`` co-cell UEs block each other's columns (orthogonal
    intra-cell allocation).
    """
    gamma = np.asarray(gamma, dtype=float)
    n, s = gamma.shape
    worst_ue = int(np.argmin(gamma) // s)
    order = np.argsort(-gamma[worst_ue], kind="stable")
    rates = np.log2(1.0 + gamma[:, order])
    group_of = {}
    if cell_groups is not None:
        for gidx, members in enumerate(cell_groups):
            for m in members:
                group_of[int(m)] = gidx
    blocked = {}
    ranges = [None] * n
    proc = sorted(range(n), key=lambda i: (gamma[i].max(), i))
    for i in proc:
        taken = blocked.setdefault(group_of.get(i, -1 - i), np.zeros(s, dtype=bool))
        free = np.nonzero(~taken)[0]
        if len(free) == 0:
            raise ConfigurationError("no free columns left for UE in its cell")
        start = int(free[np.argmax(rates[i, free])])
        lo = hi = start
        acc = rates[i, start]
        target = eta * rates[i].sum()
        while acc < target:
            left = lo - 1 if lo - 1 >= 0 and not taken[lo - 1] else None
            right = hi + 1 if hi + 1 < s and not taken[hi + 1] else None
            if left is None and right is None:
                break
            if right is None or (left is not None
                                 and rates[i, left] >= rates[i, right]):
                lo = left
                acc += rates[i, lo]
            else:
                hi = right
                acc += rates[i, hi]
        ranges[i] = (lo, hi)
        if cell_groups is not None:
            taken[lo:hi + 1] = True
    return BandAllocation(ranges=tuple(ranges), column_order=order)


def fd_sc_maxmin(g, cfg, eta=0.8, eps=1e-3, max_outer=50, gp_tol=1e-7,
                 cell_groups=None, k_scale=None, return_history=False):
    """Unconstrained run, band allocation, then a single-density re-run."""
    prob1 = fd_maxmin_problem(g, cfg, k_scale=k_scale)
    p1, h1 = sca_solve(prob1, g, cfg, eps=eps, max_outer=max_outer, gp_tol=gp_tol)
    gam = sinr(p1, g, cfg, mode="fd")
    band = sc_band_allocate(gam, eta=eta, cell_groups=cell_groups)
    prob2 = fd_maxmin_problem(g, cfg, band=band, k_scale=k_scale)
    p2, h2 = sca_solve(prob2, g, cfg, init=p1, eps=eps, max_outer=max_outer,
                       gp_tol=gp_tol)
    if return_history:
        return p2, band, (h1, h2)
    return p2, band


def fd_maxsum_qos(g, cfg, qos, eta=0.8, eps=1e-3, max_outer=50, gp_tol=1e-7):
    """Sum-SE maximization under QoS and single-carrier constraints.

    The max-min allocation provides the feasibility test and the initial
    point; when it cannot meet the QoS floor the result is flagged
    infeasible and carries the max-min allocation as fallback.
    """
    p_mm, band = fd_sc_maxmin(g, cfg, eta=eta, eps=eps, max_outer=max_outer,
                              gp_tol=gp_tol)
    se_mm = spectral_efficiency(sinr(p_mm, g, cfg, mode="fd"))
    hist = np.array([float(se_mm.sum())])
    if np.any(se_mm < qos.r_min - 1e-9):
        return AllocationResult(False, p_mm, band, hist, se_mm)
    prob = fd_maxsum_problem(g, cfg, qos=qos, band=band)
    try:
        p, hist = sca_solve(prob, g, cfg, init=p_mm, eps=eps,
                            max_outer=max_outer, gp_tol=gp_tol)
    except RuntimeError:
        # QoS boundary exactly at the max-min point: keep the fallback
        return AllocationResult(True, p_mm, band, hist, se_mm)
    se = spectral_efficiency(sinr(p, g, cfg, mode="fd"))
    return AllocationResult(True, p, band, hist, se)


def td_maxmin(g, cfg, eps=1e-3, max_outer=50, gp_tol=1e-7, return_history=False):
    """Per-TTI max-min powers; the SC constraint is void in the time domain."""
    p, h = sca_solve(td_maxmin_problem, g, cfg, eps=eps, max_outer=max_outer,
                     gp_tol=gp_tol)
    return (p, h) if return_history else p


def td_maxsum_qos(g, cfg, qos, eps=1e-3, max_outer=50, gp_tol=1e-7):
    """Time-domain analogue of the QoS-constrained sum maximization."""
    p_mm, _ = sca_solve(td_maxmin_problem, g, cfg, eps=eps,
                        max_outer=max_outer, gp_tol=gp_tol)
    se_mm = spectral_efficiency(sinr(p_mm, g, cfg, mode="td"))
    hist = np.array([float(se_mm.sum())])
    if np.any(se_mm < qos.r_min - 1e-9):
        return AllocationResult(False, p_mm, None, hist, se_mm)
    prob = td_maxsum_problem(g, cfg, qos=qos)
    try:
        p, hist = sca_solve(prob, g, cfg, init=p_mm, eps=eps,
                            max_outer=max_outer, gp_tol=gp_tol)
    except RuntimeError:
        return AllocationResult(True, p_mm, None, hist, se_mm)
    se = spectral_efficiency(sinr(p, g, cfg, mode="td"))
    return AllocationResult(True, p, None, hist, se)


def multi_ue_maxmin(g, cfg, schedule, eta=0.8, eps=1e-3, max_outer=50,
                    gp_tol=1e-7):
    """Max-min over multiple UEs per cell sharing orthogonal segments.

    ``schedule`` maps each cell to the UE (row) indices scheduled in it; the
    achieved SE of a UE sharing with K-1 others is scaled by K.
    """
    groups = [tuple(int(u) for u in members) for members in schedule]
    flat = [u for grp in groups for u in grp]
    n = _effective_gains(g).shape[0]
    if sorted(flat) != list(range(n)):
        raise ConfigurationError("schedule must partition the UE indices")
    k_scale = np.empty(n)
    for grp in groups:
        if len(grp) > cfg.s_blocks:
            raise ConfigurationError("more UEs in a cell than segments")
        for u in grp:
            k_scale[u] = len(grp)
    prob1 = fd_maxmin_problem(g, cfg, k_scale=k_scale)
    p1, _ = sca_solve(prob1, g, cfg, eps=eps, max_outer=max_outer, gp_tol=gp_tol)
    gam = sinr(p1, g, cfg, mode="fd")
    band = sc_band_allocate(gam, eta=eta,
                            cell_groups=[g for g in groups if len(g) > 1])
    prob2 = fd_maxmin_problem(g, cfg, band=band, k_scale=k_scale)
    p2, _ = sca_solve(prob2, g, cfg, init=p1, eps=eps, max_outer=max_outer,
                      gp_tol=gp_tol)
    return p2, band


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def matrix_to_csv(m, value_name, path=None):
    """(row, col, value) dump for allocations and SINR matrices."""
    import csv
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ue", "segment", value_name])
    m = np.asarray(m)
    for i in range(m.shape[0]):
        for s in range(m.shape[1]):
            w.writerow([i, s, f"{m[i, s]:.10g}"])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text


def history_to_csv(history, path=None):
    import csv
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "objective"])
    for k, v in enumerate(np.asarray(history)):
        w.writerow([k, f"{v:.10g}"])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text
