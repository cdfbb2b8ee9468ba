"""Posynomial algebra and a solver for standard-form geometric programs.

A monomial is ``c * prod_v x_v**a_v`` with c > 0; a posynomial is a sum of
monomials.  A geometric program minimizes a posynomial subject to
posynomial <= 1 inequalities and monomial == 1 equalities over strictly
positive variables.  In log variables the program is convex and is solved
by a primal interior-point method (see ``_solver``).
"""

from dataclasses import dataclass, field

import numpy as np

from ._solver import (LogConvexProgram, PackedPosynomials, barrier_solve,
                      phase_one)


@dataclass(frozen=True)
class Monomial:
    """Single positive-coefficient power-law term."""

    coeff: float
    exponents: dict

    def __post_init__(self):
        if not (self.coeff > 0):
            raise ValueError(f"monomial coefficient must be positive, got {self.coeff}")

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ValueError("monomials are defined on strictly positive x only")
        v = self.coeff
        for i, a in self.exponents.items():
            v *= x[i] ** a
        return v


@dataclass(frozen=True)
class Posynomial:
    """Nonempty sum of monomials."""

    terms: tuple

    def __post_init__(self):
        if len(self.terms) == 0:
            raise ValueError("posynomial needs at least one term")
        object.__setattr__(self, "terms", tuple(self.terms))

    def eval(self, x):
        return float(sum(t.eval(x) for t in self.terms))


def monomial(coeff, exponents=None):
    return Monomial(float(coeff), dict(exponents or {}))


def posynomial(terms):
    terms = [t if isinstance(t, Monomial) else monomial(*t) for t in terms]
    return Posynomial(tuple(terms))


def eval_posynomial(p, x):
    """Value of a posynomial (or monomial) at a strictly positive point."""
    return p.eval(x)


@dataclass
class GpProblem:
    """Standard-form GP: minimize objective s.t. posynomials <= 1, monomials == 1."""

    n_vars: int
    objective: Posynomial
    ineq_constraints: list = field(default_factory=list)
    mono_eq_constraints: list = field(default_factory=list)
    var_bounds: np.ndarray | None = None  # (n_vars, 2) positive lo/hi or None

    def validate(self):
        def check_vars(exps):
            for i in exps:
                if not (0 <= i < self.n_vars):
                    raise ValueError(f"term references undeclared variable {i}")
        for t in self.objective.terms:
            check_vars(t.exponents)
        for p in self.ineq_constraints:
            for t in p.terms:
                check_vars(t.exponents)
        for m in self.mono_eq_constraints:
            check_vars(m.exponents)
        if self.var_bounds is not None:
            b = np.asarray(self.var_bounds, dtype=float)
            if b.shape != (self.n_vars, 2):
                raise ValueError("var_bounds must have shape (n_vars, 2)")
            lo, hi = b[:, 0], b[:, 1]
            if np.any(lo <= 0) or np.any(lo > hi):
                raise ValueError("bounds must satisfy 0 < lo <= hi")


@dataclass
class GpSolution:
    x: np.ndarray
    objective_value: float
    kkt_residual: float
    status: str  # optimal | infeasible | max_iter | unbounded
    iterations: int = 0
    gap: float = 0.0


def _posynomial_row(p):
    logc = np.array([np.log(t.coeff) for t in p.terms])
    vids = sorted({i for t in p.terms for i in t.exponents})
    pos = {v: j for j, v in enumerate(vids)}
    a = np.zeros((len(p.terms), len(vids)))
    for k, t in enumerate(p.terms):
        for i, e in t.exponents.items():
            a[k, pos[i]] = e
    return logc, np.array(vids, dtype=np.int64), a


def to_log_convex(gp):
    """Log-variable image of a GP: LSE objective/constraints with exact gradients.

    Variable bounds are folded in as monomial constraints x/hi <= 1 and
    lo/x <= 1 (infinite hi rows are skipped).
    """
    gp.validate()
    rows = [_posynomial_row(p) for p in gp.ineq_constraints]
    if gp.var_bounds is not None:
        b = np.asarray(gp.var_bounds, dtype=float)
        for v in range(gp.n_vars):
            lo, hi = b[v]
            if np.isfinite(hi):
                rows.append((np.array([-np.log(hi)]), np.array([v], dtype=np.int64),
                             np.ones((1, 1))))
            rows.append((np.array([np.log(lo)]), np.array([v], dtype=np.int64),
                         -np.ones((1, 1))))
    eq_a = np.zeros((len(gp.mono_eq_constraints), gp.n_vars))
    eq_b = np.zeros(len(gp.mono_eq_constraints))
    for k, m in enumerate(gp.mono_eq_constraints):
        for i, e in m.exponents.items():
            eq_a[k, i] = e
        eq_b[k] = -np.log(m.coeff)
    obj = PackedPosynomials.from_rows(gp.n_vars, [_posynomial_row(gp.objective)])
    cons = PackedPosynomials.from_rows(gp.n_vars, rows)
    return LogConvexProgram(gp.n_vars, obj, cons, eq_a, eq_b)


def _default_start(gp):
    if gp.var_bounds is not None:
        b = np.asarray(gp.var_bounds, dtype=float)
        hi = np.where(np.isfinite(b[:, 1]), b[:, 1], b[:, 0] * 1e6)
        return 0.5 * (np.log(b[:, 0]) + np.log(hi))
    return np.zeros(gp.n_vars)


def solve(gp, tol=1e-7, max_iter=200, x0=None):
    """Solve a GP; returns a GpSolution rather than raising on infeasibility."""
    prog = to_log_convex(gp)
    y0 = None
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if np.all(x0 > 0):
            cand = np.log(x0)
            ok_eq = (not prog.eq_a.size
                     or np.abs(prog.eq_a @ cand - prog.eq_b).max() < 1e-9)
            if ok_eq and (prog.cons.n_cons == 0 or prog.cons.values(cand).max() < -1e-10):
                y0 = cand
    p1_steps = 0
    if y0 is None:
        y0, p1_steps = phase_one(prog, _default_start(gp), max_newton=max_iter)
        if y0 is None:
            x = np.exp(_default_start(gp))
            return GpSolution(x=x, objective_value=np.inf, kkt_residual=np.inf,
                              status="infeasible", iterations=p1_steps)
    res = barrier_solve(prog, y0, tol=tol, max_newton=max_iter)
    with np.errstate(over="ignore"):
        x = np.exp(res.y)
        obj = float(np.exp(res.objective_log))
    return GpSolution(x=x, objective_value=obj, kkt_residual=res.kkt_residual,
                      status=res.status, iterations=res.newton_steps + p1_steps,
                      gap=res.gap)


# ---------------------------------------------------------------------------
# plain-text serialization (regression fixtures)
# ---------------------------------------------------------------------------

def _format_terms(p):
    lines = []
    for t in p.terms:
        parts = [f"{t.coeff!r}"] + [f"{i}:{e!r}" for i, e in sorted(t.exponents.items())]
        lines.append(" ".join(parts))
    return lines


def gp_to_text(gp):
    out = [f"gp {gp.n_vars}"]
    out.append(f"objective {len(gp.objective.terms)}")
    out += _format_terms(gp.objective)
    for p in gp.ineq_constraints:
        out.append(f"ineq {len(p.terms)}")
        out += _format_terms(p)
    for m in gp.mono_eq_constraints:
        out.append("eq 1")
        out += _format_terms(Posynomial((m,)))
    if gp.var_bounds is not None:
        out.append("bounds")
        for lo, hi in np.asarray(gp.var_bounds, dtype=float):
            out.append(f"{lo!r} {hi!r}")
    return "\n".join(out) + "\n"


def _parse_term(line):
    parts = line.split()
    coeff = float(parts[0])
    exps = {}
    for p in parts[1:]:
        i, e = p.split(":")
        exps[int(i)] = float(e)
    return Monomial(coeff, exps)


def gp_from_text(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != "gp":
        raise ValueError("not a serialized GP")
    n_vars = int(head[1])
    i = 1
    objective = None
    ineqs = []
    eqs = []
    bounds = None
    while i < len(lines):
        tag = lines[i].split()
        if tag[0] in ("objective", "ineq", "eq"):
            n_terms = int(tag[1])
            terms = [_parse_term(lines[i + 1 + k]) for k in range(n_terms)]
            i += 1 + n_terms
            if tag[0] == "objective":
                objective = Posynomial(tuple(terms))
            elif tag[0] == "ineq":
                ineqs.append(Posynomial(tuple(terms)))
            else:
                eqs.append(terms[0])
        elif tag[0] == "bounds":
            bounds = np.array([[float(v) for v in lines[i + 1 + k].split()]
                               for k in range(n_vars)])
            i += 1 + n_vars
        else:
            raise ValueError(f"unknown section {tag[0]!r}")
    gp = GpProblem(n_vars, objective, ineqs, eqs, bounds)
    gp.validate()
    return gp
