"""Linear programs: container, L1 epigraph transform, and solvers.

Two solver backends sit behind :func:`solve_lp`:

* ``"simplex"``: dense two-phase primal simplex with Bland's rule, written
  here. Exact on small problems and used to cross-check.
* ``"highs"``: scipy's HiGHS dual simplex, for the sparse problems the
  gridworld instances produce (thousands of variables).

Whatever the backend, the returned solution is re-verified against the
problem: primal residual and objective are recomputed from ``x``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
PHASE1_TOL = 1e-7
PIVOT_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpNumericalError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def _as_matrix(M, n_cols: int):
    if M is None:
        return sp.csr_matrix((0, n_cols))
    if sp.issparse(M):
        return M.tocsr().astype(float)
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return sp.csr_matrix((0, n_cols))
    return M


def _vec(v, n: int, fill: float):
    if v is None:
        return np.full(n, fill)
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        return np.full(n, float(v))
    return v.copy()


@dataclass(eq=False)
class LpProblem:
    """min c @ x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lb <= x <= ub.

    Matrices may be dense arrays or scipy sparse matrices.
    """

    c: np.ndarray
    A_eq: object = None
    b_eq: np.ndarray = None
    A_ub: object = None
    b_ub: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None
    variable_names: list[str] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = len(self.c)
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective entries must be finite")
        self.A_eq = _as_matrix(self.A_eq, n)
        self.A_ub = _as_matrix(self.A_ub, n)
        self.b_eq = _vec(self.b_eq, self.A_eq.shape[0], 0.0)
        self.b_ub = _vec(self.b_ub, self.A_ub.shape[0], 0.0)
        self.lb = _vec(self.lb, n, 0.0)
        self.ub = _vec(self.ub, n, np.inf)
        for name, M, b in (("A_eq", self.A_eq, self.b_eq), ("A_ub", self.A_ub, self.b_ub)):
            if M.shape[1] != n:
                raise ValueError(f"{name} has {M.shape[1]} columns, expected {n}")
            if b.shape != (M.shape[0],):
                raise ValueError(f"{name} has {M.shape[0]} rows but rhs has shape {b.shape}")
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")
        if self.variable_names is not None and len(self.variable_names) != n:
            raise ValueError("variable_names must have one entry per variable")

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def residual(self, x) -> float:
        """Largest violation of any constraint or bound at ``x``."""
        x = np.asarray(x, dtype=float)
        parts = [0.0]
        if self.A_eq.shape[0]:
            parts.append(np.max(np.abs(self.A_eq @ x - self.b_eq)))
        if self.A_ub.shape[0]:
            parts.append(np.max(self.A_ub @ x - self.b_ub))
        parts.append(np.max(self.lb - x, initial=0.0))
        parts.append(np.max(x - self.ub, initial=0.0))
        return float(max(0.0, *parts))


@dataclass
class LpSolution:
    x: np.ndarray | None
    objective_value: float
    status: str
    max_residual: float
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def l1_epigraph(M, b, base: LpProblem) -> LpProblem:
    """Add ``sum_j |(M x - b)_j|`` to the objective of ``base``.

    Appends one variable t_j >= 0 per row of M with ``-t <= M x - b <= t``.
    The new variables come last, after the base variables.
    """
    n = base.n_vars
    M = M.tocsr() if sp.issparse(M) else sp.csr_matrix(np.atleast_2d(np.asarray(M, dtype=float)))
    b = np.asarray(b, dtype=float).ravel()
    if M.shape[1] != n:
        raise ValueError(f"M has {M.shape[1]} columns, base problem has {n} variables")
    if b.shape != (M.shape[0],):
        raise ValueError(f"offset has shape {b.shape}, expected ({M.shape[0]},)")
    k = M.shape[0]
    eye = sp.identity(k, format="csr")
    rows = sp.vstack([sp.hstack([M, -eye]), sp.hstack([-M, -eye])])
    A_ub = sp.vstack([sp.hstack([sp.csr_matrix(base.A_ub), sp.csr_matrix((base.A_ub.shape[0], k))]),
                      rows]).tocsr()
    A_eq = sp.hstack([sp.csr_matrix(base.A_eq), sp.csr_matrix((base.A_eq.shape[0], k))]).tocsr()
    names = None
    if base.variable_names is not None:
        names = list(base.variable_names) + [f"t[{j}]" for j in range(k)]
    return LpProblem(
        c=np.concatenate([base.c, np.ones(k)]),
        A_eq=A_eq, b_eq=base.b_eq,
        A_ub=A_ub, b_ub=np.concatenate([base.b_ub, b, -b]),
        lb=np.concatenate([base.lb, np.zeros(k)]),
        ub=np.concatenate([base.ub, np.full(k, np.inf)]),
        variable_names=names,
    )


def solve_lp(problem: LpProblem, method: str = "highs", max_iter: int = 50_000) -> LpSolution:
    """Solve ``problem`` and certify the result.

    An ``optimal`` status guarantees a primal residual of at most 1e-7;
    otherwise :class:`LpNumericalError` is raised.
    """
    if method == "highs":
        sol = _solve_highs(problem)
    elif method == "simplex":
        sol = _solve_simplex(problem, max_iter)
    else:
        raise ValueError(f"unknown LP method {method!r}")
    if sol.status == OPTIMAL:
        sol.max_residual = problem.residual(sol.x)
        sol.objective_value = float(problem.c @ sol.x)
        if sol.max_residual > FEAS_TOL:
            raise LpNumericalError(
                f"{method} returned a point with residual {sol.max_residual:.3e}",
                {"method": method, "residual": sol.max_residual, "iterations": sol.iterations},
            )
    return sol


def _solve_highs(problem: LpProblem) -> LpSolution:
    has_eq = problem.A_eq.shape[0] > 0
    has_ub = problem.A_ub.shape[0] > 0
    bounds = np.column_stack([
        np.where(np.isfinite(problem.lb), problem.lb, np.nan),
        np.where(np.isfinite(problem.ub), problem.ub, np.nan),
    ])
    bounds = [(None if np.isnan(l) else l, None if np.isnan(u) else u) for l, u in bounds]
    res = linprog(
        problem.c,
        A_ub=problem.A_ub if has_ub else None, b_ub=problem.b_ub if has_ub else None,
        A_eq=problem.A_eq if has_eq else None, b_eq=problem.b_eq if has_eq else None,
        bounds=bounds, method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9,
                 "presolve": True},
    )
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        return LpSolution(np.asarray(res.x), float(res.fun), OPTIMAL, 0.0, iters)
    if res.status == 2:
        return LpSolution(None, np.inf, INFEASIBLE, np.inf, iters)
    if res.status == 3:
        return LpSolution(None, -np.inf, UNBOUNDED, np.inf, iters)
    raise LpNumericalError(f"HiGHS failed: {res.message}", {"status": res.status, "iterations": iters})


# ---------------------------------------------------------------------------
# Dense two-phase simplex


def _standard_form(problem: LpProblem):
    """Rewrite as min c'z, A z = b, z >= 0 with b >= 0.

    Returns (A, b, c, const, recover) where recover maps z back to x.
    """
    n = problem.n_vars
    lb, ub = problem.lb, problem.ub
    A_eq = problem.A_eq.toarray() if sp.issparse(problem.A_eq) else problem.A_eq
    A_ub = problem.A_ub.toarray() if sp.issparse(problem.A_ub) else problem.A_ub

    # x = shift + T @ z  (T has one or two columns per variable)
    cols = []
    shift = np.zeros(n)
    extra_rows = []  # (column index into z, rhs) for finite two-sided bounds
    for j in range(n):
        if np.isfinite(lb[j]):
            shift[j] = lb[j]
            cols.append((j, 1.0))
            if np.isfinite(ub[j]):
                extra_rows.append((len(cols) - 1, ub[j] - lb[j]))
        elif np.isfinite(ub[j]):
            shift[j] = ub[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    T = np.zeros((n, len(cols)))
    for k, (j, sgn) in enumerate(cols):
        T[j, k] = sgn

    n_z = len(cols)
    n_ub = A_ub.shape[0] + len(extra_rows)
    blocks = []
    rhs = []
    if A_eq.shape[0]:
        blocks.append(np.hstack([A_eq @ T, np.zeros((A_eq.shape[0], n_ub))]))
        rhs.append(problem.b_eq - A_eq @ shift)
    ub_rows = np.zeros((n_ub, n_z))
    ub_rhs = np.zeros(n_ub)
    if A_ub.shape[0]:
        ub_rows[:A_ub.shape[0]] = A_ub @ T
        ub_rhs[:A_ub.shape[0]] = problem.b_ub - A_ub @ shift
    for r, (k, width) in enumerate(extra_rows):
        ub_rows[A_ub.shape[0] + r, k] = 1.0
        ub_rhs[A_ub.shape[0] + r] = width
    if n_ub:
        blocks.append(np.hstack([ub_rows, np.eye(n_ub)]))
        rhs.append(ub_rhs)
    n_total = n_z + n_ub
    A = np.vstack(blocks) if blocks else np.zeros((0, n_total))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    c = np.concatenate([problem.c @ T, np.zeros(n_ub)])
    const = float(problem.c @ shift)

    def recover(z):
        return shift + T @ z[:n_z]

    return A, b, c, const, recover


def _pivot(tab: np.ndarray, row: int, col: int):
    tab[row] /= tab[row, col]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    tab -= np.outer(col_vals, tab[row])


def _bland(tab: np.ndarray, basis: list[int], allowed: np.ndarray, max_iter: int, phase: int):
    """Run Bland's-rule primal simplex on a tableau whose last row is the cost row.

    Returns (status, iterations).
    """
    m = len(basis)
    for it in range(max_iter):
        reduced = tab[-1, :-1]
        candidates = np.flatnonzero((reduced < -PIVOT_TOL) & allowed)
        if not len(candidates):
            return OPTIMAL, it
        col = candidates[0]
        column = tab[:m, col]
        positive = column > PIVOT_TOL
        if not positive.any():
            return UNBOUNDED, it
        ratios = np.full(m, np.inf)
        ratios[positive] = tab[:m, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        row = min(ties, key=lambda r: basis[r])
        _pivot(tab, row, col)
        basis[row] = col
    raise LpNumericalError(f"simplex phase {phase} hit the iteration limit",
                           {"phase": phase, "iterations": max_iter})


def _solve_simplex(problem: LpProblem, max_iter: int) -> LpSolution:
    A, b, c, const, recover = _standard_form(problem)
    m, n = A.shape
    if m == 0:
        if np.any(c < -PIVOT_TOL):
            return LpSolution(None, -np.inf, UNBOUNDED, np.inf)
        z = np.zeros(n)
        return LpSolution(recover(z), const, OPTIMAL, 0.0)

    # phase 1: artificial variable per row
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -A.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    status, it1 = _bland(tab, basis, allowed, max_iter, 1)
    if -tab[-1, -1] > PHASE1_TOL:
        return LpSolution(None, np.inf, INFEASIBLE, np.inf, it1)

    # drive artificials out of the basis; rows where that is impossible are redundant
    keep = []
    for r in range(m):
        if basis[r] >= n:
            nz = np.flatnonzero(np.abs(tab[r, :n]) > PIVOT_TOL)
            if len(nz):
                _pivot(tab, r, nz[0])
                basis[r] = nz[0]
                keep.append(r)
        else:
            keep.append(r)
    tab = np.vstack([tab[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = [basis[r] for r in keep]

    # phase 2 cost row in terms of the current basis
    tab[-1, :n] = c
    for r, j in enumerate(basis):
        tab[-1] -= c[j] * tab[r]
    status, it2 = _bland(tab, basis, np.ones(n, dtype=bool), max_iter, 2)
    if status == UNBOUNDED:
        return LpSolution(None, -np.inf, UNBOUNDED, np.inf, it1 + it2)
    z = np.zeros(n)
    z[basis] = tab[:-1, -1]
    z = np.maximum(z, 0.0)
    x = recover(z)
    return LpSolution(x, float(problem.c @ x), OPTIMAL, 0.0, it1 + it2)


# ---------------------------------------------------------------------------
# Debug dump


def _num(v: float) -> str:
    return np.format_float_positional(float(v), unique=True, trim="-")


def to_lp_format(problem: LpProblem) -> str:
    """Render ``problem`` in CPLEX LP text format for cross-checking with other solvers."""
    names = problem.variable_names or [f"x{j}" for j in range(problem.n_vars)]
    names = [n.replace("[", "(").replace("]", ")").replace(",", "_") for n in names]

    def expr(coefs, idx):
        terms = [f"{'-' if v < 0 else '+'} {_num(abs(v))} {names[j]}" for j, v in zip(idx, coefs) if v != 0]
        return " ".join(terms) if terms else "0 " + names[0]

    def rows(M):
        M = sp.csr_matrix(M)
        for r in range(M.shape[0]):
            lo, hi = M.indptr[r], M.indptr[r + 1]
            yield expr(M.data[lo:hi], M.indices[lo:hi])

    lines = ["Minimize", " obj: " + expr(problem.c, range(problem.n_vars)), "Subject To"]
    for r, e in enumerate(rows(problem.A_eq)):
        lines.append(f" e{r}: {e} = {_num(problem.b_eq[r])}")
    for r, e in enumerate(rows(problem.A_ub)):
        lines.append(f" u{r}: {e} <= {_num(problem.b_ub[r])}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = problem.lb[j], problem.ub[j]
        if not np.isfinite(lo) and not np.isfinite(hi):
            lines.append(f" {name} free")
        else:
            lo_s = _num(lo) if np.isfinite(lo) else "-inf"
            hi_s = _num(hi) if np.isfinite(hi) else "+inf"
            lines.append(f" {lo_s} <= {name} <= {hi_s}")
    lines.append("End")
    return "\n".join(lines) + "\n"
