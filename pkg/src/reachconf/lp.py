"""Linear-program carrier, a dense reference simplex solver, and a scipy
adapter.

The synthesis pipeline talks to LP solvers through :func:`solve_lp` only.
Two backends are provided:

* ``"simplex"`` - an in-repo dense two-phase simplex (Bland's rule), so the
  pipeline can run with no solver dependency beyond numpy.  Intended for
  small programs and cross-checking.
* ``"scipy"`` - ``scipy.optimize.linprog`` (HiGHS), the production backend
  for the large sparse programs the synthesis produces.

``"auto"`` picks scipy when available, the reference simplex otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

__all__ = ["LinearProgram", "LPSolution", "solve_lp", "simplex_solve", "dump_lp"]

_SIMPLEX_TOL = 1e-9


@dataclass
class LinearProgram:
    """min objective @ z  s.t.  A_ub z <= b_ub,  A_eq z = b_eq,  z >= lower.

    ``lower`` entries may be ``-inf`` for free variables (scale variables
    carry lower bound 0).  ``names`` maps a variable-block name to its index
    slice so callers can recover structured solutions.  The matrices may be
    dense arrays or scipy sparse matrices.
    """

    objective: np.ndarray
    A_ub: object = None
    b_ub: np.ndarray | None = None
    A_eq: object = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    names: dict = field(default_factory=dict)

    @property
    def n_variables(self) -> int:
        return int(np.asarray(self.objective).shape[0])

    def lower_bounds(self) -> np.ndarray:
        if self.lower is None:
            return np.full(self.n_variables, -np.inf)
        return np.asarray(self.lower, dtype=float)


@dataclass
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded" | "error"
    x: np.ndarray | None
    objective: float | None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def block(self, lp: LinearProgram, name: str) -> np.ndarray:
        return self.x[lp.names[name]]


def _to_dense(M):
    if M is None:
        return None
    if sparse.issparse(M):
        return M.toarray()
    return np.asarray(M, dtype=float)


def simplex_solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lower=None):
    """Dense two-phase simplex in tableau form with Bland's rule.

    Variables with finite lower bound l are shifted to x - l >= 0; free
    variables are split into positive parts.  Returns an :class:`LPSolution`.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.shape[0]
    A_ub = _to_dense(A_ub)
    A_eq = _to_dense(A_eq)
    b_ub = None if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    b_eq = None if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    if lower is None:
        lower = np.zeros(n)
    lower = np.asarray(lower, dtype=float).reshape(-1)

    rows = []
    rhs = []
    if A_ub is not None and A_ub.shape[0]:
        rows.append(A_ub)
        rhs.append(b_ub)
    if A_eq is not None and A_eq.shape[0]:
        rows.append(A_eq)
        rhs.append(b_eq)
    A = np.vstack(rows) if rows else np.zeros((0, n))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    n_ub = 0 if A_ub is None else A_ub.shape[0]

    # Shift finite lower bounds to zero; split free variables x = xp - xm.
    finite = np.isfinite(lower)
    shift = np.where(finite, lower, 0.0)
    b = b - A @ shift
    free_idx = np.where(~finite)[0]
    A_std = np.hstack([A, -A[:, free_idx]]) if free_idx.size else A
    c_std = np.concatenate([c, -c[free_idx]]) if free_idx.size else c.copy()
    n_std = A_std.shape[1]

    # Slacks for inequality rows.
    m = A_std.shape[0]
    slack = np.zeros((m, n_ub))
    slack[:n_ub, :] = np.eye(n_ub)
    A_std = np.hstack([A_std, slack])
    c_std = np.concatenate([c_std, np.zeros(n_ub)])

    # Make rhs nonnegative, then add artificials for phase 1.
    neg = b < 0
    A_std[neg] *= -1.0
    b = np.where(neg, -b, b)
    n_tot = A_std.shape[1]
    T = np.hstack([A_std, np.eye(m), b.reshape(-1, 1)])
    basis = list(range(n_tot, n_tot + m))

    def pivot(T, basis, obj_row):
        it_max = 50 * (T.shape[1] + m + 10)
        for _ in range(it_max):
            # Bland's rule: smallest column index with negative reduced cost.
            enter = -1
            for j in range(T.shape[1] - 1):
                if obj_row[j] < -_SIMPLEX_TOL:
                    enter = j
                    break
            if enter < 0:
                return True
            # Ratio test; ties broken by smallest basis index (anti-cycling).
            leave = -1
            best = np.inf
            for i in range(m):
                if T[i, enter] > _SIMPLEX_TOL:
                    ratio = T[i, -1] / T[i, enter]
                    if ratio < best - _SIMPLEX_TOL:
                        best, leave = ratio, i
                    elif ratio < best + _SIMPLEX_TOL and basis[i] < basis[leave]:
                        leave = i
            if leave < 0:
                return False  # unbounded
            piv = T[leave, enter]
            T[leave] /= piv
            for i in range(m):
                if i != leave and T[i, enter] != 0.0:
                    T[i] -= T[i, enter] * T[leave]
            obj_row -= obj_row[enter] * T[leave]
            basis[leave] = enter
        raise RuntimeError("simplex iteration limit exceeded")

    # Phase 1: minimize sum of artificials.
    obj1 = np.zeros(T.shape[1])
    obj1[n_tot : n_tot + m] = 1.0
    for i in range(m):
        obj1 -= T[i]
    if not pivot(T, basis, obj1):
        return LPSolution("error", None, None, "phase-1 unbounded")
    if -obj1[-1] > 1e-7:
        return LPSolution("infeasible", None, None, "phase-1 optimum positive")
    # Drive artificials out of the basis where possible.
    for i in range(m):
        if basis[i] >= n_tot:
            for j in range(n_tot):
                if abs(T[i, j]) > _SIMPLEX_TOL:
                    piv = T[i, j]
                    T[i] /= piv
                    for k in range(m):
                        if k != i:
                            T[k] -= T[k, j] * T[i]
                    basis[i] = j
                    break

    # Phase 2 on the original objective, artificial columns frozen.
    T[:, n_tot : n_tot + m] = 0.0
    obj2 = np.zeros(T.shape[1])
    obj2[:n_tot] = c_std
    for i in range(m):
        if basis[i] < n_tot:
            obj2 -= c_std[basis[i]] * T[i]
    if not pivot(T, basis, obj2):
        return LPSolution("unbounded", None, None, "phase-2 unbounded")

    x_std = np.zeros(n_tot)
    for i in range(m):
        if basis[i] < n_tot:
            x_std[basis[i]] = T[i, -1]
    x = x_std[:n].copy()
    if free_idx.size:
        x[free_idx] -= x_std[n : n + free_idx.size]
    x += shift
    return LPSolution("optimal", x, float(c @ x))


def _solve_scipy(lp: LinearProgram) -> LPSolution:
    from scipy.optimize import linprog

    lower = lp.lower_bounds()
    bounds = [(lo if np.isfinite(lo) else None, None) for lo in lower]
    res = linprog(
        np.asarray(lp.objective, dtype=float),
        A_ub=lp.A_ub,
        b_ub=lp.b_ub,
        A_eq=lp.A_eq,
        b_eq=lp.b_eq,
        bounds=bounds,
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    status = {0: "optimal", 1: "error", 2: "infeasible", 3: "unbounded"}.get(
        res.status, "error"
    )
    x = res.x if res.x is not None else None
    fun = float(res.fun) if res.fun is not None else None
    return LPSolution(status, x, fun, res.message)


def solve_lp(lp: LinearProgram, solver: str = "auto") -> LPSolution:
    """Solve a :class:`LinearProgram` with the requested backend."""
    if solver == "auto":
        solver = "scipy"
    if solver == "scipy":
        return _solve_scipy(lp)
    if solver == "simplex":
        return simplex_solve(
            lp.objective, lp.A_ub, lp.b_ub, lp.A_eq, lp.b_eq, lp.lower_bounds()
        )
    raise ValueError(f"unknown solver {solver!r}")


def dump_lp(lp: LinearProgram, path) -> None:
    """Plain-text standard-form export for offline cross-checking.

    Format: a ``minimize`` line with the objective coefficients, one
    ``st`` line per inequality row (``a_1 ... a_n <= b``), one per equality
    row (``... == b``), and a ``bounds`` line with the lower bounds.
    """
    A_ub = _to_dense(lp.A_ub)
    A_eq = _to_dense(lp.A_eq)
    lower = lp.lower_bounds()

    def fmt(v):
        return " ".join(repr(float(x)) for x in v)

    with open(path, "w") as f:
        f.write(f"minimize {fmt(np.asarray(lp.objective))}\n")
        if A_ub is not None:
            for row, b in zip(A_ub, np.asarray(lp.b_ub)):
                f.write(f"st {fmt(row)} <= {float(b)!r}\n")
        if A_eq is not None:
            for row, b in zip(A_eq, np.asarray(lp.b_eq)):
                f.write(f"st {fmt(row)} == {float(b)!r}\n")
        f.write(f"bounds {fmt(lower)}\n")
