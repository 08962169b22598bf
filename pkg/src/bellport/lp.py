"""Dense revised-simplex solver for equality-constrained linear programs.

Built for the local-model feasibility problems in this package: tens of
thousands of nonnegative variables, around a thousand highly degenerate
equality rows (the marginal systems are rank-deficient by construction), and
one bounded scalar carrying the whole objective.  Design points that matter
at that scale:

- the constraint matrix lives in sparse column form and is never densified;
  only the basis inverse (rows x rows) is dense,
- Dantzig pricing by default, switching to Bland's rule after a streak of
  degenerate pivots so cycling cannot occur, and back once progress resumes,
- a two-phase start with artificial variables; equality rows found dependent
  in phase 1 are dropped instead of demanding preprocessing from the caller.

Standard-form layout (shared contract with the exact-arithmetic verifier in
:mod:`bellport.exactlp`): columns are the original variables ``0..num_vars-1``
followed by one slack per finitely-bounded variable in ascending variable
order; rows are the original equality rows in order followed by the
upper-bound rows in the same ascending variable order.  Lower bounds are
shifted out before solving and added back on return.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

Array = np.ndarray

FEASIBILITY_TOL = 1e-8
OPTIMALITY_TOL = 1e-7
PIVOT_TOL = 1e-10
#: a pivot with step length at most this counts as degenerate
DEGENERATE_STEP = 1e-11
#: consecutive degenerate pivots before Bland's rule takes over
BLAND_AFTER = 50
#: phase-1 prices with a tighter tolerance than phase 2 so that the
#: artificial mass left at its optimum is meaningful against FEASIBILITY_TOL
PHASE1_OPT_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpError(Exception):
    """Malformed problem or internal solver failure."""


class IterationLimitExceeded(LpError):
    """The pivot budget ran out before the solve finished.

    Reported distinctly from infeasibility: hitting the limit means the
    solver gave up, not that the system has no solution.
    """

    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations


@dataclass(frozen=True)
class LinearProgram:
    """Equality-form LP: maximize the objective subject to ``A x = b``.

    Every variable has bounds ``[0, +inf)`` unless overridden in ``bounds``.
    Rows are sparse: ``(indices, values, rhs)`` triples.

    Args:
        num_vars: number of variables.
        objective: sparse coefficient pairs ``(index, coeff)``; maximized.
        rows: equality rows as ``(indices, values, rhs)``.
        bounds: optional mapping ``index -> (lower, upper)``; upper may be
            ``math.inf``.  Finite lowers are allowed, ``-inf`` is not.
    """

    num_vars: int
    objective: tuple
    rows: tuple
    bounds: Mapping[int, tuple] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_vars < 1:
            raise LpError("an LP needs at least one variable")
        obj = tuple((int(j), float(v)) for j, v in self.objective)
        for j, v in obj:
            if not 0 <= j < self.num_vars:
                raise LpError(f"objective references variable {j} out of range")
            if not math.isfinite(v):
                raise LpError("objective coefficients must be finite")
        rows = []
        for idx, vals, rhs in self.rows:
            idx = np.asarray(idx, dtype=np.int64)
            vals = np.asarray(vals, dtype=float)
            if idx.shape != vals.shape or idx.ndim != 1:
                raise LpError("row indices and values must be 1-d and equally long")
            if idx.size and (idx.min() < 0 or idx.max() >= self.num_vars):
                raise LpError("row references a variable out of range")
            if not np.all(np.isfinite(vals)) or not math.isfinite(rhs):
                raise LpError("row coefficients and rhs must be finite")
            idx.flags.writeable = False
            vals.flags.writeable = False
            rows.append((idx, vals, float(rhs)))
        bounds = {}
        for j, (lo, hi) in dict(self.bounds).items():
            j = int(j)
            if not 0 <= j < self.num_vars:
                raise LpError(f"bound references variable {j} out of range")
            lo, hi = float(lo), float(hi)
            if not math.isfinite(lo):
                raise LpError("lower bounds must be finite (free variables unsupported)")
            if hi < lo:
                raise LpError(f"empty bound interval for variable {j}")
            bounds[j] = (lo, hi)
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "rows", tuple(rows))
        object.__setattr__(self, "bounds", bounds)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def bound(self, j: int) -> tuple:
        return self.bounds.get(j, (0.0, math.inf))

    def objective_dense(self) -> Array:
        c = np.zeros(self.num_vars)
        for j, v in self.objective:
            c[j] += v
        return c


def finite_upper_vars(num_vars: int, bounds: Mapping[int, tuple]) -> list:
    """Variables with a finite upper bound, in the standard-form slack order."""
    return sorted(j for j, (_, hi) in bounds.items() if math.isfinite(hi) and j < num_vars)


@dataclass(frozen=True)
class LpSolution:
    """Outcome of a solve.

    ``primal``/``dual`` are populated only when ``status == "optimal"``;
    ``dual`` has one multiplier per original constraint row (zero for rows
    found redundant).  ``basis`` and ``kept_rows`` describe the final basis in
    the standard-form layout so an exact verifier can re-check it.
    """

    status: str
    objective_value: float
    primal: Optional[Array]
    dual: Optional[Array]
    iterations: int
    basis: tuple = ()
    kept_rows: tuple = ()
    diagnostics: dict = field(default_factory=dict)


def max_equality_violation(lp: LinearProgram, x: Array) -> float:
    """Largest absolute violation of the equality rows at ``x``."""
    worst = 0.0
    for idx, vals, rhs in lp.rows:
        worst = max(worst, abs(float(vals @ x[idx]) - rhs))
    return worst


def max_bound_violation(lp: LinearProgram, x: Array) -> float:
    """Largest violation of the variable bounds at ``x``."""
    worst = float(max(0.0, -x.min())) if len(x) else 0.0
    for j, (lo, hi) in lp.bounds.items():
        worst = max(worst, lo - x[j], x[j] - hi if math.isfinite(hi) else 0.0)
    return float(worst)


class _Standardized:
    """Shifted, slack-augmented copy of an LP in the documented layout."""

    def __init__(self, lp: LinearProgram):
        n = lp.num_vars
        self.lp = lp
        self.lower = np.zeros(n)
        for j, (lo, _) in lp.bounds.items():
            self.lower[j] = lo
        self.ub_vars = finite_upper_vars(n, lp.bounds)
        self.num_std_vars = n + len(self.ub_vars)
        self.num_user_rows = lp.num_rows
        self.num_std_rows = lp.num_rows + len(self.ub_vars)

        coo_r, coo_c, coo_v, rhs = [], [], [], []
        for i, (idx, vals, r) in enumerate(lp.rows):
            coo_r.append(np.full(idx.size, i, dtype=np.int64))
            coo_c.append(idx)
            coo_v.append(vals)
            rhs.append(r - float(vals @ self.lower[idx]))
        for t, j in enumerate(self.ub_vars):
            i = lp.num_rows + t
            coo_r.append(np.array([i, i], dtype=np.int64))
            coo_c.append(np.array([j, n + t], dtype=np.int64))
            coo_v.append(np.array([1.0, 1.0]))
            rhs.append(lp.bounds[j][1] - self.lower[j])
        rows_cat = np.concatenate(coo_r) if coo_r else np.zeros(0, dtype=np.int64)
        cols_cat = np.concatenate(coo_c) if coo_c else np.zeros(0, dtype=np.int64)
        vals_cat = np.concatenate(coo_v) if coo_v else np.zeros(0)
        self.A = sp.csc_matrix(
            (vals_cat, (rows_cat, cols_cat)),
            shape=(self.num_std_rows, self.num_std_vars),
        )
        self.b = np.asarray(rhs, dtype=float)

        self.c = np.zeros(self.num_std_vars)
        for j, v in lp.objective:
            self.c[j] += v
        self.objective_shift = float(sum(v * self.lower[j] for j, v in lp.objective))

        # rows with negative rhs are negated so the all-artificial start is
        # feasible; remember the signs to restore user-facing duals
        self.row_sign = np.where(self.b < 0, -1.0, 1.0)
        if np.any(self.row_sign < 0):
            D = sp.diags(self.row_sign).tocsc()
            self.A = (D @ self.A).tocsc()
            self.b = self.row_sign * self.b


class _Core:
    """State of one revised-simplex run over a fixed row set."""

    def __init__(self, A: sp.csc_matrix, b: Array, limit: int):
        self.A = A
        self.AT = A.T.tocsr()
        self.b = b
        self.m = A.shape[0]
        self.ncols = A.shape[1]
        self.limit = limit
        self.iterations = 0
        self.degenerate = 0
        self.bland_pivots = 0
        self.basis = np.zeros(self.m, dtype=np.int64)
        self.Binv = np.eye(self.m)
        self.xB = b.copy()
        self._rank1 = np.empty((self.m, self.m))

    def column(self, j: int) -> Array:
        a = self.A
        start, end = a.indptr[j], a.indptr[j + 1]
        d = np.zeros(self.m)
        d[a.indices[start:end]] = a.data[start:end]
        return d

    def ftran(self, j: int) -> Array:
        a = self.A
        start, end = a.indptr[j], a.indptr[j + 1]
        if end == start:
            return np.zeros(self.m)
        return self.Binv[:, a.indices[start:end]] @ a.data[start:end]

    def refactor(self):
        B = self.A[:, self.basis].toarray()
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise LpError("basis matrix became singular") from exc
        self.xB = self.Binv @ self.b
        np.clip(self.xB, 0.0, None, out=self.xB)

    def run(self, c: Array, can_enter: Array, retire_on_leave: Array,
            opt_tol: float, refactor_every: int) -> str:
        """Pivot until optimal or unbounded; mutates the basis state."""
        m = self.m
        since_refactor = 0
        while True:
            if self.iterations >= self.limit:
                raise IterationLimitExceeded(
                    f"simplex exceeded the pivot budget of {self.limit}",
                    self.iterations,
                )
            cB = c[self.basis]
            y = self.Binv.T @ cB
            r = c - self.AT @ y
            r[~can_enter] = -np.inf
            r[self.basis] = -np.inf

            use_bland = self.degenerate >= BLAND_AFTER
            if use_bland:
                candidates = np.nonzero(r > opt_tol)[0]
                if candidates.size == 0:
                    return OPTIMAL
                j = int(candidates[0])
                self.bland_pivots += 1
            else:
                j = int(np.argmax(r))
                if r[j] <= opt_tol:
                    return OPTIMAL

            d = self.ftran(j)
            pos = d > PIVOT_TOL
            if not np.any(pos):
                return UNBOUNDED
            ratios = np.full(m, np.inf)
            ratios[pos] = self.xB[pos] / d[pos]
            theta = float(ratios.min())
            tie = ratios <= theta + (abs(theta) * 1e-9 + 1e-12)
            tie_rows = np.nonzero(tie)[0]
            if use_bland:
                rr = int(tie_rows[np.argmin(self.basis[tie_rows])])
            else:
                rr = int(tie_rows[np.argmax(d[tie_rows])])
            theta = float(self.xB[rr] / d[rr])

            leaving = self.basis[rr]
            if retire_on_leave[leaving]:
                can_enter[leaving] = False
            self.xB -= theta * d
            self.xB[rr] = theta
            np.clip(self.xB, 0.0, None, out=self.xB)
            self.basis[rr] = j

            pivrow = self.Binv[rr] / d[rr]
            np.multiply(d[:, None], pivrow[None, :], out=self._rank1)
            np.subtract(self.Binv, self._rank1, out=self.Binv)
            self.Binv[rr] = pivrow

            if theta <= DEGENERATE_STEP:
                self.degenerate += 1
            else:
                self.degenerate = 0
            self.iterations += 1
            since_refactor += 1
            if since_refactor >= refactor_every:
                self.refactor()
                since_refactor = 0


def simplex_solve(lp: LinearProgram, *, max_iterations: Optional[int] = None,
                  refactor_every: int = 1500) -> LpSolution:
    """Maximize the LP's objective with a two-phase revised simplex.

    Returns:
        An :class:`LpSolution` with status ``optimal``, ``infeasible`` or
        ``unbounded``.

    Raises:
        IterationLimitExceeded: if the pivot budget (default
            ``50 * (rows + cols)`` in standard form) runs out.
        LpError: on malformed input or basis breakdown.
    """
    std = _Standardized(lp)
    m, n_std = std.num_std_rows, std.num_std_vars
    if max_iterations is None:
        max_iterations = 50 * (m + n_std)

    if m == 0:
        # no rows at all: each variable sits at whichever bound its
        # objective coefficient prefers (upper bounds became rows, so only
        # +inf uppers reach here)
        if any(v > 0 for _, v in lp.objective):
            return LpSolution(UNBOUNDED, math.inf, None, None, 0)
        x = std.lower.copy()
        obj = float(sum(v * x[j] for j, v in lp.objective))
        return LpSolution(OPTIMAL, obj, x, np.zeros(0), 0,
                          basis=(), kept_rows=(), diagnostics={"phase1_iterations": 0})

    A1 = sp.hstack([std.A, sp.identity(m, format="csc")], format="csc")
    core = _Core(A1, std.b, max_iterations)
    core.basis = np.arange(n_std, n_std + m, dtype=np.int64)
    artificial = np.zeros(n_std + m, dtype=bool)
    artificial[n_std:] = True

    c1 = np.zeros(n_std + m)
    c1[n_std:] = -1.0
    can_enter = np.ones(n_std + m, dtype=bool)
    can_enter[n_std:] = False  # artificials never re-enter
    status = core.run(c1, can_enter, retire_on_leave=artificial,
                      opt_tol=PHASE1_OPT_TOL, refactor_every=refactor_every)
    if status != OPTIMAL:  # pragma: no cover - phase 1 is always bounded
        raise LpError("phase 1 terminated abnormally")
    core.refactor()
    art_mass = float(core.xB[artificial[core.basis]].sum())
    phase1_iterations = core.iterations
    if art_mass > FEASIBILITY_TOL:
        return LpSolution(INFEASIBLE, math.nan, None, None, core.iterations,
                          diagnostics={"phase1_iterations": phase1_iterations,
                                       "artificial_mass": art_mass})

    # drive lingering artificials out of the basis; rows that offer no pivot
    # are dependent on the others and get dropped
    drop = []
    for p in np.nonzero(artificial[core.basis])[0]:
        t = core.AT @ core.Binv[int(p)]
        t[artificial] = 0.0
        t[core.basis] = 0.0
        jj = int(np.argmax(np.abs(t)))
        if abs(t[jj]) > PIVOT_TOL:
            d = core.ftran(jj)
            pivrow = core.Binv[int(p)] / d[int(p)]
            np.multiply(d[:, None], pivrow[None, :], out=core._rank1)
            np.subtract(core.Binv, core._rank1, out=core.Binv)
            core.Binv[int(p)] = pivrow
            core.basis[int(p)] = jj
            core.xB[int(p)] = 0.0
        else:
            drop.append(int(p))

    if drop:
        art_rows = sorted(int(core.basis[p]) - n_std for p in drop)
        keep_mask = np.ones(m, dtype=bool)
        keep_mask[art_rows] = False
        kept_rows = tuple(int(i) for i in np.nonzero(keep_mask)[0])
        basis = np.array([core.basis[p] for p in range(m)
                          if int(p) not in set(drop)], dtype=np.int64)
        A2 = std.A[keep_mask].tocsc()
        b2 = std.b[keep_mask]
    else:
        kept_rows = tuple(range(m))
        basis = core.basis.copy()
        A2 = std.A
        b2 = std.b

    if np.any(basis >= n_std):  # pragma: no cover - defensive
        raise LpError("artificial variable survived redundancy elimination")

    core2 = _Core(A2, b2, max_iterations)
    core2.iterations = core.iterations
    core2.basis = basis
    core2.refactor()
    can_enter2 = np.ones(n_std, dtype=bool)
    status = core2.run(std.c, can_enter2, retire_on_leave=np.zeros(n_std, dtype=bool),
                       opt_tol=OPTIMALITY_TOL, refactor_every=refactor_every)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, math.inf, None, None, core2.iterations,
                          diagnostics={"phase1_iterations": phase1_iterations})

    core2.refactor()
    x_std = np.zeros(n_std)
    x_std[core2.basis] = core2.xB
    x = x_std[: lp.num_vars] + std.lower
    objective = float(std.c[: lp.num_vars] @ x_std[: lp.num_vars]) + std.objective_shift

    cB = std.c[core2.basis]
    y = core2.Binv.T @ cB
    reduced = std.c - core2.AT @ y
    dual_violation = float(max(0.0, reduced.max(initial=0.0)))
    compl_slack = float(np.abs(x_std * reduced).max(initial=0.0))
    gap = abs(objective - std.objective_shift - float(b2 @ y))
    gap_rel = gap / max(1.0, abs(objective))

    dual = np.zeros(std.num_user_rows)
    for pos, i in enumerate(kept_rows):
        if i < std.num_user_rows:
            dual[i] = std.row_sign[i] * y[pos]

    diagnostics = {
        "phase1_iterations": phase1_iterations,
        "rows_dropped": m - len(kept_rows),
        "bland_pivots": core.bland_pivots + core2.bland_pivots,
        "feasibility_residual": max_equality_violation(lp, x),
        "bound_violation": max_bound_violation(lp, x),
        "dual_violation": dual_violation,
        "complementary_slackness": compl_slack,
        "duality_gap_rel": gap_rel,
    }
    return LpSolution(OPTIMAL, objective, x, dual, core2.iterations,
                      basis=tuple(int(j) for j in core2.basis),
                      kept_rows=kept_rows, diagnostics=diagnostics)
