"""Dense two-phase primal simplex and the optimal transport LP built on it.

Problems are in equality standard form ``A x = b, x >= 0``. The tableau is a
plain numpy array; pivots only touch rows with a nonzero entry in the
entering column, which keeps transport-style LPs (very sparse columns) cheap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .measures import DiscreteMeasure

PIVOT_TOL = 1e-10
REL_PIVOT_TOL = 1e-9
DEGENERATE_STREAK = 50
REFACTOR_EVERY = 50


class DimensionMismatch(ValueError):
    pass


class NonFiniteInput(ValueError):
    pass


class IterationLimit(RuntimeError):
    pass


@dataclass(frozen=True)
class StandardLp:
    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        A = np.asarray(self.constraint_matrix, dtype=float)
        b = np.asarray(self.rhs, dtype=float).ravel()
        if A.size == 0 and b.size == 0:
            A = A.reshape(0, c.size)
        if A.ndim != 2:
            raise DimensionMismatch("constraint matrix must be 2-d")
        if A.shape != (b.size, c.size):
            raise DimensionMismatch(f"matrix {A.shape} vs rhs {b.size}, objective {c.size}")
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if not (np.isfinite(c).all() and np.isfinite(A).all() and np.isfinite(b).all()):
            raise NonFiniteInput("LP data must be finite")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "rhs", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.constraint_matrix.shape


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float
    primal: np.ndarray
    iterations: int
    max_residual: float
    redundant_rows: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Rows 0..m-1 are constraints, row m holds reduced costs; last column is rhs.

    T[m, -1] stores minus the current objective value. ``data`` is the
    original [A | b] block and ``cost`` the cost vector over all columns;
    both are used to rebuild the tableau from scratch (reinversion), which
    bounds the drift accumulated by rank-one updates.
    """

    def __init__(self, data: np.ndarray, cost: np.ndarray, basis: np.ndarray, max_pivots: int):
        self.data = data
        self.cost = cost
        self.basis = basis
        self.T = np.empty((data.shape[0] + 1, data.shape[1]))
        self.pivots = 0
        self.max_pivots = max_pivots
        self.feas_tol = 1e-9 * (1.0 + float(np.abs(data[:, -1]).max(initial=0.0)))
        self.refactor()

    def refactor(self) -> None:
        T, m = self.T, self.data.shape[0]
        T[:m] = np.linalg.solve(self.data[:, self.basis], self.data)
        T[:m, self.basis] = np.eye(m)
        rhs = T[:m, -1]
        rhs[np.abs(rhs) < 1e-14] = 0.0
        cb = self.cost[self.basis]
        T[m, :-1] = self.cost - cb @ T[:m, :-1]
        T[m, self.basis] = 0.0
        T[m, -1] = -cb @ rhs

    def pivot(self, r: int, e: int) -> None:
        T = self.T
        T[r] /= T[r, e]
        col = T[:, e].copy()
        col[r] = 0.0
        rows = np.flatnonzero(col)
        if rows.size:
            T[rows] -= np.outer(col[rows], T[r])
        T[:, e] = 0.0
        T[r, e] = 1.0
        self.basis[r] = e
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise IterationLimit(f"simplex exceeded {self.max_pivots} pivots")
        if self.pivots % REFACTOR_EVERY == 0:
            self.refactor()

    def _price(self, ncols: int, cost_tol: float) -> int:
        d = self.T[-1, :ncols]
        e = int(np.argmin(d))
        return e if d[e] < -cost_tol else -1

    def _lex_row(self, rows: np.ndarray, piv: np.ndarray, ref: np.ndarray) -> int:
        """Lexicographically smallest row of B^-1 B_ref / pivot among tied rows.

        B^-1 B_ref is read off the tableau columns of the reference basis; it
        is the identity when the streak starts, so every row begins
        lexicographically positive and no basis can repeat.
        """
        L = self.T[np.ix_(rows, ref)] / piv[:, None]
        alive = np.arange(rows.size)
        for k in range(ref.size):
            v = L[alive, k]
            alive = alive[v <= v.min() + 1e-12 * (1.0 + np.abs(v).max())]
            if alive.size == 1:
                break
        return int(rows[alive[0]])

    def run(self, ncols: int, cost_tol: float) -> str:
        """Iterate to optimality over columns [0, ncols). Returns status."""
        T = self.T
        streak = 0
        ref = None
        while True:
            e = self._price(ncols, cost_tol)
            if e < 0:
                # confirm on a freshly rebuilt tableau before stopping
                self.refactor()
                e = self._price(ncols, cost_tol)
                if e < 0:
                    return "optimal"
            col = T[:-1, e]
            # pivots tiny relative to the column make the basis near singular
            rows = np.flatnonzero(col > max(PIVOT_TOL, REL_PIVOT_TOL * np.abs(col).max()))
            if rows.size == 0:
                return "unbounded"
            rhs = np.maximum(T[rows, -1], 0.0)
            piv = col[rows]
            ratios = rhs / piv
            # Harris bound: ratios within the feasibility slack of the minimum
            bound = ((rhs + self.feas_tol) / piv).min()
            ok = np.flatnonzero(ratios <= bound)
            if ref is None:
                k = ok[np.argmax(piv[ok])]
                r, best = int(rows[k]), ratios[k]
            else:
                r = self._lex_row(rows[ok], piv[ok], ref)
                best = ratios[np.searchsorted(rows, r)]
            # a step that moves the objective by less than the feasibility
            # tolerance counts as degenerate
            if best * abs(T[-1, e]) <= self.feas_tol:
                streak += 1
                if streak > DEGENERATE_STREAK and ref is None:
                    ref = self.basis.copy()
            else:
                streak, ref = 0, None
            self.pivot(r, e)


def solve_lp(lp: StandardLp, max_pivots: Optional[int] = None) -> LpSolution:
    """Two-phase dense simplex.

    Dantzig pricing with lowest-index tie-break and a Harris ratio test.
    After more than 50 consecutive degenerate pivots the leaving row is
    chosen by the lexicographic rule, which cannot cycle, until the next
    nondegenerate step. Redundant equality rows are detected at the end of
    phase 1 and removed.
    """
    A, b = lp.constraint_matrix, lp.rhs
    m, n = A.shape
    c = lp.objective if lp.sense == "min" else -lp.objective
    if max_pivots is None:
        max_pivots = 200 * (m + n)

    if m == 0:
        if np.any(c < 0):
            return LpSolution("unbounded", np.nan, np.zeros(n), 0, 0.0)
        return LpSolution("optimal", 0.0, np.zeros(n), 0, 0.0)

    flip = np.where(b < 0, -1.0, 1.0)
    Af = A * flip[:, None]
    bf = b * flip

    data1 = np.hstack([Af, np.eye(m), bf[:, None]])
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab = _Tableau(data1, cost1, np.arange(n, n + m), max_pivots)

    # phase 1: artificials never re-enter once they leave
    tab.run(n, PIVOT_TOL)
    infeas = float(tab.T[:m, -1][tab.basis >= n].sum())
    if infeas > 1e-9 * (1.0 + float(np.abs(b).max())):
        return LpSolution("infeasible", np.nan, np.zeros(n), tab.pivots, np.inf)

    redundant = []
    for r in range(m):
        if tab.basis[r] < n:
            continue
        row = np.abs(tab.T[r, :n])
        j = int(np.argmax(row))
        if row[j] > 1e-9:
            tab.pivot(r, j)
        else:
            redundant.append(r)
    keep = np.setdiff1d(np.arange(m), redundant)

    data2 = np.hstack([Af[keep], bf[keep, None]])
    tab2 = _Tableau(data2, c, tab.basis[keep].copy(), max_pivots - tab.pivots)
    status = tab2.run(n, PIVOT_TOL * max(1.0, float(np.abs(c).max(initial=0.0))))
    iterations = tab.pivots + tab2.pivots
    if status == "unbounded":
        return LpSolution("unbounded", -np.inf if lp.sense == "min" else np.inf,
                          np.zeros(n), iterations, np.inf, redundant)

    basis = tab2.basis
    x = np.zeros(n)
    x[basis] = tab2.T[:-1, -1]
    x = _refine(Af[keep], bf[keep], basis, x)
    x[(x < 0) & (x > -1e-9)] = 0.0
    value = float(lp.objective @ x)
    residual = float(np.abs(A @ x - b).max())
    return LpSolution("optimal", value, x, iterations, residual, redundant)


def _refine(A: np.ndarray, b: np.ndarray, basis: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Recompute basic values from the original data to shed pivot drift."""
    try:
        xb = np.linalg.solve(A[:, basis], b)
    except np.linalg.LinAlgError:
        return x
    if not np.all(np.isfinite(xb)) or xb.min() < -1e-9:
        return x
    y = np.zeros_like(x)
    y[basis] = xb
    if np.abs(A @ y - b).max() > np.abs(A @ x - b).max():
        return x
    return y


def transport_lp(mu: DiscreteMeasure, nu: DiscreteMeasure, cost, sense: str = "min") -> StandardLp:
    """Variables pi[i, j] in row-major order; last column-sum row dropped."""
    cost = np.asarray(cost, dtype=float)
    n1, n2 = len(mu), len(nu)
    if cost.shape != (n1, n2):
        raise DimensionMismatch(f"cost is {cost.shape}, expected {(n1, n2)}")
    A = np.zeros((n1 + n2 - 1, n1 * n2))
    for i in range(n1):
        A[i, i * n2:(i + 1) * n2] = 1.0
    for j in range(n2 - 1):
        A[n1 + j, j::n2] = 1.0
    b = np.concatenate([mu.weights, nu.weights[:-1]])
    return StandardLp(cost.ravel(), A, b, sense)


def solve_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, cost, sense: str = "min") -> tuple[float, np.ndarray]:
    lp = transport_lp(mu, nu, cost, sense)
    sol = solve_lp(lp)
    # the product coupling is always feasible
    assert sol.status == "optimal", f"transport LP reported {sol.status}"
    return sol.value, sol.primal.reshape(len(mu), len(nu))
