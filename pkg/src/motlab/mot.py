"""Discrete martingale optimal transport.

A coupling of discrete marginals is a mass matrix on the product of their
supports. It is a martingale coupling iff every row has barycenter equal to
its x-atom, i.e. sum_j q[i, j] (y_j - x_i) = 0 for each i. These per-atom
identities are imposed unscaled (not divided by the row mass).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .costexpr import PayoffExpr, as_payoff, parse
from .lp import StandardLp, solve_lp
from .measures import MERGE_TOL, ORDER_TOL, DiscreteMeasure, MeasurePair, OrderVerdict, check_convex_order, group_means


class NotInConvexOrder(ValueError):
    def __init__(self, verdict: OrderVerdict):
        super().__init__(f"marginals are not in convex order ({verdict.status}, witness={verdict.witness})")
        self.verdict = verdict


class NotInMartingaleSet(ValueError):
    pass


def _merge_rows(atoms: np.ndarray, mass: np.ndarray):
    """Sort atoms and sum the rows of atoms closer than MERGE_TOL."""
    order = np.argsort(atoms, kind="stable")
    atoms, mass = atoms[order], mass[order]
    group = np.concatenate([[0], np.cumsum(np.diff(atoms) >= MERGE_TOL)])
    if group[-1] + 1 == atoms.size:
        return atoms, mass
    merged = group_means(atoms, mass.sum(axis=1), group)
    out = np.zeros((group[-1] + 1, mass.shape[1]))
    np.add.at(out, group, mass)
    return merged, out


@dataclass(frozen=True, eq=False)
class Coupling:
    """Finitely supported probability measure on R^2 in matrix form.

    Canonical form: increasing atoms on both axes, no all-zero rows or
    columns, total mass 1.
    """

    x_atoms: np.ndarray
    y_atoms: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x_atoms, dtype=float).ravel()
        y = np.asarray(self.y_atoms, dtype=float).ravel()
        q = np.array(self.mass, dtype=float, ndmin=2)
        if q.shape != (x.size, y.size):
            raise ValueError(f"mass is {q.shape}, expected {(x.size, y.size)}")
        if not (np.isfinite(x).all() and np.isfinite(y).all() and np.isfinite(q).all()):
            raise ValueError("coupling data must be finite")
        if q.min(initial=0.0) < -1e-9:
            raise ValueError("coupling mass must be nonnegative")
        q = np.maximum(q, 0.0)
        rows, cols = q.sum(axis=1) > 0, q.sum(axis=0) > 0
        x, y, q = x[rows], y[cols], q[np.ix_(rows, cols)]
        if q.size == 0:
            raise ValueError("coupling has no mass")
        x, q = _merge_rows(x, q)
        y, qt = _merge_rows(y, q.T)
        q = qt.T.copy()
        q = q / q.sum()
        for name, a in (("x_atoms", x), ("y_atoms", y), ("mass", q)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __eq__(self, other):
        if not isinstance(other, Coupling):
            return NotImplemented
        return (np.array_equal(self.x_atoms, other.x_atoms) and np.array_equal(self.y_atoms, other.y_atoms)
                and np.array_equal(self.mass, other.mass))

    __hash__ = None

    def __repr__(self):
        return f"Coupling(x_atoms={self.x_atoms.tolist()}, y_atoms={self.y_atoms.tolist()}, mass={self.mass.tolist()})"

    @property
    def shape(self):
        return self.mass.shape

    def first_marginal(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.x_atoms, self.mass.sum(axis=1))

    def second_marginal(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.y_atoms, self.mass.sum(axis=0))

    def marginals(self) -> MeasurePair:
        return MeasurePair(self.first_marginal(), self.second_marginal())

    def cells(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(x, y, mass) of the positive-mass cells, row-major."""
        i, j = np.nonzero(self.mass)
        return self.x_atoms[i], self.y_atoms[j], self.mass[i, j]

    def integrate(self, payoff) -> float:
        return float(np.sum(as_payoff(payoff).grid(self.x_atoms, self.y_atoms) * self.mass))

    def mix(self, other: "Coupling", t: float) -> "Coupling":
        """(1 - t) self + t other on the union grid."""
        xs = np.union1d(self.x_atoms, other.x_atoms)
        ys = np.union1d(self.y_atoms, other.y_atoms)
        return Coupling(xs, ys, (1 - t) * self.embed(xs, ys) + t * other.embed(xs, ys))

    def embed(self, xs, ys) -> np.ndarray:
        """Mass matrix placed on a larger grid containing this support."""
        ix = np.searchsorted(xs, self.x_atoms)
        iy = np.searchsorted(ys, self.y_atoms)
        out = np.zeros((len(xs), len(ys)))
        out[np.ix_(ix, iy)] = self.mass
        return out

    def to_dict(self) -> dict:
        return {"x_atoms": self.x_atoms.tolist(), "y_atoms": self.y_atoms.tolist(), "mass": self.mass.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Coupling":
        try:
            return cls(d["x_atoms"], d["y_atoms"], d["mass"])
        except (KeyError, TypeError) as exc:
            raise ValueError("coupling object needs 'x_atoms', 'y_atoms' and 'mass'") from exc

    @classmethod
    def from_json(cls, text: str) -> "Coupling":
        return cls.from_dict(json.loads(text))

    @classmethod
    def product(cls, mu: DiscreteMeasure, nu: DiscreteMeasure) -> "Coupling":
        return cls(mu.atoms, nu.atoms, np.outer(mu.weights, nu.weights))

    @classmethod
    def identity(cls, mu: DiscreteMeasure) -> "Coupling":
        return cls(mu.atoms, mu.atoms, np.diag(mu.weights))


def martingale_residual(q: Coupling) -> float:
    drift = q.mass @ q.y_atoms - q.mass.sum(axis=1) * q.x_atoms
    return float(np.abs(drift).max())


def martingale_constraints(pair: MeasurePair) -> tuple[np.ndarray, np.ndarray]:
    """Equality system (A, b) for q in M(mu1, mu2), q flattened row-major."""
    x, y = pair.mu1.atoms, pair.mu2.atoms
    n1, n2 = x.size, y.size
    A = np.zeros((2 * n1 + n2 - 1, n1 * n2))
    for i in range(n1):
        A[i, i * n2:(i + 1) * n2] = 1.0
        A[n1 + n2 - 1 + i, i * n2:(i + 1) * n2] = y - x[i]
    for j in range(n2 - 1):
        A[n1 + j, j::n2] = 1.0
    b = np.concatenate([pair.mu1.weights, pair.mu2.weights[:-1], np.zeros(n1)])
    return A, b


def martingale_lp(pair: MeasurePair, payoff: np.ndarray, sense: str = "max") -> StandardLp:
    A, b = martingale_constraints(pair)
    return StandardLp(np.asarray(payoff, float).ravel(), A, b, sense)


def is_martingale_feasible(pair: MeasurePair) -> bool:
    """LP feasibility of M(mu1, mu2), without consulting the order check."""
    lp = martingale_lp(pair, np.zeros((len(pair.mu1), len(pair.mu2))), "min")
    return solve_lp(lp).status == "optimal"


@dataclass(frozen=True)
class MotProblem:
    pair: MeasurePair
    payoff: PayoffExpr
    sense: str = "max"

    def __post_init__(self):
        object.__setattr__(self, "payoff", as_payoff(self.payoff))
        if self.sense not in ("max", "min"):
            raise ValueError(f"sense must be 'max' or 'min', got {self.sense!r}")

    def payoff_grid(self) -> np.ndarray:
        return self.payoff.grid(self.pair.mu1.atoms, self.pair.mu2.atoms)

    def to_dict(self) -> dict:
        return {**self.pair.to_dict(), "cost": str(self.payoff), "sense": self.sense}

    @classmethod
    def from_dict(cls, d: dict) -> "MotProblem":
        return cls(MeasurePair.from_dict(d), parse(d["cost"]), d.get("sense", "max"))


@dataclass(frozen=True)
class SolveReport:
    value: float
    optimizer: Coupling
    martingale_residual: float
    lp_iterations: int

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "optimizer": self.optimizer.to_dict(),
            "martingale_residual": self.martingale_residual,
            "lp_iterations": self.lp_iterations,
        }


def _require_order(pair: MeasurePair, tol: float = ORDER_TOL) -> None:
    verdict = check_convex_order(pair.mu1, pair.mu2, tol)
    if not verdict.holds:
        raise NotInConvexOrder(verdict)


def _coupling_from_primal(pair: MeasurePair, x: np.ndarray) -> Coupling:
    return Coupling(pair.mu1.atoms, pair.mu2.atoms, x[: len(pair.mu1) * len(pair.mu2)].reshape(len(pair.mu1), -1))


def solve_mot(problem: MotProblem) -> SolveReport:
    """Optimise sum q * Phi over M(mu1, mu2)."""
    _require_order(problem.pair)
    sol = solve_lp(martingale_lp(problem.pair, problem.payoff_grid(), problem.sense))
    if sol.status != "optimal":
        raise AssertionError(f"order check passed but martingale LP is {sol.status}")
    q = _coupling_from_primal(problem.pair, sol.primal)
    return SolveReport(sol.value, q, martingale_residual(q), sol.iterations)


def default_directions(problem: MotProblem, n_random: int = 4, seed: int = 0) -> list:
    phi = problem.payoff_grid()
    dirs = [phi, -phi]
    for text in ("abs(x2 - x1)", "x1 * x2"):
        g = parse(text).grid(problem.pair.mu1.atoms, problem.pair.mu2.atoms)
        dirs += [g, -g]
    rng = np.random.default_rng(seed)
    dirs += [rng.standard_normal(phi.shape) for _ in range(n_random)]
    return dirs


def optimizer_probe(
    problem: MotProblem,
    directions: Optional[Sequence[Union[PayoffExpr, str, np.ndarray]]] = None,
    eps: Optional[float] = None,
    seed: int = 0,
) -> list[Coupling]:
    """Extreme points of the eps-optimal face, one per probe direction.

    Each probe maximises sum q * psi over M(mu1, mu2) intersected with
    {payoff within eps of the optimum}.
    """
    report = solve_mot(problem)
    m = report.value
    if eps is None:
        eps = 1e-8 * (1.0 + abs(m))
    if directions is None:
        directions = default_directions(problem, seed=seed)
    xs, ys = problem.pair.mu1.atoms, problem.pair.mu2.atoms
    phi = problem.payoff_grid().ravel()
    A, b = martingale_constraints(problem.pair)
    # payoff row with a slack: phi.q - s = m - eps (max) or phi.q + s = m + eps (min)
    N = phi.size
    A_face = np.zeros((A.shape[0] + 1, N + 1))
    A_face[:-1, :N] = A
    A_face[-1, :N] = phi
    if problem.sense == "max":
        A_face[-1, N], rhs_face = -1.0, m - eps
    else:
        A_face[-1, N], rhs_face = 1.0, m + eps
    b_face = np.concatenate([b, [rhs_face]])
    out = []
    for psi in directions:
        if isinstance(psi, (str, PayoffExpr)):
            psi = as_payoff(psi).grid(xs, ys)
        obj = np.concatenate([np.asarray(psi, float).ravel(), [0.0]])
        sol = solve_lp(StandardLp(obj, A_face, b_face, "max"))
        if sol.status != "optimal":
            raise AssertionError(f"probe LP is {sol.status}")
        out.append(_coupling_from_primal(problem.pair, sol.primal))
    return out


def plane_cost(xa, ya, xb, yb) -> np.ndarray:
    """|x - x'| + |y - y'| between two point lists."""
    xa, ya, xb, yb = (np.asarray(v, float) for v in (xa, ya, xb, yb))
    return np.abs(xa[:, None] - xb[None, :]) + np.abs(ya[:, None] - yb[None, :])


MEMBER_TOL = 1e-12


def _is_member(q: Coupling, pair: MeasurePair, payoff=None, bound=None, sense: str = "max") -> bool:
    """q already lies in M(pair) (and in the payoff face, if given) to rounding."""
    xs, ys = pair.mu1.atoms, pair.mu2.atoms
    if not (np.isin(q.x_atoms, xs).all() and np.isin(q.y_atoms, ys).all()):
        return False
    grid = q.embed(xs, ys)
    scale = 1.0 + max(np.abs(xs).max(), np.abs(ys).max())
    if np.abs(grid.sum(axis=1) - pair.mu1.weights).max() > MEMBER_TOL:
        return False
    if np.abs(grid.sum(axis=0) - pair.mu2.weights).max() > MEMBER_TOL:
        return False
    if martingale_residual(q) > MEMBER_TOL * scale:
        return False
    if payoff is None:
        return True
    achieved = float((grid * np.asarray(payoff, float)).sum())
    return achieved >= bound if sense == "max" else achieved <= bound


def nearest_martingale_coupling(
    q: Coupling,
    pair: MeasurePair,
    payoff: Optional[np.ndarray] = None,
    bound: Optional[float] = None,
    sense: str = "max",
) -> tuple[float, Coupling]:
    """Minimise W1(q, q') over q' in M(pair), optionally inside a payoff face.

    The transport plan pi between the positive cells of q and the product
    grid of ``pair`` is the only unknown; q' is its column sum, so the
    martingale and marginal constraints on q' become constraints on pi.
    With ``payoff``/``bound`` the extra constraint sum q' * payoff >= bound
    (<= for sense "min") is added.
    """
    _require_order(pair)
    if _is_member(q, pair, payoff, bound, sense):
        return 0.0, q
    qx, qy, qm = q.cells()
    xs, ys = pair.mu1.atoms, pair.mu2.atoms
    n1, n2 = xs.size, ys.size
    G = n1 * n2
    S = qm.size
    gx, gy = np.repeat(xs, n2), np.tile(ys, n1)
    cost = plane_cost(qx, qy, gx, gy)  # S x G

    A_m, b_m = martingale_constraints(pair)  # acts on q' (G columns)
    rows_m = A_m.shape[0]
    extra = payoff is not None
    n_var = S * G + (1 if extra else 0)
    A = np.zeros((rows_m + S + (1 if extra else 0), n_var))
    # constraints on q' = sum_s pi[s, :]
    A[:rows_m, : S * G] = np.tile(A_m, (1, S))
    for s in range(S):
        A[rows_m + s, s * G:(s + 1) * G] = 1.0
    b = np.concatenate([b_m, qm])
    if extra:
        A[-1, : S * G] = np.tile(np.asarray(payoff, float).ravel(), S)
        A[-1, -1] = -1.0 if sense == "max" else 1.0
        b = np.concatenate([b, [bound]])
    obj = np.concatenate([cost.ravel(), [0.0] if extra else []])
    sol = solve_lp(StandardLp(obj, A, b, "min"))
    if sol.status != "optimal":
        raise AssertionError(f"projection LP is {sol.status}")
    qprime = sol.primal[: S * G].reshape(S, G).sum(axis=0).reshape(n1, n2)
    return max(sol.value, 0.0), Coupling(xs, ys, qprime)


def project_to_martingale_set(q: Coupling, pair: MeasurePair) -> tuple[float, Coupling]:
    """W1 distance (ground cost |dx| + |dy|) from q to M(pair), with a minimiser."""
    return nearest_martingale_coupling(q, pair)


def distance_to_optimal_face(q: Coupling, problem: MotProblem, eps: Optional[float] = None,
                             value: Optional[float] = None) -> tuple[float, Coupling]:
    """W1 distance from q to the eps-optimal face of ``problem``."""
    if value is None:
        value = solve_mot(problem).value
    if eps is None:
        eps = 1e-6 * (1.0 + abs(value))
    bound = value - eps if problem.sense == "max" else value + eps
    return nearest_martingale_coupling(q, problem.pair, problem.payoff_grid(), bound, problem.sense)
