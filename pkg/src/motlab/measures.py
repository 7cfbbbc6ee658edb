"""Finitely supported probability measures on the real line.

Everything downstream works with :class:`DiscreteMeasure`, which is always
kept in canonical form: strictly increasing atoms, strictly positive weights
summing to one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

MERGE_TOL = 1e-12
ORDER_TOL = 1e-9


class EmptySupport(ValueError):
    pass


class NonFinite(ValueError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms, weights = _canonical_arrays(self.atoms, self.weights)
        object.__setattr__(self, "atoms", _readonly(atoms))
        object.__setattr__(self, "weights", _readonly(weights))

    def __len__(self) -> int:
        return len(self.atoms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return np.array_equal(self.atoms, other.atoms) and np.array_equal(self.weights, other.weights)

    __hash__ = None

    def __repr__(self) -> str:
        return f"DiscreteMeasure(atoms={self.atoms.tolist()}, weights={self.weights.tolist()})"

    @property
    def mean(self) -> float:
        return float(self.weights @ self.atoms)

    def integrate(self, f) -> float:
        return float(self.weights @ np.asarray(f(self.atoms), dtype=float))

    def cdf_breaks(self) -> np.ndarray:
        """Cumulative weights, with the last entry pinned to exactly 1."""
        c = np.cumsum(self.weights)
        c[-1] = 1.0
        return c

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteMeasure":
        try:
            atoms, weights = d["atoms"], d["weights"]
        except (KeyError, TypeError) as exc:
            raise ValueError("measure object needs 'atoms' and 'weights'") from exc
        return cls(atoms, weights)

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        return cls.from_dict(json.loads(text))

    @classmethod
    def dirac(cls, x: float) -> "DiscreteMeasure":
        return cls([x], [1.0])

    @classmethod
    def uniform(cls, atoms) -> "DiscreteMeasure":
        atoms = list(atoms)
        return cls(atoms, [1.0] * len(atoms))


def _canonical_arrays(atoms, weights) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(atoms, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if x.shape != w.shape:
        raise ValueError(f"atoms and weights differ in length ({x.size} vs {w.size})")
    if x.size == 0:
        raise EmptySupport("no atoms given")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise NonFinite("atoms and weights must be finite")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    keep = w > 0
    x, w = x[keep], w[keep]
    if x.size == 0:
        raise EmptySupport("all weights are zero")

    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    # chain-merge neighbours closer than MERGE_TOL; the merged atom is the
    # weighted mean of its group so the first moment is untouched
    group = np.concatenate([[0], np.cumsum(np.diff(x) >= MERGE_TOL)])
    if group[-1] + 1 < x.size:
        x, w = group_means(x, w, group), np.bincount(group, weights=w)
    return x, w / w.sum()


def group_means(x: np.ndarray, w: np.ndarray, group: np.ndarray) -> np.ndarray:
    """Weighted mean of sorted x per contiguous group; exact when a group is constant."""
    starts = np.flatnonzero(np.diff(group, prepend=-1))
    lo, hi = np.minimum.reduceat(x, starts), np.maximum.reduceat(x, starts)
    mean = np.bincount(group, weights=w * x) / np.bincount(group, weights=w)
    return np.where(lo == hi, lo, np.clip(mean, lo, hi))


def canonicalize(atoms, weights) -> DiscreteMeasure:
    return DiscreteMeasure(atoms, weights)


@dataclass(frozen=True)
class MeasurePair:
    mu1: DiscreteMeasure
    mu2: DiscreteMeasure

    def to_dict(self) -> dict:
        return {"mu1": self.mu1.to_dict(), "mu2": self.mu2.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurePair":
        return cls(DiscreteMeasure.from_dict(d["mu1"]), DiscreteMeasure.from_dict(d["mu2"]))


def potential(mu: DiscreteMeasure, x):
    """u(x) = sum_i w_i |x - x_i|; accepts scalars or arrays."""
    xs = np.asarray(x, dtype=float)
    u = np.abs(xs[..., None] - mu.atoms) @ mu.weights
    return float(u) if u.ndim == 0 else u


@dataclass(frozen=True)
class OrderVerdict:
    status: str  # "holds" | "fails_mean" | "fails_at"
    witness: Optional[float] = None
    gap: float = 0.0

    @property
    def holds(self) -> bool:
        return self.status == "holds"

    def to_dict(self) -> dict:
        d = {"verdict": self.status, "gap": self.gap}
        if self.witness is not None:
            d["witness"] = self.witness
        return d


def check_convex_order(mu1: DiscreteMeasure, mu2: DiscreteMeasure, tol: float = ORDER_TOL) -> OrderVerdict:
    """Test mu1 <= mu2 in convex order through potential functions.

    With equal means the potential difference is piecewise linear with kinks
    only at atoms and vanishes at +-infinity, so checking the union of atoms
    suffices. The common mean is added as an extra probe point; on a failure
    the witness is the worst point, ties going to the one nearest the mean.
    """
    dm = mu1.mean - mu2.mean
    if abs(dm) > tol:
        return OrderVerdict("fails_mean", None, abs(dm))
    m = 0.5 * (mu1.mean + mu2.mean)
    pts = np.union1d(np.union1d(mu1.atoms, mu2.atoms), [m])
    excess = potential(mu1, pts) - potential(mu2, pts)
    worst = float(excess.max())
    if worst <= tol:
        return OrderVerdict("holds", None, max(worst, 0.0))
    near = np.nonzero(excess >= worst - tol)[0]
    k = near[np.argmin(np.abs(pts[near] - m))]
    return OrderVerdict("fails_at", float(pts[k]), worst)


def quantile(mu: DiscreteMeasure, u):
    """Left-continuous quantile function F^{-1}(u) = min{x : F(x) >= u}."""
    idx = np.searchsorted(mu.cdf_breaks(), np.asarray(u, dtype=float), side="left")
    return mu.atoms[np.minimum(idx, len(mu) - 1)]


def w1(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """1-Wasserstein distance as the L1 distance of quantile functions."""
    breaks = np.union1d(mu.cdf_breaks(), nu.cdf_breaks())
    breaks = np.concatenate([[0.0], breaks[breaks > 0]])
    lengths = np.diff(breaks)
    mids = breaks[:-1] + 0.5 * lengths
    return float(lengths @ np.abs(quantile(mu, mids) - quantile(nu, mids)))


def w_oplus(p: MeasurePair, q: MeasurePair) -> float:
    return w1(p.mu1, q.mu1) + w1(p.mu2, q.mu2)


def quantize(mu: DiscreteMeasure, n: int) -> DiscreteMeasure:
    """Replace each of n equal quantile blocks by its conditional mean.

    Atoms straddling a block boundary are split proportionally, so every
    block carries mass exactly 1/n and the mean is preserved.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return DiscreteMeasure.dirac(mu.mean)
    cdf = mu.cdf_breaks()
    breaks = np.union1d(cdf, np.arange(1, n) / n)
    breaks = np.concatenate([[0.0], breaks[breaks > 0]])
    lengths = np.diff(breaks)
    mids = breaks[:-1] + 0.5 * lengths
    block = np.minimum((mids * n).astype(int), n - 1)
    means = np.bincount(block, weights=lengths * quantile(mu, mids), minlength=n) * n
    return DiscreteMeasure(means, np.full(n, 1.0 / n))


def mixture(mu: DiscreteMeasure, nu: DiscreteMeasure, t: float) -> DiscreteMeasure:
    """(1 - t) mu + t nu."""
    return DiscreteMeasure(
        np.concatenate([mu.atoms, nu.atoms]),
        np.concatenate([(1.0 - t) * mu.weights, t * nu.weights]),
    )
