"""Disintegration of couplings and the adapted 1-Wasserstein distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import solve_ot
from .measures import DiscreteMeasure, w1
from .mot import Coupling, plane_cost


@dataclass(frozen=True)
class Disintegration:
    base: DiscreteMeasure
    kernels: tuple

    def reassemble(self, y_atoms) -> np.ndarray:
        """Mass matrix sum_i base[i] * kernel[i] on the given y grid."""
        y_atoms = np.asarray(y_atoms, float)
        out = np.zeros((len(self.base), y_atoms.size))
        for i, (w, k) in enumerate(zip(self.base.weights, self.kernels)):
            out[i, np.searchsorted(y_atoms, k.atoms)] = w * k.weights
        return out


def disintegrate(q: Coupling) -> Disintegration:
    rows = q.mass.sum(axis=1)
    kernels = tuple(DiscreteMeasure(q.y_atoms, q.mass[i] / rows[i]) for i in range(rows.size))
    return Disintegration(DiscreteMeasure(q.x_atoms, rows), kernels)


def aw_distance(q: Coupling, q_prime: Coupling) -> float:
    """Adapted W1: transport of first marginals with cost |x - x'| + W1(kernels)."""
    d, d2 = disintegrate(q), disintegrate(q_prime)
    cost = np.abs(d.base.atoms[:, None] - d2.base.atoms[None, :])
    for i, k in enumerate(d.kernels):
        for j, k2 in enumerate(d2.kernels):
            cost[i, j] += w1(k, k2)
    value, _ = solve_ot(d.base, d2.base, cost)
    return max(value, 0.0)


def w1_plane(q: Coupling, q_prime: Coupling) -> float:
    """W1 on R^2 with ground cost |dx| + |dy|, via the transport LP on cells."""
    xa, ya, ma = q.cells()
    xb, yb, mb = q_prime.cells()
    # cells are distinct points, so wrapping them as measures on an index axis is exact
    mu = DiscreteMeasure(np.arange(ma.size), ma)
    nu = DiscreteMeasure(np.arange(mb.size), mb)
    value, _ = solve_ot(mu, nu, plane_cost(xa, ya, xb, yb))
    return max(value, 0.0)
