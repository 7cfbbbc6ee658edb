"""Perturbation sweeps that probe continuity of the MOT value and of the
martingale-coupling correspondence (mu1, mu2) -> M(mu1, mu2).

A sweep walks a schedule of perturbed marginal pairs converging to a base
pair and records, per level, how far the perturbed objects are from the
limiting ones:

* ``value_continuity_sweep``: |m(pair_n) - m(base)|.
* ``lower_hemi_sweep``: distance from a fixed coupling in M(base) to M(pair_n).
* ``upper_hemi_sweep``: distance from an optimizer of pair_n to M(base) and to
  the eps-optimal face of the base problem.

Distances are W1 on R^2 with ground cost |dx| + |dy|.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .costexpr import as_payoff
from .measures import DiscreteMeasure, MeasurePair, check_convex_order, mixture, quantize, w_oplus
from .mot import (Coupling, MotProblem, NotInMartingaleSet, _require_order, distance_to_optimal_face,
                  martingale_residual, project_to_martingale_set, solve_mot)

KINDS = ("quantile_resolution", "mean_preserving_noise", "mixture_shift")
CSV_COLUMNS = ("level", "w_oplus_gap", "value_gap", "lower_hemi_dist", "upper_hemi_dist")
MAX_RETRIES = 100
BAND_FACTOR = 2.0
BAND_ATOL = 1e-9


class SchemeViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class PerturbationScheme:
    kind: str
    levels: tuple
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "levels", tuple(self.levels))
        if self.kind == "quantile_resolution" and any(int(n) != n or n < 1 for n in self.levels):
            raise ValueError("quantile_resolution levels must be positive integers")
        if self.kind != "quantile_resolution" and any(s < 0 for s in self.levels):
            raise ValueError("noise levels must be nonnegative")
        if self.kind == "mixture_shift" and any(s > 1 for s in self.levels):
            raise ValueError("mixture_shift levels must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "levels": list(self.levels), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbationScheme":
        return cls(d["kind"], tuple(d["levels"]), int(d.get("seed", 0)))


def _spread(mu: DiscreteMeasure, sigma: float, rng: np.random.Generator) -> DiscreteMeasure:
    """Split every atom x into x - sigma*a, x + sigma*b with mean-preserving weights."""
    a = rng.uniform(0.5, 1.5, size=len(mu))
    b = rng.uniform(0.5, 1.5, size=len(mu))
    atoms = np.concatenate([mu.atoms - sigma * a, mu.atoms + sigma * b])
    weights = np.concatenate([mu.weights * b / (a + b), mu.weights * a / (a + b)])
    return DiscreteMeasure(atoms, weights)


def perturb(base: MeasurePair, kind: str, level, seed: int = 0) -> tuple[MeasurePair, int]:
    """One perturbed pair and the number of rejected draws it took."""
    if kind == "quantile_resolution":
        n = int(level)
        pair = MeasurePair(quantize(base.mu1, n), quantize(base.mu2, n))
        if not check_convex_order(pair.mu1, pair.mu2).holds:
            raise SchemeViolation(f"quantization at n={n} broke the convex order")
        return pair, 0
    if kind == "mixture_shift":
        t = float(level)
        pair = MeasurePair(mixture(base.mu1, DiscreteMeasure.dirac(base.mu1.mean), t), base.mu2)
        if not check_convex_order(pair.mu1, pair.mu2).holds:
            raise SchemeViolation(f"mixture shift at sigma={t} broke the convex order")
        return pair, 0
    if kind == "mean_preserving_noise":
        sigma = float(level)
        if sigma == 0:
            return base, 0
        rng = np.random.default_rng(seed)
        for rejected in range(MAX_RETRIES):
            pair = MeasurePair(base.mu1, _spread(base.mu2, sigma, rng))
            if check_convex_order(pair.mu1, pair.mu2).holds:
                return pair, rejected
        raise SchemeViolation(f"no order-preserving noise draw at sigma={sigma} in {MAX_RETRIES} tries")
    raise ValueError(f"unknown scheme kind {kind!r}")


def generate_sequence(base: MeasurePair, scheme: PerturbationScheme) -> list[MeasurePair]:
    _require_order(base)
    return [perturb(base, scheme.kind, lv, scheme.seed + k)[0] for k, lv in enumerate(scheme.levels)]


@dataclass
class StabilityRow:
    level: float
    w_oplus_gap: float
    value_gap: Optional[float] = None
    lower_hemi_dist: Optional[float] = None
    upper_hemi_dist: Optional[float] = None
    face_dist: Optional[float] = None


@dataclass
class StabilityReport:
    sweep: str
    scheme: PerturbationScheme
    rows: list
    reference_value: Optional[float] = None
    verdicts: dict = field(default_factory=dict)
    rejections: int = 0

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    def to_dict(self) -> dict:
        return {
            "sweep": self.sweep,
            "scheme": self.scheme.to_dict(),
            "reference_value": self.reference_value,
            "rows": [asdict(r) for r in self.rows],
            "verdicts": dict(self.verdicts),
            "rejections": self.rejections,
        }


def within_band(seq, factor: float = BAND_FACTOR, atol: float = BAND_ATOL) -> bool:
    """Each entry is at most ``factor`` times the smallest earlier entry."""
    running = np.inf
    for v in seq:
        if v > factor * running + atol:
            return False
        running = min(running, v)
    return True


def nonincreasing(seq, atol: float = 1e-12) -> bool:
    return all(b <= a + atol for a, b in zip(seq, seq[1:]))


def _threads(threads: Optional[int]) -> int:
    if threads is None:
        env = os.environ.get("MOTLAB_THREADS", "")
        threads = int(env) if env.strip() else 1
    if threads < 1:
        raise ValueError("thread count must be a positive integer")
    return threads


def _map(fn, items, threads):
    items = list(items)
    n = _threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def _levels(base: MeasurePair, scheme: PerturbationScheme):
    """(level, pair, rejections) per schedule entry; seeds are seed + index."""
    _require_order(base)
    out = []
    for k, lv in enumerate(scheme.levels):
        pair, rej = perturb(base, scheme.kind, lv, scheme.seed + k)
        out.append((lv, pair, rej))
    return out


def _terminal(seq, tolerance: float) -> bool:
    return bool(seq) and seq[-1] <= max(1e-6, tolerance)


def value_continuity_sweep(base: MeasurePair, payoff, scheme: PerturbationScheme, sense: str = "max",
                           tolerance: float = 1e-3, threads: Optional[int] = None) -> StabilityReport:
    payoff = as_payoff(payoff)
    m0 = solve_mot(MotProblem(base, payoff, sense)).value
    levels = _levels(base, scheme)

    def row(lv, pair, _rej):
        m = solve_mot(MotProblem(pair, payoff, sense)).value
        return StabilityRow(lv, w_oplus(pair, base), value_gap=abs(m - m0))

    rows = _map(row, levels, threads)
    gaps = [r.value_gap for r in rows]
    verdicts = {"value_terminal": _terminal(gaps, tolerance), "value_band": within_band(gaps)}
    if scheme.kind == "quantile_resolution":
        verdicts["w_oplus_nonincreasing"] = nonincreasing([r.w_oplus_gap for r in rows])
    return StabilityReport("value", scheme, rows, m0, verdicts, sum(l[2] for l in levels))


def lower_hemi_sweep(base: MeasurePair, target: Coupling, scheme: PerturbationScheme,
                     tolerance: float = 1e-3, threads: Optional[int] = None) -> StabilityReport:
    """Distance from a fixed martingale coupling of the base to each M(pair_n)."""
    scale = 1.0 + max(np.abs(target.x_atoms).max(), np.abs(target.y_atoms).max())
    if martingale_residual(target) > 1e-8 * scale:
        raise NotInMartingaleSet(f"target has martingale residual {martingale_residual(target):.3g}")
    marg = target.marginals()
    if w_oplus(marg, base) > 1e-8 * scale:
        raise NotInMartingaleSet("target marginals differ from the base pair")
    levels = _levels(base, scheme)

    def row(lv, pair, _rej):
        d, _ = project_to_martingale_set(target, pair)
        return StabilityRow(lv, w_oplus(pair, base), lower_hemi_dist=d)

    rows = _map(row, levels, threads)
    dist = [r.lower_hemi_dist for r in rows]
    verdicts = {"lower_terminal": _terminal(dist, tolerance), "lower_band": within_band(dist)}
    return StabilityReport("lower", scheme, rows, None, verdicts, sum(l[2] for l in levels))


def upper_hemi_sweep(base: MeasurePair, payoff, scheme: PerturbationScheme, sense: str = "max",
                     tolerance: float = 1e-3, eps: Optional[float] = None,
                     threads: Optional[int] = None) -> StabilityReport:
    """Distance from optimizers of each pair_n to M(base) and to the base eps-optimal face."""
    payoff = as_payoff(payoff)
    base_problem = MotProblem(base, payoff, sense)
    m0 = solve_mot(base_problem).value
    if eps is None:
        eps = 1e-6 * (1.0 + abs(m0))
    levels = _levels(base, scheme)

    def row(lv, pair, _rej):
        rep = solve_mot(MotProblem(pair, payoff, sense))
        d_set, _ = project_to_martingale_set(rep.optimizer, base)
        d_face, _ = distance_to_optimal_face(rep.optimizer, base_problem, eps=eps, value=m0)
        return StabilityRow(lv, w_oplus(pair, base), value_gap=abs(rep.value - m0),
                            upper_hemi_dist=d_set, face_dist=d_face)

    rows = _map(row, levels, threads)
    verdicts = {
        "set_terminal": _terminal([r.upper_hemi_dist for r in rows], tolerance),
        "face_terminal": _terminal([r.face_dist for r in rows], tolerance),
    }
    return StabilityReport("upper", scheme, rows, m0, verdicts, sum(l[2] for l in levels))


def _cell(v) -> str:
    if v is None:
        return ""
    return str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))


def emit_report(report: StabilityReport, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.rows:
            w.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue().encode()
    raise ValueError(f"unknown report format {fmt!r}")


def common_parent_pair(rng: np.random.Generator, n_atoms: int = 8, coarse: int = 8,
                       fine: int = 64) -> MeasurePair:
    """A convex-ordered pair obtained by quantizing one random grid measure.

    The parent lives on a random subset of a 1/32-spaced grid on [0, 1] with
    Dirichlet weights; mu2 is its resolution-``fine`` quantization and mu1 the
    resolution-``coarse`` one (coarse must divide fine), so mu1 <= mu2.
    """
    if fine % coarse:
        raise ValueError("coarse resolution must divide the fine one")
    grid = np.arange(33) / 32.0
    atoms = rng.choice(grid, size=n_atoms, replace=False)
    parent = DiscreteMeasure(atoms, rng.dirichlet(np.ones(n_atoms)))
    return MeasurePair(quantize(parent, coarse), quantize(parent, fine))
