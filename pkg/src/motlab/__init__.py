"""Discrete martingale optimal transport on the real line, with tools for
checking stability of the value and of the martingale-coupling set under
perturbations of the marginals."""

from .adapted import aw_distance, disintegrate, w1_plane
from .costexpr import evaluate, lint_linear_growth, parse
from .lp import StandardLp, solve_lp, solve_ot
from .measures import (DiscreteMeasure, MeasurePair, canonicalize, check_convex_order, potential, quantize, w1,
                       w_oplus)
from .mot import (Coupling, MotProblem, SolveReport, martingale_residual, optimizer_probe,
                  project_to_martingale_set, solve_mot)
from .stability import (PerturbationScheme, StabilityReport, emit_report, generate_sequence, lower_hemi_sweep,
                        upper_hemi_sweep, value_continuity_sweep)

__version__ = "0.1.0"
