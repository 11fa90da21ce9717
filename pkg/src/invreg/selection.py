"""Penalized selection of a regularization operator.

The data-independent penalty charges each candidate its noise footprint,

    pen(k) = r sigma^2 (1 + L_k) [Tr(R_k^t R_k) + rho^2(R_k)],

and the selected candidate minimizes contrast + penalty.  The contrast is
the squared coefficient-space distance between the candidate estimate and
the maximal-model inversion of the data: the residual y - T xhat_k mapped
back through the generalized inverse of the projected operator.  For
projection candidates this reduces to the classical model-selection
objective and is equivalent to hard thresholding of the inverted
coefficients (see select_by_threshold).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .operator import DiscretizedOperator
from .regularizers import Regularizer, RegularizerFamily


@dataclass
class PenaltyConfig:
    """Constants of the penalty and of the candidate-weight budget.

    ``sigma2`` is the (known) noise variance; the theory requires r > 2.
    ``weights`` holds one L_k >= 0 per candidate (None means all zero) and
    ``kraft_d`` the tail-bound constant entering the weight budget.
    """

    sigma2: float
    r: float = 2.5
    weights: np.ndarray | None = None
    kraft_d: float = 1.0

    def __post_init__(self):
        if not self.r > 2:
            raise ParameterError("penalty constant r must exceed 2")
        if not self.sigma2 > 0:
            raise ParameterError("noise variance sigma2 must be positive")
        if not self.kraft_d > 0:
            raise ParameterError("kraft constant d must be positive")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0):
                raise ParameterError("candidate weights must be nonnegative")
            self.weights = w

    def weights_for(self, size: int) -> np.ndarray:
        if self.weights is None:
            return np.zeros(size)
        if self.weights.size != size:
            raise DimensionError(
                f"{self.weights.size} weights supplied for {size} candidates")
        return self.weights


@dataclass
class CandidateRow:
    k: int
    label: str
    parameter: float
    contrast: float
    penalty: float
    objective: float
    chosen: bool = False


@dataclass
class SelectionResult:
    """Outcome of the penalized argmin over a candidate family."""

    chosen: int
    per_candidate: list[CandidateRow]
    estimate: np.ndarray
    kraft_sum: float

    def chosen_row(self) -> CandidateRow:
        return self.per_candidate[self.chosen]

    def to_csv_rows(self):
        header = ["k", "label", "parameter", "contrast", "penalty", "objective",
                  "chosen"]
        rows = [[r.k, r.label, repr(r.parameter), repr(r.contrast), repr(r.penalty),
                 repr(r.objective), int(r.chosen)] for r in self.per_candidate]
        return header, rows


def penalty(reg: Regularizer, cfg: PenaltyConfig, k: int = 0) -> float:
    """pen(k) from the candidate's cached trace and spectral radius."""
    L = 0.0 if cfg.weights is None else float(cfg.weights[k])
    return cfg.r * cfg.sigma2 * (1.0 + L) * (reg.trace_stat + reg.radius_stat)


def _contrast_from_coefficients(f: np.ndarray, lam: np.ndarray,
                                c: np.ndarray) -> float:
    back = (1.0 - lam * f) * c / lam
    return float(np.dot(back, back))


def contrast(reg: Regularizer, op: DiscretizedOperator, y) -> float:
    """Squared distance, after inversion on the maximal model, between the
    data and the image of the candidate estimate."""
    c = op.svd_coefficients(y)
    return _contrast_from_coefficients(reg.filter_values, op.singular_values, c)


def _kraft_terms(trace: np.ndarray, radius: np.ndarray, n: int, d_const: float,
                 weights: np.ndarray) -> np.ndarray:
    ratio = trace / radius
    return (2.0 * (np.sqrt(d_const * ratio) + 1.0)
            * (n * radius / d_const)
            * np.exp(-np.sqrt(d_const * weights * (ratio + 1.0))))


def kraft_sum(family: RegularizerFamily, cfg: PenaltyConfig,
              op: DiscretizedOperator | None = None, n: int | None = None) -> float:
    """Weight-damped sum over the family controlling the union bound.

    The middle factor is read as n * rho^2(R_k), the only interpretation
    under which the summand is free of n for an orthonormal design.
    """
    if n is None:
        n = family.candidates[0].op.n
    w = cfg.weights_for(len(family))
    terms = _kraft_terms(family.trace_stats(), family.radius_stats(), n,
                         cfg.kraft_d, w)
    return float(np.sum(terms))


def default_weights(family: RegularizerFamily, cfg: PenaltyConfig,
                    op: DiscretizedOperator | None = None, n: int | None = None,
                    target: float = 1.0, cap: float = 1e6) -> np.ndarray:
    """Smallest common weight L making the kraft sum reach the target.

    Found by bisection on the (strictly decreasing) map L -> kraft sum.
    When even the cap cannot reach the target a warning is emitted and the
    cap is returned.
    """
    if not target > 0:
        raise ParameterError("kraft target must be positive")
    if n is None:
        n = family.candidates[0].op.n
    tr = family.trace_stats()
    rad = family.radius_stats()

    def total(L: float) -> float:
        return float(np.sum(_kraft_terms(tr, rad, n, cfg.kraft_d,
                                         np.full(len(family), L))))

    if total(0.0) <= target:
        return np.zeros(len(family))
    if total(cap) > target:
        warnings.warn("kraft target unreachable below the bisection cap; "
                      "returning the cap", RuntimeWarning)
        return np.full(len(family), cap)
    lo, hi = 0.0, 1.0
    while total(hi) > target and hi < cap:
        hi = min(2.0 * hi, cap)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) > target:
            lo = mid
        else:
            hi = mid
    return np.full(len(family), hi)


def select(family: RegularizerFamily, cfg: PenaltyConfig,
           op: DiscretizedOperator, y) -> SelectionResult:
    """Penalized argmin over the family.

    Ties break toward the earlier (smoother) candidate; families are
    ordered smoothest first by construction.
    """
    c = op.svd_coefficients(y)
    lam = op.singular_values
    w = cfg.weights_for(len(family))
    rows = []
    best, best_obj = 0, math.inf
    for k, reg in enumerate(family):
        con = _contrast_from_coefficients(reg.filter_values, lam, c)
        pen = float(cfg.r * cfg.sigma2 * (1.0 + w[k])
                    * (reg.trace_stat + reg.radius_stat))
        obj = con + pen
        rows.append(CandidateRow(k, reg.label(), family.parameters[k], con, pen, obj))
        if obj < best_obj:
            best, best_obj = k, obj
    rows[best].chosen = True
    estimate = op.x_vectors @ (family.candidates[best].filter_values * c)
    return SelectionResult(best, rows, estimate, kraft_sum(family, cfg))


def select_by_threshold(op: DiscretizedOperator, y, cfg: PenaltyConfig,
                        m0: int | None = None) -> SelectionResult:
    """Nested-prefix projection selection via the thresholding form.

    Inverts the data on the maximal model once, then scans prefixes
    {1..j}: coordinate j survives when its squared inverted coefficient
    beats the marginal penalty increment.  Agrees exactly with the
    exhaustive argmin of ``select`` over the same prefixes.
    """
    if m0 is None:
        m0 = op.d
    if m0 < 1 or m0 > op.d:
        raise ParameterError(f"prefix bound must lie in [1, {op.d}]")
    c = op.svd_coefficients(y)
    lam = op.singular_values
    x = c / lam                              # inverted coefficients
    sq = (x * x)[:m0]
    inv2 = (1.0 / lam[:m0]) ** 2
    trace = np.cumsum(inv2) / op.n
    radius = np.maximum.accumulate(inv2) / op.n
    w = cfg.weights_for(m0)
    pens = cfg.r * cfg.sigma2 * (1.0 + w) * (trace + radius)
    total = float(np.sum(sq))
    cons = total - np.cumsum(sq)            # contrast of each prefix
    objs = cons + pens
    best = 0
    for j in range(1, m0):
        if objs[j] < objs[best]:
            best = j
    rows = [CandidateRow(j, f"projection(m={{1..{j + 1}}})", float(j + 1),
                         float(cons[j]), float(pens[j]), float(objs[j]))
            for j in range(m0)]
    rows[best].chosen = True
    f = np.zeros(op.d)
    f[: best + 1] = 1.0 / lam[: best + 1]
    estimate = op.x_vectors @ (f * c)
    kr = float(np.sum(_kraft_terms(trace, radius, op.n, cfg.kraft_d, w)))
    return SelectionResult(best, rows, estimate, kr)


def estimate_noise_variance(op: DiscretizedOperator, y) -> float:
    """Residual-based variance estimate from the maximal model.

    Auxiliary only: the selection theory takes sigma^2 as known, so this
    is never used unless explicitly called.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (op.n,):
        raise DimensionError(f"sample vector has length {y.size}, need {op.n}")
    if op.n <= op.d:
        raise ParameterError("maximal model leaves no residual degrees of freedom")
    c = op.svd_coefficients(y)
    fitted_energy = op.n * float(np.dot(c, c))
    return (float(np.dot(y, y)) - fitted_energy) / (op.n - op.d)
