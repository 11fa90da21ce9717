"""Synthetic risk studies: oracle ratios, rate exponents, noise projections.

Problems are generated on the midpoint cosine design, where the basis is
exactly orthonormal in the empirical norm, with a spectral-synthetic
operator of prescribed decay j^(-p).  The truth lives on a coefficient
range several times larger than the estimation model, so the truncation
bias of the maximal model is genuinely nonzero.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InsufficientDataError, ParameterError
from .operator import (
    DiscretizedOperator,
    SpectralSynthetic,
    build_design_matrix,
    choose_m0,
    cosine_basis,
    discretize_operator,
    midpoint_grid,
)
from .regularizers import RegularizerFamily, projection_family, tikhonov_family
from .selection import (
    PenaltyConfig,
    default_weights,
    kraft_sum,
    select,
    select_by_threshold,
)


# ---------------------------------------------------------------------------
# source conditions


@dataclass(frozen=True)
class SourceSpec:
    """Smoothness class of the truth: x0_j = lambda_j^(2 nu) omega_j.

    ``omega`` may be an explicit vector (checked against the radius), the
    name of a deterministic profile, or "random" for a seeded draw
    rescaled to the radius.  The default "log-uniform" profile puts equal
    energy per octave (|omega_j| ~ j^(-1/2), alternating signs), which
    makes the smoothness class tight: the bias of a smoothing level alpha
    then scales like alpha^(2 nu) instead of decaying faster.
    """

    nu: float
    rho: float = 1.0
    omega: object = "log-uniform"

    def __post_init__(self):
        if self.nu < 0:
            raise ParameterError("smoothness nu must be nonnegative")
        if not self.rho > 0:
            raise ParameterError("source radius must be positive")

    def omega_vector(self, size: int, seed: int = 0) -> np.ndarray:
        j = np.arange(1, size + 1)
        if isinstance(self.omega, str):
            if self.omega == "log-uniform":
                w = (-1.0) ** (j + 1) * j ** -0.5
            elif self.omega == "equal":
                w = (-1.0) ** (j + 1) * np.ones(size)
            elif self.omega == "random":
                rng = np.random.default_rng((seed, 0x03E6A))
                w = rng.standard_normal(size)
            else:
                raise ParameterError(f"unknown omega profile {self.omega!r}")
            return self.rho * w / np.linalg.norm(w)
        w = np.asarray(self.omega, dtype=float)
        if w.shape != (size,):
            raise ParameterError(f"omega must have length {size}")
        if np.linalg.norm(w) > self.rho * (1 + 1e-12):
            raise ParameterError("omega exceeds the source radius")
        return w.copy()

    def coefficients(self, p: float, size: int, seed: int = 0) -> np.ndarray:
        """Truth coefficients j^(-2 p nu) omega_j."""
        j = np.arange(1, size + 1, dtype=float)
        return j ** (-2.0 * p * self.nu) * self.omega_vector(size, seed)


@dataclass(frozen=True)
class SynthProblem:
    """A generated problem: operator, extended truth, clean samples."""

    op: DiscretizedOperator
    x0: np.ndarray
    sigma: float
    clean: np.ndarray

    @property
    def d_ext(self) -> int:
        return self.x0.size

    def tail_bias(self) -> float:
        """Truncation bias of the maximal model, squared."""
        return float(np.sum(self.x0[self.op.d:] ** 2))


def synth_problem(p: float, nu: float, rho: float, n: int, seed: int = 0,
                  sigma: float = 0.1, source: SourceSpec | None = None,
                  d_ext: int | None = None) -> SynthProblem:
    """Spectral-synthetic problem on the midpoint cosine design.

    The estimation model has dimension choose_m0(n, p); the truth extends
    to ``d_ext`` coefficients (default four times the model size, capped
    at n) with singular values continuing the same decay.
    """
    d = choose_m0(n, p)
    if d_ext is None:
        d_ext = min(4 * d, n)
    if d_ext < d or d_ext > n:
        raise ParameterError(f"extended range must lie in [{d}, {n}]")
    grid = midpoint_grid(n)
    basis = cosine_basis()
    op = discretize_operator(SpectralSynthetic(p=p), basis, grid, d)
    src = source if source is not None else SourceSpec(nu, rho)
    x0 = src.coefficients(p, d_ext, seed)
    G_ext = build_design_matrix(basis, grid, d_ext)
    lam_ext = np.arange(1, d_ext + 1, dtype=float) ** (-float(p))
    clean = G_ext.entries.T @ (lam_ext * x0)
    return SynthProblem(op, x0, float(sigma), clean)


def bias_m0(x0, op: DiscretizedOperator, m0: int | None = None) -> float:
    """Squared norm of the truth beyond the first m0 coefficients."""
    x0 = np.asarray(x0, dtype=float)
    if m0 is None:
        m0 = op.d
    return float(np.sum(x0[m0:] ** 2))


# ---------------------------------------------------------------------------
# Monte Carlo risk study


@dataclass(frozen=True)
class ExperimentConfig:
    p: float = 1.0
    nu: float = 0.5
    rho: float = 1.0
    sigma: float = 0.1
    n_grid: tuple[int, ...] = (256, 512, 1024, 2048, 4096, 8192)
    replications: int = 200
    family: str = "both"
    r: float = 2.5
    kraft_target: float = 1.0
    kraft_d: float = 1.0
    seed: int = 0
    alpha_max: float = 1.0
    alpha_ratio: float = 0.5
    ext_factor: int = 4
    omega: str = "log-uniform"

    def __post_init__(self):
        if self.replications < 1:
            raise ParameterError("need at least one replication")
        if self.family not in ("tikhonov", "projection", "both"):
            raise ParameterError(f"unknown family policy {self.family!r}")
        if len(self.n_grid) == 0:
            raise ParameterError("empty n grid")
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))

    def methods(self) -> tuple[str, ...]:
        if self.family == "both":
            return ("tikhonov", "projection")
        return (self.family,)

    def extended_dim(self) -> int:
        d_top = choose_m0(max(self.n_grid), self.p)
        d_ext = self.ext_factor * d_top
        if d_ext > min(self.n_grid):
            raise ParameterError(
                f"extended truth range {d_ext} exceeds the smallest n "
                f"{min(self.n_grid)}")
        return d_ext


@dataclass
class RiskRow:
    """Aggregates for one (n, method) cell of the study."""

    n: int
    method: str
    replications: int
    risk: float
    risk_se: float
    oracle_risk: float
    oracle_risk_se: float
    oracle_term: float
    bias_m0: float
    kraft_sum: float
    ratio_C: float
    weight: float
    threshold_agreement: float


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list[RiskRow] = field(default_factory=list)

    def rows_for(self, method: str) -> list[RiskRow]:
        return [r for r in self.rows if r.method == method]

    def to_csv_rows(self):
        header = ["n", "method", "replications", "risk", "risk_se", "oracle_risk",
                  "oracle_risk_se", "oracle_term", "bias_m0", "kraft_sum",
                  "ratio_C", "weight", "threshold_agreement"]
        na = lambda v: "NA" if (isinstance(v, float) and math.isnan(v)) else repr(v)
        rows = [[r.n, r.method, r.replications, na(r.risk), na(r.risk_se),
                 na(r.oracle_risk), na(r.oracle_risk_se), na(r.oracle_term),
                 na(r.bias_m0), na(r.kraft_sum), na(r.ratio_C), na(r.weight),
                 na(r.threshold_agreement)]
                for r in self.rows]
        return header, rows

    def plot_rows(self):
        """(method, log n, log risk) triples for external plotting."""
        return [(r.method, math.log(r.n), math.log(r.risk)) for r in self.rows
                if r.risk > 0]

    def config_echo(self) -> dict:
        return asdict(self.config)


def _family_for(method: str, op: DiscretizedOperator,
                cfg: ExperimentConfig) -> RegularizerFamily:
    if method == "tikhonov":
        return tikhonov_family(op, cfg.alpha_max, cfg.alpha_ratio)
    return projection_family(op)


def _risk_rows_for_n(n: int, cfg: ExperimentConfig, d_ext: int) -> list[RiskRow]:
    source = SourceSpec(cfg.nu, cfg.rho, cfg.omega)
    prob = synth_problem(cfg.p, cfg.nu, cfg.rho, n, cfg.seed, cfg.sigma,
                         source, d_ext)
    op, x0 = prob.op, prob.x0
    d = op.d
    tail = prob.tail_bias()
    sigma2 = cfg.sigma ** 2

    setups = []
    for method in cfg.methods():
        family = _family_for(method, op, cfg)
        base = PenaltyConfig(sigma2=sigma2, r=cfg.r, kraft_d=cfg.kraft_d)
        w = default_weights(family, base, target=cfg.kraft_target)
        pcfg = PenaltyConfig(sigma2=sigma2, r=cfg.r, weights=w, kraft_d=cfg.kraft_d)
        kr = kraft_sum(family, pcfg)
        pens = cfg.r * sigma2 * (1.0 + w) * (family.trace_stats()
                                             + family.radius_stats())
        # deterministic oracle term: bias of the regularized truths + 2 pen
        F = family.filter_matrix
        c0 = op.svd_coefficients(prob.clean)
        xk = F * c0[None, :]
        bias_k = np.sum((xk - x0[None, :d]) ** 2, axis=1) + tail
        oracle_term = float(np.min(bias_k + 2.0 * pens))
        setups.append({
            "method": method, "family": family, "pcfg": pcfg, "kraft": kr,
            "oracle_term": oracle_term, "weight": float(w[0]) if w.size else 0.0,
            "err_sum": 0.0, "err_sumsq": 0.0,
            "cand_sum": np.zeros(len(family)),
            "cand_sumsq": np.zeros(len(family)),
            "agree": 0,
        })

    R = cfg.replications
    for rep in range(R):
        rng = np.random.default_rng((cfg.seed, n, rep))
        y = prob.clean + rng.normal(0.0, cfg.sigma, n)
        c = op.svd_coefficients(y)
        for st in setups:
            family = st["family"]
            sel = select(family, st["pcfg"], op, y)
            err = float(np.sum((sel.estimate - x0[:d]) ** 2)) + tail
            st["err_sum"] += err
            st["err_sumsq"] += err * err
            xh = family.filter_matrix * c[None, :]
            errs = np.sum((xh - x0[None, :d]) ** 2, axis=1) + tail
            st["cand_sum"] += errs
            st["cand_sumsq"] += errs * errs
            if st["method"] == "projection":
                thr = select_by_threshold(op, y, st["pcfg"])
                st["agree"] += int(thr.chosen == sel.chosen)

    rows = []
    b0 = tail
    for st in setups:
        risk = st["err_sum"] / R
        if R > 1:
            var = max(st["err_sumsq"] / R - risk * risk, 0.0) * R / (R - 1)
            se = math.sqrt(var / R)
        else:
            se = math.nan
        cand_mean = st["cand_sum"] / R
        k_star = int(np.argmin(cand_mean))
        orisk = float(cand_mean[k_star])
        if R > 1:
            ovar = max(st["cand_sumsq"][k_star] / R - orisk * orisk, 0.0) * R / (R - 1)
            ose = math.sqrt(ovar / R)
        else:
            ose = math.nan
        ratio = (risk - 2.0 * b0 - st["kraft"] / n) / st["oracle_term"]
        agree = (st["agree"] / R) if st["method"] == "projection" else math.nan
        rows.append(RiskRow(n, st["method"], R, risk, se, orisk, ose,
                            st["oracle_term"], b0, st["kraft"], ratio,
                            st["weight"], agree))
    return rows


def monte_carlo_risk(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Run the study over the n grid; deterministic for fixed (config, seed).

    Replication streams are keyed by (seed, n, replication), so the report
    does not depend on execution order; ``threads`` > 1 fans the grid
    points out over a thread pool (0 means one thread per grid point).
    """
    d_ext = cfg.extended_dim()
    if threads == 0:
        threads = len(cfg.n_grid)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda n: _risk_rows_for_n(n, cfg, d_ext),
                                    cfg.n_grid))
    else:
        results = [_risk_rows_for_n(n, cfg, d_ext) for n in cfg.n_grid]
    report = ExperimentReport(cfg)
    for rows in results:
        report.rows.extend(rows)
    return report


# ---------------------------------------------------------------------------
# rate fits


@dataclass(frozen=True)
class RateFit:
    method: str
    slope: float
    half_width: float
    theoretical: float
    n_values: tuple[int, ...]


def theoretical_exponent(p: float, nu: float) -> float:
    """Squared-risk exponent -4 p nu / (1 + 4 p nu + 2 p)."""
    return -4.0 * p * nu / (1.0 + 4.0 * p * nu + 2.0 * p)


def fit_rate(report: ExperimentReport, method: str) -> RateFit:
    """Least squares of log risk on log n, with a 2-standard-error half width."""
    rows = report.rows_for(method)
    ns = sorted({r.n for r in rows})
    if len(ns) < 4:
        raise InsufficientDataError(
            f"rate fit needs at least 4 distinct n values, got {len(ns)}")
    x = np.log([r.n for r in rows])
    y = np.log([r.risk for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = x.size - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    se = math.sqrt(float(np.sum(resid ** 2)) / dof / sxx) if dof > 0 else 0.0
    theo = theoretical_exponent(report.config.p, report.config.nu)
    return RateFit(method, float(slope), 2.0 * se, theo, tuple(ns))


# ---------------------------------------------------------------------------
# projection error decomposition


@dataclass(frozen=True)
class ProjectionErrorRow:
    d_m: int
    bias: float
    bias_bound: float
    noise_energy: float
    noise_energy_se: float
    noise_energy_predicted: float


def projection_error_bound_check(op: DiscretizedOperator, x0, nu: float,
                                 dims, sigma: float, replications: int = 200,
                                 seed: int = 0) -> list[ProjectionErrorRow]:
    """Bias decay versus d_m^(-2 nu p) and projected noise energy versus
    sigma^2 d_m / n, per model dimension.

    The bias bound carries a fitted constant (the decay order is the
    claim, not the constant); the noise prediction is exact in expectation
    on an orthonormal design.
    """
    x0 = np.asarray(x0, dtype=float)
    dims = [int(m) for m in dims]
    if any(m < 1 or m > op.d for m in dims):
        raise ParameterError(f"dimensions must lie in [1, {op.d}]")
    biases = np.array([math.sqrt(np.sum(x0[m:] ** 2)) for m in dims])
    orders = np.array([float(m) ** (-2.0 * nu * op.p) for m in dims])
    with np.errstate(divide="ignore", invalid="ignore"):
        consts = np.where(orders > 0, biases / orders, 0.0)
    c_fit = float(np.max(consts)) if consts.size else 0.0

    energy = np.zeros((replications, len(dims)))
    for rep in range(replications):
        rng = np.random.default_rng((seed, rep))
        eps = rng.normal(0.0, sigma, op.n)
        csum = np.cumsum(op.svd_coefficients(eps) ** 2)
        energy[rep] = [csum[m - 1] for m in dims]
    mean = energy.mean(axis=0)
    se = (energy.std(axis=0, ddof=1) / math.sqrt(replications)
          if replications > 1 else np.full(len(dims), math.nan))
    rows = []
    for i, m in enumerate(dims):
        rows.append(ProjectionErrorRow(m, float(biases[i]), c_fit * float(orders[i]),
                                       float(mean[i]), float(se[i]),
                                       sigma ** 2 * m / op.n))
    return rows
