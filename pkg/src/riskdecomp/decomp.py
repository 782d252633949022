"""Standard / variance / bias decomposition runs and the checks built on them."""

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import linreg, matrec, nn
from .problems import (DiagonalRecoverySpec, GeneralRecoverySpec, LinearProblemSpec,
                       all_coordinate_stats, covariance_diag, gen_diagonal_measurements,
                       gen_general_measurements, gen_linear_dataset)
from .traces import DecompositionTrace

__all__ = [
    "FAMILIES",
    "LinregRunConfig",
    "DiagRunConfig",
    "GeneralRunConfig",
    "MlpRunConfig",
    "DdcParams",
    "SharpnessSpec",
    "DdcReport",
    "SpaceMismatchError",
    "UndefinedFitError",
    "reference_time_scale",
    "run_decomposition",
    "check_lemma1_additivity",
    "check_ddc",
    "fit_min_a",
    "eq4_rhs",
    "eq4_rhs_and_check",
    "sharpness_for",
]

FAMILIES = ("linreg", "diag-recovery", "general-recovery", "mlp")
ABS_TOL = 1e-9
SE_MULT = 3.0


class SpaceMismatchError(ValueError):
    pass


class UndefinedFitError(ValueError):
    pass


@dataclass(frozen=True)
class LinregRunConfig:
    stepsize: float
    steps: int
    record_every: int | None = None


@dataclass(frozen=True, eq=False)
class DiagRunConfig:
    t_grid: np.ndarray
    time_scale: float | None = None  # None: calibrate against the ODE oracle


@dataclass(frozen=True)
class GeneralRunConfig:
    steps: int
    record_every: int = 10


@dataclass(frozen=True)
class MlpRunConfig:
    arch: nn.MlpArch
    optimizer: object
    epochs: int
    batch_size: int | None = None
    record_every: int = 1
    n_mc: int = 10_000


@dataclass(frozen=True)
class DdcParams:
    a: float = 1.0
    C: float = 0.0
    C_prime: float = 0.0
    space: str = "parameter"

    def __post_init__(self):
        if min(self.a, self.C, self.C_prime) < 0:
            raise ValueError("DDC constants must be nonnegative")


@dataclass(frozen=True)
class SharpnessSpec:
    s: float = 2.0
    m_u: float = 1.0
    M_u: float = 1.0
    exact: bool = True

    def __post_init__(self):
        if not self.s > 0 or not 0 < self.m_u <= self.M_u:
            raise ValueError("need s > 0 and 0 < m_u <= M_u")


@dataclass(frozen=True, eq=False)
class DdcReport:
    holds_everywhere: bool
    first_violation_time: float | None
    max_ratio: float
    min_feasible_a: float
    start_time: float
    n_checked: int
    holds_mask: np.ndarray = field(repr=False)
    checked_mask: np.ndarray = field(repr=False)
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)


@lru_cache(maxsize=8)
def reference_time_scale(gradient_scale=1.0):
    """Clock constant of the diagonal closed forms, fitted on a fixed instance."""
    spec = DiagonalRecoverySpec(d=20, r=3, sigma_star=(5.0, 3.0, 1.0), n=200, noise_std=1.0,
                                alpha=0.01, seed=0)
    stats = all_coordinate_stats(gen_diagonal_measurements(spec))
    cfg = matrec.FlowConfig(alpha=spec.alpha, t_grid=np.linspace(0.0, 2.0, 21))
    return matrec.calibrate_time_scale(stats, cfg, gradient_scale=gradient_scale).kappa


# --------------------------------------------------------------------------
# family runners
# --------------------------------------------------------------------------


def _run_linreg(spec: LinearProblemSpec, cfg: LinregRunConfig):
    ds = gen_linear_dataset(spec)
    Y = np.stack([ds.y_noisy, ds.y_clean, ds.eps], axis=1)
    gd = linreg.GdConfig(stepsize=cfg.stepsize, steps=cfg.steps, record_every=cfg.record_every)
    std, bias, var = linreg.gd_run_many(ds.X, Y, gd)
    theta = ds.theta_star
    cov = covariance_diag(spec)
    er = linreg.linreg_excess_risk(std.params, spec, theta)
    ber = linreg.linreg_excess_risk(bias.params, spec, theta)
    ver = (var.params**2) @ cov
    return DecompositionTrace(
        family="linreg", space="parameter", times=std.times, er=er, ver=ver, ber=ber,
        param_dist=np.linalg.norm(std.params - theta, axis=1),
        var_dist=np.linalg.norm(var.params, axis=1),
        bias_dist=np.linalg.norm(bias.params - theta, axis=1),
        n=spec.n,
        metadata={"B": var.final_sup_norm, "B_prime": std.final_sup_norm,
                  "theta_star_norm": float(np.linalg.norm(theta)), "dynamics": "gradient descent"},
        internals={"standard": std, "bias": bias, "variance": var, "dataset": ds})


def _run_diag(spec: DiagonalRecoverySpec, cfg: DiagRunConfig):
    meas = gen_diagonal_measurements(spec)
    kappa = reference_time_scale() if cfg.time_scale is None else cfg.time_scale
    flow = matrec.FlowConfig(alpha=spec.alpha, t_grid=cfg.t_grid, time_scale=kappa)
    sq = matrec.diag_flow_trace(meas, flow)
    trace = matrec.diag_excess_risks(sq, spec)
    trace.internals = {"squared_factors": sq, "measurements": meas}
    return trace


def _run_general(spec: GeneralRecoverySpec, cfg: GeneralRunConfig):
    meas = gen_general_measurements(spec)
    gr = matrec.general_recovery_gd(spec, meas, cfg.steps, cfg.record_every)
    return DecompositionTrace(
        family="general-recovery", space="parameter", times=gr.times,
        er=gr.dist_std**2, ver=gr.norm_var**2, ber=gr.dist_bias**2,
        param_dist=gr.dist_std, var_dist=gr.norm_var, bias_dist=gr.dist_bias, n=spec.n,
        metadata={"loss_scale": spec.loss_scale, "stepsize": spec.stepsize,
                  "dynamics": "gradient descent"},
        internals={"loss": gr.loss, "measurements": meas})


def _sqrt_with_se(mean, se):
    root = np.sqrt(np.maximum(mean, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        root_se = np.where(root > 0, se / (2.0 * root), np.sqrt(se))
    return root, root_se


def _run_mlp(spec: LinearProblemSpec, cfg: MlpRunConfig):
    ds = gen_linear_dataset(spec)
    res = nn.train_triplet(cfg.arch, cfg.optimizer, ds.X, (ds.y_noisy, ds.y_clean, ds.eps),
                           epochs=cfg.epochs, seed=spec.seed, target=ds.theta_star,
                           cov_diag=spec.cov_diag, batch_size=cfg.batch_size,
                           record_every=cfg.record_every, n_mc=cfg.n_mc, keep_params=False)
    pd, pd_se = _sqrt_with_se(res.er, res.er_se)
    vd, vd_se = _sqrt_with_se(res.ver, res.ver_se)
    bd, bd_se = _sqrt_with_se(res.ber, res.ber_se)
    meta = dict(res.metadata)
    meta["dynamics"] = "mini-batch SGD" if cfg.batch_size else "full-batch"
    return DecompositionTrace(
        family="mlp", space="function", times=res.epochs, er=res.er, ver=res.ver, ber=res.ber,
        param_dist=pd, var_dist=vd, bias_dist=bd, param_dist_se=pd_se, var_dist_se=vd_se,
        bias_dist_se=bd_se, n=spec.n, metadata=meta,
        internals={"train_loss": res.train_loss, "result": res})


_RUNNERS = {
    "linreg": (LinearProblemSpec, LinregRunConfig, _run_linreg),
    "diag-recovery": (DiagonalRecoverySpec, DiagRunConfig, _run_diag),
    "general-recovery": (GeneralRecoverySpec, GeneralRunConfig, _run_general),
    "mlp": (LinearProblemSpec, MlpRunConfig, _run_mlp),
}


def run_decomposition(family: str, spec, config, seed=None) -> DecompositionTrace:
    """Run the three trainings of ``family`` on shared data and initialization.

    ``seed`` replaces ``spec.seed`` when given.
    """
    if family not in _RUNNERS:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    spec_type, cfg_type, runner = _RUNNERS[family]
    if not isinstance(spec, spec_type) or not isinstance(config, cfg_type):
        raise TypeError(f"{family} expects {spec_type.__name__} and {cfg_type.__name__}")
    if seed is not None:
        spec = replace(spec, seed=int(seed))
    return runner(spec, config)


# --------------------------------------------------------------------------
# checks
# --------------------------------------------------------------------------


def check_lemma1_additivity(trace: DecompositionTrace) -> float:
    """Max over recorded steps of ``||theta - theta_v - theta_b||`` for linear regression."""
    if trace.family != "linreg" or "standard" not in trace.internals:
        raise ValueError("additivity check applies to linear-regression traces only")
    std = trace.internals["standard"].params
    dev = std - trace.internals["variance"].params - trace.internals["bias"].params
    return float(np.max(np.linalg.norm(dev, axis=1)))


def _check_space(trace, space):
    if trace.space != space:
        raise SpaceMismatchError(f"trace lives in {trace.space} space, check asked for {space}")


def _ddc_terms(trace, C, C_prime, n):
    """Mask of checked times and the additive offset ``C/sqrt(t) + C'/sqrt(n)``."""
    n = trace.n if n is None else n
    t = trace.times
    positive = t > 0
    checked = positive if C > 0 else np.ones(t.shape, dtype=bool)
    c_term = np.zeros(t.shape)
    if C > 0:
        c_term[positive] = C / np.sqrt(t[positive])
        c_term[~positive] = np.inf
    return checked, c_term + C_prime / np.sqrt(n)


def _tolerance(trace, a, abs_tol=ABS_TOL, se_mult=SE_MULT):
    se = np.sqrt(trace.param_dist_se**2 + a * a * (trace.var_dist_se**2 + trace.bias_dist_se**2))
    return abs_tol + se_mult * se


def fit_min_a(trace: DecompositionTrace, C=0.0, C_prime=0.0, n=None) -> float:
    """Smallest ``a`` making the DDC hold at every checked time (no MC slack)."""
    checked, offset = _ddc_terms(trace, C, C_prime, n)
    denom = trace.var_dist + trace.bias_dist
    valid = checked & (denom >= 1e-12)
    if not np.any(valid):
        raise UndefinedFitError("variance and bias distances vanish at every checked time")
    num = np.maximum(trace.param_dist[valid] - offset[valid], 0.0)
    return float(np.max(num / denom[valid]))


def check_ddc(trace: DecompositionTrace, p: DdcParams, n=None, abs_tol=ABS_TOL,
              se_mult=SE_MULT) -> DdcReport:
    """Check ``dist <= a (var_dist + bias_dist) + C/sqrt(t) + C'/sqrt(n)`` along the trace.

    Slack is ``abs_tol`` plus ``se_mult`` combined Monte Carlo standard errors.
    """
    _check_space(trace, p.space)
    checked, offset = _ddc_terms(trace, p.C, p.C_prime, n)
    lhs = trace.param_dist
    rhs = p.a * (trace.var_dist + trace.bias_dist) + offset
    holds = (lhs <= rhs + _tolerance(trace, p.a, abs_tol, se_mult)) | ~checked
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    ratio = np.where(checked, ratio, 0.0)
    bad = np.flatnonzero(~holds)
    try:
        min_a = fit_min_a(trace, p.C, p.C_prime, n)
    except UndefinedFitError:
        min_a = float("nan")
    return DdcReport(
        holds_everywhere=bad.size == 0,
        first_violation_time=float(trace.times[bad[0]]) if bad.size else None,
        max_ratio=float(np.max(ratio)) if ratio.size else 0.0,
        min_feasible_a=min_a,
        start_time=float(trace.times[checked][0]) if np.any(checked) else float("nan"),
        n_checked=int(np.sum(checked)),
        holds_mask=holds, checked_mask=checked, lhs=lhs, rhs=rhs)


def eq4_rhs(trace: DecompositionTrace, p: DdcParams, sharp: SharpnessSpec, n=None):
    """Right-hand side of the decomposition inequality at each recorded time."""
    n = trace.n if n is None else n
    t = trace.times
    s = sharp.s
    with np.errstate(divide="ignore"):
        c_term = np.where(t > 0, (4 * p.C / np.sqrt(np.where(t > 0, t, 1.0))) ** s,
                          0.0 if p.C == 0 else np.inf)
    return ((4 * p.a) ** s * (sharp.M_u / sharp.m_u) * (trace.ver + trace.ber)
            + sharp.M_u * c_term + sharp.M_u * (4 * p.C_prime / np.sqrt(n)) ** s)


def eq4_rhs_and_check(trace: DecompositionTrace, p: DdcParams, sharp: SharpnessSpec, n=None,
                      abs_tol=ABS_TOL, se_mult=SE_MULT):
    """Return ``(rhs, holds)``; ``holds`` covers every time where the DDC itself holds."""
    rhs = eq4_rhs(trace, p, sharp, n)
    ddc = check_ddc(trace, p, n, abs_tol, se_mult)
    mask = ddc.holds_mask & ddc.checked_mask
    slack = abs_tol + se_mult * 2.0 * trace.param_dist * trace.param_dist_se
    ok = trace.er[mask] <= rhs[mask] * (1 + 1e-12) + slack[mask]
    return rhs, bool(np.all(ok))


def sharpness_for(family: str, spec=None) -> SharpnessSpec:
    """Exact sharpness constants: quadratic landscapes with s = 2."""
    if family == "linreg":
        cov = covariance_diag(spec)
        return SharpnessSpec(2.0, float(cov.min()), float(cov.max()))
    if family in ("diag-recovery", "general-recovery", "mlp"):
        return SharpnessSpec(2.0, 1.0, 1.0)
    raise ValueError(f"unknown family {family!r}")
