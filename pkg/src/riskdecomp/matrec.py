"""Low-rank matrix recovery dynamics.

Diagonal recovery decouples into one scalar problem per coordinate,

    l(u) = (1/n) sum_i (y_i - a_i u^2)^2,

whose gradient flow ``du/dt = 4 u (s - xi u^2)`` has logistic closed forms
for ``w = u^2``.  The closed forms are written on a clock ``tau = kappa*t``
in the shape ``exp(2 s tau)``; for the loss above the flow corresponds to
``kappa = 4``, and :func:`calibrate_time_scale` recovers that constant from
an independent Runge-Kutta integration rather than assuming it.

General (non-diagonal) recovery runs plain gradient descent on a full
``d x d`` factor.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import least_squares

from .problems import (CoordinateStats, DiagonalMeasurements, DiagonalRecoverySpec,
                       GeneralMeasurements, GeneralRecoverySpec, all_coordinate_stats)
from .traces import DecompositionTrace

__all__ = [
    "Branch",
    "MODES",
    "FlowConfig",
    "SquaredFactorTrace",
    "NumericalError",
    "DivergenceError",
    "FLOW_TIME_SCALE",
    "select_branch",
    "closed_form_u2",
    "closed_form_u2_many",
    "rk4_flow",
    "ode_oracle",
    "ode_oracle_many",
    "calibrate_time_scale",
    "TimeScaleFit",
    "diag_flow_trace",
    "diag_excess_risks",
    "GeneralRecoveryTrace",
    "general_recovery_gd",
]

MODES = ("standard", "bias", "variance")
ZERO_TOL = 1e-14
# clock constant matching the flow of the per-coordinate loss above
FLOW_TIME_SCALE = 4.0


class NumericalError(RuntimeError):
    pass


class DivergenceError(RuntimeError):
    pass


class Branch(Enum):
    SIGNAL_POSITIVE = "signal-positive"
    SIGNAL_NEGATIVE = "signal-negative"
    BIAS_POSITIVE = "bias-positive"
    NOISE_POSITIVE = "noise-positive"
    NOISE_NEGATIVE = "noise-negative"
    ZERO_SIGNAL_BIAS = "zero-signal-bias"
    ZERO_TARGET = "zero-target"


@dataclass(frozen=True, eq=False)
class FlowConfig:
    alpha: float
    t_grid: np.ndarray
    time_scale: float = 1.0

    def __post_init__(self):
        grid = np.asarray(self.t_grid, dtype=float)
        if not self.alpha >= 0:
            raise ValueError("alpha must be nonnegative")
        if grid.ndim != 1 or grid.size == 0 or grid[0] < 0 or np.any(np.diff(grid) <= 0):
            raise ValueError("t_grid must be strictly increasing and start at t >= 0")
        if not self.time_scale > 0:
            raise ValueError("time_scale must be positive")
        object.__setattr__(self, "t_grid", grid)


@dataclass(frozen=True, eq=False)
class SquaredFactorTrace:
    """``u^2`` for each training, arrays of shape ``(len(times), d)``."""

    times: np.ndarray
    u2: np.ndarray
    u2_b: np.ndarray
    u2_v: np.ndarray
    kappa: float = 1.0


def _target(stats: CoordinateStats, mode):
    if mode == "standard":
        return stats.s_emp
    if mode == "bias":
        return stats.s_b
    if mode == "variance":
        return stats.s_v
    raise ValueError(f"unknown mode {mode!r}")


def select_branch(stats: CoordinateStats, mode: str):
    """Return ``(branch, s)`` where ``s`` is the target driving the flow."""
    s = _target(stats, mode)
    if mode == "bias":
        if stats.sigma_star == 0 or abs(s) < ZERO_TOL:
            return Branch.ZERO_SIGNAL_BIAS, 0.0
        return Branch.BIAS_POSITIVE, s
    if abs(s) < ZERO_TOL:
        return Branch.ZERO_TARGET, 0.0
    if mode == "standard":
        return (Branch.SIGNAL_POSITIVE if s > 0 else Branch.SIGNAL_NEGATIVE), s
    return (Branch.NOISE_POSITIVE if s > 0 else Branch.NOISE_NEGATIVE), s


def closed_form_u2_many(s, xi, alpha, tau):
    """Vectorised closed form of ``u^2`` on the scaled clock ``tau``.

    ``s`` and ``xi`` broadcast against each other; ``tau`` is a 1-d grid and
    becomes the leading axis of the result.
    """
    s = np.asarray(s, dtype=float)
    xi = np.asarray(xi, dtype=float)
    s, xi = np.broadcast_arrays(s, xi)
    tau = np.asarray(tau, dtype=float).reshape((-1,) + (1,) * s.ndim)
    a2 = alpha * alpha
    pos = s >= ZERO_TOL
    neg = s <= -ZERO_TOL
    mag = np.where(pos | neg, np.abs(s), 1.0)
    decay = np.exp(-2.0 * mag * tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        # positive target: s a^2 / ((s - xi a^2) e^{-2 s tau} + xi a^2)
        w_pos = mag * a2 / ((mag - xi * a2) * decay + xi * a2)
        # negative target: |s| a^2 e^{-2|s| tau} / (|s| + xi a^2 - xi a^2 e^{-2|s| tau})
        w_neg = mag * a2 * decay / (mag + xi * a2 - xi * a2 * decay)
        w_zero = a2 / (2.0 * xi * a2 * tau + 1.0)
    out = np.where(pos, w_pos, np.where(neg, w_neg, w_zero))
    if alpha == 0:
        out = np.zeros_like(out)
    return out


def closed_form_u2(stats: CoordinateStats, mode: str, cfg: FlowConfig, t):
    """Closed-form ``u^2(t)`` for one coordinate and training mode."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be nonnegative")
    _, s = select_branch(stats, mode)
    w = closed_form_u2_many(s, stats.xi, cfg.alpha, cfg.time_scale * t_arr)
    return float(w[0]) if np.ndim(t) == 0 else w


def rk4_flow(s, xi, alpha, t_grid, h, gradient_scale=1.0):
    """Fixed-step RK4 for ``du/dt = 4 g u (s - xi u^2)``; returns ``u^2`` on ``t_grid``.

    Each interval between grid points is split into ``ceil(dt / h)`` equal
    substeps, so grid points are hit exactly.
    """
    s = np.asarray(s, dtype=float)
    xi = np.asarray(xi, dtype=float)
    s, xi = np.broadcast_arrays(s, xi)
    grid = np.asarray(t_grid, dtype=float)
    c = 4.0 * gradient_scale

    def rhs(u):
        return c * u * (s - xi * u * u)

    u = np.full(s.shape, float(alpha))
    out = np.empty((grid.size,) + s.shape)
    t_now = 0.0
    for k, t_next in enumerate(grid):
        span = t_next - t_now
        if span > 0:
            m = int(np.ceil(span / h - 1e-9))
            dt = span / m
            for _ in range(m):
                k1 = rhs(u)
                k2 = rhs(u + 0.5 * dt * k1)
                k3 = rhs(u + 0.5 * dt * k2)
                k4 = rhs(u + dt * k3)
                u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k] = u * u
        t_now = t_next
    return out


def ode_oracle_many(s, xi, alpha, t_grid, gradient_scale=1.0, tol=1e-8, max_halvings=14):
    """Adaptive RK4 reference for many coordinates at once.

    The step is halved until two successive solutions agree to ``tol`` in
    max relative difference over the grid.
    """
    s = np.asarray(s, dtype=float)
    xi = np.asarray(xi, dtype=float)
    grid = np.asarray(t_grid, dtype=float)
    if grid.size == 0 or grid[0] < 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("t_grid must be strictly increasing and start at t >= 0")
    rate = 8.0 * gradient_scale * float(np.max(np.abs(s) + xi * alpha * alpha, initial=0.0))
    h = 0.05 / rate if rate > 0 else max(grid[-1], 1.0)
    prev = rk4_flow(s, xi, alpha, grid, h, gradient_scale)
    for _ in range(max_halvings):
        h *= 0.5
        cur = rk4_flow(s, xi, alpha, grid, h, gradient_scale)
        scale = np.maximum(np.abs(cur), 1e-300)
        if np.max(np.abs(cur - prev) / scale) <= tol:
            return cur
        prev = cur
    raise NumericalError(f"RK4 did not reach tolerance {tol:g} after {max_halvings} halvings")


def ode_oracle(stats: CoordinateStats, mode: str, cfg: FlowConfig, t_grid=None,
               gradient_scale=1.0, tol=1e-8):
    """Numerical ``u^2`` of the gradient flow for one coordinate and mode."""
    grid = cfg.t_grid if t_grid is None else t_grid
    s = _target(stats, mode)
    return ode_oracle_many(s, stats.xi, cfg.alpha, grid, gradient_scale, tol)


@dataclass(frozen=True)
class TimeScaleFit:
    kappa: float
    residual: float  # max relative deviation at the fitted kappa


def _positive_targets(stats_list, modes):
    s, xi = [], []
    for st in stats_list:
        for mode in modes:
            branch, val = select_branch(st, mode)
            if branch in (Branch.SIGNAL_POSITIVE, Branch.BIAS_POSITIVE, Branch.NOISE_POSITIVE):
                s.append(val)
                xi.append(st.xi)
    return np.asarray(s), np.asarray(xi)


def calibrate_time_scale(stats_list, cfg: FlowConfig, modes=("standard", "bias"),
                         gradient_scale=1.0, tol=1e-10):
    """Fit the clock constant ``kappa`` of the closed forms to the RK4 flow.

    Uses every positive-branch (coordinate, mode) pair and minimises the
    relative residual ``closed_form(kappa * t) / ode(t) - 1`` over the grid.
    """
    if isinstance(stats_list, CoordinateStats):
        stats_list = [stats_list]
    s, xi = _positive_targets(stats_list, modes)
    if s.size == 0:
        raise ValueError("no positive-branch coordinate available for calibration")
    ode = ode_oracle_many(s, xi, cfg.alpha, cfg.t_grid, gradient_scale, tol)

    def resid(p):
        cf = closed_form_u2_many(s, xi, cfg.alpha, np.exp(p[0]) * cfg.t_grid)
        return (cf / ode - 1.0).ravel()

    fit = least_squares(resid, x0=[0.0], xtol=1e-15, ftol=1e-15,
                        gtol=1e-15)
    kappa = float(np.exp(fit.x[0]))
    return TimeScaleFit(kappa=kappa, residual=float(np.max(np.abs(resid(fit.x)))))


def diag_flow_trace(m: DiagonalMeasurements, cfg: FlowConfig) -> SquaredFactorTrace:
    """Closed-form ``u^2`` trajectories of all coordinates for the three trainings."""
    stats = all_coordinate_stats(m)
    xi = np.array([st.xi for st in stats])
    tau = cfg.time_scale * cfg.t_grid
    out = {}
    for mode in MODES:
        s = np.array([select_branch(st, mode)[1] for st in stats])
        out[mode] = closed_form_u2_many(s, xi, cfg.alpha, tau)
    return SquaredFactorTrace(times=cfg.t_grid, u2=out["standard"], u2_b=out["bias"],
                              u2_v=out["variance"], kappa=cfg.time_scale)


def diag_excess_risks(trace: SquaredFactorTrace, spec: DiagonalRecoverySpec) -> DecompositionTrace:
    """ER, VER and BER of diagonal recovery (squared Frobenius distances)."""
    sigma = spec.sigma_full
    er = np.sum((trace.u2 - sigma) ** 2, axis=1)
    ver = np.sum(trace.u2_v**2, axis=1)
    ber = np.sum((trace.u2_b - sigma) ** 2, axis=1)
    return DecompositionTrace(
        family="diag-recovery", space="parameter", times=trace.times,
        er=er, ver=ver, ber=ber,
        param_dist=np.sqrt(er), var_dist=np.sqrt(ver), bias_dist=np.sqrt(ber),
        n=spec.n, metadata={"time_scale": trace.kappa, "dynamics": "gradient flow"})


@dataclass(frozen=True, eq=False)
class GeneralRecoveryTrace:
    times: np.ndarray
    dist_std: np.ndarray  # ||X - X*||_F
    dist_bias: np.ndarray  # ||X_b - X*||_F
    norm_var: np.ndarray  # ||X_v||_F
    loss: np.ndarray  # (steps + 1, 3) training losses at every step
    matrices: np.ndarray | None = None  # (len(times), 3, d, d) when requested


def general_recovery_gd(spec: GeneralRecoverySpec, meas: GeneralMeasurements, steps: int,
                        record_every: int = 1, keep_matrices=False) -> GeneralRecoveryTrace:
    """Gradient descent on ``U`` for the standard, bias and variance responses.

    Loss per training is ``loss_scale * mean((y - <A_i, U U^T>)^2)``; all
    three start from ``U = alpha I``. Order of the stacked axis is
    (standard, bias, variance).
    """
    d, n = spec.d, spec.n
    A = meas.A.reshape(n, d * d)
    Y = np.stack([meas.y, meas.y_clean, meas.eps], axis=1)
    U = np.broadcast_to(spec.alpha * np.eye(d), (3, d, d)).copy()
    coef = spec.loss_scale * 2.0 / n
    times = list(range(0, steps + 1, record_every))
    if times[-1] != steps:
        times.append(steps)
    rec_set = {t: i for i, t in enumerate(times)}
    dist = np.empty((len(times), 3))
    mats = np.empty((len(times), 3, d, d)) if keep_matrices else None
    losses = np.empty((steps + 1, 3))
    targets = np.stack([meas.x_star, meas.x_star, np.zeros((d, d))])
    for step in range(steps + 1):
        X = U @ U.transpose(0, 2, 1)
        resid = Y - A @ X.reshape(3, d * d).T
        loss = spec.loss_scale * np.mean(resid**2, axis=0)
        losses[step] = loss
        if not np.all(np.isfinite(loss)) or np.any(loss > 1e12):
            raise DivergenceError(
                f"general recovery diverged at step {step}: losses {loss.tolist()} "
                f"(stepsize {spec.stepsize:g}, loss_scale {spec.loss_scale:g})")
        if step in rec_set:
            i = rec_set[step]
            dist[i] = np.linalg.norm((X - targets).reshape(3, -1), axis=1)
            if keep_matrices:
                mats[i] = X
        if step == steps:
            break
        G = (resid.T @ A).reshape(3, d, d)
        G = G + G.transpose(0, 2, 1)
        U = U + (spec.stepsize * coef) * (G @ U)
    return GeneralRecoveryTrace(times=np.asarray(times), dist_std=dist[:, 0],
                                dist_bias=dist[:, 1], norm_var=dist[:, 2], loss=losses,
                                matrices=mats)
