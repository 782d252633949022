"""Gradient descent on least squares, its closed form, and risk quantities."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import svds

from .problems import LinearProblemSpec, covariance_diag, noise_second_moment, theta_star

__all__ = [
    "GdConfig",
    "ParamTrace",
    "gd_run",
    "gd_run_many",
    "closed_form_params",
    "min_norm_solution",
    "linreg_excess_risk",
    "variance_generalization_gap",
    "sup_param_norms",
    "AdmissibilityWarning",
]

SVD_RTOL = 1e-12


class AdmissibilityWarning(RuntimeWarning):
    """The stepsize exceeds 1 / lambda_max of the empirical covariance."""


@dataclass(frozen=True, eq=False)
class GdConfig:
    stepsize: float
    steps: int
    theta0: np.ndarray | None = None
    record_every: int | None = None

    def stride(self):
        if self.record_every is not None:
            if self.record_every < 1:
                raise ValueError("record_every must be positive")
            return int(self.record_every)
        return 1 if self.steps <= 1000 else 10


@dataclass(frozen=True, eq=False)
class ParamTrace:
    times: np.ndarray
    params: np.ndarray  # (len(times), d)
    final_sup_norm: float

    def __len__(self):
        return len(self.times)


def _record_times(steps, stride):
    times = list(range(0, steps + 1, stride))
    if times[-1] != steps:
        times.append(steps)
    return np.asarray(times, dtype=int)


def _svd(X):
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0:
        return u, s, vt
    keep = s > max(X.shape) * s[0] * SVD_RTOL
    return u[:, keep], s[keep], vt[keep]


def _check_stepsize(X, stepsize):
    n = X.shape[0]
    if min(X.shape) > 400:
        # leading singular value only; full SVD is cubic
        top = svds(X, k=1, return_singular_vectors=False, random_state=0)
    else:
        top = np.linalg.svd(X, compute_uv=False)[:1]
    lam_max = (float(top[0]) ** 2) / n if top.size else 0.0
    if stepsize * lam_max >= 1.0:
        warnings.warn(
            f"stepsize {stepsize:g} times lambda_max {lam_max:g} is >= 1; GD may not converge",
            AdmissibilityWarning, stacklevel=3)


def gd_run_many(X, Y, cfg: GdConfig, check=True):
    """Run GD on several response columns at once.

    ``Y`` has shape ``(n, k)``; each column is an independent least-squares
    problem sharing ``X`` and ``cfg.theta0``. Returns one trace per column.
    Columns never mix, so each trace equals a separate run up to BLAS
    rounding.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d = X.shape
    if Y.shape[0] != n:
        raise ValueError(f"X has {n} rows but responses have {Y.shape[0]}")
    k = Y.shape[1]
    if cfg.steps < 0:
        raise ValueError("steps must be nonnegative")
    if check:
        _check_stepsize(X, cfg.stepsize)
    theta = np.zeros((d, k))
    if cfg.theta0 is not None:
        t0 = np.asarray(cfg.theta0, dtype=float)
        if t0.shape != (d,):
            raise ValueError(f"theta0 must have length {d}")
        theta[:] = t0[:, None]
    times = _record_times(cfg.steps, cfg.stride())
    out = np.empty((len(times), k, d))
    sup = np.linalg.norm(theta, axis=0)
    rate = cfg.stepsize / n
    rec = 0
    for step in range(cfg.steps + 1):
        if step > 0:
            theta = theta + rate * (X.T @ (Y - X @ theta))
            np.maximum(sup, np.linalg.norm(theta, axis=0), out=sup)
        if rec < len(times) and times[rec] == step:
            out[rec] = theta.T
            rec += 1
    return [ParamTrace(times=times, params=out[:, j, :].copy(), final_sup_norm=float(sup[j]))
            for j in range(k)]


def gd_run(X, y, cfg: GdConfig) -> ParamTrace:
    """Gradient descent ``theta <- theta + (lambda/n) X^T (y - X theta)``."""
    return gd_run_many(X, np.asarray(y, dtype=float)[:, None], cfg)[0]


def min_norm_solution(X, Y):
    """Pseudoinverse solution ``X^+ Y`` with a relative singular-value cutoff."""
    u, s, vt = _svd(np.asarray(X, dtype=float))
    return vt.T @ ((u.T @ Y) / s if np.ndim(Y) == 1 else (u.T @ Y) / s[:, None])


def closed_form_params(X, y, cfg: GdConfig, t):
    """Closed-form GD iterate after ``t`` steps.

    Evaluates ``(I - (lambda/n) X^T X)^t (theta0 - X^+ y) + X^+ y`` in the
    right-singular basis of ``X``. ``t`` may be a scalar (returns a vector)
    or a sequence (returns one row per time).
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    u, s, vt = _svd(X)
    theta0 = np.zeros(d) if cfg.theta0 is None else np.asarray(cfg.theta0, dtype=float)
    pinv_y = vt.T @ ((u.T @ y) / s)
    offset = theta0 - pinv_y
    coef = vt @ offset
    shrink = 1.0 - cfg.stepsize * s**2 / n
    t_arr = np.atleast_1d(np.asarray(t))
    if np.any(t_arr < 0):
        raise ValueError("t must be nonnegative")
    # components of the offset outside the row space of X never move
    frozen = offset - vt.T @ coef
    powers = shrink[None, :] ** t_arr[:, None].astype(float)
    out = pinv_y + frozen + (powers * coef) @ vt
    return out[0] if np.ndim(t) == 0 else out


def linreg_excess_risk(theta, spec: LinearProblemSpec, target=None):
    """``(theta* - theta)^T Sigma (theta* - theta)``; rows of ``theta`` are evaluated separately."""
    ref = theta_star(spec) if target is None else np.asarray(target, dtype=float)
    diff = np.asarray(theta, dtype=float) - ref
    return (diff**2) @ covariance_diag(spec)


def variance_generalization_gap(trace: ParamTrace, ds, spec: LinearProblemSpec):
    """Population minus empirical loss along a variance-training trace.

    ``ds`` supplies ``X`` and the noise vector; the population loss is the
    analytic ``theta^T Sigma theta + E eps^2``.
    """
    theta = trace.params
    pop = (theta**2) @ covariance_diag(spec) + noise_second_moment(spec)
    resid = ds.eps[None, :] - theta @ ds.X.T
    emp = np.mean(resid**2, axis=1)
    return pop - emp


def sup_param_norms(trace_std: ParamTrace, trace_var: ParamTrace):
    """Return ``(B_prime, B)``: running sup norms of standard and variance training."""
    if len(trace_std) == 0 or len(trace_var) == 0:
        raise ValueError("empty trace")
    if not np.array_equal(trace_std.times, trace_var.times):
        raise ValueError("traces recorded on different step grids")
    return trace_std.final_sup_norm, trace_var.final_sup_norm
