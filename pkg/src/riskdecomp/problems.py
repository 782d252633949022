"""Synthetic problem instances and the signal/noise split.

Three families are generated here:

* linear regression with a linear ground truth,
* diagonal low-rank recovery (one scalar measurement stream per coordinate),
* general symmetric low-rank recovery from Gaussian measurement matrices.

Every random stream is drawn from a seed derived with
:func:`riskdecomp._seeding.child_seed`, so the design matrix, the ground
truth and the noise of a trial are independent of each other and of the
order in which trials are executed.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from ._seeding import child_rng

__all__ = [
    "SpecificationError",
    "LinearProblemSpec",
    "RegressionDataset",
    "DiagonalRecoverySpec",
    "DiagonalMeasurements",
    "CoordinateStats",
    "GeneralRecoverySpec",
    "GeneralMeasurements",
    "covariance_diag",
    "theta_star",
    "noise_second_moment",
    "gen_linear_dataset",
    "split_signal_noise",
    "gen_diagonal_measurements",
    "coordinate_stats",
    "all_coordinate_stats",
    "gen_general_measurements",
    "general_ground_truth",
]

THETA_KINDS = ("dense", "sparse", "fixed")
NOISE_KINDS = ("gaussian", "uniform")
MEASUREMENT_KINDS = ("gaussian", "uniform")


class SpecificationError(ValueError):
    """Raised when a problem specification violates its invariants."""


# --------------------------------------------------------------------------
# linear regression
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearProblemSpec:
    """Linear-regression instance description.

    Parameters
    ----------
    d, n : int
        Dimension and sample count.
    cov_diag : array_like or None
        Diagonal of the input covariance; ``None`` means identity.
    theta_kind : {"dense", "sparse", "fixed"}
        Ground-truth generator. ``dense`` draws a uniformly random direction,
        ``sparse`` a random direction on ``theta_support`` random coordinates;
        both are rescaled to ``theta_norm``. ``fixed`` uses ``theta_fixed``.
    noise_kind : {"gaussian", "uniform"}
        Gaussian noise has standard deviation ``noise_level``; uniform noise
        is supported on ``[-noise_level, noise_level]``.
    noise_clip : float
        When positive, Gaussian noise is clipped to ``[-noise_clip, noise_clip]``.
    seed : int
        Master seed of the instance.
    """

    d: int
    n: int
    cov_diag: np.ndarray | None = None
    theta_kind: str = "dense"
    theta_norm: float = 1.0
    theta_support: int | None = None
    theta_fixed: np.ndarray | None = None
    noise_kind: str = "gaussian"
    noise_level: float = 1.0
    noise_clip: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise SpecificationError(f"need d >= 1 and n >= 1, got d={self.d}, n={self.n}")
        if self.cov_diag is not None:
            cov = np.asarray(self.cov_diag, dtype=float)
            if cov.shape != (self.d,) or np.any(cov <= 0):
                raise SpecificationError("cov_diag must be a positive vector of length d")
            object.__setattr__(self, "cov_diag", cov)
        if self.theta_kind not in THETA_KINDS:
            raise SpecificationError(f"unknown theta_kind {self.theta_kind!r}")
        if self.theta_kind == "fixed":
            if self.theta_fixed is None or np.shape(self.theta_fixed) != (self.d,):
                raise SpecificationError("theta_fixed must be a length-d vector")
            object.__setattr__(self, "theta_fixed", np.asarray(self.theta_fixed, dtype=float))
        if self.theta_kind == "sparse":
            k = self.theta_support
            if k is None or not 1 <= k <= self.d:
                raise SpecificationError("sparse theta needs 1 <= theta_support <= d")
        if self.theta_norm < 0:
            raise SpecificationError("theta_norm must be nonnegative")
        if self.noise_kind not in NOISE_KINDS:
            raise SpecificationError(f"unknown noise_kind {self.noise_kind!r}")
        if self.noise_level < 0 or self.noise_clip < 0:
            raise SpecificationError("noise parameters must be nonnegative")

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


@dataclass(frozen=True, eq=False)
class RegressionDataset:
    X: np.ndarray
    y_noisy: np.ndarray
    y_clean: np.ndarray
    eps: np.ndarray
    theta_star: np.ndarray | None = None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


def covariance_diag(spec: LinearProblemSpec) -> np.ndarray:
    if spec.cov_diag is None:
        return np.ones(spec.d)
    return spec.cov_diag


def theta_star(spec: LinearProblemSpec) -> np.ndarray:
    """Ground-truth parameter of ``spec`` (a deterministic function of the seed)."""
    if spec.theta_kind == "fixed":
        return spec.theta_fixed.copy()
    rng = child_rng(spec.seed, "theta")
    theta = np.zeros(spec.d)
    if spec.theta_kind == "dense":
        support = np.arange(spec.d)
    else:
        support = np.sort(rng.choice(spec.d, size=spec.theta_support, replace=False))
    direction = rng.standard_normal(support.size)
    norm = np.linalg.norm(direction)
    if norm > 0:
        theta[support] = direction * (spec.theta_norm / norm)
    return theta


def noise_second_moment(spec: LinearProblemSpec) -> float:
    """Exact E[eps^2] for the configured noise law."""
    s = spec.noise_level
    if spec.noise_kind == "uniform":
        return s * s / 3.0
    if spec.noise_clip <= 0 or s == 0:
        return s * s
    # second moment of a Gaussian clipped to [-V, V]
    c = spec.noise_clip / s
    tail = stats.norm.sf(c)
    inner = (1.0 - 2.0 * tail) - 2.0 * c * stats.norm.pdf(c)
    return s * s * inner + 2.0 * spec.noise_clip**2 * tail


def _draw_noise(rng, kind, level, clip, size):
    if level == 0:
        return np.zeros(size)
    if kind == "uniform":
        return rng.uniform(-level, level, size=size)
    eps = level * rng.standard_normal(size)
    if clip > 0:
        np.clip(eps, -clip, clip, out=eps)
    return eps


def gen_linear_dataset(spec: LinearProblemSpec) -> RegressionDataset:
    """Draw ``X`` with rows from N(0, diag(cov)), a ground truth and the noise."""
    X = child_rng(spec.seed, "X").standard_normal((spec.n, spec.d))
    if spec.cov_diag is not None:
        X *= np.sqrt(spec.cov_diag)
    theta = theta_star(spec)
    eps = _draw_noise(child_rng(spec.seed, "eps"), spec.noise_kind, spec.noise_level,
                      spec.noise_clip, spec.n)
    y_clean = X @ theta
    return RegressionDataset(X=X, y_noisy=y_clean + eps, y_clean=y_clean, eps=eps,
                             theta_star=theta)


def split_signal_noise(ds: RegressionDataset):
    """Return ``(bias_dataset, variance_dataset)`` sharing ``ds.X``.

    The bias dataset keeps the clean responses and has zero noise, the
    variance dataset has the noise as its response and zero clean part.
    """
    zeros = np.zeros_like(ds.eps)
    bias = RegressionDataset(X=ds.X, y_noisy=ds.y_clean, y_clean=ds.y_clean, eps=zeros,
                             theta_star=ds.theta_star)
    variance = RegressionDataset(X=ds.X, y_noisy=ds.eps, y_clean=zeros, eps=ds.eps,
                                 theta_star=None if ds.theta_star is None
                                 else np.zeros_like(ds.theta_star))
    return bias, variance


# --------------------------------------------------------------------------
# diagonal recovery
# --------------------------------------------------------------------------


def _check_singular_values(d, r, sigma_star):
    sigma = np.asarray(sigma_star, dtype=float)
    if not 1 <= r <= d:
        raise SpecificationError(f"need 1 <= r <= d, got r={r}, d={d}")
    if sigma.shape != (r,):
        raise SpecificationError("sigma_star must have length r")
    if np.any(sigma <= 0) or np.any(np.diff(sigma) > 0):
        raise SpecificationError("sigma_star must be positive and nonincreasing")
    return sigma


@dataclass(frozen=True, eq=False)
class DiagonalRecoverySpec:
    d: int
    r: int
    sigma_star: tuple
    n: int
    noise_std: float = 1.0
    noise_bound: float = 0.0
    alpha: float = 0.01
    seed: int = 0
    measurement: str = "gaussian"

    def __post_init__(self):
        if self.n < 1:
            raise SpecificationError("n must be positive")
        sigma = _check_singular_values(self.d, self.r, self.sigma_star)
        object.__setattr__(self, "sigma_star", tuple(float(s) for s in sigma))
        if self.noise_std < 0 or self.noise_bound < 0:
            raise SpecificationError("noise parameters must be nonnegative")
        if not self.alpha > 0:
            raise SpecificationError("alpha must be positive")
        if self.measurement not in MEASUREMENT_KINDS:
            raise SpecificationError(f"unknown measurement kind {self.measurement!r}")

    @property
    def sigma_full(self):
        """Length-``d`` target diagonal (zeros beyond the rank)."""
        out = np.zeros(self.d)
        out[: self.r] = self.sigma_star
        return out

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


@dataclass(frozen=True, eq=False)
class DiagonalMeasurements:
    """Per-coordinate measurement streams, arrays of shape ``(d, n)``."""

    a: np.ndarray
    eps: np.ndarray
    y: np.ndarray
    sigma_star: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.a.shape[0]

    @property
    def n(self):
        return self.a.shape[1]


@dataclass(frozen=True)
class CoordinateStats:
    xi: float
    s_b: float
    s_v: float
    s_emp: float
    sigma_star: float = 0.0


def gen_diagonal_measurements(spec: DiagonalRecoverySpec) -> DiagonalMeasurements:
    shape = (spec.d, spec.n)
    rng_a = child_rng(spec.seed, "diag-a")
    if spec.measurement == "gaussian":
        a = rng_a.standard_normal(shape)
    else:
        a = rng_a.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=shape)
    eps = _draw_noise(child_rng(spec.seed, "diag-eps"), "gaussian", spec.noise_std,
                      spec.noise_bound, shape)
    sigma = spec.sigma_full
    y = a * sigma[:, None] + eps
    # y - a*sigma must reproduce eps exactly, which floating point addition
    # does not guarantee; store the noise actually carried by y instead.
    eps = y - a * sigma[:, None]
    meta = {"clipped": spec.noise_bound > 0, "noise_bound": spec.noise_bound,
            "measurement": spec.measurement}
    return DiagonalMeasurements(a=a, eps=eps, y=y, sigma_star=sigma, metadata=meta)


def _stats_arrays(m: DiagonalMeasurements):
    n = m.n
    xi = np.einsum("ij,ij->i", m.a, m.a) / n
    s_b = xi * m.sigma_star
    s_v = np.einsum("ij,ij->i", m.a, m.eps) / n
    return xi, s_b, s_v


def coordinate_stats(m: DiagonalMeasurements, j: int) -> CoordinateStats:
    if not 0 <= j < m.d:
        raise IndexError(f"coordinate {j} out of range for d={m.d}")
    a, eps = m.a[j], m.eps[j]
    xi = float(a @ a) / m.n
    s_b = xi * float(m.sigma_star[j])
    s_v = float(a @ eps) / m.n
    return CoordinateStats(xi=xi, s_b=s_b, s_v=s_v, s_emp=s_b + s_v,
                           sigma_star=float(m.sigma_star[j]))


def all_coordinate_stats(m: DiagonalMeasurements) -> list:
    return [coordinate_stats(m, j) for j in range(m.d)]


# --------------------------------------------------------------------------
# general low-rank recovery
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeneralRecoverySpec:
    """Symmetric rank-``r`` recovery from ``n`` Gaussian ``d x d`` measurements.

    ``loss_scale`` multiplies the mean squared residual. At stepsize 0.1 a
    scale of 1 diverges and 1/2 leaves GD oscillating around the top
    eigen-direction (curvature times stepsize is about 2 when sigma_1 = 5);
    the default 1/4 keeps the training loss monotone.
    """

    d: int
    r: int
    sigma_star: tuple
    n: int
    noise_std: float = 1.0
    alpha: float = 0.01
    stepsize: float = 0.1
    seed: int = 0
    factor_seed: int | None = None
    loss_scale: float = 0.25

    def __post_init__(self):
        if self.n < 1:
            raise SpecificationError("n must be positive")
        sigma = _check_singular_values(self.d, self.r, self.sigma_star)
        object.__setattr__(self, "sigma_star", tuple(float(s) for s in sigma))
        if self.noise_std < 0 or self.alpha < 0:
            raise SpecificationError("noise_std and alpha must be nonnegative")
        if not self.stepsize > 0 or not self.loss_scale > 0:
            raise SpecificationError("stepsize and loss_scale must be positive")

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


@dataclass(frozen=True, eq=False)
class GeneralMeasurements:
    A: np.ndarray  # (n, d, d)
    y: np.ndarray
    y_clean: np.ndarray
    eps: np.ndarray
    x_star: np.ndarray


def general_ground_truth(spec: GeneralRecoverySpec) -> np.ndarray:
    """``V diag(sigma) V^T`` with ``V`` having orthonormal columns."""
    seed = spec.seed if spec.factor_seed is None else spec.factor_seed
    g = child_rng(seed, "factor").standard_normal((spec.d, spec.r))
    v, _ = np.linalg.qr(g)
    return (v * np.asarray(spec.sigma_star)) @ v.T


def gen_general_measurements(spec: GeneralRecoverySpec) -> GeneralMeasurements:
    x_star = general_ground_truth(spec)
    A = child_rng(spec.seed, "gen-A").standard_normal((spec.n, spec.d, spec.d))
    eps = _draw_noise(child_rng(spec.seed, "gen-eps"), "gaussian", spec.noise_std, 0.0, spec.n)
    y_clean = np.einsum("kij,ij->k", A, x_star)
    return GeneralMeasurements(A=A, y=y_clean + eps, y_clean=y_clean, eps=eps, x_star=x_star)
