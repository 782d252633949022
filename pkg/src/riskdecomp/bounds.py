"""Generalization bound expressions evaluated with explicit constants.

The tilde-O statements hide universal constants; here every bound carries a
``const_mult`` (default 1) so that shapes and comparisons can be checked
against measured risks.
"""

from dataclasses import dataclass, replace
from math import ceil, log, sqrt

import numpy as np

__all__ = [
    "BoundInputs",
    "prop1_bound",
    "linreg_stability_constant",
    "thm1_bound",
    "stability_baseline_bound",
    "leading_order_bounds",
    "thm3_bound",
    "recommended_recovery_settings",
    "rate_probe",
    "rate_probe_steps",
]


@dataclass(frozen=True)
class BoundInputs:
    """Scalar inputs of the bound formulas.

    ``lam`` is the GD stepsize, ``V`` the noise bound, ``B`` / ``B_prime`` the
    sup norms of the variance / standard iterates, ``sigma_w`` the
    sub-Gaussian norm of the normalized signal projection. The recovery
    fields (``d``, ``r``, ``alpha``, ``nu``, ``sigma_star``) feed
    :func:`thm3_bound`.
    """

    n: int
    T: int = 1
    lam: float = 1.0
    delta: float = 0.1
    V: float = 0.0
    B: float = 0.0
    B_prime: float = 0.0
    sigma_w: float = 1.0
    theta_star_energy: float = 0.0
    theta_star_norm_sq: float = 0.0
    d: int = 1
    r: int = 1
    alpha: float = 0.01
    nu: float = 0.0
    sigma_star: tuple = ()
    const_mult: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.T < 0:
            raise ValueError("need n >= 1 and T >= 0")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if min(self.V, self.B, self.B_prime, self.sigma_w, self.lam, self.const_mult) < 0:
            raise ValueError("bound inputs must be nonnegative")
        object.__setattr__(self, "sigma_star", tuple(float(s) for s in self.sigma_star))

    @property
    def sigma_r(self):
        return min(self.sigma_star) if self.sigma_star else 0.0

    def replace(self, **kw):
        return replace(self, **kw)


def prop1_bound(eps_stab, n, delta, const_mult=1.0):
    """Generalization bound of an eps-uniformly-stable algorithm."""
    if eps_stab < 0:
        raise ValueError("eps_stab must be nonnegative")
    return const_mult * (eps_stab * log(n) * log(n / delta) + sqrt(log(1 / delta) / n))


def linreg_stability_constant(T, lam, V, B, n):
    """Uniform stability of GD on the noise component, ``4 T lam (V+B)^2 / n``."""
    return 4.0 * T * lam * (V + B) ** 2 / n


def thm1_bound(b: BoundInputs, log_factors=True):
    """Decomposition bound for GD on overparameterized linear regression.

    ``log_factors=False`` drops the ``log(n) log(n/delta)`` factor of the
    stability term, which is the convention of the baseline bound.
    """
    vb2 = (b.V + b.B) ** 2
    lead = max(1.0, b.theta_star_energy * b.sigma_w**2, vb2) * sqrt(log(4 / b.delta) / b.n)
    opt = b.theta_star_norm_sq / (b.lam * b.T) if b.T > 0 else float("inf")
    stab = b.T * b.lam * vb2 / b.n
    if log_factors:
        stab *= log(b.n) * log(b.n / b.delta)
    return b.const_mult * (lead + opt + stab)


def stability_baseline_bound(b: BoundInputs):
    """Stability bound applied to standard training directly (uses ``B_prime``)."""
    vb2 = (b.V + b.B_prime) ** 2
    return b.const_mult * (max(1.0, vb2) * sqrt(log(2 / b.delta) / (2 * b.n))
                           + b.T * b.lam * vb2 / b.n)


def leading_order_bounds(b: BoundInputs):
    """Dominant large-``T`` terms ``(T lam (V+B)^2 / n, T lam (V+B')^2 / n)``.

    At ``T = n^{3/4}`` and ``lam = 1`` both are of order ``n^{-1/4}``; this is
    the comparison that decides which bound is tighter at large times.
    """
    scale = b.const_mult * b.T * b.lam / b.n
    return scale * (b.V + b.B) ** 2, scale * (b.V + b.B_prime) ** 2


def thm3_bound(b: BoundInputs, t, exp_const=1.0):
    """Excess-risk bound of diagonal recovery under gradient flow at time ``t``."""
    if not t > 0:
        raise ValueError("t must be positive")
    sig = np.asarray(b.sigma_star, dtype=float)
    d, n, a2 = b.d, b.n, b.alpha**2
    fro2 = float(np.sum(sig**2))
    terms = [
        (fro2 + d * b.V**2 + d * a2**2) * sqrt(log(d / b.delta) / n),
        float(np.sum(sig**4 / (sig**2 + a2**2 * np.exp(exp_const * sig * t)))),
        a2 * d / t,
        d * b.V**2 * (t + 1) * log(n) * log(2 * d * n / b.delta) / n,
        d * a2,
        log(1 / a2) ** 2 * b.r * b.nu**2 * log(b.r / b.delta) / n,
    ]
    return b.const_mult * float(sum(terms))


def recommended_recovery_settings(d, n, sigma_r, exp_const=1.0):
    """Initialization ``(d^2 n)^{-1/4}`` and stopping time ``2 log(d n sigma_r) / sigma_r``.

    The stopping time makes ``alpha^4 exp(c sigma_r t)`` exceed
    ``sigma_r^2 n``, so the bias term decays like ``1/n``.
    """
    alpha = (d * d * n) ** -0.25
    t = 2.0 * log(d * n * sigma_r) / (exp_const * sigma_r)
    return alpha, t


def rate_probe(risks):
    """Least-squares slope of ``log ER`` against ``log n``.

    ``risks`` maps sample size to measured excess risk.
    """
    items = sorted(risks.items())
    if len(items) < 4:
        raise ValueError("need at least four sample sizes")
    n = np.array([k for k, _ in items], dtype=float)
    er = np.array([v for _, v in items], dtype=float)
    if np.any(er <= 0) or np.any(n <= 0):
        raise ValueError("risks and sample sizes must be positive")
    slope, _ = np.polyfit(np.log(n), np.log(er), 1)
    return float(slope)


def rate_probe_steps(n):
    """Stopping time ``ceil(sqrt(n))`` used by the consistency probe."""
    return int(ceil(sqrt(n)))
