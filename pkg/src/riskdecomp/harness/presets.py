"""Named experiment presets and the per-trial routines behind them.

A preset is a flat parameter dictionary plus a kind. Every trial returns
long-format rows ``(t, metric, value)``; ``t`` is ``None`` for per-trial
scalars. For rate probes the ``t`` column holds the sample size.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import bounds, decomp, linreg, matrec, nn
from .._seeding import child_seed
from ..problems import (DiagonalRecoverySpec, GeneralRecoverySpec, LinearProblemSpec,
                        gen_diagonal_measurements, gen_linear_dataset, theta_star)
from .config import ConfigError

__all__ = ["Preset", "TrialOutput", "PRESETS", "FAMILY_DEFAULTS", "resolve_params", "run_trial",
           "DECOMP_TIME_METRICS"]

DECOMP_TIME_METRICS = ("er", "ver", "ber", "param_dist", "var_dist", "bias_dist", "ddc_rhs",
                       "ddc_holds", "eq4_rhs")
MC_TIME_METRICS = ("er_se", "ver_se", "ber_se")


@dataclass
class TrialOutput:
    rows: list
    trace: object = None
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Preset:
    name: str
    kind: str
    description: str
    params: dict
    trials: int = 5
    seed_label: str | None = None  # presets naming the same run share seeds

    @property
    def seed_stream(self):
        return self.seed_label or self.name


# --------------------------------------------------------------------------
# parameter parsing helpers
# --------------------------------------------------------------------------


def _floats(text):
    if isinstance(text, (int, float)):
        return (float(text),)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text):
    if isinstance(text, int):
        return (text,)
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _cov(desc, d):
    desc = str(desc)
    if desc == "identity":
        return None
    if desc == "inverse-d":
        return np.full(d, 1.0 / d)
    if desc.startswith("powerlaw:"):
        q = float(desc.split(":", 1)[1])
        return np.arange(1, d + 1, dtype=float) ** -q
    raise ConfigError(f"unknown covariance descriptor {desc!r}")


def _linear_spec(p, seed, n=None, d=None):
    d = int(p["d"] if d is None else d)
    n = int(p["n"] if n is None else n)
    kind = p.get("theta_kind", "dense")
    fixed = None
    if kind == "powerlaw":
        # deterministic alternating-sign profile theta_i^2 = i^{-q}
        q = float(p.get("theta_decay", 1.0))
        i = np.arange(1, d + 1, dtype=float)
        fixed = i ** (-q / 2) * np.where(i % 2 == 1, 1.0, -1.0)
        kind = "fixed"
    support = int(p.get("theta_support", 0)) or None
    return LinearProblemSpec(
        d=d, n=n, cov_diag=_cov(p.get("cov", "identity"), d), theta_kind=kind,
        theta_norm=float(p.get("theta_norm", 1.0)), theta_support=support, theta_fixed=fixed,
        noise_kind=p.get("noise_kind", "gaussian"), noise_level=float(p.get("noise_level", 1.0)),
        noise_clip=float(p.get("noise_clip", 0.0)), seed=seed)


def _optimizer(p):
    name = str(p["optimizer"]).lower()
    lr = float(p["lr"])
    if name == "sgd":
        return nn.SGD(lr)
    if name == "adam":
        return nn.Adam(lr)
    if name == "rprop":
        return nn.Rprop(lr)
    raise ConfigError(f"unknown optimizer {name!r}")


def _arch(p):
    hidden = _ints(p["widths"])
    init = p.get("init_std", 1e-3)
    init_std = None if init == "fan_in" else float(init)
    return nn.MlpArch((int(p["d"]),) + hidden + (1,), init_std=init_std)


# --------------------------------------------------------------------------
# decomposition trials
# --------------------------------------------------------------------------


def _family_run(p, seed):
    family = p["family"]
    if family == "linreg":
        spec = _linear_spec(p, seed)
        cfg = decomp.LinregRunConfig(float(p["stepsize"]), int(p["steps"]), int(p["record_every"]))
    elif family == "general-recovery":
        spec = GeneralRecoverySpec(
            d=int(p["d"]), r=int(p["r"]), sigma_star=_floats(p["sigma_star"]), n=int(p["n"]),
            noise_std=float(p["noise_std"]), alpha=float(p["alpha"]),
            stepsize=float(p["stepsize"]), loss_scale=float(p["loss_scale"]), seed=seed)
        cfg = decomp.GeneralRunConfig(int(p["steps"]), int(p["record_every"]))
    elif family == "diag-recovery":
        spec = DiagonalRecoverySpec(
            d=int(p["d"]), r=int(p["r"]), sigma_star=_floats(p["sigma_star"]), n=int(p["n"]),
            noise_std=float(p["noise_std"]), noise_bound=float(p["noise_bound"]),
            alpha=float(p["alpha"]), seed=seed)
        grid = np.linspace(0.0, float(p["t_max"]), int(p["t_points"]))
        cfg = decomp.DiagRunConfig(t_grid=grid)
    elif family == "mlp":
        spec = _linear_spec(dict(p, theta_kind="sparse"), seed)
        batch = int(p["batch_size"]) or None
        cfg = decomp.MlpRunConfig(_arch(p), _optimizer(p), int(p["epochs"]), batch,
                                  int(p["record_every"]), int(p["n_mc"]))
    else:
        raise ConfigError(f"unknown family {family!r}")
    return spec, decomp.run_decomposition(family, spec, cfg)


def _fitted_c_prime(trace, a):
    gap = np.maximum(trace.param_dist - a * (trace.var_dist + trace.bias_dist), 0.0)
    return float(np.sqrt(trace.n) * np.max(gap))


def _decomposition_trial(p, seed):
    spec, trace = _family_run(p, seed)
    space = "function" if trace.family == "mlp" else "parameter"
    a = float(p["ddc_a"])
    c_prime_fit = _fitted_c_prime(trace, a)
    c_prime = c_prime_fit if p["ddc_c_prime"] == "fit" else float(p["ddc_c_prime"])
    ddc = decomp.DdcParams(a=a, C=float(p["ddc_c"]), C_prime=c_prime, space=space)
    tol = dict(abs_tol=float(p["tol_abs"]), se_mult=float(p["tol_se_mult"]))
    report = decomp.check_ddc(trace, ddc, **tol)
    sharp = decomp.sharpness_for(trace.family, spec)
    rhs, eq4_ok = decomp.eq4_rhs_and_check(trace, ddc, sharp, **tol)
    series = {
        "er": trace.er, "ver": trace.ver, "ber": trace.ber,
        "param_dist": trace.param_dist, "var_dist": trace.var_dist,
        "bias_dist": trace.bias_dist, "ddc_rhs": report.rhs,
        "ddc_holds": report.holds_mask.astype(float), "eq4_rhs": rhs,
    }
    if space == "function":
        series.update(er_se=2 * trace.param_dist * trace.param_dist_se,
                      ver_se=2 * trace.var_dist * trace.var_dist_se,
                      ber_se=2 * trace.bias_dist * trace.bias_dist_se)
    rows = []
    for metric, values in series.items():
        rows.extend((float(t), metric, float(v)) for t, v in zip(trace.times, values))
    scalars = {
        "ddc_holds_all": float(report.holds_everywhere),
        "ddc_max_ratio": report.max_ratio,
        "ddc_c_prime": c_prime,
        "min_a": report.min_feasible_a,
        "c_prime_fit": c_prime_fit,
        "eq4_holds_all": float(eq4_ok),
        "sharpness_exact": float(sharp.exact),
    }
    if trace.family == "linreg":
        scalars.update(B=trace.metadata["B"], B_prime=trace.metadata["B_prime"],
                       additivity_dev=decomp.check_lemma1_additivity(trace))
    if trace.family == "diag-recovery":
        scalars["time_scale"] = trace.metadata["time_scale"]
    rows.extend((None, k, float(v)) for k, v in scalars.items())
    return TrialOutput(rows=rows, trace=trace, info={"ddc": report})


# --------------------------------------------------------------------------
# other kinds
# --------------------------------------------------------------------------


def _landscape_trial(p, seed):
    spec = _linear_spec(p, seed)
    ds = gen_linear_dataset(spec)
    n = spec.n

    def grad_norm(y):
        # gradient of (1/n)||y - X theta||^2 at theta = 0
        return float(np.linalg.norm(-2.0 / n * (ds.X.T @ y)))

    rows = [(None, "grad_norm_standard", grad_norm(ds.y_noisy)),
            (None, "grad_norm_variance", grad_norm(ds.eps)),
            (None, "grad_norm_bias", grad_norm(ds.y_clean)),
            (None, "two_theta_norm", 2.0 * float(np.linalg.norm(ds.theta_star)))]
    return TrialOutput(rows=rows)


def _rate_linreg_trial(p, seed):
    rows = []
    for i, n in enumerate(_ints(p["ns"])):
        d = int(round(float(p["d_ratio"]) * n))
        spec = _linear_spec(p, _sub_seed(seed, i), n=n, d=d)
        ds = gen_linear_dataset(spec)
        steps = bounds.rate_probe_steps(n)
        cfg = linreg.GdConfig(float(p["stepsize"]), steps, record_every=steps)
        tr = linreg.gd_run(ds.X, ds.y_noisy, cfg)
        er = float(linreg.linreg_excess_risk(tr.params[-1], spec, ds.theta_star))
        rows.append((float(n), "er", er))
        rows.append((float(n), "steps", float(steps)))
    er = {int(t): v for t, m, v in rows if m == "er"}
    rows.append((None, "slope", bounds.rate_probe(er)))
    return TrialOutput(rows=rows)


def _sub_seed(seed, index):
    return child_seed(seed, "size", index)


def _rate_diag_trial(p, seed):
    rows = []
    kappa = decomp.reference_time_scale()
    sigma = _floats(p["sigma_star"])
    for i, n in enumerate(_ints(p["ns"])):
        d = int(p["d"])
        alpha, t_rec = bounds.recommended_recovery_settings(d, n, min(sigma),
                                                            float(p["exp_const"]))
        spec = DiagonalRecoverySpec(d=d, r=int(p["r"]), sigma_star=sigma, n=n,
                                    noise_std=float(p["noise_std"]), alpha=alpha,
                                    seed=_sub_seed(seed, i))
        meas = gen_diagonal_measurements(spec)
        # closed forms run on tau = kappa * t; evaluate at tau = t_rec
        flow = matrec.FlowConfig(alpha=alpha, t_grid=np.array([t_rec / kappa]), time_scale=kappa)
        trace = matrec.diag_excess_risks(matrec.diag_flow_trace(meas, flow), spec)
        b = bounds.BoundInputs(n=n, d=d, r=spec.r, alpha=alpha, V=float(p["noise_bound_for_bound"]),
                               nu=float(p["noise_std"]), sigma_star=sigma,
                               delta=float(p["delta"]))
        rows.append((float(n), "er", float(trace.er[-1])))
        rows.append((float(n), "ver", float(trace.ver[-1])))
        rows.append((float(n), "ber", float(trace.ber[-1])))
        rows.append((float(n), "stop_time", t_rec))
        rows.append((float(n), "thm3_bound", bounds.thm3_bound(b, t_rec, float(p["exp_const"]))))
    er = {int(t): v for t, m, v in rows if m == "er"}
    rows.append((None, "slope", bounds.rate_probe(er)))
    rows.append((None, "time_scale", kappa))
    return TrialOutput(rows=rows)


def _highsnr_trial(p, seed):
    spec = _linear_spec(p, seed)
    ds = gen_linear_dataset(spec)
    n = spec.n
    T = int(round(n ** float(p["time_exponent"])))
    lam = float(p["stepsize"])
    cfg = linreg.GdConfig(lam, T, record_every=T)
    std, var = linreg.gd_run_many(ds.X, np.stack([ds.y_noisy, ds.eps], axis=1), cfg)
    b_prime, b = linreg.sup_param_norms(std, var)
    theta = theta_star(spec)
    cov = spec.cov_diag if spec.cov_diag is not None else np.ones(spec.d)
    inputs = bounds.BoundInputs(
        n=n, T=T, lam=lam, delta=float(p["delta"]), V=float(p["noise_level"]), B=b,
        B_prime=b_prime, sigma_w=float(p["sigma_w"]),
        theta_star_energy=float(theta @ (cov * theta)),
        theta_star_norm_sq=float(theta @ theta))
    lead_dec, lead_base = bounds.leading_order_bounds(inputs)
    rows = [
        (None, "B", b), (None, "B_prime", b_prime), (None, "steps", float(T)),
        (None, "thm1_bound", bounds.thm1_bound(inputs)),
        (None, "thm1_bound_nolog", bounds.thm1_bound(inputs, log_factors=False)),
        (None, "baseline_bound", bounds.stability_baseline_bound(inputs)),
        (None, "leading_decomposition", lead_dec),
        (None, "leading_baseline", lead_base),
        (None, "excess_risk", float(linreg.linreg_excess_risk(std.params[-1], spec, theta))),
    ]
    return TrialOutput(rows=rows)


_KIND_RUNNERS = {
    "decomposition": _decomposition_trial,
    "landscape": _landscape_trial,
    "rate-linreg": _rate_linreg_trial,
    "rate-diag": _rate_diag_trial,
    "bounds-highsnr": _highsnr_trial,
}


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------

_TOL = dict(tol_abs=decomp.ABS_TOL, tol_se_mult=decomp.SE_MULT)

FAMILY_DEFAULTS = {
    "linreg": dict(family="linreg", d=500, n=300, cov="identity", theta_kind="dense",
                   theta_norm=2.0, theta_support=0, noise_kind="gaussian", noise_level=2.0,
                   noise_clip=0.0, stepsize=0.01, steps=3000, record_every=10,
                   ddc_a=1.0, ddc_c=0.0, ddc_c_prime=0.0, **_TOL),
    "general-recovery": dict(family="general-recovery", d=20, r=3, sigma_star="5,3,1", n=200,
                             noise_std=1.0, alpha=0.01, stepsize=0.1, loss_scale=0.25,
                             steps=1000, record_every=10, ddc_a=1.0, ddc_c=0.0,
                             ddc_c_prime=8.5, **_TOL),
    "diag-recovery": dict(family="diag-recovery", d=20, r=3, sigma_star="5,3,1", n=200,
                          noise_std=1.0, noise_bound=0.0, alpha=0.01, t_max=6.0,
                          t_points=121, ddc_a=1.0, ddc_c=0.0, ddc_c_prime="fit", **_TOL),
    "mlp": dict(family="mlp", d=30, n=500, cov="identity", theta_support=5, theta_norm=1.0,
                noise_level=0.5, widths="64", init_std=1e-3, optimizer="sgd", lr=1e-2,
                epochs=150, batch_size=32, record_every=5, n_mc=10_000,
                ddc_a=1.3, ddc_c=0.0, ddc_c_prime=0.0, **_TOL),
}


def _decomp(name, family, description, trials=5, seed_label=None, **changes):
    params = dict(FAMILY_DEFAULTS[family])
    unknown = set(changes) - set(params)
    if unknown:
        raise KeyError(f"{name}: unknown parameters {sorted(unknown)}")
    params.update(changes)
    return Preset(name, "decomposition", description, params, trials, seed_label)


_NN_FIG = dict(noise_level=1.5, widths="64,64", init_std="fan_in", lr=1e-3, batch_size=16,
               record_every=10, ddc_a=1.0)

_PRESET_LIST = [
    Preset("fig1-landscape", "landscape",
           "initial gradient norms of standard, variance and bias training at theta = 0",
           dict(d=50, n=2000, cov="identity", theta_kind="dense", theta_norm=2.0,
                noise_kind="gaussian", noise_level=1.5), trials=5),
    _decomp("fig2a-nn", "mlp", "3-layer ReLU net, SGD, linear target: ER meets BER then VER",
            n=500, epochs=300, **_NN_FIG),
    _decomp("fig3-linreg-n300", "linreg", "DDC (1,0,0) for GD linear regression, n=300", n=300),
    _decomp("fig3-linreg-n800", "linreg", "DDC (1,0,0) for GD linear regression, n=800", n=800),
    _decomp("fig3-matrec-n200", "general-recovery", "DDC (1,0,8.5) for matrix recovery, n=200",
            n=200),
    _decomp("fig3-matrec-n600", "general-recovery", "DDC (1,0,8.5) for matrix recovery, n=600",
            n=600),
    _decomp("fig4-nn-n500", "mlp", "function-space DDC (1,0,0) for a 3-layer net, n=500",
            n=500, epochs=300, **_NN_FIG),
    _decomp("fig4-nn-n1500", "mlp", "function-space DDC (1,0,0) for a 3-layer net, n=1500",
            n=1500, epochs=150, **_NN_FIG),
    _decomp("appA-depth-2", "mlp", "depth 2, width 64, SGD", widths="64", ddc_a=1.3),
    _decomp("appA-depth-3", "mlp", "depth 3, width 64, SGD", widths="64,64", ddc_a=2.0),
    _decomp("appA-depth-4", "mlp", "depth 4, width 64, SGD", widths="64,64,64", ddc_a=2.3),
    _decomp("appA-width-64", "mlp", "depth 2, width 64, SGD", widths="64", ddc_a=1.3,
            seed_label="appA-depth-2"),
    _decomp("appA-width-256", "mlp", "depth 2, width 256, SGD", widths="256", ddc_a=1.0),
    _decomp("appA-width-512", "mlp", "depth 2, width 512, SGD", widths="512", ddc_a=1.0),
    _decomp("appA-opt-sgd", "mlp", "depth 2, width 64, SGD", optimizer="sgd", lr=1e-2,
            ddc_a=1.3, seed_label="appA-depth-2"),
    _decomp("appA-opt-adam", "mlp", "depth 2, width 64, Adam", optimizer="adam", lr=2e-3,
            ddc_a=1.2),
    _decomp("appA-opt-rprop", "mlp", "depth 2, width 64, Rprop", optimizer="rprop", lr=5e-4,
            ddc_a=1.1),
    Preset("rate-probe-linreg", "rate-linreg",
           "linear-regression excess risk at T = ceil(sqrt(n)) across sample sizes",
           dict(ns="100,200,400,800,1600,3200", d_ratio=2.0, cov="powerlaw:1",
                theta_kind="powerlaw", theta_decay=1.0, noise_kind="gaussian", noise_level=1.0,
                stepsize=0.5), trials=10),
    Preset("rate-probe-diag", "rate-diag",
           "diagonal recovery at the recommended (alpha, t) across sample sizes",
           dict(ns="200,400,800,1600,3200,6400", d=20, r=3, sigma_star="5,3,1", noise_std=1.0,
                noise_bound_for_bound=1.0, exp_const=1.0, delta=0.1), trials=10),
    Preset("bound-compare-highsnr", "bounds-highsnr",
           "decomposition bound vs stability baseline at high signal-to-noise ratio",
           dict(d=512, n=256, cov="inverse-d", theta_kind="dense", theta_norm=10.0,
                noise_kind="uniform", noise_level=1.0, stepsize=1.0, time_exponent=0.75,
                delta=0.1, sigma_w=1.0), trials=10),
]

PRESETS = {p.name: p for p in _PRESET_LIST}


def resolve_params(preset: Preset | None, overrides: dict):
    """Merge overrides into preset (or family default) parameters; unknown keys are errors."""
    if preset is None:
        family = overrides.get("family")
        if family not in FAMILY_DEFAULTS:
            raise ConfigError(f"unknown family {family!r}")
        base, kind = dict(FAMILY_DEFAULTS[family]), "decomposition"
    else:
        base, kind = dict(preset.params), preset.kind
    unknown = set(overrides) - set(base)
    if unknown:
        raise ConfigError(f"unknown parameters {sorted(unknown)}")
    base.update(overrides)
    return kind, base


def run_trial(kind: str, params: dict, seed: int) -> TrialOutput:
    return _KIND_RUNNERS[kind](params, seed)
