import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riskdecomp import matrec
from riskdecomp.matrec import (Branch, FlowConfig, calibrate_time_scale, closed_form_u2,
                               closed_form_u2_many, diag_excess_risks, diag_flow_trace,
                               general_recovery_gd, ode_oracle, rk4_flow, select_branch)
from riskdecomp.problems import (CoordinateStats, DiagonalRecoverySpec, GeneralRecoverySpec,
                                 all_coordinate_stats, gen_diagonal_measurements,
                                 gen_general_measurements)

KAPPA = matrec.FLOW_TIME_SCALE


def _spec(**kw):
    base = dict(d=20, r=3, sigma_star=(5.0, 3.0, 1.0), n=200, noise_std=1.0, alpha=0.01, seed=0)
    base.update(kw)
    return DiagonalRecoverySpec(**base)


def _stats(seed=0, **kw):
    return all_coordinate_stats(gen_diagonal_measurements(_spec(seed=seed, **kw)))


POS = CoordinateStats(xi=1.1, s_b=2.2, s_v=0.05, s_emp=2.25, sigma_star=2.0)
NEG = CoordinateStats(xi=0.9, s_b=0.0, s_v=-0.08, s_emp=-0.08, sigma_star=0.0)


def test_branch_selection():
    assert select_branch(POS, "standard") == (Branch.SIGNAL_POSITIVE, 2.25)
    assert select_branch(POS, "bias") == (Branch.BIAS_POSITIVE, 2.2)
    assert select_branch(POS, "variance") == (Branch.NOISE_POSITIVE, 0.05)
    assert select_branch(NEG, "variance") == (Branch.NOISE_NEGATIVE, -0.08)
    assert select_branch(NEG, "standard") == (Branch.SIGNAL_NEGATIVE, -0.08)
    assert select_branch(NEG, "bias") == (Branch.ZERO_SIGNAL_BIAS, 0.0)
    zero = CoordinateStats(xi=1.0, s_b=0.0, s_v=0.0, s_emp=0.0)
    assert select_branch(zero, "variance")[0] is Branch.ZERO_TARGET
    with pytest.raises(ValueError):
        select_branch(POS, "other")


@given(s=st.floats(-10, 10), xi=st.floats(0.1, 3.0), alpha=st.floats(1e-4, 1.0))
def test_every_branch_starts_at_alpha_squared(s, xi, alpha):
    w = closed_form_u2_many(s, xi, alpha, [0.0])
    assert w[0] == pytest.approx(alpha**2, rel=1e-12)


@given(s=st.floats(-10, 10).filter(lambda v: abs(v) > 1e-6), xi=st.floats(0.1, 3.0),
       alpha=st.floats(1e-3, 0.5))
def test_closed_forms_are_monotone_and_bounded(s, xi, alpha):
    w = closed_form_u2_many(s, xi, alpha, np.linspace(0, 20, 200))
    assert np.all(w >= 0)
    limit = max(s, 0.0) / xi
    # each branch moves monotonically from alpha^2 toward its fixed point
    d = np.diff(w)
    assert np.all(d >= -1e-15) or np.all(d <= 1e-15)
    assert np.all(w <= max(alpha**2, limit) * (1 + 1e-12))


def test_positive_branch_limit():
    cfg = FlowConfig(alpha=0.01, t_grid=[0.0], time_scale=KAPPA)
    w = closed_form_u2(POS, "standard", cfg, 20.0)
    assert w == pytest.approx(POS.s_emp / POS.xi, rel=1e-6)
    ode = ode_oracle(POS, "standard", cfg, t_grid=[20.0])
    assert ode[0] == pytest.approx(POS.s_emp / POS.xi, rel=1e-6)


def test_negative_noise_branch_decays_like_oracle():
    grid = np.linspace(0, 10, 41)
    cfg = FlowConfig(alpha=0.3, t_grid=grid, time_scale=KAPPA)
    w = closed_form_u2(NEG, "variance", cfg, grid)
    assert np.all(np.diff(w) < 0) and w[-1] < 1e-2 * w[0]
    np.testing.assert_allclose(w, ode_oracle(NEG, "variance", cfg), rtol=1e-6)


def test_zero_signal_bias_branch_matches_oracle():
    cfg = FlowConfig(alpha=0.5, t_grid=np.linspace(0, 5, 11), time_scale=KAPPA)
    np.testing.assert_allclose(closed_form_u2(NEG, "bias", cfg, cfg.t_grid),
                               ode_oracle(NEG, "bias", cfg), rtol=1e-7)


def test_zero_alpha_is_a_fixed_point():
    cfg = FlowConfig(alpha=0.0, t_grid=[0.0, 1.0, 2.0])
    assert np.all(ode_oracle(POS, "standard", cfg) == 0)
    assert np.all(closed_form_u2(POS, "standard", cfg, cfg.t_grid) == 0)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        closed_form_u2(POS, "standard", FlowConfig(0.1, [0.0]), -1.0)
    with pytest.raises(ValueError):
        FlowConfig(0.1, [1.0, 0.5])


def test_rk4_has_fourth_order_convergence():
    s, xi, alpha, grid = 2.0, 1.0, 0.1, np.array([1.0])
    ref = rk4_flow(s, xi, alpha, grid, 1e-5)
    errs = [abs(rk4_flow(s, xi, alpha, grid, h)[0] - ref[0]) for h in (0.02, 0.01)]
    assert 8.0 <= errs[0] / errs[1] <= 32.0


def test_oracle_raises_when_tolerance_unreachable():
    with pytest.raises(matrec.NumericalError):
        matrec.ode_oracle_many(2.0, 1.0, 0.1, [0.0, 1.0], tol=1e-30, max_halvings=2)


def test_calibration_identity_when_clock_is_shared():
    # oracle run with gradient scale 1/4 has the closed-form clock itself
    cfg = FlowConfig(alpha=0.01, t_grid=np.linspace(0, 2, 11))
    fit = calibrate_time_scale(_stats()[:3], cfg, gradient_scale=0.25)
    assert fit.kappa == pytest.approx(1.0, abs=1e-6)


def test_calibration_recovers_flow_clock():
    cfg = FlowConfig(alpha=0.01, t_grid=np.linspace(0, 2, 21))
    fit = calibrate_time_scale(_stats(), cfg)
    assert fit.kappa == pytest.approx(KAPPA, rel=1e-6)
    assert fit.residual < 1e-6


def test_calibration_is_consistent_across_coordinates():
    stats = _stats(seed=4)
    cfg = FlowConfig(alpha=0.01, t_grid=np.linspace(0, 2, 21))
    kappas = [calibrate_time_scale([s_], cfg, modes=("bias",), tol=1e-8).kappa
              for s_ in stats[:3]]
    assert max(kappas) / min(kappas) - 1 < 0.01


def test_calibration_transfers_between_coordinates():
    stats = _stats(seed=2)
    cfg = FlowConfig(alpha=0.01, t_grid=np.linspace(0, 3, 31))
    kappa = calibrate_time_scale([stats[0]], cfg, modes=("bias",), tol=1e-9).kappa
    scaled = FlowConfig(alpha=0.01, t_grid=cfg.t_grid, time_scale=kappa)
    pred = closed_form_u2(stats[2], "bias", scaled, cfg.t_grid)
    ode = ode_oracle(stats[2], "bias", cfg, tol=1e-9)
    assert np.max(np.abs(pred / ode - 1)) <= 1e-3


def test_calibration_needs_positive_branch():
    with pytest.raises(ValueError):
        calibrate_time_scale([NEG], FlowConfig(0.01, [0.0, 1.0]), modes=("variance",))


def test_closed_forms_match_oracle_on_every_coordinate_and_mode():
    grid = np.linspace(0, 4, 41)
    stats = _stats(seed=1)
    s = np.array([[select_branch(x, m)[1] for x in stats] for m in matrec.MODES])
    xi = np.array([x.xi for x in stats])
    ode = matrec.ode_oracle_many(s, xi[None, :], 0.01, grid)
    cf = closed_form_u2_many(s, xi[None, :], 0.01, KAPPA * grid)
    assert np.max(np.abs(cf / ode - 1)) <= 1e-4


def test_flow_trace_and_risks():
    spec = _spec()
    m = gen_diagonal_measurements(spec)
    grid = np.linspace(0, 6, 61)
    tr = diag_flow_trace(m, FlowConfig(spec.alpha, grid, KAPPA))
    for arr in (tr.u2, tr.u2_b, tr.u2_v):
        assert arr.shape == (61, 20) and np.all(arr >= 0)
        np.testing.assert_allclose(arr[0], spec.alpha**2)
    dt = diag_excess_risks(tr, spec)
    assert dt.ver[0] == pytest.approx(20 * spec.alpha**4)
    np.testing.assert_allclose(dt.param_dist**2, dt.er)


def test_risk_vanishes_at_truth():
    spec = _spec()
    sigma = spec.sigma_full
    tr = matrec.SquaredFactorTrace(times=np.array([0.0]), u2=sigma[None], u2_b=sigma[None],
                                   u2_v=np.zeros((1, 20)))
    dt = diag_excess_risks(tr, spec)
    assert dt.er[0] == 0 and dt.ber[0] == 0 and dt.ver[0] == 0


def test_excess_risk_equals_population_loss_gap():
    # population loss of diag(w) on a fresh measurement minus the noise floor
    spec = _spec(d=4, r=2, sigma_star=(2.0, 1.0), n=50)
    w = np.array([1.7, 0.9, 0.2, 0.05])
    tr = matrec.SquaredFactorTrace(times=np.array([0.0]), u2=w[None], u2_b=w[None],
                                   u2_v=w[None])
    er = diag_excess_risks(tr, spec).er[0]
    rng = np.random.default_rng(0)
    a = rng.standard_normal((100_000, 4))
    eps = rng.standard_normal((100_000, 4))
    y = a * spec.sigma_full + eps
    sq = np.sum((y - a * w) ** 2, axis=1) - np.sum(eps**2, axis=1)
    assert abs(sq.mean() - er) <= 3 * sq.std(ddof=1) / np.sqrt(sq.size)


# -- general recovery ---------------------------------------------------------


def _general(n=200, **kw):
    spec = GeneralRecoverySpec(d=20, r=3, sigma_star=(5, 3, 1), n=n, seed=3, **kw)
    return spec, gen_general_measurements(spec)


def test_general_zero_init_never_moves():
    spec, m = _general(alpha=0.0)
    gr = general_recovery_gd(spec, m, 20, keep_matrices=True)
    assert np.all(gr.matrices == 0)


def test_general_training_loss_nonincreasing():
    spec, m = _general()
    gr = general_recovery_gd(spec, m, 400)
    assert np.all(np.diff(gr.loss, axis=0) <= 1e-12 * np.abs(gr.loss[:-1]))


def test_general_single_step_matches_direct_gradient():
    spec, m = _general(n=30)
    gr = general_recovery_gd(spec, m, 1, keep_matrices=True)
    U = spec.alpha * np.eye(20)
    X = U @ U.T
    resid = m.y - np.einsum("kij,ij->k", m.A, X)
    grad = -spec.loss_scale * 2 / 30 * np.einsum("k,kij->ij", resid, m.A + m.A.transpose(0, 2, 1)) @ U
    U1 = U - spec.stepsize * grad
    np.testing.assert_allclose(gr.matrices[-1, 0], U1 @ U1.T, rtol=1e-12, atol=1e-16)


def test_general_divergence_is_detected():
    spec, m = _general(loss_scale=1.0)
    with pytest.raises(matrec.DivergenceError):
        general_recovery_gd(spec, m, 300)


def test_general_bias_run_recovers_truth():
    spec, m = _general(n=600)
    gr = general_recovery_gd(spec, m, 1000)
    assert gr.dist_bias[-1] < 0.05 * gr.dist_bias[0]


def test_offset_ddc_holds_on_most_seeded_trials():
    # distance form of the decomposition condition with C' = 8.5, 100 trials
    n, hits = 200, 0
    for i in range(100):
        spec = GeneralRecoverySpec(d=20, r=3, sigma_star=(5, 3, 1), n=n, seed=1000 + i)
        gr = general_recovery_gd(spec, gen_general_measurements(spec), 1000, record_every=10)
        hits += np.all(gr.dist_std <= gr.dist_bias + gr.norm_var + 8.5 / np.sqrt(n))
    assert hits >= 95, f"offset DDC held on {hits}/100 trials"
