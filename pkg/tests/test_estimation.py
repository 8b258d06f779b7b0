import numpy as np
import pytest

from damlab.estimation import (
    LinkFunction,
    amplitude_damping_pair,
    conventional_povm_error,
    cramer_rao_bound,
    dam_error_formula,
    dam_estimate,
    gad_channel_decomposition_check,
    identity_link,
    mc_dam_error,
    multiparam_error_formula,
    qfi_output_bound_check,
    qfi_state,
    steady_expectation_link,
    table_link,
)
from damlab.models import (
    EXCITED_PROJECTOR,
    gad_model,
    product_gad_model,
    steady_state_bundle,
)
from damlab.operators import devectorize, vectorize
from damlab.pointer import DamRun, default_apparatus

from oracles import random_density

A = EXCITED_PROJECTOR


def gad_run(theta, n, t, sigma=0.1):
    return DamRun(
        model=gad_model(),
        theta=(theta,),
        observable=A,
        t=t,
        n=n,
        apparatus=default_apparatus(sigma),
    )


# ---------------------------------------------------------------- links


def test_identity_link_roundtrip():
    link = identity_link()
    assert link.m == 1
    th = np.array([0.37])
    assert np.array_equal(link.inverse(link.forward(th)), th)
    assert np.array_equal(link.jacobian_inverse(np.array([0.4])), np.eye(1))
    rows = np.array([[0.1], [0.5], [0.9]])
    assert np.array_equal(link.inverse_batch(rows), rows)


def test_table_link_roundtrip():
    thetas = np.linspace(0.0, 1.0, 101)
    link = table_link(thetas, 2.0 - thetas)  # decreasing
    for th in (0.1, 0.33, 0.91):
        back = link.inverse(link.forward(th))
        assert abs(back[0] - th) <= 1e-8
    jac = link.jacobian_inverse(np.array([1.5]))
    assert abs(jac[0, 0] + 1.0) <= 1e-6
    with pytest.raises(ValueError):
        table_link(thetas, np.sin(6 * thetas))
    with pytest.raises(ValueError):
        table_link(thetas[::-1], thetas)


def test_steady_expectation_link_on_gad_is_identity():
    link = steady_expectation_link(gad_model(), A)
    for th in (0.05, 0.3, 0.62, 0.95):
        f = link.forward(np.array([th]))
        assert abs(f[0] - th) <= 1e-9
        assert abs(link.inverse(f)[0] - th) <= 1e-8
    assert abs(link.jacobian_inverse(np.array([0.3]))[0, 0] - 1.0) <= 1e-6


def test_estimate_applies_inverse_and_clamps():
    link = identity_link()
    est = dam_estimate(1.7, 5, link)
    assert est.theta == pytest.approx(0.34) and not est.clamped
    est = dam_estimate(-0.2, 1, link)
    assert est.theta == 0.0 and est.clamped
    est = dam_estimate(1.4, 1, link)
    assert est.theta == 1.0 and est.clamped
    with pytest.raises(ValueError):
        dam_estimate(np.array([0.2, 0.3]), 1, link)


# ------------------------------------------------------------- formulas


def test_error_formula_value():
    b = steady_state_bundle(gad_model(), (0.3,))
    got = dam_error_formula(b, A, identity_link(), 0.1, 100, 1000.0)
    assert got == pytest.approx(np.sqrt(0.052) / 100, rel=1e-12)


def test_error_formula_consistency_over_theta():
    rng = np.random.default_rng(0)
    link = identity_link()
    slink = steady_expectation_link(gad_model(), A)
    for th in rng.uniform(0.05, 0.95, 20):
        b = steady_state_bundle(gad_model(), (th,))
        explicit = np.sqrt(0.1**2 + 2 * th * (1 - th) * 10 / 500.0) / 10
        assert abs(dam_error_formula(b, A, link, 0.1, 10, 500.0) - explicit) <= 1e-12
        assert abs(dam_error_formula(b, A, slink, 0.1, 10, 500.0) - explicit) <= 1e-9


def test_single_parameter_reduction_is_exact():
    b = steady_state_bundle(gad_model(), (0.3,))
    link = identity_link()
    single = dam_error_formula(b, A, link, 0.1, 10, 500.0)
    multi = multiparam_error_formula([b], [A], link, 0.1, 10, 500.0)
    assert single == multi  # bitwise, same code path


def test_multiparam_product_value():
    m2 = product_gad_model(2)
    b = steady_state_bundle(m2, (0.2, 0.6))
    a1 = np.kron(A, np.eye(2))
    a2 = np.kron(np.eye(2), A)
    link = identity_link(domain=((0.0, 1.0), (0.0, 1.0)))
    got = multiparam_error_formula(b, [a1, a2], link, 0.1, 10, 500.0)
    per = [
        np.sqrt(0.1**2 + 2 * th * (1 - th) * 10 / 500.0) / 10 for th in (0.2, 0.6)
    ]
    assert abs(got - np.hypot(*per)) <= 1e-10
    assert got == pytest.approx(0.018973665961010275, rel=1e-12)


def test_singular_jacobian_is_rejected():
    b = steady_state_bundle(gad_model(), (0.3,))
    bad = LinkFunction(
        m=1,
        forward=lambda th: th,
        inverse=lambda a: a,
        jacobian_inverse=lambda a: np.array([[np.inf]]),
        domain=((0.0, 1.0),),
        image=((0.0, 1.0),),
    )
    with pytest.raises(ValueError):
        multiparam_error_formula([b], [A], bad, 0.1, 10, 500.0)
    with pytest.raises(ValueError):
        dam_error_formula(b, A, identity_link(domain=((0, 1), (0, 1))), 0.1, 10, 500.0)


# ---------------------------------------------------------- monte carlo


def test_mc_matches_formula():
    rep = mc_dam_error(gad_run(0.5, 25, 500.0, sigma=0.18), identity_link(), 1000, 21)
    rel = abs(rep.empirical_error - rep.predicted_error) / rep.predicted_error
    assert rel <= 0.07
    assert rep.ci[0] <= rep.predicted_error <= rep.ci[1]
    assert rep.notes["clamp_fraction"] <= 0.01
    # estimator is unbiased within Monte Carlo resolution
    se = rep.predicted_error / np.sqrt(rep.trials)
    assert abs(rep.theta_hat[0] - 0.5) <= 4.0 * se


def test_mc_is_deterministic():
    run = gad_run(0.3, 10, 500.0)
    rep1 = mc_dam_error(run, identity_link(), 200, 42)
    rep2 = mc_dam_error(run, identity_link(), 200, 42)
    assert rep1.empirical_error == rep2.empirical_error
    assert np.array_equal(rep1.theta_hat, rep2.theta_hat)


def test_mc_multiparam_product():
    link = identity_link(domain=((0.0, 1.0), (0.0, 1.0)))
    runs = [gad_run(0.2, 10, 500.0), gad_run(0.6, 10, 500.0)]
    rep = mc_dam_error(runs, link, 2000, 3)
    assert rep.predicted_error == pytest.approx(0.018973665961010275, rel=1e-12)
    rel = abs(rep.empirical_error - rep.predicted_error) / rep.predicted_error
    assert rel <= 0.07


def test_mc_accepts_joint_model_runs():
    # runs may carry the full parameter vector on the joint product model;
    # component j is then read against theta[j]
    from damlab.pointer import ApparatusConfig

    m2 = product_gad_model(2)
    app = ApparatusConfig(
        sigma=0.1, p_halfwidth=30.0, p_points=81, q_halfwidth=0.8, q_points=1024
    )
    a1 = np.kron(A, np.eye(2))
    a2 = np.kron(np.eye(2), A)
    runs = [
        DamRun(model=m2, theta=(0.2, 0.6), observable=a, t=100.0, n=2, apparatus=app)
        for a in (a1, a2)
    ]
    link = identity_link(domain=((0.0, 1.0), (0.0, 1.0)))
    rep = mc_dam_error(runs, link, 200, 3)
    per = [
        np.sqrt(0.1**2 + 2 * th * (1 - th) * 2 / 100.0) / 2 for th in (0.2, 0.6)
    ]
    assert rep.predicted_error == pytest.approx(np.hypot(*per), rel=1e-9)
    se = rep.predicted_error / np.sqrt(rep.trials)
    assert abs(rep.theta_hat[0] - 0.2) <= 5.0 * se
    assert abs(rep.theta_hat[1] - 0.6) <= 5.0 * se


def test_mc_improvement_over_projective_baseline():
    # same resources (N=25 probes per trial): the pointer estimator beats the
    # projective baseline by the predicted ~10.4x factor at T=500
    dam = mc_dam_error(gad_run(0.5, 25, 500.0, sigma=0.18), identity_link(), 1000, 21)
    povm = conventional_povm_error(0.5, 25, 1000, 21)
    formula_ratio = povm.predicted_error / dam.predicted_error
    assert formula_ratio == pytest.approx(10.434798389121028, rel=1e-9)
    mc_ratio = povm.empirical_error / dam.empirical_error
    assert abs(mc_ratio - formula_ratio) / formula_ratio <= 0.15


def test_mc_rejects_heavy_clamping():
    with pytest.raises(ValueError, match="clamped"):
        mc_dam_error(gad_run(0.5, 1, 500.0, sigma=0.3), identity_link(), 500, 9)


def test_mc_input_validation():
    link = identity_link()
    with pytest.raises(ValueError):
        mc_dam_error(gad_run(0.3, 10, 500.0), link, 50, 1)
    with pytest.raises(ValueError):
        mc_dam_error([gad_run(0.3, 10, 500.0), gad_run(0.5, 10, 500.0)], link, 200, 1)
    runs = [gad_run(0.3, 10, 500.0), gad_run(0.5, 20, 500.0)]
    link2 = identity_link(domain=((0.0, 1.0), (0.0, 1.0)))
    with pytest.raises(ValueError):
        mc_dam_error(runs, link2, 200, 1)


def test_povm_baseline():
    rep = conventional_povm_error(0.3, 10**4, 2000, 20260817)
    assert rep.predicted_error == pytest.approx(np.sqrt(0.21 / 10**4), rel=1e-12)
    rel = abs(rep.empirical_error - rep.predicted_error) / rep.predicted_error
    assert rel <= 0.05
    assert rep.t is None
    with pytest.raises(ValueError):
        conventional_povm_error(0.0, 10, 100, 1)
    with pytest.raises(ValueError):
        conventional_povm_error(0.3, 0, 100, 1)


# ------------------------------------------------------------------ qfi


def test_qfi_diagonal_family():
    for th in (0.1, 0.3, 0.5, 0.77):
        f = qfi_state(np.diag([th, 1 - th]), np.diag([1.0, -1.0]))
        assert abs(f - 1.0 / (th * (1 - th))) <= 1e-8


def test_qfi_pure_state_family():
    # |psi(a)> = (cos a, sin a): F = 4 independent of a
    for a in (0.2, 0.7):
        psi = np.array([np.cos(a), np.sin(a)])
        dpsi = np.array([-np.sin(a), np.cos(a)])
        rho = np.outer(psi, psi)
        drho = np.outer(dpsi, psi) + np.outer(psi, dpsi)
        assert abs(qfi_state(rho, drho) - 4.0) <= 1e-10


def test_qfi_warns_on_rank_deficient_weight():
    with pytest.warns(RuntimeWarning, match="rank-deficient"):
        qfi_state(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))


def test_qfi_rejects_non_hermitian():
    with pytest.raises(ValueError):
        qfi_state(np.array([[0.5, 0.6], [0.0, 0.5]]), np.eye(2))


def test_cramer_rao_bound():
    assert cramer_rao_bound(4.0) == 0.5
    with pytest.raises(ValueError):
        cramer_rao_bound(0.0)


def test_amplitude_damping_endpoints():
    lam0, lam1 = amplitude_damping_pair(60.0)
    rho = random_density(np.random.default_rng(2), 2)
    to0 = devectorize(lam0 @ vectorize(rho))
    to1 = devectorize(lam1 @ vectorize(rho))
    assert np.abs(to0 - np.diag([1.0, 0.0])).max() <= 1e-12
    assert np.abs(to1 - np.diag([0.0, 1.0])).max() <= 1e-12
    lam0, lam1 = amplitude_damping_pair(0.0)
    assert np.abs(lam0 - np.eye(4)).max() <= 1e-14
    assert np.abs(lam1 - np.eye(4)).max() <= 1e-14


def test_channel_decomposition_defect():
    for th in (0.1, 0.5, 0.9):
        for t in (0.1, 1.0, 5.0):
            assert gad_channel_decomposition_check(th, t) <= 1e-10
    with pytest.raises(ValueError):
        gad_channel_decomposition_check(1.0, 1.0)
    with pytest.raises(ValueError):
        gad_channel_decomposition_check(0.3, -1.0)


def test_output_bound_random_probes():
    rng = np.random.default_rng(55)
    probes = [random_density(rng, 2) for _ in range(20)]
    rep = qfi_output_bound_check(0.3, 1.0, probes)
    assert rep.passed
    assert rep.bound == pytest.approx(1.0 / 0.21, rel=1e-12)
    assert max(rep.qfi) <= rep.bound + 1e-4
    assert max(rep.fd_disagreement) <= 1e-5
    assert not any(rep.flagged)


def test_output_bound_product_probes():
    rng = np.random.default_rng(56)
    probes = [
        np.kron(random_density(rng, 2), random_density(rng, 2)) for _ in range(5)
    ]
    rep = qfi_output_bound_check(0.3, 1.0, probes, copies=2)
    assert rep.passed
    assert rep.bound == pytest.approx(2.0 / 0.21, rel=1e-12)


def test_output_bound_saturates_at_long_times():
    # at t >> 1/gap every output is the steady state, whose family QFI equals
    # the bound exactly
    rng = np.random.default_rng(57)
    probes = [random_density(rng, 2) for _ in range(3)]
    rep = qfi_output_bound_check(0.3, 30.0, probes)
    assert rep.passed
    for f in rep.qfi:
        assert abs(f - rep.bound) <= 1e-3


def test_output_bound_validation():
    with pytest.raises(ValueError):
        qfi_output_bound_check(0.3, 1.0, [np.eye(2)], copies=3)
    with pytest.raises(ValueError):
        qfi_output_bound_check(0.3, 1.0, [np.eye(2)])  # trace 2, not a state


def test_output_bound_zero_time_carries_no_information():
    rng = np.random.default_rng(58)
    rep = qfi_output_bound_check(0.3, 0.0, [random_density(rng, 2)])
    assert rep.passed
    assert abs(rep.qfi[0]) <= 1e-10


def test_gad_bloch_z_offset():
    # evolving the maximally mixed state gives r_z = (2 theta - 1)(1 - e^-t)
    from damlab.operators import mat_exp

    for th in (0.2, 0.7):
        for t in (0.3, 2.0):
            lam = mat_exp(gad_model().liouvillian([th]), t)
            out = devectorize(lam @ vectorize(np.eye(2) / 2.0))
            rz = float(np.real(out[0, 0] - out[1, 1]))
            assert abs(rz - (2 * th - 1) * (1 - np.exp(-t))) <= 1e-12


def test_saturation_point_grows_with_t():
    # delta theta * N = sqrt(sigma^2 + 2 theta(1-theta) N/T) increases in N;
    # the N at which it doubles from sigma (the end of the useful region)
    # stretches proportionally to T
    link = identity_link()
    b = steady_state_bundle(gad_model(), (0.3,))

    def scaled_errors(t, ns):
        return np.array([dam_error_formula(b, A, link, 0.1, n, t) * n for n in ns])

    for t in (200.0, 400.0):
        ns = np.arange(1, 10 * int(t) + 1, 13)
        assert np.all(np.diff(scaled_errors(t, ns)) > 0)
    ns = np.arange(1, 60)
    cross200 = ns[np.argmax(scaled_errors(200.0, ns) > 0.2)]
    cross400 = ns[np.argmax(scaled_errors(400.0, ns) > 0.2)]
    assert cross200 == 15 and cross400 == 29
    assert 1.5 <= cross400 / cross200 <= 2.5
