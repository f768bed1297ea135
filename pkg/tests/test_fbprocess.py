import numpy as np
import pytest

from anderson1d import (
    Disorder,
    PotentialSpec,
    backward_sample,
    draw_fb_sample,
    dtheta_identity_check,
    fb_weight,
    forward_path,
    forward_sample,
    indicator,
    indicator_psi2,
    indicator_sin2,
    lhs_estimate,
    observable_one,
    phase_density,
    phase_step_inv,
    rhs_estimate,
    sample_disorder,
    support_grid,
    sturm_count,
)
from anderson1d.fbprocess import EmpiricalDensity, backward_endpoints, forward_endpoints

SPEC = PotentialSpec.uniform(0, 1)


# ---------------------------------------------------------------------------
# samplers


def test_forward_sample_k0():
    path = forward_sample(SPEC, 0, 0.5, seed=1)
    np.testing.assert_array_equal(path, [0.0])


def test_backward_sample_m0():
    path = backward_sample(SPEC, 0, 0.5, seed=1)
    np.testing.assert_array_equal(path, [np.pi / 2])


def test_forward_sample_deterministic():
    a = forward_sample(SPEC, 30, 0.5, seed=5, samples=4)
    b = forward_sample(SPEC, 30, 0.5, seed=5, samples=4)
    np.testing.assert_array_equal(a, b)


def test_forward_sample_degenerate_matches_rotation():
    tiny = PotentialSpec.uniform(-1e-9, 1e-9)
    path = forward_sample(tiny, 16, 0.0, seed=2)
    oracle = forward_path(Disorder(values=np.zeros(16)), 0.0).phases
    err = np.abs((path - oracle + np.pi) % (2 * np.pi) - np.pi)
    assert err.max() < 1e-6


def test_forward_stationarity():
    # k=200 histogram within TV 0.02 of the k=400 histogram at 1e5 samples
    d200 = EmpiricalDensity.from_phases(
        forward_endpoints(SPEC, 200, 0.5, 100_000, seed=3), bins=64)
    d400 = EmpiricalDensity.from_phases(
        forward_endpoints(SPEC, 400, 0.5, 100_000, seed=4), bins=64)
    assert d200.tv(d400) <= 0.02


def test_backward_inverts_forward_path():
    # applying the inverse map with the same potentials reverses the path
    d = sample_disorder(SPEC, 50, seed=6)
    p = forward_path(d, 0.7)
    phi = p.phases[-1]
    rebuilt = [phi]
    for k in range(50, 0, -1):
        phi = phase_step_inv(phi, d.values[k - 1], 0.7)
        rebuilt.append(phi)
    err = np.abs(np.asarray(rebuilt)[::-1] - p.phases)
    err = np.minimum(err, 2 * np.pi - err)
    assert err.max() <= 1e-10


def test_backward_stationary_is_reflected_forward():
    fwd = EmpiricalDensity.from_phases(
        forward_endpoints(SPEC, 200, 0.5, 100_000, seed=7), bins=64)
    bwd = EmpiricalDensity.from_phases(
        backward_endpoints(SPEC, 200, 0.5, 100_000, seed=8), bins=64)
    assert bwd.tv(fwd.reflected()) <= 0.05


# ---------------------------------------------------------------------------
# gluing weight


def test_fb_weight_examples():
    assert fb_weight(np.pi / 4, np.pi / 4, 0.05) == pytest.approx(5.0)
    w = fb_weight(0.1, 0.1 + np.pi, 0.02)
    assert w == pytest.approx(np.sin(0.1) ** 2 / 0.04)
    assert fb_weight(0.3, 0.3 + 0.2, 0.1) == 0.0


def test_fb_weight_pi_shift_symmetries():
    rng = np.random.default_rng(9)
    for _ in range(200):
        f, b = rng.uniform(0, 2 * np.pi, 2)
        h = rng.uniform(0.01, 0.7)
        w = fb_weight(f, b, h)
        assert fb_weight(f + np.pi, b + np.pi, h) == pytest.approx(w, abs=1e-12)
        assert fb_weight(f, b + np.pi, h) == pytest.approx(w, abs=1e-12)


def test_fb_weight_bandwidth_domain():
    with pytest.raises(ValueError):
        fb_weight(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        fb_weight(0.0, 0.0, 1.0)


def test_draw_fb_sample_fields():
    s = draw_fb_sample(SPEC, 20, 7, 0.5, 0.05, seed=10)
    assert s.k == 7
    assert len(s.fwd_phases) == 8
    assert len(s.bwd_phases) == 14
    assert s.fwd_phases[0] == 0.0
    assert s.bwd_phases[0] == pytest.approx(np.pi / 2)
    assert s.weight >= 0.0
    with pytest.raises(ValueError):
        draw_fb_sample(SPEC, 20, 0, 0.5, 0.05, seed=10)


# ---------------------------------------------------------------------------
# phase density


def test_phase_density_k0_point_mass():
    dens = phase_density(SPEC, 0, 0.5, samples=1000, bins=32, seed=11)
    assert dens.density[0] * (np.pi / 32) == pytest.approx(1.0)


def test_phase_density_mass_one():
    dens = phase_density(SPEC, 50, 0.5, samples=20_000, bins=64, seed=12)
    assert dens.density.sum() * (np.pi / 64) == pytest.approx(1.0, abs=1e-12)


def test_phase_density_bins_validation():
    with pytest.raises(ValueError):
        phase_density(SPEC, 10, 0.5, samples=100, bins=8, seed=0)


def test_phase_stationarity_long_lags():
    d300 = phase_density(SPEC, 300, 0.5, samples=100_000, bins=64, seed=13)
    d600 = phase_density(SPEC, 600, 0.5, samples=100_000, bins=64, seed=14)
    assert d300.tv(d600) <= 0.03


# ---------------------------------------------------------------------------
# spectral (left) side


def test_lhs_constant_equals_n_exactly():
    res = lhs_estimate([observable_one()], SPEC, 12, realizations=50, seed=15)
    assert res[0].estimate == pytest.approx(12.0, abs=1e-12)
    assert res[0].stderr == pytest.approx(0.0, abs=1e-12)


def test_lhs_below_gershgorin_is_zero():
    res = lhs_estimate([indicator(-7.0, -2.5)], SPEC, 10, realizations=30, seed=16)
    assert res[0].estimate == 0.0


def test_lhs_indicator_matches_sturm_counts():
    obs = indicator(0.0, 1.0)
    res = lhs_estimate([obs], SPEC, 40, realizations=400, seed=17)
    counts = []
    for i in range(400):
        d = sample_disorder(SPEC, 40, seed=9000 + i)
        counts.append(sturm_count(d, 1.0) - sturm_count(d, 0.0))
    mean = np.mean(counts)
    se = np.std(counts, ddof=1) / 20 + res[0].stderr
    assert abs(res[0].estimate - mean) <= 4 * se


def test_lhs_psi2_completeness():
    # sum over the spectrum of psi(x)^2 is exactly one per realization
    obs = indicator_psi2(-2.5, 3.5, site=5)
    res = lhs_estimate([obs], SPEC, 10, realizations=40, seed=18)
    assert res[0].estimate == pytest.approx(1.0, abs=1e-9)
    assert res[0].stderr <= 1e-9


def test_lhs_site_validation():
    with pytest.raises(ValueError):
        lhs_estimate([indicator_sin2(0, 1, 20)], SPEC, 10, realizations=5, seed=0)


# ---------------------------------------------------------------------------
# glued (right) side


def test_rhs_constant_recovers_eigenvalue_count():
    obs = observable_one()
    grid = support_grid([obs], SPEC, cells=240)
    report = rhs_estimate([obs], SPEC, 8, grid, samples_per_cell=600,
                          bandwidths=[0.05], seed=19)
    est = report.estimates[0]
    assert abs(est.estimate - 8.0) <= 3 * est.stderr
    assert est.stderr < 0.15


def test_rhs_matches_lhs_small_chain():
    observables = [indicator(0.5, 1.5), indicator_sin2(0.5, 1.5, 3)]
    lhs = lhs_estimate(observables, SPEC, 6, realizations=40_000, seed=20)
    grid = support_grid(observables, SPEC, cells=100)
    rhs = rhs_estimate(observables, SPEC, 6, grid, samples_per_cell=1500,
                       bandwidths=[0.04, 0.02], seed=21)
    for obs, left in zip(observables, lhs):
        right = rhs.get(obs.name, 0.04)
        gap = abs(left.estimate - right.estimate)
        combined = np.hypot(left.stderr, right.stderr)
        assert gap <= 3.5 * combined
    for d in rhs.diffs:
        # common-replica bandwidth sweep: kernel bias resolved below 1 sigma
        assert abs(d.delta) <= max(3 * d.stderr, 0.02)


def test_rhs_psi2_total_weight_near_one():
    # G = 1_[band] * psi(x)^2 integrates to 1 like the spectral side
    obs = indicator_psi2(-2.5, 3.5, site=4)
    grid = support_grid([obs], SPEC, cells=240)
    report = rhs_estimate([obs], SPEC, 8, grid, samples_per_cell=600,
                          bandwidths=[0.05], seed=22)
    est = report.estimates[0]
    assert abs(est.estimate - 1.0) <= max(3 * est.stderr, 0.05)


def test_rhs_grid_invariance():
    obs = indicator(0.5, 1.5)
    fine = rhs_estimate([obs], SPEC, 6, support_grid([obs], SPEC, cells=200),
                        samples_per_cell=800, bandwidths=[0.05], seed=23)
    coarse = rhs_estimate([obs], SPEC, 6, support_grid([obs], SPEC, cells=100),
                          samples_per_cell=1600, bandwidths=[0.05], seed=24)
    a, b = fine.estimates[0], coarse.estimates[0]
    assert abs(a.estimate - b.estimate) <= 3.5 * np.hypot(a.stderr, b.stderr)


def test_rhs_validation():
    obs = observable_one()
    grid = support_grid([obs], SPEC, cells=16)
    with pytest.raises(ValueError):
        rhs_estimate([obs], SPEC, 6, grid, 100, bandwidths=[2.0], seed=0)
    with pytest.raises(ValueError):
        rhs_estimate([obs], SPEC, 6, np.asarray([0.5]), 100, [0.05], seed=0)
    with pytest.raises(ValueError):
        rhs_estimate([obs], SPEC, 6, grid, 1, [0.05], seed=0)


# ---------------------------------------------------------------------------
# derivative identity


def test_dtheta_identity_free_two_site():
    d = Disorder(values=np.zeros(2))
    assert dtheta_identity_check(d, 0.0) <= 1e-6


def test_dtheta_identity_random_instances():
    rng = np.random.default_rng(25)
    worst = 0.0
    for i in range(30):
        d = sample_disorder(SPEC, 100, seed=500 + i)
        lam = rng.uniform(-1.8, 2.8)
        worst = max(worst, dtheta_identity_check(d, lam))
    assert worst <= 1e-4


def test_dtheta_sum_positive():
    rng = np.random.default_rng(26)
    for i in range(20):
        d = sample_disorder(SPEC, 60, seed=700 + i)
        lam = rng.uniform(-2.5, 3.5)
        p = forward_path(d, lam)
        terms = np.exp(2 * (p.log_radii[1:] - p.log_radii[-1])) * np.sin(p.phases[1:]) ** 2
        assert terms.sum() > 0.0
        assert terms[-1] == pytest.approx(np.sin(p.phases[-1]) ** 2)


# ---------------------------------------------------------------------------
# observables


def test_observable_validation():
    with pytest.raises(ValueError):
        indicator(1.0, 1.0)
    with pytest.raises(ValueError):
        indicator_sin2(0.0, 1.0, -2)
    obs = indicator(0.0, 1.0)
    np.testing.assert_array_equal(
        obs.lambda_weight(np.asarray([-0.5, 0.0, 0.5, 1.0, 1.5])),
        [0.0, 1.0, 1.0, 1.0, 0.0],
    )
