import warnings

import numpy as np
import pytest
from scipy import stats as sps

from anderson1d import (
    PotentialSpec,
    build_param_table,
    critical_preset,
    figure_data,
    lyapunov,
    tails_experiment,
    temperature_profile,
)
from anderson1d.experiments import predicted_temperature, tail_increment_diagnostics

SPEC = PotentialSpec.uniform(0, 1)


@pytest.fixture(scope="module")
def table():
    return build_param_table(SPEC, n_lambda=60, steps=200_000, batches=32,
                             seed=100, with_dos=True, dos_n=600,
                             dos_realizations=20)


# ---------------------------------------------------------------------------
# tails


def test_tails_basic_invariants(table):
    ens = tails_experiment(SPEC, 250, 300, seed=1, table=table)
    assert ens.skipped == 0
    assert np.all(ens.q.max(axis=1) <= 1e-12)
    assert np.all((ens.center >= 0) & (ens.center <= 1))
    assert ens.lam.size == 300
    # eigenvalues live inside Gershgorin
    assert ens.lam.min() >= -2.0 and ens.lam.max() <= 3.0


def test_tails_center_roughly_uniform(table):
    ens = tails_experiment(SPEC, 300, 800, seed=2, table=table)
    ks = sps.kstest(ens.center, "uniform").statistic
    assert ks <= 0.08


def test_tails_slope_tracks_gamma(table):
    ens = tails_experiment(SPEC, 400, 800, seed=3, table=table)
    gam = table.gamma_at(ens.lam)
    # strongly localized eigenvalues resolve the tent well individually
    strong = gam > 0.05
    ratio = ens.slope[strong].mean() / gam[strong].mean()
    assert abs(ratio - 1.0) <= 0.1


def test_tails_fluct_diagnostics(table):
    ens = tails_experiment(SPEC, 400, 800, seed=4, table=table)
    skew, kurt, n = tail_increment_diagnostics(ens, table)
    assert n > 5000
    assert abs(skew) <= 0.3
    assert abs(kurt) <= 0.7


def test_tails_validation():
    with pytest.raises(ValueError):
        tails_experiment(SPEC, 100, 10, seed=0)


# ---------------------------------------------------------------------------
# temperature profile


def test_temperature_exact_when_baths_equal(table):
    res = temperature_profile(SPEC, 200, 1.0, 1.0, 3, seed=5, table=table)
    np.testing.assert_allclose(res.measured, 1.0, atol=1e-8)


def test_temperature_midpoint_symmetry(table):
    # site reversal swaps the baths, so the midpoint sits at (T0+TN)/2
    res = temperature_profile(SPEC, 200, 1.0, 2.0, 150, seed=6, table=table,
                              x_grid=np.asarray([100]))
    assert abs(res.measured[0] - 1.5) <= 4 * res.stderr[0] + 0.02


def test_temperature_prediction_monotone(table):
    xs = np.arange(40, 161, 10)
    pred = predicted_temperature(table, 200, 1.0, 2.0, xs)
    assert np.all(np.diff(pred) > 0)
    assert np.all((pred >= 1.0) & (pred <= 2.0))


def test_temperature_bounds(table):
    res = temperature_profile(SPEC, 200, 1.0, 2.0, 40, seed=7, table=table)
    assert res.measured.min() >= 1.0 - 1e-9
    assert res.measured.max() <= 2.0 + 1e-9


# ---------------------------------------------------------------------------
# critical preset


def test_critical_preset_shape_and_scaling():
    base = PotentialSpec.gaussian(0, 1)
    ens = critical_preset(400, base, 1000, seed=8)
    assert np.all(ens.q.max(axis=1) <= 1e-12)
    ks = sps.kstest(ens.center, "uniform").statistic
    assert ks <= 0.1
    slope_n = ens.slope.mean() * 400
    assert 0.5 <= slope_n <= 10.0


def test_critical_validation():
    with pytest.raises(ValueError):
        critical_preset(200, SPEC, 10)


# ---------------------------------------------------------------------------
# figure paths


def test_figure_fig1_tent_quality():
    fig = figure_data("fig1", seed=3)
    assert fig.sites.size == 1001
    assert fig.log_norm.size == 1001 and fig.fit.size == 1001
    assert fig.log_norm.max() == pytest.approx(0.0, abs=1e-12)
    assert fig.r_squared >= 0.8
    assert fig.slope < 0


def test_figure_fig2_ring_spread():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fig = figure_data("fig2", seed=3)
    assert fig.sites.size == 3001
    spread = fig.log_norm.max() - fig.log_norm.min()
    est = lyapunov(PotentialSpec.uniform(0, 0.3), fig.lam,
                   steps=400_000, batches=64, seed=5)
    expected = est.gamma * 3000 / 2
    assert expected / 2 <= spread <= 2 * expected


def test_figure_kind_validation():
    with pytest.raises(ValueError):
        figure_data("fig3")
