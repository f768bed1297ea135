"""End-to-end studies: eigenvector tails, temperature profile, critical
scaling and the single-eigenvector figure paths.

Each experiment draws whole ensembles in vectorized lanes (one lane per
realization or per eigenpair) and consumes gamma/sigma/DOS interpolation
tables from :mod:`anderson1d.asymptotics`.
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .asymptotics import ParamTable, build_param_table
from .engine import derive_rng
from .prufer import Disorder, PotentialSpec
from .spectrum import (
    _profile_from_log_amp,
    bisect_theta_targets,
    eigenvalues_periodic,
    eigenvectors_cols,
    periodic_profile,
    residual_inf,
    sturm_bisect_targets,
)

__all__ = [
    "TailEnsemble",
    "tails_experiment",
    "tail_increment_diagnostics",
    "TemperatureResult",
    "temperature_profile",
    "critical_preset",
    "FigureData",
    "figure_data",
]


# ---------------------------------------------------------------------------
# eigenvector tails


@dataclass(frozen=True)
class TailEnsemble:
    """Per-sample eigenvalue, rescaled profile, center and fluctuations.

    ``q`` rows hold q(s) = (log r at site floor(N s)) / N with max 0;
    ``fluct`` rows hold sqrt(N) (q(s) + gamma(lam) |s - center|).
    """

    s_grid: np.ndarray
    lam: np.ndarray
    center: np.ndarray
    q: np.ndarray
    fluct: np.ndarray
    slope: np.ndarray
    n_sites: int
    skipped: int


def _fit_tent_slopes(q: np.ndarray, centers_idx: np.ndarray,
                     min_dist: int = 0) -> np.ndarray:
    """Per-lane least-squares slope of q_k against |k - center| (site units).

    Sites closer than ``min_dist`` to the center are excluded: the peak is
    rounded by the max selection and would bias the slope upward.
    """
    n_lanes, n_pts = q.shape
    k = np.arange(n_pts)[None, :]
    d = np.abs(k - centers_idx[:, None]).astype(float)
    w = (d >= min_dist).astype(float)
    wsum = w.sum(axis=1, keepdims=True)
    d_c = d - (w * d).sum(axis=1, keepdims=True) / wsum
    q_c = q - (w * q).sum(axis=1, keepdims=True) / wsum
    return (w * d_c * q_c).sum(axis=1) / (w * d_c * d_c).sum(axis=1)


def tails_experiment(spec: PotentialSpec, n: int, realizations: int,
                     s_grid: np.ndarray | None = None, seed: int = 0,
                     table: ParamTable | None = None,
                     residual_tol: float = 1e-8,
                     chunk: int = 2000) -> TailEnsemble:
    """Draw one uniformly-chosen eigenpair per realization and rescale it.

    Only the selected eigenvalue is solved for (bisection straight to the
    m-th lift target), so the cost per realization is one eigenpair, not a
    full spectrum.  Realizations whose reconstructed eigenvector fails the
    recurrence residual check are skipped and counted.
    """
    if n < 200:
        raise ValueError("n must be >= 200")
    if s_grid is None:
        s_grid = np.linspace(0.0, 1.0, 21)
    s_grid = np.asarray(s_grid, dtype=float)
    if table is None:
        table = build_param_table(spec, seed=seed + 101)

    rng = derive_rng(seed, 6)
    lam_out, cen_out, q_out, fl_out, sl_out = [], [], [], [], []
    skipped = 0
    site_idx = np.minimum((s_grid * n).astype(int), n)

    left = realizations
    while left > 0:
        m = min(chunk, left)
        left -= m
        v = spec.draw(rng, (m, n))
        j = rng.integers(0, n, size=m)  # 0-based eigenvalue index
        targets = 0.5 * np.pi + np.pi * j
        vt = np.ascontiguousarray(v.T)
        lo = v.min() - 3.0
        hi = v.max() + 3.0
        lams = bisect_theta_targets(vt, targets, lo, hi, tol=1e-13)
        u, log_amp = eigenvectors_cols(vt, lams)
        res = residual_inf(vt, lams, u)
        good = res <= residual_tol
        skipped += int(m - good.sum())
        if not good.any():
            continue
        q_full = _profile_from_log_amp(log_amp[good])
        centers = np.argmax(q_full, axis=1)
        slopes = _fit_tent_slopes(q_full, centers, min_dist=max(10, n // 25))
        lam_g = lams[good]
        gam = table.gamma_at(lam_g)
        q_s = q_full[:, site_idx] / n
        x_hat = centers / n
        fl = np.sqrt(n) * (q_s + gam[:, None] * np.abs(s_grid[None, :] - x_hat[:, None]))
        lam_out.append(lam_g)
        cen_out.append(x_hat)
        q_out.append(q_s)
        fl_out.append(fl)
        sl_out.append(-slopes)  # tent decays; report the positive rate

    return TailEnsemble(
        s_grid=s_grid,
        lam=np.concatenate(lam_out),
        center=np.concatenate(cen_out),
        q=np.vstack(q_out),
        fluct=np.vstack(fl_out),
        slope=np.concatenate(sl_out),
        n_sites=n,
        skipped=skipped,
    )


def tail_increment_diagnostics(ens: TailEnsemble, table: ParamTable,
                               guard: int = 1):
    """Pooled skew/kurtosis of standardized fluctuation increments.

    Increments whose s-segment lies within ``guard`` grid cells of the
    localization center are dropped (the tent kink and the center
    estimation error live there); the rest are standardized by
    sigma(lam) sqrt(ds) and pooled.
    """
    from scipy import stats as sps

    ds = np.diff(ens.s_grid)
    inc = np.diff(ens.fluct, axis=1)
    sig = table.sigma_at(ens.lam)[:, None]
    z = inc / (sig * np.sqrt(ds)[None, :])
    mids = 0.5 * (ens.s_grid[:-1] + ens.s_grid[1:])[None, :]
    width = float(ds.mean())
    keep = np.abs(mids - ens.center[:, None]) > (guard + 0.5) * width
    z = z[keep]
    return float(sps.skew(z)), float(sps.kurtosis(z)), int(z.size)


# ---------------------------------------------------------------------------
# temperature profile


@dataclass(frozen=True)
class TemperatureResult:
    x_grid: np.ndarray
    measured: np.ndarray
    stderr: np.ndarray
    predicted: np.ndarray
    t0: float
    tn: float
    realizations: int


def predicted_temperature(table: ParamTable, n: int, t0: float, tn: float,
                          x_grid: np.ndarray) -> np.ndarray:
    """T0 + (TN - T0) * integral of Phi(2 gamma x' / sigma) against the DOS,
    with x' = (x - N/2)/sqrt(N)."""
    if table.dos is None:
        raise ValueError("temperature prediction needs a table with DOS")
    x_grid = np.asarray(x_grid, dtype=float)
    xp = (x_grid - n / 2.0) / np.sqrt(n)
    w = table.dos.copy()
    w = w / w.sum()
    arg = 2.0 * table.gamma[None, :] * xp[:, None] / table.sigma[None, :]
    return t0 + (tn - t0) * (ndtr(arg) * w[None, :]).sum(axis=1)


def temperature_profile(spec: PotentialSpec, n: int, t0: float, tn: float,
                        realizations: int, x_grid: np.ndarray | None = None,
                        seed: int = 0, table: ParamTable | None = None,
                        chunk: int = 10) -> TemperatureResult:
    """Bath-weighted local spectral weights against the asymptotic step.

    Measured value per realization and site x:
    sum over eigenpairs of |psi(x)|^2 (T0 w0 + TN wN) with
    w0 = psi(1)^2 / (psi(1)^2 + psi(N)^2); the first and last interior
    sites stand in for the bath contacts.
    """
    if x_grid is None:
        sq = np.sqrt(n)
        x_grid = np.unique(np.clip(
            np.round(n / 2.0 + sq * np.linspace(-4, 4, 17)).astype(int), 1, n))
    x_grid = np.asarray(x_grid, dtype=int)
    if table is None:
        table = build_param_table(spec, seed=seed + 103, with_dos=True)

    rng = derive_rng(seed, 7)
    ranks_one = np.arange(1, n + 1)
    per_real = []
    left = realizations
    while left > 0:
        m = min(chunk, left)
        left -= m
        v = spec.draw(rng, (m, n))
        vt_lanes = np.ascontiguousarray(np.repeat(v, n, axis=0).T)
        ranks = np.tile(ranks_one, m)
        lams = sturm_bisect_targets(vt_lanes, ranks, v.min() - 3.0, v.max() + 3.0,
                                    tol=1e-11)
        u, _ = eigenvectors_cols(vt_lanes, lams)
        w_left = u[:, 0] ** 2
        w_right = u[:, n - 1] ** 2
        bath = (t0 * w_left + tn * w_right) / (w_left + w_right)
        px = u[:, x_grid - 1] ** 2
        t_vals = (px * bath[:, None]).reshape(m, n, x_grid.size).sum(axis=1)
        per_real.append(t_vals)

    t_all = np.vstack(per_real)
    measured = t_all.mean(axis=0)
    stderr = t_all.std(axis=0, ddof=1) / np.sqrt(t_all.shape[0])
    predicted = predicted_temperature(table, n, t0, tn, x_grid)
    return TemperatureResult(x_grid=x_grid, measured=measured, stderr=stderr,
                             predicted=predicted, t0=float(t0), tn=float(tn),
                             realizations=realizations)


# ---------------------------------------------------------------------------
# critical scaling preset


def critical_preset(n: int, base_spec: PotentialSpec, realizations: int,
                    seed: int = 0, s_grid: np.ndarray | None = None,
                    table: ParamTable | None = None) -> TailEnsemble:
    """Tails ensemble with the potential scaled by 1/sqrt(N).

    In this scaling the decay length is comparable to the system size, so
    profiles are dominated by their Brownian part; the preset exists for
    qualitative comparison with the critical-regime limit shape.
    """
    if n < 400:
        raise ValueError("n must be >= 400")
    scaled = base_spec.scaled(1.0 / np.sqrt(n))
    if table is None:
        table = build_param_table(scaled, seed=seed + 105)
    return tails_experiment(scaled, n, realizations, s_grid=s_grid, seed=seed,
                            table=table)


# ---------------------------------------------------------------------------
# figure paths


@dataclass(frozen=True)
class FigureData:
    """One log-amplitude path with a fitted tent, ready for CSV."""

    kind: str
    sites: np.ndarray
    log_norm: np.ndarray
    fit: np.ndarray
    lam: float
    slope: float
    r_squared: float
    boundary: str


def _tent_fit(profile: np.ndarray, dist: np.ndarray):
    d_c = dist - dist.mean()
    q_c = profile - profile.mean()
    slope = float((d_c * q_c).sum() / (d_c * d_c).sum())
    intercept = float(profile.mean() - slope * dist.mean())
    fit = intercept + slope * dist
    ss_res = float(((profile - fit) ** 2).sum())
    ss_tot = float(q_c.dot(q_c))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return fit, slope, r2


_FIGURE_DEFAULTS = {
    "fig1": dict(dist="uniform", lo=0.0, hi=1.0, n=1000, boundary="dirichlet"),
    "fig2": dict(dist="uniform", lo=0.0, hi=0.3, n=3000, boundary="periodic"),
}


def figure_data(kind: str, seed: int = 0, n: int | None = None,
                spec: PotentialSpec | None = None,
                grid: int = 6000) -> FigureData:
    """Log-amplitude path of one eigenvector plus the tent fit.

    fig1: Dirichlet chain, one eigenvalue drawn uniformly from the
    spectrum, tent in |site - center|.  fig2: periodic ring, one located
    trace root, tent in the cyclic site distance.
    """
    if kind not in _FIGURE_DEFAULTS:
        raise ValueError(f"kind must be one of {sorted(_FIGURE_DEFAULTS)}")
    defaults = _FIGURE_DEFAULTS[kind]
    if spec is None:
        spec = PotentialSpec.uniform(defaults["lo"], defaults["hi"])
    n = int(n if n is not None else defaults["n"])
    rng = derive_rng(seed, 8)
    v = spec.draw(rng, n)
    d = Disorder(values=v, seed=seed, spec=spec)
    sites = np.arange(n + 1)

    if defaults["boundary"] == "dirichlet":
        j = int(rng.integers(0, n))
        lam = float(bisect_theta_targets(v, np.asarray([0.5 * np.pi + np.pi * j]),
                                         v.min() - 3.0, v.max() + 3.0, tol=1e-13)[0])
        _, log_amp = eigenvectors_cols(v, np.asarray([lam]))
        profile = _profile_from_log_amp(log_amp)[0]
        center = int(np.argmax(profile))
        dist = np.abs(sites - center).astype(float)
    else:
        spect = eigenvalues_periodic(d, grid=grid)
        if spect.eigenvalues.size == 0:
            raise RuntimeError("no periodic trace roots located; refine the grid")
        lam = float(rng.choice(spect.eigenvalues))
        profile = periodic_profile(d, lam)
        center = int(np.argmax(profile))
        raw = np.abs(sites - center).astype(float)
        dist = np.minimum(raw, n - raw)

    fit, slope, r2 = _tent_fit(profile, dist)
    return FigureData(kind=kind, sites=sites, log_norm=profile, fit=fit,
                      lam=lam, slope=slope, r_squared=r2,
                      boundary=defaults["boundary"])
